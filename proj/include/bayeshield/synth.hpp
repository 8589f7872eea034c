#pragma once

#include "bayeshield/core.hpp"
#include "bayeshield/embed.hpp"

#include <array>
#include <cstdint>

namespace bayeshield {

//! Normal(mean, stddev^2) restricted to [lower, upper] and renormalised.
struct TruncatedNormalComponent
{
  double mean = 0.0;
  double stddev = 1.0;
  double lower = -1.0;
  double upper = 1.0;
};

struct TruncatedNormalPairSpec
{
  std::array<TruncatedNormalComponent, 2> classes;
  std::array<double, 2> priors{ 0.5, 0.5 };

  //! Throws ValidationError for stddev <= 0, lower >= upper, negative
  //! priors or priors not summing to 1.
  void validate() const;
};

//! Wide class 0 = N(0, 2^2) on [-5, 5]; narrow class 1 = N(1.9555, 0.5^2) on
//! [0.4555, 3.4555]; equal priors. The offset of class 1 was root-found so
//! that the analytic Bayes error is 0.1427.
TruncatedNormalPairSpec canonical_truncated_normal_pair();

double truncated_normal_pdf(const TruncatedNormalComponent& component, double x);

//! Integral of min(pi_0 f_0, pi_1 f_1) by composite Simpson. The support is
//! split at the truncation endpoints and at every density crossing, so each
//! panel integrates a smooth function. `quadrature_points` is the total
//! number of Simpson intervals, shared among panels by length.
double analytic_bayes_error(const TruncatedNormalPairSpec& spec, int quadrature_points = 4096);

//! Each row draws its class (uniform < pi_0 gives class 0), then its value by
//! inverse-CDF sampling of that class's truncated normal. Output is 1-D, K=2.
LabeledDataset sample_truncated_normal_pair(const TruncatedNormalPairSpec& spec,
                                            Index n,
                                            std::uint64_t seed);

//! Two interleaving half circles. The first n/2 rows are class 0 at
//! (cos t, sin t), the rest class 1 at (1 - cos t, 0.5 - sin t), with t on an
//! even grid over [0, pi]. Gaussian noise is added per coordinate, row by row.
LabeledDataset generate_moons(Index n, double noise, std::uint64_t seed);

//! Settings under which the moons example reproduces the published numbers
//! (initial estimate near 0.143 and a lift of roughly 1.3). Bandwidth and
//! step budget were calibrated because the original values are not known.
struct MoonsSetup
{
  Index n = 200;
  double noise = 0.1;
  double sigma = 0.42;
  double step_size = 0.15;
  int iterations = 100;
  NormOrder norm = NormOrder::linf;
};

//! Central differences of the Bayes-error estimate with respect to every
//! coordinate. The quotient divides by the step actually taken,
//! (x + h) - (x - h), rather than by 2h.
Matrix finite_difference_gradient(const LabeledDataset& data,
                                  const SimilarityKernel& kernel,
                                  const EmbeddingMap* embedding,
                                  double h = 1e-5);

} // namespace bayeshield
