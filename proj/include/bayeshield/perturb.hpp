#pragma once

#include "bayeshield/core.hpp"
#include "bayeshield/embed.hpp"

#include <functional>
#include <span>
#include <vector>

namespace bayeshield {

struct GradientReport
{
  //! Current Bayes-error estimate.
  double objective = 0.0;
  //! d(objective)/d(x_i), one row per sample, in the input space.
  Matrix gradients;
  //! Class whose posterior was differentiated in each row.
  std::vector<int> argmax_classes;
  //! Posteriors the gradient was linearised at (feature space).
  Matrix posteriors;
  //! Rows that fell back to the uniform posterior; they contribute no
  //! gradient.
  std::vector<Index> uniform_fallback_rows;
};

//! Analytic gradient of the leave-one-out Bayes-error estimate.
//!
//! With p_i = N_i(c_i) / D_i and A_ij = ([y_j = c_i] - p_i) / D_i, every
//! pair contributes through both rows it appears in:
//!
//!   d beta / d x_m = 1/(n sigma^2) * sum_{j != m} (A_mj + A_jm) s_mj (x_m - x_j)
//!
//! c_i is fixed per row before differentiating (lowest index on ties).
GradientReport objective_and_gradient(const LabeledDataset& data,
                                      const SimilarityKernel& kernel,
                                      TieBreak tie_break = TieBreak::lowest_class_index,
                                      unsigned threads = 1);

//! Same objective with similarity evaluated on m(x); the gradient is pulled
//! back to the input space through the embedding's Jacobian.
GradientReport objective_and_gradient(const LabeledDataset& data,
                                      const SimilarityKernel& kernel,
                                      const EmbeddingMap& embedding,
                                      TieBreak tie_break = TieBreak::lowest_class_index,
                                      unsigned threads = 1);

//! Euclidean projection onto {delta : ||delta||_p <= radius}.
Vector project(std::span<const double> delta, NormOrder norm, double radius);
Vector project(std::span<const double> delta, const PerturbationConstraint& constraint);

//! Called after every iteration with the iteration number (1-based) and the
//! current per-sample perturbations.
using IterationHook = std::function<void(int, const Matrix&)>;

//! Projected gradient ascent on the Bayes-error estimate. Starts from the
//! unperturbed data, keeps frozen rows at exactly zero perturbation and
//! projects every other row's cumulative perturbation onto the constraint
//! ball after each step.
PgaResult pga_maximize(const LabeledDataset& data,
                       const SimilarityKernel& kernel,
                       const PerturbationConstraint& constraint,
                       const PgaConfig& config,
                       const EmbeddingMap* embedding = nullptr,
                       const IterationHook& hook = {});

} // namespace bayeshield
