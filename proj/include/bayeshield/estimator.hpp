#pragma once

#include "bayeshield/core.hpp"

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bayeshield {

struct BayesErrorEstimate
{
  //! 1 - mean_i max_c p(c | x_i)
  double value = 0.0;
  std::vector<double> per_sample_max_posterior;
  std::vector<Index> uniform_fallback_rows;

  bool has_warnings() const { return !uniform_fallback_rows.empty(); }
};

//! exp(-||a - b||^2 / (2 sigma^2))
double gaussian_similarity(std::span<const double> a,
                           std::span<const double> b,
                           double sigma);

//! Leave-one-out kernel posterior averaging: row i, column c is the
//! similarity-weighted share of class c among all samples j != i.
//! Rows whose denominator underflows to zero become uniform and are listed
//! in the result's fallback rows.
//!
//! Rows are independent; `threads` > 1 splits them across workers. Each row
//! is reduced in ascending index order, so the output does not depend on
//! the thread count. `threads` == 0 uses the hardware concurrency.
PosteriorMatrix estimate_posteriors(const LabeledDataset& data,
                                    const SimilarityKernel& kernel,
                                    unsigned threads = 1);

BayesErrorEstimate estimate_bayes_error(const LabeledDataset& data,
                                        const SimilarityKernel& kernel,
                                        unsigned threads = 1);

//! Max over each row (ties resolved to the lowest class index).
BayesErrorEstimate bayes_error_from_posteriors(const PosteriorMatrix& posteriors);

class UndefinedPosteriorError : public std::domain_error
{
public:
  using std::domain_error::domain_error;
};

//! Exact-match label frequencies among samples equal to `query`. Throws
//! UndefinedPosteriorError when no sample matches, which is the usual case
//! for continuous features.
std::vector<double> naive_posterior(const LabeledDataset& data,
                                    std::span<const double> query);

//! Median of the n(n-1)/2 pairwise Euclidean distances.
double median_heuristic_bandwidth(const Matrix& points);
double median_heuristic_bandwidth(const LabeledDataset& data);

enum class BandwidthRule
{
  loo_cv,
  median
};

std::string to_string(BandwidthRule rule);
BandwidthRule parse_bandwidth_rule(const std::string& text);

//! Number of candidates on the cross-validation grid
//! sigma_k = median * 2^(-k/4), k = 0 .. kCvGridSize - 1.
inline constexpr int kCvGridSize = 33;

struct CrossValidationResult
{
  double bandwidth = 0.0;
  int grid_index = 0;
  //! Leave-one-out negative log-likelihood of the observed labels per
  //! grid candidate.
  std::vector<double> scores;
};

//! Picks sigma minimising the leave-one-out negative log-likelihood of the
//! labels under the kernel posterior, over a geometric grid anchored at the
//! median heuristic. Ties go to the larger bandwidth.
CrossValidationResult loo_cv_bandwidth(const LabeledDataset& data, unsigned threads = 1);

double select_bandwidth(const LabeledDataset& data, BandwidthRule rule, unsigned threads = 1);

} // namespace bayeshield
