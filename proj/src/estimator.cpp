#include "bayeshield/estimator.hpp"

#include "kernel_rows.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace bayeshield {

double gaussian_similarity(std::span<const double> a,
                           std::span<const double> b,
                           double sigma)
{
  return SimilarityKernel::gaussian(sigma)(a, b);
}

PosteriorMatrix estimate_posteriors(const LabeledDataset& data,
                                    const SimilarityKernel& kernel,
                                    unsigned threads)
{
  const Index n = data.size();
  const int num_classes = data.num_classes();
  Matrix values(n, num_classes);
  std::vector<char> fallback(static_cast<std::size_t>(n), 0);

  detail::parallel_for(n, threads, [&](Index i) {
    thread_local std::vector<double> sims;
    sims.resize(static_cast<std::size_t>(n));
    detail::similarity_row(data.points(), i, kernel.bandwidth(), sims);
    const double denom =
      detail::posterior_row(sims, data.labels(), i, num_classes, row_span(values, i));
    fallback[static_cast<std::size_t>(i)] = denom > 0.0 ? 0 : 1;
  });

  std::vector<Index> fallback_rows;
  for (Index i = 0; i < n; ++i) {
    if (fallback[static_cast<std::size_t>(i)]) {
      fallback_rows.push_back(i);
    }
  }
  return PosteriorMatrix(std::move(values), std::move(fallback_rows));
}

BayesErrorEstimate bayes_error_from_posteriors(const PosteriorMatrix& posteriors)
{
  const Matrix& values = posteriors.values();
  BayesErrorEstimate estimate;
  estimate.per_sample_max_posterior.resize(static_cast<std::size_t>(values.rows()));
  double sum = 0.0;
  for (Index i = 0; i < values.rows(); ++i) {
    const auto row = row_span(values, i);
    const double best = row[static_cast<std::size_t>(detail::argmax_lowest(row))];
    estimate.per_sample_max_posterior[static_cast<std::size_t>(i)] = best;
    sum += best;
  }
  estimate.value = 1.0 - sum / static_cast<double>(values.rows());
  estimate.uniform_fallback_rows = posteriors.uniform_fallback_rows();
  return estimate;
}

BayesErrorEstimate estimate_bayes_error(const LabeledDataset& data,
                                        const SimilarityKernel& kernel,
                                        unsigned threads)
{
  return bayes_error_from_posteriors(estimate_posteriors(data, kernel, threads));
}

std::vector<double> naive_posterior(const LabeledDataset& data, std::span<const double> query)
{
  if (static_cast<Index>(query.size()) != data.dim()) {
    throw ValidationError("query dimension does not match the dataset");
  }
  std::vector<double> counts(static_cast<std::size_t>(data.num_classes()), 0.0);
  double matches = 0.0;
  for (Index i = 0; i < data.size(); ++i) {
    const auto x = data.point(i);
    if (std::equal(x.begin(), x.end(), query.begin())) {
      counts[static_cast<std::size_t>(data.label(i))] += 1.0;
      matches += 1.0;
    }
  }
  if (matches == 0.0) {
    throw UndefinedPosteriorError(
      "frequency posterior undefined: no sample equals the query point");
  }
  for (double& c : counts) {
    c /= matches;
  }
  return counts;
}

double median_heuristic_bandwidth(const Matrix& points)
{
  const Index n = points.rows();
  if (n < 2) {
    throw ValidationError("median heuristic needs at least 2 points");
  }
  std::vector<double> distances;
  distances.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      distances.push_back(
        std::sqrt(detail::squared_distance(row_span(points, i), row_span(points, j))));
    }
  }
  const std::size_t m = distances.size();
  const std::size_t upper = m / 2;
  std::nth_element(distances.begin(), distances.begin() + static_cast<std::ptrdiff_t>(upper),
                   distances.end());
  double median = distances[upper];
  if (m % 2 == 0) {
    const double lower =
      *std::max_element(distances.begin(), distances.begin() + static_cast<std::ptrdiff_t>(upper));
    median = 0.5 * (lower + median);
  }
  if (!(median > 0.0)) {
    throw ValidationError(
      "median pairwise distance is zero (points identical): bandwidth undefined");
  }
  return median;
}

double median_heuristic_bandwidth(const LabeledDataset& data)
{
  return median_heuristic_bandwidth(data.points());
}

std::string to_string(BandwidthRule rule)
{
  return rule == BandwidthRule::loo_cv ? "loo-cv" : "median";
}

BandwidthRule parse_bandwidth_rule(const std::string& text)
{
  if (text == "loo-cv") {
    return BandwidthRule::loo_cv;
  }
  if (text == "median") {
    return BandwidthRule::median;
  }
  throw ValidationError("unknown bandwidth rule '" + text + "' (expected loo-cv or median)");
}

CrossValidationResult loo_cv_bandwidth(const LabeledDataset& data, unsigned threads)
{
  constexpr int grid = kCvGridSize;
  const double anchor = median_heuristic_bandwidth(data);
  const Index n = data.size();
  const auto& labels = data.labels();
  const double uniform = 1.0 / data.num_classes();

  // Sigma halves its square every two grid steps, so
  // s_{k+2} = s_k^2 and only the first two candidates need an exp().
  const double sigma0 = anchor;
  const double sigma1 = anchor * std::pow(2.0, -0.25);
  constexpr double kSubnormalGuard = 1e-154;

  Matrix row_scores(n, grid);
  detail::parallel_for(n, threads, [&](Index i) {
    std::array<double, grid> same{};
    std::array<double, grid> total{};
    const auto xi = data.point(i);
    for (Index j = 0; j < n; ++j) {
      if (j == i) {
        continue;
      }
      const double d2 = detail::squared_distance(xi, data.point(j));
      double even = std::exp(-d2 / (2.0 * sigma0 * sigma0));
      double odd = std::exp(-d2 / (2.0 * sigma1 * sigma1));
      const bool match = labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(i)];
      for (int k = 0; k < grid; ++k) {
        double& s = (k % 2 == 0) ? even : odd;
        total[static_cast<std::size_t>(k)] += s;
        if (match) {
          same[static_cast<std::size_t>(k)] += s;
        }
        s = s < kSubnormalGuard ? 0.0 : s * s;
      }
    }
    for (int k = 0; k < grid; ++k) {
      const double t = total[static_cast<std::size_t>(k)];
      const double p = t > 0.0 ? same[static_cast<std::size_t>(k)] / t : uniform;
      row_scores(i, k) = -std::log(std::max(p, std::numeric_limits<double>::min()));
    }
  });

  CrossValidationResult result;
  result.scores.assign(grid, 0.0);
  for (Index i = 0; i < n; ++i) {
    for (int k = 0; k < grid; ++k) {
      result.scores[static_cast<std::size_t>(k)] += row_scores(i, k);
    }
  }
  result.grid_index = 0;
  for (int k = 1; k < grid; ++k) {
    if (result.scores[static_cast<std::size_t>(k)] <
        result.scores[static_cast<std::size_t>(result.grid_index)]) {
      result.grid_index = k;
    }
  }
  result.bandwidth = anchor * std::pow(2.0, -0.25 * result.grid_index);
  return result;
}

double select_bandwidth(const LabeledDataset& data, BandwidthRule rule, unsigned threads)
{
  switch (rule) {
    case BandwidthRule::median:
      return median_heuristic_bandwidth(data);
    case BandwidthRule::loo_cv:
      return loo_cv_bandwidth(data, threads).bandwidth;
  }
  throw ValidationError("unknown bandwidth rule");
}

} // namespace bayeshield
