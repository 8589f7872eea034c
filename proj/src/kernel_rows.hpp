#pragma once

// Row-level building blocks shared by the estimator and the gradient code.
// Both paths go through these functions so the objective they compute is
// bit-identical.

#include "bayeshield/core.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace bayeshield::detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b)
{
  double d2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    d2 += diff * diff;
  }
  return d2;
}

inline double gaussian_from_squared(double d2, double two_sigma_sq)
{
  return std::exp(-d2 / two_sigma_sq);
}

//! out[j] = s(x_i, x_j) for j != i, out[i] = 0.
inline void similarity_row(const Matrix& points,
                           Index i,
                           double sigma,
                           std::span<double> out)
{
  const double two_sigma_sq = 2.0 * sigma * sigma;
  const auto xi = row_span(points, i);
  for (Index j = 0; j < points.rows(); ++j) {
    out[static_cast<std::size_t>(j)] =
      j == i ? 0.0 : gaussian_from_squared(squared_distance(xi, row_span(points, j)), two_sigma_sq);
  }
}

//! Leave-one-out posterior of row i from its similarity row. Returns the
//! denominator sum_{k != i} s_ik; when it is zero the row is uniform.
inline double posterior_row(std::span<const double> sims,
                            const std::vector<int>& labels,
                            Index i,
                            int num_classes,
                            std::span<double> posterior)
{
  std::fill(posterior.begin(), posterior.end(), 0.0);
  double denom = 0.0;
  for (std::size_t j = 0; j < sims.size(); ++j) {
    if (static_cast<Index>(j) == i) {
      continue;
    }
    posterior[static_cast<std::size_t>(labels[j])] += sims[j];
    denom += sims[j];
  }
  if (denom > 0.0) {
    for (double& p : posterior) {
      p /= denom;
    }
  } else {
    const double uniform = 1.0 / num_classes;
    std::fill(posterior.begin(), posterior.end(), uniform);
  }
  return denom;
}

//! Index of the row maximum; ties go to the lowest class index.
inline int argmax_lowest(std::span<const double> row)
{
  int best = 0;
  for (std::size_t c = 1; c < row.size(); ++c) {
    if (row[c] > row[static_cast<std::size_t>(best)]) {
      best = static_cast<int>(c);
    }
  }
  return best;
}

} // namespace bayeshield::detail
