#pragma once

#include "bayeshield/core.hpp"
#include "bayeshield/random.hpp"

#include <filesystem>
#include <string>

namespace bayeshield::testing {

inline std::filesystem::path fixture(const std::string& name)
{
  return std::filesystem::path(BAYESHIELD_FIXTURE_DIR) / name;
}

//! Gaussian blobs: n points in d dimensions, labels drawn uniformly from K
//! classes, class c shifted by `spread` * c along every axis.
inline LabeledDataset random_dataset(Rng& rng, Index n, Index d, int k, double spread = 1.0)
{
  Matrix points(n, d);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const int c = static_cast<int>(rng.uniform() * k);
    labels[static_cast<std::size_t>(i)] = c;
    for (Index j = 0; j < d; ++j) {
      points(i, j) = rng.normal() + spread * c;
    }
  }
  return LabeledDataset(std::move(points), std::move(labels), k);
}

inline Matrix column(std::initializer_list<double> values)
{
  Matrix m(static_cast<Index>(values.size()), 1);
  Index i = 0;
  for (double v : values) {
    m(i++, 0) = v;
  }
  return m;
}

} // namespace bayeshield::testing
