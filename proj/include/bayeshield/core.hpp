#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bayeshield {

using Index = Eigen::Index;
//! n x d, one sample per row. Row-major so a sample is a contiguous span.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

//! Raised whenever a value violates a documented invariant.
class ValidationError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

inline std::span<const double> row_span(const Matrix& m, Index i)
{
  return { m.data() + i * m.cols(), static_cast<std::size_t>(m.cols()) };
}

inline std::span<double> row_span(Matrix& m, Index i)
{
  return { m.data() + i * m.cols(), static_cast<std::size_t>(m.cols()) };
}

//! Finite labeled sample {(x_i, y_i)} with dense class indices 0..K-1.
class LabeledDataset
{
public:
  LabeledDataset(Matrix points, std::vector<int> labels, int num_classes);

  const Matrix& points() const { return points_; }
  const std::vector<int>& labels() const { return labels_; }
  int num_classes() const { return num_classes_; }
  Index size() const { return points_.rows(); }
  Index dim() const { return points_.cols(); }

  std::span<const double> point(Index i) const { return row_span(points_, i); }
  int label(Index i) const { return labels_[static_cast<std::size_t>(i)]; }

  //! Same labels and class count, new feature matrix (validated).
  LabeledDataset with_points(Matrix points) const;

private:
  Matrix points_;
  std::vector<int> labels_;
  int num_classes_;
};

enum class KernelKind
{
  gaussian
};

//! Symmetric similarity s(a, b); only the Gaussian kind exists.
class SimilarityKernel
{
public:
  static SimilarityKernel gaussian(double bandwidth);

  KernelKind kind() const { return kind_; }
  double bandwidth() const { return bandwidth_; }

  double operator()(std::span<const double> a, std::span<const double> b) const;

private:
  SimilarityKernel(KernelKind kind, double bandwidth);

  KernelKind kind_;
  double bandwidth_;
};

enum class NormOrder
{
  l2,
  linf
};

std::string to_string(NormOrder norm);
NormOrder parse_norm_order(const std::string& text);

//! L^p ball of radius eps per sample, plus the indices pinned to zero
//! perturbation (the clean part of a mixed dataset).
class PerturbationConstraint
{
public:
  PerturbationConstraint(NormOrder norm, double radius, std::vector<Index> frozen = {});

  NormOrder norm() const { return norm_; }
  double radius() const { return radius_; }
  //! Sorted, duplicate-free.
  const std::vector<Index>& frozen() const { return frozen_; }
  bool is_frozen(Index i) const;

  //! Checks the frozen set against a dataset of n samples: every index in
  //! range and at least one index left free.
  void validate_for(Index n) const;

private:
  NormOrder norm_;
  double radius_;
  std::vector<Index> frozen_;
};

//! n x K leave-one-out posteriors; each row is a probability vector.
class PosteriorMatrix
{
public:
  PosteriorMatrix(Matrix values, std::vector<Index> uniform_fallback_rows = {});

  const Matrix& values() const { return values_; }
  //! Rows whose similarity denominator underflowed to 0 and were replaced by
  //! the uniform distribution.
  const std::vector<Index>& uniform_fallback_rows() const { return fallback_rows_; }
  bool has_warnings() const { return !fallback_rows_.empty(); }

private:
  Matrix values_;
  std::vector<Index> fallback_rows_;
};

enum class TieBreak
{
  lowest_class_index
};

struct PgaConfig
{
  double step_size = 0.0;
  int max_iterations = 100;
  TieBreak tie_break = TieBreak::lowest_class_index;
  bool record_trace = true;
  //! Allowed per-step decrease of the trace before a step-size diagnostic
  //! is emitted.
  double monotone_slack = 1e-9;
  unsigned threads = 1;

  //! eta = 0.1 * eps, T = 100.
  static PgaConfig defaults_for(double radius);
  void validate() const;
};

struct PgaResult
{
  LabeledDataset perturbed;
  Matrix deltas;
  //! Bayes-error estimate per iterate, index 0 is the unperturbed data.
  //! Holds T + 1 values when record_trace is set, otherwise only the first
  //! and last.
  std::vector<double> trace;
  std::vector<std::string> warnings;
};

double l2_norm(std::span<const double> v);
double linf_norm(std::span<const double> v);
double norm_of(std::span<const double> v, NormOrder norm);

bool all_finite(std::span<const double> v);

} // namespace bayeshield
