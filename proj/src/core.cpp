#include "bayeshield/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace bayeshield {

LabeledDataset::LabeledDataset(Matrix points, std::vector<int> labels, int num_classes)
  : points_(std::move(points))
  , labels_(std::move(labels))
  , num_classes_(num_classes)
{
  if (points_.rows() < 2) {
    throw ValidationError("dataset needs at least 2 samples, got " +
                          std::to_string(points_.rows()));
  }
  if (points_.cols() < 1) {
    throw ValidationError("dataset needs at least 1 feature");
  }
  if (num_classes_ < 1) {
    throw ValidationError("num_classes must be positive, got " +
                          std::to_string(num_classes_));
  }
  if (static_cast<Index>(labels_.size()) != points_.rows()) {
    std::ostringstream msg;
    msg << "label count " << labels_.size() << " does not match sample count "
        << points_.rows();
    throw ValidationError(msg.str());
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] < 0 || labels_[i] >= num_classes_) {
      std::ostringstream msg;
      msg << "sample " << i << ": label " << labels_[i] << " outside [0, "
          << num_classes_ << ")";
      throw ValidationError(msg.str());
    }
  }
  for (Index i = 0; i < points_.rows(); ++i) {
    if (!all_finite(row_span(points_, i))) {
      throw ValidationError("sample " + std::to_string(i) +
                            " has a non-finite feature value");
    }
  }
}

LabeledDataset LabeledDataset::with_points(Matrix points) const
{
  if (points.rows() != size() || points.cols() != dim()) {
    throw ValidationError("replacement points must keep the dataset shape");
  }
  return LabeledDataset(std::move(points), labels_, num_classes_);
}

SimilarityKernel::SimilarityKernel(KernelKind kind, double bandwidth)
  : kind_(kind)
  , bandwidth_(bandwidth)
{
  if (!(bandwidth_ > 0.0) || !std::isfinite(bandwidth_)) {
    std::ostringstream msg;
    msg << "kernel bandwidth must be positive and finite, got " << bandwidth_;
    throw ValidationError(msg.str());
  }
}

SimilarityKernel SimilarityKernel::gaussian(double bandwidth)
{
  return SimilarityKernel(KernelKind::gaussian, bandwidth);
}

double SimilarityKernel::operator()(std::span<const double> a,
                                    std::span<const double> b) const
{
  if (a.size() != b.size()) {
    throw ValidationError("similarity arguments differ in dimension");
  }
  if (!all_finite(a) || !all_finite(b)) {
    throw ValidationError("similarity arguments must be finite");
  }
  double d2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    d2 += diff * diff;
  }
  return std::exp(-d2 / (2.0 * bandwidth_ * bandwidth_));
}

std::string to_string(NormOrder norm)
{
  return norm == NormOrder::l2 ? "l2" : "linf";
}

NormOrder parse_norm_order(const std::string& text)
{
  if (text == "l2") {
    return NormOrder::l2;
  }
  if (text == "linf") {
    return NormOrder::linf;
  }
  throw ValidationError("unknown norm '" + text + "' (expected l2 or linf)");
}

PerturbationConstraint::PerturbationConstraint(NormOrder norm,
                                               double radius,
                                               std::vector<Index> frozen)
  : norm_(norm)
  , radius_(radius)
  , frozen_(std::move(frozen))
{
  if (!(radius_ > 0.0) || !std::isfinite(radius_)) {
    std::ostringstream msg;
    msg << "perturbation radius must be positive and finite, got " << radius_;
    throw ValidationError(msg.str());
  }
  std::sort(frozen_.begin(), frozen_.end());
  frozen_.erase(std::unique(frozen_.begin(), frozen_.end()), frozen_.end());
  if (!frozen_.empty() && frozen_.front() < 0) {
    throw ValidationError("frozen index " + std::to_string(frozen_.front()) +
                          " is negative");
  }
}

bool PerturbationConstraint::is_frozen(Index i) const
{
  return std::binary_search(frozen_.begin(), frozen_.end(), i);
}

void PerturbationConstraint::validate_for(Index n) const
{
  if (!frozen_.empty() && frozen_.back() >= n) {
    throw ValidationError("frozen index " + std::to_string(frozen_.back()) +
                          " out of range for " + std::to_string(n) + " samples");
  }
  if (static_cast<Index>(frozen_.size()) == n) {
    throw ValidationError("every sample is frozen: nothing to perturb");
  }
}

PosteriorMatrix::PosteriorMatrix(Matrix values, std::vector<Index> uniform_fallback_rows)
  : values_(std::move(values))
  , fallback_rows_(std::move(uniform_fallback_rows))
{
  for (Index i = 0; i < values_.rows(); ++i) {
    double sum = 0.0;
    for (Index c = 0; c < values_.cols(); ++c) {
      const double p = values_(i, c);
      if (!(p >= 0.0 && p <= 1.0)) {
        throw ValidationError("posterior entry (" + std::to_string(i) + ", " +
                              std::to_string(c) + ") outside [0, 1]");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ValidationError("posterior row " + std::to_string(i) +
                            " does not sum to 1");
    }
  }
}

PgaConfig PgaConfig::defaults_for(double radius)
{
  PgaConfig config;
  config.step_size = 0.1 * radius;
  config.max_iterations = 100;
  return config;
}

void PgaConfig::validate() const
{
  if (!(step_size > 0.0) || !std::isfinite(step_size)) {
    throw ValidationError("step size must be positive and finite");
  }
  if (max_iterations < 0) {
    throw ValidationError("max_iterations must be non-negative");
  }
  if (!(monotone_slack >= 0.0)) {
    throw ValidationError("monotone slack must be non-negative");
  }
}

double l2_norm(std::span<const double> v)
{
  double sum = 0.0;
  for (double x : v) {
    sum += x * x;
  }
  return std::sqrt(sum);
}

double linf_norm(std::span<const double> v)
{
  double m = 0.0;
  for (double x : v) {
    m = std::max(m, std::abs(x));
  }
  return m;
}

double norm_of(std::span<const double> v, NormOrder norm)
{
  return norm == NormOrder::l2 ? l2_norm(v) : linf_norm(v);
}

bool all_finite(std::span<const double> v)
{
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

} // namespace bayeshield
