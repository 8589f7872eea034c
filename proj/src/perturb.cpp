#include "bayeshield/perturb.hpp"

#include "kernel_rows.hpp"
#include "parallel.hpp"

#include <cmath>
#include <sstream>

namespace bayeshield {

namespace {

GradientReport feature_space_gradient(const Matrix& features,
                                      const std::vector<int>& labels,
                                      int num_classes,
                                      double sigma,
                                      unsigned threads)
{
  const Index n = features.rows();
  const Index d = features.cols();

  Matrix sims(n, n);
  Matrix posteriors(n, num_classes);
  std::vector<double> denom(static_cast<std::size_t>(n));
  detail::parallel_for(n, threads, [&](Index i) {
    detail::similarity_row(features, i, sigma, row_span(sims, i));
    denom[static_cast<std::size_t>(i)] = detail::posterior_row(
      row_span(sims, i), labels, i, num_classes, row_span(posteriors, i));
  });

  GradientReport report;
  report.argmax_classes.resize(static_cast<std::size_t>(n));
  std::vector<double> best(static_cast<std::size_t>(n));
  double sum = 0.0;
  for (Index i = 0; i < n; ++i) {
    const auto row = row_span(posteriors, i);
    const int c = detail::argmax_lowest(row);
    report.argmax_classes[static_cast<std::size_t>(i)] = c;
    best[static_cast<std::size_t>(i)] = row[static_cast<std::size_t>(c)];
    sum += best[static_cast<std::size_t>(i)];
    if (!(denom[static_cast<std::size_t>(i)] > 0.0)) {
      report.uniform_fallback_rows.push_back(i);
    }
  }
  report.objective = 1.0 - sum / static_cast<double>(n);

  // Sensitivity of row i's selected posterior to s_ij; zero for fallback rows.
  auto sensitivity = [&](Index i, Index j) {
    const double di = denom[static_cast<std::size_t>(i)];
    if (!(di > 0.0)) {
      return 0.0;
    }
    const double indicator =
      labels[static_cast<std::size_t>(j)] == report.argmax_classes[static_cast<std::size_t>(i)] ? 1.0
                                                                                                : 0.0;
    return (indicator - best[static_cast<std::size_t>(i)]) / di;
  };

  const double scale = 1.0 / (static_cast<double>(n) * sigma * sigma);
  report.gradients = Matrix::Zero(n, d);
  detail::parallel_for(n, threads, [&](Index m) {
    auto g = row_span(report.gradients, m);
    const auto xm = row_span(features, m);
    for (Index j = 0; j < n; ++j) {
      if (j == m) {
        continue;
      }
      const double weight = (sensitivity(m, j) + sensitivity(j, m)) * sims(m, j);
      if (weight == 0.0) {
        continue;
      }
      const auto xj = row_span(features, j);
      for (Index k = 0; k < d; ++k) {
        g[static_cast<std::size_t>(k)] += weight * (xm[static_cast<std::size_t>(k)] -
                                                    xj[static_cast<std::size_t>(k)]);
      }
    }
    for (double& v : g) {
      v *= scale;
    }
  });
  report.posteriors = std::move(posteriors);
  return report;
}

} // namespace

GradientReport objective_and_gradient(const LabeledDataset& data,
                                      const SimilarityKernel& kernel,
                                      TieBreak /*tie_break*/,
                                      unsigned threads)
{
  return feature_space_gradient(
    data.points(), data.labels(), data.num_classes(), kernel.bandwidth(), threads);
}

GradientReport objective_and_gradient(const LabeledDataset& data,
                                      const SimilarityKernel& kernel,
                                      const EmbeddingMap& embedding,
                                      TieBreak /*tie_break*/,
                                      unsigned threads)
{
  if (embedding.input_dim() != data.dim()) {
    throw ValidationError("embedding input dimension does not match the dataset");
  }
  const Matrix features = embed_points(embedding, data.points());
  GradientReport report = feature_space_gradient(
    features, data.labels(), data.num_classes(), kernel.bandwidth(), threads);
  Matrix input_grad(data.size(), data.dim());
  detail::parallel_for(data.size(), threads, [&](Index i) {
    input_grad.row(i) =
      pullback_gradient(embedding, data.point(i), row_span(report.gradients, i)).transpose();
  });
  report.gradients = std::move(input_grad);
  return report;
}

Vector project(std::span<const double> delta, NormOrder norm, double radius)
{
  if (!all_finite(delta)) {
    throw ValidationError("cannot project a non-finite perturbation");
  }
  if (!(radius > 0.0)) {
    throw ValidationError("projection radius must be positive");
  }
  Vector out = Eigen::Map<const Vector>(delta.data(), static_cast<Index>(delta.size()));
  if (norm == NormOrder::linf) {
    for (Index k = 0; k < out.size(); ++k) {
      out[k] = std::max(-radius, std::min(out[k], radius));
    }
    return out;
  }
  const double length = l2_norm(delta);
  if (length <= radius) {
    return out;
  }
  // Shrink the factor until the rounded result is feasible, so a second
  // projection is the identity.
  double factor = radius / length;
  for (;;) {
    for (Index k = 0; k < out.size(); ++k) {
      out[k] = delta[static_cast<std::size_t>(k)] * factor;
    }
    if (l2_norm({ out.data(), static_cast<std::size_t>(out.size()) }) <= radius) {
      return out;
    }
    factor = std::nextafter(factor, 0.0);
  }
}

Vector project(std::span<const double> delta, const PerturbationConstraint& constraint)
{
  return project(delta, constraint.norm(), constraint.radius());
}

PgaResult pga_maximize(const LabeledDataset& data,
                       const SimilarityKernel& kernel,
                       const PerturbationConstraint& constraint,
                       const PgaConfig& config,
                       const EmbeddingMap* embedding,
                       const IterationHook& hook)
{
  config.validate();
  constraint.validate_for(data.size());
  if (embedding != nullptr && embedding->input_dim() != data.dim()) {
    throw ValidationError("embedding input dimension does not match the dataset");
  }

  const Index n = data.size();
  const Index d = data.dim();
  auto evaluate = [&](const LabeledDataset& current) {
    return embedding != nullptr
             ? objective_and_gradient(current, kernel, *embedding, config.tie_break, config.threads)
             : objective_and_gradient(current, kernel, config.tie_break, config.threads);
  };

  Matrix deltas = Matrix::Zero(n, d);
  LabeledDataset current = data;
  GradientReport report = evaluate(current);
  std::vector<double> trace{ report.objective };
  std::vector<std::string> warnings;
  bool fallback_reported = false;
  auto note_fallback = [&](const GradientReport& r, int iteration) {
    if (!fallback_reported && !r.uniform_fallback_rows.empty()) {
      std::ostringstream msg;
      msg << "iteration " << iteration << ": " << r.uniform_fallback_rows.size()
          << " sample(s) have no similarity mass at this bandwidth and use the uniform posterior";
      warnings.push_back(msg.str());
      fallback_reported = true;
    }
  };
  note_fallback(report, 0);

  for (int t = 0; t < config.max_iterations; ++t) {
    for (Index frozen : constraint.frozen()) {
      report.gradients.row(frozen).setZero();
    }
    Matrix next = data.points();
    for (Index i = 0; i < n; ++i) {
      Vector step = deltas.row(i).transpose() + config.step_size * report.gradients.row(i).transpose();
      deltas.row(i) = project({ step.data(), static_cast<std::size_t>(d) }, constraint).transpose();
      for (Index k = 0; k < d; ++k) {
        next(i, k) = data.points()(i, k) + deltas(i, k);
      }
    }
    current = data.with_points(std::move(next));
    if (hook) {
      hook(t + 1, deltas);
    }
    report = evaluate(current);
    note_fallback(report, t + 1);
    const double previous = trace.back();
    if (report.objective < previous - config.monotone_slack) {
      std::ostringstream msg;
      msg.precision(3);
      msg << "step size too large: estimate decreased by " << (previous - report.objective)
          << " at iteration " << (t + 1)
          << "; monotone ascent needs eta below 2/L (L = Lipschitz constant of the gradient)";
      warnings.push_back(msg.str());
    }
    trace.push_back(report.objective);
  }

  if (!config.record_trace && trace.size() > 2) {
    trace = { trace.front(), trace.back() };
  }
  return PgaResult{ std::move(current), std::move(deltas), std::move(trace), std::move(warnings) };
}

} // namespace bayeshield
