#include "bayeshield/synth.hpp"

#include "bayeshield/estimator.hpp"
#include "bayeshield/random.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace bayeshield {

double Rng::uniform()
{
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal()
{
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u = 0.0;
  double v = 0.0;
  double s = 0.0;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * factor;
  has_spare_ = true;
  return u * factor;
}

namespace {

const boost::math::normal_distribution<double> kStandardNormal{};

double std_cdf(double z)
{
  return boost::math::cdf(kStandardNormal, z);
}

double mass(const TruncatedNormalComponent& c)
{
  return std_cdf((c.upper - c.mean) / c.stddev) - std_cdf((c.lower - c.mean) / c.stddev);
}

double sample_component(const TruncatedNormalComponent& c, double u)
{
  const double lo = std_cdf((c.lower - c.mean) / c.stddev);
  const double hi = std_cdf((c.upper - c.mean) / c.stddev);
  double p = lo + u * (hi - lo);
  p = std::clamp(p, std::numeric_limits<double>::min(), 1.0 - 0x1.0p-53);
  const double x = c.mean + c.stddev * boost::math::quantile(kStandardNormal, p);
  return std::clamp(x, c.lower, c.upper);
}

double simpson(const auto& f, double a, double b, int intervals)
{
  const double h = (b - a) / intervals;
  double odd = 0.0;
  double even = 0.0;
  for (int k = 1; k < intervals; ++k) {
    (k % 2 == 1 ? odd : even) += f(a + k * h);
  }
  return h / 3.0 * (f(a) + 4.0 * odd + 2.0 * even + f(b));
}

} // namespace

void TruncatedNormalPairSpec::validate() const
{
  for (const auto& c : classes) {
    if (!(c.stddev > 0.0) || !std::isfinite(c.stddev) || !std::isfinite(c.mean)) {
      throw ValidationError("truncated normal needs a finite mean and a positive stddev");
    }
    if (!(c.lower < c.upper) || !std::isfinite(c.lower) || !std::isfinite(c.upper)) {
      throw ValidationError("truncation interval must satisfy lower < upper");
    }
    if (!(mass(c) > 0.0)) {
      throw ValidationError("truncation interval carries no probability mass");
    }
  }
  if (!(priors[0] >= 0.0) || !(priors[1] >= 0.0) ||
      std::abs(priors[0] + priors[1] - 1.0) > 1e-12) {
    throw ValidationError("class priors must be non-negative and sum to 1");
  }
}

TruncatedNormalPairSpec canonical_truncated_normal_pair()
{
  TruncatedNormalPairSpec spec;
  spec.classes[0] = { 0.0, 2.0, -5.0, 5.0 };
  spec.classes[1] = { 1.9555, 0.5, 0.4555, 3.4555 };
  spec.priors = { 0.5, 0.5 };
  return spec;
}

double truncated_normal_pdf(const TruncatedNormalComponent& c, double x)
{
  if (x < c.lower || x > c.upper) {
    return 0.0;
  }
  const double z = (x - c.mean) / c.stddev;
  return std::exp(-0.5 * z * z) / (c.stddev * std::sqrt(2.0 * std::numbers::pi) * mass(c));
}

double analytic_bayes_error(const TruncatedNormalPairSpec& spec, int quadrature_points)
{
  spec.validate();
  if (quadrature_points < 2) {
    throw ValidationError("quadrature needs at least 2 points");
  }
  const auto& c0 = spec.classes[0];
  const auto& c1 = spec.classes[1];
  const double z0 = mass(c0);
  const double z1 = mass(c1);
  auto weighted = [&](const TruncatedNormalComponent& c, double z, double prior, double x) {
    if (x < c.lower || x > c.upper) {
      return 0.0;
    }
    const double u = (x - c.mean) / c.stddev;
    return prior * std::exp(-0.5 * u * u) / (c.stddev * std::sqrt(2.0 * std::numbers::pi) * z);
  };
  auto g0 = [&](double x) { return weighted(c0, z0, spec.priors[0], x); };
  auto g1 = [&](double x) { return weighted(c1, z1, spec.priors[1], x); };

  // min(g0, g1) vanishes outside the intersection of the supports.
  const double lo = std::max(c0.lower, c1.lower);
  const double hi = std::min(c0.upper, c1.upper);
  if (!(lo < hi)) {
    return 0.0;
  }

  std::vector<double> cuts{ lo };
  const int scan = std::max(quadrature_points, 64);
  auto diff = [&](double x) { return g0(x) - g1(x); };
  double prev_x = lo;
  double prev_d = diff(lo);
  for (int k = 1; k <= scan; ++k) {
    const double x = lo + (hi - lo) * k / scan;
    const double d = diff(x);
    if ((prev_d < 0.0 && d > 0.0) || (prev_d > 0.0 && d < 0.0)) {
      double a = prev_x;
      double b = x;
      for (int it = 0; it < 200 && a < b; ++it) {
        const double m = 0.5 * (a + b);
        if (m <= a || m >= b) {
          break;
        }
        ((diff(m) < 0.0) == (prev_d < 0.0) ? a : b) = m;
      }
      cuts.push_back(0.5 * (a + b));
    }
    prev_x = x;
    prev_d = d;
  }
  cuts.push_back(hi);

  auto lower_envelope = [&](double x) { return std::min(g0(x), g1(x)); };
  double total = 0.0;
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double a = cuts[s];
    const double b = cuts[s + 1];
    if (!(b > a)) {
      continue;
    }
    int intervals = static_cast<int>(std::lround(quadrature_points * (b - a) / (hi - lo)));
    intervals = std::max(intervals + (intervals % 2), 2);
    total += simpson(lower_envelope, a, b, intervals);
  }
  return total;
}

LabeledDataset sample_truncated_normal_pair(const TruncatedNormalPairSpec& spec,
                                            Index n,
                                            std::uint64_t seed)
{
  spec.validate();
  if (n < 2) {
    throw ValidationError("sample size must be at least 2");
  }
  Rng rng(seed);
  Matrix points(n, 1);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const int c = rng.uniform() < spec.priors[0] ? 0 : 1;
    labels[static_cast<std::size_t>(i)] = c;
    points(i, 0) = sample_component(spec.classes[static_cast<std::size_t>(c)], rng.uniform());
  }
  return LabeledDataset(std::move(points), std::move(labels), 2);
}

LabeledDataset generate_moons(Index n, double noise, std::uint64_t seed)
{
  if (n < 2 || n % 2 != 0) {
    throw ValidationError("moons needs an even sample size of at least 2");
  }
  if (!(noise >= 0.0) || !std::isfinite(noise)) {
    throw ValidationError("moons noise must be a non-negative finite number");
  }
  const Index half = n / 2;
  Matrix points(n, 2);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index k = 0; k < half; ++k) {
    const double t = half > 1 ? std::numbers::pi * static_cast<double>(k) / static_cast<double>(half - 1) : 0.0;
    points(k, 0) = std::cos(t);
    points(k, 1) = std::sin(t);
    labels[static_cast<std::size_t>(k)] = 0;
    points(half + k, 0) = 1.0 - std::cos(t);
    points(half + k, 1) = 0.5 - std::sin(t);
    labels[static_cast<std::size_t>(half + k)] = 1;
  }
  if (noise > 0.0) {
    Rng rng(seed);
    for (Index i = 0; i < n; ++i) {
      points(i, 0) += noise * rng.normal();
      points(i, 1) += noise * rng.normal();
    }
  }
  return LabeledDataset(std::move(points), std::move(labels), 2);
}

Matrix finite_difference_gradient(const LabeledDataset& data,
                                  const SimilarityKernel& kernel,
                                  const EmbeddingMap* embedding,
                                  double h)
{
  if (!(h > 0.0) || !std::isfinite(h)) {
    throw ValidationError("finite-difference step must be positive");
  }
  auto objective = [&](const Matrix& points) {
    LabeledDataset moved = data.with_points(points);
    if (embedding != nullptr) {
      moved = embed_dataset(*embedding, moved);
    }
    return estimate_bayes_error(moved, kernel).value;
  };
  Matrix grad(data.size(), data.dim());
  Matrix work = data.points();
  for (Index i = 0; i < data.size(); ++i) {
    for (Index k = 0; k < data.dim(); ++k) {
      const double x = data.points()(i, k);
      const double up = x + h;
      const double down = x - h;
      work(i, k) = up;
      const double f_up = objective(work);
      work(i, k) = down;
      const double f_down = objective(work);
      work(i, k) = x;
      grad(i, k) = (f_up - f_down) / (up - down);
    }
  }
  return grad;
}

} // namespace bayeshield
