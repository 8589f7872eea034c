#include "bayeshield/estimator.hpp"
#include "bayeshield/perturb.hpp"
#include "bayeshield/random.hpp"
#include "bayeshield/synth.hpp"

#include "support.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>

using namespace bayeshield;
using bayeshield::testing::column;
using bayeshield::testing::fixture;

TEST_CASE("generator draws are pinned to the standard engine")
{
  // The C++ standard fixes the 10000th output of a default-seeded
  // mt19937_64 at 9981545732273789042.
  Rng rng(5489);
  double u = 0.0;
  for (int k = 0; k < 10000; ++k) {
    u = rng.uniform();
  }
  CHECK(u == static_cast<double>(9981545732273789042ULL >> 11) * 0x1.0p-53);

  Rng a(42);
  Rng b(42);
  double sum = 0.0;
  double sq = 0.0;
  constexpr int kDraws = 200000;
  for (int k = 0; k < kDraws; ++k) {
    const double x = a.normal();
    CHECK_EQ(x, b.normal());
    sum += x;
    sq += x * x;
  }
  CHECK(std::abs(sum / kDraws) < 0.01);
  CHECK(std::abs(sq / kDraws - 1.0) < 0.01);
}

TEST_CASE("analytic bayes error edge cases")
{
  TruncatedNormalPairSpec same;
  same.classes[0] = { 0.3, 1.2, -2.0, 3.0 };
  same.classes[1] = same.classes[0];
  CHECK(analytic_bayes_error(same) == doctest::Approx(0.5).epsilon(1e-9));

  TruncatedNormalPairSpec apart;
  apart.classes[0] = { 0.0, 1.0, -1.0, 1.0 };
  apart.classes[1] = { 3.0, 1.0, 2.0, 4.0 };
  CHECK(analytic_bayes_error(apart) == 0.0);

  TruncatedNormalPairSpec bad = same;
  bad.classes[1].stddev = 0.0;
  CHECK_THROWS_AS(analytic_bayes_error(bad), ValidationError);
  bad = same;
  bad.classes[0].upper = bad.classes[0].lower;
  CHECK_THROWS_AS(analytic_bayes_error(bad), ValidationError);
  bad = same;
  bad.priors = { 0.7, 0.7 };
  CHECK_THROWS_AS(analytic_bayes_error(bad), ValidationError);
  bad = same;
  bad.priors = { -0.1, 1.1 };
  CHECK_THROWS_AS(analytic_bayes_error(bad), ValidationError);
  CHECK_THROWS_AS(analytic_bayes_error(same, 1), ValidationError);
}

TEST_CASE("canonical truncated normal pair")
{
  std::ifstream in(fixture("canonical_truncnorm.json"));
  const auto doc = nlohmann::json::parse(in);
  const auto spec = canonical_truncated_normal_pair();
  for (int c = 0; c < 2; ++c) {
    const auto& entry = doc.at("classes").at(static_cast<std::size_t>(c));
    CHECK(spec.classes[static_cast<std::size_t>(c)].mean == entry.at("mean").get<double>());
    CHECK(spec.classes[static_cast<std::size_t>(c)].stddev == entry.at("stddev").get<double>());
    CHECK(spec.classes[static_cast<std::size_t>(c)].lower == entry.at("lower").get<double>());
    CHECK(spec.classes[static_cast<std::size_t>(c)].upper == entry.at("upper").get<double>());
  }

  // Reference value from an independent adaptive quadrature (scipy quad).
  const double oracle = doc.at("analytic_bayes_error_scipy_quad").get<double>();
  const double value = analytic_bayes_error(spec, 4096);
  CHECK(std::abs(value - oracle) <= 1e-6);
  CHECK(std::abs(value - 0.1427) <= 0.0005);
  CHECK(std::abs(analytic_bayes_error(spec, 8192) - value) <= 1e-6);

  TruncatedNormalPairSpec swapped = spec;
  std::swap(swapped.classes[0], swapped.classes[1]);
  std::swap(swapped.priors[0], swapped.priors[1]);
  CHECK(analytic_bayes_error(swapped) == doctest::Approx(value).epsilon(1e-12));
}

TEST_CASE("truncated normal density integrates to one")
{
  const auto spec = canonical_truncated_normal_pair();
  for (const auto& c : spec.classes) {
    constexpr int kSteps = 20000;
    const double h = (c.upper - c.lower) / kSteps;
    double total = 0.0;
    for (int k = 0; k < kSteps; ++k) {
      total += truncated_normal_pdf(c, c.lower + (k + 0.5) * h) * h;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(truncated_normal_pdf(c, c.upper + 0.01) == 0.0);
  }
}

TEST_CASE("truncated normal sampling")
{
  auto spec = canonical_truncated_normal_pair();
  const auto a = sample_truncated_normal_pair(spec, 1000, 9);
  const auto b = sample_truncated_normal_pair(spec, 1000, 9);
  CHECK((a.points().array() == b.points().array()).all());
  CHECK(a.labels() == b.labels());

  const auto ones = std::count(a.labels().begin(), a.labels().end(), 1);
  CHECK(std::abs(static_cast<double>(ones) - 500.0) <= 4.0 * std::sqrt(250.0));

  Index below_mean = 0;
  for (Index i = 0; i < a.size(); ++i) {
    const auto& c = spec.classes[static_cast<std::size_t>(a.label(i))];
    CHECK(a.points()(i, 0) >= c.lower);
    CHECK(a.points()(i, 0) <= c.upper);
    below_mean += a.label(i) == 1 && a.points()(i, 0) < c.mean ? 1 : 0;
  }
  // Class 1 is truncated symmetrically about its mean.
  CHECK(std::abs(static_cast<double>(below_mean) / static_cast<double>(ones) - 0.5) < 0.08);

  spec.priors = { 1.0, 0.0 };
  const auto only = sample_truncated_normal_pair(spec, 10, 3);
  CHECK(std::all_of(only.labels().begin(), only.labels().end(), [](int y) { return y == 0; }));
  CHECK_THROWS_AS(sample_truncated_normal_pair(spec, 1, 3), ValidationError);
}

TEST_CASE("moons generator")
{
  const auto m = generate_moons(200, 0.1, 4);
  CHECK(std::count(m.labels().begin(), m.labels().end(), 0) == 100);
  CHECK(std::count(m.labels().begin(), m.labels().end(), 1) == 100);
  const auto again = generate_moons(200, 0.1, 4);
  CHECK((m.points().array() == again.points().array()).all());
  CHECK_FALSE((generate_moons(200, 0.1, 5).points().array() == m.points().array()).all());

  const auto clean = generate_moons(50, 0.0, 0);
  for (Index i = 0; i < clean.size(); ++i) {
    const double x = clean.points()(i, 0);
    const double y = clean.points()(i, 1);
    if (clean.label(i) == 0) {
      CHECK(std::abs(std::hypot(x, y) - 1.0) <= 1e-12);
      CHECK(y >= -1e-12);
    } else {
      CHECK(std::abs(std::hypot(x - 1.0, y - 0.5) - 1.0) <= 1e-12);
      CHECK(y <= 0.5 + 1e-12);
    }
  }
  CHECK_THROWS_AS(generate_moons(7, 0.1, 0), ValidationError);
  CHECK_THROWS_AS(generate_moons(0, 0.1, 0), ValidationError);
  CHECK_THROWS_AS(generate_moons(10, -0.1, 0), ValidationError);
  CHECK_NOTHROW(generate_moons(2, 0.1, 0));
}

TEST_CASE("finite-difference oracle")
{
  SUBCASE("constant objective")
  {
    const LabeledDataset data(column({ 0.0, 0.4, 2.0, 3.1 }), { 0, 0, 0, 0 }, 1);
    const Matrix g = finite_difference_gradient(data, SimilarityKernel::gaussian(1.0), nullptr, 1e-5);
    CHECK(g.cwiseAbs().maxCoeff() <= 1e-10);
  }

  SUBCASE("second-order convergence against the analytic gradient")
  {
    const LabeledDataset data(column({ 0.0, 1.0, 2.5 }), { 0, 1, 1 }, 2);
    const auto kernel = SimilarityKernel::gaussian(1.0);
    const Matrix analytic = objective_and_gradient(data, kernel).gradients;
    auto error = [&](double h) {
      return (finite_difference_gradient(data, kernel, nullptr, h) - analytic).cwiseAbs().maxCoeff();
    };
    const double e1 = error(1e-2);
    const double e2 = error(5e-3);
    const double e3 = error(2.5e-3);
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.05));
    CHECK(e2 / e3 == doctest::Approx(4.0).epsilon(0.05));
  }

  CHECK_THROWS_AS(finite_difference_gradient(LabeledDataset(column({ 0.0, 1.0 }), { 0, 1 }, 2),
                                             SimilarityKernel::gaussian(1.0), nullptr, 0.0),
                  ValidationError);
}
