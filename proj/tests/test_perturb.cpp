#include "bayeshield/estimator.hpp"
#include "bayeshield/perturb.hpp"
#include "bayeshield/synth.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace bayeshield;
using bayeshield::testing::column;
using bayeshield::testing::random_dataset;

namespace {

double max_relative_error(const Matrix& analytic, const Matrix& numeric)
{
  double worst = 0.0;
  for (Index i = 0; i < analytic.size(); ++i) {
    const double a = analytic.data()[i];
    const double f = numeric.data()[i];
    worst = std::max(worst, std::abs(a - f) / (std::abs(f) + 1e-8));
  }
  return worst;
}

bool has_near_tie(const GradientReport& r, double gap)
{
  for (Index i = 0; i < r.posteriors.rows(); ++i) {
    std::vector<double> row(r.posteriors.row(i).begin(), r.posteriors.row(i).end());
    std::sort(row.begin(), row.end(), std::greater<>());
    if (row.size() > 1 && row[0] - row[1] < gap) {
      return true;
    }
  }
  return false;
}

} // namespace

TEST_CASE("projection worked values")
{
  const double feasible[2] = { 0.05, -0.03 };
  CHECK(project(feasible, NormOrder::linf, 0.1) == Vector{ { 0.05, -0.03 } });
  const double wide[2] = { 0.3, -0.01 };
  CHECK(project(wide, NormOrder::linf, 0.1) == Vector{ { 0.1, -0.01 } });
  const double pythagorean[2] = { 3.0, 4.0 };
  const Vector p = project(pythagorean, NormOrder::l2, 1.0);
  CHECK(p[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(0.8).epsilon(1e-15));
  const double nan[2] = { 1.0, std::nan("") };
  CHECK_THROWS_AS(project(nan, NormOrder::l2, 1.0), ValidationError);
  CHECK_THROWS_AS(project(feasible, NormOrder::l2, 0.0), ValidationError);
}

TEST_CASE("projection is idempotent and feasible")
{
  Rng rng(41);
  for (NormOrder norm : { NormOrder::l2, NormOrder::linf }) {
    for (int t = 0; t < 300; ++t) {
      const Index d = 1 + static_cast<Index>(rng.uniform() * 6);
      const double eps = std::exp(3.0 * rng.normal());
      Vector v(d);
      for (Index k = 0; k < d; ++k) {
        v[k] = eps * 3.0 * rng.normal();
      }
      const Vector once = project({ v.data(), static_cast<std::size_t>(d) }, norm, eps);
      const Vector twice = project({ once.data(), static_cast<std::size_t>(d) }, norm, eps);
      CHECK((once.array() == twice.array()).all());
      CHECK(norm_of({ once.data(), static_cast<std::size_t>(d) }, norm) <= eps);
    }
  }
}

TEST_CASE("gradient of a single-class dataset is exactly zero")
{
  Rng rng(2);
  const auto blobs = random_dataset(rng, 9, 2, 1);
  const auto report = objective_and_gradient(blobs, SimilarityKernel::gaussian(0.6));
  CHECK(report.objective == 0.0);
  CHECK((report.gradients.array() == 0.0).all());
}

TEST_CASE("objective agrees with the estimator bit for bit")
{
  Rng rng(8);
  for (int t = 0; t < 10; ++t) {
    const auto data = random_dataset(rng, 25, 3, 3);
    const auto kernel = SimilarityKernel::gaussian(0.9);
    CHECK(objective_and_gradient(data, kernel).objective == estimate_bayes_error(data, kernel).value);
  }
}

TEST_CASE("analytic gradient matches central differences")
{
  SUBCASE("three point fixture without ties")
  {
    const LabeledDataset data(column({ 0.0, 1.0, 2.5 }), { 0, 1, 1 }, 2);
    const auto kernel = SimilarityKernel::gaussian(1.0);
    const auto report = objective_and_gradient(data, kernel);
    const Matrix numeric = finite_difference_gradient(data, kernel, nullptr, 1e-5);
    CHECK(max_relative_error(report.gradients, numeric) <= 1e-5);
  }

  SUBCASE("random ten point sets")
  {
    Rng rng(99);
    int checked = 0;
    while (checked < 10) {
      const auto data = random_dataset(rng, 10, 2, 2);
      const auto kernel = SimilarityKernel::gaussian(0.8);
      const auto report = objective_and_gradient(data, kernel);
      if (has_near_tie(report, 1e-3)) {
        continue;
      }
      const Matrix numeric = finite_difference_gradient(data, kernel, nullptr, 1e-5);
      CHECK(max_relative_error(report.gradients, numeric) <= 1e-5);
      ++checked;
    }
  }

  SUBCASE("gradient is independent of the thread count")
  {
    Rng rng(4);
    const auto data = random_dataset(rng, 80, 3, 2);
    const auto kernel = SimilarityKernel::gaussian(0.8);
    const auto a = objective_and_gradient(data, kernel, TieBreak::lowest_class_index, 1);
    const auto b = objective_and_gradient(data, kernel, TieBreak::lowest_class_index, 4);
    CHECK((a.gradients.array() == b.gradients.array()).all());
  }
}

TEST_CASE("the tie in the 0, 1, 2 fixture breaks the finite-difference comparison")
{
  // Row 1 has posterior (0.5, 0.5): the objective has a kink there, so no
  // single derivative exists for x_1.
  const LabeledDataset data(column({ 0.0, 1.0, 2.0 }), { 0, 1, 1 }, 2);
  const auto kernel = SimilarityKernel::gaussian(1.0);
  const auto report = objective_and_gradient(data, kernel);
  CHECK(report.posteriors(1, 0) == report.posteriors(1, 1));
  CHECK(report.argmax_classes[1] == 0);
  const Matrix numeric = finite_difference_gradient(data, kernel, nullptr, 1e-5);
  CHECK(max_relative_error(report.gradients, numeric) > 1e-3);
}

TEST_CASE("zero iterations leave the data untouched")
{
  Rng rng(12);
  const auto data = random_dataset(rng, 20, 2, 2);
  PgaConfig config = PgaConfig::defaults_for(0.2);
  config.max_iterations = 0;
  const auto result =
    pga_maximize(data, SimilarityKernel::gaussian(0.7), PerturbationConstraint(NormOrder::l2, 0.2), config);
  CHECK((result.perturbed.points().array() == data.points().array()).all());
  REQUIRE(result.trace.size() == 1);
  CHECK(result.trace[0] == estimate_bayes_error(data, SimilarityKernel::gaussian(0.7)).value);
}

TEST_CASE("pga respects the result invariants")
{
  Rng rng(21);
  const auto data = random_dataset(rng, 30, 3, 3, 0.8);
  const auto kernel = SimilarityKernel::gaussian(0.9);
  for (NormOrder norm : { NormOrder::l2, NormOrder::linf }) {
    const PerturbationConstraint constraint(norm, 0.3, { 0, 5, 7 });
    PgaConfig config = PgaConfig::defaults_for(0.3);
    config.step_size = 2.0;
    config.max_iterations = 25;

    int calls = 0;
    const auto hook = [&](int iteration, const Matrix& deltas) {
      CHECK(iteration == ++calls);
      for (Index i = 0; i < deltas.rows(); ++i) {
        CHECK(norm_of(row_span(deltas, i), norm) <= 0.3 + 1e-12);
      }
    };
    const auto result = pga_maximize(data, kernel, constraint, config, nullptr, hook);
    CHECK(calls == 25);
    REQUIRE(result.trace.size() == 26);
    CHECK(result.perturbed.labels() == data.labels());
    for (Index i = 0; i < data.size(); ++i) {
      for (Index k = 0; k < data.dim(); ++k) {
        CHECK(result.perturbed.points()(i, k) == data.points()(i, k) + result.deltas(i, k));
      }
    }
    for (Index j : constraint.frozen()) {
      CHECK((result.deltas.row(j).array() == 0.0).all());
      CHECK((result.perturbed.points().row(j).array() == data.points().row(j).array()).all());
    }
    CHECK(result.trace.back() == estimate_bayes_error(result.perturbed, kernel).value);
    CHECK(result.trace.back() >= result.trace.front());

    const auto again = pga_maximize(data, kernel, constraint, config);
    CHECK((again.deltas.array() == result.deltas.array()).all());
    CHECK(again.trace == result.trace);

    config.record_trace = false;
    const auto brief = pga_maximize(data, kernel, constraint, config);
    CHECK(brief.trace == std::vector<double>{ result.trace.front(), result.trace.back() });
  }
}

TEST_CASE("six points with half frozen ascend monotonically")
{
  Matrix pts(6, 2);
  pts << 0.0, 0.0, 0.4, 0.1, 1.0, 0.2, 0.9, 0.8, 0.2, 0.7, 1.3, 0.5;
  const LabeledDataset data(pts, { 0, 0, 1, 1, 0, 1 }, 2);
  const auto kernel = SimilarityKernel::gaussian(0.5);
  const PerturbationConstraint constraint(NormOrder::l2, 0.2, { 0, 2, 4 });
  PgaConfig config = PgaConfig::defaults_for(0.2);
  config.step_size = 0.005;
  config.max_iterations = 60;
  const auto result = pga_maximize(data, kernel, constraint, config);
  for (std::size_t k = 1; k < result.trace.size(); ++k) {
    CHECK(result.trace[k] >= result.trace[k - 1] - 1e-9);
  }
  CHECK(result.trace.back() > result.trace.front());
  CHECK(result.warnings.empty());
  for (Index j : { 0, 2, 4 }) {
    CHECK((result.perturbed.points().row(j).array() == pts.row(j).array()).all());
  }
}

TEST_CASE("an oversized step is diagnosed without aborting")
{
  const auto data = generate_moons(60, 0.1, 3);
  PgaConfig config = PgaConfig::defaults_for(0.5);
  config.step_size = 400.0;
  config.max_iterations = 30;
  const auto result =
    pga_maximize(data, SimilarityKernel::gaussian(0.3), PerturbationConstraint(NormOrder::l2, 0.5), config);
  REQUIRE(result.trace.size() == 31);
  const bool diagnosed = std::any_of(result.warnings.begin(), result.warnings.end(), [](const std::string& w) {
    return w.find("step size too large") != std::string::npos;
  });
  CHECK(diagnosed);
}

TEST_CASE("pga rejects invalid inputs")
{
  const auto data = generate_moons(10, 0.1, 1);
  const auto kernel = SimilarityKernel::gaussian(0.5);
  PgaConfig config = PgaConfig::defaults_for(0.1);
  CHECK_THROWS_AS(pga_maximize(data, kernel, PerturbationConstraint(NormOrder::l2, 0.1, { 0, 1, 2, 3, 4, 5, 6, 7, 8, 9 }), config),
                  ValidationError);
  CHECK_THROWS_AS(pga_maximize(data, kernel, PerturbationConstraint(NormOrder::l2, 0.1, { 10 }), config),
                  ValidationError);
  config.step_size = -1.0;
  CHECK_THROWS_AS(pga_maximize(data, kernel, PerturbationConstraint(NormOrder::l2, 0.1), config), ValidationError);
}
