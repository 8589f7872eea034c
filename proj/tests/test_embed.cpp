#include "bayeshield/embed.hpp"
#include "bayeshield/estimator.hpp"
#include "bayeshield/perturb.hpp"
#include "bayeshield/synth.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>

using namespace bayeshield;
using bayeshield::testing::fixture;
using bayeshield::testing::random_dataset;

namespace {

// Straight transcription of y = act(W x + b) with nested std::vector, kept
// separate from the library's Eigen-based pass.
std::vector<double> scalar_forward(const nlohmann::json& doc, std::vector<double> x)
{
  for (const auto& layer : doc.at("layers")) {
    const auto w = layer.at("weights").get<std::vector<std::vector<double>>>();
    const auto b = layer.at("bias").get<std::vector<double>>();
    const std::string act = layer.at("activation").get<std::string>();
    std::vector<double> y(w.size());
    for (std::size_t r = 0; r < w.size(); ++r) {
      double z = b[r];
      for (std::size_t c = 0; c < x.size(); ++c) {
        z += w[r][c] * x[c];
      }
      y[r] = act == "tanh" ? std::tanh(z) : act == "relu" ? std::max(z, 0.0) : z;
    }
    x = y;
  }
  return x;
}

EmbeddingMap affine(Matrix w, Vector b, Activation act = Activation::identity)
{
  return EmbeddingMap({ DenseLayer{ std::move(w), std::move(b), act } });
}

} // namespace

TEST_CASE("identity and affine maps")
{
  const auto id = EmbeddingMap::identity(3);
  const double x[3] = { 0.5, -2.0, 7.25 };
  CHECK(apply_embedding(id, x) == Vector{ { 0.5, -2.0, 7.25 } });
  CHECK(pullback_gradient(id, x, x) == Vector{ { 0.5, -2.0, 7.25 } });

  Matrix w(2, 2);
  w << 2, 0, 0, 3;
  const auto map = affine(w, Vector{ { 1.0, -1.0 } });
  const double ones[2] = { 1.0, 1.0 };
  CHECK(apply_embedding(map, ones) == Vector{ { 3.0, 2.0 } });

  Matrix skew(3, 2);
  skew << 1.5, -0.5, 0.25, 2.0, -1.0, 0.75;
  const auto wide = affine(skew, Vector::Zero(3));
  const double g[3] = { 0.3, -1.2, 2.0 };
  const Vector pulled = pullback_gradient(wide, ones, g);
  const Vector expected = skew.transpose() * Eigen::Map<const Vector>(g, 3);
  CHECK((pulled - expected).norm() <= 1e-15);

  const double g2[3] = { 0.6, -2.4, 4.0 };
  CHECK(pullback_gradient(wide, ones, g2) == 2.0 * pulled);
  const double h[3] = { -0.7, 0.1, 0.9 };
  const double gh[3] = { g[0] + h[0], g[1] + h[1], g[2] + h[2] };
  CHECK((pullback_gradient(wide, ones, gh) - pulled - pullback_gradient(wide, ones, h)).norm() <= 1e-14);
}

TEST_CASE("embedding validation")
{
  CHECK_THROWS_AS(EmbeddingMap({}), ValidationError);
  CHECK_THROWS_AS(affine(Matrix::Ones(2, 2), Vector::Zero(3)), ValidationError);
  Matrix bad = Matrix::Ones(2, 2);
  bad(0, 1) = std::nan("");
  CHECK_THROWS_AS(affine(bad, Vector::Zero(2)), ValidationError);
  CHECK_THROWS_AS(EmbeddingMap({ DenseLayer{ Matrix::Ones(3, 2), Vector::Zero(3), Activation::tanh },
                                 DenseLayer{ Matrix::Ones(2, 4), Vector::Zero(2), Activation::tanh } }),
                  ValidationError);

  const auto id = EmbeddingMap::identity(2);
  const double three[3] = { 1, 2, 3 };
  const double two[2] = { 1, 2 };
  CHECK_THROWS_AS(apply_embedding(id, three), ValidationError);
  CHECK_THROWS_AS(pullback_gradient(id, two, three), ValidationError);
  CHECK_THROWS_AS(parse_activation("sigmoid"), ValidationError);
}

TEST_CASE("relu slope at zero is zero")
{
  const auto map = affine(Matrix::Identity(2, 2), Vector::Zero(2), Activation::relu);
  const double x[2] = { 0.0, 1.5 };
  const double g[2] = { 1.0, 1.0 };
  CHECK(pullback_gradient(map, x, g) == Vector{ { 0.0, 1.0 } });
}

TEST_CASE("tanh network fixture")
{
  const auto map = load_embedding(fixture("tanh_embedding.json"));
  CHECK(map.input_dim() == 2);
  CHECK(map.output_dim() == 3);
  std::ifstream in(fixture("tanh_embedding.json"));
  const auto doc = nlohmann::json::parse(in);

  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    const double x[2] = { rng.normal(), rng.normal() };
    const auto oracle = scalar_forward(doc, { x[0], x[1] });
    const Vector y = apply_embedding(map, x);
    for (int k = 0; k < 3; ++k) {
      CHECK(y[k] == doctest::Approx(oracle[static_cast<std::size_t>(k)]).epsilon(1e-15));
    }

    // Directional check: d/dx (g . m(x)) by central differences.
    const double g[3] = { rng.normal(), rng.normal(), rng.normal() };
    const Vector pulled = pullback_gradient(map, x, g);
    for (int c = 0; c < 2; ++c) {
      double up[2] = { x[0], x[1] };
      double down[2] = { x[0], x[1] };
      up[c] += 1e-5;
      down[c] -= 1e-5;
      const Vector gv = Eigen::Map<const Vector>(g, 3);
      const double fd = (gv.dot(apply_embedding(map, up)) - gv.dot(apply_embedding(map, down))) / (up[c] - down[c]);
      CHECK(std::abs(pulled[c] - fd) / (std::abs(fd) + 1e-8) <= 1e-5);
    }
  }
}

TEST_CASE("embedding documents round-trip and are validated")
{
  const auto map = load_embedding(fixture("tanh_embedding.json"));
  const auto doc = embedding_to_json(map);
  const auto back = embedding_from_json(doc);
  REQUIRE(back.layers().size() == map.layers().size());
  for (std::size_t l = 0; l < map.layers().size(); ++l) {
    CHECK(back.layers()[l].weight == map.layers()[l].weight);
    CHECK(back.layers()[l].bias == map.layers()[l].bias);
    CHECK(back.layers()[l].activation == map.layers()[l].activation);
  }

  auto missing = doc;
  missing.erase("version");
  CHECK_THROWS_WITH_AS(embedding_from_json(missing), doctest::Contains("version"), ValidationError);
  auto future = doc;
  future["version"] = 2;
  CHECK_THROWS_AS(embedding_from_json(future), ValidationError);
  auto wrong_dim = doc;
  wrong_dim["input_dim"] = 5;
  CHECK_THROWS_AS(embedding_from_json(wrong_dim), ValidationError);
  auto ragged = doc;
  ragged["layers"][0]["weights"][1] = { 1.0 };
  CHECK_THROWS_AS(embedding_from_json(ragged), ValidationError);
  CHECK_THROWS_AS(load_embedding(fixture("no_such_file.json")), ValidationError);
}

TEST_CASE("identity embedding reproduces the plain run bit for bit")
{
  const auto data = generate_moons(40, 0.1, 5);
  const auto kernel = SimilarityKernel::gaussian(0.4);
  const PerturbationConstraint constraint(NormOrder::linf, 0.2, { 3 });
  PgaConfig config = PgaConfig::defaults_for(0.2);
  config.step_size = 0.5;
  config.max_iterations = 15;
  const auto id = EmbeddingMap::identity(2);
  const auto plain = pga_maximize(data, kernel, constraint, config);
  const auto through = pga_maximize(data, kernel, constraint, config, &id);
  CHECK((plain.deltas.array() == through.deltas.array()).all());
  CHECK(plain.trace == through.trace);
}

TEST_CASE("gradient through a tanh embedding matches finite differences in input space")
{
  const auto map = load_embedding(fixture("tanh_embedding.json"));
  Rng rng(77);
  int checked = 0;
  while (checked < 8) {
    const auto data = random_dataset(rng, 12, 2, 2, 1.0);
    const auto kernel = SimilarityKernel::gaussian(0.25);
    const auto report = objective_and_gradient(data, kernel, map);
    bool tie = false;
    for (Index i = 0; i < data.size(); ++i) {
      tie = tie || std::abs(report.posteriors(i, 0) - report.posteriors(i, 1)) < 1e-3;
    }
    if (tie) {
      continue;
    }
    CHECK(report.objective == estimate_bayes_error(embed_dataset(map, data), kernel).value);
    const Matrix numeric = finite_difference_gradient(data, kernel, &map, 1e-5);
    for (Index i = 0; i < numeric.size(); ++i) {
      const double a = report.gradients.data()[i];
      const double f = numeric.data()[i];
      CHECK(std::abs(a - f) / (std::abs(f) + 1e-8) <= 1e-5);
    }
    ++checked;
  }
}
