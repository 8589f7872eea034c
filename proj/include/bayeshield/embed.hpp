#pragma once

#include "bayeshield/core.hpp"

#include <json.hpp>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace bayeshield {

enum class Activation
{
  identity,
  tanh,
  relu
};

std::string to_string(Activation activation);
Activation parse_activation(const std::string& text);

//! y = activation(W x + b), W stored output-major (rows = outputs).
struct DenseLayer
{
  Matrix weight;
  Vector bias;
  Activation activation = Activation::identity;
};

//! Known differentiable feature map m: similarity is measured on m(x) while
//! perturbation budgets stay in the input space.
class EmbeddingMap
{
public:
  explicit EmbeddingMap(std::vector<DenseLayer> layers);

  //! Single identity layer of width `dim`.
  static EmbeddingMap identity(Index dim);

  Index input_dim() const { return layers_.front().weight.cols(); }
  Index output_dim() const { return layers_.back().weight.rows(); }
  const std::vector<DenseLayer>& layers() const { return layers_; }

private:
  std::vector<DenseLayer> layers_;
};

Vector apply_embedding(const EmbeddingMap& map, std::span<const double> x);

//! J(x)^T g_emb by reverse accumulation. relu'(0) is taken as 0.
Vector pullback_gradient(const EmbeddingMap& map,
                         std::span<const double> x,
                         std::span<const double> g_emb);

//! Row-wise m(x_i).
Matrix embed_points(const EmbeddingMap& map, const Matrix& points);
LabeledDataset embed_dataset(const EmbeddingMap& map, const LabeledDataset& data);

//! Embedding document, format "bayeshield-embedding" version 1:
//!
//!   { "format": "bayeshield-embedding", "version": 1,
//!     "input_dim": 2, "output_dim": 3,
//!     "layers": [ { "weights": [[...], ...],   // output_dim rows
//!                   "bias": [...],
//!                   "activation": "identity" | "tanh" | "relu" }, ... ] }
nlohmann::json embedding_to_json(const EmbeddingMap& map);
EmbeddingMap embedding_from_json(const nlohmann::json& doc);
EmbeddingMap load_embedding(const std::filesystem::path& path);
void save_embedding(const EmbeddingMap& map, const std::filesystem::path& path);

} // namespace bayeshield
