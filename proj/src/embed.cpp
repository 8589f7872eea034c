#include "bayeshield/embed.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace bayeshield {

namespace {

constexpr const char* kEmbeddingFormat = "bayeshield-embedding";
constexpr int kEmbeddingVersion = 1;

double activate(Activation activation, double z)
{
  switch (activation) {
    case Activation::identity:
      return z;
    case Activation::tanh:
      return std::tanh(z);
    case Activation::relu:
      return z > 0.0 ? z : 0.0;
  }
  return z;
}

// Derivative expressed through the pre-activation z and the output a.
double activation_slope(Activation activation, double z, double a)
{
  switch (activation) {
    case Activation::identity:
      return 1.0;
    case Activation::tanh:
      return 1.0 - a * a;
    case Activation::relu:
      return z > 0.0 ? 1.0 : 0.0;
  }
  return 1.0;
}

void check_input(const EmbeddingMap& map, std::span<const double> x)
{
  if (static_cast<Index>(x.size()) != map.input_dim()) {
    std::ostringstream msg;
    msg << "embedding expects input dimension " << map.input_dim() << ", got "
        << x.size();
    throw ValidationError(msg.str());
  }
}

// Forward pass keeping every layer's pre-activation and output.
struct Trace
{
  std::vector<Vector> pre;
  std::vector<Vector> out;
};

Trace forward(const EmbeddingMap& map, std::span<const double> x)
{
  Trace trace;
  Vector input = Eigen::Map<const Vector>(x.data(), static_cast<Index>(x.size()));
  for (const auto& layer : map.layers()) {
    const Index rows = layer.weight.rows();
    const Index cols = layer.weight.cols();
    Vector z(rows);
    Vector a(rows);
    for (Index r = 0; r < rows; ++r) {
      double acc = 0.0;
      for (Index c = 0; c < cols; ++c) {
        acc += layer.weight(r, c) * input[c];
      }
      z[r] = acc + layer.bias[r];
      a[r] = activate(layer.activation, z[r]);
    }
    trace.pre.push_back(z);
    trace.out.push_back(a);
    input = std::move(a);
  }
  return trace;
}

} // namespace

std::string to_string(Activation activation)
{
  switch (activation) {
    case Activation::identity:
      return "identity";
    case Activation::tanh:
      return "tanh";
    case Activation::relu:
      return "relu";
  }
  return "identity";
}

Activation parse_activation(const std::string& text)
{
  if (text == "identity") {
    return Activation::identity;
  }
  if (text == "tanh") {
    return Activation::tanh;
  }
  if (text == "relu") {
    return Activation::relu;
  }
  throw ValidationError("unknown activation '" + text + "'");
}

EmbeddingMap::EmbeddingMap(std::vector<DenseLayer> layers)
  : layers_(std::move(layers))
{
  if (layers_.empty()) {
    throw ValidationError("embedding needs at least one layer");
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weight.rows() < 1 || layer.weight.cols() < 1) {
      throw ValidationError("embedding layer " + std::to_string(l) + " has an empty weight matrix");
    }
    if (layer.bias.size() != layer.weight.rows()) {
      throw ValidationError("embedding layer " + std::to_string(l) +
                            ": bias length does not match weight rows");
    }
    if (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows()) {
      throw ValidationError("embedding layer " + std::to_string(l) +
                            ": input width does not match previous layer output");
    }
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
      throw ValidationError("embedding layer " + std::to_string(l) + " has non-finite weights");
    }
  }
}

EmbeddingMap EmbeddingMap::identity(Index dim)
{
  DenseLayer layer;
  layer.weight = Matrix::Identity(dim, dim);
  layer.bias = Vector::Zero(dim);
  layer.activation = Activation::identity;
  return EmbeddingMap({ std::move(layer) });
}

Vector apply_embedding(const EmbeddingMap& map, std::span<const double> x)
{
  check_input(map, x);
  return forward(map, x).out.back();
}

Vector pullback_gradient(const EmbeddingMap& map,
                         std::span<const double> x,
                         std::span<const double> g_emb)
{
  check_input(map, x);
  if (static_cast<Index>(g_emb.size()) != map.output_dim()) {
    throw ValidationError("embedding gradient has the wrong dimension");
  }
  const Trace trace = forward(map, x);
  Vector grad = Eigen::Map<const Vector>(g_emb.data(), static_cast<Index>(g_emb.size()));
  for (std::size_t l = map.layers().size(); l-- > 0;) {
    const auto& layer = map.layers()[l];
    const Vector& z = trace.pre[l];
    const Vector& a = trace.out[l];
    Vector upstream(layer.weight.cols());
    Vector local(layer.weight.rows());
    for (Index r = 0; r < layer.weight.rows(); ++r) {
      local[r] = layer.activation == Activation::identity
                   ? grad[r]
                   : grad[r] * activation_slope(layer.activation, z[r], a[r]);
    }
    for (Index c = 0; c < layer.weight.cols(); ++c) {
      double acc = 0.0;
      for (Index r = 0; r < layer.weight.rows(); ++r) {
        acc += layer.weight(r, c) * local[r];
      }
      upstream[c] = acc;
    }
    grad = std::move(upstream);
  }
  return grad;
}

Matrix embed_points(const EmbeddingMap& map, const Matrix& points)
{
  Matrix out(points.rows(), map.output_dim());
  for (Index i = 0; i < points.rows(); ++i) {
    out.row(i) = apply_embedding(map, row_span(points, i)).transpose();
  }
  return out;
}

LabeledDataset embed_dataset(const EmbeddingMap& map, const LabeledDataset& data)
{
  return LabeledDataset(embed_points(map, data.points()), data.labels(), data.num_classes());
}

nlohmann::json embedding_to_json(const EmbeddingMap& map)
{
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : map.layers()) {
    nlohmann::json weights = nlohmann::json::array();
    for (Index r = 0; r < layer.weight.rows(); ++r) {
      std::vector<double> row(layer.weight.row(r).begin(), layer.weight.row(r).end());
      weights.push_back(row);
    }
    std::vector<double> bias(layer.bias.begin(), layer.bias.end());
    layers.push_back({ { "weights", weights },
                       { "bias", bias },
                       { "activation", to_string(layer.activation) } });
  }
  return { { "format", kEmbeddingFormat },
           { "version", kEmbeddingVersion },
           { "input_dim", map.input_dim() },
           { "output_dim", map.output_dim() },
           { "layers", layers } };
}

EmbeddingMap embedding_from_json(const nlohmann::json& doc)
{
  try {
    if (!doc.is_object()) {
      throw ValidationError("embedding document must be a JSON object");
    }
    if (!doc.contains("version")) {
      throw ValidationError("embedding document is missing the mandatory 'version' field");
    }
    if (doc.at("version").get<int>() != kEmbeddingVersion) {
      throw ValidationError("unsupported embedding version " + doc.at("version").dump());
    }
    if (doc.contains("format") && doc.at("format").get<std::string>() != kEmbeddingFormat) {
      throw ValidationError("not an embedding document (format " + doc.at("format").dump() + ")");
    }
    std::vector<DenseLayer> layers;
    for (const auto& entry : doc.at("layers")) {
      const auto& rows = entry.at("weights");
      const auto bias = entry.at("bias").get<std::vector<double>>();
      DenseLayer layer;
      const Index out = static_cast<Index>(rows.size());
      const Index in = out > 0 ? static_cast<Index>(rows.at(0).size()) : 0;
      layer.weight.resize(out, in);
      for (Index r = 0; r < out; ++r) {
        const auto values = rows.at(static_cast<std::size_t>(r)).get<std::vector<double>>();
        if (static_cast<Index>(values.size()) != in) {
          throw ValidationError("embedding weight rows have inconsistent lengths");
        }
        for (Index c = 0; c < in; ++c) {
          layer.weight(r, c) = values[static_cast<std::size_t>(c)];
        }
      }
      layer.bias = Eigen::Map<const Vector>(bias.data(), static_cast<Index>(bias.size()));
      layer.activation = parse_activation(entry.value("activation", std::string("identity")));
      layers.push_back(std::move(layer));
    }
    EmbeddingMap map(std::move(layers));
    if (doc.contains("input_dim") && doc.at("input_dim").get<Index>() != map.input_dim()) {
      throw ValidationError("embedding input_dim does not match its first layer");
    }
    if (doc.contains("output_dim") && doc.at("output_dim").get<Index>() != map.output_dim()) {
      throw ValidationError("embedding output_dim does not match its last layer");
    }
    return map;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed embedding document: ") + e.what());
  }
}

EmbeddingMap load_embedding(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("cannot open embedding file " + path.string());
  }
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return embedding_from_json(doc);
}

void save_embedding(const EmbeddingMap& map, const std::filesystem::path& path)
{
  std::ofstream out(path);
  if (!out) {
    throw ValidationError("cannot write embedding file " + path.string());
  }
  out << embedding_to_json(map).dump(2) << '\n';
}

} // namespace bayeshield
