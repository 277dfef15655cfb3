#include <nlohmann/json.hpp>

#include "scenforge/rl.hpp"

namespace scenforge {

Mlp::Mlp(std::vector<int> sizes, double output_scale, Rng& rng)
    : sizes_(std::move(sizes)), output_scale_(output_scale) {
  if (sizes_.size() < 2) throw ConfigError("mlp needs at least an input and an output size");
  for (int s : sizes_)
    if (s < 1) throw ConfigError("mlp layer sizes must be positive");
  initialize(rng);
}

void Mlp::initialize(Rng& rng) {
  layers_.assign(sizes_.size() - 1, DenseLayer{});
  for (std::size_t l = 0; l < layers_.size(); ++l) initialize_layer(l, rng);
}

void Mlp::initialize_layer(std::size_t l, Rng& rng) {
  const int in = sizes_.at(l);
  const int out = sizes_.at(l + 1);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  const double scale = l + 2 == sizes_.size() ? output_scale_ : 1.0;
  DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
  // row-major draw order keeps initialisation independent of Eigen's storage order
  for (int r = 0; r < out; ++r)
    for (int c = 0; c < in; ++c) layer.w(r, c) = u(rng) * scale;
  for (int r = 0; r < out; ++r) layer.b(r) = u(rng) * scale;
  layers_[l] = std::move(layer);
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Cache* cache) const {
  if (x.rows() != sizes_.front()) throw ArgumentError("mlp input has wrong dimension");
  Eigen::MatrixXd h = x;
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].w * h;
    z.colwise() += layers_[l].b;
    if (cache) {
      cache->inputs.push_back(h);
      cache->pre.push_back(z);
    }
    h = l + 1 < layers_.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return h;
}

void Mlp::backward(const Cache& cache, const Eigen::MatrixXd& d_out,
                   std::vector<DenseLayer>& grads) const {
  Eigen::MatrixXd d = d_out;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    if (l + 1 < layers_.size()) d = d.cwiseProduct((cache.pre[l].array() > 0.0).cast<double>().matrix());
    grads[l].w.noalias() += d * cache.inputs[l].transpose();
    grads[l].b += d.rowwise().sum();
    if (l > 0) d = layers_[l].w.transpose() * d;
  }
}

std::vector<DenseLayer> Mlp::zero_like() const {
  std::vector<DenseLayer> g;
  for (const auto& l : layers_)
    g.push_back({Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols()), Eigen::VectorXd::Zero(l.b.size())});
  return g;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.w.size() + l.b.size());
  return n;
}

void Mlp::flatten(const std::vector<DenseLayer>& layers, std::vector<double>& out) {
  for (const auto& l : layers) {
    for (Eigen::Index r = 0; r < l.w.rows(); ++r)
      for (Eigen::Index c = 0; c < l.w.cols(); ++c) out.push_back(l.w(r, c));
    for (Eigen::Index r = 0; r < l.b.size(); ++r) out.push_back(l.b(r));
  }
}

void Mlp::flatten(std::vector<double>& out) const { flatten(layers_, out); }

void Mlp::unflatten(std::span<const double> in, std::size_t& offset) {
  for (auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.w.rows(); ++r)
      for (Eigen::Index c = 0; c < l.w.cols(); ++c) l.w(r, c) = in[offset++];
    for (Eigen::Index r = 0; r < l.b.size(); ++r) l.b(r) = in[offset++];
  }
}

bool Mlp::operator==(const Mlp& o) const {
  if (sizes_ != o.sizes_ || layers_.size() != o.layers_.size()) return false;
  for (std::size_t l = 0; l < layers_.size(); ++l)
    if (layers_[l].w != o.layers_[l].w || layers_[l].b != o.layers_[l].b) return false;
  return true;
}

PolicyParams PolicyParams::create(int observation_size, int hidden, int actions, Rng& rng) {
  PolicyParams p;
  p.policy = Mlp({observation_size, hidden, hidden, actions}, 0.01, rng);
  p.value = Mlp({observation_size, hidden, hidden, 1}, 1.0, rng);
  return p;
}

std::vector<double> PolicyParams::flat() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  policy.flatten(out);
  value.flatten(out);
  return out;
}

void PolicyParams::set_flat(std::span<const double> values) {
  if (values.size() != parameter_count()) throw ArgumentError("flat parameter size mismatch");
  std::size_t off = 0;
  policy.unflatten(values, off);
  value.unflatten(values, off);
}

void reset_weights(PolicyParams& params, Rng& rng, ResetScope scope) {
  if (scope == ResetScope::kFull) {
    params.policy.initialize(rng);
    params.value.initialize(rng);
    return;
  }
  params.policy.initialize_layer(params.policy.layers().size() - 1, rng);
  params.value.initialize_layer(params.value.layers().size() - 1, rng);
}

namespace {

void dump_mlp(nlohmann::ordered_json& layers, const std::string& prefix, const Mlp& net) {
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto& layer = net.layers()[l];
    std::vector<double> w;
    for (Eigen::Index r = 0; r < layer.w.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.w.cols(); ++c) w.push_back(layer.w(r, c));
    std::vector<double> b(layer.b.data(), layer.b.data() + layer.b.size());
    const std::string base = prefix + "." + std::to_string(l);
    layers[base + ".weight"] = {{"shape", {layer.w.rows(), layer.w.cols()}}, {"data", w}};
    layers[base + ".bias"] = {{"shape", {layer.b.size()}}, {"data", b}};
  }
}

Mlp load_mlp(const nlohmann::json& layers, const std::string& prefix) {
  std::vector<int> sizes;
  std::vector<DenseLayer> loaded;
  for (std::size_t l = 0;; ++l) {
    const std::string base = prefix + "." + std::to_string(l);
    if (!layers.contains(base + ".weight")) break;
    const auto& w = layers.at(base + ".weight");
    const auto& b = layers.at(base + ".bias");
    const auto shape = w.at("shape").get<std::vector<Eigen::Index>>();
    if (shape.size() != 2) throw SchemaError("weight " + base + " is not a matrix");
    const auto data = w.at("data").get<std::vector<double>>();
    const auto bias = b.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != shape[0] * shape[1] ||
        static_cast<Eigen::Index>(bias.size()) != shape[0])
      throw SchemaError("tensor " + base + " does not match its shape");
    DenseLayer layer{Eigen::MatrixXd(shape[0], shape[1]), Eigen::VectorXd(shape[0])};
    for (Eigen::Index r = 0; r < shape[0]; ++r) {
      for (Eigen::Index c = 0; c < shape[1]; ++c) layer.w(r, c) = data[r * shape[1] + c];
      layer.b(r) = bias[r];
    }
    if (sizes.empty()) sizes.push_back(static_cast<int>(shape[1]));
    if (sizes.back() != shape[1]) throw SchemaError("layer " + base + " input size mismatch");
    sizes.push_back(static_cast<int>(shape[0]));
    loaded.push_back(std::move(layer));
  }
  if (loaded.empty()) throw SchemaError("checkpoint lacks network '" + prefix + "'");
  Rng rng(0);
  Mlp net(sizes, 1.0, rng);
  net.layers() = std::move(loaded);
  return net;
}

}  // namespace

std::string checkpoint_to_json(const PolicyParams& params) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  nlohmann::ordered_json layers = nlohmann::ordered_json::object();
  dump_mlp(layers, "policy", params.policy);
  dump_mlp(layers, "value", params.value);
  j["layers"] = std::move(layers);
  return j.dump();
}

PolicyParams checkpoint_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("version").get<int>() != 1) throw SchemaError("unsupported checkpoint version");
    PolicyParams p;
    p.policy = load_mlp(j.at("layers"), "policy");
    p.value = load_mlp(j.at("layers"), "value");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace scenforge
