#include "dssh/nn.hpp"

#include <cmath>
#include <cstring>

#include "dssh/ops.hpp"

namespace dssh::nn {

void ParameterStore::add(const std::string& name, ad::Tensor t) {
  if (params_.count(name)) throw ConfigError("duplicate parameter '" + name + "'");
  t.set_requires_grad(true);
  params_.emplace(name, std::move(t));
}

const ad::Tensor& ParameterStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("missing parameter '" + name + "'");
  return it->second;
}

ad::Tensor& ParameterStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("missing parameter '" + name + "'");
  return it->second;
}

void ParameterStore::set(const std::string& name, std::vector<double> values) {
  ad::Tensor& t = get(name);
  if (values.size() != t.size()) {
    throw ad::ShapeError("parameter '" + name + "' has " + std::to_string(t.size()) +
                         " values, got " + std::to_string(values.size()));
  }
  std::copy(values.begin(), values.end(), t.mutable_data().begin());
}

std::size_t ParameterStore::num_values() const {
  std::size_t n = 0;
  for (const auto& [_, t] : params_) n += t.size();
  return n;
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, _] : params_) out.push_back(name);
  return out;
}

ParameterStore ParameterStore::clone() const {
  ParameterStore out;
  for (const auto& [name, t] : params_) out.params_.emplace(name, t.clone());
  return out;
}

void ParameterStore::zero_grad() {
  for (auto& [_, t] : params_) t.zero_grad();
}

bool ParameterStore::bitwise_equal(const ParameterStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  auto it = other.params_.begin();
  for (const auto& [name, t] : params_) {
    if (name != it->first || t.shape() != it->second.shape()) return false;
    if (std::memcmp(t.data().data(), it->second.data().data(), t.size() * sizeof(double)) != 0) {
      return false;
    }
    ++it;
  }
  return true;
}

void MLPConfig::validate() const {
  if (input_dim < 1 || output_dim < 1) throw ConfigError("MLP dims must be >= 1");
  for (auto d : hidden_dims) {
    if (d < 1) throw ConfigError("MLP hidden dims must be >= 1");
  }
}

void GRUConfig::validate() const {
  if (input_dim < 1 || hidden_dim < 1 || num_layers < 1) {
    throw ConfigError("GRU needs input_dim, hidden_dim, num_layers >= 1");
  }
}

ad::Tensor uniform_weight(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::vector<double> w(fan_in * fan_out);
  for (double& v : w) v = rng.uniform(-bound, bound);
  return ad::Tensor::parameter({fan_in, fan_out}, std::move(w));
}

namespace {

std::string layer_name(const std::string& prefix, std::size_t k, const char* leaf) {
  return prefix + ".layer" + std::to_string(k) + "." + leaf;
}

}  // namespace

void init_mlp(const MLPConfig& cfg, const std::string& prefix, ParameterStore& store, Rng& rng) {
  cfg.validate();
  std::size_t in = cfg.input_dim;
  std::vector<std::size_t> dims = cfg.hidden_dims;
  dims.push_back(cfg.output_dim);
  for (std::size_t k = 0; k < dims.size(); ++k) {
    store.add(layer_name(prefix, k, "weight"), uniform_weight(in, dims[k], rng));
    store.add(layer_name(prefix, k, "bias"), ad::Tensor::parameter({dims[k]}, std::vector<double>(dims[k], 0.0)));
    in = dims[k];
  }
}

ad::Tensor mlp_forward(const MLPConfig& cfg, const ParameterStore& params,
                       const std::string& prefix, const ad::Tensor& x) {
  if (x.rank() != 2 || x.dim(1) != cfg.input_dim) {
    throw ad::ShapeError("mlp '" + prefix + "' expects [batch x " +
                         std::to_string(cfg.input_dim) + "], got " + ad::shape_to_string(x.shape()));
  }
  const std::size_t layers = cfg.hidden_dims.size() + 1;
  ad::Tensor h = x;
  for (std::size_t k = 0; k < layers; ++k) {
    h = ad::affine(h, params.get(layer_name(prefix, k, "weight")),
                   params.get(layer_name(prefix, k, "bias")));
    if (k + 1 < layers) h = ad::tanh(h);
  }
  if (cfg.head == OutputHead::kSoftplus) h = ad::softplus(h);
  return h;
}

void init_gru(const GRUConfig& cfg, const std::string& prefix, ParameterStore& store, Rng& rng) {
  cfg.validate();
  const std::size_t hd = cfg.hidden_dim;
  for (std::size_t k = 0; k < cfg.num_layers; ++k) {
    const std::size_t in = k == 0 ? cfg.input_dim : hd;
    for (const char* gate : {"r", "u", "h"}) {
      const std::string g(gate);
      store.add(layer_name(prefix, k, ("W_" + g).c_str()), uniform_weight(in, hd, rng));
      store.add(layer_name(prefix, k, ("U_" + g).c_str()), uniform_weight(hd, hd, rng));
      // Carry bias on the update gate: start close to copying the state.
      const double b0 = g == "u" ? 1.0 : 0.0;
      store.add(layer_name(prefix, k, ("b_" + g).c_str()),
                ad::Tensor::parameter({hd}, std::vector<double>(hd, b0)));
    }
  }
}

std::vector<ad::Tensor> gru_step(const GRUConfig& cfg, const ParameterStore& params,
                                 const std::string& prefix, std::span<const ad::Tensor> h_prev,
                                 const ad::Tensor& x) {
  if (h_prev.size() != cfg.num_layers) {
    throw ad::ShapeError("gru '" + prefix + "' expects " + std::to_string(cfg.num_layers) +
                         " layer states, got " + std::to_string(h_prev.size()));
  }
  if (x.rank() != 2 || x.dim(1) != cfg.input_dim) {
    throw ad::ShapeError("gru '" + prefix + "' expects input [batch x " +
                         std::to_string(cfg.input_dim) + "], got " + ad::shape_to_string(x.shape()));
  }
  std::vector<ad::Tensor> out;
  out.reserve(cfg.num_layers);
  ad::Tensor input = x;
  for (std::size_t k = 0; k < cfg.num_layers; ++k) {
    const ad::Tensor& h = h_prev[k];
    if (h.rank() != 2 || h.dim(0) != x.dim(0) || h.dim(1) != cfg.hidden_dim) {
      throw ad::ShapeError("gru '" + prefix + "' layer " + std::to_string(k) + " state has shape " +
                           ad::shape_to_string(h.shape()));
    }
    auto p = [&](const char* leaf) -> const ad::Tensor& {
      return params.get(layer_name(prefix, k, leaf));
    };
    const ad::Tensor r = ad::sigmoid(ad::affine(input, p("W_r"), p("b_r")) + ad::matmul(h, p("U_r")));
    const ad::Tensor u = ad::sigmoid(ad::affine(input, p("W_u"), p("b_u")) + ad::matmul(h, p("U_u")));
    const ad::Tensor cand =
        ad::tanh(ad::affine(input, p("W_h"), p("b_h")) + ad::matmul(r * h, p("U_h")));
    // h' = (1 - u) * cand + u * h  ==  cand + u * (h - cand)
    ad::Tensor next = cand + u * (h - cand);
    out.push_back(next);
    input = next;
  }
  return out;
}

ad::Tensor gru_step(const GRUConfig& cfg, const ParameterStore& params,
                    const std::string& prefix, const ad::Tensor& h_prev, const ad::Tensor& x) {
  const ad::Tensor states[] = {h_prev};
  return gru_step(cfg, params, prefix, std::span<const ad::Tensor>(states, 1), x).back();
}

}  // namespace dssh::nn
