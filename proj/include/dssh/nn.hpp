#pragma once

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dssh/rng.hpp"
#include "dssh/tensor.hpp"

namespace dssh::nn {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Named parameters, iterated in sorted name order.
class ParameterStore {
 public:
  using Map = std::map<std::string, ad::Tensor>;

  void add(const std::string& name, ad::Tensor t);
  const ad::Tensor& get(const std::string& name) const;
  ad::Tensor& get(const std::string& name);
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  // Replaces the value of an existing parameter (shape must match).
  void set(const std::string& name, std::vector<double> values);

  std::size_t size() const { return params_.size(); }
  std::size_t num_values() const;
  std::vector<std::string> names() const;

  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }
  Map::iterator begin() { return params_.begin(); }
  Map::iterator end() { return params_.end(); }

  // Deep copy; the copy's leaves are independent of this store's.
  ParameterStore clone() const;
  void zero_grad();
  bool bitwise_equal(const ParameterStore& other) const;

 private:
  Map params_;
};

enum class OutputHead { kLinear, kSoftplus };

struct MLPConfig {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden_dims;
  std::size_t output_dim = 1;
  OutputHead head = OutputHead::kLinear;  // hidden activation is always tanh

  void validate() const;
};

struct GRUConfig {
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 1;
  std::size_t num_layers = 1;

  void validate() const;
};

// Parameters live under "<prefix>.layer<k>.weight" [in x out] and ".bias" [out].
void init_mlp(const MLPConfig& cfg, const std::string& prefix, ParameterStore& store, Rng& rng);
ad::Tensor mlp_forward(const MLPConfig& cfg, const ParameterStore& params,
                       const std::string& prefix, const ad::Tensor& x);

// Per layer: "<prefix>.layer<k>.{W,U,b}_{r,u,h}" for reset, update, candidate.
void init_gru(const GRUConfig& cfg, const std::string& prefix, ParameterStore& store, Rng& rng);

// One GRU step over all layers; h_prev holds one [batch x hidden] state per
// layer. Returns the new per-layer states; the last one is the output.
std::vector<ad::Tensor> gru_step(const GRUConfig& cfg, const ParameterStore& params,
                                 const std::string& prefix, std::span<const ad::Tensor> h_prev,
                                 const ad::Tensor& x);
ad::Tensor gru_step(const GRUConfig& cfg, const ParameterStore& params,
                    const std::string& prefix, const ad::Tensor& h_prev, const ad::Tensor& x);

// Uniform(-sqrt(1/fan_in), sqrt(1/fan_in)) weight tensor of shape [fan_in x fan_out].
ad::Tensor uniform_weight(std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace dssh::nn
