#pragma once

// Deep state-space model with shrinkage: a GRU carries a deterministic state
// h_t driven by (u_t, y_{t-1}); the latent z_t = z*_t * sqrt(tau*^2 lambda^2)
// with z*_t Gaussian given (h_t, z_{t-1}); y_t ~ N(A z_t + b, sigma_y(z_t)).
// The inference network mirrors it with z*_t conditioned on (z_{t-1}, y_t, h_t)
// and log-normal posteriors over the shrinkage variables.
//
// Parameter layout (prefix -> network):
//   gru            GRU over concat(u_t, y_{t-1})
//   gen.z_mu       MLP (h, z_prev) -> Q
//   gen.z_sigma    MLP (h, z_prev) -> Q, softplus
//   gen.decoder    affine Q -> M (linear decoder) or MLP Q -> M (nonlinear)
//   gen.y_sigma    MLP z -> M, softplus
//   inf.z_mu       MLP (z_prev, y, h) -> Q
//   inf.z_sigma    MLP (z_prev, y, h) -> Q, softplus
//   inf.local      MLP (z_prev, h) -> 4Q log-normal parameters
//   inf.global.*   three MLPs pooled y -> (mu, log sigma)

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "dssh/distributions.hpp"
#include "dssh/nn.hpp"
#include "dssh/rng.hpp"
#include "dssh/series.hpp"
#include "dssh/shrinkage.hpp"

namespace dssh::model {

enum class DecoderKind { kLinear, kNonlinear };

struct ModelConfig {
  std::size_t obs_dim = 1;         // M
  std::size_t covariate_dim = 1;   // N
  std::size_t latent_dim = 8;      // Q
  std::size_t rnn_hidden_dim = 32;
  std::size_t rnn_layers = 1;
  std::vector<std::size_t> head_hidden_dims{32, 32};
  shrink::ShrinkageHyper shrinkage;
  double sigma_floor = 1e-4;
  DecoderKind decoder = DecoderKind::kLinear;
  // false pins tau* lambda to 1 and drops the shrinkage KL terms.
  bool use_shrinkage = true;

  void validate() const;

  nn::GRUConfig gru() const;
  nn::MLPConfig gen_z_head(nn::OutputHead head) const;
  nn::MLPConfig inf_z_head(nn::OutputHead head) const;
  nn::MLPConfig decoder_mean() const;
  nn::MLPConfig decoder_sigma() const;
  nn::MLPConfig local_head() const;
  shrink::GlobalHeadConfig global_heads() const;
};

nlohmann::json to_json(const ModelConfig& cfg);
// Rejects unknown keys; errors name the offending field path.
ModelConfig model_config_from_json(const nlohmann::json& j, const std::string& path = "model");

nn::ParameterStore init_model_params(const ModelConfig& cfg, std::uint64_t seed);

// Carried from step to step. z and y_prev start at zero, as does every GRU
// layer state. tau_sq / c_sq are the per-row global shrinkage draws.
struct StepState {
  std::vector<ad::Tensor> h;  // per GRU layer, [B x H]
  ad::Tensor z;               // [B x Q]
  ad::Tensor y_prev;          // [B x M]
  ad::Tensor tau_sq;          // [B x 1]
  ad::Tensor c_sq;            // [B x 1]

  const ad::Tensor& top() const { return h.back(); }
};

StepState initial_state(const ModelConfig& cfg, std::size_t batch);

struct StepLoss {
  ad::Tensor recon;         // [B] log N(y_t; A z + b, sigma_y)
  ad::Tensor kl_z;          // [B]
  ad::Tensor kl_shrinkage;  // [B]
};

// [B x cols] standard normals, row i drawn from rngs[i].
ad::Tensor draw_normals(RowRngs& rngs, std::size_t cols);

std::vector<ad::Tensor> advance_rnn(const ModelConfig& cfg, const nn::ParameterStore& params,
                                    const std::vector<ad::Tensor>& h_prev, const ad::Tensor& u_t,
                                    const ad::Tensor& y_prev);

dist::NormalParams generative_z_params(const ModelConfig& cfg, const nn::ParameterStore& params,
                                       const ad::Tensor& h_t, const ad::Tensor& z_prev);
dist::NormalParams inference_z_params(const ModelConfig& cfg, const nn::ParameterStore& params,
                                      const ad::Tensor& z_prev, const ad::Tensor& y_t,
                                      const ad::Tensor& h_t);
dist::NormalParams decoder(const ModelConfig& cfg, const nn::ParameterStore& params,
                           const ad::Tensor& z);
// [B x 4Q] head of the local shrinkage posterior q(lambda_t | z_{t-1}, h_t).
ad::Tensor local_shrinkage_head(const ModelConfig& cfg, const nn::ParameterStore& params,
                                const ad::Tensor& z_prev, const ad::Tensor& h_t);

// z = z* * sqrt(tau*^2) * sqrt(lambda^2)
ad::Tensor assemble_z(const ad::Tensor& z_star, const ad::Tensor& tau_star_sq,
                      const ad::Tensor& lambda_sq);

// sqrt(tau*^2 lambda^2) for per-row globals [B x 1] and locals [B x Q].
ad::Tensor shrinkage_scale(const ad::Tensor& tau_sq, const ad::Tensor& c_sq,
                           const ad::Tensor& lambda_sq);

// Samples the global shrinkage posterior for every row of `batch` and stores
// tau^2, c^2 into `state`. Consumes 3 normals per row.
shrink::GlobalShrinkageSample sample_globals(const ModelConfig& cfg,
                                             const nn::ParameterStore& params,
                                             const ad::Tensor& pooled_y, StepState& state,
                                             RowRngs& rngs);

// One time step of the ELBO. Consumes 3Q normals per row (alpha, beta, z*).
std::pair<StepLoss, StepState> step_elbo(const ModelConfig& cfg, const nn::ParameterStore& params,
                                         const ad::Tensor& y_t, const ad::Tensor& u_t,
                                         const StepState& state, RowRngs& rngs);

struct ElboTerms {
  ad::Tensor loss;  // scalar: mean over rows of the negative ELBO
  ad::Tensor rows;  // [B] per-row negative ELBO
  // Batch means of the components, for logging.
  double recon = 0.0;
  double kl_z = 0.0;
  double kl_shrinkage = 0.0;
  double kl_global = 0.0;
};

// Sum over observed steps of (-recon + kl_z + kl_shrinkage) plus the global
// KL, per row; loss is the mean over rows.
ElboTerms sequence_elbo(const ModelConfig& cfg, const nn::ParameterStore& params,
                        const data::SeriesBatch& batch, RowRngs& rngs);

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dssh::model
