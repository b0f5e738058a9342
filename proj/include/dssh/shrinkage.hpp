#pragma once

// Global-local shrinkage on the latent state.
//
// Local scales:  lambda^2 = alpha * beta,   alpha ~ G(0.5, 1),  beta ~ IG(0.5, 1)
// Global scale:  tau^2 = alpha_tau * beta_tau,
//                alpha_tau ~ G(0.5, tau0^2),  beta_tau ~ IG(0.5, 1)
// Slab:          c^2 ~ IG(c0, c1)
// Regularized:   tau*^2 = c^2 tau^2 / (c^2 + tau^2 lambda^2)
// Each positive variable gets a log-normal approximate posterior.

#include <string>
#include <vector>

#include "dssh/distributions.hpp"
#include "dssh/nn.hpp"

namespace dssh::shrink {

struct ShrinkageHyper {
  double tau0 = 1.0;
  double c0 = 2.0;
  double c1 = 1.0;

  void validate() const;
};

struct LocalShrinkageSample {
  ad::Tensor alpha;      // [B x Q]
  ad::Tensor beta;       // [B x Q]
  ad::Tensor lambda_sq;  // alpha * beta
  dist::LogNormalParams q_alpha;
  dist::LogNormalParams q_beta;
};

struct GlobalShrinkageSample {
  ad::Tensor alpha_tau;  // [B x 1]
  ad::Tensor beta_tau;
  ad::Tensor tau_sq;     // alpha_tau * beta_tau
  ad::Tensor c_sq;
  dist::LogNormalParams q_alpha_tau;
  dist::LogNormalParams q_beta_tau;
  dist::LogNormalParams q_c_sq;
};

struct GlobalKl {
  ad::Tensor alpha_tau;  // [B]
  ad::Tensor beta_tau;
  ad::Tensor c_sq;
  ad::Tensor total;
};

// c^2 tau^2 / (c^2 + tau^2 lambda^2), all inputs of one shape.
ad::Tensor regularized_tau_star_sq(const ad::Tensor& tau_sq, const ad::Tensor& c_sq,
                                   const ad::Tensor& lambda_sq);

// Sum over the Q columns of KL(q_alpha || G(0.5,1)) + KL(q_beta || IG(0.5,1)); shape [B].
ad::Tensor prior_local_kl(const dist::LogNormalParams& q_alpha, const dist::LogNormalParams& q_beta);

GlobalKl prior_global_kl(const dist::LogNormalParams& q_alpha_tau,
                         const dist::LogNormalParams& q_beta_tau,
                         const dist::LogNormalParams& q_c_sq, const ShrinkageHyper& hyper);

// head: [B x 4Q] laid out as (mu_alpha | log sigma_alpha | mu_beta | log sigma_beta).
LocalShrinkageSample sample_local_posterior(const ad::Tensor& head, const ad::Tensor& noise_alpha,
                                            const ad::Tensor& noise_beta);

// Log-normal parameters only (no sampling) for a local head.
std::pair<dist::LogNormalParams, dist::LogNormalParams> local_posterior_params(
    const ad::Tensor& head);

struct GlobalHeadConfig {
  std::size_t input_dim = 1;  // observation dimension M
  std::vector<std::size_t> hidden_dims;
};

// Three MLP heads "<prefix>.alpha_tau", "<prefix>.beta_tau", "<prefix>.c_sq",
// each mapping the pooled observations [B x M] to (mu, log sigma).
void init_global_heads(const GlobalHeadConfig& cfg, const std::string& prefix,
                       nn::ParameterStore& store, Rng& rng);

// pooled: [B x M] per-series time-mean of observed values.
// noise: [B x 3] standard normals for (alpha_tau, beta_tau, c_sq).
GlobalShrinkageSample sample_global_posterior(const GlobalHeadConfig& cfg,
                                              const nn::ParameterStore& params,
                                              const std::string& prefix, const ad::Tensor& pooled,
                                              const ad::Tensor& noise);

}  // namespace dssh::shrink
