#include "dssh/shrinkage.hpp"

#include "dssh/ops.hpp"

namespace dssh::shrink {

void ShrinkageHyper::validate() const {
  if (!(tau0 > 0.0) || !(c0 > 0.0) || !(c1 > 0.0)) {
    throw nn::ConfigError("shrinkage hyperparameters tau0, c0, c1 must be positive");
  }
}

ad::Tensor regularized_tau_star_sq(const ad::Tensor& tau_sq, const ad::Tensor& c_sq,
                                   const ad::Tensor& lambda_sq) {
  dist::check_positive(tau_sq, "tau^2");
  dist::check_positive(c_sq, "c^2");
  dist::check_positive(lambda_sq, "lambda^2");
  return (c_sq * tau_sq) / (c_sq + tau_sq * lambda_sq);
}

ad::Tensor prior_local_kl(const dist::LogNormalParams& q_alpha,
                          const dist::LogNormalParams& q_beta) {
  const ad::Tensor kl = dist::kl_lognormal_gamma(q_alpha, 0.5, 1.0) +
                        dist::kl_lognormal_invgamma(q_beta, 0.5, 1.0);
  return ad::sum(kl, 1);
}

GlobalKl prior_global_kl(const dist::LogNormalParams& q_alpha_tau,
                         const dist::LogNormalParams& q_beta_tau,
                         const dist::LogNormalParams& q_c_sq, const ShrinkageHyper& hyper) {
  hyper.validate();
  GlobalKl out;
  out.alpha_tau = ad::sum(dist::kl_lognormal_gamma(q_alpha_tau, 0.5, hyper.tau0 * hyper.tau0), 1);
  out.beta_tau = ad::sum(dist::kl_lognormal_invgamma(q_beta_tau, 0.5, 1.0), 1);
  out.c_sq = ad::sum(dist::kl_lognormal_invgamma(q_c_sq, hyper.c0, hyper.c1), 1);
  out.total = out.alpha_tau + out.beta_tau + out.c_sq;
  return out;
}

std::pair<dist::LogNormalParams, dist::LogNormalParams> local_posterior_params(
    const ad::Tensor& head) {
  if (head.rank() != 2 || head.dim(1) % 4 != 0) {
    throw ad::ShapeError("local shrinkage head must be [B x 4Q], got " +
                         ad::shape_to_string(head.shape()));
  }
  const std::size_t q = head.dim(1) / 4;
  dist::LogNormalParams qa{ad::slice_cols(head, 0, q), ad::exp(ad::slice_cols(head, q, 2 * q))};
  dist::LogNormalParams qb{ad::slice_cols(head, 2 * q, 3 * q),
                           ad::exp(ad::slice_cols(head, 3 * q, 4 * q))};
  return {qa, qb};
}

LocalShrinkageSample sample_local_posterior(const ad::Tensor& head, const ad::Tensor& noise_alpha,
                                            const ad::Tensor& noise_beta) {
  auto [qa, qb] = local_posterior_params(head);
  LocalShrinkageSample s;
  s.alpha = dist::sample_lognormal_reparam(qa, noise_alpha);
  s.beta = dist::sample_lognormal_reparam(qb, noise_beta);
  s.lambda_sq = s.alpha * s.beta;
  s.q_alpha = std::move(qa);
  s.q_beta = std::move(qb);
  return s;
}

namespace {

nn::MLPConfig head_mlp(const GlobalHeadConfig& cfg) {
  nn::MLPConfig m;
  m.input_dim = cfg.input_dim;
  m.hidden_dims = cfg.hidden_dims;
  m.output_dim = 2;
  m.head = nn::OutputHead::kLinear;
  return m;
}

constexpr const char* kGlobalHeads[] = {"alpha_tau", "beta_tau", "c_sq"};

}  // namespace

void init_global_heads(const GlobalHeadConfig& cfg, const std::string& prefix,
                       nn::ParameterStore& store, Rng& rng) {
  for (const char* h : kGlobalHeads) nn::init_mlp(head_mlp(cfg), prefix + "." + h, store, rng);
}

GlobalShrinkageSample sample_global_posterior(const GlobalHeadConfig& cfg,
                                              const nn::ParameterStore& params,
                                              const std::string& prefix, const ad::Tensor& pooled,
                                              const ad::Tensor& noise) {
  if (noise.rank() != 2 || noise.dim(1) != 3 || noise.dim(0) != pooled.dim(0)) {
    throw ad::ShapeError("global shrinkage noise must be [B x 3], got " +
                         ad::shape_to_string(noise.shape()));
  }
  const nn::MLPConfig m = head_mlp(cfg);
  dist::LogNormalParams q[3];
  ad::Tensor draws[3];
  for (std::size_t k = 0; k < 3; ++k) {
    const ad::Tensor out = nn::mlp_forward(m, params, prefix + "." + kGlobalHeads[k], pooled);
    q[k] = {ad::slice_cols(out, 0, 1), ad::exp(ad::slice_cols(out, 1, 2))};
    draws[k] = dist::sample_lognormal_reparam(q[k], ad::slice_cols(noise, k, k + 1));
  }
  GlobalShrinkageSample s;
  s.alpha_tau = draws[0];
  s.beta_tau = draws[1];
  s.tau_sq = draws[0] * draws[1];
  s.c_sq = draws[2];
  s.q_alpha_tau = q[0];
  s.q_beta_tau = q[1];
  s.q_c_sq = q[2];
  return s;
}

}  // namespace dssh::shrink
