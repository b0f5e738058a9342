#include "dssh/model.hpp"

#include <cmath>
#include <string>

#include "dssh/json_config.hpp"
#include "dssh/ops.hpp"

namespace dssh::model {

using ad::Tensor;

void ModelConfig::validate() const {
  if (obs_dim < 1 || covariate_dim < 1 || latent_dim < 1 || rnn_hidden_dim < 1 || rnn_layers < 1) {
    throw nn::ConfigError("model dims must all be >= 1");
  }
  for (auto d : head_hidden_dims) {
    if (d < 1) throw nn::ConfigError("model.head_hidden_dims entries must be >= 1");
  }
  if (!(sigma_floor > 0.0)) throw nn::ConfigError("model.sigma_floor must be positive");
  shrinkage.validate();
}

nn::GRUConfig ModelConfig::gru() const {
  return {covariate_dim + obs_dim, rnn_hidden_dim, rnn_layers};
}

nn::MLPConfig ModelConfig::gen_z_head(nn::OutputHead head) const {
  return {rnn_hidden_dim + latent_dim, head_hidden_dims, latent_dim, head};
}

nn::MLPConfig ModelConfig::inf_z_head(nn::OutputHead head) const {
  return {latent_dim + obs_dim + rnn_hidden_dim, head_hidden_dims, latent_dim, head};
}

nn::MLPConfig ModelConfig::decoder_mean() const {
  if (decoder == DecoderKind::kLinear) return {latent_dim, {}, obs_dim, nn::OutputHead::kLinear};
  return {latent_dim, head_hidden_dims, obs_dim, nn::OutputHead::kLinear};
}

nn::MLPConfig ModelConfig::decoder_sigma() const {
  return {latent_dim, head_hidden_dims, obs_dim, nn::OutputHead::kSoftplus};
}

nn::MLPConfig ModelConfig::local_head() const {
  return {latent_dim + rnn_hidden_dim, head_hidden_dims, 4 * latent_dim, nn::OutputHead::kLinear};
}

shrink::GlobalHeadConfig ModelConfig::global_heads() const { return {obs_dim, head_hidden_dims}; }

nlohmann::json to_json(const ModelConfig& cfg) {
  return {
      {"obs_dim", cfg.obs_dim},
      {"covariate_dim", cfg.covariate_dim},
      {"latent_dim", cfg.latent_dim},
      {"rnn_hidden_dim", cfg.rnn_hidden_dim},
      {"rnn_layers", cfg.rnn_layers},
      {"head_hidden_dims", cfg.head_hidden_dims},
      {"shrinkage", {{"tau0", cfg.shrinkage.tau0}, {"c0", cfg.shrinkage.c0}, {"c1", cfg.shrinkage.c1}}},
      {"sigma_floor", cfg.sigma_floor},
      {"decoder", cfg.decoder == DecoderKind::kLinear ? "linear" : "nonlinear"},
      {"use_shrinkage", cfg.use_shrinkage},
  };
}

ModelConfig model_config_from_json(const nlohmann::json& j, const std::string& path) {
  ModelConfig cfg;
  ObjectReader r(j, path);
  r.read("obs_dim", cfg.obs_dim);
  r.read("covariate_dim", cfg.covariate_dim);
  r.read("latent_dim", cfg.latent_dim);
  r.read("rnn_hidden_dim", cfg.rnn_hidden_dim);
  r.read("rnn_layers", cfg.rnn_layers);
  r.read("head_hidden_dims", cfg.head_hidden_dims);
  r.read("sigma_floor", cfg.sigma_floor);
  r.read("use_shrinkage", cfg.use_shrinkage);
  std::string dec = cfg.decoder == DecoderKind::kLinear ? "linear" : "nonlinear";
  r.read("decoder", dec);
  if (dec == "linear") {
    cfg.decoder = DecoderKind::kLinear;
  } else if (dec == "nonlinear") {
    cfg.decoder = DecoderKind::kNonlinear;
  } else {
    throw nn::ConfigError(r.field("decoder") + ": expected \"linear\" or \"nonlinear\", got \"" +
                          dec + "\"");
  }
  if (const auto* s = r.child("shrinkage")) {
    ObjectReader sr(*s, r.field("shrinkage"));
    sr.read("tau0", cfg.shrinkage.tau0);
    sr.read("c0", cfg.shrinkage.c0);
    sr.read("c1", cfg.shrinkage.c1);
    sr.finish();
  }
  r.finish();
  cfg.validate();
  return cfg;
}

nn::ParameterStore init_model_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  nn::ParameterStore store;
  Rng rng(seed);
  nn::init_gru(cfg.gru(), "gru", store, rng);
  nn::init_mlp(cfg.gen_z_head(nn::OutputHead::kLinear), "gen.z_mu", store, rng);
  nn::init_mlp(cfg.gen_z_head(nn::OutputHead::kSoftplus), "gen.z_sigma", store, rng);
  nn::init_mlp(cfg.decoder_mean(), "gen.decoder", store, rng);
  nn::init_mlp(cfg.decoder_sigma(), "gen.y_sigma", store, rng);
  nn::init_mlp(cfg.inf_z_head(nn::OutputHead::kLinear), "inf.z_mu", store, rng);
  nn::init_mlp(cfg.inf_z_head(nn::OutputHead::kSoftplus), "inf.z_sigma", store, rng);
  nn::init_mlp(cfg.local_head(), "inf.local", store, rng);
  shrink::init_global_heads(cfg.global_heads(), "inf.global", store, rng);
  return store;
}

StepState initial_state(const ModelConfig& cfg, std::size_t batch) {
  StepState s;
  s.h.assign(cfg.rnn_layers, Tensor::zeros({batch, cfg.rnn_hidden_dim}));
  s.z = Tensor::zeros({batch, cfg.latent_dim});
  s.y_prev = Tensor::zeros({batch, cfg.obs_dim});
  s.tau_sq = Tensor::full({batch, 1}, 1.0);
  s.c_sq = Tensor::full({batch, 1}, 1.0);
  return s;
}

Tensor draw_normals(RowRngs& rngs, std::size_t cols) {
  std::vector<double> v(rngs.size() * cols);
  for (std::size_t i = 0; i < rngs.size(); ++i) {
    for (std::size_t k = 0; k < cols; ++k) v[i * cols + k] = rngs[i].normal();
  }
  return Tensor::from({rngs.size(), cols}, std::move(v));
}

std::vector<Tensor> advance_rnn(const ModelConfig& cfg, const nn::ParameterStore& params,
                                const std::vector<Tensor>& h_prev, const Tensor& u_t,
                                const Tensor& y_prev) {
  return nn::gru_step(cfg.gru(), params, "gru", h_prev, ad::concat_cols({u_t, y_prev}));
}

namespace {

dist::NormalParams normal_heads(const ModelConfig& cfg, const nn::ParameterStore& params,
                                const nn::MLPConfig& mu_cfg, const nn::MLPConfig& sigma_cfg,
                                const std::string& mu_name, const std::string& sigma_name,
                                const Tensor& x) {
  return {nn::mlp_forward(mu_cfg, params, mu_name, x),
          nn::mlp_forward(sigma_cfg, params, sigma_name, x) + cfg.sigma_floor};
}

void check_finite_rows(const Tensor& t, const char* what, std::size_t step) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) {
      throw NumericalError(std::string("non-finite ") + what + " at time index " +
                           std::to_string(step));
    }
  }
}

}  // namespace

dist::NormalParams generative_z_params(const ModelConfig& cfg, const nn::ParameterStore& params,
                                       const Tensor& h_t, const Tensor& z_prev) {
  return normal_heads(cfg, params, cfg.gen_z_head(nn::OutputHead::kLinear),
                      cfg.gen_z_head(nn::OutputHead::kSoftplus), "gen.z_mu", "gen.z_sigma",
                      ad::concat_cols({h_t, z_prev}));
}

dist::NormalParams inference_z_params(const ModelConfig& cfg, const nn::ParameterStore& params,
                                      const Tensor& z_prev, const Tensor& y_t, const Tensor& h_t) {
  return normal_heads(cfg, params, cfg.inf_z_head(nn::OutputHead::kLinear),
                      cfg.inf_z_head(nn::OutputHead::kSoftplus), "inf.z_mu", "inf.z_sigma",
                      ad::concat_cols({z_prev, y_t, h_t}));
}

dist::NormalParams decoder(const ModelConfig& cfg, const nn::ParameterStore& params,
                           const Tensor& z) {
  return normal_heads(cfg, params, cfg.decoder_mean(), cfg.decoder_sigma(), "gen.decoder",
                      "gen.y_sigma", z);
}

Tensor local_shrinkage_head(const ModelConfig& cfg, const nn::ParameterStore& params,
                            const Tensor& z_prev, const Tensor& h_t) {
  return nn::mlp_forward(cfg.local_head(), params, "inf.local", ad::concat_cols({z_prev, h_t}));
}

Tensor assemble_z(const Tensor& z_star, const Tensor& tau_star_sq, const Tensor& lambda_sq) {
  return z_star * ad::sqrt(tau_star_sq) * ad::sqrt(lambda_sq);
}

Tensor shrinkage_scale(const Tensor& tau_sq, const Tensor& c_sq, const Tensor& lambda_sq) {
  const std::size_t q = lambda_sq.dim(1);
  const Tensor ts = shrink::regularized_tau_star_sq(ad::repeat_cols(tau_sq, q),
                                                    ad::repeat_cols(c_sq, q), lambda_sq);
  return ad::sqrt(ts * lambda_sq);
}

shrink::GlobalShrinkageSample sample_globals(const ModelConfig& cfg,
                                             const nn::ParameterStore& params,
                                             const Tensor& pooled_y, StepState& state,
                                             RowRngs& rngs) {
  const Tensor noise = draw_normals(rngs, 3);
  auto g = shrink::sample_global_posterior(cfg.global_heads(), params, "inf.global", pooled_y,
                                           noise);
  if (cfg.use_shrinkage) {
    state.tau_sq = g.tau_sq;
    state.c_sq = g.c_sq;
  }
  return g;
}

std::pair<StepLoss, StepState> step_elbo(const ModelConfig& cfg, const nn::ParameterStore& params,
                                         const Tensor& y_t, const Tensor& u_t,
                                         const StepState& state, RowRngs& rngs) {
  const std::size_t q = cfg.latent_dim;
  const std::size_t b = y_t.dim(0);
  if (rngs.size() != b) {
    throw ad::ShapeError("step_elbo: " + std::to_string(rngs.size()) + " rng streams for " +
                         std::to_string(b) + " rows");
  }
  StepState next;
  next.h = advance_rnn(cfg, params, state.h, u_t, state.y_prev);
  const Tensor& h = next.h.back();

  const Tensor noise_alpha = draw_normals(rngs, q);
  const Tensor noise_beta = draw_normals(rngs, q);
  const Tensor noise_z = draw_normals(rngs, q);

  StepLoss loss;
  Tensor scale;
  if (cfg.use_shrinkage) {
    auto local = shrink::sample_local_posterior(local_shrinkage_head(cfg, params, state.z, h),
                                                noise_alpha, noise_beta);
    scale = shrinkage_scale(state.tau_sq, state.c_sq, local.lambda_sq);
    loss.kl_shrinkage = shrink::prior_local_kl(local.q_alpha, local.q_beta);
  } else {
    loss.kl_shrinkage = Tensor::zeros({b});
  }

  const dist::NormalParams qz = inference_z_params(cfg, params, state.z, y_t, h);
  const dist::NormalParams pz = generative_z_params(cfg, params, h, state.z);
  loss.kl_z = ad::sum(dist::kl_normal_normal(qz, pz), 1);

  const Tensor z_star = dist::sample_normal_reparam(qz, noise_z);
  next.z = scale.defined() ? z_star * scale : z_star;
  loss.recon = ad::sum(dist::normal_log_prob(y_t, decoder(cfg, params, next.z)), 1);

  next.y_prev = y_t;
  next.tau_sq = state.tau_sq;
  next.c_sq = state.c_sq;
  return {std::move(loss), std::move(next)};
}

ElboTerms sequence_elbo(const ModelConfig& cfg, const nn::ParameterStore& params,
                        const data::SeriesBatch& batch, RowRngs& rngs) {
  batch.validate();
  const std::size_t b = batch.batch_size();
  if (b == 0) throw std::invalid_argument("sequence_elbo: empty batch");
  if (batch.obs_dim() != cfg.obs_dim || batch.cov_dim() != cfg.covariate_dim) {
    throw ad::ShapeError("sequence_elbo: batch dims (M=" + std::to_string(batch.obs_dim()) +
                         ", N=" + std::to_string(batch.cov_dim()) + ") do not match the model");
  }
  for (auto len : batch.lengths) {
    if (len < 1) throw std::invalid_argument("sequence_elbo: series of length 0");
  }

  StepState state = initial_state(cfg, b);
  const auto globals = sample_globals(cfg, params, batch.pooled_y(), state, rngs);
  Tensor kl_global = Tensor::zeros({b});
  if (cfg.use_shrinkage) {
    kl_global = shrink::prior_global_kl(globals.q_alpha_tau, globals.q_beta_tau, globals.q_c_sq,
                                        cfg.shrinkage)
                    .total;
  }

  ElboTerms out;
  Tensor rows = kl_global;
  double recon = 0.0, kl_z = 0.0, kl_shr = 0.0;
  for (std::size_t t = 0; t < batch.max_len(); ++t) {
    auto [loss, next] = step_elbo(cfg, params, batch.y_step(t), batch.u_step(t), state, rngs);
    const Tensor mask = batch.mask_step(t);
    const Tensor step = mask * (loss.kl_z + loss.kl_shrinkage - loss.recon);
    check_finite_rows(step, "loss", t);
    rows = rows + step;
    for (std::size_t i = 0; i < b; ++i) {
      const double m = mask.at(i);
      recon += m * loss.recon.at(i);
      kl_z += m * loss.kl_z.at(i);
      kl_shr += m * loss.kl_shrinkage.at(i);
    }
    state = std::move(next);
  }
  check_finite_rows(kl_global, "global KL", 0);

  const double inv_b = 1.0 / static_cast<double>(b);
  out.rows = rows;
  out.loss = ad::mean(rows);
  out.recon = recon * inv_b;
  out.kl_z = kl_z * inv_b;
  out.kl_shrinkage = kl_shr * inv_b;
  for (std::size_t i = 0; i < b; ++i) out.kl_global += kl_global.at(i) * inv_b;
  return out;
}

}  // namespace dssh::model
