#include "dssh/grad_suite.hpp"

#include <cmath>
#include <exception>
#include <functional>

#include "dssh/distributions.hpp"
#include "dssh/gradcheck.hpp"
#include "dssh/model.hpp"
#include "dssh/ops.hpp"
#include "dssh/shrinkage.hpp"

namespace dssh::model {

namespace {

using ad::Tensor;

Tensor random_tensor(ad::Shape shape, Rng& rng, double lo, double hi) {
  std::vector<double> v(ad::shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v));
}

// Scalar reduction with fixed random weights so no coordinate cancels out.
struct Reducer {
  std::vector<Tensor> weights;
  std::size_t next = 0;
  Rng rng;

  explicit Reducer(std::uint64_t seed) : rng(seed) {}

  Tensor operator()(const Tensor& x) {
    if (next == weights.size()) weights.push_back(random_tensor(x.shape(), rng, 0.5, 1.5));
    return ad::sum(x * weights[next++]);
  }
  void rewind() { next = 0; }
};

class Suite {
 public:
  explicit Suite(const GradSuiteOptions& opts) : opts_(opts), rng_(derive_seed(opts.seed, 1)) {}

  void run(const std::string& name, const std::vector<Tensor>& xs,
           const std::function<Tensor(const std::vector<Tensor>&, Reducer&)>& f) {
    GradCase c;
    c.name = name;
    Reducer red(derive_seed(opts_.seed, 2, cases_.size()));
    try {
      const auto r = ad::grad_check_many(
          [&](const std::vector<Tensor>& v) {
            red.rewind();
            return f(v, red);
          },
          xs, opts_.eps);
      c.max_rel_err = r.max_rel_err;
      c.coords = r.coords_checked;
      c.passed = std::isfinite(r.max_rel_err) && r.max_rel_err < opts_.tolerance;
    } catch (const std::exception& e) {
      c.error = e.what();
      c.passed = false;
    }
    cases_.push_back(std::move(c));
  }

  Tensor rand(ad::Shape s, double lo = -1.5, double hi = 1.5) {
    return random_tensor(std::move(s), rng_, lo, hi);
  }

  Rng& rng() { return rng_; }
  std::vector<GradCase> take() { return std::move(cases_); }

 private:
  GradSuiteOptions opts_;
  Rng rng_;
  std::vector<GradCase> cases_;
};

void op_cases(Suite& s) {
  const ad::Shape m{3, 4};
  auto unary = [&](const std::string& name, std::function<Tensor(const Tensor&)> op, double lo,
                   double hi) {
    s.run(name, {s.rand(m, lo, hi)}, [op](const std::vector<Tensor>& v, Reducer& r) {
      return r(op(v[0]));
    });
  };
  auto binary = [&](const std::string& name, std::function<Tensor(const Tensor&, const Tensor&)> op,
                    Tensor b) {
    s.run(name, {s.rand(m), b}, [op](const std::vector<Tensor>& v, Reducer& r) {
      return r(op(v[0], v[1]));
    });
  };

  binary("add", ad::add, s.rand(m));
  binary("add_broadcast_scalar", ad::add, s.rand({}));
  binary("sub", ad::sub, s.rand(m));
  binary("mul", ad::mul, s.rand(m));
  binary("mul_broadcast_scalar", ad::mul, s.rand({}));
  binary("div", ad::div, s.rand(m, 0.5, 2.0));
  binary("div_broadcast_scalar", ad::div, s.rand({}, 0.5, 2.0));
  unary("add_scalar", [](const Tensor& x) { return ad::add_scalar(x, 0.7); }, -1.5, 1.5);
  unary("scale", [](const Tensor& x) { return ad::scale(x, -1.3); }, -1.5, 1.5);
  unary("neg", ad::neg, -1.5, 1.5);
  unary("exp", ad::exp, -1.5, 1.5);
  unary("exp_clamped", [](const Tensor& x) { return ad::exp_clamped(x, 10.0); }, -1.5, 1.5);
  unary("log", ad::log, 0.3, 3.0);
  unary("square", ad::square, -1.5, 1.5);
  unary("sqrt", ad::sqrt, 0.3, 3.0);
  unary("tanh", ad::tanh, -1.5, 1.5);
  unary("sigmoid", ad::sigmoid, -3.0, 3.0);
  unary("softplus", ad::softplus, -3.0, 3.0);
  unary("sum_all", [](const Tensor& x) { return ad::sum(x) * ad::sum(x); }, -1.5, 1.5);
  unary("sum_axis0", [](const Tensor& x) { return ad::sum(x, 0); }, -1.5, 1.5);
  unary("sum_axis1", [](const Tensor& x) { return ad::sum(x, 1); }, -1.5, 1.5);
  unary("mean_all", [](const Tensor& x) { return ad::square(ad::mean(x)); }, -1.5, 1.5);
  unary("mean_axis0", [](const Tensor& x) { return ad::mean(x, 0); }, -1.5, 1.5);
  unary("mean_axis1", [](const Tensor& x) { return ad::mean(x, 1); }, -1.5, 1.5);
  unary("slice_cols", [](const Tensor& x) { return ad::slice_cols(x, 1, 3); }, -1.5, 1.5);
  unary("repeat_cols",
        [](const Tensor& x) { return ad::repeat_cols(ad::slice_cols(x, 0, 1), 5); }, -1.5, 1.5);

  s.run("matmul", {s.rand({3, 4}), s.rand({4, 5})},
        [](const std::vector<Tensor>& v, Reducer& r) { return r(ad::matmul(v[0], v[1])); });
  s.run("affine", {s.rand({3, 4}), s.rand({4, 5}), s.rand({5})},
        [](const std::vector<Tensor>& v, Reducer& r) { return r(ad::affine(v[0], v[1], v[2])); });
  s.run("concat_cols", {s.rand({3, 2}), s.rand({3, 4}), s.rand({3, 1})},
        [](const std::vector<Tensor>& v, Reducer& r) { return r(ad::concat_cols(v)); });
}

void distribution_cases(Suite& s) {
  const ad::Shape m{2, 3};
  s.run("normal_log_prob", {s.rand(m), s.rand(m), s.rand(m, 0.4, 2.0)},
        [](const std::vector<Tensor>& v, Reducer& r) {
          return r(dist::normal_log_prob(v[0], {v[1], v[2]}));
        });
  s.run("kl_normal_normal", {s.rand(m), s.rand(m, 0.4, 2.0), s.rand(m), s.rand(m, 0.4, 2.0)},
        [](const std::vector<Tensor>& v, Reducer& r) {
          return r(dist::kl_normal_normal({v[0], v[1]}, {v[2], v[3]}));
        });
  s.run("kl_lognormal_gamma", {s.rand(m), s.rand(m, 0.4, 2.0)},
        [](const std::vector<Tensor>& v, Reducer& r) {
          return r(dist::kl_lognormal_gamma({v[0], v[1]}, 0.5, 1.0));
        });
  s.run("kl_lognormal_invgamma", {s.rand(m), s.rand(m, 0.4, 2.0)},
        [](const std::vector<Tensor>& v, Reducer& r) {
          return r(dist::kl_lognormal_invgamma({v[0], v[1]}, 0.5, 1.0));
        });
  const Tensor noise = s.rand(m, -2.0, 2.0);
  s.run("sample_normal_reparam", {s.rand(m), s.rand(m, 0.4, 2.0)},
        [noise](const std::vector<Tensor>& v, Reducer& r) {
          return r(dist::sample_normal_reparam({v[0], v[1]}, noise));
        });
  s.run("sample_lognormal_reparam", {s.rand(m, -1.0, 1.0), s.rand(m, 0.2, 0.8)},
        [noise](const std::vector<Tensor>& v, Reducer& r) {
          return r(dist::sample_lognormal_reparam({v[0], v[1]}, noise));
        });
  s.run("regularized_tau_star_sq",
        {s.rand(m, 0.3, 3.0), s.rand(m, 0.3, 3.0), s.rand(m, 0.3, 3.0)},
        [](const std::vector<Tensor>& v, Reducer& r) {
          return r(shrink::regularized_tau_star_sq(v[0], v[1], v[2]));
        });
  const Tensor na = s.rand(m, -1.0, 1.0), nb = s.rand(m, -1.0, 1.0);
  s.run("local_shrinkage_posterior", {s.rand({2, 12}, -0.8, 0.8)},
        [na, nb](const std::vector<Tensor>& v, Reducer& r) {
          const auto smp = shrink::sample_local_posterior(v[0], na, nb);
          return r(smp.lambda_sq) + r(shrink::prior_local_kl(smp.q_alpha, smp.q_beta));
        });
  s.run("global_shrinkage_kl",
        {s.rand({2, 1}), s.rand({2, 1}, 0.4, 2.0), s.rand({2, 1}), s.rand({2, 1}, 0.4, 2.0),
         s.rand({2, 1}), s.rand({2, 1}, 0.4, 2.0)},
        [](const std::vector<Tensor>& v, Reducer& r) {
          return r(shrink::prior_global_kl({v[0], v[1]}, {v[2], v[3]}, {v[4], v[5]}, {}).total);
        });
}

ModelConfig small_config(DecoderKind decoder) {
  ModelConfig cfg;
  cfg.obs_dim = 2;
  cfg.covariate_dim = 2;
  cfg.latent_dim = 3;
  cfg.rnn_hidden_dim = 4;
  cfg.rnn_layers = 2;
  cfg.head_hidden_dims = {5};
  cfg.decoder = decoder;
  return cfg;
}

// Initial parameters plus a small perturbation so zero biases are not special.
nn::ParameterStore perturbed_params(const ModelConfig& cfg, Rng& rng) {
  nn::ParameterStore p = init_model_params(cfg, rng.next_u64());
  for (auto& [name, t] : p) {
    for (double& x : t.mutable_data()) x += rng.uniform(-0.1, 0.1);
  }
  return p;
}

// Runs `f` with the parameters as the checked inputs.
void param_case(Suite& s, const std::string& name, const nn::ParameterStore& params,
                std::vector<Tensor> extra,
                std::function<Tensor(const nn::ParameterStore&, const std::vector<Tensor>&,
                                     Reducer&)>
                    f) {
  const std::vector<std::string> names = params.names();
  std::vector<Tensor> xs;
  for (const auto& n : names) xs.push_back(params.get(n));
  const std::size_t np = xs.size();
  for (auto& e : extra) xs.push_back(e);
  s.run(name, xs, [names, np, f](const std::vector<Tensor>& v, Reducer& r) {
    nn::ParameterStore p;
    for (std::size_t i = 0; i < np; ++i) p.add(names[i], v[i]);
    return f(p, std::vector<Tensor>(v.begin() + static_cast<std::ptrdiff_t>(np), v.end()), r);
  });
}

void head_cases(Suite& s) {
  const ModelConfig cfg = small_config(DecoderKind::kNonlinear);
  const nn::ParameterStore params = perturbed_params(cfg, s.rng());
  const std::size_t b = 2, q = cfg.latent_dim, m = cfg.obs_dim, n = cfg.covariate_dim,
                    h = cfg.rnn_hidden_dim;

  param_case(s, "head_gru", params, {s.rand({b, h}), s.rand({b, h}), s.rand({b, n}), s.rand({b, m})},
             [&cfg](const nn::ParameterStore& p, const std::vector<Tensor>& x, Reducer& r) {
               const auto out = advance_rnn(cfg, p, {x[0], x[1]}, x[2], x[3]);
               return r(out[0]) + r(out[1]);
             });
  param_case(s, "head_generative_z", params, {s.rand({b, h}), s.rand({b, q})},
             [&cfg](const nn::ParameterStore& p, const std::vector<Tensor>& x, Reducer& r) {
               const auto z = generative_z_params(cfg, p, x[0], x[1]);
               return r(z.mu) + r(z.sigma);
             });
  param_case(s, "head_inference_z", params, {s.rand({b, q}), s.rand({b, m}), s.rand({b, h})},
             [&cfg](const nn::ParameterStore& p, const std::vector<Tensor>& x, Reducer& r) {
               const auto z = inference_z_params(cfg, p, x[0], x[1], x[2]);
               return r(z.mu) + r(z.sigma);
             });
  param_case(s, "head_decoder_nonlinear", params, {s.rand({b, q})},
             [&cfg](const nn::ParameterStore& p, const std::vector<Tensor>& x, Reducer& r) {
               const auto y = decoder(cfg, p, x[0]);
               return r(y.mu) + r(y.sigma);
             });
  const ModelConfig lin = small_config(DecoderKind::kLinear);
  const nn::ParameterStore lin_params = perturbed_params(lin, s.rng());
  param_case(s, "head_decoder_linear", lin_params, {s.rand({b, q})},
             [&lin](const nn::ParameterStore& p, const std::vector<Tensor>& x, Reducer& r) {
               const auto y = decoder(lin, p, x[0]);
               return r(y.mu) + r(y.sigma);
             });
  param_case(s, "head_local_shrinkage", params, {s.rand({b, q}), s.rand({b, h})},
             [&cfg](const nn::ParameterStore& p, const std::vector<Tensor>& x, Reducer& r) {
               return r(local_shrinkage_head(cfg, p, x[0], x[1]));
             });
  const Tensor noise = s.rand({b, 3}, -1.0, 1.0);
  param_case(s, "head_global_shrinkage", params, {s.rand({b, m})},
             [&cfg, noise](const nn::ParameterStore& p, const std::vector<Tensor>& x, Reducer& r) {
               const auto g = shrink::sample_global_posterior(cfg.global_heads(), p, "inf.global",
                                                              x[0], noise);
               const auto kl = shrink::prior_global_kl(g.q_alpha_tau, g.q_beta_tau, g.q_c_sq,
                                                       cfg.shrinkage);
               return r(g.tau_sq) + r(g.c_sq) + r(kl.total);
             });
}

void elbo_cases(Suite& s, std::uint64_t seed) {
  const ModelConfig cfg = small_config(DecoderKind::kNonlinear);
  const nn::ParameterStore params = perturbed_params(cfg, s.rng());
  const std::size_t b = 2;

  StepState state = initial_state(cfg, b);
  for (auto& h : state.h) h = s.rand(h.shape(), -0.5, 0.5);
  state.z = s.rand(state.z.shape(), -0.5, 0.5);
  state.y_prev = s.rand(state.y_prev.shape());
  state.tau_sq = s.rand({b, 1}, 0.5, 1.5);
  state.c_sq = s.rand({b, 1}, 0.5, 1.5);
  const Tensor y = s.rand({b, cfg.obs_dim}), u = s.rand({b, cfg.covariate_dim});
  param_case(s, "step_elbo", params, {},
             [&cfg, state, y, u, seed](const nn::ParameterStore& p, const std::vector<Tensor>&,
                                       Reducer&) {
               RowRngs rngs{Rng::substream(seed, 3, 0), Rng::substream(seed, 3, 1)};
               const auto [loss, next] = step_elbo(cfg, p, y, u, state, rngs);
               return ad::sum(loss.kl_z + loss.kl_shrinkage - loss.recon) +
                      ad::sum(next.z * next.z);
             });

  const ModelConfig lin = small_config(DecoderKind::kLinear);
  const nn::ParameterStore lin_params = perturbed_params(lin, s.rng());
  data::SeriesBatch batch = data::SeriesBatch::zeros(b, 5, lin.obs_dim, lin.covariate_dim);
  batch.lengths = {5, 4};
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t t = 0; t < batch.lengths[i]; ++t) {
      for (std::size_t k = 0; k < lin.obs_dim; ++k) batch.y_at(i, t, k) = s.rng().uniform(-1, 1);
      for (std::size_t k = 0; k < lin.covariate_dim; ++k) batch.u_at(i, t, k) = s.rng().uniform(-1, 1);
    }
  }
  param_case(s, "sequence_elbo_5_steps", lin_params, {},
             [&lin, batch, seed](const nn::ParameterStore& p, const std::vector<Tensor>&,
                                 Reducer&) {
               RowRngs rngs{Rng::substream(seed, 4, 0), Rng::substream(seed, 4, 1)};
               return sequence_elbo(lin, p, batch, rngs).loss;
             });
}

}  // namespace

std::vector<GradCase> run_gradient_suite(const GradSuiteOptions& opts) {
  Suite s(opts);
  op_cases(s);
  distribution_cases(s);
  head_cases(s);
  elbo_cases(s, opts.seed);
  return s.take();
}

}  // namespace dssh::model
