// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Pass criterion numbers as arguments to run a subset.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dssh/checkpoint.hpp"
#include "dssh/distributions.hpp"
#include "dssh/grad_suite.hpp"
#include "dssh/model.hpp"
#include "dssh/ops.hpp"
#include "dssh/pipeline.hpp"
#include "dssh/shrinkage.hpp"

using namespace dssh;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "dssh_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// ------------------------------------------------------------------ 1

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cases = model::run_gradient_suite();
  const double secs = seconds_since(t0);
  std::size_t failed = 0;
  double worst = 0.0;
  std::string names;
  for (const auto& c : cases) {
    worst = std::max(worst, c.max_rel_err);
    if (!c.passed) {
      ++failed;
      names += " " + c.name;
    }
  }
  const bool has_step = std::any_of(cases.begin(), cases.end(), [](const auto& c) { return c.name.find("step_elbo") != std::string::npos; });
  const bool has_seq = std::any_of(cases.begin(), cases.end(), [](const auto& c) { return c.name.find("sequence_elbo") != std::string::npos; });
  return {failed == 0 && has_step && has_seq && secs < 60.0,
          fmt("%zu/%zu cases, worst rel err %.2e, %.1fs%s", cases.size() - failed, cases.size(), worst, secs,
              names.c_str())};
}

// ------------------------------------------------------------------ 2

// Composite Simpson over u = log x, where a lognormal q is Normal(mu, s).
double lognormal_kl_quadrature(double mu, double s, const std::function<double(double)>& p_logpdf) {
  constexpr int kPanels = 200000;
  const double lo = mu - 12 * s, hi = mu + 12 * s, h = (hi - lo) / kPanels;
  double acc = 0.0;
  for (int i = 0; i <= kPanels; ++i) {
    const double u = lo + i * h, x = std::exp(u);
    const double w = (i == 0 || i == kPanels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * std::exp(dist::normal_logpdf(u, mu, s)) * (dist::lognormal_logpdf(x, mu, s) - p_logpdf(x));
  }
  return acc * h / 3.0;
}

Outcome kl_oracle_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  constexpr std::size_t kDraws = 1000000;
  Rng pick(20);
  std::size_t ok = 0, total = 0;
  double worst_z = 0.0, worst_quad = 0.0;
  auto check = [&](double closed, const dist::McEstimate& mc) {
    const double z = std::abs(closed - mc.mean) / mc.std_error;
    worst_z = std::max(worst_z, z);
    ++total;
    if (z <= 3.0) ++ok;
  };
  for (int k = 0; k < 20; ++k) {
    const std::uint64_t seed = 1000 + static_cast<std::uint64_t>(k);
    {
      const double mq = pick.uniform(-2, 2), sq = pick.uniform(0.3, 2), mp = pick.uniform(-2, 2),
                   sp = pick.uniform(0.3, 2);
      check(dist::kl_normal_normal(mq, sq, mp, sp),
            dist::mc_kl_oracle([=](Rng& r) { return mq + sq * r.normal(); },
                               [=](double x) { return dist::normal_logpdf(x, mq, sq); },
                               [=](double x) { return dist::normal_logpdf(x, mp, sp); }, kDraws, seed));
    }
    {
      const double mu = pick.uniform(-1.5, 1.5), s = pick.uniform(0.2, 1.2), a = pick.uniform(0.3, 3),
                   b = pick.uniform(0.3, 3);
      worst_quad = std::max(worst_quad, std::abs(dist::kl_lognormal_gamma(mu, s, a, b) -
                                                 lognormal_kl_quadrature(mu, s, [=](double x) { return dist::gamma_logpdf(x, a, b); })));
      check(dist::kl_lognormal_gamma(mu, s, a, b),
            dist::mc_kl_oracle([=](Rng& r) { return std::exp(mu + s * r.normal()); },
                               [=](double x) { return dist::lognormal_logpdf(x, mu, s); },
                               [=](double x) { return dist::gamma_logpdf(x, a, b); }, kDraws, seed + 100));
    }
    {
      const double mu = pick.uniform(-1.5, 1.5), s = pick.uniform(0.2, 1.2), a = pick.uniform(0.3, 3),
                   b = pick.uniform(0.3, 3);
      worst_quad = std::max(worst_quad, std::abs(dist::kl_lognormal_invgamma(mu, s, a, b) -
                                                 lognormal_kl_quadrature(mu, s, [=](double x) { return dist::invgamma_logpdf(x, a, b); })));
      check(dist::kl_lognormal_invgamma(mu, s, a, b),
            dist::mc_kl_oracle([=](Rng& r) { return std::exp(mu + s * r.normal()); },
                               [=](double x) { return dist::lognormal_logpdf(x, mu, s); },
                               [=](double x) { return dist::invgamma_logpdf(x, a, b); }, kDraws, seed + 200));
    }
    {
      // Both Normals scaled by the same shrinkage scale: the closed form is the unscaled KL.
      const double mq = pick.uniform(-2, 2), sq = pick.uniform(0.3, 2), mp = pick.uniform(-2, 2),
                   sp = pick.uniform(0.3, 2), scale = std::exp(pick.uniform(-3, 3));
      check(dist::kl_normal_normal(mq, sq, mp, sp),
            dist::mc_kl_oracle([=](Rng& r) { return scale * (mq + sq * r.normal()); },
                               [=](double x) { return dist::normal_logpdf(x, scale * mq, scale * sq); },
                               [=](double x) { return dist::normal_logpdf(x, scale * mp, scale * sp); }, kDraws,
                               seed + 300));
    }
  }
  const double secs = seconds_since(t0);
  return {ok == total && secs < 120.0,
          fmt("%zu/%zu within 3 SE (worst %.2f SE); lognormal KLs vs quadrature max |diff| %.1e; %.1fs", ok,
              total, worst_z, worst_quad, secs)};
}

// ------------------------------------------------------------------ 3

Outcome horseshoe_limits() {
  auto tau_star_lambda_sq = [](double tau_sq, double c_sq, double lambda_sq) {
    const auto t = shrink::regularized_tau_star_sq(ad::Tensor::scalar(tau_sq), ad::Tensor::scalar(c_sq),
                                                   ad::Tensor::scalar(lambda_sq));
    return t.item() * lambda_sq;
  };
  const double r = 1e6;
  // Large tau^2 lambda^2 relative to c^2 saturates at c^2.
  const double c_sq = 2.0;
  const double big = tau_star_lambda_sq(r, c_sq, 1.0);
  const double err_big = std::abs(big - c_sq) / c_sq;
  // Small tau^2 lambda^2 relative to c^2 leaves the plain horseshoe scale.
  const double tau_sq = 0.3, lambda_sq = 0.5;
  const double small = tau_star_lambda_sq(tau_sq, r, lambda_sq);
  const double err_small = std::abs(small - tau_sq * lambda_sq) / (tau_sq * lambda_sq);
  const double mid = shrink::regularized_tau_star_sq(ad::Tensor::scalar(1.0), ad::Tensor::scalar(1.0),
                                                     ad::Tensor::scalar(1.0))
                         .item();
  return {err_big < 1e-3 && err_small < 1e-3 && mid == 0.5,
          fmt("rel err %.2e (-> c^2), %.2e (-> tau^2 lambda^2), midpoint %.17g", err_big, err_small, mid)};
}

// ------------------------------------------------------------------ 4

Outcome kl_cancellation() {
  Rng rng(4);
  const std::size_t n = 1000;
  std::vector<double> mq(n), sq(n), mp(n), sp(n), s(n);
  for (std::size_t i = 0; i < n; ++i) {
    mq[i] = rng.uniform(-3, 3);
    sq[i] = rng.uniform(0.1, 3);
    mp[i] = rng.uniform(-3, 3);
    sp[i] = rng.uniform(0.1, 3);
    s[i] = std::exp(rng.uniform(-6, 6));
  }
  auto t = [n](const std::vector<double>& v) { return ad::Tensor::from({n}, v); };
  const ad::Tensor scale = t(s);
  const ad::Tensor unscaled = dist::kl_normal_normal({t(mq), t(sq)}, {t(mp), t(sp)});
  const ad::Tensor scaled = dist::kl_normal_normal({ad::mul(scale, t(mq)), ad::mul(scale, t(sq))},
                                                   {ad::mul(scale, t(mp)), ad::mul(scale, t(sp))});
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(scaled.at(i) - unscaled.at(i)));
  return {worst < 1e-10, fmt("max |difference| %.2e over %zu scales", worst, n)};
}

// ------------------------------------------------------------------ 5

double inverse_softplus(double v) { return std::log(std::expm1(v)); }

// Scalar linear-Gaussian model with no covariate loading, written into a DSSM
// without shrinkage and with affine heads. The inference network is the
// one-step posterior p(z_t | z_{t-1}, y_t), or the prior when `informed` is false.
nn::ParameterStore embed_linear_model(const model::ModelConfig& c, double f, double g, double obs_var,
                                      double state_var, bool informed) {
  nn::ParameterStore p = model::init_model_params(c, 0);
  for (const auto& name : p.names()) p.set(name, std::vector<double>(p.get(name).size(), 0.0));
  const std::size_t h = c.rnn_hidden_dim;
  p.set("gen.decoder.layer0.weight", {f});
  p.set("gen.y_sigma.layer0.bias", {inverse_softplus(std::sqrt(obs_var) - c.sigma_floor)});
  std::vector<double> w(h + 1, 0.0);
  w[h] = g;  // rows are (h, z_prev)
  p.set("gen.z_mu.layer0.weight", w);
  p.set("gen.z_sigma.layer0.bias", {inverse_softplus(std::sqrt(state_var) - c.sigma_floor)});

  std::vector<double> wi(1 + 1 + h, 0.0);  // rows are (z_prev, y, h)
  double post_var = state_var;
  if (informed) {
    post_var = 1.0 / (1.0 / state_var + f * f / obs_var);
    wi[0] = post_var * g / state_var;
    wi[1] = post_var * f / obs_var;
  } else {
    wi[0] = g;
  }
  p.set("inf.z_mu.layer0.weight", wi);
  p.set("inf.z_sigma.layer0.bias", {inverse_softplus(std::sqrt(post_var) - c.sigma_floor)});
  return p;
}

Outcome elbo_bound() {
  model::ModelConfig c;
  c.obs_dim = 1;
  c.covariate_dim = 1;
  c.latent_dim = 1;
  c.rnn_hidden_dim = 3;
  c.head_hidden_dims = {};
  c.use_shrinkage = false;
  c.validate();
  constexpr std::size_t kT = 10, kReplicas = 200000;
  Rng pick(5);
  std::size_t ok = 0;
  double min_gap = INFINITY, se_at_min = 0.0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    data::LinearSSMSpec spec;
    spec.F = Eigen::RowVectorXd::Constant(1, pick.uniform(0.5, 1.5));
    spec.G = Eigen::MatrixXd::Constant(1, 1, pick.uniform(-0.9, 0.9));
    spec.B = Eigen::MatrixXd::Zero(1, 1);
    spec.obs_noise_var = pick.uniform(0.2, 1.0);
    spec.state_noise_var = pick.uniform(0.2, 1.0);
    const auto series = data::simulate_linear_series(spec, kT, 500 + k);
    const double exact = data::kalman_filter_loglik(spec, series.y, series.u).loglik;

    auto batch = data::SeriesBatch::zeros(kReplicas, kT, 1, 1);
    for (std::size_t i = 0; i < kReplicas; ++i) {
      for (std::size_t t = 0; t < kT; ++t) {
        batch.y_at(i, t, 0) = series.y(static_cast<Eigen::Index>(t));
        batch.u_at(i, t, 0) = series.u(static_cast<Eigen::Index>(t), 0);
      }
    }
    bool all = true;
    for (bool informed : {true, false}) {
      const auto p = embed_linear_model(c, spec.F(0), spec.G(0, 0), spec.obs_noise_var, spec.state_noise_var,
                                        informed);
      RowRngs rngs;
      for (std::size_t i = 0; i < kReplicas; ++i) rngs.push_back(Rng::substream(600 + k, i));
      const auto terms = model::sequence_elbo(c, p, batch, rngs);
      const double neg_elbo = terms.loss.item();
      const double gap = exact - (-neg_elbo);
      if (gap < min_gap) {
        double ss = 0.0;
        for (double v : terms.rows.data()) ss += (v - neg_elbo) * (v - neg_elbo);
        min_gap = gap;
        se_at_min = std::sqrt(ss / (kReplicas - 1) / kReplicas);
      }
      all = all && (-neg_elbo <= exact + 1e-6);
    }
    if (all) ++ok;
  }
  return {ok == 20, fmt("%zu/20 sequences bounded, smallest gap %.4f nats (MC standard error %.4f)", ok, min_gap, se_at_min)};
}

// ------------------------------------------------------------------ 6

constexpr std::size_t kDeskSteps = 1500;

Outcome linear_reproduction() {
  cli::RunConfig cfg;
  cfg.train.num_steps = kDeskSteps;
  cfg.train.shard_size = 32;
  cfg.train.validate_every = 250;
  cfg.seed = 1;
  cfg.resolve();
  const auto panel = data::simulate_linear_ssm(data::LinearSSMSpec::reference(), 2560, 128, 100, cfg.seed);
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = cli::train_model(cfg, panel.train);
  const double train_secs = seconds_since(t0);
  const auto ev = cli::evaluate_model(cfg, res.params, panel.test);
  const double lat = ev.latent_recovery.value_or(0.0);
  return {ev.response_recovery >= 0.80 && lat >= 0.55 && train_secs <= 1200.0,
          fmt("response recovery %.4f (>= 0.80), latent recovery %.4f (>= 0.55), ND %.4f, train %.0fs",
              ev.response_recovery, lat, ev.model.nd, train_secs)};
}

// ------------------------------------------------------------------ 7

std::size_t g_seasonal_steps = 1000;

Outcome seasonal_vs_naive() {
  // The formulas first, on hand-computed cases.
  const bool formulas =
      eval::nd(ad::Tensor::from({1}, {2.0}), ad::Tensor::from({1}, {1.0})) == 0.5 &&
      eval::nd(ad::Tensor::from({2}, {1.0, -1.0}), ad::Tensor::from({2}, {0.0, 0.0})) == 1.0 &&
      eval::nrmse(ad::Tensor::from({2}, {2.0, 2.0}), ad::Tensor::from({2}, {1.0, 3.0})) == 0.5;

  cli::RunConfig cfg;
  cfg.data.spec = "seasonal";
  cfg.data.context_len = 72;
  cfg.data.baseline_period = 24;
  cfg.forecast.horizon = 24;
  cfg.model.covariate_dim = 24;
  cfg.train.num_steps = g_seasonal_steps;
  cfg.train.shard_size = 32;
  cfg.train.validate_every = 250;
  cfg.seed = 7;
  cfg.resolve();
  data::SeasonalSpec spec;
  const auto panel = data::simulate_seasonal_panel(spec, cfg.seed);
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = cli::train_model(cfg, panel.slice_time(0, spec.steps - cfg.forecast.horizon));
  const double secs = seconds_since(t0);
  const auto ev = cli::evaluate_model(cfg, res.params, panel);
  return {formulas && ev.model.nd <= ev.baseline.nd,
          fmt("ND %.4f vs seasonal-naive %.4f (NRMSE %.4f vs %.4f), formulas %s, train %.0fs", ev.model.nd,
              ev.baseline.nd, ev.model.nrmse, ev.baseline.nrmse, formulas ? "ok" : "wrong", secs)};
}

// ------------------------------------------------------------------ 8

std::size_t g_ablation_steps = 800;

Outcome ablation_ordering() {
  int threshold_wins = 0, linear_wins = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    cli::RunConfig lin;
    lin.train.num_steps = g_ablation_steps;
    lin.train.shard_size = 32;
    lin.train.validate_every = 250;
    lin.seed = seed;
    lin.resolve();
    cli::RunConfig nl = lin;
    nl.model.decoder = model::DecoderKind::kNonlinear;
    const auto panel = data::simulate_linear_ssm(data::LinearSSMSpec::reference(), 2560, 128, 100, seed);
    const auto rl = cli::train_model(lin, panel.train);
    const auto rn = cli::train_model(nl, panel.train);
    const auto win = cli::evaluation_windows(panel.test, lin);
    const std::size_t l = lin.data.context_len;
    const std::vector<double> levels{0.0, 0.5};
    const auto rr = eval::ablate(lin.model, rl.params, win, l, lin.forecast, eval::AblationMode::kRandomRemove,
                                 levels, seed);
    const auto th = eval::ablate(lin.model, rl.params, win, l, lin.forecast,
                                 eval::AblationMode::kThresholdLowest, levels, seed);
    const auto dec = eval::ablate_decoder(lin.model, rl.params, nl.model, rn.params, win, l, lin.forecast, levels, seed);
    if (th.increase_pct[1] < rr.increase_pct[1]) ++threshold_wins;
    if (dec.linear.increase_pct[1] < dec.nonlinear.increase_pct[1]) ++linear_wins;
    detail += fmt(" [seed %d: threshold %+.1f%% vs random %+.1f%%; linear %+.1f%% vs nonlinear %+.1f%%]",
                  static_cast<int>(seed), th.increase_pct[1], rr.increase_pct[1], dec.linear.increase_pct[1],
                  dec.nonlinear.increase_pct[1]);
  }
  return {threshold_wins >= 2 && linear_wins >= 2,
          fmt("threshold < random in %d/3, linear < nonlinear in %d/3;", threshold_wins, linear_wins) + detail};
}

// ------------------------------------------------------------------ 9

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DSSH_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// The training log without its wall-clock column.
std::string without_wall_clock(const std::string& csv) {
  std::stringstream in(csv), out;
  std::string line;
  while (std::getline(in, line)) out << line.substr(0, line.rfind(',')) << '\n';
  return out.str();
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), root).string();
    std::string body = slurp(e.path());
    if (e.path().filename() == "train_log.csv") body = without_wall_clock(body);
    files[rel] = std::move(body);
  }
  return files;
}

// Every command once, writing under `root`. Returns the first failing command.
std::string run_all_commands(const fs::path& root, int threads) {
  const std::string common = " --threads " + std::to_string(threads) + " --seed 5";
  const std::string small = " --data.context_len 20 --forecast.horizon 5 --forecast.num_samples 30"
                            " --model.latent_dim 3 --model.rnn_hidden_dim 8 --model.head_hidden_dims [8]"
                            " --train.batch_size 16 --train.shard_size 4 --train.validate_every 5"
                            " --train.checkpoint_every 10";
  const std::string d = (root / "data").string(), lin = (root / "linear").string(),
                    nl = (root / "nonlinear").string(), md = " --model " + lin + " --data " + d;
  const std::vector<std::pair<std::string, std::string>> cmds{
      {"simulate", "simulate --out " + d + " --n-train 64 --n-test 6 --length 40"},
      {"train", "train --steps 20 --data " + d + " --out " + lin + small},
      {"train nonlinear", "train --steps 20 --data " + d + " --out " + nl + small + " --model.decoder nonlinear"},
      {"train search", "train --steps 4 --search 2 --data " + d + " --out " + (root / "search").string() + small},
      {"forecast", "forecast" + md + " --out " + (root / "forecast").string()},
      {"forecast rolling", "forecast" + md + " --rolling 2 --out " + (root / "rolling").string()},
      {"evaluate", "evaluate" + md + " --out " + (root / "evaluate").string()},
      {"ablate", "ablate" + md + " --mode threshold_lowest --levels 0,0.25,0.5 --out " + (root / "ablate").string()},
      {"ablate random", "ablate" + md + " --mode random_remove --levels 0,0.5 --out " + (root / "ablate_rr").string()},
      {"ablate decoder", "ablate" + md + " --mode decoder --compare-model " + nl + " --levels 0,0.5 --out " +
                             (root / "ablate_dec").string()},
      {"gradcheck", "gradcheck --out " + (root / "gradcheck").string()},
  };
  for (const auto& [name, args] : cmds) {
    if (run_cli(args + common) != 0) return name;
  }
  return "";
}

Outcome cli_determinism() {
  const fs::path base = work_dir() / "determinism";
  std::vector<std::map<std::string, std::string>> runs;
  std::vector<std::string> labels;
  for (int threads : {1, 8}) {
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path root = base / ("t" + std::to_string(threads) + "_" + std::to_string(rep));
      if (const std::string bad = run_all_commands(root, threads); !bad.empty()) {
        return {false, "command '" + bad + "' failed on " + std::to_string(threads) + " threads"};
      }
      runs.push_back(snapshot(root));
      labels.push_back(fmt("%d threads run %d", threads, rep + 1));
    }
  }
  for (std::size_t k = 1; k < runs.size(); ++k) {
    if (runs[k].size() != runs[0].size()) return {false, labels[k] + " wrote a different file set"};
    for (const auto& [name, body] : runs[0]) {
      const auto it = runs[k].find(name);
      if (it == runs[k].end() || it->second != body) return {false, name + " differs in " + labels[k]};
    }
  }
  return {true, fmt("%zu files identical across 2 runs on 1 thread and 2 runs on 8 threads", runs[0].size())};
}

// ------------------------------------------------------------------ 10

Outcome checkpoint_round_trip() {
  cli::RunConfig cfg;
  cfg.model.latent_dim = 3;
  cfg.model.rnn_hidden_dim = 8;
  cfg.train.num_steps = 15;
  cfg.data.context_len = 30;
  cfg.forecast.horizon = 10;
  cfg.seed = 10;
  cfg.resolve();
  const auto panel = data::simulate_linear_ssm(data::LinearSSMSpec::reference(), 80, 8, 40, cfg.seed);
  const auto res = cli::train_model(cfg, panel.train);
  const fs::path path = work_dir() / "round_trip.dssh";
  nn::save_checkpoint(path, res.params, &res.optimizer);
  const nn::Checkpoint back = nn::load_checkpoint(path);
  const auto val = cli::training_windows(panel.test, cfg);
  const double in_memory = train::validate(cfg.model, res.params, val, 99);
  const double loaded = train::validate(cfg.model, back.params, val, 99);
  const bool same_bits = std::memcmp(&in_memory, &loaded, sizeof(double)) == 0;
  return {same_bits && back.optimizer.has_value() && std::isfinite(in_memory),
          fmt("validate %.17g in memory, %.17g after reload", in_memory, loaded)};
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* s = std::getenv("DSSH_ACCEPT_SEASONAL_STEPS")) g_seasonal_steps = std::stoul(s);
  if (const char* s = std::getenv("DSSH_ACCEPT_ABLATION_STEPS")) g_ablation_steps = std::stoul(s);
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient suite", gradient_suite},
      {"KL oracle suite", kl_oracle_suite},
      {"regularized horseshoe limits", horseshoe_limits},
      {"KL cancellation under scaling", kl_cancellation},
      {"ELBO bound against the Kalman likelihood", elbo_bound},
      {"linear simulation recovery", linear_reproduction},
      {"seasonal panel against seasonal-naive", seasonal_vs_naive},
      {"ablation ordering", ablation_ordering},
      {"CLI determinism", cli_determinism},
      {"checkpoint round trip", checkpoint_round_trip},
  };
  std::set<std::size_t> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::stoul(argv[i]));
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (!wanted.empty() && !wanted.count(k + 1)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
