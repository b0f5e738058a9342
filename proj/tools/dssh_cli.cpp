// Command-line entry point: simulate, train, forecast, evaluate, ablate and
// gradcheck. Exit codes: 0 success, 1 other failure, 2 config error,
// 3 missing artifact, 4 numerical failure.

#include <omp.h>

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dssh/checkpoint.hpp"
#include "dssh/data.hpp"
#include "dssh/evaluation.hpp"
#include "dssh/forecast.hpp"
#include "dssh/grad_suite.hpp"
#include "dssh/gradcheck.hpp"
#include "dssh/pipeline.hpp"
#include "dssh/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dssh;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitMissing = 3;
constexpr int kExitNumerical = 4;

class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::vector<std::string> extras;
};

void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p)) throw MissingArtifact(std::string(what) + " not found: " + p.string());
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw MissingArtifact("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw nn::ConfigError(p.string() + ": " + e.what());
  }
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

void apply_extras(json& j, const std::vector<std::string>& extras) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    if (tok.rfind("--", 0) != 0 || tok.size() < 3) {
      throw nn::ConfigError("unexpected argument '" + tok + "'");
    }
    std::string key = tok.substr(2), value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else {
      if (i + 1 >= extras.size()) throw nn::ConfigError("override --" + key + " needs a value");
      value = extras[++i];
    }
    if (key.find('.') == std::string::npos) {
      throw nn::ConfigError("unknown option --" + key + " (config overrides use dotted paths)");
    }
    cli::apply_override(j, key, value);
  }
}

// Config precedence: file < dotted overrides < DSSH_SEED < --seed.
json assemble_config_json(json base, const Common& c) {
  if (!c.config_path.empty()) {
    require_file(c.config_path, "config");
    base = read_json(c.config_path);
  }
  if (base.is_null()) base = json::object();
  apply_extras(base, c.extras);
  if (const char* env = std::getenv("DSSH_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      base["seed"] = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
    } catch (const std::exception&) {
      throw nn::ConfigError(std::string("DSSH_SEED is not an unsigned integer: ") + env);
    }
  }
  if (c.seed) base["seed"] = *c.seed;
  return base;
}

void add_common(CLI::App* app, Common& c, bool with_config = true) {
  if (with_config) app->add_option("--config", c.config_path, "Run config JSON");
  app->add_option("--seed", c.seed, "Master seed (overrides config and DSSH_SEED)");
  app->add_option("--threads", c.threads, "Worker threads (default: all cores)")->check(CLI::PositiveNumber);
  app->allow_extras();
}

void set_threads(const Common& c) {
  if (c.threads > 0) omp_set_num_threads(c.threads);
}

// Model dims follow the data unless the config sets them explicitly.
void bind_dims(json& j, const data::SeriesBatch& series) {
  json& m = j["model"];
  if (m.is_null()) m = json::object();
  if (!m.is_object()) return;
  if (!m.contains("obs_dim")) m["obs_dim"] = series.obs_dim();
  if (!m.contains("covariate_dim")) m["covariate_dim"] = series.cov_dim();
}

data::SeriesBatch load_series(const fs::path& dir, const char* file, const cli::RunConfig& cfg,
                              bool with_latents) {
  const fs::path p = dir / file;
  require_file(p, "data file");
  data::SeriesBatch b = data::load_csv_panel(p.string(), cfg.data.csv).batch;
  const fs::path lat = dir / "true_latents.csv";
  if (with_latents && fs::is_regular_file(lat)) data::read_latents_csv(lat.string(), b);
  return b;
}

struct LoadedModel {
  cli::RunConfig cfg;
  json cfg_json;
  nn::ParameterStore params;
};

// The stored config of a trained model, with the non-model sections of an
// explicit --config and any overrides applied on top.
LoadedModel load_model(const fs::path& dir, const Common& c) {
  const fs::path ckpt = dir / "model.dssh", cfgp = dir / "config.json";
  require_file(ckpt, "checkpoint");
  require_file(cfgp, "model config");
  const json stored = read_json(cfgp);
  json base = stored;
  if (!c.config_path.empty()) {
    require_file(c.config_path, "config");
    json given = read_json(c.config_path);
    if (given.contains("model")) {
      const auto a = model::to_json(model::model_config_from_json(given["model"]));
      const auto b = model::to_json(model::model_config_from_json(stored.at("model")));
      if (a != b) throw nn::ConfigError("model section differs from the trained model in " + dir.string());
    }
    given["model"] = stored.at("model");
    base = given;
  }
  Common rest = c;
  rest.config_path.clear();
  LoadedModel m;
  m.cfg_json = assemble_config_json(base, rest);
  m.cfg = cli::run_config_from_json(m.cfg_json);
  m.params = nn::load_checkpoint(ckpt).params;
  const nn::ParameterStore expect = model::init_model_params(m.cfg.model, 0);
  for (const auto& [name, t] : expect) {
    if (!m.params.contains(name) || m.params.get(name).shape() != t.shape()) {
      throw nn::ConfigError("checkpoint " + ckpt.string() + " does not match the model config at '" +
                            name + "'");
    }
  }
  return m;
}

void write_resolved(const fs::path& out, const cli::RunConfig& cfg) {
  write_json(out / "config.json", cli::to_json(cfg));
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  Common common;
  std::string spec;
  std::string out;
  std::optional<std::size_t> n_train, n_test, length, series, period;
};

int cmd_simulate(const SimulateArgs& a) {
  json j = assemble_config_json(json::object(), a.common);
  if (!a.spec.empty()) j["data"]["spec"] = a.spec;
  if (a.n_train) j["data"]["linear"]["n_train"] = *a.n_train;
  if (a.n_test) j["data"]["linear"]["n_test"] = *a.n_test;
  if (a.series) j["data"]["seasonal"]["n_series"] = *a.series;
  if (a.period) j["data"]["seasonal"]["period"] = *a.period;
  if (a.length) {
    const std::string spec = j["data"].value("spec", std::string("linear_ssm"));
    j["data"][spec == "seasonal" ? "seasonal" : "linear"]["length"] = *a.length;
  }
  const cli::RunConfig cfg = cli::run_config_from_json(j);
  const fs::path out(a.out);
  fs::create_directories(out);

  if (cfg.data.spec == "linear_ssm") {
    const auto& l = cfg.data.linear;
    const auto panel =
        data::simulate_linear_ssm(data::LinearSSMSpec::reference(), l.n_train, l.n_test, l.length, cfg.seed);
    data::write_csv_panel((out / "train.csv").string(), panel.train);
    data::write_csv_panel((out / "test.csv").string(), panel.test);
    data::write_latents_csv((out / "true_latents.csv").string(), panel.test);
    std::printf("wrote %zu train and %zu test series of length %zu to %s\n", l.n_train, l.n_test,
                l.length, out.string().c_str());
  } else {
    data::SeasonalSpec spec;
    spec.n_series = cfg.data.seasonal.n_series;
    spec.steps = cfg.data.seasonal.length;
    spec.period = cfg.data.seasonal.period;
    const auto panel = data::simulate_seasonal_panel(spec, cfg.seed);
    if (spec.steps <= cfg.forecast.horizon) {
      throw nn::ConfigError("data.seasonal.length must exceed forecast.horizon");
    }
    // Training data stops before the final horizon, which is held out.
    data::write_csv_panel((out / "train.csv").string(),
                          panel.slice_time(0, spec.steps - cfg.forecast.horizon));
    data::write_csv_panel((out / "test.csv").string(), panel);
    std::printf("wrote %zu seasonal series of length %zu to %s\n", spec.n_series, spec.steps,
                out.string().c_str());
  }
  write_resolved(out, cfg);
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  Common common;
  std::string data_dir, out;
  std::optional<std::size_t> steps;
  std::size_t search = 0;
};

struct TrialOutcome {
  cli::RunConfig cfg;
  double best_validation = 0.0;
  std::size_t best_step = 0;
};

TrialOutcome run_training(const cli::RunConfig& cfg, const data::SeriesBatch& series, const fs::path& out) {
  fs::create_directories(out);
  write_resolved(out, cfg);
  train::TrainOptions opts;
  if (cfg.train.checkpoint_every > 0) {
    opts.checkpoint_dir = out / "checkpoints";
    fs::create_directories(*opts.checkpoint_dir);
  }
  const train::TrainResult res = cli::train_model(cfg, series, opts);
  nn::save_checkpoint(out / "model.dssh", res.params);
  nn::save_checkpoint(out / "last.dssh", res.last, &res.optimizer);
  res.log.write_csv(out / "train_log.csv");
  {
    std::ofstream v(out / "validation_log.csv", std::ios::binary);
    v.precision(17);
    v << "step,loss\n";
    for (const auto& r : res.log.validation) v << r.step << ',' << r.loss << '\n';
  }
  write_json(out / "summary.json", {{"best_validation", res.best_validation},
                                    {"best_step", res.best_step},
                                    {"num_steps", cfg.train.num_steps}});
  return {cfg, res.best_validation, res.best_step};
}

int cmd_train(const TrainArgs& a) {
  json j = assemble_config_json(json::object(), a.common);
  if (a.steps) j["train"]["num_steps"] = *a.steps;
  cli::RunConfig probe = cli::run_config_from_json(j);
  const data::SeriesBatch series = load_series(a.data_dir, "train.csv", probe, false);
  bind_dims(j, series);
  const cli::RunConfig cfg = cli::run_config_from_json(j);
  const fs::path out(a.out);

  if (a.search == 0) {
    const TrialOutcome t = run_training(cfg, series, out);
    std::printf("best validation loss %.6f at step %zu\n", t.best_validation, t.best_step);
    return 0;
  }

  // Random search over a desk-scale version of the hyperparameter grid.
  const std::vector<std::size_t> hidden{24, 32, 40, 48}, latent{4, 8, 12, 16}, layers{1, 2, 3};
  const std::vector<double> rates{1e-3, 1e-4};
  Rng rng = Rng::substream(cfg.seed, 0x736561726368);
  json trials = json::array();
  std::optional<TrialOutcome> best;
  std::size_t best_index = 0;
  for (std::size_t k = 0; k < a.search; ++k) {
    cli::RunConfig c = cfg;
    c.model.rnn_hidden_dim = hidden[rng.next_u64() % hidden.size()];
    c.model.latent_dim = latent[rng.next_u64() % latent.size()];
    c.model.rnn_layers = layers[rng.next_u64() % layers.size()];
    c.train.learning_rate = rates[rng.next_u64() % rates.size()];
    c.resolve();
    const TrialOutcome t = run_training(c, series, out / ("trial_" + std::to_string(k)));
    trials.push_back({{"trial", k},
                      {"rnn_hidden_dim", c.model.rnn_hidden_dim},
                      {"latent_dim", c.model.latent_dim},
                      {"rnn_layers", c.model.rnn_layers},
                      {"learning_rate", c.train.learning_rate},
                      {"best_validation", t.best_validation}});
    std::printf("trial %zu: hidden %zu, Q %zu, layers %zu, lr %g -> validation %.6f\n", k,
                c.model.rnn_hidden_dim, c.model.latent_dim, c.model.rnn_layers, c.train.learning_rate,
                t.best_validation);
    if (!best || t.best_validation < best->best_validation) {
      best = t;
      best_index = k;
    }
  }
  const fs::path winner = out / ("trial_" + std::to_string(best_index));
  for (const char* f : {"model.dssh", "last.dssh", "train_log.csv", "validation_log.csv", "summary.json", "config.json"}) {
    fs::copy_file(winner / f, out / f, fs::copy_options::overwrite_existing);
  }
  write_json(out / "search.json", {{"trials", trials}, {"best_trial", best_index}});
  std::printf("best trial %zu with validation loss %.6f\n", best_index, best->best_validation);
  return 0;
}

// ---------------------------------------------------------------- forecast

struct ModelDataArgs {
  Common common;
  std::string model_dir, data_dir, out;
};

struct ForecastArgs : ModelDataArgs {
  std::size_t rolling = 0;
};

int cmd_forecast(const ForecastArgs& a) {
  const LoadedModel m = load_model(a.model_dir, a.common);
  const data::SeriesBatch series = load_series(a.data_dir, "test.csv", m.cfg, false);
  const data::SeriesBatch win = cli::evaluation_windows(series, m.cfg);
  const std::size_t l = m.cfg.data.context_len, p = m.cfg.forecast.horizon;

  std::vector<fc::ForecastResult> res;
  if (a.rolling > 0) {
    res.resize(win.batch_size());
    const auto rows = static_cast<std::ptrdiff_t>(win.batch_size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < rows; ++i) {
      const std::size_t r[] = {static_cast<std::size_t>(i)};
      res[static_cast<std::size_t>(i)] = fc::rolling_forecast(m.cfg.model, m.params, win.select(r), l,
                                                              a.rolling, p, m.cfg.forecast,
                                                              static_cast<std::uint64_t>(i));
    }
  } else {
    res = fc::forecast_panel(m.cfg.model, m.params, win, l, m.cfg.forecast);
  }

  const fs::path out(a.out);
  fs::create_directories(out / "bands");
  fc::write_forecast_csv(out / "forecast.csv", res, win.ids, l);
  fc::write_samples_archive(out / "samples.dssh", res, win.ids);
  const ad::Tensor truth = eval::horizon_truth(win, l, p);
  const std::size_t mdim = win.obs_dim();
  const double lo = m.cfg.forecast.quantiles.front(), hi = m.cfg.forecast.quantiles.back();
  for (std::size_t i = 0; i < res.size(); ++i) {
    std::vector<double> tr(truth.data().begin() + static_cast<std::ptrdiff_t>(i * p * mdim),
                           truth.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * p * mdim));
    const ad::Tensor t = ad::Tensor::from({p, mdim}, std::move(tr));
    for (std::size_t k = 0; k < mdim; ++k) {
      std::string name = win.ids[i];
      if (mdim > 1) name += "_dim" + std::to_string(k);
      eval::write_band_csv(out / "bands" / (name + ".csv"), res[i], t, k, lo, hi, l);
    }
  }
  write_resolved(out, m.cfg);
  std::printf("forecast %zu series, %zu steps, %zu samples -> %s\n", res.size(), p,
              m.cfg.forecast.num_samples, out.string().c_str());
  return 0;
}

// ---------------------------------------------------------------- evaluate

int cmd_evaluate(const ModelDataArgs& a) {
  const LoadedModel m = load_model(a.model_dir, a.common);
  const data::SeriesBatch series = load_series(a.data_dir, "test.csv", m.cfg, true);
  const cli::Evaluation ev = cli::evaluate_model(m.cfg, m.params, series);
  const fs::path out(a.out);
  fs::create_directories(out);
  write_json(out / "metrics.json", ev.to_json());
  ev.model.write_csv(out / "metrics.csv");
  ev.baseline.write_csv(out / "baseline_metrics.csv");
  write_resolved(out, m.cfg);
  std::printf("ND %.6f  NRMSE %.6f  (baseline ND %.6f  NRMSE %.6f)  response recovery %.4f", ev.model.nd,
              ev.model.nrmse, ev.baseline.nd, ev.baseline.nrmse, ev.response_recovery);
  if (ev.latent_recovery) std::printf("  latent recovery %.4f", *ev.latent_recovery);
  std::printf("\n");
  return 0;
}

// ---------------------------------------------------------------- ablate

struct AblateArgs : ModelDataArgs {
  std::string mode = "threshold_lowest";
  std::string levels;
  std::string compare_dir;
};

std::vector<double> parse_levels(const std::string& s) {
  if (s.empty()) return eval::kDefaultSparsityLevels;
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw nn::ConfigError("--levels: cannot parse '" + tok + "'");
    }
  }
  return out;
}

int cmd_ablate(const AblateArgs& a) {
  const LoadedModel m = load_model(a.model_dir, a.common);
  const data::SeriesBatch series = load_series(a.data_dir, "test.csv", m.cfg, false);
  const data::SeriesBatch win = cli::evaluation_windows(series, m.cfg);
  const std::vector<double> levels = parse_levels(a.levels);
  const std::size_t l = m.cfg.data.context_len;
  const fs::path out(a.out);
  fs::create_directories(out);

  if (a.mode == "decoder") {
    if (a.compare_dir.empty()) throw nn::ConfigError("--mode decoder needs --compare-model");
    const LoadedModel other = load_model(a.compare_dir, a.common);
    const bool first_linear = m.cfg.model.decoder == model::DecoderKind::kLinear;
    const LoadedModel& lin = first_linear ? m : other;
    const LoadedModel& nl = first_linear ? other : m;
    const auto rep = eval::ablate_decoder(lin.cfg.model, lin.params, nl.cfg.model, nl.params, win, l,
                                          m.cfg.forecast, levels, m.cfg.seed);
    write_json(out / "ablation.json", rep.to_json());
    rep.linear.write_csv(out / "ablation_linear.csv");
    rep.nonlinear.write_csv(out / "ablation_nonlinear.csv");
    for (std::size_t i = 0; i < levels.size(); ++i) {
      std::printf("level %.2f: linear %+.2f%%  nonlinear %+.2f%%\n", levels[i], rep.linear.increase_pct[i],
                  rep.nonlinear.increase_pct[i]);
    }
  } else {
    const eval::AblationMode mode = eval::ablation_mode_from_string(a.mode);
    const auto rep = eval::ablate(m.cfg.model, m.params, win, l, m.cfg.forecast, mode, levels, m.cfg.seed);
    write_json(out / "ablation.json", rep.to_json());
    rep.write_csv(out / "ablation.csv");
    for (std::size_t i = 0; i < levels.size(); ++i) {
      std::printf("level %.2f: ND %.6f  increase %+.2f%%\n", levels[i], rep.nd[i], rep.increase_pct[i]);
    }
  }
  write_resolved(out, m.cfg);
  return 0;
}

// ---------------------------------------------------------------- gradcheck

struct GradArgs {
  Common common;
  std::string out;
};

int cmd_gradcheck(const GradArgs& a) {
  const cli::RunConfig cfg = cli::run_config_from_json(assemble_config_json(json::object(), a.common));
  model::GradSuiteOptions opts;
  opts.seed = cfg.seed;
  const auto cases = model::run_gradient_suite(opts);
  json report = json::array();
  std::size_t failed = 0;
  for (const auto& c : cases) {
    std::printf("%-4s %-28s max rel err %.3e over %zu coords%s%s\n", c.passed ? "ok" : "FAIL", c.name.c_str(),
                c.max_rel_err, c.coords, c.error.empty() ? "" : "  ", c.error.c_str());
    report.push_back({{"name", c.name}, {"passed", c.passed}, {"max_rel_err", c.max_rel_err}, {"coords", c.coords}});
    if (!c.passed) ++failed;
  }
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_json(fs::path(a.out) / "gradcheck.json", {{"cases", report}, {"failed", failed}});
  }
  std::printf("%zu of %zu gradient checks passed\n", cases.size() - failed, cases.size());
  if (failed > 0) throw NumericalFailure(std::to_string(failed) + " gradient checks failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep state-space forecasting with shrinkage priors"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Write simulated train/test panels as CSV");
  add_common(s, sim.common);
  s->add_option("--spec", sim.spec, "linear_ssm or seasonal")->check(CLI::IsMember({"linear_ssm", "seasonal"}));
  s->add_option("--out", sim.out, "Output directory")->required();
  s->add_option("--n-train", sim.n_train, "Training series (linear_ssm)");
  s->add_option("--n-test", sim.n_test, "Test series (linear_ssm)");
  s->add_option("--length", sim.length, "Steps per series");
  s->add_option("--series", sim.series, "Number of series (seasonal)");
  s->add_option("--period", sim.period, "Seasonal period (seasonal)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model on <data>/train.csv");
  add_common(t, tr.common);
  t->add_option("--data", tr.data_dir, "Data directory")->required();
  t->add_option("--out", tr.out, "Output directory")->required();
  t->add_option("--steps", tr.steps, "Shortcut for train.num_steps");
  t->add_option("--search", tr.search, "Random-search trials over the hyperparameter grid");

  ForecastArgs fa;
  auto* f = app.add_subcommand("forecast", "Forecast the held-out horizon of <data>/test.csv");
  add_common(f, fa.common);
  f->add_option("--model", fa.model_dir, "Trained model directory")->required();
  f->add_option("--data", fa.data_dir, "Data directory")->required();
  f->add_option("--out", fa.out, "Output directory")->required();
  f->add_option("--rolling", fa.rolling, "Rolling forecast window (steps); 0 forecasts the horizon at once");

  ModelDataArgs ea;
  auto* e = app.add_subcommand("evaluate", "Score forecasts against the held-out horizon");
  add_common(e, ea.common);
  e->add_option("--model", ea.model_dir, "Trained model directory")->required();
  e->add_option("--data", ea.data_dir, "Data directory")->required();
  e->add_option("--out", ea.out, "Output directory")->required();

  AblateArgs ab;
  auto* b = app.add_subcommand("ablate", "Sparsity ablations of a trained model");
  add_common(b, ab.common);
  b->add_option("--model", ab.model_dir, "Trained model directory")->required();
  b->add_option("--data", ab.data_dir, "Data directory")->required();
  b->add_option("--out", ab.out, "Output directory")->required();
  b->add_option("--mode", ab.mode, "random_remove, threshold_lowest, magnitude or decoder");
  b->add_option("--levels", ab.levels, "Comma-separated sparsity levels in [0, 1)");
  b->add_option("--compare-model", ab.compare_dir, "Second model for --mode decoder");

  GradArgs ga;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
  add_common(g, ga.common);
  g->add_option("--out", ga.out, "Directory for gradcheck.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitConfig;
  }

  auto run = [&]() -> int {
    auto prepare = [](Common& c, CLI::App* sub) {
      c.extras = sub->remaining();
      set_threads(c);
    };
    if (*s) {
      prepare(sim.common, s);
      return cmd_simulate(sim);
    }
    if (*t) {
      prepare(tr.common, t);
      return cmd_train(tr);
    }
    if (*f) {
      prepare(fa.common, f);
      return cmd_forecast(fa);
    }
    if (*e) {
      prepare(ea.common, e);
      return cmd_evaluate(ea);
    }
    if (*b) {
      prepare(ab.common, b);
      return cmd_ablate(ab);
    }
    prepare(ga.common, g);
    return cmd_gradcheck(ga);
  };

  try {
    return run();
  } catch (const nn::ConfigError& ex) {
    std::cerr << "config error: " << ex.what() << '\n';
    return kExitConfig;
  } catch (const MissingArtifact& ex) {
    std::cerr << "missing artifact: " << ex.what() << '\n';
    return kExitMissing;
  } catch (const nn::ArchiveError& ex) {
    std::cerr << "unreadable artifact: " << ex.what() << '\n';
    return kExitMissing;
  } catch (const NumericalFailure& ex) {
    std::cerr << "numerical failure: " << ex.what() << '\n';
    return kExitNumerical;
  } catch (const train::TrainingAborted& ex) {
    std::cerr << "numerical failure: " << ex.what() << '\n';
    return kExitNumerical;
  } catch (const model::NumericalError& ex) {
    std::cerr << "numerical failure: " << ex.what() << '\n';
    return kExitNumerical;
  } catch (const data::NumericalError& ex) {
    std::cerr << "numerical failure: " << ex.what() << '\n';
    return kExitNumerical;
  } catch (const ad::DomainError& ex) {
    std::cerr << "numerical failure: " << ex.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitFailure;
  }
}
