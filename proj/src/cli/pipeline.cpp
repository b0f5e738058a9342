#include "dssh/pipeline.hpp"

#include <cmath>

#include "dssh/json_config.hpp"

namespace dssh::cli {

using nlohmann::json;

void DataConfig::validate() const {
  if (spec != "linear_ssm" && spec != "seasonal") {
    throw nn::ConfigError("data.spec: expected \"linear_ssm\" or \"seasonal\", got \"" + spec + "\"");
  }
  if (context_len < 1) throw nn::ConfigError("data.context_len must be >= 1");
  if (linear.length < 1) throw nn::ConfigError("data.linear.length must be >= 1");
  if (seasonal.period < 2) throw nn::ConfigError("data.seasonal.period must be >= 2");
}

void RunConfig::resolve() {
  train.seed = seed;
  forecast.seed = seed;
  model.validate();
  train.validate();
  forecast.validate();
  data.validate();
}

json to_json(const DataConfig& c) {
  return {{"spec", c.spec},
          {"linear", {{"n_train", c.linear.n_train}, {"n_test", c.linear.n_test}, {"length", c.linear.length}}},
          {"seasonal",
           {{"n_series", c.seasonal.n_series},
            {"length", c.seasonal.length},
            {"period", c.seasonal.period}}},
          {"context_len", c.context_len},
          {"stride", c.stride},
          {"baseline_period", c.baseline_period},
          {"csv",
           {{"hour_of_day", c.csv.hour_of_day},
            {"day_of_week", c.csv.day_of_week},
            {"gap_flag", c.csv.gap_flag},
            {"extra_covariates", c.csv.extra_covariates}}}};
}

json to_json(const RunConfig& c) {
  return {{"model", model::to_json(c.model)},
          {"train", train::to_json(c.train)},
          {"forecast", fc::to_json(c.forecast)},
          {"data", to_json(c.data)},
          {"seed", c.seed}};
}

namespace {

DataConfig data_config_from_json(const json& j) {
  DataConfig c;
  ObjectReader r(j, "data");
  r.read("spec", c.spec);
  if (const json* lin = r.child("linear")) {
    ObjectReader l(*lin, "data.linear");
    l.read("n_train", c.linear.n_train);
    l.read("n_test", c.linear.n_test);
    l.read("length", c.linear.length);
    l.finish();
  }
  if (const json* sea = r.child("seasonal")) {
    ObjectReader s(*sea, "data.seasonal");
    s.read("n_series", c.seasonal.n_series);
    s.read("length", c.seasonal.length);
    s.read("period", c.seasonal.period);
    s.finish();
  }
  r.read("context_len", c.context_len);
  r.read("stride", c.stride);
  r.read("baseline_period", c.baseline_period);
  if (const json* csv = r.child("csv")) {
    ObjectReader s(*csv, "data.csv");
    s.read("hour_of_day", c.csv.hour_of_day);
    s.read("day_of_week", c.csv.day_of_week);
    s.read("gap_flag", c.csv.gap_flag);
    s.read("extra_covariates", c.csv.extra_covariates);
    s.finish();
  }
  r.finish();
  return c;
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  ObjectReader r(j, "config");
  if (const json* m = r.child("model")) c.model = model::model_config_from_json(*m, "model");
  if (const json* t = r.child("train")) c.train = train::train_config_from_json(*t, "train");
  if (const json* f = r.child("forecast")) c.forecast = fc::forecast_config_from_json(*f, "forecast");
  if (const json* d = r.child("data")) c.data = data_config_from_json(*d);
  r.read("seed", c.seed);
  r.finish();
  c.resolve();
  return c;
}

void apply_override(json& j, const std::string& dotted, const std::string& value) {
  if (dotted.empty()) throw nn::ConfigError("empty override path");
  json* node = &j;
  std::size_t begin = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', begin);
    const std::string key = dotted.substr(begin, dot == std::string::npos ? std::string::npos : dot - begin);
    if (key.empty()) throw nn::ConfigError("malformed override path '" + dotted + "'");
    if (!node->is_object()) {
      if (!node->is_null()) throw nn::ConfigError("override '" + dotted + "' descends into a non-object");
      *node = json::object();
    }
    if (dot == std::string::npos) {
      json parsed = json::parse(value, nullptr, false);
      (*node)[key] = parsed.is_discarded() ? json(value) : std::move(parsed);
      return;
    }
    node = &(*node)[key];
    begin = dot + 1;
  }
}

data::SeriesBatch training_windows(const data::SeriesBatch& series, const RunConfig& cfg) {
  const std::size_t stride = cfg.data.stride == 0 ? cfg.window_len() : cfg.data.stride;
  const auto ws = data::make_windows(series, cfg.data.context_len, cfg.forecast.horizon, stride);
  if (ws.windows.empty()) {
    throw data::DataError("no series is long enough for a window of " +
                          std::to_string(cfg.window_len()) + " steps");
  }
  return train::standardize(data::extract_windows(series, ws.windows), cfg.data.context_len);
}

data::SeriesBatch evaluation_windows(const data::SeriesBatch& series, const RunConfig& cfg) {
  const std::size_t w = cfg.window_len();
  std::vector<data::Window> windows;
  for (std::size_t i = 0; i < series.batch_size(); ++i) {
    if (series.lengths[i] < w) {
      throw data::DataError("series '" + series.ids[i] + "' has " + std::to_string(series.lengths[i]) +
                            " steps, fewer than context + horizon = " + std::to_string(w));
    }
    windows.push_back({i, series.lengths[i] - w, cfg.data.context_len, cfg.forecast.horizon});
  }
  data::SeriesBatch out = data::extract_windows(series, windows);
  out.ids = series.ids;
  return out;
}

train::TrainResult train_model(const RunConfig& cfg, const data::SeriesBatch& series,
                               const train::TrainOptions& opts,
                               std::optional<nn::ParameterStore> init) {
  if (series.obs_dim() != cfg.model.obs_dim || series.cov_dim() != cfg.model.covariate_dim) {
    throw nn::ConfigError("model dims (obs " + std::to_string(cfg.model.obs_dim) + ", covariates " +
                          std::to_string(cfg.model.covariate_dim) + ") do not match the data (" +
                          std::to_string(series.obs_dim()) + ", " + std::to_string(series.cov_dim()) + ")");
  }
  const data::SeriesBatch windows = training_windows(series, cfg);
  const auto split = train::split_train_validation(windows, cfg.train.validation_fraction,
                                                   derive_seed(cfg.train.seed, 0x73706c));
  return train::train(cfg.model, cfg.train, split.train, split.validation, std::move(init), opts);
}

json Evaluation::to_json() const {
  json j{{"model", model.to_json()},
         {"baseline", baseline.to_json()},
         {"response_recovery_90", response_recovery}};
  if (latent_recovery) {
    j["latent_recovery_90"] = *latent_recovery;
    json maps = json::array();
    for (std::size_t i = 0; i < alignments.size(); ++i) {
      json a = alignments[i].to_json();
      a["id"] = windows.ids[i];
      maps.push_back(a);
    }
    j["alignments"] = maps;
  }
  return j;
}

Evaluation evaluate_model(const RunConfig& cfg, const nn::ParameterStore& params,
                          const data::SeriesBatch& series) {
  Evaluation ev;
  ev.windows = evaluation_windows(series, cfg);
  const std::size_t l = cfg.data.context_len, p = cfg.forecast.horizon, b = ev.windows.batch_size();
  const bool latents = ev.windows.has_latents();
  ev.forecasts = fc::forecast_panel(cfg.model, params, ev.windows, l, cfg.forecast, latents);

  const ad::Tensor truth = eval::horizon_truth(ev.windows, l, p);
  ev.model = eval::score(truth, eval::stack_median(ev.forecasts), ev.windows.ids,
                         cfg.forecast.num_samples);

  const std::size_t m = ev.windows.obs_dim();
  std::vector<double> base;
  base.reserve(b * p * m);
  const ad::Tensor ctx = ev.windows.slice_time(0, l).y;
  for (std::size_t i = 0; i < b; ++i) {
    std::vector<double> row(ctx.data().begin() + static_cast<std::ptrdiff_t>(i * l * m),
                            ctx.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * l * m));
    const ad::Tensor pred =
        eval::persistence_baseline(ad::Tensor::from({l, m}, std::move(row)), p, cfg.data.baseline_period);
    base.insert(base.end(), pred.data().begin(), pred.data().end());
  }
  ev.baseline = eval::score(truth, ad::Tensor::from({b, p, m}, std::move(base)), ev.windows.ids, 0);

  double rec = 0.0, lat = 0.0;
  const std::size_t n = cfg.forecast.num_samples, q = cfg.model.latent_dim;
  for (std::size_t i = 0; i < b; ++i) {
    std::vector<double> tr(truth.data().begin() + static_cast<std::ptrdiff_t>(i * p * m),
                           truth.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * p * m));
    rec += eval::recovery_rate(ad::Tensor::from({p, m}, std::move(tr)), ev.forecasts[i].samples, 0.9).mean;
    if (!latents) continue;

    const ad::Tensor& z = ev.forecasts[i].latents;  // [n x (l + p) x q]
    const std::size_t d = ev.windows.latents.dim(2);
    std::vector<double> mean(l * q, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t t = 0; t < l; ++t) {
        for (std::size_t k = 0; k < q; ++k) mean[t * q + k] += z.at(s, t, k) / static_cast<double>(n);
      }
    }
    std::vector<double> beta_ctx(l * d), beta_hor(p * d), z_hor(n * p * q);
    for (std::size_t t = 0; t < l + p; ++t) {
      for (std::size_t k = 0; k < d; ++k) {
        const double v = ev.windows.latents.at(i, t, k);
        (t < l ? beta_ctx[t * d + k] : beta_hor[(t - l) * d + k]) = v;
      }
    }
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t t = 0; t < p; ++t) {
        for (std::size_t k = 0; k < q; ++k) z_hor[(s * p + t) * q + k] = z.at(s, l + t, k);
      }
    }
    const eval::Alignment a = eval::align_latents(ad::Tensor::from({l, d}, std::move(beta_ctx)),
                                                  ad::Tensor::from({l, q}, std::move(mean)));
    const ad::Tensor mapped = a.apply(ad::Tensor::from({n, p, q}, std::move(z_hor)));
    lat += eval::recovery_rate(ad::Tensor::from({p, d}, std::move(beta_hor)), mapped, 0.9).mean;
    ev.alignments.push_back(a);
  }
  ev.response_recovery = rec / static_cast<double>(b);
  if (latents) ev.latent_recovery = lat / static_cast<double>(b);
  return ev;
}

}  // namespace dssh::cli
