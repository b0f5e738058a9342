#include "dssh/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace dssh::eval {

using ad::Tensor;

namespace {

void check_same(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ad::ShapeError(std::string(what) + ": shapes " + ad::shape_to_string(a.shape()) +
                         " and " + ad::shape_to_string(b.shape()) + " differ");
  }
}

double abs_sum(const Tensor& y) {
  double s = 0.0;
  for (double v : y.data()) s += std::abs(v);
  return s;
}

}  // namespace

double nd(const Tensor& y_true, const Tensor& y_pred) {
  check_same(y_true, y_pred, "nd");
  const double denom = abs_sum(y_true);
  if (!(denom > 0.0)) throw EvalError("nd: truth is all zero");
  double num = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) num += std::abs(y_true.at(i) - y_pred.at(i));
  return num / denom;
}

double nrmse(const Tensor& y_true, const Tensor& y_pred) {
  check_same(y_true, y_pred, "nrmse");
  const double denom = abs_sum(y_true);
  if (!(denom > 0.0)) throw EvalError("nrmse: truth is all zero");
  const double n = static_cast<double>(y_true.size());
  double sq = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double d = y_true.at(i) - y_pred.at(i);
    sq += d * d;
  }
  return std::sqrt(sq / n) / (denom / n);
}

Recovery recovery_rate(const Tensor& truth, const Tensor& samples, double level) {
  if (!(level > 0.0 && level < 1.0)) throw EvalError("recovery_rate: level must lie in (0, 1)");
  if (truth.rank() != 2 || samples.rank() != 3 || samples.dim(1) != truth.dim(0) ||
      samples.dim(2) != truth.dim(1)) {
    throw ad::ShapeError("recovery_rate: truth " + ad::shape_to_string(truth.shape()) +
                         " vs samples " + ad::shape_to_string(samples.shape()));
  }
  const std::size_t n = samples.dim(0), steps = truth.dim(0), d = truth.dim(1);
  if (n < 2) throw EvalError("recovery_rate: need at least 2 samples");
  const double lo_q = (1.0 - level) / 2.0, hi_q = (1.0 + level) / 2.0;
  Recovery r;
  std::vector<double> col(n);
  double total = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    double hit = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      for (std::size_t i = 0; i < n; ++i) col[i] = samples.at(i, t, k);
      const double lo = fc::empirical_quantile(col, lo_q);
      const double hi = fc::empirical_quantile(col, hi_q);
      const double y = truth.at(t, k);
      if (y >= lo && y <= hi) hit += 1.0;
    }
    r.per_step.push_back(hit / static_cast<double>(d));
    total += hit;
  }
  r.mean = total / static_cast<double>(steps * d);
  return r;
}

Tensor Alignment::apply(const Tensor& paths) const {
  const std::size_t q = static_cast<std::size_t>(weights.rows());
  const std::size_t d = static_cast<std::size_t>(weights.cols());
  if (paths.rank() < 1 || paths.shape().back() != q) {
    throw ad::ShapeError("alignment expects trailing dim " + std::to_string(q) + ", got " +
                         ad::shape_to_string(paths.shape()));
  }
  const std::size_t rows = paths.size() / q;
  std::vector<double> out(rows * d);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      double s = intercept(static_cast<Eigen::Index>(j));
      for (std::size_t k = 0; k < q; ++k) {
        s += paths.at(r * q + k) * weights(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j));
      }
      out[r * d + j] = s;
    }
  }
  ad::Shape shape = paths.shape();
  shape.back() = d;
  return Tensor::from(shape, std::move(out));
}

nlohmann::json Alignment::to_json() const {
  nlohmann::json w = nlohmann::json::array();
  for (Eigen::Index i = 0; i < weights.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(weights.cols()));
    for (Eigen::Index j = 0; j < weights.cols(); ++j) row[static_cast<std::size_t>(j)] = weights(i, j);
    w.push_back(row);
  }
  std::vector<double> b(static_cast<std::size_t>(intercept.size()));
  for (Eigen::Index j = 0; j < intercept.size(); ++j) b[static_cast<std::size_t>(j)] = intercept(j);
  return {{"weights", w}, {"intercept", b}};
}

Alignment align_latents(const Tensor& truth, const Tensor& mean_paths) {
  if (truth.rank() != 2 || mean_paths.rank() != 2 || truth.dim(0) != mean_paths.dim(0)) {
    throw ad::ShapeError("align_latents: truth " + ad::shape_to_string(truth.shape()) +
                         " vs paths " + ad::shape_to_string(mean_paths.shape()));
  }
  const auto steps = static_cast<Eigen::Index>(truth.dim(0));
  const auto d = static_cast<Eigen::Index>(truth.dim(1));
  const auto q = static_cast<Eigen::Index>(mean_paths.dim(1));
  if (steps < 2 * q) throw EvalError("align_latents: need T >= 2Q");
  Eigen::MatrixXd x(steps, q + 1);
  Eigen::MatrixXd y(steps, d);
  for (Eigen::Index t = 0; t < steps; ++t) {
    for (Eigen::Index k = 0; k < q; ++k) {
      x(t, k) = mean_paths.at(static_cast<std::size_t>(t), static_cast<std::size_t>(k));
    }
    x(t, q) = 1.0;
    for (Eigen::Index k = 0; k < d; ++k) {
      y(t, k) = truth.at(static_cast<std::size_t>(t), static_cast<std::size_t>(k));
    }
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < q + 1) {
    throw EvalError("align_latents: rank-deficient design (rank " + std::to_string(qr.rank()) +
                    " of " + std::to_string(q + 1) + ")");
  }
  const Eigen::MatrixXd beta = qr.solve(y);
  Alignment a;
  a.weights = beta.topRows(q);
  a.intercept = beta.row(q);
  return a;
}

Tensor persistence_baseline(const Tensor& context, std::size_t horizon, std::size_t period) {
  if (context.rank() != 2 || context.dim(0) < 1) {
    throw ad::ShapeError("persistence_baseline: context must be [T x M] with T >= 1");
  }
  const std::size_t steps = context.dim(0), m = context.dim(1);
  std::vector<double> out(horizon * m);
  const bool seasonal = period > 0 && steps >= period;
  for (std::size_t t = 0; t < horizon; ++t) {
    // Seasonal lag wraps around whole periods for horizons beyond one period.
    const std::size_t src = seasonal ? steps - period + (t % period) : steps - 1;
    for (std::size_t k = 0; k < m; ++k) out[t * m + k] = context.at(src, k);
  }
  return Tensor::from({horizon, m}, std::move(out));
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& s : per_series) {
    per.push_back({{"id", s.id},
                   {"nd", std::isfinite(s.nd) ? nlohmann::json(s.nd) : nlohmann::json()},
                   {"nrmse", std::isfinite(s.nrmse) ? nlohmann::json(s.nrmse) : nlohmann::json()}});
  }
  return {{"nd", nd}, {"nrmse", nrmse}, {"num_samples", num_samples}, {"per_series", per}};
}

void MetricReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw EvalError("cannot write '" + path.string() + "'");
  out.precision(17);
  out << "series_id,nd,nrmse\n";
  out << "ALL," << nd << ',' << nrmse << '\n';
  for (const auto& s : per_series) out << s.id << ',' << s.nd << ',' << s.nrmse << '\n';
}

Tensor horizon_truth(const data::SeriesBatch& panel, std::size_t context_len, std::size_t horizon) {
  const std::size_t b = panel.batch_size(), m = panel.obs_dim();
  std::vector<double> out(b * horizon * m);
  for (std::size_t i = 0; i < b; ++i) {
    if (panel.lengths[i] < context_len + horizon) {
      throw EvalError("series '" + panel.ids[i] + "' is shorter than context + horizon");
    }
    for (std::size_t t = 0; t < horizon; ++t) {
      for (std::size_t k = 0; k < m; ++k) {
        out[(i * horizon + t) * m + k] = panel.y_at(i, context_len + t, k);
      }
    }
  }
  return Tensor::from({b, horizon, m}, std::move(out));
}

Tensor stack_band(const std::vector<fc::ForecastResult>& res, std::size_t qi) {
  if (res.empty()) throw EvalError("stack_band: no forecasts");
  const std::size_t p = res[0].bands.at(qi).dim(0), m = res[0].bands.at(qi).dim(1);
  std::vector<double> out;
  out.reserve(res.size() * p * m);
  for (const auto& r : res) {
    const auto d = r.bands.at(qi).data();
    out.insert(out.end(), d.begin(), d.end());
  }
  return Tensor::from({res.size(), p, m}, std::move(out));
}

Tensor stack_median(const std::vector<fc::ForecastResult>& res) {
  if (res.empty()) throw EvalError("stack_median: no forecasts");
  const std::size_t n = res[0].samples.dim(0), p = res[0].samples.dim(1), m = res[0].samples.dim(2);
  std::vector<double> out(res.size() * p * m);
  std::vector<double> col(n);
  for (std::size_t s = 0; s < res.size(); ++s) {
    for (std::size_t t = 0; t < p; ++t) {
      for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t i = 0; i < n; ++i) col[i] = res[s].samples.at(i, t, k);
        out[(s * p + t) * m + k] = fc::empirical_quantile(col, 0.5);
      }
    }
  }
  return Tensor::from({res.size(), p, m}, std::move(out));
}

MetricReport score(const Tensor& truth, const Tensor& median, const std::vector<std::string>& ids,
                   std::size_t num_samples) {
  check_same(truth, median, "score");
  MetricReport rep;
  rep.nd = nd(truth, median);
  rep.nrmse = nrmse(truth, median);
  rep.num_samples = num_samples;
  const std::size_t b = truth.dim(0);
  if (ids.size() != b) throw EvalError("score: id count mismatch");
  const std::size_t per = truth.size() / b;
  for (std::size_t s = 0; s < b; ++s) {
    std::vector<double> yt(truth.data().begin() + static_cast<std::ptrdiff_t>(s * per),
                           truth.data().begin() + static_cast<std::ptrdiff_t>((s + 1) * per));
    std::vector<double> yp(median.data().begin() + static_cast<std::ptrdiff_t>(s * per),
                           median.data().begin() + static_cast<std::ptrdiff_t>((s + 1) * per));
    const Tensor a = Tensor::from({per}, std::move(yt));
    const Tensor p = Tensor::from({per}, std::move(yp));
    SeriesMetric sm{ids[s], std::nan(""), std::nan("")};
    if (abs_sum(a) > 0.0) {
      sm.nd = nd(a, p);
      sm.nrmse = nrmse(a, p);
    }
    rep.per_series.push_back(sm);
  }
  return rep;
}

void write_band_csv(const std::filesystem::path& path, const fc::ForecastResult& res,
                    const Tensor& truth, std::size_t dim, double lower_q, double upper_q,
                    std::size_t first_step) {
  const std::size_t n = res.samples.dim(0), p = res.samples.dim(1);
  if (truth.rank() != 2 || truth.dim(0) != p) throw ad::ShapeError("write_band_csv: truth must be [p x M]");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw EvalError("cannot write '" + path.string() + "'");
  out.precision(17);
  out << "t,lower,median,upper,truth\n";
  std::vector<double> col(n);
  for (std::size_t t = 0; t < p; ++t) {
    for (std::size_t i = 0; i < n; ++i) col[i] = res.samples.at(i, t, dim);
    const double lo = fc::empirical_quantile(col, lower_q);
    const double med = fc::empirical_quantile(col, 0.5);
    const double hi = fc::empirical_quantile(col, upper_q);
    out << first_step + t << ',' << lo << ',' << med << ',' << hi << ',' << truth.at(t, dim) << '\n';
  }
}

std::string to_string(AblationMode m) {
  switch (m) {
    case AblationMode::kRandomRemove: return "random_remove";
    case AblationMode::kThresholdLowest: return "threshold_lowest";
    case AblationMode::kMagnitude: return "magnitude";
  }
  return "unknown";
}

AblationMode ablation_mode_from_string(const std::string& s) {
  if (s == "random_remove") return AblationMode::kRandomRemove;
  if (s == "threshold_lowest") return AblationMode::kThresholdLowest;
  if (s == "magnitude") return AblationMode::kMagnitude;
  throw nn::ConfigError("unknown ablation mode '" + s +
                        "' (expected random_remove, threshold_lowest or magnitude)");
}

nlohmann::json AblationReport::to_json() const {
  return {{"mode", mode},
          {"levels", levels},
          {"nd", nd},
          {"increase_pct", increase_pct},
          {"base_nd", base_nd}};
}

void AblationReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw EvalError("cannot write '" + path.string() + "'");
  out.precision(17);
  out << "mode,level,nd,increase_pct\n";
  for (std::size_t i = 0; i < levels.size(); ++i) {
    out << mode << ',' << levels[i] << ',' << nd[i] << ',' << increase_pct[i] << '\n';
  }
}

nlohmann::json DecoderAblation::to_json() const {
  return {{"linear", linear.to_json()}, {"nonlinear", nonlinear.to_json()}};
}

namespace {

void check_levels(const std::vector<double>& levels) {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!(levels[i] >= 0.0 && levels[i] < 1.0)) {
      throw EvalError("ablation levels must lie in [0, 1), got " + std::to_string(levels[i]));
    }
    if (i > 0 && levels[i] < levels[i - 1]) throw EvalError("ablation levels must be ascending");
  }
}

// Coordinate order (lowest key first) for one series; ties break by index.
std::vector<std::size_t> rank_by(const Tensor& paths, bool absolute) {
  const std::size_t n = paths.dim(0), coords = paths.dim(1) * paths.dim(2);
  std::vector<double> key(coords), col(n);
  for (std::size_t c = 0; c < coords; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      const double v = paths.at(i * coords + c);
      col[i] = absolute ? std::abs(v) : v;
    }
    key[c] = fc::empirical_quantile(col, 0.5);
  }
  std::vector<std::size_t> order(coords);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
  return order;
}

}  // namespace

AblationReport ablate(const model::ModelConfig& mcfg, const nn::ParameterStore& params,
                      const data::SeriesBatch& panel, std::size_t context_len,
                      const fc::ForecastConfig& fcfg, AblationMode mode,
                      const std::vector<double>& levels, std::uint64_t seed) {
  check_levels(levels);
  if (mode != AblationMode::kMagnitude && !mcfg.use_shrinkage) {
    throw EvalError("shrinkage ablation needs a model with shrinkage enabled");
  }
  const auto base = fc::forecast_panel(mcfg, params, panel, context_len, fcfg, true);
  const Tensor truth = horizon_truth(panel, context_len, fcfg.horizon);

  AblationReport rep;
  rep.mode = to_string(mode);
  rep.levels = levels;
  rep.base_nd = nd(truth, stack_median(base));

  const std::size_t steps = context_len + fcfg.horizon, q = mcfg.latent_dim;
  const std::size_t coords = steps * q;
  std::vector<std::vector<std::size_t>> order(panel.batch_size());
  for (std::size_t s = 0; s < panel.batch_size(); ++s) {
    if (mode == AblationMode::kRandomRemove) {
      order[s].resize(coords);
      std::iota(order[s].begin(), order[s].end(), 0);
      Rng rng(derive_seed(seed, s));
      std::shuffle(order[s].begin(), order[s].end(), rng.engine());
    } else if (mode == AblationMode::kThresholdLowest) {
      order[s] = rank_by(base[s].shrink_scales, false);
    } else {
      order[s] = rank_by(base[s].latents, true);
    }
  }

  for (double level : levels) {
    const auto k = static_cast<std::size_t>(std::llround(level * static_cast<double>(coords)));
    if (k == 0) {
      rep.nd.push_back(rep.base_nd);
      rep.increase_pct.push_back(0.0);
      continue;
    }
    std::vector<fc::LatentIntervention> edits(panel.batch_size());
    for (std::size_t s = 0; s < panel.batch_size(); ++s) {
      std::vector<double> mask(coords, 0.0);
      for (std::size_t j = 0; j < k; ++j) mask[order[s][j]] = 1.0;
      Tensor t = Tensor::from({steps, q}, std::move(mask));
      if (mode == AblationMode::kRandomRemove) {
        edits[s].unit_scale = t;
      } else {
        edits[s].zero = t;
      }
    }
    const auto res = fc::forecast_panel(mcfg, params, panel, context_len, fcfg, false, &edits);
    const double v = nd(truth, stack_median(res));
    rep.nd.push_back(v);
    rep.increase_pct.push_back(100.0 * (v - rep.base_nd) / rep.base_nd);
  }
  return rep;
}

AblationReport ablate_shrinkage(const model::ModelConfig& mcfg, const nn::ParameterStore& params,
                                const data::SeriesBatch& panel, std::size_t context_len,
                                const fc::ForecastConfig& fcfg, AblationMode mode,
                                const std::vector<double>& levels, std::uint64_t seed) {
  if (mode == AblationMode::kMagnitude) {
    throw EvalError("ablate_shrinkage: mode must be random_remove or threshold_lowest");
  }
  return ablate(mcfg, params, panel, context_len, fcfg, mode, levels, seed);
}

DecoderAblation ablate_decoder(const model::ModelConfig& linear_cfg,
                               const nn::ParameterStore& linear_params,
                               const model::ModelConfig& nonlinear_cfg,
                               const nn::ParameterStore& nonlinear_params,
                               const data::SeriesBatch& panel, std::size_t context_len,
                               const fc::ForecastConfig& fcfg, const std::vector<double>& levels,
                               std::uint64_t seed) {
  model::ModelConfig a = linear_cfg, b = nonlinear_cfg;
  if (a.decoder != model::DecoderKind::kLinear || b.decoder != model::DecoderKind::kNonlinear) {
    throw EvalError("ablate_decoder: expected one linear and one nonlinear decoder");
  }
  b.decoder = a.decoder;
  if (model::to_json(a) != model::to_json(b)) {
    throw EvalError("ablate_decoder: models differ in more than the decoder");
  }
  DecoderAblation out;
  out.linear = ablate(linear_cfg, linear_params, panel, context_len, fcfg, AblationMode::kMagnitude,
                      levels, seed);
  out.nonlinear = ablate(nonlinear_cfg, nonlinear_params, panel, context_len, fcfg,
                         AblationMode::kMagnitude, levels, seed);
  return out;
}

}  // namespace dssh::eval
