#include "dssh/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "dssh/checkpoint.hpp"
#include "dssh/json_config.hpp"
#include "dssh/ops.hpp"

namespace dssh::fc {

using ad::Tensor;

void ForecastConfig::validate() const {
  if (horizon < 1) throw nn::ConfigError("forecast.horizon must be >= 1");
  if (num_samples < 1) throw nn::ConfigError("forecast.num_samples must be >= 1");
  for (double q : quantiles) {
    if (!(q > 0.0 && q < 1.0)) throw nn::ConfigError("forecast.quantiles must lie in (0, 1)");
  }
  if (quantiles.empty()) throw nn::ConfigError("forecast.quantiles must not be empty");
  for (std::size_t i = 1; i < quantiles.size(); ++i) {
    if (!(quantiles[i] > quantiles[i - 1])) {
      throw nn::ConfigError("forecast.quantiles must be strictly ascending");
    }
  }
}

nlohmann::json to_json(const ForecastConfig& c) {
  return {{"horizon", c.horizon},
          {"num_samples", c.num_samples},
          {"quantiles", c.quantiles},
          {"seed", c.seed},
          {"frozen_noise", c.frozen_noise},
          {"lambda_source", c.lambda_source == LambdaSource::kInference ? "inference" : "generative"}};
}

ForecastConfig forecast_config_from_json(const nlohmann::json& j, const std::string& path) {
  ForecastConfig c;
  ObjectReader r(j, path);
  r.read("horizon", c.horizon);
  r.read("num_samples", c.num_samples);
  r.read("quantiles", c.quantiles);
  r.read("seed", c.seed);
  r.read("frozen_noise", c.frozen_noise);
  std::string src = "inference";
  r.read("lambda_source", src);
  if (src == "inference") {
    c.lambda_source = LambdaSource::kInference;
  } else if (src == "generative") {
    c.lambda_source = LambdaSource::kGenerative;
  } else {
    throw nn::ConfigError(r.field("lambda_source") +
                          ": expected \"inference\" or \"generative\", got \"" + src + "\"");
  }
  r.finish();
  c.validate();
  return c;
}

double empirical_quantile(std::vector<double>& v, double q) {
  if (v.empty()) throw std::invalid_argument("empirical_quantile: no values");
  std::sort(v.begin(), v.end());
  const double h = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

namespace {

// [n x d] tensor with every row equal to `row`.
Tensor tile_rows(std::span<const double> row, std::size_t n) {
  std::vector<double> v(n * row.size());
  for (std::size_t i = 0; i < n; ++i) std::copy(row.begin(), row.end(), v.begin() + i * row.size());
  return Tensor::from({n, row.size()}, std::move(v));
}

void check_edit(const LatentIntervention* edit, std::size_t steps, std::size_t q) {
  if (!edit) return;
  for (const Tensor* t : {&edit->unit_scale, &edit->zero}) {
    if (t->defined() && (t->rank() != 2 || t->dim(0) != steps || t->dim(1) != q)) {
      throw ForecastError("latent intervention must be [" + std::to_string(steps) + " x " +
                          std::to_string(q) + "], got " + ad::shape_to_string(t->shape()));
    }
  }
}

// Replaces scale entries by 1 where the edit asks for it (row t of the edit,
// applied to every path).
Tensor apply_unit_scale(const Tensor& scale, const LatentIntervention* edit, std::size_t t) {
  if (!edit || !edit->unit_scale.defined()) return scale;
  const std::size_t n = scale.dim(0), q = scale.dim(1);
  std::vector<double> v(scale.data().begin(), scale.data().end());
  for (std::size_t k = 0; k < q; ++k) {
    if (edit->unit_scale.at(t, k) != 0.0) {
      for (std::size_t i = 0; i < n; ++i) v[i * q + k] = 1.0;
    }
  }
  return Tensor::from({n, q}, std::move(v));
}

Tensor apply_zero(const Tensor& z, const LatentIntervention* edit, std::size_t t) {
  if (!edit || !edit->zero.defined()) return z;
  const std::size_t n = z.dim(0), q = z.dim(1);
  std::vector<double> v(z.data().begin(), z.data().end());
  for (std::size_t k = 0; k < q; ++k) {
    if (edit->zero.at(t, k) != 0.0) {
      for (std::size_t i = 0; i < n; ++i) v[i * q + k] = 0.0;
    }
  }
  return Tensor::from({n, q}, std::move(v));
}

void record(std::vector<double>& dst, const Tensor& x, std::size_t t, std::size_t steps) {
  const std::size_t n = x.dim(0), q = x.dim(1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < q; ++k) dst[(i * steps + t) * q + k] = x.at(i, k);
  }
}

Tensor generative_lambda_sq(RowRngs& rngs, std::size_t q) {
  std::vector<double> v(rngs.size() * q);
  for (std::size_t i = 0; i < rngs.size(); ++i) {
    for (std::size_t k = 0; k < q; ++k) {
      const double alpha = rngs[i].gamma(0.5, 1.0);
      const double beta = 1.0 / rngs[i].gamma(0.5, 1.0);
      v[i * q + k] = std::max(alpha * beta, std::numeric_limits<double>::min());
    }
  }
  return Tensor::from({rngs.size(), q}, std::move(v));
}

}  // namespace

ForecastResult forecast(const model::ModelConfig& mcfg, const nn::ParameterStore& params,
                        const data::SeriesBatch& history, const Tensor& future_u,
                        const ForecastConfig& fcfg, std::uint64_t key, bool keep_latents,
                        const LatentIntervention* edit) {
  fcfg.validate();
  if (history.batch_size() != 1) throw ForecastError("forecast: history must hold one series");
  const std::size_t t_hist = history.lengths[0];
  const std::size_t p = fcfg.horizon, n = fcfg.num_samples;
  const std::size_t m = mcfg.obs_dim, nc = mcfg.covariate_dim, q = mcfg.latent_dim;
  if (t_hist < 1) throw ForecastError("forecast: empty history");
  if (history.obs_dim() != m || history.cov_dim() != nc) {
    throw ForecastError("forecast: history dims do not match the model");
  }
  if (future_u.rank() != 2 || future_u.dim(0) < p || future_u.dim(1) != nc) {
    throw ForecastError("forecast: need " + std::to_string(p) + " x " + std::to_string(nc) +
                        " future covariates, got " + ad::shape_to_string(future_u.shape()));
  }
  const std::size_t steps = t_hist + p;
  check_edit(edit, steps, q);

  ad::NoGradScope no_grad;
  double acc = 0.0;
  for (std::size_t t = 0; t < t_hist; ++t) {
    for (std::size_t k = 0; k < m; ++k) acc += std::abs(history.y_at(0, t, k));
  }
  const double scale = 1.0 + acc / static_cast<double>(t_hist * m);

  std::vector<double> pooled(m, 0.0);
  std::vector<std::vector<double>> y_hist(t_hist, std::vector<double>(m));
  for (std::size_t t = 0; t < t_hist; ++t) {
    for (std::size_t k = 0; k < m; ++k) {
      y_hist[t][k] = history.y_at(0, t, k) / scale;
      pooled[k] += y_hist[t][k] / static_cast<double>(t_hist);
    }
  }
  auto u_row = [&](std::size_t t) {
    std::vector<double> u(nc);
    for (std::size_t k = 0; k < nc; ++k) {
      u[k] = t < t_hist ? history.u_at(0, t, k) : future_u.at(t - t_hist, k);
    }
    return u;
  };

  RowRngs rngs;
  for (std::size_t j = 0; j < n; ++j) {
    rngs.push_back(fcfg.frozen_noise ? Rng::frozen() : Rng::substream(fcfg.seed, key, j));
  }

  model::StepState state = model::initial_state(mcfg, n);
  model::sample_globals(mcfg, params, tile_rows(pooled, n), state, rngs);

  ForecastResult res;
  res.scale = scale;
  res.quantiles = fcfg.quantiles;
  std::vector<double> samples(n * p * m);
  std::vector<double> lat, shr;
  if (keep_latents) {
    lat.assign(n * steps * q, 0.0);
    shr.assign(n * steps * q, 0.0);
  }

  for (std::size_t t = 0; t < steps; ++t) {
    const bool horizon = t >= t_hist;
    state.h = model::advance_rnn(mcfg, params, state.h, tile_rows(u_row(t), n), state.y_prev);
    const Tensor& h = state.h.back();
    const Tensor noise_alpha = model::draw_normals(rngs, q);
    const Tensor noise_beta = model::draw_normals(rngs, q);
    const Tensor noise_z = model::draw_normals(rngs, q);

    Tensor sc = Tensor::full({n, q}, 1.0);
    if (mcfg.use_shrinkage) {
      Tensor lambda_sq;
      if (horizon && fcfg.lambda_source == LambdaSource::kGenerative) {
        lambda_sq = generative_lambda_sq(rngs, q);
      } else {
        lambda_sq = shrink::sample_local_posterior(
                        model::local_shrinkage_head(mcfg, params, state.z, h), noise_alpha,
                        noise_beta)
                        .lambda_sq;
      }
      sc = model::shrinkage_scale(state.tau_sq, state.c_sq, lambda_sq);
    }
    sc = apply_unit_scale(sc, edit, t);

    Tensor y_t;
    dist::NormalParams zp;
    if (!horizon) {
      y_t = tile_rows(y_hist[t], n);
      zp = model::inference_z_params(mcfg, params, state.z, y_t, h);
    } else {
      zp = model::generative_z_params(mcfg, params, h, state.z);
    }
    Tensor z = apply_zero(dist::sample_normal_reparam(zp, noise_z) * sc, edit, t);
    if (horizon) {
      const Tensor noise_y = model::draw_normals(rngs, m);
      y_t = dist::sample_normal_reparam(model::decoder(mcfg, params, z), noise_y);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < m; ++k) {
          const double v = y_t.at(i, k) * scale;
          if (!std::isfinite(v)) {
            throw model::NumericalError("non-finite forecast sample at horizon step " +
                                        std::to_string(t - t_hist));
          }
          samples[(i * p + (t - t_hist)) * m + k] = v;
        }
      }
    }
    if (keep_latents) {
      record(lat, z, t, steps);
      record(shr, sc, t, steps);
    }
    state.z = z;
    state.y_prev = y_t;
  }

  res.samples = Tensor::from({n, p, m}, std::move(samples));
  std::vector<double> col(n);
  for (double qu : fcfg.quantiles) {
    std::vector<double> band(p * m);
    for (std::size_t t = 0; t < p; ++t) {
      for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t i = 0; i < n; ++i) col[i] = res.samples.at(i, t, k);
        band[t * m + k] = empirical_quantile(col, qu);
      }
    }
    res.bands.push_back(Tensor::from({p, m}, std::move(band)));
  }
  if (keep_latents) {
    res.latents = Tensor::from({n, steps, q}, std::move(lat));
    res.shrink_scales = Tensor::from({n, steps, q}, std::move(shr));
  }
  return res;
}

namespace {

void check_panel(const data::SeriesBatch& panel, std::size_t context_len, std::size_t horizon,
                 const std::vector<LatentIntervention>* edits) {
  if (context_len < 1) throw ForecastError("forecast_panel: context length must be >= 1");
  for (std::size_t i = 0; i < panel.batch_size(); ++i) {
    if (panel.lengths[i] < context_len + horizon) {
      throw ForecastError("forecast_panel: series '" + panel.ids[i] + "' has " +
                          std::to_string(panel.lengths[i]) + " steps, need " +
                          std::to_string(context_len + horizon) + " for covariates");
    }
  }
  if (edits && edits->size() != panel.batch_size()) {
    throw ForecastError("forecast_panel: one intervention per series required");
  }
}

ForecastResult forecast_row(const model::ModelConfig& mcfg, const nn::ParameterStore& params,
                            const data::SeriesBatch& panel, std::size_t i, std::size_t context_len,
                            const ForecastConfig& fcfg, bool keep_latents,
                            const std::vector<LatentIntervention>* edits) {
  const std::size_t row[] = {i};
  const data::SeriesBatch one = panel.select(row);
  const data::SeriesBatch hist = one.slice_time(0, context_len);
  const data::SeriesBatch fut = one.slice_time(context_len, context_len + fcfg.horizon);
  const Tensor fu = fut.u.reshape({fcfg.horizon, panel.cov_dim()}).detach();
  return forecast(mcfg, params, hist, fu, fcfg, i, keep_latents, edits ? &(*edits)[i] : nullptr);
}

}  // namespace

std::vector<ForecastResult> forecast_panel(const model::ModelConfig& mcfg,
                                           const nn::ParameterStore& params,
                                           const data::SeriesBatch& panel,
                                           std::size_t context_len, const ForecastConfig& fcfg,
                                           bool keep_latents,
                                           const std::vector<LatentIntervention>* edits) {
  fcfg.validate();
  check_panel(panel, context_len, fcfg.horizon, edits);
  std::vector<ForecastResult> out(panel.batch_size());
  std::vector<std::string> errors(panel.batch_size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < panel.batch_size(); ++i) {
    try {
      out[i] = forecast_row(mcfg, params, panel, i, context_len, fcfg, keep_latents, edits);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) throw model::NumericalError("series '" + panel.ids[i] + "': " + errors[i]);
  }
  return out;
}

std::vector<ForecastResult> forecast_panel_serial(const model::ModelConfig& mcfg,
                                                  const nn::ParameterStore& params,
                                                  const data::SeriesBatch& panel,
                                                  std::size_t context_len,
                                                  const ForecastConfig& fcfg, bool keep_latents,
                                                  const std::vector<LatentIntervention>* edits) {
  fcfg.validate();
  check_panel(panel, context_len, fcfg.horizon, edits);
  std::vector<ForecastResult> out;
  for (std::size_t i = 0; i < panel.batch_size(); ++i) {
    out.push_back(forecast_row(mcfg, params, panel, i, context_len, fcfg, keep_latents, edits));
  }
  return out;
}

ForecastResult rolling_forecast(const model::ModelConfig& mcfg, const nn::ParameterStore& params,
                                const data::SeriesBatch& series, std::size_t context_len,
                                std::size_t window, std::size_t horizon_total,
                                const ForecastConfig& fcfg, std::uint64_t key) {
  if (window < 1 || window > horizon_total) {
    throw ForecastError("rolling_forecast: window must be in [1, horizon_total]");
  }
  if (series.batch_size() != 1) throw ForecastError("rolling_forecast: one series expected");
  if (series.lengths[0] < context_len + horizon_total) {
    throw ForecastError("rolling_forecast: series too short for the requested horizon");
  }
  const std::size_t n = fcfg.num_samples, m = series.obs_dim();
  std::vector<double> samples(n * horizon_total * m);
  std::size_t done = 0;
  while (done < horizon_total) {
    ForecastConfig wcfg = fcfg;
    wcfg.horizon = std::min(window, horizon_total - done);
    const std::size_t origin = context_len + done;
    const data::SeriesBatch hist = series.slice_time(0, origin);
    const Tensor fu =
        series.slice_time(origin, origin + wcfg.horizon).u.reshape({wcfg.horizon, series.cov_dim()}).detach();
    const ForecastResult r = forecast(mcfg, params, hist, fu, wcfg, key);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < wcfg.horizon; ++t) {
        for (std::size_t k = 0; k < m; ++k) {
          samples[(i * horizon_total + done + t) * m + k] = r.samples.at(i, t, k);
        }
      }
    }
    done += wcfg.horizon;
  }
  ForecastResult res;
  res.samples = Tensor::from({n, horizon_total, m}, std::move(samples));
  res.quantiles = fcfg.quantiles;
  std::vector<double> col(n);
  for (double qu : fcfg.quantiles) {
    std::vector<double> band(horizon_total * m);
    for (std::size_t t = 0; t < horizon_total; ++t) {
      for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t i = 0; i < n; ++i) col[i] = res.samples.at(i, t, k);
        band[t * m + k] = empirical_quantile(col, qu);
      }
    }
    res.bands.push_back(Tensor::from({horizon_total, m}, std::move(band)));
  }
  return res;
}

Tensor latent_paths(const model::ModelConfig& mcfg, const nn::ParameterStore& params,
                    const data::SeriesBatch& history, const ForecastConfig& fcfg,
                    std::uint64_t key) {
  ForecastConfig c = fcfg;
  c.horizon = 1;
  const Tensor fu = Tensor::zeros({1, mcfg.covariate_dim});
  const ForecastResult r = forecast(mcfg, params, history, fu, c, key, true);
  const std::size_t n = c.num_samples, t_hist = history.lengths[0], q = mcfg.latent_dim;
  std::vector<double> v(n * t_hist * q);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < t_hist; ++t) {
      for (std::size_t k = 0; k < q; ++k) v[(i * t_hist + t) * q + k] = r.latents.at(i, t, k);
    }
  }
  return Tensor::from({n, t_hist, q}, std::move(v));
}

void write_forecast_csv(const std::filesystem::path& path, const std::vector<ForecastResult>& res,
                        const std::vector<std::string>& ids, std::size_t first_step) {
  if (res.size() != ids.size()) throw ForecastError("write_forecast_csv: id count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ForecastError("cannot write '" + path.string() + "'");
  out.precision(17);
  out << "t,series_id,quantile,dim,value\n";
  for (std::size_t s = 0; s < res.size(); ++s) {
    const auto& r = res[s];
    for (std::size_t qi = 0; qi < r.quantiles.size(); ++qi) {
      const Tensor& b = r.bands[qi];
      for (std::size_t t = 0; t < b.dim(0); ++t) {
        for (std::size_t k = 0; k < b.dim(1); ++k) {
          out << first_step + t << ',' << ids[s] << ',' << r.quantiles[qi] << ',' << k << ','
              << b.at(t, k) << '\n';
        }
      }
    }
  }
}

void write_samples_archive(const std::filesystem::path& path,
                           const std::vector<ForecastResult>& res,
                           const std::vector<std::string>& ids) {
  if (res.size() != ids.size()) throw ForecastError("write_samples_archive: id count mismatch");
  std::vector<nn::NamedTensor> entries;
  for (std::size_t s = 0; s < res.size(); ++s) entries.emplace_back(ids[s], res[s].samples);
  nn::write_archive(path, entries);
}

}  // namespace dssh::fc
