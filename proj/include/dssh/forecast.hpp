#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "dssh/model.hpp"
#include "dssh/series.hpp"

namespace dssh::fc {

// Where the horizon's local shrinkage scales come from: the inference
// posterior q(lambda | z_{t-1}, h_t) or the generative G x IG prior.
enum class LambdaSource { kInference, kGenerative };

struct ForecastConfig {
  std::size_t horizon = 20;
  std::size_t num_samples = 50;
  std::vector<double> quantiles{0.05, 0.5, 0.95};
  std::uint64_t seed = 0;
  LambdaSource lambda_source = LambdaSource::kInference;
  // Every standard normal draw is 0, giving median paths.
  bool frozen_noise = false;

  void validate() const;
};

nlohmann::json to_json(const ForecastConfig& cfg);
ForecastConfig forecast_config_from_json(const nlohmann::json& j,
                                         const std::string& path = "forecast");

// Per-series edits applied to every sample path, indexed [(T + p) x Q] over
// the conditioning steps followed by the horizon. A 1 in `unit_scale` replaces
// tau* lambda by 1 at that coordinate; a 1 in `zero` sets z to 0 there.
struct LatentIntervention {
  ad::Tensor unit_scale;
  ad::Tensor zero;
};

struct ForecastResult {
  ad::Tensor samples;               // [n x p x M], original units
  std::vector<double> quantiles;
  std::vector<ad::Tensor> bands;    // one [p x M] tensor per quantile
  double scale = 1.0;
  ad::Tensor latents;               // [n x (T + p) x Q] when requested
  ad::Tensor shrink_scales;         // [n x (T + p) x Q] tau* lambda when requested
};

class ForecastError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Type-7 (linear interpolation) empirical quantile; `v` is reordered.
double empirical_quantile(std::vector<double>& v, double q);

// history: one row whose first lengths[0] steps are conditioned on (raw units).
// future_u: [p x N] covariates for the horizon. key selects the random
// substream, so the result depends only on (seed, key, path index).
ForecastResult forecast(const model::ModelConfig& mcfg, const nn::ParameterStore& params,
                        const data::SeriesBatch& history, const ad::Tensor& future_u,
                        const ForecastConfig& fcfg, std::uint64_t key = 0,
                        bool keep_latents = false, const LatentIntervention* edit = nullptr);

// Forecasts every row of `panel` from its first `context_len` steps; the rows
// need covariates for context_len + horizon steps. y beyond the context is
// never read. Rows run in parallel; row i uses key i.
std::vector<ForecastResult> forecast_panel(const model::ModelConfig& mcfg,
                                           const nn::ParameterStore& params,
                                           const data::SeriesBatch& panel,
                                           std::size_t context_len, const ForecastConfig& fcfg,
                                           bool keep_latents = false,
                                           const std::vector<LatentIntervention>* edits = nullptr);
// Same results computed one row at a time on the calling thread.
std::vector<ForecastResult> forecast_panel_serial(
    const model::ModelConfig& mcfg, const nn::ParameterStore& params,
    const data::SeriesBatch& panel, std::size_t context_len, const ForecastConfig& fcfg,
    bool keep_latents = false, const std::vector<LatentIntervention>* edits = nullptr);

// Forecasts `window` steps at a time from origin `context_len`, appending the
// observed values to the history after each window; fcfg.horizon is ignored.
ForecastResult rolling_forecast(const model::ModelConfig& mcfg, const nn::ParameterStore& params,
                                const data::SeriesBatch& series, std::size_t context_len,
                                std::size_t window, std::size_t horizon_total,
                                const ForecastConfig& fcfg, std::uint64_t key = 0);

// Posterior sample paths of z over the history: [n x T x Q].
ad::Tensor latent_paths(const model::ModelConfig& mcfg, const nn::ParameterStore& params,
                        const data::SeriesBatch& history, const ForecastConfig& fcfg,
                        std::uint64_t key = 0);

// CSV with columns t,series_id,quantile,dim,value; t counts from first_step.
void write_forecast_csv(const std::filesystem::path& path, const std::vector<ForecastResult>& res,
                        const std::vector<std::string>& ids, std::size_t first_step);
// Archive of the raw sample tensors, one entry per series id.
void write_samples_archive(const std::filesystem::path& path,
                           const std::vector<ForecastResult>& res,
                           const std::vector<std::string>& ids);

}  // namespace dssh::fc
