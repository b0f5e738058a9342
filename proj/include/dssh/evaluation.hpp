#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <json.hpp>
#include <string>
#include <vector>

#include "dssh/forecast.hpp"

namespace dssh::eval {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// sum |y - yhat| / sum |y| over all entries.
double nd(const ad::Tensor& y_true, const ad::Tensor& y_pred);
// sqrt(mean (y - yhat)^2) / mean |y|.
double nrmse(const ad::Tensor& y_true, const ad::Tensor& y_pred);

struct Recovery {
  std::vector<double> per_step;  // fraction of the D coordinates covered at each t
  double mean = 0.0;
};

// truth [T x D], samples [n x T x D]; covered when the truth lies in the closed
// interval between the empirical (1-level)/2 and (1+level)/2 quantiles.
Recovery recovery_rate(const ad::Tensor& truth, const ad::Tensor& samples, double level);

// truth ~ mean_paths * weights + intercept, fitted by least squares.
struct Alignment {
  Eigen::MatrixXd weights;       // [Q x D]
  Eigen::RowVectorXd intercept;  // [D]

  // paths [... x Q] -> [... x D] along the last axis.
  ad::Tensor apply(const ad::Tensor& paths) const;
  nlohmann::json to_json() const;
};

// truth [T x D], mean_paths [T x Q]; needs T >= 2Q and a full-rank design.
Alignment align_latents(const ad::Tensor& truth, const ad::Tensor& mean_paths);

// context [T x M] -> [p x M]. period > 0 and T >= period gives the
// seasonal-naive forecast y_{T+t-period}; otherwise the last value repeats.
ad::Tensor persistence_baseline(const ad::Tensor& context, std::size_t horizon,
                                std::size_t period = 0);

struct SeriesMetric {
  std::string id;
  double nd = 0.0;
  double nrmse = 0.0;
};

struct MetricReport {
  double nd = 0.0;
  double nrmse = 0.0;
  std::vector<SeriesMetric> per_series;
  std::size_t num_samples = 0;

  nlohmann::json to_json() const;
  void write_csv(const std::filesystem::path& path) const;
};

// [B x p x M] truth for steps [context_len, context_len + p) of each row.
ad::Tensor horizon_truth(const data::SeriesBatch& panel, std::size_t context_len,
                         std::size_t horizon);
// [B x p x M] tensor of one band (quantile index) across forecasts.
ad::Tensor stack_band(const std::vector<fc::ForecastResult>& res, std::size_t quantile_index);
// [B x p x M] median of the samples of each forecast.
ad::Tensor stack_median(const std::vector<fc::ForecastResult>& res);

// Scores the sample medians against the truth; per-series metrics are NaN
// when a series' truth is all zero.
MetricReport score(const ad::Tensor& truth, const ad::Tensor& median,
                   const std::vector<std::string>& ids, std::size_t num_samples);

// t,lower,median,upper,truth rows for one series and output dimension.
void write_band_csv(const std::filesystem::path& path, const fc::ForecastResult& res,
                    const ad::Tensor& truth, std::size_t dim, double lower_q, double upper_q,
                    std::size_t first_step);

enum class AblationMode {
  kRandomRemove,     // tau* lambda -> 1 on a random subset of coordinates
  kThresholdLowest,  // z -> 0 where the posterior median scale is lowest
  kMagnitude,        // z -> 0 where the posterior median |z| is lowest
};

std::string to_string(AblationMode m);
AblationMode ablation_mode_from_string(const std::string& s);

struct AblationReport {
  std::string mode;
  std::vector<double> levels;
  std::vector<double> nd;            // ND at each level
  std::vector<double> increase_pct;  // 100 (nd - nd_0) / nd_0
  double base_nd = 0.0;

  nlohmann::json to_json() const;
  void write_csv(const std::filesystem::path& path) const;
};

inline const std::vector<double> kDefaultSparsityLevels{0.05, 0.10, 0.25, 0.50};

// Forecasts every row of `panel` from context_len steps with and without the
// ablation and reports the ND increase at each level. Coordinates range over
// all (t, i) of the conditioning steps and horizon of each series; random
// subsets are nested across levels.
AblationReport ablate(const model::ModelConfig& mcfg, const nn::ParameterStore& params,
                      const data::SeriesBatch& panel, std::size_t context_len,
                      const fc::ForecastConfig& fcfg, AblationMode mode,
                      const std::vector<double>& levels, std::uint64_t seed);

AblationReport ablate_shrinkage(const model::ModelConfig& mcfg, const nn::ParameterStore& params,
                                const data::SeriesBatch& panel, std::size_t context_len,
                                const fc::ForecastConfig& fcfg, AblationMode mode,
                                const std::vector<double>& levels, std::uint64_t seed);

struct DecoderAblation {
  AblationReport linear;
  AblationReport nonlinear;

  nlohmann::json to_json() const;
};

// Magnitude thresholding on two models that differ only in the decoder.
DecoderAblation ablate_decoder(const model::ModelConfig& linear_cfg,
                               const nn::ParameterStore& linear_params,
                               const model::ModelConfig& nonlinear_cfg,
                               const nn::ParameterStore& nonlinear_params,
                               const data::SeriesBatch& panel, std::size_t context_len,
                               const fc::ForecastConfig& fcfg, const std::vector<double>& levels,
                               std::uint64_t seed);

}  // namespace dssh::eval
