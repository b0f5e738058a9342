#pragma once

// Experiment plumbing shared by the command-line tool and the end-to-end
// tests: the run configuration, windowing of raw panels for training, and the
// evaluation of a trained model on held-out series.

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "dssh/data.hpp"
#include "dssh/evaluation.hpp"
#include "dssh/forecast.hpp"
#include "dssh/model.hpp"
#include "dssh/training.hpp"

namespace dssh::cli {

struct LinearDataSpec {
  std::size_t n_train = 2560;
  std::size_t n_test = 128;
  std::size_t length = 100;
};

struct SeasonalDataSpec {
  std::size_t n_series = 100;
  std::size_t length = 1000;
  std::size_t period = 24;
};

struct DataConfig {
  std::string spec = "linear_ssm";  // linear_ssm | seasonal
  LinearDataSpec linear;
  SeasonalDataSpec seasonal;
  // Training windows span context_len + forecast.horizon steps.
  std::size_t context_len = 80;
  std::size_t stride = 0;  // 0: windows do not overlap
  // Seasonal-naive baseline period; 0 repeats the last value.
  std::size_t baseline_period = 0;
  data::CsvOptions csv;

  void validate() const;
};

struct RunConfig {
  model::ModelConfig model;
  train::TrainConfig train;
  fc::ForecastConfig forecast;
  DataConfig data;
  // Master seed; copied into train.seed and forecast.seed by resolve().
  std::uint64_t seed = 0;

  void resolve();
  std::size_t window_len() const { return data.context_len + forecast.horizon; }
};

nlohmann::json to_json(const DataConfig& c);
nlohmann::json to_json(const RunConfig& c);
// Unknown keys anywhere are rejected with their dotted path. The result is
// resolved.
RunConfig run_config_from_json(const nlohmann::json& j);

// Sets the value at a dotted path ("train.learning_rate"), creating objects
// along the way. `value` is parsed as JSON when possible, else kept as a string.
void apply_override(nlohmann::json& j, const std::string& dotted, const std::string& value);

// Sliding windows of window_len() steps, standardized by the scale of their
// first context_len steps.
data::SeriesBatch training_windows(const data::SeriesBatch& series, const RunConfig& cfg);
// The last window_len() steps of each series (raw units), with latents.
data::SeriesBatch evaluation_windows(const data::SeriesBatch& series, const RunConfig& cfg);

// Windows, splits off the validation rows and trains.
train::TrainResult train_model(const RunConfig& cfg, const data::SeriesBatch& series,
                               const train::TrainOptions& opts = {},
                               std::optional<nn::ParameterStore> init = std::nullopt);

struct Evaluation {
  eval::MetricReport model;
  eval::MetricReport baseline;
  double response_recovery = 0.0;  // mean over series, level 0.9
  std::optional<double> latent_recovery;
  std::vector<eval::Alignment> alignments;
  std::vector<fc::ForecastResult> forecasts;
  data::SeriesBatch windows;

  nlohmann::json to_json() const;
};

// Forecasts the last forecast.horizon steps of every series from the
// context_len steps before them and scores the sample medians. When the
// series carry true latents, the latent paths are aligned on the context and
// scored on the horizon.
Evaluation evaluate_model(const RunConfig& cfg, const nn::ParameterStore& params,
                          const data::SeriesBatch& series);

}  // namespace dssh::cli
