#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "dssh/adam.hpp"
#include "dssh/model.hpp"
#include "dssh/series.hpp"

namespace dssh::train {

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t num_steps = 1000;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // 0 disables periodic checkpoints
  double grad_clip_norm = 0.0;       // 0 disables clipping
  double validation_fraction = 0.1;
  std::size_t validate_every = 100;
  // Rows per gradient shard. Shards are evaluated in parallel and reduced in
  // shard order, so results do not depend on the thread count.
  std::size_t shard_size = 8;
  std::size_t max_consecutive_failures = 10;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& path = "train");

struct TrainRecord {
  std::size_t step = 0;
  double loss = 0.0;
  double recon = 0.0;
  double kl_z = 0.0;
  double kl_shrinkage = 0.0;
  double kl_global = 0.0;
  double wall_ms = 0.0;
  bool skipped = false;
};

struct ValidationRecord {
  std::size_t step = 0;
  double loss = 0.0;
};

struct TrainLog {
  std::vector<TrainRecord> records;
  std::vector<ValidationRecord> validation;

  // header: step,loss,recon,kl_z,kl_shrink,kl_global,wall_ms
  void write_csv(const std::filesystem::path& path) const;
};

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Divides y by scale = 1 + mean |y| over each series' first min(len, upto)
// steps. The returned batch owns fresh storage; scale multiplies any scale
// already stored on the input.
data::SeriesBatch standardize(const data::SeriesBatch& batch,
                              std::size_t upto = static_cast<std::size_t>(-1));
// y * scale per row.
data::SeriesBatch destandardize(const data::SeriesBatch& batch);

// Draws row indices with probability proportional to `weights`; all-zero
// weights fall back to uniform.
class WeightedSampler {
 public:
  WeightedSampler(std::vector<double> weights, std::uint64_t seed);
  // Weight of each row is its stored scale, 1 + mean |y| of the raw series.
  static WeightedSampler for_batch(const data::SeriesBatch& batch, std::uint64_t seed);

  std::size_t next();
  std::vector<std::size_t> next_batch(std::size_t n);

 private:
  Rng rng_;
  std::discrete_distribution<std::size_t> dist_;
};

struct Split {
  data::SeriesBatch train;
  data::SeriesBatch validation;
};
// Deterministic shuffle then split; at least one row goes to each side when
// the batch has two or more rows.
Split split_train_validation(const data::SeriesBatch& batch, double fraction, std::uint64_t seed);

// Mean negative ELBO over the rows of `val` with per-row noise derived from
// `seed`. Parameters are not modified.
double validate(const model::ModelConfig& cfg, const nn::ParameterStore& params,
                const data::SeriesBatch& val, std::uint64_t seed);

struct TrainResult {
  nn::ParameterStore params;  // best-validation parameters
  nn::ParameterStore last;    // parameters after the final step
  nn::AdamState optimizer;
  TrainLog log;
  double best_validation = 0.0;
  std::size_t best_step = 0;
};

struct TrainOptions {
  std::optional<std::filesystem::path> checkpoint_dir;
};

TrainResult train(const model::ModelConfig& mcfg, const TrainConfig& tcfg,
                  const data::SeriesBatch& train_set, const data::SeriesBatch& val_set,
                  std::optional<nn::ParameterStore> init = std::nullopt,
                  const TrainOptions& opts = {});

}  // namespace dssh::train
