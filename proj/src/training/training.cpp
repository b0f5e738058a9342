#include "dssh/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "dssh/checkpoint.hpp"
#include "dssh/json_config.hpp"
#include "dssh/ops.hpp"

namespace dssh::train {

namespace {

// Substream tags under the training seed.
constexpr std::uint64_t kValidationStream = 0x76616c;
constexpr std::uint64_t kSamplerStream = 0x73616d;

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw nn::ConfigError("train.batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw nn::ConfigError("train.learning_rate must be positive");
  if (grad_clip_norm < 0.0) throw nn::ConfigError("train.grad_clip_norm must be >= 0");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw nn::ConfigError("train.validation_fraction must be in [0, 1)");
  }
  if (validate_every < 1) throw nn::ConfigError("train.validate_every must be >= 1");
  if (shard_size < 1) throw nn::ConfigError("train.shard_size must be >= 1");
  if (max_consecutive_failures < 1) {
    throw nn::ConfigError("train.max_consecutive_failures must be >= 1");
  }
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"num_steps", c.num_steps},
          {"learning_rate", c.learning_rate},
          {"seed", c.seed},
          {"checkpoint_every", c.checkpoint_every},
          {"grad_clip_norm", c.grad_clip_norm},
          {"validation_fraction", c.validation_fraction},
          {"validate_every", c.validate_every},
          {"shard_size", c.shard_size},
          {"max_consecutive_failures", c.max_consecutive_failures}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& path) {
  TrainConfig c;
  ObjectReader r(j, path);
  r.read("batch_size", c.batch_size);
  r.read("num_steps", c.num_steps);
  r.read("learning_rate", c.learning_rate);
  r.read("seed", c.seed);
  r.read("checkpoint_every", c.checkpoint_every);
  r.read("grad_clip_norm", c.grad_clip_norm);
  r.read("validation_fraction", c.validation_fraction);
  r.read("validate_every", c.validate_every);
  r.read("shard_size", c.shard_size);
  r.read("max_consecutive_failures", c.max_consecutive_failures);
  r.finish();
  c.validate();
  return c;
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << "step,loss,recon,kl_z,kl_shrink,kl_global,wall_ms\n";
  out.precision(17);
  for (const auto& r : records) {
    out << r.step << ',' << r.loss << ',' << r.recon << ',' << r.kl_z << ',' << r.kl_shrinkage
        << ',' << r.kl_global << ',' << r.wall_ms << '\n';
  }
}

data::SeriesBatch standardize(const data::SeriesBatch& batch, std::size_t upto) {
  data::SeriesBatch out = batch;
  out.y = batch.y.detach();
  out.scale = batch.scale;
  const std::size_t m = batch.obs_dim();
  for (std::size_t i = 0; i < batch.batch_size(); ++i) {
    const std::size_t len = std::min(batch.lengths[i], upto);
    double acc = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t k = 0; k < m; ++k) acc += std::abs(batch.y_at(i, t, k));
    }
    const double s = 1.0 + (len > 0 ? acc / static_cast<double>(len * m) : 0.0);
    for (std::size_t t = 0; t < batch.max_len(); ++t) {
      for (std::size_t k = 0; k < m; ++k) out.y_at(i, t, k) /= s;
    }
    out.scale[i] *= s;
  }
  return out;
}

data::SeriesBatch destandardize(const data::SeriesBatch& batch) {
  data::SeriesBatch out = batch;
  out.y = batch.y.detach();
  for (std::size_t i = 0; i < batch.batch_size(); ++i) {
    for (std::size_t t = 0; t < batch.max_len(); ++t) {
      for (std::size_t k = 0; k < batch.obs_dim(); ++k) out.y_at(i, t, k) *= batch.scale[i];
    }
    out.scale[i] = 1.0;
  }
  return out;
}

WeightedSampler::WeightedSampler(std::vector<double> weights, std::uint64_t seed) : rng_(seed) {
  if (weights.empty()) throw std::invalid_argument("weighted sampler: empty dataset");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0) || !std::isfinite(total)) std::fill(weights.begin(), weights.end(), 1.0);
  dist_ = std::discrete_distribution<std::size_t>(weights.begin(), weights.end());
}

WeightedSampler WeightedSampler::for_batch(const data::SeriesBatch& batch, std::uint64_t seed) {
  return WeightedSampler(batch.scale, seed);
}

std::size_t WeightedSampler::next() { return dist_(rng_.engine()); }

std::vector<std::size_t> WeightedSampler::next_batch(std::size_t n) {
  std::vector<std::size_t> out(n);
  for (auto& r : out) r = next();
  return out;
}

Split split_train_validation(const data::SeriesBatch& batch, double fraction, std::uint64_t seed) {
  const std::size_t n = batch.batch_size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng.engine());
  std::size_t n_val = static_cast<std::size_t>(std::round(fraction * static_cast<double>(n)));
  if (fraction > 0.0 && n >= 2) n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  std::vector<std::size_t> val(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> tr(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::sort(val.begin(), val.end());
  std::sort(tr.begin(), tr.end());
  Split s;
  s.train = batch.select(tr);
  if (!val.empty()) s.validation = batch.select(val);
  return s;
}

namespace {

std::vector<std::pair<std::size_t, std::size_t>> shard_ranges(std::size_t rows, std::size_t size) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t b = 0; b < rows; b += size) out.emplace_back(b, std::min(rows, b + size));
  return out;
}

std::vector<std::size_t> iota_range(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> v(end - begin);
  std::iota(v.begin(), v.end(), begin);
  return v;
}

}  // namespace

double validate(const model::ModelConfig& cfg, const nn::ParameterStore& params,
                const data::SeriesBatch& val, std::uint64_t seed) {
  if (val.batch_size() == 0) throw std::invalid_argument("validate: empty validation set");
  constexpr std::size_t kShard = 16;
  const auto shards = shard_ranges(val.batch_size(), kShard);
  std::vector<double> row_loss(val.batch_size(), 0.0);
  std::vector<std::string> errors(shards.size());
#pragma omp parallel for schedule(static)
  for (std::size_t s = 0; s < shards.size(); ++s) {
    try {
      ad::NoGradScope no_grad;
      const auto [b, e] = shards[s];
      const auto rows = iota_range(b, e);
      const data::SeriesBatch part = val.select(rows);
      RowRngs rngs;
      for (auto r : rows) rngs.push_back(Rng::substream(seed, kValidationStream, r));
      const auto terms = model::sequence_elbo(cfg, params, part, rngs);
      for (std::size_t i = 0; i < rows.size(); ++i) row_loss[b + i] = terms.rows.at(i);
    } catch (const std::exception& ex) {
      errors[s] = ex.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw model::NumericalError("validation failed: " + e);
  }
  double total = 0.0;
  for (double v : row_loss) total += v;
  return total / static_cast<double>(row_loss.size());
}

namespace {

struct ShardOutput {
  std::map<std::string, std::vector<double>> grads;
  double loss = 0.0;
  double recon = 0.0, kl_z = 0.0, kl_shrinkage = 0.0, kl_global = 0.0;
  std::string error;
};

// Gradient of (sum of this shard's row losses) / batch_size.
ShardOutput run_shard(const model::ModelConfig& cfg, const nn::ParameterStore& params,
                      const data::SeriesBatch& part, RowRngs& rngs, double batch_size) {
  ShardOutput out;
  nn::ParameterStore local = params.clone();
  ad::Tape tape;
  ad::TapeScope scope(tape);
  const auto terms = model::sequence_elbo(cfg, local, part, rngs);
  const ad::Tensor loss = ad::sum(terms.rows) * (1.0 / batch_size);
  if (tape.nonfinite()) throw model::NumericalError("non-finite value in op " + tape.nonfinite_op());
  if (!std::isfinite(loss.item())) throw model::NumericalError("non-finite loss");
  tape.backward(loss);
  const double w = static_cast<double>(part.batch_size()) / batch_size;
  out.loss = loss.item();
  out.recon = terms.recon * w;
  out.kl_z = terms.kl_z * w;
  out.kl_shrinkage = terms.kl_shrinkage * w;
  out.kl_global = terms.kl_global * w;
  for (const auto& [name, t] : local) {
    if (t.has_grad()) out.grads[name].assign(t.grad().begin(), t.grad().end());
  }
  return out;
}

}  // namespace

TrainResult train(const model::ModelConfig& mcfg, const TrainConfig& tcfg,
                  const data::SeriesBatch& train_set, const data::SeriesBatch& val_set,
                  std::optional<nn::ParameterStore> init, const TrainOptions& opts) {
  mcfg.validate();
  tcfg.validate();
  if (train_set.batch_size() == 0) throw std::invalid_argument("train: empty dataset");
  const bool have_val = val_set.lengths.size() > 0;

  TrainResult res;
  nn::ParameterStore params = init ? init->clone() : model::init_model_params(mcfg, tcfg.seed);
  const nn::AdamConfig adam{tcfg.learning_rate, 0.9, 0.999, 1e-8};
  WeightedSampler sampler = WeightedSampler::for_batch(train_set, derive_seed(tcfg.seed, kSamplerStream));

  auto evaluate = [&](std::size_t step) {
    if (!have_val) return;
    const double v = validate(mcfg, params, val_set, tcfg.seed);
    res.log.validation.push_back({step, v});
    if (res.log.validation.size() == 1 || v < res.best_validation) {
      res.best_validation = v;
      res.best_step = step;
      res.params = params.clone();
    }
  };
  evaluate(0);
  if (!have_val) res.params = params.clone();

  std::size_t failures = 0;
  const auto t_start = std::chrono::steady_clock::now();
  for (std::size_t step = 1; step <= tcfg.num_steps; ++step) {
    const auto rows = sampler.next_batch(tcfg.batch_size);
    const auto shards = shard_ranges(rows.size(), tcfg.shard_size);
    std::vector<ShardOutput> outs(shards.size());
    const double bsz = static_cast<double>(rows.size());
#pragma omp parallel for schedule(static)
    for (std::size_t s = 0; s < shards.size(); ++s) {
      const auto [b, e] = shards[s];
      try {
        const std::vector<std::size_t> sel(rows.begin() + static_cast<std::ptrdiff_t>(b),
                                           rows.begin() + static_cast<std::ptrdiff_t>(e));
        const data::SeriesBatch part = train_set.select(sel);
        RowRngs rngs;
        for (std::size_t j = b; j < e; ++j) rngs.push_back(Rng::substream(tcfg.seed, step, j));
        outs[s] = run_shard(mcfg, params, part, rngs, bsz);
      } catch (const std::exception& ex) {
        outs[s].error = ex.what();
      }
    }

    TrainRecord rec;
    rec.step = step;
    std::string error;
    for (const auto& o : outs) {
      if (!o.error.empty() && error.empty()) error = o.error;
      rec.loss += o.loss;
      rec.recon += o.recon;
      rec.kl_z += o.kl_z;
      rec.kl_shrinkage += o.kl_shrinkage;
      rec.kl_global += o.kl_global;
    }
    if (error.empty()) {
      params.zero_grad();
      for (auto& [name, t] : params) {
        for (const auto& o : outs) {
          auto it = o.grads.find(name);
          if (it == o.grads.end()) continue;
          auto g = t.mutable_grad();
          for (std::size_t k = 0; k < g.size(); ++k) g[k] += it->second[k];
        }
      }
      try {
        if (tcfg.grad_clip_norm > 0.0) nn::clip_grad_norm(params, tcfg.grad_clip_norm);
        nn::adam_step(params, res.optimizer, adam);
      } catch (const nn::NonFiniteGradient& ex) {
        error = ex.what();
        params.zero_grad();
      }
    }
    rec.skipped = !error.empty();
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start).count();
    if (rec.skipped) {
      rec.loss = rec.recon = rec.kl_z = rec.kl_shrinkage = rec.kl_global = std::nan("");
      if (++failures >= tcfg.max_consecutive_failures) {
        res.log.records.push_back(rec);
        throw TrainingAborted("training aborted after " + std::to_string(failures) +
                              " consecutive failed steps; last error at step " +
                              std::to_string(step) + ": " + error);
      }
    } else {
      failures = 0;
    }
    res.log.records.push_back(rec);

    if (step % tcfg.validate_every == 0 || step == tcfg.num_steps) evaluate(step);
    if (opts.checkpoint_dir && tcfg.checkpoint_every > 0 && step % tcfg.checkpoint_every == 0) {
      nn::save_checkpoint(*opts.checkpoint_dir / ("checkpoint_step" + std::to_string(step) + ".dssh"),
                          params, &res.optimizer);
    }
  }
  res.last = params;
  return res;
}

}  // namespace dssh::train
