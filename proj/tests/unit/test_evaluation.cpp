#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "../support/helpers.hpp"
#include "dssh/evaluation.hpp"
#include "dssh/ops.hpp"

using namespace dssh;
using ad::Tensor;
using testing::mat;
using testing::vec;

namespace {

model::ModelConfig small_model() {
  model::ModelConfig c;
  c.latent_dim = 2;
  c.rnn_hidden_dim = 5;
  c.head_hidden_dims = {5};
  return c;
}

data::SeriesBatch panel(std::size_t rows, std::size_t steps, std::uint64_t seed) {
  auto b = data::SeriesBatch::zeros(rows, steps, 1, 1);
  Rng rng(seed);
  for (std::size_t i = 0; i < rows; ++i) {
    b.ids[i] = "s" + std::to_string(i);
    for (std::size_t t = 0; t < steps; ++t) {
      b.y_at(i, t, 0) = 3.0 + std::sin(0.5 * t) + 0.3 * rng.normal();
      b.u_at(i, t, 0) = rng.uniform(-1, 1);
    }
  }
  return b;
}

Tensor rows(const Tensor& x, std::size_t begin, std::size_t end) {
  const std::size_t cols = x.shape()[1];
  std::vector<double> out;
  for (std::size_t r = begin; r < end; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out.push_back(x.at(r, c));
  }
  return Tensor::from({end - begin, cols}, out);
}

double r_squared(const Tensor& truth, const Tensor& pred) {
  const std::size_t n = truth.size();
  double mean = 0;
  for (std::size_t i = 0; i < n; ++i) mean += truth.at(i);
  mean /= n;
  double ss_res = 0, ss_tot = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ss_res += (truth.at(i) - pred.at(i)) * (truth.at(i) - pred.at(i));
    ss_tot += (truth.at(i) - mean) * (truth.at(i) - mean);
  }
  return 1.0 - ss_res / ss_tot;
}

}  // namespace

TEST_SUITE("evaluation") {
  TEST_CASE("ND micro-cases") {
    CHECK(eval::nd(vec({1, 2, 3}), vec({1, 2, 3})) == 0.0);
    CHECK(eval::nd(vec({2}), vec({1})) == 0.5);
    CHECK(eval::nd(vec({1, -1}), vec({0, 0})) == 1.0);
    CHECK_THROWS_AS(eval::nd(vec({0, 0}), vec({1, 1})), eval::EvalError);
    CHECK_THROWS_AS(eval::nd(vec({1, 2}), vec({1})), ad::ShapeError);
  }

  TEST_CASE("NRMSE micro-cases and homogeneity") {
    CHECK(eval::nrmse(vec({1, 2}), vec({1, 2})) == 0.0);
    CHECK(eval::nrmse(vec({2, 2}), vec({1, 3})) == 0.5);
    CHECK_THROWS_AS(eval::nrmse(vec({0}), vec({1})), eval::EvalError);
    Rng rng(1);
    const Tensor y = testing::random_tensor({4, 5}, rng), p = testing::random_tensor({4, 5}, rng);
    const double base = eval::nrmse(y, p);
    for (double c : {0.01, 3.0, 1e4}) {
      CHECK(eval::nrmse(ad::scale(y, c), ad::scale(p, c)) == doctest::Approx(base).epsilon(1e-12));
      CHECK(eval::nd(ad::scale(y, c), ad::scale(p, c)) == doctest::Approx(eval::nd(y, p)).epsilon(1e-12));
    }
  }

  TEST_CASE("metrics are invariant to permutations") {
    const Tensor y = mat(2, 3, {1, 2, 3, 4, 5, 6}), p = mat(2, 3, {1.5, 1, 3, 2, 5, 7});
    const Tensor yp = mat(2, 3, {6, 4, 5, 3, 1, 2}), pp = mat(2, 3, {7, 2, 5, 3, 1.5, 1});
    CHECK(eval::nd(y, p) == doctest::Approx(eval::nd(yp, pp)).epsilon(1e-15));
    CHECK(eval::nrmse(y, p) == doctest::Approx(eval::nrmse(yp, pp)).epsilon(1e-15));
  }

  TEST_CASE("recovery rate examples") {
    const Tensor truth = mat(3, 1, {1, 2, 3});
    std::vector<double> same(4 * 3);
    for (std::size_t s = 0; s < 4; ++s) {
      for (std::size_t t = 0; t < 3; ++t) same[s * 3 + t] = truth.at(t);
    }
    CHECK(eval::recovery_rate(truth, Tensor::from({4, 3, 1}, same), 0.9).mean == 1.0);
    const Tensor far = Tensor::full({4, 3, 1}, 100.0);
    const auto r = eval::recovery_rate(truth, far, 0.9);
    CHECK(r.mean == 0.0);
    CHECK(r.per_step.size() == 3);
    CHECK_THROWS(eval::recovery_rate(truth, far, 1.0));
    CHECK_THROWS(eval::recovery_rate(truth, far, 0.0));
    CHECK_THROWS(eval::recovery_rate(truth, Tensor::zeros({1, 3, 1}), 0.9));
    CHECK_THROWS_AS(eval::recovery_rate(truth, Tensor::zeros({4, 2, 1}), 0.9), ad::ShapeError);
  }

  TEST_CASE("recovery rate is calibrated for matching distributions") {
    const std::size_t n = 1000, t = 2500, d = 4;
    Rng rng(2);
    std::vector<double> s(n * t * d), y(t * d);
    for (double& v : s) v = rng.normal();
    for (double& v : y) v = rng.normal();
    const auto r = eval::recovery_rate(Tensor::from({t, d}, y), Tensor::from({n, t, d}, s), 0.9);
    CHECK(std::abs(r.mean - 0.9) < 0.02);
  }

  TEST_CASE("recovery approaches 1 as the level approaches 1 when the truth is inside the hull") {
    Rng rng(3);
    const std::size_t n = 50, t = 20;
    std::vector<double> s(n * t), y(t);
    for (double& v : s) v = rng.normal();
    for (std::size_t k = 0; k < t; ++k) y[k] = 0.5 * (s[k] + s[t + k]);
    const auto r = eval::recovery_rate(Tensor::from({t, 1}, y), Tensor::from({n, t, 1}, s), 1.0 - 1e-12);
    CHECK(r.mean == 1.0);
  }

  TEST_CASE("alignment: identity, permutation with sign, and errors") {
    Rng rng(4);
    const std::size_t t = 30;
    const Tensor z = testing::random_tensor({t, 2}, rng);
    const auto id = eval::align_latents(z, z);
    CHECK((id.weights - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(id.intercept.cwiseAbs().maxCoeff() < 1e-10);

    std::vector<double> swapped(t * 2);
    for (std::size_t k = 0; k < t; ++k) {
      swapped[k * 2] = -z.at(k, 1);
      swapped[k * 2 + 1] = z.at(k, 0);
    }
    const Tensor truth = Tensor::from({t, 2}, swapped);
    const auto a = eval::align_latents(truth, z);
    CHECK(testing::max_abs_diff(a.apply(z), truth) < 1e-10);
    const Tensor paths = testing::random_tensor({3, t, 2}, rng);
    CHECK(a.apply(paths).shape() == ad::Shape{3, t, 2});
    CHECK(a.to_json().contains("weights"));

    CHECK_THROWS_AS(eval::align_latents(Tensor::zeros({3, 2}), Tensor::zeros({3, 2})), eval::EvalError);
    std::vector<double> dup(t * 2);
    for (std::size_t k = 0; k < t; ++k) dup[k * 2] = dup[k * 2 + 1] = z.at(k, 0);
    CHECK_THROWS_AS(eval::align_latents(z, Tensor::from({t, 2}, dup)), eval::EvalError);
  }

  TEST_CASE("alignment of unrelated paths has out-of-segment R^2 near zero") {
    Rng rng(5);
    double total = 0;
    const int trials = 100;
    for (int k = 0; k < trials; ++k) {
      const Tensor truth = testing::random_tensor({80, 1}, rng), pred = testing::random_tensor({80, 2}, rng);
      const auto fit = eval::align_latents(rows(truth, 0, 40), rows(pred, 0, 40));
      total += r_squared(rows(truth, 40, 80), fit.apply(rows(pred, 40, 80)));
    }
    CHECK(std::abs(total / trials) < 0.1);
  }

  TEST_CASE("persistence baselines") {
    std::vector<double> periodic(24);
    for (std::size_t t = 0; t < 24; ++t) periodic[t] = 1.0 + static_cast<double>(t % 6);
    const Tensor ctx = Tensor::from({18, 1}, std::vector<double>(periodic.begin(), periodic.begin() + 18));
    const Tensor fut = Tensor::from({6, 1}, std::vector<double>(periodic.begin() + 18, periodic.end()));
    CHECK(eval::nd(fut, eval::persistence_baseline(ctx, 6, 6)) == 0.0);

    const Tensor constant = Tensor::full({5, 1}, 2.5);
    const Tensor last = eval::persistence_baseline(constant, 3);
    CHECK(eval::nd(Tensor::full({3, 1}, 2.5), last) == 0.0);
    // Period longer than the context falls back to the last value.
    CHECK(testing::max_abs_diff(eval::persistence_baseline(ctx, 4, 30), Tensor::full({4, 1}, ctx.at(17, 0))) == 0.0);
    // Horizons beyond one period wrap around the last season.
    const Tensor wrap = eval::persistence_baseline(ctx, 8, 6);
    CHECK(wrap.at(7, 0) == ctx.at(13, 0));

    Rng rng(6);
    double seasonal = 0, flat = 0;
    for (int s = 0; s < 200; ++s) {
      std::vector<double> y(60);
      for (double& v : y) v = 5.0 + rng.normal();
      const Tensor c = Tensor::from({48, 1}, std::vector<double>(y.begin(), y.begin() + 48));
      const Tensor f = Tensor::from({12, 1}, std::vector<double>(y.begin() + 48, y.end()));
      seasonal += eval::nd(f, eval::persistence_baseline(c, 12, 12));
      flat += eval::nd(f, eval::persistence_baseline(c, 12));
    }
    CHECK(std::abs(seasonal - flat) / flat < 0.1);
  }

  TEST_CASE("metric report CSV and JSON") {
    const Tensor truth = Tensor::from({2, 2, 1}, {1, 2, 0, 0});
    const Tensor med = Tensor::from({2, 2, 1}, {1, 1, 1, 1});
    const auto rep = eval::score(truth, med, {"a", "b"}, 10);
    CHECK(rep.nd == doctest::Approx(3.0 / 3.0));
    CHECK(rep.per_series[0].nd == doctest::Approx(1.0 / 3.0));
    CHECK(std::isnan(rep.per_series[1].nd));
    const auto j = rep.to_json();
    CHECK(j["per_series"][1]["nd"].is_null());
    const auto dir = std::filesystem::temp_directory_path() / "dssh_unit";
    std::filesystem::create_directories(dir);
    rep.write_csv(dir / "m.csv");
    std::ifstream in(dir / "m.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "series_id,nd,nrmse");
    std::getline(in, line);
    CHECK(line.rfind("ALL,", 0) == 0);
  }

  TEST_CASE("ablation modes parse") {
    CHECK(eval::ablation_mode_from_string("random_remove") == eval::AblationMode::kRandomRemove);
    CHECK(eval::ablation_mode_from_string("threshold_lowest") == eval::AblationMode::kThresholdLowest);
    CHECK(eval::ablation_mode_from_string("magnitude") == eval::AblationMode::kMagnitude);
    CHECK(eval::to_string(eval::AblationMode::kMagnitude) == "magnitude");
    CHECK_THROWS_AS(eval::ablation_mode_from_string("random"), nn::ConfigError);
  }

  TEST_CASE("ablation: level zero, determinism and level checks") {
    const auto c = small_model();
    const auto p = model::init_model_params(c, 7);
    const auto b = panel(3, 24, 8);
    fc::ForecastConfig f;
    f.horizon = 4;
    f.num_samples = 10;
    const std::vector<double> levels{0.0, 0.25, 0.5};
    const auto r1 = eval::ablate_shrinkage(c, p, b, 20, f, eval::AblationMode::kRandomRemove, levels, 9);
    const auto r2 = eval::ablate_shrinkage(c, p, b, 20, f, eval::AblationMode::kRandomRemove, levels, 9);
    CHECK(r1.increase_pct[0] == 0.0);
    CHECK(r1.nd[0] == r1.base_nd);
    CHECK(r1.nd == r2.nd);
    const auto th = eval::ablate_shrinkage(c, p, b, 20, f, eval::AblationMode::kThresholdLowest, levels, 9);
    CHECK(th.increase_pct[0] == 0.0);
    CHECK(th.base_nd == r1.base_nd);

    CHECK_THROWS(eval::ablate(c, p, b, 20, f, eval::AblationMode::kRandomRemove, {0.5, 1.0}, 9));
    CHECK_THROWS(eval::ablate(c, p, b, 20, f, eval::AblationMode::kRandomRemove, {0.5, 0.25}, 9));
    CHECK_THROWS(eval::ablate_shrinkage(c, p, b, 20, f, eval::AblationMode::kMagnitude, {0.5}, 9));

    const auto dir = std::filesystem::temp_directory_path() / "dssh_unit";
    r1.write_csv(dir / "abl.csv");
    std::ifstream in(dir / "abl.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "mode,level,nd,increase_pct");
  }

  TEST_CASE("decoder ablation: both curves start at zero; mismatched configs fail") {
    const auto lin = small_model();
    auto nl = lin;
    nl.decoder = model::DecoderKind::kNonlinear;
    const auto pl = model::init_model_params(lin, 10), pn = model::init_model_params(nl, 10);
    const auto b = panel(2, 22, 11);
    fc::ForecastConfig f;
    f.horizon = 2;
    f.num_samples = 8;
    const auto r = eval::ablate_decoder(lin, pl, nl, pn, b, 20, f, {0.0, 0.5}, 12);
    CHECK(r.linear.increase_pct[0] == 0.0);
    CHECK(r.nonlinear.increase_pct[0] == 0.0);
    CHECK(r.linear.mode == "magnitude");
    const auto again = eval::ablate_decoder(lin, pl, nl, pn, b, 20, f, {0.0, 0.5}, 12);
    CHECK(again.nonlinear.nd == r.nonlinear.nd);

    auto other = nl;
    other.latent_dim = 3;
    const auto po = model::init_model_params(other, 10);
    CHECK_THROWS(eval::ablate_decoder(lin, pl, other, po, b, 20, f, {0.5}, 12));
    CHECK_THROWS(eval::ablate_decoder(lin, pl, lin, pl, b, 20, f, {0.5}, 12));
  }
}
