#include <cmath>
#include <numbers>

#include "dssh/data.hpp"
#include "dssh/rng.hpp"

namespace dssh::data {

LinearSSMSpec LinearSSMSpec::reference() {
  LinearSSMSpec s;
  s.F.resize(2);
  s.F << 1.0, 0.5;
  s.G.resize(2, 2);
  s.G << 0.7, 0.8, 0.0, 0.9;
  s.B.resize(2, 1);
  s.B << -1.0, 0.9;
  s.obs_noise_var = 1.0;
  s.state_noise_var = 0.25;
  s.u_low = -1.0;
  s.u_high = 1.0;
  return s;
}

void LinearSSMSpec::validate() const {
  const auto d = G.rows();
  if (d < 1 || G.cols() != d || F.size() != d || B.rows() != d || B.cols() < 1) {
    throw DataError("linear SSM spec: inconsistent dimensions");
  }
  if (obs_noise_var < 0.0 || state_noise_var < 0.0 || !(u_high >= u_low)) {
    throw DataError("linear SSM spec: negative variance or empty covariate range");
  }
}

LinearSeries simulate_linear_series(const LinearSSMSpec& spec, std::size_t steps,
                                    std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  const auto d = static_cast<Eigen::Index>(spec.state_dim());
  const auto n = static_cast<Eigen::Index>(spec.cov_dim());
  const double sd_state = std::sqrt(spec.state_noise_var);
  const double sd_obs = std::sqrt(spec.obs_noise_var);
  LinearSeries s;
  s.y.resize(static_cast<Eigen::Index>(steps));
  s.u.resize(static_cast<Eigen::Index>(steps), n);
  s.beta.resize(static_cast<Eigen::Index>(steps), d);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(steps); ++t) {
    Eigen::VectorXd u(n);
    for (Eigen::Index k = 0; k < n; ++k) u(k) = rng.uniform(spec.u_low, spec.u_high);
    Eigen::VectorXd eta(d);
    for (Eigen::Index k = 0; k < d; ++k) eta(k) = sd_state * rng.normal();
    beta = spec.G * beta + spec.B * u + eta;
    s.y(t) = spec.F.dot(beta) + sd_obs * rng.normal();
    s.u.row(t) = u.transpose();
    s.beta.row(t) = beta.transpose();
  }
  return s;
}

namespace {

SeriesBatch simulate_block(const LinearSSMSpec& spec, std::size_t count, std::size_t steps,
                           std::uint64_t seed, std::uint64_t stream, const char* prefix,
                           bool keep_latents) {
  const std::size_t n = spec.cov_dim(), d = spec.state_dim();
  SeriesBatch b = SeriesBatch::zeros(count, steps, 1, n);
  if (keep_latents) b.latents = ad::Tensor::zeros({count, steps, d});
  for (std::size_t i = 0; i < count; ++i) {
    const LinearSeries s = simulate_linear_series(spec, steps, derive_seed(seed, stream, i));
    b.ids[i] = prefix + std::to_string(i);
    for (std::size_t t = 0; t < steps; ++t) {
      const auto ti = static_cast<Eigen::Index>(t);
      b.y_at(i, t, 0) = s.y(ti);
      for (std::size_t k = 0; k < n; ++k) b.u_at(i, t, k) = s.u(ti, static_cast<Eigen::Index>(k));
      if (keep_latents) {
        for (std::size_t k = 0; k < d; ++k) {
          b.latents.mutable_data()[(i * steps + t) * d + k] = s.beta(ti, static_cast<Eigen::Index>(k));
        }
      }
    }
  }
  return b;
}

}  // namespace

SimulatedPanel simulate_linear_ssm(const LinearSSMSpec& spec, std::size_t n_train,
                                   std::size_t n_test, std::size_t steps, std::uint64_t seed) {
  if (steps < 1) throw DataError("simulate_linear_ssm: T must be >= 1");
  SimulatedPanel p;
  p.train = simulate_block(spec, n_train, steps, seed, 0, "train_", false);
  p.test = simulate_block(spec, n_test, steps, seed, 1, "test_", true);
  return p;
}

KalmanResult kalman_filter_loglik(const LinearSSMSpec& spec, const Eigen::VectorXd& y,
                                  const Eigen::MatrixXd& u) {
  spec.validate();
  const auto d = static_cast<Eigen::Index>(spec.state_dim());
  if (u.rows() != y.size() || u.cols() != spec.B.cols()) {
    throw DataError("kalman_filter_loglik: covariates do not match observations");
  }
  const Eigen::MatrixXd w = spec.state_noise_var * Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(d, d);
  KalmanResult r;
  for (Eigen::Index t = 0; t < y.size(); ++t) {
    const Eigen::VectorXd m_pred = spec.G * m + spec.B * u.row(t).transpose();
    const Eigen::MatrixXd p_pred = spec.G * p * spec.G.transpose() + w;
    const double s = spec.F * p_pred * spec.F.transpose() + spec.obs_noise_var;
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw NumericalError("kalman filter: innovation variance " + std::to_string(s) +
                           " is not positive at step " + std::to_string(t));
    }
    const double v = y(t) - spec.F.dot(m_pred);
    const double ll = -0.5 * (std::log(2.0 * std::numbers::pi * s) + v * v / s);
    r.step_loglik.push_back(ll);
    r.loglik += ll;
    const Eigen::VectorXd k = p_pred * spec.F.transpose() / s;
    m = m_pred + k * v;
    // Joseph form keeps p symmetric positive semidefinite.
    const Eigen::MatrixXd a = eye - k * spec.F;
    p = a * p_pred * a.transpose() + spec.obs_noise_var * k * k.transpose();
    r.filt_mean.push_back(m);
    r.filt_cov.push_back(p);
  }
  return r;
}

Eigen::MatrixXd stationary_state_cov(const Eigen::MatrixXd& g, const Eigen::MatrixXd& w) {
  const auto d = g.rows();
  Eigen::MatrixXd kron(d * d, d * d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) kron.block(i * d, j * d, d, d) = g(i, j) * g;
  }
  const Eigen::MatrixXd lhs = Eigen::MatrixXd::Identity(d * d, d * d) - kron;
  const Eigen::VectorXd vec_w = Eigen::Map<const Eigen::VectorXd>(w.data(), d * d);
  const Eigen::VectorXd vec_p = lhs.fullPivLu().solve(vec_w);
  return Eigen::Map<const Eigen::MatrixXd>(vec_p.data(), d, d);
}

void SeasonalSpec::validate() const {
  if (period < 2) throw DataError("seasonal panel: period must be >= 2");
  if (n_series < 1 || steps < 1) throw DataError("seasonal panel: empty panel");
  if (!(scale_low > 0.0) || !(scale_high >= scale_low)) {
    throw DataError("seasonal panel: invalid scale range");
  }
  if (!(std::abs(ar_coef) < 1.0)) throw DataError("seasonal panel: |ar_coef| must be < 1");
}

SeriesBatch simulate_seasonal_panel(const SeasonalSpec& spec, std::uint64_t seed) {
  spec.validate();
  SeriesBatch b = SeriesBatch::zeros(spec.n_series, spec.steps, 1, spec.period);
  const double log_lo = std::log(spec.scale_low), log_hi = std::log(spec.scale_high);
  for (std::size_t i = 0; i < spec.n_series; ++i) {
    Rng rng(derive_seed(seed, 2, i));
    const double scale = std::exp(rng.uniform(log_lo, log_hi));
    const double slope = rng.uniform(-spec.trend_max, spec.trend_max) /
                         static_cast<double>(std::max<std::size_t>(spec.steps, 1));
    const double phase = static_cast<double>(rng.next_u64() % spec.period);
    // Start the AR(1) noise from its stationary law.
    const double stat_sd = spec.noise_sd / std::sqrt(1.0 - spec.ar_coef * spec.ar_coef);
    double ar = stat_sd * rng.normal();
    b.ids[i] = "series_" + std::to_string(i);
    for (std::size_t t = 0; t < spec.steps; ++t) {
      if (t > 0) ar = spec.ar_coef * ar + spec.noise_sd * rng.normal();
      const double season =
          std::sin(2.0 * std::numbers::pi * (static_cast<double>(t) + phase) /
                   static_cast<double>(spec.period));
      b.y_at(i, t, 0) =
          scale * (1.0 + spec.amplitude * season + slope * static_cast<double>(t) + ar);
      b.u_at(i, t, (t + static_cast<std::size_t>(phase)) % spec.period) = 1.0;
    }
  }
  return b;
}

}  // namespace dssh::data
