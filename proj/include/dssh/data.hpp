#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "dssh/series.hpp"

namespace dssh::data {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// beta_t = G beta_{t-1} + B u_t + eta_t,  eta_t ~ N(0, state_noise_var I)
// y_t    = F beta_t + eps_t,              eps_t ~ N(0, obs_noise_var)
// beta_0 = 0; u_t ~ Uniform(u_low, u_high) per component.
struct LinearSSMSpec {
  Eigen::RowVectorXd F;
  Eigen::MatrixXd G;
  Eigen::MatrixXd B;  // [D x N]
  double obs_noise_var = 1.0;
  double state_noise_var = 0.25;
  double u_low = -1.0;
  double u_high = 1.0;

  // Two latent states, one covariate, constants from the reference setup.
  static LinearSSMSpec reference();

  std::size_t state_dim() const { return static_cast<std::size_t>(G.rows()); }
  std::size_t cov_dim() const { return static_cast<std::size_t>(B.cols()); }
  void validate() const;
};

struct SimulatedPanel {
  SeriesBatch train;
  SeriesBatch test;  // carries the true latent paths
};

// Train and test draw from independent substreams of `seed`.
SimulatedPanel simulate_linear_ssm(const LinearSSMSpec& spec, std::size_t n_train,
                                   std::size_t n_test, std::size_t steps, std::uint64_t seed);

// Single series of the linear model with its latent path; y [T], u [T x N], beta [T x D].
struct LinearSeries {
  Eigen::VectorXd y;
  Eigen::MatrixXd u;
  Eigen::MatrixXd beta;
};
LinearSeries simulate_linear_series(const LinearSSMSpec& spec, std::size_t steps,
                                    std::uint64_t seed);

struct KalmanResult {
  double loglik = 0.0;
  std::vector<double> step_loglik;           // log p(y_t | y_{1:t-1}, u)
  std::vector<Eigen::VectorXd> filt_mean;    // E[beta_t | y_{1:t}]
  std::vector<Eigen::MatrixXd> filt_cov;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exact log p(y_{1:T} | u_{1:T}) with known beta_0 = 0.
KalmanResult kalman_filter_loglik(const LinearSSMSpec& spec, const Eigen::VectorXd& y,
                                  const Eigen::MatrixXd& u);

// Stationary state covariance P = G P G' + W, solved through the Kronecker
// system (I - G (x) G) vec P = vec W.
Eigen::MatrixXd stationary_state_cov(const Eigen::MatrixXd& g, const Eigen::MatrixXd& w);

struct SeasonalSpec {
  std::size_t n_series = 100;
  std::size_t steps = 1000;
  std::size_t period = 24;
  double amplitude = 0.5;
  double trend_max = 0.2;   // |total trend over the series| <= trend_max
  double ar_coef = 0.5;
  double noise_sd = 0.1;    // innovation sd of the AR(1) noise
  double scale_low = 1.0;   // scales are log-uniform on [scale_low, scale_high]
  double scale_high = 100.0;

  void validate() const;
};

// y_t = scale * (1 + amplitude sin(2 pi t / period) + trend_t + ar_t), with
// one-hot position-in-period covariates (N = period).
SeriesBatch simulate_seasonal_panel(const SeasonalSpec& spec, std::uint64_t seed);

// Long-format CSV: timestamp,series_id,value[,covariate...].
struct CsvOptions {
  bool hour_of_day = false;   // 24 one-hot columns
  bool day_of_week = false;   // 7 one-hot columns
  bool gap_flag = false;      // 1 where the value was forward-filled
  bool extra_covariates = true;  // columns after "value" become covariates
};

struct CsvPanel {
  SeriesBatch batch;
  std::vector<std::int64_t> start;  // per-series first timestamp, seconds since epoch
  std::int64_t step_seconds = 3600;
  std::vector<std::string> covariate_names;
  std::size_t filled = 0;  // number of forward-filled steps
};

std::int64_t parse_iso8601(const std::string& s);
std::string format_iso8601(std::int64_t seconds);

CsvPanel load_csv_panel(const std::string& path, const CsvOptions& opts = {});

// Writes y (M must be 1) and u as extra covariate columns named u1..uN.
// Timestamps advance by step_seconds from `start`.
void write_csv_panel(const std::string& path, const SeriesBatch& batch,
                     std::int64_t start = 1577836800, std::int64_t step_seconds = 3600);

// t,series_id,beta1,...,betaD from batch.latents.
void write_latents_csv(const std::string& path, const SeriesBatch& batch);
// Reads the latents sidecar into the matching rows (by series id) of batch.
void read_latents_csv(const std::string& path, SeriesBatch& batch);

struct Window {
  std::size_t series = 0;
  std::size_t origin = 0;
  std::size_t context_len = 0;
  std::size_t horizon = 0;
};

struct WindowSet {
  std::vector<Window> windows;
  std::size_t skipped = 0;  // series shorter than context + horizon
};

WindowSet make_windows(const SeriesBatch& batch, std::size_t context_len, std::size_t horizon,
                       std::size_t stride);

// Steps [origin, origin + L + p) of each window's series, one row per window.
SeriesBatch extract_windows(const SeriesBatch& batch, const std::vector<Window>& windows);

}  // namespace dssh::data
