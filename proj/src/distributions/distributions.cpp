#include "dssh/distributions.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "dssh/ops.hpp"

namespace dssh::dist {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
const double kHalfLog2PiE = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);

void check_same_shape(const ad::Tensor& a, const ad::Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ad::ShapeError(std::string(what) + ": shapes " + ad::shape_to_string(a.shape()) +
                         " and " + ad::shape_to_string(b.shape()) + " differ");
  }
}

void check_hyper(double a, double b, const char* what) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw ad::DomainError(std::string(what) + ": shape and scale must be positive (got " +
                          std::to_string(a) + ", " + std::to_string(b) + ")");
  }
}

}  // namespace

void check_positive(const ad::Tensor& t, const char* what) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!(t.at(i) > 0.0)) {
      throw ad::DomainError(std::string(what) + " must be positive, got " +
                            std::to_string(t.at(i)) + " at index " + std::to_string(i));
    }
  }
}

ad::Tensor sample_normal_reparam(const NormalParams& p, const ad::Tensor& noise) {
  check_same_shape(p.mu, p.sigma, "normal params");
  check_same_shape(p.mu, noise, "normal noise");
  check_positive(p.sigma, "normal sigma");
  return p.mu + p.sigma * noise.detach();
}

ad::Tensor sample_lognormal_reparam(const LogNormalParams& p, const ad::Tensor& noise,
                                    bool* clamped) {
  check_same_shape(p.mu, p.sigma, "log-normal params");
  check_same_shape(p.mu, noise, "log-normal noise");
  check_positive(p.sigma, "log-normal sigma");
  return ad::exp_clamped(p.mu + p.sigma * noise.detach(), kLogNormalExpCap, clamped);
}

ad::Tensor normal_log_prob(const ad::Tensor& x, const NormalParams& p) {
  check_same_shape(x, p.mu, "normal log prob");
  check_positive(p.sigma, "normal sigma");
  const ad::Tensor z = (x - p.mu) / p.sigma;
  return ad::neg(ad::log(p.sigma)) - kHalfLog2Pi - 0.5 * ad::square(z);
}

ad::Tensor kl_normal_normal(const NormalParams& q, const NormalParams& p) {
  check_same_shape(q.mu, p.mu, "kl_normal_normal");
  check_same_shape(q.sigma, p.sigma, "kl_normal_normal");
  check_positive(q.sigma, "q sigma");
  check_positive(p.sigma, "p sigma");
  const ad::Tensor var_p = ad::square(p.sigma);
  return ad::log(p.sigma / q.sigma) +
         (ad::square(q.sigma) + ad::square(q.mu - p.mu)) / (2.0 * var_p) - 0.5;
}

// KL(LN(mu, s) || G(a, b)) = lgamma(a) + a log b - a mu - ½ log(2πe s²) + exp(mu + s²/2) / b
ad::Tensor kl_lognormal_gamma(const LogNormalParams& q, double a, double b) {
  check_hyper(a, b, "gamma prior");
  check_same_shape(q.mu, q.sigma, "kl_lognormal_gamma");
  check_positive(q.sigma, "log-normal sigma");
  const double c = std::lgamma(a) + a * std::log(b) - kHalfLog2PiE;
  return c - a * q.mu - ad::log(q.sigma) + ad::exp(q.mu + 0.5 * ad::square(q.sigma)) * (1.0 / b);
}

// KL(LN(mu, s) || IG(a, b)) = lgamma(a) - a log b + a mu - ½ log(2πe s²) + b exp(-mu + s²/2)
ad::Tensor kl_lognormal_invgamma(const LogNormalParams& q, double a, double b) {
  check_hyper(a, b, "inverse-gamma prior");
  check_same_shape(q.mu, q.sigma, "kl_lognormal_invgamma");
  check_positive(q.sigma, "log-normal sigma");
  const double c = std::lgamma(a) - a * std::log(b) - kHalfLog2PiE;
  return c + a * q.mu - ad::log(q.sigma) + ad::exp(0.5 * ad::square(q.sigma) - q.mu) * b;
}

double normal_logpdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -std::log(sigma) - kHalfLog2Pi - 0.5 * z * z;
}

double lognormal_logpdf(double x, double mu, double sigma) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  const double lx = std::log(x);
  return normal_logpdf(lx, mu, sigma) - lx;
}

double gamma_logpdf(double x, double a, double b) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return (a - 1.0) * std::log(x) - x / b - std::lgamma(a) - a * std::log(b);
}

double invgamma_logpdf(double x, double a, double b) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return a * std::log(b) - std::lgamma(a) - (a + 1.0) * std::log(x) - b / x;
}

double kl_normal_normal(double mu_q, double sigma_q, double mu_p, double sigma_p) {
  if (!(sigma_q > 0.0) || !(sigma_p > 0.0)) throw ad::DomainError("kl_normal_normal: sigmas must be positive");
  const double d = mu_q - mu_p;
  return std::log(sigma_p / sigma_q) + (sigma_q * sigma_q + d * d) / (2.0 * sigma_p * sigma_p) - 0.5;
}

double kl_lognormal_gamma(double mu, double sigma, double a, double b) {
  check_hyper(a, b, "gamma prior");
  if (!(sigma > 0.0)) throw ad::DomainError("log-normal sigma must be positive");
  return std::lgamma(a) + a * std::log(b) - a * mu - std::log(sigma) - kHalfLog2PiE +
         std::exp(mu + 0.5 * sigma * sigma) / b;
}

double kl_lognormal_invgamma(double mu, double sigma, double a, double b) {
  check_hyper(a, b, "inverse-gamma prior");
  if (!(sigma > 0.0)) throw ad::DomainError("log-normal sigma must be positive");
  return std::lgamma(a) - a * std::log(b) + a * mu - std::log(sigma) - kHalfLog2PiE +
         b * std::exp(-mu + 0.5 * sigma * sigma);
}

McEstimate mc_kl_oracle(const std::function<double(Rng&)>& q_sampler,
                        const std::function<double(double)>& q_logpdf,
                        const std::function<double(double)>& p_logpdf, std::size_t n,
                        std::uint64_t seed) {
  if (n < 1) throw OracleError("mc_kl_oracle needs n >= 1");
  Rng rng(seed);
  // Welford accumulation for the standard error.
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = q_sampler(rng);
    const double d = q_logpdf(x) - p_logpdf(x);
    if (!std::isfinite(d)) {
      throw OracleError("non-finite log density ratio at sample " + std::to_string(i) +
                        " (x = " + std::to_string(x) + ")");
    }
    const double delta = d - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (d - mean);
  }
  McEstimate est;
  est.mean = mean;
  est.n = n;
  est.std_error = n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
  return est;
}

}  // namespace dssh::dist
