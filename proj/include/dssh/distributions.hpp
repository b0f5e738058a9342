#pragma once

// Reparameterized samplers and closed-form KL divergences.
//
// Gamma G(a, b) and inverse-gamma IG(a, b) use shape a and *scale* b:
//   G:  p(x) ∝ x^(a-1) exp(-x / b)
//   IG: p(x) ∝ x^(-a-1) exp(-b / x)
// LN(mu, sigma) is the law of exp(mu + sigma * eps), eps ~ N(0, 1).

#include <cstdint>
#include <functional>
#include <stdexcept>

#include "dssh/rng.hpp"
#include "dssh/tensor.hpp"

namespace dssh::dist {

// Exponents above this are clamped when sampling log-normals.
inline constexpr double kLogNormalExpCap = 700.0;

struct NormalParams {
  ad::Tensor mu;
  ad::Tensor sigma;
};

struct LogNormalParams {
  ad::Tensor mu;
  ad::Tensor sigma;
};

struct GammaParams {
  double shape;
  double scale;
};

using InvGammaParams = GammaParams;

void check_positive(const ad::Tensor& t, const char* what);

// mu + sigma * noise; noise is treated as a constant.
ad::Tensor sample_normal_reparam(const NormalParams& p, const ad::Tensor& noise);
// exp(mu + sigma * noise); *clamped reports exponent overflow.
ad::Tensor sample_lognormal_reparam(const LogNormalParams& p, const ad::Tensor& noise,
                                    bool* clamped = nullptr);

// Elementwise log N(x; mu, sigma^2).
ad::Tensor normal_log_prob(const ad::Tensor& x, const NormalParams& p);

// Elementwise KL divergences; callers reduce over the latent axis.
ad::Tensor kl_normal_normal(const NormalParams& q, const NormalParams& p);
ad::Tensor kl_lognormal_gamma(const LogNormalParams& q, double a, double b);
ad::Tensor kl_lognormal_invgamma(const LogNormalParams& q, double a, double b);

// Scalar log densities (used by the Monte Carlo oracle and the samplers'
// tests).
double normal_logpdf(double x, double mu, double sigma);
double lognormal_logpdf(double x, double mu, double sigma);
double gamma_logpdf(double x, double a, double b);
double invgamma_logpdf(double x, double a, double b);

// Scalar closed forms matching the tensor versions.
double kl_normal_normal(double mu_q, double sigma_q, double mu_p, double sigma_p);
double kl_lognormal_gamma(double mu, double sigma, double a, double b);
double kl_lognormal_invgamma(double mu, double sigma, double a, double b);

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

// (1/n) sum [log q(x_i) - log p(x_i)] over x_i ~ q, with its standard error.
McEstimate mc_kl_oracle(const std::function<double(Rng&)>& q_sampler,
                        const std::function<double(double)>& q_logpdf,
                        const std::function<double(double)>& p_logpdf, std::size_t n,
                        std::uint64_t seed);

}  // namespace dssh::dist
