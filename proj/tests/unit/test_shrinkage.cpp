#include <doctest.h>

#include <cmath>

#include "../support/helpers.hpp"
#include "dssh/gradcheck.hpp"
#include "dssh/ops.hpp"
#include "dssh/shrinkage.hpp"

using namespace dssh;
using ad::Tensor;
using testing::mat;
using testing::vec;

namespace {

double tau_star_lambda(double tau_sq, double c_sq, double lambda_sq) {
  return shrink::regularized_tau_star_sq(vec({tau_sq}), vec({c_sq}), vec({lambda_sq})).at(0) * lambda_sq;
}

double tau_star(double tau_sq, double c_sq, double lambda_sq) {
  return shrink::regularized_tau_star_sq(vec({tau_sq}), vec({c_sq}), vec({lambda_sq})).at(0);
}

nn::ParameterStore zero_global_heads(const shrink::GlobalHeadConfig& cfg) {
  nn::ParameterStore s;
  Rng rng(1);
  shrink::init_global_heads(cfg, "g", s, rng);
  for (auto& [name, t] : s) {
    for (double& v : t.mutable_data()) v = 0.0;
  }
  return s;
}

}  // namespace

TEST_SUITE("shrinkage") {
  TEST_CASE("regularized tau limits and midpoint") {
    const double upper = tau_star_lambda(1e6, 1.0, 1.0);
    CHECK(upper == doctest::Approx(1e6 / (1.0 + 1e6)).epsilon(1e-14));
    CHECK(std::abs(upper - 1.0) / 1.0 < 1e-3);
    const double lower = tau_star_lambda(1e-6, 1.0, 1.0);
    CHECK(std::abs(lower - 1e-6) / 1e-6 < 1e-3);
    CHECK(tau_star(1.0, 1.0, 1.0) == 0.5);
    CHECK_THROWS_AS(tau_star(0.0, 1.0, 1.0), ad::DomainError);
    CHECK_THROWS_AS(tau_star(1.0, -1.0, 1.0), ad::DomainError);
    CHECK_THROWS_AS(tau_star(1.0, 1.0, 0.0), ad::DomainError);
  }

  TEST_CASE("regularized horseshoe bound on random triples") {
    Rng rng(2);
    for (int i = 0; i < 1000; ++i) {
      const double t = std::exp(rng.uniform(-8, 8)), c = std::exp(rng.uniform(-8, 8)), l = std::exp(rng.uniform(-8, 8));
      const double v = tau_star_lambda(t, c, l);
      CHECK(v > 0.0);
      CHECK(v < std::min(c, t * l * (1.0 + 1e-12)));
    }
  }

  TEST_CASE("regularized tau is monotone in each argument") {
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
      const double t = std::exp(rng.uniform(-3, 3)), c = std::exp(rng.uniform(-3, 3)), l = std::exp(rng.uniform(-3, 3));
      const double h = 1e-4;
      const double base = tau_star(t, c, l);
      CHECK(tau_star(t * (1 + h), c, l) > base);
      CHECK(tau_star(t, c * (1 + h), l) > base);
      CHECK(tau_star(t, c, l * (1 + h)) < base);
    }
  }

  TEST_CASE("local prior KL sums the gamma and inverse-gamma terms") {
    const dist::LogNormalParams qa{mat(1, 2, {0.0, 0.3}), mat(1, 2, {1.0, 0.5})};
    const dist::LogNormalParams qb{mat(1, 2, {0.0, -0.2}), mat(1, 2, {1.0, 0.8})};
    const Tensor kl = shrink::prior_local_kl(qa, qb);
    REQUIRE(kl.size() == 1);
    double expected = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
      expected += dist::kl_lognormal_gamma(qa.mu.at(i), qa.sigma.at(i), 0.5, 1.0) +
                  dist::kl_lognormal_invgamma(qb.mu.at(i), qb.sigma.at(i), 0.5, 1.0);
    }
    CHECK(kl.at(0) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(kl.at(0) > 0.0);

    // Monte Carlo cross-check of the first gamma term.
    const auto mc = dist::mc_kl_oracle([](Rng& r) { return std::exp(r.normal()); },
                                       [](double x) { return dist::lognormal_logpdf(x, 0.0, 1.0); },
                                       [](double x) { return dist::gamma_logpdf(x, 0.5, 1.0); }, 1000000, 4);
    const double closed = dist::kl_lognormal_gamma(0.0, 1.0, 0.5, 1.0);
    CHECK(std::abs(mc.mean - closed) < 0.01 * closed);

    const dist::LogNormalParams empty{Tensor::zeros({1, 0}), Tensor::zeros({1, 0})};
    CHECK(shrink::prior_local_kl(empty, empty).at(0) == 0.0);
  }

  TEST_CASE("global prior KL terms and additivity in tau0") {
    const dist::LogNormalParams q{mat(1, 1, {0.1}), mat(1, 1, {0.6})};
    shrink::ShrinkageHyper h;
    const shrink::GlobalKl k1 = shrink::prior_global_kl(q, q, q, h);
    CHECK(k1.alpha_tau.at(0) == doctest::Approx(dist::kl_lognormal_gamma(0.1, 0.6, 0.5, 1.0)).epsilon(1e-14));
    CHECK(k1.beta_tau.at(0) == doctest::Approx(dist::kl_lognormal_invgamma(0.1, 0.6, 0.5, 1.0)).epsilon(1e-14));
    CHECK(k1.c_sq.at(0) == doctest::Approx(dist::kl_lognormal_invgamma(0.1, 0.6, 2.0, 1.0)).epsilon(1e-14));
    CHECK(k1.total.at(0) == doctest::Approx(k1.alpha_tau.at(0) + k1.beta_tau.at(0) + k1.c_sq.at(0)));
    CHECK(k1.alpha_tau.at(0) >= 0.0);
    CHECK(k1.beta_tau.at(0) >= 0.0);
    CHECK(k1.c_sq.at(0) >= 0.0);

    h.tau0 = 3.0;
    const shrink::GlobalKl k2 = shrink::prior_global_kl(q, q, q, h);
    CHECK(k2.alpha_tau.at(0) == doctest::Approx(dist::kl_lognormal_gamma(0.1, 0.6, 0.5, 9.0)).epsilon(1e-14));
    CHECK(k2.alpha_tau.at(0) != k1.alpha_tau.at(0));
    CHECK(k2.beta_tau.at(0) == k1.beta_tau.at(0));
    CHECK(k2.c_sq.at(0) == k1.c_sq.at(0));

    shrink::ShrinkageHyper bad;
    bad.c0 = 0.0;
    CHECK_THROWS(bad.validate());
  }

  TEST_CASE("local posterior: zero head gives unit scales") {
    const std::size_t q = 3;
    const Tensor head = Tensor::zeros({2, 4 * q});
    const auto s = shrink::sample_local_posterior(head, Tensor::zeros({2, q}), Tensor::zeros({2, q}));
    for (std::size_t i = 0; i < 2 * q; ++i) {
      CHECK(s.alpha.at(i) == 1.0);
      CHECK(s.beta.at(i) == 1.0);
      CHECK(s.lambda_sq.at(i) == 1.0);
    }
    CHECK_THROWS_AS(shrink::sample_local_posterior(Tensor::zeros({2, 5}), Tensor::zeros({2, 1}), Tensor::zeros({2, 1})),
                    ad::ShapeError);
  }

  TEST_CASE("local posterior sample mean of lambda squared") {
    // E[alpha] E[beta] with both LN(0, 0.1): exp(0.1^2 / 2)^2 = exp(0.01).
    const std::size_t n = 100000;
    std::vector<double> head(4 * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      head[i * 4 + 1] = std::log(0.1);
      head[i * 4 + 3] = std::log(0.1);
    }
    Rng rng(5);
    std::vector<double> ea(n), eb(n);
    for (std::size_t i = 0; i < n; ++i) {
      ea[i] = rng.normal();
      eb[i] = rng.normal();
    }
    const auto s = shrink::sample_local_posterior(Tensor::from({n, 4}, head), Tensor::from({n, 1}, ea),
                                                  Tensor::from({n, 1}, eb));
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      REQUIRE(s.lambda_sq.at(i) > 0.0);
      CHECK(s.lambda_sq.at(i) == s.alpha.at(i) * s.beta.at(i));
      mean += s.lambda_sq.at(i);
    }
    mean /= static_cast<double>(n);
    CHECK(std::abs(mean - std::exp(0.01)) < 0.01);
  }

  TEST_CASE("global posterior: zero heads give unit tau and c") {
    const shrink::GlobalHeadConfig cfg{2, {4}};
    const auto params = zero_global_heads(cfg);
    const auto s = shrink::sample_global_posterior(cfg, params, "g", mat(3, 2, {1, 2, 3, 4, 5, 6}),
                                                   Tensor::zeros({3, 3}));
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(s.tau_sq.at(i) == 1.0);
      CHECK(s.c_sq.at(i) == 1.0);
    }
  }

  TEST_CASE("global posterior is deterministic and consistent with the bound formula") {
    const shrink::GlobalHeadConfig cfg{1, {3}};
    nn::ParameterStore p;
    Rng rng(6);
    shrink::init_global_heads(cfg, "g", p, rng);
    const Tensor pooled = mat(2, 1, {0.4, -1.1});
    Rng n1(7), n2(7);
    const Tensor e1 = testing::random_tensor({2, 3}, n1), e2 = testing::random_tensor({2, 3}, n2);
    const auto a = shrink::sample_global_posterior(cfg, p, "g", pooled, e1);
    const auto b = shrink::sample_global_posterior(cfg, p, "g", pooled, e2);
    CHECK(testing::max_abs_diff(a.tau_sq, b.tau_sq) == 0.0);
    CHECK(testing::max_abs_diff(a.c_sq, b.c_sq) == 0.0);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(a.tau_sq.at(i) == a.alpha_tau.at(i) * a.beta_tau.at(i));
      const double l = 0.37;
      const double direct = a.c_sq.at(i) * a.tau_sq.at(i) / (a.c_sq.at(i) + a.tau_sq.at(i) * l);
      CHECK(tau_star(a.tau_sq.at(i), a.c_sq.at(i), l) == doctest::Approx(direct).epsilon(1e-15));
    }
  }

  TEST_CASE("gradients flow through sample, regularized tau and product") {
    Rng rng(8);
    const std::size_t q = 2;
    const Tensor head = testing::random_tensor({2, 4 * q}, rng, -0.5, 0.5);
    const Tensor na = testing::random_tensor({2, q}, rng), nb = testing::random_tensor({2, q}, rng);
    const Tensor tau = testing::random_tensor({2, 1}, rng, 0.3, 2.0);
    const Tensor c = testing::random_tensor({2, 1}, rng, 0.3, 2.0);
    const auto r = ad::grad_check_many(
        [&](const std::vector<Tensor>& v) {
          const auto s = shrink::sample_local_posterior(v[0], na, nb);
          const Tensor ts = shrink::regularized_tau_star_sq(ad::repeat_cols(v[1], q), ad::repeat_cols(v[2], q),
                                                            s.lambda_sq);
          return ad::sum(ad::sqrt(ts * s.lambda_sq));
        },
        {head, tau, c});
    CHECK(r.max_rel_err < 1e-5);
  }
}
