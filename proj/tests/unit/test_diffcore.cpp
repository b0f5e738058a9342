#include <doctest.h>

#include <cmath>

#include "../support/helpers.hpp"
#include "dssh/gradcheck.hpp"
#include "dssh/kernels.hpp"
#include "dssh/ops.hpp"

using namespace dssh;
using namespace dssh::ad;
using testing::mat;
using testing::vec;

namespace {

// Gradient of a scalar function of one leaf.
std::vector<double> grad_of(const std::function<Tensor(const Tensor&)>& f, Tensor x) {
  x = x.detach();
  x.set_requires_grad(true);
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(f(x));
  }
  return {x.grad().begin(), x.grad().end()};
}

}  // namespace

TEST_SUITE("diffcore") {
  TEST_CASE("tensor shape invariants") {
    const Tensor t = Tensor::zeros({2, 3});
    CHECK(t.size() == 6);
    CHECK(t.rank() == 2);
    CHECK_THROWS_AS(Tensor::from({2, 2}, {1.0, 2.0, 3.0}), ShapeError);
    CHECK(shape_to_string({2, 3}) == "[2x3]");
  }

  TEST_CASE("matmul values") {
    const Tensor b = mat(2, 2, {1, 2, 3, 4});
    const Tensor i2 = mat(2, 2, {1, 0, 0, 1});
    const Tensor r = matmul(i2, b);
    for (std::size_t k = 0; k < 4; ++k) CHECK(r.at(k) == b.at(k));

    const Tensor p = matmul(mat(2, 2, {1, 0, 0, 0}), mat(2, 2, {5, 6, 7, 8}));
    CHECK(p.at(0, 0) == 5);
    CHECK(p.at(0, 1) == 6);
    CHECK(p.at(1, 0) == 0);
    CHECK(p.at(1, 1) == 0);
  }

  TEST_CASE("matmul shape error names both shapes") {
    try {
      matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
      FAIL("expected a shape error");
    } catch (const ShapeError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("[2x3]") != std::string::npos);
    }
  }

  TEST_CASE("matmul gradient against finite differences") {
    const Tensor a = mat(1, 2, {1, 1});
    const Tensor b = mat(2, 1, {2, 3});
    const auto g = grad_of([&](const Tensor& x) { return sum(matmul(x, b)); }, a);
    // Independent oracle: central differences with step 1e-6.
    for (std::size_t i = 0; i < 2; ++i) {
      std::vector<double> hi(a.data().begin(), a.data().end()), lo = hi;
      hi[i] += 1e-6;
      lo[i] -= 1e-6;
      const double fd = (sum(matmul(mat(1, 2, hi), b)).item() - sum(matmul(mat(1, 2, lo), b)).item()) / 2e-6;
      CHECK(g[i] == doctest::Approx(fd).epsilon(1e-8));
    }
    CHECK(g[0] == doctest::Approx(2.0));
    CHECK(g[1] == doctest::Approx(3.0));
  }

  TEST_CASE("elementwise values") {
    const Tensor e = ad::exp(vec({0.0, 1.0}));
    CHECK(e.at(0) == 1.0);
    CHECK(e.at(1) == doctest::Approx(std::exp(1.0)));
    const Tensor x = vec({0.5, 2.0});
    const Tensor r = ad::log(ad::exp(x));
    CHECK(r.at(0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r.at(1) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(grad_of([](const Tensor& v) { return square(v); }, Tensor::scalar(3.0))[0] == doctest::Approx(6.0));
  }

  TEST_CASE("domain errors and non-finite flag") {
    CHECK_THROWS_AS(ad::log(vec({-1.0})), DomainError);
    CHECK_THROWS_AS(ad::sqrt(vec({-0.5})), DomainError);
    Tape tape;
    {
      TapeScope scope(tape);
      const Tensor y = div(vec({1.0}), vec({0.0}));
      CHECK_FALSE(std::isfinite(y.at(0)));
    }
    CHECK(tape.nonfinite());
    CHECK(tape.nonfinite_op() == "div");
  }

  TEST_CASE("softplus") {
    CHECK(softplus(vec({0.0})).at(0) == doctest::Approx(std::log(2.0)));
    CHECK(std::abs(softplus(vec({50.0})).at(0) - 50.0) < 1e-12);
    CHECK(grad_of([](const Tensor& v) { return sum(softplus(v)); }, vec({0.0}))[0] == doctest::Approx(0.5));
    const Tensor big = softplus(vec({-700.0, 800.0}));
    CHECK(big.at(0) > 0.0);
    CHECK(std::isfinite(big.at(1)));
  }

  TEST_CASE("reductions") {
    CHECK(sum(vec({1, 2, 3})).item() == 6.0);
    const Tensor m = mean(mat(2, 2, {1, 2, 3, 4}), 0);
    CHECK(m.at(0) == 2.0);
    CHECK(m.at(1) == 3.0);
    const auto g = grad_of([](const Tensor& v) { return mean(v); }, vec({1, 2, 3, 4}));
    for (double v : g) CHECK(v == 0.25);
    CHECK_THROWS_AS(sum(mat(2, 2, {1, 2, 3, 4}), 2), ShapeError);
  }

  TEST_CASE("grad_check examples") {
    CHECK(grad_check([](const Tensor& x) { return sum(square(x)); }, vec({1, 2})) < 1e-6);
    CHECK(grad_check([](const Tensor& x) { return sum(softplus(x)); }, vec({-3, 0, 3})) < 1e-6);
    CHECK(grad_check([](const Tensor&) { return Tensor::scalar(4.0); }, vec({1, 2})) == 0.0);
  }

  TEST_CASE("grad_check reports non-finite values") {
    CHECK_THROWS_AS(grad_check([](const Tensor& x) { return sum(ad::log(x)); }, vec({1e-7})),
                    std::exception);
  }

  TEST_CASE("every op passes grad_check at 10 random points") {
    Rng rng(41);
    const std::vector<std::pair<const char*, std::function<Tensor(const Tensor&)>>> ops{
        {"exp", [](const Tensor& x) { return sum(ad::exp(x)); }},
        {"log", [](const Tensor& x) { return sum(ad::log(square(x) + 0.5)); }},
        {"sqrt", [](const Tensor& x) { return sum(ad::sqrt(square(x) + 0.5)); }},
        {"tanh", [](const Tensor& x) { return sum(ad::tanh(x)); }},
        {"sigmoid", [](const Tensor& x) { return sum(sigmoid(x)); }},
        {"softplus", [](const Tensor& x) { return sum(softplus(x)); }},
        {"div", [](const Tensor& x) { return sum(x / (square(x) + 1.0)); }},
        {"mul", [](const Tensor& x) { return sum(x * x * x); }},
        {"matmul", [](const Tensor& x) { return sum(square(matmul(x, x))); }},
        {"mean_axis", [](const Tensor& x) { return sum(square(mean(x, 1))); }},
    };
    for (const auto& [name, f] : ops) {
      for (int k = 0; k < 10; ++k) {
        const Tensor x = testing::random_tensor({3, 3}, rng, -1.5, 1.5);
        INFO(name);
        CHECK(grad_check(f, x) < 1e-5);
      }
    }
  }

  TEST_CASE("diamond graph accumulates gradients") {
    const auto g = grad_of([](const Tensor& x) { return sum(x + x); }, Tensor::scalar(1.0));
    CHECK(g[0] == 2.0);
  }

  TEST_CASE("matmul associativity") {
    Rng rng(5);
    const Tensor a = testing::random_tensor({3, 3}, rng), b = testing::random_tensor({3, 3}, rng),
                 c = testing::random_tensor({3, 3}, rng);
    CHECK(testing::max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))) < 1e-10);
  }

  TEST_CASE("gradients do not depend on the order branches are recorded") {
    Rng rng(9);
    const Tensor w = testing::random_tensor({2, 2}, rng);
    auto f1 = [&](const Tensor& x) { return sum(ad::tanh(matmul(x, w))) + sum(square(x)); };
    auto f2 = [&](const Tensor& x) { return sum(square(x)) + sum(ad::tanh(matmul(x, w))); };
    const Tensor x = testing::random_tensor({2, 2}, rng);
    const auto g1 = grad_of(f1, x), g2 = grad_of(f2, x);
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == doctest::Approx(g2[i]).epsilon(1e-14));
  }

  TEST_CASE("parallel gemm kernels match the serial reference bitwise") {
    Rng rng(3);
    for (std::size_t n : {7, 33, 70}) {
      const std::size_t m = n + 3, k = n + 1;
      std::vector<double> a(m * k), b(k * n), at(m * n);
      for (double& v : a) v = rng.normal();
      for (double& v : b) v = rng.normal();
      for (double& v : at) v = rng.normal();
      std::vector<double> c1(m * n, 0.5), c2 = c1;
      kernels::gemm_nn(a.data(), b.data(), c1.data(), m, k, n);
      kernels::gemm_nn_serial(a.data(), b.data(), c2.data(), m, k, n);
      CHECK(c1 == c2);
      std::vector<double> d1(m * k, 0.0), d2 = d1;
      kernels::gemm_nt(at.data(), b.data(), d1.data(), m, n, k);
      kernels::gemm_nt_serial(at.data(), b.data(), d2.data(), m, n, k);
      CHECK(d1 == d2);
      std::vector<double> e1(k * n, 0.0), e2 = e1;
      kernels::gemm_tn(a.data(), at.data(), e1.data(), m, k, n);
      kernels::gemm_tn_serial(a.data(), at.data(), e2.data(), m, k, n);
      CHECK(e1 == e2);
      // Independent triple loop for the values.
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          double s = 0.5;
          for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
          CHECK(c1[i * n + j] == doctest::Approx(s).epsilon(1e-12));
        }
      }
    }
  }

  TEST_CASE("no-grad scope records nothing") {
    Tape tape;
    TapeScope scope(tape);
    {
      NoGradScope ng;
      Tensor x = Tensor::parameter({1}, {2.0});
      (void)square(x);
    }
    CHECK(tape.size() == 0);
  }
}
