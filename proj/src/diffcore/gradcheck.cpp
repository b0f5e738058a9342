#include "dssh/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dssh::ad {

namespace {

double eval_no_grad(const MultiScalarFn& f, const std::vector<Tensor>& xs, std::size_t input,
                    std::size_t index) {
  NoGradScope no_grad;
  const Tensor y = f(xs);
  const double v = y.item();
  if (!std::isfinite(v)) {
    throw GradCheckError("non-finite function value while perturbing input " +
                         std::to_string(input) + " coordinate " + std::to_string(index));
  }
  return v;
}

}  // namespace

GradCheckResult grad_check_many(const MultiScalarFn& f, const std::vector<Tensor>& xs,
                                double eps, std::size_t max_coords_per_input) {
  std::vector<Tensor> leaves;
  leaves.reserve(xs.size());
  for (const auto& x : xs) {
    Tensor leaf = x.detach();
    leaf.set_requires_grad(true);
    leaves.push_back(leaf);
  }

  Tape tape;
  {
    TapeScope scope(tape);
    const Tensor y = f(leaves);
    if (!std::isfinite(y.item())) {
      throw GradCheckError("non-finite function value at the base point");
    }
    tape.backward(y);
  }

  GradCheckResult result;
  for (std::size_t in = 0; in < leaves.size(); ++in) {
    Tensor& leaf = leaves[in];
    const std::size_t n = leaf.size();
    const std::size_t stride =
        (max_coords_per_input == 0 || n <= max_coords_per_input)
            ? 1
            : (n + max_coords_per_input - 1) / max_coords_per_input;
    for (std::size_t i = 0; i < n; i += stride) {
      const double analytic = leaf.has_grad() ? leaf.grad()[i] : 0.0;
      const double orig = leaf.data()[i];
      leaf.mutable_data()[i] = orig + eps;
      const double fp = eval_no_grad(f, leaves, in, i);
      leaf.mutable_data()[i] = orig - eps;
      const double fm = eval_no_grad(f, leaves, in, i);
      leaf.mutable_data()[i] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
      ++result.coords_checked;
      if (err > result.max_rel_err) {
        result.max_rel_err = err;
        result.worst_input = in;
        result.worst_index = i;
      }
    }
  }
  return result;
}

double grad_check(const ScalarFn& f, const Tensor& x, double eps) {
  return grad_check_many([&](const std::vector<Tensor>& xs) { return f(xs[0]); }, {x}, eps)
      .max_rel_err;
}

}  // namespace dssh::ad
