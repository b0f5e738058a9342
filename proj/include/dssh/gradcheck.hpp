#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "dssh/tensor.hpp"

namespace dssh::ad {

class GradCheckError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  std::size_t coords_checked = 0;
};

using ScalarFn = std::function<Tensor(const Tensor&)>;
using MultiScalarFn = std::function<Tensor(const std::vector<Tensor>&)>;

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
double grad_check(const ScalarFn& f, const Tensor& x, double eps = 1e-5);

// Same over several inputs at once. `max_coords_per_input` > 0 checks a
// deterministic strided subset of each input's coordinates.
GradCheckResult grad_check_many(const MultiScalarFn& f, const std::vector<Tensor>& xs,
                                double eps = 1e-5, std::size_t max_coords_per_input = 0);

}  // namespace dssh::ad
