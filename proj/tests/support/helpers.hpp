#pragma once

#include <cmath>
#include <vector>

#include "dssh/rng.hpp"
#include "dssh/tensor.hpp"

namespace dssh::testing {

inline ad::Tensor random_tensor(ad::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(ad::shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return ad::Tensor::from(std::move(shape), std::move(v));
}

inline ad::Tensor vec(std::vector<double> v) {
  const std::size_t n = v.size();
  return ad::Tensor::from({n}, std::move(v));
}

inline ad::Tensor mat(std::size_t r, std::size_t c, std::vector<double> v) {
  return ad::Tensor::from({r, c}, std::move(v));
}

inline double max_abs_diff(const ad::Tensor& a, const ad::Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.at(i) - b.at(i)));
  return m;
}

}  // namespace dssh::testing
