#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dssh::model {

struct GradCase {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t coords = 0;
  bool passed = false;
  std::string error;  // set when the case could not be evaluated
};

struct GradSuiteOptions {
  double eps = 1e-5;
  double tolerance = 1e-5;
  std::uint64_t seed = 0;
};

// Finite-difference checks of every differentiable op, the distribution and
// shrinkage terms, each network head, one step of the ELBO and a 5-step
// sequence ELBO, all on small random instances.
std::vector<GradCase> run_gradient_suite(const GradSuiteOptions& opts = {});

}  // namespace dssh::model
