#pragma once

#include <functional>
#include <string>

#include "gridreg/tensor.hpp"

namespace gridreg {

struct FdReport {
  double max_rel_err = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::string worst_param;
};

// Central finite differences against reverse-mode gradients. `eval` must
// rebuild the graph from the given leaf parameters on every call (the
// tape is freed by backward). Relative error uses a unit floor so
// near-zero gradients are compared absolutely.
FdReport finite_difference_check(const std::function<Tensor()>& eval,
                                 const std::vector<std::pair<std::string, Tensor>>& params,
                                 float step = 1e-3f);

struct OpGradReport {
  std::string op;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

// Gradient checks for every differentiable operation plus the composed
// two-level 2D model loss. `only` restricts to ops whose name contains it.
std::vector<OpGradReport> run_gradcheck_suite(std::uint64_t seed,
                                              const std::string& only = "");

}  // namespace gridreg
