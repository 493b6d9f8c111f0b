#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mpcc/param_store.hpp"
#include "mpcc/tensor.hpp"

namespace mpcc {

// Scalar objective built on a tape; the callable must be deterministic given
// the current parameter values (fix any random draws outside the closure).
using TapeFn = std::function<Tensor(Tape&)>;

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  bool finite = true;  // false when f was non-finite at a perturbed point
};

struct GradCheckReport {
  std::vector<GradCheckEntry> per_param;
  double worst = 0.0;
  bool pass = false;
};

// Compares the tape gradient of f against central finite differences for
// every listed parameter. Relative error uses max(|analytic|, |numeric|, 1e-6)
// as denominator.
GradCheckReport finite_difference_check(const TapeFn& f, ParameterStore& params,
                                        const std::vector<std::string>& names,
                                        double step, double tol);

}  // namespace mpcc
