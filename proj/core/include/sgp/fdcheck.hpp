#pragma once

#include <functional>
#include <string>

#include "sgp/params.hpp"

namespace sgp::num {

struct FdReport {
  bool aborted = false;       // non-deterministic objective detected
  std::string note;
  double max_rel_error = 0.0;
  std::string worst_param;
  int64_t worst_index = -1;
  int checked = 0;            // coordinates compared
  int both_zero = 0;          // coordinates where analytic and fd are both ~0
  bool passed(double tol) const { return !aborted && max_rel_error < tol; }
};

/// Compares tape gradients against central finite differences.
///
/// `f` evaluates the objective at the store's current values and must also
/// accumulate analytic gradients into the store (zero_grad + backward inside).
/// Coordinates are subsampled deterministically when the parameter count
/// exceeds `max_coords`. Two baseline evaluations guard against
/// non-deterministic objectives; a mismatch aborts the check.
FdReport finite_difference_check(
    const std::function<double(ParameterStore&)>& f, ParameterStore& params,
    double eps_step = 1e-5, int max_coords = 200);

}  // namespace sgp::num
