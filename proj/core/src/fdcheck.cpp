#include "sgp/fdcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace sgp::num {

namespace {

constexpr double kZeroFloor = 1e-10;

struct Coord {
  Param* param;
  int64_t index;
};

}  // namespace

FdReport finite_difference_check(
    const std::function<double(ParameterStore&)>& f, ParameterStore& params,
    double eps_step, int max_coords) {
  FdReport report;

  params.zero_grad();
  double base1 = f(params);

  // Snapshot analytic gradients before any perturbation.
  std::vector<Param*> all = params.all();
  std::vector<Tensor> analytic;
  analytic.reserve(all.size());
  for (Param* p : all) analytic.push_back(p->grad);

  params.zero_grad();
  double base2 = f(params);
  if (base1 != base2) {
    report.aborted = true;
    report.note = "objective is non-deterministic: f(p) gave " +
                  std::to_string(base1) + " then " + std::to_string(base2);
    return report;
  }

  std::vector<Coord> coords;
  for (Param* p : all)
    for (int64_t i = 0; i < p->value.size(); ++i) coords.push_back({p, i});

  if (static_cast<int>(coords.size()) > max_coords) {
    std::mt19937_64 rng(0xfdc0ffeeULL);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(static_cast<size_t>(max_coords));
  }

  for (const Coord& c : coords) {
    double saved = c.param->value[c.index];
    c.param->value[c.index] = saved + eps_step;
    params.zero_grad();
    double up = f(params);
    c.param->value[c.index] = saved - eps_step;
    params.zero_grad();
    double down = f(params);
    c.param->value[c.index] = saved;

    double fd = (up - down) / (2.0 * eps_step);

    double an = 0.0;
    for (size_t k = 0; k < all.size(); ++k)
      if (all[k] == c.param) an = analytic[k][c.index];

    ++report.checked;
    double rel;
    if (std::abs(an) < kZeroFloor && std::abs(fd) < kZeroFloor) {
      ++report.both_zero;
      rel = 0.0;
    } else {
      rel = std::abs(an - fd) / std::max(std::abs(an), std::abs(fd));
    }
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_param = c.param->name;
      report.worst_index = c.index;
    }
  }

  // Leave the analytic gradients in place for the caller.
  params.zero_grad();
  f(params);
  return report;
}

}  // namespace sgp::num
