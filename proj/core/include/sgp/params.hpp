#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sgp/tensor.hpp"

namespace sgp::num {

/// A named learnable tensor with its accumulated gradient.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
};

uint64_t splitmix64(uint64_t x);

/// Registry of named parameters. Iteration order is always the sorted name
/// order, which keeps optimizer sweeps and checkpoints deterministic.
class ParameterStore {
 public:
  Param& create(const std::string& name, std::vector<int> shape);
  /// create() + uniform(-1/sqrt(fan), 1/sqrt(fan)) init; the stream is seeded
  /// from (seed, name) so every parameter is reproducible in isolation.
  Param& create_uniform(const std::string& name, std::vector<int> shape,
                        int fan, uint64_t seed);

  bool has(const std::string& name) const;
  Param& get(const std::string& name);
  const Param& get(const std::string& name) const;

  std::vector<Param*> all();                       // sorted by name
  std::vector<const Param*> all() const;
  std::vector<Param*> with_prefix(const std::string& prefix);

  int64_t total_size() const;
  void zero_grad();
  double grad_norm() const;
  double grad_norm(const std::string& prefix) const;
  /// Global-norm gradient clipping; no-op when norm <= max_norm.
  void clip_grad(double max_norm);
  void sgd_step(double lr);

  /// Copies values (not grads) from every "src_prefix..." parameter into the
  /// same-suffix "dst_prefix..." parameter. Shapes must match.
  void copy_values(const std::string& src_prefix, const std::string& dst_prefix);

 private:
  std::map<std::string, std::unique_ptr<Param>> params_;
};

}  // namespace sgp::num
