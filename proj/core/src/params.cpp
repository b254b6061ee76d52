#include "sgp/params.hpp"

#include <cmath>
#include <random>

#include "sgp/errors.hpp"

namespace sgp::num {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

static uint64_t name_seed(uint64_t seed, const std::string& name) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) h = (h ^ c) * 0x100000001b3ULL;
  return splitmix64(seed ^ h);
}

Param& ParameterStore::create(const std::string& name, std::vector<int> shape) {
  if (params_.count(name)) throw ContractError("duplicate parameter: " + name);
  auto p = std::make_unique<Param>();
  p->name = name;
  p->value = Tensor(shape);
  p->value.requires_grad = true;
  p->grad = Tensor(std::move(shape));
  auto& ref = *p;
  params_.emplace(name, std::move(p));
  return ref;
}

Param& ParameterStore::create_uniform(const std::string& name,
                                      std::vector<int> shape, int fan,
                                      uint64_t seed) {
  Param& p = create(name, std::move(shape));
  double bound = 1.0 / std::sqrt(static_cast<double>(fan > 0 ? fan : 1));
  std::mt19937_64 rng(name_seed(seed, name));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (int64_t i = 0; i < p.value.size(); ++i) p.value[i] = dist(rng);
  return p;
}

bool ParameterStore::has(const std::string& name) const {
  return params_.count(name) != 0;
}

Param& ParameterStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter: " + name);
  return *it->second;
}

const Param& ParameterStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter: " + name);
  return *it->second;
}

std::vector<Param*> ParameterStore::all() {
  std::vector<Param*> out;
  out.reserve(params_.size());
  for (auto& [_, p] : params_) out.push_back(p.get());
  return out;
}

std::vector<const Param*> ParameterStore::all() const {
  std::vector<const Param*> out;
  out.reserve(params_.size());
  for (const auto& [_, p] : params_) out.push_back(p.get());
  return out;
}

std::vector<Param*> ParameterStore::with_prefix(const std::string& prefix) {
  std::vector<Param*> out;
  for (auto& [name, p] : params_)
    if (name.rfind(prefix, 0) == 0) out.push_back(p.get());
  return out;
}

int64_t ParameterStore::total_size() const {
  int64_t n = 0;
  for (const auto& [_, p] : params_) n += p->value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [_, p] : params_) p->grad.fill(0.0);
}

double ParameterStore::grad_norm() const {
  double s = 0.0;
  for (const auto& [_, p] : params_)
    for (int64_t i = 0; i < p->grad.size(); ++i) s += p->grad[i] * p->grad[i];
  return std::sqrt(s);
}

double ParameterStore::grad_norm(const std::string& prefix) const {
  double s = 0.0;
  for (const auto& [name, p] : params_) {
    if (name.rfind(prefix, 0) != 0) continue;
    for (int64_t i = 0; i < p->grad.size(); ++i) s += p->grad[i] * p->grad[i];
  }
  return std::sqrt(s);
}

void ParameterStore::clip_grad(double max_norm) {
  double n = grad_norm();
  if (n <= max_norm || n == 0.0) return;
  double k = max_norm / n;
  for (auto& [_, p] : params_)
    for (int64_t i = 0; i < p->grad.size(); ++i) p->grad[i] *= k;
}

void ParameterStore::sgd_step(double lr) {
  for (auto& [_, p] : params_) {
    for (int64_t i = 0; i < p->value.size(); ++i)
      p->value[i] -= lr * p->grad[i];
    p->value.ensure_finite("sgd_step(" + p->name + ")");
  }
}

void ParameterStore::copy_values(const std::string& src_prefix,
                                 const std::string& dst_prefix) {
  for (auto& [name, p] : params_) {
    if (name.rfind(src_prefix, 0) != 0) continue;
    std::string dst_name = dst_prefix + name.substr(src_prefix.size());
    Param& dst = get(dst_name);
    if (!dst.value.same_shape(p->value))
      throw ContractError("copy_values shape mismatch: " + name + " -> " + dst_name);
    for (int64_t i = 0; i < p->value.size(); ++i) dst.value[i] = p->value[i];
  }
}

}  // namespace sgp::num
