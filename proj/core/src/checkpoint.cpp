#include "sgp/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "sgp/errors.hpp"

namespace sgp {

namespace {

constexpr char kMagic[4] = {'S', 'G', 'P', 'V'};

template <typename T>
void put(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("checkpoint: truncated file");
  return v;
}

void put_schedule(std::ostream& out, const ScheduleConfig& s) {
  put<uint32_t>(out, static_cast<uint32_t>(s.epochs_stage1));
  put<uint32_t>(out, static_cast<uint32_t>(s.epochs_stage2));
  put<uint32_t>(out, static_cast<uint32_t>(s.epochs_stage3));
  put<double>(out, s.lr);
  put<double>(out, s.tau);
  put<double>(out, s.alpha);
  put<uint32_t>(out, static_cast<uint32_t>(s.batch_size));
  put<uint64_t>(out, s.seed);
  put<uint32_t>(out, static_cast<uint32_t>(s.dim));
  put<uint32_t>(out, static_cast<uint32_t>(s.z_dim));
  put<uint32_t>(out, static_cast<uint32_t>(s.max_len));
  put<double>(out, s.clip_norm);
  put<double>(out, s.epsilon_bias);
  for (double w : {s.w_cma, s.w_rec, s.w_vcb, s.w_cpb, s.w_vsh}) put<double>(out, w);
}

ScheduleConfig take_schedule(std::istream& in) {
  ScheduleConfig s;
  s.epochs_stage1 = static_cast<int>(take<uint32_t>(in));
  s.epochs_stage2 = static_cast<int>(take<uint32_t>(in));
  s.epochs_stage3 = static_cast<int>(take<uint32_t>(in));
  s.lr = take<double>(in);
  s.tau = take<double>(in);
  s.alpha = take<double>(in);
  s.batch_size = static_cast<int>(take<uint32_t>(in));
  s.seed = take<uint64_t>(in);
  s.dim = static_cast<int>(take<uint32_t>(in));
  s.z_dim = static_cast<int>(take<uint32_t>(in));
  s.max_len = static_cast<int>(take<uint32_t>(in));
  s.clip_norm = take<double>(in);
  s.epsilon_bias = take<double>(in);
  s.w_cma = take<double>(in);
  s.w_rec = take<double>(in);
  s.w_vcb = take<double>(in);
  s.w_cpb = take<double>(in);
  s.w_vsh = take<double>(in);
  return s;
}

CheckpointHeader read_header(std::istream& in, const std::string& path) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("not a checkpoint file (bad magic): " + path);
  CheckpointHeader h;
  h.version = take<uint32_t>(in);
  if (h.version != kCheckpointVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(h.version));
  h.grammar_fingerprint = take<uint64_t>(in);
  h.schedule = take_schedule(in);
  return h;
}

}  // namespace

void save_checkpoint(const std::string& path, const num::ParameterStore& store,
                     const ScheduleConfig& schedule, uint64_t grammar_fingerprint) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kMagic, 4);
  put<uint32_t>(out, kCheckpointVersion);
  put<uint64_t>(out, grammar_fingerprint);
  put_schedule(out, schedule);

  auto params = store.all();  // sorted by name
  put<uint32_t>(out, static_cast<uint32_t>(params.size()));
  for (const auto* p : params) {
    put<uint32_t>(out, static_cast<uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put<uint32_t>(out, static_cast<uint32_t>(p->value.rank()));
    for (int axis = 0; axis < p->value.rank(); ++axis)
      put<uint64_t>(out, static_cast<uint64_t>(p->value.dim(axis)));
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
  if (!out) throw DataError("write failure on checkpoint: " + path);
}

CheckpointHeader read_checkpoint_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  return read_header(in, path);
}

CheckpointHeader load_checkpoint(const std::string& path,
                                 num::ParameterStore& store,
                                 uint64_t expected_fingerprint) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  CheckpointHeader h = read_header(in, path);
  if (expected_fingerprint != 0 && h.grammar_fingerprint != expected_fingerprint)
    throw DataError("checkpoint grammar fingerprint mismatch: refusing to load " +
                    path);

  uint32_t count = take<uint32_t>(in);
  size_t expected = store.all().size();
  if (count != expected)
    throw DataError("checkpoint tensor count " + std::to_string(count) +
                    " does not match model (" + std::to_string(expected) + ")");
  for (uint32_t k = 0; k < count; ++k) {
    uint32_t name_len = take<uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw DataError("checkpoint: truncated name record");
    uint32_t rank = take<uint32_t>(in);
    std::vector<int> shape;
    for (uint32_t axis = 0; axis < rank; ++axis)
      shape.push_back(static_cast<int>(take<uint64_t>(in)));
    if (!store.has(name))
      throw DataError("checkpoint tensor '" + name + "' unknown to this model");
    num::Param& p = store.get(name);
    if (p.value.shape() != shape)
      throw DataError("checkpoint tensor '" + name + "' has shape mismatch");
    in.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(p.value.size() * sizeof(double)));
    if (!in) throw DataError("checkpoint: truncated tensor data for " + name);
    p.value.ensure_finite("checkpoint load of " + name);
  }
  return h;
}

}  // namespace sgp
