#pragma once

#include <cstdint>
#include <string>

#include "sgp/config.hpp"
#include "sgp/params.hpp"

namespace sgp {

// Versioned binary checkpoints: magic "SGPV", format version, schedule
// config, grammar fingerprint, then per-tensor records (name length, UTF-8
// name, rank, shape, little-endian 64-bit reals in row-major order). Records
// are sorted by name, so save -> load -> save is byte-identical.

inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const num::ParameterStore& store,
                     const ScheduleConfig& schedule, uint64_t grammar_fingerprint);

struct CheckpointHeader {
  uint32_t version = 0;
  ScheduleConfig schedule;
  uint64_t grammar_fingerprint = 0;
};

/// Reads only the header (for fingerprint checks before building a model).
CheckpointHeader read_checkpoint_header(const std::string& path);

/// Loads tensors into an existing store. Every record must match an existing
/// parameter in name and shape, and every parameter must be present;
/// mismatches raise DataError. `expected_fingerprint`, when nonzero, must
/// match the stored one (refuse to load otherwise).
CheckpointHeader load_checkpoint(const std::string& path,
                                 num::ParameterStore& store,
                                 uint64_t expected_fingerprint = 0);

}  // namespace sgp
