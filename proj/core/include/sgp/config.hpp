#pragma once

#include <cstdint>
#include <string>

namespace sgp {

/// Training schedule and model hyperparameters. Defaults are the desk-scale
/// configuration; everything is overridable through a `key = value` file.
struct ScheduleConfig {
  int epochs_stage1 = 30;
  int epochs_stage2 = 30;
  int epochs_stage3 = 20;
  double lr = 0.05;
  double tau = 0.1;    // contrastive temperature
  double alpha = 0.5;  // alignment/fusion threshold
  int batch_size = 8;
  uint64_t seed = 7;
  int dim = 64;
  int z_dim = 64;
  int max_len = 16;
  double clip_norm = 5.0;
  double epsilon_bias = 2.0;
  double w_cma = 1.0, w_rec = 1.0, w_vcb = 1.0, w_cpb = 1.0, w_vsh = 1.0;

  void validate_fields() const;  // tau > 0, epochs >= 1, ...
};

/// Applies one `key = value` line; DataError on unknown keys or bad values.
void apply_config_line(ScheduleConfig& cfg, const std::string& line, int lineno);

/// Parses a UTF-8 config file of `key = value` lines ('#' starts a comment).
ScheduleConfig parse_config_file(const std::string& path);

}  // namespace sgp
