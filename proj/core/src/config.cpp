#include "sgp/config.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "sgp/errors.hpp"

namespace sgp {

void ScheduleConfig::validate_fields() const {
  if (epochs_stage1 < 1 || epochs_stage2 < 1 || epochs_stage3 < 1)
    throw DataError("config: epochs per stage must be >= 1");
  if (!(tau > 0.0)) throw DataError("config: tau must be > 0");
  if (!(lr > 0.0)) throw DataError("config: lr must be > 0");
  if (batch_size < 1) throw DataError("config: batch_size must be >= 1");
  if (dim < 1 || z_dim < 1) throw DataError("config: dims must be >= 1");
  if (max_len < 1) throw DataError("config: max_len must be >= 1");
}

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

void apply_config_line(ScheduleConfig& cfg, const std::string& raw, int lineno) {
  std::string line = raw;
  size_t hash = line.find('#');
  if (hash != std::string::npos) line = line.substr(0, hash);
  line = trim(line);
  if (line.empty()) return;
  size_t eq = line.find('=');
  if (eq == std::string::npos)
    throw DataError("config line " + std::to_string(lineno) +
                    ": expected 'key = value', got '" + line + "'");
  std::string key = trim(line.substr(0, eq));
  std::string value = trim(line.substr(eq + 1));
  if (key.empty() || value.empty())
    throw DataError("config line " + std::to_string(lineno) + ": empty key or value");

  auto as_int = [&] {
    try {
      size_t pos = 0;
      int v = std::stoi(value, &pos);
      if (pos != value.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw DataError("config line " + std::to_string(lineno) + ": bad integer '"
                      + value + "' for " + key);
    }
  };
  auto as_u64 = [&] {
    try {
      size_t pos = 0;
      uint64_t v = std::stoull(value, &pos);
      if (pos != value.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw DataError("config line " + std::to_string(lineno) + ": bad integer '"
                      + value + "' for " + key);
    }
  };
  auto as_double = [&] {
    try {
      size_t pos = 0;
      double v = std::stod(value, &pos);
      if (pos != value.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw DataError("config line " + std::to_string(lineno) + ": bad number '"
                      + value + "' for " + key);
    }
  };

  if (key == "epochs_stage1") cfg.epochs_stage1 = as_int();
  else if (key == "epochs_stage2") cfg.epochs_stage2 = as_int();
  else if (key == "epochs_stage3") cfg.epochs_stage3 = as_int();
  else if (key == "lr") cfg.lr = as_double();
  else if (key == "tau") cfg.tau = as_double();
  else if (key == "alpha") cfg.alpha = as_double();
  else if (key == "batch_size") cfg.batch_size = as_int();
  else if (key == "seed") cfg.seed = as_u64();
  else if (key == "dim") cfg.dim = as_int();
  else if (key == "z_dim") cfg.z_dim = as_int();
  else if (key == "max_len") cfg.max_len = as_int();
  else if (key == "clip_norm") cfg.clip_norm = as_double();
  else if (key == "epsilon_bias") cfg.epsilon_bias = as_double();
  else if (key == "w_cma") cfg.w_cma = as_double();
  else if (key == "w_rec") cfg.w_rec = as_double();
  else if (key == "w_vcb") cfg.w_vcb = as_double();
  else if (key == "w_cpb") cfg.w_cpb = as_double();
  else if (key == "w_vsh") cfg.w_vsh = as_double();
  else
    throw DataError("config line " + std::to_string(lineno) + ": unknown key '" +
                    key + "'");
}

ScheduleConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  ScheduleConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) apply_config_line(cfg, line, ++lineno);
  cfg.validate_fields();
  return cfg;
}

}  // namespace sgp
