#include "laacoex/config.hpp"

#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace laacoex {

int SystemConfig::window(int stage) const {
  if (stage < 0 || stage > m + 1) {
    throw std::invalid_argument("backoff stage out of range: " + std::to_string(stage));
  }
  const int exponent = stage < m ? stage : m;
  return (1 << exponent) * cw_min;
}

int SystemConfig::cw_max() const { return (1 << m) * cw_min; }

void SystemConfig::validate() const {
  if (cw_min < 1) throw std::invalid_argument("cw_min must be >= 1");
  if (m < 0) throw std::invalid_argument("m must be >= 0");
  if (m > 20) throw std::invalid_argument("m too large (window ladder overflows)");
  if (t_slot_us <= 0) throw std::invalid_argument("t_slot_us must be positive");
  if (n_sf < 1) throw std::invalid_argument("n_sf must be >= 1");
  if (sf_slot < 1) throw std::invalid_argument("sf_slot must be >= 1");
  if (mcot_slots < sf_slot) throw std::invalid_argument("mcot_slots must be >= sf_slot");
  if (rsf < 1 || rsf > n_sf) throw std::invalid_argument("rsf must lie in [1, n_sf]");
  if (t_wifi < 1.0) throw std::invalid_argument("t_wifi must be >= 1 slot");
  if (z2 < 0.0 || z2 > 1.0) throw std::invalid_argument("z2 must lie in [0,1]");
}

SystemConfig paper_preset(int t_mcot_ms, RsfChoice rsf_choice, double t_wifi) {
  if (t_mcot_ms != 8 && t_mcot_ms != 10) {
    throw std::invalid_argument("t_mcot_ms must be 8 or 10");
  }
  SystemConfig cfg;
  cfg.cw_min = 16;
  cfg.m = 6;
  cfg.t_slot_us = 9.0;
  cfg.n_sf = t_mcot_ms;
  cfg.sf_slot = 111;
  cfg.mcot_slots = cfg.n_sf * cfg.sf_slot;
  cfg.t_wifi = t_wifi;
  if (rsf_choice == RsfChoice::kFirst) {
    cfg.rsf = 1;
  } else {
    // HARQ feedback takes 4 subframes, so the last eligible subframe is
    // n_sf - 4: subframe 4 for an 8 ms MCOT, subframe 6 for 10 ms.
    cfg.rsf = cfg.n_sf - 4;
  }
  cfg.validate();
  return cfg;
}

std::string SystemConfig::to_kv_string() const {
  std::ostringstream os;
  os << "cw_min = " << cw_min << '\n'
     << "m = " << m << '\n'
     << "t_slot_us = " << t_slot_us << '\n'
     << "n_sf = " << n_sf << '\n'
     << "sf_slot = " << sf_slot << '\n'
     << "mcot_slots = " << mcot_slots << '\n'
     << "rsf = " << rsf << '\n'
     << "t_wifi = " << t_wifi << '\n'
     << "z2 = " << z2 << '\n'
     << "wifi_saturate_at_max = " << (wifi_saturate_at_max ? 1 : 0) << '\n';
  return os.str();
}

std::uint64_t SystemConfig::hash() const {
  const std::string s = to_kv_string();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

std::map<std::string, std::string> parse_kv_text(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.erase(hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
    }
    out[key] = value;
  }
  return out;
}

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_kv_text(ss.str());
}

bool apply_config_key(SystemConfig& cfg, const std::string& key, const std::string& value) {
  const auto as_int = [&] { return std::stoi(value); };
  const auto as_double = [&] { return std::stod(value); };
  const auto as_bool = [&] {
    if (value == "1" || value == "true" || value == "yes") return true;
    if (value == "0" || value == "false" || value == "no") return false;
    throw std::invalid_argument("bad boolean for " + key + ": " + value);
  };
  if (key == "cw_min") cfg.cw_min = as_int();
  else if (key == "m") cfg.m = as_int();
  else if (key == "t_slot_us") cfg.t_slot_us = as_double();
  else if (key == "n_sf") cfg.n_sf = as_int();
  else if (key == "sf_slot") cfg.sf_slot = as_int();
  else if (key == "mcot_slots") cfg.mcot_slots = as_int();
  else if (key == "rsf") cfg.rsf = as_int();
  else if (key == "t_wifi") cfg.t_wifi = as_double();
  else if (key == "z2") cfg.z2 = as_double();
  else if (key == "wifi_saturate_at_max") cfg.wifi_saturate_at_max = as_bool();
  else return false;
  return true;
}

std::ostream& operator<<(std::ostream& os, const SystemConfig& cfg) {
  return os << cfg.to_kv_string();
}

}  // namespace laacoex
