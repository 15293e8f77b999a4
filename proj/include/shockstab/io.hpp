#pragma once
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "shockstab/errors.hpp"
#include "shockstab/model.hpp"
#include "shockstab/pde.hpp"
#include "shockstab/reduced.hpp"
#include "shockstab/riccati.hpp"
#include "shockstab/wave.hpp"

namespace shockstab {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Plain-text key=value configuration with strict key validation.
// ---------------------------------------------------------------------------
class Config {
 public:
  Config() = default;

  static Config from_string(const std::string& text, const std::string& origin = "<string>") {
    Config c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const size_t eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": malformed line (expected key=value): '" + trimmed + "'");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string val = trim(trimmed.substr(eq + 1));
      if (key.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      if (c.kv_.count(key))
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" +
                          key + "'");
      c.kv_[key] = val;
    }
    return c;
  }

  static Config from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str(), path);
  }

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get_str(const std::string& key, const std::string& dflt) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? dflt : it->second;
  }

  double get_double(const std::string& key, double dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    char* end = nullptr;
    const double v = std::strtod(it->second.c_str(), &end);
    if (end == it->second.c_str() || *end != '\0')
      throw ConfigError("config key '" + key + "' is not a number: '" + it->second + "'");
    return v;
  }

  long get_int(const std::string& key, long dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    char* end = nullptr;
    const long v = std::strtol(it->second.c_str(), &end, 10);
    if (end == it->second.c_str() || *end != '\0')
      throw ConfigError("config key '" + key + "' is not an integer: '" + it->second + "'");
    return v;
  }

  bool get_bool(const std::string& key, bool dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    const std::string& s = it->second;
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("config key '" + key + "' is not a boolean: '" + s + "'");
  }

  void validate_keys(const std::set<std::string>& known) const {
    for (const auto& [k, v] : kv_)
      if (!known.count(k)) throw ConfigError("unknown config key: '" + k + "'");
  }

  const std::map<std::string, std::string>& raw() const { return kv_; }

 private:
  static std::string trim(const std::string& s) {
    const size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
  }
  std::map<std::string, std::string> kv_;
};

// ---------------------------------------------------------------------------
// CSV with full double round-trip precision.
// ---------------------------------------------------------------------------
namespace detail {
inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace detail

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  for (size_t j = 0; j < header.size(); ++j)
    out << header[j] << (j + 1 < header.size() ? "," : "\n");
  for (const auto& row : rows) {
    for (size_t j = 0; j < row.size(); ++j)
      out << detail::fmt_g17(row[j]) << (j + 1 < row.size() ? "," : "\n");
  }
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

inline std::vector<std::vector<double>> read_csv(const std::string& path,
                                                 std::vector<std::string>* header = nullptr) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (first) {
      first = false;
      bool numeric = true;
      char* end = nullptr;
      std::strtod(cells.empty() ? "" : cells[0].c_str(), &end);
      if (cells.empty() || end == cells[0].c_str()) numeric = false;
      if (!numeric) {
        if (header) *header = cells;
        continue;
      }
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (end == c.c_str()) throw ConfigError("non-numeric cell in '" + path + "': " + c);
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Wave profile interchange: CSV columns (zeta, U, W, P, V) plus a JSON sidecar
// carrying the scalars. Reading reconstructs the flow field from the model.
// ---------------------------------------------------------------------------
inline void write_wave_profile(const WaveProfile& wp, const std::string& csv_path,
                               const std::string& json_path) {
  std::vector<std::vector<double>> rows;
  rows.reserve(wp.zeta.size());
  for (size_t i = 0; i < wp.zeta.size(); ++i)
    rows.push_back({wp.zeta[i], wp.y[i][0], wp.y[i][1], wp.y[i][2], wp.y[i][3]});
  write_csv(csv_path, {"zeta", "U", "W", "P", "V"}, rows);

  ordered_json j;
  j["eps"] = wp.eps;
  j["c"] = wp.c;
  j["L"] = wp.L;
  j["N"] = wp.zeta.size();
  j["max_residual"] = wp.max_residual;
  j["bc_residual"] = wp.bc_residual;
  std::ofstream out(json_path);
  if (!out) throw ConfigError("cannot open '" + json_path + "' for writing");
  out << j.dump(2) << "\n";
}

inline WaveProfile read_wave_profile(const Model& m, const std::string& csv_path,
                                     const std::string& json_path) {
  std::ifstream jin(json_path);
  if (!jin) throw ConfigError("cannot open '" + json_path + "'");
  ordered_json j;
  jin >> j;
  WaveProfile wp;
  wp.eps = j.at("eps").get<double>();
  wp.c = j.at("c").get<double>();
  wp.L = j.at("L").get<double>();
  wp.max_residual = j.value("max_residual", 0.0);
  wp.bc_residual = j.value("bc_residual", 0.0);

  const auto rows = read_csv(csv_path);
  if (rows.size() != j.at("N").get<size_t>())
    throw ConfigError("wave profile '" + csv_path + "' does not match its sidecar N");
  wp.zeta.reserve(rows.size());
  wp.y.reserve(rows.size());
  wp.f.reserve(rows.size());
  for (const auto& r : rows) {
    if (r.size() != 5) throw ConfigError("wave profile rows must be zeta,U,W,P,V");
    wp.zeta.push_back(r[0]);
    Vector4d y;
    y << r[1], r[2], r[3], r[4];
    wp.y.push_back(y);
    wp.f.push_back(wave_rhs(m, wp.eps, wp.c, y));
  }
  return wp;
}

// ---------------------------------------------------------------------------
// JSON reports for the spectral pipeline stages.
// ---------------------------------------------------------------------------
inline ordered_json spectral_report_json(const SpectralReport& rep) {
  ordered_json j;
  j["points"] = ordered_json::array();
  for (const auto& p : rep.points) {
    ordered_json q;
    q["re"] = p.lambda.real();
    q["im"] = p.lambda.imag();
    q["index"] = p.index;
    q["diameter"] = p.diameter;
    j["points"].push_back(q);
  }
  j["scan_cleared"] = ordered_json::array();
  for (const auto& iv : rep.scan_cleared) j["scan_cleared"].push_back({iv[0], iv[1]});
  j["ess_excluded"] = ordered_json::array();
  for (const auto& iv : rep.ess_excluded) j["ess_excluded"].push_back({iv[0], iv[1]});
  j["n_evals"] = rep.n_evals;
  return j;
}

inline ordered_json slow_report_json(const SlowEigReport& rep) {
  ordered_json j;
  j["roots"] = rep.roots;
  j["residuals"] = rep.residuals;
  j["scanned_lo"] = rep.scanned_lo;
  j["scanned_hi"] = rep.scanned_hi;
  j["grid_n"] = rep.grid_n;
  return j;
}

inline ordered_json fast_report_json(const FastScanReport& rep) {
  ordered_json j;
  j["roots"] = ordered_json::array();
  for (const auto& r : rep.roots) {
    ordered_json q;
    q["lambda"] = r.lam;
    q["residual"] = r.residual;
    q["beta2_gap_re"] = r.beta2_gap.real();
    q["beta2_gap_im"] = r.beta2_gap.imag();
    q["classification"] = r.classification;
    j["roots"].push_back(q);
  }
  j["lo"] = rep.lo;
  j["hi"] = rep.hi;
  j["grid_n"] = rep.grid_n;
  return j;
}

inline ordered_json decay_report_json(const DecayReport& rep) {
  ordered_json j;
  j["times"] = rep.times;
  j["shift_fit"] = rep.shift_fit;
  j["residual"] = rep.residual;
  j["fitted_rate"] = rep.fitted_rate;
  j["fitted_speed"] = rep.fitted_speed;
  j["monotone_decay"] = rep.monotone_decay;
  j["instability"] = rep.instability;
  j["dt"] = rep.dt;
  j["n_steps"] = rep.n_steps;
  return j;
}

inline void write_json(const std::string& path, const ordered_json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
}

inline ordered_json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  ordered_json j;
  in >> j;
  return j;
}

// run manifest: command, timestamp, fully resolved configuration, outputs
inline void write_manifest(const std::string& path, const std::string& command,
                           const std::map<std::string, std::string>& resolved,
                           const std::vector<std::string>& outputs) {
  ordered_json j;
  j["command"] = command;
  char ts[64];
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(ts, sizeof(ts), "%Y-%m-%dT%H:%M:%SZ", &tm);
  j["timestamp"] = ts;
  ordered_json cj;
  for (const auto& [k, v] : resolved) cj[k] = v;  // std::map keeps keys sorted
  j["config"] = cj;
  j["outputs"] = outputs;
  write_json(path, j);
}

}  // namespace shockstab
