#include "hrmix/config.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

#include "hrmix/dataset.hpp"
#include "hrmix/error.hpp"

namespace hrmix {
namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& v) {
  double x = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) throw std::invalid_argument("not a number");
  return x;
}

std::uint64_t to_uint(const std::string& v) {
  std::uint64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size()) throw std::invalid_argument("not a nonnegative integer");
  return x;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("not a boolean");
}

struct Key {
  const char* name;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

#define HRMIX_REAL(key, field)                                                   \
  Key {                                                                          \
    key, [](PipelineConfig& c, const std::string& v) { c.field = to_double(v); }, \
        [](const PipelineConfig& c) { return format_number(c.field); }           \
  }
#define HRMIX_UINT(key, field)                                                                   \
  Key {                                                                                          \
    key, [](PipelineConfig& c, const std::string& v) { c.field = static_cast<decltype(c.field)>(to_uint(v)); }, \
        [](const PipelineConfig& c) { return std::to_string(c.field); }                          \
  }
#define HRMIX_BOOL(key, field)                                                 \
  Key {                                                                        \
    key, [](PipelineConfig& c, const std::string& v) { c.field = to_bool(v); }, \
        [](const PipelineConfig& c) { return std::string(c.field ? "true" : "false"); } \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table{
      HRMIX_REAL("threshold_quantile", threshold_quantile),
      HRMIX_UINT("neighbors", neighbors),
      HRMIX_REAL("dependence_u", dependence_u),
      HRMIX_BOOL("diagonals", diagonals),
      HRMIX_UINT("ensemble_size", ensemble_size),
      HRMIX_REAL("rate_h", rates.horizontal),
      HRMIX_REAL("rate_v", rates.vertical),
      HRMIX_REAL("rate_d1", rates.diagonal1),
      HRMIX_REAL("rate_d2", rates.diagonal2),
      HRMIX_REAL("dsga_a1", dsga.a1),
      HRMIX_REAL("dsga_rho0", dsga.rho0),
      HRMIX_REAL("dsga_kappa", dsga.kappa),
      HRMIX_UINT("dsga_batch", dsga.batch),
      HRMIX_UINT("dsga_max_iterations", dsga.max_iterations),
      HRMIX_REAL("dsga_tolerance", dsga.tolerance),
      HRMIX_UINT("dsga_patience", dsga.patience),
      HRMIX_UINT("dsga_eval_every", dsga.eval_every),
      HRMIX_REAL("chi_quantile", chi_quantile),
      Key{"chi_max_hops",
          [](PipelineConfig& c, const std::string& v) { c.chi_max_hops = static_cast<int>(to_uint(v)); },
          [](const PipelineConfig& c) { return std::to_string(c.chi_max_hops); }},
      HRMIX_UINT("clusters", clusters),
      HRMIX_UINT("window_width", window_width),
      HRMIX_UINT("window_step", window_step),
      HRMIX_UINT("max_windows", max_windows),
      HRMIX_BOOL("drop_partial_seasons", drop_partial_seasons),
      HRMIX_BOOL("thin", thin),
      HRMIX_REAL("trend_quantile", trend_quantile),
      HRMIX_UINT("risk_samples", risk_samples),
      HRMIX_UINT("chi_curve_points", chi_curve_points),
      HRMIX_UINT("seed", seed),
  };
  return table;
}

#undef HRMIX_REAL
#undef HRMIX_UINT
#undef HRMIX_BOOL

}  // namespace

void PipelineConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::Config, msg); };
  if (!(threshold_quantile > 0.0 && threshold_quantile < 1.0)) fail("threshold_quantile must lie in (0, 1)");
  if (!(dependence_u > 1.0)) fail("dependence_u must exceed 1");
  if (ensemble_size == 0) fail("ensemble_size must be at least 1");
  for (double r : {rates.horizontal, rates.vertical, rates.diagonal1, rates.diagonal2})
    if (!(r > 0.0)) fail("orientation rates must be positive");
  if (!(chi_quantile > 0.0 && chi_quantile < 1.0)) fail("chi_quantile must lie in (0, 1)");
  if (chi_max_hops < 1) fail("chi_max_hops must be at least 1");
  if (clusters == 0) fail("clusters must be at least 1");
  if (window_width == 0 || window_step == 0) fail("window_width and window_step must be at least 1");
  if (!(trend_quantile > 0.0 && trend_quantile < 1.0)) fail("trend_quantile must lie in (0, 1)");
  if (risk_samples == 0) fail("risk_samples must be at least 1");
  if (chi_curve_points < 2) fail("chi_curve_points must be at least 2");
  try {
    dsga.validate();
  } catch (const Error& e) {
    fail(e.what());
  }
}

PipelineConfig parse_config(std::istream& in, PipelineConfig base) {
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::Config, fmt::format("config line {}: expected 'key = value'", line_no));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& table = keys();
    auto it = std::find_if(table.begin(), table.end(), [&](const Key& k) { return key == k.name; });
    if (it == table.end())
      throw Error(ErrorKind::Config, fmt::format("config line {}: unknown key '{}'", line_no, key));
    if (!seen.insert(key).second)
      throw Error(ErrorKind::Config, fmt::format("config line {}: key '{}' repeated", line_no, key));
    try {
      it->set(base, value);
    } catch (const std::invalid_argument& e) {
      throw Error(ErrorKind::Config,
                  fmt::format("config line {}: bad value '{}' for {}: {}", line_no, value, key, e.what()));
    }
  }
  base.validate();
  return base;
}

PipelineConfig load_config(const std::string& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot open config file " + path);
  return parse_config(in, base);
}

std::string to_text(const PipelineConfig& config) {
  std::string out;
  for (const auto& k : keys()) out += fmt::format("{} = {}\n", k.name, k.get(config));
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

}  // namespace hrmix
