#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

#include "anderson/error.hpp"
#include "anderson/experiments.hpp"

namespace anderson {
namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void config_error(const std::string& msg) { fail(ErrorCode::config, msg); }

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size() || !std::isfinite(x)) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    config_error(key + ": expected a number, got '" + v + "'");
  }
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  std::int64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    config_error(key + ": expected an integer, got '" + v + "'");
  return x;
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  auto x = parse_int(key, v);
  if (x < 0) config_error(key + ": must be non-negative");
  return static_cast<std::size_t>(x);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  config_error(key + ": expected true or false, got '" + v + "'");
}

// Parses "2^-k" or a decimal.
double parse_dyadic(const std::string& v) {
  if (v.rfind("2^", 0) == 0) {
    auto e = parse_int("eps", v.substr(2));
    return std::ldexp(1.0, static_cast<int>(e));
  }
  return parse_double("eps", v);
}

bool is_power_of_two(std::int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct Defaults {
  int grid;
  std::vector<int> ladder;
  std::string eps;
  MollifierKind mollifier;
  ProductMode dealias;
  std::string seeds;
  int block_lo, block_hi;
  std::size_t eigen_count;
};

Defaults defaults_for(const std::string& exp, int d) {
  const bool two = d == 2;
  const auto g = MollifierKind::gaussian;
  const auto pw = ProductMode::pointwise;
  if (exp == "divergence")
    return two ? Defaults{512, {}, "2^-3..2^-7", g, pw, "0", 1, 1, 2}
               : Defaults{64, {}, "2^-2..2^-5", g, pw, "0", 1, 1, 2};
  if (exp == "regularity")
    return two ? Defaults{512, {}, "2^-7", MollifierKind::sharp_cutoff, ProductMode::padded, "0..19", 3, 7, 2}
               : Defaults{64, {}, "2^-5", MollifierKind::sharp_cutoff, ProductMode::padded, "0..19", 2, 4, 2};
  if (exp == "renorm-necessity")
    return two ? Defaults{256, {}, "2^-2..2^-5", g, pw, "0..19", 1, 1, 1}
               : Defaults{64, {}, "2^-1..2^-3", g, pw, "0..9", 1, 1, 1};
  if (exp == "transform-equivalence")
    return two ? Defaults{256, {128, 256, 512}, "2^-4", g, pw, "0..4", 1, 1, 1}
               : Defaults{64, {32, 64}, "2^-3", g, pw, "0..2", 1, 1, 1};
  if (exp == "spectral-gap" || exp == "positivity")
    return two ? Defaults{256, {}, "2^-4", g, pw, "0..19", 1, 1, 2}
               : Defaults{64, {}, "2^-3", g, pw, "0..9", 1, 1, 2};
  if (exp == "form-convergence")
    return two ? Defaults{512, {}, "2^-3..2^-5", g, pw, "0..4", 1, 1, 2}
               : Defaults{64, {}, "2^-1..2^-2", g, pw, "0..2", 1, 1, 2};
  config_error("experiment: unknown experiment '" + exp + "'");
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto dbl = [](double ExperimentConfig::*m) {
      return [m](ExperimentConfig& c, const std::string& k, const std::string& v) { c.*m = parse_double(k, v); };
    };
    auto cnt = [](std::size_t ExperimentConfig::*m) {
      return [m](ExperimentConfig& c, const std::string& k, const std::string& v) { c.*m = parse_count(k, v); };
    };
    auto integer = [](int ExperimentConfig::*m) {
      return [m](ExperimentConfig& c, const std::string& k, const std::string& v) {
        c.*m = static_cast<int>(parse_int(k, v));
      };
    };
    t["experiment"] = [](ExperimentConfig&, const std::string&, const std::string&) {};
    t["dimension"] = [](ExperimentConfig&, const std::string&, const std::string&) {};
    t["grid"] = integer(&ExperimentConfig::grid);
    t["grid_ladder"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      c.grid_ladder.clear();
      for (const auto& item : split(v, ',')) c.grid_ladder.push_back(static_cast<int>(parse_int(k, item)));
    };
    t["eps"] = [](ExperimentConfig& c, const std::string&, const std::string& v) { c.eps = parse_eps_list(v); };
    t["mollifier"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      if (v == "gaussian") c.mollifier = MollifierKind::gaussian;
      else if (v == "sharp") c.mollifier = MollifierKind::sharp_cutoff;
      else config_error(k + ": expected gaussian or sharp, got '" + v + "'");
    };
    t["seeds"] = [](ExperimentConfig& c, const std::string&, const std::string& v) { c.seeds = parse_seed_list(v); };
    t["kappa"] = dbl(&ExperimentConfig::kappa);
    t["tol"] = dbl(&ExperimentConfig::tol);
    t["max_iter"] = cnt(&ExperimentConfig::max_iter);
    t["eigen_count"] = cnt(&ExperimentConfig::eigen_count);
    t["dealias"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      if (v == "pointwise") c.dealias = ProductMode::pointwise;
      else if (v == "padded") c.dealias = ProductMode::padded;
      else config_error(k + ": expected pointwise or padded, got '" + v + "'");
    };
    t["output"] = [](ExperimentConfig& c, const std::string&, const std::string& v) { c.output = v; };
    t["jobs"] = cnt(&ExperimentConfig::jobs);
    t["cy_samples"] = cnt(&ExperimentConfig::cy_samples);
    t["block_lo"] = integer(&ExperimentConfig::block_lo);
    t["block_hi"] = integer(&ExperimentConfig::block_hi);
    t["zero_noise"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      c.zero_noise = parse_bool(k, v);
    };
    t["heat_time"] = dbl(&ExperimentConfig::heat_time);
    t["heat_steps"] = cnt(&ExperimentConfig::heat_steps);
    t["bump_width"] = dbl(&ExperimentConfig::bump_width);
    t["probe_pairs"] = cnt(&ExperimentConfig::probe_pairs);
    t["probe_seed"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      c.probe_seed = static_cast<std::uint64_t>(parse_count(k, v));
    };
    t["target_prefactor"] = dbl(&ExperimentConfig::target_prefactor);
    t["prefactor_tol"] = dbl(&ExperimentConfig::prefactor_tol);
    t["r2_min"] = dbl(&ExperimentConfig::r2_min);
    t["discrimination_min"] = dbl(&ExperimentConfig::discrimination_min);
    t["xi_tol"] = dbl(&ExperimentConfig::xi_tol);
    t["x_shift_tol"] = dbl(&ExperimentConfig::x_shift_tol);
    t["wick_min"] = dbl(&ExperimentConfig::wick_min);
    t["wick_max"] = dbl(&ExperimentConfig::wick_max);
    t["shift_tol"] = dbl(&ExperimentConfig::shift_tol);
    t["equivalence_tol"] = dbl(&ExperimentConfig::equivalence_tol);
    t["roundoff_floor"] = dbl(&ExperimentConfig::roundoff_floor);
    t["gap_factor"] = dbl(&ExperimentConfig::gap_factor);
    t["spectrum_tol"] = dbl(&ExperimentConfig::spectrum_tol);
    t["stability_band"] = dbl(&ExperimentConfig::stability_band);
    return t;
  }();
  return table;
}

// Smallest eps the lattice resolves: gaussian tails need eps N/2 >= 4,
// the sharp cutoff only needs its support inside the lattice.
double min_resolved_eps(MollifierKind kind, int grid) {
  const double half = grid / 2.0;
  return kind == MollifierKind::gaussian ? 4.0 / half : 1.0 / half;
}

void validate(const ExperimentConfig& c) {
  auto check_grid = [&](int n, const std::string& what) {
    if (!is_power_of_two(n) || n < 8) config_error(what + ": grid must be a power of two >= 8, got " + std::to_string(n));
    if (c.dimension == 3 && n > 128) config_error(what + ": 3D grids are limited to 128 points per axis");
    if (c.dimension == 2 && n > 4096) config_error(what + ": 2D grids are limited to 4096 points per axis");
  };
  check_grid(c.grid, "grid");
  for (int n : c.grid_ladder) check_grid(n, "grid_ladder");
  if (c.eps.empty()) config_error("eps: at least one value is required");
  for (double e : c.eps)
    if (!(e > 0.0)) config_error("eps: values must be positive");
  if (c.seeds.empty()) config_error("seeds: at least one seed is required");
  if (!(c.kappa > 0.0 && c.kappa < 0.5)) config_error("kappa: must lie in (0, 1/2)");
  if (!(c.tol > 0.0)) config_error("tol: must be positive");
  if (c.max_iter == 0) config_error("max_iter: must be positive");
  if (c.eigen_count == 0) config_error("eigen_count: must be positive");
  if (c.jobs == 0) config_error("jobs: must be positive");
  if (c.cy_samples < 2) config_error("cy_samples: at least 2 samples are required");
  if (c.heat_steps == 0 || !(c.heat_time > 0.0)) config_error("heat: time and steps must be positive");
  if (!(c.bump_width > 0.0)) config_error("bump_width: must be positive");

  // Resolution: the regularization scale must be resolved by the base grid.
  // Exact lattice sums (divergence) and noiseless runs are exempt.
  if (c.experiment != "divergence" && !c.zero_noise) {
    double finest = *std::min_element(c.eps.begin(), c.eps.end());
    if (c.experiment == "form-convergence") finest /= 2.0;
    const double floor = min_resolved_eps(c.mollifier, c.grid);
    if (finest < floor * (1.0 - 1e-12))
      config_error("eps: resolution invariant violated, eps = " + format_double(finest) + " is below " +
                   format_double(floor) + " for a " + to_string(c.mollifier) + " mollifier on N = " +
                   std::to_string(c.grid));
  }

  if (c.experiment == "divergence" && c.eps.size() < 4)
    config_error("eps: the divergence fit needs at least 4 values");
  if (c.experiment == "renorm-necessity" && c.eps.size() < 3)
    config_error("eps: renorm-necessity needs at least 3 values");
  if (c.experiment == "form-convergence" && c.probe_pairs == 0)
    config_error("probe_pairs: must be positive");
  if (c.experiment == "transform-equivalence" &&
      std::find(c.grid_ladder.begin(), c.grid_ladder.end(), c.grid) == c.grid_ladder.end())
    config_error("grid_ladder: must contain the base grid");
  if (c.experiment == "regularity") {
    const int max_block = Lattice(c.dimension, c.grid).max_block();
    if (c.block_lo < 0 || c.block_hi - c.block_lo < 2 || c.block_hi > max_block - 1)
      config_error("block_lo/block_hi: need at least 3 blocks with block_hi <= " + std::to_string(max_block - 1));
  }
  if ((c.experiment == "spectral-gap" || c.experiment == "positivity") && c.eigen_count < 2)
    config_error("eigen_count: the gap needs at least 2 eigenvalues");
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [k, v] : setters()) out.push_back(k);
  return out;
}

ConfigValues parse_config_text(const std::string& text) {
  ConfigValues out;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) config_error("line " + std::to_string(lineno) + ": expected key = value");
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key.empty()) config_error("line " + std::to_string(lineno) + ": empty key");
    out[key] = value;
  }
  return out;
}

ConfigValues load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  auto range = text.find("..");
  if (range != std::string::npos) {
    auto a = parse_count("seeds", trim(text.substr(0, range)));
    auto b = parse_count("seeds", trim(text.substr(range + 2)));
    if (b < a) config_error("seeds: empty range " + text);
    for (auto s = a; s <= b; ++s) out.push_back(s);
    return out;
  }
  for (const auto& item : split(text, ',')) out.push_back(parse_count("seeds", item));
  return out;
}

std::vector<double> parse_eps_list(const std::string& text) {
  std::vector<double> out;
  auto range = text.find("..");
  if (range != std::string::npos) {
    auto a = trim(text.substr(0, range));
    auto b = trim(text.substr(range + 2));
    if (a.rfind("2^", 0) != 0 || b.rfind("2^", 0) != 0)
      config_error("eps: ranges must be dyadic, e.g. 2^-3..2^-7");
    auto ea = parse_int("eps", a.substr(2));
    auto eb = parse_int("eps", b.substr(2));
    if (eb > ea) config_error("eps: dyadic ranges run from coarse to fine");
    for (auto e = ea; e >= eb; --e) out.push_back(std::ldexp(1.0, static_cast<int>(e)));
    return out;
  }
  for (const auto& item : split(text, ',')) out.push_back(parse_dyadic(item));
  return out;
}

ExperimentConfig resolve_config(const ConfigValues& values) {
  auto get = [&](const std::string& k) -> std::optional<std::string> {
    auto it = values.find(k);
    if (it == values.end()) return std::nullopt;
    return it->second;
  };
  ExperimentConfig c;
  auto exp = get("experiment");
  if (!exp) config_error("experiment: missing");
  c.experiment = *exp;
  if (auto d = get("dimension")) {
    c.dimension = static_cast<int>(parse_int("dimension", *d));
    if (c.dimension != 2 && c.dimension != 3) config_error("dimension: must be 2 or 3");
  }
  const auto def = defaults_for(c.experiment, c.dimension);
  const bool two = c.dimension == 2;
  c.grid = def.grid;
  c.grid_ladder = def.ladder;
  c.eps = parse_eps_list(def.eps);
  c.mollifier = def.mollifier;
  c.dealias = def.dealias;
  c.seeds = parse_seed_list(def.seeds);
  c.block_lo = def.block_lo;
  c.block_hi = def.block_hi;
  c.eigen_count = def.eigen_count;
  c.tol = two ? 1e-8 : 1e-6;
  if (const char* env = std::getenv("ANDERSON_OUT_DIR"); env && *env) c.output = env;

  const double four_pi_sq = 4.0 * std::numbers::pi * std::numbers::pi;
  c.target_prefactor = 1.0 / four_pi_sq;
  c.prefactor_tol = two ? 0.20 : 0.25;
  c.r2_min = two ? 0.99 : 0.0;
  c.wick_min = two ? -0.2 : -1.3;
  c.wick_max = two ? 1e300 : -0.8;
  c.equivalence_tol = two ? 0.01 : 0.03;

  for (const auto& [k, v] : values) {
    auto it = setters().find(k);
    if (it == setters().end()) config_error("unknown key '" + k + "'");
    it->second(c, k, v);
  }
  if (c.zero_noise && !values.count("eigen_count")) c.eigen_count = two ? 6 : 8;
  if (c.experiment == "transform-equivalence" && values.count("grid") && !values.count("grid_ladder"))
    c.grid_ladder = two ? std::vector<int>{c.grid / 2, c.grid, 2 * c.grid} : std::vector<int>{c.grid / 2, c.grid};
  validate(c);
  return c;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["experiment"] = c.experiment;
  j["dimension"] = c.dimension;
  j["grid"] = c.grid;
  j["grid_ladder"] = c.grid_ladder;
  j["eps"] = c.eps;
  j["mollifier"] = to_string(c.mollifier);
  j["seeds"] = c.seeds;
  j["kappa"] = c.kappa;
  j["tol"] = c.tol;
  j["max_iter"] = c.max_iter;
  j["eigen_count"] = c.eigen_count;
  j["dealias"] = to_string(c.dealias);
  j["cy_samples"] = c.cy_samples;
  j["block_lo"] = c.block_lo;
  j["block_hi"] = c.block_hi;
  j["zero_noise"] = c.zero_noise;
  j["heat_time"] = c.heat_time;
  j["heat_steps"] = c.heat_steps;
  j["bump_width"] = c.bump_width;
  j["probe_pairs"] = c.probe_pairs;
  j["probe_seed"] = c.probe_seed;
  j["target_prefactor"] = c.target_prefactor;
  j["prefactor_tol"] = c.prefactor_tol;
  j["r2_min"] = c.r2_min;
  j["discrimination_min"] = c.discrimination_min;
  j["xi_tol"] = c.xi_tol;
  j["x_shift_tol"] = c.x_shift_tol;
  j["wick_min"] = c.wick_min;
  j["wick_max"] = c.wick_max;
  j["shift_tol"] = c.shift_tol;
  j["equivalence_tol"] = c.equivalence_tol;
  j["roundoff_floor"] = c.roundoff_floor;
  j["gap_factor"] = c.gap_factor;
  j["spectrum_tol"] = c.spectrum_tol;
  j["stability_band"] = c.stability_band;
  return j;
}

std::string config_hash(const ExperimentConfig& config) {
  const auto text = config_to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace anderson
