#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <set>
#include <thread>

#include "anderson/anderson_form.hpp"
#include "anderson/besov.hpp"
#include "anderson/eigensolve.hpp"
#include "anderson/error.hpp"
#include "anderson/experiments.hpp"
#include "anderson/noise_fields.hpp"
#include "anderson/rng.hpp"
#include "anderson/wick.hpp"

namespace anderson {
namespace {

using nlohmann::json;

struct Cell {
  std::optional<std::uint64_t> seed;
  std::optional<double> eps;

  json key() const {
    json j;
    j["seed"] = seed ? json(*seed) : json(nullptr);
    j["eps"] = eps ? json(*eps) : json(nullptr);
    return j;
  }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

Mollifier mollifier_of(const ExperimentConfig& c) { return Mollifier{c.mollifier}; }

// Renormalization constants shared by all cells, keyed by (grid, eps).
class ConstantTable {
 public:
  void ensure(const ExperimentConfig& c, int grid, double eps) {
    auto key = std::make_pair(grid, eps);
    if (table_.count(key)) return;
    CyOptions cy;
    cy.samples = c.cy_samples;
    cy.product = c.dealias;
    table_[key] = renorm_constants(Lattice(c.dimension, grid), eps, mollifier_of(c), cy);
  }
  const RenormConstants& at(int grid, double eps) const { return table_.at({grid, eps}); }

 private:
  std::map<std::pair<int, double>, RenormConstants> table_;
};

EnhancedNoise enhance(const ExperimentConfig& c, const ConstantTable& ct, const NoiseSample& noise, double eps) {
  AssembleOptions ao;
  ao.product = c.dealias;
  ao.constants = ct.at(noise.lattice.points(), eps);
  ao.cy.samples = c.cy_samples;
  ao.cy.product = c.dealias;
  return assemble_enhanced_noise(noise, eps, mollifier_of(c), ao);
}

EigenOptions eigen_options(const ExperimentConfig& c, std::uint64_t seed, std::size_t count) {
  EigenOptions o;
  o.count = count;
  o.tol = c.tol;
  o.max_iter = c.max_iter;
  o.seed = seed;
  return o;
}

Spectrum solve_transformed(const FormOperator& op, const EigenOptions& o) {
  return lowest_eigenpairs(form_contract(op), mass_weights(op), o);
}

Spectrum solve_direct(const EnhancedNoise& xi, bool renormalized, const EigenOptions& o) {
  auto dop = direct_operator(regularized_form(xi, renormalized));
  const Lattice& l = dop.lattice();
  return lowest_eigenpairs(direct_contract(dop), GridField::constant(l, l.cell_volume()), o);
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_error_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

std::vector<double> block_norms_l2(const SpectralField& f) { return block_norms(f, 2.0); }

// Experiment definitions.

struct Experiment {
  std::vector<Cell> cells;
  std::function<json(const Cell&)> compute;
  std::function<void(const std::vector<ResultRecord>&, json&, std::vector<Assertion>&)> aggregate;
};

std::vector<Cell> seed_eps_cells(const ExperimentConfig& c) {
  std::vector<Cell> out;
  for (auto s : c.seeds)
    for (double e : c.eps) out.push_back({s, e});
  return out;
}

// Records of ok cells grouped by eps in ladder order.
std::vector<std::vector<const ResultRecord*>> by_eps(const ExperimentConfig& c, const std::vector<ResultRecord>& recs) {
  std::vector<std::vector<const ResultRecord*>> out(c.eps.size());
  for (const auto& r : recs) {
    if (r.status != "ok") continue;
    double e = r.cell["eps"].get<double>();
    for (std::size_t i = 0; i < c.eps.size(); ++i)
      if (c.eps[i] == e) out[i].push_back(&r);
  }
  return out;
}

Experiment divergence(const ExperimentConfig& c) {
  Experiment ex;
  for (double e : c.eps) ex.cells.push_back({std::nullopt, e});
  ex.compute = [c](const Cell& cell) {
    Lattice l(c.dimension, c.grid);
    json v;
    v["c_x"] = expected_grad_sq_x(l, *cell.eps, mollifier_of(c));
    return v;
  };
  ex.aggregate = [c](const std::vector<ResultRecord>& recs, json& agg, std::vector<Assertion>& as) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : recs)
      if (r.status == "ok") pts.emplace_back(r.cell["eps"].get<double>(), r.values["c_x"].get<double>());
    const auto log_fit = fit_divergence(pts, DivergenceModel::log);
    const auto inv_fit = fit_divergence(pts, DivergenceModel::inverse);
    const bool two = c.dimension == 2;
    const auto& right = two ? log_fit : inv_fit;
    const auto& wrong = two ? inv_fit : log_fit;
    agg["fit_log"] = {{"a", log_fit.a}, {"b", log_fit.b}, {"r_squared", log_fit.r_squared}};
    agg["fit_inverse"] = {{"a", inv_fit.a}, {"b", inv_fit.b}, {"r_squared", inv_fit.r_squared}};
    agg["model"] = two ? "log" : "inverse";
    agg["prefactor_ratio"] = right.b / c.target_prefactor;
    if (c.r2_min > 0.0)
      as.push_back({"r_squared", right.r_squared > c.r2_min,
                    fmt("R^2 = %.6f, required > %.4f", right.r_squared, c.r2_min)});
    as.push_back({"prefactor", std::abs(right.b / c.target_prefactor - 1.0) <= c.prefactor_tol,
                  fmt("b = %.6g, target %.6g", right.b, c.target_prefactor) +
                      fmt(" (ratio %.4f, band %.2f)", right.b / c.target_prefactor, c.prefactor_tol)});
    as.push_back({"model_discrimination", right.r_squared - wrong.r_squared >= c.discrimination_min,
                  fmt("R^2 correct - wrong = %.6f, required >= %.3f", right.r_squared - wrong.r_squared,
                      c.discrimination_min)});
  };
  return ex;
}

Experiment regularity(const ExperimentConfig& c) {
  Experiment ex;
  ex.cells = seed_eps_cells(c);
  ex.compute = [c](const Cell& cell) {
    Lattice l(c.dimension, c.grid);
    const auto noise = sample_white_noise(l, *cell.seed);
    const auto m = mollifier_of(c);
    const auto x_raw = solve_x(noise.xi);
    const auto x_eps = solve_x(mollify(noise, *cell.eps, m));
    RenormConstants rc;
    rc.c_x = expected_grad_sq_x(l, *cell.eps, m);
    rc.eps = *cell.eps;
    rc.kind = c.mollifier;
    const auto wick = forward_transform(wick_grad_square_x(x_eps, rc, c.dealias));
    json v;
    v["xi_blocks"] = block_norms_l2(noise.xi);
    v["x_blocks"] = block_norms_l2(x_raw);
    v["wick_blocks"] = block_norms_l2(wick);
    v["c_x"] = rc.c_x;
    return v;
  };
  ex.aggregate = [c](const std::vector<ResultRecord>& recs, json& agg, std::vector<Assertion>& as) {
    const auto groups = by_eps(c, recs);
    json per_eps = json::array();
    for (std::size_t i = 0; i < c.eps.size(); ++i) {
      const auto& g = groups[i];
      if (g.empty()) continue;
      auto mean_blocks = [&](const char* key) {
        std::vector<double> m = g.front()->values[key].get<std::vector<double>>();
        std::fill(m.begin(), m.end(), 0.0);
        for (const auto* r : g) {
          auto b = r->values[key].get<std::vector<double>>();
          for (std::size_t n = 0; n < m.size(); ++n) m[n] += b[n] / static_cast<double>(g.size());
        }
        return m;
      };
      const auto fx = fit_block_slope(mean_blocks("xi_blocks"), c.dimension, 2.0, c.block_lo, c.block_hi);
      const auto fX = fit_block_slope(mean_blocks("x_blocks"), c.dimension, 2.0, c.block_lo, c.block_hi);
      const auto fw = fit_block_slope(mean_blocks("wick_blocks"), c.dimension, 2.0, c.block_lo, c.block_hi);
      per_eps.push_back({{"eps", c.eps[i]},
                         {"alpha_xi", fx.alpha_hat},
                         {"alpha_x", fX.alpha_hat},
                         {"alpha_wick", fw.alpha_hat},
                         {"r_squared_wick", fw.r_squared},
                         {"seeds", g.size()}});
      const std::string at = fmt(" at eps = %.6g", c.eps[i]);
      const double xi_target = -c.dimension / 2.0;
      as.push_back({"xi_exponent", std::abs(fx.alpha_hat - xi_target) <= c.xi_tol,
                    fmt("alpha_xi = %.4f, target %.2f", fx.alpha_hat, xi_target) + fmt(" +- %.2f", c.xi_tol) + at});
      const double shift = fX.alpha_hat - fx.alpha_hat;
      as.push_back({"x_shift", std::abs(shift - 2.0) <= c.x_shift_tol,
                    fmt("alpha_x - alpha_xi = %.4f, target 2 +- %.2f", shift, c.x_shift_tol) + at});
      const bool in_range = fw.alpha_hat >= c.wick_min && fw.alpha_hat <= c.wick_max;
      std::string range = c.wick_max > 1e299 ? fmt("required >= %.2f", c.wick_min)
                                             : fmt("required in [%.2f, %.2f]", c.wick_min, c.wick_max);
      as.push_back({"wick_exponent", in_range, fmt("alpha_wick = %.4f, ", fw.alpha_hat) + range + at});
    }
    agg["exponents"] = per_eps;
  };
  return ex;
}

Experiment renorm_necessity(const ExperimentConfig& c, std::shared_ptr<ConstantTable> ct) {
  Experiment ex;
  ex.cells = seed_eps_cells(c);
  ex.compute = [c, ct](const Cell& cell) {
    Lattice l(c.dimension, c.grid);
    const auto noise = sample_white_noise(l, *cell.seed);
    const auto xi = enhance(c, *ct, noise, *cell.eps);
    const auto o = eigen_options(c, *cell.seed, c.eigen_count);
    const auto with = solve_direct(xi, true, o);
    const auto without = solve_direct(xi, false, o);
    json v;
    v["lambda1_renormalized"] = with.eigenvalues[0];
    v["lambda1_bare"] = without.eigenvalues[0];
    v["shift"] = xi.constants.c_x + xi.constants.c_y;
    v["converged"] = with.converged && without.converged;
    v["iterations"] = with.iterations + without.iterations;
    return v;
  };
  ex.aggregate = [c](const std::vector<ResultRecord>& recs, json& agg, std::vector<Assertion>& as) {
    // Paired by seed so that each difference uses one noise realization.
    std::map<std::uint64_t, std::map<double, const ResultRecord*>> grid;
    for (const auto& r : recs)
      if (r.status == "ok") grid[r.cell["seed"].get<std::uint64_t>()][r.cell["eps"].get<double>()] = &r;
    const double target = -std::log(2.0) / (4.0 * std::numbers::pi * std::numbers::pi);
    json bare_shifts = json::array(), diffs = json::array();
    std::vector<double> diff_means;
    bool all_converged = true;
    for (const auto& r : recs)
      if (r.status == "ok" && !r.values["converged"].get<bool>()) all_converged = false;
    for (std::size_t i = 0; i + 1 < c.eps.size(); ++i) {
      std::vector<double> shift, diff;
      for (const auto& [seed, row] : grid) {
        auto a = row.find(c.eps[i]), b = row.find(c.eps[i + 1]);
        if (a == row.end() || b == row.end()) continue;
        shift.push_back(b->second->values["lambda1_bare"].get<double>() - a->second->values["lambda1_bare"].get<double>());
        diff.push_back(std::abs(a->second->values["lambda1_renormalized"].get<double>() -
                                b->second->values["lambda1_renormalized"].get<double>()));
      }
      const double ms = mean_of(shift), md = mean_of(diff);
      bare_shifts.push_back({{"eps", c.eps[i]}, {"mean", ms}, {"std_error", std_error_of(shift)}});
      diffs.push_back({{"eps", c.eps[i]}, {"mean", md}, {"std_error", std_error_of(diff)}});
      diff_means.push_back(md);
      as.push_back({"bare_shift", !shift.empty() && std::abs(ms / target - 1.0) <= c.shift_tol,
                    fmt("mean shift %.6f vs target %.6f", ms, target) +
                        fmt(" (ratio %.3f, band %.2f)", ms / target, c.shift_tol) +
                        fmt(" eps %.6g -> half", c.eps[i])});
    }
    bool monotone = diff_means.size() >= 2;
    for (std::size_t i = 1; i < diff_means.size(); ++i) monotone = monotone && diff_means[i] < diff_means[i - 1];
    std::string seq;
    for (double d : diff_means) seq += fmt("%.3e ", d);
    as.push_back({"renormalized_monotone", monotone, "successive |dlambda1|: " + seq});
    as.push_back({"solver_converged", all_converged, all_converged ? "all cells converged" : "some cell did not converge"});
    agg["bare_shifts"] = bare_shifts;
    agg["renormalized_differences"] = diffs;
    agg["target_shift"] = target;
  };
  return ex;
}

Experiment transform_equivalence(const ExperimentConfig& c, std::shared_ptr<ConstantTable> ct) {
  Experiment ex;
  for (auto s : c.seeds) ex.cells.push_back({s, c.eps.front()});
  ex.compute = [c, ct](const Cell& cell) {
    auto ladder = c.grid_ladder;
    std::sort(ladder.begin(), ladder.end());
    // One realization on the finest grid, restricted to coarser ones.
    const Lattice fine(c.dimension, ladder.back());
    const auto base = sample_white_noise(fine, *cell.seed);
    json v;
    json grids = json::array(), lt = json::array(), ld = json::array(), mm = json::array();
    bool converged = true;
    for (int n : ladder) {
      NoiseSample noise = base;
      if (n != fine.points()) {
        Lattice l(c.dimension, n);
        auto xi = resample(base.xi, l);
        zero_nyquist(xi);
        noise = NoiseSample{l, base.seed, std::move(xi), base.xi0};
      }
      const auto xi = enhance(c, *ct, noise, *cell.eps);
      const auto o = eigen_options(c, *cell.seed, c.eigen_count);
      const auto t = solve_transformed(assemble_form(xi), o);
      const auto d = solve_direct(xi, true, o);
      converged = converged && t.converged && d.converged;
      const double m = std::abs(t.eigenvalues[0] - d.eigenvalues[0]) / std::abs(d.eigenvalues[0]);
      grids.push_back(n);
      lt.push_back(t.eigenvalues[0]);
      ld.push_back(d.eigenvalues[0]);
      mm.push_back(m);
      if (n == c.grid) {
        v["lambda1_transformed"] = t.eigenvalues[0];
        v["lambda1_direct"] = d.eigenvalues[0];
        v["mismatch"] = m;
      }
    }
    v["grids"] = grids;
    v["lambda1_transformed_ladder"] = lt;
    v["lambda1_direct_ladder"] = ld;
    v["mismatch_ladder"] = mm;
    v["converged"] = converged;
    return v;
  };
  ex.aggregate = [c](const std::vector<ResultRecord>& recs, json& agg, std::vector<Assertion>& as) {
    double worst = 0.0;
    std::vector<double> ladder_worst;
    bool converged = true;
    for (const auto& r : recs) {
      if (r.status != "ok") continue;
      worst = std::max(worst, r.values["mismatch"].get<double>());
      auto m = r.values["mismatch_ladder"].get<std::vector<double>>();
      if (ladder_worst.empty()) ladder_worst.assign(m.size(), 0.0);
      for (std::size_t i = 0; i < m.size(); ++i) ladder_worst[i] = std::max(ladder_worst[i], m[i]);
      converged = converged && r.values["converged"].get<bool>();
    }
    agg["max_mismatch"] = worst;
    agg["max_mismatch_ladder"] = ladder_worst;
    as.push_back({"equivalence", !ladder_worst.empty() && worst <= c.equivalence_tol,
                  fmt("max relative mismatch %.3e at N = %.0f", worst, c.grid) +
                      fmt(", required <= %.3g", c.equivalence_tol)});
    bool decreasing = ladder_worst.size() >= 2;
    std::string seq;
    for (std::size_t i = 0; i < ladder_worst.size(); ++i) {
      seq += fmt("%.3e ", ladder_worst[i]);
      if (i == 0) continue;
      const bool at_floor = ladder_worst[i] < c.roundoff_floor && ladder_worst[i - 1] < c.roundoff_floor;
      decreasing = decreasing && (ladder_worst[i] < ladder_worst[i - 1] || at_floor);
    }
    as.push_back({"mismatch_decreases", decreasing,
                  "mismatch over grid ladder: " + seq + fmt("(round-off floor %.0e)", c.roundoff_floor)});
    as.push_back({"solver_converged", converged, converged ? "all solves converged" : "some solve did not converge"});
  };
  return ex;
}

std::vector<double> laplacian_spectrum(const Lattice& l, std::size_t m) {
  std::vector<double> ev;
  for (std::size_t i = 0; i < l.size(); ++i)
    if (!l.is_nyquist(i)) ev.push_back(l.norm_sq(i));
  std::partial_sort(ev.begin(), ev.begin() + static_cast<std::ptrdiff_t>(std::min(m, ev.size())), ev.end());
  ev.resize(std::min(m, ev.size()));
  return ev;
}

GridField bump(const Lattice& l, double width) {
  return GridField::from_function(l, [&](const Point& x) {
    double r2 = 0.0;
    for (int a = 0; a < l.dimension(); ++a) r2 += (x[a] - std::numbers::pi) * (x[a] - std::numbers::pi);
    const double s = 1.0 - r2 / (width * width);
    return s > 0.0 ? s * s : 0.0;
  });
}

Experiment gap_or_positivity(const ExperimentConfig& c, std::shared_ptr<ConstantTable> ct, bool positivity) {
  Experiment ex;
  for (auto s : c.seeds) ex.cells.push_back({s, c.zero_noise ? std::nullopt : std::optional<double>(c.eps.front())});
  ex.compute = [c, ct, positivity](const Cell& cell) {
    Lattice l(c.dimension, c.grid);
    const auto op = c.zero_noise ? zero_noise_form(l)
                                 : assemble_form(enhance(c, *ct, sample_white_noise(l, *cell.seed), *cell.eps));
    const auto o = eigen_options(c, *cell.seed, c.eigen_count);
    const auto s = solve_transformed(op, o);
    json v;
    v["eigenvalues"] = s.eigenvalues;
    v["residuals"] = s.residuals;
    v["lambda1"] = s.eigenvalues[0];
    v["lambda2"] = s.eigenvalues[1];
    v["gap"] = spectral_gap(s);
    v["iterations"] = s.iterations;
    v["converged"] = s.converged;
    if (positivity) {
      const auto p = ground_state_positivity(s, op.transform_field);
      v["ground_min"] = p.min;
      v["ground_max"] = p.max;
      v["sign_definite"] = p.sign_definite;
      const auto h = heat_apply_physical(form_contract(op), mass_weights(op), op.transform_field,
                                         bump(l, c.bump_width), c.heat_time, c.heat_steps);
      v["heat_min"] = h.v.min();
      v["heat_max"] = h.v.max();
      v["heat_cg_iterations"] = h.cg_iterations;
      v["heat_converged"] = h.converged;
    }
    return v;
  };
  ex.aggregate = [c, positivity](const std::vector<ResultRecord>& recs, json& agg, std::vector<Assertion>& as) {
    double min_gap = 1e300, min_ground = 1e300, min_heat = 1e300;
    bool converged = true, definite = true, heat_ok = true;
    std::size_t ok = 0;
    double worst_spectrum = 0.0;
    const auto exact = laplacian_spectrum(Lattice(c.dimension, c.grid), c.eigen_count);
    for (const auto& r : recs) {
      if (r.status != "ok") continue;
      ++ok;
      min_gap = std::min(min_gap, r.values["gap"].get<double>());
      converged = converged && r.values["converged"].get<bool>();
      if (c.zero_noise) {
        auto ev = r.values["eigenvalues"].get<std::vector<double>>();
        for (std::size_t i = 0; i < ev.size() && i < exact.size(); ++i)
          worst_spectrum = std::max(worst_spectrum, std::abs(ev[i] - exact[i]));
      }
      if (positivity) {
        definite = definite && r.values["sign_definite"].get<bool>();
        min_ground = std::min(min_ground, r.values["ground_min"].get<double>());
        min_heat = std::min(min_heat, r.values["heat_min"].get<double>());
        heat_ok = heat_ok && r.values["heat_converged"].get<bool>() && r.values["heat_min"].get<double>() > 0.0;
      }
    }
    agg["min_gap"] = min_gap;
    as.push_back({"gap", ok > 0 && min_gap > c.gap_factor * c.tol,
                  fmt("min gap %.6g, required > %.3g", min_gap, c.gap_factor * c.tol)});
    as.push_back({"solver_converged", converged, converged ? "all solves converged" : "some solve did not converge"});
    if (c.zero_noise) {
      agg["max_spectrum_error"] = worst_spectrum;
      agg["exact_spectrum"] = exact;
      as.push_back({"zero_noise_spectrum", ok > 0 && worst_spectrum <= c.spectrum_tol,
                    fmt("max |lambda_i - |k|^2| = %.3e, required <= %.0e", worst_spectrum, c.spectrum_tol)});
    }
    if (positivity) {
      agg["min_ground_state"] = min_ground;
      agg["min_heat"] = min_heat;
      as.push_back({"ground_state_sign_definite", ok > 0 && definite,
                    fmt("min normalized ground state value %.4e", min_ground)});
      as.push_back({"heat_positive", ok > 0 && heat_ok, fmt("min heat value %.4e", min_heat)});
    }
  };
  return ex;
}

Experiment form_convergence(const ExperimentConfig& c, std::shared_ptr<ConstantTable> ct) {
  Experiment ex;
  ex.cells = seed_eps_cells(c);
  ex.compute = [c, ct](const Cell& cell) {
    Lattice l(c.dimension, c.grid);
    const auto noise = sample_white_noise(l, *cell.seed);
    const auto xa = enhance(c, *ct, noise, *cell.eps);
    const auto xb = enhance(c, *ct, noise, *cell.eps / 2.0);
    const auto fa = assemble_form(xa);
    const auto fb = assemble_form(xb);
    const double dist = enhanced_distance(xa, xb, c.kappa);
    static constexpr double envelopes[] = {0.6, 1.0, 2.0};
    std::vector<double> ratios;
    for (std::size_t p = 0; p < c.probe_pairs; ++p) {
      const double s = envelopes[p % 3];
      const auto v1 = random_probe(l, s, derive_seed(c.probe_seed, 2 * p));
      const auto v2 = random_probe(l, s, derive_seed(c.probe_seed, 2 * p + 1));
      const double diff = std::abs(form_value(fa, v1, v2) - form_value(fb, v1, v2));
      ratios.push_back(diff / (dist * h1_norm(v1) * h1_norm(v2)));
    }
    json v;
    v["distance"] = dist;
    v["ratios"] = ratios;
    v["max_ratio"] = *std::max_element(ratios.begin(), ratios.end());
    return v;
  };
  ex.aggregate = [c](const std::vector<ResultRecord>& recs, json& agg, std::vector<Assertion>& as) {
    const auto groups = by_eps(c, recs);
    std::vector<double> bound;
    json per_eps = json::array();
    for (std::size_t i = 0; i < c.eps.size(); ++i) {
      if (groups[i].empty()) continue;
      double m = 0.0;
      for (const auto* r : groups[i]) m = std::max(m, r->values["max_ratio"].get<double>());
      bound.push_back(m);
      per_eps.push_back({{"eps", c.eps[i]}, {"max_ratio", m}});
    }
    agg["ratio_bounds"] = per_eps;
    const double mean = mean_of(bound);
    bool stable = bound.size() == c.eps.size() && bound.size() >= 2;
    std::string seq;
    for (double b : bound) {
      seq += fmt("%.4g ", b);
      stable = stable && std::abs(b / mean - 1.0) <= c.stability_band;
    }
    as.push_back({"ratio_stable", stable,
                  "max ratio per eps: " + seq + fmt("(mean %.4g, band +-%.0f%%)", mean, 100.0 * c.stability_band)});
  };
  return ex;
}

// Work pool with in-order emission.
void run_pool(std::size_t n, std::size_t jobs, const std::function<ResultRecord(std::size_t)>& work,
              const std::function<void(ResultRecord&&)>& emit) {
  std::vector<std::optional<ResultRecord>> slots(n);
  std::mutex mu;
  std::condition_variable cv;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      auto r = work(i);
      std::lock_guard lock(mu);
      slots[i] = std::move(r);
      cv.notify_all();
    }
  };
  const std::size_t workers = std::min(jobs, n);
  std::vector<std::thread> threads;
  if (workers > 1)
    for (std::size_t t = 0; t < workers; ++t) threads.emplace_back(worker);
  for (std::size_t i = 0; i < n; ++i) {
    if (workers <= 1) {
      emit(work(i));
      continue;
    }
    std::unique_lock lock(mu);
    cv.wait(lock, [&] { return slots[i].has_value(); });
    ResultRecord r = std::move(*slots[i]);
    slots[i].reset();
    lock.unlock();
    emit(std::move(r));
  }
  for (auto& t : threads) t.join();
}

void collect_stats(const std::vector<ResultRecord>& recs, json& agg) {
  std::map<std::string, std::vector<double>> cols;
  for (const auto& r : recs)
    if (r.status == "ok")
      for (const auto& [k, v] : r.values.items())
        if (v.is_number()) cols[k].push_back(v.get<double>());
  json stats = json::object();
  for (const auto& [k, v] : cols) stats[k] = {{"mean", mean_of(v)}, {"std_error", std_error_of(v)}, {"n", v.size()}};
  agg["stats"] = stats;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string csv_value(const json& v) {
  if (v.is_null()) return "";
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_float()) return fmt("%.17g", v.get<double>());
  if (v.is_number()) return v.dump();
  if (v.is_string()) return csv_escape(v.get<std::string>());
  return "";
}

void write_csv(const std::filesystem::path& path, const std::vector<ResultRecord>& recs) {
  std::set<std::string> keys;
  for (const auto& r : recs)
    if (!r.is_aggregate())
      for (const auto& [k, v] : r.values.items())
        if (v.is_primitive()) keys.insert(k);
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  out << "experiment,config_hash,seed,eps,status";
  for (const auto& k : keys) out << ',' << k;
  out << ",error\n";
  for (const auto& r : recs) {
    if (r.is_aggregate()) continue;
    out << r.experiment << ',' << r.config_hash << ',' << csv_value(r.cell["seed"]) << ','
        << csv_value(r.cell["eps"]) << ',' << r.status;
    for (const auto& k : keys) out << ',' << (r.values.contains(k) ? csv_value(r.values[k]) : "");
    out << ',' << csv_escape(r.error) << '\n';
  }
}

}  // namespace

bool ResultRecord::passed() const {
  if (status != "ok") return false;
  return std::all_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.passed; });
}

nlohmann::json ResultRecord::to_json() const {
  json j;
  j["experiment"] = experiment;
  j["config_hash"] = config_hash;
  j["version"] = version;
  j["cell"] = cell;
  j["status"] = status;
  if (!error.empty()) j["error"] = error;
  j["values"] = values;
  if (is_aggregate()) {
    json a = json::array();
    for (const auto& x : assertions) a.push_back({{"name", x.name}, {"passed", x.passed}, {"detail", x.detail}});
    j["assertions"] = a;
    j["passed"] = passed();
  }
  j["config"] = config;
  j["wall_clock_s"] = wall_clock_s;
  return j;
}

ResultRecord ResultRecord::from_json(const nlohmann::json& j) {
  ResultRecord r;
  r.experiment = j.at("experiment").get<std::string>();
  r.config_hash = j.value("config_hash", "");
  r.version = j.value("version", "");
  r.cell = j.at("cell");
  r.status = j.value("status", "ok");
  r.error = j.value("error", "");
  r.values = j.value("values", json::object());
  r.config = j.value("config", json::object());
  r.wall_clock_s = j.value("wall_clock_s", 0.0);
  if (j.contains("assertions"))
    for (const auto& a : j["assertions"])
      r.assertions.push_back({a.at("name").get<std::string>(), a.at("passed").get<bool>(), a.value("detail", "")});
  return r;
}

FitResult fit_divergence(const std::vector<std::pair<double, double>>& values, DivergenceModel model) {
  require(values.size() >= 4, ErrorCode::invalid_argument, "fit_divergence: at least 4 points are required");
  const double n = static_cast<double>(values.size());
  double sx = 0.0, sy = 0.0;
  std::vector<double> g;
  for (const auto& [eps, c] : values) {
    require(eps > 0.0, ErrorCode::invalid_argument, "fit_divergence: eps must be positive");
    g.push_back(model == DivergenceModel::log ? std::log(1.0 / eps) : 1.0 / eps);
    sx += g.back();
    sy += c;
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double dx = g[i] - mx, dy = values[i].second - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  require(sxx > 1e-14 * std::max(1.0, mx * mx) * n, ErrorCode::invalid_argument,
          "fit_divergence: degenerate design matrix");
  FitResult r;
  r.b = sxy / sxx;
  r.a = my - r.b * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double e = values[i].second - (r.a + r.b * g[i]);
    ss_res += e * e;
  }
  r.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : (ss_res == 0.0 ? 1.0 : 0.0);
  return r;
}

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  auto ct = std::make_shared<ConstantTable>();
  const auto& c = config;
  Experiment ex;
  if (c.experiment == "divergence") {
    ex = divergence(c);
  } else if (c.experiment == "regularity") {
    ex = regularity(c);
  } else {
    if (!c.zero_noise) {
      std::vector<int> grids = c.experiment == "transform-equivalence" ? c.grid_ladder : std::vector<int>{c.grid};
      for (int n : grids)
        for (double e : c.eps) {
          ct->ensure(c, n, e);
          if (c.experiment == "form-convergence") ct->ensure(c, n, e / 2.0);
          if (c.experiment == "transform-equivalence" || c.experiment == "spectral-gap" ||
              c.experiment == "positivity")
            break;
        }
    }
    if (c.experiment == "renorm-necessity") ex = renorm_necessity(c, ct);
    else if (c.experiment == "transform-equivalence") ex = transform_equivalence(c, ct);
    else if (c.experiment == "spectral-gap") ex = gap_or_positivity(c, ct, false);
    else if (c.experiment == "positivity") ex = gap_or_positivity(c, ct, true);
    else if (c.experiment == "form-convergence") ex = form_convergence(c, ct);
    else fail(ErrorCode::config, "experiment: unknown experiment '" + c.experiment + "'");
  }

  const auto snapshot = config_to_json(c);
  const auto hash = config_hash(c);
  RunResult result;
  std::ofstream out;
  if (options.write_files) {
    std::filesystem::path dir(c.output);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorCode::io, "cannot create output directory " + dir.string() + ": " + ec.message());
    result.records_file = dir / (c.experiment + "-" + hash + ".jsonl");
    result.csv_file = dir / (c.experiment + "-" + hash + ".csv");
    out.open(result.records_file, std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write " + result.records_file.string());
  }

  auto base_record = [&] {
    ResultRecord r;
    r.experiment = c.experiment;
    r.config_hash = hash;
    r.config = snapshot;
    r.version = ANDERSON_VERSION;
    return r;
  };
  auto emit = [&](ResultRecord&& r) {
    if (out.is_open()) {
      out << r.to_json().dump() << '\n';
      out.flush();
    }
    if (options.on_record) options.on_record(r);
    result.records.push_back(std::move(r));
  };

  run_pool(
      ex.cells.size(), c.jobs,
      [&](std::size_t i) {
        ResultRecord r = base_record();
        r.cell = ex.cells[i].key();
        const auto t0 = std::chrono::steady_clock::now();
        try {
          r.values = ex.compute(ex.cells[i]);
        } catch (const std::exception& e) {
          r.status = "error";
          r.error = e.what();
          r.values = json::object();
        }
        r.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return r;
      },
      emit);

  ResultRecord agg = base_record();
  agg.cell = "aggregate";
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t errors = 0;
  for (const auto& r : result.records)
    if (r.status != "ok") ++errors;
  try {
    collect_stats(result.records, agg.values);
    ex.aggregate(result.records, agg.values, agg.assertions);
  } catch (const std::exception& e) {
    agg.status = "error";
    agg.error = e.what();
  }
  agg.values["cells"] = result.records.size();
  agg.values["cell_errors"] = errors;
  agg.assertions.push_back({"cells_ok", errors == 0,
                            std::to_string(result.records.size() - errors) + " of " +
                                std::to_string(result.records.size()) + " cells ok"});
  agg.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  result.all_passed = agg.passed();
  emit(std::move(agg));
  if (options.write_files) write_csv(result.csv_file, result.records);
  return result;
}

std::string payload_of(const std::filesystem::path& records_file) {
  std::ifstream in(records_file);
  if (!in) fail(ErrorCode::io, "cannot read " + records_file.string());
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = json::parse(line);
    j.erase("wall_clock_s");
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace anderson
