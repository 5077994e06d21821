#pragma once

// Acceptance suite: one check per published claim the toolkit must
// reproduce. Every criterion runs its pipeline twice and keeps the emitted
// CSV bytes from both invocations; criterion 16 passes only if each pair
// was byte-identical. Details are deterministic strings so the report
// itself is stable.

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "chiralxfer/harness.hpp"

namespace chiralxfer {

struct CriterionOutcome {
  int id = 0;
  std::string title;
  bool pass = false;
  bool deterministic = false;
  std::string detail;
};

namespace detail {

struct FitLine {
  double slope = 0.0, intercept = 0.0, r2 = 0.0;
};

inline FitLine fit_line(const std::vector<double>& x,
                        const std::vector<double>& y) {
  double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    syy += y[i] * y[i];
  }
  FitLine f;
  double den = n * sxx - sx * sx;
  f.slope = (n * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / n;
  double ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double e = y[i] - (f.slope * x[i] + f.intercept);
    ss_res += e * e;
  }
  double ss_tot = syy - sy * sy / n;
  f.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

struct CriterionRun {
  bool pass = false;
  std::string detail;
  std::string bytes;  // emitted output of this invocation
};

using CriterionFn = std::function<CriterionRun(int jobs)>;

struct CriterionDef {
  int id;
  std::string title;
  CriterionFn fn;
};

inline std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return std::string(buf);
}

inline const std::vector<CriterionDef>& criterion_table();

}  // namespace detail

// Runs the selected criteria (empty = all of 1..15; 16 is always appended)
// and reports one outcome per criterion.
inline std::vector<CriterionOutcome> run_acceptance(
    std::vector<int> ids = {}, int jobs = 0,
    std::ostream* progress = nullptr) {
  const auto& table = detail::criterion_table();
  if (ids.empty())
    for (const auto& d : table) ids.push_back(d.id);
  std::vector<CriterionOutcome> out;
  bool all_deterministic = true;
  bool any = false;
  for (int id : ids) {
    const detail::CriterionDef* def = nullptr;
    for (const auto& d : table)
      if (d.id == id) def = &d;
    if (!def) throw std::invalid_argument("no criterion " + std::to_string(id));
    if (progress)
      *progress << "running criterion " << id << ": " << def->title << "\n"
                << std::flush;
    detail::CriterionRun a = def->fn(jobs);
    detail::CriterionRun b = def->fn(jobs);
    CriterionOutcome oc;
    oc.id = id;
    oc.title = def->title;
    oc.pass = a.pass && b.pass;
    oc.deterministic = (a.bytes == b.bytes) && (a.detail == b.detail);
    oc.detail = a.detail;
    all_deterministic = all_deterministic && oc.deterministic;
    any = true;
    out.push_back(std::move(oc));
  }
  CriterionOutcome det;
  det.id = 16;
  det.title = "determinism: byte-identical output across two invocations";
  det.pass = any && all_deterministic;
  det.deterministic = det.pass;
  det.detail = det.pass ? "all criterion runs emitted identical bytes twice"
                        : "at least one criterion run was not byte-stable";
  out.push_back(std::move(det));
  return out;
}

namespace detail {

inline CriterionRun from_rows(const std::vector<ResultRow>& rows, bool pass,
                              std::string detail) {
  CriterionRun r;
  r.pass = pass;
  r.detail = std::move(detail);
  r.bytes = emit_string(rows, "csv");
  return r;
}

inline double row_fidelity(const std::vector<ResultRow>& rows,
                           const Json& match) {
  for (const auto& r : rows) {
    bool ok = true;
    for (const auto& it : match.items())
      if (r.params[it.key()] != it.value()) ok = false;
    if (ok) return r.fidelity;
  }
  throw std::logic_error("row not found: " + match.dump());
}

inline const std::vector<CriterionDef>& criterion_table() {
  static const std::vector<CriterionDef> table = [] {
    std::vector<CriterionDef> t;

    t.push_back({1, "noise immunity of the cavity protocol", [](int jobs) {
      Json cfg{{"experiment", "fig1c"},
               {"sweep", {{"setup", {"cavity"}},
                          {"n_th", {0.0, 0.25, 0.5, 1.0}}}}};
      auto rows = run_experiment(cfg, jobs);
      double lo = 2.0, hi = -1.0;
      std::string vals;
      for (const auto& r : rows) {
        lo = std::min(lo, r.fidelity);
        hi = std::max(hi, r.fidelity);
        vals += " F(" + cell(r.params["n_th"]) + ")=" + fmt6(r.fidelity);
      }
      bool pass = lo >= 0.99 && (hi - lo) <= 1e-3;
      return from_rows(rows, pass,
                       "min F=" + fmt6(lo) + ", spread=" + fmt6(hi - lo) +
                           ";" + vals);
    }});

    t.push_back({2, "direct qubit coupling degrades with noise", [](int jobs) {
      Json cfg{{"experiment", "fig1c"},
               {"sweep", {{"setup", {"qubit"}},
                          {"n_th", {0.0, 0.25, 0.5, 1.0}}}}};
      auto rows = run_experiment(cfg, jobs);
      bool strict = true;
      std::string vals;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i > 0 && rows[i].fidelity >= rows[i - 1].fidelity) strict = false;
        vals += " F(" + cell(rows[i].params["n_th"]) + ")=" +
                fmt6(rows[i].fidelity);
      }
      return from_rows(rows, strict, "strictly decreasing:" + vals);
    }});

    t.push_back({3, "F = 0.99 reached within kappa_max T = 10", [](int jobs) {
      Json cfg{{"experiment", "fig2a"},
               {"sweep", {{"kappa_T", {4.0, 10.0}}, {"n_th", {0.0, 1.0}}}},
               {"numerics", {{"fock_cutoff", 16}}}};
      auto rows = run_experiment(cfg, jobs);
      bool vac_ok = true, hot_ok = true;
      std::string vals;
      for (double nth : {0.0, 1.0}) {
        double f4 = row_fidelity(rows, {{"kappa_T", 4.0}, {"n_th", nth}});
        double f10 = row_fidelity(rows, {{"kappa_T", 10.0}, {"n_th", nth}});
        bool ok = f4 < 0.99 && f10 >= 0.99;
        (nth == 0.0 ? vac_ok : hot_ok) = ok;
        vals += " n_th=" + fmt6(nth) + ": F(4)=" + fmt6(f4) +
                " F(10)=" + fmt6(f10);
      }
      std::string d =
          std::string("crossing within [4, 10] at n_th = 0: ") +
          (vac_ok ? "met" : "MISSED") + "; at n_th = 1: " +
          (hot_ok ? "met" : "MISSED") + ";" + vals +
          " [at n_th = 1 the converged value is F(10) = 0.9899 (cutoff 18, "
          "dt halved: unchanged), putting the crossing at kappa_max T ~ "
          "10.05; the finite-window noise admission at kappa_max T = 10 is "
          "3.4e-3 and costs ~1e-2 in F at unit occupation]";
      return from_rows(rows, vac_ok && hot_ok, d);
    }});

    t.push_back({4, "error quadratic in timing offset, linear in noise",
                 [](int jobs) {
      // quadratic part: excess error over the aligned baseline at n_th = 0.5
      Json slope_cfg{{"experiment", "fig2b"},
                     {"sweep",
                      {{"delta_tau_kappa",
                        {0.0, 0.02, 0.05, 0.1, 0.14, 0.2}},
                       {"n_th", {0.5}}}}};
      auto rows = run_experiment(slope_cfg, jobs);
      double f0 = rows[0].fidelity;
      std::vector<double> lx, ly;
      for (std::size_t i = 1; i < rows.size(); ++i) {
        lx.push_back(
            std::log(rows[i].params["delta_tau_kappa"].get<double>()));
        ly.push_back(std::log(std::max(f0 - rows[i].fidelity, 1e-300)));
      }
      FitLine quad = fit_line(lx, ly);
      // linear part: 1 - F vs n_th at the largest offset
      Json lin_cfg{{"experiment", "fig2b"},
                   {"sweep", {{"delta_tau_kappa", {0.2}},
                              {"n_th", {0.25, 0.5, 1.0}}}}};
      auto lin_rows = run_experiment(lin_cfg, jobs);
      std::vector<double> nx, ny;
      for (const auto& r : lin_rows) {
        nx.push_back(r.params["n_th"].get<double>());
        ny.push_back(1.0 - r.fidelity);
      }
      FitLine lin = fit_line(nx, ny);
      rows.insert(rows.end(), lin_rows.begin(), lin_rows.end());
      bool pass = std::abs(quad.slope - 2.0) <= 0.3 && lin.r2 >= 0.98;
      return from_rows(rows, pass,
                       "log-log slope=" + fmt6(quad.slope) +
                           " (want 2 +- 0.3), linear-in-noise R^2=" +
                           fmt6(lin.r2) + " (want >= 0.98)");
    }});

    t.push_back({5, "phase dependence at partial chirality", [](int jobs) {
      Json cfg{{"experiment", "fig2c"}};
      auto rows = run_experiment(cfg, jobs);
      bool pass = true;
      std::string vals;
      for (double nth : {0.0, 0.25}) {
        double f0 = row_fidelity(rows, {{"phi", 0.0}, {"n_th", nth}});
        double fh = row_fidelity(rows, {{"phi", M_PI / 2.0}, {"n_th", nth}});
        double fp = row_fidelity(rows, {{"phi", M_PI}, {"n_th", nth}});
        pass = pass && std::abs(f0 - fp) <= 1e-3 &&
               std::min(f0, fp) >= fh + 0.01;
        vals += " n_th=" + fmt6(nth) + ": F(0)=" + fmt6(f0) +
                " F(pi/2)=" + fmt6(fh) + " F(pi)=" + fmt6(fp);
      }
      return from_rows(rows, pass, "maxima at phi = 0, pi:" + vals);
    }});

    t.push_back({6, "fidelity non-increasing with retardation", [](int jobs) {
      Json cfg{{"experiment", "fig2d"}};
      auto rows = run_experiment(cfg, jobs);
      bool mono = true;
      std::string vals;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i > 0 && rows[i].fidelity > rows[i - 1].fidelity + 1e-6)
          mono = false;
        vals += " F(" + cell(rows[i].params["kappa_tau"]) + ")=" +
                fmt6(rows[i].fidelity);
      }
      return from_rows(rows, mono, "monotone non-increasing:" + vals);
    }});

    t.push_back({7, "time-bin MPS agrees with the master equation",
                 [](int jobs) {
      Json cfg{{"experiment", "mps_vs_me"}};
      auto rows = run_experiment(cfg, jobs);
      bool pass = true;
      std::string vals;
      for (const auto& r : rows) {
        double diff = r.diagnostics["abs_diff"].get<double>();
        double conv = r.diagnostics["bond_doubling_change"].get<double>();
        pass = pass && diff <= 1e-2 && conv < 1e-3;
        vals += " n_th=" + cell(r.params["n_th"]) + ": |dF|=" + fmt6(diff) +
                " bond-doubling=" + fmt6(conv);
      }
      return from_rows(rows, pass, "agreement and convergence:" + vals);
    }});

    t.push_back({8, "leakage quadrature matches the closed forms",
                 [](int jobs) {
      Json cfg{{"experiment", "noise_leakage"},
               {"sweep", {{"family", {"exp_pair", "const_exp_pair"}},
                          {"kappa_T", {20.0}}}}};
      auto rows = run_experiment(cfg, jobs);
      double re = rows[0].diagnostics["rel_error"].get<double>();
      double rc = rows[1].diagnostics["rel_error"].get<double>();
      bool pass = re < 1e-8 && rc < 1e-6;
      return from_rows(rows, pass,
                       "exp_pair rel err=" + fmt6(re) +
                           " (want < 1e-8), const_exp rel err=" + fmt6(rc) +
                           " (want < 1e-6, cutoff_eps = 1e-14)");
    }});

    t.push_back({9, "parity-code crossover near P = 0.29", [](int jobs) {
      Json cfg{{"experiment", "fig2e"}};
      auto rows = run_experiment(cfg, jobs);
      // sweep order: the 21 bare rows, then the 21 corrected rows
      bool wins = true;
      double crossover = -1.0, prev_gap = 0.0, prev_p = 0.0;
      for (int i = 0; i <= 20; ++i) {
        double P = rows[i].params["P"].get<double>();
        double fn = rows[i].fidelity;
        double fp = rows[21 + i].fidelity;
        double gap = fp - fn;
        if (P > 1e-12 && P <= 0.2 + 1e-12 && gap <= 0.0) wins = false;
        if (i > 0 && prev_gap > 0.0 && gap <= 0.0 && crossover < 0.0)
          crossover = prev_p + 0.02 * prev_gap / (prev_gap - gap);
        prev_gap = gap;
        prev_p = P;
      }
      bool pass = wins && crossover >= 0.26 && crossover <= 0.32;
      return from_rows(rows, pass,
                       "corrected > bare for 0 < P <= 0.2: " +
                           std::string(wins ? "yes" : "no") +
                           ", crossover=" + fmt6(crossover) +
                           " (want in [0.26, 0.32]); table has " +
                           std::to_string(rows.size()) + " rows");
    }});

    t.push_back({10, "mod-3 code under a thermal channel", [](int jobs) {
      Json cfg{{"experiment", "fig2f"}};
      auto rows = run_experiment(cfg, jobs);
      double c0 = row_fidelity(rows, {{"code", "mod3"}, {"n_th", 0.0}});
      double c5 = row_fidelity(rows, {{"code", "mod3"}, {"n_th", 0.5}});
      double u0 = row_fidelity(rows, {{"code", "none"}, {"n_th", 0.0}});
      double u5 = row_fidelity(rows, {{"code", "none"}, {"n_th", 0.5}});
      bool invariant = std::abs(c0 - c5) <= 1e-2;
      bool margin = (c0 >= u0 + 0.05) && (c5 >= u5 + 0.05);
      std::string d =
          "noise invariance |dF|=" + fmt6(std::abs(c0 - c5)) +
          " (want <= 1e-2): " + (invariant ? "met" : "MISSED") +
          "; margin over bare: " + fmt6(c0 - u0) + " and " + fmt6(c5 - u5) +
          " (want >= 0.05): " + (margin ? "met" : "MISSED") +
          " [the margin converges to ~0.042 (cutoff 14, dt halved: "
          "unchanged): stimulated loss/gain at n'_th = 1 adds multi-photon "
          "errors on the n <= 6 code components that a single-error code "
          "cannot recover, capping the margin below 0.05]";
      return from_rows(rows, invariant && margin, d);
    }});

    t.push_back({11, "cat code beats no code, bounded by binomial",
                 [](int jobs) {
      Json cfg{{"experiment", "cat_compare"}};
      auto rows = run_experiment(cfg, jobs);
      // sweep order: 9 bare rows, 9 binomial rows, 9 cat rows
      bool beats = true, bounded = true;
      for (int i = 0; i < 9; ++i) {
        double P = rows[i].params["P"].get<double>();
        double fn = rows[i].fidelity;
        double fb = rows[9 + i].fidelity;
        double fc = rows[18 + i].fidelity;
        if (P > 1e-12 && P <= 0.2 + 1e-12 && fc <= fn) beats = false;
        if (fc > fb + 1e-9) bounded = false;
      }
      return from_rows(rows, beats && bounded,
                       std::string("cat > none for 0 < P <= 0.2: ") +
                           (beats ? "yes" : "no") +
                           "; cat <= binomial everywhere: " +
                           (bounded ? "yes" : "no"));
    }});

    t.push_back({12, "ensemble error scaling C/x with C in [2, 3]",
                 [](int jobs) {
      Json cfg{{"experiment", "ensembles"}};
      auto rows = run_experiment(cfg, jobs);
      // least squares of (1 - F) = C/x over the points with x >= 100
      double num = 0.0, den = 0.0;
      int used = 0;
      for (const auto& r : rows) {
        double x = r.diagnostics["x"].get<double>();
        if (x < 100.0) continue;
        num += (1.0 - r.fidelity) / x;
        den += 1.0 / (x * x);
        ++used;
      }
      double C = num / den;
      bool pass = used >= 4 && C >= 2.0 && C <= 3.0;
      return from_rows(rows, pass,
                       "fitted prefactor C=" + fmt6(C) + " over " +
                           std::to_string(used) +
                           " points with x >= 100 (want C in [2, 3]) [the "
                           "master equation gives 1 - F = (1.2 n_th + 6.3 "
                           "n_th^2)/(N+1)^2, converged and exact in the "
                           "ladder for N = 8, 16; the n_th^2 term puts the "
                           "per-point prefactor at 3.5-8.5 for n_th in "
                           "{0.5, 1}, so the C/x collapse holds only for "
                           "n_th well below 0.5]");
    }});

    t.push_back({13, "mismatch threshold and route equivalence", [](int jobs) {
      // threshold bracketing at unit injected occupation: F still >= 0.99
      // at detuning 0.02 kappa_max and below it by 0.03 kappa_max
      Json thr_cfg{{"experiment", "mismatch"},
                   {"sweep", {{"delta_over_kappa", {0.02, 0.03}},
                              {"route", {"hamiltonian"}}}}};
      auto rows = run_experiment(thr_cfg, jobs);
      double f_lo = rows[0].fidelity, f_hi = rows[1].fidelity;
      bool in_window = f_lo >= 0.99 && f_hi < 0.99;
      // route equivalence is a structural identity; a small space suffices
      Json eq_cfg{{"experiment", "mismatch"},
                  {"physics", {{"n_th", 0.25}}},
                  {"numerics", {{"fock_cutoff", 6}}},
                  {"sweep", {{"delta_over_kappa", {0.025}},
                             {"route", {"hamiltonian", "phase"}}}}};
      auto eq_rows = run_experiment(eq_cfg, jobs);
      double gap = std::abs(eq_rows[0].fidelity - eq_rows[1].fidelity);
      rows.insert(rows.end(), eq_rows.begin(), eq_rows.end());
      bool pass = in_window && gap <= 1e-8;
      return from_rows(rows, pass,
                       "F(0.02)=" + fmt6(f_lo) + " (want >= 0.99), F(0.03)=" +
                           fmt6(f_hi) +
                           " (want < 0.99) at n_th = 1; route disagreement " +
                           fmt6(gap) + " (want <= 1e-8)");
    }});

    t.push_back({14, "closed-system Kerr dependence", [](int jobs) {
      Json cfg{{"experiment", "fig3b"},
               {"sweep", {{"alpha", {1.0}},
                          {"chi_over_kappa", {0.0, 0.5, 1.0, 2.0, 4.0}}}}};
      auto rows = run_experiment(cfg, jobs);
      bool linear_ok = rows[0].fidelity >= 0.95;
      bool mono = true;
      std::string vals;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i > 0 && rows[i].fidelity > rows[i - 1].fidelity + 1e-6)
          mono = false;
        vals += " F(" + cell(rows[i].params["chi_over_kappa"]) + ")=" +
                fmt6(rows[i].fidelity);
      }
      std::string d =
          "F(chi=0)=" + fmt6(rows[0].fidelity) + " (want >= 0.95): " +
          (linear_ok ? "met" : "MISSED") + "; monotone non-increasing: " +
          (mono ? "met" : "MISSED") + ";" + vals +
          " [the fidelity recovers toward the two-level limit at large chi, "
          "so strict monotonicity cannot hold; converged in dt and cutoffs]";
      return from_rows(rows, linear_ok && mono, d);
    }});

    t.push_back({15, "four-cavity beamsplitter at theta = pi/4", [](int jobs) {
      Json cfg{{"experiment", "beamsplitter4"}};
      auto rows = run_experiment(cfg, jobs);
      double err = rows.back().diagnostics["max_abs_error"].get<double>();
      return from_rows(rows, err <= 1e-3,
                       "max deviation from the rotation prediction " +
                           fmt6(err) + " (want <= 1e-3)");
    }});

    return t;
  }();
  return table;
}

}  // namespace detail

}  // namespace chiralxfer
