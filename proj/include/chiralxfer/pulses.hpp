// Time-dependent coupling functions kappa_1,2(t), their logarithmic-derivative
// combinations f_j, the node/noise propagators G1, G2, G and the noise-leakage
// integral with its closed-form references.
#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace chiralxfer {

enum class PulseFamily { exp_pair, const_exp_pair, custom_tabulated };

// exp_pair:       kappa1 = kmax e^{kt}/(2-e^{kt}) for t<0, kmax for t>=0,
//                 on [-T/2, T/2]; kappa2(t) = kappa1(delta_tau - t).
// const_exp_pair: kappa1 = kmax, kappa2 = kmax e^{-kt}/(1-e^{-kt}) on [0, T],
//                 with kappa2 clamped at kmax/cutoff_eps near t = 0.
struct PulseSchedule {
  PulseFamily family = PulseFamily::exp_pair;
  double kappa_max = 1.0;
  double t_i = -10.0;
  double t_f = 10.0;
  double delta_tau = 0.0;
  double cutoff_eps = 1e-3;
  // custom_tabulated only
  std::vector<double> tab_t, tab_k1, tab_k2;

  double duration() const { return t_f - t_i; }

  void check() const {
    if (kappa_max <= 0.0) throw std::invalid_argument("kappa_max must be > 0");
    if (t_f <= t_i) throw std::invalid_argument("t_f must exceed t_i");
    if (family == PulseFamily::custom_tabulated &&
        (tab_t.size() < 2 || tab_t.size() != tab_k1.size() ||
         tab_t.size() != tab_k2.size()))
      throw std::invalid_argument("tabulated pulse needs matching t/k columns");
  }
};

namespace detail {

// The analytic kernels are templated on the float type: the noise-leakage
// quadrature runs them in long double because the noise propagator cancels
// its two terms down by many orders of magnitude near the end of the window.

// exp_pair kappa1 branch, centered so the constant branch starts at t = 0.
template <typename F>
F kappa1_exp(F t, F kmax) {
  if (t >= F(0)) return kmax;
  F e = std::exp(kmax * t);
  return kmax * e / (F(2) - e);
}

// Antiderivative of kappa1_exp with K(0) = 0.
template <typename F>
F int_kappa1_exp(F t, F kmax) {
  if (t >= F(0)) return kmax * t;
  return -std::log(F(2) - std::exp(kmax * t));
}

// const_exp_pair kappa2 with divergence clamp at kmax/eps.
template <typename F>
F kappa2_cexp(F t, F kmax, F eps) {
  F clamp = kmax / eps;
  if (t <= F(0)) return clamp;
  F k = kmax / std::expm1(kmax * t);
  return std::min(k, clamp);
}

// Clamp onset time: kappa2_cexp(t) == kmax/eps.
template <typename F>
F cexp_clamp_time(F kmax, F eps) {
  return std::log1p(eps) / kmax;
}

// Antiderivative of the clamped const_exp kappa2, zero at t = t0 >= 0.
template <typename F>
F int_kappa2_cexp(F t, F t0, F kmax, F eps) {
  F tc = cexp_clamp_time(kmax, eps);
  // int kappa2 dt = ln(1 - e^{-kmax t}) on the unclamped branch
  auto log_branch = [&](F x) { return std::log(-std::expm1(-kmax * x)); };
  F clamp = kmax / eps;
  auto piece = [&](F x) {  // antiderivative with value 0 at tc
    if (x <= tc) return clamp * (x - tc);
    return log_branch(x) - log_branch(tc);
  };
  return piece(t) - piece(t0);
}

inline double interp(const std::vector<double>& xs,
                     const std::vector<double>& ys, double x) {
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  std::size_t i = static_cast<std::size_t>(it - xs.begin());
  double w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
  return (1.0 - w) * ys[i - 1] + w * ys[i];
}

}  // namespace detail

inline double kappa1(double t, const PulseSchedule& s) {
  switch (s.family) {
    case PulseFamily::exp_pair:
      return detail::kappa1_exp(t, s.kappa_max);
    case PulseFamily::const_exp_pair:
      return s.kappa_max;
    case PulseFamily::custom_tabulated:
      return detail::interp(s.tab_t, s.tab_k1, t);
  }
  return 0.0;
}

inline double kappa2(double t, const PulseSchedule& s) {
  switch (s.family) {
    case PulseFamily::exp_pair:
      return detail::kappa1_exp(s.delta_tau - t, s.kappa_max);
    case PulseFamily::const_exp_pair:
      return detail::kappa2_cexp(t - s.delta_tau, s.kappa_max, s.cutoff_eps);
    case PulseFamily::custom_tabulated:
      return detail::interp(s.tab_t, s.tab_k2, t);
  }
  return 0.0;
}

inline double kappa_j(double t, const PulseSchedule& s, int j) {
  return j == 1 ? kappa1(t, s) : kappa2(t, s);
}

// Cumulative integral of kappa_j from s.t_i to t (analytic families).
inline double int_kappa(double t, const PulseSchedule& s, int j) {
  switch (s.family) {
    case PulseFamily::exp_pair: {
      if (j == 1)
        return detail::int_kappa1_exp(t, s.kappa_max) -
               detail::int_kappa1_exp(s.t_i, s.kappa_max);
      // kappa2(t) = kappa1(d - t): integral = K1(d - t_i) - K1(d - t)
      return detail::int_kappa1_exp(s.delta_tau - s.t_i, s.kappa_max) -
             detail::int_kappa1_exp(s.delta_tau - t, s.kappa_max);
    }
    case PulseFamily::const_exp_pair: {
      if (j == 1) return s.kappa_max * (t - s.t_i);
      return detail::int_kappa2_cexp(t - s.delta_tau, s.t_i - s.delta_tau,
                                     s.kappa_max, s.cutoff_eps);
    }
    case PulseFamily::custom_tabulated: {
      // trapezoid prefix on the tabulated grid plus partial cell
      const auto& xs = s.tab_t;
      const auto& ys = j == 1 ? s.tab_k1 : s.tab_k2;
      double acc = 0.0;
      double prev_x = s.t_i, prev_y = detail::interp(xs, ys, s.t_i);
      for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i] <= s.t_i) continue;
        double x = std::min(xs[i], t);
        double y = detail::interp(xs, ys, x);
        acc += 0.5 * (prev_y + y) * (x - prev_x);
        prev_x = x;
        prev_y = y;
        if (xs[i] >= t) break;
      }
      if (prev_x < t)
        acc += 0.5 * (prev_y + detail::interp(xs, ys, t)) * (t - prev_x);
      return acc;
    }
  }
  return 0.0;
}

// f_j = (kdot_j/kappa_j - kappa_j)/2, via the analytic derivative.
inline double f_j(double t, const PulseSchedule& s, int j) {
  double k = kappa_j(t, s, j);
  if (k <= 0.0) throw std::runtime_error("f_j: kappa vanishes at sample point");
  switch (s.family) {
    case PulseFamily::exp_pair: {
      // d/dt ln kappa1 = kmax + kappa1 on the rising branch, 0 on the flat one
      if (j == 1) {
        double logd = t < 0.0 ? s.kappa_max + k : 0.0;
        return 0.5 * (logd - k);
      }
      // right-continuity in t: at the kink kappa2 takes the decaying branch
      double u = s.delta_tau - t;
      double logd = u <= 0.0 ? -(s.kappa_max + k) : 0.0;
      return 0.5 * (logd - k);
    }
    case PulseFamily::const_exp_pair: {
      if (j == 1) return -0.5 * s.kappa_max;
      double u = t - s.delta_tau;
      double tc = detail::cexp_clamp_time(s.kappa_max, s.cutoff_eps);
      double logd = u <= tc ? 0.0 : -(s.kappa_max + k);
      return 0.5 * (logd - k);
    }
    case PulseFamily::custom_tabulated: {
      double h = 1e-6 * s.duration();
      double kp = kappa_j(t + h, s, j), km = kappa_j(t - h, s, j);
      return 0.5 * ((kp - km) / (2.0 * h) / k - k);
    }
  }
  return 0.0;
}

// Cumulative integral of f_j from t' to t, using
// int f_j = (1/2) ln(kappa_j(t)/kappa_j(t')) - (1/2) int kappa_j.
inline double int_f(double t, double t_prime, const PulseSchedule& s, int j) {
  double kt = kappa_j(t, s, j), ktp = kappa_j(t_prime, s, j);
  if (kt <= 0.0 || ktp <= 0.0)
    throw std::runtime_error("int_f: kappa vanishes on integration bounds");
  return 0.5 * std::log(kt / ktp) -
         0.5 * (int_kappa(t, s, j) - int_kappa(t_prime, s, j));
}

struct Propagators {
  double g1;
  double g2;
  double g;  // noise propagator, -sqrt(kappa1(t')) G1 - sqrt(kappa2(t')) G2
};

inline Propagators propagators(double t, double t_prime,
                               const PulseSchedule& s) {
  if (t < t_prime) throw std::invalid_argument("propagators: t < t_prime");
  double ik2 = int_kappa(t, s, 2) - int_kappa(t_prime, s, 2);
  double g2 = std::exp(-0.5 * ik2);
  // G1 = sqrt(k1(t')/k2(t)) e^{int f1} (e^{-int k2} - 1)
  //    = sqrt(k1(t)/k2(t)) e^{-int k1/2} (e^{-int k2} - 1)
  double ik1 = int_kappa(t, s, 1) - int_kappa(t_prime, s, 1);
  double g1 = std::sqrt(kappa1(t, s) / kappa2(t, s)) * std::exp(-0.5 * ik1) *
              std::expm1(-ik2);
  double g = -std::sqrt(kappa1(t_prime, s)) * g1 -
             std::sqrt(kappa2(t_prime, s)) * g2;
  return {g1, g2, g};
}

namespace detail {

// Noise propagator G(t, t') for the analytic families, templated so the
// leakage quadrature can run it in long double. The two terms cancel down to
// ~e^{-kT/2} of their size, which exhausts double precision near 1e-6 targets.
template <typename F>
F noise_g(F t, F tp, const PulseSchedule& s) {
  F kmax = F(s.kappa_max), dtau = F(s.delta_tau), eps = F(s.cutoff_eps);
  F k1t, k2t, k1p, k2p, ik1, ik2;
  if (s.family == PulseFamily::exp_pair) {
    k1t = kappa1_exp(t, kmax);
    k2t = kappa1_exp(dtau - t, kmax);
    k1p = kappa1_exp(tp, kmax);
    k2p = kappa1_exp(dtau - tp, kmax);
    ik1 = int_kappa1_exp(t, kmax) - int_kappa1_exp(tp, kmax);
    ik2 = int_kappa1_exp(dtau - tp, kmax) - int_kappa1_exp(dtau - t, kmax);
  } else {
    k1t = kmax;
    k1p = kmax;
    k2t = kappa2_cexp(t - dtau, kmax, eps);
    k2p = kappa2_cexp(tp - dtau, kmax, eps);
    ik1 = kmax * (t - tp);
    ik2 = int_kappa2_cexp(t - dtau, tp - dtau, kmax, eps);
  }
  F g2 = std::exp(-ik2 / F(2));
  F g1 = std::sqrt(k1t / k2t) * std::exp(-ik1 / F(2)) * std::expm1(-ik2);
  return -std::sqrt(k1p) * g1 - std::sqrt(k2p) * g2;
}

// Composite Simpson of fn over [a, b] with n panels (n rounded up to even).
template <typename F>
double simpson(F&& fn, double a, double b, int n) {
  if (n % 2) ++n;
  double h = (b - a) / n;
  double acc = fn(a) + fn(b);
  for (int i = 1; i < n; ++i) acc += fn(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

}  // namespace detail

// int_{t_i}^{t_f} |G(t_f, t')|^2 dt' by piecewise Simpson, split at the
// derivative kinks of the analytic families.
inline double noise_leakage(const PulseSchedule& s, int points_per_window = 4000) {
  s.check();
  bool analytic = s.family != PulseFamily::custom_tabulated;
  auto integrand = [&](double tp) {
    if (analytic) {
      long double g = detail::noise_g<long double>(
          static_cast<long double>(s.t_f), static_cast<long double>(tp), s);
      return static_cast<double>(g * g);
    }
    double g = propagators(s.t_f, tp, s).g;
    return g * g;
  };
  std::vector<double> breaks{s.t_i};
  auto add = [&](double x) {
    if (x > s.t_i && x < s.t_f) breaks.push_back(x);
  };
  if (s.family == PulseFamily::exp_pair) {
    add(0.0);              // kappa1 kink
    add(s.delta_tau);      // kappa2 kink
  } else if (s.family == PulseFamily::const_exp_pair) {
    add(s.delta_tau +
        detail::cexp_clamp_time(s.kappa_max, s.cutoff_eps));  // clamp onset
  }
  breaks.push_back(s.t_f);
  std::sort(breaks.begin(), breaks.end());

  double per_unit = points_per_window / (20.0 / s.kappa_max);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    double a = breaks[i], b = breaks[i + 1];
    int n = std::max(64, static_cast<int>(per_unit * (b - a)));
    acc += detail::simpson(integrand, a, b, n);
  }
  return acc;
}

// Closed forms the quadrature is checked against.
inline double noise_leakage_closed_form(const PulseSchedule& s) {
  double kT = s.kappa_max * s.duration();
  switch (s.family) {
    case PulseFamily::exp_pair: {
      double e = std::exp(kT / 2.0);
      return 2.0 * (e - 1.0) / ((1.0 - 2.0 * e) * (1.0 - 2.0 * e));
    }
    case PulseFamily::const_exp_pair:
      return std::exp(-kT);
    default:
      throw std::invalid_argument("no closed form for tabulated pulses");
  }
}

// Two-column whitespace text (t, kappa), '#' comments. Returns (t, k) columns.
inline std::pair<std::vector<double>, std::vector<double>> load_pulse_table(
    std::istream& in) {
  std::vector<double> ts, ks;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    double t, k;
    if (ss >> t >> k) {
      ts.push_back(t);
      ks.push_back(k);
    }
  }
  if (ts.size() < 2) throw std::runtime_error("pulse table needs >= 2 rows");
  return {std::move(ts), std::move(ks)};
}

inline std::pair<std::vector<double>, std::vector<double>> load_pulse_table(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pulse table: " + path);
  return load_pulse_table(in);
}

}  // namespace chiralxfer
