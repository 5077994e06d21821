// Closed-system simulator: two single-mode cavities at the ends of a short
// multimode waveguide, Schroedinger-picture statevector evolution with Kerr
// nonlinearities and coherent-state initial mode occupation.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "chiralxfer/fock.hpp"
#include "chiralxfer/lindblad.hpp"
#include "chiralxfer/pulses.hpp"

namespace chiralxfer {

// kappa(t) = 2 pi g(t)^2 / delta
inline double g_from_kappa(double kappa, double delta) {
  if (kappa < 0.0) throw std::invalid_argument("g_from_kappa: kappa < 0");
  if (delta <= 0.0) throw std::invalid_argument("g_from_kappa: delta <= 0");
  return std::sqrt(delta * kappa / (2.0 * M_PI));
}

struct ClosedSpec {
  double delta = 1.0;    // waveguide mode spacing
  int n_modes = 3;       // odd; modes n = -(n_modes-1)/2 ... +(n_modes-1)/2
  double chi = 0.0;      // Kerr rate, cavities only
  Complex alpha = 0.0;   // initial coherent amplitude per waveguide mode
  PulseSchedule pulses;  // kappa_1/kappa_2 schedules
  int cavity_cutoff = 0;  // 0 picks the default
  int mode_cutoff = 0;    // 0 picks ceil(|alpha|^2 + 4|alpha| + 3)
  bool include_ancilla = true;
  // catch-pulse delay; the emitted wavepacket needs the one-way travel time
  // pi/delta to reach the far cavity (costs ~8% fidelity if ignored).
  // negative means "use pi/delta"; set 0 to disable.
  double catch_delay = -1.0;

  double effective_catch_delay() const {
    return catch_delay < 0.0 ? M_PI / delta : catch_delay;
  }

  int cavity_dim() const {
    // the Kerr term vanishes below |2>, and the coherent background pushes
    // occupation above one photon, so a two-level cavity would freeze the
    // chi dependence entirely
    if (cavity_cutoff > 0) return cavity_cutoff;
    double a = std::abs(alpha);
    return std::max(4, static_cast<int>(std::ceil(a * a + 2.0 * a + 3.0)));
  }
  int mode_dim() const {
    if (mode_cutoff > 0) return mode_cutoff;
    double a = std::abs(alpha);
    return std::max(3, static_cast<int>(std::ceil(a * a + 4.0 * a + 3.0)));
  }

  void check() const {
    if (delta <= 0.0) throw std::invalid_argument("ClosedSpec: delta <= 0");
    if (n_modes < 1 || n_modes % 2 == 0)
      throw std::invalid_argument("ClosedSpec: n_modes must be odd and >= 1");
    if (cavity_dim() < 2 || mode_dim() < 2)
      throw std::invalid_argument("ClosedSpec: cutoffs must be >= 2");
    pulses.check();
  }

  SpaceLayout layout() const {
    std::vector<SpaceLayout::Subsystem> subs;
    subs.push_back({"c1", cavity_dim()});
    int half = (n_modes - 1) / 2;
    for (int n = -half; n <= half; ++n)
      subs.push_back({"m" + std::to_string(n), mode_dim()});
    subs.push_back({"c2", cavity_dim()});
    if (include_ancilla) subs.push_back({"anc", 2});
    return SpaceLayout(subs);
  }
};

// op acting on subsystem idx, identity elsewhere, assembled sparsely.
inline SpMat sparse_embed(const Mat& op, int idx, const SpaceLayout& lay) {
  int d = lay.subsystems()[idx].dim;
  if (op.rows() != d || op.cols() != d)
    throw std::invalid_argument("sparse_embed: dimension mismatch");
  int n = lay.total_dim();
  int s = lay.stride(idx);
  int outer = n / (d * s);
  std::vector<Eigen::Triplet<Complex>> trips;
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) {
      if (op(r, c) == Complex(0.0)) continue;
      for (int o = 0; o < outer; ++o)
        for (int i = 0; i < s; ++i)
          trips.emplace_back(o * d * s + r * s + i, o * d * s + c * s + i,
                             op(r, c));
    }
  SpMat out(n, n);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

// Time-independent pieces plus the two coupling structures; the full
// Hamiltonian is H0 + g1(t) V1 + g2(t) V2.
struct ClosedHamiltonian {
  SpaceLayout lay;
  SpMat h0;  // mode detunings and Kerr terms
  SpMat v1;  // cavity-1 coupling structure
  SpMat v2;  // cavity-2 coupling structure, alternating mode signs

  explicit ClosedHamiltonian(const ClosedSpec& spec) : lay(spec.layout()) {
    spec.check();
    int n = lay.total_dim();
    int half = (spec.n_modes - 1) / 2;
    int dc = spec.cavity_dim();
    int dm = spec.mode_dim();

    Mat nm = number_matrix(dm);
    Mat ac = annihilation_matrix(dc);
    Mat kerr = -spec.chi * (ac.adjoint() * ac.adjoint() * ac * ac);

    h0 = SpMat(n, n);
    for (int m = -half; m <= half; ++m)
      h0 += sparse_embed(double(m) * spec.delta * nm,
                         lay.index_of("m" + std::to_string(m)), lay);
    h0 += sparse_embed(kerr, lay.index_of("c1"), lay);
    h0 += sparse_embed(kerr, lay.index_of("c2"), lay);

    auto coupling = [&](const std::string& cav, int j) {
      SpMat a = sparse_embed(ac, lay.index_of(cav), lay);
      SpMat v(n, n);
      for (int m = -half; m <= half; ++m) {
        double sign = (j == 2 && (std::abs(m) % 2 == 1)) ? -1.0 : 1.0;
        SpMat bd = sparse_embed(annihilation_matrix(dm).adjoint().eval(),
                                lay.index_of("m" + std::to_string(m)), lay);
        v += sign * (bd * a);
      }
      return SpMat(v + SpMat(v.adjoint()));
    };
    v1 = coupling("c1", 1);
    v2 = coupling("c2", 2);
  }

  SpMat at(const ClosedSpec& spec, double t) const {
    double g1 = g_from_kappa(kappa_j(t, spec.pulses, 1), spec.delta);
    double g2 = g_from_kappa(catch_kappa2(spec, t), spec.delta);
    return SpMat(h0 + g1 * v1 + g2 * v2);
  }

  static double catch_kappa2(const ClosedSpec& spec, double t) {
    double td = t - spec.effective_catch_delay();
    td = std::clamp(td, spec.pulses.t_i, spec.pulses.t_f);
    return kappa_j(td, spec.pulses, 2);
  }
};

inline LinearOperator build_hamiltonian(const ClosedSpec& spec, double t) {
  ClosedHamiltonian h(spec);
  return {h.lay, Mat(h.at(spec, t)), true};
}

// RK4 on the Schroedinger equation. Norm must stay within 1e-5 of one.
inline StateVector evolve_closed(const ClosedSpec& spec,
                                 const StateVector& psi0, double dt = 0.0) {
  spec.check();
  ClosedHamiltonian ham(spec);
  if (!(psi0.layout == ham.lay))
    throw std::invalid_argument("evolve_closed: state layout mismatch");
  if (dt <= 0.0) dt = 0.02 / spec.delta;
  if (spec.delta * dt > 0.02 + 1e-12)
    throw std::invalid_argument("evolve_closed: delta * dt must be <= 0.02");

  double t0 = spec.pulses.t_i, t1 = spec.pulses.t_f;
  long steps = std::lround((t1 - t0) / dt);
  double h = (t1 - t0) / double(steps);
  Vec psi = psi0.amplitudes;
  const Complex mi(0.0, -1.0);
  for (long s = 0; s < steps; ++s) {
    double t = t0 + s * h;
    double g1a = g_from_kappa(kappa_j(t, spec.pulses, 1), spec.delta);
    double g2a = g_from_kappa(ClosedHamiltonian::catch_kappa2(spec, t), spec.delta);
    double g1b = g_from_kappa(kappa_j(t + h / 2, spec.pulses, 1), spec.delta);
    double g2b =
        g_from_kappa(ClosedHamiltonian::catch_kappa2(spec, t + h / 2), spec.delta);
    double g1c = g_from_kappa(kappa_j(t + h, spec.pulses, 1), spec.delta);
    double g2c =
        g_from_kappa(ClosedHamiltonian::catch_kappa2(spec, t + h), spec.delta);
    auto rhs = [&](const Vec& v, double g1, double g2) -> Vec {
      return mi * (ham.h0 * v + g1 * (ham.v1 * v) + g2 * (ham.v2 * v));
    };
    Vec k1 = rhs(psi, g1a, g2a);
    Vec k2 = rhs(psi + (h / 2) * k1, g1b, g2b);
    Vec k3 = rhs(psi + (h / 2) * k2, g1b, g2b);
    Vec k4 = rhs(psi + h * k3, g1c, g2c);
    psi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  double drift = std::abs(psi.norm() - 1.0);
  if (drift > 1e-5)
    throw std::runtime_error("evolve_closed: norm drifted by " +
                             std::to_string(drift));
  return {psi0.layout, std::move(psi)};
}

// Reduced density matrix of a pure state on the named subsystems.
inline DensityMatrix reduced_from_pure(const StateVector& psi,
                                       const std::vector<std::string>& keep) {
  const auto& subs = psi.layout.subsystems();
  std::vector<bool> kept(subs.size(), false);
  for (const auto& l : keep) kept[psi.layout.index_of(l)] = true;

  std::vector<SpaceLayout::Subsystem> keep_subs;
  std::vector<int> kdim, kstr, tdim, tstr;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (kept[i]) {
      keep_subs.push_back(subs[i]);
      kdim.push_back(subs[i].dim);
      kstr.push_back(psi.layout.stride(int(i)));
    } else {
      tdim.push_back(subs[i].dim);
      tstr.push_back(psi.layout.stride(int(i)));
    }
  }
  auto flat = [](const std::vector<int>& dims, const std::vector<int>& strs,
                 int idx) {
    int off = 0;
    for (int i = int(dims.size()) - 1; i >= 0; --i) {
      off += (idx % dims[i]) * strs[i];
      idx /= dims[i];
    }
    return off;
  };
  int dk = 1, dt = 1;
  for (int d : kdim) dk *= d;
  for (int d : tdim) dt *= d;
  Mat rho = Mat::Zero(dk, dk);
  for (int t = 0; t < dt; ++t) {
    int to = flat(tdim, tstr, t);
    for (int r = 0; r < dk; ++r) {
      Complex ar = psi.amplitudes(flat(kdim, kstr, r) + to);
      if (ar == Complex(0.0)) continue;
      for (int c = 0; c < dk; ++c)
        rho(r, c) += ar * std::conj(psi.amplitudes(flat(kdim, kstr, c) + to));
    }
  }
  return {SpaceLayout(keep_subs), std::move(rho)};
}

// Entangled-ancilla protocol in the closed system: cavity 1 holds half of the
// pair, every waveguide mode starts in |alpha>, cavity 2 in vacuum.
inline StateVector closed_initial_state(const ClosedSpec& spec) {
  if (!spec.include_ancilla)
    throw std::invalid_argument("closed_initial_state: ancilla required");
  SpaceLayout lay = spec.layout();
  Vec c1 = Vec::Zero(spec.cavity_dim() * 2);  // (cavity 1, ancilla) pair
  c1(0) = 1.0 / std::sqrt(2.0);
  c1(1 * 2 + 1) = 1.0 / std::sqrt(2.0);

  Vec mode = coherent_state(spec.alpha, spec.mode_dim()).amplitudes;
  Vec c2 = Vec::Zero(spec.cavity_dim());
  c2(0) = 1.0;

  // assemble in layout order c1, modes..., c2, anc; the ancilla sits last, so
  // build (c1 x modes x c2) x anc from the entangled (c1, anc) amplitudes
  Vec modes = Vec::Ones(1);
  for (int m = 0; m < spec.n_modes; ++m) modes = kron_vec(modes, mode);
  Vec rest = kron_vec(modes, c2);

  Vec psi = Vec::Zero(lay.total_dim());
  int dr = int(rest.size());
  for (int n = 0; n < spec.cavity_dim(); ++n)
    for (int a = 0; a < 2; ++a) {
      Complex w = c1(n * 2 + a);
      if (w == Complex(0.0)) continue;
      for (int r = 0; r < dr; ++r) psi(((n * dr) + r) * 2 + a) += w * rest(r);
    }
  StateVector out{lay, std::move(psi)};
  out.normalize();
  return out;
}

inline double closed_qst_fidelity(const ClosedSpec& spec, double dt = 0.0) {
  StateVector fin = evolve_closed(spec, closed_initial_state(spec), dt);
  DensityMatrix red = reduced_from_pure(fin, {"c2", "anc"});
  StateVector target = bell_target(spec.cavity_dim());
  target.layout = red.layout;
  return state_fidelity(red, target);
}

}  // namespace chiralxfer
