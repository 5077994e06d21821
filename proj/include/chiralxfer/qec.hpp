// Bosonic code layer: binomial parity / mod-3 and cat encodings, photon loss
// channel, number-class syndrome measurement, and conditioned recovery maps.
#pragma once

#include <cmath>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "chiralxfer/fock.hpp"
#include "chiralxfer/lindblad.hpp"

namespace chiralxfer {

enum class CodeKind { none, binomial_parity, binomial_mod3, cat };

struct CodeSpec {
  CodeKind kind = CodeKind::binomial_parity;
  Complex alpha = std::sqrt(2.0);  // cat only
  int fock_cutoff = 0;             // 0 picks the per-kind default

  int dim() const {
    if (fock_cutoff > 0) return fock_cutoff;
    switch (kind) {
      case CodeKind::none:
        return 2;
      case CodeKind::binomial_parity:
        return 6;
      case CodeKind::binomial_mod3:
        return 9;  // photon gain reaches |7>
      case CodeKind::cat: {
        double a = std::abs(alpha);
        return static_cast<int>(std::ceil(a * a + 5.0 * a + 5.0));
      }
    }
    return 2;
  }

  void check() const {
    int d = dim();
    int min_d = 2;
    switch (kind) {
      case CodeKind::none:
        min_d = 2;
        break;
      case CodeKind::binomial_parity:
        min_d = 5;
        break;
      case CodeKind::binomial_mod3:
        min_d = 7;
        break;
      case CodeKind::cat: {
        double a = std::abs(alpha);
        min_d = static_cast<int>(std::ceil(a * a + 5.0 * a + 5.0));
        break;
      }
    }
    if (d < min_d)
      throw std::invalid_argument("CodeSpec: fock_cutoff too small for code");
  }

  // How many photon-number classes the syndrome distinguishes.
  int syndrome_modulus() const {
    switch (kind) {
      case CodeKind::none:
        return 1;
      case CodeKind::binomial_parity:
      case CodeKind::cat:
        return 2;
      case CodeKind::binomial_mod3:
        return 3;
    }
    return 1;
  }

  // p = 0 (no error), -1 (one loss), +1 (one gain, mod-3 only).
  std::vector<int> outcome_list() const {
    switch (kind) {
      case CodeKind::none:
        return {0};
      case CodeKind::binomial_parity:
      case CodeKind::cat:
        return {0, -1};
      case CodeKind::binomial_mod3:
        return {0, -1, +1};
    }
    return {0};
  }

  // Photon-number residue assigned to outcome p.
  int residue_of(int p) const {
    int m = syndrome_modulus();
    if (p == 0) return 0;
    if (p == -1) return (m - 1) % m;
    if (p == +1 && kind == CodeKind::binomial_mod3) return 1;
    throw std::invalid_argument("invalid syndrome outcome for code");
  }
};

struct SyndromeOutcome {
  int p;
  double probability;
  DensityMatrix post_state;
};

// diag((-1)^n): the photon-number sign picked up by the a_1 -> -a_2 mapping.
inline Mat number_flip(int dim) {
  Mat f = Mat::Zero(dim, dim);
  for (int n = 0; n < dim; ++n) f(n, n) = (n % 2 == 0) ? 1.0 : -1.0;
  return f;
}

// diag(eta^{n/2}): deterministic decay factor of the loss channel.
inline Mat damping_matrix(int dim, double eta) {
  Mat d = Mat::Zero(dim, dim);
  for (int n = 0; n < dim; ++n) d(n, n) = std::pow(eta, 0.5 * n);
  return d;
}

inline Vec logical_state(const CodeSpec& code, int sign) {
  if (sign != +1 && sign != -1)
    throw std::invalid_argument("logical_state: sign must be +1 or -1");
  code.check();
  int d = code.dim();
  Vec v = Vec::Zero(d);
  double s = static_cast<double>(sign);
  switch (code.kind) {
    case CodeKind::none:
      v(sign == +1 ? 0 : 1) = 1.0;
      return v;
    case CodeKind::binomial_parity:
      v(0) = 0.5;
      v(2) = s * std::sqrt(2.0) / 2.0;
      v(4) = 0.5;
      return v;
    case CodeKind::binomial_mod3:
      v(0) = 0.5;
      v(3) = s * std::sqrt(2.0) / 2.0;
      v(6) = 0.5;
      return v;
    case CodeKind::cat: {
      // even cats of alpha (+) and i*alpha (-); non-orthogonal pair
      Complex a = (sign == +1) ? code.alpha : Complex(0, 1) * code.alpha;
      Vec c1 = coherent_state(a, d).amplitudes;
      Vec c2 = coherent_state(-a, d).amplitudes;
      v = c1 + c2;
      v /= v.norm();
      return v;
    }
  }
  return v;
}

inline StateVector encode(Complex c_g, Complex c_e, const CodeSpec& code) {
  if (std::abs(std::norm(c_g) + std::norm(c_e) - 1.0) > 1e-9)
    throw std::invalid_argument("encode: input amplitudes not normalized");
  Vec v = c_g * logical_state(code, +1) + c_e * logical_state(code, -1);
  StateVector out{SpaceLayout::single("mode", code.dim()), std::move(v)};
  out.normalize();  // cat logicals are not orthogonal
  return out;
}

// Kraus operator for k lost photons at transmissivity eta = 1 - P:
// K_k = sqrt((1-eta)^k / k!) * eta^{n/2} * a^k
inline Mat loss_kraus(int dim, double P, int k) {
  double eta = 1.0 - P;
  Mat a = annihilation_matrix(dim);
  Mat ak = Mat::Identity(dim, dim);
  double fact = 1.0;
  for (int j = 0; j < k; ++j) {
    ak = a * ak;
    fact *= static_cast<double>(j + 1);
  }
  return std::sqrt(std::pow(P, k) / fact) * damping_matrix(dim, eta) * ak;
}

inline DensityMatrix loss_channel_kraus(const DensityMatrix& rho, double P) {
  if (P < 0.0 || P >= 1.0)
    throw std::invalid_argument("loss_channel_kraus: need 0 <= P < 1");
  if (rho.layout.size() != 1)
    throw std::invalid_argument("loss_channel_kraus: single-mode input only");
  int d = static_cast<int>(rho.matrix.rows());
  if (P == 0.0) return rho;
  Mat out = Mat::Zero(d, d);
  for (int k = 0; k < d; ++k) {
    Mat kk = loss_kraus(d, P, k);
    out += kk * rho.matrix * kk.adjoint();
  }
  return {rho.layout, std::move(out)};
}

// Oracle for the same channel: beamsplitter coupling to an environment mode
// (vacuum or thermal with occupation n_env), then trace out the environment.
inline DensityMatrix loss_channel_dilation(const DensityMatrix& rho, double P,
                                           double n_env = 0.0,
                                           int env_dim = 0) {
  if (P < 0.0 || P >= 1.0)
    throw std::invalid_argument("loss_channel_dilation: need 0 <= P < 1");
  int d = static_cast<int>(rho.matrix.rows());
  if (env_dim <= 0) env_dim = (n_env > 0.0) ? d + 8 : d;
  SpaceLayout lay({{"sys", d}, {"env", env_dim}});
  DensityMatrix joint = kron_density(
      DensityMatrix{SpaceLayout::single("sys", d), rho.matrix},
      thermal_state(n_env, env_dim));
  double theta = std::asin(std::sqrt(P));
  Mat a = kron(annihilation_matrix(d), identity(env_dim));
  Mat b = kron(identity(d), annihilation_matrix(env_dim));
  Mat gen = theta * (a.adjoint() * b - a * b.adjoint());
  Mat u = gen.exp();
  joint.matrix = u * joint.matrix * u.adjoint();
  DensityMatrix red = partial_trace(joint, {"sys"});
  red.layout = rho.layout;
  return red;
}

// Projector onto photon numbers with n mod m == r.
inline Mat number_class_projector(int dim, int modulus, int residue) {
  Mat pr = Mat::Zero(dim, dim);
  for (int n = 0; n < dim; ++n)
    if (n % modulus == residue) pr(n, n) = 1.0;
  return pr;
}

inline std::vector<SyndromeOutcome> syndrome_measure(const DensityMatrix& rho,
                                                     const CodeSpec& code) {
  code.check();
  int d = static_cast<int>(rho.matrix.rows());
  int m = code.syndrome_modulus();
  std::vector<SyndromeOutcome> outcomes;
  double total = 0.0;
  for (int p : code.outcome_list()) {
    Mat pr = number_class_projector(d, m, code.residue_of(p));
    Mat post = pr * rho.matrix * pr;
    double prob = post.trace().real();
    total += prob;
    if (prob > 1e-15) post /= prob;
    outcomes.push_back({p, prob, DensityMatrix{rho.layout, std::move(post)}});
  }
  // residues not mapped to any outcome (none for the codes here, but keep the
  // bookkeeping honest for mod > outcomes extensions)
  if (std::abs(total - rho.matrix.trace().real()) > 1e-8)
    throw std::runtime_error("syndrome_measure: outcome classes not exhaustive");
  return outcomes;
}

// Recovery targets for outcome p after loss with beamsplitter angle theta.
// The (-1)^n arrival sign of the transfer mapping is folded in, so for the
// mod-3 code the no-error target is |0> -+ sqrt2 cos^3(theta) |3> + cos^6 |6>.
inline std::pair<Vec, Vec> recovery_targets(const CodeSpec& code, double theta,
                                            int p) {
  code.check();
  code.residue_of(p);  // validates p
  int d = code.dim();
  double eta = std::pow(std::cos(theta), 2);
  Mat shape = damping_matrix(d, eta) * number_flip(d);
  if (p == -1) shape = annihilation_matrix(d) * shape;
  if (p == +1) shape = annihilation_matrix(d).adjoint() * shape;
  Vec tp = shape * logical_state(code, +1);
  Vec tm = shape * logical_state(code, -1);
  double np = tp.norm(), nm = tm.norm();
  if (np < 1e-14 || nm < 1e-14)
    throw std::runtime_error("recovery_targets: target annihilated by ladder");
  return {tp / np, tm / nm};
}

// How the non-orthogonal recovery targets are turned into an orthonormal
// pair. anchored maps the minus target exactly and orthogonalizes the plus
// target against it (the form of the conditioned recovery unitary); symmetric
// is the Loewdin orthogonalization, which scores slightly higher and shifts
// the code-vs-no-code crossover up by roughly 0.02 in loss probability.
enum class RecoveryStyle { anchored, symmetric };

// Symmetric (Loewdin) orthonormalization of a target pair: columns of
// A S^{-1/2} with S = A^dagger A.
inline std::pair<Vec, Vec> lowdin_pair(const Vec& tp, const Vec& tm) {
  Mat a(tp.size(), 2);
  a.col(0) = tp;
  a.col(1) = tm;
  Mat s = a.adjoint() * a;
  Eigen::SelfAdjointEigenSolver<Mat> es(s);
  Eigen::VectorXd ev = es.eigenvalues();
  if (ev.minCoeff() < 1e-12)
    throw std::runtime_error("lowdin_pair: targets (nearly) parallel");
  Mat s_inv_sqrt = es.eigenvectors() *
                   ev.cwiseInverse().cwiseSqrt().cast<Complex>().asDiagonal() *
                   es.eigenvectors().adjoint();
  Mat u = a * s_inv_sqrt;
  return {u.col(0), u.col(1)};
}

// 2 x d map for outcome p: project onto the syndrome class, then rotate the
// orthonormalized targets onto the qubit basis. Weight outside the span of the
// targets is dropped (counts as failure, never renormalized away).
inline Mat recovery_map(const CodeSpec& code, double theta, int p,
                        RecoveryStyle style = RecoveryStyle::anchored) {
  int d = code.dim();
  auto [tp, tm] = recovery_targets(code, theta, p);
  Vec up, um;
  if (style == RecoveryStyle::symmetric) {
    std::tie(up, um) = lowdin_pair(tp, tm);
  } else {
    um = tm;
    up = tp - um * um.dot(tp);
    double n = up.norm();
    if (n < 1e-12)
      throw std::runtime_error("recovery_map: targets (nearly) parallel");
    up /= n;
  }
  Mat r = Mat::Zero(2, d);
  r.row(0) = up.adjoint();
  r.row(1) = um.adjoint();
  return r * number_class_projector(d, code.syndrome_modulus(),
                                    code.residue_of(p));
}

// Syndrome-conditioned decoding of a (cavity, ancilla) state; returns the
// fidelity with the maximally entangled qubit pair. Outcomes combine with
// their natural probability weights because the maps are left unnormalized.
inline double decode_and_score(const DensityMatrix& rho2a,
                               const CodeSpec& code, double theta,
                               RecoveryStyle style = RecoveryStyle::anchored) {
  code.check();
  if (rho2a.layout.size() != 2 || rho2a.layout.subsystems()[1].dim != 2)
    throw std::invalid_argument("decode_and_score: expect (cavity, ancilla)");
  int d = rho2a.layout.subsystems()[0].dim;
  if (d < code.dim())
    throw std::invalid_argument("decode_and_score: cavity cutoff below code");

  Mat rho_q = Mat::Zero(4, 4);
  for (int p : code.outcome_list()) {
    CodeSpec padded = code;
    padded.fock_cutoff = d;
    Mat k = kron(recovery_map(padded, theta, p, style), identity(2));
    rho_q += k * rho2a.matrix * k.adjoint();
  }
  Vec bell = Vec::Zero(4);
  bell(0) = bell(3) = 1.0 / std::sqrt(2.0);
  return std::real(bell.dot(rho_q * bell));
}

// Encoded pair state (logical(+) |0>_a + logical(-) |1>_a)/norm on
// (cavity, ancilla), as produced by encoding half of an entangled pair.
inline StateVector encoded_pair(const CodeSpec& code) {
  int d = code.dim();
  Vec plus = logical_state(code, +1);
  Vec minus = logical_state(code, -1);
  SpaceLayout lay({{"mode", d}, {"anc", 2}});
  Vec amps = Vec::Zero(2 * d);
  for (int n = 0; n < d; ++n) {
    amps(2 * n) = plus(n);
    amps(2 * n + 1) = minus(n);
  }
  StateVector out{lay, std::move(amps)};
  out.normalize();
  return out;
}

// Fast channel-level protocol score: ideal chiral link (exact sign-flip
// arrival), loss P in flight (thermal environment occupation n_env), then
// syndrome measurement and recovery. Matches the full cascaded run at
// beta = 1 because the ideal link is an exact map.
inline double coded_loss_fidelity(const CodeSpec& code, double P,
                                  double n_env = 0.0,
                                  RecoveryStyle style = RecoveryStyle::anchored) {
  StateVector psi = encoded_pair(code);
  int d = code.dim();
  DensityMatrix rho = pure_density(psi);
  Mat flip = kron(number_flip(d), identity(2));
  rho.matrix = flip * rho.matrix * flip.adjoint();
  if (P > 0.0 || n_env > 0.0) {
    // apply the loss channel on the cavity slot via the dilation
    int env_dim = (n_env > 0.0) ? d + 8 : d;
    DensityMatrix env = thermal_state(n_env, env_dim);
    env.layout = SpaceLayout::single("env", env_dim);
    DensityMatrix joint = kron_density(rho, env);
    const SpaceLayout& lay = joint.layout;
    double theta = std::asin(std::sqrt(P));
    Mat a = embed(annihilation_matrix(d), "mode", lay).matrix;
    Mat b = embed(annihilation_matrix(env_dim), "env", lay).matrix;
    Mat u = (theta * (a.adjoint() * b - a * b.adjoint())).exp();
    joint.matrix = u * joint.matrix * u.adjoint();
    rho = partial_trace(joint, {"mode", "anc"});
  }
  return decode_and_score(rho, code, std::asin(std::sqrt(P)), style);
}

// Full protocol score through the cascaded master equation: encode half of the
// entangled pair into node 1, run the noisy transfer, decode node 2.
inline double coded_transfer_fidelity(const NetworkSpec& net,
                                      const CodeSpec& code, double dt = 0.0,
                                      RecoveryStyle style = RecoveryStyle::anchored) {
  code.check();
  int d1 = net.nodes[0].ladder_dim();
  if (d1 < code.dim())
    throw std::invalid_argument("coded_transfer_fidelity: node cutoff < code");
  CodeSpec padded = code;
  padded.fock_cutoff = d1;
  Vec init = encoded_pair(padded).amplitudes;
  DensityMatrix red = transfer_reduced(net, init, dt);
  return decode_and_score(red, padded, net.theta, style);
}

}  // namespace chiralxfer
