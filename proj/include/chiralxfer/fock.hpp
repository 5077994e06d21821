// Truncated Fock-space and qubit linear algebra: composite layouts, ladder
// operators, partial trace, Uhlmann fidelity, coherent and thermal states.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace chiralxfer {

using Complex = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

constexpr double kHermTol = 1e-10;
constexpr double kTraceTol = 1e-8;
constexpr double kEigClamp = 1e-8;

// Ordered list of (label, dimension) subsystems. Kronecker order follows the
// list order, leftmost factor first.
class SpaceLayout {
 public:
  struct Subsystem {
    std::string label;
    int dim;
  };

  SpaceLayout() = default;
  explicit SpaceLayout(std::vector<Subsystem> subs) : subs_(std::move(subs)) {
    for (const auto& s : subs_) {
      if (s.dim < 1) throw std::invalid_argument("subsystem dimension < 1");
      for (const auto& t : subs_)
        if (&s != &t && s.label == t.label)
          throw std::invalid_argument("duplicate subsystem label: " + s.label);
    }
  }

  static SpaceLayout single(const std::string& label, int dim) {
    return SpaceLayout({{label, dim}});
  }

  const std::vector<Subsystem>& subsystems() const { return subs_; }
  std::size_t size() const { return subs_.size(); }

  int total_dim() const {
    int d = 1;
    for (const auto& s : subs_) d *= s.dim;
    return d;
  }

  int index_of(const std::string& label) const {
    for (std::size_t i = 0; i < subs_.size(); ++i)
      if (subs_[i].label == label) return static_cast<int>(i);
    throw std::invalid_argument("unknown subsystem label: " + label);
  }

  int dim_of(const std::string& label) const {
    return subs_[index_of(label)].dim;
  }

  SpaceLayout tensor(const SpaceLayout& other) const {
    std::vector<Subsystem> subs = subs_;
    subs.insert(subs.end(), other.subs_.begin(), other.subs_.end());
    return SpaceLayout(std::move(subs));
  }

  // Stride of subsystem i in the flattened index (row-major over the list).
  int stride(int i) const {
    int s = 1;
    for (std::size_t j = i + 1; j < subs_.size(); ++j) s *= subs_[j].dim;
    return s;
  }

  bool operator==(const SpaceLayout& o) const {
    if (subs_.size() != o.subs_.size()) return false;
    for (std::size_t i = 0; i < subs_.size(); ++i)
      if (subs_[i].label != o.subs_[i].label || subs_[i].dim != o.subs_[i].dim)
        return false;
    return true;
  }

 private:
  std::vector<Subsystem> subs_;
};

struct StateVector {
  SpaceLayout layout;
  Vec amplitudes;

  double norm() const { return amplitudes.norm(); }
  void normalize() {
    double n = norm();
    if (n == 0.0) throw std::runtime_error("cannot normalize zero vector");
    amplitudes /= n;
  }
};

struct LinearOperator {
  SpaceLayout layout;
  Mat matrix;
  bool sparse_hint = false;
};

struct DensityMatrix {
  SpaceLayout layout;
  Mat matrix;

  double trace_error() const { return std::abs(matrix.trace().real() - 1.0); }

  // Hermiticity, unit trace and positivity up to the stated tolerances.
  void validate(double pos_tol = kEigClamp) const {
    if ((matrix - matrix.adjoint()).cwiseAbs().maxCoeff() > 1e-8)
      throw std::runtime_error("density matrix not Hermitian");
    if (trace_error() > 1e-6)
      throw std::runtime_error("density matrix trace deviates from 1");
    Eigen::SelfAdjointEigenSolver<Mat> es(matrix, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -std::max(pos_tol, 1e-6))
      throw std::runtime_error("density matrix not positive semidefinite");
  }
};

inline Mat identity(int dim) { return Mat::Identity(dim, dim); }

inline LinearOperator annihilation(int dim) {
  if (dim < 2) throw std::invalid_argument("annihilation requires dim >= 2");
  Mat a = Mat::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(double(n));
  return {SpaceLayout::single("mode", dim), a, true};
}

inline Mat annihilation_matrix(int dim) { return annihilation(dim).matrix; }

inline Mat number_matrix(int dim) {
  Mat n = Mat::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) n(k, k) = double(k);
  return n;
}

inline Mat sigma_minus() {
  Mat s = Mat::Zero(2, 2);
  s(0, 1) = 1.0;  // |g><e|
  return s;
}

// Collective spin lowering operator on the truncated excitation ladder,
// normalized as S^- = (S^x - i S^y)/sqrt(N): S^-|n> = sqrt(n (1-(n-1)/N))|n-1>.
inline Mat collective_lowering(int n_atoms, int dim) {
  if (n_atoms < 1) throw std::invalid_argument("ensemble needs N >= 1");
  if (dim > n_atoms + 1)
    throw std::invalid_argument("ensemble cutoff exceeds N+1");
  Mat s = Mat::Zero(dim, dim);
  for (int n = 1; n < dim; ++n)
    s(n - 1, n) = std::sqrt(double(n) * (1.0 - double(n - 1) / n_atoms));
  return s;
}

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Vec kron_vec(const Vec& a, const Vec& b) {
  Vec out(a.size() * b.size());
  for (int i = 0; i < a.size(); ++i)
    out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

// Identity on every other subsystem, op at the named slot.
inline LinearOperator embed(const Mat& op, const std::string& slot,
                            const SpaceLayout& layout) {
  int idx = layout.index_of(slot);
  int d = layout.subsystems()[idx].dim;
  if (op.rows() != d || op.cols() != d)
    throw std::invalid_argument("embed: operator dimension mismatch at " + slot);
  Mat out = Mat::Ones(1, 1);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (static_cast<int>(i) == idx)
      out = kron(out, op);
    else
      out = kron(out, identity(layout.subsystems()[i].dim));
  }
  return {layout, std::move(out), true};
}

inline LinearOperator embed(const LinearOperator& op, const std::string& slot,
                            const SpaceLayout& layout) {
  return embed(op.matrix, slot, layout);
}

inline DensityMatrix partial_trace(const DensityMatrix& rho,
                                   const std::vector<std::string>& keep) {
  if (keep.empty()) throw std::invalid_argument("partial_trace: empty keep set");
  const auto& subs = rho.layout.subsystems();
  std::vector<bool> kept(subs.size(), false);
  for (const auto& label : keep) kept[rho.layout.index_of(label)] = true;

  std::vector<SpaceLayout::Subsystem> keep_subs;
  for (std::size_t i = 0; i < subs.size(); ++i)
    if (kept[i]) keep_subs.push_back(subs[i]);
  SpaceLayout out_layout(keep_subs);

  int dk = out_layout.total_dim();
  int dt = 1;  // traced dimension
  for (std::size_t i = 0; i < subs.size(); ++i)
    if (!kept[i]) dt *= subs[i].dim;

  // Map (kept multi-index, traced multi-index) -> full flat index.
  std::vector<int> keep_stride, trace_stride, keep_dim, trace_dim;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (kept[i]) {
      keep_stride.push_back(rho.layout.stride(static_cast<int>(i)));
      keep_dim.push_back(subs[i].dim);
    } else {
      trace_stride.push_back(rho.layout.stride(static_cast<int>(i)));
      trace_dim.push_back(subs[i].dim);
    }
  }
  auto flat = [](const std::vector<int>& dims, const std::vector<int>& strides,
                 int idx) {
    int off = 0;
    for (int i = static_cast<int>(dims.size()) - 1; i >= 0; --i) {
      off += (idx % dims[i]) * strides[i];
      idx /= dims[i];
    }
    return off;
  };

  Mat out = Mat::Zero(dk, dk);
  for (int r = 0; r < dk; ++r) {
    int ro = flat(keep_dim, keep_stride, r);
    for (int c = 0; c < dk; ++c) {
      int co = flat(keep_dim, keep_stride, c);
      Complex acc = 0.0;
      for (int t = 0; t < dt; ++t) {
        int to = flat(trace_dim, trace_stride, t);
        acc += rho.matrix(ro + to, co + to);
      }
      out(r, c) = acc;
    }
  }
  return {out_layout, std::move(out)};
}

// Hermitian square root with eigenvalue clamping for integrator round-off.
inline Mat hermitian_sqrt(const Mat& m, double clamp = kEigClamp) {
  Eigen::SelfAdjointEigenSolver<Mat> es((m + m.adjoint()) / 2.0);
  Eigen::VectorXd ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) {
    if (ev(i) < -clamp)
      throw std::runtime_error(
          "hermitian_sqrt: matrix not positive semidefinite (eigenvalue " +
          std::to_string(ev(i)) + ")");
    if (ev(i) < 0.0) ev(i) = 0.0;
  }
  return es.eigenvectors() *
         ev.cwiseSqrt().cast<Complex>().asDiagonal() *
         es.eigenvectors().adjoint();
}

// F = Tr(sqrt(sqrt(rho) sigma sqrt(rho)))^2
inline double uhlmann_fidelity(const DensityMatrix& rho,
                               const DensityMatrix& sigma) {
  if (!(rho.layout == sigma.layout))
    throw std::invalid_argument("uhlmann_fidelity: layout mismatch");
  Mat sr = hermitian_sqrt(rho.matrix);
  Mat inner = hermitian_sqrt(sr * sigma.matrix * sr);
  double f = inner.trace().real();
  f = f * f;
  return std::clamp(f, 0.0, 1.0 + 1e-9);
}

inline double state_fidelity(const DensityMatrix& rho, const StateVector& psi) {
  if (!(rho.layout == psi.layout))
    throw std::invalid_argument("state_fidelity: layout mismatch");
  return std::real(psi.amplitudes.dot(rho.matrix * psi.amplitudes));
}

inline StateVector coherent_state(Complex alpha, int dim,
                                  double* renorm = nullptr) {
  if (dim < 1) throw std::invalid_argument("coherent_state: dim < 1");
  Vec amps(dim);
  Complex term = 1.0;
  amps(0) = term;
  for (int n = 1; n < dim; ++n) {
    term *= alpha / std::sqrt(double(n));
    amps(n) = term;
  }
  double n0 = amps.norm();
  // exact norm would be exp(|alpha|^2/2); report the truncation renormalization
  if (renorm) *renorm = n0 / std::exp(std::norm(alpha) / 2.0);
  amps /= n0;
  return {SpaceLayout::single("mode", dim), std::move(amps)};
}

inline DensityMatrix thermal_state(double n_th, int dim,
                                   double* renorm = nullptr) {
  if (n_th < 0.0) throw std::invalid_argument("thermal_state: n_th < 0");
  if (dim < 1) throw std::invalid_argument("thermal_state: dim < 1");
  Mat rho = Mat::Zero(dim, dim);
  if (n_th == 0.0) {
    rho(0, 0) = 1.0;
    if (renorm) *renorm = 1.0;
    return {SpaceLayout::single("mode", dim), std::move(rho)};
  }
  double q = n_th / (1.0 + n_th);
  double p = 1.0, tot = 0.0;
  for (int n = 0; n < dim; ++n) {
    rho(n, n) = p;
    tot += p;
    p *= q;
  }
  rho /= tot;
  // kept weight of the untruncated geometric distribution
  if (renorm) *renorm = 1.0 - std::pow(q, dim);
  return {SpaceLayout::single("mode", dim), std::move(rho)};
}

inline StateVector basis_state(const SpaceLayout& layout,
                               const std::vector<int>& occ) {
  if (occ.size() != layout.size())
    throw std::invalid_argument("basis_state: occupation list size mismatch");
  int idx = 0;
  for (std::size_t i = 0; i < occ.size(); ++i) {
    if (occ[i] < 0 || occ[i] >= layout.subsystems()[i].dim)
      throw std::invalid_argument("basis_state: occupation out of range");
    idx += occ[i] * layout.stride(static_cast<int>(i));
  }
  Vec amps = Vec::Zero(layout.total_dim());
  amps(idx) = 1.0;
  return {layout, std::move(amps)};
}

inline DensityMatrix pure_density(const StateVector& psi) {
  return {psi.layout, psi.amplitudes * psi.amplitudes.adjoint()};
}

inline DensityMatrix kron_density(const DensityMatrix& a,
                                  const DensityMatrix& b) {
  return {a.layout.tensor(b.layout), kron(a.matrix, b.matrix)};
}

// Hermitize and clamp tiny negative eigenvalues; used after long integrations.
inline DensityMatrix sanitize(const DensityMatrix& rho,
                              double clamp = kEigClamp) {
  Mat h = (rho.matrix + rho.matrix.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  Eigen::VectorXd ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i)
    if (ev(i) < 0.0 && ev(i) > -clamp) ev(i) = 0.0;
  Mat out = es.eigenvectors() * ev.cast<Complex>().asDiagonal() *
            es.eigenvectors().adjoint();
  out /= out.trace().real();
  return {rho.layout, std::move(out)};
}

}  // namespace chiralxfer
