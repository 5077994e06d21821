// Matrix-product-state integrator in the time-bin picture: the waveguide is a
// chain of field increments, node tensors travel through the chain by
// nearest-neighbor swaps, thermal input is handled by purifying each bin with
// an auxiliary twin, and partial chirality adds a delayed left-moving lane.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "chiralxfer/fock.hpp"
#include "chiralxfer/lindblad.hpp"
#include "chiralxfer/pulses.hpp"

namespace chiralxfer {

struct TimeGrid {
  double dt = 0.05;  // in 1/kappa_max units when kappa_max = 1
  int bins = 400;
  int delay = 1;  // retardation in bins; tau = delay * dt
  int bin_dim = 3;

  void check(double kappa_max) const {
    if (bins < 1) throw std::invalid_argument("grid needs at least one bin");
    if (kappa_max * dt > 0.1 + 1e-12)
      throw std::invalid_argument("kappa_max * dt must be <= 0.1");
    if (delay < 0) throw std::invalid_argument("delay < 0");
    if (bin_dim < 2) throw std::invalid_argument("bin_dim < 2");
  }
};

struct TimeBinSpec {
  NetworkSpec net;  // two nodes; beta, phi, n_th honored here
  TimeGrid grid;
  int max_bond = 32;
  double trunc_threshold = 1e-10;

  void check() const {
    if (net.nodes.size() != 2)
      throw std::invalid_argument("time-bin engine handles two nodes");
    net.check();
    grid.check(net.pulses.kappa_max);
    if (net.beta < 1.0 && grid.delay < 1)
      throw std::invalid_argument("partial chirality needs delay >= 1");
    if (std::abs(grid.bins * grid.dt - net.pulses.duration()) > 1e-9)
      throw std::invalid_argument("bins * dt must equal the pulse window");
    if (max_bond < 1 || trunc_threshold < 0.0)
      throw std::invalid_argument("bad truncation parameters");
  }
};

// Open-boundary MPS with named sites. Tensor at site i is stored as one
// chiL x chiR matrix per physical index. A mixed-canonical form is maintained:
// sites left of the center are left-isometries, sites right of it right ones.
class MPSState {
 public:
  struct Site {
    std::string label;
    int dim;
    std::vector<Mat> g;  // g[s]: chiL x chiR
  };

  MPSState() = default;
  explicit MPSState(std::vector<Site> sites, int max_bond,
                    double trunc_threshold)
      : sites_(std::move(sites)),
        max_bond_(max_bond),
        thresh_(trunc_threshold) {}

  int size() const { return static_cast<int>(sites_.size()); }
  const Site& site(int i) const { return sites_[i]; }
  int center() const { return center_; }
  double truncation_weight() const { return trunc_weight_; }
  int max_bond_used() const { return max_bond_used_; }

  int find(const std::string& label) const {
    for (int i = 0; i < size(); ++i)
      if (sites_[i].label == label) return i;
    throw std::invalid_argument("no MPS site labeled " + label);
  }

  int bond_after(int i) const { return sites_[i].g[0].cols(); }

  // Move the orthogonality center to site i (exact, no truncation).
  void position(int i) {
    while (center_ < i) shift_right(center_);
    while (center_ > i) shift_left(center_);
  }

  // Two-site gate on (i, i+1); u indexed (s*dimB + t). Center ends on site i
  // when keep_left, else on i+1.
  void apply_adjacent(int i, const Mat& u, bool keep_left = false) {
    to_pair(i);
    Site& a = sites_[i];
    Site& b = sites_[i + 1];
    int da = a.dim, db = b.dim;
    long chiL = a.g[0].rows(), chiR = b.g[0].cols();
    Mat big(da * chiL, db * chiR);
    std::vector<Mat> theta(da * db);
    for (int s = 0; s < da; ++s)
      for (int t = 0; t < db; ++t) theta[s * db + t] = a.g[s] * b.g[t];
    for (int sp = 0; sp < da; ++sp)
      for (int tp = 0; tp < db; ++tp) {
        Mat blk = Mat::Zero(chiL, chiR);
        for (int s = 0; s < da; ++s)
          for (int t = 0; t < db; ++t) {
            Complex c = u(sp * db + tp, s * db + t);
            if (c != Complex(0)) blk += c * theta[s * db + t];
          }
        big.block(sp * chiL, tp * chiR, chiL, chiR) = blk;
      }
    split(i, big, da, db, chiL, chiR, keep_left, true);
  }

  // Exchange sites i and i+1 (with truncation; a swap changes the cut).
  void swap_adjacent(int i) {
    to_pair(i);
    Site& a = sites_[i];
    Site& b = sites_[i + 1];
    int da = a.dim, db = b.dim;
    long chiL = a.g[0].rows(), chiR = b.g[0].cols();
    Mat big(db * chiL, da * chiR);
    for (int s = 0; s < da; ++s)
      for (int t = 0; t < db; ++t)
        big.block(t * chiL, s * chiR, chiL, chiR) = a.g[s] * b.g[t];
    std::swap(a.label, b.label);
    std::swap(a.dim, b.dim);
    split(i, big, db, da, chiL, chiR, false, true);
  }

  // Move the site at `from` so it ends at index `to` (shifting the others).
  void move_site(int from, int to) {
    while (from < to) swap_adjacent(from++);
    while (from > to) swap_adjacent(--from);
  }

  double norm() const {
    Mat e = Mat::Identity(1, 1);
    for (const auto& s : sites_) {
      Mat next = Mat::Zero(s.g[0].cols(), s.g[0].cols());
      for (const auto& g : s.g) next += g.transpose() * e * g.conjugate();
      e = std::move(next);
    }
    return std::sqrt(std::abs(e(0, 0)));
  }

  // Reduced density matrix on the named sites, in the order given.
  // Exploits the canonical form: everything left of the center and right of
  // the last kept site contracts to the identity.
  DensityMatrix reduced_density(const std::vector<std::string>& labels) {
    if (labels.empty()) throw std::invalid_argument("no sites requested");
    std::vector<int> keep;
    for (const auto& l : labels) keep.push_back(find(l));
    std::vector<int> order(keep.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = (int)i;
    std::sort(order.begin(), order.end(),
              [&](int x, int y) { return keep[x] < keep[y]; });
    int first = keep[order.front()], last = keep[order.back()];
    position(first);

    // env[p*D + q] is the chi x chi environment for kept-index pair (p, q)
    long chi = sites_[first].g[0].rows();
    int D = 1;
    std::vector<Mat> env{Mat::Identity(chi, chi)};
    std::vector<int> kept_dims;
    for (int i = first; i <= last; ++i) {
      const Site& s = sites_[i];
      bool is_kept = std::find(keep.begin(), keep.end(), i) != keep.end();
      int d = s.dim;
      long cr = s.g[0].cols();
      if (is_kept) {
        std::vector<Mat> next(static_cast<std::size_t>(D) * d * D * d);
        for (int p = 0; p < D; ++p)
          for (int q = 0; q < D; ++q)
            for (int sp = 0; sp < d; ++sp)
              for (int sq = 0; sq < d; ++sq)
                next[(p * d + sp) * (D * d) + (q * d + sq)] =
                    s.g[sp].transpose() * env[p * D + q] * s.g[sq].conjugate();
        env = std::move(next);
        D *= d;
        kept_dims.push_back(d);
      } else {
        std::vector<Mat> next(static_cast<std::size_t>(D) * D);
        for (int p = 0; p < D * D; ++p) {
          Mat acc = Mat::Zero(cr, cr);
          for (int sp = 0; sp < d; ++sp)
            acc += s.g[sp].transpose() * env[p] * s.g[sp].conjugate();
          next[p] = std::move(acc);
        }
        env = std::move(next);
      }
    }
    Mat rho(D, D);
    for (int p = 0; p < D; ++p)
      for (int q = 0; q < D; ++q) rho(p, q) = env[p * D + q].trace();

    // reorder from chain order to the requested order
    std::vector<int> chain_of(order.size());
    for (std::size_t r = 0; r < order.size(); ++r) chain_of[order[r]] = (int)r;
    std::vector<SpaceLayout::Subsystem> subs;
    for (std::size_t i = 0; i < labels.size(); ++i)
      subs.push_back({labels[i], sites_[keep[i]].dim});
    SpaceLayout lay(subs);
    Mat out = Mat::Zero(D, D);
    std::vector<int> occ(labels.size());
    perm_.assign(D, 0);
    for (int idx = 0; idx < D; ++idx) {
      int rem = idx;
      std::vector<int> chain_occ(order.size());
      for (std::size_t r = order.size(); r-- > 0;) {
        chain_occ[r] = rem % kept_dims[r];
        rem /= kept_dims[r];
      }
      for (std::size_t i = 0; i < labels.size(); ++i)
        occ[i] = chain_occ[chain_of[i]];
      int tgt = 0;
      for (std::size_t i = 0; i < labels.size(); ++i)
        tgt += occ[i] * lay.stride((int)i);
      perm_[idx] = tgt;
    }
    for (int p = 0; p < D; ++p)
      for (int q = 0; q < D; ++q) out(perm_[p], perm_[q]) = rho(p, q);
    return {lay, std::move(out)};
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write snapshot: " + path);
    auto w32 = [&](std::uint32_t v) { out.write((const char*)&v, 4); };
    out.write("CXMP", 4);
    w32(1);  // version
    w32(static_cast<std::uint32_t>(sites_.size()));
    w32(static_cast<std::uint32_t>(center_));
    for (const auto& s : sites_) {
      w32(static_cast<std::uint32_t>(s.label.size()));
      out.write(s.label.data(), s.label.size());
      w32(static_cast<std::uint32_t>(s.dim));
      w32(static_cast<std::uint32_t>(s.g[0].rows()));
      w32(static_cast<std::uint32_t>(s.g[0].cols()));
      for (const auto& g : s.g)
        out.write(reinterpret_cast<const char*>(g.data()),
                  sizeof(Complex) * g.size());
    }
  }

  static MPSState load(const std::string& path, int max_bond = 32,
                       double trunc_threshold = 1e-10) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read snapshot: " + path);
    char magic[4];
    in.read(magic, 4);
    auto r32 = [&]() {
      std::uint32_t v = 0;
      in.read((char*)&v, 4);
      return v;
    };
    if (std::string(magic, 4) != "CXMP" || r32() != 1)
      throw std::runtime_error("bad snapshot header");
    std::uint32_t n = r32();
    std::uint32_t center = r32();
    std::vector<Site> sites;
    for (std::uint32_t i = 0; i < n; ++i) {
      Site s;
      std::uint32_t len = r32();
      s.label.resize(len);
      in.read(s.label.data(), len);
      s.dim = static_cast<int>(r32());
      long rows = r32(), cols = r32();
      s.g.assign(s.dim, Mat(rows, cols));
      for (auto& g : s.g)
        in.read(reinterpret_cast<char*>(g.data()), sizeof(Complex) * g.size());
      sites.push_back(std::move(s));
    }
    if (!in) throw std::runtime_error("truncated snapshot: " + path);
    MPSState st(std::move(sites), max_bond, trunc_threshold);
    st.center_ = static_cast<int>(center);
    return st;
  }

 private:
  void to_pair(int i) {
    if (center_ < i) position(i);
    if (center_ > i + 1) position(i + 1);
  }

  void shift_right(int i) {
    Site& s = sites_[i];
    long chiL = s.g[0].rows(), chiR = s.g[0].cols();
    Mat big(s.dim * chiL, chiR);
    for (int p = 0; p < s.dim; ++p) big.block(p * chiL, 0, chiL, chiR) = s.g[p];
    Eigen::BDCSVD<Mat> svd(big, Eigen::ComputeThinU | Eigen::ComputeThinV);
    long k = svd.rank() > 0 ? svd.rank() : 1;
    Mat u = svd.matrixU().leftCols(k);
    Mat carry = svd.singularValues().head(k).asDiagonal() *
                svd.matrixV().leftCols(k).adjoint().eval();
    for (int p = 0; p < s.dim; ++p) s.g[p] = u.block(p * chiL, 0, chiL, k);
    Site& nxt = sites_[i + 1];
    for (auto& g : nxt.g) g = (carry * g).eval();
    ++center_;
  }

  void shift_left(int i) {
    Site& s = sites_[i];
    long chiL = s.g[0].rows(), chiR = s.g[0].cols();
    Mat big(chiL, s.dim * chiR);
    for (int p = 0; p < s.dim; ++p) big.block(0, p * chiR, chiL, chiR) = s.g[p];
    Eigen::BDCSVD<Mat> svd(big, Eigen::ComputeThinU | Eigen::ComputeThinV);
    long k = svd.rank() > 0 ? svd.rank() : 1;
    Mat v = svd.matrixV().leftCols(k).adjoint();
    Mat carry = svd.matrixU().leftCols(k) *
                svd.singularValues().head(k).asDiagonal().toDenseMatrix();
    for (int p = 0; p < s.dim; ++p) s.g[p] = v.block(0, p * chiR, k, chiR);
    Site& prv = sites_[i - 1];
    for (auto& g : prv.g) g = (g * carry).eval();
    --center_;
  }

  // SVD-split `big` (da*chiL x db*chiR, row index s*chiL + l) back into sites
  // i, i+1 with truncation.
  void split(int i, const Mat& big, int da, int db, long chiL, long chiR,
             bool keep_left, bool truncate) {
    Eigen::BDCSVD<Mat> svd(big, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    double total = sv.squaredNorm();
    long k = sv.size();
    if (truncate && total > 0.0) {
      double cut = thresh_ * total;
      while (k > 1 && (sv(k - 1) * sv(k - 1) < cut || k > max_bond_)) --k;
      double kept = sv.head(k).squaredNorm();
      trunc_weight_ += (total - kept) / total;
    }
    max_bond_used_ = std::max<int>(max_bond_used_, static_cast<int>(k));
    Mat u = svd.matrixU().leftCols(k);
    Mat vt = svd.matrixV().leftCols(k).adjoint();
    Mat sdiag = sv.head(k).asDiagonal();
    Site& a = sites_[i];
    Site& b = sites_[i + 1];
    a.dim = da;
    b.dim = db;
    a.g.assign(da, Mat());
    b.g.assign(db, Mat());
    if (keep_left) {
      Mat us = u * sdiag;
      for (int s = 0; s < da; ++s) a.g[s] = us.block(s * chiL, 0, chiL, k);
      for (int t = 0; t < db; ++t) b.g[t] = vt.block(0, t * chiR, k, chiR);
      center_ = i;
    } else {
      Mat svt = sdiag * vt;
      for (int s = 0; s < da; ++s) a.g[s] = u.block(s * chiL, 0, chiL, k);
      for (int t = 0; t < db; ++t) b.g[t] = svt.block(0, t * chiR, k, chiR);
      center_ = i + 1;
    }
  }

  std::vector<Site> sites_;
  int center_ = 0;
  int max_bond_ = 32;
  double thresh_ = 1e-10;
  double trunc_weight_ = 0.0;
  int max_bond_used_ = 1;
  std::vector<int> perm_;
};

namespace detail {

inline MPSState::Site product_site(const std::string& label, const Vec& amps) {
  MPSState::Site s;
  s.label = label;
  s.dim = static_cast<int>(amps.size());
  for (int i = 0; i < s.dim; ++i)
    s.g.push_back(Mat::Constant(1, 1, amps(i)));
  return s;
}

// Purified thermal bin pair in Schmidt form: |psi> = sum_n w_n |n>|n> with
// w_n ~ q^{n/2}, q = n_th/(1+n_th), renormalized on the truncated ladder.
inline std::pair<MPSState::Site, MPSState::Site> purified_bin(
    const std::string& label, int dim, double n_th) {
  double q = n_th / (1.0 + n_th);
  Eigen::VectorXd w(dim);
  for (int n = 0; n < dim; ++n) w(n) = std::pow(q, n / 2.0);
  w /= w.norm();
  MPSState::Site real, aux;
  real.label = label;
  aux.label = "x" + label;
  real.dim = aux.dim = dim;
  for (int n = 0; n < dim; ++n) {
    Mat r = Mat::Zero(1, dim);
    r(0, n) = w(n);
    real.g.push_back(std::move(r));
    Mat a = Mat::Zero(dim, 1);
    a(n, 0) = 1.0;
    aux.g.push_back(std::move(a));
  }
  return {std::move(real), std::move(aux)};
}

}  // namespace detail

// Chain order: [anc?] [n2] [n1] then per bin k: r_k (+ aux), and for beta < 1
// l_k (+ aux). Node 1 and the ancilla start entangled when the ancilla is on.
inline MPSState init_thermal_mps(const TimeBinSpec& spec) {
  spec.check();
  const NetworkSpec& net = spec.net;
  int d1 = net.nodes[0].ladder_dim();
  int d2 = net.nodes[1].ladder_dim();
  std::vector<MPSState::Site> sites;

  if (net.include_ancilla) {
    // (|0>_1|0>_a + |1>_1|1>_a)/sqrt(2), carried on the bond through n2
    MPSState::Site anc;
    anc.label = "anc";
    anc.dim = 2;
    for (int s = 0; s < 2; ++s) {
      Mat g = Mat::Zero(1, 2);
      g(0, s) = 1.0 / std::sqrt(2.0);
      anc.g.push_back(std::move(g));
    }
    sites.push_back(std::move(anc));

    MPSState::Site n2;
    n2.label = "n2";
    n2.dim = d2;
    n2.g.push_back(Mat::Identity(2, 2));
    for (int s = 1; s < d2; ++s) n2.g.push_back(Mat::Zero(2, 2));
    sites.push_back(std::move(n2));

    MPSState::Site n1;
    n1.label = "n1";
    n1.dim = d1;
    for (int s = 0; s < d1; ++s) {
      Mat g = Mat::Zero(2, 1);
      if (s < 2) g(s, 0) = 1.0;
      n1.g.push_back(std::move(g));
    }
    sites.push_back(std::move(n1));
  } else {
    Vec vac2 = Vec::Zero(d2);
    vac2(0) = 1.0;
    sites.push_back(detail::product_site("n2", vac2));
    Vec one1 = Vec::Zero(d1);
    one1(std::min(1, d1 - 1)) = 1.0;  // single excitation in node 1
    sites.push_back(detail::product_site("n1", one1));
  }

  Vec vac_bin = Vec::Zero(spec.grid.bin_dim);
  vac_bin(0) = 1.0;
  for (int k = 1; k <= spec.grid.bins; ++k) {
    auto add_lane = [&](const std::string& base) {
      std::string label = base + std::to_string(k);
      if (net.n_th > 0.0) {
        auto [r, x] = detail::purified_bin(label, spec.grid.bin_dim, net.n_th);
        sites.push_back(std::move(r));
        sites.push_back(std::move(x));
      } else {
        sites.push_back(detail::product_site(label, vac_bin));
      }
    };
    add_lane("r");
    if (net.beta < 1.0) add_lane("l");
  }
  return MPSState(std::move(sites), spec.max_bond, spec.trunc_threshold);
}

// Unitary for one node-bin interaction slice: exp(amp b^+ a - conj(amp) a^+ b)
// on (node, bin) with the node on the left.
inline Mat bin_coupling_gate(const Mat& lower, int bin_dim, Complex amp) {
  int dn = static_cast<int>(lower.rows());
  Mat b = annihilation_matrix(bin_dim);
  Mat gen = Mat::Zero(dn * bin_dim, dn * bin_dim);
  gen += amp * kron(lower, Mat(b.adjoint()));
  gen -= std::conj(amp) * kron(Mat(lower.adjoint()), b);
  return gen.exp();
}

// One sweep of the protocol. Node 2's clock runs tau = delay*dt behind, so its
// couplings sample kappa2 at the emission time of the bin it absorbs.
class TimeBinRun {
 public:
  explicit TimeBinRun(const TimeBinSpec& spec)
      : spec_(spec), st_(init_thermal_mps(spec)) {
    low1_ = node_lowering(spec.net.nodes[0]);
    low2_ = node_lowering(spec.net.nodes[1]);
  }

  MPSState& state() { return st_; }
  const TimeBinSpec& spec() const { return spec_; }

  void step(int p) {
    const NetworkSpec& net = spec_.net;
    const TimeGrid& g = spec_.grid;
    int k2 = p - g.delay;
    bool act1 = p >= 1 && p <= g.bins;
    bool act2 = k2 >= 1 && k2 <= g.bins;
    double t1 = net.pulses.t_i + (p - 0.5) * g.dt;
    double t2 = net.pulses.t_i + (k2 - 0.5) * g.dt;
    double beta = net.beta;

    // trailing region first, then the leading region
    if (act2)
      gate("n2", "r" + std::to_string(k2),
           std::sqrt(beta * kappa2(t2, net.pulses) * g.dt), low2_);
    if (beta < 1.0 && act1 && act2)
      gate("n1", "l" + std::to_string(k2),
           std::sqrt((1.0 - beta) * kappa1(t1, net.pulses) * g.dt), low1_);
    if (act1)
      gate("n1", "r" + std::to_string(p),
           std::sqrt(beta * kappa1(t1, net.pulses) * g.dt), low1_);
    if (beta < 1.0 && act1 && act2)
      gate("n2", "l" + std::to_string(p),
           std::sqrt((1.0 - beta) * kappa2(t2, net.pulses) * g.dt) *
               std::exp(Complex(0, 2.0 * net.phi)),
           low2_);
  }

  void run() {
    for (int p = 1; p <= spec_.grid.bins + spec_.grid.delay; ++p) step(p);
  }

  DensityMatrix reduced(const std::vector<std::string>& labels) {
    return st_.reduced_density(labels);
  }

  double fidelity() {
    DensityMatrix red = sanitize(reduced({"n2", "anc"}), 1e-4);
    return state_fidelity(red, bell_target(spec_.net.nodes[1].ladder_dim()));
  }

 private:
  void gate(const std::string& node, const std::string& bin, Complex amp,
            const Mat& lower) {
    if (amp == Complex(0)) return;
    int bi = st_.find(bin);
    int ni = st_.find(node);
    if (ni < bi - 1) {
      st_.move_site(ni, bi - 1);
      ni = bi - 1;
    } else if (ni > bi - 1) {
      st_.move_site(ni, bi);  // target shifts left by one while passing
      ni = bi;
    }
    st_.apply_adjacent(ni, bin_coupling_gate(lower, spec_.grid.bin_dim, amp));
  }

  TimeBinSpec spec_;
  MPSState st_;
  Mat low1_, low2_;
};

inline double mps_qst_fidelity(const TimeBinSpec& spec) {
  TimeBinRun run(spec);
  run.run();
  return run.fidelity();
}

}  // namespace chiralxfer
