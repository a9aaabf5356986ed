#pragma once

#include <Eigen/SparseCore>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cstring>
#include <vector>

#include "qlbm/common.hpp"
#include "qlbm/lattice.hpp"

namespace qlbm {

/// d^e for small integer bases with overflow detection.
inline long long ipow(long long d, int e) {
  long long r = 1;
  for (int i = 0; i < e; ++i) {
    require(r <= (1LL << 62) / d, "integer power overflow");
    r *= d;
  }
  return r;
}

/// Linear and quadratic collision contributions of one lattice site.
struct CollisionMatrices {
  int q = 0;
  double tau_bar_star = 1.0;
  std::vector<double> f1;  ///< Q x Q, row-major: F1~[m][m1]
  std::vector<double> f2;  ///< Q x Q^2, row-major: F2~[m][m1*Q+m2]
};

/// Assemble the site-local collision matrices for relaxation time tau.
inline CollisionMatrices build_collision_matrices(const VelocityModel& vm,
                                                  double tau) {
  require(tau > 0.0, "relaxation time must be positive");
  CollisionMatrices cm;
  cm.q = vm.q;
  cm.tau_bar_star = tau;
  const int q = vm.q;
  cm.f1.assign(static_cast<std::size_t>(q) * q, 0.0);
  cm.f2.assign(static_cast<std::size_t>(q) * q * q, 0.0);
  for (int m = 0; m < q; ++m) {
    for (int m1 = 0; m1 < q; ++m1) {
      double em = vm.gram[m * q + m1];
      cm.f1[m * q + m1] =
          (vm.w[m] + 3.0 * vm.w[m] * em - (m == m1 ? 1.0 : 0.0)) / tau;
      for (int m2 = 0; m2 < q; ++m2) {
        double e1 = vm.gram[m * q + m1];
        double e2 = vm.gram[m * q + m2];
        double e12 = vm.gram[m1 * q + m2];
        cm.f2[(m * q + m1) * q + m2] =
            vm.w[m] / tau * (4.5 * e1 * e2 - 1.5 * e12);
      }
    }
  }
  return cm;
}

/// Truncated Carleman vector: blocks y_k of length d^k for k = 1..N_C.
struct CarlemanVector {
  long long d = 0;  ///< base dimension N*Q
  int n_c = 1;      ///< truncation order
  std::vector<std::vector<double>> blocks;

  long long total_dim() const {
    long long s = 0;
    for (int k = 1; k <= n_c; ++k) s += ipow(d, k);
    return s;
  }
  double norm() const {
    double s = 0.0;
    for (const auto& b : blocks) s += dot(b, b);
    return std::sqrt(s);
  }
};

/// Total Carleman dimension d (d^{N_C} - 1)/(d - 1) as a real number,
/// safe for capacity estimates of instances too large to allocate.
inline double carleman_dim(double d, int n_c) {
  double s = 0.0, p = 1.0;
  for (int k = 1; k <= n_c; ++k) {
    p *= d;
    s += p;
  }
  return s;
}

/// Estimated bytes to hold one Carleman vector plus operator scratch.
inline double carleman_bytes(double d, int n_c) {
  double p = 1.0;
  for (int k = 0; k < n_c; ++k) p *= d;
  return 8.0 * (carleman_dim(d, n_c) + 3.0 * p);
}

/// Initial Carleman vector: y_k = g tensor-power k.
inline CarlemanVector carleman_initial(const std::vector<double>& g, int n_c,
                                       double max_bytes = 8.0 * (1ULL << 30)) {
  const long long d = static_cast<long long>(g.size());
  require(d >= 1, "empty state");
  require(n_c >= 1, "truncation order must be positive");
  double need = 8.0 * carleman_dim(static_cast<double>(d), n_c);
  if (need > max_bytes)
    throw capacity_error("Carleman vector exceeds the memory budget", need);

  CarlemanVector y;
  y.d = d;
  y.n_c = n_c;
  y.blocks.resize(n_c);
  y.blocks[0] = g;
  for (int k = 2; k <= n_c; ++k) {
    const auto& prev = y.blocks[k - 2];
    auto& cur = y.blocks[k - 1];
    cur.assign(prev.size() * g.size(), 0.0);
    std::size_t idx = 0;
    for (double a : prev)
      for (double b : g) cur[idx++] = a * b;
  }
  return y;
}

/// Truncated Carleman step operator: collision blocks
///   C^k_l = sum over slot patterns of ordered tensor products of
///           (l - k) copies of F2 and (2k - l) copies of (I + F1),
/// followed by block-diagonal streaming S^(tensor k).  All applications are
/// matrix-free; an instance carries mutable scratch, so use one per thread.
class CarlemanOperator {
 public:
  CarlemanOperator(const VelocityModel& vm, const Geometry& geom, double tau,
                   int n_c, double max_bytes = 8.0 * (1ULL << 30))
      : vm_(vm), geom_(geom), cm_(build_collision_matrices(vm, tau)),
        n_c_(n_c), nsites_(geom.sites()),
        d_(geom.sites() * vm.q) {
    require(n_c >= 1, "truncation order must be positive");
    double need = carleman_bytes(static_cast<double>(d_), n_c);
    if (need > max_bytes)
      throw capacity_error("Carleman operator exceeds the memory budget", need);

    dims_.resize(n_c_ + 1);
    off_.resize(n_c_ + 2);
    dims_[0] = 1;
    off_[1] = 0;
    for (int k = 1; k <= n_c_; ++k) {
      dims_[k] = ipow(d_, k);
      off_[k + 1] = off_[k] + dims_[k];
    }
    const int q = vm_.q;
    ipf1_.assign(static_cast<std::size_t>(q) * q, 0.0);
    ipf1_t_.assign(static_cast<std::size_t>(q) * q, 0.0);
    for (int a = 0; a < q; ++a)
      for (int b = 0; b < q; ++b) {
        ipf1_[a * q + b] = cm_.f1[a * q + b] + (a == b ? 1.0 : 0.0);
        ipf1_t_[b * q + a] = ipf1_[a * q + b];
      }
    dest_ = stream_permutation(vm_, geom_);
    inv_dest_.resize(dest_.size());
    for (std::size_t i = 0; i < dest_.size(); ++i)
      inv_dest_[static_cast<std::size_t>(dest_[i])] = static_cast<long long>(i);

    buf_a_.resize(static_cast<std::size_t>(dims_[n_c_]));
    buf_b_.resize(static_cast<std::size_t>(dims_[n_c_]));
    buf_c_.resize(static_cast<std::size_t>(dims_[n_c_]));
  }

  int truncation() const { return n_c_; }
  long long base_dim() const { return d_; }
  long long total_dim() const { return off_[n_c_ + 1]; }
  long long block_dim(int k) const { return dims_[k]; }
  long long block_offset(int k) const { return off_[k]; }
  const VelocityModel& model() const { return vm_; }
  const Geometry& geometry() const { return geom_; }
  const CollisionMatrices& matrices() const { return cm_; }

  /// out += (collision truncated to N_C) applied to y, both flat of
  /// length total_dim(); `out` must be zero-initialized by the caller.
  void accumulate_collision(const double* y, double* out) const {
    for (int k = 1; k <= n_c_; ++k) {
      double* outk = out + off_[k];
      const int lmax = std::min(2 * k, n_c_);
      for (int l = k; l <= lmax; ++l)
        accumulate_block(k, l, y + off_[l], outk, false);
    }
  }

  /// out += (truncated collision)^dagger applied to y.
  void accumulate_collision_adjoint(const double* y, double* out) const {
    for (int k = 1; k <= n_c_; ++k) {
      const double* yk = y + off_[k];
      const int lmax = std::min(2 * k, n_c_);
      for (int l = k; l <= lmax; ++l)
        accumulate_block(k, l, yk, out + off_[l], true);
    }
  }

  /// Streaming of block k in place (S applied to every tensor mode).
  void stream_block(int k, double* x) const {
    double* cur = x;
    double* other = buf_a_.data();
    for (int p = 0; p < k; ++p) {
      stream_mode(cur, other, k, p, false);
      std::swap(cur, other);
    }
    if (cur != x)
      std::memcpy(x, cur, sizeof(double) * static_cast<std::size_t>(dims_[k]));
  }

  void stream_block_adjoint(int k, double* x) const {
    double* cur = x;
    double* other = buf_a_.data();
    for (int p = 0; p < k; ++p) {
      stream_mode(cur, other, k, p, true);
      std::swap(cur, other);
    }
    if (cur != x)
      std::memcpy(x, cur, sizeof(double) * static_cast<std::size_t>(dims_[k]));
  }

  /// Full step: out = S C y (flat vectors of length total_dim()).
  void apply_step(const double* y, double* out) const {
    std::memset(out, 0, sizeof(double) * static_cast<std::size_t>(total_dim()));
    accumulate_collision(y, out);
    for (int k = 1; k <= n_c_; ++k) stream_block(k, out + off_[k]);
  }

  /// Adjoint step: out = (S C)^dagger y = C^dagger S^dagger y.
  void apply_step_adjoint(const double* y, double* out) const {
    std::memset(out, 0, sizeof(double) * static_cast<std::size_t>(total_dim()));
    for (int k = 1; k <= n_c_; ++k) {
      std::memcpy(buf_c_.data(), y + off_[k],
                  sizeof(double) * static_cast<std::size_t>(dims_[k]));
      stream_block_adjoint(k, buf_c_.data());
      const int lmax = std::min(2 * k, n_c_);
      for (int l = k; l <= lmax; ++l)
        accumulate_block(k, l, buf_c_.data(), out + off_[l], true);
    }
  }

  /// Convenience wrappers on block vectors.
  CarlemanVector apply(const CarlemanVector& y) const {
    std::vector<double> in = flatten(y), out(in.size());
    apply_step(in.data(), out.data());
    return unflatten(out);
  }
  CarlemanVector apply_adjoint(const CarlemanVector& y) const {
    std::vector<double> in = flatten(y), out(in.size());
    apply_step_adjoint(in.data(), out.data());
    return unflatten(out);
  }
  CarlemanVector apply_collision(const CarlemanVector& y) const {
    std::vector<double> in = flatten(y), out(in.size(), 0.0);
    accumulate_collision(in.data(), out.data());
    return unflatten(out);
  }

  std::vector<double> flatten(const CarlemanVector& y) const {
    require(y.d == d_ && y.n_c == n_c_, "Carleman vector shape mismatch");
    std::vector<double> f(static_cast<std::size_t>(total_dim()));
    for (int k = 1; k <= n_c_; ++k)
      std::memcpy(f.data() + off_[k], y.blocks[k - 1].data(),
                  sizeof(double) * static_cast<std::size_t>(dims_[k]));
    return f;
  }
  CarlemanVector unflatten(const std::vector<double>& f) const {
    CarlemanVector y;
    y.d = d_;
    y.n_c = n_c_;
    y.blocks.resize(n_c_);
    for (int k = 1; k <= n_c_; ++k)
      y.blocks[k - 1].assign(f.data() + off_[k], f.data() + off_[k] + dims_[k]);
    return y;
  }

 private:
  /// Accumulate one collision block: out += C^k_l x (forward) or
  /// out += (C^k_l)^dagger x (adjoint).  Enumerates the C(k, l-k) slot
  /// patterns; each pattern is an ordered tensor product over k slots.
  void accumulate_block(int k, int l, const double* x, double* out,
                        bool adjoint) const {
    const int nf2 = l - k;  // number of F2 slots
    std::vector<int> pos(nf2);
    for (int i = 0; i < nf2; ++i) pos[i] = i;
    while (true) {
      std::vector<bool> is_f2(static_cast<std::size_t>(k), false);
      for (int i = 0; i < nf2; ++i) is_f2[static_cast<std::size_t>(pos[i])] = true;
      if (adjoint)
        term_adjoint(is_f2, k, l, x, out);
      else
        term_forward(is_f2, k, l, x, out);
      // next combination of nf2 slot positions out of k
      int i = nf2 - 1;
      while (i >= 0 && pos[i] == k - nf2 + i) --i;
      if (i < 0) break;
      ++pos[i];
      for (int j = i + 1; j < nf2; ++j) pos[j] = pos[j - 1] + 1;
    }
  }

  /// out += (ordered product for one slot pattern) x, with x of size d^l
  /// and out of size d^k.
  void term_forward(const std::vector<bool>& is_f2, int k, int l,
                    const double* x, double* out) const {
    const double* cur = x;
    double* nxt = buf_a_.data();
    double* spare = buf_b_.data();
    int modes = l;
    for (int slot = 0; slot < k; ++slot) {
      if (is_f2[static_cast<std::size_t>(slot)]) {
        mode_contract_f2(cur, nxt, modes, slot);
        modes -= 1;
      } else {
        mode_apply_local(ipf1_.data(), cur, nxt, modes, slot);
      }
      cur = nxt;
      nxt = (cur == buf_a_.data()) ? spare : buf_a_.data();
    }
    const long long n = dims_[k];
    for (long long i = 0; i < n; ++i) out[i] += cur[i];
  }

  /// out += (ordered product)^dagger x, with x of size d^k, out of size d^l.
  void term_adjoint(const std::vector<bool>& is_f2, int k, int l,
                    const double* x, double* out) const {
    const double* cur = x;
    double* nxt = buf_a_.data();
    double* spare = buf_b_.data();
    int modes = k;
    int p = 0;  // current mode position in the growing output tensor
    for (int slot = 0; slot < k; ++slot) {
      if (is_f2[static_cast<std::size_t>(slot)]) {
        mode_expand_f2(cur, nxt, modes, p);
        modes += 1;
        p += 2;
      } else {
        mode_apply_local(ipf1_t_.data(), cur, nxt, modes, p);
        p += 1;
      }
      cur = nxt;
      nxt = (cur == buf_a_.data()) ? spare : buf_a_.data();
    }
    (void)l;
    const long long n = dims_[modes];
    for (long long i = 0; i < n; ++i) out[i] += cur[i];
  }

  /// Apply a site-local Q x Q matrix M to tensor mode p of x (modes modes).
  void mode_apply_local(const double* M, const double* x, double* out,
                        int modes, int p) const {
    const int q = vm_.q;
    const long long P = dims_[p];
    const long long S = dims_[modes - p - 1];
    const long long stride = d_ * S;
    for (long long a = 0; a < P; ++a) {
      for (long long r = 0; r < nsites_; ++r) {
        const double* xs = x + a * stride + r * q * S;
        double* os = out + a * stride + r * q * S;
        for (int mo = 0; mo < q; ++mo) {
          double* orow = os + mo * S;
          for (long long b = 0; b < S; ++b) orow[b] = 0.0;
          for (int mi = 0; mi < q; ++mi) {
            const double c = M[mo * q + mi];
            if (c == 0.0) continue;
            const double* xrow = xs + mi * S;
            for (long long b = 0; b < S; ++b) orow[b] += c * xrow[b];
          }
        }
      }
    }
  }

  /// Contract modes (p, p+1) of x with F2 (same lattice site on both);
  /// x has `modes` modes, the result has modes-1.
  void mode_contract_f2(const double* x, double* out, int modes, int p) const {
    const int q = vm_.q;
    const long long P = dims_[p];
    const long long S = dims_[modes - p - 2];
    const long long in_stride = d_ * d_ * S;   // per prefix step
    const long long out_stride = d_ * S;
    for (long long a = 0; a < P; ++a) {
      for (long long r = 0; r < nsites_; ++r) {
        const double* xs = x + a * in_stride + r * q * (d_ * S);
        double* os = out + a * out_stride + r * q * S;
        for (int mo = 0; mo < q; ++mo)
          for (long long b = 0; b < S; ++b) os[mo * S + b] = 0.0;
        for (int m1 = 0; m1 < q; ++m1) {
          const double* xrow = xs + m1 * (d_ * S) + r * q * S;
          for (int m2 = 0; m2 < q; ++m2) {
            const double* xr = xrow + m2 * S;
            for (int mo = 0; mo < q; ++mo) {
              const double c = cm_.f2[(mo * q + m1) * q + m2];
              if (c == 0.0) continue;
              double* orow = os + mo * S;
              for (long long b = 0; b < S; ++b) orow[b] += c * xr[b];
            }
          }
        }
      }
    }
  }

  /// Adjoint of the F2 contraction: expand mode p of x into modes (p, p+1).
  void mode_expand_f2(const double* x, double* out, int modes, int p) const {
    const int q = vm_.q;
    const long long P = dims_[p];
    const long long S = dims_[modes - p - 1];
    const long long in_stride = d_ * S;
    const long long out_stride = d_ * d_ * S;
    std::memset(out, 0,
                sizeof(double) * static_cast<std::size_t>(P * out_stride));
    for (long long a = 0; a < P; ++a) {
      for (long long r = 0; r < nsites_; ++r) {
        const double* xs = x + a * in_stride + r * q * S;
        double* os = out + a * out_stride + r * q * (d_ * S);
        for (int m1 = 0; m1 < q; ++m1) {
          double* orow1 = os + m1 * (d_ * S) + r * q * S;
          for (int m2 = 0; m2 < q; ++m2) {
            double* orow = orow1 + m2 * S;
            for (int mo = 0; mo < q; ++mo) {
              const double c = cm_.f2[(mo * q + m1) * q + m2];
              if (c == 0.0) continue;
              const double* xrow = xs + mo * S;
              for (long long b = 0; b < S; ++b) orow[b] += c * xrow[b];
            }
          }
        }
      }
    }
  }

  /// Permute one tensor mode by the streaming map (or its inverse).
  void stream_mode(const double* x, double* out, int modes, int p,
                   bool adjoint) const {
    const long long P = dims_[p];
    const long long S = dims_[modes - p - 1];
    const auto& map = adjoint ? inv_dest_ : dest_;
    for (long long a = 0; a < P; ++a) {
      const double* xs = x + a * d_ * S;
      double* os = out + a * d_ * S;
      for (long long i = 0; i < d_; ++i) {
        const long long j = map[static_cast<std::size_t>(i)];
        std::memcpy(os + j * S, xs + i * S,
                    sizeof(double) * static_cast<std::size_t>(S));
      }
    }
  }

  VelocityModel vm_;
  Geometry geom_;
  CollisionMatrices cm_;
  int n_c_;
  long long nsites_;
  long long d_;
  std::vector<long long> dims_;  ///< dims_[k] = d^k
  std::vector<long long> off_;   ///< off_[k] = flat offset of block k
  std::vector<double> ipf1_;     ///< I + F1~, row-major
  std::vector<double> ipf1_t_;   ///< its transpose
  std::vector<long long> dest_;
  std::vector<long long> inv_dest_;
  mutable std::vector<double> buf_a_, buf_b_, buf_c_;
};

/// One full update y -> S C y on block form.
inline CarlemanVector apply_carleman_step(const CarlemanVector& y,
                                          const CarlemanOperator& op) {
  return op.apply(y);
}

/// Stepwise Carleman evolution record.
struct CarlemanEvolution {
  CarlemanVector final;                         ///< y(T)
  std::vector<std::vector<double>> y1_history;  ///< first block at t = 0..T
  std::vector<double> norms;                    ///< ||y(t)|| at t = 0..T
};

/// Evolve y(t+1) = S C y(t) for `steps` steps, recording the first block
/// and the norm at every step.
inline CarlemanEvolution evolve_carleman(const CarlemanOperator& op,
                                         const CarlemanVector& y0, int steps) {
  CarlemanEvolution ev;
  std::vector<double> cur = op.flatten(y0), nxt(cur.size());
  auto record = [&](const std::vector<double>& f) {
    ev.y1_history.emplace_back(f.data(), f.data() + op.block_dim(1));
    double s = 0.0;
    for (double v : f) s += v * v;
    ev.norms.push_back(std::sqrt(s));
  };
  record(cur);
  for (int t = 0; t < steps; ++t) {
    op.apply_step(cur.data(), nxt.data());
    cur.swap(nxt);
    record(cur);
    if (!std::isfinite(ev.norms.back()))
      throw std::runtime_error("non-finite Carleman state at step " +
                               std::to_string(t + 1));
  }
  ev.final = op.unflatten(cur);
  return ev;
}

// ---------------------------------------------------------------------------
// Assembled sparse forms (small instances; independent oracle path)
// ---------------------------------------------------------------------------

using SparseMat = Eigen::SparseMatrix<double>;

/// I + F1 as a sparse d x d matrix (site-block-diagonal).
inline SparseMat assemble_ipf1(const VelocityModel& vm, const Geometry& geom,
                               double tau) {
  CollisionMatrices cm = build_collision_matrices(vm, tau);
  const int q = vm.q;
  const long long ns = geom.sites();
  std::vector<Eigen::Triplet<double>> t;
  for (long long r = 0; r < ns; ++r)
    for (int a = 0; a < q; ++a)
      for (int b = 0; b < q; ++b) {
        double v = cm.f1[a * q + b] + (a == b ? 1.0 : 0.0);
        if (v != 0.0)
          t.emplace_back(static_cast<int>(r * q + a),
                         static_cast<int>(r * q + b), v);
      }
  SparseMat m(static_cast<int>(ns * q), static_cast<int>(ns * q));
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

/// F2 as a sparse d x d^2 matrix (nonzero only for both inputs on the
/// same site as the output).
inline SparseMat assemble_f2(const VelocityModel& vm, const Geometry& geom,
                             double tau) {
  CollisionMatrices cm = build_collision_matrices(vm, tau);
  const int q = vm.q;
  const long long ns = geom.sites();
  const long long d = ns * q;
  std::vector<Eigen::Triplet<double>> t;
  for (long long r = 0; r < ns; ++r)
    for (int m = 0; m < q; ++m)
      for (int m1 = 0; m1 < q; ++m1)
        for (int m2 = 0; m2 < q; ++m2) {
          double v = cm.f2[(m * q + m1) * q + m2];
          if (v != 0.0)
            t.emplace_back(static_cast<int>(r * q + m),
                           static_cast<int>((r * q + m1) * d + (r * q + m2)),
                           v);
        }
  SparseMat m(static_cast<int>(d), static_cast<int>(d * d));
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

/// Streaming permutation as a sparse d x d matrix.
inline SparseMat assemble_streaming(const VelocityModel& vm,
                                    const Geometry& geom) {
  auto dest = stream_permutation(vm, geom);
  std::vector<Eigen::Triplet<double>> t;
  for (std::size_t i = 0; i < dest.size(); ++i)
    t.emplace_back(static_cast<int>(dest[i]), static_cast<int>(i), 1.0);
  SparseMat m(static_cast<int>(dest.size()), static_cast<int>(dest.size()));
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

namespace detail {

/// Ordered Kronecker product over slot matrices for one pattern.
inline SparseMat kron_chain(const std::vector<const SparseMat*>& ops) {
  SparseMat acc = *ops[0];
  for (std::size_t i = 1; i < ops.size(); ++i) {
    SparseMat next = Eigen::kroneckerProduct(acc, *ops[i]).eval();
    acc.swap(next);
  }
  return acc;
}

}  // namespace detail

/// Assembled truncated Carleman collision matrix (d_C x d_C).  Intended for
/// small instances only; guards the quadratic memory cost.
inline SparseMat assemble_collision(const VelocityModel& vm,
                                    const Geometry& geom, double tau, int n_c,
                                    double max_bytes = 2.0 * (1ULL << 30)) {
  const long long d = geom.sites() * vm.q;
  const long long d_c = static_cast<long long>(carleman_dim(static_cast<double>(d), n_c));
  require(d_c < (1LL << 31), "assembled Carleman matrix index overflow");

  SparseMat ipf1 = assemble_ipf1(vm, geom, tau);
  SparseMat f2 = assemble_f2(vm, geom, tau);

  std::vector<long long> off(static_cast<std::size_t>(n_c) + 2, 0);
  for (int k = 1; k <= n_c + 1; ++k) off[static_cast<std::size_t>(k)] = off[k - 1] + (k == 1 ? 0 : ipow(d, k - 1));
  // off[k] now holds the offset of block k (off[1] = 0)

  std::vector<Eigen::Triplet<double>> trip;
  double bytes = 0.0;
  for (int k = 1; k <= n_c; ++k) {
    const int lmax = std::min(2 * k, n_c);
    for (int l = k; l <= lmax; ++l) {
      const int nf2 = l - k;
      std::vector<int> pos(nf2);
      for (int i = 0; i < nf2; ++i) pos[i] = i;
      while (true) {
        std::vector<const SparseMat*> ops;
        std::vector<bool> is_f2(static_cast<std::size_t>(k), false);
        for (int i = 0; i < nf2; ++i) is_f2[static_cast<std::size_t>(pos[i])] = true;
        for (int s = 0; s < k; ++s)
          ops.push_back(is_f2[static_cast<std::size_t>(s)] ? &f2 : &ipf1);
        SparseMat term = detail::kron_chain(ops);
        bytes += 20.0 * term.nonZeros();
        if (bytes > max_bytes)
          throw capacity_error("assembled Carleman matrix exceeds budget", bytes);
        for (int c = 0; c < term.outerSize(); ++c)
          for (SparseMat::InnerIterator it(term, c); it; ++it)
            trip.emplace_back(static_cast<int>(off[static_cast<std::size_t>(k)] + it.row()),
                              static_cast<int>(off[static_cast<std::size_t>(l)] + it.col()),
                              it.value());
        int i = nf2 - 1;
        while (i >= 0 && pos[i] == k - nf2 + i) --i;
        if (i < 0) break;
        ++pos[i];
        for (int j = i + 1; j < nf2; ++j) pos[j] = pos[j - 1] + 1;
      }
    }
  }
  SparseMat c(static_cast<int>(d_c), static_cast<int>(d_c));
  c.setFromTriplets(trip.begin(), trip.end());
  return c;
}

/// Assembled block-diagonal streaming over all Carleman blocks.
inline SparseMat assemble_carleman_streaming(const VelocityModel& vm,
                                             const Geometry& geom, int n_c) {
  const long long d = geom.sites() * vm.q;
  const long long d_c = static_cast<long long>(carleman_dim(static_cast<double>(d), n_c));
  require(d_c < (1LL << 31), "assembled streaming matrix index overflow");
  SparseMat s1 = assemble_streaming(vm, geom);
  std::vector<Eigen::Triplet<double>> trip;
  long long off = 0;
  SparseMat sk = s1;
  for (int k = 1; k <= n_c; ++k) {
    if (k > 1) sk = Eigen::kroneckerProduct(sk, s1).eval();
    for (int c = 0; c < sk.outerSize(); ++c)
      for (SparseMat::InnerIterator it(sk, c); it; ++it)
        trip.emplace_back(static_cast<int>(off + it.row()),
                          static_cast<int>(off + it.col()), it.value());
    off += ipow(d, k);
  }
  SparseMat s(static_cast<int>(d_c), static_cast<int>(d_c));
  s.setFromTriplets(trip.begin(), trip.end());
  return s;
}

/// Assembled full step S C.
inline SparseMat assemble_step(const VelocityModel& vm, const Geometry& geom,
                               double tau, int n_c,
                               double max_bytes = 2.0 * (1ULL << 30)) {
  SparseMat c = assemble_collision(vm, geom, tau, n_c, max_bytes);
  SparseMat s = assemble_carleman_streaming(vm, geom, n_c);
  return (s * c).pruned();
}

/// All assembled forms of one operator, for cross-validation.
struct AssembledCarleman {
  SparseMat collision;  ///< truncated collision, d_C x d_C
  SparseMat streaming;  ///< block-diagonal tensor-power streaming
  SparseMat step;       ///< streaming * collision
};

inline AssembledCarleman assemble_sparse(const CarlemanOperator& op,
                                         double max_bytes = 2.0 * (1ULL << 30)) {
  AssembledCarleman a;
  a.collision = assemble_collision(op.model(), op.geometry(),
                                   op.matrices().tau_bar_star, op.truncation(),
                                   max_bytes);
  a.streaming = assemble_carleman_streaming(op.model(), op.geometry(),
                                            op.truncation());
  a.step = (a.streaming * a.collision).pruned();
  return a;
}

}  // namespace qlbm
