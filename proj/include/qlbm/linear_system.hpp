#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "qlbm/carleman.hpp"
#include "qlbm/common.hpp"
#include "qlbm/lattice.hpp"

namespace qlbm {

// ---------------------------------------------------------------------------
// Lanczos largest-eigenvalue estimation (symmetric PSD operators)
// ---------------------------------------------------------------------------

struct LanczosResult {
  double value = 0.0;   ///< largest eigenvalue estimate
  int iterations = 0;   ///< Lanczos steps performed
  bool converged = false;
};

/// Largest eigenvalue of a symmetric positive semidefinite operator by the
/// Lanczos iteration with full (two-pass) reorthogonalization.  The start
/// vector is deterministic: normalized all-ones for seed 0 (the default), a
/// fixed pseudo-random draw otherwise.  A nonzero seed is the safe choice
/// for operators with lattice symmetries, where the all-ones vector can sit
/// inside a proper invariant subspace and hide the dominant eigenvector.
/// Converges when the largest Ritz value changes by less than `tol`
/// relatively over `window` consecutive iterations.
inline LanczosResult lanczos_largest(
    const std::function<void(const double*, double*)>& apply, long long dim,
    double tol = 1e-8, int max_iter = 400,
    double max_bytes = 8.0 * (1ULL << 30), int window = 5,
    unsigned seed = 0) {
  require(dim >= 1, "operator dimension must be positive");
  LanczosResult res;
  if (dim == 1) {
    double x = 1.0, y = 0.0;
    apply(&x, &y);
    return {y, 1, true};
  }

  std::vector<std::vector<double>> basis;
  std::vector<double> alpha, beta;  // tridiagonal entries
  std::vector<double> w(static_cast<std::size_t>(dim));

  std::vector<double> v0(static_cast<std::size_t>(dim),
                         1.0 / std::sqrt(static_cast<double>(dim)));
  if (seed != 0) {
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (double& x : v0) x = dist(gen);
    scale(v0, 1.0 / l2_norm(v0));
  }
  basis.push_back(std::move(v0));

  double prev_ritz = -1.0;
  int stable = 0;
  for (int it = 0; it < max_iter; ++it) {
    if ((static_cast<double>(basis.size()) + 1.0) * 8.0 * dim > max_bytes)
      throw capacity_error("Lanczos basis exceeds the memory budget",
                           (static_cast<double>(basis.size()) + 1.0) * 8.0 * dim);
    const std::vector<double>& v = basis.back();
    apply(v.data(), w.data());
    double a = dot(v, w);
    alpha.push_back(a);

    // w -= alpha v + beta v_prev, then reorthogonalize twice for stability
    axpy(-a, v, w);
    if (!beta.empty()) axpy(-beta.back(), basis[basis.size() - 2], w);
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& u : basis) {
        double c = dot(u, w);
        if (c != 0.0) axpy(-c, u, w);
      }

    // largest Ritz value of the current tridiagonal matrix
    const int m = static_cast<int>(alpha.size());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      t(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i + 1 < m)
        t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    double ritz = es.eigenvalues()(m - 1);
    res.value = ritz;
    res.iterations = m;

    if (prev_ritz >= 0.0 &&
        std::abs(ritz - prev_ritz) <= tol * std::max(std::abs(ritz), 1e-300)) {
      if (++stable >= window) {
        res.converged = true;
        return res;
      }
    } else {
      stable = 0;
    }
    prev_ritz = ritz;

    double b = l2_norm(w);
    if (b <= 1e-14 * std::max(1.0, std::abs(a))) {
      // exact invariant subspace: the Ritz value is exact
      res.converged = true;
      return res;
    }
    beta.push_back(b);
    std::vector<double> next = w;
    scale(next, 1.0 / b);
    basis.push_back(std::move(next));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Carleman collision norm ||C|| via the single-site reduction
// ---------------------------------------------------------------------------

/// Largest singular value of the truncated Carleman collision operator.
/// The collision is site-local, so ||C|| equals the single-site value for
/// any lattice size; this computes it on a one-site lattice, densely for
/// small reduced dimension and by Lanczos on C^T C above the cap.
inline double norm_C(const VelocityModel& vm, double tau, int n_c,
                     long long dense_cap = 4096,
                     double max_bytes = 8.0 * (1ULL << 30)) {
  Geometry site(vm.dim, {1, 1, 1});
  const long long d_c =
      static_cast<long long>(carleman_dim(static_cast<double>(vm.q), n_c));
  if (d_c <= dense_cap) {
    Eigen::MatrixXd c = Eigen::MatrixXd(assemble_collision(vm, site, tau, n_c));
    if (c.rows() <= 512) {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(c);
      return svd.singularValues()(0);
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(c);
    return svd.singularValues()(0);
  }
  if (8.0 * static_cast<double>(d_c) * 64.0 > max_bytes)
    throw capacity_error("collision norm estimation exceeds budget",
                         8.0 * static_cast<double>(d_c) * 64.0);
  CarlemanOperator op(vm, site, tau, n_c, max_bytes);
  std::vector<double> mid(static_cast<std::size_t>(d_c));
  auto apply = [&](const double* x, double* out) {
    std::fill(mid.begin(), mid.end(), 0.0);
    op.accumulate_collision(x, mid.data());
    std::memset(out, 0, sizeof(double) * static_cast<std::size_t>(d_c));
    op.accumulate_collision_adjoint(mid.data(), out);
  };
  LanczosResult r =
      lanczos_largest(apply, d_c, 1e-10, 400, max_bytes, 5, /*seed=*/777);
  require(r.converged, "collision norm Lanczos did not converge");
  return std::sqrt(r.value);
}

// ---------------------------------------------------------------------------
// Time-block linear systems
// ---------------------------------------------------------------------------

/// Block lower-bidiagonal linear system over the time register.
///
/// history: M = T*+1 blocks, unit diagonal, -SC subdiagonal.
/// final:   M = 2^W (T*+1) blocks; the first T* subdiagonal couplings are
///          -SC, the remaining idle rows couple with -I.
class TimeBlockSystem {
 public:
  enum class Kind { history, final };

  TimeBlockSystem(const CarlemanOperator& op, long long t_star, Kind kind,
                  int w = 0)
      : op_(&op), t_star_(t_star), kind_(kind), w_(w) {
    require(t_star >= 0, "negative step count");
    if (kind == Kind::final)
      require(w >= 1, "final-kind system needs a waiting register");
    else
      require(w == 0, "history-kind system takes no waiting register");
    blocks_ = (t_star_ + 1) << (kind == Kind::final ? w : 0);
    scratch_.resize(static_cast<std::size_t>(op.total_dim()));
  }

  const CarlemanOperator& op() const { return *op_; }
  Kind kind() const { return kind_; }
  long long t_star() const { return t_star_; }
  int waiting_qubits() const { return w_; }
  long long block_dim() const { return op_->total_dim(); }
  long long blocks() const { return blocks_; }
  long long dim() const { return blocks_ * block_dim(); }

  /// out = A x.
  void apply(const double* x, double* out) const {
    const long long d = block_dim();
    std::memcpy(out, x, sizeof(double) * static_cast<std::size_t>(d));
    for (long long t = 1; t < blocks_; ++t) {
      const double* prev = x + (t - 1) * d;
      double* o = out + t * d;
      if (t <= t_star_) {
        op_->apply_step(prev, scratch_.data());
        for (long long i = 0; i < d; ++i)
          o[i] = x[t * d + i] - scratch_[static_cast<std::size_t>(i)];
      } else {
        for (long long i = 0; i < d; ++i) o[i] = x[t * d + i] - prev[i];
      }
    }
  }

  /// out = A^T x.
  void apply_adjoint(const double* x, double* out) const {
    const long long d = block_dim();
    for (long long t = 0; t < blocks_; ++t) {
      double* o = out + t * d;
      std::memcpy(o, x + t * d, sizeof(double) * static_cast<std::size_t>(d));
      if (t + 1 < blocks_) {
        const double* nxt = x + (t + 1) * d;
        if (t + 1 <= t_star_) {
          op_->apply_step_adjoint(nxt, scratch_.data());
          for (long long i = 0; i < d; ++i)
            o[i] -= scratch_[static_cast<std::size_t>(i)];
        } else {
          for (long long i = 0; i < d; ++i) o[i] -= nxt[i];
        }
      }
    }
  }

  /// out = A^{-1} b by forward block substitution.  `b` and `out` must not
  /// alias.
  void solve(const double* b, double* out) const {
    const long long d = block_dim();
    std::memcpy(out, b, sizeof(double) * static_cast<std::size_t>(d));
    for (long long t = 1; t < blocks_; ++t) {
      const double* prev = out + (t - 1) * d;
      double* o = out + t * d;
      if (t <= t_star_) {
        op_->apply_step(prev, scratch_.data());
        for (long long i = 0; i < d; ++i)
          o[i] = b[t * d + i] + scratch_[static_cast<std::size_t>(i)];
      } else {
        for (long long i = 0; i < d; ++i) o[i] = b[t * d + i] + prev[i];
      }
    }
  }

  /// out = A^{-T} b by backward block substitution.
  void solve_adjoint(const double* b, double* out) const {
    const long long d = block_dim();
    std::memcpy(out + (blocks_ - 1) * d, b + (blocks_ - 1) * d,
                sizeof(double) * static_cast<std::size_t>(d));
    for (long long t = blocks_ - 2; t >= 0; --t) {
      const double* nxt = out + (t + 1) * d;
      double* o = out + t * d;
      if (t + 1 <= t_star_) {
        op_->apply_step_adjoint(nxt, scratch_.data());
        for (long long i = 0; i < d; ++i)
          o[i] = b[t * d + i] + scratch_[static_cast<std::size_t>(i)];
      } else {
        for (long long i = 0; i < d; ++i) o[i] = b[t * d + i] + nxt[i];
      }
    }
  }

 private:
  const CarlemanOperator* op_;
  long long t_star_;
  Kind kind_;
  int w_;
  long long blocks_ = 1;
  mutable std::vector<double> scratch_;
};

inline void check_system_size(const TimeBlockSystem& sys,
                              const std::vector<double>& x) {
  require(static_cast<long long>(x.size()) == sys.dim(),
          "vector length does not match the system dimension");
}

inline std::vector<double> apply_A(const TimeBlockSystem& sys,
                                   const std::vector<double>& x) {
  check_system_size(sys, x);
  std::vector<double> out(x.size());
  sys.apply(x.data(), out.data());
  return out;
}

inline std::vector<double> apply_A_adjoint(const TimeBlockSystem& sys,
                                           const std::vector<double>& x) {
  check_system_size(sys, x);
  std::vector<double> out(x.size());
  sys.apply_adjoint(x.data(), out.data());
  return out;
}

inline std::vector<double> solve_A(const TimeBlockSystem& sys,
                                   const std::vector<double>& b) {
  check_system_size(sys, b);
  std::vector<double> out(b.size());
  sys.solve(b.data(), out.data());
  return out;
}

inline std::vector<double> solve_A_adjoint(const TimeBlockSystem& sys,
                                           const std::vector<double>& b) {
  check_system_size(sys, b);
  std::vector<double> out(b.size());
  sys.solve_adjoint(b.data(), out.data());
  return out;
}

// ---------------------------------------------------------------------------
// Condition-number estimation
// ---------------------------------------------------------------------------

struct ConditionEstimate {
  double norm_C = 0.0;         ///< collision norm used in ||A|| bounds
  double norm_A_lower = 0.0;   ///< sqrt(1 + ||C||^2)
  double norm_A_upper = 0.0;   ///< 1 + ||C||
  double sigma_max_Ainv = 0.0; ///< largest singular value of A^{-1}
  int iterations = 0;
  bool converged = false;
  double kappa = 0.0;          ///< (1 + ||C||) sigma_max(A^{-1})
  double kappa_lower = 0.0;    ///< ||C|| T* / sqrt(3)
  std::optional<double> kappa_upper;  ///< diagonal-sum bound, when computed
};

/// Estimate the condition number of a time-block system: sigma_max(A^{-1})
/// by Lanczos on (A^{-1})^T A^{-1} (matrix-free via the block solves), and
/// ||A|| approximated by its upper bound 1 + ||C||.
inline ConditionEstimate condition_number(const TimeBlockSystem& sys,
                                          double tol = 1e-8,
                                          int max_iter = 400,
                                          double max_bytes = 8.0 * (1ULL << 30)) {
  require(tol > 0.0, "tolerance must be positive");
  ConditionEstimate est;
  const CarlemanOperator& op = sys.op();
  est.norm_C = norm_C(op.model(), op.matrices().tau_bar_star, op.truncation(),
                      4096, max_bytes);
  est.norm_A_lower = std::sqrt(1.0 + est.norm_C * est.norm_C);
  est.norm_A_upper = 1.0 + est.norm_C;
  est.kappa_lower = est.norm_C * static_cast<double>(sys.t_star()) / std::sqrt(3.0);

  const long long dim = sys.dim();
  double vec_bytes = 8.0 * static_cast<double>(dim);
  if (3.0 * vec_bytes > max_bytes)
    throw capacity_error("condition-number estimation exceeds budget",
                         3.0 * vec_bytes);
  std::vector<double> mid(static_cast<std::size_t>(dim));
  auto apply = [&](const double* x, double* out) {
    sys.solve(x, mid.data());
    sys.solve_adjoint(mid.data(), out);
  };
  LanczosResult r = lanczos_largest(apply, dim, tol, max_iter,
                                    max_bytes - 2.0 * vec_bytes, 5,
                                    /*seed=*/777);
  est.sigma_max_Ainv = std::sqrt(r.value);
  est.iterations = r.iterations;
  est.converged = r.converged;
  est.kappa = est.norm_A_upper * est.sigma_max_Ainv;
  return est;
}

/// Operator norms ||(SC)^t|| for t = 0..t_max by Lanczos on the normal
/// operator of each power (feasible at small sizes only).
inline std::vector<double> operator_power_norms(const CarlemanOperator& op,
                                                long long t_max,
                                                double tol = 1e-10,
                                                int max_iter = 400) {
  const long long d = op.total_dim();
  std::vector<double> norms(static_cast<std::size_t>(t_max) + 1, 1.0);
  std::vector<double> a(static_cast<std::size_t>(d)), b(static_cast<std::size_t>(d));
  for (long long t = 1; t <= t_max; ++t) {
    auto apply = [&](const double* x, double* out) {
      std::memcpy(a.data(), x, sizeof(double) * static_cast<std::size_t>(d));
      for (long long i = 0; i < t; ++i) {
        op.apply_step(a.data(), b.data());
        a.swap(b);
      }
      for (long long i = 0; i < t; ++i) {
        op.apply_step_adjoint(a.data(), b.data());
        a.swap(b);
      }
      std::memcpy(out, a.data(), sizeof(double) * static_cast<std::size_t>(d));
    };
    LanczosResult r = lanczos_largest(apply, d, tol, max_iter,
                                      8.0 * (1ULL << 30), 5, /*seed=*/777);
    norms[static_cast<std::size_t>(t)] = std::sqrt(r.value);
  }
  return norms;
}

/// Diagonal-sum upper bound on the condition number from per-power norms
/// (power_norms[t] = ||(SC)^t||, t = 0..T*).
inline double kappa_upper_bound(const TimeBlockSystem& sys, double norm_c,
                                const std::vector<double>& power_norms) {
  const long long t_star = sys.t_star();
  require(static_cast<long long>(power_norms.size()) >= t_star + 1,
          "need ||(SC)^t|| for every t up to T*");
  double sum = 0.0;
  if (sys.kind() == TimeBlockSystem::Kind::history) {
    for (long long t = 0; t <= t_star; ++t)
      sum += static_cast<double>(t_star - t + 1) * power_norms[static_cast<std::size_t>(t)] *
             power_norms[static_cast<std::size_t>(t)];
  } else {
    const double tp1 = static_cast<double>(t_star + 1);
    const double pw = std::pow(2.0, sys.waiting_qubits());
    for (long long t = 0; t <= t_star; ++t)
      sum += (pw * tp1 - static_cast<double>(t)) * power_norms[static_cast<std::size_t>(t)] *
             power_norms[static_cast<std::size_t>(t)];
    sum += 0.5 * pw * pw * tp1 * tp1;
  }
  return (norm_c + 1.0) * std::sqrt(sum);
}

// ---------------------------------------------------------------------------
// +-1 eigenstates of SC
// ---------------------------------------------------------------------------

/// Site-local kernel vector of F1~: psi_m = 3 w_m (e_m . u) for a chosen
/// velocity u (zero density mode).  Any such vector satisfies F1~ psi = 0.
inline std::vector<double> f1_kernel_vector(const VelocityModel& vm,
                                            const std::array<double, 3>& u) {
  std::vector<double> psi(static_cast<std::size_t>(vm.q), 0.0);
  for (int m = 0; m < vm.q; ++m) {
    double eu = 0.0;
    for (int k = 0; k < vm.dim; ++k) eu += vm.e[m][k] * u[k];
    psi[static_cast<std::size_t>(m)] = 3.0 * vm.w[m] * eu;
  }
  return psi;
}

/// Eigenstate of SC with eigenvalue e^{i theta} for theta in {0, pi},
/// returned as a Carleman vector with only the first block populated.
///
/// theta = 0: translation-invariant kernel state; requires no walls.
/// theta = pi: the alternating-sign pattern (period-2 per axis for D=1, the
/// 2x2 two-state tiling for D=2); wall sites carry zeros, and the pattern
/// works with bounce-back walls because psi is odd under m -> -m.
inline CarlemanVector eigenstate_xi(double theta, const VelocityModel& vm,
                                    const Geometry& geom, int n_c) {
  const bool pi_state = theta != 0.0;
  if (!pi_state) {
    for (auto wflag : geom.wall)
      require(wflag == 0, "the +1 eigenstate requires a wall-free lattice");
  } else {
    for (int k = 0; k < geom.dim; ++k)
      require(geom.n[k] % 2 == 0,
              "the -1 eigenstate needs even lattice extents");
    require(geom.dim <= 2, "the -1 eigenstate pattern is given for D <= 2");
  }

  const long long ns = geom.sites();
  const int q = vm.q;
  std::vector<double> zeta(static_cast<std::size_t>(ns) * q, 0.0);

  if (geom.dim == 1 || !pi_state) {
    std::vector<double> psi = f1_kernel_vector(vm, {1.0, 0.0, 0.0});
    for (long long r = 0; r < ns; ++r) {
      if (geom.is_wall(r)) continue;
      double sign = 1.0;
      if (pi_state) sign = (geom.site_coord(r)[0] % 2 == 0) ? 1.0 : -1.0;
      for (int m = 0; m < q; ++m)
        zeta[static_cast<std::size_t>(r * q + m)] = sign * psi[static_cast<std::size_t>(m)];
    }
  } else {
    // D = 2 tiling: sign (-1)^{i+1}, kernel state alternating with (i+j)
    std::vector<double> psi1 = f1_kernel_vector(vm, {-6.0, -6.0, 0.0});
    std::vector<double> psi2 = f1_kernel_vector(vm, {-6.0, 6.0, 0.0});
    for (long long r = 0; r < ns; ++r) {
      if (geom.is_wall(r)) continue;
      auto c = geom.site_coord(r);
      double sign = (c[0] % 2 == 0) ? -1.0 : 1.0;
      const auto& psi = ((c[0] + c[1]) % 2 == 0) ? psi1 : psi2;
      for (int m = 0; m < q; ++m)
        zeta[static_cast<std::size_t>(r * q + m)] = sign * psi[static_cast<std::size_t>(m)];
    }
  }

  // numerical kernel verification: F1~ annihilates the site pattern
  // (the kernel does not depend on the relaxation time)
  CollisionMatrices cm = build_collision_matrices(vm, 1.0);
  double resid = 0.0, scale_ = 0.0;
  for (long long r = 0; r < ns; ++r) {
    for (int m = 0; m < q; ++m) {
      double s = 0.0;
      for (int m1 = 0; m1 < q; ++m1)
        s += cm.f1[m * q + m1] * zeta[static_cast<std::size_t>(r * q + m1)];
      resid += s * s;
      scale_ += zeta[static_cast<std::size_t>(r * q + m)] *
                zeta[static_cast<std::size_t>(r * q + m)];
    }
  }
  require(scale_ > 0.0, "eigenstate pattern vanished (all-wall lattice?)");
  require(std::sqrt(resid) <= 1e-10 * std::sqrt(scale_),
          "pattern is not in the numerical kernel of F1~");

  double n = std::sqrt(scale_);
  for (double& v : zeta) v /= n;

  CarlemanVector xi;
  xi.d = ns * q;
  xi.n_c = n_c;
  xi.blocks.resize(static_cast<std::size_t>(n_c));
  xi.blocks[0] = zeta;
  for (int k = 2; k <= n_c; ++k)
    xi.blocks[static_cast<std::size_t>(k - 1)]
        .assign(static_cast<std::size_t>(ipow(ns * q, k)), 0.0);
  return xi;
}

}  // namespace qlbm
