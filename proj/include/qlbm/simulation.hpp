#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "qlbm/common.hpp"
#include "qlbm/lattice.hpp"

namespace qlbm {

/// Simulation parameters derived from the Reynolds number.
///
/// With the default ratios (eta_u = eta_L = eta_T = u0_star = 1) the derived
/// quantities follow the closed forms
///   N_x  = ceil(Re^beta),
///   T*   = ceil(Re^{beta(D/2+1)}),
///   tau* = 1/2 + 3 / Re^{beta(D/2-1)+1},
///   u*   = N_x^{-D/2}  (with the rounded integer N_x).
struct SimParams {
  double reynolds = 1.0;   ///< Reynolds number, >= 1
  double beta = 0.75;      ///< spatial resolution exponent, > 0
  int dim = 1;             ///< spatial dimension D
  double eta_u = 1.0;      ///< flow-to-maximal velocity ratio
  double eta_L = 1.0;      ///< characteristic-length-to-box ratio
  double eta_T = 1.0;      ///< advection-times-to-steady-flow ratio
  double u0_star = 1.0;    ///< norm-control constant

  int nx = 1;              ///< per-axis lattice extent
  long long t_star = 1;    ///< number of time steps
  double tau_bar_star = 3.5;
  double u_ini_star = 1.0;

  /// Optional physical anchors: characteristic length and kinematic
  /// viscosity.  When set, dx/dt() convert lattice units to physical ones.
  std::optional<double> length;
  std::optional<double> viscosity;

  double dx() const {
    require(length.has_value(), "physical length anchor not set");
    return *length / (eta_L * nx);
  }
  double dt() const {
    require(viscosity.has_value(), "physical viscosity anchor not set");
    return (tau_bar_star - 0.5) * dx() * dx() / (3.0 * *viscosity);
  }

  Geometry geometry() const {
    std::array<int, 3> n = {1, 1, 1};
    for (int k = 0; k < dim; ++k) n[k] = nx;
    return Geometry(dim, n);
  }
};

/// Derive lattice resolution, step count, relaxation time, and initial
/// velocity amplitude from (Re, beta, D).
inline SimParams select_params(double reynolds, double beta, int dim,
                               double eta_u = 1.0, double eta_L = 1.0,
                               double eta_T = 1.0, double u0_star = 1.0) {
  require(reynolds >= 1.0, "Reynolds number below 1 is rejected");
  require(beta > 0.0, "resolution exponent must be positive");
  require(dim >= 1 && dim <= 3, "dimension must be 1, 2, or 3");
  require(eta_u > 0 && eta_L > 0 && eta_T > 0 && u0_star > 0,
          "ratio parameters must be positive");

  SimParams p;
  p.reynolds = reynolds;
  p.beta = beta;
  p.dim = dim;
  p.eta_u = eta_u;
  p.eta_L = eta_L;
  p.eta_T = eta_T;
  p.u0_star = u0_star;

  const double half_d = 0.5 * dim;
  p.nx = static_cast<int>(safe_ceil(std::pow(reynolds, beta) / eta_L));
  p.t_star = safe_ceil(std::pow(reynolds, beta * (half_d + 1.0)) /
                       (eta_T * eta_u * std::pow(eta_L, half_d) * u0_star));
  p.tau_bar_star = 0.5 + 3.0 * u0_star * std::pow(eta_L, half_d) * eta_u /
                             std::pow(reynolds, beta * (half_d - 1.0) + 1.0);
  p.u_ini_star = u0_star / std::pow(static_cast<double>(p.nx), half_d);
  return p;
}

/// Shifted state of the whole lattice at one time step.
struct FluidState {
  std::vector<double> g;   ///< site-major populations, length N*Q
  long long t_star = 0;    ///< time index
};

/// Equilibrium state for per-site density deviations and velocities.
/// `u` holds D components per site, site-major.
inline FluidState equilibrium_state(const VelocityModel& vm,
                                    const Geometry& geom,
                                    const std::vector<double>& drho,
                                    const std::vector<double>& u) {
  const long long ns = geom.sites();
  require(static_cast<long long>(drho.size()) == ns, "drho field size mismatch");
  require(static_cast<long long>(u.size()) == ns * vm.dim, "u field size mismatch");
  FluidState st;
  st.g.assign(static_cast<std::size_t>(ns) * vm.q, 0.0);
  for (long long r = 0; r < ns; ++r) {
    std::array<double, 3> ur = {0, 0, 0};
    for (int k = 0; k < vm.dim; ++k) ur[k] = u[r * vm.dim + k];
    equilibrium(vm, drho[static_cast<std::size_t>(r)], ur,
                st.g.data() + r * vm.q);
  }
  return st;
}

enum class InitialStateKind { sinusoidal, colliding, taylor_green, gaussian_dipole };

/// Extra shape parameters for the initial-state families.
struct InitialStateParams {
  double phi = 0.25;          ///< colliding-state fraction, in (0, 1/2]
  double s = M_PI / 2.0;      ///< dipole half-separation
  double sigma = M_PI / 5.0;  ///< dipole vortex width
};

/// Velocity field of the requested family, scaled by u_ini_star, one
/// D-vector per site (site-major).  Exposed separately for testing.
inline std::vector<double> initial_velocity_field(InitialStateKind kind,
                                                  const InitialStateParams& isp,
                                                  const SimParams& sim,
                                                  const Geometry& geom) {
  const long long ns = geom.sites();
  std::vector<double> u(static_cast<std::size_t>(ns) * sim.dim, 0.0);
  const double ui = sim.u_ini_star;
  switch (kind) {
    case InitialStateKind::sinusoidal: {
      require(sim.dim == 1, "sinusoidal initial state is one-dimensional");
      for (long long r = 0; r < ns; ++r) {
        int x = geom.site_coord(r)[0];
        u[r] = ui * std::sin(2.0 * M_PI * x / geom.n[0]);
      }
      break;
    }
    case InitialStateKind::colliding: {
      require(sim.dim == 1, "colliding initial state is one-dimensional");
      require(isp.phi > 0.0 && isp.phi <= 0.5,
              "colliding fraction must lie in (0, 1/2]");
      const int nx = geom.n[0];
      const int slab = static_cast<int>(std::ceil(isp.phi * nx));
      for (long long r = 0; r < ns; ++r) {
        int x = geom.site_coord(r)[0];
        if (x <= slab)
          u[r] = ui;
        else if (x >= nx - slab + 1)
          u[r] = -ui;
      }
      break;
    }
    case InitialStateKind::taylor_green: {
      require(sim.dim == 2, "Taylor-Green initial state is two-dimensional");
      for (long long r = 0; r < ns; ++r) {
        auto c = geom.site_coord(r);
        double x = -M_PI + 2.0 * M_PI * c[0] / geom.n[0];
        double y = -M_PI + 2.0 * M_PI * c[1] / geom.n[1];
        u[r * 2 + 0] = ui * std::sin(x) * std::cos(y);
        u[r * 2 + 1] = -ui * std::cos(x) * std::sin(y);
      }
      break;
    }
    case InitialStateKind::gaussian_dipole: {
      require(sim.dim == 2, "Gaussian dipole initial state is two-dimensional");
      const double s = isp.s, s2 = isp.sigma * isp.sigma;
      for (long long r = 0; r < ns; ++r) {
        auto c = geom.site_coord(r);
        double x = -M_PI + 2.0 * M_PI * c[0] / geom.n[0];
        double y = -M_PI + 2.0 * M_PI * c[1] / geom.n[1];
        double e1 = std::exp(-((x - s) * (x - s) + y * y) / (2.0 * s2));
        double e2 = std::exp(-((x + s) * (x + s) + y * y) / (2.0 * s2));
        // u = (d psi / dy, -d psi / dx) for psi = e1 - e2, analytically
        u[r * 2 + 0] = ui * (-(y / s2) * (e1 - e2));
        u[r * 2 + 1] = ui * ((x - s) / s2 * e1 - (x + s) / s2 * e2);
      }
      break;
    }
  }
  return u;
}

/// Initial shifted state: the equilibrium of the family's velocity field
/// at zero density deviation.
inline FluidState initial_state(InitialStateKind kind,
                                const InitialStateParams& isp,
                                const SimParams& sim) {
  VelocityModel vm = velocity_model(sim.dim);
  Geometry geom = sim.geometry();
  std::vector<double> drho(static_cast<std::size_t>(geom.sites()), 0.0);
  std::vector<double> u = initial_velocity_field(kind, isp, sim, geom);
  return equilibrium_state(vm, geom, drho, u);
}

/// In-place single-step evolution: collide, then stream.
class LbeStepper {
 public:
  LbeStepper(const VelocityModel& vm, const Geometry& geom, double tau)
      : vm_(vm), geom_(geom), tau_(tau),
        dest_(stream_permutation(vm, geom)) {
    require(tau > 0.5, "relaxation time must exceed 1/2 for stability");
  }

  /// Advance one step; throws on NaN/Inf with the offending step index.
  void step(FluidState& st) const {
    collide(vm_, geom_, tau_, st.g);
    scratch_.assign(st.g.size(), 0.0);
    stream(dest_, st.g, scratch_);
    st.g.swap(scratch_);
    st.t_star += 1;
    double n = l2_norm(st.g);
    if (!std::isfinite(n))
      throw std::runtime_error("non-finite state at step " +
                               std::to_string(st.t_star));
  }

  const VelocityModel& model() const { return vm_; }
  const Geometry& geometry() const { return geom_; }

 private:
  VelocityModel vm_;
  Geometry geom_;
  double tau_;
  std::vector<long long> dest_;
  mutable std::vector<double> scratch_;
};

/// Full trajectory of the shifted LBE with per-step norm diagnostics.
struct Trajectory {
  std::vector<FluidState> states;  ///< states for t* = 0..T*
  std::vector<double> norms;       ///< ||g(t*)||_2 for each stored state
  bool norm_exceeded_one = false;  ///< diagnostic: some ||g|| went above 1
};

/// Run the reference dynamics for sim.t_star steps, storing every state.
inline Trajectory run_lbe(const FluidState& g0, const SimParams& sim,
                          const Geometry& geom) {
  VelocityModel vm = velocity_model(sim.dim);
  require(g0.g.size() == static_cast<std::size_t>(geom.sites()) * vm.q,
          "initial state size does not match the geometry");
  LbeStepper stepper(vm, geom, sim.tau_bar_star);

  Trajectory tr;
  tr.states.reserve(static_cast<std::size_t>(sim.t_star) + 1);
  tr.states.push_back(g0);
  tr.states.back().t_star = 0;
  tr.norms.push_back(l2_norm(g0.g));
  for (long long t = 1; t <= sim.t_star; ++t) {
    FluidState next = tr.states.back();
    stepper.step(next);
    tr.norms.push_back(l2_norm(next.g));
    if (tr.norms.back() > 1.0) tr.norm_exceeded_one = true;
    tr.states.push_back(std::move(next));
  }
  return tr;
}

}  // namespace qlbm
