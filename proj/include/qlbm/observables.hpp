#pragma once
/// Boundary observables of the shifted lattice Boltzmann state.
///
/// The drag force on a wall follows from momentum exchange: every link from
/// a fluid site r to a wall site r + e_m transfers the paired populations
/// g_m(r) + g_{-m}(r) plus the zero-velocity equilibrium share 2 w_m along
/// e_m each step.  In lattice units a step has unit length and duration, so
/// the force equals the total exchanged momentum.  The same link sums can
/// be read off a quantum encoding of the state: the boundary state for axis
/// k places amplitude (e_m)_k on |r>(|m> + |-m>) for each wall link, and
/// its overlap with the normalized state reproduces the drag component
/// after scaling back by the state norm and the boundary normalization.

#include <cmath>
#include <cstddef>
#include <vector>

#include "qlbm/common.hpp"
#include "qlbm/lattice.hpp"
#include "qlbm/simulation.hpp"

namespace qlbm {

// ---------------------------------------------------------------------------
// Drag force by momentum exchange
// ---------------------------------------------------------------------------

/// Drag force of one state, one entry per spatial axis.  `f0_star` is the
/// state-independent wall term, `components` the state-dependent link sums
/// F_k, and `f_star` their total; all in lattice units.  `conversion` is
/// the factor to physical units (dx^2/dt times a unit reference mass) and
/// stays 1 without physical anchors.
struct DragResult {
  std::vector<double> f0_star;
  std::vector<double> components;
  std::vector<double> f_star;
  double conversion = 1.0;
};

/// Momentum-exchange drag of a shifted state on the walls of `geom`:
///
///   F* = F0* + sum_{r,m} W_{r+e_m} (1 - W_r) (g_m(r) + g_{-m}(r)) e_m,
///   F0* = sum_{r,m} W_{r+e_m} (1 - W_r) 2 w_m e_m.
///
/// Without wall sites every entry is zero.
inline DragResult drag_force(const FluidState& state, const VelocityModel& vm,
                             const Geometry& geom) {
  require(static_cast<long long>(state.g.size()) == geom.sites() * vm.q,
          "state size does not match geometry");
  DragResult dr;
  dr.f0_star.assign(vm.dim, 0.0);
  dr.components.assign(vm.dim, 0.0);
  dr.f_star.assign(vm.dim, 0.0);
  const long long ns = geom.sites();
  for (long long r = 0; r < ns; ++r) {
    if (geom.is_wall(r)) continue;
    for (int m = 0; m < vm.q; ++m) {
      if (!geom.is_wall(geom.neighbor(r, vm.e[m]))) continue;
      const double pair = state.g[static_cast<std::size_t>(r * vm.q + m)] +
                          state.g[static_cast<std::size_t>(
                              r * vm.q + vm.opposite[m])];
      for (int k = 0; k < vm.dim; ++k) {
        dr.f0_star[static_cast<std::size_t>(k)] +=
            2.0 * vm.w[static_cast<std::size_t>(m)] * vm.e[m][k];
        dr.components[static_cast<std::size_t>(k)] += pair * vm.e[m][k];
      }
    }
  }
  for (int k = 0; k < vm.dim; ++k)
    dr.f_star[static_cast<std::size_t>(k)] =
        dr.f0_star[static_cast<std::size_t>(k)] +
        dr.components[static_cast<std::size_t>(k)];
  return dr;
}

/// Same drag with the physical conversion factor attached when the
/// simulation carries length and viscosity anchors.
inline DragResult drag_force(const FluidState& state, const VelocityModel& vm,
                             const Geometry& geom, const SimParams& sim) {
  DragResult dr = drag_force(state, vm, geom);
  if (sim.length.has_value() && sim.viscosity.has_value())
    dr.conversion = sim.dx() * sim.dx() / sim.dt();
  return dr;
}

// ---------------------------------------------------------------------------
// Boundary states and overlaps
// ---------------------------------------------------------------------------

/// Unnormalized boundary state for one drag component: amplitude
/// W_{r+e_m}(1 - W_r)(e_m)_k accumulated on both |r>|m> and |r>|-m> per
/// wall link, stored site-major like FluidState::g.  Opposed wall links at
/// the same site cancel, mirroring the cancellation of their momentum
/// exchange.
struct BoundaryState {
  int axis = 0;
  std::vector<double> amplitude;
  double normalization = 0.0;  ///< sum of squared amplitudes
  long long support = 0;       ///< number of nonzero amplitudes
};

inline BoundaryState boundary_state(const VelocityModel& vm,
                                    const Geometry& geom, int axis) {
  require(axis >= 0 && axis < vm.dim, "component axis out of range");
  BoundaryState bs;
  bs.axis = axis;
  bs.amplitude.assign(static_cast<std::size_t>(geom.sites()) * vm.q, 0.0);
  const long long ns = geom.sites();
  for (long long r = 0; r < ns; ++r) {
    if (geom.is_wall(r)) continue;
    for (int m = 0; m < vm.q; ++m) {
      if (vm.e[m][axis] == 0) continue;
      if (!geom.is_wall(geom.neighbor(r, vm.e[m]))) continue;
      const double a = vm.e[m][axis];
      bs.amplitude[static_cast<std::size_t>(r * vm.q + m)] += a;
      bs.amplitude[static_cast<std::size_t>(r * vm.q + vm.opposite[m])] += a;
    }
  }
  for (double a : bs.amplitude) {
    bs.normalization += a * a;
    bs.support += a != 0.0;
  }
  return bs;
}

/// Overlap of the normalized boundary state with the normalized fluid
/// state, <W_k | g / ||g||>.  Requires nonempty boundary support and a
/// nonzero state.
inline double boundary_overlap(const BoundaryState& bs,
                               const FluidState& state) {
  require(bs.amplitude.size() == state.g.size(),
          "boundary state size does not match fluid state");
  require(bs.normalization > 0.0, "boundary state has empty support");
  double dot = 0.0;
  double nrm2 = 0.0;
  for (std::size_t i = 0; i < bs.amplitude.size(); ++i) {
    dot += bs.amplitude[i] * state.g[i];
    nrm2 += state.g[i] * state.g[i];
  }
  require(nrm2 > 0.0, "fluid state has zero norm");
  return dot / (std::sqrt(bs.normalization) * std::sqrt(nrm2));
}

/// Round trip of the overlap identity: the overlap scaled back by the
/// state norm and sqrt of the boundary normalization,
///
///   <W_k | g / ||g||> ||g|| sqrt(N_W) = F_k,
///
/// computed entirely from the boundary-state side so it can be checked
/// against the momentum-exchange component from drag_force.
inline double overlap_check(const BoundaryState& bs,
                            const FluidState& state) {
  double nrm2 = 0.0;
  for (double v : state.g) nrm2 += v * v;
  return boundary_overlap(bs, state) * std::sqrt(nrm2) *
         std::sqrt(bs.normalization);
}

}  // namespace qlbm
