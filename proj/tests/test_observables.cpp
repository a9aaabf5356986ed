#include "qlbm/observables.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "qlbm/lattice.hpp"
#include "qlbm/simulation.hpp"

namespace {

using qlbm::BoundaryState;
using qlbm::DragResult;
using qlbm::FluidState;
using qlbm::Geometry;
using qlbm::VelocityModel;

/// Two-dimensional box with one full wall row at height `wall_y`.
Geometry walled_box(int nx, int ny, int wall_y) {
  Geometry geom(2, {nx, ny, 1});
  for (int x = 1; x <= nx; ++x) geom.set_wall({x, wall_y, 1});
  return geom;
}

/// Deterministic synthetic state with no particular symmetry.
FluidState synthetic_state(const VelocityModel& vm, const Geometry& geom) {
  FluidState st;
  st.g.assign(static_cast<std::size_t>(geom.sites()) * vm.q, 0.0);
  for (long long r = 0; r < geom.sites(); ++r) {
    const std::array<int, 3> c = geom.site_coord(r);
    for (int m = 0; m < vm.q; ++m)
      st.g[static_cast<std::size_t>(r * vm.q + m)] =
          0.01 * std::sin(1.3 * c[0] + 2.1 * c[1] + 0.7 * m) + 0.002 * m;
  }
  return st;
}

TEST(DragForce, NoWallGivesZero) {
  VelocityModel vm = qlbm::velocity_model(2);
  Geometry geom(2, {5, 4, 1});
  FluidState st = synthetic_state(vm, geom);
  DragResult dr = qlbm::drag_force(st, vm, geom);
  for (int k = 0; k < 2; ++k) {
    EXPECT_DOUBLE_EQ(dr.f0_star[k], 0.0);
    EXPECT_DOUBLE_EQ(dr.components[k], 0.0);
    EXPECT_DOUBLE_EQ(dr.f_star[k], 0.0);
  }
}

TEST(DragForce, ZeroStateLeavesWallTerm) {
  VelocityModel vm = qlbm::velocity_model(2);
  Geometry geom = walled_box(6, 5, 3);
  FluidState zero;
  zero.g.assign(static_cast<std::size_t>(geom.sites()) * vm.q, 0.0);
  DragResult dr = qlbm::drag_force(zero, vm, geom);
  for (int k = 0; k < 2; ++k) {
    EXPECT_DOUBLE_EQ(dr.components[k], 0.0);
    EXPECT_DOUBLE_EQ(dr.f_star[k], dr.f0_star[k]);
  }
}

TEST(DragForce, MatchesBruteForceLinkSum) {
  // Independent double loop over coordinates with explicit wrap-around and
  // an inline wall predicate for a flat wall at y = 3.
  const int nx = 6, ny = 5, wall_y = 3;
  VelocityModel vm = qlbm::velocity_model(2);
  Geometry geom = walled_box(nx, ny, wall_y);
  FluidState st = synthetic_state(vm, geom);

  double f0[2] = {0.0, 0.0};
  double comp[2] = {0.0, 0.0};
  auto is_wall = [&](int /*x*/, int y) { return y == wall_y; };
  auto flat = [&](int x, int y) {
    return (static_cast<long long>(x - 1) * ny + (y - 1)) * vm.q;
  };
  for (int x = 1; x <= nx; ++x) {
    for (int y = 1; y <= ny; ++y) {
      if (is_wall(x, y)) continue;
      for (int m = 0; m < vm.q; ++m) {
        const int xn = (x - 1 + vm.e[m][0] + nx) % nx + 1;
        const int yn = (y - 1 + vm.e[m][1] + ny) % ny + 1;
        if (!is_wall(xn, yn)) continue;
        for (int k = 0; k < 2; ++k) {
          f0[k] += 2.0 * vm.w[m] * vm.e[m][k];
          comp[k] += (st.g[flat(x, y) + m] +
                      st.g[flat(x, y) + vm.opposite[m]]) *
                     vm.e[m][k];
        }
      }
    }
  }
  DragResult dr = qlbm::drag_force(st, vm, geom);
  for (int k = 0; k < 2; ++k) {
    EXPECT_NEAR(dr.f0_star[k], f0[k], 1e-14);
    EXPECT_NEAR(dr.components[k], comp[k], 1e-14);
    EXPECT_NEAR(dr.f_star[k], f0[k] + comp[k], 1e-14);
  }
}

TEST(DragForce, AdditiveOverDisjointWallComponents) {
  // Two wall rows separated by more than one site: every fluid-to-wall link
  // belongs to exactly one component.
  const int nx = 5, ny = 8;
  VelocityModel vm = qlbm::velocity_model(2);
  Geometry both(2, {nx, ny, 1});
  for (int x = 1; x <= nx; ++x) {
    both.set_wall({x, 2, 1});
    both.set_wall({x, 6, 1});
  }
  Geometry low = walled_box(nx, ny, 2);
  Geometry high = walled_box(nx, ny, 6);
  FluidState st = synthetic_state(vm, both);
  DragResult db = qlbm::drag_force(st, vm, both);
  DragResult dl = qlbm::drag_force(st, vm, low);
  DragResult dh = qlbm::drag_force(st, vm, high);
  for (int k = 0; k < 2; ++k) {
    EXPECT_NEAR(db.f0_star[k], dl.f0_star[k] + dh.f0_star[k], 1e-14);
    EXPECT_NEAR(db.components[k], dl.components[k] + dh.components[k],
                1e-14);
  }
}

TEST(DragForce, MirrorReflectionFlipsComponent) {
  // Reflecting the state through the x mirror of an x-symmetric geometry
  // flips the x drag component and preserves the y component.
  const int nx = 6, ny = 5;
  VelocityModel vm = qlbm::velocity_model(2);
  Geometry geom = walled_box(nx, ny, 3);
  FluidState st = synthetic_state(vm, geom);
  FluidState mirrored;
  mirrored.g.assign(st.g.size(), 0.0);
  for (long long r = 0; r < geom.sites(); ++r) {
    const std::array<int, 3> c = geom.site_coord(r);
    const long long rm = geom.site_index({nx + 1 - c[0], c[1], 1});
    for (int m = 0; m < vm.q; ++m) {
      const int mm = vm.index_of({-vm.e[m][0], vm.e[m][1], 0});
      mirrored.g[static_cast<std::size_t>(rm * vm.q + mm)] =
          st.g[static_cast<std::size_t>(r * vm.q + m)];
    }
  }
  DragResult d0 = qlbm::drag_force(st, vm, geom);
  DragResult d1 = qlbm::drag_force(mirrored, vm, geom);
  EXPECT_NEAR(d1.components[0], -d0.components[0], 1e-14);
  EXPECT_NEAR(d1.components[1], d0.components[1], 1e-14);
  EXPECT_NEAR(d1.f0_star[0], d0.f0_star[0], 1e-14);
  EXPECT_NEAR(d1.f0_star[1], d0.f0_star[1], 1e-14);
}

TEST(DragForce, OneDimensionalChannel) {
  // A single wall site is hit from both sides; the equilibrium terms
  // cancel and the state terms difference the two adjacent pair sums.
  VelocityModel vm = qlbm::velocity_model(1);
  Geometry geom(1, {6, 1, 1});
  geom.set_wall({4, 1, 1});
  FluidState st = synthetic_state(vm, geom);
  DragResult dr = qlbm::drag_force(st, vm, geom);
  EXPECT_NEAR(dr.f0_star[0], 0.0, 1e-15);
  const long long left = geom.site_index({3, 1, 1});
  const long long right = geom.site_index({5, 1, 1});
  const double pl = st.g[left * vm.q + 1] + st.g[left * vm.q + 2];
  const double pr = st.g[right * vm.q + 1] + st.g[right * vm.q + 2];
  EXPECT_NEAR(dr.components[0], pl - pr, 1e-15);
}

TEST(DragForce, PhysicalConversionFactor) {
  VelocityModel vm = qlbm::velocity_model(2);
  Geometry geom = walled_box(4, 4, 2);
  FluidState st = synthetic_state(vm, geom);
  qlbm::SimParams sim;
  sim.dim = 2;
  sim.nx = 4;
  sim.reynolds = 50.0;
  sim.tau_bar_star = 0.8;
  DragResult plain = qlbm::drag_force(st, vm, geom, sim);
  EXPECT_DOUBLE_EQ(plain.conversion, 1.0);
  sim.length = 2.0;
  sim.viscosity = 0.01;
  DragResult phys = qlbm::drag_force(st, vm, geom, sim);
  EXPECT_DOUBLE_EQ(phys.conversion, sim.dx() * sim.dx() / sim.dt());
  // Lattice-unit entries are unchanged by the anchors.
  EXPECT_DOUBLE_EQ(phys.f_star[0], plain.f_star[0]);
}

// ---------------------------------------------------------------------------
// Boundary states
// ---------------------------------------------------------------------------

TEST(BoundaryStates, FlatWallSupportCounts) {
  // Flat wall of M sites in D = 2: the x component collects the four
  // diagonal slots per adjacent site (2 links x 2 velocity slots), the y
  // component additionally the axis pair, on both sides of the wall.
  const int nx = 7, ny = 5;
  VelocityModel vm = qlbm::velocity_model(2);
  Geometry geom = walled_box(nx, ny, 3);
  BoundaryState bx = qlbm::boundary_state(vm, geom, 0);
  BoundaryState by = qlbm::boundary_state(vm, geom, 1);
  EXPECT_EQ(bx.support, 8LL * nx);
  EXPECT_EQ(by.support, 12LL * nx);
  // All amplitudes are +-1, so the normalization equals the support.
  EXPECT_DOUBLE_EQ(bx.normalization, static_cast<double>(bx.support));
  EXPECT_DOUBLE_EQ(by.normalization, static_cast<double>(by.support));
}

TEST(BoundaryStates, SupportRespectsLinkCondition) {
  VelocityModel vm = qlbm::velocity_model(2);
  Geometry geom = walled_box(6, 5, 3);
  BoundaryState bs = qlbm::boundary_state(vm, geom, 0);
  for (long long r = 0; r < geom.sites(); ++r) {
    for (int m = 0; m < vm.q; ++m) {
      const double a = bs.amplitude[static_cast<std::size_t>(r * vm.q + m)];
      if (a == 0.0) continue;
      // Amplitude may only sit on a fluid site whose m or -m link points
      // into the wall with a nonzero x component.
      EXPECT_FALSE(geom.is_wall(r));
      const bool direct = geom.is_wall(geom.neighbor(r, vm.e[m])) &&
                          vm.e[m][0] != 0;
      const int mo = vm.opposite[m];
      const bool paired = geom.is_wall(geom.neighbor(r, vm.e[mo])) &&
                          vm.e[mo][0] != 0;
      EXPECT_TRUE(direct || paired) << "site " << r << " vel " << m;
    }
  }
}

TEST(BoundaryStates, EmptySupportIsExplicit) {
  VelocityModel vm = qlbm::velocity_model(2);
  Geometry geom(2, {4, 4, 1});  // no walls
  BoundaryState bs = qlbm::boundary_state(vm, geom, 0);
  EXPECT_EQ(bs.support, 0);
  EXPECT_DOUBLE_EQ(bs.normalization, 0.0);
  FluidState st = synthetic_state(vm, geom);
  EXPECT_THROW(qlbm::boundary_overlap(bs, st), std::invalid_argument);
}

TEST(BoundaryStates, OverlapIdentityMatchesDragComponent) {
  // Both sides of the identity <W_k|g/||g||> ||g|| sqrt(N) = F_k computed
  // through independent code paths, on random states.
  std::mt19937 rng(4242);
  std::normal_distribution<double> gauss(0.0, 0.05);
  for (int dim : {1, 2}) {
    VelocityModel vm = qlbm::velocity_model(dim);
    Geometry geom = dim == 1 ? Geometry(1, {8, 1, 1})
                             : walled_box(6, 5, 3);
    if (dim == 1) geom.set_wall({4, 1, 1});
    FluidState st;
    st.g.resize(static_cast<std::size_t>(geom.sites()) * vm.q);
    for (double& v : st.g) v = gauss(rng);
    DragResult dr = qlbm::drag_force(st, vm, geom);
    for (int k = 0; k < dim; ++k) {
      BoundaryState bs = qlbm::boundary_state(vm, geom, k);
      EXPECT_NEAR(qlbm::overlap_check(bs, st), dr.components[k], 1e-12)
          << "D=" << dim << " k=" << k;
    }
  }
}

TEST(BoundaryStates, OverlapMagnitudeDecaysAsInverseSqrtExtent) {
  // Square boxes with a wall row through the middle and a state whose
  // pair sums differ on the two sides: the normalized overlap follows
  // O(1/sqrt(Nx)) as the box doubles.
  VelocityModel vm = qlbm::velocity_model(2);
  std::vector<double> overlaps;
  for (int ell : {8, 16, 32, 64}) {
    Geometry geom = walled_box(ell, ell, ell / 2);
    FluidState st;
    st.g.assign(static_cast<std::size_t>(geom.sites()) * vm.q, 0.0);
    for (long long r = 0; r < geom.sites(); ++r) {
      const std::array<int, 3> c = geom.site_coord(r);
      const double side = c[1] <= ell / 2 ? 1.0 : -1.0;
      for (int m = 0; m < vm.q; ++m)
        st.g[static_cast<std::size_t>(r * vm.q + m)] =
            vm.w[static_cast<std::size_t>(m)] * (1.0 + 0.4 * side);
    }
    BoundaryState bs = qlbm::boundary_state(vm, geom, 1);
    overlaps.push_back(std::abs(qlbm::boundary_overlap(bs, st)));
  }
  for (std::size_t i = 1; i < overlaps.size(); ++i) {
    const double ratio = overlaps[i] / overlaps[i - 1];
    EXPECT_GT(ratio, 0.6) << "doubling " << i;
    EXPECT_LT(ratio, 0.8) << "doubling " << i;
  }
}

}  // namespace
