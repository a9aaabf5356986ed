/// Unit tests for parameter selection, initial-state generation, and the
/// reference time stepper.

#include "qlbm/simulation.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace qlbm;

TEST(SelectParams, KnownRows) {
  SimParams a = select_params(1000, 0.75, 1);
  EXPECT_EQ(a.nx, 178);
  EXPECT_EQ(a.t_star, 2372);
  EXPECT_NEAR(a.tau_bar_star, 0.540, 5e-4);
  EXPECT_NEAR(a.u_ini_star, 0.0750, 5e-5);

  SimParams b = select_params(20, 0.75, 2);
  EXPECT_EQ(b.nx, 10);
  EXPECT_EQ(b.t_star, 90);
  EXPECT_NEAR(b.tau_bar_star, 0.65, 1e-12);
  EXPECT_NEAR(b.u_ini_star, 0.1, 1e-12);

  SimParams c = select_params(1, 0.75, 1);
  EXPECT_EQ(c.nx, 1);
  EXPECT_EQ(c.t_star, 1);
  EXPECT_NEAR(c.tau_bar_star, 3.5, 1e-12);
  EXPECT_NEAR(c.u_ini_star, 1.0, 1e-12);
}

TEST(SelectParams, IntegerPowersAreNotOffByOne) {
  // Re^{beta(D/2+1)} = 100^1.5 = 1000 exactly; pow noise must not bump it
  SimParams p = select_params(100, 0.75, 2);
  EXPECT_EQ(p.nx, 32);
  EXPECT_EQ(p.t_star, 1000);
}

TEST(SelectParams, RejectsBadArguments) {
  EXPECT_THROW(select_params(0.5, 0.75, 1), std::invalid_argument);
  EXPECT_THROW(select_params(10, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(select_params(10, 0.75, 4), std::invalid_argument);
}

TEST(SelectParams, TauAlwaysAboveHalf) {
  for (double re : {1.0, 2.0, 10.0, 1e3, 1e6, 1e12})
    for (int d : {1, 2, 3}) {
      SimParams p = select_params(re, 0.75, d);
      EXPECT_GT(p.tau_bar_star, 0.5);
    }
}

TEST(InitialState, SinusoidalFourSites) {
  SimParams sim;
  sim.dim = 1;
  sim.nx = 4;
  sim.u_ini_star = 0.1;
  Geometry geom = sim.geometry();
  auto u = initial_velocity_field(InitialStateKind::sinusoidal, {}, sim, geom);
  ASSERT_EQ(u.size(), 4u);
  EXPECT_NEAR(u[geom.site_index({1, 1, 1})], 0.1, 1e-15);
  EXPECT_NEAR(u[geom.site_index({2, 1, 1})], 0.0, 1e-15);
  EXPECT_NEAR(u[geom.site_index({3, 1, 1})], -0.1, 1e-15);
  EXPECT_NEAR(u[geom.site_index({4, 1, 1})], 0.0, 1e-15);

  // the state is the equilibrium of that field at zero density deviation
  FluidState st = initial_state(InitialStateKind::sinusoidal, {}, sim);
  VelocityModel vm = velocity_model(1);
  for (long long r = 0; r < geom.sites(); ++r) {
    Moments mo = moments(vm, st.g.data() + r * vm.q);
    EXPECT_NEAR(mo.drho, 0.0, 1e-15);
    EXPECT_NEAR(mo.u[0], u[static_cast<std::size_t>(r)], 1e-15);
  }
}

TEST(InitialState, CollidingSlabs) {
  SimParams sim;
  sim.dim = 1;
  sim.nx = 8;
  sim.u_ini_star = 0.2;
  InitialStateParams isp;
  isp.phi = 0.25;  // slab width ceil(0.25 * 8) = 2
  Geometry geom = sim.geometry();
  auto u = initial_velocity_field(InitialStateKind::colliding, isp, sim, geom);
  std::vector<double> expect = {0.2, 0.2, 0, 0, 0, 0, -0.2, -0.2};
  for (int x = 1; x <= 8; ++x)
    EXPECT_NEAR(u[geom.site_index({x, 1, 1})], expect[x - 1], 1e-15);
}

TEST(InitialState, CollidingRejectsBadFraction) {
  SimParams sim = select_params(10, 0.75, 1);
  InitialStateParams isp;
  isp.phi = 0.0;
  EXPECT_THROW(initial_state(InitialStateKind::colliding, isp, sim),
               std::invalid_argument);
  isp.phi = 0.6;
  EXPECT_THROW(initial_state(InitialStateKind::colliding, isp, sim),
               std::invalid_argument);
}

TEST(InitialState, DimensionMismatchRejected) {
  SimParams sim1 = select_params(10, 0.75, 1);
  SimParams sim2 = select_params(10, 0.75, 2);
  EXPECT_THROW(initial_state(InitialStateKind::taylor_green, {}, sim1),
               std::invalid_argument);
  EXPECT_THROW(initial_state(InitialStateKind::sinusoidal, {}, sim2),
               std::invalid_argument);
}

TEST(InitialState, TaylorGreenVanishesAtCenter) {
  SimParams sim;
  sim.dim = 2;
  sim.nx = 8;
  sim.u_ini_star = 0.05;
  Geometry geom = sim.geometry();
  auto u = initial_velocity_field(InitialStateKind::taylor_green, {}, sim, geom);
  // site (4, 4) maps to (x, y) = (0, 0) where both components vanish
  long long r = geom.site_index({4, 4, 1});
  EXPECT_NEAR(u[r * 2 + 0], 0.0, 1e-15);
  EXPECT_NEAR(u[r * 2 + 1], 0.0, 1e-15);
}

TEST(InitialState, DipoleMatchesFiniteDifferenceOracle) {
  // compare the analytic stream-function derivatives against central
  // differences of psi itself
  const double s = M_PI / 2.0, sigma = M_PI / 5.0, s2 = sigma * sigma;
  auto psi = [&](double x, double y) {
    return std::exp(-((x - s) * (x - s) + y * y) / (2 * s2)) -
           std::exp(-((x + s) * (x + s) + y * y) / (2 * s2));
  };
  SimParams sim;
  sim.dim = 2;
  sim.nx = 16;
  sim.u_ini_star = 1.0;
  Geometry geom = sim.geometry();
  auto u = initial_velocity_field(InitialStateKind::gaussian_dipole, {}, sim, geom);
  const double h = 1e-5;
  for (long long r = 0; r < geom.sites(); r += 7) {
    auto c = geom.site_coord(r);
    double x = -M_PI + 2.0 * M_PI * c[0] / 16.0;
    double y = -M_PI + 2.0 * M_PI * c[1] / 16.0;
    double ux = (psi(x, y + h) - psi(x, y - h)) / (2 * h);
    double uy = -(psi(x + h, y) - psi(x - h, y)) / (2 * h);
    EXPECT_NEAR(u[r * 2 + 0], ux, 1e-8);
    EXPECT_NEAR(u[r * 2 + 1], uy, 1e-8);
  }
}

TEST(RunLbe, ZeroStateStaysZero) {
  SimParams sim = select_params(5, 0.75, 1);
  Geometry geom = sim.geometry();
  FluidState g0;
  g0.g.assign(static_cast<std::size_t>(geom.sites()) * 3, 0.0);
  Trajectory tr = run_lbe(g0, sim, geom);
  ASSERT_EQ(tr.states.size(), static_cast<std::size_t>(sim.t_star) + 1);
  for (const auto& st : tr.states)
    for (double v : st.g) EXPECT_EQ(v, 0.0);
}

TEST(RunLbe, UniformFlowConservesMomentsAndNorm) {
  SimParams sim = select_params(10, 0.75, 1);
  Geometry geom = sim.geometry();
  VelocityModel vm = velocity_model(1);
  std::vector<double> drho(static_cast<std::size_t>(geom.sites()), 0.0);
  std::vector<double> u(static_cast<std::size_t>(geom.sites()), 0.07);
  FluidState g0 = equilibrium_state(vm, geom, drho, u);
  Trajectory tr = run_lbe(g0, sim, geom);
  for (std::size_t t = 0; t < tr.norms.size(); ++t)
    EXPECT_NEAR(tr.norms[t], tr.norms[0], 1e-12);
  const FluidState& last = tr.states.back();
  double mass = 0.0, mom = 0.0;
  for (long long r = 0; r < geom.sites(); ++r) {
    Moments mo = moments(vm, last.g.data() + r * vm.q);
    mass += mo.drho;
    mom += mo.u[0];
  }
  EXPECT_NEAR(mass, 0.0, 1e-12);
  EXPECT_NEAR(mom, 0.07 * geom.sites(), 1e-12);
}

TEST(RunLbe, SinusoidalNormStaysBelowOne) {
  SimParams sim = select_params(10, 0.75, 1);
  FluidState g0 = initial_state(InitialStateKind::sinusoidal, {}, sim);
  Trajectory tr = run_lbe(g0, sim, sim.geometry());
  for (double n : tr.norms) EXPECT_LE(n, 1.0);
  EXPECT_FALSE(tr.norm_exceeded_one);
}

TEST(RunLbe, Deterministic) {
  SimParams sim = select_params(15, 0.75, 1);
  FluidState g0 = initial_state(InitialStateKind::sinusoidal, {}, sim);
  Trajectory a = run_lbe(g0, sim, sim.geometry());
  Trajectory b = run_lbe(g0, sim, sim.geometry());
  EXPECT_EQ(a.states.back().g, b.states.back().g);
}

TEST(RunLbe, AbortsOnOverflow) {
  SimParams sim = select_params(5, 0.75, 1);
  Geometry geom = sim.geometry();
  FluidState g0;
  g0.g.assign(static_cast<std::size_t>(geom.sites()) * 3, 1e308);
  EXPECT_THROW(run_lbe(g0, sim, geom), std::runtime_error);
}

TEST(PhysicalAnchors, ChapmanEnskogConversion) {
  SimParams sim = select_params(100, 0.75, 1);
  sim.length = 2.0;
  sim.viscosity = 1e-3;
  double dx = sim.dx();
  double dt = sim.dt();
  EXPECT_NEAR(dx, 2.0 / sim.nx, 1e-15);
  // the viscosity closure: nu = (tau - 1/2) dx^2 / (3 dt)
  EXPECT_NEAR((sim.tau_bar_star - 0.5) * dx * dx / (3 * dt), 1e-3, 1e-15);
}
