/// Unit tests for the velocity models, geometry indexing, local collision,
/// and the streaming permutation (periodic wrap plus bounce-back walls).

#include "qlbm/lattice.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace qlbm;

namespace {

std::vector<double> random_field(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  std::vector<double> g(n);
  for (double& v : g) v = dist(rng);
  return g;
}

}  // namespace

TEST(VelocityModel, SizesAndOrdering) {
  for (int d = 1; d <= 3; ++d) {
    VelocityModel vm = velocity_model(d);
    int q = 1;
    for (int k = 0; k < d; ++k) q *= 3;
    EXPECT_EQ(vm.q, q);
    EXPECT_EQ(static_cast<int>(vm.e.size()), q);
    EXPECT_EQ(vm.e[0], (std::array<int, 3>{0, 0, 0}));
  }
  VelocityModel vm2 = velocity_model(2);
  EXPECT_EQ(vm2.e[1], (std::array<int, 3>{1, 0, 0}));
  EXPECT_EQ(vm2.e[2], (std::array<int, 3>{-1, 0, 0}));
  EXPECT_EQ(vm2.e[3], (std::array<int, 3>{0, 1, 0}));
  EXPECT_EQ(vm2.e[4], (std::array<int, 3>{0, -1, 0}));
}

TEST(VelocityModel, WeightsAndOppositeInvariants) {
  for (int d = 1; d <= 3; ++d) {
    VelocityModel vm = velocity_model(d);
    double sum = 0.0;
    std::array<double, 3> first = {0, 0, 0};
    std::array<std::array<double, 3>, 3> second = {};
    for (int m = 0; m < vm.q; ++m) {
      sum += vm.w[m];
      for (int k = 0; k < d; ++k) {
        first[k] += vm.w[m] * vm.e[m][k];
        for (int l = 0; l < d; ++l)
          second[k][l] += vm.w[m] * vm.e[m][k] * vm.e[m][l];
      }
      // opposite is an involution that negates the vector
      EXPECT_EQ(vm.opposite[vm.opposite[m]], m);
      for (int k = 0; k < 3; ++k)
        EXPECT_EQ(vm.e[vm.opposite[m]][k], -vm.e[m][k]);
    }
    EXPECT_NEAR(sum, 1.0, 1e-15);
    for (int k = 0; k < d; ++k) {
      EXPECT_NEAR(first[k], 0.0, 1e-15);
      for (int l = 0; l < d; ++l)
        EXPECT_NEAR(second[k][l], (k == l) ? 1.0 / 3.0 : 0.0, 1e-15);
    }
  }
}

TEST(VelocityModel, SpecificWeights) {
  VelocityModel v1 = velocity_model(1);
  EXPECT_DOUBLE_EQ(v1.w[0], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(v1.w[1], 1.0 / 6.0);
  VelocityModel v3 = velocity_model(3);
  EXPECT_DOUBLE_EQ(v3.w[0], 8.0 / 27.0);
  EXPECT_DOUBLE_EQ(v3.w[v3.index_of({1, 0, 0})], 2.0 / 27.0);
  EXPECT_DOUBLE_EQ(v3.w[v3.index_of({1, 1, 0})], 1.0 / 54.0);
  EXPECT_DOUBLE_EQ(v3.w[v3.index_of({1, 1, 1})], 1.0 / 216.0);
}

TEST(Geometry, IndexRoundTripRowMajorLastFastest) {
  Geometry g(3, {4, 3, 5});
  EXPECT_EQ(g.sites(), 60);
  // last coordinate fastest: (1,1,1)->0, (1,1,2)->1, (1,2,1)->5, (2,1,1)->15
  EXPECT_EQ(g.site_index({1, 1, 1}), 0);
  EXPECT_EQ(g.site_index({1, 1, 2}), 1);
  EXPECT_EQ(g.site_index({1, 2, 1}), 5);
  EXPECT_EQ(g.site_index({2, 1, 1}), 15);
  for (long long i = 0; i < g.sites(); ++i)
    EXPECT_EQ(g.site_index(g.site_coord(i)), i);
  EXPECT_THROW(g.site_index({0, 1, 1}), std::invalid_argument);
  EXPECT_THROW(g.site_index({1, 4, 1}), std::invalid_argument);
}

TEST(Geometry, PeriodicNeighbor) {
  Geometry g(2, {4, 3, 1});
  long long r = g.site_index({4, 3, 1});
  EXPECT_EQ(g.neighbor(r, {1, 0, 0}), g.site_index({1, 3, 1}));
  EXPECT_EQ(g.neighbor(r, {0, 1, 0}), g.site_index({4, 1, 1}));
  EXPECT_EQ(g.neighbor(r, {-1, -1, 0}), g.site_index({3, 2, 1}));
}

TEST(Equilibrium, KnownD1Values) {
  VelocityModel vm = velocity_model(1);
  double geq[3];
  equilibrium(vm, 0.0, {0.1, 0.0, 0.0}, geq);
  EXPECT_NEAR(geq[0], -0.01, 1e-15);
  EXPECT_NEAR(geq[1], 0.055, 1e-15);
  EXPECT_NEAR(geq[2], -0.045, 1e-15);
}

TEST(Collision, KnownD1Relaxation) {
  VelocityModel vm = velocity_model(1);
  double g[3] = {0.1, 0.05, -0.05};
  collide_site(vm, 1.0, g);
  // tau = 1 relaxes straight to equilibrium of (drho, u) = (0.1, 0.1)
  EXPECT_NEAR(g[0], 0.17 / 3.0, 1e-15);
  EXPECT_NEAR(g[1], 0.43 / 6.0, 1e-15);
  EXPECT_NEAR(g[2], -0.17 / 6.0, 1e-15);
  EXPECT_NEAR(g[0], 0.056667, 5e-7);
  EXPECT_NEAR(g[1], 0.071667, 5e-7);
  EXPECT_NEAR(g[2], -0.028333, 5e-7);
}

TEST(Collision, ConservesMassAndMomentum) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> dist(-0.2, 0.2);
  for (int d = 1; d <= 3; ++d) {
    VelocityModel vm = velocity_model(d);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> g(vm.q);
      for (double& v : g) v = dist(rng);
      Moments before = moments(vm, g.data());
      collide_site(vm, 0.7, g.data());
      Moments after = moments(vm, g.data());
      EXPECT_NEAR(after.drho, before.drho, 1e-13);
      for (int k = 0; k < d; ++k) EXPECT_NEAR(after.u[k], before.u[k], 1e-13);
    }
  }
}

TEST(Collision, EquilibriumIsFixedPoint) {
  for (int d = 1; d <= 3; ++d) {
    VelocityModel vm = velocity_model(d);
    double geq[27], g[27];
    equilibrium(vm, 0.03, {0.05, -0.02, 0.01}, geq);
    std::copy(geq, geq + vm.q, g);
    collide_site(vm, 0.63, g);
    for (int m = 0; m < vm.q; ++m) EXPECT_NEAR(g[m], geq[m], 1e-14);
  }
}

TEST(Streaming, PermutationWithoutWalls) {
  VelocityModel vm = velocity_model(2);
  Geometry geom(2, {4, 4, 1});
  auto dest = stream_permutation(vm, geom);
  std::vector<long long> sorted = dest;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i)
    EXPECT_EQ(sorted[i], static_cast<long long>(i));

  long long r = geom.site_index({2, 3, 1});
  long long rr = geom.site_index({3, 3, 1});
  EXPECT_EQ(dest[r * vm.q + 1], rr * vm.q + 1);  // velocity (+1, 0)
}

TEST(Streaming, BounceBackAtWall) {
  VelocityModel vm = velocity_model(1);
  Geometry geom(1, {4, 1, 1});
  geom.set_wall({2, 1, 1});
  auto dest = stream_permutation(vm, geom);
  std::vector<long long> sorted = dest;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i)
    EXPECT_EQ(sorted[i], static_cast<long long>(i));

  long long x1 = geom.site_index({1, 1, 1});
  long long x2 = geom.site_index({2, 1, 1});
  long long x3 = geom.site_index({3, 1, 1});
  // (x=1, +1) would enter the wall at x=2: it bounces back to (x=1, -1)
  EXPECT_EQ(dest[x1 * 3 + 1], x1 * 3 + 2);
  // (x=3, -1) likewise bounces to (x=3, +1)
  EXPECT_EQ(dest[x3 * 3 + 2], x3 * 3 + 1);
  // the wall site itself is frozen
  for (int m = 0; m < 3; ++m) EXPECT_EQ(dest[x2 * 3 + m], x2 * 3 + m);
}

TEST(Streaming, PreservesPopulationsExactly) {
  VelocityModel vm = velocity_model(2);
  Geometry geom(2, {6, 4, 1});
  geom.set_wall({3, 2, 1});
  geom.set_wall({3, 3, 1});
  auto dest = stream_permutation(vm, geom);
  auto g = random_field(static_cast<std::size_t>(geom.sites()) * vm.q, 42);
  std::vector<double> out;
  stream(dest, g, out);

  std::vector<double> a = g, b = out;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);  // bitwise multiset equality: the norm is exactly kept
}

TEST(Streaming, WallSitesUntouchedByFieldStream) {
  VelocityModel vm = velocity_model(2);
  Geometry geom(2, {5, 5, 1});
  geom.set_wall({2, 2, 1});
  auto dest = stream_permutation(vm, geom);
  auto g = random_field(static_cast<std::size_t>(geom.sites()) * vm.q, 3);
  std::vector<double> out;
  stream(dest, g, out);
  long long wsite = geom.site_index({2, 2, 1});
  for (int m = 0; m < vm.q; ++m)
    EXPECT_EQ(out[wsite * vm.q + m], g[wsite * vm.q + m]);
}
