#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "qlbm/common.hpp"

namespace qlbm {

/// Discrete velocity set of the D-dimensional tensor-product lattice
/// (D1Q3, D2Q9, D3Q27) in the incompressible, shifted formulation.
///
/// Velocity ordering is fixed once and used everywhere: the rest velocity
/// first, then the axis pairs (+x, -x, +y, -y, +z, -z), then the remaining
/// vectors in ascending lexicographic order.  Weights factorize per axis:
/// w1(0) = 2/3 and w1(+-1) = 1/6, so w_m is their product over axes.
struct VelocityModel {
  int dim = 1;                           ///< spatial dimension D in {1,2,3}
  int q = 3;                             ///< number of velocities, 3^D
  std::vector<std::array<int, 3>> e;     ///< velocity vectors, unused axes 0
  std::vector<double> w;                 ///< lattice weights, sum to 1
  std::vector<int> opposite;             ///< index m' with e[m'] = -e[m]
  std::vector<int> gram;                 ///< Gram matrix e[m].e[m1], q x q

  /// Index of a velocity vector; throws if it is not on the lattice.
  int index_of(const std::array<int, 3>& v) const {
    for (int m = 0; m < q; ++m)
      if (e[m] == v) return m;
    throw std::invalid_argument("velocity vector not on the lattice");
  }
};

/// Build the velocity model for dimension D in {1,2,3}.
inline VelocityModel velocity_model(int dim) {
  require(dim >= 1 && dim <= 3, "dimension must be 1, 2, or 3");
  VelocityModel m;
  m.dim = dim;
  m.q = 1;
  for (int k = 0; k < dim; ++k) m.q *= 3;

  // Rest velocity, then axis pairs.
  m.e.push_back({0, 0, 0});
  for (int k = 0; k < dim; ++k) {
    std::array<int, 3> plus = {0, 0, 0}, minus = {0, 0, 0};
    plus[k] = 1;
    minus[k] = -1;
    m.e.push_back(plus);
    m.e.push_back(minus);
  }
  // Remaining vectors in ascending lexicographic order.
  std::vector<std::array<int, 3>> rest;
  std::array<int, 3> v = {0, 0, 0};
  auto is_listed = [&m](const std::array<int, 3>& x) {
    for (const auto& y : m.e)
      if (x == y) return true;
    return false;
  };
  for (int x = -1; x <= (dim >= 1 ? 1 : -1); ++x)
    for (int y = (dim >= 2 ? -1 : 0); y <= (dim >= 2 ? 1 : 0); ++y)
      for (int z = (dim >= 3 ? -1 : 0); z <= (dim >= 3 ? 1 : 0); ++z) {
        v = {x, y, z};
        if (!is_listed(v)) rest.push_back(v);
      }
  m.e.insert(m.e.end(), rest.begin(), rest.end());

  const double w1[3] = {2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0};  // 0, +1, -1
  for (int i = 0; i < m.q; ++i) {
    double w = 1.0;
    for (int k = 0; k < dim; ++k) w *= w1[m.e[i][k] == 0 ? 0 : 1];
    m.w.push_back(w);
  }
  for (int i = 0; i < m.q; ++i) {
    std::array<int, 3> neg = {-m.e[i][0], -m.e[i][1], -m.e[i][2]};
    m.opposite.push_back(m.index_of(neg));
  }
  m.gram.assign(static_cast<std::size_t>(m.q) * m.q, 0);
  for (int i = 0; i < m.q; ++i)
    for (int j = 0; j < m.q; ++j)
      for (int k = 0; k < dim; ++k)
        m.gram[i * m.q + j] += m.e[i][k] * m.e[j][k];
  return m;
}

/// Periodic box of extents n[0..D-1] with an optional interior wall mask.
///
/// Site coordinates are 1-based in all user-facing interfaces.  Storage is
/// row-major with the last coordinate fastest, zero-based internally.
struct Geometry {
  int dim = 1;
  std::array<int, 3> n = {1, 1, 1};   ///< extents; unused axes stay 1
  std::vector<std::uint8_t> wall;     ///< per-site flag, 1 = wall site

  Geometry() = default;
  Geometry(int dim_, std::array<int, 3> extents) : dim(dim_), n(extents) {
    for (int k = dim; k < 3; ++k) n[k] = 1;
    for (int k = 0; k < dim; ++k)
      require(n[k] >= 1, "lattice extent must be positive");
    wall.assign(static_cast<std::size_t>(sites()), 0);
  }

  long long sites() const {
    return static_cast<long long>(n[0]) * n[1] * n[2];
  }

  /// Flat index of a 1-based coordinate tuple.
  long long site_index(const std::array<int, 3>& c) const {
    long long idx = 0;
    for (int k = 0; k < dim; ++k) {
      require(c[k] >= 1 && c[k] <= n[k], "coordinate out of range");
      idx = idx * n[k] + (c[k] - 1);
    }
    return idx;
  }

  /// 1-based coordinates of a flat site index.
  std::array<int, 3> site_coord(long long idx) const {
    std::array<int, 3> c = {1, 1, 1};
    for (int k = dim - 1; k >= 0; --k) {
      c[k] = static_cast<int>(idx % n[k]) + 1;
      idx /= n[k];
    }
    return c;
  }

  /// Flat index of the periodic neighbor one step e away from site idx.
  long long neighbor(long long idx, const std::array<int, 3>& e) const {
    std::array<int, 3> c = site_coord(idx);
    for (int k = 0; k < dim; ++k) {
      int x = c[k] - 1 + e[k];
      x = (x % n[k] + n[k]) % n[k];
      c[k] = x + 1;
    }
    return site_index(c);
  }

  void set_wall(const std::array<int, 3>& c, bool is_wall = true) {
    wall[static_cast<std::size_t>(site_index(c))] = is_wall ? 1 : 0;
  }
  bool is_wall(long long idx) const { return wall[static_cast<std::size_t>(idx)] != 0; }

  long long fluid_sites() const {
    long long f = 0;
    for (auto b : wall) f += (b == 0);
    return f;
  }
};

/// Macroscopic moments of a single-site shifted state: density deviation
/// and momentum (which equals the velocity of the incompressible model).
struct Moments {
  double drho = 0.0;
  std::array<double, 3> u = {0.0, 0.0, 0.0};
};

inline Moments moments(const VelocityModel& vm, const double* g) {
  Moments mo;
  for (int m = 0; m < vm.q; ++m) {
    mo.drho += g[m];
    for (int k = 0; k < vm.dim; ++k) mo.u[k] += g[m] * vm.e[m][k];
  }
  return mo;
}

/// Shifted equilibrium: exactly quadratic in (drho, u).
inline void equilibrium(const VelocityModel& vm, double drho,
                        const std::array<double, 3>& u, double* geq) {
  double uu = 0.0;
  for (int k = 0; k < vm.dim; ++k) uu += u[k] * u[k];
  for (int m = 0; m < vm.q; ++m) {
    double eu = 0.0;
    for (int k = 0; k < vm.dim; ++k) eu += vm.e[m][k] * u[k];
    geq[m] = vm.w[m] * (drho + 3.0 * eu + 4.5 * eu * eu - 1.5 * uu);
  }
}

/// BGK relaxation of one site toward its own equilibrium.
inline void collide_site(const VelocityModel& vm, double tau, double* g) {
  Moments mo = moments(vm, g);
  double geq[27];
  equilibrium(vm, mo.drho, mo.u, geq);
  const double inv_tau = 1.0 / tau;
  for (int m = 0; m < vm.q; ++m) g[m] += inv_tau * (geq[m] - g[m]);
}

/// Collide every fluid site of a site-major field g[site * q + m].
/// Wall sites are left untouched.
inline void collide(const VelocityModel& vm, const Geometry& geom, double tau,
                    std::vector<double>& g) {
  const long long ns = geom.sites();
  for (long long r = 0; r < ns; ++r) {
    if (geom.is_wall(r)) continue;
    collide_site(vm, tau, g.data() + r * vm.q);
  }
}

/// Streaming permutation: dest[r*q + m] is the flat slot that the population
/// (r, m) moves to.  Fluid populations advect one lattice vector with
/// periodic wrap; a move into a wall site bounces back in place to the
/// reversed velocity; wall-site populations are fixed points.
inline std::vector<long long> stream_permutation(const VelocityModel& vm,
                                                 const Geometry& geom) {
  const long long ns = geom.sites();
  std::vector<long long> dest(static_cast<std::size_t>(ns) * vm.q);
  for (long long r = 0; r < ns; ++r) {
    for (int m = 0; m < vm.q; ++m) {
      long long slot = r * vm.q + m;
      if (geom.is_wall(r)) {
        dest[slot] = slot;
        continue;
      }
      long long rr = geom.neighbor(r, vm.e[m]);
      if (geom.is_wall(rr))
        dest[slot] = r * vm.q + vm.opposite[m];
      else
        dest[slot] = rr * vm.q + m;
    }
  }
  return dest;
}

/// Apply a precomputed streaming permutation out of place.
inline void stream(const std::vector<long long>& dest,
                   const std::vector<double>& g, std::vector<double>& out) {
  out.assign(g.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i)
    out[static_cast<std::size_t>(dest[i])] = g[i];
}

}  // namespace qlbm
