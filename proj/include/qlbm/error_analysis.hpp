#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "qlbm/common.hpp"
#include "qlbm/lattice.hpp"
#include "qlbm/simulation.hpp"

namespace qlbm {

// ---------------------------------------------------------------------------
// Truncation-error metrics
// ---------------------------------------------------------------------------

/// Truncation errors of one (Re, beta, D, N_C) run.
struct ErrorRecord {
  double reynolds = 0.0;
  double beta = 0.0;
  int dim = 0;
  int n_c = 0;
  double epsilon_c = 0.0;
  double epsilon_rmse = 0.0;
  std::vector<double> per_step;  ///< velocity-error series, t* = 1..T*
};

namespace detail {

inline void check_trajectory_shapes(const Trajectory& exact,
                                    const std::vector<std::vector<double>>& y1,
                                    long long field_size) {
  require(exact.states.size() == y1.size(),
          "trajectories cover different time ranges");
  require(exact.states.size() >= 2, "need at least one evolved step");
  for (const auto& s : exact.states)
    require(static_cast<long long>(s.g.size()) == field_size,
            "reference state size mismatch");
  for (const auto& b : y1)
    require(static_cast<long long>(b.size()) == field_size,
            "first-block state size mismatch");
}

}  // namespace detail

/// Per-step relative physical-velocity error between the reference dynamics
/// and the first Carleman block:
///   err(t*) = (1/(N u_ini_star)) sum_r ||u_exact(r,t*) - u_carleman(r,t*)||_2.
/// The normalization uses the actual integer site count and the rounded
/// u_ini_star, which is the consistent form of the Re^{-beta D/2} factor
/// once lattice extents are ceiled.
inline std::vector<double> epsilon_C_series(
    const Trajectory& exact, const std::vector<std::vector<double>>& y1,
    const SimParams& sim) {
  VelocityModel vm = velocity_model(sim.dim);
  Geometry geom = sim.geometry();
  const long long ns = geom.sites();
  detail::check_trajectory_shapes(exact, y1, ns * vm.q);

  std::vector<double> series;
  series.reserve(exact.states.size() - 1);
  for (std::size_t t = 1; t < exact.states.size(); ++t) {
    double sum = 0.0;
    for (long long r = 0; r < ns; ++r) {
      Moments me = moments(vm, exact.states[t].g.data() + r * vm.q);
      Moments mc = moments(vm, y1[t].data() + r * vm.q);
      double d2 = 0.0;
      for (int k = 0; k < vm.dim; ++k) {
        double d = me.u[static_cast<std::size_t>(k)] -
                   mc.u[static_cast<std::size_t>(k)];
        d2 += d * d;
      }
      sum += std::sqrt(d2);
    }
    series.push_back(sum / (static_cast<double>(ns) * sim.u_ini_star));
  }
  return series;
}

/// Maximum over evolved steps of the relative physical-velocity error.
inline double epsilon_C(const Trajectory& exact,
                        const std::vector<std::vector<double>>& y1,
                        const SimParams& sim) {
  std::vector<double> s = epsilon_C_series(exact, y1, sim);
  return *std::max_element(s.begin(), s.end());
}

struct RmseDiagnostics {
  long long excluded = 0;  ///< (t, m, r) terms skipped for zero population
};

/// Population-level root-mean-square error,
///   max_t (1/Q) sum_m sqrt((1/N) sum_r (1 - f~/f)^2),
/// with populations recovered as f = g + w.  Terms whose reference
/// population vanishes are excluded and counted in `diag`.
inline double epsilon_rmse(const Trajectory& exact,
                           const std::vector<std::vector<double>>& y1,
                           const SimParams& sim,
                           RmseDiagnostics* diag = nullptr) {
  VelocityModel vm = velocity_model(sim.dim);
  Geometry geom = sim.geometry();
  const long long ns = geom.sites();
  detail::check_trajectory_shapes(exact, y1, ns * vm.q);

  long long excluded = 0;
  double worst = 0.0;
  for (std::size_t t = 1; t < exact.states.size(); ++t) {
    double mean_over_m = 0.0;
    for (int m = 0; m < vm.q; ++m) {
      double sum = 0.0;
      long long counted = 0;
      for (long long r = 0; r < ns; ++r) {
        double f = exact.states[t].g[static_cast<std::size_t>(r * vm.q + m)] +
                   vm.w[m];
        if (std::abs(f) <= 1e-15) {
          ++excluded;
          continue;
        }
        double ft = y1[t][static_cast<std::size_t>(r * vm.q + m)] + vm.w[m];
        double term = 1.0 - ft / f;
        sum += term * term;
        ++counted;
      }
      if (counted > 0) mean_over_m += std::sqrt(sum / static_cast<double>(counted));
    }
    worst = std::max(worst, mean_over_m / static_cast<double>(vm.q));
  }
  if (diag) diag->excluded = excluded;
  return worst;
}

// ---------------------------------------------------------------------------
// Log-space least-squares fits
// ---------------------------------------------------------------------------

struct FitResult {
  enum class Model { exponential_in_nc, power_in_re };
  Model model = Model::exponential_in_nc;
  double amplitude = 0.0;  ///< E (exponential) or c (power law)
  double exponent = 0.0;   ///< Gamma (exponential) or chi (power law)
  double residual = 0.0;   ///< root-mean-square log-space residual
  int points = 0;
};

namespace detail {

/// Ordinary least squares of y = exponent * x + ln(amplitude).
inline FitResult ols_log_fit(const std::vector<double>& x,
                             const std::vector<double>& y,
                             FitResult::Model model) {
  const std::size_t n = x.size();
  require(n >= 2, "need at least two points to fit");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  require(sxx > 0.0, "fit abscissae are all identical");

  FitResult fit;
  fit.model = model;
  fit.exponent = sxy / sxx;
  fit.amplitude = std::exp(my - fit.exponent * mx);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = y[i] - (my + fit.exponent * (x[i] - mx));
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / static_cast<double>(n));
  fit.points = static_cast<int>(n);
  return fit;
}

}  // namespace detail

/// Fit epsilon_C = E exp(Gamma N_C) by least squares in log space.
/// Gamma < 0 classifies the convergent regime, Gamma > 0 the divergent one.
inline FitResult fit_error_model(
    const std::vector<std::pair<double, double>>& points) {
  std::vector<double> x, y;
  for (const auto& [n_c, eps] : points) {
    require(eps > 0.0, "error model needs positive errors");
    x.push_back(n_c);
    y.push_back(std::log(eps));
  }
  return detail::ols_log_fit(x, y, FitResult::Model::exponential_in_nc);
}

/// Fit kappa = c Re^chi by least squares in log space.
inline FitResult fit_power_law(
    const std::vector<std::pair<double, double>>& points) {
  std::vector<double> x, y;
  for (const auto& [re, kappa] : points) {
    require(re > 0.0 && kappa > 0.0, "power law needs positive data");
    x.push_back(std::log(re));
    y.push_back(std::log(kappa));
  }
  return detail::ols_log_fit(x, y, FitResult::Model::power_in_re);
}

// ---------------------------------------------------------------------------
// Convergence-threshold detection
// ---------------------------------------------------------------------------

struct ThresholdRow {
  double reynolds = 0.0;
  int n_c = 0;
  double epsilon_c = 0.0;
};

struct ThresholdResult {
  bool found = false;
  double reynolds = 0.0;   ///< interpolated Re_T when found
  double lower = 0.0;      ///< bracketing sweep points (equal when the flip
  double upper = 0.0;      ///< holds from the first sweep point on)
};

/// Smallest Reynolds number at which the truncation error stops improving
/// with the embedding order: the first sweep point where
/// epsilon_C(N_C=2) > epsilon_C(N_C=1), refined by linear interpolation of
/// the difference between the bracketing sweep points.
inline ThresholdResult detect_threshold(const std::vector<ThresholdRow>& table) {
  std::map<double, std::pair<double, double>> sweep;  // Re -> (eps1, eps2)
  for (const auto& row : table) {
    require(row.n_c == 1 || row.n_c == 2,
            "threshold detection uses N_C in {1,2}");
    auto& entry = sweep[row.reynolds];
    (row.n_c == 1 ? entry.first : entry.second) = row.epsilon_c;
  }
  require(sweep.size() >= 2, "need a sweep of at least two Reynolds numbers");
  std::vector<double> re, diff;
  for (const auto& [r, eps] : sweep) {
    require(eps.first > 0.0 && eps.second > 0.0,
            "each sweep point needs both N_C = 1 and N_C = 2 errors");
    re.push_back(r);
    diff.push_back(eps.second - eps.first);
  }

  ThresholdResult res;
  for (std::size_t i = 0; i < re.size(); ++i) {
    if (diff[i] > 0.0) {
      res.found = true;
      if (i == 0) {
        res.reynolds = res.lower = res.upper = re[0];
      } else {
        res.lower = re[i - 1];
        res.upper = re[i];
        double t = -diff[i - 1] / (diff[i] - diff[i - 1]);
        res.reynolds = re[i - 1] + t * (re[i] - re[i - 1]);
      }
      return res;
    }
  }
  return res;
}

}  // namespace qlbm
