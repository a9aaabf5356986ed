/// qlbm_cli: experiment driver for the qlbm library.
///
/// Eight subcommands sweep the library over configured parameter grids and
/// write CSV/JSON artifacts plus a manifest:
///
///   params-table       simulation parameters and matrix dimensions per
///                      (N_C, Re) pair
///   carleman-error     truncation-error series of the Carleman embedding
///                      against the reference dynamics
///   threshold-scan     convergence-threshold Reynolds number Re_T from an
///                      (N_C = 1 vs 2) error sweep
///   condition-scaling  Lanczos condition numbers of the time-block systems
///                      and fitted power laws kappa ~ Re^chi
///   be-ratio           block-encoding overhead ratio versus truncation
///                      order, with exponential fits
///   cost-report        qubit counts, query bounds, measurement overheads,
///                      and classical comparison per (Re, N_C)
///   gate-budget        T-gate ledger of the block-encoding circuit versus
///                      truncation order
///   drag-demo          drag force and boundary-state overlap on a walled
///                      channel
///
/// Every run is determined by a single JSON config file (plus --seed /
/// --workers / --max-mem overrides); CSV bodies are byte-stable across
/// reruns, sweep points are computed in a work queue, written atomically,
/// and reused on resume when the effective config is unchanged.  Exit
/// codes: 0 success, 2 config error, 3 capacity error, 4 numerical failure.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qlbm/carleman.hpp"
#include "qlbm/common.hpp"
#include "qlbm/cost_model.hpp"
#include "qlbm/error_analysis.hpp"
#include "qlbm/io.hpp"
#include "qlbm/lattice.hpp"
#include "qlbm/linear_system.hpp"
#include "qlbm/observables.hpp"
#include "qlbm/simulation.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Error classes for the exit-code contract
// ---------------------------------------------------------------------------

/// Invalid or inconsistent configuration (exit code 2).
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Capacity refusal annotated with the offending sweep point (exit code 3).
struct capacity_at_point : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure inside a sweep point (exit code 4).
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Config access
// ---------------------------------------------------------------------------

const json& need(const json& cfg, const char* key) {
  auto it = cfg.find(key);
  if (it == cfg.end())
    throw config_error(std::string("missing config field: ") + key);
  return *it;
}

double num_field(const json& cfg, const char* key,
                 std::optional<double> def = std::nullopt) {
  auto it = cfg.find(key);
  if (it == cfg.end()) {
    if (def) return *def;
    throw config_error(std::string("missing config field: ") + key);
  }
  if (!it->is_number())
    throw config_error(std::string("config field is not a number: ") + key);
  return it->get<double>();
}

long long int_field(const json& cfg, const char* key, long long def) {
  double v = num_field(cfg, key, static_cast<double>(def));
  if (v != std::floor(v))
    throw config_error(std::string("config field is not an integer: ") + key);
  return static_cast<long long>(v);
}

std::string str_field(const json& cfg, const char* key,
                      const std::string& def) {
  auto it = cfg.find(key);
  if (it == cfg.end()) return def;
  if (!it->is_string())
    throw config_error(std::string("config field is not a string: ") + key);
  return it->get<std::string>();
}

/// Numeric list; a bare scalar is accepted as a one-element list.
std::vector<double> num_list(const json& cfg, const char* key) {
  const json& v = need(cfg, key);
  std::vector<double> out;
  if (v.is_number()) {
    out.push_back(v.get<double>());
    return out;
  }
  if (!v.is_array() || v.empty())
    throw config_error(std::string("config field must be a non-empty list: ") +
                       key);
  for (const auto& e : v) {
    if (!e.is_number())
      throw config_error(std::string("non-numeric entry in list: ") + key);
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<int> int_list(const json& cfg, const char* key) {
  std::vector<int> out;
  for (double v : num_list(cfg, key)) {
    if (v != std::floor(v))
      throw config_error(std::string("list entries must be integers: ") + key);
    out.push_back(static_cast<int>(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV columns
// ---------------------------------------------------------------------------

struct Column {
  const char* name;
  enum Kind { Int, Num, Fix4, Count } kind;
};

std::string format_cell(const json& v, Column::Kind kind) {
  switch (kind) {
    case Column::Int:
      if (v.is_number_integer()) return std::to_string(v.get<long long>());
      return std::to_string(
          static_cast<long long>(std::llround(v.get<double>())));
    case Column::Num:
      return qlbm::format_double(v.get<double>());
    case Column::Fix4:
      return qlbm::format_fixed(v.get<double>(), 4);
    case Column::Count:
      return qlbm::format_count(v.get<double>());
  }
  throw std::logic_error("unreachable column kind");
}

/// One named CSV output of an experiment; points contribute row arrays
/// under the table's name.
struct Table {
  std::string name;  ///< "rows" renders to <experiment>.csv
  std::vector<Column> cols;
};

// ---------------------------------------------------------------------------
// Sweep framework
// ---------------------------------------------------------------------------

/// One independent unit of work.  `compute` returns a JSON object mapping
/// table names to arrays of rows, plus optionally "records": an array of
/// JSON objects collected into <experiment>-records.json.
struct SweepPoint {
  std::string key;
  std::function<json()> compute;
};

struct RunContext {
  std::string experiment;
  json config;
  fs::path out_dir;  ///< <out>/<experiment>
  int workers = 1;
  double max_mem = 8.0 * static_cast<double>(1ULL << 30);
  std::uint64_t seed = 12345;
};

struct Experiment {
  std::vector<Table> tables;
  std::vector<SweepPoint> points;
  std::function<json(const std::vector<json>&)> summarize;  ///< may be empty
};

/// The part of the config that determines results: CLI performance knobs
/// are excluded so resumed runs can change them freely.
json identity_config(const RunContext& ctx) {
  json id = ctx.config;
  id.erase("workers");
  id.erase("max_mem_bytes");
  id.erase("out");
  id["experiment"] = ctx.experiment;
  id["seed"] = ctx.seed;
  return id;
}

/// Executes the points through a work queue, reusing per-point artifacts
/// from a previous run with the same identity config.
std::vector<json> run_points(const RunContext& ctx,
                             const std::vector<SweepPoint>& pts,
                             int& reused) {
  const fs::path pdir = ctx.out_dir / "points";
  const std::string identity = identity_config(ctx).dump(2) + "\n";
  const fs::path cfg_path = ctx.out_dir / "config.json";
  auto stored = qlbm::read_file(cfg_path);
  if (!stored || *stored != identity) {
    std::error_code ec;
    fs::remove_all(pdir, ec);  // stale points belong to a different config
  }
  fs::create_directories(pdir);
  qlbm::write_file_atomic(cfg_path, identity);

  const std::size_t n = pts.size();
  std::vector<json> results(n);
  std::vector<char> have(n, 0);
  reused = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto txt = qlbm::read_file(pdir / (pts[i].key + ".json"));
    if (!txt) continue;
    json parsed = json::parse(*txt, nullptr, /*allow_exceptions=*/false);
    if (parsed.is_discarded()) continue;  // corrupt fragment: recompute
    results[i] = std::move(parsed);
    have[i] = 1;
    ++reused;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex err_mtx;
  std::exception_ptr first_error;
  auto work = [&]() {
    while (!stop.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      if (have[i]) continue;
      try {
        json r = pts[i].compute();
        qlbm::write_file_atomic(pdir / (pts[i].key + ".json"), r.dump());
        results[i] = std::move(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mtx);
        if (!first_error) first_error = std::current_exception();
        stop.store(true);
      }
    }
  };

  const int nw = std::max(1, std::min<int>(ctx.workers,
                                           static_cast<int>(n ? n : 1)));
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(nw));
  for (int t = 0; t < nw; ++t) threads.emplace_back(work);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

/// Wraps a point computation so capacity refusals surface with the
/// offending sweep coordinates and the estimated allocation.
template <typename Fn>
std::function<json()> guarded(double reynolds, int n_c, double max_mem,
                              Fn fn) {
  return [=]() -> json {
    try {
      return fn();
    } catch (const qlbm::capacity_error& e) {
      std::string msg = "Re=" + qlbm::format_double(reynolds) +
                        ", N_C=" + std::to_string(n_c) + ": " + e.what() +
                        " (estimated " + qlbm::format_count(e.bytes_needed) +
                        " bytes, budget " + qlbm::format_count(max_mem) +
                        " bytes)";
      throw capacity_at_point(msg);
    }
  };
}

// ---------------------------------------------------------------------------
// Shared experiment pieces
// ---------------------------------------------------------------------------

struct InitialSpec {
  qlbm::InitialStateKind kind = qlbm::InitialStateKind::sinusoidal;
  qlbm::InitialStateParams params;
  std::string name;
};

InitialSpec parse_initial(const json& cfg, int dim) {
  const json ini = cfg.value("initial", json::object());
  InitialSpec spec;
  spec.name = ini.is_object()
                  ? str_field(ini, "kind",
                              dim == 1 ? "sinusoidal" : "taylor_green")
                  : throw config_error("initial must be an object");
  static const std::map<std::string, std::pair<qlbm::InitialStateKind, int>>
      kinds = {{"sinusoidal", {qlbm::InitialStateKind::sinusoidal, 1}},
               {"colliding", {qlbm::InitialStateKind::colliding, 1}},
               {"taylor_green", {qlbm::InitialStateKind::taylor_green, 2}},
               {"gaussian_dipole",
                {qlbm::InitialStateKind::gaussian_dipole, 2}}};
  auto it = kinds.find(spec.name);
  if (it == kinds.end())
    throw config_error("unknown initial-state kind: " + spec.name);
  if (it->second.second != dim)
    throw config_error("initial-state kind " + spec.name +
                       " needs dimension " +
                       std::to_string(it->second.second));
  spec.kind = it->second.first;
  if (ini.is_object()) {
    spec.params.phi = num_field(ini, "phi", spec.params.phi);
    spec.params.s = num_field(ini, "s", spec.params.s);
    spec.params.sigma = num_field(ini, "sigma", spec.params.sigma);
  }
  return spec;
}

int dim_field(const json& cfg, int lo = 1, int hi = 3) {
  const int dim = static_cast<int>(int_field(cfg, "dim", 1));
  if (dim < lo || dim > hi)
    throw config_error("dim must lie in [" + std::to_string(lo) + ", " +
                       std::to_string(hi) + "]");
  return dim;
}

double beta_field(const json& cfg) {
  const double beta = num_field(cfg, "beta", 0.75);
  if (beta <= 0.0) throw config_error("beta must be positive");
  return beta;
}

std::vector<double> reynolds_field(const json& cfg) {
  std::vector<double> re = num_list(cfg, "reynolds");
  for (double r : re)
    if (r < 1.0) throw config_error("Reynolds numbers must be >= 1");
  return re;
}

std::vector<int> nc_field(const json& cfg) {
  std::vector<int> nc = int_list(cfg, "n_c");
  for (int k : nc)
    if (k < 1) throw config_error("truncation orders must be >= 1");
  return nc;
}

std::string point_key(double reynolds, int n_c) {
  return "re" + qlbm::format_double(reynolds) + "_nc" + std::to_string(n_c);
}

/// Truncation-error data of one (Re, N_C) point: the reference dynamics,
/// the stepwise Carleman evolution with a norm cap, and the error series.
json error_point(int dim, double beta, double reynolds, int n_c,
                 const InitialSpec& ini, long long t_max, int nx_override,
                 double norm_cap, double max_mem) {
  qlbm::SimParams sim = qlbm::select_params(reynolds, beta, dim);
  if (nx_override > 0) {
    sim.nx = nx_override;
    sim.u_ini_star =
        sim.u0_star / std::pow(static_cast<double>(sim.nx), 0.5 * dim);
  }
  if (t_max > 0) sim.t_star = std::min(sim.t_star, t_max);
  const qlbm::VelocityModel vm = qlbm::velocity_model(dim);
  const qlbm::Geometry geom = sim.geometry();
  const qlbm::FluidState g0 = qlbm::initial_state(ini.kind, ini.params, sim);
  const qlbm::Trajectory ref = qlbm::run_lbe(g0, sim, geom);

  qlbm::CarlemanOperator op(vm, geom, sim.tau_bar_star, n_c, max_mem);
  const qlbm::CarlemanVector y0 = qlbm::carleman_initial(g0.g, n_c, max_mem);
  std::vector<double> cur = op.flatten(y0), nxt(cur.size());
  const long long d = op.block_dim(1);

  std::vector<std::vector<double>> y1;
  y1.emplace_back(cur.begin(), cur.begin() + d);
  bool truncated = false;
  long long t_used = sim.t_star;
  for (long long t = 1; t <= sim.t_star; ++t) {
    op.apply_step(cur.data(), nxt.data());
    cur.swap(nxt);
    double nn = 0.0;
    for (double v : cur) nn += v * v;
    nn = std::sqrt(nn);
    if (!std::isfinite(nn) || nn > norm_cap) {
      truncated = true;
      t_used = t - 1;
      break;
    }
    y1.emplace_back(cur.begin(), cur.begin() + d);
  }
  if (t_used < 1)
    throw numerical_error("Carleman evolution left the norm cap at the "
                          "first step (Re=" +
                          qlbm::format_double(reynolds) +
                          ", N_C=" + std::to_string(n_c) + ")");

  qlbm::Trajectory head;
  head.states.assign(ref.states.begin(),
                     ref.states.begin() + (t_used + 1));
  const std::vector<double> series =
      qlbm::epsilon_C_series(head, y1, sim);
  const double eps_c = *std::max_element(series.begin(), series.end());
  const double eps_rmse = qlbm::epsilon_rmse(head, y1, sim);

  json rows = json::array();
  for (long long t = 1; t <= t_used; ++t)
    rows.push_back({reynolds, n_c, t,
                    series[static_cast<std::size_t>(t - 1)]});
  json point;
  point["rows"] = std::move(rows);
  point["summary"] = json::array(
      {{reynolds, n_c, t_used, eps_c, eps_rmse, truncated ? 1 : 0,
        ref.norm_exceeded_one ? 1 : 0}});
  return point;
}

// ---------------------------------------------------------------------------
// params-table
// ---------------------------------------------------------------------------

Experiment build_params_table(const RunContext& ctx) {
  const json& cfg = ctx.config;
  const int dim = dim_field(cfg);
  const double beta = beta_field(cfg);

  std::vector<std::pair<int, double>> pairs;
  if (cfg.contains("pairs")) {
    const json& p = cfg.at("pairs");
    if (!p.is_array() || p.empty())
      throw config_error("pairs must be a non-empty list of [N_C, Re]");
    for (const auto& e : p) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() ||
          !e[1].is_number())
        throw config_error("each pair must be [N_C, Re]");
      pairs.emplace_back(e[0].get<int>(), e[1].get<double>());
    }
  } else {
    for (int k : nc_field(cfg))
      for (double re : reynolds_field(cfg)) pairs.emplace_back(k, re);
  }
  for (const auto& [k, re] : pairs) {
    if (k < 1) throw config_error("truncation orders must be >= 1");
    if (re < 1.0) throw config_error("Reynolds numbers must be >= 1");
  }

  Experiment ex;
  ex.tables = {{"rows",
                {{"N_C", Column::Int},
                 {"Re", Column::Num},
                 {"N_x", Column::Int},
                 {"T_star", Column::Int},
                 {"tau_bar_star", Column::Fix4},
                 {"u_star", Column::Fix4},
                 {"dim_C", Column::Count},
                 {"dim_A_H", Column::Count}}}};
  for (const auto& [n_c, reynolds] : pairs) {
    SweepPoint pt;
    pt.key = "nc" + std::to_string(n_c) + "_re" +
             qlbm::format_double(reynolds);
    pt.compute = [dim, beta, n_c = n_c, reynolds = reynolds]() -> json {
      const qlbm::SimParams p = qlbm::select_params(reynolds, beta, dim);
      const qlbm::VelocityModel vm = qlbm::velocity_model(dim);
      const double d = static_cast<double>(p.geometry().sites()) * vm.q;
      const double dim_c = qlbm::carleman_dim(d, n_c);
      const double dim_ah = static_cast<double>(p.t_star + 1) * dim_c;
      json point;
      point["rows"] = json::array(
          {{n_c, reynolds, p.nx, p.t_star, p.tau_bar_star, p.u_ini_star,
            dim_c, dim_ah}});
      return point;
    };
    ex.points.push_back(std::move(pt));
  }
  return ex;
}

// ---------------------------------------------------------------------------
// carleman-error
// ---------------------------------------------------------------------------

Experiment build_carleman_error(const RunContext& ctx) {
  const json& cfg = ctx.config;
  const int dim = dim_field(cfg, 1, 2);
  const double beta = beta_field(cfg);
  const std::vector<double> res = reynolds_field(cfg);
  const std::vector<int> ncs = nc_field(cfg);
  const InitialSpec ini = parse_initial(cfg, dim);
  const long long t_max = int_field(cfg, "t_max", 0);
  const int nx_override = static_cast<int>(int_field(cfg, "nx_override", 0));
  const double norm_cap = num_field(cfg, "norm_cap", 1e6);
  if (t_max < 0 || nx_override < 0 || norm_cap <= 0.0)
    throw config_error("t_max, nx_override must be >= 0 and norm_cap > 0");
  const double max_mem = ctx.max_mem;

  Experiment ex;
  ex.tables = {{"rows",
                {{"Re", Column::Num},
                 {"N_C", Column::Int},
                 {"t_star", Column::Int},
                 {"eps_C_t", Column::Num}}},
               {"summary",
                {{"Re", Column::Num},
                 {"N_C", Column::Int},
                 {"t_used", Column::Int},
                 {"eps_C", Column::Num},
                 {"eps_rmse", Column::Num},
                 {"truncated", Column::Int},
                 {"norm_exceeded", Column::Int}}}};
  for (double reynolds : res)
    for (int n_c : ncs) {
      SweepPoint pt;
      pt.key = point_key(reynolds, n_c);
      pt.compute = guarded(reynolds, n_c, max_mem, [=]() {
        return error_point(dim, beta, reynolds, n_c, ini, t_max, nx_override,
                           norm_cap, max_mem);
      });
      ex.points.push_back(std::move(pt));
    }

  ex.summarize = [](const std::vector<json>& results) -> json {
    // Exponential error-model fit per Reynolds number, over the
    // non-truncated points.
    std::map<double, std::vector<std::pair<double, double>>> by_re;
    for (const json& p : results)
      for (const auto& row : p.at("summary")) {
        if (row[5].get<int>() != 0) continue;
        by_re[row[0].get<double>()].emplace_back(row[1].get<double>(),
                                                 row[3].get<double>());
      }
    json fits = json::array();
    for (const auto& [re, pts] : by_re) {
      if (pts.size() < 2) continue;
      bool positive = true;
      for (const auto& [n, e] : pts) positive = positive && e > 0.0;
      if (!positive) continue;
      const qlbm::FitResult fit = qlbm::fit_error_model(pts);
      json f = qlbm::fit_json(fit);
      f["Re"] = re;
      fits.push_back(std::move(f));
    }
    return json{{"error_model_fits", fits}};
  };
  return ex;
}

// ---------------------------------------------------------------------------
// threshold-scan
// ---------------------------------------------------------------------------

Experiment build_threshold_scan(const RunContext& ctx) {
  const json& cfg = ctx.config;
  const int dim = dim_field(cfg, 1, 2);
  const double beta = beta_field(cfg);
  const std::vector<double> res = reynolds_field(cfg);
  if (res.size() < 2)
    throw config_error("threshold-scan needs at least two Reynolds numbers");
  const InitialSpec ini = parse_initial(cfg, dim);
  const long long t_max = int_field(cfg, "t_max", 0);
  const int nx_override = static_cast<int>(int_field(cfg, "nx_override", 0));
  const double norm_cap = num_field(cfg, "norm_cap", 1e6);
  const double max_mem = ctx.max_mem;

  Experiment ex;
  ex.tables = {{"rows",
                {{"Re", Column::Num},
                 {"eps_C_nc1", Column::Num},
                 {"eps_C_nc2", Column::Num},
                 {"difference", Column::Num}}}};
  for (double reynolds : res) {
    SweepPoint pt;
    pt.key = "re" + qlbm::format_double(reynolds);
    pt.compute = guarded(reynolds, 2, max_mem, [=]() {
      double eps[2];
      for (int n_c : {1, 2}) {
        const json p = error_point(dim, beta, reynolds, n_c, ini, t_max,
                                   nx_override, norm_cap, max_mem);
        eps[n_c - 1] = p.at("summary")[0][3].get<double>();
      }
      json point;
      point["rows"] =
          json::array({{reynolds, eps[0], eps[1], eps[1] - eps[0]}});
      return point;
    });
    ex.points.push_back(std::move(pt));
  }

  ex.summarize = [](const std::vector<json>& results) -> json {
    std::vector<qlbm::ThresholdRow> table;
    for (const json& p : results)
      for (const auto& row : p.at("rows"))
        for (int n_c : {1, 2}) {
          qlbm::ThresholdRow tr;
          tr.reynolds = row[0].get<double>();
          tr.n_c = n_c;
          tr.epsilon_c = row[static_cast<std::size_t>(n_c)].get<double>();
          table.push_back(tr);
        }
    const qlbm::ThresholdResult res = qlbm::detect_threshold(table);
    return json{{"threshold", {{"found", res.found},
                               {"Re_T", res.reynolds},
                               {"lower", res.lower},
                               {"upper", res.upper}}}};
  };
  return ex;
}

// ---------------------------------------------------------------------------
// condition-scaling
// ---------------------------------------------------------------------------

Experiment build_condition_scaling(const RunContext& ctx) {
  const json& cfg = ctx.config;
  const int dim = dim_field(cfg);
  const double beta = beta_field(cfg);
  const std::vector<double> res = reynolds_field(cfg);
  const std::vector<int> ncs = nc_field(cfg);
  const std::string kind = str_field(cfg, "kind", "history");
  if (kind != "history" && kind != "final")
    throw config_error("kind must be history or final");
  const int waiting = static_cast<int>(int_field(cfg, "waiting", 0));
  if (kind == "final" && waiting < 1)
    throw config_error("final-kind systems need waiting >= 1");
  if (kind == "history" && waiting != 0)
    throw config_error("history-kind systems take waiting = 0");
  const double tol = num_field(cfg, "tolerance", 1e-8);
  const int max_iter = static_cast<int>(int_field(cfg, "max_iter", 400));
  if (tol <= 0.0 || max_iter < 1)
    throw config_error("tolerance must be positive and max_iter >= 1");
  const double max_mem = ctx.max_mem;

  Experiment ex;
  ex.tables = {{"rows",
                {{"Re", Column::Num},
                 {"N_C", Column::Int},
                 {"dim_A", Column::Count},
                 {"norm_C", Column::Num},
                 {"kappa", Column::Num},
                 {"kappa_lower", Column::Num},
                 {"iterations", Column::Int},
                 {"converged", Column::Int}}}};
  for (double reynolds : res)
    for (int n_c : ncs) {
      SweepPoint pt;
      pt.key = point_key(reynolds, n_c);
      pt.compute = guarded(reynolds, n_c, max_mem, [=]() {
        const qlbm::SimParams sim = qlbm::select_params(reynolds, beta, dim);
        const qlbm::VelocityModel vm = qlbm::velocity_model(dim);
        const qlbm::Geometry geom = sim.geometry();
        qlbm::CarlemanOperator op(vm, geom, sim.tau_bar_star, n_c, max_mem);
        const qlbm::TimeBlockSystem sys(
            op, sim.t_star,
            kind == "history" ? qlbm::TimeBlockSystem::Kind::history
                              : qlbm::TimeBlockSystem::Kind::final,
            waiting);
        const qlbm::ConditionEstimate est =
            qlbm::condition_number(sys, tol, max_iter, max_mem);
        json point;
        point["rows"] = json::array(
            {{reynolds, n_c, static_cast<double>(sys.dim()), est.norm_C,
              est.kappa, est.kappa_lower, est.iterations,
              est.converged ? 1 : 0}});
        point["records"] = json::array({qlbm::condition_json(
            reynolds, beta, dim, n_c, waiting, kind, est)});
        return point;
      });
      ex.points.push_back(std::move(pt));
    }

  ex.summarize = [](const std::vector<json>& results) -> json {
    std::map<int, std::vector<std::pair<double, double>>> by_nc;
    for (const json& p : results)
      for (const auto& row : p.at("rows"))
        if (row[7].get<int>() == 1)
          by_nc[row[1].get<int>()].emplace_back(row[0].get<double>(),
                                                row[4].get<double>());
    json fits = json::array();
    for (const auto& [n_c, pts] : by_nc) {
      if (pts.size() < 2) continue;
      const qlbm::FitResult fit = qlbm::fit_power_law(pts);
      json f = qlbm::fit_json(fit);
      f["N_C"] = n_c;
      f["chi"] = fit.exponent;
      fits.push_back(std::move(f));
    }
    return json{{"chi_fits", fits}};
  };
  return ex;
}

// ---------------------------------------------------------------------------
// be-ratio
// ---------------------------------------------------------------------------

Experiment build_be_ratio(const RunContext& ctx) {
  const json& cfg = ctx.config;
  std::vector<int> dims;
  if (cfg.contains("dims"))
    dims = int_list(cfg, "dims");
  else
    dims = {dim_field(cfg)};
  for (int d : dims)
    if (d < 1 || d > 3) throw config_error("dims entries must lie in [1, 3]");
  const std::vector<int> ncs = nc_field(cfg);
  const double tau = num_field(cfg, "tau_bar_star", 0.5);
  if (tau < 0.5) throw config_error("tau_bar_star must be >= 1/2");
  const long long dense_cap = int_field(cfg, "dense_cap", 256);
  const double max_mem = ctx.max_mem;

  Experiment ex;
  ex.tables = {{"rows",
                {{"D", Column::Int},
                 {"N_C", Column::Int},
                 {"tau_bar_star", Column::Num},
                 {"dim_reduced", Column::Count},
                 {"norm_C", Column::Num},
                 {"ratio", Column::Num},
                 {"simple_bound", Column::Num}}}};
  for (int d : dims)
    for (int n_c : ncs) {
      SweepPoint pt;
      pt.key = "d" + std::to_string(d) + "_nc" + std::to_string(n_c);
      pt.compute = guarded(1.0, n_c, max_mem, [=]() {
        const qlbm::VelocityModel vm = qlbm::velocity_model(d);
        const double norm_c =
            qlbm::norm_C(vm, tau, n_c, dense_cap, max_mem);
        const double ratio = qlbm::be_ratio_bound(tau, n_c, d, norm_c);
        json point;
        point["rows"] = json::array(
            {{d, n_c, tau,
              qlbm::carleman_dim(static_cast<double>(vm.q), n_c), norm_c,
              ratio, qlbm::be_ratio_simple_bound(n_c)}});
        return point;
      });
      ex.points.push_back(std::move(pt));
    }

  ex.summarize = [](const std::vector<json>& results) -> json {
    std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_d;
    for (const json& p : results)
      for (const auto& row : p.at("rows")) {
        auto& [xs, ys] = by_d[row[0].get<int>()];
        xs.push_back(row[1].get<double>());
        ys.push_back(row[5].get<double>());
      }
    json fits = json::array();
    for (const auto& [d, xy] : by_d) {
      if (xy.first.size() < 2) continue;
      const qlbm::ExpFit fit = qlbm::fit_exponential(xy.first, xy.second);
      fits.push_back({{"D", d}, {"a", fit.a}, {"b", fit.b},
                      {"points", xy.first.size()}});
    }
    return json{{"exponential_fits", fits}};
  };
  return ex;
}

// ---------------------------------------------------------------------------
// cost-report
// ---------------------------------------------------------------------------

Experiment build_cost_report(const RunContext& ctx) {
  const json& cfg = ctx.config;
  const int dim = dim_field(cfg);
  const double beta = beta_field(cfg);
  const std::vector<double> res = reynolds_field(cfg);
  const std::vector<int> ncs = nc_field(cfg);
  const int waiting = static_cast<int>(int_field(cfg, "waiting", 10));
  if (waiting < 0) throw config_error("waiting must be >= 0");
  const double epsilon_q = num_field(cfg, "epsilon_q", 0.5);
  if (epsilon_q < 1e-10 || epsilon_q >= 1.0)
    throw config_error("epsilon_q must lie in [1e-10, 1)");
  const double chi = num_field(cfg, "chi");
  const double kappa_amp = num_field(cfg, "kappa_amplitude", 1.0);
  if (kappa_amp <= 0.0) throw config_error("kappa_amplitude must be positive");
  const long long dense_cap = int_field(cfg, "dense_cap", 256);
  qlbm::BlockNorms norms;
  if (cfg.contains("block_norms")) {
    const json& bn = cfg.at("block_norms");
    norms.norm_history = num_field(bn, "history", 1.0);
    norms.norm_final = num_field(bn, "final", 1.0);
    norms.g_norm = num_field(bn, "g_norm", 1.0);
  }
  const double max_mem = ctx.max_mem;

  Experiment ex;
  ex.tables = {{"rows",
                {{"Re", Column::Num},
                 {"N_C", Column::Int},
                 {"n_D", Column::Int},
                 {"n_A", Column::Int},
                 {"alpha_A", Column::Num},
                 {"norm_A", Column::Num},
                 {"kappa", Column::Num},
                 {"q_rigorous", Column::Num},
                 {"q_simplified", Column::Num},
                 {"scaling_proxy", Column::Num},
                 {"q_M", Column::Num},
                 {"p_block1", Column::Num},
                 {"q_c", Column::Num},
                 {"lambda", Column::Num},
                 {"lambda_meas", Column::Num},
                 {"memory_bits", Column::Num}}},
               {"lambda-table",
                {{"D", Column::Int},
                 {"N_C", Column::Int},
                 {"chi", Column::Num},
                 {"lambda", Column::Num},
                 {"lambda_meas", Column::Num}}}};
  bool lambda_emitted = false;
  json lambda_rows = json::array();
  if (cfg.contains("lambda_table")) {
    const json& lt = cfg.at("lambda_table");
    if (!lt.is_array())
      throw config_error("lambda_table must be a list of objects");
    for (const auto& row : lt) {
      const int d = static_cast<int>(int_field(row, "dim", 0));
      if (d < 1 || d > 3)
        throw config_error("lambda_table dim must lie in [1, 3]");
      const int n_c = static_cast<int>(int_field(row, "n_c", 0));
      const double c = num_field(row, "chi");
      const qlbm::ClassicalComparison cc =
          qlbm::classical_comparison(2.0, beta, d, c);
      lambda_rows.push_back({d, n_c, c, cc.lambda, cc.lambda_meas});
    }
  }

  for (double reynolds : res)
    for (int n_c : ncs) {
      SweepPoint pt;
      pt.key = point_key(reynolds, n_c);
      const bool with_lambda = !lambda_emitted;
      lambda_emitted = true;  // attach the table to the first point only
      pt.compute = guarded(reynolds, n_c, max_mem, [=]() {
        qlbm::SimParams sim = qlbm::select_params(reynolds, beta, dim);
        const qlbm::VelocityModel vm = qlbm::velocity_model(dim);
        const double norm_c =
            qlbm::norm_C(vm, sim.tau_bar_star, n_c, dense_cap, max_mem);
        const double norm_a = std::sqrt(1.0 + norm_c * norm_c);
        const double kappa =
            std::max(1.0, kappa_amp * std::pow(reynolds, chi));
        const qlbm::CostReport r = qlbm::cost_report(
            sim, n_c, waiting, kappa, norm_a, epsilon_q, chi, norms);
        json point;
        point["rows"] = json::array(
            {{reynolds, n_c, r.prefactors.n_D, r.prefactors.n_A,
              r.prefactors.alpha_a, norm_a, kappa, r.queries.rigorous,
              r.queries.simplified, r.queries.lower_proxy,
              r.measurement.q_M, r.measurement.p_block1, r.classical.q_c,
              r.classical.lambda, r.classical.lambda_meas,
              r.classical.memory_bits}});
        point["lambda-table"] =
            with_lambda ? lambda_rows : json::array();
        point["records"] = json::array({qlbm::cost_report_json(r)});
        return point;
      });
      ex.points.push_back(std::move(pt));
    }
  return ex;
}

// ---------------------------------------------------------------------------
// gate-budget
// ---------------------------------------------------------------------------

Experiment build_gate_budget(const RunContext& ctx) {
  const json& cfg = ctx.config;
  const int dim = dim_field(cfg, 1, 2);
  const std::vector<int> ncs = nc_field(cfg);
  const double epsilon = num_field(cfg, "epsilon", 1e-6);
  if (epsilon <= 0.0 || epsilon >= 1.0)
    throw config_error("epsilon must lie in (0, 1)");
  const int waiting = static_cast<int>(int_field(cfg, "waiting", 10));
  if (waiting < 0) throw config_error("waiting must be >= 0");
  const double reynolds = num_field(cfg, "reynolds", 1e6);
  if (reynolds < 1.0) throw config_error("reynolds must be >= 1");

  Experiment ex;
  ex.tables = {{"rows",
                {{"N_C", Column::Int},
                 {"n_b", Column::Int},
                 {"n_creg", Column::Int},
                 {"G_IF1", Column::Num},
                 {"G_F2bar", Column::Num},
                 {"outer", Column::Num},
                 {"state_prep", Column::Num},
                 {"shift_mux", Column::Num},
                 {"coeff_rot", Column::Num},
                 {"perm_controls", Column::Num},
                 {"payload_mux", Column::Num},
                 {"payload_f1", Column::Num},
                 {"payload_f2", Column::Num},
                 {"full", Column::Num},
                 {"semi_closed", Column::Num},
                 {"simplified", Column::Num},
                 {"k_factor", Column::Num},
                 {"eps_total", Column::Num}}}};
  for (int n_c : ncs) {
    SweepPoint pt;
    pt.key = "nc" + std::to_string(n_c);
    pt.compute = [=]() -> json {
      const qlbm::GateBudget g =
          qlbm::gate_budget(dim, n_c, epsilon, waiting, reynolds);
      json point;
      point["rows"] = json::array(
          {{n_c, g.n_b, g.n_creg, g.g_if1, g.g_f2bar, g.outer, g.state_prep,
            g.shift_mux, g.coeff_rot, g.perm_controls, g.payload_mux,
            g.payload_f1, g.payload_f2, g.full, g.semi_closed, g.simplified,
            g.k_factor, g.eps_total}});
      point["records"] = json::array({qlbm::gate_budget_json(g)});
      return point;
    };
    ex.points.push_back(std::move(pt));
  }
  return ex;
}

// ---------------------------------------------------------------------------
// drag-demo
// ---------------------------------------------------------------------------

Experiment build_drag_demo(const RunContext& ctx) {
  const json& cfg = ctx.config;
  const int nx = static_cast<int>(int_field(cfg, "nx", 16));
  const int ny = static_cast<int>(int_field(cfg, "ny", 12));
  if (nx < 3 || ny < 3) throw config_error("nx and ny must be >= 3");
  std::vector<int> wall_rows = cfg.contains("wall_rows")
                                   ? int_list(cfg, "wall_rows")
                                   : std::vector<int>{1};
  for (int y : wall_rows)
    if (y < 1 || y > ny)
      throw config_error("wall_rows entries must lie in [1, ny]");
  const long long steps = int_field(cfg, "steps", 20);
  if (steps < 0) throw config_error("steps must be >= 0");
  const double tau = num_field(cfg, "tau_bar_star", 0.8);
  if (tau < 0.5) throw config_error("tau_bar_star must be >= 1/2");
  const double amplitude = num_field(cfg, "amplitude", 0.05);
  if (amplitude <= 0.0) throw config_error("amplitude must be positive");
  const std::string kind = str_field(cfg, "initial_kind", "taylor_green");
  if (kind != "taylor_green" && kind != "gaussian_dipole" &&
      kind != "random")
    throw config_error(
        "initial_kind must be taylor_green, gaussian_dipole, or random");
  std::optional<double> length, viscosity;
  if (cfg.contains("length")) length = num_field(cfg, "length");
  if (cfg.contains("viscosity")) viscosity = num_field(cfg, "viscosity");
  if (length.has_value() != viscosity.has_value())
    throw config_error("length and viscosity must be given together");
  const std::uint64_t seed = ctx.seed;

  Experiment ex;
  ex.tables = {{"rows",
                {{"t_star", Column::Int},
                 {"F0_x", Column::Num},
                 {"F0_y", Column::Num},
                 {"component_x", Column::Num},
                 {"component_y", Column::Num},
                 {"F_x", Column::Num},
                 {"F_y", Column::Num}}},
               {"overlap",
                {{"axis", Column::Int},
                 {"overlap", Column::Num},
                 {"normalization", Column::Num},
                 {"support", Column::Count},
                 {"identity_lhs", Column::Num},
                 {"component", Column::Num},
                 {"abs_difference", Column::Num}}}};
  SweepPoint pt;
  pt.key = "run";
  pt.compute = [=]() -> json {
    const qlbm::VelocityModel vm = qlbm::velocity_model(2);
    qlbm::Geometry geom(2, {nx, ny, 1});
    for (int y : wall_rows)
      for (int x = 1; x <= nx; ++x) geom.set_wall({x, y, 1});

    qlbm::SimParams sim;
    sim.dim = 2;
    sim.nx = nx;
    sim.tau_bar_star = tau;
    sim.u_ini_star = amplitude;
    sim.t_star = steps;
    sim.length = length;
    sim.viscosity = viscosity;

    qlbm::FluidState g0;
    if (kind == "random") {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> gauss(0.0, 1.0);
      g0.g.resize(static_cast<std::size_t>(geom.sites()) * vm.q);
      for (long long r = 0; r < geom.sites(); ++r)
        for (int m = 0; m < vm.q; ++m)
          g0.g[static_cast<std::size_t>(r * vm.q + m)] =
              amplitude * vm.w[static_cast<std::size_t>(m)] * gauss(rng);
    } else {
      qlbm::InitialStateParams isp;
      const auto k = kind == "taylor_green"
                         ? qlbm::InitialStateKind::taylor_green
                         : qlbm::InitialStateKind::gaussian_dipole;
      std::vector<double> drho(static_cast<std::size_t>(geom.sites()), 0.0);
      std::vector<double> u =
          qlbm::initial_velocity_field(k, isp, sim, geom);
      g0 = qlbm::equilibrium_state(vm, geom, drho, u);
    }

    const qlbm::Trajectory tr = qlbm::run_lbe(g0, sim, geom);
    json rows = json::array();
    for (long long t = 0; t <= steps; ++t) {
      const qlbm::DragResult d =
          qlbm::drag_force(tr.states[static_cast<std::size_t>(t)], vm, geom,
                           sim);
      rows.push_back({t, d.f0_star[0], d.f0_star[1], d.components[0],
                      d.components[1], d.f_star[0], d.f_star[1]});
    }

    const qlbm::FluidState& last = tr.states.back();
    const qlbm::DragResult d_last = qlbm::drag_force(last, vm, geom, sim);
    json overlap_rows = json::array();
    for (int k = 0; k < 2; ++k) {
      const qlbm::BoundaryState bs = qlbm::boundary_state(vm, geom, k);
      const double ov = qlbm::boundary_overlap(bs, last);
      const double lhs = qlbm::overlap_check(bs, last);
      overlap_rows.push_back({k, ov, bs.normalization,
                              static_cast<double>(bs.support), lhs,
                              d_last.components[k],
                              std::abs(lhs - d_last.components[k])});
    }

    json point;
    point["rows"] = std::move(rows);
    point["overlap"] = std::move(overlap_rows);
    point["records"] = json::array({qlbm::drag_json(
        d_last, length ? "physical (dx^2/dt per unit reference mass)"
                       : "lattice")});
    return point;
  };
  ex.points.push_back(std::move(pt));
  return ex;
}

// ---------------------------------------------------------------------------
// Execution and artifacts
// ---------------------------------------------------------------------------

std::string utc_now() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

int execute(const RunContext& ctx, const Experiment& ex) {
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(ctx.out_dir);
  int reused = 0;
  const std::vector<json> results = run_points(ctx, ex.points, reused);

  json outputs = json::array();
  auto emit = [&](const std::string& file, const std::string& content) {
    qlbm::write_file_atomic(ctx.out_dir / file, content);
    outputs.push_back({{"file", file},
                       {"bytes", content.size()},
                       {"sha1_git", qlbm::git_blob_hash(content)}});
  };

  for (const Table& table : ex.tables) {
    std::vector<std::string> names;
    for (const Column& c : table.cols) names.push_back(c.name);
    qlbm::CsvWriter csv(names);
    for (const json& point : results) {
      auto it = point.find(table.name);
      if (it == point.end()) continue;
      for (const auto& row : *it) {
        std::vector<std::string> cells;
        for (std::size_t c = 0; c < table.cols.size(); ++c)
          cells.push_back(format_cell(row.at(c), table.cols[c].kind));
        csv.row(cells);
      }
    }
    const std::string file =
        table.name == "rows" ? ctx.experiment + ".csv"
                             : ctx.experiment + "-" + table.name + ".csv";
    emit(file, csv.str());
  }

  json records = json::array();
  for (const json& point : results) {
    auto it = point.find("records");
    if (it == point.end()) continue;
    for (const auto& r : *it) records.push_back(r);
  }
  if (!records.empty())
    emit(ctx.experiment + "-records.json", records.dump(2) + "\n");

  if (ex.summarize) {
    const json summary = ex.summarize(results);
    emit(ctx.experiment + "-summary.json", summary.dump(2) + "\n");
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  json manifest;
  manifest["experiment"] = ctx.experiment;
  manifest["config"] = identity_config(ctx);
  manifest["config_hash"] =
      qlbm::git_blob_hash(identity_config(ctx).dump(2) + "\n");
  manifest["outputs"] = outputs;
  manifest["points"] = ex.points.size();
  manifest["points_reused"] = reused;
  manifest["workers"] = ctx.workers;
  manifest["max_mem_bytes"] = ctx.max_mem;
  manifest["wall_clock_seconds"] = wall;
  manifest["created_utc"] = utc_now();
  qlbm::write_file_atomic(ctx.out_dir / "manifest.json",
                          manifest.dump(2) + "\n");
  std::cout << ctx.experiment << ": " << ex.points.size() << " points ("
            << reused << " reused), outputs in " << ctx.out_dir.string()
            << "\n";
  return 0;
}

using Builder = Experiment (*)(const RunContext&);

const std::map<std::string, Builder>& builders() {
  static const std::map<std::string, Builder> b = {
      {"params-table", build_params_table},
      {"carleman-error", build_carleman_error},
      {"threshold-scan", build_threshold_scan},
      {"condition-scaling", build_condition_scaling},
      {"be-ratio", build_be_ratio},
      {"cost-report", build_cost_report},
      {"gate-budget", build_gate_budget},
      {"drag-demo", build_drag_demo}};
  return b;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "qlbm experiment driver; see README.md for the config schema"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir = "out";
  int workers = 0;
  double max_mem = 0.0;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "JSON config file")->required();
  app.add_option("--out", out_dir, "output directory (default: out)");
  app.add_option("--workers", workers, "worker threads (default: config)");
  auto* mem_opt = app.add_option("--max-mem", max_mem,
                                 "memory budget in bytes (default: config)");
  auto* seed_opt =
      app.add_option("--seed", seed, "random seed (default: config)");

  static const char* kDescriptions[][2] = {
      {"params-table", "simulation parameters and matrix dimensions"},
      {"carleman-error", "Carleman truncation-error series"},
      {"threshold-scan", "convergence-threshold Reynolds number"},
      {"condition-scaling", "condition numbers and power-law fits"},
      {"be-ratio", "block-encoding overhead versus truncation order"},
      {"cost-report", "qubit counts, query bounds, and speedup exponents"},
      {"gate-budget", "T-gate ledger of the block-encoding circuit"},
      {"drag-demo", "drag force and boundary overlap on a walled channel"}};
  for (const auto& d : kDescriptions) app.add_subcommand(d[0], d[1]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunContext ctx;
    ctx.experiment = app.get_subcommands().at(0)->get_name();

    auto text = qlbm::read_file(config_path);
    if (!text) throw config_error("cannot read config file: " + config_path);
    json cfg = json::parse(*text, nullptr, /*allow_exceptions=*/false);
    if (cfg.is_discarded() || !cfg.is_object())
      throw config_error("config is not a JSON object: " + config_path);
    const std::string declared = str_field(cfg, "experiment", ctx.experiment);
    if (declared != ctx.experiment)
      throw config_error("config declares experiment '" + declared +
                         "' but subcommand is '" + ctx.experiment + "'");
    ctx.config = std::move(cfg);

    ctx.workers = workers > 0
                      ? workers
                      : static_cast<int>(int_field(ctx.config, "workers", 1));
    if (ctx.workers < 1) throw config_error("workers must be >= 1");
    ctx.max_mem = mem_opt->count() > 0
                      ? max_mem
                      : num_field(ctx.config, "max_mem_bytes",
                                  8.0 * static_cast<double>(1ULL << 30));
    if (ctx.max_mem <= 0.0) throw config_error("max-mem must be positive");
    ctx.seed = seed_opt->count() > 0
                   ? seed
                   : static_cast<std::uint64_t>(
                         int_field(ctx.config, "seed", 12345));
    ctx.out_dir = fs::path(out_dir) / ctx.experiment;

    const Experiment ex = builders().at(ctx.experiment)(ctx);
    return execute(ctx, ex);
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const capacity_at_point& e) {
    std::cerr << "capacity error: " << e.what() << "\n";
    return 3;
  } catch (const qlbm::capacity_error& e) {
    std::cerr << "capacity error: " << e.what() << " (estimated "
              << qlbm::format_count(e.bytes_needed) << " bytes)\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  }
}
