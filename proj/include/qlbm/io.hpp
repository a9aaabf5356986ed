#pragma once

/// \file io.hpp
/// Serialization shared by the command-line driver, the samples, and the
/// golden-file tests: locale-independent number formatting, CSV assembly,
/// git-style content hashes, atomic file writes, and JSON views of the
/// library's report structs.
///
/// All text produced here is byte-stable: numbers go through
/// std::to_chars (never the global locale), CSV uses '.' decimals and
/// '\n' line endings, and JSON field order is fixed.  The JSON helpers
/// use the vendored single-header nlohmann library; building against
/// this header therefore needs the repository's vendor/ directory on the
/// include path.

#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qlbm/common.hpp"
#include "qlbm/cost_model.hpp"
#include "qlbm/error_analysis.hpp"
#include "qlbm/linear_system.hpp"
#include "qlbm/observables.hpp"
#include "qlbm/simulation.hpp"

namespace qlbm {

// ---------------------------------------------------------------------------
// Number formatting
// ---------------------------------------------------------------------------

/// Shortest decimal string that parses back to exactly `x`.
inline std::string format_double(double x) {
  std::array<char, 40> buf;
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  require(res.ec == std::errc(), "number formatting failed");
  return std::string(buf.data(), res.ptr);
}

/// Fixed-point with `precision` digits after the decimal separator.
inline std::string format_fixed(double x, int precision) {
  require(precision >= 0 && precision <= 17, "unsupported precision");
  std::array<char, 64> buf;
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x,
                           std::chars_format::fixed, precision);
  require(res.ec == std::errc(), "number formatting failed");
  return std::string(buf.data(), res.ptr);
}

/// Matrix dimensions and similar counts that may exceed integer range:
/// exact integer text while exactly representable, otherwise shortest form.
inline std::string format_count(double x) {
  if (x >= 0.0 && x < 9.0e15 && x == std::floor(x))
    return std::to_string(static_cast<long long>(x));
  return format_double(x);
}

// ---------------------------------------------------------------------------
// CSV assembly
// ---------------------------------------------------------------------------

/// Accumulates a CSV document with a fixed column count, '.' decimals
/// (callers format cells), and '\n' line endings.  Cells must not contain
/// separators or quotes; everything written by this project is plain
/// numbers and identifiers, so quoting is rejected rather than implemented.
class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& columns)
      : width_(columns.size()) {
    require(width_ > 0, "CSV needs at least one column");
    append_row(columns);
  }

  void row(const std::vector<std::string>& cells) {
    require(cells.size() == width_, "CSV row width mismatch");
    append_row(cells);
  }

  /// Appends pre-rendered rows (trailing '\n' included), e.g. per-point
  /// fragments assembled from a sweep.
  void raw(std::string_view rows) { body_.append(rows); }

  const std::string& str() const { return body_; }

 private:
  void append_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      require(cells[i].find_first_of(",\"\n\r") == std::string::npos,
              "CSV cell would need quoting: " + cells[i]);
      if (i > 0) body_ += ',';
      body_ += cells[i];
    }
    body_ += '\n';
  }

  std::size_t width_;
  std::string body_;
};

// ---------------------------------------------------------------------------
// Content hashing (SHA-1, git blob convention)
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint32_t rotl32(std::uint32_t v, int s) {
  return (v << s) | (v >> (32 - s));
}

}  // namespace detail

/// SHA-1 digest of `data` as 40 lowercase hex characters.
inline std::string sha1_hex(std::string_view data) {
  std::uint32_t h[5] = {0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u,
                        0xC3D2E1F0u};
  std::vector<std::uint8_t> msg(data.begin(), data.end());
  const std::uint64_t bits = static_cast<std::uint64_t>(data.size()) * 8;
  msg.push_back(0x80);
  while (msg.size() % 64 != 56) msg.push_back(0);
  for (int i = 7; i >= 0; --i)
    msg.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));

  for (std::size_t off = 0; off < msg.size(); off += 64) {
    std::uint32_t w[80];
    for (int i = 0; i < 16; ++i)
      w[i] = (static_cast<std::uint32_t>(msg[off + 4 * i]) << 24) |
             (static_cast<std::uint32_t>(msg[off + 4 * i + 1]) << 16) |
             (static_cast<std::uint32_t>(msg[off + 4 * i + 2]) << 8) |
             static_cast<std::uint32_t>(msg[off + 4 * i + 3]);
    for (int i = 16; i < 80; ++i)
      w[i] = detail::rotl32(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
    std::uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
    for (int i = 0; i < 80; ++i) {
      std::uint32_t f, k;
      if (i < 20) {
        f = (b & c) | (~b & d);
        k = 0x5A827999u;
      } else if (i < 40) {
        f = b ^ c ^ d;
        k = 0x6ED9EBA1u;
      } else if (i < 60) {
        f = (b & c) | (b & d) | (c & d);
        k = 0x8F1BBCDCu;
      } else {
        f = b ^ c ^ d;
        k = 0xCA62C1D6u;
      }
      const std::uint32_t tmp = detail::rotl32(a, 5) + f + e + k + w[i];
      e = d;
      d = c;
      c = detail::rotl32(b, 30);
      b = a;
      a = tmp;
    }
    h[0] += a;
    h[1] += b;
    h[2] += c;
    h[3] += d;
    h[4] += e;
  }

  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(40);
  for (std::uint32_t word : h)
    for (int i = 7; i >= 0; --i)
      out += hex[(word >> (4 * i)) & 0xF];
  return out;
}

/// Content hash in the git object convention:
/// sha1("blob <size>\0" + content), so artifacts can be cross-checked with
/// `git hash-object`.
inline std::string git_blob_hash(std::string_view content) {
  std::string pre = "blob " + std::to_string(content.size());
  pre.push_back('\0');
  pre.append(content);
  return sha1_hex(pre);
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

/// Writes `content` to `path` via a sibling temporary plus rename, so
/// readers never observe a half-written artifact.
inline void write_file_atomic(const std::filesystem::path& path,
                              std::string_view content) {
  if (!path.parent_path().empty())
    std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    require(os.good(), "cannot open for writing: " + tmp.string());
    os.write(content.data(),
             static_cast<std::streamsize>(content.size()));
    os.flush();
    require(os.good(), "write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::optional<std::string> read_file(
    const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is.good()) return std::nullopt;
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// JSON views
// ---------------------------------------------------------------------------

/// Condition-number record with its run context.
inline nlohmann::json condition_json(double reynolds, double beta, int dim,
                                     int n_c, int waiting,
                                     const std::string& kind,
                                     const ConditionEstimate& est) {
  nlohmann::json j;
  j["Re"] = reynolds;
  j["beta"] = beta;
  j["D"] = dim;
  j["N_C"] = n_c;
  j["W"] = waiting;
  j["kind"] = kind;
  j["norm_C"] = est.norm_C;
  j["kappa"] = est.kappa;
  j["kappa_lower"] = est.kappa_lower;
  j["iterations"] = est.iterations;
  j["converged"] = est.converged;
  if (est.kappa_upper) j["kappa_upper"] = *est.kappa_upper;
  return j;
}

inline nlohmann::json fit_json(const FitResult& fit) {
  nlohmann::json j;
  j["model"] = fit.model == FitResult::Model::exponential_in_nc
                   ? "exponential_in_nc"
                   : "power_in_re";
  j["amplitude"] = fit.amplitude;
  j["exponent"] = fit.exponent;
  j["residual"] = fit.residual;
  j["points"] = fit.points;
  return j;
}

inline nlohmann::json cost_report_json(const CostReport& r) {
  nlohmann::json j;
  j["Re"] = r.reynolds;
  j["beta"] = r.beta;
  j["D"] = r.dim;
  j["N_C"] = r.n_c;
  j["W"] = r.waiting;
  j["tau_bar_star"] = r.tau_bar_star;
  j["kappa"] = r.kappa;
  j["norm_A"] = r.norm_a;
  j["epsilon_Q"] = r.epsilon_q;
  j["prefactors"] = {{"alpha_IF1", r.prefactors.alpha_if1},
                     {"alpha_F2bar", r.prefactors.alpha_f2bar},
                     {"alpha_C", r.prefactors.alpha_c},
                     {"alpha_A", r.prefactors.alpha_a}};
  j["qubits"] = {{"n_D", r.prefactors.n_D},
                 {"n_D_real", r.prefactors.n_D_real},
                 {"n_A", r.prefactors.n_A}};
  j["queries"] = {{"rigorous", r.queries.rigorous},
                  {"simplified", r.queries.simplified}};
  if (std::isfinite(r.queries.lower_proxy))
    j["queries"]["scaling_proxy"] = r.queries.lower_proxy;
  j["measurement"] = {{"q_M", r.measurement.q_M},
                      {"p_final", r.measurement.p_final},
                      {"p_block1", r.measurement.p_block1}};
  j["classical"] = {{"q_c", r.classical.q_c},
                    {"lambda", r.classical.lambda},
                    {"lambda_meas", r.classical.lambda_meas},
                    {"memory_bits", r.classical.memory_bits}};
  return j;
}

inline nlohmann::json gate_budget_json(const GateBudget& g) {
  nlohmann::json j;
  j["D"] = g.dim;
  j["N_C"] = g.n_c;
  j["W"] = g.waiting;
  j["epsilon"] = g.epsilon;
  j["Re"] = g.reynolds;
  j["registers"] = {{"n_b", g.n_b}, {"n_creg", g.n_creg}};
  j["single_blocks"] = {{"G_IF1", g.g_if1}, {"G_F2bar", g.g_f2bar}};
  j["ledger"] = {{"outer", g.outer},
                 {"state_prep", g.state_prep},
                 {"shift_mux", g.shift_mux},
                 {"coeff_rot", g.coeff_rot},
                 {"perm_controls", g.perm_controls},
                 {"payload_mux", g.payload_mux},
                 {"payload_f1", g.payload_f1},
                 {"payload_f2", g.payload_f2}};
  j["full"] = g.full;
  j["semi_closed"] = g.semi_closed;
  j["simplified"] = g.simplified;
  j["k_factor"] = g.k_factor;
  j["errors"] = {{"eps_f1", g.eps_f1},
                 {"eps_f2", g.eps_f2},
                 {"eps_carleman", g.eps_carleman},
                 {"eps_total", g.eps_total}};
  return j;
}

inline nlohmann::json drag_json(const DragResult& d,
                                const std::string& units) {
  nlohmann::json j;
  j["F0_star"] = d.f0_star;
  j["components"] = d.components;
  j["F_star"] = d.f_star;
  j["conversion"] = d.conversion;
  j["units"] = units;
  return j;
}

}  // namespace qlbm
