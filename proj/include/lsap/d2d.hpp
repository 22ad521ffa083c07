// Copyright 2026 The lsapcvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "lsap/assignment.hpp"
#include "lsap/errors.hpp"
#include "lsap/rng.hpp"

namespace lsap::d2d {

/// Single-cell underlay D2D scenario. Downlink only: the BS transmits to each
/// cellular user (CU) on its own resource block and a D2D pair may reuse at
/// most one CU's block.
struct ScenarioConfig {
  double cell_radius_m = 1000.0;
  double d2d_max_dist_m = 15.0;
  double p_bs_dbm = 46.0;
  double p_d2d_dbm = 23.0;
  // CU uplink power. Kept for completeness; the downlink model never reads it.
  double p_cu_dbm = 23.0;
  double noise_psd_dbm_hz = -174.0;
  double fc_ghz = 1.7;
  double bandwidth_hz = 180e3;
  double gamma_th_cu_db = 0.0;
  double gamma_th_d2d_db = 0.0;
  int n_cu = 4;
  int m_d2d = 3;
  // Distances below this are clamped before the path-loss formula.
  double min_distance_m = 1.0;
  // Multiplies bit/s into cost-matrix units (1e-6: Mbit/s).
  double cost_scale = 1e-6;

  /// Default number of D2D pairs for n CUs: ceil(3n/4).
  static int default_pairs(int n_cu) { return (3 * n_cu + 3) / 4; }

  static ScenarioConfig with_order(int n_cu) {
    ScenarioConfig c;
    c.n_cu = n_cu;
    c.m_d2d = default_pairs(n_cu);
    return c;
  }

  void validate() const {
    auto fail = [](const std::string& what) { throw InvalidInputError("scenario: " + what); };
    if (m_d2d < 1) fail("m_d2d must be >= 1");
    if (n_cu < m_d2d) fail("n_cu must be >= m_d2d");
    if (!(d2d_max_dist_m > 0.0)) fail("d2d_max_dist_m must be > 0");
    if (!(cell_radius_m > d2d_max_dist_m)) fail("cell_radius_m must exceed d2d_max_dist_m");
    if (!(fc_ghz > 0.0)) fail("fc_ghz must be > 0");
    if (!(bandwidth_hz > 0.0)) fail("bandwidth_hz must be > 0");
    if (!(min_distance_m > 0.0)) fail("min_distance_m must be > 0");
    if (!(cost_scale > 0.0) || !std::isfinite(cost_scale)) fail("cost_scale must be > 0");
    for (double p : {p_bs_dbm, p_d2d_dbm, p_cu_dbm, noise_psd_dbm_hz, gamma_th_cu_db,
                     gamma_th_d2d_db}) {
      if (!std::isfinite(p)) fail("powers and thresholds must be finite");
    }
  }

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

namespace detail {

template <typename F>
void for_each_field(F&& f, ScenarioConfig& c) {
  f("cell_radius_m", c.cell_radius_m);
  f("d2d_max_dist_m", c.d2d_max_dist_m);
  f("p_bs_dbm", c.p_bs_dbm);
  f("p_d2d_dbm", c.p_d2d_dbm);
  f("p_cu_dbm", c.p_cu_dbm);
  f("noise_psd_dbm_hz", c.noise_psd_dbm_hz);
  f("fc_ghz", c.fc_ghz);
  f("bandwidth_hz", c.bandwidth_hz);
  f("gamma_th_cu_db", c.gamma_th_cu_db);
  f("gamma_th_d2d_db", c.gamma_th_d2d_db);
  f("n_cu", c.n_cu);
  f("m_d2d", c.m_d2d);
  f("min_distance_m", c.min_distance_m);
  f("cost_scale", c.cost_scale);
}

}  // namespace detail

/// Flat "key = value" text, one field per line, '#' starts a comment.
/// Doubles are written with 17 significant digits so the round trip is exact.
inline void write_config(std::ostream& os, ScenarioConfig config) {
  os << "# lsapcvae scenario config v1\n";
  detail::for_each_field(
      [&](const char* key, auto& value) {
        os << key << " = " << std::setprecision(17) << value << '\n';
      },
      config);
}

inline std::string to_string(const ScenarioConfig& config) {
  std::ostringstream os;
  write_config(os, config);
  return os.str();
}

/// Keys missing from the input keep their defaults. Unknown keys are errors.
inline ScenarioConfig read_config(std::istream& is) {
  std::map<std::string, std::string> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    entries[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  ScenarioConfig config;
  detail::for_each_field(
      [&](const char* key, auto& value) {
        auto it = entries.find(key);
        if (it == entries.end()) return;
        std::istringstream vs(it->second);
        vs >> value;
        if (!vs || !(vs >> std::ws).eof()) {
          throw FormatError(std::string("config key '") + key + "': bad value '" + it->second +
                            "'");
        }
        entries.erase(it);
      },
      config);
  if (!entries.empty()) throw FormatError("unknown config key '" + entries.begin()->first + "'");
  config.validate();
  return config;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path);
  return read_config(in);
}

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Node placement. The base station sits at the origin.
struct Topology {
  std::vector<Point> cu;
  std::vector<Point> d2d_tx;
  std::vector<Point> d2d_rx;
  friend bool operator==(const Topology&, const Topology&) = default;
};

/// Linear channel gains.
struct ChannelGains {
  std::vector<double> bs_to_cu;                  // n
  std::vector<std::vector<double>> d2d_tx_to_cu;  // m x n
  std::vector<double> d2d_link;                  // m, TX to its own RX
  std::vector<double> bs_to_d2d_rx;              // m
};

struct RateReport {
  // Indexed [pair][cu].
  std::vector<std::vector<double>> sinr_cu_shared;
  std::vector<std::vector<double>> sinr_d2d;
  std::vector<std::vector<double>> cu_rate_shared;
  std::vector<std::vector<double>> d2d_rate;
  std::vector<std::vector<bool>> feasible;
  std::vector<double> cu_rate_alone;  // n
  double sinr_th_cu = 1.0;            // linear
  double sinr_th_d2d = 1.0;           // linear
  double cost_scale = 1e-6;

  std::size_t cu_count() const noexcept { return cu_rate_alone.size(); }
  std::size_t pair_count() const noexcept { return feasible.size(); }
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

/// PL(d) = 36.7 log10(d) + 22.7 + 26 log10(fc), d in meters, fc in GHz.
inline double path_loss_db(double distance_m, double fc_ghz) {
  if (!(distance_m > 0.0) || !std::isfinite(distance_m)) {
    throw InvalidInputError("path loss needs a positive finite distance");
  }
  if (!(fc_ghz > 0.0)) throw InvalidInputError("path loss needs a positive carrier frequency");
  return 36.7 * std::log10(distance_m) + 22.7 + 26.0 * std::log10(fc_ghz);
}

inline double gain_linear(double distance_m, double fc_ghz) {
  return std::pow(10.0, -path_loss_db(distance_m, fc_ghz) / 10.0);
}

namespace detail {

inline Point uniform_in_disk(SplitMix64& rng, Point center, double radius) {
  const double r = radius * std::sqrt(rng.uniform());
  const double theta = 2.0 * std::numbers::pi * rng.uniform();
  return {center.x + r * std::cos(theta), center.y + r * std::sin(theta)};
}

}  // namespace detail

/// CUs, then D2D transmitters, then D2D receivers are drawn in that order
/// from one SplitMix64 stream seeded with `seed`. Points are uniform over the
/// disk (radius = R sqrt(U), angle = 2 pi U').
inline Topology sample_topology(const ScenarioConfig& config, std::uint64_t seed) {
  config.validate();
  SplitMix64 rng(seed);
  Topology t;
  t.cu.reserve(config.n_cu);
  for (int j = 0; j < config.n_cu; ++j) {
    t.cu.push_back(detail::uniform_in_disk(rng, {}, config.cell_radius_m));
  }
  for (int i = 0; i < config.m_d2d; ++i) {
    t.d2d_tx.push_back(detail::uniform_in_disk(rng, {}, config.cell_radius_m));
  }
  for (int i = 0; i < config.m_d2d; ++i) {
    t.d2d_rx.push_back(detail::uniform_in_disk(rng, t.d2d_tx[i], config.d2d_max_dist_m));
  }
  return t;
}

inline ChannelGains compute_gains(const Topology& topology, const ScenarioConfig& config) {
  if (topology.d2d_tx.size() != topology.d2d_rx.size()) {
    throw DimensionError("topology has mismatched D2D transmitter/receiver counts");
  }
  const Point bs{};
  auto gain = [&](Point a, Point b) {
    return gain_linear(std::max(distance(a, b), config.min_distance_m), config.fc_ghz);
  };
  ChannelGains g;
  const std::size_t n = topology.cu.size();
  const std::size_t m = topology.d2d_tx.size();
  g.bs_to_cu.resize(n);
  for (std::size_t j = 0; j < n; ++j) g.bs_to_cu[j] = gain(bs, topology.cu[j]);
  g.d2d_tx_to_cu.assign(m, std::vector<double>(n));
  g.d2d_link.resize(m);
  g.bs_to_d2d_rx.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) g.d2d_tx_to_cu[i][j] = gain(topology.d2d_tx[i], topology.cu[j]);
    g.d2d_link[i] = gain(topology.d2d_tx[i], topology.d2d_rx[i]);
    g.bs_to_d2d_rx[i] = gain(bs, topology.d2d_rx[i]);
  }
  return g;
}

/// Pairwise SINRs and Shannon rates (bit/s), assuming pair i is the only
/// sharer of CU j's block:
///   gamma_cu  = P_B G(B,j) / (N + P_i G(i,j))
///   gamma_d2d = P_i G(i)   / (N + P_B G(B,i))
///   R = B log2(1 + gamma),  R_alone = B log2(1 + P_B G(B,j) / N)
/// with N = noise PSD (W/Hz) * B. A pair is feasible when both SINRs meet
/// their thresholds and sharing does not lower the sum rate below R_alone.
inline RateReport compute_rates(const ChannelGains& gains, const ScenarioConfig& config) {
  const std::size_t n = gains.bs_to_cu.size();
  const std::size_t m = gains.d2d_link.size();
  if (gains.d2d_tx_to_cu.size() != m || gains.bs_to_d2d_rx.size() != m) {
    throw DimensionError("channel gains have inconsistent pair counts");
  }
  const double p_bs = dbm_to_watt(config.p_bs_dbm);
  const double p_d2d = dbm_to_watt(config.p_d2d_dbm);
  const double noise = dbm_to_watt(config.noise_psd_dbm_hz) * config.bandwidth_hz;
  const double bw = config.bandwidth_hz;

  RateReport r;
  r.sinr_th_cu = db_to_linear(config.gamma_th_cu_db);
  r.sinr_th_d2d = db_to_linear(config.gamma_th_d2d_db);
  r.cost_scale = config.cost_scale;
  r.cu_rate_alone.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    r.cu_rate_alone[j] = bw * std::log2(1.0 + p_bs * gains.bs_to_cu[j] / noise);
  }
  auto grid = [&](auto init) { return std::vector(m, std::vector(n, init)); };
  r.sinr_cu_shared = grid(0.0);
  r.sinr_d2d = grid(0.0);
  r.cu_rate_shared = grid(0.0);
  r.d2d_rate = grid(0.0);
  r.feasible = grid(false);
  for (std::size_t i = 0; i < m; ++i) {
    if (gains.d2d_tx_to_cu[i].size() != n) throw DimensionError("gain row has wrong length");
    const double sinr_d2d = p_d2d * gains.d2d_link[i] / (noise + p_bs * gains.bs_to_d2d_rx[i]);
    const double rate_d2d = bw * std::log2(1.0 + sinr_d2d);
    for (std::size_t j = 0; j < n; ++j) {
      const double sinr_cu = p_bs * gains.bs_to_cu[j] / (noise + p_d2d * gains.d2d_tx_to_cu[i][j]);
      const double rate_cu = bw * std::log2(1.0 + sinr_cu);
      r.sinr_cu_shared[i][j] = sinr_cu;
      r.sinr_d2d[i][j] = sinr_d2d;
      r.cu_rate_shared[i][j] = rate_cu;
      r.d2d_rate[i][j] = rate_d2d;
      r.feasible[i][j] = sinr_cu >= r.sinr_th_cu && sinr_d2d >= r.sinr_th_d2d &&
                         rate_cu + rate_d2d >= r.cu_rate_alone[j];
    }
  }
  return r;
}

/// Contribution of row i matched to CU j, in cost units (positive).
/// Rows at or past pair_count() are dummy pairs: the CU keeps its block.
inline double pair_value(const RateReport& rates, std::size_t i, std::size_t j) {
  if (i < rates.pair_count() && rates.feasible[i][j]) {
    return (rates.cu_rate_shared[i][j] + rates.d2d_rate[i][j]) * rates.cost_scale;
  }
  return rates.cu_rate_alone[j] * rates.cost_scale;
}

/// n x n minimization matrix: entry (i, j) = -pair_value(i, j).
inline CostMatrix build_cost_matrix(const RateReport& rates) {
  const std::size_t n = rates.cu_count();
  if (rates.pair_count() > n) throw DimensionError("more D2D pairs than CUs");
  CostMatrix cost(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) cost(i, j) = -pair_value(rates, i, j);
  }
  return cost;
}

inline CostMatrix build_cost_matrix(const ChannelGains& gains, const ScenarioConfig& config) {
  return build_cost_matrix(compute_rates(gains, config));
}

/// Total sum rate of an allocation, in cost units (Mbit/s by default).
/// Equals -assignment_cost(build_cost_matrix(rates), perm) bit for bit.
inline double evaluate_allocation(const RateReport& rates, const Permutation& perm) {
  if (perm.size() != rates.cu_count()) {
    throw DimensionError("allocation covers " + std::to_string(perm.size()) + " rows, scenario has " +
                         std::to_string(rates.cu_count()) + " CUs");
  }
  std::vector<double> terms(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) terms[i] = pair_value(rates, i, perm[i]);
  return canonical_sum(std::move(terms));
}

/// One scenario realization end to end.
struct Realization {
  Topology topology;
  ChannelGains gains;
  RateReport rates;
  CostMatrix cost;
};

inline Realization realize(const ScenarioConfig& config, std::uint64_t seed) {
  Realization r;
  r.topology = sample_topology(config, seed);
  r.gains = compute_gains(r.topology, config);
  r.rates = compute_rates(r.gains, config);
  r.cost = build_cost_matrix(r.rates);
  return r;
}

}  // namespace lsap::d2d
