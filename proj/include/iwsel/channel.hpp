// SPDX-License-Identifier: Apache-2.0
//
// Block-fading tapped-delay-line MIMO channels for the serving and the
// interfering transmitter, interference occupancy masks, and receiver noise.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "iwsel/config.hpp"
#include "iwsel/error.hpp"
#include "iwsel/grid.hpp"
#include "iwsel/numerics.hpp"
#include "iwsel/rng.hpp"

namespace iwsel {

inline constexpr double kSubcarrierSpacingHz = 15e3;
inline constexpr std::size_t kSubcarriersPerRb = 12;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

struct TapProfile {
  std::string name;
  std::vector<double> delays_s;
  std::vector<double> powers;  // linear, sums to 1
  double doppler_hz = 0.0;

  /// Validates and normalizes `powers` to unit sum.
  static TapProfile make(std::string name, std::vector<double> delays_s, std::vector<double> powers,
                         double doppler_hz) {
    if (delays_s.empty() || delays_s.size() != powers.size())
      throw Error(Errc::config, "profile '" + name + "': delays and powers must be non-empty and equal length");
    for (std::size_t i = 0; i < delays_s.size(); ++i) {
      if (delays_s[i] < 0.0 || (i > 0 && !(delays_s[i] > delays_s[i - 1])))
        throw Error(Errc::config, "profile '" + name + "': delays must be non-negative and strictly increasing");
      if (!(powers[i] >= 0.0)) throw Error(Errc::config, "profile '" + name + "': negative tap power");
    }
    double sum = 0.0;
    for (double p : powers) sum += p;
    if (!(sum > 0.0)) throw Error(Errc::config, "profile '" + name + "': zero total power");
    for (double& p : powers) p /= sum;
    return TapProfile{std::move(name), std::move(delays_s), std::move(powers), doppler_hz};
  }

  static TapProfile from_db(std::string name, const std::vector<double>& delays_ns,
                            const std::vector<double>& powers_db, double doppler_hz) {
    std::vector<double> d, p;
    for (double x : delays_ns) d.push_back(x * 1e-9);
    for (double x : powers_db) p.push_back(db_to_linear(x));
    return make(std::move(name), std::move(d), std::move(p), doppler_hz);
  }

  double rms_delay_spread_s() const {
    double mean = 0.0, second = 0.0;
    for (std::size_t i = 0; i < delays_s.size(); ++i) {
      mean += powers[i] * delays_s[i];
      second += powers[i] * delays_s[i] * delays_s[i];
    }
    return std::sqrt(std::max(0.0, second - mean * mean));
  }
};

namespace profiles {

inline TapProfile epa5() {
  return TapProfile::from_db("EPA-5", {0, 30, 70, 90, 110, 190, 410}, {0.0, -1.0, -2.0, -3.0, -8.0, -17.2, -20.8},
                             5.0);
}

inline TapProfile eva30() {
  return TapProfile::from_db("EVA-30", {0, 30, 150, 310, 370, 710, 1090, 1730, 2510},
                             {0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9}, 30.0);
}

/// TDL-A shape scaled to a 30 ns delay spread, taps sorted by delay.
inline TapProfile tdla30() {
  struct Tap {
    double norm_delay, power_db;
  };
  std::vector<Tap> taps = {{0.0000, -13.4}, {0.3819, 0.0},   {0.4025, -2.2},  {0.5868, -4.0},  {0.4610, -6.0},
                           {0.5375, -8.2},  {0.6708, -9.9},  {0.5750, -10.5}, {0.7618, -7.5},  {1.5375, -15.9},
                           {1.8978, -6.6},  {2.2242, -16.7}, {2.1718, -12.4}, {2.4942, -15.2}, {2.5119, -10.8},
                           {3.0582, -11.3}, {4.0810, -12.7}, {4.4579, -16.2}, {4.5695, -18.3}, {4.7966, -18.9},
                           {5.0066, -16.6}, {5.3043, -19.9}, {9.6586, -29.7}};
  std::sort(taps.begin(), taps.end(), [](const Tap& a, const Tap& b) { return a.norm_delay < b.norm_delay; });
  std::vector<double> d, p;
  for (const auto& t : taps) {
    d.push_back(t.norm_delay * 30.0);
    p.push_back(t.power_db);
  }
  return TapProfile::from_db("TDLA-30", d, p, 30.0);
}

/// Single zero-delay tap: a flat channel.
inline TapProfile flat() { return TapProfile::make("FLAT", {0.0}, {1.0}, 0.0); }

inline std::vector<TapProfile> builtin() { return {epa5(), eva30(), tdla30(), flat()}; }

}  // namespace profiles

inline TapProfile find_profile(const std::string& name, const std::vector<TapProfile>& extra = {}) {
  for (const auto& p : extra)
    if (p.name == name) return p;
  for (auto p : profiles::builtin())
    if (p.name == name) return p;
  throw Error(Errc::config, "unknown channel profile '" + name + "'");
}

/// Reads `[profile]` blocks with keys name, delays_ns (or delays_s),
/// powers_db (or powers), doppler_hz.
inline std::vector<TapProfile> load_tap_profiles(const std::vector<config::Block>& blocks) {
  std::vector<TapProfile> out;
  for (const auto& b : blocks) {
    if (b.section != "profile") continue;
    std::vector<double> delays;
    if (b.has("delays_ns")) {
      for (double d : b.numbers("delays_ns")) delays.push_back(d * 1e-9);
    } else {
      delays = b.numbers("delays_s");
    }
    std::vector<double> powers;
    if (b.has("powers_db")) {
      for (double p : b.numbers("powers_db")) powers.push_back(db_to_linear(p));
    } else {
      powers = b.numbers("powers");
    }
    const double doppler = b.has("doppler_hz") ? b.number("doppler_hz") : 0.0;
    out.push_back(TapProfile::make(b.get("name"), std::move(delays), std::move(powers), doppler));
  }
  return out;
}

enum class Occupancy { none = 0, occ1 = 1, occ2 = 2, occ3 = 3 };

inline std::string to_string(Occupancy o) {
  switch (o) {
    case Occupancy::none: return "none";
    case Occupancy::occ1: return "1";
    case Occupancy::occ2: return "2";
    case Occupancy::occ3: return "3";
  }
  return "none";
}

inline Occupancy parse_occupancy(const std::string& s) {
  if (s == "none" || s == "0") return Occupancy::none;
  if (s == "1") return Occupancy::occ1;
  if (s == "2") return Occupancy::occ2;
  if (s == "3") return Occupancy::occ3;
  throw Error(Errc::config, "occupancy must be 1, 2, 3 or none (got '" + s + "')");
}

struct OccupancyMask {
  std::vector<bool> interfered;

  std::size_t num_rb() const { return interfered.size(); }
  std::size_t count() const { return static_cast<std::size_t>(std::count(interfered.begin(), interfered.end(), true)); }
};

/// occ1: every other RB starting at 0. occ2: one centred block of
/// ceil(B/10) RBs. occ3: all RBs.
inline OccupancyMask make_occupancy(Occupancy pattern, std::size_t num_rb) {
  if (num_rb == 0) throw Error(Errc::config, "occupancy needs at least one RB");
  OccupancyMask m{std::vector<bool>(num_rb, false)};
  switch (pattern) {
    case Occupancy::none: break;
    case Occupancy::occ1:
      for (std::size_t b = 0; b < num_rb; b += 2) m.interfered[b] = true;
      break;
    case Occupancy::occ2: {
      const std::size_t width = std::max<std::size_t>(1, (num_rb + 9) / 10);
      const std::size_t start = (num_rb - width) / 2;
      for (std::size_t b = start; b < start + width; ++b) m.interfered[b] = true;
      break;
    }
    case Occupancy::occ3: std::fill(m.interfered.begin(), m.interfered.end(), true); break;
  }
  return m;
}

inline constexpr double kNoInterference = std::numeric_limits<double>::infinity();

struct Scenario {
  TapProfile channel = profiles::epa5();
  Occupancy occupancy = Occupancy::none;
  std::size_t num_rb = 20;
  double snr_db = 10.0;
  double sir_db = kNoInterference;
  int mcs_index = 5;
  std::uint64_t seed = 1;

  bool interference_enabled() const { return occupancy != Occupancy::none && std::isfinite(sir_db); }
};

/// Antenna counts: N receive antennas, M serving layers, M' interferer streams.
struct AntennaConfig {
  std::size_t num_rx = 2;
  std::size_t num_layers = 2;
  std::size_t interferer_streams = 2;
};

struct ChannelRealization {
  std::size_t num_sc = 0;
  MatrixStack serving;       // num_sc × (N × M)
  MatrixStack interference;  // num_sc × (N × M'), zero when disabled
  double snr_db = 0.0;
  double sir_db = kNoInterference;
};

namespace detail {

/// Frequency response of independent Rayleigh TDLs, one per antenna pair,
/// scaled so that each element has average power `power`.
inline MatrixStack draw_tdl(const TapProfile& profile, std::size_t num_sc, std::size_t rows, std::size_t cols,
                            double power, Rng& rng) {
  const std::size_t taps = profile.delays_s.size();
  std::vector<cplx> phasor(taps * num_sc);
  for (std::size_t l = 0; l < taps; ++l) {
    const double w = -2.0 * std::numbers::pi * kSubcarrierSpacingHz * profile.delays_s[l];
    for (std::size_t k = 0; k < num_sc; ++k) phasor[l * num_sc + k] = std::polar(1.0, w * static_cast<double>(k));
  }
  MatrixStack out(num_sc, rows, cols);
  const double amp = std::sqrt(power);
  std::vector<cplx> gains(taps);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      for (std::size_t l = 0; l < taps; ++l) gains[l] = amp * ComplexGaussian(profile.powers[l])(rng);
      for (std::size_t k = 0; k < num_sc; ++k) {
        cplx h = 0.0;
        for (std::size_t l = 0; l < taps; ++l) h += gains[l] * phasor[l * num_sc + k];
        out(k, r, c) = h;
      }
    }
  return out;
}

}  // namespace detail

/// One block-fading realization. Serving elements have average power
/// lin(SNR); interference elements lin(SNR − SIR). Interferer taps are drawn
/// even when interference is disabled so the random stream does not depend
/// on SIR.
inline ChannelRealization draw_channel(const Scenario& s, const AntennaConfig& ant, Rng& rng) {
  const std::size_t num_sc = s.num_rb * kSubcarriersPerRb;
  ChannelRealization ch;
  ch.num_sc = num_sc;
  ch.snr_db = s.snr_db;
  ch.sir_db = s.interference_enabled() ? s.sir_db : kNoInterference;
  ch.serving = detail::draw_tdl(s.channel, num_sc, ant.num_rx, ant.num_layers, db_to_linear(s.snr_db), rng);
  const double ipow = s.interference_enabled() ? db_to_linear(s.snr_db - s.sir_db) : 0.0;
  ch.interference = detail::draw_tdl(s.channel, num_sc, ant.num_rx, ant.interferer_streams, ipow, rng);
  return ch;
}

/// i.i.d. CN(0, 1) per RE and antenna.
inline ResourceGrid draw_noise(std::size_t num_sc, std::size_t num_sym, std::size_t num_rx, Rng& rng) {
  if (num_sc == 0 || num_sym == 0 || num_rx == 0) throw Error(Errc::dimension_mismatch, "noise grid dims");
  ResourceGrid g(num_sc, num_sym, num_rx);
  ComplexGaussian cn(1.0);
  for (auto& v : g.samples()) v = cn(rng);
  return g;
}

}  // namespace iwsel
