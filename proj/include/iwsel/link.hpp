// SPDX-License-Identifier: Apache-2.0
//
// Per-slot PDSCH-like chain: type-1 DMRS on comb-2 subcarriers of two
// symbols with frequency/time orthogonal cover codes (up to four layers),
// MCS-driven coding and Gray QAM, LS or genie channel estimation with DMRS
// residuals, per-RE MMSE detection with max-log LLRs, Viterbi decoding and
// CRC check.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "iwsel/channel.hpp"
#include "iwsel/config.hpp"
#include "iwsel/error.hpp"
#include "iwsel/fec.hpp"
#include "iwsel/grid.hpp"
#include "iwsel/modulation.hpp"
#include "iwsel/numerics.hpp"
#include "iwsel/rng.hpp"

namespace iwsel {

struct McsEntry {
  int index = 0;
  unsigned modulation_order = 2;
  double code_rate = 0.5;

  double spectral_efficiency() const { return modulation_order * code_rate; }
};

/// Representative subset of the NR 256QAM MCS table.
inline std::vector<McsEntry> default_mcs_table() {
  return {{0, 2, 0.12}, {5, 2, 0.44}, {7, 4, 0.33}, {15, 6, 0.48}, {19, 6, 0.66}, {27, 8, 0.89}};
}

inline void validate_mcs_table(const std::vector<McsEntry>& table) {
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& e = table[i];
    if (e.modulation_order != 2 && e.modulation_order != 4 && e.modulation_order != 6 && e.modulation_order != 8)
      throw Error(Errc::config, "MCS " + std::to_string(e.index) + ": modulation order must be 2, 4, 6 or 8");
    if (!(e.code_rate > 0.0 && e.code_rate < 1.0))
      throw Error(Errc::config, "MCS " + std::to_string(e.index) + ": code rate must lie in (0, 1)");
    if (i > 0 && (e.index <= table[i - 1].index ||
                  e.spectral_efficiency() < table[i - 1].spectral_efficiency()))
      throw Error(Errc::config, "MCS table must be sorted with non-decreasing spectral efficiency");
  }
}

/// Reads `[mcs]` blocks with keys index, modulation_order, code_rate.
inline std::vector<McsEntry> load_mcs_table(const std::vector<config::Block>& blocks) {
  std::vector<McsEntry> out;
  for (const auto& b : blocks) {
    if (b.section != "mcs") continue;
    out.push_back({static_cast<int>(b.number("index")), static_cast<unsigned>(b.number("modulation_order")),
                   b.number("code_rate")});
  }
  std::sort(out.begin(), out.end(), [](const McsEntry& a, const McsEntry& b) { return a.index < b.index; });
  validate_mcs_table(out);
  return out;
}

inline McsEntry find_mcs(int index, const std::vector<McsEntry>& table = default_mcs_table()) {
  for (const auto& e : table)
    if (e.index == index) return e;
  throw Error(Errc::config, "MCS index " + std::to_string(index) + " is not in the MCS table");
}

struct SlotConfig {
  std::size_t num_rb = 20;
  std::size_t sc_per_rb = kSubcarriersPerRb;
  std::size_t symbols_per_slot = 14;
  std::array<std::size_t, 2> dmrs_symbols = {2, 11};
  std::size_t dmrs_comb_offset = 0;
  std::size_t num_layers = 2;
  std::size_t num_rx = 2;

  std::size_t num_sc() const { return num_rb * sc_per_rb; }

  bool is_dmrs_symbol(std::size_t sym) const { return sym == dmrs_symbols[0] || sym == dmrs_symbols[1]; }

  void validate() const {
    if (num_rb == 0) throw Error(Errc::config, "num_rb must be >= 1");
    if (sc_per_rb != 12 || symbols_per_slot != 14) throw Error(Errc::config, "slot must be 12 subcarriers x 14 symbols");
    if (dmrs_symbols[0] == dmrs_symbols[1] || dmrs_symbols[0] >= symbols_per_slot ||
        dmrs_symbols[1] >= symbols_per_slot)
      throw Error(Errc::config, "DMRS symbols must be distinct and within the slot");
    if (dmrs_comb_offset > 1) throw Error(Errc::config, "DMRS comb offset must be 0 or 1");
    if (num_layers == 0 || num_layers > 4) throw Error(Errc::config, "1 to 4 layers supported by type-1 DMRS");
    if (num_rx == 0 || num_rx > 8) throw Error(Errc::config, "1 to 8 receive antennas supported");
  }

  AntennaConfig antennas(std::size_t interferer_streams) const {
    return {num_rx, num_layers, interferer_streams};
  }
};

/// DMRS positions and per-layer pilot values. REs are stored RB by RB; within
/// an RB, CDM group g (subcarrier pair 4g+off, 4g+2+off) occupies entries
/// 4g..4g+3 in the order (pair lo, sym0), (pair hi, sym0), (pair lo, sym1),
/// (pair hi, sym1).
struct PilotMap {
  struct Re {
    std::size_t sc;
    std::size_t sym;
  };
  static constexpr std::size_t kPerRb = 12;
  static constexpr std::size_t kGroupsPerRb = 3;

  std::size_t num_layers = 0;
  std::vector<Re> res;
  std::vector<cplx> values;  // res.size() × num_layers

  std::size_t size() const { return res.size(); }
  const cplx* pilot(std::size_t i) const { return values.data() + i * num_layers; }
};

namespace detail {

/// Known unit-modulus QPSK base sequence.
inline cplx dmrs_base(std::size_t sc, std::size_t sym) {
  const std::uint64_t h = splitmix64((static_cast<std::uint64_t>(sym) << 32) ^ sc ^ 0xd3a5e1c7ULL);
  const double a = 1.0 / std::sqrt(2.0);
  return {(h & 1u) ? -a : a, (h & 2u) ? -a : a};
}

}  // namespace detail

inline PilotMap make_pilot_map(const SlotConfig& cfg) {
  cfg.validate();
  PilotMap pm;
  pm.num_layers = cfg.num_layers;
  for (std::size_t rb = 0; rb < cfg.num_rb; ++rb)
    for (std::size_t g = 0; g < PilotMap::kGroupsPerRb; ++g)
      for (std::size_t t = 0; t < 2; ++t)
        for (std::size_t f = 0; f < 2; ++f) {
          const std::size_t sc = rb * cfg.sc_per_rb + 4 * g + 2 * f + cfg.dmrs_comb_offset;
          const std::size_t sym = cfg.dmrs_symbols[t];
          pm.res.push_back({sc, sym});
          const cplx base = detail::dmrs_base(sc, sym);
          for (std::size_t m = 0; m < cfg.num_layers; ++m) {
            const double wf = (m & 1u) && f == 1 ? -1.0 : 1.0;
            const double wt = (m & 2u) && t == 1 ? -1.0 : 1.0;
            pm.values.push_back(base * (wf * wt));
          }
        }
  return pm;
}

/// Everything about a (SlotConfig, MCS) pair that does not change per slot.
class LinkPlan {
 public:
  LinkPlan(const SlotConfig& cfg, const McsEntry& mcs)
      : cfg_(cfg), mcs_(mcs), qam_(mcs.modulation_order), pilots_(make_pilot_map(cfg)) {
    for (std::size_t sym = 0; sym < cfg.symbols_per_slot; ++sym) {
      if (cfg.is_dmrs_symbol(sym)) continue;
      for (std::size_t sc = 0; sc < cfg.num_sc(); ++sc) data_res_.push_back({sc, sym});
    }
    coded_bits_ = data_res_.size() * cfg.num_layers * mcs.modulation_order;
    const auto budget = static_cast<std::size_t>(std::floor(static_cast<double>(coded_bits_) * mcs.code_rate));
    const std::size_t overhead = fec::kCrcBits + fec::kTailBits;
    if (budget <= overhead)
      throw Error(Errc::payload_too_large, "MCS " + std::to_string(mcs.index) + " leaves no room for payload");
    max_payload_ = budget - overhead;
    interleaver_ = fec::Interleaver(coded_bits_);
    matcher_ = fec::RateMatcher(mother_len(max_payload_), coded_bits_);
  }

  const SlotConfig& config() const { return cfg_; }
  const McsEntry& mcs() const { return mcs_; }
  const QamConstellation& qam() const { return qam_; }
  const PilotMap& pilots() const { return pilots_; }
  const std::vector<PilotMap::Re>& data_res() const { return data_res_; }
  std::size_t coded_bits() const { return coded_bits_; }
  std::size_t max_payload() const { return max_payload_; }
  const fec::Interleaver& interleaver() const { return interleaver_; }

  static std::size_t mother_len(std::size_t payload) { return 2 * (payload + fec::kCrcBits + fec::kTailBits); }

  /// Rate matcher for a given payload length (cached for the maximum).
  fec::RateMatcher matcher(std::size_t payload) const {
    if (payload == max_payload_) return matcher_;
    return fec::RateMatcher(mother_len(payload), coded_bits_);
  }

 private:
  SlotConfig cfg_;
  McsEntry mcs_;
  QamConstellation qam_;
  PilotMap pilots_;
  std::vector<PilotMap::Re> data_res_;
  std::size_t coded_bits_ = 0;
  std::size_t max_payload_ = 0;
  fec::Interleaver interleaver_;
  fec::RateMatcher matcher_;
};

inline fec::Bits random_payload(const LinkPlan& plan, Rng& rng) {
  fec::Bits bits(plan.max_payload());
  for (std::size_t i = 0; i < bits.size(); i += 64) {
    std::uint64_t w = rng();
    for (std::size_t k = i; k < std::min(bits.size(), i + 64); ++k, w >>= 1) bits[k] = w & 1u;
  }
  return bits;
}

struct TxSlot {
  ResourceGrid grid;  // antenna axis = layer
  fec::Bits payload;
};

/// Encodes the payload and places pilots and data symbols in the grid.
inline TxSlot build_tx_slot(const LinkPlan& plan, const fec::Bits& payload) {
  if (payload.size() > plan.max_payload())
    throw Error(Errc::payload_too_large, std::to_string(payload.size()) + " bits exceed capacity of " +
                                             std::to_string(plan.max_payload()));
  if (payload.empty()) throw Error(Errc::payload_too_large, "empty payload");
  const SlotConfig& cfg = plan.config();
  TxSlot tx{ResourceGrid(cfg.num_sc(), cfg.symbols_per_slot, cfg.num_layers), payload};

  const auto& pm = plan.pilots();
  for (std::size_t i = 0; i < pm.size(); ++i) {
    auto re = tx.grid.re(pm.res[i].sc, pm.res[i].sym);
    std::copy(pm.pilot(i), pm.pilot(i) + cfg.num_layers, re.begin());
  }

  const fec::Bits mother = fec::conv_encode(fec::attach_crc(payload));
  const fec::Bits matched = plan.matcher(payload.size()).select(mother);
  const fec::Bits coded = plan.interleaver().forward<std::uint8_t>(matched);
  const unsigned qm = plan.mcs().modulation_order;
  std::size_t pos = 0;
  for (const auto& d : plan.data_res()) {
    auto re = tx.grid.re(d.sc, d.sym);
    for (std::size_t m = 0; m < cfg.num_layers; ++m, pos += qm) re[m] = plan.qam().map(coded.data() + pos);
  }
  return tx;
}

/// y = H·x + G·x_I (interfered RBs only) + n. The interferer sends
/// independent uniform QPSK on each of its streams at every RE.
inline ResourceGrid receive(const TxSlot& tx, const ChannelRealization& ch, const OccupancyMask& mask,
                            const ResourceGrid& noise, Rng& interferer_rng) {
  const std::size_t num_sc = tx.grid.num_sc();
  const std::size_t num_sym = tx.grid.num_sym();
  const std::size_t n_rx = ch.serving.rows();
  const std::size_t n_l = ch.serving.cols();
  const std::size_t n_i = ch.interference.cols();
  if (noise.num_sc() != num_sc || noise.num_sym() != num_sym || noise.num_ant() != n_rx || ch.num_sc != num_sc ||
      tx.grid.num_ant() != n_l || mask.num_rb() * kSubcarriersPerRb != num_sc)
    throw Error(Errc::dimension_mismatch, "receive: inconsistent grid/channel dims");
  ResourceGrid rx = noise;
  const bool interfere = std::isfinite(ch.sir_db);
  const double a = 1.0 / std::sqrt(2.0);
  std::vector<cplx> xi(n_i);
  for (std::size_t sym = 0; sym < num_sym; ++sym)
    for (std::size_t sc = 0; sc < num_sc; ++sc) {
      auto y = rx.re(sc, sym);
      const auto x = tx.grid.re(sc, sym);
      const cplx* h = ch.serving.at(sc);
      for (std::size_t r = 0; r < n_rx; ++r) {
        cplx s = 0.0;
        for (std::size_t m = 0; m < n_l; ++m) s += h[r * n_l + m] * x[m];
        y[r] += s;
      }
      if (!interfere || !mask.interfered[sc / kSubcarriersPerRb]) continue;
      for (auto& v : xi) {
        const auto w = interferer_rng();
        v = {(w & 1u) ? -a : a, (w & 2u) ? -a : a};
      }
      const cplx* g = ch.interference.at(sc);
      for (std::size_t r = 0; r < n_rx; ++r) {
        cplx s = 0.0;
        for (std::size_t m = 0; m < n_i; ++m) s += g[r * n_i + m] * xi[m];
        y[r] += s;
      }
    }
  return rx;
}

/// DMRS residual vectors v̂ = y − Ĥx, grouped per RB.
struct Residuals {
  std::size_t num_rb = 0;
  std::size_t num_rx = 0;
  std::size_t per_rb = 0;
  std::vector<cplx> data;  // num_rb × per_rb × num_rx

  const cplx* at(std::size_t rb, std::size_t k) const { return data.data() + (rb * per_rb + k) * num_rx; }
  cplx* at(std::size_t rb, std::size_t k) { return data.data() + (rb * per_rb + k) * num_rx; }
};

enum class EstimatorMode { least_squares, genie };
enum class ResidualSource { smoothed, raw };

struct ChannelEstimate {
  MatrixStack per_sc;  // num_sc × (N × M)
  Residuals residuals;
};

/// LS despreading over each 4-RE CDM group, averaged over the RB's three
/// groups. Residuals use the RB average (smoothed) or the group estimate
/// (raw). Genie mode substitutes the true per-subcarrier channel.
inline ChannelEstimate estimate_channel(const ResourceGrid& rx, const PilotMap& pm, const SlotConfig& cfg,
                                        EstimatorMode mode = EstimatorMode::least_squares,
                                        const ChannelRealization* truth = nullptr,
                                        ResidualSource source = ResidualSource::smoothed) {
  const std::size_t n = cfg.num_rx, m = cfg.num_layers, nm = n * m;
  if (rx.num_ant() != n || rx.num_sc() != cfg.num_sc())
    throw Error(Errc::dimension_mismatch, "estimate_channel: grid does not match slot config");
  ChannelEstimate est{MatrixStack(cfg.num_sc(), n, m),
                      Residuals{cfg.num_rb, n, PilotMap::kPerRb, std::vector<cplx>(cfg.num_rb * PilotMap::kPerRb * n)}};

  auto residual = [&](std::size_t rb, std::size_t k, const cplx* h) {
    const std::size_t i = rb * PilotMap::kPerRb + k;
    const auto y = rx.re(pm.res[i].sc, pm.res[i].sym);
    const cplx* x = pm.pilot(i);
    cplx* v = est.residuals.at(rb, k);
    for (std::size_t r = 0; r < n; ++r) {
      cplx s = y[r];
      for (std::size_t l = 0; l < m; ++l) s -= h[r * m + l] * x[l];
      v[r] = s;
    }
  };

  if (mode == EstimatorMode::genie) {
    if (!truth) throw Error(Errc::config, "genie estimation needs the true channel");
    est.per_sc = truth->serving;
    for (std::size_t rb = 0; rb < cfg.num_rb; ++rb)
      for (std::size_t k = 0; k < PilotMap::kPerRb; ++k)
        residual(rb, k, truth->serving.at(pm.res[rb * PilotMap::kPerRb + k].sc));
    return est;
  }

  std::vector<cplx> group(PilotMap::kGroupsPerRb * nm), avg(nm);
  for (std::size_t rb = 0; rb < cfg.num_rb; ++rb) {
    std::fill(group.begin(), group.end(), cplx{});
    for (std::size_t g = 0; g < PilotMap::kGroupsPerRb; ++g) {
      cplx* hg = group.data() + g * nm;
      for (std::size_t j = 0; j < 4; ++j) {
        const std::size_t i = rb * PilotMap::kPerRb + 4 * g + j;
        const auto y = rx.re(pm.res[i].sc, pm.res[i].sym);
        const cplx* x = pm.pilot(i);
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t l = 0; l < m; ++l) hg[r * m + l] += y[r] * std::conj(x[l]);
      }
      for (std::size_t e = 0; e < nm; ++e) hg[e] *= 0.25;
    }
    for (std::size_t e = 0; e < nm; ++e)
      avg[e] = (group[e] + group[nm + e] + group[2 * nm + e]) / static_cast<double>(PilotMap::kGroupsPerRb);
    for (std::size_t sc = rb * cfg.sc_per_rb; sc < (rb + 1) * cfg.sc_per_rb; ++sc)
      std::copy(avg.begin(), avg.end(), est.per_sc.at(sc));
    for (std::size_t k = 0; k < PilotMap::kPerRb; ++k)
      residual(rb, k, source == ResidualSource::raw ? group.data() + (k / 4) * nm : avg.data());
  }
  return est;
}

struct DecodeResult {
  bool crc_pass = false;
  fec::Bits decoded_bits;
  double mean_abs_llr = 0.0;
};

/// Deinterleave, soft-combine, Viterbi, CRC. `llr` is in transmission order.
inline DecodeResult decode_llrs(const LinkPlan& plan, std::span<const float> llr, std::size_t payload_len) {
  if (llr.size() != plan.coded_bits()) throw Error(Errc::dimension_mismatch, "LLR count");
  DecodeResult res;
  double acc = 0.0;
  for (float v : llr) acc += std::abs(v);
  res.mean_abs_llr = llr.empty() ? 0.0 : acc / static_cast<double>(llr.size());
  const std::vector<float> matched = plan.interleaver().inverse<float>(llr);
  const std::vector<float> mother = plan.matcher(payload_len).combine(matched);
  fec::Bits block = fec::viterbi_decode(mother);
  res.crc_pass = fec::check_crc(block);
  block.resize(block.size() - fec::kCrcBits);
  res.decoded_bits = std::move(block);
  return res;
}

/// Per-subcarrier MMSE filters for unit-variance white noise, reused across
/// the slot's data symbols; unbiased estimates feed the max-log demapper.
inline std::vector<float> mmse_llrs(const ResourceGrid& y, const MatrixStack& h, const LinkPlan& plan) {
  const SlotConfig& cfg = plan.config();
  const std::size_t n = cfg.num_rx, m = cfg.num_layers;
  if (y.num_ant() != n || h.rows() != n || h.cols() != m || h.count() != cfg.num_sc())
    throw Error(Errc::dimension_mismatch, "detector inputs");
  const std::size_t num_sc = cfg.num_sc();
  std::vector<cplx> filters(num_sc * m * n);
  std::vector<double> gain(num_sc * m), nvar(num_sc * m);
  for (std::size_t sc = 0; sc < num_sc; ++sc) {
    const cplx* hs = h.at(sc);
    ComplexMatrix a(m, m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i; j < m; ++j) {
        cplx s = i == j ? 1.0 : 0.0;
        for (std::size_t r = 0; r < n; ++r) s += std::conj(hs[r * m + i]) * hs[r * m + j];
        a(i, j) = s;
        a(j, i) = std::conj(s);
      }
    const ComplexMatrix w = hermitian_inverse(HermitianMatrix(std::move(a)));
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t r = 0; r < n; ++r) {
        cplx s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += w(i, j) * std::conj(hs[r * m + j]);
        filters[(sc * m + i) * n + r] = s;
      }
      const double wkk = std::clamp(w(i, i).real(), 1e-12, 1.0 - 1e-12);
      gain[sc * m + i] = 1.0 - wkk;
      nvar[sc * m + i] = wkk / (1.0 - wkk);
    }
  }

  const unsigned qm = plan.mcs().modulation_order;
  std::vector<float> llr(plan.coded_bits());
  std::size_t pos = 0;
  for (const auto& d : plan.data_res()) {
    const auto yr = y.re(d.sc, d.sym);
    for (std::size_t i = 0; i < m; ++i, pos += qm) {
      const cplx* f = filters.data() + (d.sc * m + i) * n;
      cplx s = 0.0;
      for (std::size_t r = 0; r < n; ++r) s += f[r] * yr[r];
      const double g = gain[d.sc * m + i];
      plan.qam().demap(s / g, nvar[d.sc * m + i], llr.data() + pos);
    }
  }
  return llr;
}

inline DecodeResult detect_and_decode(const ResourceGrid& y_whitened, const MatrixStack& h_whitened,
                                      const LinkPlan& plan, std::size_t payload_len) {
  const std::vector<float> llr = mmse_llrs(y_whitened, h_whitened, plan);
  return decode_llrs(plan, llr, payload_len);
}

inline DecodeResult detect_and_decode(const ResourceGrid& y_whitened, const MatrixStack& h_whitened,
                                      const LinkPlan& plan) {
  return detect_and_decode(y_whitened, h_whitened, plan, plan.max_payload());
}

}  // namespace iwsel
