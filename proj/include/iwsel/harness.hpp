// SPDX-License-Identifier: Apache-2.0
//
// Monte Carlo orchestration: per-slot realizations keyed by (seed, scenario,
// slot) so every method and every SNR point sees the same underlying random
// draws, label generation with the three whitening branches, paired BLER
// sweeps, 10%-BLER SNR gaps and option utilization. Work units may run on any
// number of threads; results are reduced in index order.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "iwsel/channel.hpp"
#include "iwsel/error.hpp"
#include "iwsel/iw.hpp"
#include "iwsel/link.hpp"
#include "iwsel/rng.hpp"
#include "iwsel/selector.hpp"

namespace iwsel {

inline constexpr double kTargetBler = 0.1;

inline std::string format_db(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

/// Parallel loop over [0, n) with deterministic per-index results.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::mutex failure_mu;
  for (unsigned t = 0; t < std::min<std::size_t>(threads, n); ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

struct ScenarioPoint {
  TapProfile channel = profiles::epa5();
  Occupancy occupancy = Occupancy::none;
  double sir_db = kNoInterference;
  int mcs = 5;

  std::string id() const { return scenario_id(channel.name, occupancy, sir_db, mcs); }

  static std::string scenario_id(const std::string& channel, Occupancy occ, double sir_db, int mcs) {
    return channel + "_occ" + to_string(occ) + "_sir" + format_db(sir_db) + "_mcs" + std::to_string(mcs);
  }
};

struct SimulatorConfig {
  SlotConfig slot;
  std::size_t interferer_streams = 2;
  EstimatorMode estimator = EstimatorMode::least_squares;
  ResidualSource residuals = ResidualSource::smoothed;
  std::vector<McsEntry> mcs_table = default_mcs_table();
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

/// Everything one slot produces before the whitening branches.
struct SlotRealization {
  const LinkPlan* plan = nullptr;
  Scenario scenario;
  ChannelRealization channel;
  TxSlot tx;
  ResourceGrid rx;
  ChannelEstimate estimate;
  CovarianceSet cov;
};

class SlotSimulator {
 public:
  explicit SlotSimulator(SimulatorConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.slot.validate();
    validate_mcs_table(cfg_.mcs_table);
    for (const auto& e : cfg_.mcs_table) plans_.emplace(e.index, std::make_unique<LinkPlan>(cfg_.slot, e));
  }

  const SimulatorConfig& config() const { return cfg_; }

  const LinkPlan& plan(int mcs) const {
    auto it = plans_.find(mcs);
    if (it == plans_.end()) throw Error(Errc::config, "MCS " + std::to_string(mcs) + " not in table");
    return *it->second;
  }

  /// Stream key for (scenario, slot); SNR is excluded so SNR points share
  /// draws.
  std::uint64_t slot_seed(const ScenarioPoint& p, std::uint64_t slot) const {
    return derive_seed(cfg_.seed, {hash_label(p.id()), slot});
  }

  SlotRealization realize(const ScenarioPoint& p, double snr_db, std::uint64_t slot) const {
    SlotRealization r;
    r.plan = &plan(p.mcs);
    r.scenario = Scenario{p.channel, p.occupancy, cfg_.slot.num_rb, snr_db, p.sir_db, p.mcs, slot_seed(p, slot)};
    const std::uint64_t key = r.scenario.seed;
    Rng ch_rng(derive_seed(key, {1})), noise_rng(derive_seed(key, {2})), data_rng(derive_seed(key, {3})),
        intf_rng(derive_seed(key, {4}));
    r.channel = draw_channel(r.scenario, cfg_.slot.antennas(cfg_.interferer_streams), ch_rng);
    r.tx = build_tx_slot(*r.plan, random_payload(*r.plan, data_rng));
    const ResourceGrid noise = draw_noise(cfg_.slot.num_sc(), cfg_.slot.symbols_per_slot, cfg_.slot.num_rx, noise_rng);
    r.rx = receive(r.tx, r.channel, make_occupancy(p.occupancy, cfg_.slot.num_rb), noise, intf_rng);
    r.estimate = estimate_channel(r.rx, r.plan->pilots(), cfg_.slot, cfg_.estimator, &r.channel, cfg_.residuals);
    r.cov = estimate_rb_covariance(r.estimate.residuals);
    return r;
  }

  DecodeResult decode(const SlotRealization& r, IwOption option, WhitenReport* report = nullptr) const {
    WhitenedSlot w = whiten_slot(r.rx, r.estimate.per_sc, r.cov, option);
    DecodeResult d = detect_and_decode(w.grid, w.channel, *r.plan, r.tx.payload.size());
    if (report) *report = std::move(w.report);
    return d;
  }

 private:
  SimulatorConfig cfg_;
  std::map<int, std::unique_ptr<LinkPlan>> plans_;
};

/// A scenario point together with the SNR values to simulate.
struct PointPlan {
  ScenarioPoint point;
  std::vector<double> snrs;
};

inline std::vector<double> snr_range(double start, double step, double stop) {
  if (!(step > 0.0)) throw Error(Errc::config, "SNR step must be positive");
  std::vector<double> out;
  for (int i = 0;; ++i) {
    const double v = start + step * i;
    if (v > stop + 1e-9) break;
    out.push_back(v);
  }
  if (out.empty()) throw Error(Errc::config, "empty SNR range");
  return out;
}

enum class SweepMode { label_gen, eval_options, eval_selector };

struct SweepConfig {
  std::vector<TapProfile> channels = {profiles::epa5()};
  std::vector<Occupancy> occupancies = {Occupancy::occ1};
  std::vector<double> sirs = {10.0};
  std::vector<int> mcs = {5};
  std::vector<double> snrs = {10.0};
  std::size_t slots = 100;
  SweepMode mode = SweepMode::label_gen;

  void validate() const {
    if (slots < 1) throw Error(Errc::config, "slots must be >= 1");
    if (channels.empty() || occupancies.empty() || sirs.empty() || mcs.empty() || snrs.empty())
      throw Error(Errc::config, "every sweep axis needs at least one value");
  }

  std::vector<PointPlan> plans() const {
    validate();
    std::vector<PointPlan> out;
    for (const auto& ch : channels)
      for (auto occ : occupancies)
        for (double sir : sirs)
          for (int m : mcs) out.push_back({ScenarioPoint{ch, occ, sir, m}, snrs});
    return out;
  }
};

// ---------------------------------------------------------------------------
// Label generation

struct SlotLabel {
  CrcTriple crc{};
  FeatureVector features;
};

/// Decodes the slot under all three options and extracts its features.
inline SlotLabel label_slot(const SlotSimulator& sim, const SlotRealization& r) {
  SlotLabel out;
  for (std::size_t n = 0; n < kNumClasses; ++n)
    out.crc[n] = sim.decode(r, static_cast<IwOption>(n + 1)).crc_pass ? 1 : 0;
  out.features = extract_features(r.cov, r.plan->mcs());
  return out;
}

struct LabelGenResult {
  std::vector<LabeledSample> samples;
  std::size_t total = 0;
  std::size_t rejected = 0;
  std::array<std::size_t, kNumClasses> label_counts{};
};

inline LabelGenResult run_label_generation(const SlotSimulator& sim, const std::vector<PointPlan>& plans,
                                           std::size_t slots) {
  struct Unit {
    std::size_t plan, snr;
  };
  std::vector<Unit> units;
  for (std::size_t p = 0; p < plans.size(); ++p)
    for (std::size_t s = 0; s < plans[p].snrs.size(); ++s) units.push_back({p, s});
  const std::size_t n = units.size() * slots;
  std::vector<SlotLabel> results(n);
  parallel_for(n, sim.config().threads, [&](std::size_t i) {
    const Unit& u = units[i / slots];
    const auto& pp = plans[u.plan];
    results[i] = label_slot(sim, sim.realize(pp.point, pp.snrs[u.snr], i % slots));
  });

  LabelGenResult out;
  out.total = n;
  for (std::size_t i = 0; i < n; ++i) {
    const Unit& u = units[i / slots];
    const auto& pp = plans[u.plan];
    const auto label = generate_label(results[i].crc);
    if (!label) {
      ++out.rejected;
      continue;
    }
    ++out.label_counts[static_cast<std::size_t>(*label) - 1];
    out.samples.push_back({results[i].features, *label, results[i].crc,
                           ScenarioMeta{pp.point.channel.name, pp.point.occupancy, pp.snrs[u.snr], pp.point.sir_db,
                                        pp.point.mcs}});
  }
  return out;
}

// ---------------------------------------------------------------------------
// BLER sweeps

struct BlerPoint {
  double snr_db = 0.0;
  std::uint64_t blocks = 0;
  std::uint64_t block_errors = 0;

  double bler() const { return blocks ? static_cast<double>(block_errors) / static_cast<double>(blocks) : 0.0; }
};

struct BlerCurve {
  std::string scenario_id;
  std::string method;
  std::string complexity_class;
  std::vector<BlerPoint> points;
};

/// Per-SNR count of slots assigned to each option by a selector.
struct UtilizationTable {
  std::string scenario_id;
  std::vector<double> snrs;
  std::vector<std::array<std::uint64_t, kNumClasses>> counts;

  std::array<double, kNumClasses> fractions(std::size_t i) const {
    std::uint64_t total = 0;
    for (auto c : counts[i]) total += c;
    std::array<double, kNumClasses> f{};
    if (total == 0) return f;
    for (std::size_t k = 0; k < kNumClasses; ++k) f[k] = static_cast<double>(counts[i][k]) / static_cast<double>(total);
    return f;
  }
};

/// Fraction of slots per option at every SNR point.
inline UtilizationTable report_utilization(const std::string& scenario_id, const std::vector<double>& snrs,
                                           const std::vector<std::vector<IwOption>>& decisions) {
  UtilizationTable t{scenario_id, snrs, {}};
  for (const auto& per_snr : decisions) {
    std::array<std::uint64_t, kNumClasses> c{};
    for (auto o : per_snr) ++c[static_cast<std::size_t>(o) - 1];
    t.counts.push_back(c);
  }
  return t;
}

/// A fixed option or a trained selector.
struct Method {
  std::optional<IwOption> option;
  const MlpModel* model = nullptr;
  std::string label = {};

  static Method fixed(IwOption o) { return {o, nullptr, to_string(o)}; }
  static Method selector(const MlpModel& m, std::string name = "selector") { return {std::nullopt, &m, std::move(name)}; }

  std::string name() const { return label; }
};

struct SweepResult {
  std::vector<BlerCurve> curves;               // scenario-major, method-minor
  std::vector<UtilizationTable> utilization;   // one per (scenario, selector method)
  std::vector<CrcTriple> triples;              // per slot, index order; -1 where not decoded
};

/// Paired Monte Carlo BLER: every method sees the same realization per
/// slot; options are decoded at most once per slot.
inline SweepResult run_bler_sweep(const SlotSimulator& sim, const std::vector<PointPlan>& plans, std::size_t slots,
                                  const std::vector<Method>& methods) {
  if (methods.empty()) throw Error(Errc::config, "no methods to evaluate");
  struct Unit {
    std::size_t plan, snr;
  };
  std::vector<Unit> units;
  for (std::size_t p = 0; p < plans.size(); ++p)
    for (std::size_t s = 0; s < plans[p].snrs.size(); ++s) units.push_back({p, s});
  const std::size_t n = units.size() * slots;

  struct SlotResult {
    CrcTriple crc{-1, -1, -1};
    std::vector<IwOption> chosen;  // per method
  };
  std::vector<SlotResult> results(n);
  parallel_for(n, sim.config().threads, [&](std::size_t i) {
    const Unit& u = units[i / slots];
    const auto& pp = plans[u.plan];
    const SlotRealization r = sim.realize(pp.point, pp.snrs[u.snr], i % slots);
    SlotResult& out = results[i];
    std::optional<FeatureVector> feats;
    for (const auto& m : methods) {
      IwOption o;
      if (m.option) {
        o = *m.option;
      } else {
        if (!feats) feats = extract_features(r.cov, r.plan->mcs());
        o = select_option(*m.model, *feats);
      }
      out.chosen.push_back(o);
      auto& c = out.crc[static_cast<std::size_t>(o) - 1];
      if (c < 0) c = sim.decode(r, o).crc_pass ? 1 : 0;
    }
  });

  SweepResult res;
  for (std::size_t p = 0; p < plans.size(); ++p) {
    const auto& pp = plans[p];
    const std::string sid = pp.point.id();
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      BlerCurve curve{sid, methods[mi].name(), "", {}};
      std::size_t diag = 0, all = 0;
      std::vector<std::vector<IwOption>> decisions;
      for (std::size_t s = 0; s < pp.snrs.size(); ++s) {
        BlerPoint bp{pp.snrs[s], 0, 0};
        std::vector<IwOption> dec;
        std::size_t unit = 0;
        while (units[unit].plan != p || units[unit].snr != s) ++unit;
        for (std::size_t k = 0; k < slots; ++k) {
          const SlotResult& sr = results[unit * slots + k];
          const IwOption o = sr.chosen[mi];
          ++bp.blocks;
          if (sr.crc[static_cast<std::size_t>(o) - 1] != 1) ++bp.block_errors;
          dec.push_back(o);
          diag += is_diagonal_option(o) ? 1 : 0;
          ++all;
        }
        curve.points.push_back(bp);
        decisions.push_back(std::move(dec));
      }
      curve.complexity_class = 2 * diag >= all ? "O(N)" : "O(N^3)";
      res.curves.push_back(std::move(curve));
      if (!methods[mi].option) res.utilization.push_back(report_utilization(sid, pp.snrs, decisions));
    }
  }
  res.triples.reserve(n);
  for (const auto& r : results) res.triples.push_back(r.crc);
  return res;
}

/// Per-option BLER curves recovered from a label-generation run; a rejected
/// slot counts as a failure of every option. Curves are plan-major,
/// option-minor.
inline std::vector<BlerCurve> option_curves_from_labels(const std::vector<PointPlan>& plans, std::size_t slots,
                                                        const LabelGenResult& r) {
  // (scenario id, snr) -> emitted count and per-option passes
  std::map<std::pair<std::string, double>, std::array<std::uint64_t, kNumClasses + 1>> passes;
  for (const auto& s : r.samples) {
    const auto& m = s.meta;
    auto& p = passes[{ScenarioPoint::scenario_id(m.channel, m.occupancy, m.sir_db, m.mcs), m.snr_db}];
    ++p[kNumClasses];
    for (std::size_t n = 0; n < kNumClasses; ++n) p[n] += s.crc[n] == 1 ? 1 : 0;
  }
  std::vector<BlerCurve> out;
  for (const auto& pp : plans) {
    const std::string sid = pp.point.id();
    for (IwOption o : kAllOptions) {
      BlerCurve c{sid, to_string(o), complexity_class(o), {}};
      for (double snr : pp.snrs) {
        const auto it = passes.find({sid, snr});
        const std::uint64_t ok = it == passes.end() ? 0 : it->second[static_cast<std::size_t>(o) - 1];
        c.points.push_back({snr, slots, slots - ok});
      }
      out.push_back(std::move(c));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// SNR gap

/// SNR where the curve settles at or below `target`: the first point after
/// which every point is <= target, log-linearly interpolated against the
/// preceding point. nullopt when the last point is above target. A curve
/// already below target at its first point reports that first SNR.
inline std::optional<double> snr_at_bler(const BlerCurve& c, double target = kTargetBler) {
  if (c.points.empty()) return std::nullopt;
  std::size_t i = c.points.size();
  while (i > 0 && c.points[i - 1].bler() <= target) --i;
  if (i == c.points.size()) return std::nullopt;
  if (i == 0) return c.points.front().snr_db;
  const BlerPoint& a = c.points[i - 1];
  const BlerPoint& b = c.points[i];
  // zero-error points are floored at half an error
  const double pb = std::max(b.bler(), 0.5 / static_cast<double>(std::max<std::uint64_t>(b.blocks, 1)));
  const double la = std::log10(a.bler()), lb = std::log10(std::min(pb, target)), lt = std::log10(target);
  if (la == lb) return b.snr_db;
  return a.snr_db + (b.snr_db - a.snr_db) * (la - lt) / (la - lb);
}

struct GapRow {
  std::string scenario_id;
  std::string method;
  double snr_at_10pct_db = kNoInterference;  // +inf: never reaches 10 %
  double gap_db = kNoInterference;
  std::string complexity_class;
};

/// Gap of every curve to the best (lowest 10%-crossing) curve of its
/// scenario.
inline std::vector<GapRow> compute_snr_gap(const std::vector<BlerCurve>& curves) {
  std::map<std::string, double> best;
  std::vector<double> cross(curves.size());
  for (std::size_t i = 0; i < curves.size(); ++i) {
    cross[i] = snr_at_bler(curves[i]).value_or(kNoInterference);
    auto [it, inserted] = best.emplace(curves[i].scenario_id, cross[i]);
    if (!inserted) it->second = std::min(it->second, cross[i]);
  }
  std::vector<GapRow> rows;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const double b = best[curves[i].scenario_id];
    const double gap = std::isinf(cross[i]) ? kNoInterference : cross[i] - b;
    rows.push_back({curves[i].scenario_id, curves[i].method, cross[i], gap, curves[i].complexity_class});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* kDatasetHeader = "channel,occupancy,snr_db,sir_db,mcs,g1,g2,g3,g4,g5,label,c1,c2,c3";
inline constexpr const char* kBlerHeader = "scenario_id,method,snr_db,blocks,block_errors,bler";
inline constexpr const char* kGapHeader = "scenario_id,method,snr_at_10pct_db,gap_db,complexity_class";
inline constexpr const char* kUtilizationHeader = "scenario_id,snr_db,slots,iwnrb,iwnbw,iwrb";

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s, int lineno) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size())
    throw Error(Errc::io, "line " + std::to_string(lineno) + ": bad number '" + s + "'");
  return v;
}

inline long parse_int(const std::string& s, int lineno) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size())
    throw Error(Errc::io, "line " + std::to_string(lineno) + ": bad integer '" + s + "'");
  return v;
}

}  // namespace detail

inline void write_dataset(std::ostream& os, const std::vector<LabeledSample>& rows) {
  using detail::format_double;
  os << kDatasetHeader << '\n';
  for (const auto& r : rows) {
    const auto& m = r.meta;
    os << m.channel << ',' << to_string(m.occupancy) << ',' << format_double(m.snr_db) << ','
       << format_double(m.sir_db) << ',' << m.mcs << ',' << format_double(r.features.g1) << ','
       << format_double(r.features.g2) << ',' << format_double(r.features.g3) << ','
       << format_double(r.features.g4) << ',' << format_double(r.features.g5) << ',' << static_cast<int>(r.label)
       << ',' << r.crc[0] << ',' << r.crc[1] << ',' << r.crc[2] << '\n';
  }
}

inline std::vector<LabeledSample> read_dataset(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kDatasetHeader) throw Error(Errc::io, "dataset header mismatch");
  std::vector<LabeledSample> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 14) throw Error(Errc::io, "line " + std::to_string(lineno) + ": expected 14 fields");
    LabeledSample s;
    s.meta.channel = f[0];
    s.meta.occupancy = parse_occupancy(f[1]);
    s.meta.snr_db = detail::parse_double(f[2], lineno);
    s.meta.sir_db = detail::parse_double(f[3], lineno);
    s.meta.mcs = static_cast<int>(detail::parse_int(f[4], lineno));
    s.features = {detail::parse_double(f[5], lineno), detail::parse_double(f[6], lineno),
                  detail::parse_double(f[7], lineno), detail::parse_double(f[8], lineno),
                  detail::parse_double(f[9], lineno)};
    const long label = detail::parse_int(f[10], lineno);
    if (label < 1 || label > 3) throw Error(Errc::io, "line " + std::to_string(lineno) + ": label must be 1..3");
    s.label = static_cast<IwOption>(label);
    for (int k = 0; k < 3; ++k) {
      const long c = detail::parse_int(f[11 + k], lineno);
      if (c != 0 && c != 1) throw Error(Errc::io, "line " + std::to_string(lineno) + ": CRC flags must be 0/1");
      s.crc[k] = static_cast<int>(c);
    }
    if (generate_label(s.crc) != s.label)
      throw Error(Errc::io, "line " + std::to_string(lineno) + ": label is not the cheapest passing option");
    rows.push_back(std::move(s));
  }
  return rows;
}

inline void write_bler_csv(std::ostream& os, const std::vector<BlerCurve>& curves, bool header = true) {
  if (header) os << kBlerHeader << '\n';
  for (const auto& c : curves)
    for (const auto& p : c.points)
      os << c.scenario_id << ',' << c.method << ',' << detail::format_double(p.snr_db) << ',' << p.blocks << ','
         << p.block_errors << ',' << detail::format_double(p.bler()) << '\n';
}

/// Reads BLER rows back into curves (grouped by scenario and method, in
/// first-appearance order). Complexity class is not stored in this file.
inline std::vector<BlerCurve> read_bler_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kBlerHeader) throw Error(Errc::io, "BLER CSV header mismatch");
  std::vector<BlerCurve> curves;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == kBlerHeader) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 6) throw Error(Errc::io, "line " + std::to_string(lineno) + ": expected 6 fields");
    const auto key = std::make_pair(f[0], f[1]);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, curves.size()).first;
      curves.push_back({f[0], f[1], "", {}});
    }
    curves[it->second].points.push_back({detail::parse_double(f[2], lineno),
                                         static_cast<std::uint64_t>(detail::parse_int(f[3], lineno)),
                                         static_cast<std::uint64_t>(detail::parse_int(f[4], lineno))});
  }
  return curves;
}

inline void write_gap_csv(std::ostream& os, const std::vector<GapRow>& rows) {
  os << kGapHeader << '\n';
  for (const auto& r : rows)
    os << r.scenario_id << ',' << r.method << ',' << format_db(r.snr_at_10pct_db) << ',' << format_db(r.gap_db)
       << ',' << r.complexity_class << '\n';
}

inline void write_utilization_csv(std::ostream& os, const std::vector<UtilizationTable>& tables) {
  os << kUtilizationHeader << '\n';
  for (const auto& t : tables)
    for (std::size_t i = 0; i < t.snrs.size(); ++i) {
      const auto f = t.fractions(i);
      std::uint64_t total = t.counts[i][0] + t.counts[i][1] + t.counts[i][2];
      os << t.scenario_id << ',' << detail::format_double(t.snrs[i]) << ',' << total << ','
         << detail::format_double(f[0]) << ',' << detail::format_double(f[1]) << ',' << detail::format_double(f[2])
         << '\n';
    }
}

// ---------------------------------------------------------------------------
// Operating-point search

/// Lowest BLER over the three options at each SNR (a slot counts as a
/// success for option n only through option n's own CRC).
inline std::vector<double> best_option_bler(const SweepResult& r, std::size_t first_curve, std::size_t count) {
  std::vector<double> best(r.curves[first_curve].points.size(), 1.0);
  for (std::size_t c = first_curve; c < first_curve + count; ++c)
    for (std::size_t i = 0; i < best.size(); ++i) best[i] = std::min(best[i], r.curves[c].points[i].bler());
  return best;
}

/// Coarse sweep of all three options; returns the SNR where the best option
/// first settles below 10 % BLER, or nullopt if it never does on the grid.
inline std::optional<double> locate_waterfall(const SlotSimulator& sim, const ScenarioPoint& point,
                                              const std::vector<double>& snrs, std::size_t slots) {
  const std::vector<Method> opts = {Method::fixed(IwOption::iwnrb), Method::fixed(IwOption::iwnbw),
                                    Method::fixed(IwOption::iwrb)};
  const SweepResult r = run_bler_sweep(sim, {{point, snrs}}, slots, opts);
  BlerCurve best{point.id(), "best", "", {}};
  const auto b = best_option_bler(r, 0, 3);
  for (std::size_t i = 0; i < snrs.size(); ++i)
    best.points.push_back({snrs[i], slots, static_cast<std::uint64_t>(std::llround(b[i] * static_cast<double>(slots)))});
  return snr_at_bler(best);
}

/// Training SNR bounds: the largest grid SNR where the lowest MCS at SIR
/// 50 dB still has BLER >= 0.1, and the smallest grid SNR where the highest
/// MCS at SIR 0 dB reaches BLER <= 0.01 (best option in both cases). Falls
/// back to the grid ends when a condition is never met.
inline std::pair<double, double> training_snr_range(const SlotSimulator& sim, const TapProfile& channel,
                                                    Occupancy occupancy, const std::vector<double>& grid,
                                                    std::size_t slots) {
  const auto& table = sim.config().mcs_table;
  const std::vector<Method> opts = {Method::fixed(IwOption::iwnrb), Method::fixed(IwOption::iwnbw),
                                    Method::fixed(IwOption::iwrb)};
  const SweepResult lo = run_bler_sweep(sim, {{{channel, occupancy, 50.0, table.front().index}, grid}}, slots, opts);
  const SweepResult hi = run_bler_sweep(sim, {{{channel, occupancy, 0.0, table.back().index}, grid}}, slots, opts);
  const auto blo = best_option_bler(lo, 0, 3);
  const auto bhi = best_option_bler(hi, 0, 3);
  double snr_min = grid.front(), snr_max = grid.back();
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (blo[i] >= 0.1) snr_min = grid[i];
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (bhi[i] <= 0.01) {
      snr_max = grid[i];
      break;
    }
  return {snr_min, std::max(snr_min, snr_max)};
}

}  // namespace iwsel
