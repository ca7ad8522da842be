// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset. Artifacts go to $IWSEL_ACCEPTANCE_DIR
// (default ./acceptance_artifacts).

#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "iwsel/iwsel.hpp"

namespace iwsel {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

unsigned worker_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

std::filesystem::path artifact_dir() {
  const char* env = std::getenv("IWSEL_ACCEPTANCE_DIR");
  std::filesystem::path p = env && *env ? env : "acceptance_artifacts";
  std::filesystem::create_directories(p);
  return p;
}

template <typename Fn>
void write_artifact(const std::string& name, Fn&& fn) {
  std::ofstream os(artifact_dir() / name);
  fn(os);
}

double uniform(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

ComplexMatrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  ComplexMatrix m(r, c);
  ComplexGaussian g(1.0);
  for (auto& v : m.data()) v = g(rng);
  return m;
}

double rel_frobenius(const ComplexMatrix& a, const ComplexMatrix& b) {
  return (a - b).frobenius_norm() / b.frobenius_norm();
}

// ---------------------------------------------------------------------------
// 1. Linear algebra

Outcome linear_algebra() {
  Rng rng(101);
  double worst_rec = 0.0, worst_inv = 0.0, worst_full = 0.0;
  for (int c = 0; c < 1000; ++c) {
    const std::size_t n = 1 + c % 8;
    const ComplexMatrix a = random_matrix(n, n, rng);
    // conditioning varies over ~3 decades
    const double load = std::pow(10.0, -1.0 - 2.0 * uniform(rng));
    ComplexMatrix r = a * a.adjoint();
    for (std::size_t i = 0; i < n; ++i) r(i, i) += load;
    OpCounter ops;
    const CholeskyFactor f = cholesky(HermitianMatrix(hermitian_projection(r)), ops);
    const ComplexMatrix linv = lower_inverse(f, ops);
    worst_rec = std::max(worst_rec, rel_frobenius(f.lower * f.lower.adjoint(), r));
    worst_inv = std::max(worst_inv, rel_frobenius(f.lower * linv, ComplexMatrix::identity(n)));
    const ComplexMatrix rinv = hermitian_inverse(hermitian_projection(r));
    worst_full = std::max(worst_full, rel_frobenius(r * rinv, ComplexMatrix::identity(n)));
  }
  const bool ok = worst_rec <= 1e-10 && worst_inv <= 1e-10 && worst_full <= 1e-10;
  return {ok, fmt("max rel err: LL^H=%.2e  L*Linv=%.2e  R*Rinv=%.2e (tol 1e-10)", worst_rec, worst_inv, worst_full)};
}

// ---------------------------------------------------------------------------
// 2. Whitening statistics with the true covariance

Outcome whitening_statistics() {
  SimulatorConfig cfg;
  cfg.slot.num_rb = 20;
  cfg.slot.num_rx = 4;
  cfg.slot.num_layers = 2;
  cfg.interferer_streams = 2;
  cfg.estimator = EstimatorMode::genie;
  cfg.seed = 202;
  const SlotSimulator sim(cfg);
  const ScenarioPoint point{profiles::flat(), Occupancy::occ3, 0.0, 5};
  const std::size_t n = 4;
  ComplexMatrix acc(n, n);
  std::size_t count = 0;
  for (std::uint64_t slot = 0; count < 100000; ++slot) {
    const SlotRealization r = sim.realize(point, 10.0, slot);
    // flat interference: R = G Gᴴ + I on every RE
    const cplx* g0 = r.channel.interference.at(0);
    const ComplexMatrix g(n, cfg.interferer_streams, std::vector<cplx>(g0, g0 + n * cfg.interferer_streams));
    const HermitianMatrix truth = hermitian_projection(g * g.adjoint() + ComplexMatrix::identity(n));
    OpCounter ops;
    const ComplexMatrix linv = lower_inverse(cholesky(truth, ops), ops);
    const Residuals& res = r.estimate.residuals;
    ComplexMatrix v(n, res.num_rb * res.per_rb);
    for (std::size_t rb = 0; rb < res.num_rb; ++rb)
      for (std::size_t k = 0; k < res.per_rb; ++k)
        for (std::size_t i = 0; i < n; ++i) v(i, rb * res.per_rb + k) = res.at(rb, k)[i];
    const ComplexMatrix w = whiten_apply(linv, v);
    acc = acc + w * w.adjoint();
    count += v.cols();
  }
  for (auto& x : acc.data()) x /= static_cast<double>(count);
  const double err = (acc - ComplexMatrix::identity(n)).frobenius_norm();
  return {err <= 0.05, fmt("||S - I||_F = %.4f over %zu REs (tol 0.05)", err, count)};
}

// ---------------------------------------------------------------------------
// 3. Complexity evidence

OpCounter dense_setup(std::size_t n, Rng& rng) {
  const ComplexMatrix a = random_matrix(n, n, rng);
  OpCounter ops;
  lower_inverse(cholesky(hermitian_projection(a * a.adjoint() + ComplexMatrix::identity(n)), ops), ops);
  return ops;
}

OpCounter diagonal_setup(std::size_t n, Rng& rng) {
  std::vector<double> d(n);
  for (auto& v : d) v = 0.5 + uniform(rng);
  OpCounter ops;
  lower_inverse(cholesky(HermitianMatrix::diagonal(d), ops), ops);
  return ops;
}

Outcome complexity() {
  Rng rng(303);
  const double full = static_cast<double>(dense_setup(8, rng).flops()) / static_cast<double>(dense_setup(2, rng).flops());
  const double diag =
      static_cast<double>(diagonal_setup(8, rng).flops()) / static_cast<double>(diagonal_setup(2, rng).flops());
  const bool ok = full >= 50 && full <= 80 && diag >= 3.5 && diag <= 4.5;
  return {ok, fmt("setup flops N=8/N=2: full %.2f (in [50,80]), diagonal %.2f (in [3.5,4.5])", full, diag)};
}

// ---------------------------------------------------------------------------
// 4. Averaging gain

Outcome averaging_gain() {
  SimulatorConfig cfg;
  cfg.slot.num_rb = 20;
  cfg.slot.num_rx = 2;
  cfg.slot.num_layers = 2;
  cfg.estimator = EstimatorMode::genie;
  cfg.seed = 404;
  const SlotSimulator sim(cfg);
  const ScenarioPoint point{profiles::epa5(), Occupancy::none, kNoInterference, 5};
  const std::size_t slots = 10000, n = 2, b = 20;
  std::vector<double> s_nrb(n * b), q_nrb(n * b), s_nbw(n), q_nbw(n);
  for (std::uint64_t slot = 0; slot < slots; ++slot) {
    const SlotRealization r = sim.realize(point, 0.0, slot);
    const auto bw = build_iw_matrix(r.cov, IwOption::iwnbw, 0);
    for (std::size_t i = 0; i < n; ++i) {
      s_nbw[i] += bw(i, i).real();
      q_nbw[i] += bw(i, i).real() * bw(i, i).real();
      for (std::size_t rb = 0; rb < b; ++rb) {
        const double d = build_iw_matrix(r.cov, IwOption::iwnrb, rb)(i, i).real();
        s_nrb[rb * n + i] += d;
        q_nrb[rb * n + i] += d * d;
      }
    }
  }
  auto mean_var = [&](const std::vector<double>& s, const std::vector<double>& q) {
    double v = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double m = s[k] / slots;
      v += q[k] / slots - m * m;
    }
    return v / static_cast<double>(s.size());
  };
  const double ratio = mean_var(s_nbw, q_nbw) / mean_var(s_nrb, q_nrb);
  const bool ok = ratio >= 1.0 / 26.0 && ratio <= 1.0 / 14.0;
  return {ok, fmt("var(IWNBW)/var(IWNRB) = %.5f = 1/%.2f over %zu slots (in [1/26, 1/14])", ratio, 1.0 / ratio, slots)};
}

// ---------------------------------------------------------------------------
// 5. Qualitative option ordering, 2x2

SimulatorConfig two_by_two(std::uint64_t seed) {
  SimulatorConfig cfg;
  cfg.slot.num_rb = 20;
  cfg.slot.num_rx = 2;
  cfg.slot.num_layers = 2;
  cfg.interferer_streams = 2;
  cfg.seed = seed;
  cfg.threads = worker_threads();
  return cfg;
}

Outcome option_ordering() {
  const std::size_t slots = 1000;
  std::string detail;
  bool ok = true;

  // (a) occupancy 1, SIR 10 dB: per-RB diagonal beats the wideband one
  {
    const SlotSimulator sim(two_by_two(505));
    const std::vector<PointPlan> plans = {{{profiles::epa5(), Occupancy::occ1, 10.0, 5}, snr_range(0, 1, 20)}};
    const SweepResult r =
        run_bler_sweep(sim, plans, slots, {Method::fixed(IwOption::iwnrb), Method::fixed(IwOption::iwnbw)});
    write_artifact("c5a_bler.csv", [&](std::ostream& os) { write_bler_csv(os, r.curves); });
    std::vector<std::size_t> mid;
    for (std::size_t i = 0; i < r.curves[0].points.size(); ++i) {
      const double b = r.curves[0].points[i].bler();
      if (b >= 0.05 && b <= 0.3) mid.push_back(i);
    }
    if (mid.empty()) {
      ok = false;
      detail += "(a) no SNR point with IWNRB BLER in [0.05,0.3]; ";
    } else {
      const std::size_t i = mid[mid.size() / 2];
      // discordant pairs over the shared slots
      std::size_t only_nrb = 0, only_nbw = 0;
      for (std::size_t k = 0; k < slots; ++k) {
        const CrcTriple& t = r.triples[i * slots + k];
        only_nrb += t[0] == 1 && t[1] == 0;
        only_nbw += t[0] == 0 && t[1] == 1;
      }
      const double nrb = r.curves[0].points[i].bler(), nbw = r.curves[1].points[i].bler();
      const double disc = static_cast<double>(only_nrb + only_nbw);
      const double z = disc > 0 ? (static_cast<double>(only_nrb) - static_cast<double>(only_nbw)) / std::sqrt(disc) : 0;
      const bool a_ok = nrb < nbw && z >= 3.0;
      ok = ok && a_ok;
      detail += fmt("(a) %s at %g dB: IWNRB %.3f vs IWNBW %.3f, paired z=%.1f; ", a_ok ? "ok" : "FAIL",
                    r.curves[0].points[i].snr_db, nrb, nbw, z);
    }
  }
  // (b) SIR 50 dB: the wideband diagonal needs no more SNR than full IW
  {
    const SlotSimulator sim(two_by_two(506));
    const std::vector<PointPlan> plans = {{{profiles::epa5(), Occupancy::occ1, 50.0, 5}, snr_range(-2, 1, 14)}};
    const SweepResult r =
        run_bler_sweep(sim, plans, slots, {Method::fixed(IwOption::iwnbw), Method::fixed(IwOption::iwrb)});
    write_artifact("c5b_bler.csv", [&](std::ostream& os) { write_bler_csv(os, r.curves); });
    const auto nbw = snr_at_bler(r.curves[0]), rb = snr_at_bler(r.curves[1]);
    const bool b_ok = nbw && (!rb || *nbw <= *rb);
    ok = ok && b_ok;
    detail += fmt("(b) %s SIR 50: snr@10%% IWNBW %s dB vs IWRB %s dB", b_ok ? "ok" : "FAIL",
                  format_db(nbw.value_or(kNoInterference)).c_str(), format_db(rb.value_or(kNoInterference)).c_str());
  }
  return {ok, detail};
}

// ---------------------------------------------------------------------------
// 6. Gradient check

std::vector<LabeledSample> random_dataset(std::size_t n, Rng& rng) {
  std::vector<LabeledSample> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i].features = {20.0 * uniform(rng) - 5.0, 20.0 * uniform(rng), -10.0 * uniform(rng),
                     2.0 + 2.0 * static_cast<double>(rng() % 4), 0.1 + 0.8 * uniform(rng)};
    d[i].label = static_cast<IwOption>(1 + rng() % 3);
  }
  return d;
}

Outcome gradient_check() {
  Rng rng(606);
  const auto data = random_dataset(50, rng);
  MlpModel m;
  for (auto& v : m.params) v = 2.0 * uniform(rng) - 1.0;
  fit_normalization(m, data);
  const LossGrad lg = loss_and_grad(m, data);
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t i = 0; i < MlpModel::kParams; ++i) {
    MlpModel a = m, b = m;
    a.params[i] += h;
    b.params[i] -= h;
    const double fd = (loss_and_grad(a, data).loss - loss_and_grad(b, data).loss) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - lg.grad[i]) / std::max(std::abs(fd), 1e-6));
  }
  return {worst <= 1e-4, fmt("max relative error %.2e over %zu parameters (tol 1e-4)", worst, MlpModel::kParams)};
}

// ---------------------------------------------------------------------------
// 7. Trainer sanity on a simulated dataset

SimulatorConfig desk_config(std::uint64_t seed) {
  SimulatorConfig cfg;
  cfg.slot.num_rb = 20;
  cfg.slot.num_rx = 4;
  cfg.slot.num_layers = 2;
  cfg.interferer_streams = 2;
  cfg.seed = seed;
  cfg.threads = worker_threads();
  return cfg;
}

Outcome trainer_sanity() {
  const SlotSimulator sim(desk_config(707));
  SweepConfig grid;
  grid.channels = {profiles::epa5()};
  grid.occupancies = {Occupancy::occ1, Occupancy::occ2};
  grid.sirs = {0.0, 50.0};
  grid.mcs = {5};
  grid.snrs = snr_range(-4, 2, 16);
  const LabelGenResult lg = run_label_generation(sim, grid.plans(), 15);
  const double zero_loss = loss_and_grad(MlpModel{}, lg.samples).loss;
  TrainConfig cfg;
  cfg.seed = 77;
  TrainResult a, b;
  try {
    a = train(lg.samples, cfg);
    b = train(lg.samples, cfg);
  } catch (const Error& e) {
    return {false, std::string("training failed: ") + e.what()};
  }
  const bool identical = a.model.params.size() == b.model.params.size() &&
                         std::memcmp(a.model.params.data(), b.model.params.data(),
                                     a.model.params.size() * sizeof(double)) == 0 &&
                         a.model == b.model;
  const bool ok = std::abs(zero_loss - std::log(3.0)) <= 1e-9 && a.final_loss < a.initial_loss && identical;
  return {ok, fmt("%zu samples (labels %zu/%zu/%zu): zero-weight loss - ln3 = %.1e; loss %.4f -> %.4f in %zu it; "
                  "retrain %s",
                  lg.samples.size(), lg.label_counts[0], lg.label_counts[1], lg.label_counts[2],
                  zero_loss - std::log(3.0), a.initial_loss, a.final_loss, a.iterations,
                  identical ? "bit-identical" : "DIFFERS")};
}

// ---------------------------------------------------------------------------
// 8 and 9. Desk-scale train / evaluate pipeline

struct PointEval {
  ScenarioPoint point;
  bool trained = false;
  std::vector<double> snrs;
  std::optional<double> best_crossing;  // best fixed option
  double selector_gap = kNoInterference;
  double nbw_crossing = kNoInterference;
  std::array<double, kNumClasses> utilization_at_op{};
  double operating_snr = 0.0;
};

struct DeskRun {
  bool done = false;
  std::string error;
  std::size_t samples = 0, total = 0, rejected = 0;
  std::array<std::size_t, kNumClasses> labels{};
  std::pair<double, double> train_range;
  std::vector<PointEval> points;
};

DeskRun g_desk;

constexpr std::size_t kLabelSlots = 40;
constexpr std::size_t kEvalSlots = 200;
constexpr std::size_t kLocateSlots = 40;

std::vector<double> window_around(double crossing, double below, double above) {
  const double start = std::floor(crossing) - below;
  return snr_range(start, 1.0, start + below + above);
}

// Evaluates all fixed options and the selector over each point's window.
void evaluate_points(const SlotSimulator& sim, const MlpModel& model, std::vector<PointEval>& pts,
                     std::vector<BlerCurve>& all_curves, std::vector<UtilizationTable>& all_util) {
  const std::vector<Method> methods = {Method::fixed(IwOption::iwnrb), Method::fixed(IwOption::iwnbw),
                                       Method::fixed(IwOption::iwrb), Method::selector(model)};
  std::vector<PointPlan> plans;
  std::vector<std::size_t> index;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (!pts[i].snrs.empty()) {
      plans.push_back({pts[i].point, pts[i].snrs});
      index.push_back(i);
    }
  if (plans.empty()) return;
  const SweepResult r = run_bler_sweep(sim, plans, kEvalSlots, methods);
  const auto gaps = compute_snr_gap(r.curves);
  for (std::size_t p = 0; p < plans.size(); ++p) {
    PointEval& e = pts[index[p]];
    double best = kNoInterference;
    for (std::size_t m = 0; m < 3; ++m) best = std::min(best, gaps[p * 4 + m].snr_at_10pct_db);
    e.best_crossing = std::isinf(best) ? std::nullopt : std::optional<double>(best);
    e.selector_gap = gaps[p * 4 + 3].gap_db;
    if (std::isfinite(e.selector_gap) && e.best_crossing)
      e.selector_gap = gaps[p * 4 + 3].snr_at_10pct_db - best;  // vs fixed options only
    e.nbw_crossing = gaps[p * 4 + 1].snr_at_10pct_db;
    // operating point: grid SNR nearest the best option's crossing
    const UtilizationTable& u = r.utilization[p];
    std::size_t op = 0;
    if (e.best_crossing)
      for (std::size_t i = 0; i < u.snrs.size(); ++i)
        if (std::abs(u.snrs[i] - best) < std::abs(u.snrs[op] - best)) op = i;
    e.operating_snr = u.snrs[op];
    e.utilization_at_op = u.fractions(op);
  }
  all_curves.insert(all_curves.end(), r.curves.begin(), r.curves.end());
  all_util.insert(all_util.end(), r.utilization.begin(), r.utilization.end());
}

void run_desk_pipeline() {
  DeskRun& d = g_desk;
  d.done = true;
  const SlotSimulator sim(desk_config(808));
  const std::vector<TapProfile> channels = {profiles::epa5(), profiles::tdla30()};
  const std::vector<int> mcs = {5, 15};

  // training SNR bounds from pilot sweeps (lowest and highest table MCS)
  const auto pilot_grid = snr_range(-10, 2, 30);
  double lo = kNoInterference, hi = -kNoInterference;
  for (const auto& ch : channels) {
    const auto [a, b] = training_snr_range(sim, ch, Occupancy::occ1, pilot_grid, 20);
    lo = std::min(lo, a);
    hi = std::max(hi, b);
  }
  d.train_range = {lo, hi};
  std::printf("  desk: training SNR range [%g, %g] dB\n", lo, hi);

  SweepConfig grid;
  grid.channels = channels;
  grid.occupancies = {Occupancy::occ1, Occupancy::occ2};
  grid.sirs = {0, 10, 20, 30, 40, 50};
  grid.mcs = mcs;
  grid.snrs = snr_range(lo, 2, hi);
  grid.slots = kLabelSlots;
  const auto plans = grid.plans();
  const LabelGenResult lg = run_label_generation(sim, plans, kLabelSlots);
  d.samples = lg.samples.size();
  d.total = lg.total;
  d.rejected = lg.rejected;
  d.labels = lg.label_counts;
  std::printf("  desk: label generation %zu slots, %zu emitted, %zu rejected, labels %zu/%zu/%zu\n", lg.total,
              lg.samples.size(), lg.rejected, lg.label_counts[0], lg.label_counts[1], lg.label_counts[2]);
  std::fflush(stdout);
  write_artifact("desk_dataset.csv", [&](std::ostream& os) { write_dataset(os, lg.samples); });
  const auto label_curves = option_curves_from_labels(plans, kLabelSlots, lg);
  write_artifact("desk_labelgen_bler.csv", [&](std::ostream& os) { write_bler_csv(os, label_curves); });

  TrainConfig tcfg;
  tcfg.seed = 88;
  const TrainResult tr = train(lg.samples, tcfg);
  std::printf("  desk: training loss %.4f -> %.4f in %zu iterations\n", tr.initial_loss, tr.final_loss, tr.iterations);
  write_artifact("desk_model.txt", [&](std::ostream& os) { save_model(os, tr.model); });

  // trained points: window around the best option's crossing in the label data
  for (std::size_t p = 0; p < plans.size(); ++p) {
    PointEval e;
    e.point = plans[p].point;
    e.trained = true;
    BlerCurve best{plans[p].point.id(), "best", "", {}};
    for (std::size_t s = 0; s < plans[p].snrs.size(); ++s) {
      std::uint64_t errors = kLabelSlots;
      for (std::size_t o = 0; o < 3; ++o) errors = std::min(errors, label_curves[p * 3 + o].points[s].block_errors);
      best.points.push_back({plans[p].snrs[s], kLabelSlots, errors});
    }
    if (const auto c = snr_at_bler(best)) e.snrs = window_around(*c, 3, 4);
    d.points.push_back(std::move(e));
  }

  // untrained: full-band occupancy, and a channel outside the training set
  const auto locate_grid = snr_range(-6, 2, 30);
  std::vector<ScenarioPoint> untrained;
  for (double sir : {0.0, 50.0})
    for (int m : mcs) untrained.push_back({profiles::epa5(), Occupancy::occ3, sir, m});
  for (double sir : {0.0, 50.0}) untrained.push_back({profiles::eva30(), Occupancy::occ1, sir, 5});
  for (const auto& pt : untrained) {
    PointEval e;
    e.point = pt;
    if (const auto c = locate_waterfall(sim, pt, locate_grid, kLocateSlots)) e.snrs = window_around(*c, 3, 6);
    d.points.push_back(std::move(e));
  }

  std::vector<BlerCurve> curves;
  std::vector<UtilizationTable> util;
  evaluate_points(sim, tr.model, d.points, curves, util);
  write_artifact("desk_bler.csv", [&](std::ostream& os) { write_bler_csv(os, curves); });
  write_artifact("desk_gap.csv", [&](std::ostream& os) { write_gap_csv(os, compute_snr_gap(curves)); });
  write_artifact("desk_util.csv", [&](std::ostream& os) { write_utilization_csv(os, util); });

  std::printf("  %-28s %-8s %10s %10s %10s  %s\n", "scenario", "set", "best@10%", "sel gap", "IWNBW@10%",
              "util@op (nrb/nbw/rb)");
  for (const auto& e : d.points)
    std::printf("  %-28s %-8s %10s %10s %10s  %.2f/%.2f/%.2f @ %g dB\n", e.point.id().c_str(),
                e.trained ? "trained" : "untrain", format_db(e.best_crossing.value_or(kNoInterference)).c_str(),
                format_db(e.selector_gap).c_str(), format_db(e.nbw_crossing).c_str(), e.utilization_at_op[0],
                e.utilization_at_op[1], e.utilization_at_op[2], e.operating_snr);
  std::fflush(stdout);
}

Outcome selector_quality() {
  try {
    run_desk_pipeline();
  } catch (const Error& e) {
    g_desk.error = e.what();
    return {false, std::string("pipeline error: ") + e.what()};
  }
  std::size_t trained = 0, trained_ok = 0, no_crossing = 0;
  std::string failures;
  bool occ3_ok = true, nbw_inf = true;
  std::size_t occ3_count = 0;
  for (const auto& e : g_desk.points) {
    if (e.trained) {
      if (!e.best_crossing) {
        ++no_crossing;
        continue;
      }
      ++trained;
      if (e.selector_gap <= 0.5) ++trained_ok;
      else failures += " " + e.point.id() + "=" + format_db(e.selector_gap);
    } else if (e.point.occupancy == Occupancy::occ3) {
      ++occ3_count;
      const bool gap_ok = e.best_crossing && e.selector_gap <= 0.75;
      occ3_ok = occ3_ok && gap_ok;
      if (!gap_ok) failures += " " + e.point.id() + "=" + format_db(e.selector_gap);
      if (e.point.sir_db == 0.0 && std::isfinite(e.nbw_crossing)) nbw_inf = false;
    }
  }
  const bool ok = trained > 0 && trained_ok == trained && occ3_count > 0 && occ3_ok && nbw_inf;
  return {ok, fmt("trained points within 0.5 dB: %zu/%zu (%zu without a crossing); occ3 within 0.75 dB: %s; "
                  "IWNBW never crosses at occ3 SIR 0: %s.%s%s",
                  trained_ok, trained, no_crossing, occ3_ok ? "yes" : "no", nbw_inf ? "yes" : "no",
                  failures.empty() ? "" : " Failing:", failures.c_str())};
}

Outcome utilization_sanity() {
  if (!g_desk.done) run_desk_pipeline();
  if (!g_desk.error.empty()) return {false, "pipeline error: " + g_desk.error};
  bool ok = true;
  std::size_t count = 0;
  std::string detail;
  for (const auto& e : g_desk.points) {
    if (e.trained || e.point.occupancy != Occupancy::occ3) continue;
    ++count;
    const auto& u = e.utilization_at_op;
    const bool low = e.point.sir_db == 0.0;
    const double frac = low ? u[2] : u[0] + u[1];
    const bool pt_ok = e.best_crossing.has_value() && frac >= 0.6;
    ok = ok && pt_ok;
    detail += fmt("%s%s %s=%.2f @ %g dB", detail.empty() ? "" : "; ", e.point.id().c_str(), low ? "IWRB" : "diag",
                  frac, e.operating_snr);
  }
  return {ok && count > 0, detail};
}

// ---------------------------------------------------------------------------
// 10. Label pipeline conservation and CSV round trip

Outcome label_pipeline() {
  const SlotSimulator sim(two_by_two(1010));
  SweepConfig grid;
  grid.occupancies = {Occupancy::occ1, Occupancy::occ3};
  grid.sirs = {0.0, kNoInterference};
  grid.snrs = snr_range(-6, 4, 14);
  const auto plans = grid.plans();
  const std::size_t slots = 20;
  const LabelGenResult r = run_label_generation(sim, plans, slots);
  bool ok = r.samples.size() + r.rejected == r.total && r.total == plans.size() * grid.snrs.size() * slots;
  // per-point conservation through the recovered curves
  const auto curves = option_curves_from_labels(plans, slots, r);
  for (const auto& c : curves)
    for (const auto& p : c.points) ok = ok && p.blocks == slots && p.block_errors <= slots;

  std::ostringstream first;
  write_dataset(first, r.samples);
  std::istringstream in(first.str());
  const auto back = read_dataset(in);
  std::ostringstream second;
  write_dataset(second, back);
  const bool identical = first.str() == second.str() && back == r.samples;
  ok = ok && identical;
  return {ok, fmt("total %zu = emitted %zu + rejected %zu; CSV round trip %s (%zu bytes)", r.total, r.samples.size(),
                  r.rejected, identical ? "byte-identical" : "DIFFERS", first.str().size())};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace iwsel

int main(int argc, char** argv) {
  using namespace iwsel;
  const std::vector<Criterion> all = {
      {1, "linear algebra", 5, linear_algebra},
      {2, "whitening statistics", 10, whitening_statistics},
      {3, "complexity ratio", 1, complexity},
      {4, "averaging gain", 60, averaging_gain},
      {5, "option ordering 2x2", 600, option_ordering},
      {6, "gradient check", 5, gradient_check},
      {7, "trainer sanity", 30, trainer_sanity},
      {8, "selector SNR gap", 2700, selector_quality},
      {9, "selector utilization", 2700, utilization_sanity},
      {10, "label pipeline", 10, label_pipeline},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  double desk_seconds = 0.0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    // 9 reuses the pipeline run by 8; its budget is shared
    if (c.id == 8) desk_seconds = secs;
    if (c.id == 9) secs += desk_seconds;
    const bool in_time = secs < c.limit_s;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::printf("[%s] %2d %-22s %s (%.1f s, limit %.0f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs, c.limit_s, in_time ? "" : ", OVER TIME");
    std::fflush(stdout);
  }
  std::printf("%d criterion(s) failed\n", failed);
  return failed == 0 ? 0 : 1;
}
