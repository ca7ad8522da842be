// SPDX-License-Identifier: Apache-2.0
//
// Supervised IW option selection: per-slot features from the covariance
// estimates, lowest-complexity-success labels, a 5-16-3 perceptron
// (sigmoid hidden layer, softmax output) trained by full-batch L-BFGS on
// cross-entropy, and argmax selection with ties going to the cheaper option.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <deque>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "iwsel/channel.hpp"
#include "iwsel/error.hpp"
#include "iwsel/iw.hpp"
#include "iwsel/link.hpp"
#include "iwsel/rng.hpp"

namespace iwsel {

inline constexpr std::size_t kNumFeatures = 5;
inline constexpr std::size_t kNumClasses = 3;

/// Relative floor for g2/g3, in dB below g1.
inline constexpr double kFeatureFloorDb = 60.0;

struct FeatureVector {
  double g1 = 0.0;  // mean diagonal power, dB
  double g2 = 0.0;  // largest per-antenna RB maximum, dB
  double g3 = 0.0;  // smallest per-antenna RB minimum, dB
  double g4 = 0.0;  // modulation order
  double g5 = 0.0;  // code rate

  std::array<double, kNumFeatures> values() const { return {g1, g2, g3, g4, g5}; }
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// Linear-domain diagonal statistics behind g1..g3.
struct DiagonalStats {
  double mean = 0.0;
  double max = 0.0;
  double min = 0.0;
};

inline DiagonalStats diagonal_stats(const CovarianceSet& cov) {
  if (cov.num_rb() == 0 || cov.num_rx == 0) throw Error(Errc::empty_rb, "empty covariance set");
  const std::size_t n = cov.num_rx;
  DiagonalStats s{0.0, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < n; ++i) {
    double avg = 0.0, hi = -std::numeric_limits<double>::infinity(), lo = std::numeric_limits<double>::infinity();
    for (const auto& r : cov.per_rb) {
      const double d = r(i, i).real();
      avg += d;
      hi = std::max(hi, d);
      lo = std::min(lo, d);
    }
    s.mean += avg / static_cast<double>(cov.num_rb());
    s.max = std::max(s.max, hi);
    s.min = std::min(s.min, lo);
  }
  s.mean /= static_cast<double>(n);
  return s;
}

inline FeatureVector extract_features(const CovarianceSet& cov, const McsEntry& mcs) {
  const DiagonalStats s = diagonal_stats(cov);
  if (!(s.mean > 0.0)) throw Error(Errc::non_positive_power, "mean diagonal power is not positive");
  FeatureVector f;
  f.g1 = linear_to_db(s.mean);
  const double floor_db = f.g1 - kFeatureFloorDb;
  f.g2 = std::max(linear_to_db(s.max), floor_db);
  f.g3 = s.min > 0.0 ? std::max(linear_to_db(s.min), floor_db) : floor_db;
  f.g4 = static_cast<double>(mcs.modulation_order);
  f.g5 = mcs.code_rate;
  return f;
}

using CrcTriple = std::array<int, kNumClasses>;

/// Cheapest option whose CRC passed; nullopt when all three failed.
inline std::optional<IwOption> generate_label(const CrcTriple& crc) {
  for (std::size_t n = 0; n < kNumClasses; ++n)
    if (crc[n] == 1) return static_cast<IwOption>(n + 1);
  return std::nullopt;
}

struct ScenarioMeta {
  std::string channel;
  Occupancy occupancy = Occupancy::none;
  double snr_db = 0.0;
  double sir_db = kNoInterference;
  int mcs = 0;

  friend bool operator==(const ScenarioMeta&, const ScenarioMeta&) = default;
};

struct LabeledSample {
  FeatureVector features;
  IwOption label = IwOption::iwnrb;
  CrcTriple crc{};
  ScenarioMeta meta;

  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

struct MlpModel {
  static constexpr std::size_t kHidden = 16;
  static constexpr std::size_t kW1 = kHidden * kNumFeatures;
  static constexpr std::size_t kB1 = kHidden;
  static constexpr std::size_t kW2 = kNumClasses * kHidden;
  static constexpr std::size_t kB2 = kNumClasses;
  static constexpr std::size_t kParams = kW1 + kB1 + kW2 + kB2;

  std::array<double, kNumFeatures> mean{};
  std::array<double, kNumFeatures> stddev{1.0, 1.0, 1.0, 1.0, 1.0};
  // W1 (16×5 row-major), b1, W2 (3×16 row-major), b2
  std::vector<double> params = std::vector<double>(kParams, 0.0);

  double* w1() { return params.data(); }
  double* b1() { return params.data() + kW1; }
  double* w2() { return params.data() + kW1 + kB1; }
  double* b2() { return params.data() + kW1 + kB1 + kW2; }
  const double* w1() const { return params.data(); }
  const double* b1() const { return params.data() + kW1; }
  const double* w2() const { return params.data() + kW1 + kB1; }
  const double* b2() const { return params.data() + kW1 + kB1 + kW2; }

  friend bool operator==(const MlpModel&, const MlpModel&) = default;
};

using Probabilities = std::array<double, kNumClasses>;

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct ForwardPass {
  std::array<double, kNumFeatures> x;
  std::array<double, MlpModel::kHidden> h;
  Probabilities p;
};

inline ForwardPass forward_pass(const MlpModel& model, const FeatureVector& f) {
  ForwardPass fp;
  const auto raw = f.values();
  for (std::size_t i = 0; i < kNumFeatures; ++i) fp.x[i] = (raw[i] - model.mean[i]) / model.stddev[i];
  const double* w1 = model.w1();
  const double* b1 = model.b1();
  for (std::size_t j = 0; j < MlpModel::kHidden; ++j) {
    double a = b1[j];
    for (std::size_t i = 0; i < kNumFeatures; ++i) a += w1[j * kNumFeatures + i] * fp.x[i];
    fp.h[j] = sigmoid(a);
  }
  const double* w2 = model.w2();
  const double* b2 = model.b2();
  std::array<double, kNumClasses> z;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    double a = b2[k];
    for (std::size_t j = 0; j < MlpModel::kHidden; ++j) a += w2[k * MlpModel::kHidden + j] * fp.h[j];
    z[k] = a;
  }
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    fp.p[k] = std::exp(z[k] - zmax);
    sum += fp.p[k];
  }
  for (auto& v : fp.p) v /= sum;
  return fp;
}

}  // namespace detail

inline Probabilities forward(const MlpModel& model, const FeatureVector& f) {
  return detail::forward_pass(model, f).p;
}

/// Argmax; an exact tie goes to the lower (cheaper) option.
inline IwOption argmax_option(const Probabilities& p) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < kNumClasses; ++k)
    if (p[k] > p[best]) best = k;
  return static_cast<IwOption>(best + 1);
}

inline IwOption select_option(const MlpModel& model, const FeatureVector& f) { return argmax_option(forward(model, f)); }

inline IwOption select_option(const MlpModel& model, const CovarianceSet& cov, const McsEntry& mcs) {
  return select_option(model, extract_features(cov, mcs));
}

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Mean cross-entropy over the dataset and its gradient by backprop.
inline LossGrad loss_and_grad(const MlpModel& model, std::span<const LabeledSample> data) {
  if (data.empty()) throw Error(Errc::degenerate_dataset, "empty dataset");
  LossGrad out{0.0, std::vector<double>(MlpModel::kParams, 0.0)};
  double* gw1 = out.grad.data();
  double* gb1 = gw1 + MlpModel::kW1;
  double* gw2 = gb1 + MlpModel::kB1;
  double* gb2 = gw2 + MlpModel::kW2;
  const double* w2 = model.w2();
  constexpr double kTiny = 1e-300;
  for (const auto& s : data) {
    const auto fp = detail::forward_pass(model, s.features);
    const std::size_t z = static_cast<std::size_t>(s.label) - 1;
    out.loss -= std::log(std::max(fp.p[z], kTiny));
    std::array<double, kNumClasses> dz;
    for (std::size_t k = 0; k < kNumClasses; ++k) dz[k] = fp.p[k] - (k == z ? 1.0 : 0.0);
    std::array<double, MlpModel::kHidden> dh{};
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      gb2[k] += dz[k];
      for (std::size_t j = 0; j < MlpModel::kHidden; ++j) {
        gw2[k * MlpModel::kHidden + j] += dz[k] * fp.h[j];
        dh[j] += dz[k] * w2[k * MlpModel::kHidden + j];
      }
    }
    for (std::size_t j = 0; j < MlpModel::kHidden; ++j) {
      const double da = dh[j] * fp.h[j] * (1.0 - fp.h[j]);
      gb1[j] += da;
      for (std::size_t i = 0; i < kNumFeatures; ++i) gw1[j * kNumFeatures + i] += da * fp.x[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(data.size());
  out.loss *= inv;
  for (auto& g : out.grad) g *= inv;
  return out;
}

struct TrainConfig {
  std::size_t max_iterations = 500;
  double grad_tolerance = 1e-6;
  std::size_t history = 10;
  double armijo_c1 = 1e-4;
  double backtrack_factor = 0.5;
  std::size_t max_backtracks = 40;
  std::uint64_t seed = 1;
};

struct TrainResult {
  MlpModel model;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  bool line_search_failed = false;
  std::vector<double> loss_history;  // one entry per accepted step, starting with the initial loss
};

/// Feature means and population standard deviations; a zero spread maps to 1.
inline void fit_normalization(MlpModel& model, std::span<const LabeledSample> data) {
  std::array<double, kNumFeatures> sum{}, sq{};
  for (const auto& s : data) {
    const auto v = s.features.values();
    for (std::size_t i = 0; i < kNumFeatures; ++i) sum[i] += v[i];
  }
  const double n = static_cast<double>(data.size());
  for (std::size_t i = 0; i < kNumFeatures; ++i) model.mean[i] = sum[i] / n;
  for (const auto& s : data) {
    const auto v = s.features.values();
    for (std::size_t i = 0; i < kNumFeatures; ++i) sq[i] += (v[i] - model.mean[i]) * (v[i] - model.mean[i]);
  }
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    const double sd = std::sqrt(sq[i] / n);
    model.stddev[i] = sd > 1e-12 ? sd : 1.0;
  }
}

/// Uniform in [-0.5, 0.5] / sqrt(fan_in), biases included.
inline void initialize_weights(MlpModel& model, std::uint64_t seed) {
  Rng rng(seed);
  auto uniform = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5; };
  const double s1 = 1.0 / std::sqrt(static_cast<double>(kNumFeatures));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(MlpModel::kHidden));
  for (std::size_t i = 0; i < MlpModel::kW1 + MlpModel::kB1; ++i) model.params[i] = uniform() * s1;
  for (std::size_t i = MlpModel::kW1 + MlpModel::kB1; i < MlpModel::kParams; ++i) model.params[i] = uniform() * s2;
}

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

/// Full-batch L-BFGS with Armijo backtracking.
inline TrainResult train(std::span<const LabeledSample> data, const TrainConfig& cfg) {
  if (cfg.max_iterations < 1 || !(cfg.grad_tolerance > 0.0)) throw Error(Errc::config, "bad training config");
  std::array<bool, kNumClasses> seen{};
  for (const auto& s : data) seen[static_cast<std::size_t>(s.label) - 1] = true;
  if (!seen[0] || !seen[1] || !seen[2])
    throw Error(Errc::degenerate_dataset, "training data must contain all three labels");

  TrainResult res;
  MlpModel& model = res.model;
  fit_normalization(model, data);
  initialize_weights(model, cfg.seed);

  LossGrad cur = loss_and_grad(model, data);
  res.initial_loss = cur.loss;
  res.loss_history.push_back(cur.loss);

  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> mem;
  const std::size_t dim = MlpModel::kParams;

  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    if (std::sqrt(detail::dot(cur.grad, cur.grad)) <= cfg.grad_tolerance) {
      res.converged = true;
      break;
    }
    // two-loop recursion
    std::vector<double> q = cur.grad;
    std::vector<double> alpha(mem.size());
    for (std::size_t k = mem.size(); k-- > 0;) {
      alpha[k] = mem[k].rho * detail::dot(mem[k].s, q);
      for (std::size_t i = 0; i < dim; ++i) q[i] -= alpha[k] * mem[k].y[i];
    }
    if (!mem.empty()) {
      const double gamma = detail::dot(mem.back().s, mem.back().y) / detail::dot(mem.back().y, mem.back().y);
      for (auto& v : q) v *= gamma;
    }
    for (std::size_t k = 0; k < mem.size(); ++k) {
      const double beta = mem[k].rho * detail::dot(mem[k].y, q);
      for (std::size_t i = 0; i < dim; ++i) q[i] += (alpha[k] - beta) * mem[k].s[i];
    }
    std::vector<double> dir(dim);
    for (std::size_t i = 0; i < dim; ++i) dir[i] = -q[i];
    double slope = detail::dot(cur.grad, dir);
    if (!(slope < 0.0)) {
      mem.clear();
      for (std::size_t i = 0; i < dim; ++i) dir[i] = -cur.grad[i];
      slope = detail::dot(cur.grad, dir);
    }

    double step = 1.0;
    if (mem.empty()) step = std::min(1.0, 1.0 / std::sqrt(detail::dot(cur.grad, cur.grad)));
    MlpModel trial = model;
    LossGrad next;
    bool accepted = false;
    for (std::size_t bt = 0; bt <= cfg.max_backtracks; ++bt) {
      for (std::size_t i = 0; i < dim; ++i) trial.params[i] = model.params[i] + step * dir[i];
      next = loss_and_grad(trial, data);
      if (std::isfinite(next.loss) && next.loss <= cur.loss + cfg.armijo_c1 * step * slope) {
        accepted = true;
        break;
      }
      step *= cfg.backtrack_factor;
    }
    if (!accepted) {
      res.line_search_failed = true;
      break;
    }

    Pair p{std::vector<double>(dim), std::vector<double>(dim), 0.0};
    for (std::size_t i = 0; i < dim; ++i) {
      p.s[i] = trial.params[i] - model.params[i];
      p.y[i] = next.grad[i] - cur.grad[i];
    }
    const double sy = detail::dot(p.s, p.y);
    if (sy > 1e-12) {
      p.rho = 1.0 / sy;
      mem.push_back(std::move(p));
      if (mem.size() > cfg.history) mem.pop_front();
    }
    model.params = trial.params;
    cur = std::move(next);
    res.loss_history.push_back(cur.loss);
    res.iterations = it + 1;
  }
  res.final_loss = cur.loss;
  return res;
}

// ---------------------------------------------------------------------------
// Model file: a header line, then labelled rows of decimal numbers with 17
// significant digits.

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_row(std::ostream& os, const char* tag, const double* v, std::size_t n) {
  os << tag;
  for (std::size_t i = 0; i < n; ++i) os << ' ' << format_double(v[i]);
  os << '\n';
}

inline std::vector<double> read_row(std::istream& is, const std::string& tag, std::size_t n) {
  std::string line;
  if (!std::getline(is, line)) throw Error(Errc::io, "model file truncated before '" + tag + "'");
  std::istringstream in(line);
  std::string got;
  in >> got;
  if (got != tag) throw Error(Errc::io, "model file: expected '" + tag + "', found '" + got + "'");
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw Error(Errc::io, "model file: bad number '" + tok + "'");
    out.push_back(v);
  }
  if (out.size() != n)
    throw Error(Errc::io, "model file: '" + tag + "' has " + std::to_string(out.size()) + " values, expected " +
                              std::to_string(n));
  return out;
}

}  // namespace detail

inline constexpr const char* kModelHeader = "iwsel-mlp layers=5,16,3 hidden=sigmoid output=softmax";

inline void save_model(std::ostream& os, const MlpModel& m) {
  os << kModelHeader << '\n';
  detail::write_row(os, "mean", m.mean.data(), kNumFeatures);
  detail::write_row(os, "std", m.stddev.data(), kNumFeatures);
  for (std::size_t j = 0; j < MlpModel::kHidden; ++j) detail::write_row(os, "w1", m.w1() + j * kNumFeatures, kNumFeatures);
  detail::write_row(os, "b1", m.b1(), MlpModel::kB1);
  for (std::size_t k = 0; k < kNumClasses; ++k)
    detail::write_row(os, "w2", m.w2() + k * MlpModel::kHidden, MlpModel::kHidden);
  detail::write_row(os, "b2", m.b2(), MlpModel::kB2);
}

inline MlpModel load_model(std::istream& is) {
  std::string header;
  if (!std::getline(is, header) || header != kModelHeader)
    throw Error(Errc::io, "model file: unsupported header '" + header + "'");
  MlpModel m;
  auto mean = detail::read_row(is, "mean", kNumFeatures);
  auto sd = detail::read_row(is, "std", kNumFeatures);
  std::copy(mean.begin(), mean.end(), m.mean.begin());
  std::copy(sd.begin(), sd.end(), m.stddev.begin());
  for (double s : m.stddev)
    if (!(s > 0.0)) throw Error(Errc::io, "model file: normalization std must be positive");
  for (std::size_t j = 0; j < MlpModel::kHidden; ++j) {
    auto row = detail::read_row(is, "w1", kNumFeatures);
    std::copy(row.begin(), row.end(), m.w1() + j * kNumFeatures);
  }
  auto b1 = detail::read_row(is, "b1", MlpModel::kB1);
  std::copy(b1.begin(), b1.end(), m.b1());
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    auto row = detail::read_row(is, "w2", MlpModel::kHidden);
    std::copy(row.begin(), row.end(), m.w2() + k * MlpModel::kHidden);
  }
  auto b2 = detail::read_row(is, "b2", MlpModel::kB2);
  std::copy(b2.begin(), b2.end(), m.b2());
  return m;
}

}  // namespace iwsel
