// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: simulate, gen-dataset, train, evaluate, report.
// Exit codes: 0 ok, 1 runtime failure, 2 bad configuration, 3 I/O error,
// 4 degenerate dataset.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "iwsel/iwsel.hpp"

namespace {

using namespace iwsel;

enum Exit : int { kOk = 0, kRuntime = 1, kConfig = 2, kIo = 3, kDegenerate = 4 };

struct CommonOptions {
  std::uint64_t seed = 1;
  std::size_t slots = 200;
  std::size_t rb = 20;
  std::string mimo = "2x2";
  int interferer_streams = -1;
  std::string channels = "EPA-5";
  std::string occupancies = "1";
  std::string sirs = "10";
  std::string snr = "0:1:10";
  std::string mcs = "5";
  bool genie = false;
  bool raw_residuals = false;
  unsigned threads = 1;
  std::string profiles_file;
  std::string mcs_file;
  std::string out;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--seed", o.seed, "Master seed");
  app->add_option("--slots", o.slots, "Slots per SNR point");
  app->add_option("--rb", o.rb, "Resource blocks B");
  app->add_option("--mimo", o.mimo, "Receive antennas x layers, e.g. 4x2");
  app->add_option("--interferer-streams", o.interferer_streams, "Interferer streams M' (default: layers)");
  app->add_option("--channel", o.channels, "Comma-separated tap profile names");
  app->add_option("--occupancy", o.occupancies, "Comma-separated occupancy patterns (1|2|3|none)");
  app->add_option("--sir", o.sirs, "Comma-separated SIR values in dB, or inf");
  app->add_option("--snr", o.snr, "SNR range start:step:stop in dB");
  app->add_option("--mcs", o.mcs, "Comma-separated MCS indices");
  app->add_flag("--genie-channel", o.genie, "Use the true channel for estimation and residuals");
  app->add_flag("--raw-residuals", o.raw_residuals, "Form residuals from per-RE estimates");
  app->add_option("--threads", o.threads, "Worker threads");
  app->add_option("--profiles", o.profiles_file, "Extra tap profiles file");
  app->add_option("--mcs-table", o.mcs_file, "MCS table file");
  app->add_option("--out", o.out, "Output path");
}

std::vector<std::string> split(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, sep);)
    if (!config::trim(item).empty()) out.push_back(config::trim(item));
  if (out.empty()) throw Error(Errc::config, "empty list '" + s + "'");
  return out;
}

double parse_number(const std::string& s) {
  if (s == "inf" || s == "+inf") return kNoInterference;
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size()) throw Error(Errc::config, "bad number '" + s + "'");
  return v;
}

std::vector<double> parse_snr(const std::string& s) {
  const auto parts = split(s, ':');
  if (parts.size() == 1) return {parse_number(parts[0])};
  if (parts.size() != 3) throw Error(Errc::config, "SNR range must be start:step:stop");
  return snr_range(parse_number(parts[0]), parse_number(parts[1]), parse_number(parts[2]));
}

std::pair<std::size_t, std::size_t> parse_mimo(const std::string& s) {
  const auto x = s.find_first_of("xX");
  if (x == std::string::npos) throw Error(Errc::config, "--mimo must look like NxM");
  try {
    return {std::stoul(s.substr(0, x)), std::stoul(s.substr(x + 1))};
  } catch (const std::exception&) {
    throw Error(Errc::config, "--mimo must look like NxM");
  }
}

struct Setup {
  SimulatorConfig sim;
  SweepConfig sweep;
};

Setup make_setup(const CommonOptions& o) {
  Setup s;
  const auto [n, m] = parse_mimo(o.mimo);
  s.sim.slot.num_rx = n;
  s.sim.slot.num_layers = m;
  s.sim.slot.num_rb = o.rb;
  if (o.rb < 1) throw Error(Errc::config, "--rb must be >= 1");
  s.sim.interferer_streams = o.interferer_streams < 0 ? m : static_cast<std::size_t>(o.interferer_streams);
  s.sim.estimator = o.genie ? EstimatorMode::genie : EstimatorMode::least_squares;
  s.sim.residuals = o.raw_residuals ? ResidualSource::raw : ResidualSource::smoothed;
  s.sim.seed = o.seed;
  s.sim.threads = std::max(1u, o.threads);
  if (!o.mcs_file.empty()) s.sim.mcs_table = load_mcs_table(config::parse_file(o.mcs_file));

  std::vector<TapProfile> extra;
  if (!o.profiles_file.empty()) extra = load_tap_profiles(config::parse_file(o.profiles_file));
  s.sweep.channels.clear();
  for (const auto& c : split(o.channels)) s.sweep.channels.push_back(find_profile(c, extra));
  s.sweep.occupancies.clear();
  for (const auto& c : split(o.occupancies)) s.sweep.occupancies.push_back(parse_occupancy(c));
  s.sweep.sirs.clear();
  for (const auto& c : split(o.sirs)) s.sweep.sirs.push_back(parse_number(c));
  s.sweep.mcs.clear();
  for (const auto& c : split(o.mcs)) {
    const double v = parse_number(c);
    if (v != std::floor(v)) throw Error(Errc::config, "MCS index must be an integer");
    s.sweep.mcs.push_back(static_cast<int>(v));
    find_mcs(static_cast<int>(v), s.sim.mcs_table);
  }
  s.sweep.snrs = parse_snr(o.snr);
  s.sweep.slots = o.slots;
  s.sweep.validate();
  return s;
}

template <typename Fn>
void with_output(const std::string& path, Fn&& fn) {
  if (path.empty() || path == "-") {
    fn(std::cout);
    return;
  }
  std::ofstream os(path);
  if (!os) throw Error(Errc::io, "cannot open '" + path + "' for writing");
  fn(os);
  if (!os) throw Error(Errc::io, "write to '" + path + "' failed");
}

std::ifstream open_input(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(Errc::io, "cannot open '" + path + "'");
  return is;
}

MlpModel read_model_file(const std::string& path) {
  auto is = open_input(path);
  return load_model(is);
}

int run_simulate(const CommonOptions& o, const std::string& method, const std::string& model_path) {
  Setup s = make_setup(o);
  s.sweep.mode = SweepMode::eval_options;
  SlotSimulator sim(s.sim);
  std::optional<MlpModel> model;
  std::vector<Method> methods;
  if (!model_path.empty()) {
    model = read_model_file(model_path);
    methods.push_back(Method::selector(*model));
  } else {
    methods.push_back(Method::fixed(parse_iw_option(method)));
  }
  const SweepResult r = run_bler_sweep(sim, s.sweep.plans(), s.sweep.slots, methods);
  with_output(o.out, [&](std::ostream& os) { write_bler_csv(os, r.curves); });
  return kOk;
}

int run_gen_dataset(const CommonOptions& o) {
  Setup s = make_setup(o);
  SlotSimulator sim(s.sim);
  const LabelGenResult r = run_label_generation(sim, s.sweep.plans(), s.sweep.slots);
  with_output(o.out, [&](std::ostream& os) { write_dataset(os, r.samples); });
  std::fprintf(stderr, "slots %zu emitted %zu rejected %zu labels %zu/%zu/%zu\n", r.total, r.samples.size(),
               r.rejected, r.label_counts[0], r.label_counts[1], r.label_counts[2]);
  if (r.samples.empty()) {
    std::fprintf(stderr, "error: every slot was rejected\n");
    return kDegenerate;
  }
  return kOk;
}

int run_train(const std::vector<std::string>& data_paths, const std::string& out, const TrainConfig& cfg) {
  std::vector<LabeledSample> data;
  for (const auto& p : data_paths) {
    auto is = open_input(p);
    auto rows = read_dataset(is);
    data.insert(data.end(), rows.begin(), rows.end());
  }
  const TrainResult r = train(data, cfg);
  with_output(out, [&](std::ostream& os) { save_model(os, r.model); });
  std::fprintf(stderr, "samples %zu iterations %zu loss %.6f -> %.6f%s\n", data.size(), r.iterations, r.initial_loss,
               r.final_loss, r.converged ? " (converged)" : "");
  return kOk;
}

int run_evaluate(const CommonOptions& o, const std::string& model_path) {
  Setup s = make_setup(o);
  s.sweep.mode = SweepMode::eval_selector;
  SlotSimulator sim(s.sim);
  const MlpModel model = read_model_file(model_path);
  const std::vector<Method> methods = {Method::fixed(IwOption::iwnrb), Method::fixed(IwOption::iwnbw),
                                       Method::fixed(IwOption::iwrb), Method::selector(model)};
  const SweepResult r = run_bler_sweep(sim, s.sweep.plans(), s.sweep.slots, methods);
  const std::string prefix = o.out.empty() ? "iwsel_eval" : o.out;
  with_output(prefix + "_bler.csv", [&](std::ostream& os) { write_bler_csv(os, r.curves); });
  with_output(prefix + "_gap.csv", [&](std::ostream& os) { write_gap_csv(os, compute_snr_gap(r.curves)); });
  with_output(prefix + "_util.csv", [&](std::ostream& os) { write_utilization_csv(os, r.utilization); });
  return kOk;
}

int run_report(const std::vector<std::string>& inputs, const std::string& out) {
  std::vector<BlerCurve> curves;
  for (const auto& p : inputs) {
    auto is = open_input(p);
    auto c = read_bler_csv(is);
    curves.insert(curves.end(), c.begin(), c.end());
  }
  for (auto& c : curves) {
    const auto o = [&]() -> std::optional<IwOption> {
      try {
        return parse_iw_option(c.method);
      } catch (const Error&) {
        return std::nullopt;
      }
    }();
    c.complexity_class = o ? complexity_class(*o) : "mixed";
  }
  const auto rows = compute_snr_gap(curves);
  with_output(out, [&](std::ostream& os) { write_gap_csv(os, rows); });
  std::fprintf(stderr, "%-40s %-10s %12s %10s\n", "scenario", "method", "snr@10%", "gap");
  for (const auto& r : rows)
    std::fprintf(stderr, "%-40s %-10s %12s %10s\n", r.scenario_id.c_str(), r.method.c_str(),
                 format_db(r.snr_at_10pct_db).c_str(), format_db(r.gap_db).c_str());
  return kOk;
}

int exit_code(Errc e) {
  switch (e) {
    case Errc::io: return kIo;
    case Errc::degenerate_dataset: return kDegenerate;
    case Errc::config:
    case Errc::payload_too_large:
    case Errc::non_positive_power: return kConfig;
    default: return kRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interference-whitening link simulator and option selector"};
  app.require_subcommand(1);

  CommonOptions sim_o, gen_o, eval_o;
  std::string method = "IWRB", sim_model, eval_model, train_out, report_out;
  std::vector<std::string> train_data, report_inputs;
  TrainConfig tcfg;

  auto* sim = app.add_subcommand("simulate", "BLER of one method over a scenario grid");
  add_common(sim, sim_o);
  sim->add_option("--method", method, "IWNRB, IWNBW or IWRB");
  sim->add_option("--model", sim_model, "Use a trained selector instead of a fixed option");

  auto* gen = app.add_subcommand("gen-dataset", "Label generation to dataset CSV");
  add_common(gen, gen_o);

  auto* tr = app.add_subcommand("train", "Fit the selector on dataset CSV files");
  tr->add_option("--data", train_data, "Dataset CSV files")->required();
  tr->add_option("--out", train_out, "Model file")->required();
  tr->add_option("--seed", tcfg.seed, "Weight initialization seed");
  tr->add_option("--max-iter", tcfg.max_iterations, "L-BFGS iteration cap");

  auto* ev = app.add_subcommand("evaluate", "BLER of all options and the selector, gaps and utilization");
  add_common(ev, eval_o);
  ev->add_option("--model", eval_model, "Model file")->required();

  auto* rep = app.add_subcommand("report", "Merge BLER CSVs into an SNR-gap table");
  rep->add_option("inputs", report_inputs, "BLER CSV files")->required();
  rep->add_option("--out", report_out, "Gap CSV output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*sim) return run_simulate(sim_o, method, sim_model);
    if (*gen) return run_gen_dataset(gen_o);
    if (*tr) return run_train(train_data, train_out, tcfg);
    if (*ev) return run_evaluate(eval_o, eval_model);
    if (*rep) return run_report(report_inputs, report_out);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
  return kRuntime;
}
