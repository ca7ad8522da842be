// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <sstream>

#include "iwsel/harness.hpp"

namespace iwsel {
namespace {

SimulatorConfig small_config(std::size_t rb = 4, unsigned threads = 1) {
  SimulatorConfig c;
  c.slot.num_rb = rb;
  c.slot.num_rx = 2;
  c.slot.num_layers = 2;
  c.interferer_streams = 2;
  c.seed = 5;
  c.threads = threads;
  return c;
}

BlerCurve curve(const std::string& id, const std::string& method,
                const std::vector<std::pair<double, double>>& pts, std::uint64_t blocks = 1000) {
  BlerCurve c{id, method, "O(N)", {}};
  for (auto [snr, bler] : pts)
    c.points.push_back({snr, blocks, static_cast<std::uint64_t>(std::llround(bler * static_cast<double>(blocks)))});
  return c;
}

TEST(SnrRange, InclusiveGrid) {
  EXPECT_EQ(snr_range(0, 2, 6), (std::vector<double>{0, 2, 4, 6}));
  EXPECT_EQ(snr_range(-1, 0.5, 0).size(), 3u);
  EXPECT_THROW(snr_range(0, 0, 1), Error);
  EXPECT_THROW(snr_range(2, 1, 1), Error);
}

TEST(SweepConfig, PlansCoverTheGrid) {
  SweepConfig c;
  c.channels = {profiles::epa5(), profiles::eva30()};
  c.occupancies = {Occupancy::occ1, Occupancy::occ3};
  c.sirs = {0, 50};
  c.mcs = {5, 15};
  c.snrs = {1, 2, 3};
  const auto plans = c.plans();
  EXPECT_EQ(plans.size(), 16u);
  EXPECT_EQ(plans.front().point.id(), "EPA-5_occ1_sir0_mcs5");
  c.slots = 0;
  EXPECT_THROW(c.validate(), Error);
  c.slots = 1;
  c.sirs.clear();
  EXPECT_THROW(c.plans(), Error);
}

TEST(ScenarioPoint, IdUsesInfSentinel) {
  ScenarioPoint p;
  EXPECT_EQ(p.id(), "EPA-5_occnone_sirinf_mcs5");
}

TEST(LabelGeneration, ConservationAndCounts) {
  const SlotSimulator sim(small_config());
  SweepConfig c;
  c.occupancies = {Occupancy::occ1, Occupancy::occ3};
  c.sirs = {0.0};
  c.snrs = {-2.0, 6.0, 14.0};
  const LabelGenResult r = run_label_generation(sim, c.plans(), 20);
  EXPECT_EQ(r.total, 2u * 3u * 20u);
  EXPECT_EQ(r.samples.size() + r.rejected, r.total);
  EXPECT_EQ(r.label_counts[0] + r.label_counts[1] + r.label_counts[2], r.samples.size());
  for (const auto& s : r.samples) EXPECT_EQ(generate_label(s.crc), s.label);
}

TEST(LabelGeneration, CleanHighSnrGivesLabelOne) {
  const SlotSimulator sim(small_config());
  const std::vector<PointPlan> plans = {{ScenarioPoint{profiles::epa5(), Occupancy::none, kNoInterference, 5}, {60.0}}};
  const LabelGenResult r = run_label_generation(sim, plans, 30);
  EXPECT_EQ(r.rejected, 0u);
  ASSERT_EQ(r.samples.size(), 30u);
  for (const auto& s : r.samples) {
    EXPECT_EQ(s.label, IwOption::iwnrb);
    EXPECT_EQ(s.crc, (CrcTriple{1, 1, 1}));
  }
}

TEST(LabelGeneration, HopelessSnrIsRejected) {
  const SlotSimulator sim(small_config());
  const std::vector<PointPlan> plans = {{ScenarioPoint{profiles::epa5(), Occupancy::none, kNoInterference, 27}, {-10.0}}};
  const LabelGenResult r = run_label_generation(sim, plans, 200);
  EXPECT_GE(r.rejected, 198u);
}

TEST(LabelGeneration, OptionCurvesMatchDirectSweep) {
  const SlotSimulator sim(small_config());
  SweepConfig c;
  c.occupancies = {Occupancy::occ1};
  c.sirs = {0.0, 30.0};
  c.snrs = {0.0, 6.0, 12.0};
  const auto plans = c.plans();
  const auto from_labels = option_curves_from_labels(plans, 15, run_label_generation(sim, plans, 15));
  const auto direct = run_bler_sweep(
      sim, plans, 15,
      {Method::fixed(IwOption::iwnrb), Method::fixed(IwOption::iwnbw), Method::fixed(IwOption::iwrb)});
  std::ostringstream a, b;
  write_bler_csv(a, from_labels);
  write_bler_csv(b, direct.curves);
  EXPECT_EQ(a.str(), b.str());
}

TEST(BlerSweep, DeterministicAndThreadInvariant) {
  const std::vector<PointPlan> plans = {{ScenarioPoint{profiles::epa5(), Occupancy::occ1, 10.0, 5}, {4.0, 10.0}}};
  const std::vector<Method> methods = {Method::fixed(IwOption::iwnrb), Method::fixed(IwOption::iwrb)};
  const SweepResult a = run_bler_sweep(SlotSimulator(small_config(4, 1)), plans, 25, methods);
  const SweepResult b = run_bler_sweep(SlotSimulator(small_config(4, 1)), plans, 25, methods);
  const SweepResult c = run_bler_sweep(SlotSimulator(small_config(4, 3)), plans, 25, methods);
  std::ostringstream sa, sb, sc;
  write_bler_csv(sa, a.curves);
  write_bler_csv(sb, b.curves);
  write_bler_csv(sc, c.curves);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(sa.str(), sc.str());
  EXPECT_EQ(a.triples, c.triples);
}

TEST(BlerSweep, MethodsSharePerSlotOutcomes) {
  // A fixed option and a selector that always picks it see identical CRCs.
  MlpModel always_iwrb;
  always_iwrb.b2()[2] = 5.0;
  const SlotSimulator sim(small_config());
  const std::vector<PointPlan> plans = {{ScenarioPoint{profiles::epa5(), Occupancy::occ3, 0.0, 5}, {2.0, 8.0}}};
  const SweepResult r =
      run_bler_sweep(sim, plans, 20, {Method::fixed(IwOption::iwrb), Method::selector(always_iwrb)});
  ASSERT_EQ(r.curves.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(r.curves[0].points[i].block_errors, r.curves[1].points[i].block_errors);
  EXPECT_EQ(r.curves[1].complexity_class, "O(N^3)");
  ASSERT_EQ(r.utilization.size(), 1u);
  EXPECT_EQ(r.utilization[0].fractions(0), (std::array<double, 3>{0.0, 0.0, 1.0}));
  for (const auto& t : r.triples) {
    EXPECT_EQ(t[0], -1);
    EXPECT_EQ(t[1], -1);
  }
}

TEST(BlerSweep, SnrPointsShareRealizations) {
  const SlotSimulator sim(small_config());
  const ScenarioPoint p{profiles::epa5(), Occupancy::occ1, 10.0, 5};
  const SlotRealization a = sim.realize(p, 0.0, 3);
  const SlotRealization b = sim.realize(p, 20.0, 3);
  EXPECT_EQ(a.tx.payload, b.tx.payload);
  const double scale = std::sqrt(db_to_linear(20.0));
  EXPECT_NEAR(std::abs(b.channel.serving.data()[0] - a.channel.serving.data()[0] * scale), 0.0, 1e-9);
  EXPECT_NE(sim.realize(p, 0.0, 4).tx.payload, a.tx.payload);
}

TEST(SnrAtBler, LogLinearInterpolation) {
  const auto c = curve("s", "m", {{18, 0.6}, {20, 0.2}, {22, 0.05}, {24, 0.01}});
  ASSERT_TRUE(snr_at_bler(c).has_value());
  EXPECT_NEAR(*snr_at_bler(c), 21.0, 1e-9);
}

TEST(SnrAtBler, EdgeCases) {
  EXPECT_FALSE(snr_at_bler(curve("s", "m", {{0, 0.9}, {10, 0.5}})).has_value());
  EXPECT_EQ(*snr_at_bler(curve("s", "m", {{0, 0.05}, {10, 0.0}})), 0.0);
  // dip below target then rise again: the later settling point counts
  EXPECT_NEAR(*snr_at_bler(curve("s", "m", {{0, 0.2}, {2, 0.05}, {4, 0.2}, {6, 0.05}})), 5.0, 1e-9);
  // zero errors floored at half an error per block
  const double x = *snr_at_bler(curve("s", "m", {{0, 0.2}, {2, 0.0}}, 100));
  EXPECT_NEAR(x, 2.0 * std::log10(2.0) / std::log10(0.2 / 0.005), 1e-9);
}

TEST(SnrGap, BestAndInfiniteSentinel) {
  // crossings at 24.02 and 24.67
  const std::vector<BlerCurve> cs = {curve("s", "best", {{23.02, 0.2}, {25.02, 0.05}}),
                                     curve("s", "other", {{23.67, 0.2}, {25.67, 0.05}}),
                                     curve("s", "never", {{23.0, 0.5}, {26.0, 0.4}}),
                                     curve("t", "alone", {{0.0, 0.2}, {2.0, 0.05}})};
  const auto rows = compute_snr_gap(cs);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_NEAR(rows[0].gap_db, 0.0, 1e-12);
  EXPECT_NEAR(rows[1].gap_db, 0.65, 1e-9);
  EXPECT_TRUE(std::isinf(rows[2].gap_db));
  EXPECT_TRUE(std::isinf(rows[2].snr_at_10pct_db));
  EXPECT_EQ(rows[3].gap_db, 0.0);
  std::ostringstream out;
  write_gap_csv(out, rows);
  EXPECT_NE(out.str().find("s,never,inf,inf,O(N)"), std::string::npos);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), kGapHeader);
}

TEST(Utilization, FractionsSumToOne) {
  const auto t = report_utilization(
      "s", {0.0, 1.0},
      {{IwOption::iwnbw, IwOption::iwnbw}, {IwOption::iwnrb, IwOption::iwrb, IwOption::iwrb, IwOption::iwnbw}});
  EXPECT_EQ(t.fractions(0), (std::array<double, 3>{0.0, 1.0, 0.0}));
  const auto f = t.fractions(1);
  EXPECT_DOUBLE_EQ(f[0] + f[1] + f[2], 1.0);
  EXPECT_DOUBLE_EQ(f[2], 0.5);
  std::ostringstream out;
  write_utilization_csv(out, {t});
  EXPECT_EQ(out.str(), std::string(kUtilizationHeader) + "\ns,0,2,0,1,0\ns,1,4,0.25,0.25,0.5\n");
}

TEST(DatasetCsv, RoundTripIsByteIdentical) {
  const SlotSimulator sim(small_config());
  SweepConfig c;
  c.occupancies = {Occupancy::occ1, Occupancy::occ2};
  c.sirs = {0.0, kNoInterference};
  c.snrs = {4.0, 12.0};
  const LabelGenResult r = run_label_generation(sim, c.plans(), 10);
  ASSERT_FALSE(r.samples.empty());
  std::ostringstream first;
  write_dataset(first, r.samples);
  std::istringstream in(first.str());
  const auto back = read_dataset(in);
  EXPECT_EQ(back, r.samples);
  std::ostringstream second;
  write_dataset(second, back);
  EXPECT_EQ(first.str(), second.str());
  EXPECT_NE(first.str().find(",inf,"), std::string::npos);
}

TEST(DatasetCsv, RejectsMalformedRows) {
  const std::string head = std::string(kDatasetHeader) + "\n";
  auto load = [](const std::string& s) {
    std::istringstream in(s);
    return read_dataset(in);
  };
  EXPECT_EQ(load(head + "EPA-5,1,3,inf,5,1,2,0,2,0.44,1,1,1,1\n").size(), 1u);
  EXPECT_THROW(load("wrong\n"), Error);
  EXPECT_THROW(load(head + "EPA-5,1,3,inf,5,1,2,0,2,0.44,1,1,1\n"), Error);
  EXPECT_THROW(load(head + "EPA-5,1,3,inf,5,1,2,0,2,0.44,4,1,1,1\n"), Error);
  EXPECT_THROW(load(head + "EPA-5,1,3,inf,5,1,2,0,2,0.44,2,1,1,1\n"), Error);
  EXPECT_THROW(load(head + "EPA-5,1,3,inf,5,x,2,0,2,0.44,1,1,1,1\n"), Error);
  EXPECT_THROW(load(head + "EPA-5,1,3,inf,5,1,2,0,2,0.44,1,1,2,1\n"), Error);
}

TEST(BlerCsv, RoundTripIsByteIdentical) {
  const std::vector<BlerCurve> cs = {curve("a", "IWNRB", {{0, 0.5}, {1.5, 0.125}}, 8),
                                     curve("a", "IWRB", {{0, 0.25}, {1.5, 0.0}}, 8)};
  std::ostringstream first;
  write_bler_csv(first, cs);
  std::istringstream in(first.str());
  const auto back = read_bler_csv(in);
  ASSERT_EQ(back.size(), 2u);
  std::ostringstream second;
  write_bler_csv(second, back);
  EXPECT_EQ(first.str(), second.str());
  EXPECT_EQ(first.str().substr(0, first.str().find('\n')), kBlerHeader);
}

TEST(ParallelFor, PropagatesExceptions) {
  std::vector<int> hit(100, 0);
  parallel_for(100, 4, [&](std::size_t i) { hit[i] = 1; });
  EXPECT_EQ(std::count(hit.begin(), hit.end(), 1), 100);
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i) {
                              if (i == 7) throw Error(Errc::config, "boom");
                            }),
               Error);
}

}  // namespace
}  // namespace iwsel
