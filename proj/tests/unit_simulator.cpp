#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "fcsa/simulator.hpp"
#include "test_util.hpp"

using namespace fcsa;
using fcsa_test::matrix_instance;

namespace {

double total_cost(const std::vector<DriverOutcome>& out) {
  double s = 0.0;
  for (const auto& d : out) s += d.cost;
  return s;
}

}  // namespace

TEST(Uncoordinated, StaleStatusLetsLaterDriverWin) {
  // One station; driver 0 needs 5 min, driver 1 needs 2 min and asks 1.5 min later.
  const auto inst = matrix_instance(2, {0, 1}, {{5}, {2}});
  const std::vector<int> order{0, 1};
  const auto seq = make_sequence(inst, order, 1.5);
  const auto out = simulate_uncoordinated(inst, seq, Uncoordinated::kGreed, 3.0);
  EXPECT_EQ(out[0].station, 0);
  EXPECT_EQ(out[1].station, 0);
  EXPECT_FALSE(out[0].success);
  EXPECT_TRUE(out[1].success);
  EXPECT_DOUBLE_EQ(out[0].cost, 125.0);
  EXPECT_DOUBLE_EQ(out[1].cost, 2.0);
}

TEST(Uncoordinated, FreshStatusIsRespected) {
  const auto inst = matrix_instance(2, {0, 1}, {{5}, {2}});
  const std::vector<int> order{0, 1};
  // Driver 0 arrives at 5 and the status is current from then on.
  const auto seq = make_sequence(inst, order, 10.0);
  const auto out = simulate_uncoordinated(inst, seq, Uncoordinated::kGreed, 0.0);
  EXPECT_EQ(out[1].station, kNoStation);
  EXPECT_DOUBLE_EQ(total_cost(out), 125.0);
  // Latency 6: status flips at 11, still free at 10.
  const auto late = simulate_uncoordinated(inst, seq, Uncoordinated::kGreed, 6.0);
  EXPECT_EQ(late[1].station, 0);
  EXPECT_TRUE(late[0].success);
  EXPECT_DOUBLE_EQ(total_cost(late), 5.0 + 2.0 + 120.0);
}

TEST(Uncoordinated, SelfKnowsItsOwnAssignments) {
  // Same platform: SELF keeps driver 1 off the station driver 0 already holds,
  // GREED sends it there and driver 1 arrives first.
  const auto inst = matrix_instance(1, {0, 0}, {{5}, {2}});
  const std::vector<int> order{0, 1};
  const auto seq = make_sequence(inst, order, 1.5);
  const auto self = simulate_uncoordinated(inst, seq, Uncoordinated::kSelf, 3.0);
  EXPECT_EQ(self[0].station, 0);
  EXPECT_EQ(self[1].station, kNoStation);
  EXPECT_DOUBLE_EQ(total_cost(self), 125.0);
  const auto greed = simulate_uncoordinated(inst, seq, Uncoordinated::kGreed, 3.0);
  EXPECT_FALSE(greed[0].success);
  EXPECT_DOUBLE_EQ(total_cost(greed), 127.0);
}

TEST(Uncoordinated, SelfIgnoresOtherPlatformsUntilVisible) {
  // Two stations. Driver 1 takes the cheapest station it believes free.
  const auto own = matrix_instance(1, {0, 0}, {{1, 4}, {1, 9}});
  const auto rival = matrix_instance(2, {0, 1}, {{1, 4}, {1, 9}});
  const std::vector<int> order{0, 1};
  const auto seq = make_sequence(own, order, 0.5);
  const auto a = simulate_uncoordinated(own, seq, Uncoordinated::kSelf, 100.0);
  EXPECT_EQ(a[1].station, 1);
  EXPECT_DOUBLE_EQ(total_cost(a), 1.0 + 9.0);
  // Across platforms the latency hides station 0: driver 1 arrives at 1.5 after
  // driver 0 (at 1) and pays the penalty.
  const auto b = simulate_uncoordinated(rival, make_sequence(rival, order, 0.5), Uncoordinated::kSelf, 100.0);
  EXPECT_EQ(b[1].station, 0);
  EXPECT_FALSE(b[1].success);
  EXPECT_DOUBLE_EQ(total_cost(b), 1.0 + 1.0 + 120.0);
}

TEST(Metrics, OfflineGoldenReport) {
  const auto inst = matrix_instance(2, {0, 1}, {{1, 10}, {1, 10}});
  const auto rep = offline_report(inst, "tiny");
  const auto vcg = vcg_outcome(inst);
  ASSERT_NE(rep.find("VCG", "payoff", "p1"), nullptr);
  EXPECT_DOUBLE_EQ(rep.find("VCG", "payoff", "p1")->stat.mean, vcg.payoff[0]);
  EXPECT_DOUBLE_EQ(rep.find("VCG", "payoff", "p2")->stat.mean, vcg.payoff[1]);
  const std::string golden =
      "experiment,setting,metric,platform,mean,std,count\n"
      "tiny,GREED,social_cost,,2,0,1\n"
      "tiny,GREED,search_time,,1,0,1\n"
      "tiny,GREED,success_rate,,1,0,1\n"
      "tiny,GREED,payoff,p1,1,0,1\n"
      "tiny,GREED,normalized_payoff,p1,1,0,1\n"
      "tiny,GREED,price,p1,0,0,1\n"
      "tiny,GREED,payoff,p2,1,0,1\n"
      "tiny,GREED,normalized_payoff,p2,1,0,1\n"
      "tiny,GREED,price,p2,0,0,1\n"
      "tiny,SELF,social_cost,,2,0,1\n"
      "tiny,SELF,search_time,,1,0,1\n"
      "tiny,SELF,success_rate,,1,0,1\n"
      "tiny,SELF,payoff,p1,1,0,1\n"
      "tiny,SELF,normalized_payoff,p1,1,0,1\n"
      "tiny,SELF,price,p1,0,0,1\n"
      "tiny,SELF,payoff,p2,1,0,1\n"
      "tiny,SELF,normalized_payoff,p2,1,0,1\n"
      "tiny,SELF,price,p2,0,0,1\n"
      "tiny,VCG,social_cost,,11,0,1\n"
      "tiny,VCG,search_time,,5.5,0,1\n"
      "tiny,VCG,success_rate,,1,0,1\n"
      "tiny,VCG,payoff,p1,10,0,1\n"
      "tiny,VCG,normalized_payoff,p1,10,0,1\n"
      "tiny,VCG,price,p1,-9,0,1\n"
      "tiny,VCG,payoff,p2,10,0,1\n"
      "tiny,VCG,normalized_payoff,p2,10,0,1\n"
      "tiny,VCG,price,p2,0,0,1\n";
  EXPECT_EQ(report_to_csv(rep), golden);
}

TEST(Metrics, SearchTimeAbsentWhenNobodyIsSent) {
  const auto inst = matrix_instance(1, {0}, {{5}}, 120.0, 1.0);  // station out of reach
  const auto rep = offline_report(inst);
  EXPECT_EQ(rep.find("VCG", "search_time")->stat.count, 0);
  EXPECT_DOUBLE_EQ(rep.find("VCG", "success_rate")->stat.mean, 0.0);
  EXPECT_DOUBLE_EQ(rep.find("VCG", "social_cost")->stat.mean, 120.0);
}

TEST(Metrics, AccumulatorMatchesTwoPass) {
  const std::vector<double> xs{3.0, 7.5, -1.0, 2.25, 10.0};
  Accumulator acc;
  for (double x : xs) acc.add(x);
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= xs.size();
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  EXPECT_NEAR(acc.stat().mean, mean, 1e-12);
  EXPECT_NEAR(acc.stat().std, std::sqrt(ss / (xs.size() - 1)), 1e-12);
  EXPECT_EQ(acc.stat().count, 5);
}

class OnlineSim : public ::testing::Test {
 protected:
  static Instance scenario() {
    ScenarioConfig cfg;
    cfg.seed = 3;
    cfg.n_stations = 10;
    cfg.n_drivers = 6;
    return generate_instance(cfg);
  }
};

TEST_F(OnlineSim, ThreadCountDoesNotChangeResults) {
  const auto inst = scenario();
  OnlineOptions opt;
  opt.replications = 20;
  opt.seed = 8;
  const auto one = online_report(inst, nullptr, opt);
  opt.threads = 3;
  const auto three = online_report(inst, nullptr, opt);
  EXPECT_EQ(one.rows, three.rows);
  EXPECT_EQ(report_to_csv(one), report_to_csv(three));
}

TEST_F(OnlineSim, OfflineOptimumBoundsEverySetting) {
  const auto inst = scenario();
  const auto ts = sample_training_set(inst, 5, 2);
  const auto policy = train_data_driven(inst, ts.support, ts.sequences, ts.horizon);
  OnlineOptions opt;
  opt.replications = 15;
  const auto set = run_online_replications(inst, &policy, opt);
  ASSERT_EQ(set.vcg_dd.size(), 15u);
  for (std::size_t r = 0; r < set.off.size(); ++r) {
    for (const auto* runs : {&set.greed, &set.self, &set.vcg_greedy, &set.vcg_dd}) {
      EXPECT_LE(set.off[r].social_cost, (*runs)[r].social_cost + 1e-9);
    }
  }
  const auto rep = online_report(inst, &policy, opt);
  const auto* dev = rep.find("GREED", "deviation_vs_VCG-dd");
  ASSERT_NE(dev, nullptr);
  const double dd = rep.find("VCG-dd", "social_cost")->stat.mean;
  EXPECT_NEAR(dev->stat.mean, (rep.find("GREED", "social_cost")->stat.mean - dd) / dd, 1e-12);
}

TEST(Reports, JsonRoundTripAndLayout) {
  const auto inst = matrix_instance(2, {0, 1}, {{1, 10}, {1, 10}});
  const auto rep = offline_report(inst, "tiny");
  const auto back = report_from_json(report_to_json(rep));
  EXPECT_EQ(back.rows, rep.rows);
  EXPECT_THROW(report_from_json(nlohmann::json{{"schema", "other"}}), InvalidInput);
  const auto dir = std::filesystem::temp_directory_path() / "fcsa_report_test";
  std::filesystem::remove_all(dir);
  const auto out = write_report(rep, dir, {{"seed", 1}});
  for (const char* f : {"report.csv", "report.json", "config.json"}) {
    EXPECT_TRUE(std::filesystem::exists(out / f)) << f;
  }
  EXPECT_EQ(read_text_file((out / "report.csv").string()), report_to_csv(rep));
  std::filesystem::remove_all(dir);
}

TEST(Offline, SinglePlatformSettingsCoincide) {
  // Distinct nearest stations, so even GREED is conflict-free.
  const auto inst = matrix_instance(1, {0, 0, 0}, {{2, 7, 9}, {8, 3, 9}, {9, 8, 4}});
  const auto c = run_offline_experiment(inst);
  EXPECT_DOUBLE_EQ(c.greed.social_cost, 9.0);
  EXPECT_DOUBLE_EQ(c.self.social_cost, 9.0);
  EXPECT_DOUBLE_EQ(c.vcg.social_cost, 9.0);
}

TEST(Offline, ConflictToySelfEqualsGreed) {
  // Both platforms' optima collide on station 0.
  const auto inst = matrix_instance(2, {0, 1}, {{3, 6}, {4, 5}});
  const auto c = run_offline_experiment(inst);
  EXPECT_DOUBLE_EQ(c.self.social_cost, 3.0 + 4.0 + 120.0);
  EXPECT_DOUBLE_EQ(c.greed.social_cost, c.self.social_cost);
  EXPECT_DOUBLE_EQ(c.vcg.social_cost, 8.0);
  EXPECT_DOUBLE_EQ(c.self.success_rate, 0.5);
}

TEST(Offline, VcgDominatesOnRandomInstances) {
  fcsa::Rng rng(21);
  for (int n = 0; n < 60; ++n) {
    const int p = 2 + static_cast<int>(rng.index(3));
    const auto inst = fcsa_test::random_instance(rng, p, p + static_cast<int>(rng.index(5)),
                                                 3 + static_cast<int>(rng.index(5)));
    const auto c = run_offline_experiment(inst);
    EXPECT_LE(c.vcg.social_cost, c.self.social_cost + 1e-9);
    EXPECT_LE(c.vcg.social_cost, c.greed.social_cost + 1e-9);
    EXPECT_GE(c.vcg.success_rate, 0.0);
    EXPECT_LE(c.vcg.success_rate, 1.0);
  }
}

TEST(Metrics, MixedFourDriverRates) {
  // Driver 0 wins station 0, driver 1 loses it, driver 2 is on v0, driver 3 alone on station 1.
  const auto inst = matrix_instance(2, {0, 1, 0, 1}, {{2, 9}, {3, 9}, {5, 5}, {9, 4}});
  const std::vector<int> target{0, 0, kNoStation, 1};
  const auto m = compute_metrics(inst, conflict_outcomes(inst, target, ConflictScope::kAllDrivers));
  EXPECT_DOUBLE_EQ(m.success_rate, 0.5);
  ASSERT_TRUE(m.search_time.has_value());
  EXPECT_DOUBLE_EQ(*m.search_time, (2.0 + 3.0 + 4.0) / 3.0);
  EXPECT_DOUBLE_EQ(m.social_cost, 2.0 + 123.0 + 120.0 + 4.0);
  EXPECT_DOUBLE_EQ(m.payoff[0], 122.0);
  EXPECT_DOUBLE_EQ(m.normalized_payoff[1], 127.0 / 2.0);
}

TEST(Uncoordinated, WideGapsReproduceOfflineGreedy) {
  // Distinct nearest stations; with a gap beyond travel time plus latency,
  // everybody sees the truth and online GREED is the offline greedy cost.
  fcsa::Rng rng(5);
  int checked = 0;
  for (int n = 0; n < 40; ++n) {
    const auto inst = fcsa_test::random_instance(rng, 2, 4, 8);
    const auto g = greedy_profile(inst);
    std::vector<int> seen;
    bool distinct = true;
    for (int v : g.target) {
      if (v == kNoStation) continue;
      distinct = distinct && std::find(seen.begin(), seen.end(), v) == seen.end();
      seen.push_back(v);
    }
    if (!distinct) continue;
    ++checked;
    std::vector<int> order{3, 1, 0, 2};
    const double tau = 3.0;
    const auto seq = make_sequence(inst, order, inst.max_reachable_travel_time() + tau + 1.0);
    const auto online = simulate_uncoordinated(inst, seq, Uncoordinated::kGreed, tau);
    EXPECT_NEAR(total_cost(online), social_cost_of(inst, g.target), 1e-9);
  }
  EXPECT_GT(checked, 5);
}

TEST(Reports, EmptyReportIsHeaderOnly) {
  EXPECT_EQ(report_to_csv(ExperimentReport{"x", {}}), "experiment,setting,metric,platform,mean,std,count\n");
}
