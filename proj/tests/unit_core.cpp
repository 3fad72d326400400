#include <gtest/gtest.h>

#include "fcsa/core.hpp"
#include "fcsa/instance_io.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace fcsa;
using fcsa_test::matrix_instance;

TEST(DriverCost, V0PaysPenalty) {
  auto inst = matrix_instance(1, {0}, {{5}});
  // A single driver with a reachable station may not sit on v0.
  EXPECT_THROW(driver_cost_strategic(0, StrategyProfile{{kNoStation}}, inst), InvalidInput);
  auto far = matrix_instance(1, {0}, {{5}}, 120.0, 1.0);
  EXPECT_EQ(driver_cost_strategic(0, StrategyProfile{{kNoStation}}, far), 120.0);
}

TEST(DriverCost, SoleDriverPaysTravelTime) {
  auto inst = matrix_instance(1, {0}, {{5}});
  EXPECT_EQ(driver_cost_strategic(0, StrategyProfile{{0}}, inst), 5.0);
}

TEST(DriverCost, CrossPlatformConflict) {
  auto inst = matrix_instance(2, {0, 1}, {{4}, {7}});
  StrategyProfile s{{0, 0}};
  EXPECT_EQ(driver_cost_strategic(0, s, inst), 4.0);
  EXPECT_EQ(driver_cost_strategic(1, s, inst), 127.0);
}

TEST(DriverCost, ExactTieIsPenaltyFree) {
  auto inst = matrix_instance(2, {0, 1}, {{6}, {6}});
  StrategyProfile s{{0, 0}};
  EXPECT_EQ(driver_cost_strategic(0, s, inst), 6.0);
  EXPECT_EQ(driver_cost_strategic(1, s, inst), 6.0);
}

TEST(DriverCost, Errors) {
  auto inst = matrix_instance(2, {0, 1}, {{4}, {7}});
  EXPECT_THROW(driver_cost_strategic(2, StrategyProfile{{0, 0}}, inst), UnknownEntity);
  EXPECT_THROW(driver_cost_strategic(0, StrategyProfile{{0}}, inst), InvalidInput);
  EXPECT_THROW(driver_cost_strategic(0, StrategyProfile{{0, 3}}, inst), UnknownEntity);
}

TEST(DriverCost, PenaltyMonotonicity) {
  for (double penalty : {50.0, 120.0, 300.0}) {
    auto inst = matrix_instance(2, {0, 1}, {{4}, {7}}, penalty);
    StrategyProfile s{{0, 0}};
    EXPECT_EQ(driver_cost_strategic(0, s, inst), 4.0);
    EXPECT_EQ(driver_cost_strategic(1, s, inst), 7.0 + penalty);
  }
}

TEST(PlayerPayoff, Examples) {
  auto inst = matrix_instance(3, {0, 0, 1}, {{4, 9}, {8, 3}, {7, 1}});
  // Platform 3 owns no drivers.
  EXPECT_EQ(player_payoff(2, StrategyProfile{{0, 1, 1}}, inst), 0.0);
  // Driver 2 (t=3) loses station 1 to the foreign driver at t=1: 4 + 123.
  EXPECT_EQ(player_payoff(0, StrategyProfile{{0, 1, 1}}, inst), 127.0);
  EXPECT_THROW(player_payoff(3, StrategyProfile{{0, 1, 1}}, inst), UnknownEntity);

  auto solo = matrix_instance(1, {0}, {{5}}, 120.0, 1.0);
  EXPECT_EQ(player_payoff(0, StrategyProfile{{kNoStation}}, solo), 120.0);

  auto two = matrix_instance(2, {0, 0, 1, 1}, {{4, 9}, {7, 1}, {9, 0.5}, {9, 9}}, 120.0, 8.0);
  // Platform 1: driver 1 alone at t=4, driver 2 beaten at station 2 by t=0.5 -> 4 + 121.
  // Here driver 4 has nothing reachable.
  EXPECT_EQ(player_payoff(0, StrategyProfile{{0, 1, 1, kNoStation}}, two), 125.0);
}

TEST(SocialCost, ThreeDriversOneStation) {
  auto inst = matrix_instance(3, {0, 1, 2}, {{2}, {3}, {4}});
  EXPECT_EQ(social_cost(StrategyProfile{{0, 0, 0}}, inst), 249.0);
}

TEST(SocialCost, ConflictFreeIsSumOfTravelTimes) {
  auto inst = matrix_instance(2, {0, 1}, {{2, 5}, {3, 4}});
  EXPECT_EQ(social_cost(StrategyProfile{{0, 1}}, inst), 6.0);
}

TEST(SocialCost, MatchesSumOfPayoffsOnRandomProfiles) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<double>> t(4, std::vector<double>(3));
    std::vector<int> owners(4);
    for (int k = 0; k < 4; ++k) {
      owners[k] = static_cast<int>(rng.index(3));
      for (auto& x : t[k]) x = static_cast<double>(1 + rng.index(6));
    }
    auto inst = matrix_instance(3, owners, t);
    std::vector<std::vector<std::vector<int>>> per(3);
    for (int i = 0; i < 3; ++i) per[i] = oracle::strategies(inst, i);
    StrategyProfile s{std::vector<int>(4, kNoStation)};
    for (int i = 0; i < 3; ++i) {
      const auto& pick = per[i][rng.index(per[i].size())];
      int r = 0;
      for (int k = 0; k < 4; ++k) {
        if (owners[k] == i) s.target[k] = pick[r++];
      }
    }
    const auto u = oracle::payoffs(inst, s.target);
    double sum = 0.0;
    for (double x : u) sum += x;
    EXPECT_EQ(social_cost(s, inst), sum);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(player_payoff(i, s, inst), u[i]);
  }
}

TEST(AllocationCost, Examples) {
  auto inst = matrix_instance(2, {0, 1}, {{9, 3}, {5, 200}}, 120.0, 100.0);
  Assignment a{{0, kNoStation}};
  EXPECT_EQ(allocation_cost(0, a, inst), 9.0);
  EXPECT_EQ(allocation_cost(1, a, inst), 120.0);
  EXPECT_EQ(allocation_total(a, inst), 129.0);
  EXPECT_THROW(allocation_cost(5, a, inst), UnknownEntity);
  // Never exceeds the strategic cost for the same target.
  StrategyProfile s{{0, 0}};
  Assignment same{{0, 0}};
  EXPECT_LE(allocation_cost(1, same, inst), driver_cost_strategic(1, s, inst));
}

TEST(Validation, StrategyRules) {
  auto inst = matrix_instance(2, {0, 0, 1}, {{1, 2}, {2, 1}, {1, 1}});
  EXPECT_NO_THROW(validate(StrategyProfile{{0, 1, 0}}, inst));
  EXPECT_THROW(validate(StrategyProfile{{0, 0, 1}}, inst), InvalidInput);          // same platform twice
  EXPECT_THROW(validate(StrategyProfile{{0, kNoStation, 1}}, inst), InvalidInput);  // idle driver
  EXPECT_THROW(validate(Assignment{{0, 1, 0}}, inst), InvalidInput);
  EXPECT_NO_THROW(validate(Assignment{{0, 1, kNoStation}}, inst));
}

TEST(Instance, RejectsBadInput) {
  EXPECT_THROW(matrix_instance(1, {0}, {{5}}, 4.0), InvalidInput);  // penalty below travel time
  EXPECT_THROW(matrix_instance(1, {1}, {{5}}), InvalidInput);       // unknown owner
  EXPECT_THROW(matrix_instance(1, {0}, {{-1}}), InvalidInput);
  EXPECT_THROW(Instance::euclidean({"a"}, {{1, {0, 0}}, {1, {1, 1}}}, {}, 1000.0), InvalidInput);
  EXPECT_THROW(Instance::euclidean({"a"}, {}, {}, 0.0), InvalidInput);
}

TEST(Instance, EuclideanTravelTimes) {
  auto inst = Instance::euclidean({"a", "b"}, {{1, {0, 0}}, {2, {3000, 4000}}},
                                  {{10, 1, {0, 0}}, {11, 0, {0, 1000}}}, 2000.0);
  EXPECT_DOUBLE_EQ(inst.distance(0, 1), 5000.0);
  EXPECT_DOUBLE_EQ(inst.travel_time(0, 1), 10.0);
  EXPECT_TRUE(inst.reachable(1, 0));
  EXPECT_FALSE(inst.reachable(0, 1));
  EXPECT_EQ(inst.drivers_of(0), std::vector<int>{1});
}

TEST(InstanceJson, RoundTrip) {
  auto inst = Instance::euclidean({"a", "b"}, {{1, {0, 0}}, {2, {300, 400}}},
                                  {{10, 1, {5, 5}}, {11, 0, {0, 100}}}, 2000.0, 120.0, 500.0,
                                  Disc{{1, 2}, 300});
  auto back = instance_from_json(nlohmann::json::parse(instance_to_json(inst).dump()));
  EXPECT_EQ(back.travel_times(), inst.travel_times());
  EXPECT_EQ(back.drivers()[0].owner, 1);
  ASSERT_TRUE(back.departure_area().has_value());
  EXPECT_EQ(back.departure_area()->radius_m, 300.0);

  auto m = matrix_instance(2, {0, 1}, {{2, 5}, {3, 4}});
  auto mback = instance_from_json(instance_to_json(m));
  EXPECT_FALSE(mback.is_euclidean());
  EXPECT_EQ(mback.travel_times(), m.travel_times());
}

TEST(InstanceJson, Malformed) {
  EXPECT_THROW(instance_from_json(nlohmann::json::parse(R"({"platforms": ["a"]})")), InvalidInput);
  EXPECT_THROW(load_instance("/nonexistent/instance.json"), InvalidInput);
}
