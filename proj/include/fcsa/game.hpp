#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fcsa/assignment.hpp"
#include "fcsa/core.hpp"

namespace fcsa {

inline constexpr std::size_t kDefaultEnumerationCap = 1000000;

// A platform's strategy: one target per driver, in drivers_of(i) order.
using PlatformStrategy = std::vector<int>;

// All valid strategies of platform i: injective maps of its drivers into
// reachable stations that place the largest possible number of drivers on real
// stations. Ordered lexicographically with v0 after every real station.
inline std::vector<PlatformStrategy> enumerate_strategies(int i, const Instance& inst,
                                                          std::size_t cap = kDefaultEnumerationCap) {
  const auto& members = inst.drivers_of(i);
  const int ns = inst.num_stations();
  const int need = max_reachable_matching(inst, members);
  const int n = static_cast<int>(members.size());
  std::vector<PlatformStrategy> out;
  PlatformStrategy cur(n, kNoStation);
  std::vector<char> used(ns, 0);
  auto rec = [&](auto&& self, int pos, int real) -> void {
    if (real + (n - pos) < need) return;
    if (pos == n) {
      if (out.size() >= cap) {
        throw EnumerationTooLarge("platform " + std::to_string(i) + " has more than " +
                                  std::to_string(cap) + " strategies");
      }
      out.push_back(cur);
      return;
    }
    const int k = members[pos];
    for (int v = 0; v < ns; ++v) {
      if (used[v] || !inst.reachable(k, v)) continue;
      used[v] = 1;
      cur[pos] = v;
      self(self, pos + 1, real + 1);
      used[v] = 0;
    }
    cur[pos] = kNoStation;
    self(self, pos + 1, real);
  };
  rec(rec, 0, 0);
  return out;
}

namespace detail {

// Platform i's drivers against stations with the given per-pair costs, solved
// cardinality-first: v0 is priced above any combination of real stations so
// the result always satisfies the "real station if possible" rule.
inline PlatformStrategy cardinality_first_assignment(const Instance& inst, int i,
                                                     const Matrix<double>& cost) {
  const auto& members = inst.drivers_of(i);
  const std::size_t ns = static_cast<std::size_t>(inst.num_stations());
  AssignmentProblem p{cost, Matrix<char>(members.size(), ns), {}};
  double max_cost = 0.0;
  for (std::size_t r = 0; r < members.size(); ++r) {
    for (std::size_t v = 0; v < ns; ++v) {
      p.allowed(r, v) = inst.reachable(members[r], static_cast<int>(v));
      if (p.allowed(r, v)) max_cost = std::max(max_cost, cost(r, v));
    }
  }
  const double surcharge = static_cast<double>(members.size() + 1) * (max_cost + 1.0);
  p.v0_cost.assign(members.size(), inst.penalty_min() + surcharge);
  return min_cost_assignment(p).target;
}

inline void write_strategy(const Instance& inst, int i, const PlatformStrategy& s,
                           std::vector<int>& target) {
  const auto& members = inst.drivers_of(i);
  for (std::size_t r = 0; r < members.size(); ++r) target[members[r]] = s[r];
}

}  // namespace detail

// Payoff-minimal strategy of platform i with every other platform fixed as in s.
inline PlatformStrategy best_response(int i, const StrategyProfile& s, const Instance& inst) {
  inst.check_platform(i);
  if (static_cast<int>(s.target.size()) != inst.num_drivers()) {
    throw InvalidInput("profile must cover every driver");
  }
  const auto& members = inst.drivers_of(i);
  const int ns = inst.num_stations();
  Matrix<double> cost(members.size(), ns);
  for (std::size_t r = 0; r < members.size(); ++r) {
    const int k = members[r];
    for (int v = 0; v < ns; ++v) {
      const double t = inst.travel_time(k, v);
      bool contested = false;
      for (int other = 0; other < inst.num_drivers(); ++other) {
        if (inst.owner(other) != i && s.target[other] == v && inst.travel_time(other, v) < t) {
          contested = true;
          break;
        }
      }
      cost(r, v) = contested ? t + inst.penalty_min() : t;
    }
  }
  return detail::cardinality_first_assignment(inst, i, cost);
}

// Every platform optimizes its own drivers against all stations, ignoring the others.
inline StrategyProfile selfish_profile(const Instance& inst) {
  StrategyProfile s{std::vector<int>(inst.num_drivers(), kNoStation)};
  for (int i = 0; i < inst.num_platforms(); ++i) {
    const auto& members = inst.drivers_of(i);
    Matrix<double> cost(members.size(), inst.num_stations());
    for (std::size_t r = 0; r < members.size(); ++r) {
      for (int v = 0; v < inst.num_stations(); ++v) cost(r, v) = inst.travel_time(members[r], v);
    }
    detail::write_strategy(inst, i, detail::cardinality_first_assignment(inst, i, cost), s.target);
  }
  return s;
}

// Nearest reachable station per driver, lowest index on ties. May put several
// drivers of one platform on the same station; evaluate with kAllDrivers.
inline StrategyProfile greedy_profile(const Instance& inst) {
  StrategyProfile s{std::vector<int>(inst.num_drivers(), kNoStation)};
  for (int k = 0; k < inst.num_drivers(); ++k) {
    double best = kInfinity;
    for (int v = 0; v < inst.num_stations(); ++v) {
      if (inst.reachable(k, v) && inst.travel_time(k, v) < best) {
        best = inst.travel_time(k, v);
        s.target[k] = v;
      }
    }
  }
  return s;
}

// Exhaustive payoff table over the full profile product.
class GameAnalysis {
 public:
  explicit GameAnalysis(const Instance& inst, std::size_t cap = kDefaultEnumerationCap)
      : inst_(&inst) {
    const int n = inst.num_platforms();
    strategies_.reserve(n);
    std::size_t total = 1;
    for (int i = 0; i < n; ++i) {
      strategies_.push_back(enumerate_strategies(i, inst, cap));
      total *= strategies_.back().size();
      if (total > cap) {
        throw EnumerationTooLarge("profile space exceeds " + std::to_string(cap) + " profiles");
      }
    }
    stride_.assign(n, 1);
    for (int i = n - 2; i >= 0; --i) stride_[i] = stride_[i + 1] * strategies_[i + 1].size();
    num_profiles_ = total;
    payoff_.assign(total * n, 0.0);
    best_.assign(total * n, kInfinity);
    for (std::size_t idx = 0; idx < total; ++idx) {
      const auto u = payoffs_of(inst, profile(idx).target);
      for (int i = 0; i < n; ++i) payoff_[idx * n + i] = u[i];
    }
    // best_i(idx) = min over i's strategies with the others fixed.
    for (int i = 0; i < n; ++i) {
      for (std::size_t idx = 0; idx < total; ++idx) {
        if (component(idx, i) != 0) continue;
        double best = kInfinity;
        for (std::size_t a = 0; a < strategies_[i].size(); ++a) {
          best = std::min(best, payoff_[(idx + a * stride_[i]) * n + i]);
        }
        for (std::size_t a = 0; a < strategies_[i].size(); ++a) {
          best_[(idx + a * stride_[i]) * n + i] = best;
        }
      }
    }
  }

  const Instance& instance() const { return *inst_; }
  std::size_t num_profiles() const { return num_profiles_; }
  const std::vector<PlatformStrategy>& strategies(int i) const { return strategies_[i]; }

  std::size_t component(std::size_t idx, int i) const {
    return (idx / stride_[i]) % strategies_[i].size();
  }

  std::size_t with_component(std::size_t idx, int i, std::size_t a) const {
    return idx - component(idx, i) * stride_[i] + a * stride_[i];
  }

  StrategyProfile profile(std::size_t idx) const {
    StrategyProfile s{std::vector<int>(inst_->num_drivers(), kNoStation)};
    for (int i = 0; i < inst_->num_platforms(); ++i) {
      detail::write_strategy(*inst_, i, strategies_[i][component(idx, i)], s.target);
    }
    return s;
  }

  std::optional<std::size_t> index_of(const StrategyProfile& s) const {
    std::size_t idx = 0;
    for (int i = 0; i < inst_->num_platforms(); ++i) {
      const auto& members = inst_->drivers_of(i);
      PlatformStrategy mine(members.size());
      for (std::size_t r = 0; r < members.size(); ++r) mine[r] = s.target[members[r]];
      const auto& all = strategies_[i];
      const auto it = std::find(all.begin(), all.end(), mine);
      if (it == all.end()) return std::nullopt;
      idx += static_cast<std::size_t>(it - all.begin()) * stride_[i];
    }
    return idx;
  }

  double payoff(std::size_t idx, int i) const { return payoff_[idx * inst_->num_platforms() + i]; }
  double best_payoff(std::size_t idx, int i) const {
    return best_[idx * inst_->num_platforms() + i];
  }

  // Largest unilateral improvement available at this profile.
  double regret(std::size_t idx) const {
    double r = 0.0;
    for (int i = 0; i < inst_->num_platforms(); ++i) r = std::max(r, payoff(idx, i) - best_payoff(idx, i));
    return r;
  }

  bool improvable(std::size_t idx, int i) const {
    return payoff(idx, i) > best_payoff(idx, i) + kCostTolerance;
  }

  // Strict best-response moves out of a profile, players in index order.
  std::vector<std::size_t> successors(std::size_t idx) const {
    std::vector<std::size_t> out;
    for (int i = 0; i < inst_->num_platforms(); ++i) {
      if (!improvable(idx, i)) continue;
      for (std::size_t a = 0; a < strategies_[i].size(); ++a) {
        const std::size_t next = with_component(idx, i, a);
        if (std::abs(payoff(next, i) - best_payoff(idx, i)) <= kCostTolerance) out.push_back(next);
      }
    }
    return out;
  }

 private:
  const Instance* inst_;
  std::vector<std::vector<PlatformStrategy>> strategies_;
  std::vector<std::size_t> stride_;
  std::size_t num_profiles_ = 0;
  std::vector<double> payoff_;
  std::vector<double> best_;
};

inline std::optional<StrategyProfile> find_pne(const GameAnalysis& g) {
  for (std::size_t idx = 0; idx < g.num_profiles(); ++idx) {
    bool stable = true;
    for (int i = 0; i < g.instance().num_platforms() && stable; ++i) stable = !g.improvable(idx, i);
    if (stable) return g.profile(idx);
  }
  return std::nullopt;
}

inline std::optional<StrategyProfile> find_pne(const Instance& inst,
                                               std::size_t cap = kDefaultEnumerationCap) {
  return find_pne(GameAnalysis(inst, cap));
}

// Depth-first search along best-response moves from `start`. Returns the first
// directed cycle met, as a profile sequence whose last element repeats the first.
inline std::optional<std::vector<StrategyProfile>> improvement_cycle_from(const GameAnalysis& g,
                                                                          std::size_t start) {
  enum : char { kNew, kOnStack, kDone };
  std::vector<char> state(g.num_profiles(), kNew);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> pending;
  stack.push_back(start);
  pending.push_back(g.successors(start));
  std::reverse(pending.back().begin(), pending.back().end());
  state[start] = kOnStack;
  while (!stack.empty()) {
    auto& todo = pending.back();
    if (todo.empty()) {
      state[stack.back()] = kDone;
      stack.pop_back();
      pending.pop_back();
      continue;
    }
    const std::size_t next = todo.back();
    todo.pop_back();
    if (state[next] == kOnStack) {
      const auto from = std::find(stack.begin(), stack.end(), next);
      std::vector<StrategyProfile> cycle;
      for (auto it = from; it != stack.end(); ++it) cycle.push_back(g.profile(*it));
      cycle.push_back(g.profile(next));
      return cycle;
    }
    if (state[next] == kDone) continue;
    state[next] = kOnStack;
    stack.push_back(next);
    pending.push_back(g.successors(next));
    std::reverse(pending.back().begin(), pending.back().end());
  }
  return std::nullopt;
}

// Searches from the selfish profile first, then from every other profile.
inline std::optional<std::vector<StrategyProfile>> improvement_cycle(const GameAnalysis& g) {
  const auto& inst = g.instance();
  if (const auto start = g.index_of(selfish_profile(inst))) {
    if (auto c = improvement_cycle_from(g, *start)) return c;
  }
  for (std::size_t idx = 0; idx < g.num_profiles(); ++idx) {
    if (auto c = improvement_cycle_from(g, idx)) return c;
  }
  return std::nullopt;
}

inline std::optional<std::vector<StrategyProfile>> improvement_cycle(
    const Instance& inst, std::size_t cap = kDefaultEnumerationCap) {
  return improvement_cycle(GameAnalysis(inst, cap));
}

// Smallest rho such that some profile admits no unilateral improvement of rho
// or more: min over profiles of the largest available improvement.
inline double rho_gap(const GameAnalysis& g) {
  double gap = kInfinity;
  for (std::size_t idx = 0; idx < g.num_profiles(); ++idx) gap = std::min(gap, g.regret(idx));
  return g.num_profiles() == 0 ? 0.0 : gap;
}

inline double rho_gap(const Instance& inst, std::size_t cap = kDefaultEnumerationCap) {
  return rho_gap(GameAnalysis(inst, cap));
}

}  // namespace fcsa
