#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "fcsa/common.hpp"

namespace fcsa {

struct Station {
  int id = 0;
  Point position;
};

// A driver requesting a station. `owner` indexes Instance::platforms().
struct Driver {
  int id = 0;
  int owner = 0;
  Point position;
};

struct Disc {
  Point center;
  double radius_m = 0.0;
};

// Travel data from one (reported or actual) location to every station.
struct Site {
  Point position;
  std::vector<double> travel_time;
  std::vector<double> distance;
};

// The shared world model: platforms, stations, drivers and the driver x station
// travel-time / distance matrices. Immutable once constructed.
class Instance {
 public:
  Instance() = default;

  // Travel times derived from straight-line distance at a constant speed.
  static Instance euclidean(std::vector<std::string> platforms, std::vector<Station> stations,
                            std::vector<Driver> drivers, double search_radius_m,
                            double penalty_min = kDefaultPenaltyMin,
                            double speed_m_per_min = kDefaultSpeedMPerMin,
                            std::optional<Disc> departure_area = std::nullopt) {
    Instance inst;
    inst.platforms_ = std::move(platforms);
    inst.stations_ = std::move(stations);
    inst.drivers_ = std::move(drivers);
    inst.search_radius_m_ = search_radius_m;
    inst.penalty_min_ = penalty_min;
    inst.speed_m_per_min_ = speed_m_per_min;
    inst.departure_area_ = departure_area;
    if (!(speed_m_per_min > 0.0)) throw InvalidInput("speed must be positive");
    const std::size_t nd = inst.drivers_.size();
    const std::size_t ns = inst.stations_.size();
    inst.travel_time_ = Matrix<double>(nd, ns);
    inst.distance_ = Matrix<double>(nd, ns);
    for (std::size_t k = 0; k < nd; ++k) {
      for (std::size_t v = 0; v < ns; ++v) {
        const double d = fcsa::euclidean(inst.drivers_[k].position, inst.stations_[v].position);
        inst.distance_(k, v) = d;
        inst.travel_time_(k, v) = d / speed_m_per_min;
      }
    }
    inst.finalize();
    return inst;
  }

  // Explicit matrices, e.g. shortest paths on a road network.
  static Instance with_matrices(std::vector<std::string> platforms, std::vector<Station> stations,
                                std::vector<Driver> drivers, Matrix<double> travel_time,
                                Matrix<double> distance, double search_radius_m,
                                double penalty_min = kDefaultPenaltyMin,
                                std::optional<Disc> departure_area = std::nullopt) {
    Instance inst;
    inst.platforms_ = std::move(platforms);
    inst.stations_ = std::move(stations);
    inst.drivers_ = std::move(drivers);
    inst.travel_time_ = std::move(travel_time);
    inst.distance_ = std::move(distance);
    inst.search_radius_m_ = search_radius_m;
    inst.penalty_min_ = penalty_min;
    inst.departure_area_ = departure_area;
    inst.finalize();
    return inst;
  }

  const std::vector<std::string>& platforms() const { return platforms_; }
  const std::vector<Station>& stations() const { return stations_; }
  const std::vector<Driver>& drivers() const { return drivers_; }
  const Matrix<double>& travel_times() const { return travel_time_; }
  const Matrix<double>& distances() const { return distance_; }

  int num_platforms() const { return static_cast<int>(platforms_.size()); }
  int num_stations() const { return static_cast<int>(stations_.size()); }
  int num_drivers() const { return static_cast<int>(drivers_.size()); }

  double search_radius_m() const { return search_radius_m_; }
  double penalty_min() const { return penalty_min_; }
  // Set only for instances whose travel times follow straight-line distance.
  std::optional<double> speed_m_per_min() const { return speed_m_per_min_; }
  const std::optional<Disc>& departure_area() const { return departure_area_; }
  bool is_euclidean() const { return speed_m_per_min_.has_value(); }

  double travel_time(int k, int v) const { return travel_time_(k, v); }
  double distance(int k, int v) const { return distance_(k, v); }
  bool reachable(int k, int v) const { return distance_(k, v) <= search_radius_m_; }

  int owner(int k) const { return drivers_[check_driver(k)].owner; }

  // Driver indices belonging to platform i, ascending.
  const std::vector<int>& drivers_of(int platform) const {
    return members_[check_platform(platform)];
  }

  int check_driver(int k) const {
    if (k < 0 || k >= num_drivers()) throw UnknownEntity("unknown driver index " + std::to_string(k));
    return k;
  }
  int check_platform(int i) const {
    if (i < 0 || i >= num_platforms()) {
      throw UnknownEntity("unknown platform index " + std::to_string(i));
    }
    return i;
  }

  double max_reachable_travel_time() const { return max_reachable_time_; }
  double min_reachable_travel_time() const { return min_reachable_time_; }

  // Travel data from an arbitrary point. Requires a Euclidean instance.
  Site site_at(Point p) const {
    require_euclidean("site_at");
    Site s{p, std::vector<double>(stations_.size()), std::vector<double>(stations_.size())};
    for (std::size_t v = 0; v < stations_.size(); ++v) {
      s.distance[v] = fcsa::euclidean(p, stations_[v].position);
      s.travel_time[v] = s.distance[v] / *speed_m_per_min_;
    }
    return s;
  }

  Site site_of_driver(int k) const {
    check_driver(k);
    auto tt = travel_time_.row(k);
    auto dd = distance_.row(k);
    return {drivers_[k].position, {tt.begin(), tt.end()}, {dd.begin(), dd.end()}};
  }

  // Same stations and parameters, different driver population.
  Instance with_drivers(std::vector<Driver> drivers) const {
    require_euclidean("with_drivers");
    return euclidean(platforms_, stations_, std::move(drivers), search_radius_m_, penalty_min_,
                     *speed_m_per_min_, departure_area_);
  }

 private:
  void require_euclidean(const char* what) const {
    if (!is_euclidean()) {
      throw InvalidInput(std::string(what) + " needs an instance with a straight-line travel model");
    }
  }

  void finalize() {
    const std::size_t nd = drivers_.size();
    const std::size_t ns = stations_.size();
    if (!(search_radius_m_ > 0.0)) throw InvalidInput("search radius must be positive");
    if (platforms_.empty() && nd > 0) throw InvalidInput("drivers given without platforms");
    if (travel_time_.rows() != nd || travel_time_.cols() != ns || distance_.rows() != nd ||
        distance_.cols() != ns) {
      throw InvalidInput("travel-time and distance matrices must be |drivers| x |stations|");
    }
    std::unordered_set<int> seen;
    for (const auto& s : stations_) {
      if (!seen.insert(s.id).second) throw InvalidInput("duplicate station id " + std::to_string(s.id));
    }
    seen.clear();
    members_.assign(platforms_.size(), {});
    for (std::size_t k = 0; k < nd; ++k) {
      const Driver& d = drivers_[k];
      if (!seen.insert(d.id).second) throw InvalidInput("duplicate driver id " + std::to_string(d.id));
      if (d.owner < 0 || d.owner >= static_cast<int>(platforms_.size())) {
        throw InvalidInput("driver " + std::to_string(d.id) + " has unknown owner");
      }
      members_[d.owner].push_back(static_cast<int>(k));
    }
    max_reachable_time_ = 0.0;
    min_reachable_time_ = kInfinity;
    for (std::size_t k = 0; k < nd; ++k) {
      for (std::size_t v = 0; v < ns; ++v) {
        const double t = travel_time_(k, v);
        const double d = distance_(k, v);
        if (!(t >= 0.0) || !(d >= 0.0)) throw InvalidInput("travel times and distances must be >= 0");
        if (d <= search_radius_m_) {
          max_reachable_time_ = std::max(max_reachable_time_, t);
          min_reachable_time_ = std::min(min_reachable_time_, t);
        }
      }
    }
    if (!(penalty_min_ > max_reachable_time_)) {
      throw InvalidInput("penalty must exceed every travel time within the search radius");
    }
  }

  std::vector<std::string> platforms_;
  std::vector<Station> stations_;
  std::vector<Driver> drivers_;
  Matrix<double> travel_time_;
  Matrix<double> distance_;
  double search_radius_m_ = 1.0;
  double penalty_min_ = kDefaultPenaltyMin;
  std::optional<double> speed_m_per_min_;
  std::optional<Disc> departure_area_;
  std::vector<std::vector<int>> members_;
  double max_reachable_time_ = 0.0;
  double min_reachable_time_ = kInfinity;
};

// The principal's global allocation: driver index -> station index or kNoStation.
// Conflict-free: every real station is used at most once.
struct Assignment {
  std::vector<int> target;

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

// Joint strategy of all platforms, stored per driver. Each platform's component is
// the restriction to its own drivers; stations may repeat across platforms.
struct StrategyProfile {
  std::vector<int> target;

  friend bool operator==(const StrategyProfile&, const StrategyProfile&) = default;
};

enum class ConflictScope {
  kCrossPlatform,  // game semantics: only drivers of other platforms compete
  kAllDrivers,     // GREED semantics: every other driver competes
};

// Largest number of the given drivers that can be matched to distinct reachable
// stations (augmenting paths).
inline int max_reachable_matching(const Instance& inst, std::span<const int> drivers) {
  const int ns = inst.num_stations();
  std::vector<int> station_owner(ns, -1);
  int matched = 0;
  for (std::size_t a = 0; a < drivers.size(); ++a) {
    std::vector<char> visited(ns, 0);
    auto augment = [&](auto&& self, std::size_t row) -> bool {
      for (int v = 0; v < ns; ++v) {
        if (visited[v] || !inst.reachable(drivers[row], v)) continue;
        visited[v] = 1;
        if (station_owner[v] < 0 || self(self, static_cast<std::size_t>(station_owner[v]))) {
          station_owner[v] = static_cast<int>(row);
          return true;
        }
      }
      return false;
    };
    if (augment(augment, a)) ++matched;
  }
  return matched;
}

namespace detail {

inline void check_targets(const Instance& inst, std::span<const int> target) {
  if (static_cast<int>(target.size()) != inst.num_drivers()) {
    throw InvalidInput("target vector must cover every driver");
  }
  for (std::size_t k = 0; k < target.size(); ++k) {
    const int v = target[k];
    if (v == kNoStation) continue;
    if (v < 0 || v >= inst.num_stations()) {
      throw UnknownEntity("unknown station index " + std::to_string(v));
    }
    if (!inst.reachable(static_cast<int>(k), v)) {
      throw InvalidInput("driver " + std::to_string(k) + " targets a station beyond the search radius");
    }
  }
}

}  // namespace detail

inline void validate(const Assignment& a, const Instance& inst) {
  detail::check_targets(inst, a.target);
  std::vector<char> used(inst.num_stations(), 0);
  for (int v : a.target) {
    if (v == kNoStation) continue;
    if (used[v]) throw InvalidInput("assignment uses station " + std::to_string(v) + " twice");
    used[v] = 1;
  }
}

// Per-platform injectivity plus "a real station if possible": each platform
// places as many drivers on real stations as its reachability graph allows.
inline void validate(const StrategyProfile& s, const Instance& inst) {
  detail::check_targets(inst, s.target);
  for (int i = 0; i < inst.num_platforms(); ++i) {
    const auto& members = inst.drivers_of(i);
    std::vector<char> used(inst.num_stations(), 0);
    int real = 0;
    for (int k : members) {
      const int v = s.target[k];
      if (v == kNoStation) continue;
      if (used[v]) {
        throw InvalidInput("platform " + std::to_string(i) + " uses station " + std::to_string(v) +
                           " twice");
      }
      used[v] = 1;
      ++real;
    }
    if (real < max_reachable_matching(inst, members)) {
      throw InvalidInput("platform " + std::to_string(i) +
                         " leaves drivers on v0 although stations are available");
    }
  }
}

// Cost of every driver under the conflict rule: v0 pays the penalty; a driver on a
// real station pays its travel time, plus the penalty when a competing driver on
// the same station is strictly closer (exact ties count as earliest for both).
inline std::vector<double> conflict_costs(const Instance& inst, std::span<const int> target,
                                          ConflictScope scope) {
  const int nd = inst.num_drivers();
  const double penalty = inst.penalty_min();
  std::vector<std::vector<int>> at(inst.num_stations());
  for (int k = 0; k < nd; ++k) {
    if (target[k] != kNoStation) at[target[k]].push_back(k);
  }
  std::vector<double> cost(nd, 0.0);
  for (int k = 0; k < nd; ++k) {
    const int v = target[k];
    if (v == kNoStation) {
      cost[k] = penalty;
      continue;
    }
    const double tk = inst.travel_time(k, v);
    bool beaten = false;
    for (int other : at[v]) {
      if (other == k) continue;
      if (scope == ConflictScope::kCrossPlatform && inst.owner(other) == inst.owner(k)) continue;
      if (inst.travel_time(other, v) < tk) {
        beaten = true;
        break;
      }
    }
    cost[k] = beaten ? tk + penalty : tk;
  }
  return cost;
}

// Payoffs u_i for every platform without re-validating the profile.
inline std::vector<double> payoffs_of(const Instance& inst, std::span<const int> target,
                                      ConflictScope scope = ConflictScope::kCrossPlatform) {
  const auto cost = conflict_costs(inst, target, scope);
  std::vector<double> u(inst.num_platforms(), 0.0);
  for (int k = 0; k < inst.num_drivers(); ++k) u[inst.owner(k)] += cost[k];
  return u;
}

inline double driver_cost_strategic(int k, const StrategyProfile& s, const Instance& inst) {
  inst.check_driver(k);
  validate(s, inst);
  return conflict_costs(inst, s.target, ConflictScope::kCrossPlatform)[k];
}

inline double player_payoff(int i, const StrategyProfile& s, const Instance& inst) {
  inst.check_platform(i);
  validate(s, inst);
  return payoffs_of(inst, s.target)[i];
}

// Social cost via the per-station decomposition: every station contributes the
// travel times of its drivers plus one penalty per driver that is not among the
// earliest arrivals; v0 drivers pay the penalty. Equal to the sum of payoffs.
inline double social_cost_of(const Instance& inst, std::span<const int> target) {
  const double penalty = inst.penalty_min();
  std::vector<std::vector<int>> at(inst.num_stations());
  double total = 0.0;
  for (int k = 0; k < inst.num_drivers(); ++k) {
    if (target[k] == kNoStation) {
      total += penalty;
    } else {
      at[target[k]].push_back(k);
    }
  }
  for (int v = 0; v < inst.num_stations(); ++v) {
    if (at[v].empty()) continue;
    double earliest = kInfinity;
    for (int k : at[v]) earliest = std::min(earliest, inst.travel_time(k, v));
    int winners = 0;
    for (int k : at[v]) {
      total += inst.travel_time(k, v);
      if (inst.travel_time(k, v) == earliest) ++winners;
    }
    total += static_cast<double>(at[v].size() - winners) * penalty;
  }
  return total;
}

inline double social_cost(const StrategyProfile& s, const Instance& inst) {
  validate(s, inst);
  return social_cost_of(inst, s.target);
}

inline double allocation_cost(int k, const Assignment& a, const Instance& inst) {
  inst.check_driver(k);
  if (static_cast<int>(a.target.size()) != inst.num_drivers()) {
    throw InvalidInput("assignment must cover every driver");
  }
  const int v = a.target[k];
  return v == kNoStation ? inst.penalty_min() : inst.travel_time(k, v);
}

// Valuation v_i(a) of every platform.
inline std::vector<double> valuations(const Assignment& a, const Instance& inst) {
  std::vector<double> val(inst.num_platforms(), 0.0);
  for (int k = 0; k < inst.num_drivers(); ++k) val[inst.owner(k)] += allocation_cost(k, a, inst);
  return val;
}

inline double allocation_total(const Assignment& a, const Instance& inst) {
  double total = 0.0;
  for (int k = 0; k < inst.num_drivers(); ++k) total += allocation_cost(k, a, inst);
  return total;
}

}  // namespace fcsa
