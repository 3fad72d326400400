#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "fcsa/core.hpp"

namespace fcsa {

// Rows are drivers, columns real stations. Every driver may also take v0 at its
// own v0 cost; there are enough v0 copies for all drivers.
struct AssignmentProblem {
  Matrix<double> cost;
  Matrix<char> allowed;
  std::vector<double> v0_cost;

  std::size_t num_drivers() const { return cost.rows(); }
  std::size_t num_stations() const { return cost.cols(); }
};

struct AssignmentResult {
  std::vector<int> target;  // station column or kNoStation
  double total = 0.0;
};

namespace detail {

struct HungarianSolution {
  std::vector<int> column_of_row;
  std::vector<double> u, v;  // duals, 1-based like the textbook layout
  double total = 0.0;
};

// Shortest augmenting path Hungarian method for n rows <= m columns.
inline HungarianSolution hungarian(const Matrix<double>& a) {
  const std::size_t n = a.rows();
  const std::size_t m = a.cols();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInfinity);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInfinity;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  HungarianSolution sol;
  sol.column_of_row.assign(n, -1);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) sol.column_of_row[p[j] - 1] = static_cast<int>(j - 1);
  }
  for (std::size_t i = 0; i < n; ++i) sol.total += a(i, sol.column_of_row[i]);
  sol.u = std::move(u);
  sol.v = std::move(v);
  return sol;
}

// A driver's pinned option during lexicographic refinement.
struct Pin {
  int driver;
  int station;  // kNoStation pins to v0
};

class AssignmentSolver {
 public:
  explicit AssignmentSolver(const AssignmentProblem& p) : p_(p) {
    if (p.allowed.rows() != p.cost.rows() || p.allowed.cols() != p.cost.cols() ||
        p.v0_cost.size() != p.cost.rows()) {
      throw InvalidInput("assignment problem dimensions disagree");
    }
    double max_cost = 0.0;
    for (std::size_t k = 0; k < p.num_drivers(); ++k) {
      if (!(p.v0_cost[k] >= 0.0) || p.v0_cost[k] == kInfinity) {
        throw InvalidInput("v0 cost must be finite and >= 0");
      }
      max_cost = std::max(max_cost, p.v0_cost[k]);
      for (std::size_t v = 0; v < p.num_stations(); ++v) {
        if (p.allowed(k, v)) max_cost = std::max(max_cost, p.cost(k, v));
      }
    }
    // Larger than any feasible total, so a forbidden pair is never worth using.
    big_ = (static_cast<double>(p.num_drivers()) + 1.0) * (max_cost + 1.0);
  }

  double big() const { return big_; }

  Matrix<double> expanded(std::span<const Pin> pins) const {
    const std::size_t n = p_.num_drivers();
    const std::size_t m = p_.num_stations();
    Matrix<double> a(n, m + n);
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t v = 0; v < m; ++v) a(k, v) = p_.allowed(k, v) ? p_.cost(k, v) : big_;
      for (std::size_t j = 0; j < n; ++j) a(k, m + j) = p_.v0_cost[k];
    }
    for (const Pin& pin : pins) {
      const std::size_t k = static_cast<std::size_t>(pin.driver);
      if (pin.station == kNoStation) {
        for (std::size_t v = 0; v < m; ++v) a(k, v) = big_;
      } else {
        const std::size_t s = static_cast<std::size_t>(pin.station);
        for (std::size_t c = 0; c < m + n; ++c) {
          if (c != s) a(k, c) = big_;
        }
        for (std::size_t r = 0; r < n; ++r) {
          if (r != k) a(r, s) = big_;
        }
      }
    }
    return a;
  }

  std::vector<int> targets(const HungarianSolution& sol) const {
    const int m = static_cast<int>(p_.num_stations());
    std::vector<int> t(sol.column_of_row.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
      t[k] = sol.column_of_row[k] < m ? sol.column_of_row[k] : kNoStation;
    }
    return t;
  }

 private:
  const AssignmentProblem& p_;
  double big_ = 0.0;
};

inline int option_rank(int station, int num_stations) {
  return station == kNoStation ? num_stations : station;
}

}  // namespace detail

// Optimal total cost only; skips the tie-breaking refinement.
inline double min_assignment_cost(const AssignmentProblem& p) {
  if (p.num_drivers() == 0) return 0.0;
  detail::AssignmentSolver solver(p);
  return detail::hungarian(solver.expanded({})).total;
}

// Exact minimum-cost assignment. Among optimal assignments, returns the
// lexicographically smallest target vector in driver order, where real stations
// rank by index and v0 ranks after every real station.
inline AssignmentResult min_cost_assignment(const AssignmentProblem& p) {
  AssignmentResult result;
  const std::size_t n = p.num_drivers();
  if (n == 0) return result;
  const int m = static_cast<int>(p.num_stations());
  detail::AssignmentSolver solver(p);
  const auto base = detail::hungarian(solver.expanded({}));
  const double best = base.total;
  std::vector<int> current = solver.targets(base);

  // Any optimal assignment only uses pairs that are tight under an optimal dual,
  // so only tight cheaper-ranked stations can improve the order.
  const double tol = 1e-9 * std::max(1.0, std::abs(best));
  std::vector<detail::Pin> pins;
  std::vector<char> pinned_station(m, 0);
  for (std::size_t k = 0; k < n; ++k) {
    const int rank = detail::option_rank(current[k], m);
    for (int s = 0; s < rank; ++s) {
      if (pinned_station[s] || !p.allowed(k, s)) continue;
      const double reduced = p.cost(k, s) - base.u[k + 1] - base.v[s + 1];
      if (std::abs(reduced) > tol) continue;
      pins.push_back({static_cast<int>(k), s});
      const auto trial = detail::hungarian(solver.expanded(pins));
      pins.pop_back();
      if (trial.total < solver.big() && std::abs(trial.total - best) <= tol) {
        current = solver.targets(trial);
        break;
      }
    }
    pins.push_back({static_cast<int>(k), current[k]});
    if (current[k] != kNoStation) pinned_station[current[k]] = 1;
  }

  result.target = std::move(current);
  for (std::size_t k = 0; k < n; ++k) {
    result.total += result.target[k] == kNoStation ? p.v0_cost[k] : p.cost(k, result.target[k]);
  }
  return result;
}

// One reported driver: the owning platform and the claimed location's travel data.
struct Report {
  int platform = 0;
  Site site;
};

inline std::vector<Report> truthful_reports(const Instance& inst) {
  std::vector<Report> reports;
  reports.reserve(inst.num_drivers());
  for (int k = 0; k < inst.num_drivers(); ++k) reports.push_back({inst.owner(k), inst.site_of_driver(k)});
  return reports;
}

// Assignment problem over the given reports. `platform_weight` scales every cost
// of a platform's drivers (empty = unweighted); `skip_platform` drops one platform.
inline AssignmentProblem build_problem(const Instance& inst, std::span<const Report> reports,
                                       std::span<const double> platform_weight = {},
                                       int skip_platform = -1, std::vector<int>* rows = nullptr) {
  std::vector<int> kept;
  for (std::size_t r = 0; r < reports.size(); ++r) {
    if (reports[r].platform != skip_platform) kept.push_back(static_cast<int>(r));
  }
  const std::size_t ns = static_cast<std::size_t>(inst.num_stations());
  AssignmentProblem p{Matrix<double>(kept.size(), ns), Matrix<char>(kept.size(), ns),
                      std::vector<double>(kept.size())};
  for (std::size_t row = 0; row < kept.size(); ++row) {
    const Report& rep = reports[kept[row]];
    if (rep.site.travel_time.size() != ns || rep.site.distance.size() != ns) {
      throw InvalidInput("report does not cover every station");
    }
    const double w = platform_weight.empty() ? 1.0 : platform_weight[rep.platform];
    for (std::size_t v = 0; v < ns; ++v) {
      p.cost(row, v) = w * rep.site.travel_time[v];
      p.allowed(row, v) = rep.site.distance[v] <= inst.search_radius_m();
    }
    p.v0_cost[row] = w * inst.penalty_min();
  }
  if (rows) *rows = std::move(kept);
  return p;
}

// f(theta): the cost-minimal conflict-free allocation for the reported drivers.
inline AssignmentResult social_choice(const Instance& inst, std::span<const Report> reports) {
  return min_cost_assignment(build_problem(inst, reports));
}

inline Assignment social_choice(const Instance& inst) {
  const auto reports = truthful_reports(inst);
  return {social_choice(inst, reports).target};
}

// Optimal cost of the system without platform i's reports.
inline double opt_excluding(const Instance& inst, std::span<const Report> reports, int i) {
  inst.check_platform(i);
  return min_assignment_cost(build_problem(inst, reports, {}, i));
}

inline double opt_excluding(const Instance& inst, int i) {
  const auto reports = truthful_reports(inst);
  return opt_excluding(inst, reports, i);
}

// Problem restricted to a subset of the instance's drivers, at true locations.
inline AssignmentProblem problem_for_drivers(const Instance& inst, std::span<const int> drivers) {
  const std::size_t ns = static_cast<std::size_t>(inst.num_stations());
  AssignmentProblem p{Matrix<double>(drivers.size(), ns), Matrix<char>(drivers.size(), ns),
                      std::vector<double>(drivers.size(), inst.penalty_min())};
  for (std::size_t r = 0; r < drivers.size(); ++r) {
    for (std::size_t v = 0; v < ns; ++v) {
      p.cost(r, v) = inst.travel_time(drivers[r], static_cast<int>(v));
      p.allowed(r, v) = inst.reachable(drivers[r], static_cast<int>(v));
    }
  }
  return p;
}

}  // namespace fcsa
