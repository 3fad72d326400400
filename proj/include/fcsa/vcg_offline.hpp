#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fcsa/assignment.hpp"
#include "fcsa/core.hpp"
#include "fcsa/game.hpp"
#include "fcsa/mathprog.hpp"

namespace fcsa {

// Allocation plus per-platform VCG quantities, all in minutes. `pivot` is h_{-i}.
struct VcgOutcome {
  std::vector<int> allocation;  // one target per report
  std::vector<double> valuation;
  std::vector<double> price;
  std::vector<double> payoff;
  std::vector<double> pivot;
};

namespace detail {

inline std::vector<double> report_valuations(const Instance& inst, std::span<const Report> reports,
                                             std::span<const int> target) {
  std::vector<double> v(inst.num_platforms(), 0.0);
  for (std::size_t r = 0; r < reports.size(); ++r) {
    const int s = target[r];
    v[reports[r].platform] += s == kNoStation ? inst.penalty_min() : reports[r].site.travel_time[s];
  }
  return v;
}

}  // namespace detail

// Social choice plus Clarke-pivot prices: price_i = h_{-i} - sum_{j != i} v_j(a).
inline VcgOutcome vcg_outcome(const Instance& inst, std::span<const Report> reports) {
  VcgOutcome out;
  out.allocation = social_choice(inst, reports).target;
  out.valuation = detail::report_valuations(inst, reports, out.allocation);
  const int n = inst.num_platforms();
  out.price.assign(n, 0.0);
  out.payoff.assign(n, 0.0);
  out.pivot.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double others = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j != i) others += out.valuation[j];
    }
    out.pivot[i] = opt_excluding(inst, reports, i);
    out.price[i] = out.pivot[i] - others;
    out.payoff[i] = out.valuation[i] - out.price[i];
  }
  return out;
}

inline VcgOutcome vcg_outcome(const Instance& inst) {
  const auto reports = truthful_reports(inst);
  return vcg_outcome(inst, reports);
}

enum class PivotRule {
  kWeighted,          // h_{-i} = min_b sum_{j != i} (w_j / w_i) v_j(b)
  kOptimizedWeights,  // h_{-i} = OPT_{-i} / w_i, the rule used when weights are optimized
};

inline void check_weights(std::span<const double> w, int platforms, double max_weight) {
  if (static_cast<int>(w.size()) != platforms) throw InvalidInput("one weight per platform required");
  for (double x : w) {
    if (!(x >= 1.0 - 1e-9 && x <= max_weight + 1e-9)) {
      throw InvalidInput("weight " + std::to_string(x) + " outside [1, " + std::to_string(max_weight) + "]");
    }
  }
}

// Allocation argmin sum_i w_i v_i, prices p_i = h_{-i} - sum_{j != i} (w_j / w_i) v_j.
inline VcgOutcome weighted_vcg_outcome(const Instance& inst, std::span<const Report> reports,
                                       std::span<const double> w,
                                       PivotRule rule = PivotRule::kOptimizedWeights,
                                       double max_weight = kDefaultMaxWeight) {
  const int n = inst.num_platforms();
  check_weights(w, n, max_weight);
  VcgOutcome out;
  out.allocation = min_cost_assignment(build_problem(inst, reports, w)).target;
  out.valuation = detail::report_valuations(inst, reports, out.allocation);
  out.price.assign(n, 0.0);
  out.payoff.assign(n, 0.0);
  out.pivot.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double others = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j != i) others += (w[j] / w[i]) * out.valuation[j];
    }
    if (rule == PivotRule::kOptimizedWeights) {
      out.pivot[i] = opt_excluding(inst, reports, i) / w[i];
    } else {
      std::vector<double> scaled(n);
      for (int j = 0; j < n; ++j) scaled[j] = w[j] / w[i];
      out.pivot[i] = min_assignment_cost(build_problem(inst, reports, scaled, i));
    }
    out.price[i] = out.pivot[i] - others;
    out.payoff[i] = out.valuation[i] - out.price[i];
  }
  return out;
}

inline VcgOutcome weighted_vcg_outcome(const Instance& inst, std::span<const double> w,
                                       PivotRule rule = PivotRule::kOptimizedWeights,
                                       double max_weight = kDefaultMaxWeight) {
  const auto reports = truthful_reports(inst);
  return weighted_vcg_outcome(inst, reports, w, rule, max_weight);
}

// True iff no platform lowers its VCG payoff by reassigning its own drivers
// among the stations it received (exhaustive; truthful reports).
inline bool check_no_deviation(const Instance& inst, const VcgOutcome& outcome,
                               std::size_t cap = kDefaultEnumerationCap) {
  const double total = allocation_total(Assignment{outcome.allocation}, inst);
  for (int i = 0; i < inst.num_platforms(); ++i) {
    const auto& members = inst.drivers_of(i);
    std::vector<int> bundle;
    double own = 0.0;
    for (int k : members) {
      own += allocation_cost(k, Assignment{outcome.allocation}, inst);
      if (outcome.allocation[k] != kNoStation) bundle.push_back(outcome.allocation[k]);
    }
    const double base_payoff = total - outcome.pivot[i];
    std::vector<char> used(bundle.size(), 0);
    std::size_t visited = 0;
    bool improvable = false;
    auto rec = [&](auto&& self, std::size_t pos, double acc) -> void {
      if (improvable) return;
      if (pos == members.size()) {
        if (++visited > cap) throw EnumerationTooLarge("deviation enumeration exceeds cap");
        const double payoff = total - own + acc - outcome.pivot[i];
        if (payoff < base_payoff - kCostTolerance * std::max(1.0, std::abs(base_payoff))) improvable = true;
        return;
      }
      const int k = members[pos];
      for (std::size_t b = 0; b < bundle.size(); ++b) {
        if (used[b] || !inst.reachable(k, bundle[b])) continue;
        used[b] = 1;
        self(self, pos + 1, acc + inst.travel_time(k, bundle[b]));
        used[b] = 0;
      }
      self(self, pos + 1, acc + inst.penalty_min());
    };
    rec(rec, 0, 0.0);
    if (improvable) return false;
  }
  return true;
}

// One platform's false report: the drivers it claims, each mapped to the true
// driver it stands for, or -1 for a phantom driver.
struct Misreport {
  int platform = 0;
  std::vector<Report> reported;
  std::vector<int> true_driver;
};

inline Misreport identity_misreport(const Instance& inst, int platform) {
  Misreport m{platform, {}, {}};
  for (int k : inst.drivers_of(platform)) {
    m.reported.push_back({platform, inst.site_of_driver(k)});
    m.true_driver.push_back(k);
  }
  return m;
}

struct MisreportEvaluation {
  double truthful_payoff = 0.0;
  double liar_payoff = 0.0;  // after the liar re-optimizes its true drivers on its bundle
  double liar_payoff_as_assigned = 0.0;  // keeping the allocation as received
};

// Liar's payoff: true cost of its drivers on the stations it receives, minus the
// VCG price computed from the reports. Unreported drivers enter the
// reassignment as well; phantom stations are free for the true drivers.
inline MisreportEvaluation evaluate_misreport(const Instance& inst, const Misreport& m) {
  const int i = inst.check_platform(m.platform);
  MisreportEvaluation ev;
  const auto truth = vcg_outcome(inst);
  ev.truthful_payoff = truth.payoff[i];

  std::vector<Report> reports;
  for (int k = 0; k < inst.num_drivers(); ++k) {
    if (inst.owner(k) != i) reports.push_back({inst.owner(k), inst.site_of_driver(k)});
  }
  const std::size_t first_liar = reports.size();
  for (const auto& r : m.reported) {
    if (r.platform != i) throw InvalidInput("misreport lists a driver of another platform");
    reports.push_back(r);
  }
  const auto lie = vcg_outcome(inst, reports);

  // Bundle of real stations received, and the as-received true cost.
  std::vector<int> bundle;
  std::vector<char> covered(inst.num_drivers(), 0);
  double as_assigned = 0.0;
  for (std::size_t r = first_liar; r < reports.size(); ++r) {
    const int s = lie.allocation[r];
    const int k = m.true_driver[r - first_liar];
    if (s != kNoStation) bundle.push_back(s);
    if (k < 0) continue;
    covered[k] = 1;
    as_assigned += (s == kNoStation || !inst.reachable(k, s)) ? inst.penalty_min() : inst.travel_time(k, s);
  }
  for (int k : inst.drivers_of(i)) {
    if (!covered[k]) as_assigned += inst.penalty_min();
  }

  const auto& members = inst.drivers_of(i);
  AssignmentProblem p{Matrix<double>(members.size(), bundle.size()),
                      Matrix<char>(members.size(), bundle.size()),
                      std::vector<double>(members.size(), inst.penalty_min())};
  for (std::size_t r = 0; r < members.size(); ++r) {
    for (std::size_t b = 0; b < bundle.size(); ++b) {
      p.cost(r, b) = inst.travel_time(members[r], bundle[b]);
      p.allowed(r, b) = inst.reachable(members[r], bundle[b]);
    }
  }
  const double reassigned = min_assignment_cost(p);
  ev.liar_payoff = reassigned - lie.price[i];
  ev.liar_payoff_as_assigned = as_assigned - lie.price[i];
  return ev;
}

enum class MisreportKind { kJitter, kDrop, kPhantom };

// Random lie by one platform. Jitter moves every reported location by up to
// `jitter_m`; drop hides one driver; phantom adds a fake driver near a real one.
inline Misreport random_misreport(const Instance& inst, int platform, MisreportKind kind, Rng& rng,
                                  double jitter_m = 1000.0) {
  Misreport m = identity_misreport(inst, platform);
  const auto& members = inst.drivers_of(platform);
  switch (kind) {
    case MisreportKind::kJitter:
      for (std::size_t r = 0; r < members.size(); ++r) {
        const Point p = uniform_in_disc(inst.drivers()[members[r]].position, jitter_m, rng);
        m.reported[r].site = inst.site_at(p);
      }
      break;
    case MisreportKind::kDrop:
      if (!members.empty()) {
        const std::size_t r = rng.index(members.size());
        m.reported.erase(m.reported.begin() + static_cast<long>(r));
        m.true_driver.erase(m.true_driver.begin() + static_cast<long>(r));
      }
      break;
    case MisreportKind::kPhantom: {
      const int anchor = static_cast<int>(rng.index(static_cast<std::size_t>(inst.num_drivers())));
      const Point p = uniform_in_disc(inst.drivers()[anchor].position, jitter_m, rng);
      m.reported.push_back({platform, inst.site_at(p)});
      m.true_driver.push_back(-1);
      break;
    }
  }
  return m;
}

struct TruthfulnessReport {
  bool truthful = true;
  int samples = 0;
  double worst_gain = -kInfinity;  // max over samples of truthful - liar payoff
  std::optional<Misreport> counterexample;
};

using MisreportGenerator = std::function<Misreport(Rng&)>;

inline MisreportGenerator default_misreport_generator(const Instance& inst, double jitter_m = 1000.0) {
  return [&inst, jitter_m](Rng& rng) {
    const int platform = static_cast<int>(rng.index(static_cast<std::size_t>(inst.num_platforms())));
    const auto kind = static_cast<MisreportKind>(rng.index(3));
    return random_misreport(inst, platform, kind, rng, jitter_m);
  };
}

// No sampled lie may strictly lower the liar's payoff (tolerance 1e-9).
inline TruthfulnessReport check_truthfulness(const Instance& inst, const MisreportGenerator& gen,
                                             int samples, std::uint64_t seed) {
  TruthfulnessReport rep;
  Rng rng(seed);
  for (int s = 0; s < samples; ++s) {
    const Misreport m = gen(rng);
    const auto ev = evaluate_misreport(inst, m);
    const double gain = ev.truthful_payoff - ev.liar_payoff;
    rep.worst_gain = std::max(rep.worst_gain, gain);
    ++rep.samples;
    if (gain > kCostTolerance * std::max(1.0, std::abs(ev.truthful_payoff)) && rep.truthful) {
      rep.truthful = false;
      rep.counterexample = m;
    }
  }
  return rep;
}

enum class WeightsCategory { kVcgBeneficial, kWeightedVcgBeneficial, kInfeasibleWeights, kNotSolved };

inline const char* to_string(WeightsCategory c) {
  switch (c) {
    case WeightsCategory::kVcgBeneficial: return "vcg_beneficial";
    case WeightsCategory::kWeightedVcgBeneficial: return "weighted_vcg_beneficial";
    case WeightsCategory::kInfeasibleWeights: return "infeasible_weights";
    case WeightsCategory::kNotSolved: return "not_solved";
  }
  return "?";
}

struct WeightsDiagnosis {
  WeightsCategory category = WeightsCategory::kNotSolved;
  std::optional<std::vector<double>> weights;
  std::optional<VcgOutcome> outcome;
  std::vector<double> selfish_payoff;
  // w_i u_i(b) - (sum_j w_j v_j - OPT_{-i}); >= 0 means platform i benefits.
  std::vector<double> slack;
  std::optional<MilpStatus> milp_status;
  long nodes = 0;
  double max_weight = kDefaultMaxWeight;
};

inline constexpr double kBenefitTol = 1e-6;

inline std::vector<double> benefit_slack(const VcgOutcome& out, std::span<const double> w,
                                         std::span<const double> selfish, std::span<const double> opt_minus) {
  const std::size_t n = w.size();
  double weighted_total = 0.0;
  for (std::size_t j = 0; j < n; ++j) weighted_total += w[j] * out.valuation[j];
  std::vector<double> slack(n);
  for (std::size_t i = 0; i < n; ++i) slack[i] = w[i] * selfish[i] - (weighted_total - opt_minus[i]);
  return slack;
}

// Builds the weights program over the truthful instance. Exposed for testing.
struct WeightsProgram {
  LinearProgram lp;
  std::vector<int> weight_var;
  std::vector<std::vector<int>> x_var;  // per driver: one per station (-1 if unreachable), then v0
};

inline WeightsProgram build_weights_program(const Instance& inst, std::span<const double> selfish,
                                            std::span<const double> opt_minus, double max_weight) {
  WeightsProgram wp;
  const int n = inst.num_platforms();
  const int nd = inst.num_drivers();
  const int ns = inst.num_stations();
  for (int i = 0; i < n; ++i) wp.weight_var.push_back(wp.lp.add_variable(1.0, max_weight, 0.0, "w" + std::to_string(i)));
  wp.x_var.assign(nd, std::vector<int>(ns + 1, -1));
  std::vector<std::vector<Term>> payoff_terms(n);
  std::vector<Term> objective;
  for (int k = 0; k < nd; ++k) {
    std::vector<Term> assign;
    const int w = wp.weight_var[inst.owner(k)];
    for (int v = 0; v <= ns; ++v) {
      const bool v0 = v == ns;
      if (!v0 && !inst.reachable(k, v)) continue;
      const double cost = v0 ? inst.penalty_min() : inst.travel_time(k, v);
      const std::string name = "x_" + std::to_string(k) + "_" + (v0 ? std::string("v0") : std::to_string(v));
      const int x = wp.lp.add_binary(0.0, name);
      wp.x_var[k][v] = x;
      assign.push_back({x, 1.0});
      const int z = mccormick_product(wp.lp, w, x, "z_" + name.substr(2));
      wp.lp.set_cost(z, cost);
      for (int i = 0; i < n; ++i) payoff_terms[i].push_back({z, cost});
    }
    wp.lp.add_constraint(assign, Relation::kEqual, 1.0, "assign_" + std::to_string(k));
  }
  for (int v = 0; v < ns; ++v) {
    std::vector<Term> cap;
    for (int k = 0; k < nd; ++k) {
      if (wp.x_var[k][v] >= 0) cap.push_back({wp.x_var[k][v], 1.0});
    }
    if (!cap.empty()) wp.lp.add_constraint(cap, Relation::kLessEqual, 1.0, "cap_" + std::to_string(v));
  }
  for (int i = 0; i < n; ++i) {
    auto terms = payoff_terms[i];
    terms.push_back({wp.weight_var[i], -selfish[i]});
    wp.lp.add_constraint(terms, Relation::kLessEqual, opt_minus[i], "benefit_" + std::to_string(i));
  }
  return wp;
}

// Classifies an instance by whether (weighted) VCG benefits every platform
// relative to the selfish profile, optimizing weights in [1, W] when needed.
inline WeightsDiagnosis optimize_weights(const Instance& inst, std::span<const double> selfish,
                                         double max_weight = kDefaultMaxWeight,
                                         double time_limit_s = 120.0) {
  const int n = inst.num_platforms();
  if (static_cast<int>(selfish.size()) != n) throw InvalidInput("one selfish payoff per platform required");
  if (!(max_weight >= 1.0)) throw InvalidInput("max weight must be >= 1");
  WeightsDiagnosis d;
  d.max_weight = max_weight;
  d.selfish_payoff.assign(selfish.begin(), selfish.end());
  const auto reports = truthful_reports(inst);
  std::vector<double> opt_minus(n);
  for (int i = 0; i < n; ++i) opt_minus[i] = opt_excluding(inst, reports, i);

  const std::vector<double> ones(n, 1.0);
  auto plain = vcg_outcome(inst, reports);
  d.slack = benefit_slack(plain, ones, selfish, opt_minus);
  if (std::all_of(d.slack.begin(), d.slack.end(), [](double s) { return s >= -kBenefitTol; })) {
    d.category = WeightsCategory::kVcgBeneficial;
    d.weights = ones;
    d.outcome = std::move(plain);
    return d;
  }

  auto wp = build_weights_program(inst, selfish, opt_minus, max_weight);
  const auto res = solve_milp(wp.lp, {time_limit_s, 1'000'000});
  d.milp_status = res.status;
  d.nodes = res.nodes;
  if (res.status == MilpStatus::kInfeasible) {
    d.category = WeightsCategory::kInfeasibleWeights;
    return d;
  }
  if (res.status != MilpStatus::kOptimal) {
    d.category = WeightsCategory::kNotSolved;
    if (res.x) {
      std::vector<double> w(n);
      for (int i = 0; i < n; ++i) w[i] = (*res.x)[wp.weight_var[i]];
      d.weights = w;
    }
    return d;
  }
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = std::clamp((*res.x)[wp.weight_var[i]], 1.0, max_weight);
  // The weighted argmin never has a larger weighted cost than the program's x,
  // so it satisfies every benefit row that x satisfies.
  auto out = weighted_vcg_outcome(inst, reports, w, PivotRule::kOptimizedWeights, max_weight);
  d.slack = benefit_slack(out, w, selfish, opt_minus);
  d.weights = w;
  d.outcome = std::move(out);
  auto all = [&] {
    return std::all_of(d.slack.begin(), d.slack.end(), [](double s) { return s >= -kBenefitTol; });
  };
  if (!all()) {
    // Round-off in w can tip a tie; fall back to the program's own allocation.
    VcgOutcome alt;
    alt.allocation.assign(inst.num_drivers(), kNoStation);
    for (int k = 0; k < inst.num_drivers(); ++k) {
      for (int v = 0; v < inst.num_stations(); ++v) {
        if (wp.x_var[k][v] >= 0 && (*res.x)[wp.x_var[k][v]] > 0.5) alt.allocation[k] = v;
      }
    }
    alt.valuation = detail::report_valuations(inst, reports, alt.allocation);
    alt.pivot.resize(n);
    alt.price.resize(n);
    alt.payoff.resize(n);
    for (int i = 0; i < n; ++i) {
      double others = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j != i) others += (w[j] / w[i]) * alt.valuation[j];
      }
      alt.pivot[i] = opt_minus[i] / w[i];
      alt.price[i] = alt.pivot[i] - others;
      alt.payoff[i] = alt.valuation[i] - alt.price[i];
    }
    d.slack = benefit_slack(alt, w, selfish, opt_minus);
    d.outcome = std::move(alt);
  }
  d.category = all() ? WeightsCategory::kWeightedVcgBeneficial : WeightsCategory::kNotSolved;
  return d;
}

inline WeightsDiagnosis optimize_weights(const Instance& inst, double max_weight = kDefaultMaxWeight,
                                         double time_limit_s = 120.0) {
  const auto selfish = payoffs_of(inst, selfish_profile(inst).target);
  return optimize_weights(inst, selfish, max_weight, time_limit_s);
}

}  // namespace fcsa
