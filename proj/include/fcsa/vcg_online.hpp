#pragma once

#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fcsa/assignment.hpp"
#include "fcsa/core.hpp"
#include "fcsa/instance_io.hpp"
#include "fcsa/mathprog.hpp"
#include "fcsa/vcg_offline.hpp"
#include "json.hpp"

namespace fcsa {

// One charging request. `driver` is the true driver behind it (-1 for a
// phantom); `site` is the reported location the principal decides on.
struct Request {
  int index = 0;
  int driver = -1;
  int platform = 0;
  Site site;
  double time_min = 0.0;
};

using RequestSequence = std::vector<Request>;

// Truthful requests for the drivers in `order`, one every `gap_min` minutes.
inline RequestSequence make_sequence(const Instance& inst, std::span<const int> order, double gap_min = 0.0) {
  RequestSequence seq;
  seq.reserve(order.size());
  for (std::size_t t = 0; t < order.size(); ++t) {
    const int k = order[t];
    inst.check_driver(k);
    seq.push_back({static_cast<int>(t), k, inst.owner(k), inst.site_of_driver(k), gap_min * static_cast<double>(t)});
  }
  return seq;
}

struct OnlineState {
  int t = 0;
  std::vector<int> decisions;
  std::vector<char> allocated;
};

// A decision rule: station index or kNoStation for the current request.
using OnlinePolicy = std::function<int(const Request&, const OnlineState&, Rng&)>;

// Closest unallocated station within the search radius; lowest index on ties.
inline int greedy_choice(const Instance& inst, const Site& site, std::span<const char> allocated) {
  int best = kNoStation;
  for (int v = 0; v < inst.num_stations(); ++v) {
    if (allocated[v] || site.distance[v] > inst.search_radius_m()) continue;
    if (best == kNoStation || site.travel_time[v] < site.travel_time[best]) best = v;
  }
  return best;
}

inline OnlinePolicy greedy_policy(const Instance& inst) {
  return [&inst](const Request& r, const OnlineState& s, Rng&) { return greedy_choice(inst, r.site, s.allocated); };
}

// Full-information surrogate: follows the (weighted) optimal allocation of the
// whole reported sequence. Only meaningful when the sequence is known upfront.
inline OnlinePolicy exact_policy(const Instance& inst, const RequestSequence& seq,
                                 std::span<const double> weights = {}) {
  std::vector<Report> reports;
  for (const auto& r : seq) reports.push_back({r.platform, r.site});
  auto plan = std::make_shared<std::vector<int>>(min_cost_assignment(build_problem(inst, reports, weights)).target);
  return [plan](const Request& r, const OnlineState& s, Rng&) {
    const int v = (*plan)[r.index];
    if (v != kNoStation && s.allocated[v]) throw InvalidInput("exact policy used on a different sequence");
    return v;
  };
}

struct OnlineRun {
  std::vector<int> decisions;
  std::vector<double> cost;       // d_t, realized at the true location
  std::vector<double> valuation;  // v^i
};

// Realized cost of sending the true driver to v: the penalty for v0 or an
// out-of-radius station, nothing for a phantom.
inline double realized_cost(const Instance& inst, int driver, int v) {
  if (driver < 0) return 0.0;
  if (v == kNoStation || !inst.reachable(driver, v)) return inst.penalty_min();
  return inst.travel_time(driver, v);
}

inline OnlineRun run_online(const RequestSequence& seq, const OnlinePolicy& policy, const Instance& inst,
                            Rng& rng) {
  OnlineRun run;
  run.valuation.assign(inst.num_platforms(), 0.0);
  OnlineState state;
  state.allocated.assign(inst.num_stations(), 0);
  for (const auto& r : seq) {
    if (r.driver >= 0) inst.check_driver(r.driver);
    inst.check_platform(r.platform);
    const int v = policy(r, state, rng);
    if (v != kNoStation) {
      if (v < 0 || v >= inst.num_stations()) throw UnknownEntity("policy chose unknown station");
      if (state.allocated[v]) throw InvalidInput("policy chose an allocated station");
      state.allocated[v] = 1;
    }
    const double c = realized_cost(inst, r.driver, v);
    run.decisions.push_back(v);
    run.cost.push_back(c);
    run.valuation[r.platform] += c;
    state.decisions.push_back(v);
    ++state.t;
  }
  return run;
}

inline OnlineRun run_online(const RequestSequence& seq, const OnlinePolicy& policy, const Instance& inst,
                            std::uint64_t seed = 0) {
  Rng rng(seed);
  return run_online(seq, policy, inst, rng);
}

struct DelayedPayments {
  std::vector<double> price;
  std::vector<double> payoff;
  std::vector<double> opt_minus;  // full-information optimum without i, in i's weight units
};

// p^i = OPT_{-i} - sum_{j != i} (w_j / w_i) v^j, payoff v^i - p^i. OPT_{-i} is the
// weighted optimum of the other platforms' reports scaled by 1 / w_i.
inline DelayedPayments delayed_payments(const OnlineRun& run, const RequestSequence& seq, const Instance& inst,
                                        std::span<const double> weights = {}) {
  const int n = inst.num_platforms();
  std::vector<double> w(n, 1.0);
  if (!weights.empty()) {
    if (static_cast<int>(weights.size()) != n) throw InvalidInput("one weight per platform required");
    for (double x : weights) {
      if (!(x >= 1.0 - 1e-9)) throw InvalidInput("weights must be >= 1");
    }
    w.assign(weights.begin(), weights.end());
  }
  std::vector<Report> reports;
  for (const auto& r : seq) reports.push_back({r.platform, r.site});
  DelayedPayments out;
  out.price.assign(n, 0.0);
  out.payoff.assign(n, 0.0);
  out.opt_minus.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    std::vector<double> scaled(n);
    for (int j = 0; j < n; ++j) scaled[j] = w[j] / w[i];
    out.opt_minus[i] = min_assignment_cost(build_problem(inst, reports, scaled, i));
    double others = 0.0;
    for (int j = 0; j < n; ++j) {
      if (j != i) others += scaled[j] * run.valuation[j];
    }
    out.price[i] = out.opt_minus[i] - others;
    out.payoff[i] = run.valuation[i] - out.price[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Data-driven policy

inline constexpr const char* kPolicySchema = "fcsa-policy/1";
inline constexpr std::size_t kDefaultSupportCap = 40;

// Probabilities p[theta][t][v] over stations and v0 (last column), for the
// (theta, t) pairs seen in training. Unseen pairs fall back to greedy.
struct PolicyParameters {
  std::vector<Site> support;
  int horizon = 0;  // T + 1
  int num_stations = 0;
  double alpha = 1.0;
  std::vector<double> occurrence;  // n(theta, t), flattened [theta][t]
  std::vector<double> prob;        // flattened [theta][t][v], v in 0..num_stations

  std::size_t pair(int theta, int t) const {
    return static_cast<std::size_t>(theta) * static_cast<std::size_t>(horizon) + static_cast<std::size_t>(t);
  }
  std::span<const double> row(int theta, int t) const {
    const std::size_t w = static_cast<std::size_t>(num_stations) + 1;
    return std::span<const double>(prob).subspan(pair(theta, t) * w, w);
  }
  bool seen(int theta, int t) const { return occurrence[pair(theta, t)] > 0.0; }
};

inline int nearest_support(const PolicyParameters& params, Point p) {
  int best = 0;
  double bd = kInfinity;
  for (std::size_t s = 0; s < params.support.size(); ++s) {
    const double d = euclidean(p, params.support[s].position);
    if (d < bd) {
      bd = d;
      best = static_cast<int>(s);
    }
  }
  return best;
}

// A training sequence lists support indices in request order.
using TrainingSequence = std::vector<int>;

inline double sequence_optimum(const Instance& inst, const std::vector<Site>& support, const TrainingSequence& seq) {
  std::vector<Report> reports;
  for (int s : seq) reports.push_back({0, support.at(static_cast<std::size_t>(s))});
  return min_assignment_cost(build_problem(inst, reports));
}

struct TrainingProgram {
  LinearProgram lp;
  int alpha_var = -1;
  std::vector<int> var;          // flattened [theta][t][v], -1 where no variable
  std::vector<double> optimum;   // OPT(I_l) per training sequence
};

// min alpha s.t. expected cost of each training sequence <= alpha * OPT(I_l),
// each seen (theta, t) row is a distribution, and each real station receives at
// most one driver in expectation. v0 has no capacity row.
inline TrainingProgram build_training_program(const Instance& inst, const std::vector<Site>& support,
                                              const std::vector<TrainingSequence>& sequences, int horizon,
                                              std::vector<double>& occurrence) {
  const int nt = static_cast<int>(support.size());
  const int ns = inst.num_stations();
  const std::size_t width = static_cast<std::size_t>(ns) + 1;
  occurrence.assign(static_cast<std::size_t>(nt) * horizon, 0.0);
  const double share = 1.0 / static_cast<double>(sequences.size());
  for (const auto& seq : sequences) {
    if (static_cast<int>(seq.size()) != horizon) throw InvalidInput("training sequences must all have the horizon length");
    for (int t = 0; t < horizon; ++t) {
      if (seq[t] < 0 || seq[t] >= nt) throw InvalidInput("training sequence references unknown support location");
      occurrence[static_cast<std::size_t>(seq[t]) * horizon + t] += share;
    }
  }

  TrainingProgram tp;
  tp.alpha_var = tp.lp.add_variable(1.0, kInfinity, 1.0, "alpha");
  tp.var.assign(occurrence.size() * width, -1);
  std::vector<std::vector<Term>> capacity(ns);
  for (int th = 0; th < nt; ++th) {
    const Site& site = support[th];
    for (int t = 0; t < horizon; ++t) {
      const double n = occurrence[static_cast<std::size_t>(th) * horizon + t];
      if (n <= 0.0) continue;
      std::vector<Term> simplex;
      for (int v = 0; v <= ns; ++v) {
        if (v < ns && site.distance[v] > inst.search_radius_m()) continue;
        const std::string name = "p_" + std::to_string(th) + "_" + std::to_string(t) + "_" +
                                 (v == ns ? std::string("v0") : std::to_string(v));
        // p <= 1 already follows from the distribution row.
        const int x = tp.lp.add_variable(0.0, kInfinity, 0.0, name);
        tp.var[(static_cast<std::size_t>(th) * horizon + t) * width + v] = x;
        simplex.push_back({x, 1.0});
        if (v < ns) capacity[v].push_back({x, n});
      }
      tp.lp.add_constraint(simplex, Relation::kEqual, 1.0, "dist_" + std::to_string(th) + "_" + std::to_string(t));
    }
  }
  tp.optimum.resize(sequences.size());
  for (std::size_t l = 0; l < sequences.size(); ++l) {
    std::vector<Term> row;
    for (int t = 0; t < horizon; ++t) {
      const int th = sequences[l][t];
      const Site& site = support[th];
      for (int v = 0; v <= ns; ++v) {
        const int x = tp.var[(static_cast<std::size_t>(th) * horizon + t) * width + v];
        if (x < 0) continue;
        row.push_back({x, v == ns ? inst.penalty_min() : site.travel_time[v]});
      }
    }
    tp.optimum[l] = sequence_optimum(inst, support, sequences[l]);
    row.push_back({tp.alpha_var, -tp.optimum[l]});
    tp.lp.add_constraint(row, Relation::kLessEqual, 0.0, "quality_" + std::to_string(l));
  }
  for (int v = 0; v < ns; ++v) {
    if (!capacity[v].empty()) tp.lp.add_constraint(capacity[v], Relation::kLessEqual, 1.0, "cap_" + std::to_string(v));
  }
  return tp;
}

inline PolicyParameters train_data_driven(const Instance& inst, const std::vector<Site>& support,
                                          const std::vector<TrainingSequence>& sequences, int horizon) {
  if (sequences.empty()) throw InvalidInput("no training sequences");
  if (support.empty()) throw InvalidInput("empty support set");
  if (horizon <= 0) throw InvalidInput("horizon must be positive");
  for (const auto& s : support) {
    if (static_cast<int>(s.travel_time.size()) != inst.num_stations() ||
        static_cast<int>(s.distance.size()) != inst.num_stations()) {
      throw InvalidInput("support site does not cover every station");
    }
  }
  PolicyParameters params;
  params.support = support;
  params.horizon = horizon;
  params.num_stations = inst.num_stations();
  auto tp = build_training_program(inst, support, sequences, horizon, params.occurrence);
  auto res = solve_lp(tp.lp);
  // Every seen pair can put all its mass on v0, so the program is always feasible.
  if (res.status != LpStatus::kOptimal) throw Error("policy training LP did not solve to optimality");
  params.alpha = res.x[tp.alpha_var];

  // The optimal face is usually large (alpha = 1 is often reachable in many
  // ways). Among the alpha-optimal policies pick one with the lowest mean
  // ratio of expected cost to OPT(I_l) over the training sequences.
  const std::size_t width = static_cast<std::size_t>(params.num_stations) + 1;
  std::vector<double> cost(tp.lp.num_variables(), 0.0);
  for (std::size_t l = 0; l < sequences.size(); ++l) {
    const double scale = 1.0 / (static_cast<double>(sequences.size()) * std::max(tp.optimum[l], 1.0));
    for (int t = 0; t < horizon; ++t) {
      const int th = sequences[l][t];
      for (std::size_t v = 0; v < width; ++v) {
        const int x = tp.var[(static_cast<std::size_t>(th) * horizon + t) * width + v];
        if (x < 0) continue;
        const double c = v == width - 1 ? inst.penalty_min() : support[th].travel_time[v];
        cost[x] += scale * c;
      }
    }
  }
  for (int x = 0; x < tp.lp.num_variables(); ++x) tp.lp.set_cost(x, cost[x]);
  tp.lp.set_bounds(tp.alpha_var, 1.0, params.alpha);
  const auto refined = solve_lp(tp.lp);
  if (refined.status == LpStatus::kOptimal) res = refined;
  params.prob.assign(tp.var.size(), 0.0);
  for (std::size_t pr = 0; pr < params.occurrence.size(); ++pr) {
    if (params.occurrence[pr] <= 0.0) continue;
    double total = 0.0;
    for (std::size_t v = 0; v < width; ++v) {
      const int x = tp.var[pr * width + v];
      if (x >= 0) params.prob[pr * width + v] = std::max(0.0, res.x[x]);
      total += params.prob[pr * width + v];
    }
    for (std::size_t v = 0; v < width; ++v) params.prob[pr * width + v] /= total;
  }
  return params;
}

// Expected cost of a training sequence under the trained probabilities.
inline double expected_sequence_cost(const Instance& inst, const PolicyParameters& params,
                                     const TrainingSequence& seq) {
  double total = 0.0;
  for (int t = 0; t < static_cast<int>(seq.size()); ++t) {
    const auto p = params.row(seq[t], t);
    const Site& site = params.support[seq[t]];
    for (int v = 0; v <= params.num_stations; ++v) {
      total += p[v] * (v == params.num_stations ? inst.penalty_min() : site.travel_time[v]);
    }
  }
  return total;
}

// Zeroes allocated stations, renormalizes over the free real stations and
// samples. The v0 column only absorbs overflow in training; at run time v0 is
// reached through the greedy fallback when the pair was never seen or no mass
// is left on free stations.
inline int sample_data_driven(const Instance& inst, const PolicyParameters& params, const Request& r,
                              const OnlineState& state, Rng& rng) {
  const int th = nearest_support(params, r.site.position);
  const int t = state.t;
  if (t >= params.horizon || !params.seen(th, t)) return greedy_choice(inst, r.site, state.allocated);
  const auto p = params.row(th, t);
  const int ns = params.num_stations;
  double mass = 0.0;
  for (int v = 0; v < ns; ++v) {
    if (!state.allocated[v]) mass += p[v];
  }
  if (mass < 1e-12) return greedy_choice(inst, r.site, state.allocated);
  double u = rng.uniform() * mass;
  int last = kNoStation;
  for (int v = 0; v < ns; ++v) {
    if (state.allocated[v] || p[v] <= 0.0) continue;
    last = v;
    u -= p[v];
    if (u < 0.0) return last;
  }
  return last;
}

// Renormalized distribution p' over the stations (v0 entry always 0) used by
// the sampler; empty when the sampler would fall back to greedy.
inline std::vector<double> renormalized(const PolicyParameters& params, int theta, int t,
                                        std::span<const char> allocated) {
  if (t >= params.horizon || !params.seen(theta, t)) return {};
  const auto p = params.row(theta, t);
  const int ns = params.num_stations;
  std::vector<double> out(p.begin(), p.end());
  out[ns] = 0.0;
  double mass = 0.0;
  for (int v = 0; v < ns; ++v) {
    if (allocated[v]) out[v] = 0.0;
    mass += out[v];
  }
  if (mass < 1e-12) return {};
  for (double& x : out) x /= mass;
  return out;
}

inline OnlinePolicy data_driven_policy(const Instance& inst, const PolicyParameters& params) {
  return [&inst, &params](const Request& r, const OnlineState& s, Rng& rng) {
    return sample_data_driven(inst, params, r, s, rng);
  };
}

inline nlohmann::json policy_to_json(const PolicyParameters& params) {
  nlohmann::json j;
  j["schema"] = kPolicySchema;
  j["horizon"] = params.horizon;
  j["num_stations"] = params.num_stations;
  j["alpha"] = params.alpha;
  j["support"] = nlohmann::json::array();
  for (const auto& s : params.support) {
    j["support"].push_back({{"x", s.position.x}, {"y", s.position.y}, {"travel_time", s.travel_time},
                            {"distance", s.distance}});
  }
  j["occurrence"] = params.occurrence;
  j["probabilities"] = params.prob;
  return j;
}

inline PolicyParameters policy_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema") != kPolicySchema) throw InvalidInput("unsupported policy schema " + j["schema"].dump());
    PolicyParameters p;
    p.horizon = j.at("horizon").get<int>();
    p.num_stations = j.at("num_stations").get<int>();
    p.alpha = j.at("alpha").get<double>();
    for (const auto& s : j.at("support")) {
      p.support.push_back({{s.at("x").get<double>(), s.at("y").get<double>()},
                           s.at("travel_time").get<std::vector<double>>(),
                           s.at("distance").get<std::vector<double>>()});
    }
    p.occurrence = j.at("occurrence").get<std::vector<double>>();
    p.prob = j.at("probabilities").get<std::vector<double>>();
    const std::size_t pairs = p.support.size() * static_cast<std::size_t>(p.horizon);
    if (p.horizon <= 0 || p.occurrence.size() != pairs ||
        p.prob.size() != pairs * (static_cast<std::size_t>(p.num_stations) + 1)) {
      throw InvalidInput("policy tensor sizes disagree with support and horizon");
    }
    for (const auto& s : p.support) {
      if (static_cast<int>(s.travel_time.size()) != p.num_stations || s.distance.size() != s.travel_time.size()) {
        throw InvalidInput("policy support site has wrong station count");
      }
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed policy: ") + e.what());
  }
}

inline void save_policy(const PolicyParameters& p, const std::string& path) {
  write_text_file(path, policy_to_json(p).dump() + "\n");
}

inline PolicyParameters load_policy(const std::string& path) {
  try {
    return policy_from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Incentives

struct RegretEstimate {
  double mean = 0.0;  // E[truthful payoff] - E[misreport payoff]
  double std_error = 0.0;
  int replications = 0;
};

// Builds a policy for one realized (reported) sequence.
using PolicyFactory = std::function<OnlinePolicy(const RequestSequence&)>;

// Monte-Carlo estimate over random request orders. The liar's unreported
// drivers pay the penalty; phantom requests cost nothing.
inline RegretEstimate expected_misreport_regret(const Instance& inst, const PolicyFactory& make_policy,
                                                const Misreport& lie, int replications, std::uint64_t seed) {
  const int i = inst.check_platform(lie.platform);
  struct Entry {
    int driver;
    int platform;
    Site site;
  };
  auto entries = [&](const Misreport& m) {
    std::vector<Entry> e;
    for (int k = 0; k < inst.num_drivers(); ++k) {
      if (inst.owner(k) != i) e.push_back({k, inst.owner(k), inst.site_of_driver(k)});
    }
    for (std::size_t r = 0; r < m.reported.size(); ++r) e.push_back({m.true_driver[r], i, m.reported[r].site});
    return e;
  };
  const auto truthful = entries(identity_misreport(inst, i));
  const auto lying = entries(lie);
  int unreported = static_cast<int>(inst.drivers_of(i).size());
  for (int k : lie.true_driver) {
    if (k >= 0) --unreported;
  }

  auto payoff = [&](const std::vector<Entry>& es, std::uint64_t rep_seed, int missing) {
    Rng rng(rep_seed);
    std::vector<int> order(es.size());
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);
    RequestSequence seq;
    for (std::size_t t = 0; t < order.size(); ++t) {
      const Entry& e = es[order[t]];
      seq.push_back({static_cast<int>(t), e.driver, e.platform, e.site, 0.0});
    }
    auto run = run_online(seq, make_policy(seq), inst, rng);
    run.valuation[i] += missing * inst.penalty_min();
    return delayed_payments(run, seq, inst).payoff[i];
  };

  RegretEstimate est;
  est.replications = replications;
  double sum = 0.0, sum_sq = 0.0;
  for (int r = 0; r < replications; ++r) {
    const std::uint64_t s = Rng::derive(seed, static_cast<std::uint64_t>(r));
    const double diff = payoff(truthful, s, 0) - payoff(lying, s, unreported);
    sum += diff;
    sum_sq += diff * diff;
  }
  if (replications > 0) {
    est.mean = sum / replications;
    if (replications > 1) {
      const double var = std::max(0.0, (sum_sq - sum * sum / replications) / (replications - 1));
      est.std_error = std::sqrt(var / replications);
    }
  }
  return est;
}

}  // namespace fcsa
