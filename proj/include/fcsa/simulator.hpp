#pragma once

#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fcsa/assignment.hpp"
#include "fcsa/core.hpp"
#include "fcsa/game.hpp"
#include "fcsa/parallel.hpp"
#include "fcsa/scenario.hpp"
#include "fcsa/vcg_offline.hpp"
#include "fcsa/vcg_online.hpp"
#include "json.hpp"

namespace fcsa {

// What every driver ended up with in one run of one setting.
struct DriverOutcome {
  int station = kNoStation;
  double travel = 0.0;  // travel time to the station, 0 on v0
  double cost = 0.0;    // including any penalty
  bool success = false;
};

// Metrics of one run of one setting.
struct RunMetrics {
  double social_cost = 0.0;
  std::vector<double> payoff;  // per platform, prices included where charged
  std::vector<double> normalized_payoff;
  std::vector<double> price;
  std::optional<double> search_time;  // mean travel of drivers sent to a real station
  double success_rate = 0.0;
};

// Success = a real station that the driver actually obtained. Prices are added
// to the drivers' costs to form payoffs; pass an empty span for no prices.
inline RunMetrics compute_metrics(const Instance& inst, const std::vector<DriverOutcome>& drivers,
                                  std::span<const double> price = {}) {
  const int n = inst.num_platforms();
  RunMetrics m;
  m.payoff.assign(n, 0.0);
  m.price.assign(n, 0.0);
  if (!price.empty()) m.price.assign(price.begin(), price.end());
  double travel = 0.0;
  int sent = 0, ok = 0;
  for (int k = 0; k < static_cast<int>(drivers.size()); ++k) {
    const auto& d = drivers[k];
    m.social_cost += d.cost;
    m.payoff[inst.owner(k)] += d.cost;
    if (d.station != kNoStation) {
      travel += d.travel;
      ++sent;
    }
    if (d.success) ++ok;
  }
  for (int i = 0; i < n; ++i) {
    m.payoff[i] -= m.price[i];
    const auto size = inst.drivers_of(i).size();
    m.normalized_payoff.push_back(size ? m.payoff[i] / static_cast<double>(size) : 0.0);
  }
  if (sent > 0) m.search_time = travel / sent;
  m.success_rate = drivers.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(drivers.size());
  return m;
}

// Outcomes of a (possibly conflicting) target vector under the game's conflict rule.
inline std::vector<DriverOutcome> conflict_outcomes(const Instance& inst, std::span<const int> target,
                                                    ConflictScope scope) {
  const auto cost = conflict_costs(inst, target, scope);
  std::vector<DriverOutcome> out(inst.num_drivers());
  for (int k = 0; k < inst.num_drivers(); ++k) {
    out[k].station = target[k];
    out[k].cost = cost[k];
    if (target[k] != kNoStation) {
      out[k].travel = inst.travel_time(k, target[k]);
      out[k].success = cost[k] == out[k].travel;
    }
  }
  return out;
}

inline std::vector<DriverOutcome> allocation_outcomes(const Instance& inst, std::span<const int> target) {
  std::vector<DriverOutcome> out(inst.num_drivers());
  for (int k = 0; k < inst.num_drivers(); ++k) {
    out[k].station = target[k];
    out[k].cost = realized_cost(inst, k, target[k]);
    if (target[k] != kNoStation) {
      out[k].travel = inst.travel_time(k, target[k]);
      out[k].success = inst.reachable(k, target[k]);
    }
  }
  return out;
}

struct OfflineComparison {
  RunMetrics greed, self, vcg;
};

inline OfflineComparison run_offline_experiment(const Instance& inst) {
  OfflineComparison c;
  c.greed = compute_metrics(inst, conflict_outcomes(inst, greedy_profile(inst).target, ConflictScope::kAllDrivers));
  c.self = compute_metrics(inst, conflict_outcomes(inst, selfish_profile(inst).target, ConflictScope::kCrossPlatform));
  const auto vcg = vcg_outcome(inst);
  c.vcg = compute_metrics(inst, allocation_outcomes(inst, vcg.allocation), vcg.price);
  return c;
}

// ---------------------------------------------------------------------------
// Uncoordinated online play with stale availability

enum class Uncoordinated { kGreed, kSelf };

// Requests are decided in order at their timestamps, each for the requester
// alone. A station shows as taken `latency_min` after its first occupant
// arrives; under SELF a platform also knows its own earlier assignments. The
// earliest arrival at a station gets it (lower driver index on exact ties);
// later arrivals pay the penalty on top.
inline std::vector<DriverOutcome> simulate_uncoordinated(const Instance& inst, const RequestSequence& seq,
                                                         Uncoordinated mode, double latency_min) {
  if (!(latency_min >= 0.0)) throw InvalidInput("latency must be non-negative");
  const int ns = inst.num_stations();
  const int nd = inst.num_drivers();
  std::vector<int> target(nd, kNoStation);
  std::vector<double> arrival(nd, kInfinity);
  std::vector<char> requested(nd, 0);
  // Earliest arrival committed to each station so far.
  std::vector<double> first_arrival(ns, kInfinity);
  for (const auto& r : seq) {
    const int k = r.driver;
    inst.check_driver(k);
    const int i = inst.owner(k);
    std::vector<char> taken(ns, 0);
    for (int v = 0; v < ns; ++v) taken[v] = first_arrival[v] + latency_min <= r.time_min;
    if (mode == Uncoordinated::kSelf) {
      for (int j = 0; j < nd; ++j) {
        if (requested[j] && inst.owner(j) == i && target[j] != kNoStation) taken[target[j]] = 1;
      }
    }
    // Both modes pick the cheapest station believed free; they differ only in
    // what the requester's platform knows.
    const int v = greedy_choice(inst, inst.site_of_driver(k), taken);
    requested[k] = 1;
    target[k] = v;
    if (v != kNoStation) {
      arrival[k] = r.time_min + inst.travel_time(k, v);
      first_arrival[v] = std::min(first_arrival[v], arrival[k]);
    }
  }
  std::vector<int> winner(ns, -1);
  for (int k = 0; k < nd; ++k) {
    const int v = target[k];
    if (v == kNoStation) continue;
    if (winner[v] < 0 || arrival[k] < arrival[winner[v]] || (arrival[k] == arrival[winner[v]] && k < winner[v])) {
      winner[v] = k;
    }
  }
  std::vector<DriverOutcome> out(nd);
  for (int k = 0; k < nd; ++k) {
    const int v = target[k];
    out[k].station = v;
    if (v == kNoStation) {
      out[k].cost = inst.penalty_min();
      continue;
    }
    out[k].travel = inst.travel_time(k, v);
    out[k].success = winner[v] == k;
    out[k].cost = out[k].travel + (out[k].success ? 0.0 : inst.penalty_min());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation and reports

inline constexpr const char* kReportSchema = "fcsa-report/1";

struct Stat {
  double mean = 0.0;
  double std = 0.0;
  long count = 0;
};

// One metric of one setting, optionally per platform.
struct MetricRow {
  std::string setting;
  std::string metric;
  std::string platform;  // empty for system-wide metrics
  Stat stat;

  friend bool operator==(const MetricRow& a, const MetricRow& b) {
    return a.setting == b.setting && a.metric == b.metric && a.platform == b.platform &&
           a.stat.mean == b.stat.mean && a.stat.std == b.stat.std && a.stat.count == b.stat.count;
  }
};

struct ExperimentReport {
  std::string id;
  std::vector<MetricRow> rows;

  const MetricRow* find(const std::string& setting, const std::string& metric,
                        const std::string& platform = "") const {
    for (const auto& r : rows) {
      if (r.setting == setting && r.metric == metric && r.platform == platform) return &r;
    }
    return nullptr;
  }
};

// Mean and sample standard deviation, accumulated in a fixed order.
class Accumulator {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  Stat stat() const { return {mean_, n_ > 1 ? std::sqrt(m2_ / static_cast<double>(n_ - 1)) : 0.0, n_}; }

 private:
  long n_ = 0;
  double mean_ = 0.0, m2_ = 0.0;
};

// Rows for a list of per-run metrics of one setting.
inline void append_rows(ExperimentReport& rep, const std::string& setting, const Instance& inst,
                        const std::vector<RunMetrics>& runs) {
  Accumulator social, search, success;
  const int n = inst.num_platforms();
  std::vector<Accumulator> payoff(n), normalized(n), price(n);
  for (const auto& m : runs) {
    social.add(m.social_cost);
    if (m.search_time) search.add(*m.search_time);
    success.add(m.success_rate);
    for (int i = 0; i < n; ++i) {
      payoff[i].add(m.payoff[i]);
      normalized[i].add(m.normalized_payoff[i]);
      price[i].add(m.price[i]);
    }
  }
  rep.rows.push_back({setting, "social_cost", "", social.stat()});
  rep.rows.push_back({setting, "search_time", "", search.stat()});
  rep.rows.push_back({setting, "success_rate", "", success.stat()});
  for (int i = 0; i < n; ++i) {
    const auto& name = inst.platforms()[i];
    rep.rows.push_back({setting, "payoff", name, payoff[i].stat()});
    rep.rows.push_back({setting, "normalized_payoff", name, normalized[i].stat()});
    rep.rows.push_back({setting, "price", name, price[i].stat()});
  }
}

// Relative social-cost deviation of `setting` against `base`: (op - base) / base.
inline void append_deviation(ExperimentReport& rep, const std::string& setting, const std::string& base) {
  const auto* op = rep.find(setting, "social_cost");
  const auto* ref = rep.find(base, "social_cost");
  if (!op || !ref || ref->stat.mean == 0.0) return;
  rep.rows.push_back({setting, "deviation_vs_" + base, "", {(op->stat.mean - ref->stat.mean) / ref->stat.mean, 0.0, 1}});
}

inline ExperimentReport offline_report(const Instance& inst, const std::string& id = "offline") {
  const auto c = run_offline_experiment(inst);
  ExperimentReport rep{id, {}};
  append_rows(rep, "GREED", inst, {c.greed});
  append_rows(rep, "SELF", inst, {c.self});
  append_rows(rep, "VCG", inst, {c.vcg});
  return rep;
}

struct OnlineOptions {
  int replications = 500;
  double request_gap_min = 1.5;
  double latency_min = 3.0;
  std::uint64_t seed = 1;
  bool resample_positions = true;
  unsigned threads = 1;
};

struct OnlineRunSet {
  std::vector<RunMetrics> greed, self, vcg_greedy, vcg_dd, off;
};

// Per replication: fresh driver positions in the departure disc (when the
// instance has one) and a fresh request order, shared by every setting.
inline OnlineRunSet run_online_replications(const Instance& inst, const PolicyParameters* policy,
                                            const OnlineOptions& opt) {
  if (opt.replications < 0) throw InvalidInput("replications must be non-negative");
  const auto reps = static_cast<std::size_t>(opt.replications);
  OnlineRunSet set;
  set.greed.resize(reps);
  set.self.resize(reps);
  set.vcg_greedy.resize(reps);
  set.off.resize(reps);
  if (policy) set.vcg_dd.resize(reps);
  parallel_for(reps, opt.threads, [&](std::size_t r) {
    Rng rng(Rng::derive(opt.seed, r));
    const Instance world =
        opt.resample_positions && inst.departure_area() ? resample_positions(inst, rng) : inst;
    std::vector<int> order(world.num_drivers());
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);
    const auto seq = make_sequence(world, order, opt.request_gap_min);
    set.greed[r] = compute_metrics(world, simulate_uncoordinated(world, seq, Uncoordinated::kGreed, opt.latency_min));
    set.self[r] = compute_metrics(world, simulate_uncoordinated(world, seq, Uncoordinated::kSelf, opt.latency_min));
    auto coordinated = [&](const OnlinePolicy& pol) {
      const auto run = run_online(seq, pol, world, rng);
      const auto pay = delayed_payments(run, seq, world);
      std::vector<int> target(world.num_drivers(), kNoStation);
      for (const auto& q : seq) target[q.driver] = run.decisions[q.index];
      return compute_metrics(world, allocation_outcomes(world, target), pay.price);
    };
    set.vcg_greedy[r] = coordinated(greedy_policy(world));
    if (policy) set.vcg_dd[r] = coordinated(data_driven_policy(world, *policy));
    const auto best = social_choice(world);
    set.off[r] = compute_metrics(world, allocation_outcomes(world, best.target), vcg_outcome(world).price);
  });
  return set;
}

inline ExperimentReport online_report(const Instance& inst, const PolicyParameters* policy, const OnlineOptions& opt,
                                      const std::string& id = "online") {
  const auto set = run_online_replications(inst, policy, opt);
  ExperimentReport rep{id, {}};
  append_rows(rep, "GREED", inst, set.greed);
  append_rows(rep, "SELF", inst, set.self);
  append_rows(rep, "VCG-greedy", inst, set.vcg_greedy);
  if (policy) append_rows(rep, "VCG-dd", inst, set.vcg_dd);
  append_rows(rep, "OFF", inst, set.off);
  if (policy) {
    for (const char* s : {"SELF", "GREED", "VCG-greedy"}) append_deviation(rep, s, "VCG-dd");
  }
  return rep;
}

// Six significant digits, as written to every report.
inline std::string format_g6(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

inline double round_g6(double x) { return std::stod(format_g6(x)); }

inline std::string report_to_csv(const ExperimentReport& rep) {
  std::string out = "experiment,setting,metric,platform,mean,std,count\n";
  for (const auto& r : rep.rows) {
    out += rep.id + "," + r.setting + "," + r.metric + "," + r.platform + "," + format_g6(r.stat.mean) + "," +
           format_g6(r.stat.std) + "," + std::to_string(r.stat.count) + "\n";
  }
  return out;
}

inline nlohmann::json report_to_json(const ExperimentReport& rep) {
  nlohmann::json j;
  j["schema"] = kReportSchema;
  j["experiment"] = rep.id;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rep.rows) {
    j["rows"].push_back({{"setting", r.setting},
                         {"metric", r.metric},
                         {"platform", r.platform},
                         {"mean", round_g6(r.stat.mean)},
                         {"std", round_g6(r.stat.std)},
                         {"count", r.stat.count}});
  }
  return j;
}

inline ExperimentReport report_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema") != kReportSchema) throw InvalidInput("unsupported report schema");
    ExperimentReport rep{j.at("experiment").get<std::string>(), {}};
    for (const auto& r : j.at("rows")) {
      rep.rows.push_back({r.at("setting").get<std::string>(), r.at("metric").get<std::string>(),
                          r.at("platform").get<std::string>(),
                          {r.at("mean").get<double>(), r.at("std").get<double>(), r.at("count").get<long>()}});
    }
    return rep;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed report: ") + e.what());
  }
}

// Writes <outdir>/<id>/{report.csv, report.json, config.json}.
inline std::filesystem::path write_report(const ExperimentReport& rep, const std::filesystem::path& outdir,
                                          const nlohmann::json& config = nlohmann::json::object()) {
  const auto dir = outdir / rep.id;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InvalidInput("cannot create " + dir.string() + ": " + ec.message());
  write_text_file((dir / "report.csv").string(), report_to_csv(rep));
  write_text_file((dir / "report.json").string(), report_to_json(rep).dump(2) + "\n");
  write_text_file((dir / "config.json").string(), config.dump(2) + "\n");
  return dir;
}

}  // namespace fcsa
