#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fcsa/game.hpp"
#include "fcsa/instance_io.hpp"
#include "fcsa/scenario.hpp"
#include "fcsa/simulator.hpp"
#include "fcsa/vcg_offline.hpp"
#include "fcsa/vcg_online.hpp"
#include "json.hpp"

namespace fcsa::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

// Raised for problems with the command line or its files rather than the data.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// "120", "120s", "2m", "1.5h" -> seconds.
inline double parse_duration_s(const std::string& text) {
  if (text.empty()) throw UsageError("empty duration");
  double scale = 1.0;
  std::string num = text;
  switch (text.back()) {
    case 's': num.pop_back(); break;
    case 'm': scale = 60.0; num.pop_back(); break;
    case 'h': scale = 3600.0; num.pop_back(); break;
    default: break;
  }
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(num, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (used == 0 || used != num.size() || !(v >= 0.0)) throw UsageError("bad duration '" + text + "'");
  return v * scale;
}

inline std::vector<double> load_weights(const std::string& path) {
  const auto j = nlohmann::json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw UsageError(path + ": not valid JSON");
  try {
    return (j.is_object() ? j.at("weights") : j).get<std::vector<double>>();
  } catch (const nlohmann::json::exception&) {
    throw UsageError(path + ": expected an array of weights or {\"weights\": [...]}");
  }
}

inline nlohmann::json profile_json(const Instance& inst, const StrategyProfile& s) {
  nlohmann::json out = nlohmann::json::array();
  for (int k = 0; k < inst.num_drivers(); ++k) {
    out.push_back(s.target[k] == kNoStation ? nlohmann::json(nullptr) : nlohmann::json(inst.stations()[s.target[k]].id));
  }
  return out;
}

inline nlohmann::json pne_scan(const Instance& inst, std::size_t cap) {
  const GameAnalysis g(inst, cap);
  nlohmann::json j;
  const auto pne = find_pne(g);
  j["has_pne"] = pne.has_value();
  if (pne) j["pne_profile"] = profile_json(inst, *pne);
  if (const auto cycle = improvement_cycle(g)) {
    j["cycle"] = nlohmann::json::array();
    for (const auto& s : *cycle) j["cycle"].push_back(profile_json(inst, s));
  }
  j["rho_gap"] = rho_gap(g);
  return j;
}

inline nlohmann::json outcome_json(const Instance& inst, const VcgOutcome& o) {
  nlohmann::json alloc = nlohmann::json::array();
  for (int v : o.allocation) alloc.push_back(v == kNoStation ? nlohmann::json(nullptr) : nlohmann::json(inst.stations()[v].id));
  return {{"allocation", alloc}, {"valuation", o.valuation}, {"price", o.price}, {"payoff", o.payoff}, {"pivot", o.pivot}};
}

inline std::string weights_detail_header(int platforms) {
  std::string h = "instance,search_radius_m,category";
  for (int i = 0; i < platforms; ++i) h += ",w" + std::to_string(i + 1);
  for (int i = 0; i < platforms; ++i) h += ",slack" + std::to_string(i + 1);
  return h + "\n";
}

// Per-radius counts per category, one row per radius plus a total.
inline std::string weights_summary_csv(const std::vector<std::pair<double, WeightsCategory>>& results) {
  std::map<double, std::array<int, 4>> by_radius;
  std::array<int, 4> total{};
  for (const auto& [r, c] : results) {
    by_radius[r][static_cast<int>(c)]++;
    total[static_cast<int>(c)]++;
  }
  std::string out = "search_radius_m,vcg_beneficial,weighted_vcg_beneficial,infeasible_weights,not_solved\n";
  auto row = [&](const std::string& label, const std::array<int, 4>& n) {
    out += label;
    for (int x : n) out += "," + std::to_string(x);
    out += "\n";
  };
  for (const auto& [r, n] : by_radius) row(format_g6(r), n);
  row("total", total);
  return out;
}

inline std::vector<std::string> instance_files(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw UsageError(dir + ": no .json instances");
  return files;
}

inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Fleet charging station allocation: games, VCG mechanisms and simulation"};
  app.require_subcommand(1);
  unsigned threads = 1;
  app.add_option("--threads", threads, "Worker threads for replications")->check(CLI::PositiveNumber);

  // gen
  std::string config_path, gen_out, stations_path, stations_format = "csv", scenario;
  std::uint64_t seed = 1;
  bool seed_given = false;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic instance");
  gen->add_option("--config", config_path, "Scenario config (TOML or JSON)")->check(CLI::ExistingFile);
  gen->add_option("--scenario", scenario, "Driver shares: SMALL, BIG or ALL")
      ->check(CLI::IsMember({"SMALL", "BIG", "ALL"}));
  gen->add_option("--stations", stations_path, "Station file (id,lon,lat CSV or GeoJSON)")->check(CLI::ExistingFile);
  gen->add_option("--stations-format", stations_format)->check(CLI::IsMember({"csv", "geojson"}));
  gen->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) { seed = s; seed_given = true; });
  gen->add_option("--out", gen_out, "Instance JSON to write")->required();

  // pne-scan
  std::string instance_path;
  std::size_t cap = kDefaultEnumerationCap;
  auto* pne = app.add_subcommand("pne-scan", "Pure Nash equilibrium and improvement cycle search");
  pne->add_option("--instance", instance_path)->required()->check(CLI::ExistingFile);
  pne->add_option("--cap", cap, "Maximum number of enumerated profiles");

  // solve-offline
  std::string outdir, offline_id, online_id;
  auto* offline = app.add_subcommand("solve-offline", "Compare SELF, GREED and VCG offline");
  offline->add_option("--instance", instance_path)->required()->check(CLI::ExistingFile);
  offline->add_option("--out", outdir, "Write <out>/<id>/report.{csv,json}");
  offline->add_option("--id", offline_id, "Experiment id")->default_val("offline");

  // price
  std::string weights_path;
  auto* price = app.add_subcommand("price", "VCG allocation and prices");
  price->add_option("--instance", instance_path)->required()->check(CLI::ExistingFile);
  price->add_option("--weights", weights_path, "Platform weights JSON")->check(CLI::ExistingFile);

  // weights
  std::vector<std::string> instance_list;
  std::string instances_dir, detail_path;
  double max_weight = kDefaultMaxWeight;
  std::string time_limit = "120s";
  auto* weights = app.add_subcommand("weights", "Diagnose whether (weighted) VCG benefits every platform");
  weights->add_option("--instance", instance_list)->check(CLI::ExistingFile);
  weights->add_option("--instances", instances_dir)->check(CLI::ExistingDirectory);
  weights->add_option("--max-weight", max_weight)->check(CLI::Range(1.0, 1e6));
  weights->add_option("--time-limit", time_limit, "Per instance, e.g. 120s or 2m");
  weights->add_option("--detail", detail_path, "Per-instance CSV to write");

  // train-policy
  std::string policy_out;
  int horizon = 0, sequences = 10;
  std::size_t support_cap = kDefaultSupportCap;
  auto* train = app.add_subcommand("train-policy", "Train the data-driven online policy");
  train->add_option("--instances", instances_dir, "Historical instances, one sequence each")
      ->check(CLI::ExistingDirectory);
  train->add_option("--instance", instance_path, "Sample sequences from this instance's departure disc")
      ->check(CLI::ExistingFile);
  train->add_option("--horizon", horizon, "Requests per sequence (default: drivers per instance)");
  train->add_option("--sequences", sequences, "Sampled sequences with --instance")->check(CLI::PositiveNumber);
  train->add_option("--support-cap", support_cap)->check(CLI::PositiveNumber);
  train->add_option("--seed", seed);
  train->add_option("--out", policy_out)->required();

  // simulate
  std::string policy_path;
  OnlineOptions sim;
  bool fixed_positions = false;
  auto* simulate = app.add_subcommand("simulate", "Online simulation of SELF, GREED and VCG policies");
  simulate->add_option("--instance", instance_path)->required()->check(CLI::ExistingFile);
  simulate->add_option("--policy", policy_path, "Trained policy for VCG-dd")->check(CLI::ExistingFile);
  simulate->add_option("--replications", sim.replications)->check(CLI::NonNegativeNumber);
  simulate->add_option("--dt", sim.request_gap_min, "Minutes between requests")->check(CLI::NonNegativeNumber);
  simulate->add_option("--latency", sim.latency_min, "Status latency in minutes")->check(CLI::NonNegativeNumber);
  simulate->add_option("--seed", sim.seed);
  simulate->add_flag("--fixed-positions", fixed_positions, "Keep the instance's driver positions");
  simulate->add_option("--out", outdir)->required();
  simulate->add_option("--id", online_id, "Experiment id")->default_val("online");

  // report
  std::string report_in, report_format = "csv";
  auto* report = app.add_subcommand("report", "Print a stored report");
  report->add_option("--input", report_in, "report.json or its directory")->required()->check(CLI::ExistingPath);
  report->add_option("--format", report_format)->check(CLI::IsMember({"csv", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    // Subcommand help surfaces as a ParseError with exit code 0.
    if (e.get_exit_code() == 0) {
      for (auto* sub : app.get_subcommands()) out << sub->help();
      if (app.get_subcommands().empty()) out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*gen) {
      ScenarioConfig cfg = config_path.empty() ? ScenarioConfig{} : load_config(config_path);
      if (seed_given) cfg.seed = seed;
      if (!scenario.empty()) cfg.shares = shares_for(scenario);
      const Instance inst =
          stations_path.empty()
              ? generate_instance(cfg)
              : generate_instance(cfg, load_stations(stations_path, stations_format == "csv" ? StationFormat::kCsv
                                                                                             : StationFormat::kGeoJson));
      save_instance(inst, gen_out);
    } else if (*pne) {
      out << pne_scan(load_instance(instance_path), cap).dump(2) << "\n";
    } else if (*offline) {
      const auto inst = load_instance(instance_path);
      const auto rep = offline_report(inst, offline_id);
      if (!outdir.empty()) write_report(rep, outdir, {{"command", "solve-offline"}, {"instance", instance_path}});
      out << report_to_csv(rep);
    } else if (*price) {
      const auto inst = load_instance(instance_path);
      if (weights_path.empty()) {
        out << outcome_json(inst, vcg_outcome(inst)).dump(2) << "\n";
      } else {
        const auto w = load_weights(weights_path);
        out << outcome_json(inst, weighted_vcg_outcome(inst, w)).dump(2) << "\n";
      }
    } else if (*weights) {
      if (!instances_dir.empty()) {
        for (auto& f : instance_files(instances_dir)) instance_list.push_back(f);
      }
      if (instance_list.empty()) throw UsageError("weights needs --instance or --instances");
      const double limit = parse_duration_s(time_limit);
      std::vector<std::pair<double, WeightsCategory>> results;
      std::string detail;
      for (const auto& path : instance_list) {
        const auto inst = load_instance(path);
        const auto d = optimize_weights(inst, max_weight, limit);
        results.push_back({inst.search_radius_m(), d.category});
        if (detail.empty()) detail = weights_detail_header(inst.num_platforms());
        detail += std::filesystem::path(path).filename().string() + "," + format_g6(inst.search_radius_m()) + "," +
                  to_string(d.category);
        for (int i = 0; i < inst.num_platforms(); ++i) detail += "," + (d.weights ? format_g6((*d.weights)[i]) : "");
        for (int i = 0; i < inst.num_platforms(); ++i) {
          detail += "," + (i < static_cast<int>(d.slack.size()) ? format_g6(d.slack[i]) : "");
        }
        detail += "\n";
      }
      if (!detail_path.empty()) write_text_file(detail_path, detail);
      out << weights_summary_csv(results);
    } else if (*train) {
      TrainingSet ts;
      Instance ref = [&] {
        if (!instances_dir.empty() && instance_path.empty()) return load_instance(instance_files(instances_dir).front());
        if (instance_path.empty()) throw UsageError("train-policy needs --instances or --instance");
        return load_instance(instance_path);
      }();
      if (!instances_dir.empty()) {
        std::vector<Instance> history;
        for (const auto& f : instance_files(instances_dir)) history.push_back(load_instance(f));
        ts = training_set_from_instances(ref, history, horizon > 0 ? horizon : history.front().num_drivers(), seed,
                                         support_cap);
      } else {
        ts = sample_training_set(ref, sequences, seed, support_cap);
        if (horizon > 0 && horizon != ts.horizon) {
          throw InvalidInput("sampled sequences have one request per driver; --horizon must equal the driver count");
        }
      }
      const auto params = train_data_driven(ref, ts.support, ts.sequences, ts.horizon);
      save_policy(params, policy_out);
      out << "alpha," << format_g6(params.alpha) << "\n";
    } else if (*simulate) {
      const auto inst = load_instance(instance_path);
      std::optional<PolicyParameters> policy;
      if (!policy_path.empty()) {
        policy = load_policy(policy_path);
        if (policy->num_stations != inst.num_stations()) throw InvalidInput("policy was trained for other stations");
      }
      sim.threads = threads;
      sim.resample_positions = !fixed_positions;
      const auto rep = online_report(inst, policy ? &*policy : nullptr, sim, online_id);
      const nlohmann::json config{{"command", "simulate"},
                                  {"instance", instance_path},
                                  {"policy", policy_path},
                                  {"replications", sim.replications},
                                  {"dt", sim.request_gap_min},
                                  {"latency", sim.latency_min},
                                  {"seed", sim.seed},
                                  {"resample_positions", sim.resample_positions}};
      const auto dir = write_report(rep, outdir, config);
      out << (dir / "report.csv").string() << "\n";
    } else if (*report) {
      std::filesystem::path p(report_in);
      if (std::filesystem::is_directory(p)) p /= "report.json";
      const auto j = nlohmann::json::parse(read_text_file(p.string()), nullptr, false);
      if (j.is_discarded()) throw UsageError(p.string() + ": not valid JSON");
      const auto rep = report_from_json(j);
      out << (report_format == "json" ? report_to_json(rep).dump(2) + "\n" : report_to_csv(rep));
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  }
  return kExitOk;
}

}  // namespace fcsa::cli
