#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "fcsa/core.hpp"
#include "json.hpp"

namespace fcsa {

inline constexpr const char* kInstanceSchema = "fcsa-instance/1";

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path);
  out << text;
  if (!out) throw InvalidInput("write failed for " + path);
}

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix<double>& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

inline Matrix<double> matrix_from_json(const nlohmann::json& j, std::size_t rows, std::size_t cols,
                                       const char* what) {
  if (!j.is_array() || j.size() != rows) {
    throw InvalidInput(std::string(what) + " must have one row per driver");
  }
  Matrix<double> m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& row = j[r];
    if (!row.is_array() || row.size() != cols) {
      throw InvalidInput(std::string(what) + " row " + std::to_string(r) + " has wrong length");
    }
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = row[c].get<double>();
  }
  return m;
}

}  // namespace detail

inline nlohmann::json instance_to_json(const Instance& inst) {
  nlohmann::json j;
  j["schema"] = kInstanceSchema;
  j["platforms"] = inst.platforms();
  j["stations"] = nlohmann::json::array();
  for (const auto& s : inst.stations()) {
    j["stations"].push_back({{"id", s.id}, {"x", s.position.x}, {"y", s.position.y}});
  }
  j["drivers"] = nlohmann::json::array();
  for (const auto& d : inst.drivers()) {
    j["drivers"].push_back({{"id", d.id},
                            {"owner", inst.platforms()[d.owner]},
                            {"x", d.position.x},
                            {"y", d.position.y}});
  }
  j["search_radius_m"] = inst.search_radius_m();
  j["penalty_min"] = inst.penalty_min();
  if (inst.speed_m_per_min()) {
    j["speed_m_per_min"] = *inst.speed_m_per_min();
  } else {
    j["travel_time"] = detail::matrix_to_json(inst.travel_times());
    j["distance"] = detail::matrix_to_json(inst.distances());
  }
  if (const auto& area = inst.departure_area()) {
    j["departure_area"] = {{"x", area->center.x}, {"y", area->center.y}, {"radius_m", area->radius_m}};
  }
  return j;
}

// Accepts either a speed (straight-line travel model) or explicit matrices.
// Driver owners may be given as platform names or indices.
inline Instance instance_from_json(const nlohmann::json& j) {
  try {
    if (j.contains("schema") && j["schema"] != kInstanceSchema) {
      throw InvalidInput("unsupported instance schema " + j["schema"].dump());
    }
    std::vector<std::string> platforms = j.at("platforms").get<std::vector<std::string>>();
    std::vector<Station> stations;
    for (const auto& s : j.at("stations")) {
      stations.push_back({s.at("id").get<int>(), {s.at("x").get<double>(), s.at("y").get<double>()}});
    }
    std::vector<Driver> drivers;
    for (const auto& d : j.at("drivers")) {
      int owner = -1;
      const auto& o = d.at("owner");
      if (o.is_string()) {
        const auto name = o.get<std::string>();
        for (std::size_t i = 0; i < platforms.size(); ++i) {
          if (platforms[i] == name) owner = static_cast<int>(i);
        }
        if (owner < 0) throw InvalidInput("driver owner '" + name + "' is not a platform");
      } else {
        owner = o.get<int>();
      }
      drivers.push_back({d.at("id").get<int>(), owner, {d.at("x").get<double>(), d.at("y").get<double>()}});
    }
    const double radius = j.at("search_radius_m").get<double>();
    const double penalty = j.value("penalty_min", kDefaultPenaltyMin);
    std::optional<Disc> area;
    if (j.contains("departure_area")) {
      const auto& a = j["departure_area"];
      area = Disc{{a.at("x").get<double>(), a.at("y").get<double>()}, a.at("radius_m").get<double>()};
    }
    if (j.contains("travel_time")) {
      const std::size_t nd = drivers.size();
      const std::size_t ns = stations.size();
      auto tt = detail::matrix_from_json(j["travel_time"], nd, ns, "travel_time");
      Matrix<double> dist;
      if (j.contains("distance")) {
        dist = detail::matrix_from_json(j["distance"], nd, ns, "distance");
      } else {
        // Without distances, only the travel time decides reachability.
        dist = Matrix<double>(nd, ns, 0.0);
      }
      return Instance::with_matrices(std::move(platforms), std::move(stations), std::move(drivers),
                                     std::move(tt), std::move(dist), radius, penalty, area);
    }
    return Instance::euclidean(std::move(platforms), std::move(stations), std::move(drivers), radius,
                               penalty, j.value("speed_m_per_min", kDefaultSpeedMPerMin), area);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed instance: ") + e.what());
  }
}

inline Instance load_instance(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput(path + ": " + e.what());
  }
  return instance_from_json(j);
}

inline void save_instance(const Instance& inst, const std::string& path) {
  write_text_file(path, instance_to_json(inst).dump(2) + "\n");
}

}  // namespace fcsa
