#pragma once

#include <cctype>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "fcsa/core.hpp"
#include "fcsa/instance_io.hpp"
#include "fcsa/vcg_online.hpp"
#include "json.hpp"

namespace fcsa {

struct Box {
  double x0 = 0.0, y0 = 0.0, x1 = 4000.0, y1 = 4000.0;
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  int n_stations = 20;
  int n_drivers = 8;
  double departure_radius_m = 700.0;
  double search_radius_m = 2000.0;
  double penalty_min = kDefaultPenaltyMin;
  std::vector<std::string> platforms{"A", "B", "C"};
  std::vector<double> shares{1.0 / 3, 1.0 / 3, 1.0 / 3};
  Box area;
  double speed_m_per_min = kDefaultSpeedMPerMin;
  double request_gap_min = 1.5;
  double status_latency_min = 3.0;

  void validate() const {
    if (platforms.empty()) throw InvalidInput("at least one platform required");
    if (shares.size() != platforms.size()) throw InvalidInput("one share per platform required");
    double total = 0.0;
    for (double s : shares) {
      if (!(s >= 0.0)) throw InvalidInput("shares must be non-negative");
      total += s;
    }
    if (std::abs(total - 1.0) > 1e-6) throw InvalidInput("shares must sum to 1");
    if (n_drivers < static_cast<int>(platforms.size())) throw InvalidInput("need at least one driver per platform");
    if (n_stations < 1) throw InvalidInput("need at least one station");
    if (!(departure_radius_m > 0 && search_radius_m > 0)) throw InvalidInput("radii must be positive");
    if (!(speed_m_per_min > 0)) throw InvalidInput("speed must be positive");
    if (!(penalty_min > 0)) throw InvalidInput("penalty must be positive");
    if (!(area.x1 > area.x0 && area.y1 > area.y0)) throw InvalidInput("area box is empty");
    if (!(request_gap_min >= 0 && status_latency_min >= 0)) throw InvalidInput("times must be non-negative");
  }
};

// Driver distribution scenarios: one platform with 20 % of demand, one with
// 50 %, or an even split.
inline std::vector<double> shares_for(const std::string& name) {
  if (name == "SMALL") return {0.4, 0.4, 0.2};
  if (name == "BIG") return {0.25, 0.25, 0.5};
  if (name == "ALL") return {1.0 / 3, 1.0 / 3, 1.0 / 3};
  throw InvalidInput("unknown distribution scenario '" + name + "'");
}

inline nlohmann::json config_to_json(const ScenarioConfig& c) {
  return {{"seed", c.seed},
          {"n_stations", c.n_stations},
          {"n_drivers", c.n_drivers},
          {"departure_radius_m", c.departure_radius_m},
          {"search_radius_m", c.search_radius_m},
          {"penalty_min", c.penalty_min},
          {"platforms", c.platforms},
          {"shares", c.shares},
          {"area", {c.area.x0, c.area.y0, c.area.x1, c.area.y1}},
          {"speed_m_per_min", c.speed_m_per_min},
          {"request_gap_min", c.request_gap_min},
          {"status_latency_min", c.status_latency_min}};
}

inline ScenarioConfig config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"seed", "n_stations", "n_drivers", "departure_radius_m",
                                           "search_radius_m", "penalty_min", "platforms", "shares",
                                           "scenario", "area", "speed_m_per_min", "request_gap_min",
                                           "status_latency_min"};
  ScenarioConfig c;
  try {
    if (!j.is_object()) throw InvalidInput("scenario config must be an object");
    for (const auto& [key, _] : j.items()) {
      if (!known.count(key)) throw InvalidInput("unknown scenario key '" + key + "'");
    }
    c.seed = j.value("seed", c.seed);
    c.n_stations = j.value("n_stations", c.n_stations);
    c.n_drivers = j.value("n_drivers", c.n_drivers);
    c.departure_radius_m = j.value("departure_radius_m", c.departure_radius_m);
    c.search_radius_m = j.value("search_radius_m", c.search_radius_m);
    c.penalty_min = j.value("penalty_min", c.penalty_min);
    c.platforms = j.value("platforms", c.platforms);
    if (j.contains("scenario")) c.shares = shares_for(j["scenario"].get<std::string>());
    c.shares = j.value("shares", c.shares);
    if (j.contains("area")) {
      const auto a = j["area"].get<std::vector<double>>();
      if (a.size() != 4) throw InvalidInput("area must be [x0, y0, x1, y1]");
      c.area = {a[0], a[1], a[2], a[3]};
    }
    c.speed_m_per_min = j.value("speed_m_per_min", c.speed_m_per_min);
    c.request_gap_min = j.value("request_gap_min", c.request_gap_min);
    c.status_latency_min = j.value("status_latency_min", c.status_latency_min);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed scenario config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// Drops a trailing comment that is not inside a string.
inline std::string strip_comment(const std::string& s) {
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_string = !in_string;
    if (s[i] == '#' && !in_string) return s.substr(0, i);
  }
  return s;
}

inline nlohmann::json toml_value(const std::string& raw, int line) {
  const std::string v = trim(raw);
  auto fail = [&]() -> nlohmann::json {
    throw InvalidInput("line " + std::to_string(line) + ": cannot parse value '" + v + "'");
  };
  if (v.empty()) return fail();
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') return fail();
    return v.substr(1, v.size() - 2);
  }
  if (v.front() == '[') {
    if (v.back() != ']') return fail();
    nlohmann::json arr = nlohmann::json::array();
    std::string item;
    bool in_string = false;
    const std::string body = v.substr(1, v.size() - 2);
    for (char ch : body) {
      if (ch == '"') in_string = !in_string;
      if (ch == ',' && !in_string) {
        if (!trim(item).empty()) arr.push_back(toml_value(item, line));
        item.clear();
      } else {
        item += ch;
      }
    }
    if (!trim(item).empty()) arr.push_back(toml_value(item, line));
    return arr;
  }
  if (v == "true") return true;
  if (v == "false") return false;
  std::string num;
  for (char ch : v) {
    if (ch != '_') num += ch;
  }
  try {
    std::size_t used = 0;
    if (num.find_first_of(".eE") == std::string::npos) {
      const long long x = std::stoll(num, &used);
      if (used == num.size()) return x;
    } else {
      const double x = std::stod(num, &used);
      if (used == num.size()) return x;
    }
  } catch (const std::exception&) {
  }
  return fail();
}

}  // namespace detail

// Flat TOML: `key = value` lines with strings, numbers, booleans and one-line
// arrays. Tables are not supported.
inline nlohmann::json parse_flat_toml(const std::string& text) {
  nlohmann::json out = nlohmann::json::object();
  std::istringstream in(text);
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    const std::string s = detail::trim(detail::strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') throw InvalidInput("line " + std::to_string(no) + ": tables are not supported");
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw InvalidInput("line " + std::to_string(no) + ": expected key = value");
    const std::string key = detail::trim(s.substr(0, eq));
    if (key.empty()) throw InvalidInput("line " + std::to_string(no) + ": empty key");
    if (out.contains(key)) throw InvalidInput("line " + std::to_string(no) + ": duplicate key '" + key + "'");
    out[key] = detail::toml_value(s.substr(eq + 1), no);
  }
  return out;
}

// JSON when the file is a JSON object, flat TOML otherwise.
inline ScenarioConfig load_config(const std::string& path) {
  const std::string text = read_text_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return config_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& e) {
      throw InvalidInput(path + ": " + e.what());
    }
  }
  return config_from_json(parse_flat_toml(text));
}

// Integer counts summing to n, each floor(share * n) plus one for the largest
// remainders (lower index first on equal remainders).
inline std::vector<int> largest_remainder_counts(std::span<const double> shares, int n) {
  std::vector<int> counts(shares.size());
  std::vector<std::pair<double, std::size_t>> rem;
  int assigned = 0;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    const double exact = shares[i] * n;
    // Round-off guard so that e.g. 0.25 * 8 is exactly 2.
    counts[i] = static_cast<int>(std::floor(exact + 1e-9));
    assigned += counts[i];
    rem.push_back({exact - counts[i], i});
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < n; ++r, ++assigned) ++counts[rem[r % rem.size()].second];
  return counts;
}

namespace detail {

inline Instance populate(const ScenarioConfig& cfg, std::vector<Station> stations, const Box& a, Rng& rng) {
  const Disc area{{rng.uniform(a.x0, a.x1), rng.uniform(a.y0, a.y1)}, cfg.departure_radius_m};
  const auto counts = largest_remainder_counts(cfg.shares, cfg.n_drivers);
  std::vector<int> owners;
  for (std::size_t i = 0; i < counts.size(); ++i) owners.insert(owners.end(), counts[i], static_cast<int>(i));
  shuffle(owners, rng);
  std::vector<Driver> drivers;
  for (int k = 0; k < cfg.n_drivers; ++k) {
    drivers.push_back({k + 1, owners[k], uniform_in_disc(area.center, area.radius_m, rng)});
  }
  return Instance::euclidean(cfg.platforms, std::move(stations), std::move(drivers), cfg.search_radius_m,
                             cfg.penalty_min, cfg.speed_m_per_min, area);
}

}  // namespace detail

inline Instance generate_instance(const ScenarioConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const Box& a = cfg.area;
  std::vector<Station> stations;
  for (int v = 0; v < cfg.n_stations; ++v) {
    stations.push_back({v + 1, {rng.uniform(a.x0, a.x1), rng.uniform(a.y0, a.y1)}});
  }
  return detail::populate(cfg, std::move(stations), a, rng);
}

// Same, with given (projected) stations; the departure disc is centered
// uniformly in their bounding box and n_stations is ignored.
inline Instance generate_instance(const ScenarioConfig& cfg, std::vector<Station> stations) {
  cfg.validate();
  if (stations.empty()) throw InvalidInput("no stations given");
  Box box{kInfinity, kInfinity, -kInfinity, -kInfinity};
  for (const auto& st : stations) {
    box.x0 = std::min(box.x0, st.position.x);
    box.y0 = std::min(box.y0, st.position.y);
    box.x1 = std::max(box.x1, st.position.x);
    box.y1 = std::max(box.y1, st.position.y);
  }
  Rng rng(cfg.seed);
  return detail::populate(cfg, std::move(stations), box, rng);
}

// Uniformly random request order, one request every gap_min minutes.
inline RequestSequence sample_request_sequence(const Instance& inst, double gap_min, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> order(inst.num_drivers());
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng);
  return make_sequence(inst, order, gap_min);
}

// Same instance with every driver re-drawn uniformly in the departure disc.
inline Instance resample_positions(const Instance& inst, Rng& rng) {
  const auto& area = inst.departure_area();
  if (!area) throw InvalidInput("instance has no departure area to resample from");
  std::vector<Driver> drivers = inst.drivers();
  for (auto& d : drivers) d.position = uniform_in_disc(area->center, area->radius_m, rng);
  return inst.with_drivers(std::move(drivers));
}

struct Discretization {
  std::vector<Point> centers;
  std::vector<int> snap;  // input point -> center index

  int nearest(Point p) const {
    int best = 0;
    double bd = kInfinity;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      const double d = euclidean(p, centers[c]);
      if (d < bd) {
        bd = d;
        best = static_cast<int>(c);
      }
    }
    return best;
  }
};

// At most `cap` representatives: the distinct points themselves when few
// enough, otherwise k-means (k-means++ seeding, Lloyd iterations).
inline Discretization discretize_locations(std::span<const Point> points, std::size_t cap = kDefaultSupportCap,
                                           std::uint64_t seed = 1) {
  if (cap == 0) throw InvalidInput("support cap must be positive");
  Discretization d;
  for (const Point& p : points) {
    if (std::find(d.centers.begin(), d.centers.end(), p) == d.centers.end()) d.centers.push_back(p);
    if (d.centers.size() > cap) break;
  }
  if (d.centers.size() > cap) {
    Rng rng(seed);
    d.centers.clear();
    d.centers.push_back(points[rng.index(points.size())]);
    std::vector<double> dist2(points.size(), kInfinity);
    while (d.centers.size() < cap) {
      double total = 0.0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        const double e = euclidean(points[i], d.centers.back());
        dist2[i] = std::min(dist2[i], e * e);
        total += dist2[i];
      }
      if (total <= 0.0) break;
      double u = rng.uniform() * total;
      std::size_t pick = points.size() - 1;
      for (std::size_t i = 0; i < points.size(); ++i) {
        u -= dist2[i];
        if (u < 0.0) {
          pick = i;
          break;
        }
      }
      d.centers.push_back(points[pick]);
    }
    std::vector<int> label(points.size(), -1);
    for (int iter = 0; iter < 100; ++iter) {
      bool changed = false;
      for (std::size_t i = 0; i < points.size(); ++i) {
        const int c = d.nearest(points[i]);
        if (c != label[i]) {
          label[i] = c;
          changed = true;
        }
      }
      if (!changed) break;
      std::vector<Point> sum(d.centers.size());
      std::vector<int> count(d.centers.size(), 0);
      for (std::size_t i = 0; i < points.size(); ++i) {
        sum[label[i]].x += points[i].x;
        sum[label[i]].y += points[i].y;
        ++count[label[i]];
      }
      for (std::size_t c = 0; c < d.centers.size(); ++c) {
        if (count[c] > 0) d.centers[c] = {sum[c].x / count[c], sum[c].y / count[c]};
      }
    }
  }
  for (const Point& p : points) d.snap.push_back(d.nearest(p));
  return d;
}

struct TrainingSet {
  std::vector<Site> support;
  std::vector<TrainingSequence> sequences;
  int horizon = 0;
};

// Historical request sequences drawn from the instance's departure disc, with
// locations snapped to at most `cap` representatives.
inline TrainingSet sample_training_set(const Instance& inst, int num_sequences, std::uint64_t seed,
                                       std::size_t cap = kDefaultSupportCap) {
  const auto& area = inst.departure_area();
  if (!area) throw InvalidInput("training needs an instance with a departure area");
  Rng rng(seed);
  const int horizon = inst.num_drivers();
  std::vector<Point> pts;
  for (int l = 0; l < num_sequences; ++l) {
    for (int t = 0; t < horizon; ++t) pts.push_back(uniform_in_disc(area->center, area->radius_m, rng));
  }
  const auto disc = discretize_locations(pts, cap, Rng::derive(seed, 1));
  TrainingSet ts;
  ts.horizon = horizon;
  for (const Point& c : disc.centers) ts.support.push_back(inst.site_at(c));
  for (int l = 0; l < num_sequences; ++l) {
    ts.sequences.emplace_back(disc.snap.begin() + static_cast<long>(l) * horizon,
                              disc.snap.begin() + static_cast<long>(l + 1) * horizon);
  }
  return ts;
}

// Training data from stored realizations: the first `horizon` drivers of each
// instance, in driver order, form one sequence. All instances must share the
// reference's stations.
inline TrainingSet training_set_from_instances(const Instance& ref, const std::vector<Instance>& history,
                                               int horizon, std::uint64_t seed = 1,
                                               std::size_t cap = kDefaultSupportCap) {
  if (history.empty()) throw InvalidInput("no historical instances");
  if (horizon <= 0) throw InvalidInput("horizon must be positive");
  std::vector<Point> pts;
  for (const auto& h : history) {
    if (h.num_stations() != ref.num_stations()) throw InvalidInput("historical instance has different stations");
    for (int v = 0; v < h.num_stations(); ++v) {
      if (h.stations()[v].position.x != ref.stations()[v].position.x ||
          h.stations()[v].position.y != ref.stations()[v].position.y) {
        throw InvalidInput("historical instance has different stations");
      }
    }
    if (h.num_drivers() < horizon) throw InvalidInput("historical instance shorter than the horizon");
    for (int t = 0; t < horizon; ++t) pts.push_back(h.drivers()[t].position);
  }
  const auto disc = discretize_locations(pts, cap, seed);
  TrainingSet ts;
  ts.horizon = horizon;
  for (const Point& c : disc.centers) ts.support.push_back(ref.site_at(c));
  for (std::size_t l = 0; l < history.size(); ++l) {
    ts.sequences.emplace_back(disc.snap.begin() + static_cast<long>(l) * horizon,
                              disc.snap.begin() + static_cast<long>(l + 1) * horizon);
  }
  return ts;
}

enum class StationFormat { kCsv, kGeoJson };

namespace detail {

// Equirectangular projection around the centroid, in meters.
inline std::vector<Station> project_stations(const std::vector<std::pair<int, std::pair<double, double>>>& raw) {
  constexpr double kEarthRadiusM = 6371000.0;
  std::vector<Station> out;
  if (raw.empty()) return out;
  double lon0 = 0.0, lat0 = 0.0;
  for (const auto& [id, ll] : raw) {
    lon0 += ll.first;
    lat0 += ll.second;
  }
  lon0 /= static_cast<double>(raw.size());
  lat0 /= static_cast<double>(raw.size());
  const double rad = std::numbers::pi / 180.0;
  std::set<int> ids;
  for (const auto& [id, ll] : raw) {
    if (!ids.insert(id).second) throw InvalidInput("duplicate station id " + std::to_string(id));
    out.push_back({id, {kEarthRadiusM * (ll.first - lon0) * rad * std::cos(lat0 * rad),
                        kEarthRadiusM * (ll.second - lat0) * rad}});
  }
  return out;
}

}  // namespace detail

inline std::vector<Station> parse_stations(const std::string& text, StationFormat format) {
  std::vector<std::pair<int, std::pair<double, double>>> raw;
  auto check_ll = [](double lon, double lat, const std::string& where) {
    if (!(lon >= -180 && lon <= 180 && lat >= -90 && lat <= 90)) {
      throw InvalidInput(where + ": coordinates out of range");
    }
  };
  if (format == StationFormat::kCsv) {
    std::istringstream in(text);
    std::string line;
    int no = 0;
    bool header = true;
    while (std::getline(in, line)) {
      ++no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (detail::trim(line).empty()) continue;
      if (header) {
        header = false;
        if (detail::trim(line) != "id,lon,lat") throw InvalidInput("line 1: expected header id,lon,lat");
        continue;
      }
      std::vector<std::string> cells;
      std::string cell;
      std::istringstream ls(line);
      while (std::getline(ls, cell, ',')) cells.push_back(detail::trim(cell));
      const std::string where = "line " + std::to_string(no);
      if (cells.size() != 3) throw InvalidInput(where + ": expected 3 fields");
      try {
        std::size_t u1 = 0, u2 = 0, u3 = 0;
        const int id = std::stoi(cells[0], &u1);
        const double lon = std::stod(cells[1], &u2);
        const double lat = std::stod(cells[2], &u3);
        if (u1 != cells[0].size() || u2 != cells[1].size() || u3 != cells[2].size()) throw std::invalid_argument("");
        check_ll(lon, lat, where);
        raw.push_back({id, {lon, lat}});
      } catch (const std::logic_error&) {
        throw InvalidInput(where + ": malformed number");
      }
    }
  } else {
    try {
      const auto j = nlohmann::json::parse(text);
      if (j.at("type") != "FeatureCollection") throw InvalidInput("GeoJSON root must be a FeatureCollection");
      int index = 0;
      for (const auto& f : j.at("features")) {
        const std::string where = "feature " + std::to_string(index++);
        const auto& g = f.at("geometry");
        if (g.at("type") != "Point") throw InvalidInput(where + ": geometry must be a Point");
        const auto c = g.at("coordinates").get<std::vector<double>>();
        if (c.size() < 2) throw InvalidInput(where + ": point needs lon and lat");
        check_ll(c[0], c[1], where);
        raw.push_back({f.at("properties").at("id").get<int>(), {c[0], c[1]}});
      }
    } catch (const nlohmann::json::exception& e) {
      throw InvalidInput(std::string("malformed GeoJSON: ") + e.what());
    }
  }
  return detail::project_stations(raw);
}

inline std::vector<Station> load_stations(const std::string& path, StationFormat format) {
  return parse_stations(read_text_file(path), format);
}

}  // namespace fcsa
