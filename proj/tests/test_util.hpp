#pragma once

#include <string>
#include <vector>

#include "fcsa/core.hpp"
#include "fcsa/instance_io.hpp"

namespace fcsa_test {

// Instance from an explicit travel-time matrix. Distances are t * 500 m so a
// radius of `radius_min` minutes maps to the search radius.
inline fcsa::Instance matrix_instance(int platforms, const std::vector<int>& owners,
                                      const std::vector<std::vector<double>>& t,
                                      double penalty = 120.0, double radius_min = 1e3) {
  std::vector<std::string> names;
  for (int i = 0; i < platforms; ++i) names.push_back("p" + std::to_string(i + 1));
  const std::size_t ns = t.empty() ? 0 : t[0].size();
  std::vector<fcsa::Station> stations;
  for (std::size_t v = 0; v < ns; ++v) stations.push_back({static_cast<int>(v + 1), {}});
  std::vector<fcsa::Driver> drivers;
  fcsa::Matrix<double> tt(owners.size(), ns), dd(owners.size(), ns);
  for (std::size_t k = 0; k < owners.size(); ++k) {
    drivers.push_back({static_cast<int>(k + 1), owners[k], {}});
    for (std::size_t v = 0; v < ns; ++v) {
      tt(k, v) = t[k][v];
      dd(k, v) = t[k][v] * 500.0;
    }
  }
  return fcsa::Instance::with_matrices(names, stations, drivers, tt, dd, radius_min * 500.0, penalty);
}

inline fcsa::Instance fixture_instance(const std::string& name) {
  return fcsa::load_instance(std::string(FCSA_FIXTURES) + "/" + name);
}

// Uniform random Euclidean instance on a square; every platform owns a driver.
inline fcsa::Instance random_instance(fcsa::Rng& rng, int platforms, int drivers, int stations,
                                      double side_m = 6000.0, double radius_m = 3000.0) {
  std::vector<std::string> names;
  for (int i = 0; i < platforms; ++i) names.push_back("p" + std::to_string(i + 1));
  std::vector<fcsa::Station> st;
  for (int v = 0; v < stations; ++v) st.push_back({v + 1, {rng.uniform(0, side_m), rng.uniform(0, side_m)}});
  std::vector<fcsa::Driver> dr;
  for (int k = 0; k < drivers; ++k) {
    const int owner = k < platforms ? k : static_cast<int>(rng.index(static_cast<std::size_t>(platforms)));
    dr.push_back({k + 1, owner, {rng.uniform(0, side_m), rng.uniform(0, side_m)}});
  }
  return fcsa::Instance::euclidean(names, st, dr, radius_m);
}

}  // namespace fcsa_test
