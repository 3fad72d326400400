#include <gtest/gtest.h>

#include <algorithm>

#include "fcsa/assignment.hpp"
#include "fcsa/mathprog.hpp"

using namespace fcsa;

namespace {

// Gaussian elimination with partial pivoting; nullopt when singular.
std::optional<std::vector<double>> solve_square(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    if (std::abs(a[piv][col]) < 1e-10) return std::nullopt;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
  return x;
}

// min c.x over {G x <= h}: the optimum of a bounded LP sits at a vertex, so try
// every n-subset of constraints as the active set.
double vertex_enumeration(const std::vector<std::vector<double>>& g, const std::vector<double>& h,
                          const std::vector<double>& c) {
  const std::size_t n = c.size();
  const std::size_t m = g.size();
  double best = kInfinity;
  std::vector<int> pick(m, 0);
  std::fill(pick.begin(), pick.begin() + n, 1);
  std::sort(pick.begin(), pick.end());
  do {
    std::vector<std::vector<double>> a;
    std::vector<double> b;
    for (std::size_t r = 0; r < m; ++r) {
      if (pick[r]) {
        a.push_back(g[r]);
        b.push_back(h[r]);
      }
    }
    auto x = solve_square(a, b);
    if (!x) continue;
    bool ok = true;
    for (std::size_t r = 0; r < m && ok; ++r) {
      double lhs = 0.0;
      for (std::size_t j = 0; j < n; ++j) lhs += g[r][j] * (*x)[j];
      ok = lhs <= h[r] + 1e-8;
    }
    if (!ok) continue;
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += c[j] * (*x)[j];
    best = std::min(best, z);
  } while (std::next_permutation(pick.begin(), pick.end()));
  return best;
}

}  // namespace

TEST(SolveLp, SimpleBounds) {
  LinearProgram lp;
  const int x = lp.add_variable(-kInfinity, kInfinity, 1.0);
  lp.add_constraint({{x, 1.0}}, Relation::kGreaterEqual, 3.0);
  lp.add_constraint({{x, 1.0}}, Relation::kLessEqual, 10.0);
  auto r = solve_lp(lp);
  ASSERT_EQ(r.status, LpStatus::kOptimal);
  EXPECT_NEAR(r.x[x], 3.0, 1e-9);
}

TEST(SolveLp, Infeasible) {
  LinearProgram lp;
  const int x = lp.add_variable(0.0, kInfinity, 0.0);
  lp.add_constraint({{x, 1.0}}, Relation::kLessEqual, -1.0);
  EXPECT_EQ(solve_lp(lp).status, LpStatus::kInfeasible);
}

TEST(SolveLp, Unbounded) {
  LinearProgram lp;
  const int x = lp.add_variable(0.0, kInfinity, -1.0);
  const int y = lp.add_variable(0.0, kInfinity, 0.0);
  lp.add_constraint({{x, 1.0}, {y, -1.0}}, Relation::kLessEqual, 2.0);
  EXPECT_EQ(solve_lp(lp).status, LpStatus::kUnbounded);
}

TEST(SolveLp, EqualitiesFreeAndShiftedVariables) {
  // min x - y s.t. x + y = 4, x in [-2, 5], y <= 3 (no lower bound), free z with z = x - 1.
  LinearProgram lp;
  const int x = lp.add_variable(-2.0, 5.0, 1.0);
  const int y = lp.add_variable(-kInfinity, 3.0, -1.0);
  const int z = lp.add_variable(-kInfinity, kInfinity, 0.0);
  lp.add_constraint({{x, 1.0}, {y, 1.0}}, Relation::kEqual, 4.0);
  lp.add_constraint({{z, 1.0}, {x, -1.0}}, Relation::kEqual, -1.0);
  auto r = solve_lp(lp);
  ASSERT_EQ(r.status, LpStatus::kOptimal);
  EXPECT_NEAR(r.x[x], 1.0, 1e-9);
  EXPECT_NEAR(r.x[y], 3.0, 1e-9);
  EXPECT_NEAR(r.x[z], 0.0, 1e-9);
  EXPECT_NEAR(r.objective, -2.0, 1e-9);
}

TEST(SolveLp, RedundantEqualities) {
  LinearProgram lp;
  const int x = lp.add_variable(0.0, kInfinity, 1.0);
  const int y = lp.add_variable(0.0, kInfinity, 2.0);
  lp.add_constraint({{x, 1.0}, {y, 1.0}}, Relation::kEqual, 2.0);
  lp.add_constraint({{x, 2.0}, {y, 2.0}}, Relation::kEqual, 4.0);
  auto r = solve_lp(lp);
  ASSERT_EQ(r.status, LpStatus::kOptimal);
  EXPECT_NEAR(r.objective, 2.0, 1e-9);
}

TEST(SolveLp, MatchesVertexEnumeration) {
  Rng rng(8);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 6;
    std::vector<std::vector<double>> g;
    std::vector<double> h;
    std::vector<double> c(n);
    for (auto& v : c) v = rng.uniform(-5, 5);
    LinearProgram lp;
    for (int j = 0; j < n; ++j) lp.add_variable(0.0, 8.0, c[j]);
    for (int r = 0; r < 6; ++r) {
      std::vector<double> row(n);
      std::vector<Term> terms;
      for (int j = 0; j < n; ++j) {
        row[j] = rng.uniform(-3, 5);
        terms.push_back({j, row[j]});
      }
      const double rhs = rng.uniform(1, 10);
      g.push_back(row);
      h.push_back(rhs);
      lp.add_constraint(terms, Relation::kLessEqual, rhs);
    }
    for (int j = 0; j < n; ++j) {
      std::vector<double> lo(n, 0.0), hi(n, 0.0);
      lo[j] = -1.0;
      hi[j] = 1.0;
      g.push_back(lo);
      h.push_back(0.0);
      g.push_back(hi);
      h.push_back(8.0);
    }
    auto r = solve_lp(lp);
    ASSERT_EQ(r.status, LpStatus::kOptimal);
    EXPECT_NEAR(r.objective, vertex_enumeration(g, h, c), 1e-6) << "trial " << trial;
    EXPECT_LE(lp.max_violation(r.x), 1e-7);
  }
}

TEST(SolveLp, StrongDuality) {
  Rng rng(12);
  for (int trial = 0; trial < 40; ++trial) {
    const int m = 5, n = 7;
    std::vector<std::vector<double>> a(m, std::vector<double>(n));
    std::vector<double> b(m), c(n);
    for (auto& row : a) {
      for (auto& v : row) v = rng.uniform(0, 4);
    }
    for (auto& v : b) v = rng.uniform(1, 6);
    for (auto& v : c) v = rng.uniform(1, 6);
    // primal: min c.x, A x >= b, x >= 0; dual: max b.y, A^T y <= c, y >= 0.
    LinearProgram primal, dual;
    for (int j = 0; j < n; ++j) primal.add_variable(0.0, kInfinity, c[j]);
    for (int i = 0; i < m; ++i) {
      std::vector<Term> t;
      for (int j = 0; j < n; ++j) t.push_back({j, a[i][j]});
      primal.add_constraint(t, Relation::kGreaterEqual, b[i]);
    }
    for (int i = 0; i < m; ++i) dual.add_variable(0.0, kInfinity, -b[i]);
    for (int j = 0; j < n; ++j) {
      std::vector<Term> t;
      for (int i = 0; i < m; ++i) t.push_back({i, a[i][j]});
      dual.add_constraint(t, Relation::kLessEqual, c[j]);
    }
    auto p = solve_lp(primal);
    auto d = solve_lp(dual);
    ASSERT_EQ(p.status, LpStatus::kOptimal);
    ASSERT_EQ(d.status, LpStatus::kOptimal);
    EXPECT_NEAR(p.objective, -d.objective, 1e-6);
  }
}

TEST(SolveLp, AssignmentPolytopeIsIntegral) {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 5, m = 4;
    AssignmentProblem ap{Matrix<double>(n, m), Matrix<char>(n, m, 1), std::vector<double>(n, 30.0)};
    LinearProgram lp;
    std::vector<std::vector<int>> x(n, std::vector<int>(m + 1));
    for (int k = 0; k < n; ++k) {
      for (int v = 0; v < m; ++v) {
        ap.cost(k, v) = static_cast<double>(1 + rng.index(20));
        x[k][v] = lp.add_variable(0.0, kInfinity, ap.cost(k, v));
      }
      x[k][m] = lp.add_variable(0.0, kInfinity, 30.0);
    }
    for (int k = 0; k < n; ++k) {
      std::vector<Term> t;
      for (int v = 0; v <= m; ++v) t.push_back({x[k][v], 1.0});
      lp.add_constraint(t, Relation::kEqual, 1.0);
    }
    for (int v = 0; v < m; ++v) {
      std::vector<Term> t;
      for (int k = 0; k < n; ++k) t.push_back({x[k][v], 1.0});
      lp.add_constraint(t, Relation::kLessEqual, 1.0);
    }
    auto r = solve_lp(lp);
    ASSERT_EQ(r.status, LpStatus::kOptimal);
    for (double v : r.x) EXPECT_NEAR(v, std::round(v), 1e-9);
    EXPECT_NEAR(r.objective, min_assignment_cost(ap), 1e-9);

    for (int j = 0; j < lp.num_variables(); ++j) lp.set_integer(j);
    for (int k = 0; k < n; ++k) {
      for (int v = 0; v <= m; ++v) lp.set_bounds(x[k][v], 0.0, 1.0);
    }
    auto mip = solve_milp(lp);
    ASSERT_EQ(mip.status, MilpStatus::kOptimal);
    EXPECT_EQ(mip.branchings, 0);
  }
}

TEST(SolveMilp, KnapsackMatchesEnumeration) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> value(3), weight(3);
    for (int j = 0; j < 3; ++j) {
      value[j] = static_cast<double>(1 + rng.index(10));
      weight[j] = static_cast<double>(1 + rng.index(10));
    }
    const double cap = static_cast<double>(5 + rng.index(10));
    LinearProgram lp;
    std::vector<Term> row;
    for (int j = 0; j < 3; ++j) row.push_back({lp.add_binary(-value[j]), weight[j]});
    lp.add_constraint(row, Relation::kLessEqual, cap);
    double best = 0.0;
    for (int mask = 0; mask < 8; ++mask) {
      double v = 0.0, w = 0.0;
      for (int j = 0; j < 3; ++j) {
        if (mask & (1 << j)) {
          v += value[j];
          w += weight[j];
        }
      }
      if (w <= cap) best = std::max(best, v);
    }
    auto r = solve_milp(lp);
    ASSERT_EQ(r.status, MilpStatus::kOptimal);
    EXPECT_NEAR(-r.objective, best, 1e-9);
    for (double x : *r.x) EXPECT_TRUE(x == 0.0 || x == 1.0);
  }
}

TEST(SolveMilp, InfeasibleIntegerSystem) {
  LinearProgram lp;
  const int x = lp.add_binary(0.0);
  lp.add_constraint({{x, 1.0}}, Relation::kGreaterEqual, 0.4);
  lp.add_constraint({{x, 1.0}}, Relation::kLessEqual, 0.6);
  auto r = solve_milp(lp);
  EXPECT_EQ(r.status, MilpStatus::kInfeasible);
  EXPECT_FALSE(r.x.has_value());
}

TEST(SolveMilp, ZeroTimeLimitTimesOut) {
  LinearProgram lp;
  lp.add_binary(-1.0);
  auto r = solve_milp(lp, {0.0, 100});
  EXPECT_EQ(r.status, MilpStatus::kTimedOut);
  EXPECT_FALSE(r.x.has_value());
}

TEST(SolveMilp, NodeLimitStopsSearch) {
  // Fractional relaxation forces branching; one node finds nothing integral.
  LinearProgram lp;
  std::vector<Term> row;
  for (int j = 0; j < 6; ++j) row.push_back({lp.add_binary(-(j + 1.0)), 2.0});
  lp.add_constraint(row, Relation::kLessEqual, 7.0);
  auto full = solve_milp(lp);
  ASSERT_EQ(full.status, MilpStatus::kOptimal);
  auto cut = solve_milp(lp, {60.0, 1});
  EXPECT_EQ(cut.status, MilpStatus::kTimedOut);
}

TEST(SolveMilp, UnboundedRoot) {
  LinearProgram lp;
  const int x = lp.add_variable(0.0, kInfinity, -1.0);
  (void)x;
  EXPECT_EQ(solve_milp(lp).status, MilpStatus::kUnbounded);
}

TEST(McCormick, CornersAreExact) {
  for (double w_fixed : {1.0, 2.5, 10.0}) {
    for (int x_fixed : {0, 1}) {
      for (double sense : {1.0, -1.0}) {
        LinearProgram lp;
        const int w = lp.add_variable(1.0, 10.0, 0.0, "w");
        const int x = lp.add_binary(0.0, "x");
        const int z = mccormick_product(lp, w, x);
        lp.set_cost(z, sense);
        lp.set_bounds(w, w_fixed, w_fixed);
        lp.set_bounds(x, x_fixed, x_fixed);
        auto r = solve_lp(lp);
        ASSERT_EQ(r.status, LpStatus::kOptimal);
        EXPECT_NEAR(r.x[z], w_fixed * x_fixed, 1e-9);
      }
    }
  }
}

TEST(McCormick, RowsHoldOnGrid) {
  LinearProgram lp;
  const int w = lp.add_variable(1.0, 10.0, 0.0, "w");
  const int x = lp.add_binary(0.0, "x");
  const int z = mccormick_product(lp, w, x);
  for (double wv = 1.0; wv <= 10.0; wv += 0.5) {
    for (int xv : {0, 1}) {
      std::vector<double> sol(3);
      sol[w] = wv;
      sol[x] = xv;
      sol[z] = wv * xv;
      EXPECT_LE(lp.max_violation(sol), 1e-12);
      sol[z] = wv * xv + 0.1;
      EXPECT_GT(lp.max_violation(sol), 0.0);
    }
  }
}

TEST(LpFormat, Dump) {
  LinearProgram lp;
  const int x = lp.add_variable(0.0, 4.0, 2.0, "x");
  const int y = lp.add_binary(-1.0, "y");
  lp.add_constraint({{x, 1.0}, {y, -3.0}}, Relation::kGreaterEqual, 1.0, "link");
  const auto text = to_lp_format(lp);
  EXPECT_NE(text.find("Minimize\n obj: 2 x - 1 y"), std::string::npos) << text;
  EXPECT_NE(text.find("link: 1 x - 3 y >= 1"), std::string::npos) << text;
  EXPECT_NE(text.find("General\n y\n"), std::string::npos) << text;
  EXPECT_NE(text.find("End"), std::string::npos);
}

TEST(LinearProgram, RejectsBadInput) {
  LinearProgram lp;
  EXPECT_THROW(lp.add_variable(2.0, 1.0, 0.0), InvalidInput);
  EXPECT_THROW(lp.add_constraint({{3, 1.0}}, Relation::kEqual, 0.0), InvalidInput);
  const int v = lp.add_variable(0.0, kInfinity, 0.0);
  lp.set_integer(v);
  EXPECT_THROW(solve_milp(lp), InvalidInput);
}
