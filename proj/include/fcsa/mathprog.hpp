#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fcsa/common.hpp"

namespace fcsa {

// Tolerances shared by every solver in this header.
inline constexpr double kFeasibilityTol = 1e-7;
inline constexpr double kOptimalityTol = 1e-6;
inline constexpr double kIntegralityTol = 1e-6;
inline constexpr double kPivotTol = 1e-9;
// Dense tableau cells allowed before refusing to solve (~800 MB of doubles).
inline constexpr std::size_t kMaxTableauCells = 100'000'000;

enum class Relation { kLessEqual, kEqual, kGreaterEqual };

struct Term {
  int var = 0;
  double coef = 0.0;
};

struct Constraint {
  std::vector<Term> terms;
  Relation relation = Relation::kLessEqual;
  double rhs = 0.0;
  std::string name;
};

struct Variable {
  double lo = 0.0;
  double hi = kInfinity;
  double cost = 0.0;
  bool integer = false;
  std::string name;
};

// Minimization problem; integrality marks are honoured by solve_milp only.
class LinearProgram {
 public:
  int add_variable(double lo, double hi, double cost, std::string name = {}, bool integer = false) {
    if (std::isnan(lo) || std::isnan(hi) || lo > hi) throw InvalidInput("variable bounds are inconsistent");
    if (!std::isfinite(cost)) throw InvalidInput("objective coefficients must be finite");
    if (name.empty()) name = "x" + std::to_string(vars_.size());
    vars_.push_back({lo, hi, cost, integer, std::move(name)});
    return static_cast<int>(vars_.size()) - 1;
  }

  int add_binary(double cost, std::string name = {}) {
    return add_variable(0.0, 1.0, cost, std::move(name), true);
  }

  int add_constraint(std::vector<Term> terms, Relation rel, double rhs, std::string name = {}) {
    for (const Term& t : terms) {
      if (t.var < 0 || t.var >= num_variables()) throw InvalidInput("constraint references unknown variable");
      if (!std::isfinite(t.coef)) throw InvalidInput("constraint coefficients must be finite");
    }
    if (!std::isfinite(rhs)) throw InvalidInput("constraint right-hand side must be finite");
    if (name.empty()) name = "c" + std::to_string(rows_.size());
    rows_.push_back({std::move(terms), rel, rhs, std::move(name)});
    return static_cast<int>(rows_.size()) - 1;
  }

  void set_integer(int var, bool integer = true) { vars_.at(var).integer = integer; }
  void set_bounds(int var, double lo, double hi) {
    if (lo > hi) throw InvalidInput("variable bounds are inconsistent");
    vars_.at(var).lo = lo;
    vars_.at(var).hi = hi;
  }
  void set_cost(int var, double cost) { vars_.at(var).cost = cost; }

  int num_variables() const { return static_cast<int>(vars_.size()); }
  int num_constraints() const { return static_cast<int>(rows_.size()); }
  const std::vector<Variable>& variables() const { return vars_; }
  const std::vector<Constraint>& constraints() const { return rows_; }

  double objective(const std::vector<double>& x) const {
    double z = 0.0;
    for (std::size_t j = 0; j < vars_.size(); ++j) z += vars_[j].cost * x[j];
    return z;
  }

  // Largest violation of any bound or row.
  double max_violation(const std::vector<double>& x) const {
    double worst = 0.0;
    for (std::size_t j = 0; j < vars_.size(); ++j) {
      worst = std::max({worst, vars_[j].lo - x[j], x[j] - vars_[j].hi});
    }
    for (const auto& row : rows_) {
      double lhs = 0.0;
      for (const Term& t : row.terms) lhs += t.coef * x[t.var];
      const double d = lhs - row.rhs;
      switch (row.relation) {
        case Relation::kLessEqual: worst = std::max(worst, d); break;
        case Relation::kGreaterEqual: worst = std::max(worst, -d); break;
        case Relation::kEqual: worst = std::max(worst, std::abs(d)); break;
      }
    }
    return worst;
  }

 private:
  std::vector<Variable> vars_;
  std::vector<Constraint> rows_;
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded };

struct LpResult {
  LpStatus status = LpStatus::kInfeasible;
  std::vector<double> x;
  double objective = 0.0;
  long pivots = 0;
};

namespace detail {

// Two-phase primal simplex on a dense tableau. Variables are shifted or split so
// that all columns are >= 0; finite upper bounds become explicit rows.
class DenseSimplex {
 public:
  explicit DenseSimplex(const LinearProgram& lp) : lp_(lp) {}

  LpResult solve() {
    build();
    LpResult result;
    // Phase 1: minimize the sum of artificials.
    set_phase1_objective();
    if (!iterate(/*allow_artificial=*/true, result.pivots)) {
      throw Error("simplex: phase 1 reported unbounded");
    }
    const double infeas = -obj_rhs();
    if (infeas > kFeasibilityTol * std::max(1.0, rhs_scale_)) {
      result.status = LpStatus::kInfeasible;
      return result;
    }
    drive_out_artificials(result.pivots);
    set_phase2_objective();
    if (!iterate(/*allow_artificial=*/false, result.pivots)) {
      result.status = LpStatus::kUnbounded;
      return result;
    }
    result.status = LpStatus::kOptimal;
    result.x = extract();
    result.objective = lp_.objective(result.x);
    return result;
  }

 private:
  // How an original variable maps onto nonnegative columns.
  struct Mapping {
    double offset = 0.0;
    int pos = -1;     // column with coefficient +1
    int neg = -1;     // column with coefficient -1
  };

  double& at(std::size_t r, std::size_t c) { return tab_[r * width_ + c]; }
  double at(std::size_t r, std::size_t c) const { return tab_[r * width_ + c]; }
  double obj_rhs() const { return at(m_, ncols_); }

  void build() {
    const auto& vars = lp_.variables();
    map_.resize(vars.size());
    int cols = 0;
    struct UpperRow {
      int col;
      double bound;
    };
    std::vector<UpperRow> upper;
    for (std::size_t j = 0; j < vars.size(); ++j) {
      const Variable& v = vars[j];
      Mapping& mp = map_[j];
      if (std::isfinite(v.lo)) {
        mp.offset = v.lo;
        mp.pos = cols++;
        if (std::isfinite(v.hi)) upper.push_back({mp.pos, v.hi - v.lo});
      } else if (std::isfinite(v.hi)) {
        mp.offset = v.hi;
        mp.neg = cols++;
      } else {
        mp.pos = cols++;
        mp.neg = cols++;
      }
    }
    nstruct_ = cols;

    // Rows as dense coefficient vectors over structural columns.
    struct Row {
      std::vector<std::pair<int, double>> coef;
      Relation rel;
      double rhs;
    };
    std::vector<Row> rows;
    for (const auto& c : lp_.constraints()) {
      Row r{{}, c.relation, c.rhs};
      for (const Term& t : c.terms) {
        const Mapping& mp = map_[t.var];
        r.rhs -= t.coef * mp.offset;
        if (mp.pos >= 0) r.coef.push_back({mp.pos, t.coef});
        if (mp.neg >= 0) r.coef.push_back({mp.neg, -t.coef});
      }
      rows.push_back(std::move(r));
    }
    for (const auto& u : upper) rows.push_back({{{u.col, 1.0}}, Relation::kLessEqual, u.bound});

    m_ = rows.size();
    // Normalize to rhs >= 0, then count slack and artificial columns.
    int slacks = 0, arts = 0;
    for (auto& r : rows) {
      if (r.rhs < 0) {
        r.rhs = -r.rhs;
        for (auto& [c, a] : r.coef) a = -a;
        if (r.rel == Relation::kLessEqual) {
          r.rel = Relation::kGreaterEqual;
        } else if (r.rel == Relation::kGreaterEqual) {
          r.rel = Relation::kLessEqual;
        }
      }
      if (r.rel != Relation::kEqual) ++slacks;
      if (r.rel != Relation::kLessEqual) ++arts;
    }
    first_art_ = nstruct_ + slacks;
    ncols_ = static_cast<std::size_t>(first_art_ + arts);
    width_ = ncols_ + 1;
    if ((m_ + 1) * width_ > kMaxTableauCells) {
      throw Error("LP too large for the dense simplex (" + std::to_string(m_) + " rows x " +
                  std::to_string(ncols_) + " columns)");
    }
    tab_.assign((m_ + 1) * width_, 0.0);
    basis_.assign(m_, -1);
    rhs_scale_ = 1.0;
    int next_slack = nstruct_, next_art = first_art_;
    for (std::size_t i = 0; i < m_; ++i) {
      const Row& r = rows[i];
      for (const auto& [c, a] : r.coef) at(i, c) += a;
      at(i, ncols_) = r.rhs;
      rhs_scale_ = std::max(rhs_scale_, r.rhs);
      switch (r.rel) {
        case Relation::kLessEqual:
          at(i, next_slack) = 1.0;
          basis_[i] = next_slack++;
          break;
        case Relation::kGreaterEqual:
          at(i, next_slack++) = -1.0;
          at(i, next_art) = 1.0;
          basis_[i] = next_art++;
          break;
        case Relation::kEqual:
          at(i, next_art) = 1.0;
          basis_[i] = next_art++;
          break;
      }
    }
  }

  void set_phase1_objective() {
    for (std::size_t c = 0; c <= ncols_; ++c) at(m_, c) = 0.0;
    for (std::size_t c = first_art_; c < ncols_; ++c) at(m_, c) = 1.0;
    price_out();
  }

  void set_phase2_objective() {
    for (std::size_t c = 0; c <= ncols_; ++c) at(m_, c) = 0.0;
    const auto& vars = lp_.variables();
    for (std::size_t j = 0; j < vars.size(); ++j) {
      if (map_[j].pos >= 0) at(m_, map_[j].pos) += vars[j].cost;
      if (map_[j].neg >= 0) at(m_, map_[j].neg) -= vars[j].cost;
    }
    price_out();
  }

  // Make reduced costs of basic columns zero.
  void price_out() {
    for (std::size_t i = 0; i < m_; ++i) {
      const double cb = at(m_, basis_[i]);
      if (cb == 0.0) continue;
      for (std::size_t c = 0; c <= ncols_; ++c) at(m_, c) -= cb * at(i, c);
    }
  }

  void pivot(std::size_t pr, std::size_t pc) {
    const double inv = 1.0 / at(pr, pc);
    nz_.clear();
    for (std::size_t c = 0; c <= ncols_; ++c) {
      double& a = at(pr, c);
      if (a != 0.0) {
        a *= inv;
        nz_.push_back(c);
      }
    }
    at(pr, pc) = 1.0;
    for (std::size_t r = 0; r <= m_; ++r) {
      if (r == pr) continue;
      const double f = at(r, pc);
      if (f == 0.0) continue;
      double* row = &tab_[r * width_];
      const double* src = &tab_[pr * width_];
      for (std::size_t c : nz_) row[c] -= f * src[c];
      row[pc] = 0.0;
    }
    basis_[pr] = static_cast<int>(pc);
  }

  // Returns false when the objective is unbounded below.
  bool iterate(bool allow_artificial, long& pivots) {
    const std::size_t limit_col = allow_artificial ? ncols_ : first_art_;
    const long max_pivots = 50'000 + 50 * static_cast<long>(m_ + ncols_);
    int degenerate_run = 0;
    for (long iter = 0;; ++iter) {
      if (iter > max_pivots) throw Error("simplex: iteration limit reached");
      const bool bland = degenerate_run > 50;
      std::size_t pc = ncols_;
      double best = -kPivotTol;
      for (std::size_t c = 0; c < limit_col; ++c) {
        const double d = at(m_, c);
        if (d < best) {
          pc = c;
          if (bland) break;
          best = d;
        }
      }
      if (pc == ncols_) return true;
      std::size_t pr = m_;
      double ratio = kInfinity;
      for (std::size_t r = 0; r < m_; ++r) {
        const double a = at(r, pc);
        if (a <= kPivotTol) continue;
        const double q = at(r, ncols_) / a;
        if (q < ratio - 1e-12 || (q <= ratio + 1e-12 && pr < m_ && basis_[r] < basis_[pr])) {
          ratio = q;
          pr = r;
        }
      }
      if (pr == m_) return false;
      degenerate_run = ratio <= 1e-12 ? degenerate_run + 1 : 0;
      pivot(pr, pc);
      ++pivots;
      // Clamp tiny negative right-hand sides caused by round-off.
      for (std::size_t r = 0; r < m_; ++r) {
        if (at(r, ncols_) < 0.0 && at(r, ncols_) > -1e-11) at(r, ncols_) = 0.0;
      }
    }
  }

  void drive_out_artificials(long& pivots) {
    for (std::size_t r = 0; r < m_; ++r) {
      if (basis_[r] < first_art_) continue;
      std::size_t best = ncols_;
      double mag = kPivotTol;
      for (std::size_t c = 0; c < static_cast<std::size_t>(first_art_); ++c) {
        if (std::abs(at(r, c)) > mag) {
          mag = std::abs(at(r, c));
          best = c;
        }
      }
      if (best != ncols_) {
        pivot(r, best);
        ++pivots;
      }
      // Otherwise the row is redundant and the artificial stays basic at zero.
    }
  }

  std::vector<double> extract() const {
    std::vector<double> col(ncols_, 0.0);
    for (std::size_t r = 0; r < m_; ++r) col[basis_[r]] = at(r, ncols_);
    const auto& vars = lp_.variables();
    std::vector<double> x(vars.size());
    for (std::size_t j = 0; j < vars.size(); ++j) {
      const Mapping& mp = map_[j];
      double val = mp.offset;
      if (mp.pos >= 0) val += col[mp.pos];
      if (mp.neg >= 0) val -= col[mp.neg];
      x[j] = std::clamp(val, vars[j].lo, vars[j].hi);
    }
    return x;
  }

  const LinearProgram& lp_;
  std::vector<Mapping> map_;
  std::vector<double> tab_;
  std::vector<int> basis_;
  std::vector<std::size_t> nz_;
  std::size_t m_ = 0;
  std::size_t ncols_ = 0;
  std::size_t width_ = 0;
  int nstruct_ = 0;
  int first_art_ = 0;
  double rhs_scale_ = 1.0;
};

}  // namespace detail

inline LpResult solve_lp(const LinearProgram& lp) { return detail::DenseSimplex(lp).solve(); }

enum class MilpStatus { kOptimal, kInfeasible, kUnbounded, kTimedOut };

inline const char* to_string(MilpStatus s) {
  switch (s) {
    case MilpStatus::kOptimal: return "optimal";
    case MilpStatus::kInfeasible: return "infeasible";
    case MilpStatus::kUnbounded: return "unbounded";
    case MilpStatus::kTimedOut: return "timed_out";
  }
  return "?";
}

struct MilpOptions {
  double time_limit_s = 60.0;
  long node_limit = 1'000'000;
};

struct MilpResult {
  MilpStatus status = MilpStatus::kInfeasible;
  std::optional<std::vector<double>> x;  // best integral solution found
  double objective = kInfinity;
  long nodes = 0;
  long branchings = 0;
};

// Depth-first branch and bound on LP relaxations, branching on the most
// fractional integer variable. A zero time limit times out before the root.
inline MilpResult solve_milp(const LinearProgram& mip, const MilpOptions& opt = {}) {
  using Clock = std::chrono::steady_clock;
  const auto deadline =
      Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(opt.time_limit_s));
  for (const auto& v : mip.variables()) {
    if (v.integer && (!std::isfinite(v.lo) || !std::isfinite(v.hi))) {
      throw InvalidInput("integer variables need finite bounds");
    }
  }
  MilpResult res;
  struct Node {
    std::vector<std::pair<double, double>> bounds;
  };
  std::vector<Node> stack;
  {
    Node root;
    for (const auto& v : mip.variables()) root.bounds.push_back({v.lo, v.hi});
    stack.push_back(std::move(root));
  }
  LinearProgram work = mip;
  bool timed_out = false;
  while (!stack.empty()) {
    if (opt.time_limit_s <= 0.0 || Clock::now() >= deadline || res.nodes >= opt.node_limit) {
      timed_out = true;
      break;
    }
    Node node = std::move(stack.back());
    stack.pop_back();
    ++res.nodes;
    for (int j = 0; j < work.num_variables(); ++j) work.set_bounds(j, node.bounds[j].first, node.bounds[j].second);
    const LpResult lp = solve_lp(work);
    if (lp.status == LpStatus::kUnbounded) {
      if (res.nodes == 1) {
        res.status = MilpStatus::kUnbounded;
        return res;
      }
      continue;
    }
    if (lp.status == LpStatus::kInfeasible) continue;
    const double cutoff = res.objective - kOptimalityTol * std::max(1.0, std::abs(res.objective));
    if (res.x && lp.objective >= cutoff) continue;
    int branch_var = -1;
    double most = kIntegralityTol;
    for (int j = 0; j < work.num_variables(); ++j) {
      if (!mip.variables()[j].integer) continue;
      const double frac = std::abs(lp.x[j] - std::round(lp.x[j]));
      if (frac > most) {
        most = frac;
        branch_var = j;
      }
    }
    if (branch_var < 0) {
      std::vector<double> x = lp.x;
      for (int j = 0; j < work.num_variables(); ++j) {
        if (mip.variables()[j].integer) x[j] = std::round(x[j]);
      }
      res.x = std::move(x);
      res.objective = lp.objective;
      continue;
    }
    ++res.branchings;
    const double val = lp.x[branch_var];
    Node down = node, up = node;
    down.bounds[branch_var].second = std::floor(val);
    up.bounds[branch_var].first = std::ceil(val);
    // Explore the nearer rounding first (pushed last).
    if (val - std::floor(val) < 0.5) {
      stack.push_back(std::move(up));
      stack.push_back(std::move(down));
    } else {
      stack.push_back(std::move(down));
      stack.push_back(std::move(up));
    }
  }
  if (timed_out) {
    res.status = MilpStatus::kTimedOut;
  } else {
    res.status = res.x ? MilpStatus::kOptimal : MilpStatus::kInfeasible;
  }
  return res;
}

// z = w * x for binary x and w in [w_lo, w_hi], via the four McCormick rows.
// With x integral the envelope collapses to z = w * x exactly.
inline int mccormick_product(LinearProgram& lp, int w, int x, std::string name = {}) {
  const double lo = lp.variables().at(w).lo;
  const double hi = lp.variables().at(w).hi;
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw InvalidInput("McCormick needs a bounded factor");
  if (name.empty()) name = "z_" + lp.variables()[w].name + "_" + lp.variables()[x].name;
  const int z = lp.add_variable(std::min(0.0, lo), std::max(0.0, hi), 0.0, name);
  lp.add_constraint({{z, 1.0}, {x, -lo}}, Relation::kGreaterEqual, 0.0, name + "_lo");
  lp.add_constraint({{z, 1.0}, {w, -1.0}, {x, -hi}}, Relation::kGreaterEqual, -hi, name + "_wlo");
  lp.add_constraint({{z, 1.0}, {x, -hi}}, Relation::kLessEqual, 0.0, name + "_hi");
  lp.add_constraint({{z, 1.0}, {w, -1.0}, {x, -lo}}, Relation::kLessEqual, -lo, name + "_whi");
  return z;
}

// CPLEX LP file text, for cross-checking with external solvers.
inline std::string to_lp_format(const LinearProgram& lp) {
  std::ostringstream out;
  out.precision(17);
  auto term = [&](double c, const std::string& name, bool first) {
    if (c < 0) {
      out << (first ? "-" : " - ");
    } else if (!first) {
      out << " + ";
    }
    out << std::abs(c) << " " << name;
  };
  const auto& vars = lp.variables();
  out << "Minimize\n obj:";
  bool first = true;
  for (const auto& v : vars) {
    if (v.cost == 0.0) continue;
    out << (first ? " " : "");
    term(v.cost, v.name, first);
    first = false;
  }
  if (first) out << " 0 " << (vars.empty() ? "dummy" : vars[0].name);
  out << "\nSubject To\n";
  for (const auto& c : lp.constraints()) {
    out << " " << c.name << ":";
    bool f = true;
    for (const Term& t : c.terms) {
      out << (f ? " " : "");
      term(t.coef, vars[t.var].name, f);
      f = false;
    }
    if (f) out << " 0 " << (vars.empty() ? "dummy" : vars[0].name);
    out << (c.relation == Relation::kLessEqual ? " <= " : c.relation == Relation::kEqual ? " = " : " >= ")
        << c.rhs << "\n";
  }
  out << "Bounds\n";
  for (const auto& v : vars) {
    if (!std::isfinite(v.lo) && !std::isfinite(v.hi)) {
      out << " " << v.name << " free\n";
    } else {
      out << " ";
      if (std::isfinite(v.lo)) out << v.lo; else out << "-inf";
      out << " <= " << v.name << " <= ";
      if (std::isfinite(v.hi)) out << v.hi; else out << "+inf";
      out << "\n";
    }
  }
  bool any_int = false;
  for (const auto& v : vars) any_int = any_int || v.integer;
  if (any_int) {
    out << "General\n";
    for (const auto& v : vars) {
      if (v.integer) out << " " << v.name << "\n";
    }
  }
  out << "End\n";
  return out.str();
}

}  // namespace fcsa
