// Copyright 2026 The ensrob Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ensrob/milp_core.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace ensrob {

LpProblem lp_from_system(const ConstraintSystem& cs) {
  LpProblem lp;
  lp.num_vars = cs.num_vars();
  lp.lower.reserve(lp.num_vars);
  lp.upper.reserve(lp.num_vars);
  for (const VarInfo& v : cs.vars()) {
    lp.lower.push_back(v.lo);
    lp.upper.push_back(v.hi);
  }
  if (cs.has_objective()) {
    lp.objective.assign(lp.num_vars, 0.0);
    for (const auto& [var, coeff] : cs.objective().terms)
      lp.objective[var.index] += coeff;
  }
  lp.rows.reserve(cs.constraints().size());
  for (const Constraint& c : cs.constraints()) {
    LpRow row;
    row.rel = c.rel;
    row.rhs = -c.expr.constant;
    row.terms.reserve(c.expr.terms.size());
    for (const auto& [var, coeff] : c.expr.terms)
      row.terms.emplace_back(var.index, coeff);
    lp.rows.push_back(std::move(row));
  }
  return lp;
}

namespace {

struct SearchState {
  LpProblem lp;
  std::vector<int> binaries;
  SolveMode mode;
  const ConstraintSystem* cs = nullptr;
  const IncumbentCallback* callback = nullptr;
  std::chrono::steady_clock::time_point deadline;

  MilpDiagnostics diag;
  bool timed_out = false;
  bool stop = false;  // feasibility mode: first solution ends the search

  bool found = false;
  std::vector<double> best;
  double best_obj = -std::numeric_limits<double>::infinity();

  double objective_constant = 0.0;
};

void accept_solution(SearchState& s, const LpResult& res) {
  std::vector<double> solution = res.x;
  for (int b : s.binaries) solution[b] = std::round(solution[b]);
  const double obj = res.objective + s.objective_constant;

  // A claimed-feasible point violating the system is a solver bug, not a
  // recoverable condition.
  if (auto violation = s.cs->audit(solution, kIntegralityTol))
    throw std::logic_error(
        fmt::format("internal solver produced an invalid solution: {}", *violation));

  if (s.mode == SolveMode::Feasibility) {
    s.found = true;
    s.best = std::move(solution);
    s.best_obj = obj;
    s.stop = true;
    if (s.callback && *s.callback) (*s.callback)(s.best, obj);
    return;
  }
  if (!s.found || obj > s.best_obj) {
    s.found = true;
    s.best = std::move(solution);
    s.best_obj = obj;
    if (s.callback && *s.callback) (*s.callback)(s.best, obj);
  }
}

void search(SearchState& s, int depth) {
  if (s.stop || s.timed_out) return;
  if (std::chrono::steady_clock::now() > s.deadline) {
    s.timed_out = true;
    s.diag.exhausted = false;
    return;
  }

  ++s.diag.nodes;
  s.diag.max_depth = std::max(s.diag.max_depth, depth);

  const LpResult res = solve_lp(s.lp);
  s.diag.lp_iterations += res.iterations;

  if (res.status == LpStatus::Infeasible) return;
  if (res.status != LpStatus::Optimal) {
    // Iteration limit, unbounded relaxation, or numerics: this subtree is
    // unresolved, so any global infeasibility claim would be unsound.
    s.diag.exhausted = false;
    return;
  }

  const double node_obj = res.objective + s.objective_constant;
  if (s.mode == SolveMode::Maximize && s.found &&
      node_obj <= s.best_obj + kObjectiveTol)
    return;

  // Most fractional binary, ties by variable order.
  int branch_var = -1;
  double most_frac = kIntegralityTol;
  for (int b : s.binaries) {
    const double frac = std::abs(res.x[b] - std::round(res.x[b]));
    if (frac > most_frac) {
      most_frac = frac;
      branch_var = b;
    }
  }

  if (branch_var < 0) {
    accept_solution(s, res);
    return;
  }

  const double lo = s.lp.lower[branch_var];
  const double hi = s.lp.upper[branch_var];
  const double first = res.x[branch_var] >= 0.5 ? 1.0 : 0.0;
  for (const double value : {first, 1.0 - first}) {
    s.lp.lower[branch_var] = value;
    s.lp.upper[branch_var] = value;
    search(s, depth + 1);
    if (s.stop || s.timed_out) break;
  }
  s.lp.lower[branch_var] = lo;
  s.lp.upper[branch_var] = hi;
}

}  // namespace

MilpVerdict solve_milp(const ConstraintSystem& cs, SolveMode mode,
                       double time_budget_seconds,
                       const IncumbentCallback& on_incumbent) {
  cs.validate();

  SearchState s;
  s.lp = lp_from_system(cs);
  s.mode = mode;
  s.cs = &cs;
  s.callback = &on_incumbent;
  s.deadline = std::chrono::steady_clock::now() +
               std::chrono::microseconds(
                   static_cast<long>(time_budget_seconds * 1e6));
  s.objective_constant = cs.has_objective() ? cs.objective().constant : 0.0;
  if (mode == SolveMode::Maximize && !cs.has_objective())
    throw Error("solve_milp: maximize mode needs an objective");
  for (int i = 0; i < cs.num_vars(); ++i)
    if (cs.vars()[i].is_binary) s.binaries.push_back(i);

  search(s, 0);

  MilpVerdict verdict;
  verdict.diag = s.diag;
  if (s.found && (mode == SolveMode::Feasibility || s.diag.exhausted)) {
    verdict.status = MilpStatus::Feasible;
    verdict.assignment = std::move(s.best);
    verdict.objective = s.best_obj;
    verdict.has_assignment = true;
    return verdict;
  }
  if (!s.found && s.diag.exhausted && !s.timed_out) {
    verdict.status = MilpStatus::Infeasible;
    return verdict;
  }
  verdict.status = MilpStatus::Unknown;
  verdict.reason = s.timed_out ? "timeout" : "iteration-limit";
  if (s.found) {
    verdict.assignment = std::move(s.best);
    verdict.objective = s.best_obj;
    verdict.has_assignment = true;
  }
  return verdict;
}

MatrixGameSolution solve_matrix_game(
    const std::vector<std::vector<double>>& loss_matrix) {
  if (loss_matrix.empty() || loss_matrix[0].empty())
    throw Error("matrix game: empty matrix");
  const int rows = static_cast<int>(loss_matrix.size());
  const int cols = static_cast<int>(loss_matrix[0].size());
  double lo = loss_matrix[0][0], hi = loss_matrix[0][0];
  for (const auto& row : loss_matrix) {
    if (static_cast<int>(row.size()) != cols)
      throw Error("matrix game: ragged matrix");
    for (double v : row) {
      if (!std::isfinite(v)) throw Error("matrix game: non-finite entry");
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }

  // max v  s.t.  sum_i P_i M[i][c] >= v for every column c, P a distribution.
  LpProblem lp;
  lp.num_vars = rows + 1;
  lp.lower.assign(rows, 0.0);
  lp.upper.assign(rows, 1.0);
  lp.lower.push_back(lo);
  lp.upper.push_back(hi);
  lp.objective.assign(rows, 0.0);
  lp.objective.push_back(1.0);
  for (int c = 0; c < cols; ++c) {
    LpRow row;
    row.rel = Rel::Ge;
    row.rhs = 0.0;
    for (int i = 0; i < rows; ++i)
      if (loss_matrix[i][c] != 0.0) row.terms.emplace_back(i, loss_matrix[i][c]);
    row.terms.emplace_back(rows, -1.0);
    lp.rows.push_back(std::move(row));
  }
  LpRow sum_row;
  sum_row.rel = Rel::Eq;
  sum_row.rhs = 1.0;
  for (int i = 0; i < rows; ++i) sum_row.terms.emplace_back(i, 1.0);
  lp.rows.push_back(std::move(sum_row));

  const LpResult res = solve_lp(lp);
  if (res.status != LpStatus::Optimal)
    throw Error(fmt::format("matrix game: LP did not solve (status {})",
                            static_cast<int>(res.status)));

  MatrixGameSolution solution;
  solution.probs.assign(res.x.begin(), res.x.begin() + rows);
  double total = 0.0;
  for (double& p : solution.probs) {
    p = std::max(0.0, p);
    total += p;
  }
  for (double& p : solution.probs) p /= total;
  solution.value = res.objective;
  return solution;
}

}  // namespace ensrob
