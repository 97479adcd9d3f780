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

#ifndef ENSROB_MILP_CORE_HPP
#define ENSROB_MILP_CORE_HPP

#include <functional>
#include <string>
#include <vector>

#include "ensrob/constraint_system.hpp"

namespace ensrob {

// Fixed numeric tolerances, also echoed in diagnostics output.
inline constexpr double kLpFeasibilityTol = 1e-7;
inline constexpr double kIntegralityTol = 1e-6;
inline constexpr double kObjectiveTol = 1e-9;

// Dense-tableau LP in bounded-variable form: maximize c*x subject to the
// rows and box bounds. Lower bounds must be finite; upper bounds may be +inf.
struct LpRow {
  std::vector<std::pair<int, double>> terms;
  Rel rel = Rel::Le;
  double rhs = 0.0;
};

struct LpProblem {
  int num_vars = 0;
  std::vector<double> objective;  // maximize; size num_vars (empty = feasibility)
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<LpRow> rows;
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit, Numerical };

struct LpResult {
  LpStatus status = LpStatus::Numerical;
  std::vector<double> x;
  double objective = 0.0;
  long iterations = 0;
};

// Two-phase primal simplex; Dantzig pricing with a permanent switch to
// Bland's rule once the objective stalls. max_iterations 0 picks a limit
// from the problem size.
LpResult solve_lp(const LpProblem& lp, long max_iterations = 0);

enum class MilpStatus { Feasible, Infeasible, Unknown };
enum class SolveMode { Feasibility, Maximize };

struct MilpDiagnostics {
  long nodes = 0;
  long lp_iterations = 0;
  int max_depth = 0;
  bool exhausted = true;  // full tree explored (no unresolved prunes)
};

struct MilpVerdict {
  MilpStatus status = MilpStatus::Unknown;
  std::vector<double> assignment;  // meaningful when has_assignment
  double objective = 0.0;
  bool has_assignment = false;  // Feasible, or Unknown carrying an incumbent
  std::string reason;           // Unknown: timeout | iteration-limit | numerical
  MilpDiagnostics diag;
};

using IncumbentCallback =
    std::function<void(const std::vector<double>& assignment, double objective)>;

// Depth-first branch and bound over the binaries of the constraint system.
// Branches on the most fractional binary (ties by variable order); prunes by
// the LP relaxation bound in Maximize mode. Every Feasible assignment is
// re-audited against the constraint system before being returned.
MilpVerdict solve_milp(const ConstraintSystem& cs, SolveMode mode,
                       double time_budget_seconds = 60.0,
                       const IncumbentCallback& on_incumbent = {});

// Optimal mixed strategy for the row player of max_P min_c sum_i P_i M[i][c].
struct MatrixGameSolution {
  std::vector<double> probs;
  double value = 0.0;
};

MatrixGameSolution solve_matrix_game(const std::vector<std::vector<double>>& loss_matrix);

// LP relaxation of a constraint system with optional binary fixings applied.
LpProblem lp_from_system(const ConstraintSystem& cs);

}  // namespace ensrob

#endif  // ENSROB_MILP_CORE_HPP
