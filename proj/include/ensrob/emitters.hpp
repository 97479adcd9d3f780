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

#ifndef ENSROB_EMITTERS_HPP
#define ENSROB_EMITTERS_HPP

#include <map>
#include <string>
#include <vector>

#include "ensrob/constraint_system.hpp"
#include "ensrob/milp_core.hpp"

namespace ensrob {

// CPLEX LP text: Maximize / Subject To / Bounds / Binary / End, coefficients
// with 17 significant digits, declaration order throughout. Deterministic:
// the same system emits byte-identical text.
std::string emit_lp(const ConstraintSystem& cs);

// SMT-LIB2 (QF_LRA) script ending in (check-sat)(get-model). ReLU, MaxPool,
// and loss gadgets are emitted as native ite terms instead of their big-M
// rows; gadget auxiliary binaries stay internal to the MILP path. Constants
// are exact rationals of the doubles they came from.
std::string emit_smtlib(const ConstraintSystem& cs);

// Reader for the LP subset emit_lp produces (plus default x >= 0 bounds for
// undeclared variables, following the format convention).
ConstraintSystem parse_lp(const std::string& text);

struct SolverBackend {
  enum class Kind { Internal, ExternalLp, ExternalSmt };
  Kind kind = Kind::Internal;
  // Shell command with a {file} placeholder; the problem file path is
  // substituted (or appended when no placeholder is present).
  std::string command_template;
  double time_budget_seconds = 60.0;
  bool keep_artifacts = false;
  std::string artifact_dir;  // empty: system temp dir
};

// Writes the problem file, runs the external command under the wall-clock
// budget (killing the whole process group on expiry), parses the solution,
// and audits any claimed-feasible assignment against the system before
// reporting Feasible. Unsat/infeasible tokens map to Infeasible; anything
// unparseable or unverifiable maps to Unknown.
MilpVerdict run_external(const SolverBackend& backend, const ConstraintSystem& cs);

struct SubprocessResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
  bool timed_out = false;
};

SubprocessResult run_subprocess(const std::string& command, double timeout_seconds);

struct ParsedSolution {
  enum class Kind { Sat, Unsat, Unknown } kind = Kind::Unknown;
  std::map<std::string, double> values;
};

// "<name> <value>" lines plus status tokens (optimal/feasible/infeasible...).
ParsedSolution parse_lp_solution(const std::string& text);
// sat/unsat plus the (define-fun ...) entries of a get-model answer.
ParsedSolution parse_smt_model(const std::string& text);

// Extends a named partial assignment to all system variables, deriving the
// hidden gadget binaries from the visible values. Missing plain variables
// default to their lower bounds.
std::vector<double> complete_assignment(const ConstraintSystem& cs,
                                        const std::map<std::string, double>& values);

// Exact rational SMT-LIB rendering of a double (e.g. "(/ 1 2)", "(- 3)").
std::string smt_number(double value);

}  // namespace ensrob

#endif  // ENSROB_EMITTERS_HPP
