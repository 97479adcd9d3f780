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

#ifndef ENSROB_ORACLE_HPP
#define ENSROB_ORACLE_HPP

#include <string>
#include <vector>

#include "ensrob/attacks.hpp"
#include "ensrob/nnmodel.hpp"

namespace ensrob {

// All vectors of (step * Z)^d inside the L1 ball of radius epsilon, in
// lexicographic order. Errors out past ten million points.
std::vector<std::vector<double>> enumerate_grid_attacks(int dim, double epsilon,
                                                        double step);

struct OracleResult {
  RandomizedAttack attack;
  double value = 0.0;
  // False when the candidate pool had to fall back to the per-point greedy
  // heuristic (datasets beyond three points); the value is then only a lower
  // bound on the best grid randomization.
  bool exact_candidates = true;
};

// Grid-restricted optimal randomized attack: enumerates candidates, merges
// identical loss signatures, and solves the induced matrix game. Sound for
// NOT-ROBUST witnesses only; never use it to claim robustness.
OracleResult brute_force_optimal(const Ensemble& ensemble, const LabelledDataset& data,
                                 double epsilon, double step, double margin);

struct CheckReport {
  double value = 0.0;
  bool epsilon_ok = false;
  bool distribution_ok = false;
  bool boundary_case = false;  // |value - alpha| within certification slack
  bool pass = false;
};

std::string check_report_to_json(const CheckReport& report);

// Solver-independent certificate check: recomputes the misclassification
// value by forward passes and verifies the budget and the distribution.
// Passes iff value >= alpha - 1e-6 and both structural checks hold.
CheckReport check_certificate(const Ensemble& ensemble, const LabelledDataset& data,
                              const RandomizedAttack& ra, const VerificationSpec& spec);

}  // namespace ensrob

#endif  // ENSROB_ORACLE_HPP
