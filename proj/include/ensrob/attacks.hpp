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

#ifndef ENSROB_ATTACKS_HPP
#define ENSROB_ATTACKS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ensrob/nnmodel.hpp"

namespace ensrob {

// A deterministic attack assigns one perturbation vector to every data point.
struct DeterministicAttack {
  // perturbations[j] is the length-d vector added to point j.
  std::vector<std::vector<double>> perturbations;

  void validate(int num_points, int dim) const;
  bool operator==(const DeterministicAttack& other) const {
    return perturbations == other.perturbations;
  }
};

// A finite attack set with a probability distribution over it.
struct RandomizedAttack {
  std::vector<DeterministicAttack> attacks;
  std::vector<double> probs;

  void validate(int num_points, int dim) const;
  int size() const { return static_cast<int>(attacks.size()); }
};

// Verification thresholds: the L1 attack budget, the loss threshold, the
// number of attack slots, and the minimum prediction margin.
struct VerificationSpec {
  double epsilon = 0.0;   // > 0
  double alpha = 0.0;     // in (0, 1]
  int num_attacks = 0;    // >= 1
  double margin = 1e-4;   // >= 0

  void validate() const;
};

// Per-classifier total losses of one deterministic attack over the dataset;
// entry c is in [0, |X|].
using LossSignature = std::vector<int>;

// Zero-one loss of one attacked point: 0 iff the classifier still outputs the
// ground-truth label (ties and undefined outputs count as loss 1).
int zero_one_loss(const NeuralNetwork& classifier, const std::vector<double>& x,
                  const std::vector<double>& delta_row, Label truth, double margin);

// Total loss over the dataset for each ensemble member.
LossSignature loss_signature(const Ensemble& ensemble, const LabelledDataset& data,
                             const DeterministicAttack& attack, double margin);

// Minimum over classifiers of the mean expected loss under the distribution.
double misclassification_value(const Ensemble& ensemble, const LabelledDataset& data,
                               const RandomizedAttack& ra, double margin);

// True iff every attack with positive probability keeps every per-point
// perturbation within the L1 budget. Zero-probability attacks are exempt;
// the comparison is a plain <= with no tolerance.
bool is_epsilon_bounded(const RandomizedAttack& ra, double epsilon);

// (|X|+1)^|C| with checked integer arithmetic.
std::uint64_t attack_count_bound(int num_points, int num_classifiers);

// Merges attacks with identical loss signatures, keeping the first
// representative of each group with the summed probability. Preserves the
// misclassification value and epsilon-boundedness.
RandomizedAttack reduce_attack_set(const Ensemble& ensemble, const LabelledDataset& data,
                                   const RandomizedAttack& ra, double margin);

// The given attacks under the uniform distribution.
RandomizedAttack uniform_attacker(const std::vector<DeterministicAttack>& attacks);

// The candidate maximizing min_c M_c(delta)/|X|, ties broken by lowest index.
std::pair<DeterministicAttack, double> best_deterministic_attacker(
    const Ensemble& ensemble, const LabelledDataset& data,
    const std::vector<DeterministicAttack>& candidates, double margin);

// Witness JSON: {"attacks": [...], "probs": [...], "value": v, "epsilon": e}.
std::string witness_to_json(const RandomizedAttack& ra, double value, double epsilon);
struct Witness {
  RandomizedAttack attack;
  double value = 0.0;
  double epsilon = 0.0;
};
Witness witness_from_json(const std::string& text);
Witness load_witness(const std::string& path);
void save_witness(const Witness& witness, const std::string& path);

}  // namespace ensrob

#endif  // ENSROB_ATTACKS_HPP
