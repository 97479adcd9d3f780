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

#include "ensrob/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

namespace ensrob {

namespace {
constexpr double kProbSumTol = 1e-9;
}

void DeterministicAttack::validate(int num_points, int dim) const {
  if (static_cast<int>(perturbations.size()) != num_points)
    throw Error(fmt::format("attack: {} rows but dataset has {} points",
                            perturbations.size(), num_points));
  for (size_t j = 0; j < perturbations.size(); ++j) {
    if (static_cast<int>(perturbations[j].size()) != dim)
      throw Error(fmt::format("attack: row {} has dimension {}, expected {}", j,
                              perturbations[j].size(), dim));
    for (double v : perturbations[j])
      if (!std::isfinite(v))
        throw Error(fmt::format("attack: row {} has a non-finite entry", j));
  }
}

void RandomizedAttack::validate(int num_points, int dim) const {
  if (attacks.empty()) throw Error("randomized attack: attack set is empty");
  if (attacks.size() != probs.size())
    throw Error(fmt::format("randomized attack: {} attacks but {} probabilities",
                            attacks.size(), probs.size()));
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0))
      throw Error("randomized attack: probabilities must be nonnegative");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbSumTol)
    throw Error(fmt::format("randomized attack: probabilities sum to {}", sum));
  for (const DeterministicAttack& a : attacks) a.validate(num_points, dim);
}

void VerificationSpec::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw Error("spec: epsilon must be > 0");
  if (!(alpha > 0.0) || !(alpha <= 1.0))
    throw Error("spec: alpha must be in (0, 1]");
  if (num_attacks < 1) throw Error("spec: number of attacks must be >= 1");
  if (!(margin >= 0.0)) throw Error("spec: margin must be >= 0");
}

int zero_one_loss(const NeuralNetwork& classifier, const std::vector<double>& x,
                  const std::vector<double>& delta_row, Label truth, double margin) {
  std::vector<double> attacked(x.size());
  for (size_t k = 0; k < x.size(); ++k) attacked[k] = x[k] + delta_row[k];
  const std::optional<Label> predicted = classify(classifier, attacked, margin);
  return (predicted && *predicted == truth) ? 0 : 1;
}

LossSignature loss_signature(const Ensemble& ensemble, const LabelledDataset& data,
                             const DeterministicAttack& attack, double margin) {
  LossSignature signature(ensemble.size(), 0);
  for (int c = 0; c < ensemble.size(); ++c)
    for (int j = 0; j < data.size(); ++j)
      signature[c] += zero_one_loss(ensemble.networks[c], data.points[j],
                                    attack.perturbations[j], data.labels[j], margin);
  return signature;
}

double misclassification_value(const Ensemble& ensemble, const LabelledDataset& data,
                               const RandomizedAttack& ra, double margin) {
  double best = std::numeric_limits<double>::infinity();
  for (int c = 0; c < ensemble.size(); ++c) {
    double expected = 0.0;
    for (size_t i = 0; i < ra.attacks.size(); ++i) {
      int total = 0;
      for (int j = 0; j < data.size(); ++j)
        total += zero_one_loss(ensemble.networks[c], data.points[j],
                               ra.attacks[i].perturbations[j], data.labels[j], margin);
      expected += ra.probs[i] * total;
    }
    best = std::min(best, expected / data.size());
  }
  return best;
}

bool is_epsilon_bounded(const RandomizedAttack& ra, double epsilon) {
  for (size_t i = 0; i < ra.attacks.size(); ++i) {
    if (!(ra.probs[i] > 0.0)) continue;
    for (const auto& row : ra.attacks[i].perturbations) {
      double norm = 0.0;
      for (double v : row) norm += std::abs(v);
      if (!(norm <= epsilon)) return false;
    }
  }
  return true;
}

std::uint64_t attack_count_bound(int num_points, int num_classifiers) {
  if (num_points < 1 || num_classifiers < 1)
    throw Error("attack_count_bound: both arguments must be >= 1");
  const std::uint64_t base = static_cast<std::uint64_t>(num_points) + 1;
  std::uint64_t result = 1;
  for (int i = 0; i < num_classifiers; ++i) {
    if (__builtin_mul_overflow(result, base, &result))
      throw Error(fmt::format("attack_count_bound: ({}+1)^{} overflows 64 bits",
                              num_points, num_classifiers));
  }
  return result;
}

RandomizedAttack reduce_attack_set(const Ensemble& ensemble, const LabelledDataset& data,
                                   const RandomizedAttack& ra, double margin) {
  RandomizedAttack reduced;
  std::map<LossSignature, size_t> group_of;
  for (size_t i = 0; i < ra.attacks.size(); ++i) {
    const LossSignature sig = loss_signature(ensemble, data, ra.attacks[i], margin);
    const auto [it, inserted] = group_of.emplace(sig, reduced.attacks.size());
    if (inserted) {
      reduced.attacks.push_back(ra.attacks[i]);
      reduced.probs.push_back(ra.probs[i]);
    } else {
      reduced.probs[it->second] += ra.probs[i];
    }
  }
  return reduced;
}

RandomizedAttack uniform_attacker(const std::vector<DeterministicAttack>& attacks) {
  if (attacks.empty()) throw Error("uniform attacker: empty attack list");
  RandomizedAttack ra;
  ra.attacks = attacks;
  ra.probs.assign(attacks.size(), 1.0 / static_cast<double>(attacks.size()));
  return ra;
}

std::pair<DeterministicAttack, double> best_deterministic_attacker(
    const Ensemble& ensemble, const LabelledDataset& data,
    const std::vector<DeterministicAttack>& candidates, double margin) {
  if (candidates.empty())
    throw Error("best deterministic attacker: empty candidate list");
  size_t best_index = 0;
  double best_value = -1.0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    const LossSignature sig = loss_signature(ensemble, data, candidates[i], margin);
    const int worst = *std::min_element(sig.begin(), sig.end());
    const double value = static_cast<double>(worst) / data.size();
    if (value > best_value) {
      best_value = value;
      best_index = i;
    }
  }
  return {candidates[best_index], best_value};
}

// ---------------------------------------------------------------------------
// Witness JSON

namespace {
using nlohmann::json;
}

std::string witness_to_json(const RandomizedAttack& ra, double value, double epsilon) {
  json j;
  j["attacks"] = json::array();
  for (const DeterministicAttack& a : ra.attacks) j["attacks"].push_back(a.perturbations);
  j["probs"] = ra.probs;
  j["value"] = value;
  j["epsilon"] = epsilon;
  return j.dump(2) + "\n";
}

Witness witness_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(fmt::format("witness: {}", e.what()));
  }
  Witness w;
  try {
    for (const auto& ja : j.at("attacks")) {
      DeterministicAttack a;
      a.perturbations = ja.get<std::vector<std::vector<double>>>();
      w.attack.attacks.push_back(std::move(a));
    }
    w.attack.probs = j.at("probs").get<std::vector<double>>();
    w.value = j.value("value", 0.0);
    w.epsilon = j.value("epsilon", 0.0);
  } catch (const json::exception& e) {
    throw Error(fmt::format("witness: {}", e.what()));
  }
  return w;
}

Witness load_witness(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open {}", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return witness_from_json(ss.str());
}

void save_witness(const Witness& witness, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write {}", path));
  out << witness_to_json(witness.attack, witness.value, witness.epsilon);
}

}  // namespace ensrob
