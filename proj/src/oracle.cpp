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

#include "ensrob/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include <fmt/format.h>

#include "ensrob/milp_core.hpp"
#include "json.hpp"

namespace ensrob {

namespace {
constexpr long kGridLimit = 10'000'000;
constexpr long kCandidateLimit = 2'000'000;
constexpr double kCertSlack = 1e-6;
}  // namespace

std::vector<std::vector<double>> enumerate_grid_attacks(int dim, double epsilon,
                                                        double step) {
  if (dim < 1) throw Error("grid: dimension must be >= 1");
  if (!(step > 0.0)) throw Error("grid: step must be > 0");
  if (!(epsilon >= 0.0)) throw Error("grid: epsilon must be >= 0");

  const long max_units = static_cast<long>(std::floor(epsilon / step + 1e-9));

  // Count first: points of the integer diamond sum |u_k| <= max_units.
  std::vector<long> count_per_budget(max_units + 1, 1);  // dim = 1 seeds below
  for (long b = 0; b <= max_units; ++b) count_per_budget[b] = 2 * b + 1;
  for (int d = 2; d <= dim; ++d) {
    std::vector<long> next(max_units + 1, 0);
    for (long b = 0; b <= max_units; ++b) {
      long total = 0;
      for (long u = -b; u <= b; ++u) {
        total += count_per_budget[b - std::abs(u)];
        if (total > kGridLimit)
          throw Error(fmt::format(
              "grid: more than {} points; use a coarser step", kGridLimit));
      }
      next[b] = total;
    }
    count_per_budget = std::move(next);
  }
  if (count_per_budget[max_units] > kGridLimit)
    throw Error(fmt::format("grid: more than {} points; use a coarser step",
                            kGridLimit));

  std::vector<std::vector<double>> out;
  out.reserve(count_per_budget[max_units]);
  std::vector<double> current(dim, 0.0);
  // Lexicographic: leftmost coordinate runs slowest, most negative first.
  const std::function<void(int, long)> rec = [&](int k, long budget) {
    if (k == dim) {
      // Guard against rounding drift in the accumulated L1 norm.
      double norm = 0.0;
      for (double v : current) norm += std::abs(v);
      if (norm <= epsilon) out.push_back(current);
      return;
    }
    for (long u = -budget; u <= budget; ++u) {
      current[k] = static_cast<double>(u) * step;
      rec(k + 1, budget - std::abs(u));
    }
    current[k] = 0.0;
  };
  rec(0, max_units);
  return out;
}

namespace {

// Builds the candidate pool of deterministic attacks over the grid. Datasets
// with up to three points get the full per-point product; larger ones fall
// back to replicated vectors plus a per-point greedy pick.
std::vector<DeterministicAttack> candidate_attacks(const Ensemble& ensemble,
                                                   const LabelledDataset& data,
                                                   const std::vector<std::vector<double>>& grid,
                                                   double margin, bool* exact) {
  const int points = data.size();
  std::vector<DeterministicAttack> candidates;
  if (points <= 3) {
    double product = 1.0;
    for (int j = 0; j < points; ++j) product *= static_cast<double>(grid.size());
    if (product > static_cast<double>(kCandidateLimit))
      throw Error(fmt::format("grid: {}^{} candidate attacks; use a coarser step",
                              grid.size(), points));
    *exact = true;
    std::vector<size_t> pick(points, 0);
    while (true) {
      DeterministicAttack attack;
      attack.perturbations.reserve(points);
      for (int j = 0; j < points; ++j) attack.perturbations.push_back(grid[pick[j]]);
      candidates.push_back(std::move(attack));
      int j = points - 1;
      while (j >= 0 && ++pick[j] == grid.size()) pick[j--] = 0;
      if (j < 0) break;
    }
    return candidates;
  }

  *exact = false;
  // Same grid vector replicated across all points.
  for (const auto& v : grid) {
    DeterministicAttack attack;
    attack.perturbations.assign(points, v);
    candidates.push_back(std::move(attack));
  }
  // Greedy: per point, the vector fooling the most classifiers.
  DeterministicAttack greedy;
  greedy.perturbations.resize(points);
  for (int j = 0; j < points; ++j) {
    size_t best = 0;
    int best_fooled = -1;
    for (size_t g = 0; g < grid.size(); ++g) {
      int fooled = 0;
      for (const NeuralNetwork& net : ensemble.networks)
        fooled += zero_one_loss(net, data.points[j], grid[g], data.labels[j], margin);
      if (fooled > best_fooled) {
        best_fooled = fooled;
        best = g;
      }
    }
    greedy.perturbations[j] = grid[best];
  }
  candidates.push_back(std::move(greedy));
  return candidates;
}

}  // namespace

OracleResult brute_force_optimal(const Ensemble& ensemble, const LabelledDataset& data,
                                 double epsilon, double step, double margin) {
  ensemble.validate();
  data.validate(ensemble.input_shape(), ensemble.num_labels());
  const auto grid = enumerate_grid_attacks(data.dim(), epsilon, step);

  OracleResult result;
  const auto candidates =
      candidate_attacks(ensemble, data, grid, margin, &result.exact_candidates);

  // Merge identical loss signatures before the game (the merged pool has at
  // most (|X|+1)^|C| rows).
  std::vector<DeterministicAttack> representatives;
  std::vector<std::vector<double>> rates;
  std::map<LossSignature, size_t> seen;
  for (const DeterministicAttack& attack : candidates) {
    const LossSignature sig = loss_signature(ensemble, data, attack, margin);
    if (seen.emplace(sig, representatives.size()).second) {
      representatives.push_back(attack);
      std::vector<double> rate(sig.size());
      for (size_t c = 0; c < sig.size(); ++c)
        rate[c] = static_cast<double>(sig[c]) / data.size();
      rates.push_back(std::move(rate));
    }
  }

  const MatrixGameSolution game = solve_matrix_game(rates);

  RandomizedAttack ra;
  for (size_t i = 0; i < representatives.size(); ++i) {
    if (game.probs[i] <= 1e-12) continue;
    ra.attacks.push_back(representatives[i]);
    ra.probs.push_back(game.probs[i]);
  }
  double total = 0.0;
  for (double p : ra.probs) total += p;
  for (double& p : ra.probs) p /= total;

  result.attack = std::move(ra);
  result.value = misclassification_value(ensemble, data, result.attack, margin);
  return result;
}

std::string check_report_to_json(const CheckReport& report) {
  nlohmann::json j;
  j["value"] = report.value;
  j["epsilon_ok"] = report.epsilon_ok;
  j["distribution_ok"] = report.distribution_ok;
  j["boundary_case"] = report.boundary_case;
  j["pass"] = report.pass;
  return j.dump(2) + "\n";
}

CheckReport check_certificate(const Ensemble& ensemble, const LabelledDataset& data,
                              const RandomizedAttack& ra, const VerificationSpec& spec) {
  ensemble.validate();
  data.validate(ensemble.input_shape(), ensemble.num_labels());

  CheckReport report;
  report.distribution_ok = true;
  if (ra.attacks.empty() || ra.attacks.size() != ra.probs.size())
    report.distribution_ok = false;
  double sum = 0.0;
  for (double p : ra.probs) {
    if (!(p >= 0.0)) report.distribution_ok = false;
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) report.distribution_ok = false;

  for (const DeterministicAttack& attack : ra.attacks)
    attack.validate(data.size(), data.dim());

  report.epsilon_ok = is_epsilon_bounded(ra, spec.epsilon);
  if (report.distribution_ok)
    report.value = misclassification_value(ensemble, data, ra, spec.margin);
  report.boundary_case = std::abs(report.value - spec.alpha) <= kCertSlack;
  report.pass = report.epsilon_ok && report.distribution_ok &&
                report.value >= spec.alpha - kCertSlack;
  return report;
}

}  // namespace ensrob
