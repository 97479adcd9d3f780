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

#ifndef ENSROB_ENCODER_HPP
#define ENSROB_ENCODER_HPP

#include <functional>
#include <string>
#include <vector>

#include "ensrob/attacks.hpp"
#include "ensrob/constraint_system.hpp"
#include "ensrob/nnmodel.hpp"

namespace ensrob {

// Loss rows cannot express the strict inequality behind an undefined argmax,
// so at margin 0 the "still correctly classified" branch demands this much
// headroom instead; exact output ties then admit only loss 1.
inline constexpr double kTieEpsilon = 1e-9;

using BoundsProvider =
    std::function<std::vector<IntervalBox>(const NeuralNetwork&, const IntervalBox&)>;

// Encodes one network copy on the given input variables. Affine layers become
// equality rows, ReLU and MaxPool become big-M gadgets (phase-fixed ReLUs
// need no binary). `layer_boxes` must be sound for the reachable inputs, as
// produced by propagate_bounds; `tag` keeps variable names unique per copy.
std::vector<VarId> encode_network(ConstraintSystem& cs, const NeuralNetwork& net,
                                  const std::vector<VarId>& input_vars,
                                  const std::vector<IntervalBox>& layer_boxes,
                                  const std::string& tag);

// sum_k |delta_k| <= epsilon via t_k >= delta_k, t_k >= -delta_k.
void encode_abs_l1(ConstraintSystem& cs, const std::vector<VarId>& delta_vars,
                   double epsilon, const std::string& tag);

// Zero-one loss binary for one network copy's outputs against the truth
// label (1-based). loss = 0 forces the truth output to win by the margin;
// loss = 1 forces some other output to reach it. Ties only satisfy loss = 1.
VarId encode_loss(ConstraintSystem& cs, const std::vector<VarId>& output_vars,
                  Label truth, double margin, const std::string& tag,
                  VarCoords coords = {});

// c = p * b for continuous p in [0,1] and binary b, with the constant
// big-M 2.
VarId encode_product(ConstraintSystem& cs, VarId p, VarId b, const std::string& name,
                     VarCoords coords = {});

// The full attack-existence system: attack and probability variables, one
// network copy per (classifier, attack, point), loss binaries, probability
// products, the per-classifier value threshold, the L1 budget, and the
// probability simplex.
ConstraintSystem encode_base(const Ensemble& ensemble, const LabelledDataset& data,
                             const VerificationSpec& spec,
                             const BoundsProvider& bounds_provider = {});

// Adds "maximize the sum of all probability-times-loss products".
void add_max_objective(ConstraintSystem& cs);

// One classifier, one attack, no probabilities; maximizes the summed loss.
ConstraintSystem encode_single_classifier(const NeuralNetwork& classifier,
                                          const LabelledDataset& data, double epsilon,
                                          double margin);

// Reads the attack and probability variables of a solved system back into a
// randomized attack. Probabilities are clipped and renormalized and each
// per-point row is scaled into the L1 ball, so hairline solver-tolerance
// violations cannot trip the exact certificate checks downstream.
RandomizedAttack extract_witness(const ConstraintSystem& cs,
                                 const std::vector<double>& assignment);

}  // namespace ensrob

#endif  // ENSROB_ENCODER_HPP
