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

#ifndef ENSROB_HARDNESS_GADGETS_HPP
#define ENSROB_HARDNESS_GADGETS_HPP

#include "ensrob/nnmodel.hpp"

namespace ensrob {

// Classifier gadgets that turn scalar threshold constraints into
// misclassification tests on the all-zeros data point with truth label 1.
// They double as test-fixture generators for undefined-argmax handling.

// Wraps scalar g into a two-label classifier whose outputs are (lower, g(v)):
// the zero point is misclassified under attack v iff lower <= g(v)
// (equality lands on an undefined tie, which also counts as loss 1).
NeuralNetwork build_lower_gadget(const NeuralNetwork& g, double lower);

// Wraps scalar g into a classifier with outputs (1, max(0, 1 - max(0,
// g(v) - upper))): misclassified (undefined) iff g(v) <= upper.
NeuralNetwork build_upper_gadget(const NeuralNetwork& g, double upper);

struct ReductionInstance {
  Ensemble ensemble;
  LabelledDataset data;
  double epsilon = 0.0;
};

// Gadget pairs for every input interval (over coordinate projections) and
// every output interval (over g). An attack v is simultaneously misclassified
// by all 2(n+m) gadgets iff v lies in the input box and g(v) in the output
// box; epsilon is sized so the L1 ball covers the input box.
ReductionInstance build_reduction(const NeuralNetwork& g, const IntervalBox& input_box,
                                  const IntervalBox& output_box);

}  // namespace ensrob

#endif  // ENSROB_HARDNESS_GADGETS_HPP
