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

#include "ensrob/hardness_gadgets.hpp"

#include <cmath>

#include <fmt/format.h>

namespace ensrob {

namespace {

void require_scalar(const NeuralNetwork& g, const char* what) {
  g.validate();
  if (g.num_labels != 1)
    throw Error(fmt::format("{}: base network must have a scalar output, got {}",
                            what, g.num_labels));
}

}  // namespace

NeuralNetwork build_lower_gadget(const NeuralNetwork& g, double lower) {
  require_scalar(g, "lower gadget");
  NeuralNetwork out = g;
  // Final head stays affine: (lower, g(v)).
  out.layers.push_back(Layer::dense({{0.0}, {1.0}}, {lower, 0.0}));
  out.num_labels = 2;
  out.validate();
  return out;
}

NeuralNetwork build_upper_gadget(const NeuralNetwork& g, double upper) {
  require_scalar(g, "upper gadget");
  NeuralNetwork out = g;
  out.layers.push_back(Layer::dense({{1.0}}, {-upper}));
  out.layers.push_back(Layer::relu());
  out.layers.push_back(Layer::dense({{0.0}, {-1.0}}, {1.0, 1.0}));
  out.layers.push_back(Layer::relu());
  out.num_labels = 2;
  out.validate();
  return out;
}

ReductionInstance build_reduction(const NeuralNetwork& g, const IntervalBox& input_box,
                                  const IntervalBox& output_box) {
  g.validate();
  input_box.validate();
  output_box.validate();
  const int n = shape_size(g.input_shape);
  const int m = g.num_labels;
  if (input_box.size() != n)
    throw Error(fmt::format("reduction: input box has dimension {}, expected {}",
                            input_box.size(), n));
  if (output_box.size() != m)
    throw Error(fmt::format("reduction: output box has dimension {}, expected {}",
                            output_box.size(), m));

  ReductionInstance instance;

  // Coordinate projections carry the input constraints.
  for (int k = 0; k < n; ++k) {
    NeuralNetwork projection;
    projection.input_shape = g.input_shape;
    projection.num_labels = 1;
    std::vector<std::vector<double>> row(1, std::vector<double>(n, 0.0));
    row[0][k] = 1.0;
    projection.layers.push_back(Layer::dense(std::move(row), {0.0}));
    instance.ensemble.networks.push_back(
        build_lower_gadget(projection, input_box.lower[k]));
    instance.ensemble.networks.push_back(
        build_upper_gadget(projection, input_box.upper[k]));
  }

  // g itself (projected per output coordinate) carries the output constraints.
  for (int r = 0; r < m; ++r) {
    NeuralNetwork component = g;
    if (m > 1) {
      std::vector<std::vector<double>> row(1, std::vector<double>(m, 0.0));
      row[0][r] = 1.0;
      component.layers.push_back(Layer::dense(std::move(row), {0.0}));
      component.num_labels = 1;
    }
    instance.ensemble.networks.push_back(
        build_lower_gadget(component, output_box.lower[r]));
    instance.ensemble.networks.push_back(
        build_upper_gadget(component, output_box.upper[r]));
  }

  instance.ensemble.validate();

  instance.data.points.push_back(std::vector<double>(n, 0.0));
  instance.data.labels.push_back(1);

  // The L1 ball around the zero point must cover the whole input box.
  double epsilon = 0.0;
  for (int k = 0; k < n; ++k)
    epsilon += std::max(std::abs(input_box.lower[k]), std::abs(input_box.upper[k]));
  instance.epsilon = epsilon;
  return instance;
}

}  // namespace ensrob
