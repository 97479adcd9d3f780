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

#ifndef ENSROB_NNMODEL_HPP
#define ENSROB_NNMODEL_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ensrob/error.hpp"

namespace ensrob {

// Tensor shapes are dimension lists, e.g. {8, 8} for an 8x8 image or {16}
// for a flat vector. Data is always stored flat in row-major order.
using Shape = std::vector<int>;

int shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// Ground-truth and predicted labels are 1-based.
using Label = int;

enum class LayerKind { Dense, Conv2D, MaxPool, Relu };

// One layer of a feed-forward network. Activation functions are explicit
// Relu layers so that classifier heads can stay affine.
struct Layer {
  LayerKind kind = LayerKind::Relu;

  // Dense
  std::vector<std::vector<double>> weights;  // rows x cols, row-major
  std::vector<double> bias;                  // size == rows

  // Conv2D: kernel[out_channel][in_channel][ky][kx], conv_bias[out_channel].
  // Cross-correlation with zero padding; a {h, w} input is treated as one
  // channel.
  std::vector<std::vector<std::vector<std::vector<double>>>> kernel;
  std::vector<double> conv_bias;
  int stride = 1;
  int padding = 0;

  // MaxPool
  int window_h = 1;
  int window_w = 1;
  // MaxPool stride shares `stride`.

  static Layer dense(std::vector<std::vector<double>> w, std::vector<double> b);
  static Layer relu();
  static Layer conv2d(std::vector<std::vector<std::vector<std::vector<double>>>> kernel,
                      std::vector<double> bias, int stride, int padding);
  static Layer maxpool(int window_h, int window_w, int stride);

  // Output shape for a given input shape; throws Error on mismatch.
  Shape output_shape(const Shape& input) const;

  bool operator==(const Layer& other) const;
};

// A sparse affine row: out = bias + sum coeff * in[index].
struct AffineRow {
  std::vector<std::pair<int, double>> terms;
  double bias = 0.0;
};

// Dense and Conv2D layers as explicit affine rows over the flattened input;
// used by evaluation, interval propagation, and the MILP encoder so all three
// agree on the semantics.
std::vector<AffineRow> affine_rows(const Layer& layer, const Shape& input);

// MaxPool windows as flat input index lists, one per output element.
std::vector<std::vector<int>> pool_windows(const Layer& layer, const Shape& input);

struct NeuralNetwork {
  Shape input_shape;
  std::vector<Layer> layers;
  int num_labels = 0;

  // Checks shape composition and per-layer invariants. Networks used as
  // classifiers have num_labels >= 2; scalar (num_labels == 1) networks are
  // allowed so plain functions R^n -> R can be wrapped and extended.
  void validate() const;

  bool operator==(const NeuralNetwork& other) const;
};

struct Ensemble {
  std::vector<NeuralNetwork> networks;

  void validate() const;
  const Shape& input_shape() const { return networks.at(0).input_shape; }
  int num_labels() const { return networks.at(0).num_labels; }
  int size() const { return static_cast<int>(networks.size()); }

  bool operator==(const Ensemble& other) const;
};

struct LabelledDataset {
  std::vector<std::vector<double>> points;
  std::vector<Label> labels;  // 1-based, same length as points

  void validate(const Shape& input_shape, int num_labels) const;
  int size() const { return static_cast<int>(points.size()); }
  int dim() const { return points.empty() ? 0 : static_cast<int>(points[0].size()); }

  bool operator==(const LabelledDataset& other) const;
};

struct IntervalBox {
  std::vector<double> lower;
  std::vector<double> upper;

  void validate() const;
  int size() const { return static_cast<int>(lower.size()); }
  bool contains(const std::vector<double>& x, double tol = 0.0) const;

  // Box around a point, inflated by radius in every coordinate.
  static IntervalBox around(const std::vector<double>& x, double radius);
};

// Exact layer-by-layer evaluation; returns the num_labels output vector.
std::vector<double> forward(const NeuralNetwork& net, const std::vector<double>& x);

// Argmax classification with a required winning margin. Returns the label t
// such that out[t] >= out[k] + margin for every other k, or nullopt when no
// label wins (ties at margin 0 are undefined, following the partial argmax).
std::optional<Label> classify(const NeuralNetwork& net, const std::vector<double>& x,
                              double margin);
std::optional<Label> classify_output(const std::vector<double>& output, double margin);

// Sound interval propagation through every layer. Entry 0 is the input box;
// entry i+1 bounds the output of layer i.
std::vector<IntervalBox> propagate_bounds(const NeuralNetwork& net,
                                          const IntervalBox& input_box);

Ensemble load_ensemble(const std::string& path);
LabelledDataset load_dataset(const std::string& path);
void save_ensemble(const Ensemble& ensemble, const std::string& path);
void save_dataset(const LabelledDataset& data, const std::string& path);

std::string ensemble_to_json(const Ensemble& ensemble);
std::string dataset_to_json(const LabelledDataset& data);
Ensemble ensemble_from_json(const std::string& text);
LabelledDataset dataset_from_json(const std::string& text);

}  // namespace ensrob

#endif  // ENSROB_NNMODEL_HPP
