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

#include "ensrob/nnmodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

namespace ensrob {

namespace {

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double d) { return std::isfinite(d); });
}

}  // namespace

int shape_size(const Shape& shape) {
  int n = 1;
  for (int d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

std::string shape_to_string(const Shape& shape) {
  std::string out = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

Layer Layer::dense(std::vector<std::vector<double>> w, std::vector<double> b) {
  Layer layer;
  layer.kind = LayerKind::Dense;
  layer.weights = std::move(w);
  layer.bias = std::move(b);
  return layer;
}

Layer Layer::relu() {
  Layer layer;
  layer.kind = LayerKind::Relu;
  return layer;
}

Layer Layer::conv2d(std::vector<std::vector<std::vector<std::vector<double>>>> kernel,
                    std::vector<double> bias, int stride, int padding) {
  Layer layer;
  layer.kind = LayerKind::Conv2D;
  layer.kernel = std::move(kernel);
  layer.conv_bias = std::move(bias);
  layer.stride = stride;
  layer.padding = padding;
  return layer;
}

Layer Layer::maxpool(int window_h, int window_w, int stride) {
  Layer layer;
  layer.kind = LayerKind::MaxPool;
  layer.window_h = window_h;
  layer.window_w = window_w;
  layer.stride = stride;
  return layer;
}

namespace {

// Interprets a shape as channels/height/width for the 2-D layers.
struct Chw {
  int c, h, w;
};

Chw as_chw(const Shape& shape, const char* what) {
  if (shape.size() == 2) return {1, shape[0], shape[1]};
  if (shape.size() == 3) return {shape[0], shape[1], shape[2]};
  throw Error(fmt::format("{}: expected a 2-d input shape, got {}", what,
                          shape_to_string(shape)));
}

}  // namespace

Shape Layer::output_shape(const Shape& input) const {
  switch (kind) {
    case LayerKind::Relu:
      return input;
    case LayerKind::Dense: {
      const int rows = static_cast<int>(weights.size());
      if (rows == 0) throw Error("dense layer: empty weight matrix");
      const int cols = static_cast<int>(weights[0].size());
      if (static_cast<int>(bias.size()) != rows)
        throw Error(fmt::format("dense layer: bias size {} != row count {}",
                                bias.size(), rows));
      for (size_t r = 0; r < weights.size(); ++r)
        if (static_cast<int>(weights[r].size()) != cols)
          throw Error(fmt::format("dense layer: row {} has length {}, expected {}",
                                  r, weights[r].size(), cols));
      if (shape_size(input) != cols)
        throw Error(fmt::format("dense layer: weight matrix expects {} inputs, got {}",
                                cols, shape_size(input)));
      return {rows};
    }
    case LayerKind::Conv2D: {
      if (stride < 1 || padding < 0)
        throw Error("conv2d layer: stride must be >= 1 and padding >= 0");
      const int oc = static_cast<int>(kernel.size());
      if (oc == 0) throw Error("conv2d layer: empty kernel");
      const int ic = static_cast<int>(kernel[0].size());
      if (ic == 0 || kernel[0][0].empty() || kernel[0][0][0].empty())
        throw Error("conv2d layer: kernel dims must be >= 1");
      const int kh = static_cast<int>(kernel[0][0].size());
      const int kw = static_cast<int>(kernel[0][0][0].size());
      for (const auto& per_out : kernel) {
        if (static_cast<int>(per_out.size()) != ic)
          throw Error("conv2d layer: ragged kernel (in-channel count)");
        for (const auto& plane : per_out) {
          if (static_cast<int>(plane.size()) != kh)
            throw Error("conv2d layer: ragged kernel (height)");
          for (const auto& row : plane)
            if (static_cast<int>(row.size()) != kw)
              throw Error("conv2d layer: ragged kernel (width)");
        }
      }
      if (static_cast<int>(conv_bias.size()) != oc)
        throw Error(fmt::format("conv2d layer: bias size {} != out channels {}",
                                conv_bias.size(), oc));
      const Chw in = as_chw(input, "conv2d layer");
      if (in.c != ic)
        throw Error(fmt::format("conv2d layer: kernel expects {} input channels, got {}",
                                ic, in.c));
      const int oh = (in.h + 2 * padding - kh) / stride + 1;
      const int ow = (in.w + 2 * padding - kw) / stride + 1;
      if (in.h + 2 * padding < kh || in.w + 2 * padding < kw)
        throw Error("conv2d layer: kernel larger than padded input");
      return {oc, oh, ow};
    }
    case LayerKind::MaxPool: {
      if (window_h < 1 || window_w < 1 || stride < 1)
        throw Error("maxpool layer: window dims and stride must be >= 1");
      const Chw in = as_chw(input, "maxpool layer");
      if (in.h < window_h || in.w < window_w)
        throw Error("maxpool layer: window larger than input");
      const int oh = (in.h - window_h) / stride + 1;
      const int ow = (in.w - window_w) / stride + 1;
      if (in.c == 1 && input.size() == 2) return {oh, ow};
      return {in.c, oh, ow};
    }
  }
  throw std::logic_error("unreachable layer kind");
}

bool Layer::operator==(const Layer& other) const {
  return kind == other.kind && weights == other.weights && bias == other.bias &&
         kernel == other.kernel && conv_bias == other.conv_bias &&
         stride == other.stride && padding == other.padding &&
         window_h == other.window_h && window_w == other.window_w;
}

std::vector<AffineRow> affine_rows(const Layer& layer, const Shape& input) {
  std::vector<AffineRow> rows;
  if (layer.kind == LayerKind::Dense) {
    rows.reserve(layer.weights.size());
    for (size_t r = 0; r < layer.weights.size(); ++r) {
      AffineRow row;
      row.bias = layer.bias[r];
      for (size_t c = 0; c < layer.weights[r].size(); ++c) {
        const double w = layer.weights[r][c];
        if (w != 0.0) row.terms.emplace_back(static_cast<int>(c), w);
      }
      rows.push_back(std::move(row));
    }
    return rows;
  }
  if (layer.kind == LayerKind::Conv2D) {
    const Chw in = as_chw(input, "conv2d layer");
    const Shape out_shape = layer.output_shape(input);
    const int oc = out_shape[0], oh = out_shape[1], ow = out_shape[2];
    const int kh = static_cast<int>(layer.kernel[0][0].size());
    const int kw = static_cast<int>(layer.kernel[0][0][0].size());
    rows.reserve(static_cast<size_t>(oc) * oh * ow);
    for (int o = 0; o < oc; ++o) {
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          AffineRow row;
          row.bias = layer.conv_bias[o];
          for (int i = 0; i < in.c; ++i) {
            for (int dy = 0; dy < kh; ++dy) {
              const int sy = y * layer.stride + dy - layer.padding;
              if (sy < 0 || sy >= in.h) continue;
              for (int dx = 0; dx < kw; ++dx) {
                const int sx = x * layer.stride + dx - layer.padding;
                if (sx < 0 || sx >= in.w) continue;
                const double w = layer.kernel[o][i][dy][dx];
                if (w != 0.0)
                  row.terms.emplace_back((i * in.h + sy) * in.w + sx, w);
              }
            }
          }
          rows.push_back(std::move(row));
        }
      }
    }
    return rows;
  }
  throw std::logic_error("affine_rows: layer is not affine");
}

std::vector<std::vector<int>> pool_windows(const Layer& layer, const Shape& input) {
  if (layer.kind != LayerKind::MaxPool)
    throw std::logic_error("pool_windows: layer is not a maxpool");
  const Chw in = as_chw(input, "maxpool layer");
  const Shape out_shape = layer.output_shape(input);
  const int oh = out_shape[out_shape.size() - 2];
  const int ow = out_shape[out_shape.size() - 1];
  std::vector<std::vector<int>> windows;
  windows.reserve(static_cast<size_t>(in.c) * oh * ow);
  for (int ch = 0; ch < in.c; ++ch) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        std::vector<int> window;
        window.reserve(static_cast<size_t>(layer.window_h) * layer.window_w);
        for (int dy = 0; dy < layer.window_h; ++dy)
          for (int dx = 0; dx < layer.window_w; ++dx)
            window.push_back((ch * in.h + y * layer.stride + dy) * in.w +
                             x * layer.stride + dx);
        windows.push_back(std::move(window));
      }
    }
  }
  return windows;
}

void NeuralNetwork::validate() const {
  if (input_shape.empty() || shape_size(input_shape) <= 0)
    throw Error("network: input shape must be nonempty with positive dims");
  if (num_labels < 1) throw Error("network: num_labels must be >= 1");
  Shape shape = input_shape;
  for (size_t i = 0; i < layers.size(); ++i) {
    try {
      shape = layers[i].output_shape(shape);
    } catch (const Error& e) {
      throw Error(fmt::format("layer {}: {}", i, e.what()));
    }
  }
  if (shape_size(shape) != num_labels)
    throw Error(fmt::format("network: final layer produces {} outputs, expected {}",
                            shape_size(shape), num_labels));
}

bool NeuralNetwork::operator==(const NeuralNetwork& other) const {
  return input_shape == other.input_shape && layers == other.layers &&
         num_labels == other.num_labels;
}

void Ensemble::validate() const {
  if (networks.empty()) throw Error("ensemble: needs at least one network");
  for (size_t i = 0; i < networks.size(); ++i) {
    try {
      networks[i].validate();
    } catch (const Error& e) {
      throw Error(fmt::format("network {}: {}", i, e.what()));
    }
    if (networks[i].input_shape != networks[0].input_shape)
      throw Error(fmt::format("network {}: input shape differs from network 0", i));
    if (networks[i].num_labels != networks[0].num_labels)
      throw Error(fmt::format("network {}: num_labels differs from network 0", i));
  }
  if (networks[0].num_labels < 2)
    throw Error("ensemble: classifiers need num_labels >= 2");
}

bool Ensemble::operator==(const Ensemble& other) const {
  return networks == other.networks;
}

void LabelledDataset::validate(const Shape& input_shape, int num_labels) const {
  if (points.empty()) throw Error("dataset: needs at least one point");
  if (points.size() != labels.size())
    throw Error(fmt::format("dataset: {} points but {} labels", points.size(),
                            labels.size()));
  const int d = shape_size(input_shape);
  for (size_t j = 0; j < points.size(); ++j) {
    if (static_cast<int>(points[j].size()) != d)
      throw Error(fmt::format("dataset: point {} has dimension {}, expected {}",
                              j, points[j].size(), d));
    if (!all_finite(points[j]))
      throw Error(fmt::format("dataset: point {} has a non-finite entry", j));
    if (labels[j] < 1 || labels[j] > num_labels)
      throw Error(fmt::format("dataset: label out of range at index {} (got {}, "
                              "labels are 1..{})",
                              j, labels[j], num_labels));
  }
}

bool LabelledDataset::operator==(const LabelledDataset& other) const {
  return points == other.points && labels == other.labels;
}

void IntervalBox::validate() const {
  if (lower.size() != upper.size())
    throw Error("interval box: lower/upper size mismatch");
  for (size_t i = 0; i < lower.size(); ++i)
    if (!(lower[i] <= upper[i]))
      throw Error(fmt::format("interval box: lower > upper at index {}", i));
}

bool IntervalBox::contains(const std::vector<double>& x, double tol) const {
  if (x.size() != lower.size()) return false;
  for (size_t i = 0; i < x.size(); ++i)
    if (x[i] < lower[i] - tol || x[i] > upper[i] + tol) return false;
  return true;
}

IntervalBox IntervalBox::around(const std::vector<double>& x, double radius) {
  IntervalBox box;
  box.lower.reserve(x.size());
  box.upper.reserve(x.size());
  for (double v : x) {
    box.lower.push_back(v - radius);
    box.upper.push_back(v + radius);
  }
  return box;
}

std::vector<double> forward(const NeuralNetwork& net, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != shape_size(net.input_shape))
    throw Error(fmt::format("forward: input has dimension {}, expected {}", x.size(),
                            shape_size(net.input_shape)));
  std::vector<double> value = x;
  Shape shape = net.input_shape;
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const Layer& layer = net.layers[i];
    Shape out_shape;
    try {
      out_shape = layer.output_shape(shape);
    } catch (const Error& e) {
      throw Error(fmt::format("forward: layer {}: {}", i, e.what()));
    }
    std::vector<double> next;
    switch (layer.kind) {
      case LayerKind::Relu:
        next = value;
        for (double& v : next) v = std::max(0.0, v);
        break;
      case LayerKind::Dense:
      case LayerKind::Conv2D: {
        const auto rows = affine_rows(layer, shape);
        next.reserve(rows.size());
        for (const AffineRow& row : rows) {
          double acc = row.bias;
          for (const auto& [idx, w] : row.terms) acc += w * value[idx];
          next.push_back(acc);
        }
        break;
      }
      case LayerKind::MaxPool: {
        const auto windows = pool_windows(layer, shape);
        next.reserve(windows.size());
        for (const auto& window : windows) {
          double best = value[window[0]];
          for (int idx : window) best = std::max(best, value[idx]);
          next.push_back(best);
        }
        break;
      }
    }
    value = std::move(next);
    shape = std::move(out_shape);
  }
  return value;
}

std::optional<Label> classify_output(const std::vector<double>& output, double margin) {
  if (margin < 0) throw Error("classify: margin must be >= 0");
  std::optional<Label> winner;
  for (size_t t = 0; t < output.size(); ++t) {
    bool wins = true;
    for (size_t k = 0; k < output.size(); ++k) {
      if (k == t) continue;
      if (!(output[t] >= output[k] + margin)) {
        wins = false;
        break;
      }
    }
    if (wins) {
      if (winner) return std::nullopt;  // tie: argmax undefined
      winner = static_cast<Label>(t) + 1;
    }
  }
  return winner;
}

std::optional<Label> classify(const NeuralNetwork& net, const std::vector<double>& x,
                              double margin) {
  return classify_output(forward(net, x), margin);
}

std::vector<IntervalBox> propagate_bounds(const NeuralNetwork& net,
                                          const IntervalBox& input_box) {
  input_box.validate();
  if (input_box.size() != shape_size(net.input_shape))
    throw Error(fmt::format("propagate_bounds: box has dimension {}, expected {}",
                            input_box.size(), shape_size(net.input_shape)));
  std::vector<IntervalBox> boxes;
  boxes.reserve(net.layers.size() + 1);
  boxes.push_back(input_box);
  Shape shape = net.input_shape;
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const Layer& layer = net.layers[i];
    const IntervalBox& in = boxes.back();
    IntervalBox out;
    switch (layer.kind) {
      case LayerKind::Relu:
        out = in;
        for (double& v : out.lower) v = std::max(0.0, v);
        for (double& v : out.upper) v = std::max(0.0, v);
        break;
      case LayerKind::Dense:
      case LayerKind::Conv2D:
        for (const AffineRow& row : affine_rows(layer, shape)) {
          double lo = row.bias, hi = row.bias;
          for (const auto& [idx, w] : row.terms) {
            if (w >= 0) {
              lo += w * in.lower[idx];
              hi += w * in.upper[idx];
            } else {
              lo += w * in.upper[idx];
              hi += w * in.lower[idx];
            }
          }
          out.lower.push_back(lo);
          out.upper.push_back(hi);
        }
        break;
      case LayerKind::MaxPool:
        for (const auto& window : pool_windows(layer, shape)) {
          double lo = in.lower[window[0]], hi = in.upper[window[0]];
          for (int idx : window) {
            lo = std::max(lo, in.lower[idx]);
            hi = std::max(hi, in.upper[idx]);
          }
          out.lower.push_back(lo);
          out.upper.push_back(hi);
        }
        break;
    }
    shape = layer.output_shape(shape);
    boxes.push_back(std::move(out));
  }
  return boxes;
}

// ---------------------------------------------------------------------------
// JSON serialization

namespace {

using nlohmann::json;

json layer_to_json(const Layer& layer) {
  json j;
  switch (layer.kind) {
    case LayerKind::Dense:
      j["kind"] = "dense";
      j["w"] = layer.weights;
      j["b"] = layer.bias;
      break;
    case LayerKind::Relu:
      j["kind"] = "relu";
      break;
    case LayerKind::Conv2D:
      j["kind"] = "conv2d";
      j["kernel"] = layer.kernel;
      j["bias"] = layer.conv_bias;
      j["stride"] = layer.stride;
      j["padding"] = layer.padding;
      break;
    case LayerKind::MaxPool:
      j["kind"] = "maxpool";
      j["window"] = {layer.window_h, layer.window_w};
      j["stride"] = layer.stride;
      break;
  }
  return j;
}

Layer layer_from_json(const json& j, const std::string& where) {
  if (!j.contains("kind"))
    throw Error(fmt::format("{}: layer is missing \"kind\"", where));
  const std::string kind = j.at("kind").get<std::string>();
  try {
    if (kind == "dense") {
      return Layer::dense(j.at("w").get<std::vector<std::vector<double>>>(),
                          j.at("b").get<std::vector<double>>());
    }
    if (kind == "relu") return Layer::relu();
    if (kind == "conv2d") {
      return Layer::conv2d(
          j.at("kernel")
              .get<std::vector<std::vector<std::vector<std::vector<double>>>>>(),
          j.at("bias").get<std::vector<double>>(),
          j.value("stride", 1), j.value("padding", 0));
    }
    if (kind == "maxpool") {
      const auto window = j.at("window").get<std::vector<int>>();
      if (window.size() != 2)
        throw Error("maxpool window must have two entries");
      return Layer::maxpool(window[0], window[1], j.value("stride", window[0]));
    }
  } catch (const json::exception& e) {
    throw Error(fmt::format("{}: {}", where, e.what()));
  }
  throw Error(fmt::format("{}: unknown layer kind \"{}\"", where, kind));
}

json parse_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(fmt::format("{}: {}", what, e.what()));
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open {}", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write {}", path));
  out << text;
}

}  // namespace

std::string ensemble_to_json(const Ensemble& ensemble) {
  json j;
  j["input_shape"] = ensemble.input_shape();
  j["num_labels"] = ensemble.num_labels();
  j["networks"] = json::array();
  for (const NeuralNetwork& net : ensemble.networks) {
    json jn;
    jn["layers"] = json::array();
    for (const Layer& layer : net.layers) jn["layers"].push_back(layer_to_json(layer));
    j["networks"].push_back(std::move(jn));
  }
  return j.dump(2) + "\n";
}

Ensemble ensemble_from_json(const std::string& text) {
  const json j = parse_text(text, "ensemble");
  Ensemble ensemble;
  try {
    const Shape input_shape = j.at("input_shape").get<Shape>();
    const int num_labels = j.at("num_labels").get<int>();
    for (size_t n = 0; n < j.at("networks").size(); ++n) {
      const json& jn = j.at("networks").at(n);
      NeuralNetwork net;
      net.input_shape = input_shape;
      net.num_labels = num_labels;
      const auto& jlayers = jn.at("layers");
      for (size_t l = 0; l < jlayers.size(); ++l)
        net.layers.push_back(layer_from_json(
            jlayers.at(l), fmt::format("networks[{}].layers[{}]", n, l)));
      ensemble.networks.push_back(std::move(net));
    }
  } catch (const json::exception& e) {
    throw Error(fmt::format("ensemble: {}", e.what()));
  }
  ensemble.validate();
  return ensemble;
}

std::string dataset_to_json(const LabelledDataset& data) {
  json j;
  j["points"] = data.points;
  j["labels"] = data.labels;
  return j.dump(2) + "\n";
}

LabelledDataset dataset_from_json(const std::string& text) {
  const json j = parse_text(text, "dataset");
  LabelledDataset data;
  try {
    data.points = j.at("points").get<std::vector<std::vector<double>>>();
    data.labels = j.at("labels").get<std::vector<Label>>();
  } catch (const json::exception& e) {
    throw Error(fmt::format("dataset: {}", e.what()));
  }
  // Standalone invariants; the upper label range is checked once the dataset
  // is paired with an ensemble.
  if (data.points.empty()) throw Error("dataset: needs at least one point");
  if (data.points.size() != data.labels.size())
    throw Error(fmt::format("dataset: {} points but {} labels", data.points.size(),
                            data.labels.size()));
  for (size_t jdx = 0; jdx < data.points.size(); ++jdx) {
    if (data.points[jdx].size() != data.points[0].size())
      throw Error(fmt::format("dataset: point {} has dimension {}, expected {}",
                              jdx, data.points[jdx].size(), data.points[0].size()));
    if (!all_finite(data.points[jdx]))
      throw Error(fmt::format("dataset: point {} has a non-finite entry", jdx));
    if (data.labels[jdx] < 1)
      throw Error(fmt::format("dataset: label out of range at index {} (got {}, "
                              "labels are 1-based)",
                              jdx, data.labels[jdx]));
  }
  return data;
}

Ensemble load_ensemble(const std::string& path) {
  try {
    return ensemble_from_json(read_file(path));
  } catch (const Error& e) {
    throw Error(fmt::format("{}: {}", path, e.what()));
  }
}

LabelledDataset load_dataset(const std::string& path) {
  try {
    return dataset_from_json(read_file(path));
  } catch (const Error& e) {
    throw Error(fmt::format("{}: {}", path, e.what()));
  }
}

void save_ensemble(const Ensemble& ensemble, const std::string& path) {
  write_file(path, ensemble_to_json(ensemble));
}

void save_dataset(const LabelledDataset& data, const std::string& path) {
  write_file(path, dataset_to_json(data));
}

}  // namespace ensrob
