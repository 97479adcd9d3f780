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

#include "ensrob/encoder.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace ensrob {

namespace {

void check_big_m(double big_m, double guarded_width, const std::string& where) {
  if (!(big_m > guarded_width))
    throw std::logic_error(fmt::format(
        "{}: big-M {} does not strictly exceed the guarded width {}", where,
        big_m, guarded_width));
}

}  // namespace

std::vector<VarId> encode_network(ConstraintSystem& cs, const NeuralNetwork& net,
                                  const std::vector<VarId>& input_vars,
                                  const std::vector<IntervalBox>& layer_boxes,
                                  const std::string& tag) {
  net.validate();
  if (static_cast<int>(input_vars.size()) != shape_size(net.input_shape))
    throw Error(fmt::format("encode_network[{}]: {} input vars for input size {}",
                            tag, input_vars.size(), shape_size(net.input_shape)));
  if (layer_boxes.size() != net.layers.size() + 1)
    throw Error(fmt::format("encode_network[{}]: expected {} bound boxes, got {}",
                            tag, net.layers.size() + 1, layer_boxes.size()));
  for (const IntervalBox& box : layer_boxes)
    for (size_t n = 0; n < box.lower.size(); ++n)
      if (!std::isfinite(box.lower[n]) || !std::isfinite(box.upper[n]))
        throw Error(fmt::format(
            "encode_network[{}]: unbounded activation interval; provide tighter "
            "layer bounds (big-M constants must be finite)",
            tag));

  std::vector<VarId> current = input_vars;
  Shape shape = net.input_shape;
  for (size_t l = 0; l < net.layers.size(); ++l) {
    const Layer& layer = net.layers[l];
    const IntervalBox& in_box = layer_boxes[l];
    const IntervalBox& out_box = layer_boxes[l + 1];
    std::vector<VarId> next;

    switch (layer.kind) {
      case LayerKind::Dense:
      case LayerKind::Conv2D: {
        const auto rows = affine_rows(layer, shape);
        next.reserve(rows.size());
        for (size_t n = 0; n < rows.size(); ++n) {
          const VarId z = cs.add_continuous(
              fmt::format("act_{}_l{}_n{}", tag, l, n), out_box.lower[n],
              out_box.upper[n], VarRole::Activation);
          LinExpr expr;
          expr.add(z, 1.0);
          for (const auto& [idx, w] : rows[n].terms) expr.add(current[idx], -w);
          expr.add_constant(-rows[n].bias);
          cs.add_constraint(fmt::format("c_aff_{}_l{}_n{}", tag, l, n),
                            std::move(expr), Rel::Eq);
          next.push_back(z);
        }
        break;
      }
      case LayerKind::Relu: {
        next.reserve(current.size());
        for (size_t n = 0; n < current.size(); ++n) {
          const VarId z = current[n];
          const double lo = in_box.lower[n];
          const double hi = in_box.upper[n];
          const VarId y = cs.add_continuous(
              fmt::format("act_{}_l{}_n{}", tag, l, n), std::max(0.0, lo),
              std::max(0.0, hi), VarRole::Activation);
          GadgetGroup group;
          group.kind = GadgetGroup::Kind::Relu;
          group.inputs = {z};
          group.output = y;
          const int gid = cs.add_group(group);
          if (hi <= 0.0) {
            // Inactive phase: bounds already pin y to 0.
          } else if (lo >= 0.0) {
            LinExpr eq;
            eq.add(y, 1.0).add(z, -1.0);
            cs.add_constraint(fmt::format("c_relu_{}_l{}_n{}_id", tag, l, n),
                              std::move(eq), Rel::Eq, gid);
          } else {
            const VarId b =
                cs.add_binary(fmt::format("rb_{}_l{}_n{}", tag, l, n));
            cs.group_mut(gid).aux.push_back(b);
            LinExpr ge;
            ge.add(y, 1.0).add(z, -1.0);
            cs.add_constraint(fmt::format("c_relu_{}_l{}_n{}_gez", tag, l, n),
                              std::move(ge), Rel::Ge, gid);
            // y <= z - lo*(1-b)
            LinExpr ub1;
            ub1.add(y, 1.0).add(z, -1.0).add(b, -lo).add_constant(lo);
            cs.add_constraint(fmt::format("c_relu_{}_l{}_n{}_ub1", tag, l, n),
                              std::move(ub1), Rel::Le, gid);
            // y <= hi*b
            LinExpr ub2;
            ub2.add(y, 1.0).add(b, -hi);
            cs.add_constraint(fmt::format("c_relu_{}_l{}_n{}_ub2", tag, l, n),
                              std::move(ub2), Rel::Le, gid);
          }
          next.push_back(y);
        }
        break;
      }
      case LayerKind::MaxPool: {
        const auto windows = pool_windows(layer, shape);
        next.reserve(windows.size());
        for (size_t n = 0; n < windows.size(); ++n) {
          const auto& window = windows[n];
          const VarId y = cs.add_continuous(
              fmt::format("act_{}_l{}_n{}", tag, l, n), out_box.lower[n],
              out_box.upper[n], VarRole::Activation);
          GadgetGroup group;
          group.kind = GadgetGroup::Kind::MaxPool;
          group.output = y;
          for (int idx : window) group.inputs.push_back(current[idx]);
          const int gid = cs.add_group(group);

          double window_max_hi = in_box.upper[window[0]];
          for (int idx : window)
            window_max_hi = std::max(window_max_hi, in_box.upper[idx]);

          LinExpr sel_sum;
          for (size_t s = 0; s < window.size(); ++s) {
            const VarId z = current[window[s]];
            LinExpr ge;
            ge.add(y, 1.0).add(z, -1.0);
            cs.add_constraint(fmt::format("c_pool_{}_l{}_n{}_ge{}", tag, l, n, s),
                              std::move(ge), Rel::Ge, gid);
            const VarId sel =
                cs.add_binary(fmt::format("mps_{}_l{}_n{}_s{}", tag, l, n, s));
            const double big_m =
                window_max_hi - in_box.lower[window[s]] + 1.0;
            check_big_m(big_m, window_max_hi - in_box.lower[window[s]],
                        fmt::format("pool {} l{} n{} s{}", tag, l, n, s));
            // y <= z_s + M*(1 - sel)
            LinExpr ub;
            ub.add(y, 1.0).add(z, -1.0).add(sel, big_m).add_constant(-big_m);
            cs.add_constraint(fmt::format("c_pool_{}_l{}_n{}_ub{}", tag, l, n, s),
                              std::move(ub), Rel::Le, gid);
            sel_sum.add(sel, 1.0);
            cs.group_mut(gid).aux.push_back(sel);
          }
          sel_sum.add_constant(-1.0);
          cs.add_constraint(fmt::format("c_pool_{}_l{}_n{}_sel", tag, l, n),
                            std::move(sel_sum), Rel::Eq, gid);
          next.push_back(y);
        }
        break;
      }
    }
    shape = layer.output_shape(shape);
    current = std::move(next);
  }
  return current;
}

void encode_abs_l1(ConstraintSystem& cs, const std::vector<VarId>& delta_vars,
                   double epsilon, const std::string& tag) {
  LinExpr total;
  for (size_t k = 0; k < delta_vars.size(); ++k) {
    const VarId t = cs.add_continuous(fmt::format("t_{}_k{}", tag, k), 0.0, epsilon);
    LinExpr pos;
    pos.add(t, 1.0).add(delta_vars[k], -1.0);
    cs.add_constraint(fmt::format("c_abs_{}_k{}_p", tag, k), std::move(pos), Rel::Ge);
    LinExpr neg;
    neg.add(t, 1.0).add(delta_vars[k], 1.0);
    cs.add_constraint(fmt::format("c_abs_{}_k{}_n", tag, k), std::move(neg), Rel::Ge);
    total.add(t, 1.0);
  }
  total.add_constant(-epsilon);
  cs.add_constraint(fmt::format("c_l1_{}", tag), std::move(total), Rel::Le);
}

VarId encode_loss(ConstraintSystem& cs, const std::vector<VarId>& output_vars,
                  Label truth, double margin, const std::string& tag,
                  VarCoords coords) {
  if (output_vars.size() < 2)
    throw Error(fmt::format("encode_loss[{}]: needs at least two labels", tag));
  if (truth < 1 || truth > static_cast<Label>(output_vars.size()))
    throw Error(fmt::format("encode_loss[{}]: truth label {} out of range", tag, truth));
  const int t = truth - 1;
  const double separation = margin > 0.0 ? margin : kTieEpsilon;

  const VarId loss = cs.add_binary(fmt::format("loss_{}", tag), VarRole::Loss, coords);
  GadgetGroup group;
  group.kind = GadgetGroup::Kind::Loss;
  group.inputs = output_vars;
  group.output = loss;
  group.truth_index = t;
  group.margin = margin;
  const int gid = cs.add_group(group);

  const VarInfo& truth_var = cs.var(output_vars[t]);
  LinExpr any_witness;
  for (size_t k = 0; k < output_vars.size(); ++k) {
    if (static_cast<int>(k) == t) continue;
    const VarInfo& other = cs.var(output_vars[k]);

    // loss = 0 forces y_t >= y_k + separation.
    const double m_sep = (other.hi - truth_var.lo) + separation + 1.0;
    check_big_m(m_sep, other.hi - truth_var.lo + separation,
                fmt::format("loss {} sep{}", tag, k));
    LinExpr sep;
    sep.add(output_vars[t], 1.0)
        .add(output_vars[k], -1.0)
        .add(loss, m_sep)
        .add_constant(-separation);
    cs.add_constraint(fmt::format("c_loss_{}_sep{}", tag, k), std::move(sep),
                      Rel::Ge, gid);

    // Selector k certifies y_k >= y_t.
    const VarId sel = cs.add_binary(fmt::format("ls_{}_k{}", tag, k));
    const double m_wit = (truth_var.hi - other.lo) + 1.0;
    check_big_m(m_wit, truth_var.hi - other.lo, fmt::format("loss {} wit{}", tag, k));
    LinExpr wit;
    wit.add(output_vars[k], 1.0)
        .add(output_vars[t], -1.0)
        .add(sel, -m_wit)
        .add_constant(m_wit);
    cs.add_constraint(fmt::format("c_loss_{}_wit{}", tag, k), std::move(wit),
                      Rel::Ge, gid);
    any_witness.add(sel, 1.0);
    cs.group_mut(gid).aux.push_back(sel);
  }
  // loss = 1 needs at least one selector.
  any_witness.add(loss, -1.0);
  cs.add_constraint(fmt::format("c_loss_{}_any", tag), std::move(any_witness),
                    Rel::Ge, gid);
  return loss;
}

VarId encode_product(ConstraintSystem& cs, VarId p, VarId b, const std::string& name,
                     VarCoords coords) {
  const VarInfo& pv = cs.var(p);
  const VarInfo& bv = cs.var(b);
  if (pv.lo < 0.0 || pv.hi > 1.0)
    throw Error(fmt::format("encode_product[{}]: {} must live in [0,1]", name, pv.name));
  if (!bv.is_binary)
    throw Error(fmt::format("encode_product[{}]: {} must be binary", name, bv.name));

  constexpr double kProductBigM = 2.0;
  const VarId c = cs.add_continuous(name, 0.0, 1.0, VarRole::Product, coords);
  // c >= p - M*(1-b)
  LinExpr ge;
  ge.add(c, 1.0).add(p, -1.0).add(b, -kProductBigM).add_constant(kProductBigM);
  cs.add_constraint(fmt::format("c_prod_{}_ge", name), std::move(ge), Rel::Ge);
  // c <= p + M*(1-b)
  LinExpr le1;
  le1.add(c, 1.0).add(p, -1.0).add(b, kProductBigM).add_constant(-kProductBigM);
  cs.add_constraint(fmt::format("c_prod_{}_le1", name), std::move(le1), Rel::Le);
  // c <= M*b
  LinExpr le2;
  le2.add(c, 1.0).add(b, -kProductBigM);
  cs.add_constraint(fmt::format("c_prod_{}_le2", name), std::move(le2), Rel::Le);
  return c;
}

namespace {

// encode_base and encode_single_classifier share the attack-variable block.
struct AttackBlock {
  std::vector<std::vector<std::vector<VarId>>> delta;  // [i][j][k]
  std::vector<std::vector<std::vector<VarId>>> point;  // [i][j][k]
};

AttackBlock encode_attack_block(ConstraintSystem& cs, const LabelledDataset& data,
                                int num_attacks, double epsilon) {
  const int dim = data.dim();
  AttackBlock block;
  block.delta.resize(num_attacks);
  block.point.resize(num_attacks);
  for (int i = 0; i < num_attacks; ++i) {
    block.delta[i].resize(data.size());
    block.point[i].resize(data.size());
    for (int j = 0; j < data.size(); ++j) {
      for (int k = 0; k < dim; ++k) {
        block.delta[i][j].push_back(cs.add_continuous(
            fmt::format("d_i{}_j{}_k{}", i, j, k), -epsilon, epsilon,
            VarRole::Attack, VarCoords{-1, i, j, k}));
      }
      encode_abs_l1(cs, block.delta[i][j], epsilon, fmt::format("i{}_j{}", i, j));
      for (int k = 0; k < dim; ++k) {
        const double x = data.points[j][k];
        const VarId ap = cs.add_continuous(fmt::format("ap_i{}_j{}_k{}", i, j, k),
                                           x - epsilon, x + epsilon);
        LinExpr eq;
        eq.add(ap, 1.0).add(block.delta[i][j][k], -1.0).add_constant(-x);
        cs.add_constraint(fmt::format("c_ap_i{}_j{}_k{}", i, j, k), std::move(eq),
                          Rel::Eq);
        block.point[i][j].push_back(ap);
      }
    }
  }
  return block;
}

}  // namespace

ConstraintSystem encode_base(const Ensemble& ensemble, const LabelledDataset& data,
                             const VerificationSpec& spec,
                             const BoundsProvider& bounds_provider) {
  ensemble.validate();
  data.validate(ensemble.input_shape(), ensemble.num_labels());
  if (!(spec.epsilon > 0.0) || spec.num_attacks < 1 || !(spec.margin >= 0.0) ||
      !(spec.alpha >= 0.0) || !(spec.alpha <= 1.0))
    throw Error("encode_base: invalid verification spec");
  const BoundsProvider& bounds =
      bounds_provider ? bounds_provider : BoundsProvider(propagate_bounds);

  ConstraintSystem cs;
  cs.dims = ModelDims{ensemble.size(), spec.num_attacks, data.size(), data.dim(),
                      ensemble.num_labels(), spec.epsilon, spec.alpha, spec.margin};

  std::vector<VarId> probs;
  AttackBlock block = encode_attack_block(cs, data, spec.num_attacks, spec.epsilon);
  LinExpr prob_sum;
  for (int i = 0; i < spec.num_attacks; ++i) {
    probs.push_back(cs.add_continuous(fmt::format("p_{}", i), 0.0, 1.0,
                                      VarRole::Probability, VarCoords{-1, i, -1, -1}));
    prob_sum.add(probs.back(), 1.0);
  }
  prob_sum.add_constant(-1.0);
  cs.add_constraint("c_prob_sum", std::move(prob_sum), Rel::Eq);

  // Layer bounds depend only on (classifier, point); they are shared across
  // attack slots.
  std::vector<std::vector<std::vector<IntervalBox>>> boxes(ensemble.size());
  for (int c = 0; c < ensemble.size(); ++c) {
    boxes[c].reserve(data.size());
    for (int j = 0; j < data.size(); ++j)
      boxes[c].push_back(bounds(ensemble.networks[c],
                                IntervalBox::around(data.points[j], spec.epsilon)));
  }

  std::vector<LinExpr> value_rows(ensemble.size());
  for (int c = 0; c < ensemble.size(); ++c) {
    for (int i = 0; i < spec.num_attacks; ++i) {
      for (int j = 0; j < data.size(); ++j) {
        const std::string tag = fmt::format("c{}_i{}_j{}", c, i, j);
        const std::vector<VarId> outputs = encode_network(
            cs, ensemble.networks[c], block.point[i][j], boxes[c][j], tag);
        const VarId loss = encode_loss(cs, outputs, data.labels[j], spec.margin,
                                       tag, VarCoords{c, i, j, -1});
        const VarId q = encode_product(cs, probs[i], loss, fmt::format("q_{}", tag),
                                       VarCoords{c, i, j, -1});
        value_rows[c].add(q, 1.0);
      }
    }
  }
  for (int c = 0; c < ensemble.size(); ++c) {
    value_rows[c].add_constant(-spec.alpha * data.size());
    cs.add_constraint(fmt::format("c_val_c{}", c), std::move(value_rows[c]), Rel::Ge);
  }

  // The metadata must cover exactly the advertised variables.
  const auto count = [&cs](VarRole role) {
    return static_cast<int>(cs.vars_with_role(role).size());
  };
  if (count(VarRole::Attack) != spec.num_attacks * data.size() * data.dim() ||
      count(VarRole::Probability) != spec.num_attacks ||
      count(VarRole::Loss) != ensemble.size() * spec.num_attacks * data.size() ||
      count(VarRole::Product) != ensemble.size() * spec.num_attacks * data.size())
    throw std::logic_error("encode_base: metadata variable counts are off");

  cs.validate();
  return cs;
}

void add_max_objective(ConstraintSystem& cs) {
  LinExpr objective;
  for (VarId q : cs.vars_with_role(VarRole::Product)) objective.add(q, 1.0);
  if (objective.terms.empty())
    throw Error("add_max_objective: system has no probability-loss products");
  cs.set_objective_maximize(std::move(objective));
}

ConstraintSystem encode_single_classifier(const NeuralNetwork& classifier,
                                          const LabelledDataset& data, double epsilon,
                                          double margin) {
  classifier.validate();
  data.validate(classifier.input_shape, classifier.num_labels);
  if (!(epsilon >= 0.0) || !(margin >= 0.0))
    throw Error("encode_single_classifier: epsilon and margin must be >= 0");

  ConstraintSystem cs;
  cs.dims = ModelDims{1, 1, data.size(), data.dim(), classifier.num_labels,
                      epsilon, 0.0, margin};

  AttackBlock block = encode_attack_block(cs, data, 1, epsilon);
  LinExpr objective;
  for (int j = 0; j < data.size(); ++j) {
    const std::string tag = fmt::format("c0_i0_j{}", j);
    const std::vector<IntervalBox> boxes = propagate_bounds(
        classifier, IntervalBox::around(data.points[j], epsilon));
    const std::vector<VarId> outputs =
        encode_network(cs, classifier, block.point[0][j], boxes, tag);
    const VarId loss = encode_loss(cs, outputs, data.labels[j], margin, tag,
                                   VarCoords{0, 0, j, -1});
    objective.add(loss, 1.0);
  }
  cs.set_objective_maximize(std::move(objective));
  cs.validate();
  return cs;
}

RandomizedAttack extract_witness(const ConstraintSystem& cs,
                                 const std::vector<double>& assignment) {
  const ModelDims& dims = cs.dims;
  if (dims.attacks < 1 || dims.points < 1 || dims.dim < 1)
    throw Error("extract_witness: system carries no attack metadata");
  if (static_cast<int>(assignment.size()) != cs.num_vars())
    throw Error("extract_witness: assignment size mismatch");

  // Index the attack/probability variables once.
  std::vector<VarId> prob_vars(dims.attacks, VarId{});
  std::vector<std::vector<std::vector<VarId>>> delta_vars(
      dims.attacks, std::vector<std::vector<VarId>>(
                        dims.points, std::vector<VarId>(dims.dim, VarId{})));
  for (int v = 0; v < cs.num_vars(); ++v) {
    const VarInfo& info = cs.vars()[v];
    if (info.role == VarRole::Probability) {
      prob_vars.at(info.coords.attack) = VarId{v};
    } else if (info.role == VarRole::Attack) {
      delta_vars.at(info.coords.attack).at(info.coords.point).at(info.coords.coord) =
          VarId{v};
    }
  }

  RandomizedAttack ra;
  for (int i = 0; i < dims.attacks; ++i) {
    DeterministicAttack attack;
    attack.perturbations.resize(dims.points);
    for (int j = 0; j < dims.points; ++j) {
      auto& row = attack.perturbations[j];
      row.resize(dims.dim);
      for (int k = 0; k < dims.dim; ++k) {
        const VarId id = delta_vars[i][j][k];
        if (!id.valid()) throw Error("extract_witness: missing attack variable");
        row[k] = assignment[id.index];
      }
      double norm = 0.0;
      for (double v : row) norm += std::abs(v);
      if (norm > dims.epsilon && norm > 0.0) {
        const double scale = dims.epsilon / norm * (1.0 - 1e-12);
        for (double& v : row) v *= scale;
      }
    }
    ra.attacks.push_back(std::move(attack));
    // Single-classifier systems have no probability block; the one attack
    // gets the whole mass.
    ra.probs.push_back(prob_vars[i].valid() ? assignment[prob_vars[i].index] : 1.0);
  }

  double total = 0.0;
  for (double& p : ra.probs) {
    p = std::max(0.0, p);
    total += p;
  }
  if (!(total > 0.0)) throw Error("extract_witness: probability mass is zero");
  for (double& p : ra.probs) p /= total;
  return ra;
}

}  // namespace ensrob
