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

#include "ensrob/constraint_system.hpp"

#include <cmath>

#include <fmt/format.h>

namespace ensrob {

LinExpr& LinExpr::add(VarId var, double coeff) {
  for (auto& [existing, c] : terms) {
    if (existing == var) {
      c += coeff;
      return *this;
    }
  }
  terms.emplace_back(var, coeff);
  return *this;
}

double LinExpr::evaluate(const std::vector<double>& assignment) const {
  double acc = constant;
  for (const auto& [var, coeff] : terms) acc += coeff * assignment.at(var.index);
  return acc;
}

VarId ConstraintSystem::add_continuous(const std::string& name, double lo, double hi,
                                       VarRole role, VarCoords coords) {
  // +inf upper bounds are allowed (the LP reader needs them); lower bounds
  // anchor the simplex shift and must be finite.
  if (!std::isfinite(lo) || std::isnan(hi))
    throw Error(fmt::format("variable {}: lower bound must be finite (got [{}, {}])",
                            name, lo, hi));
  if (lo > hi)
    throw Error(fmt::format("variable {}: lower bound {} above upper bound {}",
                            name, lo, hi));
  if (name_index_.count(name))
    throw std::logic_error(fmt::format("duplicate variable name {}", name));
  VarId id{static_cast<int>(vars_.size())};
  vars_.push_back(VarInfo{name, lo, hi, false, role, coords});
  name_index_.emplace(name, id.index);
  return id;
}

VarId ConstraintSystem::add_binary(const std::string& name, VarRole role,
                                   VarCoords coords) {
  VarId id = add_continuous(name, 0.0, 1.0, role, coords);
  vars_[id.index].is_binary = true;
  return id;
}

int ConstraintSystem::add_constraint(const std::string& name, LinExpr expr, Rel rel,
                                     int group) {
  if (!std::isfinite(expr.constant))
    throw std::logic_error(fmt::format("constraint {}: non-finite constant", name));
  for (const auto& [var, coeff] : expr.terms) {
    if (var.index < 0 || var.index >= num_vars())
      throw std::logic_error(
          fmt::format("constraint {}: undeclared variable", name));
    if (!std::isfinite(coeff))
      throw std::logic_error(fmt::format("constraint {}: non-finite coefficient on {}",
                                         name, vars_[var.index].name));
  }
  constraints_.push_back(Constraint{name, std::move(expr), rel, group});
  return static_cast<int>(constraints_.size()) - 1;
}

int ConstraintSystem::add_group(GadgetGroup group) {
  groups_.push_back(std::move(group));
  return static_cast<int>(groups_.size()) - 1;
}

void ConstraintSystem::set_objective_maximize(LinExpr expr) {
  objective_ = std::move(expr);
}

const LinExpr& ConstraintSystem::objective() const {
  if (!objective_) throw std::logic_error("constraint system has no objective");
  return *objective_;
}

std::optional<VarId> ConstraintSystem::find(const std::string& name) const {
  const auto it = name_index_.find(name);
  if (it == name_index_.end()) return std::nullopt;
  return VarId{it->second};
}

std::vector<VarId> ConstraintSystem::vars_with_role(VarRole role) const {
  std::vector<VarId> out;
  for (int i = 0; i < num_vars(); ++i)
    if (vars_[i].role == role) out.push_back(VarId{i});
  return out;
}

std::optional<VarId> ConstraintSystem::var_at(VarRole role, VarCoords coords) const {
  for (int i = 0; i < num_vars(); ++i) {
    const VarInfo& v = vars_[i];
    if (v.role == role && v.coords.classifier == coords.classifier &&
        v.coords.attack == coords.attack && v.coords.point == coords.point &&
        v.coords.coord == coords.coord)
      return VarId{i};
  }
  return std::nullopt;
}

void ConstraintSystem::validate() const {
  for (const VarInfo& v : vars_) {
    if (!std::isfinite(v.lo) || std::isnan(v.hi) || v.lo > v.hi)
      throw std::logic_error(fmt::format("variable {}: bad bounds", v.name));
    if (v.is_binary && (v.lo != 0.0 || v.hi != 1.0))
      throw std::logic_error(fmt::format("binary {}: bounds must be [0, 1]", v.name));
  }
  if (name_index_.size() != vars_.size())
    throw std::logic_error("variable names are not unique");
}

namespace {
const char* rel_text(Rel rel) {
  switch (rel) {
    case Rel::Le: return "<=";
    case Rel::Ge: return ">=";
    case Rel::Eq: return "=";
  }
  return "?";
}
}  // namespace

std::optional<std::string> ConstraintSystem::audit(
    const std::vector<double>& assignment, double tol) const {
  if (assignment.size() != vars_.size())
    return fmt::format("assignment has {} values for {} variables",
                       assignment.size(), vars_.size());
  for (size_t i = 0; i < vars_.size(); ++i) {
    const VarInfo& v = vars_[i];
    const double x = assignment[i];
    if (!std::isfinite(x)) return fmt::format("{} is not finite", v.name);
    if (x < v.lo - tol || x > v.hi + tol)
      return fmt::format("{} = {} outside [{}, {}]", v.name, x, v.lo, v.hi);
    if (v.is_binary && std::abs(x - std::round(x)) > tol)
      return fmt::format("binary {} = {} is fractional", v.name, x);
  }
  for (const Constraint& c : constraints_) {
    const double value = c.expr.evaluate(assignment);
    const bool ok = (c.rel == Rel::Le && value <= tol) ||
                    (c.rel == Rel::Ge && value >= -tol) ||
                    (c.rel == Rel::Eq && std::abs(value) <= tol);
    if (!ok)
      return fmt::format("constraint {} violated: lhs {} {} 0", c.name, value,
                         rel_text(c.rel));
  }
  return std::nullopt;
}

}  // namespace ensrob
