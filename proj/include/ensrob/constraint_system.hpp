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

#ifndef ENSROB_CONSTRAINT_SYSTEM_HPP
#define ENSROB_CONSTRAINT_SYSTEM_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ensrob/error.hpp"

namespace ensrob {

// Opaque handle into one ConstraintSystem's variable table.
struct VarId {
  int index = -1;
  bool valid() const { return index >= 0; }
  friend bool operator==(VarId a, VarId b) { return a.index == b.index; }
  friend bool operator<(VarId a, VarId b) { return a.index < b.index; }
};

// What a variable means in terms of the verification problem; coordinates
// that do not apply stay at -1.
enum class VarRole { Attack, Probability, Loss, Product, Activation, Aux };

struct VarCoords {
  int classifier = -1;  // c
  int attack = -1;      // i
  int point = -1;       // j
  int coord = -1;       // k / neuron
};

struct VarInfo {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
  bool is_binary = false;
  VarRole role = VarRole::Aux;
  VarCoords coords;
};

// Affine expression: constant + sum coeff * var. Adding to an existing
// variable accumulates into its coefficient, so terms stay duplicate-free.
struct LinExpr {
  double constant = 0.0;
  std::vector<std::pair<VarId, double>> terms;

  LinExpr& add(VarId var, double coeff);
  LinExpr& add_constant(double value) {
    constant += value;
    return *this;
  }
  double evaluate(const std::vector<double>& assignment) const;
};

enum class Rel { Le, Ge, Eq };

// Constraint expr REL 0; any right-hand constant is folded into expr.
struct Constraint {
  std::string name;
  LinExpr expr;
  Rel rel = Rel::Le;
  int group = -1;  // gadget group that owns this row, or -1
};

// A structural gadget whose big-M rows admit an exact functional form. The
// SMT emitter renders these natively (ite) and hides the member rows and
// auxiliary binaries; the LP path uses the rows as-is.
struct GadgetGroup {
  enum class Kind { Relu, MaxPool, Loss };
  Kind kind = Kind::Relu;
  std::vector<VarId> inputs;   // relu: {z}; maxpool: window; loss: output vars
  VarId output;                // relu/maxpool: y; loss: the loss binary
  std::vector<VarId> aux;      // hidden binaries
  int truth_index = -1;        // loss: 0-based index of the truth label
  double margin = 0.0;         // loss: the user-facing margin
};

// Problem-level coordinates of an encoded instance, used to map solver
// assignments back to attacks and probabilities.
struct ModelDims {
  int classifiers = 0;
  int attacks = 0;
  int points = 0;
  int dim = 0;
  int labels = 0;
  double epsilon = 0.0;
  double alpha = 0.0;
  double margin = 0.0;
};

class ConstraintSystem {
 public:
  VarId add_continuous(const std::string& name, double lo, double hi,
                       VarRole role = VarRole::Aux, VarCoords coords = {});
  VarId add_binary(const std::string& name, VarRole role = VarRole::Aux,
                   VarCoords coords = {});

  int add_constraint(const std::string& name, LinExpr expr, Rel rel, int group = -1);
  int add_group(GadgetGroup group);
  GadgetGroup& group_mut(int id) { return groups_.at(id); }

  void set_objective_maximize(LinExpr expr);
  bool has_objective() const { return objective_.has_value(); }
  const LinExpr& objective() const;

  const VarInfo& var(VarId id) const { return vars_.at(id.index); }
  VarInfo& var_mut(VarId id) { return vars_.at(id.index); }
  int num_vars() const { return static_cast<int>(vars_.size()); }
  int num_constraints() const { return static_cast<int>(constraints_.size()); }
  const std::vector<VarInfo>& vars() const { return vars_; }
  const std::vector<Constraint>& constraints() const { return constraints_; }
  const std::vector<GadgetGroup>& groups() const { return groups_; }

  std::optional<VarId> find(const std::string& name) const;
  std::vector<VarId> vars_with_role(VarRole role) const;
  std::optional<VarId> var_at(VarRole role, VarCoords coords) const;

  ModelDims dims;

  // Structural checks: unique names, declared variables, finite bounds.
  void validate() const;

  // First violated constraint/bound/integrality beyond tol, or nullopt when
  // the assignment satisfies everything.
  std::optional<std::string> audit(const std::vector<double>& assignment,
                                   double tol) const;

 private:
  std::vector<VarInfo> vars_;
  std::vector<Constraint> constraints_;
  std::vector<GadgetGroup> groups_;
  std::optional<LinExpr> objective_;
  std::map<std::string, int> name_index_;
};

}  // namespace ensrob

#endif  // ENSROB_CONSTRAINT_SYSTEM_HPP
