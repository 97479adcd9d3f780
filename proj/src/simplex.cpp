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

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ensrob/milp_core.hpp"

namespace ensrob {

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kReducedCostTol = 1e-9;
constexpr double kStallImprovement = 1e-12;
constexpr long kStallLimit = 2000;

// Dense two-phase tableau. Variables are shifted by their lower bounds so
// the working variables are all >= 0; finite upper bounds become rows.
class Tableau {
 public:
  Tableau(const LpProblem& lp, long max_iterations)
      : lp_(lp), max_iterations_(max_iterations) {}

  LpResult run();

 private:
  struct WorkRow {
    std::vector<double> coeffs;  // structural part, dense
    Rel rel;
    double rhs;
  };

  void build_rows();
  void assemble();
  void price_out(std::vector<double>& obj_row) const;
  bool simplex_loop(std::vector<double>& obj_row, bool phase_one, LpResult& out);
  void pivot(int row, int col, std::vector<double>& obj_row,
             std::vector<double>* secondary);
  void drive_out_artificials();

  const LpProblem& lp_;
  long max_iterations_;
  long iterations_ = 0;

  int n_ = 0;        // structural columns
  int n_slack_ = 0;  // slack/surplus columns
  int n_art_ = 0;    // artificial columns
  int cols_ = 0;     // total columns excluding rhs

  std::vector<WorkRow> work_rows_;
  std::vector<std::vector<double>> tab_;  // m x (cols_+1), rhs last
  std::vector<int> basis_;
  std::vector<double> shift_;        // original lower bounds
  std::vector<double> phase2_cost_;  // structural objective after shift
  std::vector<bool> enterable_;      // artificial columns are not
  std::vector<double> secondary_obj_;  // real objective row during phase 1
};

void Tableau::build_rows() {
  n_ = lp_.num_vars;
  shift_.assign(n_, 0.0);
  for (int i = 0; i < n_; ++i) {
    if (!std::isfinite(lp_.lower[i]))
      throw Error("lp: lower bounds must be finite");
    shift_[i] = lp_.lower[i];
  }

  // Original rows with shifted rhs.
  for (const LpRow& row : lp_.rows) {
    WorkRow wr;
    wr.coeffs.assign(n_, 0.0);
    double rhs = row.rhs;
    for (const auto& [idx, coeff] : row.terms) {
      wr.coeffs[idx] += coeff;
      rhs -= coeff * shift_[idx];
    }
    wr.rel = row.rel;
    wr.rhs = rhs;
    work_rows_.push_back(std::move(wr));
  }

  // Finite upper bounds become y_i <= hi - lo.
  for (int i = 0; i < n_; ++i) {
    if (!std::isfinite(lp_.upper[i])) continue;
    WorkRow wr;
    wr.coeffs.assign(n_, 0.0);
    wr.coeffs[i] = 1.0;
    wr.rel = Rel::Le;
    wr.rhs = lp_.upper[i] - shift_[i];
    if (wr.rhs < 0) throw Error("lp: upper bound below lower bound");
    work_rows_.push_back(std::move(wr));
  }
}

void Tableau::assemble() {
  const int m = static_cast<int>(work_rows_.size());

  // Normalize row signs so every rhs is nonnegative.
  for (WorkRow& wr : work_rows_) {
    if (wr.rhs < 0) {
      for (double& c : wr.coeffs) c = -c;
      wr.rhs = -wr.rhs;
      if (wr.rel == Rel::Le)
        wr.rel = Rel::Ge;
      else if (wr.rel == Rel::Ge)
        wr.rel = Rel::Le;
    }
  }

  n_slack_ = 0;
  for (const WorkRow& wr : work_rows_)
    if (wr.rel != Rel::Eq) ++n_slack_;

  // Slack columns first; artificials appended as needed.
  std::vector<int> slack_col(m, -1);
  std::vector<int> art_col(m, -1);
  int next_slack = n_;
  n_art_ = 0;
  for (int r = 0; r < m; ++r) {
    if (work_rows_[r].rel != Rel::Eq) slack_col[r] = next_slack++;
    // Ge rows get a surplus (-1 slack), so they still need an artificial;
    // Eq rows always do.
    if (work_rows_[r].rel != Rel::Le) ++n_art_;
  }
  int next_art = n_ + n_slack_;
  cols_ = n_ + n_slack_ + n_art_;

  tab_.assign(m, std::vector<double>(cols_ + 1, 0.0));
  basis_.assign(m, -1);
  enterable_.assign(cols_, true);

  for (int r = 0; r < m; ++r) {
    const WorkRow& wr = work_rows_[r];
    for (int j = 0; j < n_; ++j) tab_[r][j] = wr.coeffs[j];
    tab_[r][cols_] = wr.rhs;
    if (wr.rel == Rel::Le) {
      tab_[r][slack_col[r]] = 1.0;
      basis_[r] = slack_col[r];
    } else {
      if (wr.rel == Rel::Ge) tab_[r][slack_col[r]] = -1.0;
      art_col[r] = next_art++;
      tab_[r][art_col[r]] = 1.0;
      basis_[r] = art_col[r];
      enterable_[art_col[r]] = false;
    }
  }

  phase2_cost_.assign(cols_, 0.0);
  if (!lp_.objective.empty())
    for (int j = 0; j < n_; ++j) phase2_cost_[j] = lp_.objective[j];
}

// obj_row has cols_+1 entries; entry j is the reduced cost, the last entry
// is minus the current objective value.
void Tableau::price_out(std::vector<double>& obj_row) const {
  for (size_t r = 0; r < tab_.size(); ++r) {
    const double cost = obj_row[basis_[r]];
    if (cost == 0.0) continue;
    for (int j = 0; j <= cols_; ++j) obj_row[j] -= cost * tab_[r][j];
  }
}

void Tableau::pivot(int row, int col, std::vector<double>& obj_row,
                    std::vector<double>* secondary) {
  const double p = tab_[row][col];
  for (int j = 0; j <= cols_; ++j) tab_[row][j] /= p;
  tab_[row][col] = 1.0;
  for (size_t r = 0; r < tab_.size(); ++r) {
    if (static_cast<int>(r) == row) continue;
    const double f = tab_[r][col];
    if (f == 0.0) continue;
    for (int j = 0; j <= cols_; ++j) tab_[r][j] -= f * tab_[row][j];
    tab_[r][col] = 0.0;
  }
  const double fo = obj_row[col];
  if (fo != 0.0) {
    for (int j = 0; j <= cols_; ++j) obj_row[j] -= fo * tab_[row][j];
    obj_row[col] = 0.0;
  }
  if (secondary) {
    const double fs = (*secondary)[col];
    if (fs != 0.0) {
      for (int j = 0; j <= cols_; ++j) (*secondary)[j] -= fs * tab_[row][j];
      (*secondary)[col] = 0.0;
    }
  }
  basis_[row] = col;
}

bool Tableau::simplex_loop(std::vector<double>& obj_row, bool phase_one,
                           LpResult& out) {
  bool bland = false;
  long stall = 0;
  double last_obj = -obj_row[cols_];
  std::vector<double>* secondary = phase_one ? &secondary_obj_ : nullptr;

  while (true) {
    if (++iterations_ > max_iterations_) {
      out.status = LpStatus::IterationLimit;
      return false;
    }
    // Entering column: Dantzig, or Bland once stalled.
    int enter = -1;
    double best = kReducedCostTol;
    for (int j = 0; j < cols_; ++j) {
      if (!enterable_[j]) continue;
      const double rc = obj_row[j];
      if (rc <= kReducedCostTol) continue;
      if (bland) {
        enter = j;
        break;
      }
      if (rc > best) {
        best = rc;
        enter = j;
      }
    }
    if (enter < 0) return true;  // optimal for this phase

    // Ratio test; ties by smallest basis variable index.
    int leave = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (size_t r = 0; r < tab_.size(); ++r) {
      const double a = tab_[r][enter];
      if (a <= kPivotTol) continue;
      const double ratio = tab_[r][cols_] / a;
      if (ratio < best_ratio - 1e-12 ||
          (ratio < best_ratio + 1e-12 &&
           (leave < 0 || basis_[r] < basis_[leave]))) {
        best_ratio = ratio;
        leave = static_cast<int>(r);
      }
    }
    if (leave < 0) {
      out.status = LpStatus::Unbounded;
      return false;
    }

    pivot(leave, enter, obj_row, secondary);

    const double obj = -obj_row[cols_];
    if (obj - last_obj < kStallImprovement) {
      if (++stall >= kStallLimit) bland = true;
    } else {
      stall = 0;
    }
    last_obj = obj;
  }
}

void Tableau::drive_out_artificials() {
  const int art_start = n_ + n_slack_;
  for (size_t r = 0; r < tab_.size(); ++r) {
    if (basis_[r] < art_start) continue;
    int col = -1;
    for (int j = 0; j < art_start; ++j) {
      if (std::abs(tab_[r][j]) > kLpFeasibilityTol) {
        col = j;
        break;
      }
    }
    if (col >= 0) {
      pivot(static_cast<int>(r), col, secondary_obj_, nullptr);
    } else {
      // Redundant row; scrub dust so later pivots cannot revive it.
      for (int j = 0; j < art_start; ++j) tab_[r][j] = 0.0;
      tab_[r][cols_] = 0.0;
    }
  }
}

LpResult Tableau::run() {
  LpResult out;
  build_rows();
  assemble();

  secondary_obj_.assign(cols_ + 1, 0.0);
  for (int j = 0; j < cols_; ++j) secondary_obj_[j] = phase2_cost_[j];
  price_out(secondary_obj_);

  if (n_art_ > 0) {
    std::vector<double> phase1(cols_ + 1, 0.0);
    for (int j = n_ + n_slack_; j < cols_; ++j) phase1[j] = -1.0;
    price_out(phase1);
    if (!simplex_loop(phase1, /*phase_one=*/true, out)) {
      out.iterations = iterations_;
      return out;
    }
    // Phase 1 maximizes minus the artificial sum; anything below zero means
    // some artificial is stuck positive.
    const double phase1_value = -phase1[cols_];
    if (phase1_value < -kLpFeasibilityTol) {
      out.status = LpStatus::Infeasible;
      out.iterations = iterations_;
      return out;
    }
    drive_out_artificials();
  }

  if (!simplex_loop(secondary_obj_, /*phase_one=*/false, out)) {
    out.iterations = iterations_;
    return out;
  }

  // Recover the solution in original coordinates.
  out.x.assign(n_, 0.0);
  for (size_t r = 0; r < tab_.size(); ++r)
    if (basis_[r] < n_) out.x[basis_[r]] = tab_[r][cols_];
  for (int i = 0; i < n_; ++i) out.x[i] += shift_[i];

  out.objective = 0.0;
  if (!lp_.objective.empty())
    for (int i = 0; i < n_; ++i) out.objective += lp_.objective[i] * out.x[i];

  // Residual check against the original rows.
  for (const LpRow& row : lp_.rows) {
    double lhs = 0.0;
    for (const auto& [idx, coeff] : row.terms) lhs += coeff * out.x[idx];
    const double slack = lhs - row.rhs;
    const bool ok = (row.rel == Rel::Le && slack <= 1e-6) ||
                    (row.rel == Rel::Ge && slack >= -1e-6) ||
                    (row.rel == Rel::Eq && std::abs(slack) <= 1e-6);
    if (!ok) {
      out.status = LpStatus::Numerical;
      out.iterations = iterations_;
      return out;
    }
  }
  for (int i = 0; i < n_; ++i) {
    if (out.x[i] < lp_.lower[i] - 1e-6 ||
        (std::isfinite(lp_.upper[i]) && out.x[i] > lp_.upper[i] + 1e-6)) {
      out.status = LpStatus::Numerical;
      out.iterations = iterations_;
      return out;
    }
  }

  out.status = LpStatus::Optimal;
  out.iterations = iterations_;
  return out;
}

}  // namespace

LpResult solve_lp(const LpProblem& lp, long max_iterations) {
  if (lp.num_vars <= 0) throw Error("lp: no variables");
  if (static_cast<int>(lp.lower.size()) != lp.num_vars ||
      static_cast<int>(lp.upper.size()) != lp.num_vars)
    throw Error("lp: bounds arrays must match num_vars");
  if (!lp.objective.empty() &&
      static_cast<int>(lp.objective.size()) != lp.num_vars)
    throw Error("lp: objective must be empty or match num_vars");
  long rows_hint = static_cast<long>(lp.rows.size()) + lp.num_vars;
  if (max_iterations <= 0) max_iterations = 2000 + 50 * rows_hint;
  Tableau tableau(lp, max_iterations);
  return tableau.run();
}

}  // namespace ensrob
