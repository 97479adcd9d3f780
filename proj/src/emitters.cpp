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

#include "ensrob/emitters.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace ensrob {

namespace {

std::string num17(double value) {
  return fmt::format("{:.17g}", value);
}

// One linear term in LP syntax; unit coefficients print bare names.
void append_term(std::string& out, bool first, double coeff, const std::string& name) {
  const double mag = std::abs(coeff);
  std::string body = mag == 1.0 ? name : fmt::format("{} {}", num17(mag), name);
  if (first) {
    out += coeff < 0 ? "- " + body : body;
  } else {
    out += coeff < 0 ? " - " + body : " + " + body;
  }
}

const char* lp_rel(Rel rel) {
  switch (rel) {
    case Rel::Le: return "<=";
    case Rel::Ge: return ">=";
    case Rel::Eq: return "=";
  }
  return "?";
}

}  // namespace

std::string emit_lp(const ConstraintSystem& cs) {
  std::string out;
  bool used_dummy = false;

  out += "Maximize\n obj: ";
  bool wrote_term = false;
  if (cs.has_objective()) {
    bool first = true;
    for (const auto& [var, coeff] : cs.objective().terms) {
      if (coeff == 0.0) continue;
      append_term(out, first, coeff, cs.var(var).name);
      first = false;
      wrote_term = true;
    }
  }
  if (!wrote_term) {
    // Feasibility instances keep the section syntactically valid with a
    // pinned dummy variable.
    out += "0 x_dummy";
    used_dummy = true;
  }
  out += "\n";

  out += "Subject To\n";
  for (const Constraint& c : cs.constraints()) {
    out += fmt::format(" {}: ", c.name);
    bool first = true;
    for (const auto& [var, coeff] : c.expr.terms) {
      if (coeff == 0.0) continue;
      append_term(out, first, coeff, cs.var(var).name);
      first = false;
    }
    if (first) {
      out += "0 x_dummy";
      used_dummy = true;
    }
    out += fmt::format(" {} {}\n", lp_rel(c.rel), num17(-c.expr.constant));
  }

  out += "Bounds\n";
  for (const VarInfo& v : cs.vars()) {
    if (v.is_binary) continue;
    if (std::isfinite(v.hi))
      out += fmt::format(" {} <= {} <= {}\n", num17(v.lo), v.name, num17(v.hi));
    else
      out += fmt::format(" {} >= {}\n", v.name, num17(v.lo));
  }
  if (used_dummy) out += " 0 <= x_dummy <= 0\n";

  bool has_binary = false;
  for (const VarInfo& v : cs.vars()) has_binary |= v.is_binary;
  if (has_binary) {
    out += "Binary\n";
    for (const VarInfo& v : cs.vars())
      if (v.is_binary) out += fmt::format(" {}\n", v.name);
  }
  out += "End\n";
  return out;
}

// ---------------------------------------------------------------------------
// LP reader

namespace {

struct LpParserVar {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  bool bounded = false;
  bool binary = false;
};

bool is_number_token(const std::string& token) {
  char* end = nullptr;
  std::strtod(token.c_str(), &end);
  return end && *end == '\0' && end != token.c_str();
}

std::vector<std::string> tokenize_line(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream ss(line);
  std::string token;
  while (ss >> token) tokens.push_back(token);
  return tokens;
}

}  // namespace

ConstraintSystem parse_lp(const std::string& text) {
  enum class Section { None, Objective, Constraints, Bounds, Binary, End };
  Section section = Section::None;
  bool minimize = false;

  struct PendingConstraint {
    std::string name;
    std::vector<std::pair<std::string, double>> terms;
    Rel rel;
    double rhs;
  };
  std::vector<std::string> var_order;
  std::map<std::string, LpParserVar> var_info;
  std::vector<std::pair<std::string, double>> objective_terms;
  std::vector<PendingConstraint> pending;

  const auto touch_var = [&](const std::string& name) -> LpParserVar& {
    auto it = var_info.find(name);
    if (it == var_info.end()) {
      var_order.push_back(name);
      it = var_info.emplace(name, LpParserVar{}).first;
    }
    return it->second;
  };

  // Parses "name: 2 x - y <= 3"-style linear lines.
  const auto parse_linear = [&](std::vector<std::string> tokens,
                                std::vector<std::pair<std::string, double>>& terms,
                                Rel* rel, double* rhs) {
    size_t pos = 0;
    double sign = 1.0;
    bool have_coeff = false;
    double coeff = 1.0;
    for (; pos < tokens.size(); ++pos) {
      const std::string& tok = tokens[pos];
      if (tok == "+") {
        sign = 1.0;
        continue;
      }
      if (tok == "-") {
        sign = -sign;
        continue;
      }
      if (tok == "<=" || tok == ">=" || tok == "=") {
        if (rel == nullptr) throw Error("lp parse: unexpected relation in objective");
        *rel = tok == "<=" ? Rel::Le : tok == ">=" ? Rel::Ge : Rel::Eq;
        if (pos + 1 >= tokens.size() || !is_number_token(tokens[pos + 1]))
          throw Error("lp parse: missing right-hand side");
        *rhs = std::strtod(tokens[pos + 1].c_str(), nullptr);
        return;
      }
      if (is_number_token(tok)) {
        coeff = sign * std::strtod(tok.c_str(), nullptr);
        have_coeff = true;
        sign = 1.0;
        continue;
      }
      // Variable name.
      const double c = have_coeff ? coeff : sign;
      touch_var(tok);
      terms.emplace_back(tok, c);
      have_coeff = false;
      coeff = 1.0;
      sign = 1.0;
    }
    if (rel != nullptr) throw Error("lp parse: constraint without relation");
  };

  std::istringstream stream(text);
  std::string line;
  int constraint_counter = 0;
  while (std::getline(stream, line)) {
    auto tokens = tokenize_line(line);
    if (tokens.empty() || tokens[0][0] == '\\') continue;
    const std::string head = tokens[0];
    if (head == "Maximize" || head == "MAXIMIZE" || head == "max") {
      section = Section::Objective;
      continue;
    }
    if (head == "Minimize" || head == "MINIMIZE" || head == "min") {
      section = Section::Objective;
      minimize = true;
      continue;
    }
    if (head == "Subject") {
      section = Section::Constraints;
      continue;
    }
    if (head == "Bounds") {
      section = Section::Bounds;
      continue;
    }
    if (head == "Binary" || head == "Binaries") {
      section = Section::Binary;
      continue;
    }
    if (head == "End") {
      section = Section::End;
      continue;
    }

    switch (section) {
      case Section::Objective: {
        if (!tokens.empty() && tokens[0].back() == ':') tokens.erase(tokens.begin());
        parse_linear(tokens, objective_terms, nullptr, nullptr);
        break;
      }
      case Section::Constraints: {
        PendingConstraint pc;
        if (!tokens.empty() && tokens[0].back() == ':') {
          pc.name = tokens[0].substr(0, tokens[0].size() - 1);
          tokens.erase(tokens.begin());
        } else {
          pc.name = fmt::format("c{}", constraint_counter);
        }
        ++constraint_counter;
        parse_linear(tokens, pc.terms, &pc.rel, &pc.rhs);
        pending.push_back(std::move(pc));
        break;
      }
      case Section::Bounds: {
        // Forms: "lo <= x <= hi", "x >= lo", "x <= hi".
        if (tokens.size() == 5 && tokens[1] == "<=" && tokens[3] == "<=") {
          LpParserVar& v = touch_var(tokens[2]);
          v.lo = std::strtod(tokens[0].c_str(), nullptr);
          v.hi = std::strtod(tokens[4].c_str(), nullptr);
          v.bounded = true;
        } else if (tokens.size() == 3 && tokens[1] == ">=") {
          LpParserVar& v = touch_var(tokens[0]);
          v.lo = std::strtod(tokens[2].c_str(), nullptr);
          v.bounded = true;
        } else if (tokens.size() == 3 && tokens[1] == "<=") {
          LpParserVar& v = touch_var(tokens[0]);
          v.hi = std::strtod(tokens[2].c_str(), nullptr);
          v.bounded = true;
        } else {
          throw Error(fmt::format("lp parse: unsupported bounds line \"{}\"", line));
        }
        break;
      }
      case Section::Binary: {
        for (const std::string& name : tokens) touch_var(name).binary = true;
        break;
      }
      case Section::None:
      case Section::End:
        throw Error(fmt::format("lp parse: unexpected line \"{}\"", line));
    }
  }

  ConstraintSystem cs;
  std::map<std::string, VarId> ids;
  for (const std::string& name : var_order) {
    const LpParserVar& v = var_info[name];
    if (v.binary)
      ids[name] = cs.add_binary(name);
    else
      ids[name] = cs.add_continuous(name, v.lo, v.hi);
  }
  for (const PendingConstraint& pc : pending) {
    LinExpr expr;
    for (const auto& [name, coeff] : pc.terms) expr.add(ids.at(name), coeff);
    expr.add_constant(-pc.rhs);
    cs.add_constraint(pc.name, std::move(expr), pc.rel);
  }
  LinExpr objective;
  bool nonzero = false;
  for (const auto& [name, coeff] : objective_terms) {
    const double c = minimize ? -coeff : coeff;
    objective.add(ids.at(name), c);
    nonzero |= c != 0.0;
  }
  if (nonzero) cs.set_objective_maximize(std::move(objective));
  cs.validate();
  return cs;
}

// ---------------------------------------------------------------------------
// SMT-LIB emission

namespace {

std::string int128_to_string(unsigned __int128 value) {
  if (value == 0) return "0";
  std::string digits;
  while (value > 0) {
    digits.push_back(static_cast<char>('0' + static_cast<int>(value % 10)));
    value /= 10;
  }
  std::reverse(digits.begin(), digits.end());
  return digits;
}

}  // namespace

std::string smt_number(double value) {
  if (!std::isfinite(value)) throw std::logic_error("smt_number: non-finite constant");
  if (value == 0.0) return "0";
  const bool negative = value < 0.0;
  const double mag = std::abs(value);

  std::string body;
  if (mag == std::rint(mag) && mag <= 9.007199254740992e15) {
    body = fmt::format("{}", static_cast<long long>(mag));
  } else {
    int exp = 0;
    const double frac = std::frexp(mag, &exp);
    auto mant = static_cast<unsigned long long>(std::ldexp(frac, 53));
    int e2 = exp - 53;
    while (mant % 2 == 0 && e2 < 0) {
      mant >>= 1;
      ++e2;
    }
    if (e2 >= 0) {
      if (e2 > 62) throw std::logic_error("smt_number: constant magnitude too large");
      body = int128_to_string(static_cast<unsigned __int128>(mant) << e2);
    } else {
      if (-e2 > 126)
        throw std::logic_error("smt_number: constant magnitude too small");
      const unsigned __int128 den = static_cast<unsigned __int128>(1) << (-e2);
      body = fmt::format("(/ {} {})", mant, int128_to_string(den));
    }
  }
  return negative ? fmt::format("(- {})", body) : body;
}

namespace {

// Linear expression as an SMT sum over the emitted rhs convention.
std::string smt_sum(const ConstraintSystem& cs,
                    const std::vector<std::pair<VarId, double>>& terms) {
  std::vector<std::string> parts;
  for (const auto& [var, coeff] : terms) {
    if (coeff == 0.0) continue;
    if (coeff == 1.0)
      parts.push_back(cs.var(var).name);
    else
      parts.push_back(fmt::format("(* {} {})", smt_number(coeff), cs.var(var).name));
  }
  if (parts.empty()) return "0";
  if (parts.size() == 1) return parts[0];
  std::string out = "(+";
  for (const std::string& p : parts) out += " " + p;
  return out + ")";
}

std::string smt_max_chain(const ConstraintSystem& cs, const std::vector<VarId>& vars) {
  std::string acc = cs.var(vars[0]).name;
  for (size_t i = 1; i < vars.size(); ++i) {
    const std::string& next = cs.var(vars[i]).name;
    acc = fmt::format("(ite (>= {} {}) {} {})", acc, next, acc, next);
  }
  return acc;
}

std::string smt_loss_condition(const ConstraintSystem& cs, const GadgetGroup& g) {
  const std::string truth = cs.var(g.inputs[g.truth_index]).name;
  std::vector<std::string> conds;
  for (size_t k = 0; k < g.inputs.size(); ++k) {
    if (static_cast<int>(k) == g.truth_index) continue;
    const std::string& other = cs.var(g.inputs[k]).name;
    if (g.margin > 0.0)
      conds.push_back(fmt::format("(>= {} (+ {} {}))", truth, other,
                                  smt_number(g.margin)));
    else
      conds.push_back(fmt::format("(> {} {})", truth, other));
  }
  if (conds.size() == 1) return conds[0];
  std::string out = "(and";
  for (const std::string& c : conds) out += " " + c;
  return out + ")";
}

}  // namespace

std::string emit_smtlib(const ConstraintSystem& cs) {
  // Gadget auxiliaries are big-M bookkeeping; the script replaces them with
  // native ite terms.
  std::set<int> hidden;
  std::set<int> loss_outputs;
  for (const GadgetGroup& g : cs.groups()) {
    for (VarId aux : g.aux) hidden.insert(aux.index);
    if (g.kind == GadgetGroup::Kind::Loss) loss_outputs.insert(g.output.index);
  }

  std::string out;
  out += "(set-option :produce-models true)\n";
  out += "(set-logic QF_LRA)\n";
  for (int i = 0; i < cs.num_vars(); ++i) {
    if (hidden.count(i)) continue;
    const VarInfo& v = cs.vars()[i];
    out += fmt::format("(declare-const {} Real)\n", v.name);
    if (v.is_binary) {
      // Loss outputs are pinned by their ite definition below.
      if (!loss_outputs.count(i))
        out += fmt::format("(assert (or (= {} 0) (= {} 1)))\n", v.name, v.name);
    } else {
      out += fmt::format("(assert (>= {} {}))\n", v.name, smt_number(v.lo));
      if (std::isfinite(v.hi))
        out += fmt::format("(assert (<= {} {}))\n", v.name, smt_number(v.hi));
    }
  }

  for (const Constraint& c : cs.constraints()) {
    if (c.group >= 0) continue;
    const char* op = c.rel == Rel::Le ? "<=" : c.rel == Rel::Ge ? ">=" : "=";
    out += fmt::format("(assert ({} {} {}))\n", op, smt_sum(cs, c.expr.terms),
                       smt_number(-c.expr.constant));
  }

  for (const GadgetGroup& g : cs.groups()) {
    switch (g.kind) {
      case GadgetGroup::Kind::Relu:
        out += fmt::format("(assert (= {} (ite (>= {} 0) {} 0)))\n",
                           cs.var(g.output).name, cs.var(g.inputs[0]).name,
                           cs.var(g.inputs[0]).name);
        break;
      case GadgetGroup::Kind::MaxPool:
        out += fmt::format("(assert (= {} {}))\n", cs.var(g.output).name,
                           smt_max_chain(cs, g.inputs));
        break;
      case GadgetGroup::Kind::Loss:
        out += fmt::format("(assert (= {} (ite {} 0 1)))\n", cs.var(g.output).name,
                           smt_loss_condition(cs, g));
        break;
    }
  }

  out += "(check-sat)\n(get-model)\n";
  return out;
}

// ---------------------------------------------------------------------------
// Solution parsing

ParsedSolution parse_lp_solution(const std::string& text) {
  ParsedSolution solution;
  bool any_status = false;
  std::istringstream stream(text);
  std::string line;
  while (std::getline(stream, line)) {
    auto tokens = tokenize_line(line);
    if (tokens.empty() || tokens[0][0] == '#') continue;
    std::string lowered = tokens[0];
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (lowered == "status" && tokens.size() >= 2) {
      std::transform(tokens[1].begin(), tokens[1].end(), tokens[1].begin(),
                     [](unsigned char c) { return std::tolower(c); });
      lowered = tokens[1];
    }
    if (lowered == "infeasible" || lowered == "unsat") {
      solution.kind = ParsedSolution::Kind::Unsat;
      return solution;
    }
    if (lowered == "optimal" || lowered == "feasible" || lowered == "sat") {
      any_status = true;
      continue;
    }
    if (lowered == "unknown" || lowered == "unbounded" || lowered == "timeout")
      return solution;
    if (lowered == "objective") continue;
    if (tokens.size() == 2 && is_number_token(tokens[1]))
      solution.values[tokens[0]] = std::strtod(tokens[1].c_str(), nullptr);
  }
  if (any_status || !solution.values.empty())
    solution.kind = ParsedSolution::Kind::Sat;
  return solution;
}

namespace {

// Minimal s-expression reader for get-model output.
struct Sexpr {
  std::string atom;
  std::vector<Sexpr> children;
  bool is_atom() const { return children.empty() && !atom.empty(); }
};

std::vector<std::string> smt_tokens(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == ';') {  // comment to end of line
      while (i < text.size() && text[i] != '\n') ++i;
      continue;
    }
    if (c == '(' || c == ')') {
      if (!current.empty()) {
        tokens.push_back(current);
        current.clear();
      }
      tokens.push_back(std::string(1, c));
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) {
        tokens.push_back(current);
        current.clear();
      }
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) tokens.push_back(current);
  return tokens;
}

Sexpr parse_sexpr(const std::vector<std::string>& tokens, size_t& pos) {
  Sexpr node;
  if (pos >= tokens.size()) return node;
  if (tokens[pos] == "(") {
    ++pos;
    while (pos < tokens.size() && tokens[pos] != ")")
      node.children.push_back(parse_sexpr(tokens, pos));
    if (pos < tokens.size()) ++pos;  // consume ')'
    node.atom = "()";
    return node;
  }
  node.atom = tokens[pos++];
  return node;
}

bool eval_smt_value(const Sexpr& node, double* out) {
  if (node.is_atom()) {
    char* end = nullptr;
    const double v = std::strtod(node.atom.c_str(), &end);
    if (end && *end == '\0' && end != node.atom.c_str()) {
      *out = v;
      return true;
    }
    return false;
  }
  if (node.children.empty()) return false;
  const std::string& op = node.children[0].atom;
  if (op == "-" && node.children.size() == 2) {
    double v;
    if (!eval_smt_value(node.children[1], &v)) return false;
    *out = -v;
    return true;
  }
  if (op == "/" && node.children.size() == 3) {
    double a, b;
    if (!eval_smt_value(node.children[1], &a) ||
        !eval_smt_value(node.children[2], &b) || b == 0.0)
      return false;
    *out = a / b;
    return true;
  }
  return false;
}

void collect_define_funs(const Sexpr& node, std::map<std::string, double>& values) {
  if (!node.children.empty() && node.children[0].is_atom() &&
      node.children[0].atom == "define-fun" && node.children.size() >= 5) {
    const std::string& name = node.children[1].atom;
    double v;
    if (eval_smt_value(node.children.back(), &v)) values[name] = v;
    return;
  }
  for (const Sexpr& child : node.children) collect_define_funs(child, values);
}

}  // namespace

ParsedSolution parse_smt_model(const std::string& text) {
  ParsedSolution solution;
  // The verdict token appears on its own line before the model.
  std::istringstream stream(text);
  std::string line;
  bool sat = false;
  std::string remainder;
  while (std::getline(stream, line)) {
    std::string trimmed = line;
    trimmed.erase(0, trimmed.find_first_not_of(" \t\r"));
    trimmed.erase(trimmed.find_last_not_of(" \t\r") + 1);
    if (!sat) {
      if (trimmed == "unsat") {
        solution.kind = ParsedSolution::Kind::Unsat;
        return solution;
      }
      if (trimmed == "sat") {
        sat = true;
        continue;
      }
      if (trimmed == "unknown") return solution;
      continue;  // skip banners
    }
    remainder += line + "\n";
  }
  if (!sat) return solution;

  const auto tokens = smt_tokens(remainder);
  size_t pos = 0;
  while (pos < tokens.size()) {
    const Sexpr node = parse_sexpr(tokens, pos);
    collect_define_funs(node, solution.values);
  }
  solution.kind = ParsedSolution::Kind::Sat;
  return solution;
}

std::vector<double> complete_assignment(const ConstraintSystem& cs,
                                        const std::map<std::string, double>& values) {
  std::vector<double> assignment(cs.num_vars(),
                                 std::numeric_limits<double>::quiet_NaN());
  for (int i = 0; i < cs.num_vars(); ++i) {
    const auto it = values.find(cs.vars()[i].name);
    if (it != values.end()) assignment[i] = it->second;
  }

  const auto value_of = [&](VarId id) { return assignment[id.index]; };

  for (const GadgetGroup& g : cs.groups()) {
    switch (g.kind) {
      case GadgetGroup::Kind::Relu: {
        if (g.aux.empty()) break;
        const double z = value_of(g.inputs[0]);
        if (std::isnan(assignment[g.aux[0].index]))
          assignment[g.aux[0].index] = z > 0.0 ? 1.0 : 0.0;
        break;
      }
      case GadgetGroup::Kind::MaxPool: {
        size_t best = 0;
        for (size_t s = 1; s < g.inputs.size(); ++s)
          if (value_of(g.inputs[s]) > value_of(g.inputs[best])) best = s;
        for (size_t s = 0; s < g.aux.size(); ++s)
          if (std::isnan(assignment[g.aux[s].index]))
            assignment[g.aux[s].index] = s == best ? 1.0 : 0.0;
        break;
      }
      case GadgetGroup::Kind::Loss: {
        const bool lost = value_of(g.output) > 0.5;
        const double truth_value = value_of(g.inputs[g.truth_index]);
        // Selector order skips the truth label, mirroring the encoder.
        size_t sel = 0;
        size_t best_sel = 0;
        double best_gap = -std::numeric_limits<double>::infinity();
        for (size_t k = 0; k < g.inputs.size(); ++k) {
          if (static_cast<int>(k) == g.truth_index) continue;
          const double gap = value_of(g.inputs[k]) - truth_value;
          if (gap > best_gap) {
            best_gap = gap;
            best_sel = sel;
          }
          ++sel;
        }
        for (size_t s = 0; s < g.aux.size(); ++s)
          if (std::isnan(assignment[g.aux[s].index]))
            assignment[g.aux[s].index] = (lost && s == best_sel) ? 1.0 : 0.0;
        break;
      }
    }
  }

  for (int i = 0; i < cs.num_vars(); ++i)
    if (std::isnan(assignment[i])) assignment[i] = cs.vars()[i].lo;
  return assignment;
}

// ---------------------------------------------------------------------------
// Subprocess bridge

SubprocessResult run_subprocess(const std::string& command, double timeout_seconds) {
  SubprocessResult result;
  int fds[2];
  if (pipe(fds) != 0) throw Error("subprocess: pipe failed");

  const pid_t pid = fork();
  if (pid < 0) {
    close(fds[0]);
    close(fds[1]);
    throw Error("subprocess: fork failed");
  }
  if (pid == 0) {
    setpgid(0, 0);  // own process group so timeouts can kill helpers too
    dup2(fds[1], STDOUT_FILENO);
    dup2(fds[1], STDERR_FILENO);
    close(fds[0]);
    close(fds[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }

  close(fds[1]);
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::microseconds(
                            static_cast<long>(timeout_seconds * 1e6));
  char buffer[4096];
  bool open = true;
  while (open) {
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0) {
      result.timed_out = true;
      kill(-pid, SIGKILL);
      kill(pid, SIGKILL);
    }
    struct pollfd pfd{fds[0], POLLIN, 0};
    const int timeout_ms =
        result.timed_out ? 100 : static_cast<int>(std::min<long long>(
                                     remaining.count(), 250));
    const int ready = poll(&pfd, 1, std::max(timeout_ms, 0));
    if (ready > 0) {
      const ssize_t n = read(fds[0], buffer, sizeof(buffer));
      if (n > 0)
        result.output.append(buffer, static_cast<size_t>(n));
      else
        open = false;
    } else if (result.timed_out) {
      open = false;  // killed; stop draining
    }
  }
  close(fds[0]);

  int status = 0;
  waitpid(pid, &status, 0);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

namespace {

std::atomic<int> g_artifact_counter{0};

std::string make_artifact_path(const SolverBackend& backend, const char* extension) {
  namespace fs = std::filesystem;
  const fs::path dir = backend.artifact_dir.empty()
                           ? fs::temp_directory_path()
                           : fs::path(backend.artifact_dir);
  fs::create_directories(dir);
  const fs::path file =
      dir / fmt::format("ensrob_{}_{}.{}", getpid(),
                        g_artifact_counter.fetch_add(1), extension);
  return file.string();
}

}  // namespace

MilpVerdict run_external(const SolverBackend& backend, const ConstraintSystem& cs) {
  if (backend.kind == SolverBackend::Kind::Internal)
    throw Error("run_external: backend is internal");
  if (backend.command_template.empty())
    throw Error("run_external: external backend needs a command template");

  const bool smt = backend.kind == SolverBackend::Kind::ExternalSmt;
  const std::string path = make_artifact_path(backend, smt ? "smt2" : "lp");
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write {}", path));
    out << (smt ? emit_smtlib(cs) : emit_lp(cs));
  }

  std::string command = backend.command_template;
  const std::string placeholder = "{file}";
  if (command.find(placeholder) == std::string::npos) {
    command += " " + path;
  } else {
    size_t at;
    while ((at = command.find(placeholder)) != std::string::npos)
      command.replace(at, placeholder.size(), path);
  }

  MilpVerdict verdict;
  const SubprocessResult run = run_subprocess(command, backend.time_budget_seconds);
  if (!backend.keep_artifacts) std::filesystem::remove(path);

  if (run.timed_out) {
    verdict.status = MilpStatus::Unknown;
    verdict.reason = "timeout";
    return verdict;
  }

  const ParsedSolution solution =
      smt ? parse_smt_model(run.output) : parse_lp_solution(run.output);
  if (solution.kind == ParsedSolution::Kind::Unsat) {
    verdict.status = MilpStatus::Infeasible;
    return verdict;
  }
  if (solution.kind == ParsedSolution::Kind::Unknown) {
    verdict.status = MilpStatus::Unknown;
    verdict.reason = fmt::format("solver output not understood (exit {}): {}",
                                 run.exit_code,
                                 run.output.substr(0, 200));
    return verdict;
  }

  // Claimed sat: the assignment must survive the audit before we trust it.
  std::vector<double> assignment = complete_assignment(cs, solution.values);
  if (auto violation = cs.audit(assignment, 1e-6)) {
    verdict.status = MilpStatus::Unknown;
    verdict.reason = fmt::format("audit failed: {}", *violation);
    return verdict;
  }
  verdict.status = MilpStatus::Feasible;
  verdict.objective = cs.has_objective() ? cs.objective().evaluate(assignment) : 0.0;
  verdict.assignment = std::move(assignment);
  verdict.has_assignment = true;
  return verdict;
}

}  // namespace ensrob
