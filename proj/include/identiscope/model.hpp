#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "identiscope/expr.hpp"

namespace identiscope {

enum class InputMode { Generic, Constant };

struct InputSpec {
  Symbol base;
  InputMode mode = InputMode::Generic;
  bool operator==(const InputSpec&) const = default;
};

struct UnknownInputSpec {
  Symbol base;
  /// s, with w^(s+1) = 0.
  int truncation_order = 1;
  bool operator==(const UnknownInputSpec&) const = default;
};

struct OutputDef {
  std::string name;
  Expr expr;
  bool operator==(const OutputDef&) const = default;
};

struct InitialCondition {
  Symbol state;
  Expr value;
  bool operator==(const InitialCondition&) const = default;
};

/// A validated ODE model x' = f(x, u, w, θ, t), y = h(x, u, w, θ).
struct ModelDef {
  std::string name;
  std::vector<Symbol> states;
  std::vector<Symbol> params;
  std::vector<InputSpec> known_inputs;
  std::vector<UnknownInputSpec> unknown_inputs;
  /// dynamics[i] is the right-hand side for states[i].
  std::vector<Expr> dynamics;
  std::vector<OutputDef> outputs;
  /// Initial conditions are carried as metadata; the engines analyze
  /// generic initial conditions.
  std::vector<InitialCondition> ics;

  std::size_t n() const noexcept { return states.size(); }
  std::size_t p() const noexcept { return params.size(); }
  std::size_t q() const noexcept { return known_inputs.size(); }
  std::size_t q_w() const noexcept { return unknown_inputs.size(); }
  std::size_t m() const noexcept { return outputs.size(); }

  /// True iff every right-hand side and output is rational.
  bool is_rational() const;

  bool operator==(const ModelDef&) const = default;
};

/// Parses the model DSL. Throws ParseError (SyntaxError, UndeclaredSymbol,
/// DuplicateDeclaration, MissingDynamics, NonIntegerExponent,
/// InvalidTimeUse) with a 1-based line and column.
ModelDef parse_model(std::string_view text);

/// Reads and parses a file; I/O failure raises Error(Io).
ModelDef load_model(const std::string& path);

/// Canonical DSL text; parse_model(print_model(md)) == md.
std::string print_model(const ModelDef& md);

/// Re-checks the structural invariants of a ModelDef that was built in code.
void validate(const ModelDef& md);

enum class VariableRole { State, Parameter, UnknownInput };

std::string_view to_string(VariableRole role) noexcept;

/// Identifiability reduced to observability: z = states ‖ params ‖ one
/// derivative chain (w, w', …, w^(s)) per unknown input.
struct AugmentedSystem {
  std::string model_name;
  std::vector<Symbol> z;
  std::vector<VariableRole> roles;
  /// F, aligned with z: state dynamics, zeros for parameters, shift map
  /// along each unknown-input chain.
  std::vector<Expr> dynamics;
  std::vector<OutputDef> outputs;
  std::vector<InputSpec> known_inputs;
  std::map<Symbol, std::size_t> index;

  std::size_t n_z() const noexcept { return z.size(); }
  bool is_rational() const;
  /// Some output reads an unknown input directly (direct feedthrough).
  bool has_direct_feedthrough() const;
  bool operator==(const AugmentedSystem&) const = default;
};

AugmentedSystem augment(const ModelDef& md);

}  // namespace identiscope
