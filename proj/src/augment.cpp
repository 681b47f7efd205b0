#include "identiscope/model.hpp"

namespace identiscope {

std::string_view to_string(VariableRole role) noexcept {
  switch (role) {
    case VariableRole::State: return "state";
    case VariableRole::Parameter: return "parameter";
    case VariableRole::UnknownInput: return "unknown_input";
  }
  return "?";
}

bool AugmentedSystem::is_rational() const {
  for (const auto& f : dynamics) {
    if (!f.rational()) return false;
  }
  for (const auto& o : outputs) {
    if (!o.expr.rational()) return false;
  }
  return true;
}

bool AugmentedSystem::has_direct_feedthrough() const {
  for (const auto& o : outputs) {
    for (const auto& s : free_symbols(o.expr)) {
      if (s.kind == SymbolKind::UnknownInput) return true;
    }
  }
  return false;
}

AugmentedSystem augment(const ModelDef& md) {
  validate(md);
  AugmentedSystem a;
  a.model_name = md.name;
  a.outputs = md.outputs;
  a.known_inputs = md.known_inputs;
  for (std::size_t i = 0; i < md.states.size(); ++i) {
    a.z.push_back(md.states[i]);
    a.roles.push_back(VariableRole::State);
    a.dynamics.push_back(md.dynamics[i]);
  }
  for (const auto& p : md.params) {
    a.z.push_back(p);
    a.roles.push_back(VariableRole::Parameter);
    a.dynamics.emplace_back();
  }
  for (const auto& w : md.unknown_inputs) {
    for (int j = 0; j <= w.truncation_order; ++j) {
      a.z.push_back(w.base.derivative(j));
      a.roles.push_back(VariableRole::UnknownInput);
      a.dynamics.push_back(j < w.truncation_order ? Expr(w.base.derivative(j + 1)) : Expr());
    }
  }
  for (std::size_t i = 0; i < a.z.size(); ++i) a.index.emplace(a.z[i], i);
  return a;
}

}  // namespace identiscope
