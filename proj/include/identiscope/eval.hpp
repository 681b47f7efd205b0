#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <unordered_map>
#include <variant>

#include "identiscope/expr.hpp"
#include "identiscope/modular.hpp"

namespace identiscope {

/// Memoized evaluation of expression DAGs in Z/pZ.
///
/// Symbols are resolved through `lookup`. Transcendental nodes either raise
/// NonRationalExpr, or (when a transcendental key is set) each distinct
/// function node is replaced by its own keyed pseudo-random residue, i.e.
/// treated as an independent fresh symbol.
class ModPEvaluator {
 public:
  using Lookup = std::function<Residue(const Symbol&)>;

  ModPEvaluator(const PrimeField& field, Lookup lookup);

  /// Enables the independent-symbol treatment of ln/exp/sin/cos nodes.
  void treat_transcendentals_as_symbols(std::uint64_t key);

  Residue operator()(const Expr& e);

  const PrimeField& field() const noexcept { return field_; }
  /// Distinct transcendental nodes replaced so far.
  std::size_t transcendental_count() const noexcept { return transcendental_count_; }

 private:
  Residue eval(const Expr& e);

  PrimeField field_;
  Lookup lookup_;
  std::optional<std::uint64_t> transcendental_key_;
  std::size_t transcendental_count_ = 0;
  std::unordered_map<const detail::Node*, std::pair<Expr, Residue>> memo_;
};

/// Exact residue of a rational expression at `point`. Throws
/// DivisionByZeroModP or NonRationalExpr; symbols missing from the point
/// raise InvalidArgument.
Residue eval_mod_p(const Expr& e, const std::map<Symbol, Residue>& point, std::uint64_t p);

/// Either an exact rational or, once a transcendental node is involved, a
/// double.
using Number = std::variant<Rational, double>;

double to_double(const Number& n);

/// Exact when `e` is rational. Throws DivisionByZero for a zero denominator
/// and InvalidArgument for a missing symbol.
Number eval_rational(const Expr& e, const std::map<Symbol, Rational>& point);

/// Floating-point evaluation at a real point (test oracles only).
double eval_double(const Expr& e, const std::map<Symbol, double>& point);

}  // namespace identiscope
