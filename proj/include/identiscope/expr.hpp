#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "identiscope/modular.hpp"

namespace identiscope {

enum class SymbolKind : std::uint8_t { State, Parameter, KnownInput, UnknownInput, Time };

std::string_view to_string(SymbolKind kind) noexcept;

/// A named variable. Input symbols carry a derivative order; u with order 2
/// stands for the second time derivative of u.
struct Symbol {
  std::string name;
  SymbolKind kind = SymbolKind::State;
  int order = 0;

  static Symbol state(std::string n) { return {std::move(n), SymbolKind::State, 0}; }
  static Symbol parameter(std::string n) { return {std::move(n), SymbolKind::Parameter, 0}; }
  static Symbol known_input(std::string n, int j = 0) {
    return {std::move(n), SymbolKind::KnownInput, j};
  }
  static Symbol unknown_input(std::string n, int j = 0) {
    return {std::move(n), SymbolKind::UnknownInput, j};
  }
  static Symbol time() { return {"t", SymbolKind::Time, 0}; }

  /// The same input differentiated `extra` more times.
  Symbol derivative(int extra = 1) const { return {name, kind, order + extra}; }

  /// "w" for order 0, "w_d2" for the second derivative.
  std::string display() const;

  auto operator<=>(const Symbol&) const = default;
  bool operator==(const Symbol&) const = default;
};

enum class ExprKind : std::uint8_t { Constant, Symbol, Sum, Product, Power, Quotient, Function };
enum class FuncKind : std::uint8_t { Ln, Exp, Sin, Cos };

std::string_view to_string(FuncKind f) noexcept;

namespace detail {
struct Node;
}

/// Immutable, hash-consed expression. Structurally equal expressions share
/// one node, so equality and hashing are O(1) and a DAG of common
/// subexpressions is shared automatically. Values may be shared freely
/// between threads.
class Expr {
 public:
  Expr();  // the constant 0
  Expr(long long value);  // NOLINT(google-explicit-constructor)
  Expr(int value) : Expr(static_cast<long long>(value)) {}  // NOLINT
  Expr(const Rational& value);  // NOLINT
  explicit Expr(const Symbol& s);

  ExprKind kind() const noexcept;
  bool is_constant() const noexcept { return kind() == ExprKind::Constant; }
  bool is_symbol() const noexcept { return kind() == ExprKind::Symbol; }
  bool is_zero() const noexcept;
  bool is_one() const noexcept;

  /// Valid for Constant nodes.
  const Rational& value() const;
  /// Valid for Symbol nodes.
  const Symbol& symbol() const;
  /// Sum terms, Product factors, {base} for Power, {num, den} for
  /// Quotient, {argument} for Function.
  std::span<const Expr> operands() const noexcept;
  /// Valid for Power nodes.
  long exponent() const;
  /// Valid for Function nodes.
  FuncKind function() const;

  /// Content hash; stable across runs and platforms.
  std::uint64_t hash() const noexcept;
  /// 64-bit Bloom filter of the free symbols.
  std::uint64_t symbol_mask() const noexcept;
  /// No transcendental node anywhere below.
  bool rational() const noexcept;
  const detail::Node* node() const noexcept { return node_.get(); }

  friend bool operator==(const Expr& a, const Expr& b) noexcept { return a.node_ == b.node_; }

 private:
  friend struct ExprAccess;
  explicit Expr(std::shared_ptr<const detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const detail::Node> node_;
};

struct ExprHash {
  std::size_t operator()(const Expr& e) const noexcept { return static_cast<std::size_t>(e.hash()); }
};

/// Total, deterministic order used for canonical operand sorting.
bool canonical_less(const Expr& a, const Expr& b);

std::uint64_t symbol_bit(const Symbol& s) noexcept;

// Canonicalizing constructors. Results are always in canonical form.
Expr sum(std::vector<Expr> terms);
Expr product(std::vector<Expr> factors);
/// Throws Error(DivisionByZero) for a zero base with a negative exponent.
Expr power(const Expr& base, long exponent);
/// Throws Error(DivisionByZero) when the denominator is the constant 0.
Expr quotient(const Expr& num, const Expr& den);
Expr apply(FuncKind f, const Expr& arg);
inline Expr ln(const Expr& a) { return apply(FuncKind::Ln, a); }
inline Expr exp(const Expr& a) { return apply(FuncKind::Exp, a); }
inline Expr sin(const Expr& a) { return apply(FuncKind::Sin, a); }
inline Expr cos(const Expr& a) { return apply(FuncKind::Cos, a); }

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);

/// Raw node builders that skip canonicalization; only `simplify` should see
/// their output.
namespace raw {
Expr sum(std::vector<Expr> terms);
Expr product(std::vector<Expr> factors);
Expr power(const Expr& base, long exponent);
Expr quotient(const Expr& num, const Expr& den);
Expr apply(FuncKind f, const Expr& arg);
}  // namespace raw

/// Rebuilds `e` bottom-up through the canonical constructors: constants
/// folded, identities dropped, nested sums/products flattened, like terms and
/// like bases collected, operands sorted. Idempotent.
Expr simplify(const Expr& e);

Expr differentiate(const Expr& e, const Symbol& s);

/// Simultaneous substitution followed by canonicalization. Throws
/// Error(DivisionByZero) if a denominator becomes the constant 0.
Expr substitute(const Expr& e, const std::map<Symbol, Expr>& bindings);

bool is_rational_expr(const Expr& e);
/// First transcendental node found in a depth-first walk, if any.
std::optional<Expr> first_transcendental(const Expr& e);

std::set<Symbol> free_symbols(const Expr& e);
bool depends_on(const Expr& e, const Symbol& s);

/// Number of distinct nodes in the DAG.
std::size_t dag_size(const Expr& e);

/// Parseable infix form, e.g. "x/(th + x)^2".
std::string to_string(const Expr& e);

/// A derivation D on expressions: D(s) is supplied per symbol, D(c) = 0 and
/// the usual sum/product/chain rules apply. Partial derivatives and Lie
/// derivatives along a vector field are both derivations. Results are
/// memoized per node so repeated use over growing DAGs touches each shared
/// node once.
class Derivation {
 public:
  /// `field(s)` gives D(s). `support` is the union of symbol_bit() over all
  /// symbols with nonzero D(s); subtrees whose mask misses it map to 0.
  Derivation(std::function<Expr(const Symbol&)> field, std::uint64_t support);

  Expr operator()(const Expr& e);

  /// Called every few thousand visited nodes; may throw to abort.
  void set_interrupt(std::function<void()> check) { interrupt_ = std::move(check); }

  std::size_t memo_size() const noexcept { return memo_.size(); }

 private:
  Expr apply_rule(const Expr& e);

  std::function<Expr(const Symbol&)> field_;
  std::uint64_t support_;
  // Keys are held alive alongside results so node addresses never recycle.
  std::unordered_map<const detail::Node*, std::pair<Expr, Expr>> memo_;
  std::function<void()> interrupt_;
  std::size_t visits_ = 0;
};

/// Derivation for ∂/∂s.
Derivation partial(const Symbol& s);

}  // namespace identiscope
