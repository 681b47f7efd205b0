#include "identiscope/eval.hpp"

#include <cmath>

#include "identiscope/errors.hpp"

namespace identiscope {

namespace {

[[noreturn]] void missing_symbol(const Symbol& s) {
  throw Error(ErrorCode::InvalidArgument, "no value bound for symbol " + s.display());
}

[[noreturn]] void non_rational(const Expr& e) {
  throw Error(ErrorCode::NonRationalExpr,
              "non-rational expression " + to_string(e) + " cannot be evaluated over a prime field");
}

}  // namespace

ModPEvaluator::ModPEvaluator(const PrimeField& field, Lookup lookup)
    : field_(field), lookup_(std::move(lookup)) {}

void ModPEvaluator::treat_transcendentals_as_symbols(std::uint64_t key) { transcendental_key_ = key; }

Residue ModPEvaluator::operator()(const Expr& e) { return eval(e); }

Residue ModPEvaluator::eval(const Expr& e) {
  if (auto it = memo_.find(e.node()); it != memo_.end()) return it->second.second;
  const auto ops = e.operands();
  Residue r = 0;
  switch (e.kind()) {
    case ExprKind::Constant: r = field_.from_rational(e.value()); break;
    case ExprKind::Symbol: r = lookup_(e.symbol()) % field_.modulus(); break;
    case ExprKind::Sum:
      for (const auto& o : ops) r = field_.add(r, eval(o));
      break;
    case ExprKind::Product:
      r = 1;
      for (const auto& o : ops) r = field_.mul(r, eval(o));
      break;
    case ExprKind::Power: {
      const Residue b = eval(ops[0]);
      if (b == 0 && e.exponent() < 0) {
        throw Error(ErrorCode::DivisionByZeroModP, "base of negative power vanishes: " + to_string(ops[0]));
      }
      r = field_.pow(b, e.exponent());
      break;
    }
    case ExprKind::Quotient: {
      const Residue num = eval(ops[0]);
      const Residue den = eval(ops[1]);
      if (den == 0) throw Error(ErrorCode::DivisionByZeroModP, "denominator vanishes: " + to_string(ops[1]));
      r = field_.div(num, den);
      break;
    }
    case ExprKind::Function: {
      if (!transcendental_key_) non_rational(e);
      const std::uint64_t key[] = {*transcendental_key_, e.hash(), 0x7472616e73ULL};
      r = keyed_residue(key, field_.modulus());
      ++transcendental_count_;
      break;
    }
  }
  memo_.emplace(e.node(), std::make_pair(e, r));
  return r;
}

Residue eval_mod_p(const Expr& e, const std::map<Symbol, Residue>& point, std::uint64_t p) {
  PrimeField field(p);
  ModPEvaluator ev(field, [&](const Symbol& s) {
    auto it = point.find(s);
    if (it == point.end()) missing_symbol(s);
    return it->second;
  });
  return ev(e);
}

double to_double(const Number& n) {
  if (const auto* q = std::get_if<Rational>(&n)) return q->get_d();
  return std::get<double>(n);
}

namespace {

class NumberEvaluator {
 public:
  explicit NumberEvaluator(const std::map<Symbol, Rational>& point) : point_(point) {}

  Number operator()(const Expr& e) {
    if (auto it = memo_.find(e.node()); it != memo_.end()) return it->second.second;
    Number r = eval(e);
    memo_.emplace(e.node(), std::make_pair(e, r));
    return r;
  }

 private:
  static bool exact(const Number& n) { return std::holds_alternative<Rational>(n); }

  static Number add(const Number& a, const Number& b) {
    if (exact(a) && exact(b)) return Rational(std::get<Rational>(a) + std::get<Rational>(b));
    return to_double(a) + to_double(b);
  }
  static Number mul(const Number& a, const Number& b) {
    if (exact(a) && exact(b)) return Rational(std::get<Rational>(a) * std::get<Rational>(b));
    return to_double(a) * to_double(b);
  }
  static Number inverse(const Number& a, const Expr& where) {
    if (exact(a)) {
      const auto& q = std::get<Rational>(a);
      if (q == 0) throw Error(ErrorCode::DivisionByZero, "denominator vanishes: " + to_string(where));
      return Rational(1 / q);
    }
    const double d = std::get<double>(a);
    if (d == 0.0) throw Error(ErrorCode::DivisionByZero, "denominator vanishes: " + to_string(where));
    return 1.0 / d;
  }

  Number eval(const Expr& e) {
    const auto ops = e.operands();
    switch (e.kind()) {
      case ExprKind::Constant: return e.value();
      case ExprKind::Symbol: {
        auto it = point_.find(e.symbol());
        if (it == point_.end()) missing_symbol(e.symbol());
        return it->second;
      }
      case ExprKind::Sum: {
        Number r = Rational(0);
        for (const auto& o : ops) r = add(r, (*this)(o));
        return r;
      }
      case ExprKind::Product: {
        Number r = Rational(1);
        for (const auto& o : ops) r = mul(r, (*this)(o));
        return r;
      }
      case ExprKind::Power: {
        Number b = (*this)(ops[0]);
        long n = e.exponent();
        if (n < 0) {
          b = inverse(b, ops[0]);
          n = -n;
        }
        Number r = Rational(1);
        for (long i = 0; i < n; ++i) r = mul(r, b);
        return r;
      }
      case ExprKind::Quotient: return mul((*this)(ops[0]), inverse((*this)(ops[1]), ops[1]));
      case ExprKind::Function: {
        const Number a = (*this)(ops[0]);
        // Exact special values keep ln(1), exp(0), sin(0), cos(0) rational.
        if (exact(a)) {
          const auto& q = std::get<Rational>(a);
          if (e.function() == FuncKind::Ln && q == 1) return Rational(0);
          if (e.function() != FuncKind::Ln && q == 0) {
            return Rational(e.function() == FuncKind::Sin ? 0 : 1);
          }
        }
        const double x = to_double(a);
        switch (e.function()) {
          case FuncKind::Ln:
            if (x <= 0.0) throw Error(ErrorCode::InvalidArgument, "ln of a non-positive value");
            return std::log(x);
          case FuncKind::Exp: return std::exp(x);
          case FuncKind::Sin: return std::sin(x);
          case FuncKind::Cos: return std::cos(x);
        }
      }
    }
    return Rational(0);
  }

  const std::map<Symbol, Rational>& point_;
  std::unordered_map<const detail::Node*, std::pair<Expr, Number>> memo_;
};

}  // namespace

Number eval_rational(const Expr& e, const std::map<Symbol, Rational>& point) {
  NumberEvaluator ev(point);
  return ev(e);
}

double eval_double(const Expr& e, const std::map<Symbol, double>& point) {
  std::map<Symbol, Rational> exact;
  for (const auto& [s, v] : point) exact.emplace(s, Rational(v));
  return to_double(eval_rational(e, exact));
}

}  // namespace identiscope
