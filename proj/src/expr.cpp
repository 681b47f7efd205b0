#include "identiscope/expr.hpp"

#include <algorithm>
#include <array>
#include <climits>
#include <mutex>
#include <sstream>
#include <unordered_set>

#include "identiscope/errors.hpp"

namespace identiscope {

namespace detail {

struct Node {
  ExprKind kind = ExprKind::Constant;
  FuncKind func = FuncKind::Ln;
  bool rational = true;
  long exponent = 0;
  std::uint64_t hash = 0;
  std::uint64_t mask = 0;
  std::variant<std::monostate, Rational, Symbol> payload;
  std::vector<Expr> args;
};

}  // namespace detail

using detail::Node;

struct ExprAccess {
  static Expr wrap(std::shared_ptr<const Node> n) { return Expr(std::move(n)); }
};

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) noexcept {
  // splitmix64 finalizer over the running state.
  std::uint64_t x = h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6U) + (h >> 2U));
  x = (x ^ (x >> 30U)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27U)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31U);
}

std::uint64_t hash_mpz(const mpz_class& z) noexcept {
  std::uint64_t h = static_cast<std::uint64_t>(mpz_sgn(z.get_mpz_t()) + 2);
  const std::size_t n = mpz_size(z.get_mpz_t());
  for (std::size_t i = 0; i < n; ++i) h = mix(h, mpz_getlimbn(z.get_mpz_t(), i));
  return h;
}

std::uint64_t symbol_hash(const Symbol& s) noexcept {
  return mix(mix(fnv1a(s.name), static_cast<std::uint64_t>(s.kind)),
             static_cast<std::uint64_t>(s.order));
}

bool same_content(const Node& a, const Node& b) {
  if (a.kind != b.kind || a.exponent != b.exponent || a.func != b.func) return false;
  if (a.args.size() != b.args.size()) return false;
  for (std::size_t i = 0; i < a.args.size(); ++i) {
    if (!(a.args[i] == b.args[i])) return false;
  }
  if (a.kind == ExprKind::Constant) return std::get<Rational>(a.payload) == std::get<Rational>(b.payload);
  if (a.kind == ExprKind::Symbol) return std::get<Symbol>(a.payload) == std::get<Symbol>(b.payload);
  return true;
}

/// Global hash-consing table. Entries point at live nodes; a node's deleter
/// removes its entry under the shard lock before the memory is released, so
/// every pointer observed under the lock is valid.
class InternTable {
 public:
  static constexpr std::size_t kShards = 64;

  std::shared_ptr<const Node> intern(Node&& candidate) {
    Shard& shard = shards_[shard_of(candidate.hash)];
    std::lock_guard lock(shard.mu);
    auto [lo, hi] = shard.map.equal_range(candidate.hash);
    for (auto it = lo; it != hi; ++it) {
      if (same_content(*it->second.raw, candidate)) {
        if (auto live = it->second.weak.lock()) return live;
      }
    }
    auto* heap = new Node(std::move(candidate));
    std::shared_ptr<const Node> sp(heap, [](const Node* n) { table().release(n); });
    shard.map.emplace(heap->hash, Entry{heap, sp});
    return sp;
  }

  void release(const Node* n) {
    {
      Shard& shard = shards_[shard_of(n->hash)];
      std::lock_guard lock(shard.mu);
      auto [lo, hi] = shard.map.equal_range(n->hash);
      for (auto it = lo; it != hi; ++it) {
        if (it->second.raw == n) {
          shard.map.erase(it);
          break;
        }
      }
    }
    // Children are released here, outside any shard lock.
    delete n;
  }

  static InternTable& table() {
    static auto* instance = new InternTable();  // never destroyed: nodes may outlive statics
    return *instance;
  }

 private:
  struct Entry {
    const Node* raw;
    std::weak_ptr<const Node> weak;
  };
  struct Shard {
    std::mutex mu;
    std::unordered_multimap<std::uint64_t, Entry> map;
  };

  static std::size_t shard_of(std::uint64_t h) noexcept { return (h >> 58U) % kShards; }

  std::array<Shard, kShards> shards_;
};

Expr make(Node&& n) { return ExprAccess::wrap(InternTable::table().intern(std::move(n))); }

Expr make_constant(Rational q) {
  q.canonicalize();
  Node n;
  n.kind = ExprKind::Constant;
  n.hash = mix(mix(1, hash_mpz(q.get_num())), hash_mpz(q.get_den()));
  n.payload = q;
  return make(std::move(n));
}

Expr make_compound(ExprKind kind, std::vector<Expr> args, long exponent = 0,
                   FuncKind func = FuncKind::Ln) {
  Node n;
  n.kind = kind;
  n.exponent = exponent;
  n.func = func;
  std::uint64_t h = mix(static_cast<std::uint64_t>(kind) + 3, static_cast<std::uint64_t>(exponent));
  h = mix(h, static_cast<std::uint64_t>(func));
  n.rational = kind != ExprKind::Function;
  for (const auto& a : args) {
    h = mix(h, a.hash());
    n.mask |= a.symbol_mask();
    n.rational = n.rational && a.rational();
  }
  n.hash = h;
  n.args = std::move(args);
  return make(std::move(n));
}

const Expr& zero() {
  static const Expr z = make_constant(Rational(0));
  return z;
}
const Expr& one() {
  static const Expr o = make_constant(Rational(1));
  return o;
}

int kind_group(const Expr& e) noexcept {
  switch (e.kind()) {
    case ExprKind::Constant: return 0;
    case ExprKind::Symbol: return 1;
    default: return 2;
  }
}

const Expr& base_of(const Expr& e) noexcept {
  return e.kind() == ExprKind::Power ? e.operands()[0] : e;
}
long exponent_of(const Expr& e) noexcept {
  return e.kind() == ExprKind::Power ? e.exponent() : 1;
}

int compare_core(const Expr& a, const Expr& b);

int compare(const Expr& a, const Expr& b) {
  if (a == b) return 0;
  const Expr& ba = base_of(a);
  const Expr& bb = base_of(b);
  if (!(ba == bb)) return compare_core(ba, bb);
  const long ea = exponent_of(a);
  const long eb = exponent_of(b);
  return ea < eb ? -1 : (ea > eb ? 1 : 0);
}

int compare_core(const Expr& a, const Expr& b) {
  if (a == b) return 0;
  const int ga = kind_group(a);
  const int gb = kind_group(b);
  if (ga != gb) return ga < gb ? -1 : 1;
  if (ga == 0) return cmp(a.value(), b.value()) < 0 ? -1 : 1;
  if (ga == 1) return a.symbol() < b.symbol() ? -1 : 1;
  if (a.kind() != b.kind()) return a.kind() < b.kind() ? -1 : 1;
  if (a.hash() != b.hash()) return a.hash() < b.hash() ? -1 : 1;
  // Hash collision between distinct nodes: fall back to a structural walk.
  if (a.exponent() != b.exponent()) return a.exponent() < b.exponent() ? -1 : 1;
  if (a.function() != b.function()) return a.function() < b.function() ? -1 : 1;
  const auto oa = a.operands();
  const auto ob = b.operands();
  for (std::size_t i = 0; i < std::min(oa.size(), ob.size()); ++i) {
    if (int c = compare(oa[i], ob[i]); c != 0) return c;
  }
  return oa.size() < ob.size() ? -1 : (oa.size() > ob.size() ? 1 : 0);
}

void sort_canonical(std::vector<Expr>& v) {
  std::sort(v.begin(), v.end(), [](const Expr& a, const Expr& b) { return compare(a, b) < 0; });
}

Rational rational_power(const Rational& q, long n) {
  if (q == 0 && n < 0) throw Error(ErrorCode::DivisionByZero, "zero raised to a negative power");
  const auto m = static_cast<unsigned long>(n < 0 ? -n : n);
  mpz_class num;
  mpz_class den;
  mpz_pow_ui(num.get_mpz_t(), q.get_num_mpz_t(), m);
  mpz_pow_ui(den.get_mpz_t(), q.get_den_mpz_t(), m);
  Rational r = n < 0 ? Rational(den, num) : Rational(num, den);
  r.canonicalize();
  return r;
}

constexpr long kMaxExponent = 1L << 24;

long checked_exponent_product(long a, long b) {
  long r = 0;
  if (__builtin_mul_overflow(a, b, &r) || r > kMaxExponent || r < -kMaxExponent) {
    throw Error(ErrorCode::InvalidArgument, "exponent out of range");
  }
  return r;
}

/// Product node from already canonical, sorted, base-distinct factors.
Expr assemble_product(const Rational& coeff, std::span<const Expr> factors) {
  if (factors.empty()) return make_constant(coeff);
  if (coeff == 1 && factors.size() == 1) return factors[0];
  std::vector<Expr> args;
  args.reserve(factors.size() + 1);
  if (coeff != 1) args.push_back(make_constant(coeff));
  args.insert(args.end(), factors.begin(), factors.end());
  return make_compound(ExprKind::Product, std::move(args));
}

/// Splits a canonical non-constant term into (coefficient, monomial).
std::pair<Rational, Expr> split_term(const Expr& t) {
  if (t.kind() == ExprKind::Product && t.operands()[0].is_constant()) {
    const auto ops = t.operands();
    return {ops[0].value(), assemble_product(Rational(1), ops.subspan(1))};
  }
  return {Rational(1), t};
}

Expr scale_term(const Rational& c, const Expr& mono) {
  if (c == 1) return mono;
  if (mono.kind() == ExprKind::Product) return assemble_product(c, mono.operands());
  const Expr single[] = {mono};
  return assemble_product(c, single);
}

// s = c * s' with the leading non-constant term of s' having coefficient 1,
// so equal sums up to scaling share one factor node inside products.
std::pair<Rational, Expr> primitive_sum(const Expr& s) {
  const auto ops = s.operands();
  std::optional<std::pair<Rational, Expr>> lead;
  for (const auto& t : ops) {
    if (t.is_constant()) continue;
    auto split = split_term(t);
    if (!lead || compare(split.second, lead->second) < 0) lead = std::move(split);
  }
  const Rational c = lead->first;
  if (c == 1) return {c, s};
  std::vector<Expr> terms;
  terms.reserve(ops.size());
  for (const auto& t : ops) {
    if (t.is_constant()) {
      terms.push_back(make_constant(t.value() / c));
    } else {
      auto [tc, m] = split_term(t);
      terms.push_back(scale_term(tc / c, m));
    }
  }
  return {c, sum(std::move(terms))};
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(SymbolKind kind) noexcept {
  switch (kind) {
    case SymbolKind::State: return "state";
    case SymbolKind::Parameter: return "parameter";
    case SymbolKind::KnownInput: return "known_input";
    case SymbolKind::UnknownInput: return "unknown_input";
    case SymbolKind::Time: return "time";
  }
  return "?";
}

std::string_view to_string(FuncKind f) noexcept {
  switch (f) {
    case FuncKind::Ln: return "ln";
    case FuncKind::Exp: return "exp";
    case FuncKind::Sin: return "sin";
    case FuncKind::Cos: return "cos";
  }
  return "?";
}

std::string Symbol::display() const {
  if (order == 0) return name;
  return name + "_d" + std::to_string(order);
}

std::uint64_t symbol_bit(const Symbol& s) noexcept { return std::uint64_t{1} << (symbol_hash(s) % 64U); }

Expr::Expr() : node_(zero().node_) {}
Expr::Expr(long long value) {
  if (value == 0) {
    node_ = zero().node_;
  } else if (value == 1) {
    node_ = one().node_;
  } else {
    node_ = make_constant(Rational(mpz_class(std::to_string(value)))).node_;
  }
}
Expr::Expr(const Rational& value) : node_(make_constant(value).node_) {}
Expr::Expr(const Symbol& s) {
  Node n;
  n.kind = ExprKind::Symbol;
  n.hash = mix(2, symbol_hash(s));
  n.mask = symbol_bit(s);
  n.payload = s;
  node_ = make(std::move(n)).node_;
}

ExprKind Expr::kind() const noexcept { return node_->kind; }
bool Expr::is_zero() const noexcept { return node_ == zero().node_; }
bool Expr::is_one() const noexcept { return node_ == one().node_; }

const Rational& Expr::value() const {
  if (node_->kind != ExprKind::Constant) throw Error(ErrorCode::InvalidArgument, "value() on non-constant");
  return std::get<Rational>(node_->payload);
}
const Symbol& Expr::symbol() const {
  if (node_->kind != ExprKind::Symbol) throw Error(ErrorCode::InvalidArgument, "symbol() on non-symbol");
  return std::get<Symbol>(node_->payload);
}
std::span<const Expr> Expr::operands() const noexcept { return node_->args; }
long Expr::exponent() const { return node_->exponent; }
FuncKind Expr::function() const { return node_->func; }
std::uint64_t Expr::hash() const noexcept { return node_->hash; }
std::uint64_t Expr::symbol_mask() const noexcept { return node_->mask; }
bool Expr::rational() const noexcept { return node_->rational; }

bool canonical_less(const Expr& a, const Expr& b) { return compare(a, b) < 0; }

// ---------------------------------------------------------------------------
// Canonical constructors

Expr sum(std::vector<Expr> terms) {
  Rational constant(0);
  std::vector<std::pair<Expr, Rational>> monos;
  std::unordered_map<const Node*, std::size_t> index;

  auto accumulate = [&](const Expr& t, auto&& self) -> void {
    switch (t.kind()) {
      case ExprKind::Constant:
        constant += t.value();
        return;
      case ExprKind::Sum:
        for (const auto& op : t.operands()) self(op, self);
        return;
      default: {
        auto [c, m] = split_term(t);
        auto [it, inserted] = index.try_emplace(m.node(), monos.size());
        if (inserted) {
          monos.emplace_back(std::move(m), std::move(c));
        } else {
          monos[it->second].second += c;
        }
      }
    }
  };
  for (const auto& t : terms) accumulate(t, accumulate);

  std::vector<Expr> out;
  out.reserve(monos.size() + 1);
  for (auto& [m, c] : monos) {
    if (c != 0) out.push_back(scale_term(c, m));
  }
  sort_canonical(out);
  if (constant != 0) out.insert(out.begin(), make_constant(constant));
  if (out.empty()) return zero();
  if (out.size() == 1) return out[0];
  return make_compound(ExprKind::Sum, std::move(out));
}

Expr product(std::vector<Expr> factors) {
  Rational coeff(1);
  bool is_zero = false;
  std::vector<std::pair<Expr, long>> bases;
  std::unordered_map<const Node*, std::size_t> index;

  auto add_base = [&](Expr b, long e) {
    if (b.kind() == ExprKind::Sum) {
      auto [c, prim] = primitive_sum(b);
      if (c != 1) {
        coeff *= rational_power(c, e);
        b = prim;
      }
    }
    auto [it, inserted] = index.try_emplace(b.node(), bases.size());
    if (inserted) {
      bases.emplace_back(b, e);
    } else {
      bases[it->second].second = checked_exponent_product(1, bases[it->second].second + e);
    }
  };
  auto visit = [&](const Expr& f, auto&& self) -> void {
    switch (f.kind()) {
      case ExprKind::Constant:
        if (f.is_zero()) is_zero = true;
        coeff *= f.value();
        return;
      case ExprKind::Product:
        for (const auto& op : f.operands()) self(op, self);
        return;
      case ExprKind::Power:
        add_base(f.operands()[0], f.exponent());
        return;
      case ExprKind::Quotient:
        self(quotient(f.operands()[0], f.operands()[1]), self);
        return;
      default:
        add_base(f, 1);
    }
  };
  for (const auto& f : factors) visit(f, visit);
  if (is_zero) return zero();

  std::vector<Expr> out;
  out.reserve(bases.size());
  for (auto& [b, e] : bases) {
    if (e == 0) continue;
    out.push_back(e == 1 ? b : make_compound(ExprKind::Power, {b}, e));
  }
  sort_canonical(out);
  // A numeric multiple of a single sum distributes: 2*(a + b) -> 2*a + 2*b.
  if (out.size() == 1 && coeff != 1 && out[0].kind() == ExprKind::Sum) {
    std::vector<Expr> scaled;
    scaled.reserve(out[0].operands().size());
    for (const auto& t : out[0].operands()) {
      if (t.is_constant()) {
        scaled.push_back(make_constant(coeff * t.value()));
      } else {
        auto [c, m] = split_term(t);
        scaled.push_back(scale_term(coeff * c, m));
      }
    }
    return sum(std::move(scaled));
  }
  return assemble_product(coeff, out);
}

Expr power(const Expr& base, long exponent) {
  if (exponent == 0) return one();
  if (exponent == 1) return base;
  switch (base.kind()) {
    case ExprKind::Constant:
      return make_constant(rational_power(base.value(), exponent));
    case ExprKind::Power:
      return power(base.operands()[0], checked_exponent_product(base.exponent(), exponent));
    case ExprKind::Product: {
      std::vector<Expr> fs;
      fs.reserve(base.operands().size());
      for (const auto& f : base.operands()) fs.push_back(power(f, exponent));
      return product(std::move(fs));
    }
    case ExprKind::Quotient:
      return power(quotient(base.operands()[0], base.operands()[1]), exponent);
    case ExprKind::Sum: {
      checked_exponent_product(1, exponent);
      auto [c, prim] = primitive_sum(base);
      const Expr p = make_compound(ExprKind::Power, {prim}, exponent);
      if (c == 1) return p;
      const Expr single[] = {p};
      return assemble_product(rational_power(c, exponent), single);
    }
    default:
      checked_exponent_product(1, exponent);
      return make_compound(ExprKind::Power, {base}, exponent);
  }
}

Expr quotient(const Expr& num, const Expr& den) {
  if (den.is_zero()) throw Error(ErrorCode::DivisionByZero, "division by the constant 0");
  return product({num, power(den, -1)});
}

Expr apply(FuncKind f, const Expr& arg) {
  switch (f) {
    case FuncKind::Ln:
      if (arg.is_one()) return zero();
      break;
    case FuncKind::Exp:
      if (arg.is_zero()) return one();
      break;
    case FuncKind::Sin:
      if (arg.is_zero()) return zero();
      break;
    case FuncKind::Cos:
      if (arg.is_zero()) return one();
      break;
  }
  return make_compound(ExprKind::Function, {arg}, 0, f);
}

Expr operator+(const Expr& a, const Expr& b) { return sum({a, b}); }
Expr operator-(const Expr& a, const Expr& b) { return sum({a, product({Expr(-1), b})}); }
Expr operator*(const Expr& a, const Expr& b) { return product({a, b}); }
Expr operator/(const Expr& a, const Expr& b) { return quotient(a, b); }
Expr operator-(const Expr& a) { return product({Expr(-1), a}); }

namespace raw {
Expr sum(std::vector<Expr> terms) { return make_compound(ExprKind::Sum, std::move(terms)); }
Expr product(std::vector<Expr> factors) { return make_compound(ExprKind::Product, std::move(factors)); }
Expr power(const Expr& base, long exponent) { return make_compound(ExprKind::Power, {base}, exponent); }
Expr quotient(const Expr& num, const Expr& den) {
  if (den.is_zero()) throw Error(ErrorCode::DivisionByZero, "division by the constant 0");
  return make_compound(ExprKind::Quotient, {num, den});
}
Expr apply(FuncKind f, const Expr& arg) { return make_compound(ExprKind::Function, {arg}, 0, f); }
}  // namespace raw

// ---------------------------------------------------------------------------
// Rewrites

namespace {

template <class Leaf>
class Rebuilder {
 public:
  explicit Rebuilder(Leaf leaf) : leaf_(std::move(leaf)) {}

  Expr operator()(const Expr& e) {
    if (auto it = memo_.find(e.node()); it != memo_.end()) return it->second.second;
    Expr r = rebuild(e);
    memo_.emplace(e.node(), std::make_pair(e, r));
    return r;
  }

 private:
  Expr rebuild(const Expr& e) {
    const auto ops = e.operands();
    switch (e.kind()) {
      case ExprKind::Constant: return e;
      case ExprKind::Symbol: return leaf_(e);
      case ExprKind::Sum: {
        std::vector<Expr> v;
        v.reserve(ops.size());
        for (const auto& o : ops) v.push_back((*this)(o));
        return sum(std::move(v));
      }
      case ExprKind::Product: {
        std::vector<Expr> v;
        v.reserve(ops.size());
        for (const auto& o : ops) v.push_back((*this)(o));
        return product(std::move(v));
      }
      case ExprKind::Power: return power((*this)(ops[0]), e.exponent());
      case ExprKind::Quotient: return quotient((*this)(ops[0]), (*this)(ops[1]));
      case ExprKind::Function: return apply(e.function(), (*this)(ops[0]));
    }
    return e;
  }

  Leaf leaf_;
  std::unordered_map<const Node*, std::pair<Expr, Expr>> memo_;
};

template <class Visit>
void walk_dag(const Expr& root, Visit&& visit) {
  std::unordered_set<const Node*> seen;
  std::vector<Expr> stack{root};
  while (!stack.empty()) {
    Expr e = std::move(stack.back());
    stack.pop_back();
    if (!seen.insert(e.node()).second) continue;
    if (!visit(e)) return;
    for (const auto& o : e.operands()) stack.push_back(o);
  }
}

}  // namespace

Expr simplify(const Expr& e) {
  Rebuilder rb([](const Expr& s) { return s; });
  return rb(e);
}

Expr substitute(const Expr& e, const std::map<Symbol, Expr>& bindings) {
  Rebuilder rb([&](const Expr& s) {
    auto it = bindings.find(s.symbol());
    return it == bindings.end() ? s : it->second;
  });
  return rb(e);
}

bool is_rational_expr(const Expr& e) { return e.rational(); }

std::optional<Expr> first_transcendental(const Expr& e) {
  if (e.rational()) return std::nullopt;
  // Descend along non-rational children to reach the outermost function node.
  Expr cur = e;
  while (cur.kind() != ExprKind::Function) {
    for (const auto& o : cur.operands()) {
      if (!o.rational()) {
        cur = o;
        break;
      }
    }
  }
  return cur;
}

std::set<Symbol> free_symbols(const Expr& e) {
  std::set<Symbol> out;
  walk_dag(e, [&](const Expr& n) {
    if (n.is_symbol()) out.insert(n.symbol());
    return true;
  });
  return out;
}

bool depends_on(const Expr& e, const Symbol& s) {
  const std::uint64_t bit = symbol_bit(s);
  if ((e.symbol_mask() & bit) == 0) return false;
  bool found = false;
  walk_dag(e, [&](const Expr& n) {
    if ((n.symbol_mask() & bit) == 0) return true;
    if (n.is_symbol() && n.symbol() == s) found = true;
    return !found;
  });
  return found;
}

std::size_t dag_size(const Expr& e) {
  std::size_t count = 0;
  walk_dag(e, [&](const Expr&) {
    ++count;
    return true;
  });
  return count;
}

// ---------------------------------------------------------------------------
// Derivations

Derivation::Derivation(std::function<Expr(const Symbol&)> field, std::uint64_t support)
    : field_(std::move(field)), support_(support) {}

Expr Derivation::operator()(const Expr& e) {
  if ((e.symbol_mask() & support_) == 0) return zero();
  if (auto it = memo_.find(e.node()); it != memo_.end()) return it->second.second;
  if (interrupt_ && (++visits_ & 0xFFFU) == 0) interrupt_();
  Expr r = apply_rule(e);
  memo_.emplace(e.node(), std::make_pair(e, r));
  return r;
}

Expr Derivation::apply_rule(const Expr& e) {
  const auto ops = e.operands();
  switch (e.kind()) {
    case ExprKind::Constant: return zero();
    case ExprKind::Symbol: return field_(e.symbol());
    case ExprKind::Sum: {
      std::vector<Expr> v;
      v.reserve(ops.size());
      for (const auto& o : ops) {
        Expr d = (*this)(o);
        if (!d.is_zero()) v.push_back(std::move(d));
      }
      return sum(std::move(v));
    }
    case ExprKind::Product: {
      std::vector<Expr> terms;
      for (std::size_t i = 0; i < ops.size(); ++i) {
        Expr d = (*this)(ops[i]);
        if (d.is_zero()) continue;
        std::vector<Expr> fs;
        fs.reserve(ops.size());
        for (std::size_t j = 0; j < ops.size(); ++j) {
          if (j != i) fs.push_back(ops[j]);
        }
        fs.push_back(std::move(d));
        terms.push_back(product(std::move(fs)));
      }
      return sum(std::move(terms));
    }
    case ExprKind::Power: {
      Expr d = (*this)(ops[0]);
      if (d.is_zero()) return zero();
      return product({Expr(static_cast<long long>(e.exponent())), power(ops[0], e.exponent() - 1), d});
    }
    case ExprKind::Quotient: {
      Expr da = (*this)(ops[0]);
      Expr db = (*this)(ops[1]);
      return quotient(da * ops[1] - ops[0] * db, power(ops[1], 2));
    }
    case ExprKind::Function: {
      Expr d = (*this)(ops[0]);
      if (d.is_zero()) return zero();
      switch (e.function()) {
        case FuncKind::Ln: return quotient(d, ops[0]);
        case FuncKind::Exp: return e * d;
        case FuncKind::Sin: return cos(ops[0]) * d;
        case FuncKind::Cos: return -(sin(ops[0]) * d);
      }
    }
  }
  return zero();
}

Derivation partial(const Symbol& s) {
  return Derivation([s](const Symbol& v) { return v == s ? one() : zero(); }, symbol_bit(s));
}

Expr differentiate(const Expr& e, const Symbol& s) {
  Derivation d = partial(s);
  return d(e);
}

// ---------------------------------------------------------------------------
// Printing

namespace {

enum class Ctx { Top, Term, Factor, Base, Denominator };

std::string rational_text(const Rational& q) {
  if (q.get_den() == 1) return q.get_num().get_str();
  return q.get_num().get_str() + "/" + q.get_den().get_str();
}

class Printer {
 public:
  std::string print(const Expr& e, Ctx ctx) {
    switch (e.kind()) {
      case ExprKind::Constant: {
        const Rational& q = e.value();
        std::string s = rational_text(q);
        const bool compound = q < 0 || q.get_den() != 1;
        return compound && ctx != Ctx::Top && ctx != Ctx::Term ? "(" + s + ")" : s;
      }
      case ExprKind::Symbol: return e.symbol().display();
      case ExprKind::Sum: return wrap(print_sum(e), ctx != Ctx::Top);
      case ExprKind::Product: return wrap(print_product(e), ctx == Ctx::Factor || ctx == Ctx::Base || ctx == Ctx::Denominator);
      case ExprKind::Power: {
        if (e.exponent() < 0) {
          std::string s = "1/" + print_power(e.operands()[0], -e.exponent(), Ctx::Denominator);
          return wrap(s, ctx == Ctx::Factor || ctx == Ctx::Base || ctx == Ctx::Denominator);
        }
        return wrap(print_power(e.operands()[0], e.exponent(), ctx), ctx == Ctx::Base);
      }
      case ExprKind::Quotient:
        return wrap(print(e.operands()[0], Ctx::Factor) + "/" + print(e.operands()[1], Ctx::Denominator),
                    ctx != Ctx::Top && ctx != Ctx::Term);
      case ExprKind::Function:
        return std::string(to_string(e.function())) + "(" + print(e.operands()[0], Ctx::Top) + ")";
    }
    return "?";
  }

 private:
  static std::string wrap(std::string s, bool parens) { return parens ? "(" + s + ")" : s; }

  std::string print_power(const Expr& base, long n, Ctx) {
    if (n == 1) return print(base, Ctx::Denominator);
    return print(base, Ctx::Base) + "^" + std::to_string(n);
  }

  static bool negative_term(const Expr& t) {
    if (t.is_constant()) return t.value() < 0;
    return t.kind() == ExprKind::Product && t.operands()[0].is_constant() && t.operands()[0].value() < 0;
  }

  std::string print_sum(const Expr& e) {
    std::string out;
    bool first = true;
    for (const auto& t : e.operands()) {
      if (first) {
        out += print(t, Ctx::Term);
        first = false;
      } else if (negative_term(t)) {
        out += " - " + print(-t, Ctx::Term);
      } else {
        out += " + " + print(t, Ctx::Term);
      }
    }
    return out;
  }

  std::string print_product(const Expr& e) {
    Rational coeff(1);
    std::vector<std::string> num;
    std::vector<std::pair<Expr, long>> den;
    for (const auto& f : e.operands()) {
      if (f.is_constant()) {
        coeff *= f.value();
      } else if (f.kind() == ExprKind::Power && f.exponent() < 0) {
        den.emplace_back(f.operands()[0], -f.exponent());
      } else {
        num.push_back(print(f, Ctx::Factor));
      }
    }
    std::string out = coeff < 0 ? "-" : "";
    Rational mag = abs(coeff);
    std::vector<std::string> parts;
    if (mag != 1 || num.empty()) parts.push_back(rational_text(mag));
    parts.insert(parts.end(), num.begin(), num.end());
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "*" : "") + parts[i];
    if (den.size() == 1) {
      out += "/" + print_power(den[0].first, den[0].second, Ctx::Denominator);
    } else if (den.size() > 1) {
      out += "/(";
      for (std::size_t i = 0; i < den.size(); ++i) {
        out += (i ? "*" : "") + print_power(den[i].first, den[i].second, Ctx::Factor);
      }
      out += ")";
    }
    return out;
  }
};

}  // namespace

std::string to_string(const Expr& e) {
  Printer p;
  return p.print(e, Ctx::Top);
}

}  // namespace identiscope
