#include "identiscope/ffprob.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>
#include <tuple>

#include "identiscope/errors.hpp"
#include "identiscope/eval.hpp"
#include "identiscope/lie_orc.hpp"
#include "identiscope/sampling.hpp"

namespace identiscope {

namespace {

constexpr std::uint64_t kPointTag = 0x46'4650'524f42ULL;
constexpr std::uint64_t kInputTag = 0x49'4e50'5554ULL;

void require_rational(const AugmentedSystem& sys) {
  auto check = [](const Expr& e, const std::string& where) {
    if (auto t = first_transcendental(e)) {
      throw Error(ErrorCode::NonRationalExpr,
                  where + " contains the transcendental term " + to_string(*t) +
                      "; the finite-field engine needs a rational model, use the symbolic engine");
    }
  };
  for (std::size_t k = 0; k < sys.n_z(); ++k) check(sys.dynamics[k], "ddt " + sys.z[k].display());
  for (const auto& o : sys.outputs) check(o.expr, "output " + o.name);
}

std::size_t input_index(const AugmentedSystem& sys, const std::string& name) {
  for (std::size_t q = 0; q < sys.known_inputs.size(); ++q) {
    if (sys.known_inputs[q].base.name == name) return q;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown known input " + name);
}

// Symbols of the augmented system resolved against series for z and u.
SeriesEvaluator::Lookup series_lookup(const AugmentedSystem& sys, const std::vector<TruncSeries>& z,
                                      std::span<const TruncSeries> inputs, std::size_t order,
                                      const PrimeField& field) {
  return [&sys, &z, inputs, order, field](const Symbol& s) -> TruncSeries {
    if (auto it = sys.index.find(s); it != sys.index.end()) return z[it->second].truncated(order);
    if (s.kind == SymbolKind::KnownInput) {
      TruncSeries u = inputs[input_index(sys, s.name)];
      for (int j = 0; j < s.order; ++j) u = u.derivative();
      return u.truncated(order);
    }
    if (s.kind == SymbolKind::Time) {
      TruncSeries t(order, field);
      if (order >= 1) t[1] = 1;
      return t;
    }
    throw Error(ErrorCode::InvalidArgument, "symbol " + s.display() + " is not part of the system");
  };
}

// Coefficient j of Σ_m a[m]·b[m] truncated products.
Residue conv_coeff(const TruncSeries& a, const TruncSeries& b, std::size_t j, const PrimeField& f) {
  Residue acc = 0;
  for (std::size_t i = 0; i <= j; ++i) {
    if (a[i] != 0) acc = f.add(acc, f.mul(a[i], b[j - i]));
  }
  return acc;
}

struct SparseEntry {
  std::size_t row;
  std::size_t col;
  TruncSeries value;
};

struct SparseExpr {
  std::size_t row;
  std::size_t col;
  Expr value;
};

// Nonzero symbolic entries of ∂F/∂z and ∂h/∂z, shared by every trial.
struct Linearization {
  std::vector<SparseExpr> dynamics;
  std::vector<SparseExpr> outputs;
};

std::vector<SparseExpr> sparse_jacobian(const AugmentedSystem& sys, std::span<const Expr> exprs) {
  std::vector<SparseExpr> out;
  for (std::size_t c = 0; c < sys.n_z(); ++c) {
    Derivation d = partial(sys.z[c]);
    for (std::size_t r = 0; r < exprs.size(); ++r) {
      Expr g = d(exprs[r]);
      if (!g.is_zero()) out.push_back({r, c, std::move(g)});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const SparseExpr& a, const SparseExpr& b) { return std::tie(a.row, a.col) < std::tie(b.row, b.col); });
  return out;
}

std::vector<Expr> output_exprs(const AugmentedSystem& sys) {
  std::vector<Expr> hs;
  for (const auto& o : sys.outputs) hs.push_back(o.expr);
  return hs;
}

Linearization linearize(const AugmentedSystem& sys, bool with_outputs) {
  Linearization lin;
  lin.dynamics = sparse_jacobian(sys, sys.dynamics);
  if (with_outputs) lin.outputs = sparse_jacobian(sys, output_exprs(sys));
  return lin;
}

std::vector<SparseEntry> evaluate_sparse(const AugmentedSystem& sys, const std::vector<SparseExpr>& entries,
                                         const SeriesSolution& sol, const PrimeField& field,
                                         const Deadline& deadline) {
  SeriesEvaluator ev(field, sol.order, series_lookup(sys, sol.z, sol.inputs, sol.order, field));
  std::vector<SparseEntry> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    deadline.check();
    out.push_back({e.row, e.col, ev(e.value)});
  }
  return out;
}

SeriesSolution solve(const AugmentedSystem& sys, const Linearization& lin, std::span<const Residue> z0,
                     std::span<const TruncSeries> inputs, std::size_t order, const PrimeField& field,
                     const Deadline& deadline);

ModMatrix jacobian_of(const SeriesSolution& sol, const AugmentedSystem& sys, const Linearization& lin);

}  // namespace

SeriesEvaluator::SeriesEvaluator(const PrimeField& field, std::size_t order, Lookup lookup)
    : field_(field), order_(order), lookup_(std::move(lookup)) {}

TruncSeries SeriesEvaluator::operator()(const Expr& e) {
  if (auto it = memo_.find(e.node()); it != memo_.end()) return it->second.second;
  TruncSeries v = eval(e);
  memo_.emplace(e.node(), std::make_pair(e, v));
  return v;
}

TruncSeries SeriesEvaluator::eval(const Expr& e) {
  const auto ops = e.operands();
  switch (e.kind()) {
    case ExprKind::Constant: return TruncSeries::constant(order_, field_.from_rational(e.value()), field_);
    case ExprKind::Symbol: return lookup_(e.symbol()).truncated(order_);
    case ExprKind::Sum: {
      TruncSeries acc(order_, field_);
      for (const auto& o : ops) acc += (*this)(o);
      return acc;
    }
    case ExprKind::Product: {
      TruncSeries acc = TruncSeries::constant(order_, 1, field_);
      for (const auto& o : ops) acc = acc * (*this)(o);
      return acc;
    }
    case ExprKind::Power: return (*this)(ops[0]).pow(e.exponent());
    case ExprKind::Quotient: return (*this)(ops[0]) * (*this)(ops[1]).inverse();
    case ExprKind::Function:
      throw Error(ErrorCode::NonRationalExpr, "cannot expand the transcendental term " + to_string(e) +
                                                  " over a finite field");
  }
  throw Error(ErrorCode::InvalidArgument, "unknown expression kind");
}

SeriesSolution series_solve(const AugmentedSystem& sys, std::span<const Residue> z0,
                            std::span<const TruncSeries> inputs, std::size_t order, const PrimeField& field,
                            const Deadline& deadline) {
  require_rational(sys);
  return solve(sys, linearize(sys, false), z0, inputs, order, field, deadline);
}

namespace {

SeriesSolution solve(const AugmentedSystem& sys, const Linearization& lin, std::span<const Residue> z0,
                     std::span<const TruncSeries> inputs, std::size_t order, const PrimeField& field,
                     const Deadline& deadline) {
  const std::size_t n = sys.n_z();
  if (z0.size() != n) throw Error(ErrorCode::InvalidArgument, "initial point has the wrong dimension");
  if (inputs.size() != sys.known_inputs.size()) {
    throw Error(ErrorCode::InvalidArgument, "one input series per known input is required");
  }
  for (const auto& u : inputs) {
    if (u.order() < order) throw Error(ErrorCode::InvalidArgument, "input series shorter than the solution order");
  }

  SeriesSolution sol;
  sol.order = order;
  sol.prime = field.modulus();
  sol.z0.assign(z0.begin(), z0.end());
  for (const auto& u : inputs) sol.inputs.push_back(u.truncated(order));
  for (std::size_t k = 0; k < n; ++k) sol.z.push_back(TruncSeries::constant(order, z0[k], field));

  for (std::size_t j = 0; j < order; ++j) {
    deadline.check();
    SeriesEvaluator ev(field, j, series_lookup(sys, sol.z, sol.inputs, j, field));
    std::vector<Residue> next(n, 0);
    for (std::size_t k = 0; k < n; ++k) {
      if (sys.dynamics[k].is_zero()) continue;
      next[k] = field.div(ev(sys.dynamics[k])[j], field.from_int(static_cast<long long>(j + 1)));
    }
    for (std::size_t k = 0; k < n; ++k) sol.z[k][j + 1] = next[k];
  }

  const auto jac = evaluate_sparse(sys, lin.dynamics, sol, field, deadline);
  sol.sensitivity.assign(n, std::vector<TruncSeries>(n, TruncSeries(order, field)));
  for (std::size_t k = 0; k < n; ++k) sol.sensitivity[k][k][0] = 1;
  for (std::size_t j = 0; j < order; ++j) {
    deadline.check();
    const Residue inv = field.inv(field.from_int(static_cast<long long>(j + 1)));
    std::vector<std::vector<Residue>> next(n, std::vector<Residue>(n, 0));
    for (const auto& entry : jac) {
      for (std::size_t l = 0; l < n; ++l) {
        Residue c = conv_coeff(entry.value, sol.sensitivity[entry.col][l], j, field);
        next[entry.row][l] = field.add(next[entry.row][l], c);
      }
    }
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t l = 0; l < n; ++l) sol.sensitivity[k][l][j + 1] = field.mul(next[k][l], inv);
    }
  }
  return sol;
}

}  // namespace

std::vector<TruncSeries> output_series(const SeriesSolution& sol, const AugmentedSystem& sys) {
  const PrimeField field(sol.prime);
  SeriesEvaluator ev(field, sol.order, series_lookup(sys, sol.z, sol.inputs, sol.order, field));
  std::vector<TruncSeries> out;
  for (const auto& o : sys.outputs) out.push_back(ev(o.expr));
  return out;
}

ModMatrix output_jacobian(const SeriesSolution& sol, const AugmentedSystem& sys) {
  Linearization lin;
  lin.outputs = sparse_jacobian(sys, output_exprs(sys));
  return jacobian_of(sol, sys, lin);
}

namespace {

ModMatrix jacobian_of(const SeriesSolution& sol, const AugmentedSystem& sys, const Linearization& lin) {
  const PrimeField field(sol.prime);
  const std::size_t n = sys.n_z();
  const std::size_t m = sys.outputs.size();
  const auto grad = evaluate_sparse(sys, lin.outputs, sol, field, Deadline{});

  ModMatrix out(m * (sol.order + 1), n);
  for (const auto& entry : grad) {
    for (std::size_t j = 0; j <= sol.order; ++j) {
      const std::size_t row = entry.row * (sol.order + 1) + j;
      for (std::size_t l = 0; l < n; ++l) {
        out.at(row, l) = field.add(out.at(row, l), conv_coeff(entry.value, sol.sensitivity[entry.col][l], j, field));
      }
    }
  }
  return out;
}

}  // namespace

SeriesPoint sample_series_point(const AugmentedSystem& sys, std::size_t order, const PrimeField& field,
                                std::uint64_t seed, int trial, int attempt) {
  const std::uint64_t p = field.modulus();
  const auto t = static_cast<std::uint64_t>(trial);
  const auto a = static_cast<std::uint64_t>(attempt);
  SeriesPoint pt;
  for (const auto& s : sys.z) pt.z0.push_back(draw_residue({kPointTag, seed, p, t, a, symbol_key(s)}, p));
  for (const auto& in : sys.known_inputs) {
    TruncSeries u(order, field);
    const std::size_t top = in.mode == InputMode::Constant ? 0 : order;
    for (std::size_t j = 0; j <= top; ++j) {
      u[j] = draw_residue({kInputTag, seed, p, t, a, symbol_key(in.base), j}, p);
    }
    pt.inputs.push_back(std::move(u));
  }
  return pt;
}

AnalysisReport analyze_ffprob(const ModelDef& md, const FfprobOptions& opts) {
  const auto started = std::chrono::steady_clock::now();
  const AugmentedSystem sys = augment(md);
  require_rational(sys);
  if (opts.primes.empty()) throw Error(ErrorCode::InvalidArgument, "at least one prime is required");
  for (auto p : opts.primes) {
    if (p <= kMinFfprobPrime || !is_prime(p)) {
      throw Error(ErrorCode::InvalidArgument,
                  std::to_string(p) + " is not a prime above 2^20 (" + std::to_string(kMinFfprobPrime) + ")");
    }
  }
  if (opts.trials < 1) throw Error(ErrorCode::InvalidArgument, "at least one trial is required");
  if (opts.retries < 0) throw Error(ErrorCode::InvalidArgument, "retries must be non-negative");
  if (opts.order && *opts.order < 1) throw Error(ErrorCode::InvalidArgument, "series order must be at least 1");

  const Deadline deadline = Deadline::from_optional(opts.timeout_s);
  const std::size_t n = sys.n_z();
  const std::size_t order =
      opts.order ? static_cast<std::size_t>(*opts.order) : std::max<std::size_t>(1, n - 1);

  AnalysisReport rep;
  rep.model = md.name;
  rep.engine = "ffprob";
  rep.n_z = n;
  rep.seed = opts.seed;
  rep.primes = opts.primes;
  rep.trials = opts.trials;
  rep.order = static_cast<int>(order);

  struct Built {
    PrimeField field;
    ModMatrix jac;
  };
  std::vector<Built> built;
  const Linearization lin = linearize(sys, true);
  std::size_t r = 0;
  for (auto p : opts.primes) {
    const PrimeField field(p);
    for (int t = 0; t < opts.trials; ++t) {
      for (int attempt = 0;; ++attempt) {
        deadline.check();
        try {
          SeriesPoint pt = sample_series_point(sys, order, field, opts.seed, t, attempt);
          SeriesSolution sol = solve(sys, lin, pt.z0, pt.inputs, order, field, deadline);
          built.push_back({field, jacobian_of(sol, sys, lin)});
          break;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::DivisionByZeroModP) throw;
          if (attempt + 1 > opts.retries) {
            std::ostringstream msg;
            msg << "prime " << p << ", trial " << t << ": denominator vanished at " << attempt + 1
                << " random points in a row (" << e.what() << ")";
            throw Error(ErrorCode::RetriesExhausted, msg.str());
          }
        }
      }
      built.back().jac = row_echelon(std::move(built.back().jac), field);
      const std::size_t tr = built.back().jac.rows();
      rep.trial_ranks.push_back({p, t, tr});
      r = std::max(r, tr);
    }
  }
  rep.rank = r;
  rep.stop_reason = r == n ? "full_rank" : "series_order";

  for (std::size_t c = 0; c < n; ++c) {
    bool identifiable = true;
    if (r < n) {
      deadline.check();
      std::size_t dropped = 0;
      for (const auto& b : built) dropped = std::max(dropped, rank(b.jac.without_column(c), b.field));
      identifiable = dropped < r;
    }
    rep.verdicts.push_back({sys.z[c].display(), sys.roles[c], identifiable});
  }
  if (sys.has_direct_feedthrough()) {
    rep.warnings.push_back("an output reads an unknown input directly (direct feedthrough)");
  }
  rep.time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return rep;
}

bool cross_check_lie(const ModelDef& md, std::size_t K, std::uint64_t prime, std::uint64_t seed) {
  const AugmentedSystem sys = augment(md);
  require_rational(sys);
  const PrimeField field(prime);
  constexpr int kRetries = 25;
  for (int attempt = 0;; ++attempt) {
    try {
      const SeriesPoint pt = sample_series_point(sys, K, field, seed, 0, attempt);
      const SeriesSolution sol = series_solve(sys, pt.z0, pt.inputs, K, field);
      const auto ys = output_series(sol, sys);

      ModPEvaluator ev(field, [&](const Symbol& s) -> Residue {
        if (auto it = sys.index.find(s); it != sys.index.end()) return pt.z0[it->second];
        if (s.kind == SymbolKind::KnownInput) {
          const auto& u = pt.inputs[input_index(sys, s.name)];
          const auto j = static_cast<std::size_t>(s.order);
          if (j > u.order()) return 0;
          Residue fact = 1;
          for (std::size_t i = 2; i <= j; ++i) fact = field.mul(fact, field.from_int(static_cast<long long>(i)));
          return field.mul(fact, u[j]);
        }
        if (s.kind == SymbolKind::Time) return 0;
        throw Error(ErrorCode::InvalidArgument, "symbol " + s.display() + " is not part of the system");
      });
      LieCache lie(sys);
      for (std::size_t i = 0; i < sys.outputs.size(); ++i) {
        Residue fact = 1;
        for (std::size_t k = 0; k <= K; ++k) {
          if (k >= 2) fact = field.mul(fact, field.from_int(static_cast<long long>(k)));
          if (field.mul(fact, ys[i][k]) != ev(lie.get(i, k))) return false;
        }
      }
      return true;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DivisionByZeroModP) throw;
      if (attempt + 1 > kRetries) throw Error(ErrorCode::RetriesExhausted, e.what());
    }
  }
}

}  // namespace identiscope
