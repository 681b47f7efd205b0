#include "identiscope/lie_orc.hpp"

#include <algorithm>
#include <chrono>
#include <optional>
#include <sstream>

#include "identiscope/errors.hpp"
#include "identiscope/eval.hpp"
#include "identiscope/sampling.hpp"

namespace identiscope {

namespace {

constexpr std::uint64_t kSymbolicTag = 0x4c4945'4f5243ULL;

InputMode input_mode(const AugmentedSystem& sys, const std::string& name) {
  for (const auto& in : sys.known_inputs) {
    if (in.base.name == name) return in.mode;
  }
  return InputMode::Generic;
}

ModPEvaluator::Lookup point_lookup(const RandomEvalOptions& opts, int trial, int attempt) {
  return [seed = opts.seed, p = opts.prime, trial, attempt](const Symbol& s) {
    return draw_residue({kSymbolicTag, seed, static_cast<std::uint64_t>(trial),
                         static_cast<std::uint64_t>(attempt), symbol_key(s)},
                        p);
  };
}

// One trial of the rank test: a random point plus the rows evaluated there.
class TrialState {
 public:
  TrialState(const RandomEvalOptions& opts, int trial, std::size_t cols)
      : opts_(opts), field_(opts.prime), trial_(trial), cols_(cols) {
    reset();
  }

  // Evaluates rows [from, all.size()); on a vanishing denominator the trial
  // is resampled and every row is re-evaluated at the new point.
  void extend(std::span<const std::vector<Expr>> all, std::size_t from, const Deadline& deadline) {
    for (;;) {
      try {
        for (std::size_t r = from; r < all.size(); ++r) {
          deadline.check();
          std::vector<Residue> row(cols_);
          for (std::size_t c = 0; c < cols_; ++c) row[c] = (*ev_)(all[r][c]);
          values_.append_row(row);
        }
        return;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DivisionByZeroModP) throw;
        if (++attempt_ > opts_.retries) {
          std::ostringstream msg;
          msg << "trial " << trial_ << ": denominator vanished at " << attempt_
              << " random points in a row (" << e.what() << ")";
          throw Error(ErrorCode::RetriesExhausted, msg.str());
        }
        reset();
        from = 0;
      }
    }
  }

  const ModMatrix& values() const noexcept { return values_; }
  int attempt() const noexcept { return attempt_; }
  std::size_t transcendental_nodes() const noexcept { return ev_->transcendental_count(); }

 private:
  void reset() {
    ev_.emplace(field_, point_lookup(opts_, trial_, attempt_));
    ev_->treat_transcendentals_as_symbols(
        fnv1a("transcendental") ^ (opts_.seed * 0x9e3779b97f4a7c15ULL) ^
        (static_cast<std::uint64_t>(trial_) << 32) ^ static_cast<std::uint64_t>(attempt_));
    values_ = ModMatrix(0, cols_);
  }

  RandomEvalOptions opts_;
  PrimeField field_;
  int trial_;
  std::size_t cols_;
  int attempt_ = 0;
  std::optional<ModPEvaluator> ev_;
  ModMatrix values_;
};

void check_options(int trials, int retries) {
  if (trials < 1) throw Error(ErrorCode::InvalidArgument, "at least one trial is required");
  if (retries < 0) throw Error(ErrorCode::InvalidArgument, "retries must be non-negative");
}

}  // namespace

Derivation lie_derivation(const AugmentedSystem& sys) {
  auto field = [&sys](const Symbol& s) -> Expr {
    switch (s.kind) {
      case SymbolKind::Time: return Expr(1);
      case SymbolKind::KnownInput:
        return input_mode(sys, s.name) == InputMode::Constant ? Expr() : Expr(s.derivative(1));
      default: {
        auto it = sys.index.find(s);
        return it == sys.index.end() ? Expr() : sys.dynamics[it->second];
      }
    }
  };
  return Derivation(field, ~std::uint64_t{0});
}

Expr extended_lie_derivative(const Expr& phi, const AugmentedSystem& sys) {
  return lie_derivation(sys)(phi);
}

LieCache::LieCache(const AugmentedSystem& sys) : lie_(lie_derivation(sys)) {
  series_.reserve(sys.outputs.size());
  for (const auto& out : sys.outputs) series_.push_back({out.expr});
}

const Expr& LieCache::get(std::size_t output, std::size_t level) {
  auto& s = series_.at(output);
  while (s.size() <= level) {
    Expr next = lie_(s.back());
    s.push_back(std::move(next));
  }
  return s[level];
}

MatrixBuilder::MatrixBuilder(const AugmentedSystem& sys) : sys_(&sys), lie_(sys) {
  partials_.reserve(sys.n_z());
  for (const auto& s : sys.z) partials_.push_back(partial(s));
  matrix_.n_z = sys.n_z();
}

void MatrixBuilder::set_interrupt(std::function<void()> check) {
  lie_.set_interrupt(check);
  for (auto& d : partials_) d.set_interrupt(check);
}

std::span<const std::vector<Expr>> MatrixBuilder::add_level() {
  const std::size_t level = levels_;
  const std::size_t first = matrix_.rows.size();
  for (std::size_t i = 0; i < sys_->outputs.size(); ++i) {
    const Expr& phi = lie_.get(i, level);
    std::vector<Expr> row;
    row.reserve(partials_.size());
    for (auto& d : partials_) row.push_back(d(phi));
    matrix_.rows.push_back(std::move(row));
  }
  matrix_.level = level;
  ++levels_;
  return std::span<const std::vector<Expr>>(matrix_.rows).subspan(first);
}

ObservabilityMatrix build_matrix(const AugmentedSystem& sys, std::size_t k) {
  MatrixBuilder b(sys);
  for (std::size_t j = 0; j <= k; ++j) b.add_level();
  return b.matrix();
}

std::vector<EvaluatedTrial> evaluate_trials(const ObservabilityMatrix& m, const RandomEvalOptions& opts) {
  check_options(opts.trials, opts.retries);
  std::vector<EvaluatedTrial> out;
  for (int t = 0; t < opts.trials; ++t) {
    TrialState st(opts, t, m.n_z);
    st.extend(m.rows, 0, Deadline{});
    out.push_back({st.attempt(), st.values(), st.transcendental_nodes()});
  }
  return out;
}

std::size_t rank_by_random_eval(const ObservabilityMatrix& m, const RandomEvalOptions& opts) {
  PrimeField field(opts.prime);
  std::size_t r = 0;
  for (const auto& t : evaluate_trials(m, opts)) r = std::max(r, rank(t.values, field));
  return r;
}

std::vector<Verdict> classify_from_trials(std::span<const ModMatrix> trials, const AugmentedSystem& sys,
                                          std::size_t r, const PrimeField& field) {
  std::vector<Verdict> out;
  out.reserve(sys.n_z());
  std::vector<ModMatrix> bases;
  if (r < sys.n_z()) {
    for (const auto& m : trials) bases.push_back(row_echelon(m, field));
  }
  for (std::size_t c = 0; c < sys.n_z(); ++c) {
    bool identifiable = true;
    if (r < sys.n_z()) {
      std::size_t dropped = 0;
      for (const auto& m : bases) dropped = std::max(dropped, rank(m.without_column(c), field));
      identifiable = dropped < r;
    }
    out.push_back({sys.z[c].display(), sys.roles[c], identifiable});
  }
  return out;
}

std::vector<Verdict> classify_columns(const ObservabilityMatrix& m, const AugmentedSystem& sys,
                                      std::size_t r, const RandomEvalOptions& opts) {
  std::vector<ModMatrix> values;
  for (auto& t : evaluate_trials(m, opts)) values.push_back(std::move(t.values));
  return classify_from_trials(values, sys, r, PrimeField(opts.prime));
}

AnalysisReport analyze_symbolic(const ModelDef& md, const SymbolicOptions& opts) {
  const auto started = std::chrono::steady_clock::now();
  check_options(opts.trials, opts.retries);
  if (opts.max_level && *opts.max_level < 0) {
    throw Error(ErrorCode::InvalidArgument, "max level must be non-negative");
  }
  const Deadline deadline = Deadline::from_optional(opts.timeout_s);
  const RandomEvalOptions eval_opts{opts.trials, opts.seed, opts.prime, opts.retries};
  const PrimeField field(opts.prime);

  const AugmentedSystem sys = augment(md);
  const std::size_t n = sys.n_z();
  const std::size_t max_level = opts.max_level ? static_cast<std::size_t>(*opts.max_level) : n - 1;

  AnalysisReport rep;
  rep.model = md.name;
  rep.engine = "symbolic";
  rep.n_z = n;
  rep.seed = opts.seed;
  rep.primes = {opts.prime};
  rep.trials = opts.trials;

  MatrixBuilder builder(sys);
  builder.set_interrupt([&deadline] { deadline.check(); });
  std::vector<TrialState> trials;
  for (int t = 0; t < opts.trials; ++t) trials.emplace_back(eval_opts, t, n);

  std::vector<std::size_t> trial_rank(trials.size(), 0);
  for (std::size_t level = 0;; ++level) {
    deadline.check();
    const std::size_t first = builder.matrix().rows.size();
    builder.add_level();
    deadline.check();
    std::size_t r = 0;
    for (std::size_t t = 0; t < trials.size(); ++t) {
      trials[t].extend(builder.matrix().rows, first, deadline);
      trial_rank[t] = rank(trials[t].values(), field);
      r = std::max(r, trial_rank[t]);
    }
    rep.ranks_by_level.push_back(r);
    rep.order = static_cast<int>(level);
    if (r == n) {
      rep.stop_reason = "full_rank";
    } else if (level > 0 && r == rep.ranks_by_level[level - 1]) {
      rep.stop_reason = "saturated";
    } else if (level >= max_level) {
      rep.stop_reason = "max_level";
    } else {
      continue;
    }
    break;
  }

  const std::size_t r = rep.ranks_by_level.back();
  rep.rank = r;
  for (std::size_t t = 0; t < trials.size(); ++t) {
    rep.trial_ranks.push_back({opts.prime, static_cast<int>(t), trial_rank[t]});
  }
  std::vector<ModMatrix> values;
  for (const auto& t : trials) values.push_back(t.values());
  deadline.check();
  rep.verdicts = classify_from_trials(values, sys, r, field);

  std::size_t transcendental = 0;
  for (const auto& t : trials) transcendental = std::max(transcendental, t.transcendental_nodes());
  if (transcendental > 0) {
    std::ostringstream w;
    w << transcendental << " transcendental subterms were specialized as independent random values; "
      << "algebraic relations among them are ignored, so ranks are indicative";
    rep.warnings.push_back(w.str());
  }
  bool generic_inputs = std::any_of(sys.known_inputs.begin(), sys.known_inputs.end(),
                                    [](const InputSpec& in) { return in.mode == InputMode::Generic; });
  if (generic_inputs && rep.order > 0) {
    std::ostringstream w;
    w << "known-input derivatives up to order " << rep.order << " were sampled as independent values";
    rep.warnings.push_back(w.str());
  }
  if (sys.has_direct_feedthrough()) {
    rep.warnings.push_back("an output reads an unknown input directly (direct feedthrough)");
  }
  rep.time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return rep;
}

}  // namespace identiscope
