#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "identiscope/expr.hpp"
#include "identiscope/model.hpp"
#include "identiscope/modular.hpp"
#include "identiscope/report.hpp"

namespace identiscope {

inline constexpr std::uint64_t kDefaultSymbolicPrime = 2147483647;

/// The derivation φ ↦ (∂φ/∂z)·F + Σ_j (∂φ/∂u^(j))·u^(j+1) + ∂φ/∂t.
/// Constant-mode inputs have u' = 0.
Derivation lie_derivation(const AugmentedSystem& sys);

Expr extended_lie_derivative(const Expr& phi, const AugmentedSystem& sys);

/// Successive Lie derivatives L_F^k h_i, each derived from the cached
/// previous level.
class LieCache {
 public:
  explicit LieCache(const AugmentedSystem& sys);

  const Expr& get(std::size_t output, std::size_t level);
  std::size_t output_count() const noexcept { return series_.size(); }
  std::size_t levels_cached(std::size_t output) const { return series_.at(output).size(); }

  void set_interrupt(std::function<void()> check) { lie_.set_interrupt(std::move(check)); }

 private:
  Derivation lie_;
  std::vector<std::vector<Expr>> series_;
};

/// Rows are gradients ∂(L_F^j h_i)/∂z ordered j outer, i inner.
struct ObservabilityMatrix {
  std::size_t level = 0;
  std::size_t n_z = 0;
  std::vector<std::vector<Expr>> rows;
};

/// Builds the observability matrix one level at a time, reusing the Lie
/// cache and one memoized ∂/∂z_k derivation per column.
class MatrixBuilder {
 public:
  explicit MatrixBuilder(const AugmentedSystem& sys);

  /// Appends the rows for the next level and returns them.
  std::span<const std::vector<Expr>> add_level();
  std::size_t levels_built() const noexcept { return levels_; }
  const ObservabilityMatrix& matrix() const noexcept { return matrix_; }

  void set_interrupt(std::function<void()> check);

 private:
  const AugmentedSystem* sys_;
  LieCache lie_;
  std::vector<Derivation> partials_;
  ObservabilityMatrix matrix_;
  std::size_t levels_ = 0;
};

/// Rows for derivative levels 0..k.
ObservabilityMatrix build_matrix(const AugmentedSystem& sys, std::size_t k);

struct RandomEvalOptions {
  int trials = 3;
  std::uint64_t seed = 0;
  std::uint64_t prime = kDefaultSymbolicPrime;
  /// Resamples allowed per trial after a vanishing denominator.
  int retries = 25;
};

/// A matrix specialized at one trial's random point.
struct EvaluatedTrial {
  int attempt = 0;
  ModMatrix values;
  std::size_t transcendental_nodes = 0;
};

/// Specializes every symbol (and every transcendental node) on keyed random
/// residues, resampling a trial whose point makes a denominator vanish.
/// Throws RetriesExhausted after `retries` failed resamples.
std::vector<EvaluatedTrial> evaluate_trials(const ObservabilityMatrix& m, const RandomEvalOptions& opts);

/// Max over trials of the exact rank over F_p.
std::size_t rank_by_random_eval(const ObservabilityMatrix& m, const RandomEvalOptions& opts);

/// Column-deletion test: an entry is observable/SLI iff deleting its column
/// lowers the rank from r to r-1. With r = n_z everything is observable.
std::vector<Verdict> classify_columns(const ObservabilityMatrix& m, const AugmentedSystem& sys,
                                      std::size_t r, const RandomEvalOptions& opts);

/// Column-deletion verdicts from already evaluated trial matrices.
std::vector<Verdict> classify_from_trials(std::span<const ModMatrix> trials, const AugmentedSystem& sys,
                                          std::size_t r, const PrimeField& field);

struct SymbolicOptions {
  /// Highest Lie level examined; defaults to n_z - 1.
  std::optional<int> max_level;
  int trials = 3;
  std::uint64_t seed = 0;
  std::uint64_t prime = kDefaultSymbolicPrime;
  int retries = 25;
  std::optional<double> timeout_s;
};

/// Observability rank condition by incremental Lie derivatives. Stops at
/// full rank, at the first level that adds no rank, or at max_level.
/// Throws RetriesExhausted or Timeout.
AnalysisReport analyze_symbolic(const ModelDef& md, const SymbolicOptions& opts = {});

}  // namespace identiscope
