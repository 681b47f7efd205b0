#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "identiscope/expr.hpp"
#include "identiscope/model.hpp"
#include "identiscope/modular.hpp"
#include "identiscope/report.hpp"
#include "identiscope/series.hpp"

namespace identiscope {

inline const std::vector<std::uint64_t> kDefaultFfprobPrimes = {2147483647, 2147483629, 2147483587};
inline constexpr std::uint64_t kMinFfprobPrime = std::uint64_t{1} << 20;

/// Memoized evaluation of a rational expression DAG on truncated series.
class SeriesEvaluator {
 public:
  using Lookup = std::function<TruncSeries(const Symbol&)>;

  SeriesEvaluator(const PrimeField& field, std::size_t order, Lookup lookup);

  /// Throws NonRationalExpr on ln/exp/sin/cos and DivisionByZeroModP when a
  /// divisor has a vanishing constant term.
  TruncSeries operator()(const Expr& e);

 private:
  TruncSeries eval(const Expr& e);

  PrimeField field_;
  std::size_t order_;
  Lookup lookup_;
  std::unordered_map<const detail::Node*, std::pair<Expr, TruncSeries>> memo_;
};

struct SeriesSolution {
  std::size_t order = 0;
  std::uint64_t prime = 0;
  std::vector<Residue> z0;
  /// z(t), aligned with the augmented state.
  std::vector<TruncSeries> z;
  /// sensitivity[k][l] = ∂z_k(t)/∂z0_l.
  std::vector<std::vector<TruncSeries>> sensitivity;
  /// Known-input series, aligned with the model's known inputs.
  std::vector<TruncSeries> inputs;
};

/// Solves ż = F(z, u), z(0) = z0 through t^N by coefficient-wise Picard
/// iteration, then Ṡ = (∂F/∂z)·S, S(0) = I through t^N.
SeriesSolution series_solve(const AugmentedSystem& sys, std::span<const Residue> z0,
                            std::span<const TruncSeries> inputs, std::size_t order, const PrimeField& field,
                            const Deadline& deadline = {});

/// y_i(t) = h_i(z(t), u(t)).
std::vector<TruncSeries> output_series(const SeriesSolution& sol, const AugmentedSystem& sys);

/// Rows ∂coeff_j(y_i)/∂z0 for output i outer, order j inner.
ModMatrix output_jacobian(const SeriesSolution& sol, const AugmentedSystem& sys);

/// Random initial point and input series of one trial.
struct SeriesPoint {
  std::vector<Residue> z0;
  std::vector<TruncSeries> inputs;
};

SeriesPoint sample_series_point(const AugmentedSystem& sys, std::size_t order, const PrimeField& field,
                                std::uint64_t seed, int trial, int attempt);

struct FfprobOptions {
  std::vector<std::uint64_t> primes = kDefaultFfprobPrimes;
  int trials = 2;
  std::uint64_t seed = 0;
  /// Series truncation order; defaults to n_z - 1.
  std::optional<int> order;
  int retries = 25;
  std::optional<double> timeout_s;
};

/// Rank of the output-coefficient Jacobian at random points, max-aggregated
/// over primes and trials. Throws NonRationalExpr, RetriesExhausted, Timeout
/// or InvalidArgument (bad prime, bad trial count).
AnalysisReport analyze_ffprob(const ModelDef& md, const FfprobOptions& opts = {});

/// k!·coeff_k(y_i) == (L_F^k h_i)(z0, u-jet) mod p for every output i and
/// every k ≤ K.
bool cross_check_lie(const ModelDef& md, std::size_t K, std::uint64_t prime, std::uint64_t seed);

}  // namespace identiscope
