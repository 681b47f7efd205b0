#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "identiscope/errors.hpp"
#include "identiscope/model.hpp"

namespace identiscope {

/// Per-variable outcome. States read observable/unobservable, parameters
/// SLI/SU, unknown-input chain entries reconstructible/unreconstructible.
struct Verdict {
  std::string symbol;
  VariableRole role = VariableRole::State;
  bool identifiable = false;

  std::string label() const;
  bool operator==(const Verdict&) const = default;
};

std::string verdict_label(VariableRole role, bool identifiable);

enum class RunStatus { Ok, NotApplicable, Error, Timeout };

std::string_view to_string(RunStatus s) noexcept;
std::optional<RunStatus> run_status_from_string(std::string_view s) noexcept;

struct TrialRank {
  std::uint64_t prime = 0;
  int trial = 0;
  std::size_t rank = 0;
  bool operator==(const TrialRank&) const = default;
};

struct AnalysisReport {
  std::string model;
  std::string engine;
  RunStatus status = RunStatus::Ok;
  std::string error_code;
  std::string error_message;
  std::size_t n_z = 0;
  /// Symbolic engine: rank after each Lie-derivative level.
  std::vector<std::size_t> ranks_by_level;
  /// Every trial's rank (both engines).
  std::vector<TrialRank> trial_ranks;
  std::optional<std::size_t> rank;
  std::vector<Verdict> verdicts;
  std::string stop_reason;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> primes;
  int trials = 0;
  /// Highest Lie level (symbolic) or series truncation order (ffprob).
  int order = 0;
  double time_ms = 0.0;
  std::vector<std::string> warnings;

  bool operator==(const AnalysisReport&) const = default;
};

/// Cooperative wall-clock bound. check() throws Error(Timeout) once the
/// deadline has passed; a default-constructed Deadline never expires.
class Deadline {
 public:
  using Clock = std::chrono::steady_clock;

  Deadline() = default;
  static Deadline after_seconds(double seconds);
  static Deadline from_optional(const std::optional<double>& seconds);

  bool expired() const noexcept { return limit_ && Clock::now() >= *limit_; }
  void check() const;

 private:
  std::optional<Clock::time_point> limit_;
  double seconds_ = 0.0;
};

}  // namespace identiscope
