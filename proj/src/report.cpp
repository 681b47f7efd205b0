#include "identiscope/report.hpp"

#include <sstream>

namespace identiscope {

std::string verdict_label(VariableRole role, bool identifiable) {
  switch (role) {
    case VariableRole::State: return identifiable ? "observable" : "unobservable";
    case VariableRole::Parameter: return identifiable ? "SLI" : "SU";
    case VariableRole::UnknownInput: return identifiable ? "reconstructible" : "unreconstructible";
  }
  return "?";
}

std::string Verdict::label() const { return verdict_label(role, identifiable); }

std::string_view to_string(RunStatus s) noexcept {
  switch (s) {
    case RunStatus::Ok: return "ok";
    case RunStatus::NotApplicable: return "n/a";
    case RunStatus::Error: return "error";
    case RunStatus::Timeout: return "timeout";
  }
  return "?";
}

std::optional<RunStatus> run_status_from_string(std::string_view s) noexcept {
  if (s == "ok") return RunStatus::Ok;
  if (s == "n/a") return RunStatus::NotApplicable;
  if (s == "error") return RunStatus::Error;
  if (s == "timeout") return RunStatus::Timeout;
  return std::nullopt;
}

Deadline Deadline::after_seconds(double seconds) {
  Deadline d;
  d.seconds_ = seconds;
  d.limit_ = Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(seconds));
  return d;
}

Deadline Deadline::from_optional(const std::optional<double>& seconds) {
  return seconds ? after_seconds(*seconds) : Deadline{};
}

void Deadline::check() const {
  if (expired()) {
    std::ostringstream msg;
    msg << "wall-clock limit of " << seconds_ << " s exceeded";
    throw Error(ErrorCode::Timeout, msg.str());
  }
}

}  // namespace identiscope
