#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "identiscope/ffprob.hpp"
#include "identiscope/lie_orc.hpp"
#include "identiscope/model.hpp"
#include "identiscope/report.hpp"

namespace identiscope {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr double kDefaultBenchTimeoutS = 120.0;

struct ModelDims {
  std::size_t n = 0;
  std::size_t p = 0;
  std::size_t q = 0;
  std::size_t q_w = 0;
  std::size_t m = 0;
  bool operator==(const ModelDims&) const = default;
};

ModelDims model_dims(const ModelDef& md);

/// One row of the benchmark table, as listed in corpus/manifest.json.
struct CorpusEntry {
  /// Display label, e.g. "C2M a".
  std::string label;
  std::filesystem::path file;
  ModelDims dims;
  bool rational = true;
  bool heavy = false;
  /// Ground truth unsettled; verdicts are reported, never asserted.
  bool contested = false;
  /// "source" when transcribed from the cited equations, else "reconstructed".
  std::string provenance;
  std::optional<std::filesystem::path> fixture;
  std::optional<double> timeout_s;
};

/// Reads `dir/manifest.json`; paths are resolved against `dir` and the
/// fixture directory `fixtures` (defaults to `dir/../fixtures`).
std::vector<CorpusEntry> load_manifest(const std::filesystem::path& dir,
                                       std::optional<std::filesystem::path> fixtures = std::nullopt);

enum class EngineSel { Symbolic, Ffprob, Both };

std::optional<EngineSel> engine_from_string(std::string_view s) noexcept;
std::string_view to_string(EngineSel e) noexcept;

struct RunOptions {
  EngineSel engines = EngineSel::Both;
  /// Per model and engine; the manifest may lower it per entry.
  std::optional<double> timeout_s = kDefaultBenchTimeoutS;
  std::uint64_t seed = 0;
  int parallelism = 1;
  bool include_heavy = false;
  SymbolicOptions symbolic;
  FfprobOptions ffprob;
};

/// Runs one engine and turns failures into records: N/A for a non-rational
/// model under ffprob, timeout records without verdicts, error records
/// otherwise.
AnalysisReport run_engine(const ModelDef& md, std::string_view engine, const RunOptions& opts,
                          std::optional<double> timeout_s);

/// Every .idm file in `dir` (heavy entries of the manifest skipped unless
/// requested), each through each selected engine. Never throws on a
/// per-model failure. Sorted by (model, engine).
std::vector<AnalysisReport> run_corpus(const std::filesystem::path& dir, const RunOptions& opts);

enum class Consensus { Agree, Disagree, Unconfirmed };

std::string_view to_string(Consensus c) noexcept;

struct VerdictConflict {
  std::string symbol;
  /// engine -> label, empty when the engine has no verdict for the symbol.
  std::map<std::string, std::string> labels;
  bool operator==(const VerdictConflict&) const = default;
};

struct ConsensusResult {
  std::string model;
  /// engine -> (symbol -> label), successful engines only.
  std::map<std::string, std::map<std::string, std::string>> verdicts;
  Consensus status = Consensus::Unconfirmed;
  std::vector<VerdictConflict> conflicts;

  bool agree() const noexcept { return status == Consensus::Agree; }
  bool operator==(const ConsensusResult&) const = default;
};

std::vector<ConsensusResult> compare_engines(const std::vector<AnalysisReport>& reports);

enum class ReportFormat { Json, Csv };

struct EmitOptions {
  /// Wall times differ between runs; dropping them makes output reproducible.
  bool include_timing = true;
};

std::string emit_report(const std::vector<AnalysisReport>& reports, const std::vector<ConsensusResult>& consensus,
                        ReportFormat format, const EmitOptions& opts = {});

/// JSON form of one report (the `reports[]` element of emit_report).
std::string report_to_json(const AnalysisReport& r, const EmitOptions& opts = {});

/// Problems found in a serialized report document; empty when valid.
std::vector<std::string> validate_report_json(const std::string& text);

/// Parses the `reports` array of an emitted JSON document.
std::vector<AnalysisReport> reports_from_json(const std::string& text);

/// Frozen expected verdicts of a corpus model.
struct Fixture {
  std::string model;
  std::string provenance;
  bool contested = false;
  std::size_t n_z = 0;
  std::size_t rank = 0;
  std::map<std::string, std::string> verdicts;
};

Fixture load_fixture(const std::filesystem::path& path);
std::string fixture_to_json(const Fixture& f);
Fixture fixture_from_report(const AnalysisReport& r, std::string provenance, bool contested);
/// Differences between a successful report and its fixture; empty on match.
std::vector<std::string> check_fixture(const AnalysisReport& r, const Fixture& f);

}  // namespace identiscope
