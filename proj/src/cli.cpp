#include "identiscope/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "identiscope/bench.hpp"
#include "identiscope/errors.hpp"
#include "json.hpp"

#ifndef IDENTISCOPE_CORPUS_DIR
#define IDENTISCOPE_CORPUS_DIR "corpus"
#endif

namespace identiscope {

namespace {

using nlohmann::json;

struct Config {
  std::string engine = "both";
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> primes;
  int trials = 2;
  std::optional<int> max_level;
  std::optional<int> series_order;
  std::optional<double> timeout_s;
  std::string json_path;
  std::string format;
  bool require_consensus = false;
  bool heavy = false;
  bool no_timing = false;
  int jobs = 1;
  std::string path;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void emit_error(std::ostream& err, json detail) { err << json{{"error", std::move(detail)}}.dump() << "\n"; }

void add_engine_options(CLI::App& cmd, Config& c, bool bench) {
  cmd.add_option("--engine", c.engine, "symbolic, ffprob or both")
      ->check(CLI::IsMember({"symbolic", "ffprob", "both"}))
      ->capture_default_str();
  cmd.add_option("--seed", c.seed, "random seed (environment: IDENTISCOPE_SEED)")
      ->envname("IDENTISCOPE_SEED")
      ->capture_default_str();
  cmd.add_option("--prime", c.primes,
                 "prime modulus, repeatable; default 2147483647 2147483629 2147483587 "
                 "(the symbolic engine uses the first)");
  cmd.add_option("--trials", c.trials, "random trials per prime")->check(CLI::PositiveNumber)->capture_default_str();
  cmd.add_option("--max-level", c.max_level, "highest Lie-derivative level (symbolic); default n_z - 1")
      ->check(CLI::NonNegativeNumber);
  cmd.add_option("--series-order", c.series_order, "power-series truncation order N (ffprob); default n_z - 1")
      ->check(CLI::PositiveNumber);
  if (bench) {
    c.timeout_s = kDefaultBenchTimeoutS;
    cmd.add_option("--timeout-s", c.timeout_s, "wall-clock limit per model and engine in seconds")
        ->check(CLI::PositiveNumber)
        ->default_str((std::ostringstream() << kDefaultBenchTimeoutS).str());
  } else {
    cmd.add_option("--timeout-s", c.timeout_s, "wall-clock limit per engine in seconds; default none")
        ->check(CLI::PositiveNumber);
  }
  cmd.add_option("--json", c.json_path, "write the JSON report to PATH; default none");
  cmd.add_option("--format", c.format, "print the report as json or csv instead of a table; default table")
      ->check(CLI::IsMember({"json", "csv"}));
  cmd.add_flag("--require-consensus", c.require_consensus,
               "exit with status 3 when the engines disagree (needs --engine both); default off");
  cmd.add_flag("--no-timing", c.no_timing, "omit wall times from JSON and CSV output; default off");
}

RunOptions run_options(const Config& c) {
  for (auto p : c.primes) {
    if (p <= kMinFfprobPrime || !is_prime(p)) {
      throw UsageError("--prime " + std::to_string(p) + " is not a prime above 2^20");
    }
  }
  if (c.max_level && c.engine == "ffprob") throw UsageError("--max-level applies to the symbolic engine only");
  if (c.series_order && c.engine == "symbolic") throw UsageError("--series-order applies to the ffprob engine only");
  if (c.require_consensus && c.engine != "both") throw UsageError("--require-consensus needs --engine both");
  RunOptions o;
  o.engines = *engine_from_string(c.engine);
  o.seed = c.seed;
  o.timeout_s = c.timeout_s;
  o.include_heavy = c.heavy;
  o.parallelism = c.jobs;
  o.symbolic.trials = c.trials;
  o.symbolic.max_level = c.max_level;
  if (!c.primes.empty()) o.symbolic.prime = c.primes.front();
  o.ffprob.trials = c.trials;
  o.ffprob.order = c.series_order;
  if (!c.primes.empty()) o.ffprob.primes = c.primes;
  return o;
}

std::vector<std::string_view> engines_of(const std::string& e) {
  if (e == "both") return {"symbolic", "ffprob"};
  return {e};
}

std::string rank_text(const AnalysisReport& r) {
  if (!r.rank) return "-";
  return std::to_string(*r.rank) + "/" + std::to_string(r.n_z);
}

void print_columns(std::ostream& out, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    width.resize(std::max(width.size(), row.size()), 0);
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
      line += row[i];
      if (i + 1 < row.size()) line += std::string(width[i] - row[i].size() + 2, ' ');
    }
    out << line << "\n";
  }
}

void print_analysis(std::ostream& out, const ModelDef& md, const std::vector<AnalysisReport>& reports,
                    const std::vector<ConsensusResult>& consensus) {
  const AugmentedSystem sys = augment(md);
  out << "model " << md.name << " (n_z = " << sys.n_z() << ")\n\n";
  std::vector<std::vector<std::string>> summary{{"engine", "status", "rank", "stop"}};
  for (const auto& r : reports) {
    summary.push_back({r.engine, std::string(to_string(r.status)), rank_text(r), r.stop_reason});
  }
  print_columns(out, summary);
  out << "\n";
  std::vector<std::vector<std::string>> table{{"symbol", "role"}};
  for (const auto& r : reports) table[0].push_back(r.engine);
  for (std::size_t k = 0; k < sys.n_z(); ++k) {
    std::vector<std::string> row{sys.z[k].display(), std::string(to_string(sys.roles[k]))};
    for (const auto& r : reports) row.push_back(k < r.verdicts.size() ? r.verdicts[k].label() : "-");
    table.push_back(std::move(row));
  }
  print_columns(out, table);
  for (const auto& r : reports) {
    if (r.status != RunStatus::Ok) out << "\n" << r.engine << ": " << r.error_code << ": " << r.error_message << "\n";
    for (const auto& w : r.warnings) out << "\n" << r.engine << " warning: " << w << "\n";
  }
  if (reports.size() > 1 && !consensus.empty()) out << "\nconsensus: " << to_string(consensus.front().status) << "\n";
  for (const auto& c : consensus) {
    for (const auto& k : c.conflicts) {
      out << "  " << k.symbol << ":";
      for (const auto& [eng, label] : k.labels) out << " " << eng << "=" << (label.empty() ? "-" : label);
      out << "\n";
    }
  }
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path);
  f << text;
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path);
}

ModelDef read_model(const std::string& path) { return load_model(path); }

int model_error(std::ostream& err, const std::string& path, const Error& e) {
  json d{{"code", std::string(to_string(e.code()))}, {"message", e.what()}, {"file", path}};
  if (const auto* pe = dynamic_cast<const ParseError*>(&e)) {
    d["line"] = pe->line();
    d["column"] = pe->column();
    d["message"] = pe->detail();
  }
  emit_error(err, d);
  return kExitUsage;
}

int cmd_analyze(const Config& c, std::ostream& out, std::ostream& err) {
  const RunOptions opts = run_options(c);
  ModelDef md;
  try {
    md = read_model(c.path);
  } catch (const Error& e) {
    return model_error(err, c.path, e);
  }
  std::vector<AnalysisReport> reports;
  for (auto e : engines_of(c.engine)) reports.push_back(run_engine(md, e, opts, c.timeout_s));
  const auto consensus = compare_engines(reports);
  const EmitOptions eo{!c.no_timing};

  if (c.format.empty()) {
    print_analysis(out, md, reports, consensus);
  } else {
    out << emit_report(reports, consensus, c.format == "csv" ? ReportFormat::Csv : ReportFormat::Json, eo);
  }
  if (!c.json_path.empty()) write_file(c.json_path, emit_report(reports, consensus, ReportFormat::Json, eo));

  int code = kExitOk;
  for (const auto& r : reports) {
    const bool failed = r.status == RunStatus::Error || r.status == RunStatus::Timeout ||
                        (r.status == RunStatus::NotApplicable && reports.size() == 1);
    if (!failed) continue;
    emit_error(err, {{"code", r.error_code}, {"message", r.error_message}, {"engine", r.engine}, {"model", r.model}});
    code = kExitAnalysisError;
  }
  if (code == kExitOk && c.require_consensus && !consensus.empty() &&
      consensus.front().status == Consensus::Disagree) {
    emit_error(err, {{"code", "Disagreement"}, {"message", "engines disagree"}, {"model", md.name}});
    code = kExitDisagreement;
  }
  return code;
}

int cmd_bench(const Config& c, std::ostream& out, std::ostream& err) {
  const RunOptions opts = run_options(c);
  const std::string dir = c.path.empty() ? std::string(IDENTISCOPE_CORPUS_DIR) : c.path;
  if (!std::filesystem::is_directory(dir)) throw UsageError(dir + " is not a directory");
  const auto reports = run_corpus(dir, opts);
  const auto consensus = compare_engines(reports);
  const EmitOptions eo{!c.no_timing};

  if (c.format.empty()) {
    std::vector<std::vector<std::string>> rows{{"model", "engine", "status", "rank"}};
    for (const auto& r : reports) rows.push_back({r.model, r.engine, std::string(to_string(r.status)), rank_text(r)});
    print_columns(out, rows);
    out << "\n";
    std::vector<std::vector<std::string>> cons{{"model", "consensus"}};
    int disagreements = 0;
    for (const auto& k : consensus) {
      cons.push_back({k.model, std::string(to_string(k.status))});
      if (k.status == Consensus::Disagree) ++disagreements;
    }
    print_columns(out, cons);
    out << "\n" << reports.size() << " records, " << disagreements << " disagreements\n";
  } else {
    out << emit_report(reports, consensus, c.format == "csv" ? ReportFormat::Csv : ReportFormat::Json, eo);
  }
  if (!c.json_path.empty()) write_file(c.json_path, emit_report(reports, consensus, ReportFormat::Json, eo));

  if (c.require_consensus) {
    for (const auto& k : consensus) {
      if (k.status == Consensus::Disagree) {
        emit_error(err, {{"code", "Disagreement"}, {"message", "engines disagree"}, {"model", k.model}});
        return kExitDisagreement;
      }
    }
  }
  return kExitOk;
}

int cmd_check(const Config& c, std::ostream& out, std::ostream& err) {
  ModelDef md;
  try {
    md = read_model(c.path);
    validate(md);
  } catch (const Error& e) {
    return model_error(err, c.path, e);
  }
  const ModelDims d = model_dims(md);
  out << "ok: model " << md.name << ": " << d.n << " states, " << d.p << " params, " << d.q << " known inputs, "
      << d.q_w << " unknown inputs, " << d.m << " outputs, " << (md.is_rational() ? "rational" : "non-rational")
      << "\n";
  return kExitOk;
}

int cmd_explain(const Config& c, std::ostream& out, std::ostream& err) {
  ModelDef md;
  try {
    md = read_model(c.path);
  } catch (const Error& e) {
    return model_error(err, c.path, e);
  }
  const AugmentedSystem sys = augment(md);
  out << "model " << md.name << "\n";
  out << "rational: " << (sys.is_rational() ? "yes" : "no") << "\n";
  out << "augmented state z (n_z = " << sys.n_z() << "):\n";
  std::vector<std::vector<std::string>> rows;
  for (std::size_t k = 0; k < sys.n_z(); ++k) {
    rows.push_back({"  " + sys.z[k].display(), std::string(to_string(sys.roles[k])), "d/dt = " + to_string(sys.dynamics[k])});
  }
  print_columns(out, rows);
  out << "outputs:\n";
  for (const auto& o : sys.outputs) out << "  " << o.name << " = " << to_string(o.expr) << "\n";
  if (!sys.known_inputs.empty()) {
    out << "known inputs:\n";
    for (const auto& u : sys.known_inputs) {
      out << "  " << u.base.name << " (" << (u.mode == InputMode::Constant ? "constant" : "generic") << ")\n";
    }
  }
  if (sys.has_direct_feedthrough()) out << "note: direct feedthrough of an unknown input\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Structural identifiability and observability analysis of ODE models", "identiscope"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "identiscope 0.3.0");

  Config c;
  auto* analyze = app.add_subcommand("analyze", "analyze one model file");
  analyze->add_option("model", c.path, "model file (.idm)")->required();
  add_engine_options(*analyze, c, false);

  Config b;
  auto* bench = app.add_subcommand("bench", "run every model of a corpus directory");
  b.path = IDENTISCOPE_CORPUS_DIR;
  bench->add_option("dir", b.path, "corpus directory")->capture_default_str();
  add_engine_options(*bench, b, true);
  bench->add_flag("--heavy", b.heavy, "include models tagged heavy; default off");
  bench->add_option("--jobs", b.jobs, "models analyzed in parallel")->check(CLI::PositiveNumber)->capture_default_str();

  Config k;
  auto* check = app.add_subcommand("check", "parse and validate a model file");
  check->add_option("model", k.path, "model file (.idm)")->required();

  Config x;
  auto* explain = app.add_subcommand("explain", "show the augmented system of a model");
  explain->add_option("model", x.path, "model file (.idm)")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << "identiscope 0.3.0\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    emit_error(err, {{"code", "Usage"}, {"message", e.what()}});
    return kExitUsage;
  }

  try {
    if (*analyze) return cmd_analyze(c, out, err);
    if (*bench) return cmd_bench(b, out, err);
    if (*check) return cmd_check(k, out, err);
    return cmd_explain(x, out, err);
  } catch (const UsageError& e) {
    emit_error(err, {{"code", "Usage"}, {"message", e.what()}});
    return kExitUsage;
  } catch (const Error& e) {
    emit_error(err, {{"code", std::string(to_string(e.code()))}, {"message", e.what()}});
    return kExitAnalysisError;
  }
}

}  // namespace identiscope
