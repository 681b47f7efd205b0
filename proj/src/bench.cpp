#include "identiscope/bench.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "identiscope/errors.hpp"
#include "json.hpp"

namespace identiscope {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SyntaxError, what + ": " + e.what());
  }
}

std::optional<VariableRole> role_from_string(std::string_view s) {
  for (auto r : {VariableRole::State, VariableRole::Parameter, VariableRole::UnknownInput}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

json report_json(const AnalysisReport& r, const EmitOptions& opts) {
  json j;
  j["model"] = r.model;
  j["engine"] = r.engine;
  j["status"] = std::string(to_string(r.status));
  j["error"] = r.error_code.empty() ? json(nullptr) : json{{"code", r.error_code}, {"message", r.error_message}};
  j["n_z"] = r.n_z;
  j["ranks_by_level"] = r.ranks_by_level;
  json trials = json::array();
  for (const auto& t : r.trial_ranks) trials.push_back({{"prime", t.prime}, {"trial", t.trial}, {"rank", t.rank}});
  j["trial_ranks"] = trials;
  j["rank"] = r.rank ? json(*r.rank) : json(nullptr);
  json verdicts = json::array();
  for (const auto& v : r.verdicts) {
    verdicts.push_back({{"symbol", v.symbol}, {"role", std::string(to_string(v.role))}, {"verdict", v.label()}});
  }
  j["verdicts"] = verdicts;
  j["stop_reason"] = r.stop_reason;
  j["seed"] = r.seed;
  j["primes"] = r.primes;
  j["trials"] = r.trials;
  j["order"] = r.order;
  if (opts.include_timing) j["time_ms"] = r.time_ms;
  j["warnings"] = r.warnings;
  return j;
}

json consensus_json(const ConsensusResult& c) {
  json conflicts = json::array();
  for (const auto& k : c.conflicts) conflicts.push_back({{"symbol", k.symbol}, {"labels", k.labels}});
  return {{"model", c.model}, {"status", std::string(to_string(c.status))}, {"verdicts", c.verdicts},
          {"conflicts", conflicts}};
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

AnalysisReport failure_record(const std::string& model, std::string_view engine, const RunOptions& opts,
                              const Error& e) {
  AnalysisReport r;
  r.model = model;
  r.engine = std::string(engine);
  r.seed = opts.seed;
  r.error_code = std::string(to_string(e.code()));
  r.error_message = e.what();
  if (e.code() == ErrorCode::Timeout) {
    r.status = RunStatus::Timeout;
  } else if (e.code() == ErrorCode::NonRationalExpr && engine == "ffprob") {
    r.status = RunStatus::NotApplicable;
  } else {
    r.status = RunStatus::Error;
  }
  return r;
}

std::vector<std::string_view> selected(EngineSel e) {
  switch (e) {
    case EngineSel::Symbolic: return {"symbolic"};
    case EngineSel::Ffprob: return {"ffprob"};
    case EngineSel::Both: return {"symbolic", "ffprob"};
  }
  return {};
}

}  // namespace

ModelDims model_dims(const ModelDef& md) { return {md.n(), md.p(), md.q(), md.q_w(), md.m()}; }

std::vector<CorpusEntry> load_manifest(const fs::path& dir, std::optional<fs::path> fixtures) {
  const fs::path fix_dir = fixtures ? *fixtures : dir.parent_path() / "fixtures";
  const json doc = parse_json(read_file(dir / "manifest.json"), (dir / "manifest.json").string());
  std::vector<CorpusEntry> out;
  try {
    for (const auto& m : doc.at("models")) {
      CorpusEntry e;
      e.label = m.at("label").get<std::string>();
      e.file = dir / m.at("file").get<std::string>();
      const auto& d = m.at("dims");
      e.dims = {d.at("states").get<std::size_t>(), d.at("params").get<std::size_t>(),
                d.at("known_inputs").get<std::size_t>(), d.at("unknown_inputs").get<std::size_t>(),
                d.at("outputs").get<std::size_t>()};
      e.rational = m.at("rational").get<bool>();
      e.heavy = m.value("heavy", false);
      e.contested = m.value("contested", false);
      e.provenance = m.value("provenance", std::string("reconstructed"));
      if (m.contains("fixture") && !m["fixture"].is_null()) e.fixture = fix_dir / m["fixture"].get<std::string>();
      if (m.contains("timeout_s") && !m["timeout_s"].is_null()) e.timeout_s = m["timeout_s"].get<double>();
      out.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SyntaxError, "malformed manifest: " + std::string(e.what()));
  }
  return out;
}

std::optional<EngineSel> engine_from_string(std::string_view s) noexcept {
  if (s == "symbolic") return EngineSel::Symbolic;
  if (s == "ffprob") return EngineSel::Ffprob;
  if (s == "both") return EngineSel::Both;
  return std::nullopt;
}

std::string_view to_string(EngineSel e) noexcept {
  switch (e) {
    case EngineSel::Symbolic: return "symbolic";
    case EngineSel::Ffprob: return "ffprob";
    case EngineSel::Both: return "both";
  }
  return "?";
}

AnalysisReport run_engine(const ModelDef& md, std::string_view engine, const RunOptions& opts,
                          std::optional<double> timeout_s) {
  try {
    if (engine == "symbolic") {
      SymbolicOptions so = opts.symbolic;
      so.seed = opts.seed;
      so.timeout_s = timeout_s;
      return analyze_symbolic(md, so);
    }
    if (engine == "ffprob") {
      FfprobOptions fo = opts.ffprob;
      fo.seed = opts.seed;
      fo.timeout_s = timeout_s;
      return analyze_ffprob(md, fo);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown engine " + std::string(engine));
  } catch (const Error& e) {
    AnalysisReport r = failure_record(md.name, engine, opts, e);
    r.n_z = augment(md).n_z();
    return r;
  }
}

std::vector<AnalysisReport> run_corpus(const fs::path& dir, const RunOptions& opts) {
  std::map<std::string, CorpusEntry> manifest;
  if (fs::exists(dir / "manifest.json")) {
    for (auto& e : load_manifest(dir)) manifest.emplace(e.file.filename().string(), std::move(e));
  }
  std::vector<fs::path> files;
  if (fs::is_directory(dir)) {
    for (const auto& de : fs::directory_iterator(dir)) {
      if (de.path().extension() != ".idm") continue;
      auto it = manifest.find(de.path().filename().string());
      if (it != manifest.end() && it->second.heavy && !opts.include_heavy) continue;
      files.push_back(de.path());
    }
  }
  std::sort(files.begin(), files.end());

  const auto engines = selected(opts.engines);
  std::vector<std::vector<AnalysisReport>> results(files.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < files.size(); i = next++) {
      std::optional<double> timeout = opts.timeout_s;
      if (auto it = manifest.find(files[i].filename().string()); it != manifest.end() && it->second.timeout_s) {
        timeout = timeout ? std::min(*timeout, *it->second.timeout_s) : *it->second.timeout_s;
      }
      try {
        const ModelDef md = load_model(files[i]);
        for (auto e : engines) results[i].push_back(run_engine(md, e, opts, timeout));
      } catch (const Error& e) {
        for (auto eng : engines) results[i].push_back(failure_record(files[i].stem().string(), eng, opts, e));
      }
    }
  };
  const int workers = std::clamp(opts.parallelism, 1, static_cast<int>(std::max<std::size_t>(files.size(), 1)));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::vector<AnalysisReport> out;
  for (auto& v : results) {
    for (auto& r : v) out.push_back(std::move(r));
  }
  std::stable_sort(out.begin(), out.end(), [](const AnalysisReport& a, const AnalysisReport& b) {
    return std::tie(a.model, a.engine) < std::tie(b.model, b.engine);
  });
  return out;
}

std::string_view to_string(Consensus c) noexcept {
  switch (c) {
    case Consensus::Agree: return "agree";
    case Consensus::Disagree: return "disagree";
    case Consensus::Unconfirmed: return "unconfirmed";
  }
  return "?";
}

std::vector<ConsensusResult> compare_engines(const std::vector<AnalysisReport>& reports) {
  std::map<std::string, ConsensusResult> by_model;
  for (const auto& r : reports) {
    auto& c = by_model[r.model];
    c.model = r.model;
    if (r.status != RunStatus::Ok) continue;
    auto& vm = c.verdicts[r.engine];
    for (const auto& v : r.verdicts) vm[v.symbol] = v.label();
  }
  std::vector<ConsensusResult> out;
  for (auto& [name, c] : by_model) {
    if (c.verdicts.size() < 2) {
      c.status = Consensus::Unconfirmed;
    } else {
      std::set<std::string> symbols;
      for (const auto& [eng, vm] : c.verdicts) {
        for (const auto& [s, l] : vm) symbols.insert(s);
      }
      for (const auto& s : symbols) {
        VerdictConflict k{s, {}};
        std::set<std::string> distinct;
        for (const auto& [eng, vm] : c.verdicts) {
          auto it = vm.find(s);
          k.labels[eng] = it == vm.end() ? "" : it->second;
          distinct.insert(k.labels[eng]);
        }
        if (distinct.size() > 1) c.conflicts.push_back(std::move(k));
      }
      c.status = c.conflicts.empty() ? Consensus::Agree : Consensus::Disagree;
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::string report_to_json(const AnalysisReport& r, const EmitOptions& opts) { return report_json(r, opts).dump(2); }

std::string emit_report(const std::vector<AnalysisReport>& reports, const std::vector<ConsensusResult>& consensus,
                        ReportFormat format, const EmitOptions& opts) {
  if (format == ReportFormat::Csv) {
    std::ostringstream out;
    out << "model,engine,status,rank,n_z,time_ms\n";
    for (const auto& r : reports) {
      out << csv_field(r.model) << ',' << csv_field(r.engine) << ',' << to_string(r.status) << ',';
      if (r.rank) out << *r.rank;
      out << ',' << r.n_z << ',';
      if (opts.include_timing) out << std::fixed << std::setprecision(3) << r.time_ms;
      out << '\n';
    }
    return out.str();
  }
  json doc;
  doc["schema_version"] = kReportSchemaVersion;
  doc["reports"] = json::array();
  for (const auto& r : reports) doc["reports"].push_back(report_json(r, opts));
  doc["consensus"] = json::array();
  for (const auto& c : consensus) doc["consensus"].push_back(consensus_json(c));
  return doc.dump(2) + "\n";
}

std::vector<std::string> validate_report_json(const std::string& text) {
  std::vector<std::string> problems;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    return {std::string("not JSON: ") + e.what()};
  }
  if (!doc.is_object()) return {"document is not an object"};
  if (!doc.contains("schema_version") || doc["schema_version"] != kReportSchemaVersion) {
    problems.push_back("schema_version must be " + std::to_string(kReportSchemaVersion));
  }
  if (!doc.contains("reports") || !doc["reports"].is_array()) {
    problems.push_back("reports must be an array");
    return problems;
  }
  const std::pair<const char*, json::value_t> required[] = {
      {"model", json::value_t::string},         {"engine", json::value_t::string},
      {"status", json::value_t::string},        {"n_z", json::value_t::number_unsigned},
      {"ranks_by_level", json::value_t::array}, {"trial_ranks", json::value_t::array},
      {"verdicts", json::value_t::array},       {"stop_reason", json::value_t::string},
      {"primes", json::value_t::array},         {"warnings", json::value_t::array}};
  std::size_t idx = 0;
  for (const auto& r : doc["reports"]) {
    const std::string where = "reports[" + std::to_string(idx++) + "]";
    if (!r.is_object()) {
      problems.push_back(where + " is not an object");
      continue;
    }
    bool complete = true;
    for (const auto& [key, type] : required) {
      if (!r.contains(key) || r[key].type() != type) {
        problems.push_back(where + "." + key + " missing or mistyped");
        complete = false;
      }
    }
    if (!complete) continue;
    const auto status = run_status_from_string(r["status"].get<std::string>());
    if (!status) problems.push_back(where + ".status is not a known status");
    if (!r.contains("rank") || !(r["rank"].is_null() || r["rank"].is_number_unsigned())) {
      problems.push_back(where + ".rank must be null or a count");
    } else if (r["rank"].is_number_unsigned() && r["rank"].get<std::size_t>() > r["n_z"].get<std::size_t>()) {
      problems.push_back(where + ".rank exceeds n_z");
    }
    if (r.contains("time_ms") && (!r["time_ms"].is_number() || r["time_ms"].get<double>() < 0)) {
      problems.push_back(where + ".time_ms must be a non-negative number");
    }
    if (status && *status != RunStatus::Ok && !r["verdicts"].empty()) {
      problems.push_back(where + " is not ok but carries verdicts");
    }
    if (status == RunStatus::Ok && r["verdicts"].size() != r["n_z"].get<std::size_t>()) {
      problems.push_back(where + ".verdicts must cover every z entry");
    }
    for (const auto& v : r["verdicts"]) {
      if (!v.is_object() || !v.contains("symbol") || !v.contains("role") || !v.contains("verdict") ||
          !v["role"].is_string() || !v["verdict"].is_string()) {
        problems.push_back(where + " has a malformed verdict");
        continue;
      }
      auto role = role_from_string(v["role"].get<std::string>());
      const auto label = v["verdict"].get<std::string>();
      if (!role || (label != verdict_label(*role, true) && label != verdict_label(*role, false))) {
        problems.push_back(where + " verdict " + label + " does not fit its role");
      }
    }
  }
  if (doc.contains("consensus") && !doc["consensus"].is_array()) problems.push_back("consensus must be an array");
  return problems;
}

std::vector<AnalysisReport> reports_from_json(const std::string& text) {
  if (auto problems = validate_report_json(text); !problems.empty()) {
    throw Error(ErrorCode::SyntaxError, "invalid report: " + problems.front());
  }
  const json doc = json::parse(text);
  std::vector<AnalysisReport> out;
  for (const auto& j : doc["reports"]) {
    AnalysisReport r;
    r.model = j["model"].get<std::string>();
    r.engine = j["engine"].get<std::string>();
    r.status = *run_status_from_string(j["status"].get<std::string>());
    if (j.contains("error") && j["error"].is_object()) {
      r.error_code = j["error"].value("code", std::string());
      r.error_message = j["error"].value("message", std::string());
    }
    r.n_z = j["n_z"].get<std::size_t>();
    r.ranks_by_level = j["ranks_by_level"].get<std::vector<std::size_t>>();
    for (const auto& t : j["trial_ranks"]) {
      r.trial_ranks.push_back({t.at("prime").get<std::uint64_t>(), t.at("trial").get<int>(), t.at("rank").get<std::size_t>()});
    }
    if (!j["rank"].is_null()) r.rank = j["rank"].get<std::size_t>();
    for (const auto& v : j["verdicts"]) {
      const auto role = *role_from_string(v["role"].get<std::string>());
      r.verdicts.push_back({v["symbol"].get<std::string>(), role, v["verdict"].get<std::string>() == verdict_label(role, true)});
    }
    r.stop_reason = j["stop_reason"].get<std::string>();
    r.seed = j.value("seed", std::uint64_t{0});
    r.primes = j["primes"].get<std::vector<std::uint64_t>>();
    r.trials = j.value("trials", 0);
    r.order = j.value("order", 0);
    r.time_ms = j.value("time_ms", 0.0);
    r.warnings = j["warnings"].get<std::vector<std::string>>();
    out.push_back(std::move(r));
  }
  return out;
}

Fixture load_fixture(const fs::path& path) {
  const json j = parse_json(read_file(path), path.string());
  try {
    Fixture f;
    f.model = j.at("model").get<std::string>();
    f.provenance = j.at("provenance").get<std::string>();
    f.contested = j.value("contested", false);
    f.n_z = j.at("n_z").get<std::size_t>();
    f.rank = j.at("rank").get<std::size_t>();
    f.verdicts = j.at("verdicts").get<std::map<std::string, std::string>>();
    return f;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SyntaxError, path.string() + ": " + e.what());
  }
}

std::string fixture_to_json(const Fixture& f) {
  json j{{"model", f.model}, {"provenance", f.provenance}, {"contested", f.contested},
         {"n_z", f.n_z},     {"rank", f.rank},             {"verdicts", f.verdicts}};
  return j.dump(2) + "\n";
}

Fixture fixture_from_report(const AnalysisReport& r, std::string provenance, bool contested) {
  Fixture f;
  f.model = r.model;
  f.provenance = std::move(provenance);
  f.contested = contested;
  f.n_z = r.n_z;
  f.rank = r.rank.value_or(0);
  for (const auto& v : r.verdicts) f.verdicts[v.symbol] = v.label();
  return f;
}

std::vector<std::string> check_fixture(const AnalysisReport& r, const Fixture& f) {
  std::vector<std::string> diffs;
  if (r.status != RunStatus::Ok) {
    diffs.push_back(r.engine + " run did not succeed: " + std::string(to_string(r.status)));
    return diffs;
  }
  if (r.n_z != f.n_z) diffs.push_back("n_z " + std::to_string(r.n_z) + " != " + std::to_string(f.n_z));
  if (r.rank != f.rank) diffs.push_back("rank " + std::to_string(r.rank.value_or(0)) + " != " + std::to_string(f.rank));
  std::map<std::string, std::string> got;
  for (const auto& v : r.verdicts) got[v.symbol] = v.label();
  for (const auto& [s, l] : f.verdicts) {
    auto it = got.find(s);
    if (it == got.end()) {
      diffs.push_back(s + " missing");
    } else if (it->second != l) {
      diffs.push_back(s + ": " + it->second + " != " + l);
    }
  }
  for (const auto& [s, l] : got) {
    if (!f.verdicts.contains(s)) diffs.push_back(s + " not in fixture");
  }
  return diffs;
}

}  // namespace identiscope
