#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "identiscope/bench.hpp"
#include "identiscope/errors.hpp"
#include "support.hpp"

using namespace identiscope;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void copy_model(const std::string& stem, const fs::path& to) {
  fs::copy_file(testsupport::corpus_dir() / (stem + ".idm"), to / (stem + ".idm"));
}

Verdict v(const std::string& s, VariableRole role, bool id) { return {s, role, id}; }

AnalysisReport ok_report(const std::string& model, const std::string& engine, std::vector<Verdict> vs) {
  AnalysisReport r;
  r.model = model;
  r.engine = engine;
  r.n_z = vs.size();
  r.rank = vs.size();
  r.verdicts = std::move(vs);
  r.stop_reason = "full_rank";
  r.primes = {2147483647};
  r.trials = 2;
  r.time_ms = 1.5;
  return r;
}

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("manifest dimensions match the published table and the model files") {
  const auto entries = testsupport::manifest();
  REQUIRE(entries.size() == 25);
  REQUIRE(testsupport::table2().size() == 25);
  for (const auto& row : testsupport::table2()) {
    CAPTURE(row.stem);
    auto it = std::find_if(entries.begin(), entries.end(),
                           [&](const CorpusEntry& e) { return e.file.stem() == row.stem; });
    REQUIRE(it != entries.end());
    const ModelDims expected{row.states, row.params, row.known_inputs, row.unknown_inputs, row.outputs};
    CHECK(it->dims == expected);
    CHECK(it->rational == row.rational);
    const ModelDef md = testsupport::load(*it);
    CHECK(model_dims(md) == expected);
    CHECK(md.is_rational() == row.rational);
    CHECK(augment(md).is_rational() == row.rational);
  }
}

TEST_CASE("manifest tags") {
  std::set<std::string> heavy, contested;
  for (const auto& e : testsupport::manifest()) {
    if (e.heavy) heavy.insert(e.file.stem().string());
    if (e.contested) contested.insert(e.file.stem().string());
    CHECK((e.provenance == "source" || e.provenance == "reconstructed"));
    if (e.fixture) {
      CHECK(fs::exists(*e.fixture));
      CHECK(e.rational);
      CHECK_FALSE(e.heavy);
    }
  }
  CHECK(heavy == std::set<std::string>{"nfkb1", "nfkb2", "jakstat2", "athaliana"});
  CHECK(contested == std::set<std::string>{"hiv1_b", "jakstat2", "athaliana"});
}

TEST_CASE("run_corpus over a small directory") {
  TempDir dir("identiscope_bench_small");
  copy_model("c2m_a", dir.path);
  copy_model("c2m_b", dir.path);
  copy_model("competition", dir.path);
  RunOptions opts;
  opts.parallelism = 3;
  const auto reports = run_corpus(dir.path, opts);
  REQUIRE(reports.size() == 6);
  std::size_t na = 0;
  for (const auto& r : reports) {
    if (r.status == RunStatus::NotApplicable) {
      ++na;
      CHECK(r.model == "competition");
      CHECK(r.engine == "ffprob");
      CHECK(r.verdicts.empty());
      CHECK(r.error_code == "NonRationalExpr");
    } else {
      CHECK(r.status == RunStatus::Ok);
      CHECK(r.verdicts.size() == r.n_z);
      CHECK(r.time_ms >= 0.0);
    }
  }
  CHECK(na == 1);
  for (std::size_t i = 1; i < reports.size(); ++i) {
    CHECK(std::tie(reports[i - 1].model, reports[i - 1].engine) < std::tie(reports[i].model, reports[i].engine));
  }
  // ordering and content independent of parallelism
  opts.parallelism = 1;
  const auto serial = run_corpus(dir.path, opts);
  const EmitOptions no_time{false};
  CHECK(emit_report(serial, compare_engines(serial), ReportFormat::Json, no_time) ==
        emit_report(reports, compare_engines(reports), ReportFormat::Json, no_time));

  const auto consensus = compare_engines(reports);
  REQUIRE(consensus.size() == 3);
  for (const auto& c : consensus) {
    if (c.model == "competition") {
      CHECK(c.status == Consensus::Unconfirmed);
    } else {
      CHECK(c.status == Consensus::Agree);
    }
  }
}

TEST_CASE("run_corpus edge cases") {
  SUBCASE("empty directory") {
    TempDir dir("identiscope_bench_empty");
    CHECK(run_corpus(dir.path, {}).empty());
  }
  SUBCASE("broken files become error records") {
    TempDir dir("identiscope_bench_broken");
    std::ofstream(dir.path / "bad.idm") << "model bad\nstates x\nddt x = -k*x\noutput y = x\n";
    const auto reports = run_corpus(dir.path, {});
    REQUIRE(reports.size() == 2);
    for (const auto& r : reports) {
      CHECK(r.status == RunStatus::Error);
      CHECK(r.error_code == "UndeclaredSymbol");
      CHECK(r.verdicts.empty());
    }
  }
  SUBCASE("timeouts leave no verdicts") {
    TempDir dir("identiscope_bench_timeout");
    copy_model("pk2", dir.path);
    RunOptions opts;
    opts.timeout_s = 1e-9;
    const auto reports = run_corpus(dir.path, opts);
    REQUIRE(reports.size() == 2);
    for (const auto& r : reports) {
      CHECK(r.status == RunStatus::Timeout);
      CHECK(r.verdicts.empty());
      CHECK_FALSE(r.rank.has_value());
    }
  }
  SUBCASE("heavy entries are skipped unless asked for") {
    RunOptions opts;
    opts.engines = EngineSel::Ffprob;
    opts.parallelism = 4;
    const auto reports = run_corpus(testsupport::corpus_dir(), opts);
    CHECK(reports.size() == 21);
    for (const auto& r : reports) CHECK(r.model != "jakstat2");
  }
}

TEST_CASE("compare_engines") {
  const std::vector<Verdict> a = {v("x", VariableRole::State, true), v("k", VariableRole::Parameter, true)};
  SUBCASE("agreement") {
    const auto c = compare_engines({ok_report("m", "symbolic", a), ok_report("m", "ffprob", a)});
    REQUIRE(c.size() == 1);
    CHECK(c[0].agree());
    CHECK(c[0].conflicts.empty());
    CHECK(c[0].verdicts.size() == 2);
  }
  SUBCASE("one parameter differs") {
    auto b = a;
    b[1].identifiable = false;
    const auto c = compare_engines({ok_report("m", "symbolic", a), ok_report("m", "ffprob", b)});
    REQUIRE(c.size() == 1);
    CHECK(c[0].status == Consensus::Disagree);
    REQUIRE(c[0].conflicts.size() == 1);
    CHECK(c[0].conflicts[0].symbol == "k");
    CHECK(c[0].conflicts[0].labels.at("symbolic") == "SLI");
    CHECK(c[0].conflicts[0].labels.at("ffprob") == "SU");
  }
  SUBCASE("single successful engine") {
    AnalysisReport na;
    na.model = "m";
    na.engine = "ffprob";
    na.status = RunStatus::NotApplicable;
    const auto c = compare_engines({ok_report("m", "symbolic", a), na});
    REQUIRE(c.size() == 1);
    CHECK(c[0].status == Consensus::Unconfirmed);
    CHECK_FALSE(c[0].agree());
  }
}

TEST_CASE("report emission") {
  const std::vector<Verdict> a = {v("x", VariableRole::State, true), v("k", VariableRole::Parameter, false)};
  AnalysisReport r1 = ok_report("m", "ffprob", a);
  r1.rank = 1;
  AnalysisReport r2 = ok_report("m", "symbolic", a);
  r2.rank = 1;
  r2.ranks_by_level = {1, 1};
  r2.warnings = {"a, \"quoted\" warning"};
  AnalysisReport to;
  to.model = "slow";
  to.engine = "symbolic";
  to.status = RunStatus::Timeout;
  to.error_code = "Timeout";
  to.error_message = "exceeded";
  to.n_z = 4;
  const std::vector<AnalysisReport> reports{r1, r2, to};
  const auto consensus = compare_engines(reports);

  SUBCASE("csv") {
    const auto csv = lines_of(emit_report({r1, r2}, consensus, ReportFormat::Csv));
    REQUIRE(csv.size() == 3);
    CHECK(csv[0] == "model,engine,status,rank,n_z,time_ms");
    CHECK(csv[1] == "m,ffprob,ok,1,2,1.500");
    const auto with_timeout = lines_of(emit_report(reports, consensus, ReportFormat::Csv));
    REQUIRE(with_timeout.size() == 4);
    CHECK(with_timeout[3] == "slow,symbolic,timeout,,4,0.000");
    const auto untimed = lines_of(emit_report(reports, consensus, ReportFormat::Csv, {false}));
    CHECK(untimed[1] == "m,ffprob,ok,1,2,");
  }
  SUBCASE("json validates and round-trips") {
    const std::string doc = emit_report(reports, consensus, ReportFormat::Json);
    CHECK(validate_report_json(doc).empty());
    const auto back = reports_from_json(doc);
    REQUIRE(back.size() == reports.size());
    for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i] == reports[i]);
    CHECK(emit_report(back, compare_engines(back), ReportFormat::Json) == doc);
    CHECK(emit_report(reports, consensus, ReportFormat::Json) == doc);
  }
  SUBCASE("the validator rejects malformed documents") {
    CHECK_FALSE(validate_report_json("not json").empty());
    CHECK_FALSE(validate_report_json("{\"schema_version\": 99, \"reports\": []}").empty());
    AnalysisReport bad = to;
    bad.verdicts = a;
    CHECK_FALSE(validate_report_json(emit_report({bad}, {}, ReportFormat::Json)).empty());
    AnalysisReport short_ok = r1;
    short_ok.verdicts.pop_back();
    CHECK_FALSE(validate_report_json(emit_report({short_ok}, {}, ReportFormat::Json)).empty());
    CHECK_THROWS_AS(reports_from_json("[]"), Error);
  }
}

TEST_CASE("real reports validate and round-trip") {
  TempDir dir("identiscope_bench_roundtrip");
  copy_model("c2m_c", dir.path);
  copy_model("toggle_a", dir.path);
  const auto reports = run_corpus(dir.path, {});
  const std::string doc = emit_report(reports, compare_engines(reports), ReportFormat::Json);
  CHECK(validate_report_json(doc).empty());
  const auto back = reports_from_json(doc);
  REQUIRE(back.size() == reports.size());
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i] == reports[i]);
}

TEST_CASE("fixtures") {
  SUBCASE("round trip and mismatch detection") {
    const std::vector<Verdict> a = {v("x", VariableRole::State, true), v("k", VariableRole::Parameter, true)};
    const AnalysisReport r = ok_report("m", "symbolic", a);
    const Fixture f = fixture_from_report(r, "derived-by-consensus", false);
    CHECK(check_fixture(r, f).empty());
    TempDir dir("identiscope_fixture");
    std::ofstream(dir.path / "m.expected.json") << fixture_to_json(f);
    const Fixture g = load_fixture(dir.path / "m.expected.json");
    CHECK(g.verdicts == f.verdicts);
    CHECK(g.rank == 2);
    AnalysisReport wrong = r;
    wrong.verdicts[1].identifiable = false;
    wrong.rank = 1;
    const auto diffs = check_fixture(wrong, g);
    CHECK(diffs.size() >= 2);
  }
  SUBCASE("source-transcribed, uncontested entries match their frozen fixtures") {
    std::size_t checked = 0;
    for (const auto& e : testsupport::manifest()) {
      if (!e.fixture || e.contested || e.provenance != "source") continue;
      CAPTURE(e.label);
      const Fixture f = load_fixture(*e.fixture);
      CHECK(f.provenance == "derived-by-consensus");
      const ModelDef md = testsupport::load(e);
      for (const char* eng : {"symbolic", "ffprob"}) {
        const AnalysisReport r = run_engine(md, eng, {}, std::nullopt);
        const auto diffs = check_fixture(r, f);
        CHECK_MESSAGE(diffs.empty(), eng << ": " << (diffs.empty() ? "" : diffs.front()));
      }
      ++checked;
    }
    CHECK(checked == 4);
  }
}
