// Regenerates fixtures/<name>.expected.json from cross-engine consensus.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "identiscope/bench.hpp"
#include "identiscope/errors.hpp"

namespace fs = std::filesystem;
using namespace identiscope;

int main(int argc, char** argv) {
  CLI::App app{"Freeze expected-verdict fixtures from engine consensus", "freeze_fixtures"};
  std::string corpus = IDENTISCOPE_CORPUS_DIR;
  std::string fixtures = IDENTISCOPE_FIXTURE_DIR;
  bool heavy = false;
  app.add_option("--corpus", corpus, "corpus directory")->capture_default_str();
  app.add_option("--fixtures", fixtures, "fixture directory")->capture_default_str();
  app.add_flag("--heavy", heavy, "also freeze heavy models; default off");
  CLI11_PARSE(app, argc, argv);

  int failures = 0;
  RunOptions opts;
  opts.timeout_s = std::nullopt;
  for (const auto& e : load_manifest(corpus, fs::path(fixtures))) {
    if (!e.fixture || (e.heavy && !heavy)) continue;
    const ModelDef md = load_model(e.file.string());
    const std::vector<AnalysisReport> reports{run_engine(md, "symbolic", opts, std::nullopt),
                                              run_engine(md, "ffprob", opts, std::nullopt)};
    const auto consensus = compare_engines(reports);
    if (consensus.empty() || !consensus.front().agree()) {
      std::cerr << e.label << ": no consensus, fixture not written\n";
      ++failures;
      continue;
    }
    std::ofstream out(*e.fixture, std::ios::binary);
    out << fixture_to_json(fixture_from_report(reports.front(), "derived-by-consensus", e.contested));
    std::cout << e.label << " -> " << e.fixture->string() << "\n";
  }
  return failures == 0 ? 0 : 1;
}
