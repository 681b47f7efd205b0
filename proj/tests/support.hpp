#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "identiscope/bench.hpp"
#include "identiscope/model.hpp"

namespace testsupport {

inline std::filesystem::path corpus_dir() { return IDENTISCOPE_TEST_CORPUS; }
inline std::filesystem::path fixture_dir() { return IDENTISCOPE_TEST_FIXTURES; }
inline std::filesystem::path data_dir() { return IDENTISCOPE_TEST_DATA; }

inline identiscope::ModelDef corpus_model(const std::string& stem) {
  return identiscope::load_model((corpus_dir() / (stem + ".idm")).string());
}

inline std::vector<identiscope::CorpusEntry> manifest() {
  return identiscope::load_manifest(corpus_dir(), fixture_dir());
}

/// Non-heavy corpus entries, optionally rational ones only.
inline std::vector<identiscope::CorpusEntry> light_entries(bool rational_only) {
  std::vector<identiscope::CorpusEntry> out;
  for (auto& e : manifest()) {
    if (e.heavy || (rational_only && !e.rational)) continue;
    out.push_back(e);
  }
  return out;
}

/// One row of the published benchmark table, transcribed by hand.
struct TableRow {
  const char* stem;
  std::size_t states, params, known_inputs, unknown_inputs, outputs;
  bool rational;
};

inline const std::vector<TableRow>& table2() {
  static const std::vector<TableRow> rows = {
      {"c2m_a", 2, 4, 1, 0, 1, true},
      {"c2m_b", 2, 4, 0, 0, 1, true},
      {"c2m_c", 2, 4, 0, 1, 1, true},
      {"competition", 2, 6, 0, 0, 1, false},
      {"hiv1_a", 3, 5, 1, 0, 2, true},
      {"hiv1_b", 3, 5, 0, 1, 2, true},
      {"hiv2", 4, 10, 0, 0, 2, true},
      {"hiv3", 5, 10, 0, 0, 2, true},
      {"nfkb1", 15, 29, 0, 0, 6, true},
      {"nfkb2", 15, 6, 1, 0, 6, true},
      {"phosphorylation", 6, 6, 0, 0, 2, true},
      {"pk1", 4, 9, 0, 0, 2, true},
      {"pk2", 4, 9, 0, 0, 1, true},
      {"ruminal_lipolysis", 5, 4, 0, 0, 3, true},
      {"tumor", 5, 5, 0, 0, 1, true},
      {"mapk", 3, 14, 0, 0, 3, false},
      {"athaliana", 7, 29, 1, 0, 2, false},
      {"toggle_a", 2, 10, 2, 0, 2, false},
      {"toggle_b", 2, 10, 0, 2, 2, false},
      {"jakstat1", 10, 23, 1, 0, 8, true},
      {"jakstat2", 25, 24, 0, 0, 14, true},
      {"beta_ig", 3, 5, 1, 0, 1, true},
      {"sirs_forcing", 5, 13, 1, 0, 2, true},
      {"cholera", 4, 7, 0, 0, 2, true},
      {"gene_p53", 4, 25, 1, 0, 4, true},
  };
  return rows;
}

inline identiscope::ModelDef load(const identiscope::CorpusEntry& e) {
  return identiscope::load_model(e.file.string());
}

}  // namespace testsupport
