#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "corefdiffs/corpus.hpp"

namespace testutil {

inline std::string fixture(const std::string& name) {
  return std::string(FIXTURE_DIR) + "/" + name;
}

// Self-cleaning scratch directory for CLI/IO tests.
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("corefdiffs_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return s;
}

using corefdiffs::corpus::DialogSample;
using corefdiffs::corpus::Document;
using corefdiffs::corpus::GoldRef;
using corefdiffs::corpus::KnowledgeSegment;
using corefdiffs::corpus::Role;
using corefdiffs::corpus::Turn;

// A small hand-built sample: docs with given segment counts, one labeled
// agent turn when history is requested.
inline DialogSample make_sample(const std::vector<int>& segs_per_doc, bool with_history,
                                GoldRef gold, GoldRef prev = {}) {
  DialogSample s;
  s.sample_id = "t0";
  for (size_t d = 0; d < segs_per_doc.size(); ++d) {
    Document doc;
    doc.doc_id = "doc" + std::to_string(d);
    doc.topic = "topic word" + std::to_string(d);
    for (int j = 1; j <= segs_per_doc[d]; ++j)
      doc.segments.push_back({doc.doc_id, j,
                              "seg " + std::to_string(d) + " " + std::to_string(j) +
                                  " filler text"});
    s.documents.push_back(std::move(doc));
  }
  if (with_history) {
    s.turns.push_back({Role::user, "hello", std::nullopt});
    s.turns.push_back({Role::agent, "prior answer", prev});
  }
  s.turns.push_back({Role::user, "tell me", std::nullopt});
  s.gold = gold;
  return s;
}

}  // namespace testutil
