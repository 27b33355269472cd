#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include <unistd.h>

#include "oransec/evalkit.hpp"
#include "oransec/kb.hpp"
#include "oransec/ran_control.hpp"

namespace testsupport {

inline std::filesystem::path data_dir() { return ORANSEC_DATA_DIR; }

inline std::shared_ptr<const oransec::kb::KnowledgeBase> fixture_kb() {
  static const auto kb = std::make_shared<const oransec::kb::KnowledgeBase>(
      oransec::kb::load_corpus(data_dir() / "fight-corpus.json"),
      oransec::kb::StopwordList::load(data_dir() / "stopwords-v1.txt"));
  return kb;
}

inline oransec::ran::CUConfig seed_config() { return oransec::ran::load_config(data_dir() / "seed-cu-config.json"); }
inline oransec::ran::PathTable path_table() { return oransec::ran::PathTable::load(data_dir() / "cu-config-paths.json"); }

inline oransec::evalkit::SuiteEnvironment fixture_env() {
  oransec::evalkit::SuiteEnvironment env;
  env.knowledge = fixture_kb();
  env.seed_config = seed_config();
  env.paths = path_table();
  return env;
}

inline oransec::evalkit::Scenario fixture_scenario(const std::string& slug) {
  return oransec::evalkit::load_scenario(data_dir() / "scenarios" / (slug + ".json"));
}

// Unique scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("oransec-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(++counter));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testsupport
