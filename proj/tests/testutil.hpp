#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tgt/corpus.hpp"
#include "tgt/knowledge.hpp"

namespace tgt::test {

// Self-cleaning unique directory under the system temp root.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path file(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_file(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

// Recursive byte comparison; directory names themselves are not compared.
bool dirs_equal(const std::filesystem::path& a, const std::filesystem::path& b,
                std::string* first_difference = nullptr);

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

// Runs the tgt binary (TGT_CLI_PATH) with the given arguments in `workdir`.
CliResult run_cli(const std::vector<std::string>& args, const std::filesystem::path& workdir);

// Synthetic corpus whose reports follow the default five-organ template in
// canonical order, with per-case sentence variants. sentences_per_organ
// controls pool sizes after build_database dedup.
corpus::Corpus synthetic_corpus(std::size_t cases, std::uint64_t seed,
                                std::size_t variants_per_organ = 8);

// One report per organ order, sentence i talks about organs[i].
std::string templated_report(const std::vector<std::string>& organ_sentences);

}  // namespace tgt::test
