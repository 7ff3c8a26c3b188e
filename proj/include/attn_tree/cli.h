#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "attn_tree/matrixprep.h"
#include "attn_tree/mstdecode.h"
#include "attn_tree/synth.h"
#include "attn_tree/treebank.h"

namespace attn_tree::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

struct RunConfig {
  std::string command;
  std::vector<std::filesystem::path> treebank_paths;
  std::vector<std::filesystem::path> archive_paths;
  std::filesystem::path output_dir = ".";
  std::size_t workers = 1;
  std::size_t relation_min_support = 5;
  RootStrategy root_strategy;
  DecoderKind decoder = DecoderKind::kUndirected;
  MergeMode merge_mode = MergeMode::kSumMean;
  bool include_punct = true;
  std::uint64_t seed = 0;
  std::string file_pattern;  // baseline: keep files whose name contains this

  // synth
  SynthOptions synth;
  std::string model_tag = "synthetic";
  std::filesystem::path synth_output;

  // inspect / compare
  std::vector<std::filesystem::path> report_paths;
};

// Runs the attn-tree command line. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cmd_inspect(const RunConfig& config, std::ostream& out);
int cmd_baseline(const RunConfig& config, std::ostream& out);
int cmd_sweep(const RunConfig& config, std::ostream& out);
int cmd_relations(const RunConfig& config, std::ostream& out);
int cmd_compare(const RunConfig& config, std::ostream& out);
int cmd_synth(const RunConfig& config, std::ostream& out);

// Expands directories to the .conllu files below them, sorted.
std::vector<std::filesystem::path> collect_treebanks(
    const std::vector<std::filesystem::path>& paths, const std::string& pattern = "");

}  // namespace attn_tree::cli
