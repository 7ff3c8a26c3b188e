#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "attn_tree/attnstore.h"
#include "attn_tree/treebank.h"

namespace attn_tree {

enum class SynthMode {
  kUniform,     // every cell 1/seq_len
  kGoldOracle,  // mass on the subwords of each token's gold neighbours
  kAdjacent,    // mass on the subwords of tokens at offset +-1
};

std::optional<SynthMode> parse_synth_mode(std::string_view name);
std::string_view synth_mode_name(SynthMode mode);

struct SynthOptions {
  SynthMode mode = SynthMode::kUniform;
  std::size_t layers = 1;
  std::size_t heads = 1;
  // Each token is split into 1..max_subwords pieces (drawn from the seed).
  std::size_t max_subwords = 1;
  std::uint64_t seed = 0;
};

// Builds a record framed by sequence-start and sequence-end delimiters.
// Rows sum to one. In the structured modes at most 1e-4 of each row is
// spread as seeded background noise, small enough that the decoded tree is
// exactly the intended one.
AttentionRecord synth_attention(const Sentence& sentence, const SynthOptions& options);

AttentionArchive synth_archive(const Treebank& treebank, const SynthOptions& options,
                               std::string model_tag);

}  // namespace attn_tree
