#include "attn_tree/synth.h"

#include <algorithm>
#include <random>
#include <set>

namespace attn_tree {

namespace {

constexpr double kSignalMass = 1.0 - 1e-4;
constexpr double kNoiseMass = 1e-4;

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Token-level neighbour sets (0-based) for the structured modes.
std::vector<std::vector<std::size_t>> neighbours(const Sentence& sentence, SynthMode mode) {
  const std::size_t n = sentence.size();
  std::vector<std::set<std::size_t>> sets(n);
  if (mode == SynthMode::kGoldOracle) {
    for (const auto& t : sentence.tokens) {
      if (t.head == 0) continue;
      sets[t.index - 1].insert(t.head - 1);
      sets[t.head - 1].insert(t.index - 1);
    }
  } else if (mode == SynthMode::kAdjacent) {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      sets[i].insert(i + 1);
      sets[i + 1].insert(i);
    }
  }
  std::vector<std::vector<std::size_t>> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i].assign(sets[i].begin(), sets[i].end());
  return out;
}

}  // namespace

std::optional<SynthMode> parse_synth_mode(std::string_view name) {
  if (name == "uniform") return SynthMode::kUniform;
  if (name == "gold-oracle") return SynthMode::kGoldOracle;
  if (name == "adjacent") return SynthMode::kAdjacent;
  return std::nullopt;
}

std::string_view synth_mode_name(SynthMode mode) {
  switch (mode) {
    case SynthMode::kUniform: return "uniform";
    case SynthMode::kGoldOracle: return "gold-oracle";
    case SynthMode::kAdjacent: return "adjacent";
  }
  return "?";
}

AttentionRecord synth_attention(const Sentence& sentence, const SynthOptions& options) {
  std::mt19937_64 rng(options.seed ^ fnv1a(sentence.sent_id));
  const std::size_t max_pieces = std::max<std::size_t>(1, options.max_subwords);

  AttentionRecord r;
  r.sent_id = sentence.sent_id;
  r.n_layers = options.layers;
  r.n_heads = options.heads;

  std::size_t pos = 1;  // position 0 is the sequence-start delimiter
  for (std::size_t t = 0; t < sentence.size(); ++t) {
    std::size_t pieces = 1;
    if (max_pieces > 1) pieces = 1 + std::uniform_int_distribution<std::size_t>(0, max_pieces - 1)(rng);
    r.token_spans.push_back({pos, pos + pieces});
    pos += pieces;
  }
  r.seq_len = pos + 1;
  r.delimiter_indices = {0, pos};
  r.tensor.assign(r.n_layers * r.n_heads * r.slice_size(), 0.0f);

  const std::size_t seq = r.seq_len;
  const float uniform = 1.0f / static_cast<float>(seq);
  if (options.mode == SynthMode::kUniform) {
    std::fill(r.tensor.begin(), r.tensor.end(), uniform);
    return r;
  }

  const auto nbrs = neighbours(sentence, options.mode);
  std::uniform_real_distribution<double> jitter(0.5, 1.5);
  std::vector<double> row(seq);
  for (std::size_t l = 0; l < r.n_layers; ++l) {
    for (std::size_t h = 0; h < r.n_heads; ++h) {
      auto slice = r.slice(l, h);
      for (std::size_t t = 0; t < sentence.size(); ++t) {
        const SubwordSpan span = r.token_spans[t];
        for (std::size_t s = span.begin; s < span.end; ++s) {
          float* out = slice.data() + s * seq;
          if (nbrs[t].empty()) {
            std::fill(out, out + seq, uniform);
            continue;
          }
          double total = 0.0;
          for (std::size_t c = 0; c < seq; ++c) {
            row[c] = kNoiseMass / static_cast<double>(seq) * jitter(rng);
          }
          const double share = kSignalMass / static_cast<double>(nbrs[t].size());
          for (std::size_t j : nbrs[t]) {
            const SubwordSpan target = r.token_spans[j];
            for (std::size_t c = target.begin; c < target.end; ++c)
              row[c] += share / static_cast<double>(target.size());
          }
          for (double v : row) total += v;
          for (std::size_t c = 0; c < seq; ++c) out[c] = static_cast<float>(row[c] / total);
        }
      }
      for (std::size_t d : r.delimiter_indices) {
        float* out = slice.data() + d * seq;
        std::fill(out, out + seq, uniform);
      }
    }
  }
  return r;
}

AttentionArchive synth_archive(const Treebank& treebank, const SynthOptions& options,
                               std::string model_tag) {
  AttentionArchive archive;
  archive.model_tag = std::move(model_tag);
  archive.language = treebank.language;
  archive.records.reserve(treebank.sentences.size());
  for (const auto& s : treebank.sentences) archive.records.push_back(synth_attention(s, options));
  return archive;
}

}  // namespace attn_tree
