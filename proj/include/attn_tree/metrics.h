#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>

#include "attn_tree/mstdecode.h"
#include "attn_tree/treebank.h"

namespace attn_tree {

struct RelationCount {
  std::size_t correct = 0;
  std::size_t total = 0;

  double rate() const { return total == 0 ? 0.0 : static_cast<double>(correct) / total; }
  RelationCount& operator+=(const RelationCount& o) {
    correct += o.correct;
    total += o.total;
    return *this;
  }
  friend bool operator==(const RelationCount&, const RelationCount&) = default;
};

// Counts of recovered undirected gold edges. Relations are universal labels.
struct ScoreReport {
  std::size_t correct_edges = 0;
  std::size_t total_edges = 0;
  std::map<std::string, RelationCount> per_relation;

  // 0 when there are no gold edges.
  double uuas() const {
    return total_edges == 0 ? 0.0 : static_cast<double>(correct_edges) / total_edges;
  }
  ScoreReport& operator+=(const ScoreReport& other);
  friend bool operator==(const ScoreReport&, const ScoreReport&) = default;
};

struct ScoreOptions {
  PunctPolicy punct = PunctPolicy::kInclude;
};

// Scores a decoded tree (0-based indices) against the gold sentence.
// Per-relation numbers are recall of gold edges carrying that label.
ScoreReport uuas(const DecodedTree& pred, const Sentence& gold, const ScoreOptions& options = {});

// Micro-average: counts are summed and the rate recomputed.
ScoreReport aggregate(std::span<const ScoreReport> reports);

// Chain tree over every sentence, scored and micro-averaged.
ScoreReport adjacent_baseline(const Treebank& treebank, const ScoreOptions& options = {});

struct PositionalEntry {
  int modal_offset = 0;  // dependent index - head index
  std::size_t matching = 0;
  std::size_t support = 0;

  double accuracy() const {
    return support == 0 ? 0.0 : static_cast<double>(matching) / support;
  }
};

struct PositionalBaseline {
  std::map<std::string, PositionalEntry> per_relation;
};

// Most frequent signed offset per relation. Ties prefer the smaller
// absolute offset, then the negative one.
PositionalBaseline positional_baseline(const Treebank& treebank, const ScoreOptions& options = {});

// Integer percent, rounded half up, computed exactly from counts.
int round_percent(std::size_t correct, std::size_t total);

}  // namespace attn_tree
