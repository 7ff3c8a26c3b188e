#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "attn_tree/attnstore.h"
#include "attn_tree/matrixprep.h"
#include "attn_tree/metrics.h"
#include "attn_tree/mstdecode.h"
#include "attn_tree/treebank.h"

namespace attn_tree {

struct SweepOptions {
  MergeMode merge = MergeMode::kSumMean;
  DecodeOptions decode;
  ScoreOptions score;
  std::size_t workers = 1;
};

// 0-based layer/head. Reports print them 1-based ("10-8").
struct Cell {
  std::size_t layer = 0;
  std::size_t head = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
};

std::string cell_label(const Cell& cell);

// Corpus-level score of every layer/head cell, row-major by layer.
struct CellScores {
  std::string language;
  std::string model_tag;
  std::size_t n_layers = 0;
  std::size_t n_heads = 0;
  std::vector<ScoreReport> cells;

  const ScoreReport& at(std::size_t layer, std::size_t head) const {
    return cells[layer * n_heads + head];
  }
};

struct SweepReport {
  std::string language;
  std::string model_tag;
  std::size_t n_layers = 0;
  std::size_t n_heads = 0;
  std::vector<double> grid;                 // uuas, row-major by layer
  std::vector<RelationCount> counts;        // edges behind each grid entry
  Cell best_cell;
  double best_uuas = 0.0;
  std::vector<double> mean_by_layer;
  std::vector<double> max_by_layer;

  double at(std::size_t layer, std::size_t head) const { return grid[layer * n_heads + head]; }
};

struct VariantDelta {
  std::string language;
  std::string base_tag;
  std::string other_tag;
  std::vector<double> delta_max_by_layer;
  std::vector<double> delta_mean_by_layer;
};

struct RelationBest {
  Cell cell;
  RelationCount count;

  double uuas() const { return count.rate(); }
};

// Prepares, decodes and scores every (sentence, layer, head). Records are
// fetched once per sentence; sentences are spread over `workers` threads
// and per-cell counts are summed afterwards. Throws ValidationError when
// archive and treebank sent_ids differ (first five listed) or shapes
// disagree.
CellScores score_cells(const RecordSource& archive, const Treebank& treebank,
                       const SweepOptions& options = {});

// Scores one cell in isolation.
ScoreReport score_cell(const RecordSource& archive, const Treebank& treebank, Cell cell,
                       const SweepOptions& options = {});

// Grid statistics; best cell ties go to the lower layer, then lower head.
SweepReport summarize(const CellScores& scores);

SweepReport run_sweep(const RecordSource& archive, const Treebank& treebank,
                      const SweepOptions& options = {});

// For every relation with at least `min_support` gold edges, the cell with
// the highest recall (ties as for the best cell).
std::map<std::string, RelationBest> best_relation_heads(const CellScores& scores,
                                                        std::size_t min_support = 5);

std::map<std::string, RelationBest> best_relation_heads(const RecordSource& archive,
                                                        const Treebank& treebank,
                                                        std::size_t min_support = 5,
                                                        const SweepOptions& options = {});

// other - base, per layer. Throws ValidationError on language or shape
// mismatch.
VariantDelta compare_variants(const SweepReport& base, const SweepReport& other);

}  // namespace attn_tree
