#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "attn_tree/attnstore.h"
#include "attn_tree/matrix.h"

namespace attn_tree {

// How the rows and columns of a multi-subword token are collapsed.
enum class MergeMode {
  kSumMean,   // columns summed, rows averaged
  kMeanMean,  // both averaged (ablation)
};

std::optional<MergeMode> parse_merge_mode(std::string_view name);
std::string_view merge_mode_name(MergeMode mode);

struct Provenance {
  std::size_t layer = 0;  // 0-based
  std::size_t head = 0;
  std::string sent_id;
};

// Symmetric, non-negative score matrix over gold tokens. The diagonal is
// kept but never selected by the decoders.
struct TokenMatrix {
  Matrix scores;
  Provenance provenance;

  std::size_t n() const { return scores.rows(); }
};

// Removes the rows and columns at `delimiters`; no renormalization.
Matrix strip_delimiters(const Matrix& slice, std::span<const std::size_t> delimiters);

// Collapses each span to a single row/column. Spans must tile
// [0, slice.rows()) in order.
Matrix merge_subwords(const Matrix& slice, std::span<const SubwordSpan> spans,
                      MergeMode mode = MergeMode::kSumMean);

// out(i, j) = m(i, j) * m(j, i)
TokenMatrix symmetrize(const Matrix& m);

// Re-expresses record spans in the index space left after delimiter removal.
std::vector<SubwordSpan> spans_after_stripping(std::span<const SubwordSpan> spans,
                                               std::span<const std::size_t> delimiters);

Matrix slice_matrix(const AttentionRecord& record, std::size_t layer, std::size_t head);

// strip_delimiters -> merge_subwords -> symmetrize for one layer/head.
TokenMatrix prepare(const AttentionRecord& record, std::size_t layer, std::size_t head,
                    MergeMode mode = MergeMode::kSumMean);

}  // namespace attn_tree
