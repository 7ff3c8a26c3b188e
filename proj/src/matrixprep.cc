#include "attn_tree/matrixprep.h"

#include <algorithm>
#include <vector>

#include "attn_tree/error.h"

namespace attn_tree {

std::optional<MergeMode> parse_merge_mode(std::string_view name) {
  if (name == "sum-mean") return MergeMode::kSumMean;
  if (name == "mean-mean") return MergeMode::kMeanMean;
  return std::nullopt;
}

std::string_view merge_mode_name(MergeMode mode) {
  return mode == MergeMode::kSumMean ? "sum-mean" : "mean-mean";
}

Matrix strip_delimiters(const Matrix& slice, std::span<const std::size_t> delimiters) {
  if (!slice.square()) throw ValidationError("strip_delimiters: matrix is not square");
  const std::size_t n = slice.rows();
  std::vector<bool> drop(n, false);
  for (std::size_t d : delimiters) {
    if (d >= n)
      throw ValidationError("strip_delimiters: index " + std::to_string(d) +
                            " out of range for size " + std::to_string(n));
    if (drop[d]) throw ValidationError("strip_delimiters: duplicate index " + std::to_string(d));
    drop[d] = true;
  }
  std::vector<std::size_t> keep;
  keep.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (!drop[i]) keep.push_back(i);

  Matrix out(keep.size(), keep.size());
  for (std::size_t r = 0; r < keep.size(); ++r)
    for (std::size_t c = 0; c < keep.size(); ++c) out(r, c) = slice(keep[r], keep[c]);
  return out;
}

Matrix merge_subwords(const Matrix& slice, std::span<const SubwordSpan> spans, MergeMode mode) {
  if (!slice.square()) throw ValidationError("merge_subwords: matrix is not square");
  std::size_t expected = 0;
  for (std::size_t t = 0; t < spans.size(); ++t) {
    if (spans[t].begin != expected || spans[t].end <= spans[t].begin)
      throw ValidationError("merge_subwords: span " + std::to_string(t) +
                            " is empty, overlapping or non-contiguous");
    expected = spans[t].end;
  }
  if (expected != slice.rows())
    throw ValidationError("merge_subwords: spans cover " + std::to_string(expected) + " of " +
                          std::to_string(slice.rows()) + " subwords");

  const std::size_t n = spans.size();
  // Rows first: average the rows of each token, keeping subword columns.
  Matrix rows(n, slice.cols());
  for (std::size_t t = 0; t < n; ++t) {
    auto dst = rows.row(t);
    for (std::size_t r = spans[t].begin; r < spans[t].end; ++r) {
      auto src = slice.row(r);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
    const double k = static_cast<double>(spans[t].size());
    for (double& v : dst) v /= k;
  }
  Matrix out(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t t = 0; t < n; ++t) {
      double sum = 0.0;
      for (std::size_t c = spans[t].begin; c < spans[t].end; ++c) sum += rows(r, c);
      if (mode == MergeMode::kMeanMean) sum /= static_cast<double>(spans[t].size());
      out(r, t) = sum;
    }
  }
  return out;
}

TokenMatrix symmetrize(const Matrix& m) {
  if (!m.square()) throw ValidationError("symmetrize: matrix is not square");
  TokenMatrix out;
  out.scores = Matrix(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out.scores(i, j) = m(i, j) * m(j, i);
  return out;
}

std::vector<SubwordSpan> spans_after_stripping(std::span<const SubwordSpan> spans,
                                               std::span<const std::size_t> delimiters) {
  std::vector<std::size_t> sorted(delimiters.begin(), delimiters.end());
  std::sort(sorted.begin(), sorted.end());
  auto shift = [&](std::size_t pos) {
    return pos - static_cast<std::size_t>(
                     std::lower_bound(sorted.begin(), sorted.end(), pos) - sorted.begin());
  };
  std::vector<SubwordSpan> out;
  out.reserve(spans.size());
  for (const auto& s : spans) {
    // A span that swallowed a delimiter would shrink here; keep the
    // original width so the merge stage reports the broken tiling.
    out.push_back({shift(s.begin), shift(s.begin) + s.size()});
  }
  return out;
}

Matrix slice_matrix(const AttentionRecord& record, std::size_t layer, std::size_t head) {
  if (layer >= record.n_layers || head >= record.n_heads)
    throw ValidationError("record '" + record.sent_id + "': layer/head " + std::to_string(layer) +
                          "/" + std::to_string(head) + " out of range");
  auto s = record.slice(layer, head);
  Matrix m(record.seq_len, record.seq_len);
  for (std::size_t r = 0; r < record.seq_len; ++r)
    for (std::size_t c = 0; c < record.seq_len; ++c) m(r, c) = s[r * record.seq_len + c];
  return m;
}

TokenMatrix prepare(const AttentionRecord& record, std::size_t layer, std::size_t head,
                    MergeMode mode) {
  Matrix raw = slice_matrix(record, layer, head);
  Matrix stripped = strip_delimiters(raw, record.delimiter_indices);
  auto spans = spans_after_stripping(record.token_spans, record.delimiter_indices);
  TokenMatrix out = symmetrize(merge_subwords(stripped, spans, mode));
  out.provenance = {layer, head, record.sent_id};
  return out;
}

}  // namespace attn_tree
