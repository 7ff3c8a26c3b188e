#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "attn_tree/matrix.h"
#include "attn_tree/matrixprep.h"

namespace attn_tree {

// Unordered token pair, 0-based, lo < hi.
struct Edge {
  std::size_t lo = 0;
  std::size_t hi = 0;

  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct DecodedTree {
  std::size_t n = 0;
  std::vector<Edge> edges;  // sorted
  double total_score = 0.0;
};

// True iff `tree` has n-1 distinct edges, no self-loops and is connected.
bool is_valid_tree(const DecodedTree& tree);

// Maximum spanning arborescence rooted at `root` over directed weights
// m(head, dependent), by Chu-Liu-Edmonds cycle contraction. Direction is
// erased in the result; total_score sums the selected directed entries.
// Ties go to the lower head index.
DecodedTree cle_decode(const Matrix& m, std::size_t root);
inline DecodedTree cle_decode(const TokenMatrix& m, std::size_t root) {
  return cle_decode(m.scores, root);
}

// Same, also returning the head of each node (root maps to itself).
DecodedTree cle_decode(const Matrix& m, std::size_t root, std::vector<std::size_t>& heads);

// Maximum undirected spanning tree over the upper triangle of a symmetric
// matrix (Kruskal). Among equal weights, edges between closer positions
// win, then the smaller lower endpoint; all-equal weights yield the chain.
DecodedTree undirected_mst(const Matrix& m);
inline DecodedTree undirected_mst(const TokenMatrix& m) { return undirected_mst(m.scores); }

// Root whose arborescence scores highest, lowest index on ties.
std::size_t best_root(const Matrix& m);
inline std::size_t best_root(const TokenMatrix& m) { return best_root(m.scores); }

enum class DecoderKind { kUndirected, kChuLiuEdmonds };

struct RootStrategy {
  // Empty means "best"; otherwise a fixed root, clamped to the last token.
  std::optional<std::size_t> fixed;
};

std::optional<RootStrategy> parse_root_strategy(std::string_view text);
std::optional<DecoderKind> parse_decoder(std::string_view text);

struct DecodeOptions {
  DecoderKind decoder = DecoderKind::kUndirected;
  RootStrategy root;
};

DecodedTree decode(const TokenMatrix& m, const DecodeOptions& options = {});

}  // namespace attn_tree
