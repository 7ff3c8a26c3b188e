#include "attn_tree/mstdecode.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "attn_tree/error.h"

namespace attn_tree {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

void check_input(const Matrix& m) {
  if (!m.square()) throw ValidationError("decoder input is not square");
  if (m.rows() == 0) throw ValidationError("cannot decode an empty matrix");
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      if (i != j && !std::isfinite(m(i, j)))
        throw ValidationError("non-finite weight at (" + std::to_string(i) + ", " +
                              std::to_string(j) + ")");
}

void check_output([[maybe_unused]] const DecodedTree& tree) {
#ifdef ATTN_TREE_CHECK_TREES
  if (!is_valid_tree(tree)) throw std::logic_error("decoder produced an invalid tree");
#endif
}

// One contraction step, kept for the expansion pass.
struct Contraction {
  std::size_t root = 0;
  std::vector<std::size_t> best_in;
  std::vector<bool> in_cycle;
  std::vector<std::size_t> new_id;
  std::vector<std::size_t> old_of_new;
  std::size_t cycle_id = 0;
  // Indexed by the contracted id of an outside node.
  std::vector<std::size_t> enter_dep;  // cycle member entered from that node
  std::vector<std::size_t> exit_src;   // cycle member heading that node
};

std::vector<std::size_t> best_incoming(const Matrix& w, std::size_t root) {
  const std::size_t n = w.rows();
  std::vector<std::size_t> best(n, kNone);
  for (std::size_t v = 0; v < n; ++v) {
    if (v == root) continue;
    double top = kNegInf;
    for (std::size_t u = 0; u < n; ++u) {
      if (u == v) continue;
      if (w(u, v) > top) {
        top = w(u, v);
        best[v] = u;
      }
    }
    if (best[v] == kNone) throw ValidationError("node without incoming edge");
  }
  return best;
}

std::vector<std::size_t> find_cycle(const std::vector<std::size_t>& best_in, std::size_t root) {
  const std::size_t n = best_in.size();
  std::vector<std::size_t> visited_by(n, kNone);
  for (std::size_t start = 0; start < n; ++start) {
    std::size_t x = start;
    while (x != root && visited_by[x] == kNone) {
      visited_by[x] = start;
      x = best_in[x];
    }
    if (x != root && visited_by[x] == start) {
      std::vector<std::size_t> cycle{x};
      for (std::size_t y = best_in[x]; y != x; y = best_in[y]) cycle.push_back(y);
      return cycle;
    }
  }
  return {};
}

DecodedTree finish(const Matrix& m, std::size_t root, const std::vector<std::size_t>& heads) {
  struct Arc {
    Edge edge;
    std::size_t head;
    std::size_t dep;
  };
  std::vector<Arc> arcs;
  for (std::size_t v = 0; v < heads.size(); ++v) {
    if (v == root) continue;
    arcs.push_back({{std::min(v, heads[v]), std::max(v, heads[v])}, heads[v], v});
  }
  std::sort(arcs.begin(), arcs.end(), [](const Arc& a, const Arc& b) { return a.edge < b.edge; });
  DecodedTree tree;
  tree.n = heads.size();
  for (const Arc& a : arcs) {
    tree.edges.push_back(a.edge);
    tree.total_score += m(a.head, a.dep);
  }
  return tree;
}

struct DisjointSets {
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[b] = a;
    return true;
  }
  std::vector<std::size_t> parent;
};

}  // namespace

bool is_valid_tree(const DecodedTree& tree) {
  if (tree.n == 0) return false;
  if (tree.edges.size() != tree.n - 1) return false;
  DisjointSets sets(tree.n);
  for (const Edge& e : tree.edges) {
    if (e.lo >= e.hi || e.hi >= tree.n) return false;
    if (!sets.unite(e.lo, e.hi)) return false;
  }
  return true;
}

DecodedTree cle_decode(const Matrix& m, std::size_t root, std::vector<std::size_t>& heads) {
  check_input(m);
  if (root >= m.rows())
    throw ValidationError("root " + std::to_string(root) + " out of range for " +
                          std::to_string(m.rows()) + " tokens");

  Matrix w = m;
  std::size_t cur_root = root;
  std::vector<Contraction> stack;
  std::vector<std::size_t> best_in;
  while (true) {
    best_in = best_incoming(w, cur_root);
    std::vector<std::size_t> cycle = find_cycle(best_in, cur_root);
    if (cycle.empty()) break;

    const std::size_t n = w.rows();
    Contraction c;
    c.root = cur_root;
    c.best_in = best_in;
    c.in_cycle.assign(n, false);
    for (std::size_t v : cycle) c.in_cycle[v] = true;
    c.new_id.assign(n, kNone);
    for (std::size_t v = 0; v < n; ++v) {
      if (c.in_cycle[v]) continue;
      c.new_id[v] = c.old_of_new.size();
      c.old_of_new.push_back(v);
    }
    c.cycle_id = c.old_of_new.size();
    for (std::size_t v : cycle) c.new_id[v] = c.cycle_id;

    const std::size_t k = c.cycle_id + 1;
    Matrix next(k, k, kNegInf);
    c.enter_dep.assign(k, kNone);
    c.exit_src.assign(k, kNone);
    for (std::size_t u = 0; u < n; ++u) {
      for (std::size_t v = 0; v < n; ++v) {
        if (u == v || (c.in_cycle[u] && c.in_cycle[v])) continue;
        const std::size_t nu = c.new_id[u];
        const std::size_t nv = c.new_id[v];
        if (c.in_cycle[v]) {
          const double s = w(u, v) - w(best_in[v], v);
          if (s > next(nu, nv)) {
            next(nu, nv) = s;
            c.enter_dep[nu] = v;
          }
        } else if (c.in_cycle[u]) {
          if (w(u, v) > next(nu, nv)) {
            next(nu, nv) = w(u, v);
            c.exit_src[nv] = u;
          }
        } else {
          next(nu, nv) = w(u, v);
        }
      }
    }
    cur_root = c.new_id[cur_root];
    w = std::move(next);
    stack.push_back(std::move(c));
  }

  heads = best_in;
  heads[cur_root] = cur_root;
  while (!stack.empty()) {
    const Contraction& c = stack.back();
    const std::size_t n = c.new_id.size();
    std::vector<std::size_t> expanded(n, kNone);
    for (std::size_t v = 0; v < n; ++v) {
      if (v == c.root) {
        expanded[v] = v;
      } else if (c.in_cycle[v]) {
        expanded[v] = c.best_in[v];
      } else {
        const std::size_t u = heads[c.new_id[v]];
        expanded[v] = u == c.cycle_id ? c.exit_src[c.new_id[v]] : c.old_of_new[u];
      }
    }
    const std::size_t entering = heads[c.cycle_id];
    expanded[c.enter_dep[entering]] = c.old_of_new[entering];
    heads = std::move(expanded);
    stack.pop_back();
  }

  DecodedTree tree = finish(m, root, heads);
  check_output(tree);
  return tree;
}

DecodedTree cle_decode(const Matrix& m, std::size_t root) {
  std::vector<std::size_t> heads;
  return cle_decode(m, root, heads);
}

DecodedTree undirected_mst(const Matrix& m) {
  check_input(m);
  const std::size_t n = m.rows();
  std::vector<Edge> candidates;
  candidates.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) candidates.push_back({i, j});
  std::stable_sort(candidates.begin(), candidates.end(), [&](const Edge& a, const Edge& b) {
    const double wa = m(a.lo, a.hi);
    const double wb = m(b.lo, b.hi);
    if (wa != wb) return wa > wb;
    const std::size_t da = a.hi - a.lo;
    const std::size_t db = b.hi - b.lo;
    if (da != db) return da < db;
    return a.lo < b.lo;
  });

  DisjointSets sets(n);
  DecodedTree tree;
  tree.n = n;
  for (const Edge& e : candidates) {
    if (sets.unite(e.lo, e.hi)) {
      tree.edges.push_back(e);
      if (tree.edges.size() + 1 == n) break;
    }
  }
  std::sort(tree.edges.begin(), tree.edges.end());
  for (const Edge& e : tree.edges) tree.total_score += m(e.lo, e.hi);
  check_output(tree);
  return tree;
}

std::size_t best_root(const Matrix& m) {
  check_input(m);
  std::size_t best = 0;
  double top = kNegInf;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double score = cle_decode(m, r).total_score;
    if (score > top) {
      top = score;
      best = r;
    }
  }
  return best;
}

std::optional<RootStrategy> parse_root_strategy(std::string_view text) {
  if (text == "best") return RootStrategy{};
  constexpr std::string_view kFixed = "fixed:";
  if (text.substr(0, kFixed.size()) != kFixed) return std::nullopt;
  std::string_view digits = text.substr(kFixed.size());
  std::size_t k = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
  if (digits.empty() || ec != std::errc() || ptr != digits.data() + digits.size())
    return std::nullopt;
  return RootStrategy{k};
}

std::optional<DecoderKind> parse_decoder(std::string_view text) {
  if (text == "mst" || text == "undirected") return DecoderKind::kUndirected;
  if (text == "cle") return DecoderKind::kChuLiuEdmonds;
  return std::nullopt;
}

DecodedTree decode(const TokenMatrix& m, const DecodeOptions& options) {
  if (options.decoder == DecoderKind::kUndirected) return undirected_mst(m.scores);
  const std::size_t n = m.n();
  const std::size_t root = options.root.fixed
                               ? std::min(*options.root.fixed, n == 0 ? 0 : n - 1)
                               : best_root(m.scores);
  return cle_decode(m.scores, root);
}

}  // namespace attn_tree
