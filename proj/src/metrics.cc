#include "attn_tree/metrics.h"

#include <algorithm>
#include <cstdlib>
#include <set>

#include "attn_tree/error.h"

namespace attn_tree {

ScoreReport& ScoreReport::operator+=(const ScoreReport& other) {
  correct_edges += other.correct_edges;
  total_edges += other.total_edges;
  for (const auto& [label, count] : other.per_relation) per_relation[label] += count;
  return *this;
}

ScoreReport uuas(const DecodedTree& pred, const Sentence& gold, const ScoreOptions& options) {
  if (pred.n != gold.size())
    throw ValidationError("sentence '" + gold.sent_id + "': decoded tree has " +
                          std::to_string(pred.n) + " tokens, gold has " +
                          std::to_string(gold.size()));
  std::set<Edge> predicted(pred.edges.begin(), pred.edges.end());
  ScoreReport report;
  for (const GoldEdge& g : gold_edges(gold, options.punct)) {
    const Edge e{static_cast<std::size_t>(g.lo - 1), static_cast<std::size_t>(g.hi - 1)};
    const bool hit = predicted.count(e) != 0;
    RelationCount& rel = report.per_relation[g.relation];
    ++rel.total;
    ++report.total_edges;
    if (hit) {
      ++rel.correct;
      ++report.correct_edges;
    }
  }
  return report;
}

ScoreReport aggregate(std::span<const ScoreReport> reports) {
  if (reports.empty()) throw ValidationError("aggregate: no reports");
  ScoreReport total;
  for (const auto& r : reports) total += r;
  return total;
}

ScoreReport adjacent_baseline(const Treebank& treebank, const ScoreOptions& options) {
  if (treebank.sentences.empty()) throw ValidationError("adjacent_baseline: empty treebank");
  ScoreReport total;
  for (const auto& s : treebank.sentences) {
    DecodedTree chain;
    chain.n = s.size();
    for (std::size_t i = 0; i + 1 < chain.n; ++i) chain.edges.push_back({i, i + 1});
    total += uuas(chain, s, options);
  }
  return total;
}

PositionalBaseline positional_baseline(const Treebank& treebank, const ScoreOptions& options) {
  if (treebank.sentences.empty()) throw ValidationError("positional_baseline: empty treebank");
  std::map<std::string, std::map<int, std::size_t>> histograms;
  for (const auto& s : treebank.sentences) {
    for (const GoldEdge& g : gold_edges(s, options.punct)) {
      const int head = g.dependent == g.lo ? g.hi : g.lo;
      ++histograms[g.relation][g.dependent - head];
    }
  }
  // Preference order for equally frequent offsets.
  auto preferred = [](int a, int b) {
    if (std::abs(a) != std::abs(b)) return std::abs(a) < std::abs(b);
    return a < b;
  };
  PositionalBaseline out;
  for (const auto& [label, hist] : histograms) {
    PositionalEntry entry;
    for (const auto& [offset, count] : hist) {
      entry.support += count;
      if (count > entry.matching ||
          (count == entry.matching && preferred(offset, entry.modal_offset))) {
        entry.matching = count;
        entry.modal_offset = offset;
      }
    }
    out.per_relation[label] = entry;
  }
  return out;
}

int round_percent(std::size_t correct, std::size_t total) {
  if (total == 0) return 0;
  return static_cast<int>((200 * correct + total) / (2 * total));
}

}  // namespace attn_tree
