#include "attn_tree/sweep.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "attn_tree/error.h"

namespace attn_tree {

namespace {

// Record index for every treebank sentence, in treebank order.
std::vector<std::size_t> align(const RecordSource& archive, const Treebank& treebank) {
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < archive.size(); ++i) by_id.emplace(archive.sent_id(i), i);

  std::vector<std::string> problems;
  std::vector<std::size_t> order;
  order.reserve(treebank.sentences.size());
  std::unordered_map<std::string, bool> in_treebank;
  for (const auto& s : treebank.sentences) {
    in_treebank[s.sent_id] = true;
    auto it = by_id.find(s.sent_id);
    if (it == by_id.end()) {
      problems.push_back(s.sent_id + " (missing from archive)");
    } else {
      order.push_back(it->second);
    }
  }
  for (std::size_t i = 0; i < archive.size(); ++i)
    if (!in_treebank.count(archive.sent_id(i)))
      problems.push_back(archive.sent_id(i) + " (missing from treebank)");
  if (archive.size() != by_id.size()) problems.push_back("archive repeats a sent_id");

  if (!problems.empty()) {
    std::string msg = std::to_string(problems.size()) + " sent_id mismatch(es) between archive and treebank:";
    for (std::size_t i = 0; i < std::min<std::size_t>(5, problems.size()); ++i)
      msg += " " + problems[i] + (i + 1 < std::min<std::size_t>(5, problems.size()) ? "," : "");
    throw ValidationError(msg);
  }
  return order;
}

void check_shape(const AttentionRecord& r, const Sentence& s, std::size_t layers,
                 std::size_t heads) {
  if (r.token_spans.size() != s.size())
    throw ValidationError("record '" + r.sent_id + "' has " + std::to_string(r.token_spans.size()) +
                          " token spans, sentence has " + std::to_string(s.size()) + " tokens");
  if (r.n_layers != layers || r.n_heads != heads)
    throw ValidationError("record '" + r.sent_id + "' has shape " + std::to_string(r.n_layers) +
                          "x" + std::to_string(r.n_heads) + ", expected " +
                          std::to_string(layers) + "x" + std::to_string(heads));
}

ScoreReport score_one(const AttentionRecord& r, const Sentence& s, Cell cell,
                      const SweepOptions& options) {
  TokenMatrix m = prepare(r, cell.layer, cell.head, options.merge);
  return uuas(decode(m, options.decode), s, options.score);
}

// Better of two candidates under "higher rate, then earlier cell". All
// cells share a denominator, so comparing correct counts is exact.
bool improves(std::size_t correct, std::size_t best_correct, bool have_best) {
  return !have_best || correct > best_correct;
}

}  // namespace

std::string cell_label(const Cell& cell) {
  return std::to_string(cell.layer + 1) + "-" + std::to_string(cell.head + 1);
}

CellScores score_cells(const RecordSource& archive, const Treebank& treebank,
                       const SweepOptions& options) {
  const std::vector<std::size_t> order = align(archive, treebank);
  CellScores out;
  out.language = treebank.language;
  out.model_tag = archive.model_tag();
  if (order.empty()) return out;

  const AttentionRecord first = archive.fetch(order[0]);
  out.n_layers = first.n_layers;
  out.n_heads = first.n_heads;
  const std::size_t n_cells = out.n_layers * out.n_heads;

  const std::size_t workers =
      std::clamp<std::size_t>(options.workers, 1, std::max<std::size_t>(1, order.size()));
  std::vector<std::vector<ScoreReport>> partial(workers, std::vector<ScoreReport>(n_cells));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto work = [&](std::size_t w) {
    try {
      for (std::size_t i = next++; i < order.size(); i = next++) {
        const Sentence& s = treebank.sentences[i];
        const AttentionRecord r = i == 0 ? first : archive.fetch(order[i]);
        check_shape(r, s, out.n_layers, out.n_heads);
        for (std::size_t l = 0; l < out.n_layers; ++l)
          for (std::size_t h = 0; h < out.n_heads; ++h)
            partial[w][l * out.n_heads + h] += score_one(r, s, {l, h}, options);
      }
    } catch (...) {
      std::lock_guard lock(failure_mu);
      if (!failure) failure = std::current_exception();
      next = order.size();
    }
  };

  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  if (failure) std::rethrow_exception(failure);

  out.cells.assign(n_cells, ScoreReport{});
  for (const auto& p : partial)
    for (std::size_t c = 0; c < n_cells; ++c) out.cells[c] += p[c];
  return out;
}

ScoreReport score_cell(const RecordSource& archive, const Treebank& treebank, Cell cell,
                       const SweepOptions& options) {
  const std::vector<std::size_t> order = align(archive, treebank);
  ScoreReport total;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const AttentionRecord r = archive.fetch(order[i]);
    check_shape(r, treebank.sentences[i], r.n_layers, r.n_heads);
    total += score_one(r, treebank.sentences[i], cell, options);
  }
  return total;
}

SweepReport summarize(const CellScores& scores) {
  SweepReport rep;
  rep.language = scores.language;
  rep.model_tag = scores.model_tag;
  rep.n_layers = scores.n_layers;
  rep.n_heads = scores.n_heads;
  rep.mean_by_layer.assign(rep.n_layers, 0.0);
  rep.max_by_layer.assign(rep.n_layers, 0.0);
  bool have_best = false;
  std::size_t best_correct = 0;
  for (std::size_t l = 0; l < rep.n_layers; ++l) {
    double sum = 0.0;
    for (std::size_t h = 0; h < rep.n_heads; ++h) {
      const ScoreReport& cell = scores.at(l, h);
      const double u = cell.uuas();
      rep.grid.push_back(u);
      rep.counts.push_back({cell.correct_edges, cell.total_edges});
      sum += u;
      rep.max_by_layer[l] = h == 0 ? u : std::max(rep.max_by_layer[l], u);
      if (improves(cell.correct_edges, best_correct, have_best)) {
        have_best = true;
        best_correct = cell.correct_edges;
        rep.best_cell = {l, h};
        rep.best_uuas = u;
      }
    }
    if (rep.n_heads > 0) rep.mean_by_layer[l] = sum / static_cast<double>(rep.n_heads);
  }
  return rep;
}

SweepReport run_sweep(const RecordSource& archive, const Treebank& treebank,
                      const SweepOptions& options) {
  return summarize(score_cells(archive, treebank, options));
}

std::map<std::string, RelationBest> best_relation_heads(const CellScores& scores,
                                                        std::size_t min_support) {
  std::map<std::string, RelationBest> out;
  if (scores.cells.empty()) return out;
  for (const auto& [label, count] : scores.cells.front().per_relation) {
    if (count.total < min_support) continue;
    RelationBest best;
    bool have = false;
    for (std::size_t l = 0; l < scores.n_layers; ++l) {
      for (std::size_t h = 0; h < scores.n_heads; ++h) {
        const RelationCount& c = scores.at(l, h).per_relation.at(label);
        if (improves(c.correct, best.count.correct, have)) {
          have = true;
          best = {{l, h}, c};
        }
      }
    }
    out[label] = best;
  }
  return out;
}

std::map<std::string, RelationBest> best_relation_heads(const RecordSource& archive,
                                                        const Treebank& treebank,
                                                        std::size_t min_support,
                                                        const SweepOptions& options) {
  return best_relation_heads(score_cells(archive, treebank, options), min_support);
}

VariantDelta compare_variants(const SweepReport& base, const SweepReport& other) {
  if (base.language != other.language)
    throw ValidationError("cannot compare reports for languages '" + base.language + "' and '" +
                          other.language + "'");
  if (base.n_layers != other.n_layers || base.n_heads != other.n_heads ||
      base.max_by_layer.size() != base.n_layers || other.max_by_layer.size() != other.n_layers)
    throw ValidationError("cannot compare grids of shape " + std::to_string(base.n_layers) + "x" +
                          std::to_string(base.n_heads) + " and " +
                          std::to_string(other.n_layers) + "x" + std::to_string(other.n_heads));
  VariantDelta d;
  d.language = base.language;
  d.base_tag = base.model_tag;
  d.other_tag = other.model_tag;
  for (std::size_t l = 0; l < base.n_layers; ++l) {
    d.delta_max_by_layer.push_back(other.max_by_layer[l] - base.max_by_layer[l]);
    d.delta_mean_by_layer.push_back(other.mean_by_layer[l] - base.mean_by_layer[l]);
  }
  return d;
}

}  // namespace attn_tree
