#include "attn_tree/reports.h"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "attn_tree/error.h"
#include "json.hpp"

namespace attn_tree {

namespace {

using nlohmann::ordered_json;

constexpr const char* kSweepHeader =
    "language\tmodel_tag\tlayer\thead\tcell\tcorrect\ttotal\tuuas\trank_in_layer";

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::size_t parse_count(const std::string& text, const std::string& source, std::size_t line) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
    throw ValidationError(source + ":" + std::to_string(line) + ": expected a count, found '" +
                          text + "'");
  return v;
}

// 1-based rank of each head within its layer, best first.
std::vector<std::size_t> ranks_in_layer(const SweepReport& r, std::size_t layer) {
  std::vector<std::size_t> heads(r.n_heads);
  std::iota(heads.begin(), heads.end(), 0);
  std::stable_sort(heads.begin(), heads.end(), [&](std::size_t a, std::size_t b) {
    return r.counts[layer * r.n_heads + a].correct > r.counts[layer * r.n_heads + b].correct;
  });
  std::vector<std::size_t> rank(r.n_heads);
  for (std::size_t i = 0; i < heads.size(); ++i) rank[heads[i]] = i + 1;
  return rank;
}

}  // namespace

std::string format_rate(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  return buf;
}

void write_sweep_tsv(const SweepReport& report, std::ostream& out) {
  out << kSweepHeader << '\n';
  for (std::size_t l = 0; l < report.n_layers; ++l) {
    const auto rank = ranks_in_layer(report, l);
    for (std::size_t h = 0; h < report.n_heads; ++h) {
      const RelationCount& c = report.counts[l * report.n_heads + h];
      out << report.language << '\t' << report.model_tag << '\t' << l + 1 << '\t' << h + 1 << '\t'
          << cell_label({l, h}) << '\t' << c.correct << '\t' << c.total << '\t'
          << format_rate(report.at(l, h)) << '\t' << rank[h] << '\n';
    }
  }
}

SweepReport read_sweep_tsv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(source + ": empty report");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kSweepHeader) throw ValidationError(source + ":1: unexpected sweep report header");

  struct Row {
    std::size_t layer, head, correct, total;
  };
  std::vector<Row> rows;
  std::string language, tag;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split(line, '\t');
    if (f.size() != 9)
      throw ValidationError(source + ":" + std::to_string(line_no) + ": expected 9 columns");
    if (rows.empty()) {
      language = f[0];
      tag = f[1];
    } else if (f[0] != language || f[1] != tag) {
      throw ValidationError(source + ":" + std::to_string(line_no) +
                            ": language/model_tag changes mid-file");
    }
    Row r{parse_count(f[2], source, line_no), parse_count(f[3], source, line_no),
          parse_count(f[5], source, line_no), parse_count(f[6], source, line_no)};
    if (r.layer == 0 || r.head == 0 || r.correct > r.total)
      throw ValidationError(source + ":" + std::to_string(line_no) + ": invalid cell");
    rows.push_back(r);
  }
  if (rows.empty()) throw ValidationError(source + ": report has no cells");

  CellScores scores;
  scores.language = language;
  scores.model_tag = tag;
  for (const Row& r : rows) {
    scores.n_layers = std::max(scores.n_layers, r.layer);
    scores.n_heads = std::max(scores.n_heads, r.head);
  }
  if (rows.size() != scores.n_layers * scores.n_heads)
    throw ValidationError(source + ": grid is incomplete");
  scores.cells.assign(rows.size(), ScoreReport{});
  std::vector<bool> seen(rows.size(), false);
  for (const Row& r : rows) {
    const std::size_t idx = (r.layer - 1) * scores.n_heads + (r.head - 1);
    if (seen[idx]) throw ValidationError(source + ": duplicate cell " + std::to_string(r.layer) +
                                         "-" + std::to_string(r.head));
    seen[idx] = true;
    scores.cells[idx].correct_edges = r.correct;
    scores.cells[idx].total_edges = r.total;
  }
  return summarize(scores);
}

void write_sweep_json(const SweepReport& report, std::ostream& out) {
  ordered_json j;
  j["language"] = report.language;
  j["model_tag"] = report.model_tag;
  j["n_layers"] = report.n_layers;
  j["n_heads"] = report.n_heads;
  ordered_json grid = ordered_json::array();
  for (std::size_t l = 0; l < report.n_layers; ++l) {
    ordered_json row = ordered_json::array();
    for (std::size_t h = 0; h < report.n_heads; ++h) row.push_back(report.at(l, h));
    grid.push_back(std::move(row));
  }
  j["grid"] = std::move(grid);
  j["best_cell"] = cell_label(report.best_cell);
  j["best_layer"] = report.best_cell.layer + 1;
  j["best_head"] = report.best_cell.head + 1;
  j["best_uuas"] = report.best_uuas;
  j["mean_by_layer"] = report.mean_by_layer;
  j["max_by_layer"] = report.max_by_layer;
  out << j.dump(2) << '\n';
}

void write_summary_tsv(const SweepReport& report, std::ostream& out) {
  const RelationCount best = report.counts.empty()
                                 ? RelationCount{}
                                 : report.counts[report.best_cell.layer * report.n_heads +
                                                 report.best_cell.head];
  out << "language\tmodel_tag\tbest_uuas\tpercent\tbest_cell\tcorrect\ttotal\n";
  out << report.language << '\t' << report.model_tag << '\t' << format_rate(report.best_uuas)
      << '\t' << round_percent(best.correct, best.total) << '\t' << cell_label(report.best_cell)
      << '\t' << best.correct << '\t' << best.total << '\n';
}

void write_relations_tsv(const std::string& language, const std::string& model_tag,
                         const std::map<std::string, RelationBest>& best,
                         const PositionalBaseline& positional, std::ostream& out) {
  out << "language\tmodel_tag\trelation\tsupport\tcell\tlayer\thead\tcorrect\tuuas"
         "\tpositional_offset\tpositional_accuracy\n";
  for (const auto& [label, b] : best) {
    out << language << '\t' << model_tag << '\t' << label << '\t' << b.count.total << '\t'
        << cell_label(b.cell) << '\t' << b.cell.layer + 1 << '\t' << b.cell.head + 1 << '\t'
        << b.count.correct << '\t' << format_rate(b.uuas());
    auto it = positional.per_relation.find(label);
    if (it != positional.per_relation.end())
      out << '\t' << it->second.modal_offset << '\t' << format_rate(it->second.accuracy());
    else
      out << "\t\t";
    out << '\n';
  }
}

void write_delta_tsv(const SweepReport& base, const SweepReport& other, const VariantDelta& delta,
                     std::ostream& out) {
  out << "language\tbase_tag\tother_tag\tlayer\tbase_max\tother_max\tdelta_max"
         "\tbase_mean\tother_mean\tdelta_mean\n";
  for (std::size_t l = 0; l < delta.delta_max_by_layer.size(); ++l) {
    out << delta.language << '\t' << delta.base_tag << '\t' << delta.other_tag << '\t' << l + 1
        << '\t' << format_rate(base.max_by_layer[l]) << '\t' << format_rate(other.max_by_layer[l])
        << '\t' << format_rate(delta.delta_max_by_layer[l]) << '\t'
        << format_rate(base.mean_by_layer[l]) << '\t' << format_rate(other.mean_by_layer[l])
        << '\t' << format_rate(delta.delta_mean_by_layer[l]) << '\n';
  }
}

void write_adjacency_tsv(const std::vector<LanguageBaseline>& rows, std::ostream& out) {
  out << "language\tcorrect\ttotal\tuuas\tpercent\n";
  for (const auto& r : rows) {
    out << r.language << '\t' << r.adjacency.correct_edges << '\t' << r.adjacency.total_edges
        << '\t' << format_rate(r.adjacency.uuas()) << '\t'
        << round_percent(r.adjacency.correct_edges, r.adjacency.total_edges) << '\n';
  }
}

void write_positional_tsv(const LanguageBaseline& row, std::ostream& out) {
  out << "language\trelation\tsupport\tmodal_offset\tmatching\taccuracy\tpercent\n";
  for (const auto& [label, e] : row.positional.per_relation) {
    out << row.language << '\t' << label << '\t' << e.support << '\t' << e.modal_offset << '\t'
        << e.matching << '\t' << format_rate(e.accuracy()) << '\t'
        << round_percent(e.matching, e.support) << '\n';
  }
}

void write_baseline_json(const std::vector<LanguageBaseline>& rows, std::ostream& out) {
  ordered_json j = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json lang;
    lang["language"] = r.language;
    lang["adjacency"] = {{"correct", r.adjacency.correct_edges},
                         {"total", r.adjacency.total_edges},
                         {"uuas", r.adjacency.uuas()}};
    ordered_json pos = ordered_json::object();
    for (const auto& [label, e] : r.positional.per_relation) {
      pos[label] = {{"modal_offset", e.modal_offset},
                    {"matching", e.matching},
                    {"support", e.support},
                    {"accuracy", e.accuracy()}};
    }
    lang["positional"] = std::move(pos);
    j.push_back(std::move(lang));
  }
  out << j.dump(2) << '\n';
}

}  // namespace attn_tree
