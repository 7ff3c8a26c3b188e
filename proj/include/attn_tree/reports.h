#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "attn_tree/metrics.h"
#include "attn_tree/sweep.h"

namespace attn_tree {

// Tab-separated and JSON report files. Column layouts are listed in
// docs/reports.md. Numbers are printed with six decimals.

// One row per cell: language model_tag layer head cell correct total uuas
// rank_in_layer. Layer and head are 1-based.
void write_sweep_tsv(const SweepReport& report, std::ostream& out);

// Inverse of write_sweep_tsv; statistics are recomputed from the counts.
// Throws ValidationError on a malformed file.
SweepReport read_sweep_tsv(std::istream& in, const std::string& source = "<stream>");

// Grid plus best cell and per-layer statistics, for plotting scripts.
void write_sweep_json(const SweepReport& report, std::ostream& out);

// language model_tag best_uuas percent best_cell correct total
void write_summary_tsv(const SweepReport& report, std::ostream& out);

void write_relations_tsv(const std::string& language, const std::string& model_tag,
                         const std::map<std::string, RelationBest>& best,
                         const PositionalBaseline& positional, std::ostream& out);

void write_delta_tsv(const SweepReport& base, const SweepReport& other, const VariantDelta& delta,
                     std::ostream& out);

struct LanguageBaseline {
  std::string language;
  ScoreReport adjacency;
  PositionalBaseline positional;
};

void write_adjacency_tsv(const std::vector<LanguageBaseline>& rows, std::ostream& out);
void write_positional_tsv(const LanguageBaseline& row, std::ostream& out);
void write_baseline_json(const std::vector<LanguageBaseline>& rows, std::ostream& out);

// "0.123456"
std::string format_rate(double value);

}  // namespace attn_tree
