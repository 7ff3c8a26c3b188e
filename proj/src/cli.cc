#include "attn_tree/cli.h"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <set>
#include <thread>

#include "CLI11.hpp"
#include "attn_tree/attnstore.h"
#include "attn_tree/error.h"
#include "attn_tree/metrics.h"
#include "attn_tree/reports.h"
#include "attn_tree/sweep.h"
#include "json.hpp"

namespace attn_tree::cli {

namespace fs = std::filesystem;

namespace {

void require_exists(const std::vector<fs::path>& paths, const char* what) {
  for (const auto& p : paths)
    if (!fs::exists(p)) throw ValidationError(std::string(what) + " not found: " + p.string());
}

void require_one(const std::vector<fs::path>& paths, const char* flag) {
  if (paths.size() != 1)
    throw ValidationError(std::string("exactly one ") + flag + " is required, got " +
                          std::to_string(paths.size()));
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw IoError("cannot create output directory " + dir.string());
}

template <typename Writer>
void write_file(const fs::path& path, Writer&& writer) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  writer(out);
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

SweepOptions sweep_options(const RunConfig& c) {
  SweepOptions o;
  o.merge = c.merge_mode;
  o.decode.decoder = c.decoder;
  o.decode.root = c.root_strategy;
  o.score.punct = c.include_punct ? PunctPolicy::kInclude : PunctPolicy::kExclude;
  o.workers = c.workers;
  return o;
}

std::string report_stem(const fs::path& p) {
  std::string name = p.filename().string();
  const std::string suffix = ".sweep.tsv";
  if (name.size() > suffix.size() && name.ends_with(suffix))
    return name.substr(0, name.size() - suffix.size());
  return p.stem().string();
}

SweepReport load_report(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open report " + p.string());
  return read_sweep_tsv(in, p.string());
}

struct SweepInputs {
  ArchiveReader archive;
  Treebank treebank;
};

SweepInputs load_sweep_inputs(const RunConfig& c) {
  require_one(c.archive_paths, "--archive");
  require_one(c.treebank_paths, "--treebank");
  require_exists(c.archive_paths, "archive");
  require_exists(c.treebank_paths, "treebank");
  return {ArchiveReader(c.archive_paths[0]), load_conllu(c.treebank_paths[0])};
}

}  // namespace

std::vector<fs::path> collect_treebanks(const std::vector<fs::path>& paths,
                                        const std::string& pattern) {
  std::vector<fs::path> files;
  auto keep = [&](const fs::path& p) {
    const std::string name = p.filename().string();
    return p.extension() == ".conllu" &&
           (pattern.empty() || name.find(pattern) != std::string::npos);
  };
  for (const auto& p : paths) {
    if (fs::is_directory(p)) {
      for (const auto& entry : fs::recursive_directory_iterator(p))
        if (entry.is_regular_file() && keep(entry.path())) files.push_back(entry.path());
    } else if (keep(p) || pattern.empty()) {
      files.push_back(p);
    }
  }
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
    return a.filename() < b.filename();
  });
  return files;
}

int cmd_inspect(const RunConfig& c, std::ostream& out) {
  require_one(c.archive_paths, "archive");
  require_exists(c.archive_paths, "archive");
  ArchiveReader reader(c.archive_paths[0]);
  out << "file:      " << c.archive_paths[0].string() << '\n'
      << "format:    ATNA v" << kArchiveVersion << '\n'
      << "bytes:     " << reader.file_bytes() << '\n'
      << "model_tag: " << reader.model_tag() << '\n'
      << "language:  " << reader.language() << '\n'
      << "records:   " << reader.size() << '\n'
      << "header:\n"
      << nlohmann::json::parse(reader.header_json()).dump(2) << '\n';
  return kExitOk;
}

int cmd_baseline(const RunConfig& c, std::ostream& out) {
  if (c.treebank_paths.empty()) throw ValidationError("baseline needs at least one --treebank");
  require_exists(c.treebank_paths, "treebank");
  const auto files = collect_treebanks(c.treebank_paths, c.file_pattern);
  if (files.empty()) throw ValidationError("no .conllu treebanks found");
  ensure_dir(c.output_dir);

  ScoreOptions opts;
  opts.punct = c.include_punct ? PunctPolicy::kInclude : PunctPolicy::kExclude;
  std::vector<LanguageBaseline> rows;
  std::set<std::string> seen;
  for (const auto& f : files) {
    Treebank tb = load_conllu(f);
    if (!seen.insert(tb.language).second)
      throw ValidationError("more than one treebank for language '" + tb.language +
                            "'; pass files explicitly or use --pattern");
    if (tb.sentences.empty()) throw ValidationError("treebank " + f.string() + " is empty");
    rows.push_back({tb.language, adjacent_baseline(tb, opts), positional_baseline(tb, opts)});
  }

  write_file(c.output_dir / "baseline.adjacency.tsv",
             [&](std::ostream& o) { write_adjacency_tsv(rows, o); });
  write_file(c.output_dir / "baseline.json", [&](std::ostream& o) { write_baseline_json(rows, o); });
  for (const auto& r : rows)
    write_file(c.output_dir / (r.language + ".positional.tsv"),
               [&](std::ostream& o) { write_positional_tsv(r, o); });

  out << "adjacent-branching baseline (UUAS %)\n";
  for (const auto& r : rows)
    out << r.language << '\t'
        << round_percent(r.adjacency.correct_edges, r.adjacency.total_edges) << '\n';
  return kExitOk;
}

int cmd_sweep(const RunConfig& c, std::ostream& out) {
  auto in = load_sweep_inputs(c);
  ensure_dir(c.output_dir);
  const CellScores scores = score_cells(in.archive, in.treebank, sweep_options(c));
  const SweepReport report = summarize(scores);
  const auto best = best_relation_heads(scores, c.relation_min_support);
  const auto positional = positional_baseline(in.treebank, sweep_options(c).score);

  const std::string stem = report.language + "." + report.model_tag;
  write_file(c.output_dir / (stem + ".sweep.tsv"), [&](std::ostream& o) { write_sweep_tsv(report, o); });
  write_file(c.output_dir / (stem + ".sweep.json"), [&](std::ostream& o) { write_sweep_json(report, o); });
  write_file(c.output_dir / (stem + ".relations.tsv"), [&](std::ostream& o) {
    write_relations_tsv(report.language, report.model_tag, best, positional, o);
  });
  write_file(c.output_dir / (stem + ".summary.tsv"), [&](std::ostream& o) { write_summary_tsv(report, o); });

  out << report.language << '\t' << report.model_tag << "\tbest "
      << format_rate(report.best_uuas) << " at " << cell_label(report.best_cell) << '\n';
  return kExitOk;
}

int cmd_relations(const RunConfig& c, std::ostream& out) {
  auto in = load_sweep_inputs(c);
  ensure_dir(c.output_dir);
  const auto best =
      best_relation_heads(in.archive, in.treebank, c.relation_min_support, sweep_options(c));
  const auto positional = positional_baseline(in.treebank, sweep_options(c).score);
  const std::string stem = in.treebank.language + "." + in.archive.model_tag();
  write_file(c.output_dir / (stem + ".relations.tsv"), [&](std::ostream& o) {
    write_relations_tsv(in.treebank.language, in.archive.model_tag(), best, positional, o);
  });
  for (const auto& [label, b] : best)
    out << label << '\t' << cell_label(b.cell) << '\t' << format_rate(b.uuas()) << '\n';
  return kExitOk;
}

int cmd_compare(const RunConfig& c, std::ostream& out) {
  if (c.report_paths.size() != 2)
    throw ValidationError("compare needs exactly two sweep reports");
  require_exists(c.report_paths, "report");
  const SweepReport base = load_report(c.report_paths[0]);
  const SweepReport other = load_report(c.report_paths[1]);
  const VariantDelta delta = compare_variants(base, other);
  ensure_dir(c.output_dir);
  const fs::path target = c.output_dir / (report_stem(c.report_paths[0]) + "_vs_" +
                                          report_stem(c.report_paths[1]) + ".delta.tsv");
  write_file(target, [&](std::ostream& o) { write_delta_tsv(base, other, delta, o); });
  out << "layer\tdelta_max\tdelta_mean\n";
  for (std::size_t l = 0; l < delta.delta_max_by_layer.size(); ++l)
    out << l + 1 << '\t' << format_rate(delta.delta_max_by_layer[l]) << '\t'
        << format_rate(delta.delta_mean_by_layer[l]) << '\n';
  return kExitOk;
}

int cmd_synth(const RunConfig& c, std::ostream& out) {
  require_one(c.treebank_paths, "--treebank");
  require_exists(c.treebank_paths, "treebank");
  if (c.synth_output.empty()) throw ValidationError("synth needs an output archive path (--out)");
  if (c.synth.layers == 0 || c.synth.heads == 0)
    throw ValidationError("--layers and --heads must be positive");
  const Treebank tb = load_conllu(c.treebank_paths[0]);
  SynthOptions opts = c.synth;
  opts.seed = c.seed;
  const AttentionArchive archive = synth_archive(tb, opts, c.model_tag);
  if (c.synth_output.has_parent_path()) ensure_dir(c.synth_output.parent_path());
  write_archive(archive, c.synth_output);
  out << "wrote " << archive.records.size() << " records (" << synth_mode_name(opts.mode) << ", "
      << opts.layers << "x" << opts.heads << ") to " << c.synth_output.string() << '\n';
  return kExitOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig c;
  c.workers = std::max(1u, std::thread::hardware_concurrency());

  CLI::App app{"Decode dependency trees from transformer attention and score them against "
               "Universal Dependencies treebanks.",
               "attn-tree"};
  app.require_subcommand(1);
  app.fallthrough();

  std::vector<std::string> treebanks, archives;
  std::string out_path, root = "best", merge = "sum-mean", decoder = "mst";
  bool exclude_punct = false;
  app.add_option("--treebank", treebanks, "CoNLL-U treebank file (baseline: files or directories)");
  app.add_option("--archive", archives, "ATNA attention archive");
  app.add_option("--out", out_path, "Output directory (synth: output archive file)");
  app.add_option("--workers", c.workers, "Worker threads for sweeps")->check(CLI::PositiveNumber);
  app.add_option("--min-support", c.relation_min_support,
                 "Minimum gold edges for a relation to get a best head");
  app.add_option("--root", root, "Root for Chu-Liu-Edmonds decoding: best | fixed:K (K clamped to the last token)")
      ->capture_default_str();
  app.add_option("--merge", merge, "Subword merge: sum-mean | mean-mean")->capture_default_str();
  app.add_option("--decoder", decoder, "Tree decoder: mst (undirected) | cle")->capture_default_str();
  app.add_flag("--exclude-punct", exclude_punct, "Drop punctuation dependents from all scores");
  app.add_option("--seed", c.seed, "Seed for synthetic fixtures");
  app.add_option("--pattern", c.file_pattern, "baseline: only treebank files whose name contains this");

  auto* inspect = app.add_subcommand("inspect", "Print the header of an attention archive");
  std::string inspect_path;
  inspect->add_option("archive", inspect_path, "Archive to inspect")->required();

  app.add_subcommand("baseline", "Adjacent-branching and positional baselines per treebank");
  app.add_subcommand("sweep", "Score every layer/head of an archive against its treebank");
  app.add_subcommand("relations", "Best layer/head per relation");

  auto* compare = app.add_subcommand("compare", "Per-layer deltas between two sweep reports");
  std::vector<std::string> reports;
  compare->add_option("reports", reports, "BASE.sweep.tsv OTHER.sweep.tsv")->expected(2)->required();

  auto* synth = app.add_subcommand("synth", "Write a synthetic attention archive for a treebank");
  std::string mode = "uniform";
  synth->add_option("--mode", mode, "uniform | gold-oracle | adjacent")->capture_default_str();
  synth->add_option("--layers", c.synth.layers, "Layers")->capture_default_str();
  synth->add_option("--heads", c.synth.heads, "Heads per layer")->capture_default_str();
  synth->add_option("--max-subwords", c.synth.max_subwords, "Split tokens into up to N subwords")
      ->capture_default_str();
  synth->add_option("--tag", c.model_tag, "Model tag stored in the archive")->capture_default_str();

  std::vector<std::string> argv_store{"attn-tree"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "attn-tree: " << e.what() << '\n';
    return kExitValidation;
  }

  try {
    c.command = app.get_subcommands().front()->get_name();
    for (const auto& t : treebanks) c.treebank_paths.emplace_back(t);
    for (const auto& a : archives) c.archive_paths.emplace_back(a);
    if (!inspect_path.empty()) c.archive_paths = {inspect_path};
    for (const auto& r : reports) c.report_paths.emplace_back(r);
    c.include_punct = !exclude_punct;

    auto root_strategy = parse_root_strategy(root);
    if (!root_strategy) throw ValidationError("bad --root '" + root + "'");
    c.root_strategy = *root_strategy;
    auto merge_mode = parse_merge_mode(merge);
    if (!merge_mode) throw ValidationError("bad --merge '" + merge + "'");
    c.merge_mode = *merge_mode;
    auto decoder_kind = parse_decoder(decoder);
    if (!decoder_kind) throw ValidationError("bad --decoder '" + decoder + "'");
    c.decoder = *decoder_kind;
    auto synth_mode = parse_synth_mode(mode);
    if (!synth_mode) throw ValidationError("bad --mode '" + mode + "'");
    c.synth.mode = *synth_mode;

    if (c.command == "synth") {
      c.synth_output = out_path;
    } else if (!out_path.empty()) {
      c.output_dir = out_path;
    }

    if (c.command == "inspect") return cmd_inspect(c, out);
    if (c.command == "baseline") return cmd_baseline(c, out);
    if (c.command == "sweep") return cmd_sweep(c, out);
    if (c.command == "relations") return cmd_relations(c, out);
    if (c.command == "compare") return cmd_compare(c, out);
    return cmd_synth(c, out);
  } catch (const IoError& e) {
    err << "attn-tree: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "attn-tree: " << e.what() << '\n';
    return kExitValidation;
  }
}

}  // namespace attn_tree::cli
