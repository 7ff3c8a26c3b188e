// Acceptance checks. Prints one PASS/FAIL line per criterion.
//
//   acceptance --group core   self-contained criteria
//   acceptance --group pud    criteria that need the PUD treebanks under
//                             $ATTN_TREE_PUD_DIR; exits 77 when they are absent

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "attn_tree/attnstore.h"
#include "attn_tree/cli.h"
#include "attn_tree/error.h"
#include "attn_tree/matrixprep.h"
#include "attn_tree/metrics.h"
#include "attn_tree/mstdecode.h"
#include "attn_tree/sweep.h"
#include "attn_tree/synth.h"
#include "attn_tree/treebank.h"
#include "test_util.h"

namespace fs = std::filesystem;
using namespace attn_tree;

namespace {

constexpr double kScoreTol = 1e-12;       // decoder score vs enumeration
constexpr double kTieMargin = 1e-9;       // best tree must beat the runner-up by this
constexpr double kMergeTol = 1e-7;        // merge-order commutativity
constexpr double kDeltaTol = 1e-9;        // comparison tooling
constexpr double kRoundTripBudgetS = 5.0;
constexpr double kBaselineBudgetS = 30.0;
constexpr int kBaselineSlack = 1;         // percentage points
constexpr int kPositionalSlack = 2;       // percentage points
constexpr int kSkip = 77;

const fs::path kData = ATTN_TREE_TEST_DATA;

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

int report(const std::string& name, const Outcome& o) {
  std::cout << (o.pass ? "PASS  " : "FAIL  ") << name;
  if (!o.detail.empty()) std::cout << "  (" << o.detail << ")";
  std::cout << std::endl;
  return o.pass ? 0 : 1;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Best and runner-up spanning tree scores by Pruefer enumeration.
std::pair<double, double> top_two_trees(const Matrix& m) {
  const std::size_t n = m.rows();
  double best = -INFINITY, second = -INFINITY;
  if (n < 3) return {n == 2 ? m(0, 1) : 0.0, -INFINITY};
  std::vector<std::size_t> seq(n - 2, 0);
  while (true) {
    double s = 0.0;
    for (const auto& [a, b] : testing::pruefer_edges(seq, n)) s += m(a, b);
    if (s > best) {
      second = best;
      best = s;
    } else if (s > second) {
      second = s;
    }
    std::size_t i = 0;
    while (i < seq.size() && ++seq[i] == n) seq[i++] = 0;
    if (i == seq.size()) break;
  }
  return {best, second};
}

testing::EdgeSet edge_set(const DecodedTree& t) {
  testing::EdgeSet s;
  for (const Edge& e : t.edges) s.insert({e.lo, e.hi});
  return s;
}

Outcome mst_oracle() {
  Outcome o;
  std::mt19937_64 rng(1001);
  int checked = 0;
  while (checked < 100) {
    const std::size_t n = 2 + rng() % 5;
    Matrix m = testing::random_symmetric(rng, n);
    auto [best, second] = top_two_trees(m);
    if (best - second <= kTieMargin) continue;
    ++checked;
    const auto oracle = testing::brute_force_mst(m);
    DecodedTree u = undirected_mst(m);
    if (edge_set(u) != oracle.edges || std::abs(u.total_score - oracle.score) > kScoreTol)
      o.fail("undirected_mst differs from enumeration at n=" + std::to_string(n));
    for (std::size_t r = 0; r < n; ++r) {
      DecodedTree c = cle_decode(m, r);
      if (edge_set(c) != oracle.edges || std::abs(c.total_score - oracle.score) > kScoreTol)
        o.fail("cle_decode root " + std::to_string(r) + " differs from enumeration at n=" +
               std::to_string(n));
    }
  }
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 10;
    Matrix m = testing::random_symmetric(rng, n);
    const auto expected = edge_set(undirected_mst(m));
    for (std::size_t r = 0; r < n; ++r)
      if (edge_set(cle_decode(m, r)) != expected)
        o.fail("cle_decode root " + std::to_string(r) + " != undirected_mst at n=" +
               std::to_string(n));
  }
  if (o.pass) o.detail = "100 tie-free n<=6 vs enumeration, 100 n<=10 all roots";
  return o;
}

std::vector<Treebank> pipeline_fixtures() {
  std::vector<Treebank> out;
  for (const char* f : {"minimal.conllu", "xx_multiword.conllu", "yy_mixed.conllu", "zz_chain.conllu"})
    out.push_back(load_conllu(kData / f));
  for (std::uint64_t seed = 0; seed < 4; ++seed)
    out.push_back(testing::random_treebank(2000 + seed, 60, 1, 30));
  return out;
}

Outcome pipeline_soundness() {
  Outcome o;
  std::size_t sentences = 0;
  for (const Treebank& tb : pipeline_fixtures()) {
    sentences += tb.sentences.size();
    AttentionArchive gold = synth_archive(tb, {SynthMode::kGoldOracle, 3, 4, 3, 17}, "gold");
    InMemorySource gold_src(gold);
    SweepReport g = run_sweep(gold_src, tb);
    for (double u : g.grid)
      if (u != 1.0) o.fail(tb.language + ": gold-oracle cell below 1.0");

    AttentionArchive uni = synth_archive(tb, {SynthMode::kUniform, 2, 3, 1, 17}, "uniform");
    InMemorySource uni_src(uni);
    CellScores u = score_cells(uni_src, tb);
    const ScoreReport adj = adjacent_baseline(tb);
    for (const ScoreReport& cell : u.cells)
      if (cell.correct_edges != adj.correct_edges || cell.total_edges != adj.total_edges)
        o.fail(tb.language + ": uniform cell " + std::to_string(cell.correct_edges) + "/" +
               std::to_string(cell.total_edges) + " != adjacency " +
               std::to_string(adj.correct_edges) + "/" + std::to_string(adj.total_edges));
  }

  std::mt19937_64 rng(1002);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 24;
    Matrix m = testing::random_matrix(rng, n, n);
    std::vector<SubwordSpan> spans;
    std::vector<std::pair<std::size_t, std::size_t>> plain;
    for (std::size_t pos = 0; pos < n;) {
      const std::size_t len = std::min<std::size_t>(1 + rng() % 4, n - pos);
      spans.push_back({pos, pos + len});
      plain.push_back({pos, pos + len});
      pos += len;
    }
    worst = std::max(worst, max_abs_diff(merge_subwords(m, spans), testing::merge_columns_first(m, plain)));
  }
  if (worst > kMergeTol) o.fail("merge orders differ by " + std::to_string(worst));
  if (o.pass) {
    std::ostringstream d;
    d << sentences << " fixture sentences; merge max diff " << worst << " over 1000 matrices";
    o.detail = d.str();
  }
  return o;
}

AttentionRecord random_record(std::mt19937_64& rng, std::string id) {
  AttentionRecord r;
  r.sent_id = std::move(id);
  r.n_layers = 12;
  r.n_heads = 12;
  r.seq_len = 16;
  r.delimiter_indices = {0, 15};
  for (std::size_t t = 1; t < 15; ++t) r.token_spans.push_back({t, t + 1});
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  r.tensor.resize(12 * 12 * 16 * 16);
  for (std::size_t row = 0; row < 12 * 12 * 16; ++row) {
    float* p = r.tensor.data() + row * 16;
    float sum = 0.0f;
    for (std::size_t c = 0; c < 16; ++c) sum += (p[c] = u(rng));
    for (std::size_t c = 0; c < 16; ++c) p[c] /= sum;
  }
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << bytes;
}

// Expects read_archive(p) to throw FormatError whose message contains `needle`.
bool rejects(const fs::path& p, const std::string& needle, std::string& seen) {
  try {
    read_archive(p);
    seen = "accepted";
    return false;
  } catch (const FormatError& e) {
    seen = e.what();
    return seen.find(needle) != std::string::npos;
  } catch (const std::exception& e) {
    seen = std::string("wrong error type: ") + e.what();
    return false;
  }
}

Outcome format_round_trip() {
  Outcome o;
  std::mt19937_64 rng(1003);
  AttentionArchive a;
  a.model_tag = "acceptance";
  a.language = "xx";
  for (int i = 0; i < 1000; ++i) a.records.push_back(random_record(rng, "s" + std::to_string(i)));

  const fs::path path = testing::temp_path("acceptance_roundtrip.atna");
  const auto t0 = std::chrono::steady_clock::now();
  write_archive(a, path);
  AttentionArchive back = read_archive(path);
  const double elapsed = seconds_since(t0);

  if (back.model_tag != a.model_tag || back.language != a.language ||
      back.records.size() != a.records.size())
    o.fail("header fields differ after round-trip");
  for (std::size_t i = 0; o.pass && i < a.records.size(); ++i) {
    const auto& x = a.records[i];
    const auto& y = back.records[i];
    if (x.sent_id != y.sent_id || x.token_spans != y.token_spans ||
        x.delimiter_indices != y.delimiter_indices || x.tensor.size() != y.tensor.size() ||
        std::memcmp(x.tensor.data(), y.tensor.data(), x.tensor.size() * sizeof(float)) != 0)
      o.fail("record " + x.sent_id + " differs after round-trip");
  }
  if (elapsed >= kRoundTripBudgetS) o.fail("round-trip took " + std::to_string(elapsed) + " s");
  const std::uintmax_t bytes = fs::file_size(path);
  fs::remove(path);

  AttentionArchive small;
  small.model_tag = "t";
  small.language = "xx";
  small.records.push_back(random_record(rng, "only"));
  const fs::path good = testing::temp_path("acceptance_small.atna");
  write_archive(small, good);
  const std::string bytes_ok = slurp(good);
  const fs::path bad = testing::temp_path("acceptance_bad.atna");

  struct Corruption {
    const char* what;
    std::function<std::string(std::string)> mutate;
    const char* needle;
  };
  const std::vector<Corruption> cases = {
      {"bad magic", [](std::string b) { b[0] = 'X'; return b; }, "bad magic"},
      {"version 99", [](std::string b) { b[4] = 99; return b; }, "unsupported archive version 99"},
      {"length field", [](std::string b) { b[12] = 0x7f; return b; }, "truncated archive"},
      {"short preamble", [](std::string b) { return b.substr(0, 10); }, "truncated archive"},
      {"truncated payload", [](std::string b) { return b.substr(0, b.size() - 100); },
       "expected "},
      {"header text", [](std::string b) { return b.replace(17, 1, "#"); }, "malformed header"},
  };
  for (const auto& c : cases) {
    spit(bad, c.mutate(bytes_ok));
    std::string seen;
    if (!rejects(bad, c.needle, seen)) o.fail(std::string(c.what) + ": " + seen);
  }
  {
    spit(bad, bytes_ok.substr(0, bytes_ok.size() - 100));
    std::string seen;
    const std::string expect = "expected " + std::to_string(bytes_ok.size()) + " bytes, found " +
                               std::to_string(bytes_ok.size() - 100);
    if (!rejects(bad, expect, seen)) o.fail("truncation message lacks counts: " + seen);
  }
  fs::remove(good);
  fs::remove(bad);

  if (o.pass) {
    std::ostringstream d;
    d << "1000 records 12x12 seq 16, " << bytes << " bytes in " << elapsed
      << " s; 7 corruptions rejected";
    o.detail = d.str();
  }
  return o;
}

SweepReport shifted(const SweepReport& r, double by) {
  SweepReport s = r;
  s.model_tag = r.model_tag + "+shift";
  for (double& u : s.grid) u += by;
  for (std::size_t l = 0; l < s.n_layers; ++l) {
    double sum = 0.0, mx = -INFINITY;
    for (std::size_t h = 0; h < s.n_heads; ++h) {
      sum += s.at(l, h);
      mx = std::max(mx, s.at(l, h));
    }
    s.mean_by_layer[l] = sum / static_cast<double>(s.n_heads);
    s.max_by_layer[l] = mx;
  }
  return s;
}

Outcome comparison_tooling() {
  Outcome o;
  Treebank tb = testing::random_treebank(1004, 80, 2, 25);
  AttentionArchive a = synth_archive(tb, {SynthMode::kAdjacent, 12, 12, 3, 5}, "adjacent");
  // Mix in gold cells so the grid is not flat.
  AttentionArchive g = synth_archive(tb, {SynthMode::kGoldOracle, 12, 12, 3, 5}, "gold");
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const std::size_t s2 = a.records[i].seq_len * a.records[i].seq_len;
    for (std::size_t cell = 0; cell < 144; cell += 7)
      std::copy(g.records[i].tensor.begin() + cell * s2,
                g.records[i].tensor.begin() + (cell + 1) * s2,
                a.records[i].tensor.begin() + cell * s2);
  }
  InMemorySource src(a);
  const SweepReport base = run_sweep(src, tb);

  VariantDelta self = compare_variants(base, base);
  for (std::size_t l = 0; l < 12; ++l)
    if (self.delta_max_by_layer[l] != 0.0 || self.delta_mean_by_layer[l] != 0.0)
      o.fail("self-comparison non-zero at layer " + std::to_string(l + 1));

  VariantDelta up = compare_variants(base, shifted(base, 0.1));
  for (std::size_t l = 0; l < 12; ++l)
    if (std::abs(up.delta_max_by_layer[l] - 0.1) > kDeltaTol ||
        std::abs(up.delta_mean_by_layer[l] - 0.1) > kDeltaTol)
      o.fail("+0.1 shift gives " + std::to_string(up.delta_max_by_layer[l]) + " at layer " +
             std::to_string(l + 1));

  // Same through the command line on a written report.
  const fs::path dir = testing::temp_path("acceptance_compare");
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path archive = dir / "a.atna";
  const fs::path treebank = dir / "xx_fixture.conllu";
  write_archive(a, archive);
  {
    std::ofstream out(treebank);
    write_conllu(tb, out);
  }
  std::ostringstream out, err;
  int code = cli::run({"sweep", "--treebank", treebank.string(), "--archive", archive.string(),
                       "--out", dir.string()},
                      out, err);
  const fs::path rep = dir / "xx.adjacent.sweep.tsv";
  if (code == 0)
    code = cli::run({"compare", rep.string(), rep.string(), "--out", dir.string()}, out, err);
  if (code != 0) {
    o.fail("cli exit " + std::to_string(code) + ": " + err.str());
  } else {
    std::ifstream in(dir / "xx.adjacent_vs_xx.adjacent.delta.tsv");
    std::string line;
    std::getline(in, line);
    int rows = 0;
    while (std::getline(in, line)) {
      ++rows;
      std::vector<std::string> f;
      std::stringstream ss(line);
      for (std::string x; std::getline(ss, x, '\t');) f.push_back(x);
      if (f.size() != 10 || f[6] != "0.000000" || f[9] != "0.000000")
        o.fail("cli self-delta row not zero: " + line);
    }
    if (rows != 12) o.fail("cli delta file has " + std::to_string(rows) + " rows");
  }
  fs::remove_all(dir);
  if (o.pass) o.detail = "12x12 grid; self = 0, +0.1 shift = 0.1 within 1e-9";
  return o;
}

int run_core() {
  int failures = 0;
  auto guarded = [&](const std::string& name, Outcome (*fn)()) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    failures += report(name, o);
  };
  guarded("mst-oracle-equivalence", mst_oracle);
  guarded("pipeline-soundness", pipeline_soundness);
  guarded("format-round-trip", format_round_trip);
  guarded("comparison-tooling", comparison_tooling);
  return failures == 0 ? 0 : 1;
}

// Reference adjacency UUAS (%) per language.
const std::map<std::string, int> kAdjacencyReference = {
    {"ar", 50}, {"cs", 40}, {"de", 36}, {"en", 36}, {"es", 40}, {"fi", 42},
    {"fr", 40}, {"hi", 46}, {"id", 47}, {"it", 40}, {"ja", 43}, {"ko", 55},
    {"pl", 45}, {"pt", 41}, {"ru", 42}, {"sv", 39}, {"tr", 52}, {"zh", 41}};

std::map<std::string, int> read_adjacency_percent(const fs::path& tsv) {
  std::map<std::string, int> out;
  std::ifstream in(tsv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, '\t');) f.push_back(x);
    if (f.size() == 5) out[f[0]] = std::stoi(f[4]);
  }
  return out;
}

struct BaselineRun {
  int code = 0;
  std::string err;
  double seconds = 0.0;
  std::map<std::string, int> percent;
  std::vector<std::string> misses;
};

BaselineRun run_baseline(const fs::path& pud, bool exclude_punct) {
  BaselineRun r;
  const fs::path out = testing::temp_path(exclude_punct ? "acceptance_pud_nopunct" : "acceptance_pud");
  fs::remove_all(out);
  std::vector<std::string> args = {"baseline", "--treebank", pud.string(), "--pattern", "_pud-",
                                   "--out", out.string()};
  if (exclude_punct) args.push_back("--exclude-punct");
  std::ostringstream so, se;
  const auto t0 = std::chrono::steady_clock::now();
  r.code = cli::run(args, so, se);
  r.seconds = seconds_since(t0);
  r.err = se.str();
  if (r.code != 0) return r;
  r.percent = read_adjacency_percent(out / "baseline.adjacency.tsv");
  for (const auto& [lang, ref] : kAdjacencyReference) {
    auto it = r.percent.find(lang);
    if (it == r.percent.end())
      r.misses.push_back(lang + " missing");
    else if (std::abs(it->second - ref) > kBaselineSlack)
      r.misses.push_back(lang + " " + std::to_string(it->second) + " vs " + std::to_string(ref));
  }
  return r;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ", ") + x;
  return s;
}

Outcome adjacency_reproduction(const fs::path& pud) {
  Outcome o;
  BaselineRun with = run_baseline(pud, false);
  if (with.code != 0) {
    o.fail("baseline exit " + std::to_string(with.code) + ": " + with.err);
    return o;
  }
  BaselineRun chosen = with;
  std::string convention = "punctuation included";
  if (with.misses.size() > 2) {
    BaselineRun without = run_baseline(pud, true);
    if (without.code == 0 && without.misses.size() < with.misses.size()) {
      chosen = without;
      convention = "punctuation excluded";
    }
  }
  std::ostringstream d;
  d << convention << ", " << chosen.seconds << " s";
  if (!chosen.misses.empty()) d << "; outside +-1: " << join(chosen.misses);
  o.detail = d.str();
  if (!chosen.misses.empty()) o.pass = false;
  if (chosen.seconds >= kBaselineBudgetS) o.fail("runtime " + std::to_string(chosen.seconds) + " s");
  return o;
}

Outcome positional_spot_checks(const fs::path& pud) {
  Outcome o;
  auto files = cli::collect_treebanks({pud}, "_pud-");
  auto find = [&](const std::string& lang) -> std::optional<fs::path> {
    for (const auto& f : files)
      if (language_from_path(f) == lang) return f;
    return std::nullopt;
  };
  const auto t0 = std::chrono::steady_clock::now();
  auto en_path = find("en");
  auto hi_path = find("hi");
  if (!en_path || !hi_path) {
    o.fail("en or hi PUD treebank missing");
    return o;
  }
  const PositionalBaseline en = positional_baseline(load_conllu(*en_path));
  const PositionalBaseline hi = positional_baseline(load_conllu(*hi_path));
  auto entry = [](const PositionalBaseline& p, const std::string& rel) {
    auto it = p.per_relation.find(rel);
    return it == p.per_relation.end() ? PositionalEntry{} : it->second;
  };
  const PositionalEntry en_det = entry(en, "det");
  const PositionalEntry en_nsubj = entry(en, "nsubj");
  const PositionalEntry hi_nsubj = entry(hi, "nsubj");
  const int en_nsubj_pct = round_percent(en_nsubj.matching, en_nsubj.support);
  const int hi_nsubj_pct = round_percent(hi_nsubj.matching, hi_nsubj.support);
  if (en_det.modal_offset != -1) o.fail("en det modal offset " + std::to_string(en_det.modal_offset));
  if (std::abs(en_nsubj_pct - 39) > kPositionalSlack) o.fail("en nsubj " + std::to_string(en_nsubj_pct));
  if (std::abs(hi_nsubj_pct - 10) > kPositionalSlack) o.fail("hi nsubj " + std::to_string(hi_nsubj_pct));
  std::ostringstream d;
  d << "en det " << en_det.modal_offset << ", en nsubj " << en_nsubj_pct << "%, hi nsubj "
    << hi_nsubj_pct << "%, " << seconds_since(t0) << " s";
  if (o.pass) o.detail = d.str();
  else o.detail += "; " + d.str();
  return o;
}

int run_pud() {
  const char* env = std::getenv("ATTN_TREE_PUD_DIR");
  const fs::path pud = env ? env : "";
  if (pud.empty() || !fs::is_directory(pud) || cli::collect_treebanks({pud}, "_pud-").empty()) {
    const std::string why = "blocked: no *_pud-*.conllu treebanks; set ATTN_TREE_PUD_DIR";
    report("adjacency-baseline-reproduction", Outcome{false, why});
    report("positional-baseline-spot-checks", Outcome{false, why});
    return kSkip;
  }
  int failures = 0;
  for (auto [name, fn] : {std::pair{"adjacency-baseline-reproduction", &adjacency_reproduction},
                          std::pair{"positional-baseline-spot-checks", &positional_spot_checks}}) {
    Outcome o;
    try {
      o = fn(pud);
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    failures += report(name, o);
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  std::string group = "core";
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--group" && i + 1 < argc) {
      group = argv[++i];
    } else {
      std::cerr << "usage: acceptance [--group core|pud]\n";
      return 2;
    }
  }
  if (group == "core") return run_core();
  if (group == "pud") return run_pud();
  std::cerr << "unknown group '" << group << "'\n";
  return 2;
}
