#include "attn_tree/treebank.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "attn_tree/error.h"

namespace attn_tree {

namespace {

constexpr std::size_t kConlluColumns = 10;

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

// "# key = value" comment; returns false if the key does not match.
bool comment_value(std::string_view line, std::string_view key, std::string& value) {
  line.remove_prefix(1);
  line = trim(line);
  if (line.substr(0, key.size()) != key) return false;
  std::string_view rest = trim(line.substr(key.size()));
  if (rest.empty() || rest.front() != '=') return false;
  value = std::string(trim(rest.substr(1)));
  return true;
}

class ConlluReader {
 public:
  ConlluReader(std::string language, std::string_view source)
      : source_(source) {
    treebank_.language = std::move(language);
  }

  void feed(std::string_view line) {
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) {
      flush();
      return;
    }
    if (line.front() == '#') {
      std::string value;
      if (comment_value(line, "sent_id", value)) current_.sent_id = value;
      else if (comment_value(line, "text", value)) current_.text = value;
      return;
    }
    if (current_.tokens.empty()) first_line_ = line_no_;
    add_token_line(line);
  }

  Treebank finish() {
    flush();
    return std::move(treebank_);
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream msg;
    msg << source_ << ":" << line_no_ << ": " << what;
    throw ParseError(msg.str());
  }

  void add_token_line(std::string_view line) {
    auto fields = split_tabs(line);
    if (fields.size() != kConlluColumns) {
      fail("expected " + std::to_string(kConlluColumns) +
           " tab-separated columns, found " + std::to_string(fields.size()));
    }
    std::string_view id = fields[0];
    if (id.find('-') != std::string_view::npos) {
      int a = 0, b = 0;
      auto dash = id.find('-');
      if (!parse_int(id.substr(0, dash), a) || !parse_int(id.substr(dash + 1), b) || a > b)
        fail("bad multiword token range '" + std::string(id) + "'");
      return;
    }
    if (id.find('.') != std::string_view::npos) return;  // empty node

    Token token;
    if (!parse_int(id, token.index) || token.index < 1) fail("bad token id '" + std::string(id) + "'");
    int expected = static_cast<int>(current_.tokens.size()) + 1;
    if (token.index != expected) {
      fail("token id " + std::to_string(token.index) + " out of sequence, expected " +
           std::to_string(expected));
    }
    if (!parse_int(fields[6], token.head) || token.head < 0)
      fail("bad head '" + std::string(fields[6]) + "'");
    if (token.head == token.index) fail("token " + std::string(id) + " is its own head");
    token.form = std::string(fields[1]);
    token.upos = std::string(fields[3]);
    token.deprel = std::string(fields[7]);
    if (token.head != 0 && (token.deprel.empty() || token.deprel == "_"))
      fail("missing deprel for token " + std::string(id));
    current_.tokens.push_back(std::move(token));
  }

  void flush() {
    if (current_.tokens.empty()) {
      current_ = Sentence{};
      return;
    }
    ++ordinal_;
    if (current_.sent_id.empty()) current_.sent_id = "sent-" + std::to_string(ordinal_);
    for (const auto& t : current_.tokens) {
      if (t.head > static_cast<int>(current_.tokens.size())) {
        throw ParseError(source_ + ":" + std::to_string(first_line_ + t.index - 1) +
                         ": head " + std::to_string(t.head) + " beyond sentence '" +
                         current_.sent_id + "'");
      }
    }
    validate_sentence(current_);
    if (!seen_ids_.insert(current_.sent_id).second)
      throw ValidationError("duplicate sent_id '" + current_.sent_id + "' in " + source_);
    treebank_.sentences.push_back(std::move(current_));
    current_ = Sentence{};
  }

  std::string source_;
  Treebank treebank_;
  Sentence current_;
  std::set<std::string> seen_ids_;
  std::size_t line_no_ = 0;
  std::size_t first_line_ = 0;
  std::size_t ordinal_ = 0;
};

}  // namespace

std::string universal_relation(std::string_view deprel) {
  return std::string(deprel.substr(0, deprel.find(':')));
}

std::string Token::relation() const { return universal_relation(deprel); }

bool Token::is_punct() const { return relation() == "punct" || upos == "PUNCT"; }

std::string language_from_path(const std::filesystem::path& path) {
  std::string stem = path.filename().string();
  auto cut = stem.find_first_of("_.");
  return cut == std::string::npos ? stem : stem.substr(0, cut);
}

Treebank parse_conllu(std::istream& in, std::string language, std::string_view source) {
  ConlluReader reader(std::move(language), source);
  std::string line;
  while (std::getline(in, line)) reader.feed(line);
  return reader.finish();
}

Treebank load_conllu(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open treebank " + path.string());
  return parse_conllu(in, language_from_path(path), path.string());
}

void write_conllu(const Treebank& treebank, std::ostream& out) {
  for (const auto& s : treebank.sentences) {
    out << "# sent_id = " << s.sent_id << '\n';
    if (!s.text.empty()) out << "# text = " << s.text << '\n';
    for (const auto& t : s.tokens) {
      out << t.index << '\t' << t.form << "\t_\t" << (t.upos.empty() ? "_" : t.upos)
          << "\t_\t_\t" << t.head << '\t' << t.deprel << "\t_\t_\n";
    }
    out << '\n';
  }
}

void validate_sentence(const Sentence& sentence) {
  const int n = static_cast<int>(sentence.tokens.size());
  int roots = 0;
  for (int i = 0; i < n; ++i) {
    const Token& t = sentence.tokens[i];
    if (t.index != i + 1 || t.head < 0 || t.head > n || t.head == t.index)
      throw ValidationError("sentence '" + sentence.sent_id + "': bad token " +
                            std::to_string(t.index));
    if (t.head == 0) ++roots;
  }
  if (roots != 1) {
    throw ValidationError("sentence '" + sentence.sent_id + "' has " + std::to_string(roots) +
                          " roots, expected 1");
  }
  // Every token must reach the root within n steps.
  for (int i = 0; i < n; ++i) {
    int at = i + 1;
    int steps = 0;
    while (at != 0) {
      at = sentence.tokens[at - 1].head;
      if (++steps > n)
        throw ValidationError("sentence '" + sentence.sent_id + "' contains a cycle through token " +
                              std::to_string(i + 1));
    }
  }
}

std::vector<GoldEdge> gold_edges(const Sentence& sentence, PunctPolicy punct) {
  std::vector<GoldEdge> edges;
  edges.reserve(sentence.tokens.size());
  for (const auto& t : sentence.tokens) {
    if (t.head == 0) continue;
    if (punct == PunctPolicy::kExclude && t.is_punct()) continue;
    edges.push_back(GoldEdge{std::min(t.index, t.head), std::max(t.index, t.head), t.index,
                             t.relation()});
  }
  std::sort(edges.begin(), edges.end(),
            [](const GoldEdge& a, const GoldEdge& b) {
              return std::pair(a.lo, a.hi) < std::pair(b.lo, b.hi);
            });
  return edges;
}

}  // namespace attn_tree
