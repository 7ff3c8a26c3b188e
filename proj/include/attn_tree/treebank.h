#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace attn_tree {

// One syntactic word of a CoNLL-U sentence. Indices are 1-based; head 0
// marks the root attachment.
struct Token {
  int index = 0;
  std::string form;
  std::string upos;
  int head = 0;
  std::string deprel;  // full label, e.g. "nsubj:pass"

  // Universal part of the label ("nsubj:pass" -> "nsubj").
  std::string relation() const;
  bool is_punct() const;
};

struct Sentence {
  std::string sent_id;
  std::string text;
  std::vector<Token> tokens;

  std::size_t size() const { return tokens.size(); }
};

struct Treebank {
  std::string language;
  std::vector<Sentence> sentences;
};

// Undirected gold edge between two 1-based token positions, lo < hi.
struct GoldEdge {
  int lo = 0;
  int hi = 0;
  int dependent = 0;
  std::string relation;

  friend bool operator==(const GoldEdge&, const GoldEdge&) = default;
};

enum class PunctPolicy { kInclude, kExclude };

// Universal part of a dependency label.
std::string universal_relation(std::string_view deprel);

// Language code from a UD file name ("en_pud-ud-test.conllu" -> "en").
std::string language_from_path(const std::filesystem::path& path);

// Parses CoNLL-U text. `source` names the input in error messages.
// Multiword-token ranges and empty nodes are skipped. Throws ParseError on
// malformed lines and ValidationError on invalid trees or duplicate ids.
Treebank parse_conllu(std::istream& in, std::string language,
                      std::string_view source = "<stream>");

Treebank load_conllu(const std::filesystem::path& path);

// Serializes the basic tree back to CoNLL-U; columns other than
// ID/FORM/UPOS/HEAD/DEPREL are written as "_".
void write_conllu(const Treebank& treebank, std::ostream& out);

// Throws ValidationError naming the sentence if it is not a single-rooted
// tree over its tokens.
void validate_sentence(const Sentence& sentence);

// One entry per non-root token, sorted by (lo, hi). With kExclude, edges
// whose dependent is punctuation are dropped.
std::vector<GoldEdge> gold_edges(const Sentence& sentence,
                                 PunctPolicy punct = PunctPolicy::kInclude);

}  // namespace attn_tree
