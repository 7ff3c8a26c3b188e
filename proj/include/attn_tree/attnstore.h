#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace attn_tree {

inline constexpr char kArchiveMagic[4] = {'A', 'T', 'N', 'A'};
inline constexpr std::uint32_t kArchiveVersion = 1;
// magic + version + header length
inline constexpr std::size_t kArchivePreambleBytes = 4 + 4 + 8;
inline constexpr double kRowSumTolerance = 1e-3;

// Half-open range of subword positions making up one gold token.
struct SubwordSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  friend bool operator==(const SubwordSpan&, const SubwordSpan&) = default;
};

// Attention of one sentence. The tensor is laid out layer-major, then
// head, row (attending position), column (attended position).
struct AttentionRecord {
  std::string sent_id;
  std::size_t n_layers = 0;
  std::size_t n_heads = 0;
  std::size_t seq_len = 0;
  std::vector<float> tensor;
  std::vector<std::size_t> delimiter_indices;
  std::vector<SubwordSpan> token_spans;

  std::size_t slice_size() const { return seq_len * seq_len; }
  std::size_t payload_bytes() const { return tensor.size() * sizeof(float); }

  std::span<const float> slice(std::size_t layer, std::size_t head) const;
  std::span<float> slice(std::size_t layer, std::size_t head);

  friend bool operator==(const AttentionRecord&, const AttentionRecord&) = default;
};

struct AttentionArchive {
  std::string model_tag;
  std::string language;
  std::vector<AttentionRecord> records;

  friend bool operator==(const AttentionArchive&, const AttentionArchive&) = default;
};

// Checks tensor size, span/delimiter coverage of [0, seq_len) and row sums.
// Throws ValidationError naming the sentence and the offending index.
void validate_record(const AttentionRecord& record);

void write_archive(const AttentionArchive& archive, const std::filesystem::path& path);

// Reads and validates every record.
AttentionArchive read_archive(const std::filesystem::path& path);

// Sequential access to records of an archive, either resident or on disk.
class RecordSource {
 public:
  virtual ~RecordSource() = default;
  virtual const std::string& model_tag() const = 0;
  virtual const std::string& language() const = 0;
  virtual std::size_t size() const = 0;
  virtual const std::string& sent_id(std::size_t i) const = 0;
  virtual AttentionRecord fetch(std::size_t i) const = 0;
};

class InMemorySource final : public RecordSource {
 public:
  // Non-owning; `archive` must outlive the source.
  explicit InMemorySource(const AttentionArchive& archive);
  explicit InMemorySource(AttentionArchive&&) = delete;

  const std::string& model_tag() const override { return archive_.model_tag; }
  const std::string& language() const override { return archive_.language; }
  std::size_t size() const override { return archive_.records.size(); }
  const std::string& sent_id(std::size_t i) const override {
    return archive_.records[i].sent_id;
  }
  AttentionRecord fetch(std::size_t i) const override { return archive_.records[i]; }

 private:
  const AttentionArchive& archive_;
};

// Parses the header on construction and loads tensors lazily by payload
// offset. fetch() opens its own stream, so concurrent fetches are safe.
class ArchiveReader final : public RecordSource {
 public:
  explicit ArchiveReader(std::filesystem::path path);

  const std::string& model_tag() const override { return model_tag_; }
  const std::string& language() const override { return language_; }
  std::size_t size() const override { return entries_.size(); }
  const std::string& sent_id(std::size_t i) const override { return entries_[i].sent_id; }
  AttentionRecord fetch(std::size_t i) const override;

  const std::string& header_json() const { return header_json_; }
  std::uintmax_t file_bytes() const { return file_bytes_; }

 private:
  struct Entry {
    std::string sent_id;
    std::size_t n_layers = 0;
    std::size_t n_heads = 0;
    std::size_t seq_len = 0;
    std::vector<std::size_t> delimiters;
    std::vector<SubwordSpan> spans;
    std::uint64_t offset = 0;
  };

  std::filesystem::path path_;
  std::string model_tag_;
  std::string language_;
  std::string header_json_;
  std::uint64_t payload_start_ = 0;
  std::uintmax_t file_bytes_ = 0;
  std::vector<Entry> entries_;
};

}  // namespace attn_tree
