#include "attn_tree/attnstore.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "attn_tree/error.h"
#include "json.hpp"

namespace attn_tree {

namespace {

using nlohmann::json;

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return static_cast<T>(v);
}

// Raw tensor bytes, 32-bit IEEE-754 little-endian.
void append_floats(std::string& out, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.append(reinterpret_cast<const char*>(values.data()), values.size_bytes());
  } else {
    for (float f : values) put_le(out, std::bit_cast<std::uint32_t>(f));
  }
}

void decode_floats(const std::string& bytes, std::vector<float>& out) {
  out.resize(bytes.size() / sizeof(float));
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data(), bytes.data(), out.size() * sizeof(float));
  } else {
    auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = std::bit_cast<float>(get_le<std::uint32_t>(p + 4 * i));
  }
}

std::string where(const std::string& sent_id) { return "record '" + sent_id + "': "; }

void validate_layout(const std::string& sent_id, std::size_t seq_len,
                     std::span<const std::size_t> delimiters,
                     std::span<const SubwordSpan> spans) {
  std::vector<int> owner(seq_len, 0);
  for (std::size_t d : delimiters) {
    if (d >= seq_len)
      throw ValidationError(where(sent_id) + "delimiter index " + std::to_string(d) +
                            " outside sequence of length " + std::to_string(seq_len));
    if (owner[d]++ != 0)
      throw ValidationError(where(sent_id) + "subword index " + std::to_string(d) +
                            " covered twice");
  }
  std::size_t prev_end = 0;
  for (std::size_t t = 0; t < spans.size(); ++t) {
    const SubwordSpan& s = spans[t];
    if (s.begin >= s.end || s.end > seq_len)
      throw ValidationError(where(sent_id) + "token span " + std::to_string(t) + " [" +
                            std::to_string(s.begin) + ", " + std::to_string(s.end) +
                            ") is empty or out of range");
    if (s.begin < prev_end)
      throw ValidationError(where(sent_id) + "token span " + std::to_string(t) +
                            " overlaps or is out of order at subword index " +
                            std::to_string(s.begin));
    prev_end = s.end;
    for (std::size_t i = s.begin; i < s.end; ++i) {
      if (owner[i]++ != 0)
        throw ValidationError(where(sent_id) + "subword index " + std::to_string(i) +
                              " covered twice");
    }
  }
  for (std::size_t i = 0; i < seq_len; ++i) {
    if (owner[i] == 0)
      throw ValidationError(where(sent_id) + "subword index " + std::to_string(i) +
                            " not covered by any span or delimiter");
  }
}

void validate_rows(const AttentionRecord& r) {
  for (std::size_t l = 0; l < r.n_layers; ++l) {
    for (std::size_t h = 0; h < r.n_heads; ++h) {
      auto s = r.slice(l, h);
      for (std::size_t row = 0; row < r.seq_len; ++row) {
        double sum = 0.0;
        for (std::size_t c = 0; c < r.seq_len; ++c) {
          float v = s[row * r.seq_len + c];
          if (!std::isfinite(v) || v < 0.0f)
            throw ValidationError(where(r.sent_id) + "invalid weight at layer " +
                                  std::to_string(l) + " head " + std::to_string(h) +
                                  " row " + std::to_string(row));
          sum += v;
        }
        if (std::abs(sum - 1.0) > kRowSumTolerance) {
          std::ostringstream msg;
          msg << where(r.sent_id) << "row " << row << " of layer " << l << " head " << h
              << " sums to " << sum;
          throw ValidationError(msg.str());
        }
      }
    }
  }
}

std::uint64_t record_bytes(std::size_t layers, std::size_t heads, std::size_t seq) {
  return static_cast<std::uint64_t>(layers) * heads * seq * seq * sizeof(float);
}

}  // namespace

std::span<const float> AttentionRecord::slice(std::size_t layer, std::size_t head) const {
  return std::span<const float>(tensor).subspan((layer * n_heads + head) * slice_size(),
                                                slice_size());
}

std::span<float> AttentionRecord::slice(std::size_t layer, std::size_t head) {
  return std::span<float>(tensor).subspan((layer * n_heads + head) * slice_size(),
                                          slice_size());
}

void validate_record(const AttentionRecord& record) {
  const std::size_t expected = record.n_layers * record.n_heads * record.slice_size();
  if (record.tensor.size() != expected)
    throw ValidationError(where(record.sent_id) + "tensor holds " +
                          std::to_string(record.tensor.size()) + " values, shape needs " +
                          std::to_string(expected));
  validate_layout(record.sent_id, record.seq_len, record.delimiter_indices, record.token_spans);
  validate_rows(record);
}

void write_archive(const AttentionArchive& archive, const std::filesystem::path& path) {
  json records = json::array();
  std::uint64_t offset = 0;
  for (const auto& r : archive.records) {
    validate_record(r);
    json spans = json::array();
    for (const auto& s : r.token_spans) spans.push_back({s.begin, s.end});
    records.push_back({{"sent_id", r.sent_id},
                       {"shape", {r.n_layers, r.n_heads, r.seq_len, r.seq_len}},
                       {"delimiters", r.delimiter_indices},
                       {"spans", std::move(spans)},
                       {"offset", offset},
                       {"bytes", r.payload_bytes()}});
    offset += r.payload_bytes();
  }
  json header = {{"model_tag", archive.model_tag},
                 {"language", archive.language},
                 {"records", std::move(records)},
                 {"payload_bytes", offset}};
  const std::string header_text = header.dump();

  std::string preamble(kArchiveMagic, sizeof(kArchiveMagic));
  put_le<std::uint32_t>(preamble, kArchiveVersion);
  put_le<std::uint64_t>(preamble, header_text.size());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(preamble.data(), static_cast<std::streamsize>(preamble.size()));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  std::string buffer;
  for (const auto& r : archive.records) {
    buffer.clear();
    append_floats(buffer, r.tensor);
    out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  }
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

AttentionArchive read_archive(const std::filesystem::path& path) {
  ArchiveReader reader(path);
  AttentionArchive archive;
  archive.model_tag = reader.model_tag();
  archive.language = reader.language();
  archive.records.reserve(reader.size());
  for (std::size_t i = 0; i < reader.size(); ++i) archive.records.push_back(reader.fetch(i));
  return archive;
}

InMemorySource::InMemorySource(const AttentionArchive& archive) : archive_(archive) {}

ArchiveReader::ArchiveReader(std::filesystem::path path) : path_(std::move(path)) {
  std::error_code ec;
  file_bytes_ = std::filesystem::file_size(path_, ec);
  if (ec) throw IoError("cannot stat archive " + path_.string() + ": " + ec.message());
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw IoError("cannot open archive " + path_.string());

  unsigned char preamble[kArchivePreambleBytes];
  in.read(reinterpret_cast<char*>(preamble), sizeof(preamble));
  if (static_cast<std::size_t>(in.gcount()) < 4 ||
      std::memcmp(preamble, kArchiveMagic, sizeof(kArchiveMagic)) != 0)
    throw FormatError(path_.string() + ": not an ATNA archive (bad magic)");
  if (in.gcount() != static_cast<std::streamsize>(sizeof(preamble)))
    throw FormatError(path_.string() + ": truncated archive: expected " +
                      std::to_string(kArchivePreambleBytes) + " preamble bytes, found " +
                      std::to_string(file_bytes_));
  const auto version = get_le<std::uint32_t>(preamble + 4);
  if (version != kArchiveVersion)
    throw FormatError(path_.string() + ": unsupported archive version " + std::to_string(version));
  const auto header_len = get_le<std::uint64_t>(preamble + 8);
  if (header_len > file_bytes_ - kArchivePreambleBytes)
    throw FormatError(path_.string() + ": truncated archive: header length field needs " +
                      std::to_string(kArchivePreambleBytes + header_len) + " bytes, found " +
                      std::to_string(file_bytes_));

  header_json_.resize(header_len);
  in.read(header_json_.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw IoError(path_.string() + ": failed reading header");
  payload_start_ = kArchivePreambleBytes + header_len;

  json header;
  try {
    header = json::parse(header_json_);
    model_tag_ = header.at("model_tag").get<std::string>();
    language_ = header.at("language").get<std::string>();
    std::uint64_t expected_offset = 0;
    for (const auto& r : header.at("records")) {
      Entry e;
      e.sent_id = r.at("sent_id").get<std::string>();
      auto shape = r.at("shape").get<std::vector<std::size_t>>();
      if (shape.size() != 4 || shape[2] != shape[3])
        throw FormatError(path_.string() + ": " + where(e.sent_id) + "bad shape");
      e.n_layers = shape[0];
      e.n_heads = shape[1];
      e.seq_len = shape[2];
      e.delimiters = r.at("delimiters").get<std::vector<std::size_t>>();
      for (const auto& s : r.at("spans")) {
        auto pair = s.get<std::vector<std::size_t>>();
        if (pair.size() != 2) throw FormatError(path_.string() + ": " + where(e.sent_id) + "bad span");
        e.spans.push_back({pair[0], pair[1]});
      }
      e.offset = r.at("offset").get<std::uint64_t>();
      const auto bytes = r.at("bytes").get<std::uint64_t>();
      if (e.offset != expected_offset || bytes != record_bytes(e.n_layers, e.n_heads, e.seq_len))
        throw FormatError(path_.string() + ": " + where(e.sent_id) +
                          "payload offset/size inconsistent with shape");
      expected_offset += bytes;
      validate_layout(e.sent_id, e.seq_len, e.delimiters, e.spans);
      entries_.push_back(std::move(e));
    }
    const std::uint64_t expected_total = payload_start_ + expected_offset;
    if (file_bytes_ < expected_total)
      throw FormatError(path_.string() + ": truncated archive: expected " +
                        std::to_string(expected_total) + " bytes, found " +
                        std::to_string(file_bytes_));
    if (file_bytes_ > expected_total)
      throw FormatError(path_.string() + ": " + std::to_string(file_bytes_ - expected_total) +
                        " trailing bytes after payload");
  } catch (const json::exception& ex) {
    throw FormatError(path_.string() + ": malformed header: " + ex.what());
  }
}

AttentionRecord ArchiveReader::fetch(std::size_t i) const {
  const Entry& e = entries_.at(i);
  AttentionRecord r;
  r.sent_id = e.sent_id;
  r.n_layers = e.n_layers;
  r.n_heads = e.n_heads;
  r.seq_len = e.seq_len;
  r.delimiter_indices = e.delimiters;
  r.token_spans = e.spans;

  const std::uint64_t bytes = record_bytes(e.n_layers, e.n_heads, e.seq_len);
  std::ifstream in(path_, std::ios::binary);
  if (!in) throw IoError("cannot open archive " + path_.string());
  in.seekg(static_cast<std::streamoff>(payload_start_ + e.offset));
  std::string raw(bytes, '\0');
  in.read(raw.data(), static_cast<std::streamsize>(bytes));
  if (static_cast<std::uint64_t>(in.gcount()) != bytes)
    throw FormatError(path_.string() + ": " + where(e.sent_id) + "truncated payload: expected " +
                      std::to_string(bytes) + " bytes, found " + std::to_string(in.gcount()));
  decode_floats(raw, r.tensor);
  validate_rows(r);
  return r;
}

}  // namespace attn_tree
