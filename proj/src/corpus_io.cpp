// Copyright 2026 The lsr-code Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lsr/corpus_io.hpp"

#include <charconv>
#include <cmath>
#include <json.hpp>
#include <sstream>
#include <unordered_set>

#include "binary_io.hpp"
#include "lsr/error.hpp"

namespace lsr {

using nlohmann::json;

namespace {

std::unique_ptr<std::istream> open_binary(const std::filesystem::path& path) {
  auto in = std::make_unique<std::ifstream>(path, std::ios::binary);
  if (!*in) fail(ErrorKind::kIo, "cannot open '" + path.string() + "'");
  return in;
}

std::string at_line(const std::string& name, std::uint64_t line) {
  return name + ": line " + std::to_string(line) + ": ";
}

// Parses one JSONL line, counting object keys two levels deep so duplicate
// keys (which the DOM silently collapses) can be detected.
json parse_line(const std::string& line, const std::string& where, std::size_t* nested_keys) {
  std::size_t keys = 0;
  json::parser_callback_t cb = [&keys](int depth, json::parse_event_t event, json&) {
    if (event == json::parse_event_t::key && depth == 2) ++keys;
    return true;
  };
  json j;
  try {
    j = json::parse(line, cb);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kFormat, where + "malformed JSON: " + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::kFormat, where + "expected a JSON object");
  if (nested_keys) *nested_keys = keys;
  return j;
}

std::size_t nested_object_keys(const json& j) {
  std::size_t n = 0;
  for (const auto& [k, v] : j.items()) {
    if (v.is_object()) n += v.size();
  }
  return n;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

VectorFormat vector_format_for(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".jsonl" || ext == ".json") ? VectorFormat::kJsonl : VectorFormat::kSpv1;
}

VectorFormat parse_vector_format(const std::string& name) {
  if (name == "jsonl") return VectorFormat::kJsonl;
  if (name == "spv1" || name == "binary") return VectorFormat::kSpv1;
  fail(ErrorKind::kInvalidInput, "unknown vector format '" + name + "' (expected jsonl or spv1)");
}

VectorReader::VectorReader(const std::filesystem::path& path, VectorFormat format, std::uint32_t vocab_size)
    : VectorReader(open_binary(path), format, vocab_size, path.string()) {}

VectorReader::VectorReader(std::unique_ptr<std::istream> in, VectorFormat format, std::uint32_t vocab_size,
                           std::string name)
    : in_(std::move(in)), format_(format), vocab_size_(vocab_size), name_(std::move(name)) {
  if (format_ == VectorFormat::kSpv1) {
    read_header();
  } else if (vocab_size_ == 0) {
    fail(ErrorKind::kInvalidInput, name_ + ": JSONL vectors need an explicit vocab size");
  }
}

void VectorReader::read_header() {
  detail::BinaryReader r(*in_, name_);
  char magic[4];
  r.raw(magic, 4, "magic");
  if (std::string_view(magic, 4) != "SPV1") fail(ErrorKind::kFormat, name_ + ": bad magic bytes (expected SPV1)");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kSpv1Version) fail(ErrorKind::kFormat, name_ + ": unsupported SPV1 version " + std::to_string(version));
  const auto vocab = r.get<std::uint32_t>("vocab_size");
  if (vocab == 0) fail(ErrorKind::kFormat, name_ + ": vocab size is zero");
  if (vocab_size_ != 0 && vocab_size_ != vocab) {
    fail(ErrorKind::kValidation, name_ + ": file vocab size " + std::to_string(vocab) + " does not match expected " +
                                     std::to_string(vocab_size_));
  }
  vocab_size_ = vocab;
  declared_ = r.get<std::uint64_t>("record_count");
  offset_ = r.offset();
}

std::optional<VectorRecord> VectorReader::next() {
  return format_ == VectorFormat::kJsonl ? next_jsonl() : next_spv1();
}

std::optional<VectorRecord> VectorReader::next_spv1() {
  if (records_read_ == *declared_) {
    if (in_->peek() != std::char_traits<char>::eof()) {
      fail(ErrorKind::kFormat, name_ + ": trailing bytes after " + std::to_string(*declared_) + " records");
    }
    return std::nullopt;
  }
  detail::BinaryReader r(*in_, name_, offset_);
  const auto record_offset = offset_;
  std::string id = r.string("record id");
  const auto nnz = r.get<std::uint32_t>("nnz");
  if (nnz > vocab_size_) {
    fail(ErrorKind::kValidation, name_ + ": record " + std::to_string(records_read_) + " has nnz above vocab size" + r.at());
  }
  std::vector<char> buf(static_cast<std::size_t>(nnz) * 8);
  r.raw(buf.data(), buf.size(), "record entries");
  std::vector<TermId> terms(nnz);
  std::vector<Weight> weights(nnz);
  for (std::uint32_t i = 0; i < nnz; ++i) {
    std::uint32_t t;
    float w;
    std::memcpy(&t, buf.data() + 8 * i, 4);
    std::memcpy(&w, buf.data() + 8 * i + 4, 4);
    terms[i] = detail::byteswap_if_big(t);
    weights[i] = detail::byteswap_if_big(w);
  }
  offset_ = r.offset();
  try {
    VectorRecord rec{std::move(id), SparseVector(vocab_size_, std::move(terms), std::move(weights))};
    ++records_read_;
    return rec;
  } catch (const Error& e) {
    fail(ErrorKind::kValidation, name_ + ": record " + std::to_string(records_read_) + " at byte offset " +
                                     std::to_string(record_offset) + ": " + e.what());
  }
}

std::optional<VectorRecord> VectorReader::next_jsonl() {
  std::string line;
  while (std::getline(*in_, line)) {
    ++line_no_;
    if (blank(line)) continue;
    const auto where = at_line(name_, line_no_);
    std::size_t nested = 0;
    const json j = parse_line(line, where, &nested);
    if (!j.contains("id") || !j["id"].is_string()) fail(ErrorKind::kFormat, where + "missing string field 'id'");
    if (!j.contains("vector") || !j["vector"].is_object()) {
      fail(ErrorKind::kFormat, where + "missing object field 'vector'");
    }
    if (nested != nested_object_keys(j)) fail(ErrorKind::kValidation, where + "duplicate term id");

    std::vector<SparseVector::Entry> entries;
    entries.reserve(j["vector"].size());
    for (const auto& [key, value] : j["vector"].items()) {
      std::uint64_t term = 0;
      const auto* end = key.data() + key.size();
      const auto [ptr, ec] = std::from_chars(key.data(), end, term);
      if (key.empty() || ec != std::errc() || ptr != end || term >= vocab_size_) {
        fail(ErrorKind::kValidation, where + "bad term id '" + key + "'");
      }
      if (!value.is_number()) fail(ErrorKind::kValidation, where + "weight for term " + key + " is not a number");
      const double w = value.get<double>();
      const float wf = static_cast<float>(w);
      if (!(w >= 0.0) || !std::isfinite(wf)) {
        fail(ErrorKind::kValidation, where + "invalid weight " + value.dump() + " for term " + key);
      }
      entries.push_back({static_cast<TermId>(term), wf});
    }
    try {
      return VectorRecord{j["id"].get<std::string>(), SparseVector::from_entries(vocab_size_, std::move(entries))};
    } catch (const Error& e) {
      fail(ErrorKind::kValidation, where + e.what());
    }
  }
  if (in_->bad()) fail(ErrorKind::kIo, name_ + ": read error");
  return std::nullopt;
}

std::string to_jsonl(const std::string& id, SparseView vec) {
  std::string out = "{\"id\":" + json(id).dump() + ",\"vector\":{";
  char buf[64];
  for (std::size_t i = 0; i < vec.nnz(); ++i) {
    if (i > 0) out += ',';
    out += '"';
    out += std::to_string(vec.terms[i]);
    out += "\":";
    const auto res = std::to_chars(buf, buf + sizeof buf, static_cast<double>(vec.weights[i]));
    out.append(buf, res.ptr);
  }
  out += "}}";
  return out;
}

VectorWriter::VectorWriter(const std::filesystem::path& path, VectorFormat format, std::uint32_t vocab_size)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path), format_(format), vocab_size_(vocab_size) {
  if (!out_) fail(ErrorKind::kIo, "cannot open '" + path.string() + "' for writing");
  require(vocab_size > 0, "vocab size must be positive");
  if (format_ == VectorFormat::kSpv1) {
    detail::BinaryWriter w(out_);
    w.bytes("SPV1");
    w.put<std::uint32_t>(kSpv1Version);
    w.put<std::uint32_t>(vocab_size_);
    w.put<std::uint64_t>(0);
  }
}

VectorWriter::~VectorWriter() {
  try {
    close();
  } catch (...) {
  }
}

void VectorWriter::write(const std::string& id, SparseView vec) {
  require(!closed_, "writer already closed");
  require(vec.vocab_size == vocab_size_, "vector vocab size does not match the file");
  if (format_ == VectorFormat::kJsonl) {
    out_ << to_jsonl(id, vec) << '\n';
  } else {
    detail::BinaryWriter w(out_);
    w.string(id);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(vec.nnz()));
    for (std::size_t i = 0; i < vec.nnz(); ++i) {
      w.put<std::uint32_t>(vec.terms[i]);
      w.put<float>(vec.weights[i]);
    }
  }
  ++count_;
  if (!out_) fail(ErrorKind::kIo, "write failed on '" + path_.string() + "'");
}

void VectorWriter::close() {
  if (closed_) return;
  closed_ = true;
  if (format_ == VectorFormat::kSpv1) {
    out_.seekp(12);
    detail::BinaryWriter w(out_);
    w.put<std::uint64_t>(count_);
  }
  out_.close();
  if (!out_) fail(ErrorKind::kIo, "failed writing '" + path_.string() + "'");
}

std::vector<VectorRecord> read_vectors(const std::filesystem::path& path, VectorFormat format,
                                       std::uint32_t vocab_size) {
  VectorReader reader(path, format, vocab_size);
  std::vector<VectorRecord> out;
  while (auto rec = reader.next()) out.push_back(std::move(*rec));
  return out;
}

std::vector<VectorRecord> read_vectors(const std::filesystem::path& path, std::uint32_t vocab_size) {
  return read_vectors(path, vector_format_for(path), vocab_size);
}

void write_vectors(const std::filesystem::path& path, VectorFormat format, std::uint32_t vocab_size,
                   std::span<const VectorRecord> records) {
  VectorWriter w(path, format, vocab_size);
  for (const auto& r : records) w.write(r.id, r.vec);
  w.close();
}

LogitReader::LogitReader(const std::filesystem::path& path, std::uint32_t expected_vocab)
    : in_(path, std::ios::binary), name_(path.string()) {
  if (!in_) fail(ErrorKind::kIo, "cannot open '" + name_ + "'");
  detail::BinaryReader r(in_, name_);
  char magic[4];
  r.raw(magic, 4, "magic");
  if (std::string_view(magic, 4) != "LGT1") fail(ErrorKind::kFormat, name_ + ": bad magic bytes (expected LGT1)");
  vocab_size_ = r.get<std::uint32_t>("vocab_size");
  if (vocab_size_ == 0) fail(ErrorKind::kFormat, name_ + ": vocab size is zero");
  if (expected_vocab != 0 && expected_vocab != vocab_size_) {
    fail(ErrorKind::kValidation, name_ + ": logit width " + std::to_string(vocab_size_) +
                                     " does not match declared vocab size " + std::to_string(expected_vocab));
  }
  offset_ = r.offset();
}

std::optional<std::pair<std::string, std::uint32_t>> LogitReader::next_header() {
  if (in_.peek() == std::char_traits<char>::eof()) return std::nullopt;
  detail::BinaryReader r(in_, name_, offset_);
  std::string id = r.string("record id");
  const auto rows = r.get<std::uint32_t>("n_rows");
  if (rows == 0) fail(ErrorKind::kFormat, name_ + ": record '" + id + "' has zero rows" + r.at());
  offset_ = r.offset();
  return std::make_pair(std::move(id), rows);
}

std::optional<std::pair<std::string, LogitMatrix>> LogitReader::next() {
  auto header = next_header();
  if (!header) return std::nullopt;
  std::vector<float> values(static_cast<std::size_t>(header->second) * vocab_size_);
  detail::BinaryReader r(in_, name_, offset_);
  r.array<float>(values, "logit rows");
  offset_ = r.offset();
  for (float z : values) {
    if (!std::isfinite(z)) fail(ErrorKind::kValidation, name_ + ": record '" + header->first + "' has a non-finite logit");
  }
  return std::make_pair(std::move(header->first), LogitMatrix(header->second, vocab_size_, std::move(values)));
}

std::optional<VectorRecord> LogitReader::next_aggregated() {
  auto header = next_header();
  if (!header) return std::nullopt;
  LogitAggregator agg(vocab_size_);
  std::vector<float> row(vocab_size_);
  for (std::uint32_t i = 0; i < header->second; ++i) {
    detail::BinaryReader r(in_, name_, offset_);
    r.array<float>(row, "logit row");
    offset_ = r.offset();
    try {
      agg.add_row(row);
    } catch (const Error& e) {
      fail(ErrorKind::kValidation, name_ + ": record '" + header->first + "': " + e.what());
    }
  }
  return VectorRecord{std::move(header->first), agg.finish()};
}

void write_logits(const std::filesystem::path& path, std::uint32_t vocab_size,
                  std::span<const std::pair<std::string, LogitMatrix>> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open '" + path.string() + "' for writing");
  detail::BinaryWriter w(out);
  w.bytes("LGT1");
  w.put<std::uint32_t>(vocab_size);
  for (const auto& [id, m] : records) {
    require(m.cols() == vocab_size, "logit matrix width does not match the file vocab size");
    w.string(id);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.rows()));
    for (float z : m.values()) w.put<float>(z);
  }
  out.close();
  if (!out) fail(ErrorKind::kIo, "failed writing '" + path.string() + "'");
}

std::uint32_t fnv1a32(std::string_view s) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : s) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

std::vector<TokenDoc> read_token_corpus(const std::filesystem::path& path, TokenFormat format) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open '" + path.string() + "'");
  std::vector<TokenDoc> docs;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto where = at_line(path.string(), line_no);
    TokenDoc doc;
    if (format == TokenFormat::kJsonl) {
      const json j = parse_line(line, where, nullptr);
      if (!j.contains("id") || !j["id"].is_string()) fail(ErrorKind::kFormat, where + "missing string field 'id'");
      if (!j.contains("tokens") || !j["tokens"].is_array()) fail(ErrorKind::kFormat, where + "missing array 'tokens'");
      doc.doc_id = j["id"].get<std::string>();
      for (const auto& t : j["tokens"]) {
        if (!t.is_number_unsigned() || t.get<std::uint64_t>() > 0xFFFFFFFFull) {
          fail(ErrorKind::kValidation, where + "token ids must be non-negative 32-bit integers");
        }
        doc.tokens.push_back(t.get<std::uint32_t>());
      }
    } else {
      const auto tab = line.find('\t');
      std::istringstream rest;
      if (tab != std::string::npos) {
        doc.doc_id = line.substr(0, tab);
        rest.str(line.substr(tab + 1));
      } else {
        std::istringstream ss(line);
        ss >> doc.doc_id;
        std::string remainder;
        std::getline(ss, remainder);
        rest.str(remainder);
      }
      std::string tok;
      while (rest >> tok) doc.tokens.push_back(fnv1a32(tok));
    }
    docs.push_back(std::move(doc));
  }
  if (in.bad()) fail(ErrorKind::kIo, "read error on '" + path.string() + "'");
  return docs;
}

void write_token_corpus(const std::filesystem::path& path, std::span<const TokenDoc> docs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open '" + path.string() + "' for writing");
  for (const auto& d : docs) {
    out << "{\"id\":" << json(d.doc_id).dump() << ",\"tokens\":[";
    for (std::size_t i = 0; i < d.tokens.size(); ++i) out << (i ? "," : "") << d.tokens[i];
    out << "]}\n";
  }
  out.close();
  if (!out) fail(ErrorKind::kIo, "failed writing '" + path.string() + "'");
}

std::vector<TeacherRecord> read_teacher_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open '" + path.string() + "'");
  std::vector<TeacherRecord> out;
  std::string line;
  std::uint64_t line_no = 0;
  auto numbers = [](const json& arr, const std::string& where, const char* field) {
    if (!arr.is_array()) fail(ErrorKind::kFormat, where + "'" + field + "' must be an array");
    std::vector<double> v;
    for (const auto& x : arr) {
      if (!x.is_number()) fail(ErrorKind::kValidation, where + "'" + field + "' must contain numbers");
      v.push_back(x.get<double>());
    }
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto where = at_line(path.string(), line_no);
    const json j = parse_line(line, where, nullptr);
    TeacherRecord rec;
    if (!j.contains("qid") || !j["qid"].is_string()) fail(ErrorKind::kFormat, where + "missing string field 'qid'");
    rec.qid = j["qid"].get<std::string>();
    if (!j.contains("docids") || !j["docids"].is_array()) fail(ErrorKind::kFormat, where + "missing array 'docids'");
    for (const auto& d : j["docids"]) {
      if (!d.is_string()) fail(ErrorKind::kFormat, where + "'docids' must contain strings");
      rec.docids.push_back(d.get<std::string>());
    }
    if (!j.contains("teacher")) fail(ErrorKind::kFormat, where + "missing array 'teacher'");
    rec.teacher = numbers(j["teacher"], where, "teacher");
    if (j.contains("student_init") && !j["student_init"].is_null()) {
      rec.student_init = numbers(j["student_init"], where, "student_init");
    }
    if (rec.teacher.size() != rec.docids.size() || (rec.student_init && rec.student_init->size() != rec.docids.size())) {
      fail(ErrorKind::kValidation, where + "score arrays must match the number of docids");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace lsr
