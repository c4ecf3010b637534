#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "iclmia/common.hpp"

namespace iclmia {

// One <text, question, answer> triplet, optionally with an adversary-side
// paraphrase of the text.
struct DqaRecord {
  std::string id;
  std::string text;
  std::string question;
  std::string answer;
  std::optional<std::string> paraphrased_text;
};

enum class CorpusRole { demonstration, query };

struct CorpusSet {
  std::vector<DqaRecord> records;
  CorpusRole role = CorpusRole::demonstration;

  std::size_t size() const { return records.size(); }
};

struct SplitSpec {
  std::size_t query_size = 0;
  std::uint64_t seed = 0;
  std::size_t max_words = 500;
};

struct MalformedLine : Error {
  explicit MalformedLine(std::size_t line)
      : Error("malformed JSONL line " + std::to_string(line)), line_number(line) {}
  std::size_t line_number;
};

struct DuplicateId : Error {
  explicit DuplicateId(const std::string& id) : Error("duplicate record id: " + id) {}
};

struct EmptyField : Error {
  EmptyField(const std::string& id, const std::string& field)
      : Error("record " + id + ": empty or missing field '" + field + "'") {}
};

struct UnknownKey : Error {
  UnknownKey(std::size_t line, const std::string& key)
      : Error("line " + std::to_string(line) + ": unknown key '" + key + "'") {}
};

struct QuerySizeTooLarge : Error {
  using Error::Error;
};

// Reads a JSONL dataset. Strings are trimmed; duplicate ids and empty
// required fields are rejected. With strict=true unknown keys are errors,
// otherwise they are ignored.
CorpusSet load_jsonl(const std::filesystem::path& path, bool strict = false);

// Keeps exactly one record per distinct text, chosen uniformly by a seeded
// generator; output order is first-occurrence order of each text.
CorpusSet dedup_one_qa_per_text(const CorpusSet& set, std::uint64_t seed);

// Retains records whose text has fewer than max_words words.
CorpusSet filter_by_length(const CorpusSet& set, std::size_t max_words);

struct CorpusSplit {
  CorpusSet demonstrations;
  CorpusSet queries;
};

// Disjoint partition with |queries| = spec.query_size, assignment decided by
// a seeded shuffle; both halves keep input relative order.
CorpusSplit split(const CorpusSet& set, const SplitSpec& spec);

}  // namespace iclmia
