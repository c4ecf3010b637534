#include "iclmia/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace iclmia {

namespace {

const std::unordered_set<std::string> kKnownKeys = {"id", "text", "question", "answer",
                                                    "paraphrased_text"};

std::string require_field(const nlohmann::json& obj, const char* key, const std::string& id) {
  if (!obj.contains(key) || !obj.at(key).is_string()) throw EmptyField(id, key);
  std::string value = trim(obj.at(key).get<std::string>());
  if (value.empty()) throw EmptyField(id, key);
  return value;
}

}  // namespace

CorpusSet load_jsonl(const std::filesystem::path& path, bool strict) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file: " + path.string());

  CorpusSet set;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw MalformedLine(line_number);
    }
    if (!obj.is_object()) throw MalformedLine(line_number);
    if (strict) {
      for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!kKnownKeys.contains(it.key())) throw UnknownKey(line_number, it.key());
      }
    }

    DqaRecord rec;
    rec.id = require_field(obj, "id", obj.value("id", std::string("<line ") +
                                                          std::to_string(line_number) + ">"));
    rec.text = require_field(obj, "text", rec.id);
    rec.question = require_field(obj, "question", rec.id);
    rec.answer = require_field(obj, "answer", rec.id);
    if (obj.contains("paraphrased_text")) {
      if (!obj.at("paraphrased_text").is_string()) throw EmptyField(rec.id, "paraphrased_text");
      rec.paraphrased_text = trim(obj.at("paraphrased_text").get<std::string>());
    }

    if (!seen_ids.insert(rec.id).second) throw DuplicateId(rec.id);
    set.records.push_back(std::move(rec));
  }
  return set;
}

CorpusSet dedup_one_qa_per_text(const CorpusSet& set, std::uint64_t seed) {
  // Group record positions by text in first-occurrence order.
  std::unordered_map<std::string, std::size_t> group_of;
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> group_order;
  for (std::size_t i = 0; i < set.records.size(); ++i) {
    const std::string& text = set.records[i].text;
    auto it = group_of.find(text);
    if (it == group_of.end()) {
      group_of.emplace(text, groups.size());
      groups.push_back({i});
    } else {
      groups[it->second].push_back(i);
    }
  }

  CorpusSet out;
  out.role = set.role;
  std::mt19937_64 rng(seed);
  for (const auto& group : groups) {
    std::size_t pick = 0;
    if (group.size() > 1) {
      std::uniform_int_distribution<std::size_t> dist(0, group.size() - 1);
      pick = dist(rng);
    } else {
      rng();  // keep the stream position independent of group sizes
    }
    out.records.push_back(set.records[group[pick]]);
  }
  return out;
}

CorpusSet filter_by_length(const CorpusSet& set, std::size_t max_words) {
  if (max_words < 1) throw Error("max_words must be >= 1");
  CorpusSet out;
  out.role = set.role;
  for (const auto& rec : set.records) {
    if (word_count(rec.text) < max_words) out.records.push_back(rec);
  }
  return out;
}

CorpusSplit split(const CorpusSet& set, const SplitSpec& spec) {
  if (spec.query_size >= set.records.size())
    throw QuerySizeTooLarge("query_size " + std::to_string(spec.query_size) +
                            " must be smaller than corpus size " +
                            std::to_string(set.records.size()));

  std::vector<std::size_t> order(set.records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<bool> is_query(set.records.size(), false);
  for (std::size_t i = 0; i < spec.query_size; ++i) is_query[order[i]] = true;

  CorpusSplit result;
  result.demonstrations.role = CorpusRole::demonstration;
  result.queries.role = CorpusRole::query;
  for (std::size_t i = 0; i < set.records.size(); ++i) {
    (is_query[i] ? result.queries : result.demonstrations).records.push_back(set.records[i]);
  }
  return result;
}

}  // namespace iclmia
