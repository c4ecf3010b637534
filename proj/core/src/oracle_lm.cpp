#include "iclmia/oracle_lm.hpp"

#include <algorithm>
#include <cmath>

namespace iclmia {

namespace {

constexpr std::uint64_t kKindNextWord = 1;
constexpr std::uint64_t kKindAnswer = 2;
constexpr std::uint64_t kDecoySalt = 0xdec0dec0dec0dec0ULL;

double log_residual(double q) { return std::log(std::max(1.0 - q, 1e-12)); }

std::string truncate_words(const std::string& text, std::size_t max_words) {
  auto words = split_words(text);
  if (words.size() > max_words) words.resize(max_words);
  return join_words(words);
}

// Deterministic junk word for a next-word miss; disjoint from corpus words.
std::string decoy_word(std::uint64_t stream_seed, std::uint64_t position) {
  std::uint64_t state = mix_seed({stream_seed, position, kDecoySalt});
  std::uint64_t bits = splitmix64(state);
  char buf[20];
  std::snprintf(buf, sizeof(buf), "zz%016llx", static_cast<unsigned long long>(bits));
  return buf;
}

}  // namespace

OracleLm::OracleLm(OracleLmConfig config, CorpusSet corpus) : config_(std::move(config)) {
  if (!(config_.nonmember_hit_prob < config_.member_hit_prob))
    throw Error("oracle: nonmember_hit_prob must be < member_hit_prob");
  if (config_.info_position < 0.0 || config_.info_position > 1.0)
    throw Error("oracle: info_position must be in [0, 1]");
  entries_.reserve(corpus.records.size());
  for (auto& rec : corpus.records) {
    Entry e;
    e.original.words = split_words(rec.text);
    e.original.normalized = join_words(e.original.words);
    if (rec.paraphrased_text && !rec.paraphrased_text->empty()) {
      TextVariant v;
      v.words = split_words(*rec.paraphrased_text);
      v.normalized = join_words(v.words);
      e.paraphrase = std::move(v);
    }
    e.normalized_answer = normalize_words(rec.answer);
    e.id_hash = fnv1a64(rec.id);
    e.record = std::move(rec);
    entries_.push_back(std::move(e));
  }
}

double OracleLm::hit_prob(bool member) const {
  return member ? config_.member_hit_prob : config_.nonmember_hit_prob;
}

OracleLm::Parsed OracleLm::parse(const std::string& prompt) const {
  const auto& tmpl = config_.prompt_template;
  std::vector<std::size_t> starts;
  for (std::size_t pos = prompt.find(tmpl.text_marker); pos != std::string::npos;
       pos = prompt.find(tmpl.text_marker, pos + 1)) {
    starts.push_back(pos);
  }
  if (starts.empty()) throw UnparseablePrompt("prompt contains no text marker");

  Parsed parsed;
  for (std::size_t b = 0; b < starts.size(); ++b) {
    std::size_t body_begin = starts[b] + tmpl.text_marker.size();
    std::size_t body_end = (b + 1 < starts.size()) ? starts[b + 1] : prompt.size();
    std::string body = prompt.substr(body_begin, body_end - body_begin);

    Block block;
    std::size_t qpos = body.find(tmpl.question_marker);
    if (qpos == std::string::npos) {
      block.text = body;
    } else {
      block.text = body.substr(0, qpos);
      std::size_t qbegin = qpos + tmpl.question_marker.size();
      std::size_t apos = body.find(tmpl.answer_marker, qbegin);
      if (apos == std::string::npos)
        throw UnparseablePrompt("question segment without answer marker");
      block.question = body.substr(qbegin, apos - qbegin);
      block.answer = body.substr(apos + tmpl.answer_marker.size());
    }

    bool is_last = (b + 1 == starts.size());
    if (is_last) {
      parsed.query = std::move(block);
    } else {
      if (!block.question || normalize_words(block.answer).empty())
        throw UnparseablePrompt("demonstration block lacks a question or answer");
      parsed.demos.push_back(std::move(block));
    }
  }
  return parsed;
}

OracleLm::Resolution OracleLm::resolve(const Parsed& parsed) const {
  auto query_words = split_words(parsed.query.text);
  if (query_words.empty()) throw UnparseablePrompt("query text is empty");

  auto matches_prefix = [&](const TextVariant& v) {
    if (v.words.size() < query_words.size()) return false;
    return std::equal(query_words.begin(), query_words.end(), v.words.begin());
  };

  Resolution res{};
  res.prefix_words = query_words.size();
  // Prefer an exact full-text match, then the first prefix match in corpus order.
  for (bool require_full : {true, false}) {
    for (const auto& entry : entries_) {
      for (const TextVariant* v :
           {&entry.original, entry.paraphrase ? &*entry.paraphrase : nullptr}) {
        if (!v || !matches_prefix(*v)) continue;
        if (require_full && v->words.size() != query_words.size()) continue;
        res.entry = &entry;
        res.variant = v;
        break;
      }
      if (res.entry) break;
    }
    if (res.entry) break;
  }
  if (res.entry == nullptr) throw UnknownRecord("query text matches no corpus record");

  std::string norm_query = join_words(query_words);
  auto text_matches_record = [&](const std::string& normalized_demo_text) {
    if (normalized_demo_text == res.entry->original.normalized) return true;
    return res.entry->paraphrase && normalized_demo_text == res.entry->paraphrase->normalized;
  };

  for (const auto& demo : parsed.demos) {
    std::string norm_text = normalize_words(demo.text);
    if (!text_matches_record(norm_text)) continue;
    std::string norm_answer = normalize_words(demo.answer);
    if (norm_answer == res.entry->normalized_answer) {
      res.member_demo = true;
    } else {
      ++res.brainwash_copies;
      if (res.dummy_answer.empty()) res.dummy_answer = trim(demo.answer);
    }
  }
  return res;
}

GenerationResult OracleLm::generate(const GenerationRequest& request) {
  if (request.max_output_tokens < 1) throw Error("oracle: max_output_tokens must be >= 1");
  Parsed parsed = parse(request.prompt);
  Resolution res = resolve(parsed);
  const Entry& entry = *res.entry;
  double q = hit_prob(res.member_demo);

  GenerationResult result;
  std::vector<TokenLogprob> logprobs;
  double emitted_logprob = 0.0;  // per-word logprob attached to emitted words

  if (res.brainwash_copies >= 1) {
    // Brainwash: non-members flip at the configured iteration, members one later.
    bool flipped = false;
    if (config_.brainwash_break_iteration) {
      std::size_t break_at = *config_.brainwash_break_iteration + (res.member_demo ? 1 : 0);
      flipped = res.brainwash_copies >= break_at;
    }
    result.text =
        truncate_words(flipped ? res.dummy_answer : entry.record.answer, request.max_output_tokens);
    emitted_logprob = std::log(std::max(q, 1e-12));
  } else if (parsed.query.question) {
    // Answer generation: truth when a member demo is present or the prefix
    // covers the info region, refusal otherwise.
    double fraction =
        static_cast<double>(res.prefix_words) / static_cast<double>(res.variant->words.size());
    bool answerable = res.member_demo || fraction >= config_.info_position;
    result.text = truncate_words(answerable ? entry.record.answer : config_.refusal_text,
                                 request.max_output_tokens);
    emitted_logprob = answerable ? std::log(std::max(q, 1e-12)) : log_residual(q);
  } else {
    // Next-word prediction: continue the matched text word by word.
    std::size_t i = res.prefix_words;
    std::size_t remaining = res.variant->words.size() - i;
    std::size_t count = std::min(request.max_output_tokens, remaining);
    std::uint64_t stream = mix_seed({config_.seed, entry.id_hash, kKindNextWord, i});
    std::vector<std::string> out;
    out.reserve(count);
    for (std::size_t j = 1; j <= count; ++j) {
      bool hit = uniform01(stream, j) < q;
      if (hit) {
        out.push_back(res.variant->words[i + j - 1]);
        if (request.want_token_logprobs)
          logprobs.push_back({out.back(), std::log(std::max(q, 1e-12))});
      } else {
        out.push_back(decoy_word(stream, j));
        if (request.want_token_logprobs) logprobs.push_back({out.back(), log_residual(q)});
      }
    }
    result.text = join_words(out);
    if (request.want_token_logprobs) result.token_logprobs = std::move(logprobs);
    if (request.want_logits) result.logits = LogitMatrix{config_.vocab_size, {}};
    return result;
  }

  auto emitted_words = split_words(result.text);
  if (request.want_token_logprobs) {
    for (const auto& w : emitted_words) logprobs.push_back({w, emitted_logprob});
    result.token_logprobs = std::move(logprobs);
  }
  if (request.want_logits) {
    LogitMatrix logits;
    logits.vocab_size = config_.vocab_size;
    logits.rows.reserve(emitted_words.size());
    for (const auto& w : emitted_words) {
      std::vector<double> row(config_.vocab_size, -8.0);
      row[fnv1a64(w) % config_.vocab_size] = emitted_logprob;
      logits.rows.push_back(std::move(row));
    }
    result.logits = std::move(logits);
  }
  return result;
}

std::vector<TokenLogprob> OracleLm::score_continuation(const std::string& prompt,
                                                       const std::string& continuation) {
  auto words = split_words(continuation);
  if (words.empty()) return {};

  Parsed parsed = parse(prompt);
  Resolution res = resolve(parsed);
  double q = hit_prob(res.member_demo);

  std::vector<TokenLogprob> out;
  out.reserve(words.size());
  if (parsed.query.question) {
    // Scores against the record's answer; answer generation is deterministic,
    // so the conditional probability of a matching word is the hit probability.
    auto answer_words = split_words(res.entry->record.answer);
    for (std::size_t j = 0; j < words.size(); ++j) {
      bool matches = j < answer_words.size() && words[j] == answer_words[j];
      out.push_back({words[j], matches ? std::log(std::max(q, 1e-12)) : log_residual(q)});
    }
  } else {
    // Scores against the text continuation, replaying the same per-position
    // draws that generation uses, so scored logprobs and greedy predictions
    // stay consistent.
    std::size_t i = res.prefix_words;
    std::uint64_t stream = mix_seed({config_.seed, res.entry->id_hash, kKindNextWord, i});
    for (std::size_t j = 1; j <= words.size(); ++j) {
      std::size_t pos = i + j - 1;
      bool has_truth = pos < res.variant->words.size();
      bool hit = has_truth && uniform01(stream, j) < q;
      bool matches = has_truth && words[j - 1] == res.variant->words[pos];
      double lp = (matches && hit) ? std::log(std::max(q, 1e-12)) : log_residual(q);
      out.push_back({words[j - 1], lp});
    }
  }
  return out;
}

std::vector<std::size_t> OracleLm::token_ids(const std::string& text) const {
  std::vector<std::size_t> ids;
  for (const auto& w : split_words(text)) ids.push_back(fnv1a64(w) % config_.vocab_size);
  return ids;
}

}  // namespace iclmia
