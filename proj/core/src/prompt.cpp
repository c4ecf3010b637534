#include "iclmia/prompt.hpp"

#include <cmath>

namespace iclmia {

PromptTemplate PromptTemplate::compact() {
  return PromptTemplate{"", "text:", "question:", "answer:", ""};
}

PromptTemplate PromptTemplate::appendix() {
  return PromptTemplate{"",
                        "Read the text: \n",
                        "Answer the question with at most 10 words: \n",
                        "Do not provide a Yes/No answer: \n",
                        "\n"};
}

PromptTemplate PromptTemplate::preset(const std::string& name) {
  if (name == "compact") return compact();
  if (name == "appendix") return appendix();
  throw Error("unknown template preset: " + name);
}

std::string word_prefix(const std::string& text, std::size_t i) {
  auto words = split_words(text);
  if (i < 1 || i > words.size())
    throw IndexOutOfRange("word_prefix: index " + std::to_string(i) + " out of range [1, " +
                          std::to_string(words.size()) + "]");
  words.resize(i);
  return join_words(words);
}

PrefixPlan::PrefixPlan(std::size_t n, double fraction, bool include_full)
    : n_(n), include_full_(include_full) {
  if (n < 1) throw Error("PrefixPlan: n must be >= 1");
  if (!(fraction > 0.0) || fraction > 1.0) throw Error("PrefixPlan: fraction must be in (0, 1]");
  auto count = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  if (count < 1) count = 1;
  if (count > n) count = n;
  indices_.reserve(count);
  for (std::size_t i = 1; i <= count; ++i) indices_.push_back(i);
}

std::vector<std::size_t> PrefixPlan::effective_indices() const {
  std::vector<std::size_t> out = indices_;
  if (include_full_ && (out.empty() || out.back() != n_)) out.push_back(n_);
  return out;
}

FormattedQuery format_query(const PromptTemplate& tmpl, const std::string& text,
                            const std::optional<std::string>& question) {
  if (text.empty()) throw Error("format_query: text must be non-empty");
  FormattedQuery q;
  q.source_text = text;
  q.source_question = question;
  if (question) {
    q.rendered = tmpl.text_marker + text + tmpl.joiner + tmpl.question_marker + *question +
                 tmpl.joiner + tmpl.answer_marker;
  } else {
    q.rendered = tmpl.text_marker + text;
  }
  return q;
}

std::string build_prompt(const std::vector<DqaRecord>& demos, const FormattedQuery& formatted,
                         const PromptTemplate& tmpl) {
  std::string prompt = tmpl.instruction;
  for (const auto& demo : demos) {
    prompt += tmpl.text_marker + demo.text + tmpl.joiner + tmpl.question_marker + demo.question +
              tmpl.joiner + tmpl.answer_marker + demo.answer + tmpl.joiner;
  }
  prompt += formatted.rendered;
  return prompt;
}

}  // namespace iclmia
