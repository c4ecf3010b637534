#pragma once

#include <optional>
#include <string>
#include <vector>

#include "iclmia/corpus.hpp"

namespace iclmia {

struct IndexOutOfRange : Error {
  using Error::Error;
};

struct PromptTemplate {
  std::string instruction;
  std::string text_marker;
  std::string question_marker;
  std::string answer_marker;
  std::string joiner;

  // "compact": markers 'text:' / 'question:' / 'answer:', empty joiner.
  static PromptTemplate compact();
  // Multi-line DQA template ("Read the text: " ...), newline joiner.
  static PromptTemplate appendix();
  // Preset lookup by name; throws on unknown names.
  static PromptTemplate preset(const std::string& name);
};

struct FormattedQuery {
  std::string rendered;
  std::string source_text;
  std::optional<std::string> source_question;
};

// First i whitespace words joined by single spaces.
std::string word_prefix(const std::string& text, std::size_t i);

// Prefix index plan: indices = {1..max(1, ceil(p*n))}; the reference attack
// additionally iterates the full-text index n when include_full is set.
class PrefixPlan {
 public:
  PrefixPlan(std::size_t n, double fraction, bool include_full);

  std::size_t n() const { return n_; }
  bool include_full() const { return include_full_; }
  const std::vector<std::size_t>& indices() const { return indices_; }

  // indices(), followed by n when include_full and n is not already present.
  std::vector<std::size_t> effective_indices() const;

 private:
  std::size_t n_;
  bool include_full_;
  std::vector<std::size_t> indices_;
};

// question present:  text_marker+text+joiner+question_marker+question+joiner+answer_marker
// question absent:   text_marker+text  (the bare-prefix form)
FormattedQuery format_query(const PromptTemplate& tmpl, const std::string& text,
                            const std::optional<std::string>& question);

// instruction, then each demo as text+question+answer in rank order, then
// the formatted query.
std::string build_prompt(const std::vector<DqaRecord>& demos, const FormattedQuery& formatted,
                         const PromptTemplate& tmpl);

}  // namespace iclmia
