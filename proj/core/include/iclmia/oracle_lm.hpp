#pragma once

#include <optional>
#include <string>
#include <vector>

#include "iclmia/corpus.hpp"
#include "iclmia/lm.hpp"
#include "iclmia/prompt.hpp"

namespace iclmia {

struct UnparseablePrompt : Error {
  using Error::Error;
};

struct UnknownRecord : Error {
  using Error::Error;
};

// Parameters of the synthetic oracle LM. The oracle constructs the
// member/non-member behavioral gap the attacks are built to detect:
//   - next-word calls hit the true word with probability member_hit_prob
//     when a member demonstration is in the prompt, else nonmember_hit_prob;
//   - answer calls succeed when a member demonstration is present or the
//     prefix covers the info region (prefix fraction >= info_position),
//     and refuse otherwise;
//   - brainwash calls flip to the dummy answer at break_iteration for
//     non-members; members resist one extra iteration.
struct OracleLmConfig {
  double member_hit_prob = 0.9;
  double nonmember_hit_prob = 0.1;
  double info_position = 0.8;
  std::string refusal_text = "no information given in the text";
  std::uint64_t seed = 0;
  std::optional<std::size_t> brainwash_break_iteration;
  PromptTemplate prompt_template = PromptTemplate::compact();
  std::size_t vocab_size = 512;
};

class OracleLm final : public LmBackend {
 public:
  OracleLm(OracleLmConfig config, CorpusSet corpus);

  GenerationResult generate(const GenerationRequest& request) override;
  std::vector<TokenLogprob> score_continuation(const std::string& prompt,
                                               const std::string& continuation) override;
  std::vector<std::size_t> token_ids(const std::string& text) const override;

  const OracleLmConfig& config() const { return config_; }

 private:
  struct TextVariant {
    std::vector<std::string> words;
    std::string normalized;
  };
  struct Entry {
    DqaRecord record;
    TextVariant original;
    std::optional<TextVariant> paraphrase;
    std::string normalized_answer;
    std::uint64_t id_hash;
  };
  struct Block {
    std::string text;
    std::optional<std::string> question;
    std::string answer;
  };
  struct Parsed {
    std::vector<Block> demos;
    Block query;
  };
  struct Resolution {
    const Entry* entry;
    const TextVariant* variant;
    std::size_t prefix_words;  // i: words of the query text that matched
    bool member_demo;          // a true-answer copy of the record's text is a demo
    std::size_t brainwash_copies;
    std::string dummy_answer;
  };

  Parsed parse(const std::string& prompt) const;
  Resolution resolve(const Parsed& parsed) const;
  double hit_prob(bool member) const;

  OracleLmConfig config_;
  std::vector<Entry> entries_;
};

}  // namespace iclmia
