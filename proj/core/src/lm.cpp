#include "iclmia/lm.hpp"

namespace iclmia {

double sum_logprobs(const std::vector<TokenLogprob>& tokens) {
  double sum = 0.0;
  for (const auto& t : tokens) sum += t.logprob;
  return sum;
}

}  // namespace iclmia
