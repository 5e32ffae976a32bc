#include "autoaug/codec.hpp"

#include <string>

#include "autoaug/errors.hpp"

namespace autoaug {

void validate_tokens(const TokenSequence& tokens) {
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (tokens[t] < 0 || tokens[t] >= vocab_size(t)) {
      throw DecodeError("token " + std::to_string(tokens[t]) + " at position " + std::to_string(t) +
                        " is outside vocabulary of size " + std::to_string(vocab_size(t)));
    }
  }
}

Policy decode_tokens(const TokenSequence& tokens) {
  validate_tokens(tokens);
  std::vector<SubPolicy> subs(kSearchSubPolicies);
  for (std::size_t s = 0; s < kSearchSubPolicies; ++s) {
    for (std::size_t o = 0; o < 2; ++o) {
      const std::size_t base = (s * 2 + o) * 3;
      subs[s].ops[o] = OperationSpec{op_from_index(tokens[base]), tokens[base + 1], tokens[base + 2]};
    }
  }
  return Policy(std::move(subs));
}

Policy decode_tokens(std::span<const int> tokens) {
  if (tokens.size() != kTokensPerPolicy) {
    throw DecodeError("expected " + std::to_string(kTokensPerPolicy) + " tokens, got " +
                      std::to_string(tokens.size()));
  }
  TokenSequence seq;
  std::copy(tokens.begin(), tokens.end(), seq.begin());
  return decode_tokens(seq);
}

TokenSequence encode_policy(const Policy& p) {
  if (p.size() != kSearchSubPolicies) {
    throw ArgumentError("encode_policy: expected 5 sub-policies, got " + std::to_string(p.size()));
  }
  TokenSequence tokens{};
  for (std::size_t s = 0; s < kSearchSubPolicies; ++s) {
    for (std::size_t o = 0; o < 2; ++o) {
      const std::size_t base = (s * 2 + o) * 3;
      const OperationSpec& op = p[s].ops[o];
      tokens[base] = static_cast<int>(op.kind);
      tokens[base + 1] = op.prob_index;
      tokens[base + 2] = op.mag_index;
    }
  }
  return tokens;
}

TokenSequence mutate(const TokenSequence& tokens, RngStream& rng) {
  validate_tokens(tokens);
  TokenSequence out = tokens;
  const auto pos = static_cast<std::size_t>(rng.uniform_int(kTokensPerPolicy));
  out[pos] = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(vocab_size(pos))));
  return out;
}

TokenSequence random_tokens(RngStream& rng) {
  TokenSequence out{};
  for (std::size_t t = 0; t < out.size(); ++t) {
    out[t] = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(vocab_size(t))));
  }
  return out;
}

}  // namespace autoaug
