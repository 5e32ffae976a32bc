#pragma once

#include <array>
#include <cstddef>

#include "autoaug/policy.hpp"
#include "autoaug/rng.hpp"

namespace autoaug {

/// Sub-policies per policy during search.
inline constexpr std::size_t kSearchSubPolicies = 5;
/// Controller decisions per policy: (kind, probability, magnitude) x 2 ops x 5 sub-policies.
inline constexpr std::size_t kTokensPerPolicy = kSearchSubPolicies * 2 * 3;

/// Decision slot of a token position. The layout repeats with period 3.
enum class TokenSlot { kind = 0, probability = 1, magnitude = 2 };

constexpr TokenSlot slot_of(std::size_t position) { return static_cast<TokenSlot>(position % 3); }

constexpr int vocab_size(TokenSlot slot) {
  switch (slot) {
    case TokenSlot::kind: return kNumOpKinds;
    case TokenSlot::probability: return kProbLevels;
    case TokenSlot::magnitude: return kMagLevels;
  }
  return 0;
}

constexpr int vocab_size(std::size_t position) { return vocab_size(slot_of(position)); }

using TokenSequence = std::array<int, kTokensPerPolicy>;

/// Throws DecodeError if any token is outside its position's vocabulary.
void validate_tokens(const TokenSequence& tokens);

/// Five-sub-policy policy from 30 tokens. Throws DecodeError on invalid tokens.
Policy decode_tokens(const TokenSequence& tokens);
/// Overload for untrusted input of arbitrary length.
Policy decode_tokens(std::span<const int> tokens);

/// Inverse of decode_tokens. Throws ArgumentError unless the policy has exactly 5 sub-policies.
TokenSequence encode_policy(const Policy& p);

/// Resamples one uniformly chosen position uniformly over its vocabulary.
TokenSequence mutate(const TokenSequence& tokens, RngStream& rng);

/// Uniform sample over the whole token space.
TokenSequence random_tokens(RngStream& rng);

}  // namespace autoaug
