// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "synth/measure.h"

namespace synth {

using TokenId = std::size_t;

inline constexpr std::string_view kEndOfSequence = "</s>";

/// Ordered token list. Token ids are positions; the end-of-sequence token is
/// always present.
class Vocabulary {
 public:
  /// Appends kEndOfSequence unless `tokens` already contains it.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  TokenId eos() const { return eos_; }
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  std::optional<TokenId> find(std::string_view token) const;

  /// Non-EOS tokens joined by single spaces.
  std::string detokenize(std::span<const TokenId> ids) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  TokenId eos_ = 0;
};

/// Next-token model. `score` returns one natural-log probability per
/// vocabulary entry; they must exponentiate and sum to 1. Implementations
/// must be deterministic and safe to call from concurrent decodes.
class TokenScorer {
 public:
  virtual ~TokenScorer() = default;
  virtual const Vocabulary& vocabulary() const = 0;
  virtual std::vector<double> score(std::span<const TokenId> prefix,
                                    std::string_view conditioning) const = 0;
};

/// Calls the scorer and enforces the normalization contract (1 +/- 1e-6);
/// throws ContractError otherwise.
std::vector<double> checked_scores(const TokenScorer& scorer, std::span<const TokenId> prefix,
                                   std::string_view conditioning);

/// Sum of per-step log-probabilities of `tokens`, scored one prefix at a time.
double rescore(const TokenScorer& scorer, std::span<const TokenId> tokens,
               std::string_view conditioning);

struct Hypothesis {
  std::vector<TokenId> tokens;
  double log_prob = 0.0;
  bool finished = false;  // last token is end-of-sequence
};

enum class DecodeMode { kBeam, kDiverseBeam, kConstrainedBeam };

std::string_view to_string(DecodeMode mode);
DecodeMode parse_decode_mode(std::string_view name);

struct DecodeConfig {
  DecodeMode mode = DecodeMode::kBeam;
  std::size_t beam_width = 5;
  std::size_t groups = 5;
  std::size_t beams_per_group = 1;
  double diversity_lambda = 0.5;
  std::size_t max_tokens = 64;  // hypotheses stop at this many tokens
  std::optional<double> epsilon;
  bool length_normalize = false;
  bool record_trace = false;
};

/// Throws ConfigError when the mode's required fields are missing or invalid.
void validate(const DecodeConfig& config);

struct Candidate {
  std::string text;
  std::optional<double> log_prob;  // absent when the backend does not report it
  std::optional<Measurement> measurement;
  std::vector<TokenId> tokens;
  std::size_t group = 0;
  bool finished = false;
};

struct DecodeEvent {
  std::size_t step = 0;
  std::string message;
};

/// Per-step record of constrained decoding, for replaying the pruning rule.
struct ConstraintTrace {
  std::size_t step = 0;
  bool suspended = false;
  std::size_t expansions = 0;
  std::size_t satisfying = 0;
  std::vector<std::pair<std::string, double>> kept;  // prefix text, measured value
};

struct CandidateSet {
  std::vector<Candidate> candidates;
  std::string source_instance;
  std::vector<DecodeEvent> events;
  std::vector<ConstraintTrace> trace;

  bool log_probs_known() const;
};

/// Standard beam search. Returns up to beam_width complete hypotheses sorted
/// by log-probability, ties broken by lexicographic token-id order.
CandidateSet beam_search(const TokenScorer& scorer, std::string_view conditioning,
                         const DecodeConfig& config);

/// Grouped beam search with a Hamming diversity penalty: group g pays
/// lambda for every earlier group that chose the same token at the same
/// step. Penalized scores drive selection; reported log_probs are raw.
/// Output is group-major, each group's beams best first.
CandidateSet diverse_beam_search(const TokenScorer& scorer, std::string_view conditioning,
                                 const DecodeConfig& config);

/// Beam search that drops expansions whose prefix measures outside
/// |g(prefix) - target| < epsilon. A step where nothing survives runs
/// unconstrained and is recorded as an event.
CandidateSet constrained_beam_search(const TokenScorer& scorer, std::string_view conditioning,
                                     const DecodeConfig& config, const Measurer& measurer,
                                     double target);

}  // namespace synth
