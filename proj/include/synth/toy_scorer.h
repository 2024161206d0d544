// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "synth/corpus.h"
#include "synth/decode.h"
#include "synth/measure.h"

namespace synth {

struct ToyScorerOptions {
  int order = 2;
  double smoothing = 0.1;
  std::size_t sentiment_buckets = 5;
  std::string separator = "<doc>";
};

/// Count-based n-gram model over whitespace tokens of reference summaries,
/// add-k smoothed, with counts kept per input-sentiment bucket. The bucket of
/// a conditioning string is the mean builtin-lexicon score of its
/// separator-delimited segments. Histories never seen in a bucket fall back
/// to the counts pooled over all buckets.
class NgramScorer final : public TokenScorer {
 public:
  NgramScorer(Vocabulary vocab, ToyScorerOptions options);

  const Vocabulary& vocabulary() const override { return vocab_; }
  std::vector<double> score(std::span<const TokenId> prefix,
                            std::string_view conditioning) const override;

  std::size_t bucket_of(std::string_view conditioning) const;
  const ToyScorerOptions& options() const { return options_; }

  /// Adds one training summary observed under the given bucket.
  void observe(std::size_t bucket, std::span<const TokenId> summary);

 private:
  using History = std::vector<TokenId>;
  struct Counts {
    std::map<History, std::vector<double>> next;  // history -> per-token counts
  };

  History history_of(std::span<const TokenId> prefix) const;
  void add(Counts& counts, const History& h, TokenId next);

  Vocabulary vocab_;
  ToyScorerOptions options_;
  LexiconMeasurer lexicon_;
  std::vector<Counts> per_bucket_;
  Counts pooled_;
};

/// Trains an NgramScorer on the reference summaries of `corpus`. The
/// vocabulary is the sorted set of summary tokens plus end-of-sequence.
std::shared_ptr<const NgramScorer> train_toy_scorer(const Corpus& corpus, int order,
                                                    double smoothing,
                                                    ToyScorerOptions options = {});

}  // namespace synth
