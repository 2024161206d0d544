// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include "synth/toy_scorer.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "synth/error.h"

namespace synth {

NgramScorer::NgramScorer(Vocabulary vocab, ToyScorerOptions options)
    : vocab_(std::move(vocab)), options_(std::move(options)) {
  if (options_.order < 1 || options_.order > 3) throw DomainError("n-gram order must be 1, 2 or 3");
  if (!(options_.smoothing > 0.0)) throw DomainError("smoothing must be positive");
  if (options_.sentiment_buckets == 0) throw DomainError("need at least one sentiment bucket");
  if (options_.separator.empty()) throw DomainError("separator must be non-empty");
  per_bucket_.resize(options_.sentiment_buckets);
}

NgramScorer::History NgramScorer::history_of(std::span<const TokenId> prefix) const {
  // Start-of-sequence padding uses vocab_.size(), which no real token has.
  const std::size_t n = static_cast<std::size_t>(options_.order - 1);
  History h(n, vocab_.size());
  const std::size_t take = std::min(n, prefix.size());
  std::copy(prefix.end() - static_cast<std::ptrdiff_t>(take), prefix.end(),
            h.end() - static_cast<std::ptrdiff_t>(take));
  return h;
}

void NgramScorer::add(Counts& counts, const History& h, TokenId next) {
  auto [it, inserted] = counts.next.try_emplace(h);
  if (inserted) it->second.assign(vocab_.size() + 1, 0.0);  // last slot holds the total
  it->second[next] += 1.0;
  it->second.back() += 1.0;
}

void NgramScorer::observe(std::size_t bucket, std::span<const TokenId> summary) {
  if (bucket >= per_bucket_.size()) throw DomainError("bucket out of range");
  std::vector<TokenId> seq(summary.begin(), summary.end());
  seq.push_back(vocab_.eos());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const History h = history_of(std::span<const TokenId>(seq).first(i));
    add(per_bucket_[bucket], h, seq[i]);
    add(pooled_, h, seq[i]);
  }
}

std::size_t NgramScorer::bucket_of(std::string_view conditioning) const {
  double sum = 0.0;
  std::size_t n = 0;
  std::size_t pos = 0;
  while (pos <= conditioning.size()) {
    const std::size_t next = conditioning.find(options_.separator, pos);
    const std::string_view segment =
        conditioning.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
    if (!whitespace_tokens(segment).empty()) {
      sum += lexicon_.measure(segment).value();
      ++n;
    }
    if (next == std::string_view::npos) break;
    pos = next + options_.separator.size();
  }
  const double mean = n ? sum / static_cast<double>(n) : 0.5;
  const auto buckets = options_.sentiment_buckets;
  return std::min(buckets - 1, static_cast<std::size_t>(mean * static_cast<double>(buckets)));
}

std::vector<double> NgramScorer::score(std::span<const TokenId> prefix,
                                       std::string_view conditioning) const {
  const History h = history_of(prefix);
  const Counts& bucket = per_bucket_[bucket_of(conditioning)];
  const std::vector<double>* counts = nullptr;
  if (auto it = bucket.next.find(h); it != bucket.next.end()) {
    counts = &it->second;
  } else if (auto jt = pooled_.next.find(h); jt != pooled_.next.end()) {
    counts = &jt->second;
  }
  const double k = options_.smoothing;
  const double v = static_cast<double>(vocab_.size());
  std::vector<double> out(vocab_.size());
  const double total = counts ? counts->back() : 0.0;
  const double log_den = std::log(total + k * v);
  for (TokenId t = 0; t < vocab_.size(); ++t) {
    const double c = counts ? (*counts)[t] : 0.0;
    out[t] = std::log(c + k) - log_den;
  }
  return out;
}

std::shared_ptr<const NgramScorer> train_toy_scorer(const Corpus& corpus, int order,
                                                    double smoothing, ToyScorerOptions options) {
  if (corpus.instances.empty()) throw DomainError("cannot train a scorer on an empty corpus");
  options.order = order;
  options.smoothing = smoothing;

  std::set<std::string> words;
  for (const Instance& inst : corpus.instances)
    for (std::string& tok : whitespace_tokens(inst.reference_summary))
      if (tok != kEndOfSequence) words.insert(std::move(tok));

  auto scorer = std::make_shared<NgramScorer>(
      Vocabulary(std::vector<std::string>(words.begin(), words.end())), options);
  const LinearizeOptions lin{options.separator, std::nullopt};
  for (const Instance& inst : corpus.instances) {
    std::vector<TokenId> ids;
    for (const std::string& tok : whitespace_tokens(inst.reference_summary))
      if (auto id = scorer->vocabulary().find(tok); id && *id != scorer->vocabulary().eos())
        ids.push_back(*id);
    scorer->observe(scorer->bucket_of(linearize(inst, lin).text), ids);
  }
  return scorer;
}

}  // namespace synth
