// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include "synth/decode.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "synth/error.h"

namespace synth {

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (std::find(tokens_.begin(), tokens_.end(), kEndOfSequence) == tokens_.end())
    tokens_.emplace_back(kEndOfSequence);
  for (TokenId i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], i).second)
      throw DomainError("duplicate vocabulary token '" + tokens_[i] + "'");
    if (tokens_[i] == kEndOfSequence) eos_ = i;
  }
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string Vocabulary::detokenize(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (id == eos_) continue;
    if (!out.empty()) out += ' ';
    out += token(id);
  }
  return out;
}

std::vector<double> checked_scores(const TokenScorer& scorer, std::span<const TokenId> prefix,
                                   std::string_view conditioning) {
  std::vector<double> scores = scorer.score(prefix, conditioning);
  if (scores.size() != scorer.vocabulary().size())
    throw ContractError("scorer returned " + std::to_string(scores.size()) +
                        " scores for a vocabulary of " + std::to_string(scorer.vocabulary().size()));
  double total = 0.0;
  for (double s : scores) {
    if (std::isnan(s) || s > 1e-9) throw ContractError("scorer returned an invalid log-probability");
    total += std::exp(s);
  }
  if (std::abs(total - 1.0) > 1e-6)
    throw ContractError("scorer log-probabilities sum to " + std::to_string(total) + " after exp");
  return scores;
}

double rescore(const TokenScorer& scorer, std::span<const TokenId> tokens,
               std::string_view conditioning) {
  double total = 0.0;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    total += checked_scores(scorer, tokens.first(i), conditioning).at(tokens[i]);
  return total;
}

std::string_view to_string(DecodeMode mode) {
  switch (mode) {
    case DecodeMode::kBeam: return "beam";
    case DecodeMode::kDiverseBeam: return "diverse_beam";
    case DecodeMode::kConstrainedBeam: return "constrained_beam";
  }
  return "beam";
}

DecodeMode parse_decode_mode(std::string_view name) {
  if (name == "beam") return DecodeMode::kBeam;
  if (name == "diverse_beam" || name == "diverse") return DecodeMode::kDiverseBeam;
  if (name == "constrained_beam" || name == "constrained") return DecodeMode::kConstrainedBeam;
  throw ConfigError("unknown decode mode '" + std::string(name) + "'");
}

void validate(const DecodeConfig& c) {
  if (c.max_tokens == 0) throw ConfigError("max_tokens must be positive");
  if (c.beam_width == 0) throw ConfigError("beam_width must be positive");
  if (c.mode == DecodeMode::kDiverseBeam) {
    if (c.groups == 0 || c.beams_per_group == 0)
      throw ConfigError("diverse beam search needs positive groups and beams_per_group");
    if (!(c.diversity_lambda >= 0.0)) throw ConfigError("diversity_lambda must be non-negative");
  }
  if (c.mode == DecodeMode::kConstrainedBeam) {
    if (!c.epsilon) throw ConfigError("constrained beam search requires epsilon");
    if (!(*c.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  }
}

bool CandidateSet::log_probs_known() const {
  return std::all_of(candidates.begin(), candidates.end(),
                     [](const Candidate& c) { return c.log_prob.has_value(); });
}

namespace {

struct Beam {
  std::vector<TokenId> tokens;
  double log_prob = 0.0;  // unpenalized
  double search = 0.0;    // penalized, drives selection
};

struct Expansion {
  std::size_t parent = 0;
  TokenId token = 0;
  double log_prob = 0.0;
  double search = 0.0;
};

struct Group {
  std::vector<Beam> active;
  std::vector<Beam> complete;
};

double rank_score(const Beam& b, bool length_normalize) {
  return length_normalize ? b.search / static_cast<double>(std::max<std::size_t>(1, b.tokens.size()))
                          : b.search;
}

// Higher score first, then lexicographically smaller token sequence.
bool better(double score_a, std::span<const TokenId> a, double score_b, std::span<const TokenId> b) {
  if (score_a != score_b) return score_a > score_b;
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

void sort_beams(std::vector<Beam>& beams, bool length_normalize) {
  std::sort(beams.begin(), beams.end(), [&](const Beam& x, const Beam& y) {
    return better(rank_score(x, length_normalize), x.tokens, rank_score(y, length_normalize), y.tokens);
  });
}

// Optional pruning predicate for constrained decoding.
struct Constraint {
  const Measurer* measurer = nullptr;
  double target = 0.0;
  double epsilon = 0.0;
  std::map<std::string, double> cache;

  std::optional<double> measure(const std::string& text) {
    if (text.empty()) return std::nullopt;
    auto it = cache.find(text);
    if (it != cache.end()) return it->second;
    const double v = measurer->measure(text).value();
    cache.emplace(text, v);
    return v;
  }
};

class GroupedSearch {
 public:
  GroupedSearch(const TokenScorer& scorer, std::string_view conditioning, const DecodeConfig& config,
                std::size_t groups, std::size_t width, double lambda, Constraint* constraint)
      : scorer_(scorer),
        vocab_(scorer.vocabulary()),
        conditioning_(conditioning),
        config_(config),
        width_(width),
        lambda_(lambda),
        constraint_(constraint),
        groups_(groups) {
    for (Group& g : groups_) g.active.push_back(Beam{});
  }

  CandidateSet run() {
    CandidateSet out;
    for (std::size_t step = 0; step < config_.max_tokens; ++step) {
      std::vector<std::size_t> chosen_at_step(vocab_.size(), 0);
      bool any_active = false;
      for (std::size_t g = 0; g < groups_.size(); ++g) {
        if (groups_[g].active.empty()) continue;
        advance(groups_[g], step, chosen_at_step, out);
        any_active = any_active || !groups_[g].active.empty();
      }
      if (!any_active) break;
    }

    for (std::size_t g = 0; g < groups_.size(); ++g) {
      std::vector<Beam>& done = groups_[g].complete;
      sort_beams(done, config_.length_normalize);
      for (std::size_t i = 0; i < done.size() && i < width_; ++i) {
        Candidate c;
        c.tokens = done[i].tokens;
        c.text = vocab_.detokenize(c.tokens);
        c.log_prob = done[i].log_prob;
        c.group = g;
        c.finished = !c.tokens.empty() && c.tokens.back() == vocab_.eos();
        out.candidates.push_back(std::move(c));
      }
    }
    if (out.candidates.empty()) throw ContractError("decoder produced no complete hypotheses");
    return out;
  }

 private:
  void advance(Group& group, std::size_t step, std::vector<std::size_t>& chosen_at_step,
               CandidateSet& out) {
    std::vector<Expansion> expansions;
    for (std::size_t b = 0; b < group.active.size(); ++b) {
      const Beam& beam = group.active[b];
      const std::vector<double> scores = checked_scores(scorer_, beam.tokens, conditioning_);
      for (TokenId v = 0; v < scores.size(); ++v) {
        if (scores[v] == -std::numeric_limits<double>::infinity()) continue;
        const double penalty = lambda_ * static_cast<double>(chosen_at_step[v]);
        expansions.push_back({b, v, beam.log_prob + scores[v], beam.search + scores[v] - penalty});
      }
    }
    if (constraint_) expansions = apply_constraint(group, step, std::move(expansions), out);

    auto tokens_of = [&](const Expansion& e) {
      std::vector<TokenId> t = group.active[e.parent].tokens;
      t.push_back(e.token);
      return t;
    };
    auto rank = [&](const Expansion& e) {
      return config_.length_normalize ? e.search / static_cast<double>(step + 1) : e.search;
    };
    // Materialize sequences once; sorting compares them on ties.
    std::vector<std::pair<Expansion, std::vector<TokenId>>> ranked;
    ranked.reserve(expansions.size());
    for (const Expansion& e : expansions) ranked.emplace_back(e, tokens_of(e));
    const std::size_t keep = std::min(width_, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep), ranked.end(),
                      [&](const auto& x, const auto& y) {
                        return better(rank(x.first), x.second, rank(y.first), y.second);
                      });

    std::vector<Beam> next;
    for (std::size_t i = 0; i < keep; ++i) {
      const Expansion& e = ranked[i].first;
      Beam beam{std::move(ranked[i].second), e.log_prob, e.search};
      ++chosen_at_step[e.token];
      if (e.token == vocab_.eos() || beam.tokens.size() >= config_.max_tokens) {
        group.complete.push_back(std::move(beam));
      } else {
        next.push_back(std::move(beam));
      }
    }
    group.active = std::move(next);

    // Scores never increase with length (log-probs <= 0, penalties >= 0), so
    // once the best live beam is strictly worse than the width-th complete
    // hypothesis nothing can change the result.
    if (!config_.length_normalize && group.complete.size() >= width_ && !group.active.empty()) {
      std::vector<double> done_scores;
      for (const Beam& b : group.complete) done_scores.push_back(b.search);
      std::nth_element(done_scores.begin(), done_scores.begin() + static_cast<std::ptrdiff_t>(width_ - 1),
                       done_scores.end(), std::greater<>());
      const double cutoff = done_scores[width_ - 1];
      double best_live = -std::numeric_limits<double>::infinity();
      for (const Beam& b : group.active) best_live = std::max(best_live, b.search);
      if (best_live < cutoff) group.active.clear();
    }
  }

  std::vector<Expansion> apply_constraint(const Group& group, std::size_t step,
                                          std::vector<Expansion> expansions, CandidateSet& out) {
    ConstraintTrace trace;
    trace.step = step;
    trace.expansions = expansions.size();
    std::vector<Expansion> kept;
    std::vector<std::pair<std::string, double>> kept_values;
    for (const Expansion& e : expansions) {
      std::vector<TokenId> t = group.active[e.parent].tokens;
      t.push_back(e.token);
      const std::string text = vocab_.detokenize(t);
      // An empty prefix has said nothing yet and is exempt.
      if (text.empty()) {
        kept.push_back(e);
        continue;
      }
      const auto value = constraint_->measure(text);
      if (value && std::abs(*value - constraint_->target) < constraint_->epsilon) {
        kept.push_back(e);
        kept_values.emplace_back(text, *value);
      }
    }
    trace.satisfying = kept.size();
    if (kept.empty() && !expansions.empty()) {
      trace.suspended = true;
      out.events.push_back({step, "constraint suspended: no expansion within epsilon of target"});
      if (config_.record_trace) out.trace.push_back(std::move(trace));
      return expansions;
    }
    trace.kept = std::move(kept_values);
    if (config_.record_trace) out.trace.push_back(std::move(trace));
    return kept;
  }

  const TokenScorer& scorer_;
  const Vocabulary& vocab_;
  std::string_view conditioning_;
  const DecodeConfig& config_;
  std::size_t width_;
  double lambda_;
  Constraint* constraint_;
  std::vector<Group> groups_;
};

}  // namespace

CandidateSet beam_search(const TokenScorer& scorer, std::string_view conditioning,
                         const DecodeConfig& config) {
  validate(config);
  return GroupedSearch(scorer, conditioning, config, 1, config.beam_width, 0.0, nullptr).run();
}

CandidateSet diverse_beam_search(const TokenScorer& scorer, std::string_view conditioning,
                                 const DecodeConfig& config) {
  DecodeConfig checked = config;
  checked.mode = DecodeMode::kDiverseBeam;
  validate(checked);
  return GroupedSearch(scorer, conditioning, config, config.groups, config.beams_per_group,
                       config.diversity_lambda, nullptr)
      .run();
}

CandidateSet constrained_beam_search(const TokenScorer& scorer, std::string_view conditioning,
                                     const DecodeConfig& config, const Measurer& measurer,
                                     double target) {
  DecodeConfig checked = config;
  checked.mode = DecodeMode::kConstrainedBeam;
  validate(checked);
  if (measurer.kind() != MeasureKind::kContinuous)
    throw TypeError("constrained beam search needs a continuous measurer");
  Constraint constraint{&measurer, target, *config.epsilon, {}};
  return GroupedSearch(scorer, conditioning, config, 1, config.beam_width, 0.0, &constraint).run();
}

}  // namespace synth
