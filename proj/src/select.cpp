// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include "synth/select.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "synth/error.h"

namespace synth {

SelectionPolicy::Kind parse_policy_kind(std::string_view name) {
  if (name == "nearest" || name == "nearest_continuous") return SelectionPolicy::Kind::kNearestContinuous;
  if (name == "agree_or_abstain" || name == "agree") return SelectionPolicy::Kind::kAgreeOrAbstain;
  if (name == "oracle_nearest") return SelectionPolicy::Kind::kOracleNearest;
  if (name == "oracle_agree") return SelectionPolicy::Kind::kOracleAgree;
  throw ConfigError("unknown selection policy '" + std::string(name) + "'");
}

std::string_view to_string(SelectionPolicy::Kind kind) {
  switch (kind) {
    case SelectionPolicy::Kind::kNearestContinuous: return "nearest_continuous";
    case SelectionPolicy::Kind::kAgreeOrAbstain: return "agree_or_abstain";
    case SelectionPolicy::Kind::kOracleNearest: return "oracle_nearest";
    case SelectionPolicy::Kind::kOracleAgree: return "oracle_agree";
  }
  return "nearest_continuous";
}

namespace {

// Distances closer than this are treated as ties so that decimal inputs such
// as 0.3 and 0.5 around 0.4 compare equal.
constexpr double kDistanceTieTolerance = 1e-9;

std::string excerpt(const std::string& text) {
  return text.size() <= 40 ? text : text.substr(0, 37) + "...";
}

template <typename E>
[[noreturn]] void rethrow_as(const E&, const std::string& message) {
  throw E(message);
}

std::vector<Measurement> measure_candidates(const CandidateSet& set, const Measurer& measurer) {
  std::vector<Measurement> out;
  out.reserve(set.candidates.size());
  for (std::size_t i = 0; i < set.candidates.size(); ++i) {
    const std::string who =
        "candidate " + std::to_string(i) + " (\"" + excerpt(set.candidates[i].text) + "\"): ";
    try {
      out.push_back(measurer.measure(set.candidates[i].text));
    } catch (const RetryableError& e) {
      rethrow_as(e, who + e.what());
    } catch (const ProtocolError& e) {
      rethrow_as(e, who + e.what());
    } catch (const TypeError& e) {
      rethrow_as(e, who + e.what());
    } catch (const Error& e) {
      throw DomainError(who + e.what());
    }
  }
  return out;
}

// Strict-weak "a ranks before b" on probability: higher log_prob first, or
// earlier arrival when log_probs are not available.
bool ranks_before(const CandidateSet& set, bool use_log_probs, std::size_t a, std::size_t b) {
  if (use_log_probs) {
    const double la = *set.candidates[a].log_prob;
    const double lb = *set.candidates[b].log_prob;
    if (la != lb) return la > lb;
  } else if (a != b) {
    return a < b;
  }
  return set.candidates[a].text < set.candidates[b].text;
}

void note_rank_source(SelectionOutcome& outcome, bool use_log_probs) {
  if (!use_log_probs)
    outcome.provenance.notes.push_back("candidates lack log_probs; arrival order used as rank");
}

void fill_selected(SelectionOutcome& outcome, const CandidateSet& set, std::size_t index) {
  outcome.status = SelectionOutcome::Status::kSelected;
  outcome.candidate = set.candidates[index];
  outcome.candidate->measurement = outcome.provenance.candidate_measures[index];
  outcome.candidate_index = index;
}

}  // namespace

SelectionOutcome select_nearest(const CandidateSet& set, double target, const Measurer& measurer,
                                std::optional<double> abstain_distance) {
  if (set.candidates.empty()) throw DomainError("empty candidate set");
  if (measurer.kind() != MeasureKind::kContinuous)
    throw TypeError("nearest selection needs a continuous measurer");

  SelectionOutcome outcome;
  outcome.target.kind = AggregateTarget::Kind::kFractionPositive;
  outcome.target.value = target;
  outcome.provenance.candidates = set;
  outcome.provenance.candidate_measures = measure_candidates(set, measurer);
  const bool use_log_probs = set.log_probs_known();
  note_rank_source(outcome, use_log_probs);

  std::vector<double> dist;
  for (const Measurement& m : outcome.provenance.candidate_measures)
    dist.push_back(std::abs(m.value() - target));

  std::size_t best = 0;
  for (std::size_t i = 1; i < dist.size(); ++i) {
    if (dist[i] < dist[best] - kDistanceTieTolerance) {
      best = i;
    } else if (std::abs(dist[i] - dist[best]) <= kDistanceTieTolerance &&
               ranks_before(set, use_log_probs, i, best)) {
      best = i;
    }
  }

  if (abstain_distance && dist[best] > *abstain_distance) {
    outcome.status = SelectionOutcome::Status::kAbstained;
    outcome.reason = "closest candidate is farther than the abstention distance";
    return outcome;
  }
  fill_selected(outcome, set, best);
  return outcome;
}

SelectionOutcome select_agree_or_abstain(const CandidateSet& set, Label target_label,
                                         const Measurer& measurer, double threshold) {
  if (set.candidates.empty()) throw DomainError("empty candidate set");

  SelectionOutcome outcome;
  outcome.target.kind = AggregateTarget::Kind::kMajorityVote;
  outcome.target.label = target_label;
  outcome.target.value = target_label == Label::kSignificant ? 1.0 : 0.0;
  outcome.provenance.candidates = set;
  outcome.provenance.candidate_measures = measure_candidates(set, measurer);
  const bool use_log_probs = set.log_probs_known();
  note_rank_source(outcome, use_log_probs);

  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < set.candidates.size(); ++i) {
    const Measurement& m = outcome.provenance.candidate_measures[i];
    const Label label = m.is_continuous() ? binarize(m, threshold).label() : m.label();
    if (label != target_label) continue;
    if (!best || ranks_before(set, use_log_probs, i, *best)) best = i;
  }
  if (!best) {
    outcome.status = SelectionOutcome::Status::kAbstained;
    outcome.reason = std::string(kNoMatchingCandidate);
    return outcome;
  }
  fill_selected(outcome, set, *best);
  return outcome;
}

AggregateTarget estimate_target(std::span<const Measurement> docs, double threshold) {
  if (docs.empty()) throw DomainError("cannot estimate a target without documents");
  AggregateTarget t;
  if (docs.front().is_continuous()) {
    t.kind = AggregateTarget::Kind::kFractionPositive;
    t.value = fraction_positive(docs, threshold);
    t.label = t.value >= threshold ? Label::kSignificant : Label::kNotSignificant;
    return t;
  }
  std::vector<Label> labels;
  for (const Measurement& m : docs) labels.push_back(m.label());
  t.kind = AggregateTarget::Kind::kMajorityVote;
  t.label = majority_vote(labels);
  const auto sig = std::count(labels.begin(), labels.end(), Label::kSignificant);
  t.value = static_cast<double>(sig) / static_cast<double>(labels.size());
  return t;
}

namespace {

template <typename F>
auto stage(const char* name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(name, e.what());
  }
}

AggregateTarget oracle_target(const Instance& instance, const Measurer& measurer,
                              const SelectionPolicy& policy) {
  AggregateTarget t;
  if (policy.oracle_source == SelectionPolicy::OracleSource::kReferenceMeasure) {
    const Measurement m = measurer.measure(instance.reference_summary);
    if (m.is_continuous()) {
      t.kind = AggregateTarget::Kind::kMean;
      t.value = m.value();
      t.label = binarize(m, policy.threshold).label();
    } else {
      t.kind = AggregateTarget::Kind::kMajorityVote;
      t.label = m.label();
      t.value = m.label() == Label::kSignificant ? 1.0 : 0.0;
    }
    return t;
  }
  const GoldAggregate& gold = instance.gold;
  if (policy.is_binary()) {
    if (!gold.label) throw DomainError("oracle policy requires a gold label on instance " + instance.id);
    t.kind = gold.p_value ? AggregateTarget::Kind::kMetaAnalysis : AggregateTarget::Kind::kMajorityVote;
    t.label = gold.label;
    t.p_value = gold.p_value;
    t.value = *gold.label == Label::kSignificant ? 1.0 : 0.0;
  } else {
    if (!gold.value) throw DomainError("oracle policy requires a gold aggregate on instance " + instance.id);
    t.kind = AggregateTarget::Kind::kFractionPositive;
    t.value = *gold.value;
    t.label = *gold.value >= policy.threshold ? Label::kSignificant : Label::kNotSignificant;
  }
  return t;
}

}  // namespace

SelectionOutcome cautious_summarize(const Instance& instance, const Generator& generator,
                                    const Measurer& measurer, const SelectionPolicy& policy,
                                    const LinearizeOptions& linearize_options) {
  stage("validate", [&] {
    validate(instance);
    return 0;
  });

  std::vector<std::string> texts;
  for (const Document& d : instance.documents) texts.push_back(d.text);
  const std::vector<Measurement> doc_measures =
      stage("measure_documents", [&] { return measurer.measure_batch(texts); });

  const AggregateTarget target = stage("estimate_target", [&] {
    if (policy.is_oracle()) return oracle_target(instance, measurer, policy);
    if (policy.is_binary() && doc_measures.front().is_continuous()) {
      std::vector<Measurement> labels;
      for (const Measurement& m : doc_measures) labels.push_back(binarize(m, policy.threshold));
      AggregateTarget t = estimate_target(labels, policy.threshold);
      return t;
    }
    return estimate_target(doc_measures, policy.threshold);
  });

  const Linearized input = stage("linearize", [&] { return linearize(instance, linearize_options); });
  CandidateSet candidates = stage("decode", [&] {
    CandidateSet set = generator.generate({instance, input.text, target.value});
    if (set.candidates.empty()) throw DomainError("empty candidate set");
    return set;
  });

  SelectionOutcome outcome = stage("select", [&] {
    if (policy.is_binary()) {
      if (!target.label) throw DomainError("binary policy needs a label target");
      return select_agree_or_abstain(candidates, *target.label, measurer, policy.threshold);
    }
    return select_nearest(candidates, target.value, measurer, policy.abstain_distance);
  });
  outcome.target = target;
  outcome.provenance.document_measures = doc_measures;
  for (const std::string& w : input.warnings) outcome.provenance.notes.push_back(w);
  if (input.truncated) outcome.provenance.notes.push_back("input truncated to max_length");
  return outcome;
}

}  // namespace synth
