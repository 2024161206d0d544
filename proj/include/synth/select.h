// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "synth/aggregate.h"
#include "synth/corpus.h"
#include "synth/decode.h"
#include "synth/generator.h"
#include "synth/measure.h"

namespace synth {

/// Everything the selection pipeline looked at, kept for audit.
struct SelectionProvenance {
  std::vector<Measurement> document_measures;
  std::vector<Measurement> candidate_measures;
  CandidateSet candidates;
  std::vector<std::string> notes;
};

struct SelectionOutcome {
  enum class Status { kSelected, kAbstained };
  Status status = Status::kAbstained;
  std::optional<Candidate> candidate;  // present iff selected
  std::optional<std::size_t> candidate_index;
  std::optional<std::string> reason;   // present iff abstained
  AggregateTarget target;
  SelectionProvenance provenance;

  bool selected() const { return status == Status::kSelected; }
};

struct SelectionPolicy {
  enum class Kind { kNearestContinuous, kAgreeOrAbstain, kOracleNearest, kOracleAgree };
  enum class OracleSource { kGoldAggregate, kReferenceMeasure };

  Kind kind = Kind::kNearestContinuous;
  double threshold = 0.5;
  OracleSource oracle_source = OracleSource::kGoldAggregate;
  /// Continuous-task abstention: abstain when the best distance exceeds this.
  std::optional<double> abstain_distance;

  bool is_oracle() const { return kind == Kind::kOracleNearest || kind == Kind::kOracleAgree; }
  bool is_binary() const { return kind == Kind::kAgreeOrAbstain || kind == Kind::kOracleAgree; }
};

SelectionPolicy::Kind parse_policy_kind(std::string_view name);
std::string_view to_string(SelectionPolicy::Kind kind);

inline constexpr std::string_view kNoMatchingCandidate = "no candidate matches target label";

/// Picks argmin |g(candidate) - target|. Ties go to the higher log_prob, then
/// to the lexicographically smaller text. Candidates without log_probs rank
/// by arrival order.
SelectionOutcome select_nearest(const CandidateSet& candidates, double target, const Measurer& measurer,
                                std::optional<double> abstain_distance = std::nullopt);

/// Highest-probability candidate whose measured label equals `target_label`,
/// or an abstention when none agrees. A continuous measurer is binarized at
/// `threshold`.
SelectionOutcome select_agree_or_abstain(const CandidateSet& candidates, Label target_label,
                                         const Measurer& measurer, double threshold = 0.5);

/// Estimate target from the inputs (or take the gold one for oracle
/// policies), decode, then select. Failures are rethrown as PipelineError
/// naming the stage.
SelectionOutcome cautious_summarize(const Instance& instance, const Generator& generator,
                                    const Measurer& measurer, const SelectionPolicy& policy,
                                    const LinearizeOptions& linearize_options = {});

/// Target estimate from per-document measurements: fraction positive for
/// continuous measurements, majority vote for binary ones.
AggregateTarget estimate_target(std::span<const Measurement> document_measures, double threshold);

}  // namespace synth
