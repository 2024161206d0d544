// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string_view>

#include "synth/measure.h"
#include "synth/types.h"

namespace synth {

inline constexpr double kSignificanceLevel = 0.05;

struct AggregateTarget {
  enum class Kind { kMean, kFractionPositive, kMajorityVote, kMetaAnalysis };
  Kind kind = Kind::kMean;
  double value = 0.0;
  std::optional<Label> label;
  std::optional<double> p_value;  // present iff kind == kMetaAnalysis

  bool operator==(const AggregateTarget&) const = default;
};

std::string_view to_string(AggregateTarget::Kind kind);

struct Study {
  double effect = 0.0;
  double variance = 1.0;
};

struct MetaAnalysisResult {
  double pooled_effect = 0.0;
  double standard_error = 0.0;
  double z_score = 0.0;
  double p_value = 1.0;
  bool significant = false;

  bool operator==(const MetaAnalysisResult&) const = default;
};

/// sum(w_j z_j) / sum(w_j). DomainError on empty input, length mismatch,
/// negative weights or an all-zero weight vector.
double weighted_mean(std::span<const double> measures, std::span<const double> weights);

/// Share of measurements whose binarized label is positive (tie goes up).
double fraction_positive(std::span<const Measurement> measures, double threshold);

/// Label with the strictly larger count; an exact tie is kNotSignificant.
Label majority_vote(std::span<const Label> labels);

/// Two-sided standard normal tail, erfc(|z| / sqrt(2)).
double two_sided_normal_p(double z);

/// Inverse-variance pooled fixed-effects estimate with a two-sided z-test.
MetaAnalysisResult fixed_effects_meta_analysis(std::span<const Study> studies);

}  // namespace synth
