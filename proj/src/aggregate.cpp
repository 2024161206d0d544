// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include "synth/aggregate.h"

#include <cmath>
#include <limits>

#include "synth/error.h"

namespace synth {

std::string_view to_string(AggregateTarget::Kind kind) {
  switch (kind) {
    case AggregateTarget::Kind::kMean: return "mean";
    case AggregateTarget::Kind::kFractionPositive: return "fraction_positive";
    case AggregateTarget::Kind::kMajorityVote: return "majority_vote";
    case AggregateTarget::Kind::kMetaAnalysis: return "meta_analysis";
  }
  return "mean";
}

double weighted_mean(std::span<const double> measures, std::span<const double> weights) {
  if (measures.empty()) throw DomainError("weighted_mean of an empty list");
  if (measures.size() != weights.size())
    throw DomainError("weighted_mean: measures and weights differ in length");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < measures.size(); ++i) {
    if (!(weights[i] >= 0.0)) throw DomainError("weighted_mean: negative weight");
    num += weights[i] * measures[i];
    den += weights[i];
  }
  if (!(den > 0.0)) throw DomainError("weighted_mean: weights sum to zero");
  return num / den;
}

double fraction_positive(std::span<const Measurement> measures, double threshold) {
  if (measures.empty()) throw DomainError("fraction_positive of an empty list");
  std::size_t positive = 0;
  for (const Measurement& m : measures)
    if (binarize(m, threshold).label() == Label::kSignificant) ++positive;
  return static_cast<double>(positive) / static_cast<double>(measures.size());
}

Label majority_vote(std::span<const Label> labels) {
  if (labels.empty()) throw DomainError("majority_vote of an empty list");
  std::size_t sig = 0;
  for (Label l : labels) sig += l == Label::kSignificant;
  return 2 * sig > labels.size() ? Label::kSignificant : Label::kNotSignificant;
}

double two_sided_normal_p(double z) {
  const double p = std::erfc(std::abs(z) / std::sqrt(2.0));
  // Keeps p inside (0,1] for |z| beyond double range of erfc.
  return std::max(p, std::numeric_limits<double>::min());
}

MetaAnalysisResult fixed_effects_meta_analysis(std::span<const Study> studies) {
  if (studies.empty()) throw DomainError("meta-analysis needs at least one study");
  double sum_w = 0.0;
  double sum_wt = 0.0;
  for (const Study& s : studies) {
    if (!(s.variance > 0.0) || !std::isfinite(s.variance))
      throw DomainError("meta-analysis: study variance must be positive");
    if (!std::isfinite(s.effect)) throw DomainError("meta-analysis: effect must be finite");
    const double w = 1.0 / s.variance;
    sum_w += w;
    sum_wt += w * s.effect;
  }
  MetaAnalysisResult r;
  r.pooled_effect = sum_wt / sum_w;
  r.standard_error = 1.0 / std::sqrt(sum_w);
  r.z_score = r.pooled_effect / r.standard_error;
  r.p_value = two_sided_normal_p(r.z_score);
  r.significant = r.p_value < kSignificanceLevel;
  return r;
}

}  // namespace synth
