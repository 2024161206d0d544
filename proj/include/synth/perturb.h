// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "synth/aggregate.h"
#include "synth/corpus.h"
#include "synth/generator.h"
#include "synth/measure.h"

namespace synth {

struct PermutationOptions {
  std::size_t permutations = 100;
  std::uint64_t seed = 0;
  double threshold = 0.5;  // binarizes continuous measures on binary tasks
  std::size_t workers = 1;
  LinearizeOptions linearize;
};

struct PermutationStudy {
  std::string instance_id;
  Task task = Task::kContinuous;
  std::size_t n_permutations = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> measures;  // continuous tasks
  std::vector<Label> labels;     // binary tasks
  std::vector<double> spread;    // measures minus their mean; continuous only
  std::optional<double> p_fraction;
  std::optional<double> entropy_bits;
  std::vector<double> rouge1;    // summary vs reference, per permutation
};

/// -p log2 p - (1-p) log2 (1-p), with 0 log 0 = 0.
double binary_entropy(double p);

/// Decodes and measures one summary (the first candidate) per seeded
/// permutation of the instance's documents.
PermutationStudy run_permutation_study(const Instance& instance, const Generator& generator,
                                       const Measurer& measurer, const PermutationOptions& options);

enum class Polarity { kPositive, kNegative };
std::string_view to_string(Polarity polarity);

enum class RemovalOrder { kWeakestFirst, kSeededRandom };

struct CompositionOptions {
  double threshold = 0.5;
  std::vector<double> fractions = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  RemovalOrder removal = RemovalOrder::kWeakestFirst;
  std::uint64_t seed = 0;
  LinearizeOptions linearize;
};

struct CompositionPoint {
  double fraction_removed = 0.0;  // 0 for the baseline point
  std::optional<Polarity> polarity_removed;  // empty for the baseline point
  std::vector<std::string> removed_ids;
  double input_aggregate = 0.0;
  double output_measure = 0.0;
  bool polarity_exhausted = false;  // every document of the removed polarity is gone
};

struct CompositionStudy {
  std::string instance_id;
  std::vector<CompositionPoint> points;  // baseline first, then the schedule
  double fitted_slope = 0.0;
  double fitted_intercept = 0.0;
  std::optional<std::string> skipped_reason;

  std::size_t schedule_size() const { return points.empty() ? 0 : points.size() - 1; }
};

/// Removes growing fractions of each polarity, regenerates, and fits the
/// output measure against the input fraction-positive. Instances without
/// both polarities come back with `skipped_reason` set.
CompositionStudy run_composition_study(const Instance& instance, const Generator& generator,
                                       const Measurer& measurer, const CompositionOptions& options);

struct FlipConstruction {
  std::string instance_id;
  std::vector<std::string> removed_document_ids;
  MetaAnalysisResult before;
  MetaAnalysisResult after;
  Instance flipped;  // the instance with the removed documents dropped
};

/// Removes documents in descending |effect / variance| order, recomputing
/// the meta-analysis after each removal, until significance flips. Throws
/// DomainError("instance not flippable") when no flip is reachable with at
/// least one document left.
FlipConstruction construct_significance_flip(const Instance& instance);

std::vector<Study> studies_of(const Instance& instance);

}  // namespace synth
