// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "synth/types.h"

namespace synth {

struct PairedSeries {
  std::vector<double> predictions;
  std::vector<double> targets;
};

/// 1 - SS_res / SS_tot around the target mean. Needs >= 2 points and
/// non-zero target variance.
double r_squared_centered(const PairedSeries& series);

/// Product-moment correlation. Needs >= 2 points and non-zero variance in
/// both series.
double pearson(const PairedSeries& series);

double mse(const PairedSeries& series);

/// Per-class counts for the two labels, indexed by static_cast<int>(Label).
struct ConfusionCounts {
  struct Cell {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  };
  std::array<Cell, 2> per_class{};

  static ConfusionCounts tally(std::span<const Label> predicted, std::span<const Label> gold);
};

struct ClassificationScores {
  double macro_f1 = 0.0;
  double accuracy = 0.0;
};

/// Unweighted mean of the two per-class F1 scores (a class with no support
/// and no predictions scores 0 and still counts), plus exact-match accuracy.
ClassificationScores macro_f1_accuracy(std::span<const Label> predicted, std::span<const Label> gold);

/// Unigram F1 with clipped counts over lowercased whitespace tokens.
/// Both empty scores 1, exactly one empty scores 0.
double rouge1_f(std::string_view candidate, std::string_view reference);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
};

/// Uniform bins, right-open except the last which is closed. Values outside
/// an explicit range are clamped into the edge bins so counts always sum to
/// the input size. Without a range the observed [min, max] is used (widened
/// by 0.5 on each side when degenerate).
std::vector<HistogramBin> histogram(std::span<const double> values, std::size_t bins,
                                    std::optional<std::pair<double, double>> range = std::nullopt);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Ordinary least squares of y on x. A zero-variance x yields slope 0 and the
/// mean of y as intercept.
LinearFit least_squares(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> values);

}  // namespace synth
