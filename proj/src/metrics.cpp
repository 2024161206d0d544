// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include "synth/metrics.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <string>

#include "synth/corpus.h"
#include "synth/error.h"

namespace synth {

namespace {

void check_paired(const PairedSeries& s, std::size_t min_len, const char* what) {
  if (s.predictions.size() != s.targets.size())
    throw DomainError(std::string(what) + ": series differ in length");
  if (s.predictions.size() < min_len)
    throw DomainError(std::string(what) + ": needs at least " + std::to_string(min_len) + " points");
}

}  // namespace

double mean(std::span<const double> values) {
  if (values.empty()) throw DomainError("mean of an empty list");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double r_squared_centered(const PairedSeries& s) {
  check_paired(s, 2, "r_squared_centered");
  const double t_bar = mean(s.targets);
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < s.targets.size(); ++i) {
    ss_res += (s.targets[i] - s.predictions[i]) * (s.targets[i] - s.predictions[i]);
    ss_tot += (s.targets[i] - t_bar) * (s.targets[i] - t_bar);
  }
  if (!(ss_tot > 0.0)) throw DomainError("r_squared_centered: targets have zero variance");
  return 1.0 - ss_res / ss_tot;
}

double pearson(const PairedSeries& s) {
  check_paired(s, 2, "pearson");
  const double p_bar = mean(s.predictions);
  const double t_bar = mean(s.targets);
  double cov = 0.0, var_p = 0.0, var_t = 0.0;
  for (std::size_t i = 0; i < s.targets.size(); ++i) {
    const double dp = s.predictions[i] - p_bar;
    const double dt = s.targets[i] - t_bar;
    cov += dp * dt;
    var_p += dp * dp;
    var_t += dt * dt;
  }
  if (!(var_p > 0.0) || !(var_t > 0.0)) throw DomainError("pearson: zero variance");
  return std::clamp(cov / std::sqrt(var_p * var_t), -1.0, 1.0);
}

double mse(const PairedSeries& s) {
  check_paired(s, 1, "mse");
  double sum = 0.0;
  for (std::size_t i = 0; i < s.targets.size(); ++i)
    sum += (s.predictions[i] - s.targets[i]) * (s.predictions[i] - s.targets[i]);
  return sum / static_cast<double>(s.targets.size());
}

ConfusionCounts ConfusionCounts::tally(std::span<const Label> predicted, std::span<const Label> gold) {
  if (predicted.size() != gold.size())
    throw DomainError("confusion counts: predicted and gold differ in length");
  ConfusionCounts c;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (int cls = 0; cls < 2; ++cls) {
      const bool p = static_cast<int>(predicted[i]) == cls;
      const bool g = static_cast<int>(gold[i]) == cls;
      Cell& cell = c.per_class[cls];
      if (p && g) ++cell.tp;
      else if (p) ++cell.fp;
      else if (g) ++cell.fn;
      else ++cell.tn;
    }
  }
  return c;
}

ClassificationScores macro_f1_accuracy(std::span<const Label> predicted, std::span<const Label> gold) {
  if (predicted.size() != gold.size())
    throw DomainError("macro_f1_accuracy: predicted and gold differ in length");
  if (gold.empty()) throw DomainError("macro_f1_accuracy: empty input");
  const ConfusionCounts c = ConfusionCounts::tally(predicted, gold);
  double f1_sum = 0.0;
  for (const auto& cell : c.per_class) {
    const double denom = 2.0 * cell.tp + cell.fp + cell.fn;
    f1_sum += denom > 0.0 ? 2.0 * cell.tp / denom : 0.0;
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) correct += predicted[i] == gold[i];
  return {f1_sum / 2.0, static_cast<double>(correct) / static_cast<double>(gold.size())};
}

double rouge1_f(std::string_view candidate, std::string_view reference) {
  auto counts = [](std::string_view text) {
    std::map<std::string, std::size_t> out;
    for (std::string tok : whitespace_tokens(text)) {
      for (char& ch : tok) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      ++out[tok];
    }
    return out;
  };
  const auto cand = counts(candidate);
  const auto ref = counts(reference);
  std::size_t cand_total = 0, ref_total = 0, overlap = 0;
  for (const auto& [tok, n] : cand) cand_total += n;
  for (const auto& [tok, n] : ref) {
    ref_total += n;
    if (auto it = cand.find(tok); it != cand.end()) overlap += std::min(n, it->second);
  }
  if (cand_total == 0 && ref_total == 0) return 1.0;
  if (cand_total == 0 || ref_total == 0 || overlap == 0) return 0.0;
  const double p = static_cast<double>(overlap) / static_cast<double>(cand_total);
  const double r = static_cast<double>(overlap) / static_cast<double>(ref_total);
  return 2.0 * p * r / (p + r);
}

std::vector<HistogramBin> histogram(std::span<const double> values, std::size_t bins,
                                    std::optional<std::pair<double, double>> range) {
  if (bins == 0) throw DomainError("histogram needs at least one bin");
  for (double v : values)
    if (std::isnan(v)) throw DomainError("histogram: NaN value");
  double lo = 0.0, hi = 1.0;
  if (range) {
    std::tie(lo, hi) = *range;
    if (!(lo < hi)) throw DomainError("histogram: range lower bound must be below upper bound");
  } else if (!values.empty()) {
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    lo = *mn;
    hi = *mx;
    if (!(lo < hi)) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<HistogramBin> out(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].lo = lo + width * static_cast<double>(b);
    out[b].hi = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
  }
  for (double v : values) {
    std::size_t idx = 0;
    if (v >= hi) {
      idx = bins - 1;
    } else if (v > lo) {
      idx = std::min(bins - 1, static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins)));
      // Guard against rounding placing a value on the wrong side of an edge.
      while (idx > 0 && v < out[idx].lo) --idx;
      while (idx + 1 < bins && v >= out[idx + 1].lo) ++idx;
    }
    ++out[idx].count;
  }
  return out;
}

LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("least_squares: x and y differ in length");
  if (x.empty()) throw DomainError("least_squares: no points");
  const double x_bar = mean(x);
  const double y_bar = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - x_bar) * (x[i] - x_bar);
    sxy += (x[i] - x_bar) * (y[i] - y_bar);
  }
  if (!(sxx > 0.0)) return {0.0, y_bar};
  const double slope = sxy / sxx;
  return {slope, y_bar - slope * x_bar};
}

}  // namespace synth
