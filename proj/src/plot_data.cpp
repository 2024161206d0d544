// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <ostream>

#include "synth/error.h"
#include "synth/metrics.h"
#include "synth/runner.h"

namespace synth {

using nlohmann::json;

std::string_view to_string(PlotFigure figure) {
  switch (figure) {
    case PlotFigure::kSpreadHist: return "spread_hist";
    case PlotFigure::kEntropyHist: return "entropy_hist";
    case PlotFigure::kSensitivityScatter: return "sensitivity_scatter";
    case PlotFigure::kCandidateRangeHist: return "candidate_range_hist";
  }
  return "spread_hist";
}

PlotFigure parse_plot_figure(std::string_view name) {
  if (name == "spread_hist") return PlotFigure::kSpreadHist;
  if (name == "entropy_hist") return PlotFigure::kEntropyHist;
  if (name == "sensitivity_scatter") return PlotFigure::kSensitivityScatter;
  if (name == "candidate_range_hist") return PlotFigure::kCandidateRangeHist;
  throw ConfigError("unknown figure '" + std::string(name) + "'");
}

namespace {

void require(const ExperimentRecord& record, StudyKind kind, PlotFigure figure) {
  if (record.study() != kind)
    throw DomainError(std::string(to_string(figure)) + " needs a " + std::string(to_string(kind)) +
                      " study record, got " + std::string(to_string(record.study())));
}

void write_bins(std::ostream& out, const std::vector<HistogramBin>& bins) {
  out << "bin_lo\tbin_hi\tcount\n";
  for (const HistogramBin& b : bins) out << b.lo << '\t' << b.hi << '\t' << b.count << '\n';
}

std::vector<double> collect(const ExperimentRecord& record, const char* key, PlotFigure figure) {
  std::vector<double> values;
  for (const json& row : record.instances) {
    if (!row.contains(key))
      throw DomainError(std::string(to_string(figure)) + " needs '" + key + "' in every instance record");
    const json& v = row.at(key);
    if (v.is_array()) {
      for (const json& x : v) values.push_back(x.get<double>());
    } else {
      values.push_back(v.get<double>());
    }
  }
  return values;
}

}  // namespace

void emit_plot_data(const ExperimentRecord& record, PlotFigure figure, std::ostream& out, std::size_t bins) {
  out.precision(17);
  switch (figure) {
    case PlotFigure::kSpreadHist: {
      require(record, StudyKind::kPermutation, figure);
      const auto values = collect(record, "spread", figure);
      if (values.empty()) throw DomainError("spread_hist: record has no spread values");
      write_bins(out, histogram(values, bins));
      return;
    }
    case PlotFigure::kEntropyHist: {
      require(record, StudyKind::kPermutation, figure);
      const auto values = collect(record, "entropy_bits", figure);
      if (values.empty()) throw DomainError("entropy_hist: record has no entropy values");
      write_bins(out, histogram(values, bins, std::pair{0.0, 1.0}));
      return;
    }
    case PlotFigure::kSensitivityScatter: {
      require(record, StudyKind::kComposition, figure);
      out << "instance_id\tpolarity\tfraction_removed\tinput_aggregate\toutput_measure\n";
      for (const json& row : record.instances) {
        if (!row.contains("points")) continue;  // skipped instance
        for (const json& p : row.at("points")) {
          if (p.at("polarity").is_null()) continue;  // baseline
          out << row.at("instance_id").get<std::string>() << '\t' << p.at("polarity").get<std::string>() << '\t'
              << p.at("fraction_removed").get<double>() << '\t' << p.at("input_aggregate").get<double>() << '\t'
              << p.at("output_measure").get<double>() << '\n';
        }
      }
      return;
    }
    case PlotFigure::kCandidateRangeHist: {
      require(record, StudyKind::kImprove, figure);
      out << "instance_id\tmin\tmax\trange\n";
      for (const json& row : record.instances) {
        std::vector<double> m;
        for (const json& v : row.at("candidate_measures")) {
          if (!v.is_number()) throw DomainError("candidate_range_hist needs continuous candidate measures");
          m.push_back(v.get<double>());
        }
        const auto [lo, hi] = std::minmax_element(m.begin(), m.end());
        out << row.at("instance_id").get<std::string>() << '\t' << *lo << '\t' << *hi << '\t' << (*hi - *lo)
            << '\n';
      }
      return;
    }
  }
}

}  // namespace synth
