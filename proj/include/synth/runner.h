// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "synth/corpus.h"
#include "synth/decode.h"
#include "synth/generator.h"
#include "synth/measure.h"
#include "synth/perturb.h"
#include "synth/select.h"

namespace synth {

inline constexpr std::string_view kEngineVersion = "0.1.0";

enum class StudyKind { kCalibration, kPermutation, kComposition, kFlip, kImprove };

std::string_view to_string(StudyKind kind);
StudyKind parse_study_kind(std::string_view name);

struct GeneratorSpec {
  enum class Kind { kToy, kExternal };
  Kind kind = Kind::kToy;
  // toy
  int order = 2;
  double smoothing = 0.1;
  std::optional<std::filesystem::path> train_corpus;  // defaults to the experiment corpus
  // external
  std::optional<std::string> endpoint;
  std::size_t n = 5;
  double temperature = 0.6;
  std::chrono::milliseconds timeout{60000};
};

inline DecodeConfig diverse_decode() {
  DecodeConfig d;
  d.mode = DecodeMode::kDiverseBeam;
  return d;
}

/// Summary length cap used when a config leaves decode.max_tokens unset.
std::size_t default_max_tokens(Schema schema);

struct ExperimentConfig {
  StudyKind study = StudyKind::kImprove;
  std::filesystem::path corpus_path;
  Schema schema = Schema::kMovies;
  Split split = Split::kDev;
  std::optional<std::size_t> max_length;  // input budget in tokens; unset = no truncation
  std::string separator = "<doc>";

  GeneratorSpec generator;
  MeasurerSpec measurer;
  DecodeConfig decode = diverse_decode();
  SelectionPolicy policy;

  double threshold = 0.5;
  std::size_t permutations = 100;
  std::vector<double> fractions = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  RemovalOrder removal = RemovalOrder::kWeakestFirst;

  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  std::size_t workers = 1;

  LinearizeOptions linearize_options() const;
};

/// Parses the config-file schema documented in the README. Unknown keys are
/// rejected so typos do not silently fall back to defaults.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// SYNTH_GENERATOR_ENDPOINT / SYNTH_MEASURER_ENDPOINT replace the endpoint of
/// the corresponding component and switch it to external.
void apply_env_overrides(ExperimentConfig& config);

/// Throws ConfigError when the study's required components are missing.
void validate(const ExperimentConfig& config);

struct InstanceError {
  std::string instance_id;
  std::string stage;
  std::string cause;
};

struct ExperimentRecord {
  std::string engine_version{kEngineVersion};
  nlohmann::json config;                  // snapshot
  std::vector<nlohmann::json> instances;  // per-instance results, by instance id
  std::vector<InstanceError> errors;
  nlohmann::json aggregate;
  double wall_seconds = 0.0;
  bool interrupted = false;

  StudyKind study() const;
};

/// Components that override the ones the config would build. Tests use this
/// to plug in mock generators.
struct Components {
  std::shared_ptr<const Generator> generator;
  std::shared_ptr<const Measurer> measurer;
};

struct RunOptions {
  const std::atomic<bool>* cancel = nullptr;  // checked before each instance
  bool write_files = true;                    // records.jsonl and metrics.tsv
};

/// Runs the configured study over the corpus. Per-instance records are
/// appended to <output_dir>/records.jsonl in instance-id order as soon as the
/// ordered prefix is complete; the aggregate block and timing follow.
/// Component failures become error records; only config and IO errors throw.
ExperimentRecord run_experiment(const ExperimentConfig& config, const Components& overrides = {},
                                const RunOptions& options = {});

/// Same, over an already-loaded corpus.
ExperimentRecord run_experiment(const ExperimentConfig& config, const Corpus& corpus,
                                const Components& overrides, const RunOptions& options);

/// Reads a records.jsonl file back. Tolerates a truncated final line.
ExperimentRecord load_record(const std::filesystem::path& path);

/// The aggregate line exactly as written to records.jsonl.
std::string aggregate_line(const ExperimentRecord& record);

/// Metric rows of the aggregate block as "name\tvalue" lines with a header.
void write_metrics_tsv(const ExperimentRecord& record, std::ostream& out);

enum class PlotFigure { kSpreadHist, kEntropyHist, kSensitivityScatter, kCandidateRangeHist };

std::string_view to_string(PlotFigure figure);
PlotFigure parse_plot_figure(std::string_view name);

/// Writes tab-separated plot data with a header row.
///   spread_hist           bin_lo bin_hi count       (permutation, continuous)
///   entropy_hist          bin_lo bin_hi count       (permutation, binary)
///   sensitivity_scatter   instance_id polarity fraction_removed input_aggregate output_measure
///   candidate_range_hist  instance_id min max range (improve, continuous)
/// Throws DomainError naming the required study when the record lacks it.
void emit_plot_data(const ExperimentRecord& record, PlotFigure figure, std::ostream& out,
                    std::size_t bins = 20);

}  // namespace synth
