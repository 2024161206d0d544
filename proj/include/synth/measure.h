// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "synth/types.h"

namespace synth {

enum class MeasureKind { kContinuous, kBinary };

std::string_view to_string(MeasureKind kind);

/// Output of a measurement model. Continuous measurements use `value`;
/// binary ones use `label` and `confidence`.
class Measurement {
 public:
  static Measurement continuous(double value);
  static Measurement binary(Label label, double confidence);

  MeasureKind kind() const { return kind_; }
  bool is_continuous() const { return kind_ == MeasureKind::kContinuous; }

  /// Continuous value; TypeError on a binary measurement.
  double value() const;
  /// Binary label; TypeError on a continuous measurement.
  Label label() const;
  double confidence() const { return confidence_; }

  bool operator==(const Measurement&) const = default;

 private:
  Measurement(MeasureKind kind, double value, Label label, double confidence)
      : kind_(kind), value_(value), label_(label), confidence_(confidence) {}

  MeasureKind kind_;
  double value_;
  Label label_;
  double confidence_;
};

/// Label is kSignificant (positive) iff value >= threshold. Confidence is the
/// distance to the threshold divided by the width of that side of [0,1].
Measurement binarize(const Measurement& m, double threshold);

/// The measurement model contract. Implementations must be callable from
/// several threads at once.
class Measurer {
 public:
  virtual ~Measurer() = default;
  virtual MeasureKind kind() const = 0;
  virtual Measurement measure(std::string_view text) const = 0;

  /// Element i answers texts[i]. A failure fails the whole batch and names
  /// the failing index.
  virtual std::vector<Measurement> measure_batch(std::span<const std::string> texts) const;
};

/// Polarity lexicon for the builtin sentiment measurer.
struct Lexicon {
  std::unordered_set<std::string> positive;
  std::unordered_set<std::string> negative;

  static const Lexicon& builtin();
  /// One entry per line: `word<TAB>positive|negative` (or +1/-1). Lines
  /// starting with '#' are comments.
  static Lexicon load(const std::filesystem::path& path);
};

/// Lowercased alphanumeric/apostrophe runs.
std::vector<std::string> lexicon_tokens(std::string_view text);

/// score = (pos - neg) / (pos + neg + 1), mapped affinely from [-1,1] to
/// [0,1]. Zero hits gives the neutral 0.5.
class LexiconMeasurer final : public Measurer {
 public:
  LexiconMeasurer();
  explicit LexiconMeasurer(Lexicon lexicon);

  MeasureKind kind() const override { return MeasureKind::kContinuous; }
  Measurement measure(std::string_view text) const override;

  struct Hits {
    std::size_t positive = 0;
    std::size_t negative = 0;
  };
  Hits count_hits(std::string_view text) const;

 private:
  Lexicon lexicon_;
};

/// Ordered cue-phrase rules for effect significance; first match wins.
struct KeywordRule {
  std::string cue;
  Label label;
};

class KeywordMeasurer final : public Measurer {
 public:
  static constexpr double kMatchConfidence = 0.9;
  static constexpr double kDefaultConfidence = 0.5;

  KeywordMeasurer();
  explicit KeywordMeasurer(std::vector<KeywordRule> rules);

  static const std::vector<KeywordRule>& default_rules();

  MeasureKind kind() const override { return MeasureKind::kBinary; }
  Measurement measure(std::string_view text) const override;

  /// Index of the first matching rule, if any.
  std::optional<std::size_t> first_match(std::string_view text) const;

 private:
  std::vector<KeywordRule> rules_;
};

class LineChannel;

/// Client for an out-of-process measurer speaking
///   request  {"req_id", "text"}
///   reply    {"req_id", "kind", "value"|"label", "confidence"}
/// one JSON object per line.
class ExternalMeasurer final : public Measurer {
 public:
  struct Options {
    std::string endpoint;
    MeasureKind kind = MeasureKind::kContinuous;
    std::chrono::milliseconds timeout{30000};
    std::size_t max_in_flight = 8;
  };

  explicit ExternalMeasurer(Options options);
  ~ExternalMeasurer() override;

  MeasureKind kind() const override { return options_.kind; }
  Measurement measure(std::string_view text) const override;
  std::vector<Measurement> measure_batch(std::span<const std::string> texts) const override;

 private:
  Options options_;
  std::unique_ptr<LineChannel> channel_;
  mutable std::atomic<std::size_t> next_req_{0};
};

/// Parses one measurer reply line. Throws ProtocolError if malformed.
Measurement parse_measurement_reply(std::string_view line, std::string* req_id);
std::string format_measurement_reply(std::string_view req_id, const Measurement& m);

struct MeasurerSpec {
  enum class Kind { kBuiltinLexicon, kBuiltinKeyword, kExternal };
  Kind kind = Kind::kBuiltinLexicon;
  std::optional<std::string> endpoint;
  std::optional<std::filesystem::path> lexicon_path;
  MeasureKind external_kind = MeasureKind::kContinuous;
  std::chrono::milliseconds timeout{30000};
  std::size_t max_in_flight = 8;
};

MeasurerSpec::Kind parse_measurer_kind(std::string_view name);
std::string_view to_string(MeasurerSpec::Kind kind);

std::shared_ptr<const Measurer> make_measurer(const MeasurerSpec& spec);

/// One-shot helpers over a spec.
Measurement measure_text(const MeasurerSpec& spec, std::string_view text);
std::vector<Measurement> measure_batch(const MeasurerSpec& spec, std::span<const std::string> texts);

}  // namespace synth
