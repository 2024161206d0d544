// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "synth/types.h"

namespace synth {

/// One input text of an instance. Optional fields carry whatever per-document
/// ground truth the dataset provides.
struct Document {
  std::string id;
  std::string text;
  double weight = 1.0;
  std::optional<double> gold_score;  // continuous gold measure in [0,1]
  std::optional<Label> gold_label;   // binary gold measure
  std::optional<double> effect;      // study effect estimate
  std::optional<double> variance;    // study variance, > 0

  bool operator==(const Document&) const = default;
};

/// Gold aggregate of an instance. Continuous tasks carry `value` (e.g. the
/// Tomatometer fraction); binary tasks carry `label`, plus `p_value` when
/// known.
struct GoldAggregate {
  std::optional<double> value;
  std::optional<double> p_value;
  std::optional<Label> label;

  bool operator==(const GoldAggregate&) const = default;
};

/// A multi-document instance. Document order is significant: it is the
/// experimental variable of the permutation studies.
struct Instance {
  std::string id;
  std::vector<Document> documents;
  std::string reference_summary;
  GoldAggregate gold;
  Task task = Task::kContinuous;

  bool operator==(const Instance&) const = default;
};

enum class Split { kTrain, kDev, kTest };
enum class Schema { kMovies, kTrials };

struct Corpus {
  std::vector<Instance> instances;
  Split split = Split::kDev;
  Task task = Task::kContinuous;

  bool operator==(const Corpus&) const = default;
};

struct RecordError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

struct LoadedCorpus {
  Corpus corpus;
  std::vector<RecordError> errors;
  std::vector<std::string> warnings;
};

Schema parse_schema(std::string_view name);
std::string_view to_string(Schema schema);
std::string_view to_string(Split split);
Split parse_split(std::string_view name);

/// Checks the Document/Instance invariants; throws DomainError naming the
/// first violation.
void validate(const Instance& instance);

/// Parses one record line. Throws DomainError on a record that violates an
/// invariant and ProtocolError on malformed JSON.
Instance parse_record(std::string_view line, Schema schema);

/// Serializes an instance back into its schema's record line (no newline).
std::string serialize_record(const Instance& instance, Schema schema);

/// Reads a line-delimited corpus. Unreadable file throws Error; bad records
/// are collected in `errors` with their line number.
LoadedCorpus load_corpus(const std::filesystem::path& path, Schema schema,
                         Split split = Split::kDev);

void write_corpus(const std::filesystem::path& path, const Corpus& corpus,
                  Schema schema);

struct LinearizeOptions {
  std::string separator = "<doc>";
  std::optional<std::size_t> max_length;  // whitespace tokens, separators included
};

struct Linearized {
  std::string text;
  bool truncated = false;
  std::size_t documents_kept = 0;
  std::vector<std::string> warnings;
};

/// Joins documents as "sep doc1 sep doc2 ...". Document text is
/// whitespace-normalized. When `max_length` is set, the budget is filled
/// left to right so that later documents are trimmed (or dropped) first.
Linearized linearize(const Instance& instance, const LinearizeOptions& options);

/// Returns a copy with documents in a uniformly random order for `seed`.
Instance permute_documents(const Instance& instance, std::uint64_t seed);

/// Splits on ASCII whitespace. Shared by corpus, decoders and metrics.
std::vector<std::string> whitespace_tokens(std::string_view text);

}  // namespace synth
