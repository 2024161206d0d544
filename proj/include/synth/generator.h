// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "synth/corpus.h"
#include "synth/decode.h"
#include "synth/measure.h"

namespace synth {

class LineChannel;

struct GenerationRequest {
  const Instance& instance;      // documents in the order under study
  std::string_view conditioning; // linearized input
  std::optional<double> target;  // expected aggregate, used by constrained decoding
};

/// Anything that turns an instance into candidate summaries. Must be safe to
/// call from several threads.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual CandidateSet generate(const GenerationRequest& request) const = 0;
};

/// In-process decoding over a TokenScorer, dispatching on config.mode.
class DecodingGenerator final : public Generator {
 public:
  DecodingGenerator(std::shared_ptr<const TokenScorer> scorer, DecodeConfig config,
                    std::shared_ptr<const Measurer> constraint_measurer = nullptr);

  CandidateSet generate(const GenerationRequest& request) const override;
  const DecodeConfig& config() const { return config_; }

 private:
  std::shared_ptr<const TokenScorer> scorer_;
  DecodeConfig config_;
  std::shared_ptr<const Measurer> constraint_measurer_;
};

/// Client for an out-of-process generator speaking
///   request  {"req_id", "conditioning", "n", "temperature", "mode"}
///   replies  {"req_id", "seq_no", "text", "log_prob"?} ...
///   end      {"req_id", "done": true}
class ExternalGenerator final : public Generator {
 public:
  struct Options {
    std::string endpoint;
    std::size_t n = 5;
    double temperature = 0.6;
    std::string mode = "sample";
    std::chrono::milliseconds timeout{60000};
  };

  explicit ExternalGenerator(Options options);
  ~ExternalGenerator() override;

  CandidateSet generate(const GenerationRequest& request) const override;
  CandidateSet sample(std::string_view conditioning) const;

 private:
  Options options_;
  std::unique_ptr<LineChannel> channel_;
  mutable std::atomic<std::size_t> next_req_{0};
};

/// One-shot sampling from an external generator endpoint. Candidates are
/// returned in seq_no order; a stream that ends before "done" is discarded.
CandidateSet sample_external(const std::string& endpoint, std::string_view conditioning,
                             std::size_t n, double temperature,
                             std::chrono::milliseconds timeout = std::chrono::milliseconds(60000));

std::string format_generation_request(std::string_view req_id, std::string_view conditioning,
                                      std::size_t n, double temperature, std::string_view mode);

}  // namespace synth
