// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace synth {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inputs outside an operation's mathematical domain (empty lists, zero
// weights, non-positive variances, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Wrong measurement kind handed to an operation expecting the other kind.
class TypeError : public Error {
 public:
  using Error::Error;
};

// A pluggable component broke its contract (e.g. a scorer whose
// log-probabilities do not normalize).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Transient failure talking to an external process or endpoint. Safe to retry.
class RetryableError : public Error {
 public:
  using Error::Error;
};

// The peer answered, but not in the line protocol we expect.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Wraps a component failure with the pipeline stage it happened in.
class PipelineError : public Error {
 public:
  PipelineError(std::string stage, const std::string& cause)
      : Error(stage + ": " + cause), stage_(std::move(stage)), cause_(cause) {}

  const std::string& stage() const { return stage_; }
  const std::string& cause() const { return cause_; }

 private:
  std::string stage_;
  std::string cause_;
};

}  // namespace synth
