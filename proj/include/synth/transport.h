// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace synth {

/// Where an external component lives.
///   exec:<shell command>          child process speaking lines on stdin/stdout
///   http://host:port[/path]       POST of request lines, reply lines in the body
struct Endpoint {
  enum class Kind { kProcess, kHttp };
  Kind kind = Kind::kProcess;
  std::string address;  // original spelling, used in error messages
  std::string command;
  std::string host;
  int port = 80;
  std::string path = "/";
};

Endpoint parse_endpoint(std::string_view address);

/// Returns true once the reply stream for the current exchange is complete.
using ReplySink = std::function<bool(std::string_view line)>;

/// A bidirectional newline-delimited channel. One exchange at a time; calls
/// from several threads are serialized.
class LineChannel {
 public:
  virtual ~LineChannel() = default;

  /// Writes every request line, then feeds reply lines to `sink` until it
  /// reports completion. Throws RetryableError on timeout, connection failure
  /// or a stream that ends early.
  virtual void exchange(const std::vector<std::string>& requests, const ReplySink& sink) = 0;

  virtual const Endpoint& endpoint() const = 0;
};

std::unique_ptr<LineChannel> open_channel(const Endpoint& endpoint,
                                          std::chrono::milliseconds timeout);

}  // namespace synth
