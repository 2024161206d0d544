// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "synth/measure.h"

namespace synth {

/// A test backend that speaks both line protocols. Generator requests (those
/// carrying "conditioning") get n replies cycling through `replies`, or
/// echoing the conditioning when `replies` is empty, then a done marker.
/// Measurer requests (those carrying "text") are scored by a builtin measurer.
struct EchoOptions {
  std::vector<std::string> replies;
  MeasurerSpec::Kind measurer = MeasurerSpec::Kind::kBuiltinLexicon;
  bool log_probs = false;  // attach -seq_no as log_prob to generator replies
};

class EchoBackend {
 public:
  explicit EchoBackend(EchoOptions options);

  /// Reply lines for one request line. Malformed requests yield an error
  /// reply rather than an exception.
  std::vector<std::string> handle(std::string_view line) const;

 private:
  EchoOptions options_;
  std::shared_ptr<const Measurer> measurer_;
};

/// Serves requests from `in` until EOF, flushing after each reply set.
void serve_echo_stdio(const EchoBackend& backend, std::istream& in, std::ostream& out);

/// Serves POSTed request batches on host:port until the process is stopped.
void serve_echo_http(const EchoBackend& backend, const std::string& host, int port);

}  // namespace synth
