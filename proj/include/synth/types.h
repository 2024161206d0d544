// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace synth {

enum class Task { kContinuous, kBinary };

// Binary outcome. For sentiment, kSignificant doubles as "positive".
enum class Label { kNotSignificant = 0, kSignificant = 1 };

std::string_view to_string(Task task);
std::string_view to_string(Label label);
std::optional<Label> parse_label(std::string_view text);
std::optional<Task> parse_task(std::string_view text);

}  // namespace synth
