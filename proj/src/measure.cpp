// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include "synth/measure.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include <json.hpp>

#include "synth/error.h"
#include "synth/transport.h"

namespace synth {

using nlohmann::json;

std::string_view to_string(MeasureKind kind) {
  return kind == MeasureKind::kBinary ? "binary" : "continuous";
}

Measurement Measurement::continuous(double value) {
  if (!(value >= 0.0 && value <= 1.0))
    throw DomainError("continuous measurement must lie in [0,1], got " + std::to_string(value));
  return Measurement(MeasureKind::kContinuous, value, Label::kNotSignificant, 1.0);
}

Measurement Measurement::binary(Label label, double confidence) {
  if (!(confidence >= 0.0 && confidence <= 1.0))
    throw DomainError("confidence must lie in [0,1], got " + std::to_string(confidence));
  return Measurement(MeasureKind::kBinary, 0.0, label, confidence);
}

double Measurement::value() const {
  if (kind_ != MeasureKind::kContinuous) throw TypeError("binary measurement has no continuous value");
  return value_;
}

Label Measurement::label() const {
  if (kind_ != MeasureKind::kBinary) throw TypeError("continuous measurement has no label; binarize it first");
  return label_;
}

Measurement binarize(const Measurement& m, double threshold) {
  if (!m.is_continuous()) throw TypeError("binarize expects a continuous measurement");
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw DomainError("binarize threshold must lie in [0,1]");
  const double v = m.value();
  const bool positive = v >= threshold;
  const double side = positive ? 1.0 - threshold : threshold;
  const double confidence = side > 0.0 ? std::min(1.0, std::abs(v - threshold) / side) : 0.0;
  return Measurement::binary(positive ? Label::kSignificant : Label::kNotSignificant, confidence);
}

std::vector<Measurement> Measurer::measure_batch(std::span<const std::string> texts) const {
  std::vector<Measurement> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    try {
      out.push_back(measure(texts[i]));
    } catch (const DomainError& e) {
      throw DomainError("batch item " + std::to_string(i) + ": " + e.what());
    } catch (const RetryableError& e) {
      throw RetryableError("batch item " + std::to_string(i) + ": " + e.what());
    } catch (const ProtocolError& e) {
      throw ProtocolError("batch item " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

namespace {

void require_text(std::string_view text) {
  if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); }))
    throw DomainError("cannot measure empty text");
}

std::string normalize_for_cues(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool space = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

}  // namespace

std::vector<std::string> lexicon_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '\'') {
      current += static_cast<char>(std::tolower(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

LexiconMeasurer::LexiconMeasurer() : lexicon_(Lexicon::builtin()) {}
LexiconMeasurer::LexiconMeasurer(Lexicon lexicon) : lexicon_(std::move(lexicon)) {}

LexiconMeasurer::Hits LexiconMeasurer::count_hits(std::string_view text) const {
  Hits hits;
  for (const std::string& tok : lexicon_tokens(text)) {
    if (lexicon_.positive.count(tok)) ++hits.positive;
    else if (lexicon_.negative.count(tok)) ++hits.negative;
  }
  return hits;
}

Measurement LexiconMeasurer::measure(std::string_view text) const {
  require_text(text);
  const Hits h = count_hits(text);
  const double pos = static_cast<double>(h.positive);
  const double neg = static_cast<double>(h.negative);
  const double score = (pos - neg) / (pos + neg + 1.0);
  return Measurement::continuous((score + 1.0) / 2.0);
}

const std::vector<KeywordRule>& KeywordMeasurer::default_rules() {
  static const std::vector<KeywordRule> rules = {
      // Negated cues must precede the affirmative ones they contain.
      {"no significant", Label::kNotSignificant},
      {"no statistically significant", Label::kNotSignificant},
      {"not significant", Label::kNotSignificant},
      {"not statistically significant", Label::kNotSignificant},
      {"non-significant", Label::kNotSignificant},
      {"nonsignificant", Label::kNotSignificant},
      {"did not differ", Label::kNotSignificant},
      {"did not significantly", Label::kNotSignificant},
      {"no difference", Label::kNotSignificant},
      {"no clear difference", Label::kNotSignificant},
      {"no evidence", Label::kNotSignificant},
      {"insufficient evidence", Label::kNotSignificant},
      {"no effect", Label::kNotSignificant},
      {"significantly improved", Label::kSignificant},
      {"significantly reduced", Label::kSignificant},
      {"significantly increased", Label::kSignificant},
      {"significantly decreased", Label::kSignificant},
      {"significantly lower", Label::kSignificant},
      {"significantly higher", Label::kSignificant},
      {"significantly better", Label::kSignificant},
      {"significantly fewer", Label::kSignificant},
      {"significantly more", Label::kSignificant},
      {"significantly less", Label::kSignificant},
      {"significant difference", Label::kSignificant},
      {"significant effect", Label::kSignificant},
      {"significant reduction", Label::kSignificant},
      {"significant improvement", Label::kSignificant},
      {"significant increase", Label::kSignificant},
      {"significant decrease", Label::kSignificant},
      {"significant benefit", Label::kSignificant},
      {"statistically significant", Label::kSignificant},
  };
  return rules;
}

KeywordMeasurer::KeywordMeasurer() : rules_(default_rules()) {}
KeywordMeasurer::KeywordMeasurer(std::vector<KeywordRule> rules) : rules_(std::move(rules)) {
  for (KeywordRule& r : rules_) r.cue = normalize_for_cues(r.cue);
}

std::optional<std::size_t> KeywordMeasurer::first_match(std::string_view text) const {
  const std::string norm = normalize_for_cues(text);
  for (std::size_t i = 0; i < rules_.size(); ++i)
    if (norm.find(rules_[i].cue) != std::string::npos) return i;
  return std::nullopt;
}

Measurement KeywordMeasurer::measure(std::string_view text) const {
  require_text(text);
  if (auto hit = first_match(text)) return Measurement::binary(rules_[*hit].label, kMatchConfidence);
  return Measurement::binary(Label::kNotSignificant, kDefaultConfidence);
}

Measurement parse_measurement_reply(std::string_view line, std::string* req_id) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error&) {
    throw ProtocolError("measurer reply is not JSON: " + std::string(line));
  }
  if (!obj.is_object() || !obj.contains("req_id"))
    throw ProtocolError("measurer reply lacks req_id: " + std::string(line));
  const json& id = obj["req_id"];
  if (req_id) *req_id = id.is_string() ? id.get<std::string>() : id.dump();
  if (auto err = obj.find("error"); err != obj.end())
    throw ProtocolError("measurer reported error: " +
                        (err->is_string() ? err->get<std::string>() : err->dump()));
  if (!obj.contains("kind") || !obj["kind"].is_string())
    throw ProtocolError("measurer reply lacks kind: " + std::string(line));
  const std::string kind = obj["kind"].get<std::string>();
  try {
    if (kind == "continuous") {
      if (!obj.contains("value") || !obj["value"].is_number())
        throw ProtocolError("continuous reply lacks numeric value");
      return Measurement::continuous(obj["value"].get<double>());
    }
    if (kind == "binary") {
      if (!obj.contains("label") || !obj["label"].is_string())
        throw ProtocolError("binary reply lacks label");
      auto label = parse_label(obj["label"].get<std::string>());
      if (!label) throw ProtocolError("unknown label '" + obj["label"].get<std::string>() + "'");
      double conf = 1.0;
      if (obj.contains("confidence")) {
        if (!obj["confidence"].is_number()) throw ProtocolError("confidence must be numeric");
        conf = obj["confidence"].get<double>();
      }
      return Measurement::binary(*label, conf);
    }
  } catch (const DomainError& e) {
    throw ProtocolError(std::string("measurer reply out of range: ") + e.what());
  }
  throw ProtocolError("unknown measurement kind '" + kind + "'");
}

std::string format_measurement_reply(std::string_view req_id, const Measurement& m) {
  json obj;
  obj["req_id"] = std::string(req_id);
  obj["kind"] = std::string(to_string(m.kind()));
  if (m.is_continuous()) {
    obj["value"] = m.value();
  } else {
    obj["label"] = std::string(to_string(m.label()));
  }
  obj["confidence"] = m.confidence();
  return obj.dump();
}

ExternalMeasurer::ExternalMeasurer(Options options)
    : options_(std::move(options)),
      channel_(open_channel(parse_endpoint(options_.endpoint), options_.timeout)) {
  if (options_.max_in_flight == 0) options_.max_in_flight = 1;
}

ExternalMeasurer::~ExternalMeasurer() = default;

Measurement ExternalMeasurer::measure(std::string_view text) const {
  std::vector<std::string> one{std::string(text)};
  return measure_batch(one).front();
}

std::vector<Measurement> ExternalMeasurer::measure_batch(std::span<const std::string> texts) const {
  std::vector<std::optional<Measurement>> slots(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) require_text(texts[i]);

  for (std::size_t begin = 0; begin < texts.size(); begin += options_.max_in_flight) {
    const std::size_t end = std::min(texts.size(), begin + options_.max_in_flight);
    std::map<std::string, std::size_t> pending;
    std::vector<std::string> lines;
    for (std::size_t i = begin; i < end; ++i) {
      const std::string id = "m" + std::to_string(next_req_++);
      pending.emplace(id, i);
      lines.push_back(json{{"req_id", id}, {"text", texts[i]}}.dump());
    }
    channel_->exchange(lines, [&](std::string_view line) {
      std::string id;
      std::size_t index = begin;
      try {
        Measurement m = parse_measurement_reply(line, &id);
        auto it = pending.find(id);
        if (it == pending.end()) throw ProtocolError("reply for unknown req_id '" + id + "'");
        index = it->second;
        if (m.kind() != options_.kind)
          throw ProtocolError("expected a " + std::string(to_string(options_.kind)) +
                              " measurement, got " + std::string(to_string(m.kind())));
        slots[index] = m;
        pending.erase(it);
      } catch (const ProtocolError& e) {
        if (auto it = pending.find(id); it != pending.end()) index = it->second;
        throw ProtocolError("batch item " + std::to_string(index) + ": " + e.what());
      }
      return pending.empty();
    });
  }

  std::vector<Measurement> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(*s);
  return out;
}

MeasurerSpec::Kind parse_measurer_kind(std::string_view name) {
  if (name == "lexicon" || name == "builtin_lexicon") return MeasurerSpec::Kind::kBuiltinLexicon;
  if (name == "keyword" || name == "builtin_keyword") return MeasurerSpec::Kind::kBuiltinKeyword;
  if (name == "external") return MeasurerSpec::Kind::kExternal;
  throw ConfigError("unknown measurer kind '" + std::string(name) + "'");
}

std::string_view to_string(MeasurerSpec::Kind kind) {
  switch (kind) {
    case MeasurerSpec::Kind::kBuiltinLexicon: return "builtin_lexicon";
    case MeasurerSpec::Kind::kBuiltinKeyword: return "builtin_keyword";
    case MeasurerSpec::Kind::kExternal: return "external";
  }
  return "builtin_lexicon";
}

std::shared_ptr<const Measurer> make_measurer(const MeasurerSpec& spec) {
  switch (spec.kind) {
    case MeasurerSpec::Kind::kBuiltinLexicon:
      if (spec.lexicon_path) return std::make_shared<LexiconMeasurer>(Lexicon::load(*spec.lexicon_path));
      return std::make_shared<LexiconMeasurer>();
    case MeasurerSpec::Kind::kBuiltinKeyword:
      return std::make_shared<KeywordMeasurer>();
    case MeasurerSpec::Kind::kExternal: {
      if (!spec.endpoint || spec.endpoint->empty())
        throw ConfigError("external measurer requires an endpoint");
      ExternalMeasurer::Options opts;
      opts.endpoint = *spec.endpoint;
      opts.kind = spec.external_kind;
      opts.timeout = spec.timeout;
      opts.max_in_flight = spec.max_in_flight;
      return std::make_shared<ExternalMeasurer>(std::move(opts));
    }
  }
  throw ConfigError("unknown measurer kind");
}

Measurement measure_text(const MeasurerSpec& spec, std::string_view text) {
  return make_measurer(spec)->measure(text);
}

std::vector<Measurement> measure_batch(const MeasurerSpec& spec, std::span<const std::string> texts) {
  return make_measurer(spec)->measure_batch(texts);
}

}  // namespace synth
