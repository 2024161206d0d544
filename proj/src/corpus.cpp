// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include "synth/corpus.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

#include "synth/aggregate.h"
#include "synth/error.h"
#include "synth/random.h"

namespace synth {

using nlohmann::json;

std::string_view to_string(Task task) {
  return task == Task::kBinary ? "binary" : "continuous";
}

std::string_view to_string(Label label) {
  return label == Label::kSignificant ? "significant" : "not_significant";
}

std::optional<Label> parse_label(std::string_view text) {
  if (text == "significant" || text == "positive") return Label::kSignificant;
  if (text == "not_significant" || text == "negative") return Label::kNotSignificant;
  return std::nullopt;
}

std::optional<Task> parse_task(std::string_view text) {
  if (text == "continuous") return Task::kContinuous;
  if (text == "binary") return Task::kBinary;
  return std::nullopt;
}

Schema parse_schema(std::string_view name) {
  if (name == "movies") return Schema::kMovies;
  if (name == "trials") return Schema::kTrials;
  throw ConfigError("unknown schema '" + std::string(name) + "' (expected movies|trials)");
}

std::string_view to_string(Schema schema) {
  return schema == Schema::kMovies ? "movies" : "trials";
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "dev";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "dev") return Split::kDev;
  if (name == "test") return Split::kTest;
  throw ConfigError("unknown split '" + std::string(name) + "'");
}

std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) tokens.emplace_back(text.substr(start, i - start));
  }
  return tokens;
}

namespace {

bool blank(std::string_view text) {
  return std::all_of(text.begin(), text.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

std::string join(const std::vector<std::string>& tokens, std::size_t count) {
  std::string out;
  for (std::size_t i = 0; i < count && i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

// Typed field accessors. Missing required fields and wrong types are record
// errors, never silent defaults.
const json& require(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null())
    throw DomainError(std::string("missing field '") + key + "'");
  return *it;
}

std::string require_string(const json& obj, const char* key) {
  const json& v = require(obj, key);
  if (!v.is_string()) throw DomainError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

std::optional<double> optional_number(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw DomainError(std::string("field '") + key + "' must be a number");
  return it->get<double>();
}

std::string id_field(const json& obj) {
  const json& v = require(obj, "id");
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw DomainError("field 'id' must be a string or integer");
}

Document parse_document(const json& obj, Schema schema) {
  if (!obj.is_object()) throw DomainError("document entries must be objects");
  Document doc;
  doc.id = id_field(obj);
  doc.text = require_string(obj, "text");
  if (auto w = optional_number(obj, "weight")) doc.weight = *w;
  if (schema == Schema::kMovies) {
    doc.gold_score = optional_number(obj, "score");
  } else {
    doc.effect = optional_number(obj, "effect");
    doc.variance = optional_number(obj, "variance");
    if (auto it = obj.find("gold_label"); it != obj.end() && !it->is_null()) {
      if (!it->is_string()) throw DomainError("field 'gold_label' must be a string");
      auto label = parse_label(it->get<std::string>());
      if (!label) throw DomainError("unknown gold_label '" + it->get<std::string>() + "'");
      doc.gold_label = label;
    }
  }
  return doc;
}

const json& require_array(const json& obj, const char* key) {
  const json& v = require(obj, key);
  if (!v.is_array()) throw DomainError(std::string("field '") + key + "' must be an array");
  return v;
}

}  // namespace

void validate(const Instance& instance) {
  if (instance.id.empty()) throw DomainError("instance id is empty");
  if (instance.documents.empty()) throw DomainError("documents list is empty");
  for (const Document& doc : instance.documents) {
    const std::string where = "document '" + doc.id + "': ";
    if (blank(doc.text)) throw DomainError(where + "text is empty");
    if (!(doc.weight >= 0.0) || !std::isfinite(doc.weight))
      throw DomainError(where + "weight must be non-negative");
    if (doc.variance && !(*doc.variance > 0.0))
      throw DomainError(where + "variance must be positive");
    if (doc.gold_score && !(*doc.gold_score >= 0.0 && *doc.gold_score <= 1.0))
      throw DomainError(where + "gold score must lie in [0,1]");
  }
  const GoldAggregate& gold = instance.gold;
  if (instance.task == Task::kContinuous) {
    if (gold.value && !(*gold.value >= 0.0 && *gold.value <= 1.0))
      throw DomainError("gold aggregate must lie in [0,1]");
  } else {
    if (gold.p_value && !(*gold.p_value > 0.0 && *gold.p_value <= 1.0))
      throw DomainError("p_value must lie in (0,1]");
    if (!gold.p_value && !gold.label)
      throw DomainError("binary instance needs a p_value or a resolved label");
  }
}

Instance parse_record(std::string_view line, Schema schema) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("malformed record: ") + e.what());
  }
  if (!obj.is_object()) throw DomainError("record must be an object");

  Instance inst;
  inst.id = id_field(obj);
  if (schema == Schema::kMovies) {
    inst.task = Task::kContinuous;
    for (const json& r : require_array(obj, "reviews"))
      inst.documents.push_back(parse_document(r, schema));
    inst.reference_summary = require_string(obj, "meta_review");
    const json& t = require(obj, "tomatometer");
    if (!t.is_number()) throw DomainError("field 'tomatometer' must be a number");
    inst.gold.value = t.get<double>();
  } else {
    inst.task = Task::kBinary;
    for (const json& s : require_array(obj, "studies"))
      inst.documents.push_back(parse_document(s, schema));
    inst.reference_summary = require_string(obj, "summary");
    inst.gold.p_value = optional_number(obj, "p_value");
    if (inst.gold.p_value && !(*inst.gold.p_value > 0.0 && *inst.gold.p_value <= 1.0))
      throw DomainError("p_value must lie in (0,1]");
    if (!inst.gold.p_value) {
      // Resolve the gold label by recomputing the fixed-effects meta-analysis.
      const bool complete = std::all_of(
          inst.documents.begin(), inst.documents.end(),
          [](const Document& d) { return d.effect && d.variance && *d.variance > 0.0; });
      if (complete && !inst.documents.empty()) {
        std::vector<Study> studies;
        for (const Document& d : inst.documents) studies.push_back({*d.effect, *d.variance});
        inst.gold.p_value = fixed_effects_meta_analysis(studies).p_value;
      }
    }
    if (inst.gold.p_value)
      inst.gold.label = *inst.gold.p_value < kSignificanceLevel ? Label::kSignificant
                                                                : Label::kNotSignificant;
  }
  validate(inst);
  return inst;
}

std::string serialize_record(const Instance& instance, Schema schema) {
  json docs = json::array();
  for (const Document& d : instance.documents) {
    json o{{"id", d.id}, {"text", d.text}};
    if (d.weight != 1.0) o["weight"] = d.weight;
    if (schema == Schema::kMovies) {
      if (d.gold_score) o["score"] = *d.gold_score;
    } else {
      if (d.effect) o["effect"] = *d.effect;
      if (d.variance) o["variance"] = *d.variance;
      if (d.gold_label) o["gold_label"] = std::string(to_string(*d.gold_label));
    }
    docs.push_back(std::move(o));
  }
  json obj;
  obj["id"] = instance.id;
  if (schema == Schema::kMovies) {
    obj["reviews"] = std::move(docs);
    obj["meta_review"] = instance.reference_summary;
    obj["tomatometer"] = instance.gold.value.value_or(0.0);
  } else {
    obj["studies"] = std::move(docs);
    obj["summary"] = instance.reference_summary;
    if (instance.gold.p_value) obj["p_value"] = *instance.gold.p_value;
  }
  return obj.dump();
}

LoadedCorpus load_corpus(const std::filesystem::path& path, Schema schema, Split split) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read corpus file " + path.string());

  LoadedCorpus out;
  out.corpus.split = split;
  out.corpus.task = schema == Schema::kMovies ? Task::kContinuous : Task::kBinary;

  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line)) continue;
    try {
      Instance inst = parse_record(line, schema);
      if (!seen.insert(inst.id).second)
        throw DomainError("duplicate instance id '" + inst.id + "'");
      out.corpus.instances.push_back(std::move(inst));
    } catch (const Error& e) {
      out.errors.push_back({line_no, e.what()});
    }
  }
  if (in.bad()) throw Error("error while reading " + path.string());
  if (out.corpus.instances.empty() && out.errors.empty())
    out.warnings.push_back("corpus file " + path.string() + " contains no records");
  return out;
}

void write_corpus(const std::filesystem::path& path, const Corpus& corpus, Schema schema) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write corpus file " + path.string());
  for (const Instance& inst : corpus.instances) out << serialize_record(inst, schema) << '\n';
  if (!out) throw Error("error while writing " + path.string());
}

Linearized linearize(const Instance& instance, const LinearizeOptions& options) {
  if (options.separator.empty()) throw DomainError("separator must be non-empty");

  Linearized out;
  const std::size_t sep_tokens = std::max<std::size_t>(1, whitespace_tokens(options.separator).size());
  std::size_t used = 0;

  for (const Document& doc : instance.documents) {
    std::string text = doc.text;
    if (text.find(options.separator) != std::string::npos) {
      std::size_t pos = 0;
      while ((pos = text.find(options.separator, pos)) != std::string::npos) {
        text.replace(pos, options.separator.size(), " ");
        pos += 1;
      }
      out.warnings.push_back("separator occurs in document '" + doc.id + "'; replaced by a space");
    }
    const auto tokens = whitespace_tokens(text);
    std::size_t keep = tokens.size();
    if (options.max_length) {
      const std::size_t budget = *options.max_length;
      if (used + sep_tokens >= budget) {
        out.truncated = true;
        break;
      }
      const std::size_t room = budget - used - sep_tokens;
      if (keep > room) {
        keep = room;
        out.truncated = true;
      }
    }
    if (!out.text.empty()) out.text += ' ';
    out.text += options.separator;
    if (keep > 0) {
      out.text += ' ';
      out.text += join(tokens, keep);
    }
    used += sep_tokens + keep;
    ++out.documents_kept;
  }
  return out;
}

Instance permute_documents(const Instance& instance, std::uint64_t seed) {
  Instance copy = instance;
  std::mt19937_64 rng(seed);
  portable_shuffle(std::span<Document>(copy.documents), rng);
  return copy;
}

}  // namespace synth
