// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include "synth/runner.h"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include "synth/error.h"
#include "synth/metrics.h"
#include "synth/parallel.h"
#include "synth/toy_scorer.h"

namespace synth {

using nlohmann::json;

std::string_view to_string(StudyKind kind) {
  switch (kind) {
    case StudyKind::kCalibration: return "calibration";
    case StudyKind::kPermutation: return "permutation";
    case StudyKind::kComposition: return "composition";
    case StudyKind::kFlip: return "flip";
    case StudyKind::kImprove: return "improve";
  }
  return "improve";
}

StudyKind parse_study_kind(std::string_view name) {
  if (name == "calibration" || name == "calibrate") return StudyKind::kCalibration;
  if (name == "permutation" || name == "permute") return StudyKind::kPermutation;
  if (name == "composition" || name == "compose") return StudyKind::kComposition;
  if (name == "flip") return StudyKind::kFlip;
  if (name == "improve") return StudyKind::kImprove;
  throw ConfigError("unknown study kind '" + std::string(name) + "'");
}

std::size_t default_max_tokens(Schema schema) { return schema == Schema::kMovies ? 64 : 256; }

LinearizeOptions ExperimentConfig::linearize_options() const {
  LinearizeOptions o;
  o.separator = separator;
  o.max_length = max_length;
  return o;
}

StudyKind ExperimentRecord::study() const {
  return parse_study_kind(config.at("study").get<std::string>());
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, std::string_view where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return;
  try {
    if constexpr (std::is_same_v<T, std::size_t>) {
      if (!it->is_number_integer() || it->get<long long>() < 0)
        throw ConfigError("expected a non-negative integer");
      out = it->get<std::size_t>();
    } else {
      out = it->get<T>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string(where) + "." + key + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(where) + "." + key + ": " + e.what());
  }
}

template <typename T>
void read_opt(const json& obj, const char* key, std::optional<T>& out, std::string_view where) {
  if (!obj.contains(key) || obj.at(key).is_null()) return;
  T v{};
  read(obj, key, v, where);
  out = v;
}

void read_ms(const json& obj, const char* key, std::chrono::milliseconds& out, std::string_view where) {
  std::size_t ms = static_cast<std::size_t>(out.count());
  read(obj, key, ms, where);
  out = std::chrono::milliseconds(ms);
}

MeasureKind parse_measure_kind(std::string_view name) {
  if (name == "continuous") return MeasureKind::kContinuous;
  if (name == "binary") return MeasureKind::kBinary;
  throw ConfigError("unknown measurement kind '" + std::string(name) + "'");
}

std::string_view to_string(RemovalOrder r) {
  return r == RemovalOrder::kWeakestFirst ? "weakest_first" : "seeded_random";
}

RemovalOrder parse_removal(std::string_view name) {
  if (name == "weakest_first") return RemovalOrder::kWeakestFirst;
  if (name == "seeded_random" || name == "random") return RemovalOrder::kSeededRandom;
  throw ConfigError("unknown removal order '" + std::string(name) + "'");
}

std::string_view to_string(SelectionPolicy::OracleSource s) {
  return s == SelectionPolicy::OracleSource::kGoldAggregate ? "gold" : "reference";
}

SelectionPolicy::OracleSource parse_oracle_source(std::string_view name) {
  if (name == "gold") return SelectionPolicy::OracleSource::kGoldAggregate;
  if (name == "reference") return SelectionPolicy::OracleSource::kReferenceMeasure;
  throw ConfigError("unknown oracle source '" + std::string(name) + "'");
}

std::string_view generator_kind_name(GeneratorSpec::Kind k) {
  return k == GeneratorSpec::Kind::kToy ? "toy" : "external";
}

template <typename Parse>
auto parse_with(const json& obj, const char* key, Parse parse, std::string_view where)
    -> std::optional<decltype(parse(std::string_view{}))> {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  if (!obj.at(key).is_string()) throw ConfigError(std::string(where) + "." + key + ": expected a string");
  return parse(obj.at(key).get<std::string>());
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  check_keys(j, {"study", "corpus", "generator", "measurer", "decode", "selection", "permutation",
                 "composition", "threshold", "seed", "output_dir", "workers"},
             "config");
  if (auto s = parse_with(j, "study", parse_study_kind, "config")) c.study = *s;

  if (j.contains("corpus")) {
    const json& o = j.at("corpus");
    check_keys(o, {"path", "schema", "split", "max_length", "separator"}, "corpus");
    std::string path;
    read(o, "path", path, "corpus");
    c.corpus_path = path;
    if (auto s = parse_with(o, "schema", parse_schema, "corpus")) c.schema = *s;
    if (auto s = parse_with(o, "split", parse_split, "corpus")) c.split = *s;
    read_opt(o, "max_length", c.max_length, "corpus");
    read(o, "separator", c.separator, "corpus");
  }

  if (j.contains("generator")) {
    const json& o = j.at("generator");
    check_keys(o, {"kind", "order", "smoothing", "train_corpus", "endpoint", "n", "temperature", "timeout_ms"},
               "generator");
    if (auto k = parse_with(o, "kind", [](std::string_view n) {
          if (n == "toy") return GeneratorSpec::Kind::kToy;
          if (n == "external") return GeneratorSpec::Kind::kExternal;
          throw ConfigError("unknown generator kind '" + std::string(n) + "'");
        }, "generator"))
      c.generator.kind = *k;
    read(o, "order", c.generator.order, "generator");
    read(o, "smoothing", c.generator.smoothing, "generator");
    std::optional<std::string> train;
    read_opt(o, "train_corpus", train, "generator");
    if (train) c.generator.train_corpus = *train;
    read_opt(o, "endpoint", c.generator.endpoint, "generator");
    read(o, "n", c.generator.n, "generator");
    read(o, "temperature", c.generator.temperature, "generator");
    read_ms(o, "timeout_ms", c.generator.timeout, "generator");
  }

  if (j.contains("measurer")) {
    const json& o = j.at("measurer");
    check_keys(o, {"kind", "endpoint", "lexicon", "output", "timeout_ms", "max_in_flight"}, "measurer");
    if (auto k = parse_with(o, "kind", parse_measurer_kind, "measurer")) c.measurer.kind = *k;
    read_opt(o, "endpoint", c.measurer.endpoint, "measurer");
    std::optional<std::string> lex;
    read_opt(o, "lexicon", lex, "measurer");
    if (lex) c.measurer.lexicon_path = *lex;
    if (auto k = parse_with(o, "output", parse_measure_kind, "measurer")) c.measurer.external_kind = *k;
    read_ms(o, "timeout_ms", c.measurer.timeout, "measurer");
    read(o, "max_in_flight", c.measurer.max_in_flight, "measurer");
  }

  bool max_tokens_given = false;
  if (j.contains("decode")) {
    const json& o = j.at("decode");
    check_keys(o, {"mode", "beam_width", "groups", "beams_per_group", "diversity_lambda", "max_tokens",
                   "epsilon", "length_normalize"},
               "decode");
    if (auto m = parse_with(o, "mode", parse_decode_mode, "decode")) c.decode.mode = *m;
    read(o, "beam_width", c.decode.beam_width, "decode");
    read(o, "groups", c.decode.groups, "decode");
    read(o, "beams_per_group", c.decode.beams_per_group, "decode");
    read(o, "diversity_lambda", c.decode.diversity_lambda, "decode");
    read(o, "max_tokens", c.decode.max_tokens, "decode");
    max_tokens_given = o.contains("max_tokens") && !o.at("max_tokens").is_null();
    read_opt(o, "epsilon", c.decode.epsilon, "decode");
    read(o, "length_normalize", c.decode.length_normalize, "decode");
  }

  if (j.contains("selection")) {
    const json& o = j.at("selection");
    check_keys(o, {"policy", "oracle_source", "abstain_distance"}, "selection");
    if (auto p = parse_with(o, "policy", parse_policy_kind, "selection")) c.policy.kind = *p;
    if (auto s = parse_with(o, "oracle_source", parse_oracle_source, "selection")) c.policy.oracle_source = *s;
    read_opt(o, "abstain_distance", c.policy.abstain_distance, "selection");
  }

  if (j.contains("permutation")) {
    const json& o = j.at("permutation");
    check_keys(o, {"count"}, "permutation");
    read(o, "count", c.permutations, "permutation");
  }

  if (j.contains("composition")) {
    const json& o = j.at("composition");
    check_keys(o, {"fractions", "removal"}, "composition");
    read(o, "fractions", c.fractions, "composition");
    if (auto r = parse_with(o, "removal", parse_removal, "composition")) c.removal = *r;
  }

  read(j, "threshold", c.threshold, "config");
  read(j, "seed", c.seed, "config");
  std::string out = c.output_dir.string();
  read(j, "output_dir", out, "config");
  c.output_dir = out;
  read(j, "workers", c.workers, "config");
  c.policy.threshold = c.threshold;
  if (!max_tokens_given) c.decode.max_tokens = default_max_tokens(c.schema);
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  auto opt = [](const auto& v) -> json { return v ? json(*v) : json(nullptr); };
  json j;
  j["study"] = to_string(c.study);
  j["corpus"] = {{"path", c.corpus_path.string()},
                 {"schema", to_string(c.schema)},
                 {"split", to_string(c.split)},
                 {"max_length", opt(c.max_length)},
                 {"separator", c.separator}};
  j["generator"] = {{"kind", generator_kind_name(c.generator.kind)},
                    {"order", c.generator.order},
                    {"smoothing", c.generator.smoothing},
                    {"train_corpus", c.generator.train_corpus ? json(c.generator.train_corpus->string()) : json(nullptr)},
                    {"endpoint", opt(c.generator.endpoint)},
                    {"n", c.generator.n},
                    {"temperature", c.generator.temperature},
                    {"timeout_ms", c.generator.timeout.count()}};
  j["measurer"] = {{"kind", to_string(c.measurer.kind)},
                   {"endpoint", opt(c.measurer.endpoint)},
                   {"lexicon", c.measurer.lexicon_path ? json(c.measurer.lexicon_path->string()) : json(nullptr)},
                   {"output", to_string(c.measurer.external_kind)},
                   {"timeout_ms", c.measurer.timeout.count()},
                   {"max_in_flight", c.measurer.max_in_flight}};
  j["decode"] = {{"mode", to_string(c.decode.mode)},
                 {"beam_width", c.decode.beam_width},
                 {"groups", c.decode.groups},
                 {"beams_per_group", c.decode.beams_per_group},
                 {"diversity_lambda", c.decode.diversity_lambda},
                 {"max_tokens", c.decode.max_tokens},
                 {"epsilon", opt(c.decode.epsilon)},
                 {"length_normalize", c.decode.length_normalize}};
  j["selection"] = {{"policy", to_string(c.policy.kind)},
                    {"oracle_source", to_string(c.policy.oracle_source)},
                    {"abstain_distance", opt(c.policy.abstain_distance)}};
  j["permutation"] = {{"count", c.permutations}};
  j["composition"] = {{"fractions", c.fractions}, {"removal", to_string(c.removal)}};
  j["threshold"] = c.threshold;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir.string();
  j["workers"] = c.workers;
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void apply_env_overrides(ExperimentConfig& config) {
  if (const char* g = std::getenv("SYNTH_GENERATOR_ENDPOINT"); g && *g) {
    config.generator.kind = GeneratorSpec::Kind::kExternal;
    config.generator.endpoint = g;
  }
  if (const char* m = std::getenv("SYNTH_MEASURER_ENDPOINT"); m && *m) {
    config.measurer.kind = MeasurerSpec::Kind::kExternal;
    config.measurer.endpoint = m;
  }
}

void validate(const ExperimentConfig& c) {
  if (c.corpus_path.empty()) throw ConfigError("corpus path is required");
  if (c.workers < 1) throw ConfigError("workers must be at least 1");
  if (!(c.threshold >= 0.0 && c.threshold <= 1.0)) throw ConfigError("threshold must lie in [0,1]");
  if (c.max_length && *c.max_length == 0) throw ConfigError("max_length must be positive");
  if (c.generator.kind == GeneratorSpec::Kind::kExternal && !c.generator.endpoint)
    throw ConfigError("external generator needs an endpoint");
  if (c.generator.kind == GeneratorSpec::Kind::kToy && (c.generator.order < 1 || c.generator.smoothing <= 0.0))
    throw ConfigError("toy generator needs order >= 1 and smoothing > 0");
  if (c.generator.n < 1) throw ConfigError("generator n must be at least 1");
  if (c.measurer.kind == MeasurerSpec::Kind::kExternal && !c.measurer.endpoint)
    throw ConfigError("external measurer needs an endpoint");
  if (c.generator.kind == GeneratorSpec::Kind::kToy) validate(c.decode);

  const bool binary_task = c.schema == Schema::kTrials;
  const MeasureKind mk = c.measurer.kind == MeasurerSpec::Kind::kBuiltinKeyword ? MeasureKind::kBinary
                         : c.measurer.kind == MeasurerSpec::Kind::kExternal     ? c.measurer.external_kind
                                                                                : MeasureKind::kContinuous;
  switch (c.study) {
    case StudyKind::kCalibration:
      if (!binary_task && mk != MeasureKind::kContinuous)
        throw ConfigError("calibration on a continuous task needs a continuous measurer");
      break;
    case StudyKind::kPermutation:
      if (c.permutations < 2) throw ConfigError("permutation count must be at least 2");
      if (!binary_task && mk != MeasureKind::kContinuous)
        throw ConfigError("permutation study on a continuous task needs a continuous measurer");
      break;
    case StudyKind::kComposition:
      if (mk != MeasureKind::kContinuous) throw ConfigError("composition study needs a continuous measurer");
      if (c.fractions.empty()) throw ConfigError("composition study needs at least one removal fraction");
      for (double f : c.fractions)
        if (!(f > 0.0 && f <= 1.0)) throw ConfigError("removal fractions must lie in (0,1]");
      break;
    case StudyKind::kFlip:
      if (!binary_task) throw ConfigError("flip study requires the trials schema");
      break;
    case StudyKind::kImprove:
      if (binary_task != c.policy.is_binary())
        throw ConfigError(std::string("selection policy '") + std::string(to_string(c.policy.kind)) +
                          "' does not fit the " + std::string(to_string(c.schema)) + " task");
      if (!binary_task && mk != MeasureKind::kContinuous)
        throw ConfigError("nearest selection needs a continuous measurer");
      break;
  }
}

// ---------------------------------------------------------------------------
// Per-instance study work

namespace {

json measurement_json(const Measurement& m) {
  if (m.is_continuous()) return m.value();
  return {{"label", to_string(m.label())}, {"confidence", m.confidence()}};
}

json meta_json(const MetaAnalysisResult& r) {
  return {{"pooled_effect", r.pooled_effect},
          {"standard_error", r.standard_error},
          {"z_score", r.z_score},
          {"p_value", r.p_value},
          {"significant", r.significant}};
}

Label label_of(const Measurement& m, double threshold) {
  return m.is_continuous() ? binarize(m, threshold).label() : m.label();
}

template <typename F>
auto in_stage(const char* name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(name, e.what());
  }
}

std::vector<std::string> texts_of(const Instance& instance) {
  std::vector<std::string> out;
  for (const Document& d : instance.documents) out.push_back(d.text);
  return out;
}

std::string first_candidate(const Generator& gen, const Instance& instance, const LinearizeOptions& lin) {
  const Linearized input = linearize(instance, lin);
  CandidateSet set = gen.generate({instance, input.text, std::nullopt});
  if (set.candidates.empty()) throw DomainError("empty candidate set");
  return set.candidates.front().text;
}

struct Context {
  const ExperimentConfig& config;
  const Generator& generator;
  const Measurer& measurer;
};

json calibration_instance(const Context& cx, const Instance& in) {
  const auto docs = in_stage("measure_documents", [&] { return cx.measurer.measure_batch(texts_of(in)); });
  const Measurement ref = in_stage("measure_reference", [&] { return cx.measurer.measure(in.reference_summary); });
  json j;
  json dm = json::array();
  for (const Measurement& m : docs) dm.push_back(measurement_json(m));
  j["document_measures"] = dm;
  j["reference_measure"] = measurement_json(ref);
  if (in.task == Task::kContinuous) {
    if (!in.gold.value) throw PipelineError("evaluate", "instance lacks a gold aggregate value");
    j["input_aggregate"] = fraction_positive(docs, cx.config.threshold);
    j["gold_value"] = *in.gold.value;
  } else {
    if (!in.gold.label) throw PipelineError("evaluate", "instance lacks a gold label");
    std::vector<Label> labels;
    for (const Measurement& m : docs) labels.push_back(label_of(m, cx.config.threshold));
    j["input_label"] = to_string(majority_vote(labels));
    j["reference_label"] = to_string(label_of(ref, cx.config.threshold));
    j["gold_label"] = to_string(*in.gold.label);
  }
  return j;
}

json permutation_instance(const Context& cx, const Instance& in) {
  PermutationOptions o;
  o.permutations = cx.config.permutations;
  o.seed = cx.config.seed;
  o.threshold = cx.config.threshold;
  o.linearize = cx.config.linearize_options();
  const PermutationStudy s = in_stage("permute", [&] { return run_permutation_study(in, cx.generator, cx.measurer, o); });
  json j;
  j["n_permutations"] = s.n_permutations;
  j["seeds"] = s.seeds;
  if (in.task == Task::kContinuous) {
    j["measures"] = s.measures;
    j["spread"] = s.spread;
  } else {
    json labels = json::array();
    for (Label l : s.labels) labels.push_back(to_string(l));
    j["labels"] = labels;
    j["p_fraction"] = *s.p_fraction;
    j["entropy_bits"] = *s.entropy_bits;
  }
  j["rouge1"] = s.rouge1;
  return j;
}

json composition_instance(const Context& cx, const Instance& in) {
  CompositionOptions o;
  o.threshold = cx.config.threshold;
  o.fractions = cx.config.fractions;
  o.removal = cx.config.removal;
  o.seed = cx.config.seed;
  o.linearize = cx.config.linearize_options();
  const CompositionStudy s = in_stage("compose", [&] { return run_composition_study(in, cx.generator, cx.measurer, o); });
  json j;
  if (s.skipped_reason) {
    j["skipped_reason"] = *s.skipped_reason;
    return j;
  }
  json pts = json::array();
  for (const CompositionPoint& p : s.points) {
    pts.push_back({{"fraction_removed", p.fraction_removed},
                   {"polarity", p.polarity_removed ? json(to_string(*p.polarity_removed)) : json(nullptr)},
                   {"removed_ids", p.removed_ids},
                   {"input_aggregate", p.input_aggregate},
                   {"output_measure", p.output_measure},
                   {"polarity_exhausted", p.polarity_exhausted}});
  }
  j["points"] = pts;
  j["fitted_slope"] = s.fitted_slope;
  j["fitted_intercept"] = s.fitted_intercept;
  return j;
}

json flip_instance(const Context& cx, const Instance& in) {
  json j;
  FlipConstruction f;
  try {
    f = construct_significance_flip(in);
  } catch (const DomainError& e) {
    if (std::string_view(e.what()) != "instance not flippable") throw PipelineError("flip", e.what());
    j["flippable"] = false;
    return j;
  }
  const LinearizeOptions lin = cx.config.linearize_options();
  const std::string before = in_stage("decode", [&] { return first_candidate(cx.generator, in, lin); });
  const std::string after = in_stage("decode", [&] { return first_candidate(cx.generator, f.flipped, lin); });
  const Label lb = in_stage("measure_output", [&] { return label_of(cx.measurer.measure(before), cx.config.threshold); });
  const Label la = in_stage("measure_output", [&] { return label_of(cx.measurer.measure(after), cx.config.threshold); });
  j["flippable"] = true;
  j["removed_ids"] = f.removed_document_ids;
  j["before"] = meta_json(f.before);
  j["after"] = meta_json(f.after);
  j["output_before"] = to_string(lb);
  j["output_after"] = to_string(la);
  j["output_flipped"] = lb != la;
  j["flipped_record"] = json::parse(serialize_record(f.flipped, Schema::kTrials));
  return j;
}

json improve_instance(const Context& cx, const Instance& in) {
  const SelectionOutcome out =
      cautious_summarize(in, cx.generator, cx.measurer, cx.config.policy, cx.config.linearize_options());
  const CandidateSet& set = out.provenance.candidates;
  const double thr = cx.config.threshold;
  json j;
  j["target"] = {{"kind", to_string(out.target.kind)},
                 {"value", out.target.value},
                 {"label", out.target.label ? json(to_string(*out.target.label)) : json(nullptr)},
                 {"p_value", out.target.p_value ? json(*out.target.p_value) : json(nullptr)}};
  json texts = json::array(), measures = json::array();
  for (std::size_t i = 0; i < set.candidates.size(); ++i) {
    texts.push_back(set.candidates[i].text);
    measures.push_back(measurement_json(out.provenance.candidate_measures[i]));
  }
  j["candidates"] = texts;
  j["candidate_measures"] = measures;
  j["baseline_text"] = set.candidates.front().text;
  j["baseline_measure"] = measures.front();
  j["rouge1_baseline"] = rouge1_f(set.candidates.front().text, in.reference_summary);
  j["status"] = out.selected() ? "selected" : "abstained";
  if (out.selected()) {
    j["selected_index"] = *out.candidate_index;
    j["selected_text"] = out.candidate->text;
    j["selected_measure"] = measures[*out.candidate_index];
    j["rouge1_selected"] = rouge1_f(out.candidate->text, in.reference_summary);
  } else {
    j["reason"] = *out.reason;
  }
  if (in.task == Task::kContinuous) {
    if (!in.gold.value) throw PipelineError("evaluate", "instance lacks a gold aggregate value");
    j["gold_value"] = *in.gold.value;
  } else {
    if (!in.gold.label) throw PipelineError("evaluate", "instance lacks a gold label");
    j["gold_label"] = to_string(*in.gold.label);
    j["baseline_label"] = to_string(label_of(out.provenance.candidate_measures.front(), thr));
    if (out.selected())
      j["selected_label"] = to_string(label_of(out.provenance.candidate_measures[*out.candidate_index], thr));
  }
  if (!out.provenance.notes.empty()) j["notes"] = out.provenance.notes;
  return j;
}

json run_instance(const Context& cx, const Instance& in) {
  switch (cx.config.study) {
    case StudyKind::kCalibration: return calibration_instance(cx, in);
    case StudyKind::kPermutation: return permutation_instance(cx, in);
    case StudyKind::kComposition: return composition_instance(cx, in);
    case StudyKind::kFlip: return flip_instance(cx, in);
    case StudyKind::kImprove: return improve_instance(cx, in);
  }
  return {};
}

// ---------------------------------------------------------------------------
// Aggregation

template <typename F>
json guarded(F&& fn) {
  try {
    return fn();
  } catch (const DomainError&) {
    return nullptr;  // degenerate series, e.g. fewer than two points or zero variance
  }
}

void regression_block(json& m, const std::string& prefix, const std::vector<double>& pred,
                      const std::vector<double>& gold) {
  const PairedSeries s{pred, gold};
  m[prefix + "_r2"] = guarded([&] { return json(r_squared_centered(s)); });
  m[prefix + "_pcc"] = guarded([&] { return json(pearson(s)); });
  m[prefix + "_mse"] = guarded([&] { return json(mse(s)); });
}

void classification_block(json& m, const std::string& prefix, const std::vector<Label>& pred,
                          const std::vector<Label>& gold) {
  if (pred.empty()) {
    m[prefix + "_macro_f1"] = nullptr;
    m[prefix + "_accuracy"] = nullptr;
    return;
  }
  const ClassificationScores c = macro_f1_accuracy(pred, gold);
  m[prefix + "_macro_f1"] = c.macro_f1;
  m[prefix + "_accuracy"] = c.accuracy;
}

Label label_from(const json& v) { return *parse_label(v.get<std::string>()); }

json delta(const json& a, const json& b) {
  return a.is_number() && b.is_number() ? json(a.get<double>() - b.get<double>()) : json(nullptr);
}

json aggregate_metrics(StudyKind study, Task task, const std::vector<json>& rows) {
  json m = json::object();
  switch (study) {
    case StudyKind::kCalibration: {
      if (task == Task::kContinuous) {
        std::vector<double> ref, inp, gold;
        for (const json& r : rows) {
          ref.push_back(r["reference_measure"].get<double>());
          inp.push_back(r["input_aggregate"].get<double>());
          gold.push_back(r["gold_value"].get<double>());
        }
        regression_block(m, "reference", ref, gold);
        regression_block(m, "inputs", inp, gold);
      } else {
        std::vector<Label> ref, inp, gold;
        for (const json& r : rows) {
          ref.push_back(label_from(r["reference_label"]));
          inp.push_back(label_from(r["input_label"]));
          gold.push_back(label_from(r["gold_label"]));
        }
        classification_block(m, "reference", ref, gold);
        classification_block(m, "inputs", inp, gold);
      }
      break;
    }
    case StudyKind::kPermutation: {
      std::vector<double> rouge_ranges;
      double rouge_sum = 0.0;
      std::size_t rouge_n = 0;
      for (const json& r : rows) {
        const auto ro = r["rouge1"].get<std::vector<double>>();
        for (double v : ro) rouge_sum += v;
        rouge_n += ro.size();
        if (!ro.empty()) rouge_ranges.push_back(*std::max_element(ro.begin(), ro.end()) -
                                                *std::min_element(ro.begin(), ro.end()));
      }
      if (task == Task::kContinuous) {
        double abs_sum = 0.0, sq_sum = 0.0, max_abs = 0.0;
        std::size_t n = 0;
        for (const json& r : rows) {
          for (double v : r["spread"].get<std::vector<double>>()) {
            abs_sum += std::abs(v);
            sq_sum += v * v;
            max_abs = std::max(max_abs, std::abs(v));
            ++n;
          }
        }
        m["spread_values"] = n;
        m["spread_mean_abs"] = n ? json(abs_sum / static_cast<double>(n)) : json(nullptr);
        m["spread_std"] = n ? json(std::sqrt(sq_sum / static_cast<double>(n))) : json(nullptr);
        m["spread_max_abs"] = max_abs;
      } else {
        std::vector<double> ent;
        std::size_t invariant = 0;
        for (const json& r : rows) {
          ent.push_back(r["entropy_bits"].get<double>());
          invariant += ent.back() == 0.0;
        }
        m["entropy_mean_bits"] = ent.empty() ? json(nullptr) : json(mean(ent));
        m["order_invariant_fraction"] =
            ent.empty() ? json(nullptr) : json(static_cast<double>(invariant) / static_cast<double>(ent.size()));
      }
      m["rouge1_mean"] = rouge_n ? json(rouge_sum / static_cast<double>(rouge_n)) : json(nullptr);
      m["rouge1_range_mean"] = rouge_ranges.empty() ? json(nullptr) : json(mean(rouge_ranges));
      break;
    }
    case StudyKind::kComposition: {
      std::vector<double> slopes, intercepts, xs, ys;
      std::size_t skipped = 0;
      for (const json& r : rows) {
        if (r.contains("skipped_reason")) {
          ++skipped;
          continue;
        }
        slopes.push_back(r["fitted_slope"].get<double>());
        intercepts.push_back(r["fitted_intercept"].get<double>());
        for (const json& p : r["points"]) {
          xs.push_back(p["input_aggregate"].get<double>());
          ys.push_back(p["output_measure"].get<double>());
        }
      }
      m["instances_fitted"] = slopes.size();
      m["instances_skipped"] = skipped;
      m["slope_mean"] = slopes.empty() ? json(nullptr) : json(mean(slopes));
      m["intercept_mean"] = intercepts.empty() ? json(nullptr) : json(mean(intercepts));
      m["pooled_slope"] = guarded([&] { return json(least_squares(xs, ys).slope); });
      break;
    }
    case StudyKind::kFlip: {
      std::size_t flippable = 0, flipped = 0, removed = 0;
      for (const json& r : rows) {
        if (!r["flippable"].get<bool>()) continue;
        ++flippable;
        flipped += r["output_flipped"].get<bool>();
        removed += r["removed_ids"].size();
      }
      m["instances_flippable"] = flippable;
      m["instances_not_flippable"] = rows.size() - flippable;
      m["output_flip_rate"] =
          flippable ? json(static_cast<double>(flipped) / static_cast<double>(flippable)) : json(nullptr);
      m["removed_mean"] =
          flippable ? json(static_cast<double>(removed) / static_cast<double>(flippable)) : json(nullptr);
      break;
    }
    case StudyKind::kImprove: {
      std::size_t abstained = 0;
      std::vector<double> rb, rs;
      for (const json& r : rows) {
        rb.push_back(r["rouge1_baseline"].get<double>());
        if (r["status"] == "selected") rs.push_back(r["rouge1_selected"].get<double>());
        else ++abstained;
      }
      if (task == Task::kContinuous) {
        std::vector<double> bp, bg, sp, sg;
        for (const json& r : rows) {
          bp.push_back(r["baseline_measure"].get<double>());
          bg.push_back(r["gold_value"].get<double>());
          if (r["status"] == "selected") {
            sp.push_back(r["selected_measure"].get<double>());
            sg.push_back(r["gold_value"].get<double>());
          }
        }
        regression_block(m, "baseline", bp, bg);
        regression_block(m, "selected", sp, sg);
        for (const char* k : {"r2", "pcc", "mse"})
          m[std::string("delta_") + k] = delta(m[std::string("selected_") + k], m[std::string("baseline_") + k]);
      } else {
        std::vector<Label> bp, bg, sp, sg;
        for (const json& r : rows) {
          bp.push_back(label_from(r["baseline_label"]));
          bg.push_back(label_from(r["gold_label"]));
          if (r["status"] == "selected") {
            sp.push_back(label_from(r["selected_label"]));
            sg.push_back(label_from(r["gold_label"]));
          }
        }
        classification_block(m, "baseline", bp, bg);
        classification_block(m, "selected", sp, sg);
        for (const char* k : {"macro_f1", "accuracy"})
          m[std::string("delta_") + k] = delta(m[std::string("selected_") + k], m[std::string("baseline_") + k]);
      }
      m["rouge1_baseline"] = rb.empty() ? json(nullptr) : json(mean(rb));
      m["rouge1_selected"] = rs.empty() ? json(nullptr) : json(mean(rs));
      m["delta_rouge1"] = delta(m["rouge1_selected"], m["rouge1_baseline"]);
      m["abstained"] = abstained;
      m["abstention_rate"] =
          rows.empty() ? json(nullptr) : json(static_cast<double>(abstained) / static_cast<double>(rows.size()));
      break;
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Persistence

/// Appends records in index order as soon as the ordered prefix is complete.
class OrderedSink {
 public:
  OrderedSink(std::ostream* out, std::size_t n) : out_(out), pending_(n) {}

  void put(std::size_t index, std::string line) {
    std::lock_guard<std::mutex> lock(mu_);
    pending_[index] = std::move(line);
    while (next_ < pending_.size() && pending_[next_]) write(next_++);
  }

  /// Writes whatever arrived after a gap left by an interruption.
  void finish() {
    std::lock_guard<std::mutex> lock(mu_);
    for (; next_ < pending_.size(); ++next_)
      if (pending_[next_]) write(next_);
  }

 private:
  void write(std::size_t i) {
    if (out_) {
      *out_ << *pending_[i] << '\n';
      out_->flush();
    }
    pending_[i].reset();
  }

  std::mutex mu_;
  std::ostream* out_;
  std::vector<std::optional<std::string>> pending_;
  std::size_t next_ = 0;
};

json error_json(const InstanceError& e) {
  return {{"type", "error"}, {"instance_id", e.instance_id}, {"stage", e.stage}, {"cause", e.cause}};
}

json aggregate_json(const ExperimentRecord& r) {
  return {{"type", "aggregate"},
          {"study", r.config.at("study")},
          {"engine_version", r.engine_version},
          {"n_instances", r.instances.size()},
          {"n_errors", r.errors.size()},
          {"interrupted", r.interrupted},
          {"metrics", r.aggregate}};
}

struct Built {
  std::shared_ptr<const Generator> generator;
  std::shared_ptr<const Measurer> measurer;
};

Built build_components(const ExperimentConfig& c, const Corpus& corpus, const Components& overrides) {
  Built b;
  b.measurer = overrides.measurer ? overrides.measurer : make_measurer(c.measurer);
  if (overrides.generator) {
    b.generator = overrides.generator;
  } else if (c.generator.kind == GeneratorSpec::Kind::kExternal) {
    ExternalGenerator::Options o;
    o.endpoint = *c.generator.endpoint;
    o.n = c.generator.n;
    o.temperature = c.generator.temperature;
    o.timeout = c.generator.timeout;
    b.generator = std::make_shared<ExternalGenerator>(o);
  } else {
    Corpus train;
    if (c.generator.train_corpus) {
      LoadedCorpus lc = load_corpus(*c.generator.train_corpus, c.schema, Split::kTrain);
      if (lc.corpus.instances.empty())
        throw ConfigError("training corpus " + c.generator.train_corpus->string() + " has no usable instances");
      train = std::move(lc.corpus);
    } else {
      train = corpus;
    }
    if (train.instances.empty()) throw ConfigError("toy generator has no training summaries");
    ToyScorerOptions so;
    so.order = c.generator.order;
    so.smoothing = c.generator.smoothing;
    so.separator = c.separator;
    auto scorer = train_toy_scorer(train, c.generator.order, c.generator.smoothing, so);
    b.generator = std::make_shared<DecodingGenerator>(scorer, c.decode, b.measurer);
  }
  return b;
}

}  // namespace

namespace {

ExperimentRecord run_impl(const ExperimentConfig& config, const Corpus& input, const Components& overrides,
                          const RunOptions& options, const std::vector<InstanceError>& preamble) {
  validate(config);
  const auto started = std::chrono::steady_clock::now();

  Corpus corpus = input;
  std::stable_sort(corpus.instances.begin(), corpus.instances.end(),
                   [](const Instance& a, const Instance& b) { return a.id < b.id; });

  const Built built = build_components(config, corpus, overrides);
  const Context cx{config, *built.generator, *built.measurer};

  ExperimentRecord record;
  record.config = config_to_json(config);
  record.errors = preamble;

  std::ofstream records;
  if (options.write_files) {
    std::error_code ec;
    std::filesystem::create_directories(config.output_dir, ec);
    if (ec) throw Error("cannot create output directory " + config.output_dir.string() + ": " + ec.message());
    records.open(config.output_dir / "records.jsonl", std::ios::trunc);
    if (!records) throw Error("cannot write " + (config.output_dir / "records.jsonl").string());
    records << json{{"type", "config"}, {"engine_version", kEngineVersion}, {"config", record.config}}.dump()
            << '\n';
    for (const InstanceError& e : preamble) records << error_json(e).dump() << '\n';
    records.flush();
  }

  const std::size_t n = corpus.instances.size();
  std::vector<std::optional<json>> results(n);
  std::vector<std::optional<InstanceError>> failures(n);
  OrderedSink sink(options.write_files ? &records : nullptr, n);
  std::atomic<bool> interrupted{false};

  parallel_for(n, config.workers, [&](std::size_t i) {
    if (options.cancel && options.cancel->load()) {
      interrupted = true;
      return;
    }
    const Instance& in = corpus.instances[i];
    try {
      json payload = run_instance(cx, in);
      json line = {{"type", "instance"}, {"study", to_string(config.study)}, {"instance_id", in.id},
                   {"task", to_string(in.task)}};
      line.update(payload);
      sink.put(i, line.dump());
      results[i] = std::move(line);
    } catch (const PipelineError& e) {
      failures[i] = InstanceError{in.id, e.stage(), e.cause()};
    } catch (const std::exception& e) {
      failures[i] = InstanceError{in.id, std::string(to_string(config.study)), e.what()};
    }
    if (failures[i]) sink.put(i, error_json(*failures[i]).dump());
  });
  sink.finish();

  for (std::size_t i = 0; i < n; ++i) {
    if (results[i]) record.instances.push_back(std::move(*results[i]));
    if (failures[i]) record.errors.push_back(*failures[i]);
  }
  record.interrupted = interrupted.load();
  record.aggregate = aggregate_metrics(config.study, corpus.task, record.instances);
  record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  if (options.write_files) {
    records << aggregate_line(record) << '\n';
    records << json{{"type", "timing"}, {"wall_seconds", record.wall_seconds}, {"workers", config.workers}}.dump()
            << '\n';
    records.flush();
    if (!records) throw Error("write to records.jsonl failed");

    std::ofstream tsv(config.output_dir / "metrics.tsv", std::ios::trunc);
    write_metrics_tsv(record, tsv);
    if (!tsv) throw Error("write to metrics.tsv failed");

    if (config.study == StudyKind::kFlip) {
      std::ofstream flipped(config.output_dir / "flipped.jsonl", std::ios::trunc);
      for (const json& row : record.instances)
        if (row.value("flippable", false)) flipped << row["flipped_record"].dump() << '\n';
    }
  }
  return record;
}

}  // namespace

ExperimentRecord run_experiment(const ExperimentConfig& config, const Corpus& corpus,
                                const Components& overrides, const RunOptions& options) {
  return run_impl(config, corpus, overrides, options, {});
}

ExperimentRecord run_experiment(const ExperimentConfig& config, const Components& overrides,
                                const RunOptions& options) {
  validate(config);
  LoadedCorpus loaded = load_corpus(config.corpus_path, config.schema, config.split);
  std::vector<InstanceError> load_errors;
  for (const RecordError& e : loaded.errors)
    load_errors.push_back({"line " + std::to_string(e.line), "load", e.message});
  return run_impl(config, loaded.corpus, overrides, options, load_errors);
}

std::string aggregate_line(const ExperimentRecord& record) { return aggregate_json(record).dump(); }

void write_metrics_tsv(const ExperimentRecord& record, std::ostream& out) {
  out << "metric\tvalue\n";
  out << "n_instances\t" << record.instances.size() << '\n';
  out << "n_errors\t" << record.errors.size() << '\n';
  for (const auto& [k, v] : record.aggregate.items()) out << k << '\t' << (v.is_null() ? "NA" : v.dump()) << '\n';
}

ExperimentRecord load_record(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open record " + path.string());
  ExperimentRecord r;
  std::string line;
  bool have_config = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      if (in.peek() == std::char_traits<char>::eof()) break;  // torn final line
      throw ProtocolError("malformed record line in " + path.string());
    }
    const std::string type = j.value("type", "");
    if (type == "config") {
      r.config = j.at("config");
      r.engine_version = j.value("engine_version", std::string(kEngineVersion));
      have_config = true;
    } else if (type == "instance") {
      r.instances.push_back(std::move(j));
    } else if (type == "error") {
      r.errors.push_back({j.at("instance_id"), j.at("stage"), j.at("cause")});
    } else if (type == "aggregate") {
      r.aggregate = j.at("metrics");
      r.interrupted = j.value("interrupted", false);
    } else if (type == "timing") {
      r.wall_seconds = j.value("wall_seconds", 0.0);
    }
  }
  if (!have_config) throw ProtocolError(path.string() + " has no config line");
  return r;
}

}  // namespace synth
