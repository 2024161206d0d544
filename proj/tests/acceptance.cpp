// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per primary criterion. Exits non-zero
// when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "synth/aggregate.h"
#include "synth/decode.h"
#include "synth/error.h"
#include "synth/metrics.h"
#include "synth/perturb.h"
#include "synth/runner.h"
#include "synth/select.h"
#include "testing.h"

namespace {

using namespace synth;
using nlohmann::json;
using testing::tag;
using testing::TagMeasurer;

// Thrown by require() with a description of the first broken expectation.
struct Unmet {
  std::string what;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Unmet{what};
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int failures = 0;

void criterion(const std::string& name, const std::function<std::string()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = true;
  try {
    detail = body();
  } catch (const Unmet& u) {
    ok = false;
    detail = u.what;
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char elapsed[32];
  std::snprintf(elapsed, sizeof elapsed, " (%.3fs)", secs);
  std::cout << (ok ? "PASS " : "FAIL ") << name << elapsed;
  if (!detail.empty()) std::cout << ": " << detail;
  std::cout << std::endl;
  failures += ok ? 0 : 1;
}

std::size_t power(std::size_t b, std::size_t e) {
  std::size_t r = 1;
  while (e--) r *= b;
  return r;
}

DecodeConfig beam_config(std::size_t width, std::size_t max_tokens) {
  DecodeConfig c;
  c.beam_width = width;
  c.max_tokens = max_tokens;
  return c;
}

DecodeConfig dbs_config(std::size_t groups, std::size_t per_group, double lambda, std::size_t max_tokens) {
  DecodeConfig c;
  c.mode = DecodeMode::kDiverseBeam;
  c.groups = groups;
  c.beams_per_group = per_group;
  c.diversity_lambda = lambda;
  c.max_tokens = max_tokens;
  return c;
}

std::string decoder_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t sequences = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const std::size_t non_eos = 1 + seed % 3;      // vocabulary of 2..4 with end-of-sequence
    const std::size_t len = 1 + (seed / 3) % 5;    // 1..5
    const testing::RandomScorer scorer(non_eos, 1000 + seed);
    const auto all = testing::enumerate_sequences(scorer, "", len);
    const auto out = beam_search(scorer, "", beam_config(power(non_eos + 1, len), len));
    sequences += all.size();
    require(!out.candidates.empty(), "no candidates for scorer " + std::to_string(seed));
    require(out.candidates.front().tokens == all.front().tokens,
            "argmax mismatch for scorer " + std::to_string(seed));
    require(std::abs(*out.candidates.front().log_prob - all.front().log_prob) <= 1e-9,
            "argmax log_prob mismatch for scorer " + std::to_string(seed));
    for (const Candidate& c : out.candidates)
      require(std::abs(*c.log_prob - rescore(scorer, c.tokens, "")) <= 1e-9, "log_prob does not rescore");
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  require(secs < 10.0, "took " + num(secs) + "s");
  return "200 scorers, " + std::to_string(sequences) + " enumerated sequences";
}

std::string dbs_limits() {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const testing::RandomScorer s(4, seed);
    const auto grouped = diverse_beam_search(s, "", dbs_config(3, 2, 0.0, 5));
    const auto single = beam_search(s, "", beam_config(2, 5));
    const std::size_t k = single.candidates.size();
    require(grouped.candidates.size() == 3 * k, "lambda=0 candidate count");
    for (std::size_t g = 0; g < 3; ++g)
      for (std::size_t i = 0; i < k; ++i) {
        require(grouped.candidates[g * k + i].tokens == single.candidates[i].tokens, "lambda=0 group differs");
        require(grouped.candidates[g * k + i].log_prob == single.candidates[i].log_prob, "lambda=0 log_prob differs");
      }

    const testing::RandomScorer wide(5, seed);
    const auto apart = diverse_beam_search(wide, "", dbs_config(5, 1, 1e6, 4));
    std::set<TokenId> firsts;
    for (const Candidate& c : apart.candidates) firsts.insert(c.tokens.front());
    require(firsts.size() == apart.candidates.size() && apart.candidates.size() == 5,
            "lambda=1e6 first tokens not distinct");
  }
  const testing::TableScorer ab({"A", "B"}, {{"", {0.6, 0.4, 0.0}}});
  const auto two = diverse_beam_search(ab, "", dbs_config(2, 1, 0.5, 3));
  require(two.candidates.size() == 2, "2-group example candidate count");
  require(two.candidates[0].text == "A" && two.candidates[1].text == "B", "2-group example picks");
  require(*two.candidates[1].log_prob == std::log(0.4), "2-group example stores raw log_prob");
  return "";
}

std::string nearest_example() {
  const std::vector<double> sentiments = {0.243, 0.429, 0.288, 0.434, 0.406};
  CandidateSet set;
  for (std::size_t i = 0; i < sentiments.size(); ++i)
    set.candidates.push_back({"candidate " + std::to_string(i) + " " + tag(sentiments[i]), -1.0 * double(i)});
  const auto out = select_nearest(set, 0.37, TagMeasurer{});
  require(out.selected(), "abstained");
  require(out.candidate->measurement->value() == 0.406, "selected " + num(out.candidate->measurement->value()));
  return "selected 0.406";
}

double doc_value(const Document& d) { return TagMeasurer{}.measure(d.text).value(); }

std::string order_invariance() {
  const Corpus corpus = testing::tagged_movies(20, 2024);
  const testing::FunctionGenerator invariant([](const GenerationRequest& r) {
    std::size_t pos = 0;
    for (const Document& d : r.instance.documents) pos += doc_value(d) >= 0.5;
    return std::vector<std::string>{tag(double(pos) / double(r.instance.documents.size()))};
  });
  const testing::FunctionGenerator sensitive([](const GenerationRequest& r) {
    return std::vector<std::string>{tag(doc_value(r.instance.documents.front()) >= 0.5 ? 0.8 : 0.2)};
  });
  PermutationOptions o;
  o.permutations = 100;
  o.seed = 7;
  double min_sensitive_entropy = 1.0;
  for (const Instance& inst : corpus.instances) {
    const auto cont = run_permutation_study(inst, invariant, TagMeasurer{}, o);
    for (double s : cont.spread) require(s == 0.0, "non-zero spread on " + inst.id);
    Instance binary = inst;
    binary.task = Task::kBinary;
    const auto flat = run_permutation_study(binary, invariant, TagMeasurer{}, o);
    require(*flat.entropy_bits == 0.0, "non-zero entropy for invariant mock on " + inst.id);
    const auto moved = run_permutation_study(binary, sensitive, TagMeasurer{}, o);
    require(*moved.entropy_bits > 0.0, "zero entropy for order-sensitive mock on " + inst.id);
    min_sensitive_entropy = std::min(min_sensitive_entropy, *moved.entropy_bits);
  }
  return "min sensitive entropy " + num(min_sensitive_entropy) + " bits";
}

std::string composition_slope() {
  const Corpus corpus = testing::tagged_movies(50, 77);
  const testing::FunctionGenerator identity(
      [](const GenerationRequest& r) { return std::vector<std::string>{tag(*r.target)}; });
  const testing::FunctionGenerator constant(
      [](const GenerationRequest&) { return std::vector<std::string>{tag(0.42)}; });
  double worst_id = 0.0, worst_const = 0.0;
  for (const Instance& inst : corpus.instances) {
    const auto a = run_composition_study(inst, identity, TagMeasurer{}, {});
    const auto b = run_composition_study(inst, constant, TagMeasurer{}, {});
    require(!a.skipped_reason && !b.skipped_reason, inst.id + " skipped");
    worst_id = std::max(worst_id, std::abs(a.fitted_slope - 1.0));
    worst_const = std::max(worst_const, std::abs(b.fitted_slope));
  }
  require(worst_id <= 0.01, "identity slope off by " + num(worst_id));
  require(worst_const <= 0.01, "constant slope off by " + num(worst_const));
  return "max |slope-1| " + num(worst_id) + ", max |slope| " + num(worst_const);
}

std::string meta_analysis() {
  const std::vector<Study> two = {{0.5, 0.1}, {0.3, 0.2}};
  const auto r2 = fixed_effects_meta_analysis(two);
  require(std::abs(r2.p_value - 0.09328995618360458) <= 1e-4, "two-study p " + num(r2.p_value));
  require(std::abs(r2.p_value - testing::quadrature_two_sided_p(r2.z_score)) <= 1e-4, "two-study quadrature");
  const std::vector<Study> one = {{1.0, 0.25}};
  const auto r1 = fixed_effects_meta_analysis(one);
  require(std::abs(r1.p_value - 0.04550026389635839) <= 1e-4, "single-study p " + num(r1.p_value));
  require(r1.significant, "single study should be significant");

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> eff(-1.0, 2.0), var(0.01, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<Study> dup, halved;
    for (std::size_t i = 0, n = 1 + rng() % 6; i < n; ++i) {
      const Study s{eff(rng), var(rng)};
      dup.insert(dup.end(), {s, s});
      halved.push_back({s.effect, s.variance / 2});
    }
    const auto a = fixed_effects_meta_analysis(dup), b = fixed_effects_meta_analysis(halved);
    worst = std::max({worst, std::abs(a.pooled_effect - b.pooled_effect), std::abs(a.standard_error - b.standard_error)});
  }
  require(worst <= 1e-12, "duplication invariance off by " + num(worst));

  std::size_t flips = 0, attempts = 0;
  std::uniform_real_distribution<double> e2(-0.4, 1.0), v2(0.02, 0.3);
  while (flips < 100) {
    require(++attempts < 100000, "could not find 100 flippable instances");
    Instance inst;
    inst.id = "flip-" + std::to_string(attempts);
    inst.task = Task::kBinary;
    for (std::size_t i = 0, n = 2 + rng() % 7; i < n; ++i) {
      Document d{"s" + std::to_string(i), "study"};
      d.effect = e2(rng);
      d.variance = v2(rng);
      inst.documents.push_back(d);
    }
    FlipConstruction f;
    try {
      f = construct_significance_flip(inst);
    } catch (const DomainError&) {
      continue;
    }
    ++flips;
    std::vector<Study> rest;
    for (const Document& d : f.flipped.documents) rest.push_back({*d.effect, *d.variance});
    const auto again = fixed_effects_meta_analysis(rest);
    const auto before = fixed_effects_meta_analysis(studies_of(inst));
    require(again == f.after && before == f.before, "flip result does not revalidate on " + inst.id);
    require(again.significant != before.significant, "significance did not flip on " + inst.id);
  }
  return "100 flips from " + std::to_string(attempts) + " random instances";
}

std::vector<Label> labels_of(const std::vector<int>& v) {
  std::vector<Label> out;
  for (int x : v) out.push_back(x ? Label::kSignificant : Label::kNotSignificant);
  return out;
}

std::string metrics_suite() {
  auto near = [](double a, double b) { return std::abs(a - b) <= 1e-4; };
  require(near(r_squared_centered({{0, 1, 1}, {0, 1, 2}}), 0.5), "r2 example");
  require(near(pearson({{1, 2, 3}, {1, 2, 4}}), 0.9820), "pearson example");
  require(near(mse({{0.1, 0.3}, {0.2, 0.1}}), 0.025), "mse example");
  const auto f = macro_f1_accuracy(labels_of({1, 0, 1, 0}), labels_of({1, 0, 0, 0}));
  require(near(f.macro_f1, 0.7333) && near(f.accuracy, 0.75), "macro-F1 example");
  require(near(rouge1_f("the cat sat", "the cat"), 0.8), "rouge1 example");
  const auto h = histogram(std::vector{0.0, 0.5, 1.0}, 2, std::pair{0.0, 1.0});
  require(h.size() == 2 && h[0].count == 1 && h[1].count == 2, "histogram example");
  require(near(binary_entropy(0.25), 0.8113), "entropy example");

  std::mt19937_64 rng(5);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = t < 10 ? 10000 : 1 + rng() % 300;
    std::vector<int> p(n), g(n);
    const bool one_class = rng() % 5 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = one_class ? 0 : int(rng() % 2);
      g[i] = int(rng() % 2);
    }
    const auto got = macro_f1_accuracy(labels_of(p), labels_of(g));
    const auto want = testing::brute_force_f1(p, g);
    require(std::abs(got.macro_f1 - want.macro_f1) <= 1e-12 && std::abs(got.accuracy - want.accuracy) <= 1e-12,
            "F1 oracle disagreement at vector " + std::to_string(t));
  }

  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> x, y;
    for (std::size_t i = 0, n = 3 + rng() % 60; i < n; ++i) {
      x.push_back(u(rng));
      y.push_back(0.3 * x.back() + u(rng));
    }
    const LinearFit fit = least_squares(x, y);
    PairedSeries s;
    s.targets = y;
    for (double xi : x) s.predictions.push_back(fit.intercept + fit.slope * xi);
    const double r = pearson(s);
    worst = std::max(worst, std::abs(r_squared_centered(s) - r * r));
  }
  require(worst <= 1e-9, "R2 vs PCC^2 off by " + num(worst));
  return "max |R2-PCC^2| " + num(worst);
}

std::filesystem::path scratch(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("synth_acceptance_" + name);
}

std::string improve_delta() {
  const Corpus corpus = testing::lexicon_movies(10, 31);
  ExperimentConfig c;
  c.study = StudyKind::kImprove;
  c.corpus_path = "in-memory";
  c.output_dir = scratch("improve");
  c.decode.max_tokens = 16;
  const auto r = run_experiment(c, corpus, {}, {});
  require(r.errors.empty(), "instance errors: " + (r.errors.empty() ? "" : r.errors[0].cause));
  // Precondition: every candidate set holds a candidate better aligned with
  // the gold aggregate than the first one.
  for (const json& row : r.instances) {
    const double gold = row["gold_value"];
    const double first = std::abs(row["baseline_measure"].get<double>() - gold);
    double best = first;
    for (const json& m : row["candidate_measures"]) best = std::min(best, std::abs(m.get<double>() - gold));
    require(best < first || first < 0.1, "no well-aligned candidate for " + row["instance_id"].get<std::string>());
  }
  const double base = r.aggregate["baseline_r2"], sel = r.aggregate["selected_r2"];
  require(sel > base, "selected R2 " + num(sel) + " <= baseline R2 " + num(base));
  return "baseline R2 " + num(base) + " -> selected R2 " + num(sel);
}

std::string abstention() {
  const Corpus corpus = testing::synthetic_trials(20, 8);
  // Instances whose index is a multiple of 3 only ever get summaries that
  // contradict the gold label.
  std::set<std::string> starved;
  for (std::size_t i = 0; i < corpus.instances.size(); i += 3) starved.insert(corpus.instances[i].id);
  auto gen = std::make_shared<testing::FunctionGenerator>(
      [starved](const GenerationRequest& r) {
        const bool sig = *r.instance.gold.label == Label::kSignificant;
        const std::string agree = sig ? "the drug significantly reduced pain" : "no significant difference was seen";
        const std::string disagree = sig ? "no significant difference was seen" : "the drug significantly reduced pain";
        if (starved.count(r.instance.id)) return std::vector<std::string>{disagree, disagree};
        return std::vector<std::string>{disagree, agree, disagree};
      },
      true);
  ExperimentConfig c;
  c.study = StudyKind::kImprove;
  c.schema = Schema::kTrials;
  c.corpus_path = "in-memory";
  c.output_dir = scratch("abstain");
  c.measurer.kind = MeasurerSpec::Kind::kBuiltinKeyword;
  c.policy.kind = SelectionPolicy::Kind::kOracleAgree;
  const auto r = run_experiment(c, corpus, {gen, nullptr}, {});
  require(r.errors.empty(), "instance errors");
  const double k = double(starved.size()), n = double(corpus.instances.size());
  require(r.aggregate["abstained"].get<std::size_t>() == starved.size(), "abstained count");
  require(r.aggregate["abstention_rate"].get<double>() == k / n, "abstention rate " + r.aggregate["abstention_rate"].dump());

  std::vector<int> pred, gold;
  for (const json& row : r.instances) {
    if (row["status"] != "selected") continue;
    pred.push_back(row["selected_label"] == "significant");
    gold.push_back(row["gold_label"] == "significant");
  }
  require(pred.size() == corpus.instances.size() - starved.size(), "returned-result count");
  const auto oracle = testing::brute_force_f1(pred, gold);
  require(r.aggregate["selected_macro_f1"].get<double>() == oracle.macro_f1, "F1 not over returned results");
  require(r.aggregate["selected_accuracy"].get<double>() == oracle.accuracy, "accuracy not over returned results");
  return "Abs " + num(k / n) + ", F1 over " + std::to_string(pred.size()) + " returned";
}

std::string determinism() {
  const std::filesystem::path data = SYNTH_DATA_DIR;
  std::size_t runs = 0;
  for (StudyKind study : {StudyKind::kImprove, StudyKind::kPermutation, StudyKind::kComposition,
                          StudyKind::kCalibration}) {
    ExperimentConfig c;
    c.study = study;
    c.corpus_path = data / "movies_sample.jsonl";
    c.decode.max_tokens = 20;
    c.permutations = 5;
    c.seed = 1234;
    c.output_dir = scratch("det_a");
    const auto a = run_experiment(c);
    c.output_dir = scratch("det_b");
    const auto b = run_experiment(c);
    c.workers = 4;
    c.output_dir = scratch("det_c");
    const auto d = run_experiment(c);
    require(a.errors.empty(), std::string(to_string(study)) + " had errors");
    require(aggregate_line(a) == aggregate_line(b), std::string(to_string(study)) + " differs across runs");
    require(aggregate_line(a) == aggregate_line(d), std::string(to_string(study)) + " differs across worker counts");
    runs += 3;
  }
  ExperimentConfig t;
  t.study = StudyKind::kFlip;
  t.schema = Schema::kTrials;
  t.measurer.kind = MeasurerSpec::Kind::kBuiltinKeyword;
  t.corpus_path = data / "trials_sample.jsonl";
  t.decode.max_tokens = 20;
  t.output_dir = scratch("det_t1");
  const auto x = run_experiment(t);
  t.output_dir = scratch("det_t2");
  require(aggregate_line(x) == aggregate_line(run_experiment(t)), "flip differs across runs");
  return std::to_string(runs + 2) + " runs byte-identical";
}

}  // namespace

int main() {
  criterion("decoder_oracle_equivalence", decoder_oracle);
  criterion("dbs_limits", dbs_limits);
  criterion("nearest_selection_example", nearest_example);
  criterion("order_invariance_harness", order_invariance);
  criterion("composition_slope", composition_slope);
  criterion("meta_analysis", meta_analysis);
  criterion("metrics", metrics_suite);
  criterion("improve_pipeline_delta", improve_delta);
  criterion("abstention_semantics", abstention);
  criterion("determinism", determinism);
  std::cout << (failures ? "FAILED " : "ALL PASSED ") << (10 - failures) << "/10" << std::endl;
  return failures ? 1 : 0;
}
