// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include "testing.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "synth/aggregate.h"
#include "synth/error.h"
#include "synth/random.h"

namespace synth::testing {

namespace {

std::vector<std::string> letters(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::string(1, static_cast<char>('a' + i)));
  return out;
}

std::vector<double> log_softmax(const std::vector<double>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  std::vector<double> out;
  for (double l : logits) out.push_back(l - mx - std::log(z));
  return out;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

RandomScorer::RandomScorer(std::size_t non_eos_tokens, std::uint64_t seed, double spread)
    : vocab_(letters(non_eos_tokens)), seed_(seed), spread_(spread) {}

std::vector<double> RandomScorer::score(std::span<const TokenId> prefix, std::string_view) const {
  std::uint64_t h = derive_seed(seed_, prefix.size());
  for (TokenId t : prefix) h = derive_seed(h, t + 1);
  std::mt19937_64 rng(h);
  std::vector<double> logits(vocab_.size());
  for (double& l : logits) l = spread_ * (2.0 * uniform01(rng) - 1.0);
  return log_softmax(logits);
}

TableScorer::TableScorer(std::vector<std::string> tokens, std::map<std::string, std::vector<double>> probs,
                         std::vector<double> fallback)
    : vocab_(std::move(tokens)), probs_(std::move(probs)), fallback_(std::move(fallback)) {}

std::vector<double> TableScorer::score(std::span<const TokenId> prefix, std::string_view) const {
  std::string key;
  for (TokenId t : prefix) key += (key.empty() ? "" : " ") + vocab_.token(t);
  std::vector<double> p;
  if (auto it = probs_.find(key); it != probs_.end()) {
    p = it->second;
  } else if (!fallback_.empty()) {
    p = fallback_;
  } else {
    p.assign(vocab_.size(), 0.0);
    p[vocab_.eos()] = 1.0;
  }
  std::vector<double> out;
  for (double x : p) out.push_back(x > 0.0 ? std::log(x) : -std::numeric_limits<double>::infinity());
  return out;
}

std::vector<Enumerated> enumerate_sequences(const TokenScorer& scorer, std::string_view conditioning,
                                            std::size_t max_tokens) {
  std::vector<Enumerated> out;
  const TokenId eos = scorer.vocabulary().eos();
  std::vector<TokenId> prefix;
  std::function<void(double)> walk = [&](double lp) {
    const std::vector<double> s = scorer.score(prefix, conditioning);
    for (TokenId t = 0; t < s.size(); ++t) {
      if (!std::isfinite(s[t])) continue;
      prefix.push_back(t);
      if (t == eos || prefix.size() == max_tokens) {
        out.push_back({prefix, lp + s[t]});
      } else {
        walk(lp + s[t]);
      }
      prefix.pop_back();
    }
  };
  walk(0.0);
  std::sort(out.begin(), out.end(), [](const Enumerated& a, const Enumerated& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.tokens < b.tokens;
  });
  return out;
}

Measurement TagMeasurer::measure(std::string_view text) const {
  const auto at = text.rfind("[s=");
  if (at == std::string_view::npos) return Measurement::continuous(0.5);
  const std::string num(text.substr(at + 3, text.find(']', at) - at - 3));
  return Measurement::continuous(std::stod(num));
}

std::string tag(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "[s=%.17g]", value);
  return buf;
}

FunctionGenerator::FunctionGenerator(GenerateFn fn, bool with_log_probs)
    : fn_(std::move(fn)), with_log_probs_(with_log_probs) {}

CandidateSet FunctionGenerator::generate(const GenerationRequest& request) const {
  CandidateSet set;
  set.source_instance = request.instance.id;
  const auto texts = fn_(request);
  for (std::size_t k = 0; k < texts.size(); ++k) {
    Candidate c;
    c.text = texts[k];
    if (with_log_probs_) c.log_prob = -static_cast<double>(k);
    c.finished = true;
    set.candidates.push_back(std::move(c));
  }
  return set;
}

double quadrature_two_sided_p(double z) {
  const double a = std::abs(z);
  if (a > 38.0) return 0.0;
  const int n = 200000;  // even
  const double h = a / n;
  auto pdf = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); };
  double s = pdf(0.0) + pdf(a);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * pdf(i * h);
  const double central = s * h / 3.0;  // integral over [0, |z|]
  return std::max(0.0, 1.0 - 2.0 * central);
}

OracleScores brute_force_f1(const std::vector<int>& predicted, const std::vector<int>& gold) {
  OracleScores s;
  double f1_sum = 0.0;
  for (int cls : {0, 1}) {
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (predicted[i] == cls && gold[i] == cls) ++tp;
      if (predicted[i] == cls && gold[i] != cls) ++fp;
      if (predicted[i] != cls && gold[i] == cls) ++fn;
    }
    const double denom = 2.0 * tp + fp + fn;
    f1_sum += denom == 0 ? 0.0 : 2.0 * tp / denom;
  }
  s.macro_f1 = f1_sum / 2.0;
  int hit = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hit += predicted[i] == gold[i];
  s.accuracy = static_cast<double>(hit) / static_cast<double>(gold.size());
  return s;
}

Corpus tagged_movies(std::size_t n, std::uint64_t seed, std::size_t min_docs, std::size_t max_docs) {
  Corpus c;
  c.task = Task::kContinuous;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    Instance in;
    char id[32];
    std::snprintf(id, sizeof id, "tag-%04zu", i);
    in.id = id;
    in.task = Task::kContinuous;
    const std::size_t docs = min_docs + uniform_below(rng, max_docs - min_docs + 1);
    std::size_t positive = 0;
    for (std::size_t d = 0; d < docs; ++d) {
      // First document positive, second negative, the rest anything.
      double v = uniform01(rng);
      if (d == 0) v = 0.5 + 0.5 * v;
      if (d == 1) v = 0.49 * v;
      positive += v >= 0.5;
      in.documents.push_back({in.id + "-d" + std::to_string(d), "review " + std::to_string(d) + " " + tag(v)});
    }
    std::vector<Document> shuffled = in.documents;
    portable_shuffle(std::span<Document>(shuffled), rng);
    in.documents = shuffled;
    const double frac = static_cast<double>(positive) / static_cast<double>(docs);
    in.gold.value = frac;
    in.reference_summary = "overall " + tag(frac);
    c.instances.push_back(std::move(in));
  }
  return c;
}

Corpus lexicon_movies(std::size_t n, std::uint64_t seed) {
  static const char* pos[] = {"brilliant", "charming", "witty", "gripping", "superb",
                              "moving", "clever", "delightful", "stunning", "engaging"};
  static const char* neg[] = {"dull", "tedious", "lazy", "muddled", "predictable",
                              "bland", "clumsy", "forgettable", "tiresome", "shallow"};
  static const char* nouns[] = {"script", "cast", "pacing", "score", "direction", "ending"};
  std::mt19937_64 rng(seed);
  auto pick = [&](const char* const* words, std::size_t count) { return std::string(words[uniform_below(rng, count)]); };
  Corpus c;
  c.task = Task::kContinuous;
  for (std::size_t i = 0; i < n; ++i) {
    Instance in;
    char id[32];
    std::snprintf(id, sizeof id, "film-%04zu", i);
    in.id = id;
    const std::size_t docs = 5 + uniform_below(rng, 5);
    const std::size_t k = 1 + uniform_below(rng, docs - 1);
    for (std::size_t d = 0; d < docs; ++d) {
      const bool good = d < k;
      const char* const* words = good ? pos : neg;
      in.documents.push_back({in.id + "-r" + std::to_string(d),
                              "the " + pick(nouns, 6) + " is " + pick(words, 10) + " and the film feels " +
                                  pick(words, 10) + " overall"});
    }
    portable_shuffle(std::span<Document>(in.documents), rng);
    const double frac = static_cast<double>(k) / static_cast<double>(docs);
    in.gold.value = frac;
    if (frac >= 0.6) {
      in.reference_summary = "a " + pick(pos, 10) + " and " + pick(pos, 10) + " film with a strong cast";
    } else if (frac <= 0.4) {
      in.reference_summary = "a " + pick(neg, 10) + " and " + pick(neg, 10) + " film with a weak script";
    } else {
      in.reference_summary = "a " + pick(pos, 10) + " but " + pick(neg, 10) + " film with an uneven script";
    }
    c.instances.push_back(std::move(in));
  }
  return c;
}

Corpus synthetic_trials(std::size_t n, std::uint64_t seed) {
  static const char* drugs[] = {"aspirin", "statin", "metformin", "zinc", "probiotic", "melatonin"};
  std::mt19937_64 rng(seed);
  Corpus c;
  c.task = Task::kBinary;
  for (std::size_t i = 0; i < n; ++i) {
    Instance in;
    char id[32];
    std::snprintf(id, sizeof id, "review-%04zu", i);
    in.id = id;
    in.task = Task::kBinary;
    const std::string drug = drugs[i % 6];
    const bool strong = i % 2 == 0;
    const std::size_t studies = 2 + uniform_below(rng, 5);
    std::vector<Study> st;
    for (std::size_t j = 0; j < studies; ++j) {
      const double var = 0.02 + 0.1 * uniform01(rng);
      const double eff = (strong ? 0.6 : 0.0) + 0.3 * (2.0 * uniform01(rng) - 1.0);
      const bool sig = std::abs(eff) / std::sqrt(var) > 1.96;
      Document d{in.id + "-s" + std::to_string(j),
                 drug + (sig ? " significantly reduced symptoms" : " showed no significant difference in symptoms")};
      d.effect = eff;
      d.variance = var;
      in.documents.push_back(d);
      st.push_back({eff, var});
    }
    const MetaAnalysisResult m = fixed_effects_meta_analysis(st);
    in.gold.p_value = m.p_value;
    in.gold.label = m.significant ? Label::kSignificant : Label::kNotSignificant;
    in.reference_summary = m.significant ? drug + " significantly reduced symptoms across trials"
                                         : "there is insufficient evidence that " + drug + " helps";
    c.instances.push_back(std::move(in));
  }
  return c;
}

}  // namespace synth::testing
