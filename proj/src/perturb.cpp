// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include "synth/perturb.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "synth/error.h"
#include "synth/metrics.h"
#include "synth/parallel.h"
#include "synth/random.h"

namespace synth {

double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("binary_entropy: p must lie in [0,1]");
  auto term = [](double q) { return q > 0.0 ? -q * std::log2(q) : 0.0; };
  return term(p) + term(1.0 - p);
}

std::string_view to_string(Polarity polarity) {
  return polarity == Polarity::kPositive ? "positive" : "negative";
}

namespace {

std::string first_summary(const Generator& generator, const Instance& instance,
                          const LinearizeOptions& lin, std::optional<double> target) {
  const Linearized input = linearize(instance, lin);
  CandidateSet set = generator.generate({instance, input.text, target});
  if (set.candidates.empty()) throw DomainError("empty candidate set");
  return set.candidates.front().text;
}

Measurement measure_summary(const Measurer& measurer, const std::string& text) {
  // An empty generation carries no signal; score it as the neutral point.
  if (whitespace_tokens(text).empty()) {
    return measurer.kind() == MeasureKind::kContinuous
               ? Measurement::continuous(0.5)
               : Measurement::binary(Label::kNotSignificant, 0.0);
  }
  return measurer.measure(text);
}

}  // namespace

PermutationStudy run_permutation_study(const Instance& instance, const Generator& generator,
                                       const Measurer& measurer, const PermutationOptions& options) {
  if (options.permutations < 2) throw DomainError("a permutation study needs at least 2 permutations");

  PermutationStudy study;
  study.instance_id = instance.id;
  study.task = instance.task;
  study.n_permutations = options.permutations;
  for (std::size_t k = 0; k < options.permutations; ++k)
    study.seeds.push_back(derive_seed(options.seed, k));

  std::vector<std::optional<Measurement>> results(options.permutations);
  std::vector<double> rouge(options.permutations, 0.0);
  parallel_for(options.permutations, options.workers, [&](std::size_t k) {
    try {
      const Instance permuted = permute_documents(instance, study.seeds[k]);
      const std::string summary = first_summary(generator, permuted, options.linearize, std::nullopt);
      results[k] = measure_summary(measurer, summary);
      rouge[k] = rouge1_f(summary, instance.reference_summary);
    } catch (const std::exception& e) {
      throw PipelineError("permutation " + std::to_string(k), e.what());
    }
  });
  study.rouge1 = std::move(rouge);

  if (instance.task == Task::kContinuous) {
    for (const auto& m : results) study.measures.push_back(m->value());
    // Anchored at the first value so identical outputs give exactly zero.
    const double first = study.measures.front();
    double shift = 0.0;
    for (double v : study.measures) shift += v - first;
    const double avg = first + shift / static_cast<double>(study.measures.size());
    for (double v : study.measures) study.spread.push_back(v - avg);
  } else {
    std::size_t sig = 0;
    for (const auto& m : results) {
      const Label l = m->is_continuous() ? binarize(*m, options.threshold).label() : m->label();
      study.labels.push_back(l);
      sig += l == Label::kSignificant;
    }
    study.p_fraction = static_cast<double>(sig) / static_cast<double>(options.permutations);
    study.entropy_bits = binary_entropy(*study.p_fraction);
  }
  return study;
}

CompositionStudy run_composition_study(const Instance& instance, const Generator& generator,
                                       const Measurer& measurer, const CompositionOptions& options) {
  CompositionStudy study;
  study.instance_id = instance.id;
  if (measurer.kind() != MeasureKind::kContinuous)
    throw TypeError("composition study needs a continuous measurer");

  std::vector<std::string> texts;
  for (const Document& d : instance.documents) texts.push_back(d.text);
  const std::vector<Measurement> measures = measurer.measure_batch(texts);

  std::vector<std::size_t> positive, negative;
  for (std::size_t i = 0; i < measures.size(); ++i)
    (measures[i].value() >= options.threshold ? positive : negative).push_back(i);
  if (positive.empty() || negative.empty()) {
    study.skipped_reason = "instance is not mixed: needs at least one positive and one negative document";
    return study;
  }

  // Removal order within each polarity.
  auto order = [&](std::vector<std::size_t> idx, Polarity pol) {
    if (options.removal == RemovalOrder::kWeakestFirst) {
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(measures[a].value() - options.threshold) <
               std::abs(measures[b].value() - options.threshold);
      });
    } else {
      std::mt19937_64 rng(derive_seed(options.seed, pol == Polarity::kPositive ? 1 : 2));
      portable_shuffle(std::span<std::size_t>(idx), rng);
    }
    return idx;
  };

  auto make_point = [&](const std::vector<bool>& removed, double fraction,
                        std::optional<Polarity> pol, bool exhausted) {
    CompositionPoint pt;
    pt.fraction_removed = fraction;
    pt.polarity_removed = pol;
    pt.polarity_exhausted = exhausted;
    Instance reduced = instance;
    reduced.documents.clear();
    std::vector<Measurement> kept;
    for (std::size_t i = 0; i < instance.documents.size(); ++i) {
      if (removed[i]) {
        pt.removed_ids.push_back(instance.documents[i].id);
      } else {
        reduced.documents.push_back(instance.documents[i]);
        kept.push_back(measures[i]);
      }
    }
    pt.input_aggregate = fraction_positive(kept, options.threshold);
    const std::string summary = first_summary(generator, reduced, options.linearize, pt.input_aggregate);
    pt.output_measure = measure_summary(measurer, summary).value();
    return pt;
  };

  const std::vector<bool> none(instance.documents.size(), false);
  study.points.push_back(make_point(none, 0.0, std::nullopt, false));

  for (Polarity pol : {Polarity::kPositive, Polarity::kNegative}) {
    const auto ranked = order(pol == Polarity::kPositive ? positive : negative, pol);
    for (double f : options.fractions) {
      if (!(f > 0.0 && f <= 1.0)) throw DomainError("removal fractions must lie in (0,1]");
      const auto k = std::min(ranked.size(),
                              static_cast<std::size_t>(std::floor(f * static_cast<double>(ranked.size()) + 0.5)));
      std::vector<bool> removed = none;
      for (std::size_t i = 0; i < k; ++i) removed[ranked[i]] = true;
      study.points.push_back(make_point(removed, f, pol, k == ranked.size()));
    }
  }

  std::vector<double> xs, ys;
  for (const CompositionPoint& p : study.points) {
    xs.push_back(p.input_aggregate);
    ys.push_back(p.output_measure);
  }
  const LinearFit fit = least_squares(xs, ys);
  study.fitted_slope = fit.slope;
  study.fitted_intercept = fit.intercept;
  return study;
}

std::vector<Study> studies_of(const Instance& instance) {
  std::vector<Study> out;
  for (const Document& d : instance.documents) {
    if (!d.effect || !d.variance)
      throw DomainError("document '" + d.id + "' lacks effect/variance statistics");
    out.push_back({*d.effect, *d.variance});
  }
  return out;
}

FlipConstruction construct_significance_flip(const Instance& instance) {
  const std::vector<Study> all = studies_of(instance);
  FlipConstruction flip;
  flip.instance_id = instance.id;
  flip.before = fixed_effects_meta_analysis(all);

  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(all[a].effect / all[a].variance) > std::abs(all[b].effect / all[b].variance);
  });

  std::vector<bool> removed(all.size(), false);
  for (std::size_t r = 0; r + 1 < order.size(); ++r) {
    removed[order[r]] = true;
    flip.removed_document_ids.push_back(instance.documents[order[r]].id);
    std::vector<Study> remaining;
    for (std::size_t i = 0; i < all.size(); ++i)
      if (!removed[i]) remaining.push_back(all[i]);
    const MetaAnalysisResult after = fixed_effects_meta_analysis(remaining);
    if (after.significant != flip.before.significant) {
      flip.after = after;
      flip.flipped = instance;
      flip.flipped.documents.clear();
      for (std::size_t i = 0; i < all.size(); ++i)
        if (!removed[i]) flip.flipped.documents.push_back(instance.documents[i]);
      flip.flipped.gold.p_value = after.p_value;
      flip.flipped.gold.label = after.significant ? Label::kSignificant : Label::kNotSignificant;
      return flip;
    }
  }
  throw DomainError("instance not flippable");
}

}  // namespace synth
