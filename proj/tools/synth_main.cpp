// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

// synth: command-line front end for the experiment runner.

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "synth/echo_backend.h"
#include "synth/error.h"
#include "synth/runner.h"

namespace {

using nlohmann::json;

std::atomic<bool> g_cancel{false};

extern "C" void on_sigint(int) {
  g_cancel = true;
  std::signal(SIGINT, SIG_DFL);  // a second ^C kills immediately
}

/// Flags that mirror ExperimentConfig. Each one, when given, overwrites the
/// same field of the config file (if any).
struct ExperimentFlags {
  std::string config;
  std::map<std::string, std::string> strings;
  std::map<std::string, double> reals;
  std::map<std::string, std::size_t> counts;
  std::vector<double> fractions;
  bool length_normalize = false;

  // flag name -> json pointer into the config document
  static const std::vector<std::pair<std::string, std::string>>& string_fields() {
    static const std::vector<std::pair<std::string, std::string>> f = {
        {"corpus", "/corpus/path"},
        {"schema", "/corpus/schema"},
        {"split", "/corpus/split"},
        {"separator", "/corpus/separator"},
        {"generator", "/generator/kind"},
        {"generator-endpoint", "/generator/endpoint"},
        {"train-corpus", "/generator/train_corpus"},
        {"measurer", "/measurer/kind"},
        {"measurer-endpoint", "/measurer/endpoint"},
        {"measurer-output", "/measurer/output"},
        {"lexicon", "/measurer/lexicon"},
        {"mode", "/decode/mode"},
        {"policy", "/selection/policy"},
        {"oracle-source", "/selection/oracle_source"},
        {"removal", "/composition/removal"},
        {"out", "/output_dir"},
    };
    return f;
  }
  static const std::vector<std::pair<std::string, std::string>>& real_fields() {
    static const std::vector<std::pair<std::string, std::string>> f = {
        {"smoothing", "/generator/smoothing"},
        {"temperature", "/generator/temperature"},
        {"lambda", "/decode/diversity_lambda"},
        {"epsilon", "/decode/epsilon"},
        {"abstain-distance", "/selection/abstain_distance"},
        {"threshold", "/threshold"},
    };
    return f;
  }
  static const std::vector<std::pair<std::string, std::string>>& count_fields() {
    static const std::vector<std::pair<std::string, std::string>> f = {
        {"max-length", "/corpus/max_length"},
        {"order", "/generator/order"},
        {"n", "/generator/n"},
        {"generator-timeout-ms", "/generator/timeout_ms"},
        {"measurer-timeout-ms", "/measurer/timeout_ms"},
        {"max-in-flight", "/measurer/max_in_flight"},
        {"beam-width", "/decode/beam_width"},
        {"groups", "/decode/groups"},
        {"beams-per-group", "/decode/beams_per_group"},
        {"max-tokens", "/decode/max_tokens"},
        {"permutations", "/permutation/count"},
        {"seed", "/seed"},
        {"workers", "/workers"},
    };
    return f;
  }

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config, "JSON config file; flags override its fields");
    for (const auto& [name, ptr] : string_fields()) cmd->add_option("--" + name, strings[name], ptr.substr(1));
    for (const auto& [name, ptr] : real_fields()) cmd->add_option("--" + name, reals[name], ptr.substr(1));
    for (const auto& [name, ptr] : count_fields()) cmd->add_option("--" + name, counts[name], ptr.substr(1));
    cmd->add_option("--fractions", fractions, "composition/fractions")->delimiter(',');
    cmd->add_flag("--length-normalize", length_normalize, "decode/length_normalize");
  }

  synth::ExperimentConfig resolve(const CLI::App* cmd, std::string_view study) const {
    json doc = json::object();
    if (!config.empty()) {
      std::ifstream in(config);
      if (!in) throw synth::ConfigError("cannot open config file " + config);
      try {
        doc = json::parse(in);
      } catch (const json::exception& e) {
        throw synth::ConfigError("config file " + config + ": " + e.what());
      }
    }
    auto given = [&](const std::string& name) { return cmd->count("--" + name) > 0; };
    for (const auto& [name, ptr] : string_fields())
      if (given(name)) doc[json::json_pointer(ptr)] = strings.at(name);
    for (const auto& [name, ptr] : real_fields())
      if (given(name)) doc[json::json_pointer(ptr)] = reals.at(name);
    for (const auto& [name, ptr] : count_fields())
      if (given(name)) doc[json::json_pointer(ptr)] = counts.at(name);
    if (given("fractions")) doc["composition"]["fractions"] = fractions;
    if (given("length-normalize")) doc["decode"]["length_normalize"] = length_normalize;
    doc["study"] = std::string(study);

    synth::ExperimentConfig c = synth::config_from_json(doc);
    synth::apply_env_overrides(c);
    synth::validate(c);
    return c;
  }
};

int run_study(const CLI::App* cmd, const ExperimentFlags& flags, std::string_view study) {
  synth::ExperimentConfig config;
  try {
    config = flags.resolve(cmd, study);
  } catch (const synth::Error& e) {
    std::cerr << "synth: config error: " << e.what() << '\n';
    return 1;
  }
  std::signal(SIGINT, on_sigint);
  synth::RunOptions options;
  options.cancel = &g_cancel;
  synth::ExperimentRecord record;
  try {
    record = synth::run_experiment(config, {}, options);
  } catch (const synth::ConfigError& e) {
    std::cerr << "synth: config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "synth: " << e.what() << '\n';
    return 1;
  }
  std::cout << synth::aggregate_line(record) << '\n';
  for (const synth::InstanceError& e : record.errors)
    std::cerr << "synth: instance " << e.instance_id << " failed at " << e.stage << ": " << e.cause << '\n';
  if (record.interrupted) std::cerr << "synth: interrupted; partial results in " << config.output_dir << '\n';
  return record.interrupted || !record.errors.empty() ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Measure and improve aggregate-property synthesis in multi-document summarizers"};
  app.require_subcommand(1);

  struct Verb {
    const char* name;
    const char* study;
    const char* help;
  };
  const Verb verbs[] = {
      {"calibrate", "calibration", "Score the measurer against gold aggregates"},
      {"permute", "permutation", "Decode under random input orderings"},
      {"compose", "composition", "Remove fractions of one polarity and fit the response"},
      {"flip", "flip", "Remove strong studies until significance flips"},
      {"improve", "improve", "Generate diverse candidates and select or abstain"},
  };
  std::vector<std::pair<CLI::App*, const Verb*>> study_cmds;
  std::vector<std::unique_ptr<ExperimentFlags>> flags;
  for (const Verb& v : verbs) {
    CLI::App* cmd = app.add_subcommand(v.name, v.help);
    flags.push_back(std::make_unique<ExperimentFlags>());
    flags.back()->attach(cmd);
    study_cmds.emplace_back(cmd, &v);
  }

  std::string record_path, figure, plot_out;
  std::size_t bins = 20;
  CLI::App* plot = app.add_subcommand("plotdata", "Emit tab-separated plot data from records.jsonl");
  plot->add_option("--record", record_path, "records.jsonl written by a study")->required();
  plot->add_option("--figure", figure,
                   "spread_hist | entropy_hist | sensitivity_scatter | candidate_range_hist")
      ->required();
  plot->add_option("--bins", bins, "histogram bins")->check(CLI::PositiveNumber);
  plot->add_option("--out", plot_out, "output file (default stdout)");

  std::vector<std::string> replies;
  std::string echo_measurer = "lexicon", host = "127.0.0.1";
  int port = 0;
  bool log_probs = false;
  CLI::App* echo = app.add_subcommand("serve-echo", "Run the echo test backend on stdio or HTTP");
  echo->add_option("--reply", replies, "canned generator reply (repeatable; default echoes the input)");
  echo->add_option("--measurer", echo_measurer, "lexicon | keyword");
  echo->add_flag("--log-probs", log_probs, "attach log_prob = -seq_no to generator replies");
  echo->add_option("--port", port, "serve HTTP on this port instead of stdio");
  echo->add_option("--host", host, "HTTP bind address");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  for (std::size_t i = 0; i < study_cmds.size(); ++i)
    if (*study_cmds[i].first) return run_study(study_cmds[i].first, *flags[i], study_cmds[i].second->study);

  if (*plot) {
    try {
      const synth::PlotFigure fig = synth::parse_plot_figure(figure);
      const synth::ExperimentRecord record = synth::load_record(record_path);
      if (plot_out.empty()) {
        synth::emit_plot_data(record, fig, std::cout, bins);
      } else {
        std::ofstream out(plot_out);
        if (!out) throw synth::Error("cannot write " + plot_out);
        synth::emit_plot_data(record, fig, out, bins);
      }
    } catch (const synth::ConfigError& e) {
      std::cerr << "synth: " << e.what() << '\n';
      return 1;
    } catch (const std::exception& e) {
      std::cerr << "synth: " << e.what() << '\n';
      return 2;
    }
    return 0;
  }

  if (*echo) {
    try {
      synth::EchoOptions o;
      o.replies = replies;
      o.measurer = synth::parse_measurer_kind(echo_measurer);
      o.log_probs = log_probs;
      const synth::EchoBackend backend(o);
      if (port > 0) {
        synth::serve_echo_http(backend, host, port);
      } else {
        std::ios::sync_with_stdio(false);
        synth::serve_echo_stdio(backend, std::cin, std::cout);
      }
    } catch (const synth::ConfigError& e) {
      std::cerr << "synth: " << e.what() << '\n';
      return 1;
    } catch (const std::exception& e) {
      std::cerr << "synth: " << e.what() << '\n';
      return 2;
    }
    return 0;
  }
  return 1;
}
