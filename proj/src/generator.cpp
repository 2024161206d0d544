// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include "synth/generator.h"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "synth/error.h"
#include "synth/transport.h"

namespace synth {

using nlohmann::json;

DecodingGenerator::DecodingGenerator(std::shared_ptr<const TokenScorer> scorer, DecodeConfig config,
                                     std::shared_ptr<const Measurer> constraint_measurer)
    : scorer_(std::move(scorer)),
      config_(std::move(config)),
      constraint_measurer_(std::move(constraint_measurer)) {
  if (!scorer_) throw ConfigError("decoding generator needs a scorer");
  validate(config_);
  if (config_.mode == DecodeMode::kConstrainedBeam && !constraint_measurer_)
    throw ConfigError("constrained decoding needs a measurer");
}

CandidateSet DecodingGenerator::generate(const GenerationRequest& request) const {
  CandidateSet out;
  switch (config_.mode) {
    case DecodeMode::kBeam:
      out = beam_search(*scorer_, request.conditioning, config_);
      break;
    case DecodeMode::kDiverseBeam:
      out = diverse_beam_search(*scorer_, request.conditioning, config_);
      break;
    case DecodeMode::kConstrainedBeam:
      if (!request.target) throw DomainError("constrained decoding needs a target");
      out = constrained_beam_search(*scorer_, request.conditioning, config_, *constraint_measurer_,
                                    *request.target);
      break;
  }
  out.source_instance = request.instance.id;
  return out;
}

std::string format_generation_request(std::string_view req_id, std::string_view conditioning,
                                      std::size_t n, double temperature, std::string_view mode) {
  return json{{"req_id", std::string(req_id)},
              {"conditioning", std::string(conditioning)},
              {"n", n},
              {"temperature", temperature},
              {"mode", std::string(mode)}}
      .dump();
}

namespace {

CandidateSet run_generation(LineChannel& channel, const std::string& req_id,
                            std::string_view conditioning, std::size_t n, double temperature,
                            std::string_view mode) {
  if (n == 0) throw DomainError("sample count must be positive");
  std::map<long long, Candidate> by_seq;
  const std::string& where = channel.endpoint().address;
  channel.exchange({format_generation_request(req_id, conditioning, n, temperature, mode)},
                   [&](std::string_view line) {
                     json obj;
                     try {
                       obj = json::parse(line);
                     } catch (const json::parse_error&) {
                       throw ProtocolError("endpoint " + where + ": reply is not JSON");
                     }
                     if (!obj.is_object() || !obj.contains("req_id"))
                       throw ProtocolError("endpoint " + where + ": reply lacks req_id");
                     const json& id = obj["req_id"];
                     if (!id.is_string() || id.get<std::string>() != req_id)
                       throw ProtocolError("endpoint " + where + ": reply for unexpected req_id " + id.dump());
                     if (auto err = obj.find("error"); err != obj.end())
                       throw ProtocolError("endpoint " + where + ": generator error: " +
                                           (err->is_string() ? err->get<std::string>() : err->dump()));
                     if (obj.value("done", false)) return true;
                     if (!obj.contains("seq_no") || !obj["seq_no"].is_number_integer())
                       throw ProtocolError("endpoint " + where + ": reply lacks integer seq_no");
                     if (!obj.contains("text") || !obj["text"].is_string())
                       throw ProtocolError("endpoint " + where + ": reply lacks text");
                     Candidate c;
                     c.text = obj["text"].get<std::string>();
                     if (auto lp = obj.find("log_prob"); lp != obj.end() && !lp->is_null()) {
                       if (!lp->is_number() || !std::isfinite(lp->get<double>()))
                         throw ProtocolError("endpoint " + where + ": log_prob must be a finite number");
                       c.log_prob = lp->get<double>();
                     }
                     c.finished = true;
                     const auto seq = obj["seq_no"].get<long long>();
                     if (!by_seq.emplace(seq, std::move(c)).second)
                       throw ProtocolError("endpoint " + where + ": duplicate seq_no " + std::to_string(seq));
                     return false;
                   });
  CandidateSet out;
  for (auto& [seq, c] : by_seq) out.candidates.push_back(std::move(c));
  if (out.candidates.size() != n)
    throw ProtocolError("endpoint " + where + ": expected " + std::to_string(n) + " candidates, got " +
                        std::to_string(out.candidates.size()));
  return out;
}

}  // namespace

ExternalGenerator::ExternalGenerator(Options options)
    : options_(std::move(options)),
      channel_(open_channel(parse_endpoint(options_.endpoint), options_.timeout)) {}

ExternalGenerator::~ExternalGenerator() = default;

CandidateSet ExternalGenerator::sample(std::string_view conditioning) const {
  const std::string id = "g" + std::to_string(next_req_++);
  return run_generation(*channel_, id, conditioning, options_.n, options_.temperature, options_.mode);
}

CandidateSet ExternalGenerator::generate(const GenerationRequest& request) const {
  CandidateSet out = sample(request.conditioning);
  out.source_instance = request.instance.id;
  return out;
}

CandidateSet sample_external(const std::string& endpoint, std::string_view conditioning,
                             std::size_t n, double temperature, std::chrono::milliseconds timeout) {
  auto channel = open_channel(parse_endpoint(endpoint), timeout);
  return run_generation(*channel, "s0", conditioning, n, temperature, "sample");
}

}  // namespace synth
