// Copyright 2026 The Synthesis Harness Authors
// SPDX-License-Identifier: Apache-2.0

#include "synth/echo_backend.h"

#include <istream>
#include <ostream>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "synth/error.h"

namespace synth {

using nlohmann::json;

EchoBackend::EchoBackend(EchoOptions options) : options_(std::move(options)) {
  MeasurerSpec spec;
  spec.kind = options_.measurer;
  if (spec.kind == MeasurerSpec::Kind::kExternal) throw ConfigError("echo backend needs a builtin measurer");
  measurer_ = make_measurer(spec);
}

std::vector<std::string> EchoBackend::handle(std::string_view line) const {
  json req;
  try {
    req = json::parse(line);
  } catch (const json::parse_error&) {
    return {json{{"req_id", nullptr}, {"error", "request is not JSON"}}.dump()};
  }
  const json id = req.is_object() && req.contains("req_id") ? req["req_id"] : json(nullptr);
  auto error = [&](const std::string& msg) { return std::vector<std::string>{json{{"req_id", id}, {"error", msg}}.dump()}; };
  if (!req.is_object() || id.is_null()) return error("request lacks req_id");

  if (req.contains("conditioning")) {
    if (!req["conditioning"].is_string()) return error("conditioning must be a string");
    const json n_field = req.value("n", json(1));
    if (!n_field.is_number_integer() || n_field.get<long long>() < 1) return error("n must be a positive integer");
    const auto n = n_field.get<std::size_t>();
    const std::string cond = req["conditioning"].get<std::string>();
    std::vector<std::string> out;
    for (std::size_t k = 0; k < n; ++k) {
      json r{{"req_id", id}, {"seq_no", k}};
      r["text"] = options_.replies.empty() ? cond : options_.replies[k % options_.replies.size()];
      if (options_.log_probs) r["log_prob"] = -static_cast<double>(k);
      out.push_back(r.dump());
    }
    out.push_back(json{{"req_id", id}, {"done", true}}.dump());
    return out;
  }

  if (req.contains("text")) {
    if (!req["text"].is_string()) return error("text must be a string");
    const std::string rid = id.is_string() ? id.get<std::string>() : id.dump();
    try {
      return {format_measurement_reply(rid, measurer_->measure(req["text"].get<std::string>()))};
    } catch (const Error& e) {
      return error(e.what());
    }
  }
  return error("request carries neither conditioning nor text");
}

void serve_echo_stdio(const EchoBackend& backend, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    for (const std::string& reply : backend.handle(line)) out << reply << '\n';
    out.flush();
  }
}

void serve_echo_http(const EchoBackend& backend, const std::string& host, int port) {
  httplib::Server server;
  server.Post(R"(/.*)", [&](const httplib::Request& req, httplib::Response& res) {
    std::istringstream in(req.body);
    std::ostringstream out;
    serve_echo_stdio(backend, in, out);
    res.set_content(out.str(), "application/x-ndjson");
  });
  if (!server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace synth
