#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalec/common.hpp"

namespace causalec {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CrashSpec {
  ServerId server = 0;
  std::int64_t step = 0;
};

struct ScriptedOp {
  ClientId client = 0;
  bool write = false;
  ObjectId object = 0;
  std::string value;  // zero-padded to value_len
  std::optional<ServerId> server;
  // Without `at` an op waits until every earlier script op has completed;
  // with it, the op only waits for its own client, and for time `at`.
  std::optional<std::int64_t> at;
};

/// Crashes drawn per seed: seeds with seed % every_nth_seed == 1 (or every
/// seed when every_nth_seed is 1) crash `count` distinct random servers at
/// random steps in [step_min, step_max].
struct RandomCrashes {
  std::uint32_t count = 0;
  std::uint32_t every_nth_seed = 1;
  std::int64_t step_min = 0;
  std::int64_t step_max = 0;
};

struct Scenario {
  std::size_t n = 5;
  std::size_t k = 3;
  std::size_t value_len = 64;

  std::uint32_t clients = 4;
  std::uint32_t ops_per_client = 200;
  double write_ratio = 0.5;
  double object_skew = 0.0;  // Zipf exponent over object ids
  std::vector<ServerId> client_servers;  // empty: drawn from the seed
  bool switch_servers = false;

  std::int64_t delay_min = 1;
  std::int64_t delay_max = 10;
  std::int64_t think_min = 0;
  std::int64_t think_max = 5;
  bool fifo = false;

  std::int64_t encode_period = 4;
  std::int64_t gossip_period = 8;
  std::int64_t gc_period = 8;
  std::int64_t snapshot_every = 200;
  std::int64_t step_limit = 2'000'000;

  std::uint32_t max_crashes = 0;
  std::vector<CrashSpec> crashes;
  std::optional<RandomCrashes> random_crashes;

  std::vector<ScriptedOp> script;
  bool probes = true;
  std::uint64_t seed = 1;

  bool scripted() const { return !script.empty(); }
};

inline void validate(const Scenario& s) {
  auto fail = [](const std::string& what) { throw ScenarioError("invalid scenario: " + what); };
  if (s.k < 1) fail("k must be at least 1");
  if (s.n < s.k) fail("n must be at least k (got n=" + std::to_string(s.n) + ", k=" + std::to_string(s.k) + ")");
  if (s.n > 24) fail("n must be at most 24");
  if (s.value_len < 1) fail("value_len must be positive");
  if (s.delay_min < 0 || s.delay_max < s.delay_min) fail("delay bounds");
  if (s.think_min < 0 || s.think_max < s.think_min) fail("think bounds");
  if (s.encode_period < 1 || s.gossip_period < 1 || s.gc_period < 1) fail("timer periods must be positive");
  if (s.snapshot_every < 1) fail("snapshot_every must be positive");
  if (s.step_limit < 1) fail("step_limit must be positive");
  if (s.write_ratio < 0.0 || s.write_ratio > 1.0) fail("write_ratio must lie in [0,1]");
  if (s.object_skew < 0.0) fail("object_skew must be non-negative");
  if (s.clients < 1) fail("at least one client");
  if (!s.client_servers.empty() && s.client_servers.size() != s.clients) {
    fail("client_servers must list one server per client");
  }
  for (auto srv : s.client_servers) {
    if (srv >= s.n) fail("client_servers references server " + std::to_string(srv));
  }
  if (s.crashes.size() > s.max_crashes) fail("more crashes than max_crashes");
  for (const auto& c : s.crashes) {
    if (c.server >= s.n) fail("crash references server " + std::to_string(c.server));
    if (c.step < 0) fail("crash step must be non-negative");
  }
  for (std::size_t i = 0; i < s.crashes.size(); ++i) {
    for (std::size_t j = i + 1; j < s.crashes.size(); ++j) {
      if (s.crashes[i].server == s.crashes[j].server) fail("server crashes twice");
    }
  }
  if (s.random_crashes) {
    const auto& r = *s.random_crashes;
    if (!s.crashes.empty()) fail("crashes and random_crashes are exclusive");
    if (r.count > s.max_crashes) fail("random_crashes.count exceeds max_crashes");
    if (r.count > s.n) fail("random_crashes.count exceeds n");
    if (r.every_nth_seed < 1) fail("random_crashes.every_nth_seed must be positive");
    if (r.step_min < 0 || r.step_max < r.step_min) fail("random_crashes step bounds");
  }
  for (const auto& op : s.script) {
    if (op.client >= s.clients) fail("script references client " + std::to_string(op.client));
    if (op.object >= s.k) fail("script references object " + std::to_string(op.object));
    if (op.server && *op.server >= s.n) fail("script references server " + std::to_string(*op.server));
    if (op.value.size() > s.value_len) fail("script value longer than value_len");
    if (op.at && *op.at < 0) fail("script op time must be non-negative");
  }
}

namespace detail {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

}  // namespace detail

inline Scenario scenario_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ScenarioError("scenario: top level must be an object");
  Scenario s;
  try {
    using detail::read_opt;
    read_opt(j, "n", s.n);
    read_opt(j, "k", s.k);
    read_opt(j, "value_len", s.value_len);
    read_opt(j, "clients", s.clients);
    read_opt(j, "ops_per_client", s.ops_per_client);
    read_opt(j, "write_ratio", s.write_ratio);
    read_opt(j, "object_skew", s.object_skew);
    read_opt(j, "client_servers", s.client_servers);
    read_opt(j, "switch_servers", s.switch_servers);
    read_opt(j, "delay_min", s.delay_min);
    read_opt(j, "delay_max", s.delay_max);
    read_opt(j, "think_min", s.think_min);
    read_opt(j, "think_max", s.think_max);
    read_opt(j, "fifo", s.fifo);
    read_opt(j, "encode_period", s.encode_period);
    read_opt(j, "gossip_period", s.gossip_period);
    read_opt(j, "gc_period", s.gc_period);
    read_opt(j, "snapshot_every", s.snapshot_every);
    read_opt(j, "step_limit", s.step_limit);
    read_opt(j, "max_crashes", s.max_crashes);
    read_opt(j, "probes", s.probes);
    read_opt(j, "seed", s.seed);
    if (auto it = j.find("crashes"); it != j.end()) {
      for (const auto& c : *it) s.crashes.push_back({c.at("server").get<ServerId>(), c.at("step").get<std::int64_t>()});
    }
    if (auto it = j.find("random_crashes"); it != j.end()) {
      RandomCrashes r;
      read_opt(*it, "count", r.count);
      read_opt(*it, "every_nth_seed", r.every_nth_seed);
      read_opt(*it, "step_min", r.step_min);
      read_opt(*it, "step_max", r.step_max);
      s.random_crashes = r;
    }
    if (auto it = j.find("script"); it != j.end()) {
      for (const auto& op : *it) {
        ScriptedOp so;
        so.client = op.at("client").get<ClientId>();
        const auto kind = op.at("op").get<std::string>();
        if (kind != "write" && kind != "read") throw ScenarioError("script op must be write or read");
        so.write = kind == "write";
        so.object = op.at("object").get<ObjectId>();
        if (so.write) so.value = op.at("value").get<std::string>();
        if (auto sv = op.find("server"); sv != op.end()) so.server = sv->get<ServerId>();
        if (auto at = op.find("at"); at != op.end()) so.at = at->get<std::int64_t>();
        s.script.push_back(std::move(so));
      }
      std::uint32_t max_client = 0;
      for (const auto& op : s.script) max_client = std::max(max_client, op.client + 1);
      if (!j.contains("clients")) s.clients = max_client;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("scenario: ") + e.what());
  }
  validate(s);
  return s;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("scenario: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError("scenario: " + path + ": " + e.what());
  }
  return scenario_from_json(j);
}

}  // namespace causalec
