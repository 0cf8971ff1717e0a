// causalec: run scenarios, check traces, sweep seeds, self-test the codec.
//
// Exit codes: 0 success, 1 check failure or protocol violation,
// 2 invalid input, 3 step limit reached.

#include <atomic>
#include <bit>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "causalec/causalec.hpp"

namespace fs = std::filesystem;
using namespace causalec;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFail = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitStepLimit = 3;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("causalec");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("CAUSALEC_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string(env) != "off") {
      spdlog::warn("CAUSALEC_LOG={} not recognised, keeping 'warn'", env);
    } else {
      spdlog::set_level(level);
    }
  }
}

struct SeedRange {
  std::uint64_t first = 0;
  std::uint64_t last = 0;
};

std::optional<SeedRange> parse_seeds(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) return std::nullopt;
  try {
    std::size_t used = 0;
    const auto a = std::stoull(text.substr(0, dots), &used);
    if (used != dots) return std::nullopt;
    const auto rest = text.substr(dots + 2);
    const auto b = std::stoull(rest, &used);
    if (used != rest.size()) return std::nullopt;
    return SeedRange{a, b};
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::string storage_csv(const Trace& t) {
  std::ostringstream os;
  write_storage_csv(os, t);
  return os.str();
}

struct Overrides {
  bool fifo = false;
  std::optional<std::int64_t> step_limit;

  void apply(Scenario& sc) const {
    if (fifo) sc.fifo = true;
    if (step_limit) sc.step_limit = *step_limit;
  }
};

int cmd_run(const std::string& scenario_path, std::uint64_t seed, const fs::path& out_dir, const Overrides& ov) {
  Scenario sc;
  try {
    sc = load_scenario(scenario_path);
    ov.apply(sc);
    validate(sc);
  } catch (const ScenarioError& e) {
    spdlog::error("{}", e.what());
    return kExitInvalid;
  }
  fs::create_directories(out_dir);
  Simulation sim(sc, seed);
  const auto status = sim.run();
  const auto& trace = sim.trace();
  write_file(out_dir / "trace.jsonl", to_jsonl(trace));
  write_file(out_dir / "storage.csv", storage_csv(trace));
  const auto& s = trace.footer.stats;
  spdlog::info("seed {}: {} at step {}, {} writes, {} local / {} remote reads, {} decodes", seed,
               to_string(status), trace.footer.end_step, s.writes, s.local_reads, s.remote_reads, s.decodes);
  switch (status) {
    case RunStatus::kStepLimit:
      spdlog::error("step limit {} reached", sc.step_limit);
      return kExitStepLimit;
    case RunStatus::kViolation:
      spdlog::error("protocol violation, see trace");
      return kExitFail;
    case RunStatus::kStalled:
      spdlog::warn("run stalled before quiescence");
      return kExitOk;
    case RunStatus::kQuiescent:
      return kExitOk;
  }
  return kExitOk;
}

int cmd_check(const std::string& trace_path, const std::optional<fs::path>& out) {
  std::ifstream in(trace_path);
  if (!in) {
    spdlog::error("cannot open {}", trace_path);
    return kExitInvalid;
  }
  Trace trace;
  try {
    trace = read_jsonl(in);
  } catch (const TraceError& e) {
    spdlog::error("{}", e.what());
    return kExitInvalid;
  }
  const auto report = check_trace(trace);
  for (const auto& c : report.checks) {
    spdlog::info("{:<20} {:<12} {}", c.name, to_string(c.verdict), c.detail);
    if (c.verdict == Verdict::kFail) spdlog::error("{} failed: {}", c.name, c.detail);
  }
  const auto text = report_json(report).dump(2) + "\n";
  if (out) {
    write_file(*out, text);
  } else {
    std::cerr << text;
  }
  return report.passed() ? kExitOk : kExitFail;
}

struct SweepRow {
  std::string label;
  Report report;
  std::optional<Trace> trace;  // kept only for failures
};

std::string csv_row(const SweepRow& row) {
  static constexpr std::string_view kColumns[] = {kUniqueTags,  kTimestampMonotone, kCausalReads,      kConvergence,
                                                  kLiveness,    kStorageStable,     kRuntimeAssertions};
  std::ostringstream os;
  const auto& r = row.report;
  os << row.label << ',' << to_string(r.status) << ',' << (r.passed() ? "pass" : "fail");
  for (auto name : kColumns) os << ',' << to_string(r.verdict(name));
  os << ',' << r.stats.writes << ',' << r.stats.local_reads << ',' << r.stats.remote_reads << ',' << r.stats.decodes
     << ',' << r.stats.messages << '\n';
  return os.str();
}

int cmd_sweep(const std::string& scenario_path, const std::string& seeds_text, const fs::path& out_dir,
              unsigned jobs, bool negative_control, const Overrides& ov) {
  const auto range = parse_seeds(seeds_text);
  if (!range) {
    spdlog::error("--seeds expects A..B, got '{}'", seeds_text);
    return kExitInvalid;
  }
  if (range->last < range->first) {
    spdlog::error("seed range {} is empty", seeds_text);
    return kExitInvalid;
  }
  Scenario sc;
  try {
    sc = load_scenario(scenario_path);
    ov.apply(sc);
    validate(sc);
  } catch (const ScenarioError& e) {
    spdlog::error("{}", e.what());
    return kExitInvalid;
  }
  fs::create_directories(out_dir);

  const std::uint64_t count = range->last - range->first + 1;
  std::vector<SweepRow> rows(count);
  std::atomic<std::uint64_t> next{0};
  const auto started = std::chrono::steady_clock::now();
  auto worker = [&] {
    for (auto i = next++; i < count; i = next++) {
      const auto seed = range->first + i;
      auto trace = simulate(sc, seed);
      auto report = check_trace(trace);
      rows[i].label = std::to_string(seed);
      if (!report.passed() || report.status == RunStatus::kStepLimit) rows[i].trace = std::move(trace);
      rows[i].report = std::move(report);
    }
  };
  jobs = std::max(1u, jobs);
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  if (negative_control) {
    const auto base = simulate(sc, range->first);
    for (auto& nc : negative_controls(base)) {
      SweepRow row;
      row.label = "negative-control:" + nc.check;
      row.report = check_trace(nc.trace);
      row.trace = std::move(nc.trace);
      rows.push_back(std::move(row));
    }
  }

  std::ostringstream csv;
  csv << "seed,status,result," << kUniqueTags << ',' << kTimestampMonotone << ',' << kCausalReads << ','
      << kConvergence << ',' << kLiveness << ',' << kStorageStable << ',' << kRuntimeAssertions
      << ",writes,local_reads,remote_reads,decodes,messages\n";
  bool all_pass = true;
  bool kept = false;
  std::uint64_t decodes = 0;
  for (const auto& row : rows) {
    csv << csv_row(row);
    decodes += row.report.stats.decodes;
    const bool ok = row.report.passed() && row.report.status != RunStatus::kStepLimit;
    if (ok) continue;
    all_pass = false;
    spdlog::error("{} failed ({})", row.label, to_string(row.report.status));
    if (!kept && row.trace) {
      write_file(out_dir / "first_failure.jsonl", to_jsonl(*row.trace));
      write_file(out_dir / "first_failure_report.json", report_json(row.report).dump(2) + "\n");
      kept = true;
    }
  }
  write_file(out_dir / "sweep.csv", csv.str());
  const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  spdlog::info("{} seeds in {:.1f} s, {} workload decodes, {}", count, secs, decodes, all_pass ? "all pass" : "FAILURES");
  return all_pass ? kExitOk : kExitFail;
}

// Independent of the simulator: rank test of every K-subset of generator
// rows, then random encode/decode round trips over every recovery set.
int cmd_codec_test(std::size_t n_max, std::size_t trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::size_t subsets = 0;
  for (std::size_t n = 1; n <= n_max; ++n) {
    for (std::size_t k = 1; k <= n; ++k) {
      const auto spec = make_code(n, k, 1);
      const auto& gen = spec.generator();
      for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<std::size_t>(std::popcount(mask)) != k) continue;
        std::vector<std::vector<std::uint8_t>> rows;
        for (std::size_t s = 0; s < n; ++s) {
          if (mask & (1u << s)) rows.push_back(gen[s]);
        }
        ++subsets;
        if (rank(rows) != k) {
          spdlog::error("({},{}) subset {:#x} is singular", n, k, mask);
          return kExitFail;
        }
      }
    }
  }
  spdlog::info("{} K-subsets invertible for n <= {}", subsets, n_max);
  for (auto [n, k] : {std::pair<std::size_t, std::size_t>{4, 2}, {5, 3}}) {
    const auto spec = make_code(n, k, 64);
    for (ObjectId o = 0; o < k; ++o) {
      for (const auto& rs : recovery_sets(spec, o)) {
        for (std::size_t t = 0; t < trials; ++t) {
          std::vector<Bytes> values(k, Bytes(64));
          for (auto& v : values) {
            for (auto& b : v) b = static_cast<std::uint8_t>(rng());
          }
          std::map<ServerId, Bytes> symbols;
          for (auto s : rs.servers) symbols.emplace(s, encode_symbol(spec, s, values));
          if (decode(spec, o, symbols) != values[o]) {
            spdlog::error("({},{}) round trip failed for object {}", n, k, o);
            return kExitFail;
          }
        }
      }
    }
  }
  spdlog::info("round trips passed");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Causally consistent erasure-coded store: simulator and checker"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::uint64_t seed = 1;
  std::string out_dir;
  std::string seeds_text;
  std::string trace_path;
  std::string report_path;
  Overrides ov;
  std::int64_t step_limit = 0;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  bool negative_control = false;
  std::size_t n_max = 8;
  std::size_t trials = 1000;

  auto* run = app.add_subcommand("run", "Run one scenario and write trace.jsonl and storage.csv");
  run->add_option("--scenario", scenario_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Seed");
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_flag("--fifo", ov.fifo, "FIFO channels");
  run->add_option("--step-limit", step_limit, "Virtual step limit");

  auto* check = app.add_subcommand("check", "Check a trace and write a JSON report");
  check->add_option("--trace", trace_path, "trace.jsonl")->required();
  check->add_option("--out", report_path, "Report file (default: stderr)");

  auto* sweep = app.add_subcommand("sweep", "Run and check a range of seeds");
  sweep->add_option("--scenario", scenario_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--seeds", seeds_text, "Inclusive range A..B")->required();
  sweep->add_option("--out", out_dir, "Output directory")->required();
  sweep->add_option("--jobs", jobs, "Parallel runs");
  sweep->add_flag("--fifo", ov.fifo, "FIFO channels");
  sweep->add_option("--step-limit", step_limit, "Virtual step limit");
  sweep->add_flag("--negative-control", negative_control, "Append corrupted-trace rows that must fail");

  auto* codec = app.add_subcommand("codec-test", "Exhaustive MDS check and round trips");
  codec->add_option("--n-max", n_max, "Largest n for the exhaustive check");
  codec->add_option("--trials", trials, "Round trips per recovery set");
  codec->add_option("--seed", seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }
  if (step_limit > 0) ov.step_limit = step_limit;

  try {
    if (*run) return cmd_run(scenario_path, seed, out_dir, ov);
    if (*check) return cmd_check(trace_path, report_path.empty() ? std::nullopt : std::optional<fs::path>(report_path));
    if (*sweep) return cmd_sweep(scenario_path, seeds_text, out_dir, jobs, negative_control, ov);
    if (*codec) return cmd_codec_test(n_max, trials, seed);
  } catch (const std::exception& e) {
    spdlog::critical("{}", e.what());
    return kExitFail;
  }
  return kExitInvalid;
}
