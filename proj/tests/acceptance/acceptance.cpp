// One PASS/FAIL line per acceptance criterion. The invariant suites are the
// unit test cases linked into this binary, filtered by name.
#define DOCTEST_CONFIG_IMPLEMENT
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <unistd.h>

#include "doctest.h"
#include "mimc/checker.hpp"
#include "mimc/cli.hpp"
#include "mimc/mi.hpp"
#include "support.hpp"

using namespace mimc;
using namespace mimc::testing;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

SearchResult run(const Instance& inst, Strategy st, StopMode stop, const TagSet& active) {
  SearchOptions o;
  o.strategy = st;
  o.stop = stop;
  o.active = active;
  return search(inst, o);
}

bool is_lowe(const std::optional<Fingerprint>& f) {
  return f && f->kind == Fingerprint::Kind::Authentication && f->victim == "B" &&
         f->peer == "A" && f->nonces == std::vector<std::string>{"Na", "Nb"};
}

std::string fmt(double v, int prec = 2) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(prec);
  os << v;
  return os.str();
}

Outcome pruning() {
  Outcome o;
  const auto t0 = Clock::now();
  const ProtocolSpec& spec = nspk();
  SimulationResult r = mi_simulate(spec, SessionConfig::from_spec(spec, 2));
  const double secs = since(t0);
  o.require(r.report.removable == (TagSet{Tag::A2, Tag::A3}),
            "removable " + r.report.removable.to_string());
  const TagSet must{Tag::A1_1, Tag::A1_2, Tag::A1_3, Tag::A4, Tag::A5};
  o.require(must.is_subset_of(r.report.retained), "retained " + r.report.retained.to_string());
  int enc2 = 0;
  for (int b = 1; b <= 2; ++b) {
    for (int a = 1; a <= 3; ++a) enc2 += r.ikt.at(a, b).recorded && r.ikt.at(a, b).encryption == 2;
  }
  o.require(enc2 == 6, std::to_string(enc2) + "/6 entries with encryption 2");
  o.require(secs < 1.0, "took " + fmt(secs) + " s");
  if (o.pass) {
    o.detail = "removable " + r.report.removable.to_string() + ", 6/6 entries encrypted, " +
               fmt(secs, 3) + " s";
  }
  return o;
}

Outcome rediscovery() {
  Outcome o;
  const ProtocolSpec& spec = nspk();
  const SessionConfig cfg = SessionConfig::from_spec(spec, 2, 2);
  const Instance inst = instantiate(spec, cfg);
  const TagSet mi = mi_simulate(spec, cfg).report.retained;
  std::string summary;
  for (Strategy st : {Strategy::Dfs, Strategy::Bfs}) {
    for (const auto& [name, active] : {std::pair{"mi", mi}, std::pair{"dy", TagSet::all()}}) {
      const auto t0 = Clock::now();
      SearchResult r = run(inst, st, StopMode::FirstError, active);
      const double secs = since(t0);
      const std::string tag = std::string(name) + "/" + std::string(to_string(st));
      o.require(is_lowe(r.violation), tag + " found " +
                                          (r.violation ? r.violation->to_string() : "nothing"));
      o.require(secs < 10.0, tag + " took " + fmt(secs) + " s");
      if (r.violation) {
        ReplayResult rep = replay(inst, r.counterexample, active);
        o.require(rep.violation == r.violation, tag + " counterexample does not replay");
      }
      summary += (summary.empty() ? "" : ", ") + tag + " depth " +
                 std::to_string(r.stats.error_depth.value_or(0));
    }
  }
  if (o.pass) o.detail = "(B,A,{Na,Nb}) under " + summary;
  return o;
}

Outcome reduction() {
  Outcome o;
  const ProtocolSpec& spec = nspk();
  const SessionConfig cfg = SessionConfig::from_spec(spec, 2, 2);
  const Instance inst = instantiate(spec, cfg);
  const TagSet mi = mi_simulate(spec, cfg).report.retained;
  std::string summary;
  for (Strategy st : {Strategy::Dfs, Strategy::Bfs}) {
    auto d = run(inst, st, StopMode::FirstError, TagSet::all());
    auto m = run(inst, st, StopMode::FirstError, mi);
    const double ratio =
        static_cast<double>(d.stats.states_stored) / static_cast<double>(m.stats.states_stored);
    const std::string tag(to_string(st));
    o.require(m.stats.states_stored < d.stats.states_stored, tag + " mi not smaller");
    o.require(ratio >= 1.5, tag + " ratio " + fmt(ratio));
    summary += (summary.empty() ? "" : ", ") + tag + " " + std::to_string(d.stats.states_stored) +
               "/" + std::to_string(m.stats.states_stored) + " = " + fmt(ratio) + "x";
  }
  if (o.pass) o.detail = summary;
  return o;
}

// Smallest depth at which a violating state is reachable, found by expanding
// whole levels of unique states. Violating states are terminal.
std::optional<std::uint32_t> min_violation_depth(const Instance& inst, const TagSet& active,
                                                 std::uint32_t limit) {
  std::set<std::string> seen;
  std::vector<GlobalState> level{GlobalState::initial(inst)};
  seen.insert(serialize(inst, level.front()));
  if (!violations(inst, level.front()).empty()) return 0;
  for (std::uint32_t depth = 1; depth <= limit && !level.empty(); ++depth) {
    std::vector<GlobalState> next;
    for (const auto& s : level) {
      for (auto& succ : successors(inst, s, active)) {
        if (!seen.insert(serialize(inst, succ.state)).second) continue;
        if (!violations(inst, succ.state).empty()) return depth;
        next.push_back(std::move(succ.state));
      }
    }
    level = std::move(next);
  }
  return std::nullopt;
}

Outcome minimality() {
  Outcome o;
  const ProtocolSpec& spec = nspk();
  const SessionConfig cfg = SessionConfig::from_spec(spec, 2, 2);
  const Instance inst = instantiate(spec, cfg);
  const TagSet mi = mi_simulate(spec, cfg).report.retained;
  std::string summary;
  for (const auto& [name, active] : {std::pair{"mi", mi}, std::pair{"dy", TagSet::all()}}) {
    auto d = run(inst, Strategy::Dfs, StopMode::FirstError, active);
    auto b = run(inst, Strategy::Bfs, StopMode::FirstError, active);
    if (!d.stats.error_depth || !b.stats.error_depth) {
      o.require(false, std::string(name) + " missing error depth");
      continue;
    }
    o.require(*b.stats.error_depth <= *d.stats.error_depth,
              std::string(name) + " bfs " + std::to_string(*b.stats.error_depth) + " > dfs " +
                  std::to_string(*d.stats.error_depth));
    summary += (summary.empty() ? "" : ", ") + std::string(name) + " bfs " +
               std::to_string(*b.stats.error_depth) + " <= dfs " +
               std::to_string(*d.stats.error_depth);
    if (std::string(name) == "mi") {
      auto truth = min_violation_depth(inst, active, *b.stats.error_depth);
      o.require(truth == b.stats.error_depth,
                "level expansion gives " + (truth ? std::to_string(*truth) : "none"));
      if (truth) summary += " (level oracle " + std::to_string(*truth) + ")";
    }
  }
  if (o.pass) o.detail = summary;
  return o;
}

Outcome safety() {
  Outcome o;
  const auto t0 = Clock::now();
  const ProtocolSpec& spec = nspk();
  int configs = 0;
  for (int n = 1; n <= 2; ++n) {
    for (int fd = 0; fd <= 2; ++fd) {
      const SessionConfig cfg = SessionConfig::from_spec(spec, n, fd);
      const Instance inst = instantiate(spec, cfg);
      const TagSet mi = mi_simulate(spec, cfg).report.retained;
      auto d = run(inst, Strategy::Dfs, StopMode::Exhaustive, TagSet::all());
      auto m = run(inst, Strategy::Dfs, StopMode::Exhaustive, mi);
      const std::string tag = "n=" + std::to_string(n) + " fake-depth=" + std::to_string(fd);
      o.require(d.verdict != Verdict::Inconclusive && m.verdict != Verdict::Inconclusive,
                tag + " hit a cap");
      o.require(d.fingerprints == m.fingerprints, tag + " fingerprint sets differ");
      ++configs;
    }
  }
  const double secs = since(t0);
  o.require(secs < 300.0, "took " + fmt(secs, 0) + " s");
  if (o.pass) {
    o.detail = std::to_string(configs) + " configurations, identical fingerprint sets, " +
               fmt(secs, 1) + " s";
  }
  return o;
}

Outcome invariants() {
  Outcome o;
  doctest::Context ctx;
  ctx.setOption("minimal", true);
  ctx.setOption("test-case",
                "random interruptions keep every column zero-suffixed,"
                "comparison of metadata entries,"
                "search statistics are consistent,"
                "encrypt and decrypt,"
                "bounded derivation matches the closure oracle,"
                "fail-stop is permanent under random fake messages");
  const int rc = ctx.run();
  o.require(rc == 0, "property suite failures");
  if (o.pass) o.detail = "6 property suites";
  return o;
}

Outcome determinism() {
  Outcome o;
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("mimc-accept-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string spec = protocol_path("nspk.proto");
  const std::string trace = (dir / "trace.json").string();

  std::vector<std::vector<std::string>> commands = {
      {"simulate", spec, "--format", "json"},
      {"check", spec, "--intruder", "dy", "--format", "json"},
      {"check", spec, "--intruder", "mi", "--search", "bfs", "--format", "json", "--trace", trace},
      {"check", spec, "--intruder", "mi-report-only", "--format", "json"},
      {"compare", spec, "--format", "json"},
      {"replay", trace, "--format", "json"},
  };
  for (const auto& cmd : commands) {
    std::string first;
    std::string first_trace;
    for (int i = 0; i < 2; ++i) {
      std::ostringstream out, err;
      run_cli(cmd, out, err);
      std::string t;
      if (cmd[0] == "check" && fs::exists(trace)) {
        std::ifstream f(trace, std::ios::binary);
        t.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
      }
      if (i == 0) {
        first = out.str();
        first_trace = t;
      } else {
        o.require(first == out.str() && !first.empty(), cmd[0] + " output differs");
        o.require(first_trace == t, cmd[0] + " trace file differs");
      }
    }
  }
  fs::remove_all(dir);
  if (o.pass) o.detail = std::to_string(commands.size()) + " commands byte-identical";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"NSPK pruning", pruning},
      {"attack rediscovery", rediscovery},
      {"reduction ratio", reduction},
      {"BFS minimality", minimality},
      {"pruning safety", safety},
      {"invariant suites", invariants},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    failed += !r.pass;
    std::cout << (r.pass ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first
              << ": " << r.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
