#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "doctest.h"
#include "mimc/cli.hpp"
#include "support.hpp"

using namespace mimc;
using namespace mimc::testing;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("mimc-test-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("report JSON round trip") {
  const std::string nspk_file = protocol_path("nspk.proto");
  for (const char* mode : {"dy", "mi"}) {
    for (const char* strategy : {"dfs", "bfs"}) {
      Run r = cli({"check", nspk_file, "--intruder", mode, "--search", strategy, "--format",
                   "json"});
      CHECK(r.code == kExitViolation);
      const json j = json::parse(r.out);
      const CheckReport rep = check_report_from_json(j);
      CHECK(rep.verdict == Verdict::Violation);
      CHECK(to_json(rep).dump() == j.dump());
      CHECK(check_report_from_json(to_json(rep)) == rep);
    }
  }
  CHECK_THROWS_AS(check_report_from_json(json::object()), FormatError);
  CHECK_THROWS_AS(check_report_from_json(json{{"verdict", "maybe"}}), FormatError);
}

TEST_CASE("term JSON round trip") {
  const Term t = Term::enc(cat({T(agent("A")), T(nonce("Na#1")),
                                Term::enc(T(nonce("Nb")), pk("B"))}),
                           pk("C"));
  CHECK(term_from_json(to_json(t)) == t);
  CHECK(term_from_json(to_json(Term())) == Term());
  CHECK_THROWS_AS(term_from_json(json{{"what", 1}}), FormatError);
}

TEST_CASE("outputs are byte-identical across runs") {
  const std::string f = protocol_path("nspk.proto");
  for (auto args : std::vector<std::vector<std::string>>{
           {"check", f, "--format", "json"},
           {"check", f, "--search", "bfs"},
           {"simulate", f, "--format", "json"},
           {"compare", f, "--search", "bfs", "--format", "json"}}) {
    Run a = cli(args);
    Run b = cli(args);
    CHECK(a.code == b.code);
    CHECK(a.out == b.out);
  }
}

TEST_CASE("exit codes") {
  const std::string nspk_file = protocol_path("nspk.proto");
  CHECK(cli({"check", nspk_file, "--intruder", "mi"}).code == kExitViolation);
  CHECK(cli({"check", protocol_path("toy_plain.proto"), "--sessions", "1"}).code == kExitViolation);
  CHECK(cli({"check", nspk_file, "--max-states", "5", "--search", "bfs"}).code ==
        kExitInconclusive);
  CHECK(cli({"check", nspk_file, "--sessions", "1", "--stop", "exhaustive", "--intruder",
             "mi"}).code == kExitViolation);
  CHECK(cli({"simulate", nspk_file}).code == kExitClean);

  Run missing = cli({"check", "/nonexistent/x.proto"});
  CHECK(missing.code == kExitUsage);
  CHECK(missing.err.find("/nonexistent/x.proto") != std::string::npos);
  CHECK(cli({"check", nspk_file, "--search", "sideways"}).code == kExitUsage);
  CHECK(cli({"check", nspk_file, "--sessions", "0"}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({}).code == kExitUsage);

  const fs::path broken = scratch("broken.proto");
  std::ofstream(broken) << "protocol x\nnarration\n  1. A -> B : Q\nend\n";
  Run bad = cli({"check", broken.string()});
  CHECK(bad.code == kExitUsage);
  CHECK(bad.err.find(broken.string()) != std::string::npos);
}

TEST_CASE("forwarding is never pruned") {
  const ProtocolSpec spec = load_spec_file(protocol_path("nspk.proto"));
  RunConfig cfg;
  cfg.sessions = 1;
  cfg.intruder = IntruderMode::Mi;
  CheckOutcome o = run_check(spec, 0, cfg);
  CHECK(o.active.contains(Tag::A1_3));
  CHECK_FALSE(o.report.pruned_actions.contains(Tag::A1_3));
  CHECK(cli({"check", protocol_path("nspk.proto")}).err.empty());
}

TEST_CASE("report-only mode keeps the full action set") {
  const ProtocolSpec spec = load_spec_file(protocol_path("nspk.proto"));
  RunConfig cfg;
  cfg.intruder = IntruderMode::MiReportOnly;
  CheckOutcome o = run_check(spec, 0, cfg);
  CHECK(o.active == TagSet::all());
  CHECK(o.report.pruned_actions == (TagSet{Tag::A2, Tag::A3}));
  CHECK_FALSE(o.report.rule_log.empty());
  cfg.intruder = IntruderMode::Dy;
  CheckOutcome d = run_check(spec, 0, cfg);
  CHECK(d.report.states_stored == o.report.states_stored);
}

TEST_CASE("simulate reports the table and the pruning decision") {
  Run r = cli({"simulate", protocol_path("nspk.proto"), "--format", "json"});
  REQUIRE(r.code == kExitClean);
  const json j = json::parse(r.out);
  CHECK(j.at("removable") == json::array({"A2", "A3"}));
  CHECK(j.at("ikt").size() == 6);
  for (const auto& e : j.at("ikt")) CHECK(e.at("encryption") == 2);
  Run text = cli({"simulate", protocol_path("nspk.proto")});
  CHECK(text.out.find("A2") != std::string::npos);
}

TEST_CASE("trace files") {
  const fs::path proto = scratch("nspk.proto");
  fs::copy_file(protocol_path("nspk.proto"), proto, fs::copy_options::overwrite_existing);
  const fs::path trace = scratch("lowe.json");
  Run c = cli({"check", proto.string(), "--search", "bfs", "--trace", trace.string()});
  REQUIRE(c.code == kExitViolation);

  const TraceFile t = trace_from_json(json::parse(slurp(trace)));
  CHECK(t.transitions.size() == 4);
  CHECK(t.intruder == "mi");
  CHECK(to_json(trace_from_json(to_json(t))).dump() == to_json(t).dump());

  SUBCASE("replays to the same violation") {
    const fs::path dot = scratch("lowe.dot");
    Run r = cli({"replay", trace.string(), "--dot", dot.string()});
    CHECK(r.code == kExitViolation);
    CHECK(r.out.find("invalid end state") != std::string::npos);
    CHECK(r.out.find("impersonation of A") != std::string::npos);
    CHECK(slurp(dot).find("digraph") == 0);
    Run js = cli({"replay", trace.string(), "--format", "json"});
    CHECK(json::parse(js.out).at("verdict") == "violation");
  }
  SUBCASE("a changed protocol file is refused") {
    std::ofstream(proto, std::ios::app) << "\n# edited\n";
    Run r = cli({"replay", trace.string()});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("refusing") != std::string::npos);
  }
  SUBCASE("a tampered step is located") {
    json j = json::parse(slurp(trace));
    j["transitions"][2]["payload"] = to_json(T(nonce("Nforged")));
    const fs::path bad = scratch("tampered.json");
    std::ofstream(bad) << j.dump();
    Run r = cli({"replay", bad.string()});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("step 3") != std::string::npos);
  }
  SUBCASE("garbage is rejected") {
    const fs::path bad = scratch("garbage.json");
    std::ofstream(bad) << "{\"format\": \"something\"}";
    CHECK(cli({"replay", bad.string()}).code == kExitUsage);
    std::ofstream(bad) << "not json";
    CHECK(cli({"replay", bad.string()}).code == kExitUsage);
  }
}

TEST_CASE("compare prints the reduction") {
  Run r = cli({"compare", protocol_path("nspk.proto")});
  CHECK(r.code == kExitViolation);
  CHECK(r.out.find("stored-state reduction: 2.09x") != std::string::npos);
  Run j = cli({"compare", protocol_path("nspk.proto"), "--format", "json"});
  const json doc = json::parse(j.out);
  CHECK(doc.at("dy").at("states_stored") == 1055);
  CHECK(doc.at("mi").at("states_stored") == 505);
}
