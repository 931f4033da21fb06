#include <algorithm>
#include <set>

#include "doctest.h"
#include "mimc/checker.hpp"
#include "mimc/mi.hpp"
#include "mimc/report.hpp"
#include "support.hpp"

using namespace mimc;
using namespace mimc::testing;

namespace {

struct Setup {
  ProtocolSpec spec;
  Instance inst;
  SimulationResult sim;

  Setup(const std::string& file, int n)
      : spec(load_spec_file(protocol_path(file))),
        inst(instantiate(spec, SessionConfig::from_spec(spec, n))),
        sim(mi_simulate(spec, SessionConfig::from_spec(spec, n))) {
  }
  Setup(const Setup&) = delete;
};

SearchResult run(const Instance& inst, Strategy st, StopMode stop, TagSet active,
                 bool visited = false) {
  SearchOptions o;
  o.strategy = st;
  o.stop = stop;
  o.active = active;
  o.record_visited = visited;
  o.audit = true;
  return search(inst, o);
}

}  // namespace

TEST_CASE("initial successors are the honest starts") {
  Setup s("nspk.proto", 2);
  const GlobalState g = GlobalState::initial(s.inst);
  CHECK(violations(s.inst, g).empty());

  auto none = successors(s.inst, g, TagSet{});
  // A picks B or I in session 1, B has a single peer in session 2.
  REQUIRE(none.size() == 3);
  for (const auto& x : none) CHECK(x.transition.kind == Transition::Kind::Start);
  CHECK(none[0].transition.peers[0].name == "B");
  CHECK(none[1].transition.peers[0].name == "I");
  CHECK(none[2].transition.process == 2);

  auto all = successors(s.inst, g, TagSet::all());
  REQUIRE(all.size() >= 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(all[i].transition.same_action(none[i].transition));
  for (std::size_t i = 3; i < all.size(); ++i) {
    CHECK(all[i].transition.kind == Transition::Kind::Deliver);
  }
  for (const auto& x : all) {
    CHECK(serialize(s.inst, x.state) != serialize(s.inst, g));
  }
}

TEST_CASE("a state with every process stopped has no successors") {
  Setup s("nspk.proto", 2);
  GlobalState g = GlobalState::initial(s.inst);
  for (auto& l : g.locals) l.status = ProcessStatus::Stopped;
  CHECK(successors(s.inst, g, TagSet::all()).empty());
}

TEST_CASE("canonical encoding") {
  Setup s("nspk.proto", 1);
  const GlobalState a = GlobalState::initial(s.inst);
  const GlobalState b = GlobalState::initial(s.inst);
  CHECK(serialize(s.inst, a) == serialize(s.inst, b));
  std::set<std::string> keys;
  for (const auto& x : successors(s.inst, a, TagSet::all())) {
    keys.insert(serialize(s.inst, x.state));
  }
  CHECK(keys.size() == successors(s.inst, a, TagSet::all()).size());
}

TEST_CASE("an honest run violates nothing") {
  Setup s("nspk.proto", 1);
  GlobalState g = GlobalState::initial(s.inst);
  const TagSet fwd{Tag::A1_3};
  // Start A towards B, then forward every message unchanged.
  auto first = successors(s.inst, g, fwd);
  REQUIRE_FALSE(first.empty());
  REQUIRE(first[0].transition.peers[0].name == "B");
  g = first[0].state;
  int steps = 1;
  while (true) {
    auto next = successors(s.inst, g, fwd);
    if (next.empty()) break;
    g = next[0].state;
    ++steps;
    CHECK(violations(s.inst, g).empty());
  }
  CHECK(steps == 4);
  for (const auto& l : g.locals) CHECK(l.status == ProcessStatus::Done);
}

TEST_CASE("plain-text secrets leak at depth one") {
  Setup s("toy_plain.proto", 1);
  auto r = run(s.inst, Strategy::Bfs, StopMode::FirstError, TagSet::all());
  REQUIRE(r.verdict == Verdict::Violation);
  CHECK(r.violation->kind == Fingerprint::Kind::Secrecy);
  CHECK(r.stats.error_depth == 1u);
  CHECK(r.counterexample.size() == 1);
}

TEST_CASE("forwarding alone finds no attack") {
  Setup s("nspk.proto", 1);
  auto r = run(s.inst, Strategy::Dfs, StopMode::Exhaustive, TagSet{Tag::A1_3});
  CHECK(r.verdict == Verdict::NoViolation);
  CHECK(r.fingerprints.empty());
  CHECK(r.counterexample.empty());
  CHECK(deadlock_warning(TagSet{Tag::A2}).has_value());
  CHECK_FALSE(deadlock_warning(TagSet{Tag::A1_3}).has_value());
}

TEST_CASE("the man-in-the-middle run on NSPK") {
  Setup s("nspk.proto", 2);
  auto r = run(s.inst, Strategy::Bfs, StopMode::FirstError, s.sim.report.retained);
  REQUIRE(r.verdict == Verdict::Violation);
  CHECK(r.violation->kind == Fingerprint::Kind::Authentication);
  CHECK(r.violation->victim == "B");
  CHECK(r.violation->peer == "A");
  CHECK(r.violation->nonces == std::vector<std::string>{"Na", "Nb"});
  REQUIRE(r.counterexample.size() == 4);
  CHECK(r.counterexample[0].kind == Transition::Kind::Start);
  CHECK(r.counterexample[0].peers[0].name == "I");
  CHECK(r.counterexample[1].tag == Tag::A4);
  CHECK(r.counterexample[2].tag == Tag::A1_3);
  CHECK(r.counterexample[3].tag == Tag::A5);

  ReplayResult rep = replay(s.inst, r.counterexample, s.sim.report.retained);
  REQUIRE(rep.violation.has_value());
  CHECK(*rep.violation == *r.violation);
  CHECK(violations(s.inst, rep.final_state).front() == *r.violation);
}

TEST_CASE("search statistics are consistent") {
  for (const char* f : {"nspk.proto", "toy_plain.proto", "eqsize.proto"}) {
    Setup s(f, 1);
    for (Strategy st : {Strategy::Dfs, Strategy::Bfs}) {
      for (StopMode stop : {StopMode::FirstError, StopMode::Exhaustive}) {
        for (TagSet active : {TagSet::all(), s.sim.report.retained}) {
          auto r = run(s.inst, st, stop, active);
          CAPTURE(f);
          CHECK(r.stats.transitions == r.stats.states_stored + r.stats.states_matched);
          CHECK(r.repeated_expansions == 0);
          CHECK(r.stats.states_stored >= 1);
          if (r.verdict == Verdict::Violation) {
            CHECK(r.counterexample.size() == *r.stats.error_depth);
          }
        }
      }
    }
  }
}

TEST_CASE("breadth-first counterexamples are never longer") {
  Setup s("nspk.proto", 2);
  for (TagSet active : {TagSet::all(), s.sim.report.retained}) {
    auto d = run(s.inst, Strategy::Dfs, StopMode::FirstError, active);
    auto b = run(s.inst, Strategy::Bfs, StopMode::FirstError, active);
    REQUIRE(d.stats.error_depth.has_value());
    REQUIRE(b.stats.error_depth.has_value());
    CHECK(*b.stats.error_depth <= *d.stats.error_depth);
  }
}

TEST_CASE("pruned state space is contained in the full one") {
  Setup s("nspk.proto", 1);
  for (Strategy st : {Strategy::Dfs, Strategy::Bfs}) {
    auto dy = run(s.inst, st, StopMode::Exhaustive, TagSet::all(), true);
    auto mi = run(s.inst, st, StopMode::Exhaustive, s.sim.report.retained, true);
    CHECK(std::includes(dy.visited.begin(), dy.visited.end(), mi.visited.begin(),
                        mi.visited.end()));
    CHECK(mi.stats.states_stored < dy.stats.states_stored);
    CHECK(mi.fingerprints == dy.fingerprints);
  }
}

TEST_CASE("searches are deterministic") {
  Setup s("nspk.proto", 2);
  auto a = run(s.inst, Strategy::Dfs, StopMode::FirstError, s.sim.report.retained);
  auto b = run(s.inst, Strategy::Dfs, StopMode::FirstError, s.sim.report.retained);
  CHECK(CheckReport::from(a, {}, {}) == CheckReport::from(b, {}, {}));
}

TEST_CASE("caps make the verdict inconclusive") {
  Setup s("nspk.proto", 2);
  SearchOptions o;
  o.strategy = Strategy::Bfs;
  o.max_states = 10;
  auto r = search(s.inst, o);
  CHECK(r.verdict == Verdict::Inconclusive);
  CHECK_FALSE(r.cap_reason.empty());
  CHECK(r.stats.states_stored <= 10);

  o.max_states = 1'000'000;
  o.max_depth = 2;
  r = search(s.inst, o);
  CHECK(r.verdict == Verdict::Inconclusive);
  CHECK(r.stats.max_depth <= 2);
}

TEST_CASE("replay") {
  Setup s("nspk.proto", 2);
  const TagSet active = s.sim.report.retained;
  auto r = run(s.inst, Strategy::Dfs, StopMode::FirstError, active);
  REQUIRE(r.verdict == Verdict::Violation);

  SUBCASE("reproduces the counterexample") {
    ReplayResult rep = replay(s.inst, r.counterexample, active);
    REQUIRE(rep.executed.size() == r.counterexample.size());
    for (std::size_t i = 0; i < rep.executed.size(); ++i) {
      CHECK(same_transition(rep.executed[i], r.counterexample[i]));
    }
    CHECK(rep.violation == r.violation);
    CHECK(rep.narration.size() == r.counterexample.size() + 2);
    CHECK(rep.narration.back().find("invalid end state") == 0);
  }
  SUBCASE("an empty trace ends in the initial state") {
    ReplayResult rep = replay(s.inst, {}, active);
    CHECK(serialize(s.inst, rep.final_state) ==
          serialize(s.inst, GlobalState::initial(s.inst)));
    CHECK_FALSE(rep.violation.has_value());
    CHECK(rep.narration.back() == "end state: no goal violated");
  }
  SUBCASE("a corrupted middle step is reported by position") {
    Counterexample bad = r.counterexample;
    std::size_t mid = 0;
    for (std::size_t i = 1; i + 1 < bad.size(); ++i) {
      if (bad[i].kind == Transition::Kind::Deliver) {
        mid = i;
        break;
      }
    }
    REQUIRE(mid > 0);
    bad[mid].payload = T(nonce("Nforged"));
    try {
      replay(s.inst, bad, active);
      FAIL("replay accepted a corrupted trace");
    } catch (const ReplayError& e) {
      CHECK(e.index() == mid + 1);
    }
  }
  SUBCASE("pruned actions cannot be replayed") {
    auto dy = run(s.inst, Strategy::Bfs, StopMode::FirstError, TagSet::all());
    REQUIRE(dy.verdict == Verdict::Violation);
    CHECK_THROWS_AS(replay(s.inst, dy.counterexample, TagSet{Tag::A1_3}), ReplayError);
  }
  CHECK(to_dot(s.inst, replay(s.inst, r.counterexample, active).executed).find("digraph") == 0);
}

TEST_CASE("parallel breadth-first search matches the serial one") {
  for (const char* f : {"nspk.proto", "eqsize.proto", "toy_plain.proto"}) {
    for (int n : {1, 2}) {
      if (n > static_cast<int>(load_spec_file(protocol_path(f)).sessions.size())) continue;
      Setup s(f, n);
      for (StopMode stop : {StopMode::FirstError, StopMode::Exhaustive}) {
        if (n == 2 && stop == StopMode::Exhaustive && std::string(f) == "nspk.proto") continue;
        SearchOptions o;
        o.strategy = Strategy::Bfs;
        o.stop = stop;
        o.active = s.sim.report.retained;
        o.record_visited = true;
        auto a = search(s.inst, o);
        auto b = search_parallel_bfs(s.inst, o);
        CAPTURE(f);
        CAPTURE(n);
        CHECK(CheckReport::from(a, {}, {}) == CheckReport::from(b, {}, {}));
        CHECK(a.visited == b.visited);
      }
    }
  }
}
