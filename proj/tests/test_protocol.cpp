#include <random>
#include <set>

#include "doctest.h"
#include "mimc/protocol.hpp"
#include "support.hpp"

using namespace mimc;
using namespace mimc::testing;

namespace {

const char* kOneStep = R"(
protocol onestep
declarations
  roles Init Resp
  agents A B
  intruder I
  keypair pk sk
  fresh Init Na
  size nonce 32
  typed Na
end
narration
  1. Init -> Resp : {Na}pk(Resp)
end
)";

SessionConfig one_session(const char* init, const char* resp) {
  SessionConfig c;
  c.sessions.push_back(SessionAssignment{{{init}, {resp}}, 0});
  return c;
}

ParseError::Code code_of(const std::string& text) {
  try {
    parse_spec(text);
  } catch (const ParseError& e) {
    return e.code();
  }
  FAIL("expected a parse error");
  return ParseError::Code::Syntax;
}

}  // namespace

TEST_CASE("the bundled NSPK description") {
  const ProtocolSpec& s = nspk();
  CHECK(s.name == "nspk");
  CHECK(s.z() == 3);
  REQUIRE(s.roles.size() == 2);
  CHECK(s.roles[0].name == "Init");
  CHECK(s.roles[1].name == "Resp");
  CHECK(s.steps[0].sender == 0);
  CHECK(s.steps[1].sender == 1);
  CHECK(s.steps[2].receiver == 1);
  CHECK(to_text(s.steps[0].pattern, s) == "{Init, Na}pk(Resp)");
  CHECK(to_text(s.steps[1].pattern, s) == "{Na, Nb}pk(Init)");
  CHECK(to_text(s.steps[2].pattern, s) == "{Nb}pk(Resp)");
  CHECK(s.sessions.size() == 2);
  CHECK(s.goals.size() == 2);
}

TEST_CASE("parse errors") {
  CHECK(code_of("") == ParseError::Code::Syntax);
  CHECK(code_of("   \n# nothing\n") == ParseError::Code::Syntax);

  const std::string early_nb = R"(protocol bad
declarations
  roles Init Resp
  agents A B
  intruder I
  keypair pk sk
  fresh Init Na
  fresh Resp Nb
end
narration
  1. Init -> Resp : {Init, Nb}pk(Resp)
  2. Resp -> Init : {Na, Nb}pk(Init)
end
)";
  try {
    parse_spec(early_nb);
    FAIL("unbound variable accepted");
  } catch (const ParseError& e) {
    CHECK(e.code() == ParseError::Code::UnboundVariable);
    CHECK(e.line() == 11);
    CHECK(e.column() > 1);
  }

  const std::string ownerless = R"(protocol bad
declarations
  roles Init Resp
  agents A B
  intruder I
  symkey K
  fresh Init Na
end
narration
  1. Init -> Resp : {Na}K
end
)";
  CHECK(code_of(ownerless) == ParseError::Code::KeyWithoutOwner);
}

TEST_CASE("printing and re-parsing gives the same description") {
  for (const char* f : {"nspk.proto", "toy_plain.proto", "eqsize.proto",
                        "nspk_interrupted.proto"}) {
    const ProtocolSpec s = load_spec_file(protocol_path(f));
    const ProtocolSpec again = parse_spec(to_text(s));
    CHECK(again == s);
    CHECK(to_text(again) == to_text(s));
  }
  const ProtocolSpec one = parse_spec(kOneStep);
  CHECK(parse_spec(to_text(one)) == one);
}

TEST_CASE("instantiating sessions") {
  const ProtocolSpec& s = nspk();
  Instance two = instantiate(s, SessionConfig::from_spec(s, 2));
  CHECK(two.processes.size() == 4);
  CHECK(two.fresh_nonces.size() == 4);
  std::set<Atom> unique(two.fresh_nonces.begin(), two.fresh_nonces.end());
  CHECK(unique.size() == two.fresh_nonces.size());

  Instance one = instantiate(s, SessionConfig::from_spec(s, 1));
  CHECK(one.processes.size() == 2);
  CHECK_THROWS_AS(SessionConfig::from_spec(s, 0), ConfigError);
  CHECK_THROWS_AS(instantiate(s, SessionConfig{}), ConfigError);
  CHECK_THROWS_AS(SessionConfig::from_spec(s, 3), ConfigError);
}

TEST_CASE("receiving step 1 of NSPK") {
  const ProtocolSpec& s = nspk();
  Instance inst = instantiate(s, SessionConfig::from_spec(s, 1));
  const ProcessInfo& b = inst.processes[1];
  REQUIRE(b.agent.name == "B");
  const Pattern& p = s.steps[0].pattern;
  const Term na = T(nonce("Na#1"));
  const Term msg = Term::enc(cat({T(agent("A")), na}), pk("B"));

  auto bound = match_receive(s, p, msg, b.initial, b.keys);
  REQUIRE(bound);
  CHECK((*bound)[s.variable_index("Na")] == na);
  CHECK((*bound)[s.variable_index("Init")] == T(agent("A")));

  CHECK_FALSE(match_receive(s, p, T(agent("A")), b.initial, b.keys));
  // B cannot open a message for C.
  CHECK_FALSE(match_receive(s, p, Term::enc(cat({T(agent("A")), na}), pk("C")), b.initial,
                            b.keys));
}

TEST_CASE("a kind-checked nonce variable accepts any nonce") {
  const ProtocolSpec s = parse_spec(kOneStep);
  Instance inst = instantiate(s, one_session("A", "B"));
  const ProcessInfo& b = inst.processes[1];
  const Pattern& p = s.steps[0].pattern;
  const Term foreign = T(nonce("Nb#2"));
  auto bound = match_receive(s, p, Term::enc(foreign, pk("B")), b.initial, b.keys);
  REQUIRE(bound);
  CHECK((*bound)[s.variable_index("Na")] == foreign);
  CHECK_FALSE(match_receive(s, p, Term::enc(T(agent("A")), pk("B")), b.initial, b.keys));
}

TEST_CASE("emitted step numbers follow the narration") {
  const ProtocolSpec& s = nspk();
  Instance inst = instantiate(s, SessionConfig::from_spec(s, 1));
  std::vector<LocalState> ls;
  for (const auto& p : inst.processes) ls.push_back(initial_local_state(p));
  ls[0].bindings[s.variable_index("Resp")] = T(agent("B"));

  std::vector<int> steps;
  int from = 0;
  auto sent = run_until_receive(inst, from, ls[from]);
  while (!sent.empty()) {
    REQUIRE(sent.size() == 1);
    const Emission e = sent.front();
    steps.push_back(e.step);
    CHECK(e.message == build_message(s, s.steps[e.step - 1].pattern, ls[from].bindings));
    const int to = 1 - from;
    REQUIRE(pending_receive(inst, to, ls[to]) == e.step);
    REQUIRE(deliver(inst, to, ls[to], e.message));
    sent = run_until_receive(inst, to, ls[to]);
    from = to;
  }
  CHECK(steps == std::vector<int>{1, 2, 3});
  CHECK(ls[0].status == ProcessStatus::Done);
  CHECK(ls[1].status == ProcessStatus::Done);
}

TEST_CASE("fail-stop is permanent under random fake messages") {
  const ProtocolSpec& s = nspk();
  Instance inst = instantiate(s, SessionConfig::from_spec(s, 2));
  std::mt19937 rng(7);
  std::vector<Term> pool;
  for (const auto& a : inst.atoms) pool.push_back(T(a));
  for (int i = 0; i < 40; ++i) {
    const Term x = pool[rng() % pool.size()];
    const Term y = pool[rng() % pool.size()];
    pool.push_back(rng() % 2 ? cat({x, y}) : Term::enc(cat({x, y}), pk(i % 2 ? "B" : "A")));
  }

  for (int trial = 0; trial < 200; ++trial) {
    const int p = 1 + 2 * (trial % 2);  // responders wait for step 1
    LocalState ls = initial_local_state(inst.processes[p]);
    bool stopped = false;
    for (int k = 0; k < 6; ++k) {
      if (stopped) {
        CHECK(ls.status == ProcessStatus::Stopped);
        CHECK(pending_receive(inst, p, ls) == 0);
        CHECK_FALSE(can_start(inst, p, ls));
        CHECK_THROWS_AS(deliver(inst, p, ls, pool[rng() % pool.size()]), std::logic_error);
        continue;
      }
      if (pending_receive(inst, p, ls) == 0) break;
      const LocalState before = ls;
      if (!deliver(inst, p, ls, pool[rng() % pool.size()])) {
        stopped = true;
        CHECK(ls.bindings == before.bindings);
      } else {
        run_until_receive(inst, p, ls);
      }
    }
  }
}

TEST_CASE("keys held by agents") {
  const ProtocolSpec& s = nspk();
  KeyRing b = keys_of(s, agent("B"));
  CHECK(b.holds(priv("B")));
  CHECK_FALSE(b.holds(priv("A")));
  CHECK(b.holds(pub("A")));
}
