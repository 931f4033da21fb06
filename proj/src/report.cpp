#include "mimc/report.hpp"

#include <cstdio>

namespace mimc {

namespace {

const json& field(const json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) {
    throw FormatError(std::string("missing field '") + name + "'");
  }
  return j.at(name);
}

Tag tag_of(const std::string& s) {
  auto t = tag_from_string(s);
  if (!t) throw FormatError("unknown attack action '" + s + "'");
  return *t;
}

Verdict verdict_of(const std::string& s) {
  for (Verdict v : {Verdict::NoViolation, Verdict::Violation, Verdict::Inconclusive}) {
    if (to_string(v) == s) return v;
  }
  throw FormatError("unknown verdict '" + s + "'");
}

}  // namespace

json to_json(const Atom& a) {
  return json{{"atom", a.name}, {"kind", std::string(to_string(a.kind))}, {"size", a.size}};
}

Atom atom_from_json(const json& j) {
  auto kind = atom_kind_from_string(field(j, "kind").get<std::string>());
  if (!kind) throw FormatError("unknown atom kind");
  return Atom{*kind, field(j, "atom").get<std::string>(), field(j, "size").get<std::uint32_t>()};
}

json to_json(const Term& t) {
  switch (t.kind()) {
    case TermKind::Null: return nullptr;
    case TermKind::Atom: return to_json(t.as_atom());
    case TermKind::Concat: {
      json parts = json::array();
      for (const auto& p : t.parts()) parts.push_back(to_json(p));
      return json{{"concat", parts}};
    }
    case TermKind::Enc:
      return json{{"enc", to_json(t.body())},
                  {"key", to_json(t.key().handle)},
                  {"inverse", to_json(t.key().inverse)}};
  }
  return nullptr;
}

Term term_from_json(const json& j) {
  if (j.is_null()) return Term();
  if (j.contains("atom")) return Term::atom(atom_from_json(j));
  if (j.contains("concat")) {
    std::vector<Term> parts;
    for (const auto& p : j.at("concat")) parts.push_back(term_from_json(p));
    return Term::concat(std::move(parts));
  }
  if (j.contains("enc")) {
    return Term::enc(term_from_json(j.at("enc")),
                     Key{atom_from_json(field(j, "key")), atom_from_json(field(j, "inverse"))});
  }
  throw FormatError("malformed term");
}

json to_json(const Transition& t) {
  json j;
  j["kind"] = t.kind == Transition::Kind::Start ? "start" : "deliver";
  j["process"] = t.process;
  if (t.kind == Transition::Kind::Start) {
    json peers = json::array();
    for (const auto& a : t.peers) peers.push_back(to_json(a));
    j["peers"] = peers;
  } else {
    j["tag"] = std::string(to_string(t.tag));
    j["payload"] = to_json(t.payload);
    j["source"] = {t.source_step, t.source_session};
    j["accepted"] = t.accepted;
  }
  json em = json::array();
  for (const auto& e : t.emitted) {
    em.push_back({{"step", e.step}, {"message", to_json(e.message)},
                  {"recipient", to_json(e.recipient)}});
  }
  j["emitted"] = em;
  return j;
}

Transition transition_from_json(const json& j) {
  Transition t;
  const std::string kind = field(j, "kind").get<std::string>();
  if (kind != "start" && kind != "deliver") throw FormatError("unknown transition kind");
  t.kind = kind == "start" ? Transition::Kind::Start : Transition::Kind::Deliver;
  t.process = field(j, "process").get<int>();
  if (t.kind == Transition::Kind::Start) {
    for (const auto& a : field(j, "peers")) t.peers.push_back(atom_from_json(a));
  } else {
    t.tag = tag_of(field(j, "tag").get<std::string>());
    t.payload = term_from_json(field(j, "payload"));
    const json& src = field(j, "source");
    t.source_step = src.at(0).get<int>();
    t.source_session = src.at(1).get<int>();
    t.accepted = field(j, "accepted").get<bool>();
  }
  if (j.contains("emitted")) {
    for (const auto& e : j.at("emitted")) {
      t.emitted.push_back({field(e, "step").get<int>(), term_from_json(field(e, "message")),
                           atom_from_json(field(e, "recipient"))});
    }
  }
  return t;
}

bool same_transition(const Transition& a, const Transition& b) {
  if (!a.same_action(b) || a.accepted != b.accepted ||
      a.source_step != b.source_step || a.source_session != b.source_session ||
      a.emitted.size() != b.emitted.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.emitted.size(); ++i) {
    const auto& x = a.emitted[i];
    const auto& y = b.emitted[i];
    if (x.step != y.step || !(x.message == y.message) || !(x.recipient == y.recipient)) {
      return false;
    }
  }
  return true;
}

json to_json(const Fingerprint& f) {
  return json{{"kind", f.kind == Fingerprint::Kind::Authentication ? "authentication" : "secrecy"},
              {"victim", f.victim},
              {"peer", f.peer},
              {"nonces", f.nonces}};
}

Fingerprint fingerprint_from_json(const json& j) {
  Fingerprint f;
  const std::string kind = field(j, "kind").get<std::string>();
  if (kind != "authentication" && kind != "secrecy") throw FormatError("unknown violation kind");
  f.kind = kind == "secrecy" ? Fingerprint::Kind::Secrecy : Fingerprint::Kind::Authentication;
  f.victim = field(j, "victim").get<std::string>();
  f.peer = field(j, "peer").get<std::string>();
  f.nonces = field(j, "nonces").get<std::vector<std::string>>();
  return f;
}

json to_json(const TagSet& s) {
  json j = json::array();
  for (Tag t : s.tags()) j.push_back(std::string(to_string(t)));
  return j;
}

TagSet tagset_from_json(const json& j) {
  TagSet s;
  for (const auto& t : j) s.insert(tag_of(t.get<std::string>()));
  return s;
}

json to_json(const RuleLogEntry& e) {
  return json{{"rule", e.rule},   {"first", {e.a, e.b}},       {"second", {e.c, e.d}},
              {"fired", e.fired}, {"enables", to_json(e.enables)}, {"detail", e.detail}};
}

RuleLogEntry rule_log_entry_from_json(const json& j) {
  RuleLogEntry e;
  e.rule = field(j, "rule").get<std::string>();
  e.a = field(j, "first").at(0).get<int>();
  e.b = field(j, "first").at(1).get<int>();
  e.c = field(j, "second").at(0).get<int>();
  e.d = field(j, "second").at(1).get<int>();
  e.fired = field(j, "fired").get<bool>();
  e.enables = tagset_from_json(field(j, "enables"));
  e.detail = field(j, "detail").get<std::string>();
  return e;
}

CheckReport CheckReport::from(const SearchResult& r, const TagSet& pruned,
                              std::vector<RuleLogEntry> log) {
  CheckReport c;
  c.verdict = r.verdict;
  c.states_stored = r.stats.states_stored;
  c.states_matched = r.stats.states_matched;
  c.transitions = r.stats.transitions;
  c.max_depth = r.stats.max_depth;
  c.error_depth = r.stats.error_depth;
  c.pruned_actions = pruned;
  c.rule_log = std::move(log);
  c.counterexample = r.counterexample;
  c.violation = r.violation;
  c.fingerprints = r.fingerprints;
  c.cap_reason = r.cap_reason;
  return c;
}

bool CheckReport::operator==(const CheckReport& o) const {
  if (counterexample.size() != o.counterexample.size()) return false;
  for (std::size_t i = 0; i < counterexample.size(); ++i) {
    if (!same_transition(counterexample[i], o.counterexample[i])) return false;
  }
  return verdict == o.verdict && states_stored == o.states_stored &&
         states_matched == o.states_matched && transitions == o.transitions &&
         max_depth == o.max_depth && error_depth == o.error_depth &&
         pruned_actions == o.pruned_actions && rule_log == o.rule_log &&
         violation == o.violation && fingerprints == o.fingerprints &&
         cap_reason == o.cap_reason;
}

json to_json(const CheckReport& r) {
  json j;
  j["verdict"] = std::string(to_string(r.verdict));
  j["states_stored"] = r.states_stored;
  j["states_matched"] = r.states_matched;
  j["transitions"] = r.transitions;
  j["max_depth"] = r.max_depth;
  j["error_depth"] = r.error_depth ? json(*r.error_depth) : json(nullptr);
  j["pruned_actions"] = to_json(r.pruned_actions);
  json log = json::array();
  for (const auto& e : r.rule_log) log.push_back(to_json(e));
  j["rule_log"] = log;
  json ce = json::array();
  for (const auto& t : r.counterexample) ce.push_back(to_json(t));
  j["counterexample"] = ce;
  j["violation"] = r.violation ? to_json(*r.violation) : json(nullptr);
  json fps = json::array();
  for (const auto& f : r.fingerprints) fps.push_back(to_json(f));
  j["fingerprints"] = fps;
  if (!r.cap_reason.empty()) j["cap_reason"] = r.cap_reason;
  return j;
}

CheckReport check_report_from_json(const json& j) {
  CheckReport r;
  r.verdict = verdict_of(field(j, "verdict").get<std::string>());
  r.states_stored = field(j, "states_stored").get<std::uint64_t>();
  r.states_matched = field(j, "states_matched").get<std::uint64_t>();
  r.transitions = field(j, "transitions").get<std::uint64_t>();
  r.max_depth = field(j, "max_depth").get<std::uint32_t>();
  if (!field(j, "error_depth").is_null()) r.error_depth = j.at("error_depth").get<std::uint32_t>();
  r.pruned_actions = tagset_from_json(field(j, "pruned_actions"));
  for (const auto& e : field(j, "rule_log")) r.rule_log.push_back(rule_log_entry_from_json(e));
  for (const auto& t : field(j, "counterexample")) {
    r.counterexample.push_back(transition_from_json(t));
  }
  if (j.contains("violation") && !j.at("violation").is_null()) {
    r.violation = fingerprint_from_json(j.at("violation"));
  }
  if (j.contains("fingerprints")) {
    for (const auto& f : j.at("fingerprints")) r.fingerprints.push_back(fingerprint_from_json(f));
  }
  if (j.contains("cap_reason")) r.cap_reason = j.at("cap_reason").get<std::string>();
  return r;
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json to_json(const TraceFile& t) {
  json steps = json::array();
  for (const auto& s : t.transitions) steps.push_back(to_json(s));
  return json{{"format", "mimc-trace"},
              {"version", 1},
              {"spec_path", t.spec_path},
              {"spec_hash", t.spec_hash},
              {"sessions", t.sessions},
              {"fake_depth", t.fake_depth},
              {"intruder", t.intruder},
              {"active", to_json(t.active)},
              {"transitions", steps}};
}

TraceFile trace_from_json(const json& j) {
  if (!j.is_object() || j.value("format", "") != "mimc-trace") {
    throw FormatError("not a trace file");
  }
  if (field(j, "version").get<int>() != 1) throw FormatError("unsupported trace version");
  TraceFile t;
  t.spec_path = field(j, "spec_path").get<std::string>();
  t.spec_hash = field(j, "spec_hash").get<std::string>();
  t.sessions = field(j, "sessions").get<int>();
  t.fake_depth = field(j, "fake_depth").get<int>();
  t.intruder = field(j, "intruder").get<std::string>();
  t.active = tagset_from_json(field(j, "active"));
  for (const auto& s : field(j, "transitions")) t.transitions.push_back(transition_from_json(s));
  return t;
}

}  // namespace mimc
