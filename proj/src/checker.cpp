#include "mimc/checker.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "explorer.hpp"

namespace mimc {

GlobalState GlobalState::initial(const Instance& inst) {
  GlobalState s;
  s.kb = Knowledge::initial_for(*inst.spec);
  for (const auto& p : inst.processes) s.locals.push_back(initial_local_state(p));
  return s;
}

// ---------------------------------------------------------------------------
// Canonical encoding

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_atom(const Instance& inst, std::string& out, const Atom& a) {
  auto it = std::lower_bound(inst.atoms.begin(), inst.atoms.end(), a);
  if (it != inst.atoms.end() && *it == a) {
    put_u32(out, static_cast<std::uint32_t>(it - inst.atoms.begin()));
    return;
  }
  // Not part of the instance alphabet; spell it out.
  put_u32(out, 0xffffffffu);
  out.push_back(static_cast<char>(a.kind));
  put_u32(out, static_cast<std::uint32_t>(a.name.size()));
  out += a.name;
}

void put_term(const Instance& inst, std::string& out, const Term& t) {
  out.push_back(static_cast<char>(t.kind()));
  switch (t.kind()) {
    case TermKind::Null: break;
    case TermKind::Atom: put_atom(inst, out, t.as_atom()); break;
    case TermKind::Concat:
      put_u32(out, static_cast<std::uint32_t>(t.parts().size()));
      for (const auto& p : t.parts()) put_term(inst, out, p);
      break;
    case TermKind::Enc:
      put_atom(inst, out, t.key().handle);
      put_atom(inst, out, t.key().inverse);
      put_term(inst, out, t.body());
      break;
  }
}

}  // namespace

std::string serialize(const Instance& inst, const GlobalState& s) {
  std::string out;
  out.reserve(256);
  for (const auto& ls : s.locals) {
    put_u32(out, static_cast<std::uint32_t>(ls.pc));
    out.push_back(static_cast<char>(ls.status));
    for (const auto& b : ls.bindings) put_term(inst, out, b);
  }
  // Record order fixes the timestamps, which attack actions depend on.
  put_u32(out, static_cast<std::uint32_t>(s.kb.records().size()));
  for (const auto& r : s.kb.records()) {
    put_u32(out, static_cast<std::uint32_t>(r.step));
    put_u32(out, static_cast<std::uint32_t>(r.session));
    put_atom(inst, out, r.sender);
    put_atom(inst, out, r.recipient);
    put_term(inst, out, r.message);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transitions

bool Transition::same_action(const Transition& o) const {
  if (kind != o.kind || process != o.process) return false;
  if (kind == Kind::Start) return peers == o.peers;
  return tag == o.tag && payload == o.payload;
}

namespace {

void emit_all(const Instance& inst, GlobalState& s, int p, Transition& t) {
  auto emitted = run_until_receive(inst, p, s.locals[p]);
  for (const auto& e : emitted) {
    s.kb.intercept(e.message, e.step, inst.processes[p].session, inst.processes[p].agent,
                   e.recipient);
  }
  t.emitted = std::move(emitted);
}

std::vector<std::vector<Atom>> peer_combinations(const ProcessInfo& info) {
  std::vector<std::vector<Atom>> out{{}};
  for (const auto& [var, options] : info.peer_choices) {
    std::vector<std::vector<Atom>> next;
    for (const auto& prefix : out) {
      for (const auto& a : options) {
        auto v = prefix;
        v.push_back(a);
        next.push_back(std::move(v));
      }
    }
    out = std::move(next);
  }
  return out;
}

}  // namespace

ActionContext action_context(const Instance& inst, const GlobalState& s) {
  ActionContext ctx;
  ctx.spec = inst.spec;
  ctx.fake_depth = inst.config.fake_depth;
  for (std::size_t p = 0; p < inst.processes.size(); ++p) {
    const int step = pending_receive(inst, static_cast<int>(p), s.locals[p]);
    if (step == 0) continue;
    const ProcessInfo& info = inst.processes[p];
    TargetSlot slot;
    slot.process = static_cast<int>(p);
    slot.agent = info.agent;
    slot.session = info.session;
    slot.expected_step = step;
    slot.fresh = s.locals[p].pc == 0;
    slot.expected_size = pattern_size(*inst.spec, inst.spec->steps[step - 1].pattern);
    slot.keys = info.keys;
    ctx.slots.push_back(std::move(slot));
  }
  return ctx;
}

GlobalState apply(const Instance& inst, const GlobalState& s, Transition& t) {
  if (t.process < 0 || t.process >= static_cast<int>(inst.processes.size())) {
    throw std::logic_error("transition names an unknown process");
  }
  GlobalState next = s;
  const ProcessInfo& info = inst.processes[t.process];
  LocalState& ls = next.locals[t.process];
  if (t.kind == Transition::Kind::Start) {
    if (!can_start(inst, t.process, ls)) throw std::logic_error("process cannot start");
    if (t.peers.size() != info.peer_choices.size()) {
      throw std::logic_error("wrong number of peer choices");
    }
    for (std::size_t i = 0; i < t.peers.size(); ++i) {
      const auto& options = info.peer_choices[i].second;
      if (std::find(options.begin(), options.end(), t.peers[i]) == options.end()) {
        throw std::logic_error("peer " + t.peers[i].name + " is not an option");
      }
      ls.bindings[info.peer_choices[i].first] = Term::atom(t.peers[i]);
    }
    t.accepted = true;
    emit_all(inst, next, t.process, t);
    return next;
  }
  if (pending_receive(inst, t.process, ls) == 0) {
    throw std::logic_error("process is not waiting for a message");
  }
  t.accepted = deliver(inst, t.process, ls, t.payload);
  t.emitted.clear();
  if (t.accepted) emit_all(inst, next, t.process, t);
  return next;
}

std::vector<Successor> successors(const Instance& inst, const GlobalState& s,
                                  const TagSet& active) {
  std::vector<Successor> out;
  for (std::size_t p = 0; p < inst.processes.size(); ++p) {
    if (!can_start(inst, static_cast<int>(p), s.locals[p])) continue;
    for (auto& peers : peer_combinations(inst.processes[p])) {
      Transition t;
      t.kind = Transition::Kind::Start;
      t.process = static_cast<int>(p);
      t.peers = std::move(peers);
      GlobalState next = apply(inst, s, t);
      out.push_back({std::move(t), std::move(next)});
    }
  }
  for (const auto& a : enumerate_actions(s.kb, active, action_context(inst, s))) {
    Transition t;
    t.kind = Transition::Kind::Deliver;
    t.process = a.target_process;
    t.tag = a.tag;
    t.payload = a.payload;
    t.source_step = a.source_step;
    t.source_session = a.source_session;
    GlobalState next = apply(inst, s, t);
    out.push_back({std::move(t), std::move(next)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Goals

std::string Fingerprint::to_string() const {
  std::string out = kind == Kind::Authentication ? "authentication" : "secrecy";
  out += "(victim=" + victim + ", peer=" + peer + ", nonces={";
  for (std::size_t i = 0; i < nonces.size(); ++i) {
    if (i) out += ", ";
    out += nonces[i];
  }
  return out + "})";
}

std::vector<Fingerprint> violations(const Instance& inst, const GlobalState& s) {
  const ProtocolSpec& spec = *inst.spec;
  std::set<Fingerprint> found;

  auto names_of = [&](const std::vector<int>& vars) {
    std::vector<std::string> v;
    for (int x : vars) v.push_back(spec.variables[x].name);
    std::sort(v.begin(), v.end());
    return v;
  };

  for (const auto& g : spec.goals) {
    if (g.kind == Goal::Kind::Agree) {
      const int role_var = spec.roles[g.role].var;
      const int peer_var = spec.roles[g.peer_role].var;
      for (std::size_t p = 0; p < inst.processes.size(); ++p) {
        const ProcessInfo& info = inst.processes[p];
        const LocalState& ls = s.locals[p];
        if (info.role != g.role || ls.status != ProcessStatus::Done) continue;
        const Term& peer = ls.bindings[peer_var];
        if (peer.is_null() || !peer.is_atom() || !spec.is_honest(peer.as_atom())) continue;
        bool matched = false;
        for (std::size_t q = 0; q < inst.processes.size() && !matched; ++q) {
          const ProcessInfo& other = inst.processes[q];
          if (other.role != g.peer_role || !(other.agent == peer.as_atom())) continue;
          const Bindings& ob = s.locals[q].bindings;
          if (!(ob[role_var] == ls.bindings[role_var])) continue;
          matched = std::all_of(g.vars.begin(), g.vars.end(), [&](int v) {
            return !ob[v].is_null() && ob[v] == ls.bindings[v];
          });
        }
        if (!matched) {
          found.insert({Fingerprint::Kind::Authentication, info.agent.name,
                        peer.as_atom().name, names_of(g.vars)});
        }
      }
    } else {
      for (std::size_t p = 0; p < inst.processes.size(); ++p) {
        const ProcessInfo& info = inst.processes[p];
        const Bindings& b = s.locals[p].bindings;
        // Only runs among honest agents promise secrecy.
        std::string peers;
        bool honest = true;
        for (const auto& r : spec.roles) {
          if (r.var == spec.roles[info.role].var || b[r.var].is_null()) continue;
          const Atom& a = b[r.var].as_atom();
          if (!spec.is_honest(a)) honest = false;
          if (!peers.empty()) peers += ",";
          peers += a.name;
        }
        if (!honest) continue;
        for (int v : g.vars) {
          if (!b[v].is_null() && s.kb.knows(b[v])) {
            found.insert({Fingerprint::Kind::Secrecy, info.agent.name, peers,
                          {spec.variables[v].name}});
          }
        }
      }
    }
  }
  return {found.begin(), found.end()};
}

// ---------------------------------------------------------------------------
// Search

std::optional<std::string> deadlock_warning(const TagSet& active) {
  if (active.contains(Tag::A1_3)) return std::nullopt;
  return "A1_3 is inactive: the intruder never forwards a message to its intended recipient, "
         "so honest runs deadlock unless another action delivers";
}

std::string_view to_string(Strategy s) { return s == Strategy::Dfs ? "dfs" : "bfs"; }

std::string_view to_string(StopMode s) {
  return s == StopMode::FirstError ? "first-error" : "exhaustive";
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::NoViolation: return "no-violation";
    case Verdict::Violation: return "violation";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

namespace {

using Clock = std::chrono::steady_clock;
using detail::Explorer;
using detail::seconds_since;

SearchResult search_dfs(const Instance& inst, const SearchOptions& opts) {
  const auto t0 = Clock::now();
  Explorer ex(opts);
  GlobalState init = GlobalState::initial(inst);
  const std::int64_t root = ex.admit(serialize(inst, init), -1, {}, 0);
  bool state_cap = false, depth_cap = false;


  struct Frame {
    std::int64_t id;
    std::uint32_t depth;
    std::vector<Successor> succ;
    std::size_t next = 0;
  };
  std::vector<Frame> stack;
  auto push = [&](std::int64_t id, std::uint32_t depth, const GlobalState& s) {
    if (depth >= opts.max_depth) {
      depth_cap = true;
      return;
    }
    ex.expanding(id);
    stack.push_back({id, depth, successors(inst, s, opts.active)});
  };
  // Violating states are kept but not expanded.
  const auto v0 = violations(inst, init);
  bool stop = ex.note_violations(root, v0);
  if (v0.empty()) push(root, 0, init);

  while (!stack.empty() && !stop) {
    Frame& f = stack.back();
    if (f.next == f.succ.size()) {
      stack.pop_back();
      continue;
    }
    Successor& sc = f.succ[f.next++];
    const std::uint32_t depth = f.depth + 1;
    const std::int64_t parent = f.id;
    const std::int64_t id = ex.admit(serialize(inst, sc.state), parent, sc.transition, depth);
    if (id < 0) continue;
    auto v = violations(inst, sc.state);
    if (!v.empty()) {
      stop = ex.note_violations(id, v);
      continue;
    }
    if (ex.at_state_cap()) {
      state_cap = true;
      break;
    }
    GlobalState s = std::move(sc.state);
    push(id, depth, s);  // may invalidate f
  }
  ex.finish(state_cap, depth_cap);
  ex.res.stats.wall_seconds = seconds_since(t0);
  return ex.res;
}

SearchResult search_bfs(const Instance& inst, const SearchOptions& opts) {
  const auto t0 = Clock::now();
  Explorer ex(opts);
  GlobalState init = GlobalState::initial(inst);
  const std::int64_t root = ex.admit(serialize(inst, init), -1, {}, 0);
  bool state_cap = false, depth_cap = false;

  struct Item {
    std::int64_t id;
    std::uint32_t depth;
    GlobalState state;
  };
  std::deque<Item> queue;
  const auto v0 = violations(inst, init);
  bool stop = ex.note_violations(root, v0);
  if (v0.empty()) queue.push_back({root, 0, std::move(init)});

  while (!queue.empty() && !stop && !state_cap) {
    Item it = std::move(queue.front());
    queue.pop_front();
    if (it.depth >= opts.max_depth) {
      depth_cap = true;
      continue;
    }
    ex.expanding(it.id);
    for (auto& sc : successors(inst, it.state, opts.active)) {
      const std::int64_t id =
          ex.admit(serialize(inst, sc.state), it.id, sc.transition, it.depth + 1);
      if (id < 0) continue;
      auto v = violations(inst, sc.state);
      if (!v.empty()) {
        if ((stop = ex.note_violations(id, v))) break;
        continue;
      }
      if (ex.at_state_cap()) {
        state_cap = true;
        break;
      }
      queue.push_back({id, it.depth + 1, std::move(sc.state)});
    }
  }
  ex.finish(state_cap, depth_cap);
  ex.res.stats.wall_seconds = seconds_since(t0);
  return ex.res;
}

}  // namespace

SearchResult search(const Instance& inst, const SearchOptions& opts) {
  return opts.strategy == Strategy::Dfs ? search_dfs(inst, opts) : search_bfs(inst, opts);
}

// ---------------------------------------------------------------------------
// Replay and rendering

namespace {

std::string process_label(const Instance& inst, int p) {
  const ProcessInfo& info = inst.processes[p];
  return info.agent.name + " (" + inst.spec->roles[info.role].name + ", session " +
         std::to_string(info.session) + ")";
}

}  // namespace

std::string describe(const Instance& inst, const Transition& t) {
  std::ostringstream os;
  const std::string who = process_label(inst, t.process);
  if (t.kind == Transition::Kind::Start) {
    os << who << " starts";
    if (!t.peers.empty()) {
      os << " with";
      for (const auto& a : t.peers) os << " " << a.name;
    }
  } else {
    os << "intruder [" << to_string(t.tag) << "] delivers " << t.payload.to_string() << " to "
       << who << ": " << (t.accepted ? "accepted" : "rejected, agent fail-stops");
  }
  for (const auto& e : t.emitted) {
    os << "; " << inst.processes[t.process].agent.name << " -> " << e.recipient.name << " ("
       << e.step << "): " << e.message.to_string() << " intercepted";
  }
  return os.str();
}

ReplayResult replay(const Instance& inst, const Counterexample& trace, const TagSet& active) {
  ReplayResult out;
  GlobalState s = GlobalState::initial(inst);
  out.narration.push_back("initial state: " + std::to_string(inst.processes.size()) +
                          " honest processes, intruder knows " +
                          std::to_string(s.kb.known_atoms().size()) + " atoms");
  for (std::size_t i = 0; i < trace.size(); ++i) {
    auto succ = successors(inst, s, active);
    auto it = std::find_if(succ.begin(), succ.end(), [&](const Successor& sc) {
      return sc.transition.same_action(trace[i]);
    });
    if (it == succ.end()) throw ReplayError(i + 1, "transition is not enabled");
    out.executed.push_back(it->transition);
    out.narration.push_back(std::to_string(i + 1) + ". " + describe(inst, it->transition));
    s = std::move(it->state);
  }
  out.violation = is_violation(inst, s);
  if (out.violation) {
    const Fingerprint& f = *out.violation;
    std::string what;
    if (f.kind == Fingerprint::Kind::Authentication) {
      what = f.victim + " completed a run it attributes to " + f.peer + ", but " + f.peer +
             " ran no matching session: impersonation of " + f.peer;
    } else {
      what = "the intruder knows the secret of " + f.victim;
    }
    out.narration.push_back("invalid end state: " + f.to_string() + "; " + what);
  } else {
    out.narration.push_back("end state: no goal violated");
  }
  out.final_state = std::move(s);
  return out;
}

std::string to_dot(const Instance& inst, const Counterexample& executed) {
  const ProtocolSpec& spec = *inst.spec;
  std::ostringstream os;
  os << "digraph trace {\n  rankdir=LR;\n  node [shape=box];\n";
  std::vector<std::string> names;
  for (const auto& a : spec.agents) names.push_back(a.name);
  names.push_back(spec.intruder.name);
  for (const auto& n : names) os << "  \"" << n << "\";\n";
  int k = 0;
  auto edge = [&](const std::string& from, const std::string& to, const std::string& label,
                  const char* style) {
    std::string esc;
    for (char c : label) {
      if (c == '"' || c == '\\') esc.push_back('\\');
      esc.push_back(c);
    }
    os << "  \"" << from << "\" -> \"" << to << "\" [label=\"" << ++k << ". " << esc
       << "\", style=" << style << "];\n";
  };
  for (const auto& t : executed) {
    const std::string agent = inst.processes[t.process].agent.name;
    if (t.kind == Transition::Kind::Deliver) {
      edge(spec.intruder.name, agent,
           std::string(to_string(t.tag)) + " " + t.payload.to_string() +
               (t.accepted ? "" : " (rejected)"),
           "dashed");
    }
    for (const auto& e : t.emitted) {
      edge(agent, spec.intruder.name,
           e.message.to_string() + " for " + e.recipient.name, "solid");
    }
  }
  os << "}\n";
  return os.str();
}

}  // namespace mimc
