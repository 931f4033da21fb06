#include "mimc/mi.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <set>

namespace mimc {

IktTable::IktTable(int steps, int sessions, std::shared_ptr<const MetadataRegistry> registry)
    : steps_(steps), sessions_(sessions), registry_(std::move(registry)) {
  if (steps < 1 || sessions < 1) throw IktError("table dimensions must be positive");
  entries_.resize(static_cast<std::size_t>(steps) * sessions);
  const std::size_t k = registry_ ? registry_->size() : 0;
  for (auto& e : entries_) e.extra.assign(k, 0);
}

const MetadataEntry& IktTable::at(int step, int session) const {
  if (step < 1 || step > steps_ || session < 1 || session > sessions_) {
    throw IktError("coordinate (" + std::to_string(step) + "," + std::to_string(session) +
                   ") outside the table");
  }
  return entries_[static_cast<std::size_t>(session - 1) * steps_ + (step - 1)];
}

MetadataEntry& IktTable::slot(int step, int session) {
  return const_cast<MetadataEntry&>(std::as_const(*this).at(step, session));
}

void IktTable::record(int step, int session, const Term& msg, const Knowledge& kb,
                      std::uint32_t enc_overhead) {
  MetadataEntry& e = slot(step, session);
  if (e.recorded) {
    throw IktError("entry (" + std::to_string(step) + "," + std::to_string(session) +
                   ") is already recorded");
  }
  if (step > 1 && !at(step - 1, session).recorded) {
    throw IktError("entry (" + std::to_string(step) + "," + std::to_string(session) +
                   ") recorded before its predecessor");
  }
  e.encryption = intruder_encryption_class(kb, msg);
  e.size = size_of(msg, enc_overhead);
  e.timestamp = ++clock_;
  e.recorded = true;
  if (registry_) {
    for (std::size_t i = 0; i < registry_->size(); ++i) {
      e.extra[i] = registry_->evaluate(i, msg, kb);
    }
  }
}

bool IktTable::zero_suffix_holds() const {
  for (int b = 1; b <= sessions_; ++b) {
    bool gap = false;
    for (int a = 1; a <= steps_; ++a) {
      const auto& e = at(a, b);
      if (!e.recorded) {
        if (e.encryption != 0 || e.size != 0 || e.timestamp != 0) return false;
        gap = true;
      } else if (gap) {
        return false;
      }
    }
  }
  return true;
}

bool compare(const MetadataEntry& p1, const MetadataEntry& p2) {
  if (p1.encryption == p2.encryption || p1.size == p2.size) return true;
  const std::size_t k = std::min(p1.extra.size(), p2.extra.size());
  for (std::size_t i = 0; i < k; ++i) {
    if (p1.extra[i] == p2.extra[i]) return true;
  }
  return false;
}

namespace {

const TagSet kA1{Tag::A1_1, Tag::A1_2, Tag::A1_3};

TagSet readability_tags(int encryption) {
  TagSet s = kA1;
  s.insert(Tag::A4);
  s.insert(Tag::A5);
  if (encryption != 2) s.insert(Tag::A2);
  return s;
}

std::string coord(int a, int b) {
  return "(" + std::to_string(a) + "," + std::to_string(b) + ")";
}

/// Subterms of `t` the intruder can read, i.e. not below an encryption it
/// cannot open.
void readable_subterms(const Knowledge& kb, const Term& t, std::vector<Term>& out) {
  out.push_back(t);
  if (t.is_concat()) {
    for (const auto& p : t.parts()) readable_subterms(kb, p, out);
  } else if (t.is_enc() && kb.knows(t.key().inverse)) {
    readable_subterms(kb, t.body(), out);
  }
}

}  // namespace

PruneReport evaluate_rules(const IktTable& ikt, const Knowledge& kb) {
  PruneReport rep;
  TagSet enabled;
  const std::vector<Atom> known = kb.known_atoms();

  struct Cell {
    int a, b;
    const MetadataEntry* e;
  };
  std::vector<Cell> recorded;

  for (int b = 1; b <= ikt.sessions(); ++b) {
    for (int a = 1; a <= ikt.steps(); ++a) {
      const MetadataEntry& e = ikt.at(a, b);
      if (!e.recorded) {
        rep.log.push_back({"never sent", a, b, 0, 0, false, {}, "metadata ignored"});
        continue;
      }
      recorded.push_back({a, b, &e});

      TagSet row = readability_tags(e.encryption);
      for (Tag t : row.tags()) enabled.insert(t);
      rep.log.push_back({"readability", a, b, 0, 0, true, row,
                         "encryption=" + std::to_string(e.encryption)});

      if (e.encryption == 2) {
        rep.log.push_back({"size-equal atom in readable part", a, b, 0, 0, false,
                           TagSet{Tag::A3}, "message fully encrypted"});
        continue;
      }
      const InterceptRecord* rec = kb.find(a, b);
      if (!rec) {
        throw IktError("no intercepted message behind recorded entry " + coord(a, b));
      }
      std::vector<Term> parts;
      readable_subterms(kb, readable_view(kb, rec->message), parts);
      std::string detail = "no readable part has a size-equal known atom";
      bool fired = false;
      for (const auto& m : parts) {
        for (const auto& amsg : known) {
          if (amsg.size == size_of(m) && !(Term::atom(amsg) == m)) {
            fired = true;
            detail = m.to_string() + " ~ " + amsg.name + " (size " +
                     std::to_string(amsg.size) + ")";
            break;
          }
        }
        if (fired) break;
      }
      if (fired) enabled.insert(Tag::A3);
      rep.log.push_back({"size-equal atom in readable part", a, b, 0, 0, fired,
                         TagSet{Tag::A3}, detail});
    }
  }

  for (std::size_t i = 0; i < recorded.size(); ++i) {
    for (std::size_t j = i + 1; j < recorded.size(); ++j) {
      const Cell& x = recorded[i];
      const Cell& y = recorded[j];
      const bool similar = compare(*x.e, *y.e);
      if (x.a == y.a) {
        const bool first = x.a == 1;
        rep.log.push_back({first ? "step-1 cross-session" : "cross-session", x.a, x.b, y.a,
                           y.b, similar,
                           first ? TagSet{Tag::A4, Tag::A5} : TagSet{Tag::A5},
                           similar ? "entries similar" : "entries differ"});
      }
      if (x.b == y.b) {
        rep.log.push_back({"same-session replay", x.a, x.b, y.a, y.b, similar, kA1,
                           similar ? "entries similar" : "entries differ"});
        const bool equal_size = x.e->size == y.e->size;
        if (equal_size) enabled.insert(Tag::A3);
        rep.log.push_back({"same-session size", x.a, x.b, y.a, y.b, equal_size,
                           TagSet{Tag::A3},
                           "sizes " + std::to_string(x.e->size) + " and " +
                               std::to_string(y.e->size)});
      } else {
        const MetadataEntry& later = x.e->timestamp > y.e->timestamp ? *x.e : *y.e;
        const bool fired = similar && later.encryption != 2;
        rep.log.push_back({"cross-session type-flaw", x.a, x.b, y.a, y.b, fired,
                           TagSet{Tag::A3},
                           fired ? "similar and later message readable"
                                 : (similar ? "later message unreadable" : "entries differ")});
      }
    }
  }

  rep.retained = enabled;
  rep.removable = enabled.complement();
  return rep;
}

SimulationResult mi_simulate(const ProtocolSpec& spec, const SessionConfig& config,
                             std::shared_ptr<const MetadataRegistry> registry) {
  Instance inst = instantiate(spec, config);
  SimulationResult res{IktTable(spec.z(), config.n(), std::move(registry)), {},
                       Knowledge::initial_for(spec)};

  std::vector<LocalState> locals;
  for (const auto& p : inst.processes) {
    LocalState ls = initial_local_state(p);
    for (const auto& [var, options] : p.peer_choices) ls.bindings[var] = Term::atom(options.front());
    locals.push_back(std::move(ls));
  }

  for (int s = 1; s <= config.n(); ++s) {
    std::vector<int> by_role(spec.roles.size(), -1);
    for (std::size_t p = 0; p < inst.processes.size(); ++p) {
      if (inst.processes[p].session == s) by_role[inst.processes[p].role] = static_cast<int>(p);
    }
    struct Sent {
      int process;
      Emission e;
    };
    std::deque<Sent> queue;
    for (int p : by_role) {
      if (p < 0 || !can_start(inst, p, locals[p])) continue;
      for (auto& e : run_until_receive(inst, p, locals[p])) queue.push_back({p, std::move(e)});
    }
    const int cutoff = config.sessions[s - 1].cutoff;
    while (!queue.empty()) {
      Sent sent = std::move(queue.front());
      queue.pop_front();
      const Step& step = spec.steps[sent.e.step - 1];
      res.knowledge.intercept(sent.e.message, sent.e.step, s, inst.processes[sent.process].agent,
                              sent.e.recipient);
      res.ikt.record(sent.e.step, s, sent.e.message, res.knowledge);
      if (cutoff == sent.e.step) break;
      int target = by_role[step.receiver];
      // The intruder never answers in the passive phase.
      if (target < 0 || !(inst.processes[target].agent == sent.e.recipient)) break;
      if (pending_receive(inst, target, locals[target]) != sent.e.step) break;
      if (!deliver(inst, target, locals[target], sent.e.message)) break;
      for (auto& e : run_until_receive(inst, target, locals[target])) {
        queue.push_back({target, std::move(e)});
      }
    }
  }

  res.report = evaluate_rules(res.ikt, res.knowledge);
  return res;
}

}  // namespace mimc
