#include "mimc/intruder.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>

namespace mimc {

std::string_view to_string(Tag tag) {
  switch (tag) {
    case Tag::A1_1: return "A1_1";
    case Tag::A1_2: return "A1_2";
    case Tag::A1_3: return "A1_3";
    case Tag::A2: return "A2";
    case Tag::A3: return "A3";
    case Tag::A4: return "A4";
    case Tag::A5: return "A5";
  }
  return "?";
}

std::optional<Tag> tag_from_string(std::string_view text) {
  for (Tag t : kAllTags) {
    if (to_string(t) == text) return t;
  }
  return std::nullopt;
}

std::vector<Tag> TagSet::tags() const {
  std::vector<Tag> out;
  for (Tag t : kAllTags) {
    if (contains(t)) out.push_back(t);
  }
  return out;
}

std::string TagSet::to_string() const {
  std::string out = "{";
  bool first = true;
  for (Tag t : tags()) {
    if (!first) out += ", ";
    out += mimc::to_string(t);
    first = false;
  }
  return out + "}";
}

// ---------------------------------------------------------------------------
// Knowledge

namespace {

bool sorted_insert(std::vector<Term>& v, const Term& t) {
  auto it = std::lower_bound(v.begin(), v.end(), t);
  if (it != v.end() && *it == t) return false;
  v.insert(it, t);
  return true;
}

}  // namespace

Knowledge::Knowledge() : initial_(std::make_shared<const std::vector<Term>>()) {}

Knowledge::Knowledge(std::vector<Term> initial) {
  std::sort(initial.begin(), initial.end());
  initial.erase(std::unique(initial.begin(), initial.end()), initial.end());
  initial_ = std::make_shared<const std::vector<Term>>(initial);
  saturate(std::move(initial));
}

Knowledge Knowledge::initial_for(const ProtocolSpec& spec) {
  std::vector<Term> terms;
  for (const auto& a : spec.agents) terms.push_back(Term::atom(a));
  terms.push_back(Term::atom(spec.intruder));
  for (const auto& pk : spec.public_keys()) terms.push_back(Term::atom(pk));
  for (const auto& k : keys_of(spec, spec.intruder).atoms) terms.push_back(Term::atom(k));
  for (const auto& d : spec.public_data) terms.push_back(Term::atom(d));
  return Knowledge(std::move(terms));
}

void Knowledge::saturate(std::vector<Term> work) {
  while (!work.empty()) {
    Term t = std::move(work.back());
    work.pop_back();
    if (t.is_null() || !sorted_insert(analyzed_, t)) continue;
    switch (t.kind()) {
      case TermKind::Concat:
        for (const auto& p : t.parts()) work.push_back(p);
        break;
      case TermKind::Enc:
        if (knows(t.key().inverse)) work.push_back(t.body());
        break;
      case TermKind::Atom:
        if (t.as_atom().is_key()) {
          // A new key may open ciphertexts seen earlier.
          for (const auto& u : analyzed_) {
            if (u.is_enc() && u.key().inverse == t.as_atom()) work.push_back(u.body());
          }
        }
        break;
      case TermKind::Null: break;
    }
  }
}

const InterceptRecord& Knowledge::intercept(const Term& msg, int step, int session,
                                            const Atom& sender, const Atom& recipient) {
  if (find(step, session)) {
    throw std::logic_error("message (" + std::to_string(step) + "," +
                           std::to_string(session) + ") intercepted twice");
  }
  InterceptRecord r{msg, step, session, sender, recipient, ++clock_};
  records_.push_back(std::move(r));
  saturate({msg});
  return records_.back();
}

void Knowledge::add(const Term& t) {
  extra_.push_back(t);
  saturate({t});
}

const InterceptRecord* Knowledge::find(int step, int session) const {
  for (const auto& r : records_) {
    if (r.step == step && r.session == session) return &r;
  }
  return nullptr;
}

std::vector<Term> Knowledge::base() const {
  std::vector<Term> out = *initial_;
  out.insert(out.end(), extra_.begin(), extra_.end());
  for (const auto& r : records_) out.push_back(r.message);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool Knowledge::knows(const Term& t) const {
  return std::binary_search(analyzed_.begin(), analyzed_.end(), t);
}

std::vector<Atom> Knowledge::known_atoms() const {
  std::vector<Atom> out;
  for (const auto& t : analyzed_) {
    if (t.is_atom()) out.push_back(t.as_atom());
  }
  return out;
}

bool can_derive(const Knowledge& kb, const Term& goal, int depth) {
  if (kb.knows(goal)) return true;
  if (depth <= 0) return false;
  switch (goal.kind()) {
    case TermKind::Concat:
      return std::ranges::all_of(goal.parts(),
                                 [&](const Term& p) { return can_derive(kb, p, depth - 1); });
    case TermKind::Enc:
      return kb.knows(goal.key().handle) && can_derive(kb, goal.body(), depth - 1);
    default:
      return false;
  }
}

Term readable_view(const Knowledge& kb, const Term& msg) {
  Term view = msg;
  while (view.is_enc() && kb.knows(view.key().inverse)) view = view.body();
  return view;
}

int intruder_encryption_class(const Knowledge& kb, const Term& msg) {
  if (msg.is_enc()) return kb.knows(msg.key().inverse) ? 0 : 2;
  return encryption_class(msg);
}

std::vector<Key> keys_towards(const Knowledge& kb, const ProtocolSpec& spec,
                              const Atom& agent) {
  std::vector<Key> out;
  for (const auto& kp : spec.keypairs) {
    KeyRef ref{kp.public_name, agent.name, false};
    auto key = spec.resolve_key(ref, agent.name);
    if (key && kb.knows(key->handle)) out.push_back(*key);
  }
  for (const auto& s : spec.symkeys) {
    if (std::find(s.owners.begin(), s.owners.end(), agent.name) != s.owners.end() &&
        kb.knows(s.atom)) {
      out.push_back(Key::symmetric(s.atom));
    }
  }
  return out;
}

std::uint64_t pattern_size(const ProtocolSpec& spec, const Pattern& p) {
  switch (p.kind) {
    case Pattern::Kind::Literal: return p.literal.size;
    case Pattern::Kind::Var: {
      const Variable& v = spec.variables[p.var];
      return v.is_role ? spec.size_for(AtomKind::Agent) : v.size;
    }
    case Pattern::Kind::Concat: {
      std::uint64_t total = 0;
      for (const auto& q : p.parts) total += pattern_size(spec, q);
      return total;
    }
    case Pattern::Kind::Enc: return pattern_size(spec, p.parts.front());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Attack-action generation

namespace {

std::vector<Term> parts_of(const Term& view) {
  if (view.is_concat()) return {view.parts().begin(), view.parts().end()};
  return {view};
}

bool part_readable(const Knowledge& kb, const Term& part) {
  return !(part.is_enc() && !kb.knows(part.key().inverse));
}

/// Fake bodies obtained by replacing one readable part with a known atom
/// accepted by `allow(part, atom)`, plus (when `append`) one atom appended.
std::vector<Term> substitutions(const Knowledge& kb, const Term& view,
                                const std::vector<Atom>& candidates, bool append,
                                const auto& allow) {
  std::set<Term> out;
  const auto parts = parts_of(view);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!part_readable(kb, parts[i])) continue;
    for (const auto& c : candidates) {
      Term ct = Term::atom(c);
      if (ct == parts[i] || !allow(parts[i], c)) continue;
      auto next = parts;
      next[i] = ct;
      out.insert(Term::concat(std::move(next)));
    }
  }
  if (append) {
    for (const auto& c : candidates) {
      auto next = parts;
      next.push_back(Term::atom(c));
      out.insert(Term::concat(std::move(next)));
    }
  }
  return {out.begin(), out.end()};
}

struct Emitter {
  std::vector<AttackAction>& out;

  void emit(Tag tag, const Term& payload, const TargetSlot& slot, const InterceptRecord& src) {
    AttackAction a;
    a.tag = tag;
    a.payload = payload;
    a.target_process = slot.process;
    a.target_agent = slot.agent;
    a.target_session = slot.session;
    a.target_step = slot.expected_step;
    a.source_step = src.step;
    a.source_session = src.session;
    out.push_back(std::move(a));
  }
};

}  // namespace

std::vector<AttackAction> enumerate_actions(const Knowledge& kb, const TagSet& active,
                                            const ActionContext& ctx) {
  std::vector<AttackAction> out;
  if (active.empty() || ctx.slots.empty()) return out;
  Emitter em{out};

  std::map<int, std::uint32_t> last_ts;  // per session
  for (const auto& r : kb.records()) {
    last_ts[r.session] = std::max(last_ts[r.session], r.timestamp);
  }
  // Payloads reused against a session that already has traffic must not be
  // newer than that session's last intercepted message.
  auto timely = [&](const InterceptRecord& r, const TargetSlot& slot) {
    auto it = last_ts.find(slot.session);
    return it == last_ts.end() || r.timestamp <= it->second;
  };

  const std::vector<Atom> known = kb.known_atoms();

  for (const auto& r : kb.records()) {
    const Term view = readable_view(kb, r.message);
    const bool opened = !(view == r.message);
    const int cls = intruder_encryption_class(kb, r.message);

    for (const auto& slot : ctx.slots) {
      // A1: verbatim replay, split by who receives it.
      Tag a1 = slot.agent == r.sender      ? Tag::A1_2
               : slot.agent == r.recipient ? Tag::A1_3
                                           : Tag::A1_1;
      if (active.contains(a1)) em.emit(a1, r.message, slot, r);

      // A4/A5: reuse as-is, or re-encrypt an opened body for the target.
      const bool a4 = active.contains(Tag::A4) && r.step == 1 && slot.fresh;
      const bool a5 = active.contains(Tag::A5);
      if ((a4 || a5) && timely(r, slot)) {
        std::vector<Term> payloads{r.message};
        if (opened && ctx.fake_depth >= 1) {
          for (const auto& k : keys_towards(kb, *ctx.spec, slot.agent)) {
            payloads.push_back(Term::enc(view, k));
          }
        }
        for (const auto& p : payloads) {
          if (a4) em.emit(Tag::A4, p, slot, r);
          if (a5) em.emit(Tag::A5, p, slot, r);
        }
      }

      // A3, whole-message type flaw: an earlier same-session message whose
      // size equals what the target expects.
      if (active.contains(Tag::A3) && r.session == slot.session &&
          r.step < slot.expected_step && size_of(r.message) == slot.expected_size) {
        em.emit(Tag::A3, r.message, slot, r);
      }
    }

    if (cls == 2 || ctx.fake_depth < 1) continue;

    // A2 (integrity) and A3 (size-equal part substitution) rewrite readable
    // content; the fake goes out in clear or under a key of the target.
    std::vector<std::pair<Tag, std::vector<Term>>> fakes;
    if (active.contains(Tag::A2)) {
      fakes.emplace_back(Tag::A2, substitutions(kb, view, known, true,
                                                [](const Term&, const Atom&) { return true; }));
    }
    if (active.contains(Tag::A3)) {
      fakes.emplace_back(Tag::A3, substitutions(kb, view, known, false,
                                                [](const Term& part, const Atom& c) {
                                                  return part.is_atom() &&
                                                         size_of(part) == c.size;
                                                }));
    }
    for (const auto& [tag, bodies] : fakes) {
      for (const auto& slot : ctx.slots) {
        std::vector<Key> keys;
        if (ctx.fake_depth >= 2) keys = keys_towards(kb, *ctx.spec, slot.agent);
        for (const auto& body : bodies) {
          if (!(body == r.message)) em.emit(tag, body, slot, r);
          for (const auto& k : keys) {
            Term wrapped = Term::enc(body, k);
            if (!(wrapped == r.message)) em.emit(tag, wrapped, slot, r);
          }
        }
      }
    }
  }

  std::sort(out.begin(), out.end(), [](const AttackAction& a, const AttackAction& b) {
    return std::tie(a.tag, a.payload, a.target_process, a.source_step, a.source_session) <
           std::tie(b.tag, b.payload, b.target_process, b.source_step, b.source_session);
  });
  // One instance per (tag, payload, target); the source is kept from the
  // earliest coordinate.
  out.erase(std::unique(out.begin(), out.end(),
                        [](const AttackAction& a, const AttackAction& b) {
                          return a.tag == b.tag && a.payload == b.payload &&
                                 a.target_process == b.target_process;
                        }),
            out.end());
  return out;
}

}  // namespace mimc
