#include "mimc/terms.hpp"

#include <algorithm>
#include <cassert>
#include <functional>
#include <set>

namespace mimc {

namespace {

constexpr std::size_t kHashSeed = 0x9e3779b97f4a7c15ull;

std::size_t mix(std::size_t seed, std::size_t value) {
  return seed ^ (value + kHashSeed + (seed << 6) + (seed >> 2));
}

std::size_t hash_atom(const Atom& a) {
  return mix(std::hash<std::string>{}(a.name), static_cast<std::size_t>(a.kind));
}

}  // namespace

std::string_view to_string(AtomKind kind) {
  switch (kind) {
    case AtomKind::Agent: return "agent";
    case AtomKind::Nonce: return "nonce";
    case AtomKind::SymmetricKey: return "symkey";
    case AtomKind::PublicKey: return "pubkey";
    case AtomKind::PrivateKey: return "privkey";
    case AtomKind::Data: return "data";
  }
  return "data";
}

std::optional<AtomKind> atom_kind_from_string(std::string_view text) {
  for (auto k : {AtomKind::Agent, AtomKind::Nonce, AtomKind::SymmetricKey,
                 AtomKind::PublicKey, AtomKind::PrivateKey, AtomKind::Data}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

struct Term::Node {
  TermKind kind;
  Atom atom;
  std::vector<Term> parts;  // Concat parts, or the single Enc body
  Key key;
  std::uint64_t atom_size = 0;
  std::uint32_t enc_count = 0;
  std::size_t hash = 0;
};

Term Term::atom(Atom a) {
  assert(a.size > 0);
  auto node = std::make_shared<Node>();
  node->kind = TermKind::Atom;
  node->atom_size = a.size;
  node->hash = mix(1, hash_atom(a));
  node->atom = std::move(a);
  return Term(std::move(node));
}

Term Term::concat(std::vector<Term> parts) {
  std::vector<Term> flat;
  flat.reserve(parts.size());
  for (auto& p : parts) {
    if (p.is_null()) continue;
    if (p.is_concat()) {
      for (const auto& q : p.parts()) flat.push_back(q);
    } else {
      flat.push_back(std::move(p));
    }
  }
  if (flat.empty()) return Term();
  if (flat.size() == 1) return flat.front();

  auto node = std::make_shared<Node>();
  node->kind = TermKind::Concat;
  std::size_t h = 2;
  for (const auto& p : flat) {
    node->atom_size += p.atom_size();
    node->enc_count += p.enc_count();
    h = mix(h, p.hash());
  }
  node->hash = h;
  node->parts = std::move(flat);
  return Term(std::move(node));
}

Term Term::enc(Term body, Key key) {
  assert(!body.is_null());
  auto node = std::make_shared<Node>();
  node->kind = TermKind::Enc;
  node->atom_size = body.atom_size();
  node->enc_count = body.enc_count() + 1;
  node->hash = mix(mix(3, body.hash()), hash_atom(key.handle));
  node->parts.push_back(std::move(body));
  node->key = std::move(key);
  return Term(std::move(node));
}

TermKind Term::kind() const { return node_ ? node_->kind : TermKind::Null; }

const Atom& Term::as_atom() const {
  assert(is_atom());
  return node_->atom;
}

std::span<const Term> Term::parts() const {
  assert(is_concat());
  return node_->parts;
}

const Term& Term::body() const {
  assert(is_enc());
  return node_->parts.front();
}

const Key& Term::key() const {
  assert(is_enc());
  return node_->key;
}

std::uint64_t Term::atom_size() const { return node_ ? node_->atom_size : 0; }
std::uint32_t Term::enc_count() const { return node_ ? node_->enc_count : 0; }
std::size_t Term::hash() const { return node_ ? node_->hash : 0; }

std::string Term::to_string() const {
  switch (kind()) {
    case TermKind::Null: return "null";
    case TermKind::Atom: return node_->atom.name;
    case TermKind::Concat: {
      std::string out;
      for (std::size_t i = 0; i < node_->parts.size(); ++i) {
        if (i) out += ", ";
        out += node_->parts[i].to_string();
      }
      return out;
    }
    case TermKind::Enc:
      return "{" + body().to_string() + "}" + node_->key.handle.name;
  }
  return {};
}

bool operator==(const Term& a, const Term& b) {
  if (a.node_ == b.node_) return true;
  if (a.hash() != b.hash()) return false;
  return (a <=> b) == 0;
}

std::strong_ordering operator<=>(const Term& a, const Term& b) {
  if (a.node_ == b.node_) return std::strong_ordering::equal;
  if (auto c = a.kind() <=> b.kind(); c != 0) return c;
  switch (a.kind()) {
    case TermKind::Null: return std::strong_ordering::equal;
    case TermKind::Atom: return a.node_->atom <=> b.node_->atom;
    case TermKind::Concat: {
      const auto& pa = a.node_->parts;
      const auto& pb = b.node_->parts;
      return std::lexicographical_compare_three_way(pa.begin(), pa.end(), pb.begin(),
                                                    pb.end());
    }
    case TermKind::Enc:
      if (auto c = a.node_->key <=> b.node_->key; c != 0) return c;
      return a.body() <=> b.body();
  }
  return std::strong_ordering::equal;
}

int encryption_class(const Term& t) {
  if (t.is_enc()) return 2;
  return t.enc_count() > 0 ? 1 : 0;
}

std::uint64_t size_of(const Term& t, std::uint32_t enc_overhead) {
  return t.atom_size() + static_cast<std::uint64_t>(enc_overhead) * t.enc_count();
}

bool subterm_exists(const Term& needle, const Term& haystack) {
  if (needle == haystack) return true;
  // A term cannot hide a larger one.
  if (needle.atom_size() > haystack.atom_size()) return false;
  switch (haystack.kind()) {
    case TermKind::Concat:
      return std::ranges::any_of(haystack.parts(),
                                 [&](const Term& p) { return subterm_exists(needle, p); });
    case TermKind::Enc:
      return subterm_exists(needle, haystack.body());
    default:
      return false;
  }
}

std::vector<Term> subterms(const Term& t) {
  std::vector<Term> out;
  std::set<Term> seen;
  std::function<void(const Term&)> walk = [&](const Term& u) {
    if (u.is_null() || !seen.insert(u).second) return;
    out.push_back(u);
    if (u.is_concat()) {
      for (const auto& p : u.parts()) walk(p);
    } else if (u.is_enc()) {
      walk(u.body());
    }
  };
  walk(t);
  return out;
}

std::vector<Atom> atoms_of(const Term& t) {
  std::set<Atom> found;
  std::function<void(const Term&)> walk = [&](const Term& u) {
    switch (u.kind()) {
      case TermKind::Atom: found.insert(u.as_atom()); break;
      case TermKind::Concat:
        for (const auto& p : u.parts()) walk(p);
        break;
      case TermKind::Enc:
        found.insert(u.key().handle);
        walk(u.body());
        break;
      case TermKind::Null: break;
    }
  };
  walk(t);
  return {found.begin(), found.end()};
}

Term encrypt(const Term& body, const Key& key) { return Term::enc(body, key); }

std::optional<Term> decrypt(const Term& t, const Key& key) {
  if (!t.is_enc()) return std::nullopt;
  if (t.key().inverse != key.handle) return std::nullopt;
  return t.body();
}

Term canonical(const Term& t) {
  switch (t.kind()) {
    case TermKind::Null: return Term();
    case TermKind::Atom: return Term::atom(t.as_atom());
    case TermKind::Concat: {
      std::vector<Term> parts;
      for (const auto& p : t.parts()) parts.push_back(canonical(p));
      return Term::concat(std::move(parts));
    }
    case TermKind::Enc: return Term::enc(canonical(t.body()), t.key());
  }
  return t;
}

}  // namespace mimc
