#ifndef MIMC_TERMS_HPP_
#define MIMC_TERMS_HPP_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mimc {

enum class AtomKind : std::uint8_t {
  Agent,
  Nonce,
  SymmetricKey,
  PublicKey,
  PrivateKey,
  Data,
};

std::string_view to_string(AtomKind kind);
std::optional<AtomKind> atom_kind_from_string(std::string_view text);

/// An atomic message. `size` is the abstract bit-size valuation used by the
/// size metadata; it is always positive.
struct Atom {
  AtomKind kind = AtomKind::Data;
  std::string name;
  std::uint32_t size = 1;

  bool is_key() const {
    return kind == AtomKind::SymmetricKey || kind == AtomKind::PublicKey ||
           kind == AtomKind::PrivateKey;
  }

  friend bool operator==(const Atom& a, const Atom& b) {
    return a.kind == b.kind && a.name == b.name;
  }
  friend std::strong_ordering operator<=>(const Atom& a, const Atom& b) {
    if (auto c = a.kind <=> b.kind; c != 0) return c;
    return a.name.compare(b.name) <=> 0;
  }
};

/// A key handle paired with its decryption inverse. Symmetric keys are their
/// own inverse; a public key's inverse is the matching private key.
struct Key {
  Atom handle;
  Atom inverse;

  static Key symmetric(Atom k) { return Key{k, k}; }
  static Key asymmetric(Atom pub, Atom priv) { return Key{pub, priv}; }

  bool is_symmetric() const { return handle == inverse; }
  Key inverted() const { return Key{inverse, handle}; }

  friend bool operator==(const Key& a, const Key& b) {
    return a.handle == b.handle && a.inverse == b.inverse;
  }
  friend std::strong_ordering operator<=>(const Key& a, const Key& b) {
    if (auto c = a.handle <=> b.handle; c != 0) return c;
    return a.inverse <=> b.inverse;
  }
};

enum class TermKind : std::uint8_t { Null, Atom, Concat, Enc };

/// Immutable message term. Always held in canonical form: concatenations are
/// flat, have at least two parts and never contain the null term.
///
/// The default-constructed term is the null term, which stands for a message
/// that was never sent.
class Term {
 public:
  Term() = default;

  static Term null() { return Term(); }
  static Term atom(Atom a);
  static Term concat(std::vector<Term> parts);
  static Term enc(Term body, Key key);

  TermKind kind() const;
  bool is_null() const { return node_ == nullptr; }
  bool is_atom() const { return kind() == TermKind::Atom; }
  bool is_concat() const { return kind() == TermKind::Concat; }
  bool is_enc() const { return kind() == TermKind::Enc; }

  // Accessors; calling one on the wrong kind is a programming error.
  const Atom& as_atom() const;
  std::span<const Term> parts() const;
  const Term& body() const;
  const Key& key() const;

  /// Sum of atom size-classes, ignoring per-encryption overhead.
  std::uint64_t atom_size() const;
  /// Number of Enc nodes in the term.
  std::uint32_t enc_count() const;
  std::size_t hash() const;

  std::string to_string() const;

  friend bool operator==(const Term& a, const Term& b);
  friend std::strong_ordering operator<=>(const Term& a, const Term& b);

 private:
  struct Node;
  explicit Term(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

  std::shared_ptr<const Node> node_;
};

struct TermHash {
  std::size_t operator()(const Term& t) const { return t.hash(); }
};

/// Readability class of a message: 0 plain, 1 partially encrypted, 2 fully
/// encrypted (Enc at the root).
int encryption_class(const Term& t);

/// Message size: atoms contribute their size-class, every Enc node adds
/// `enc_overhead`, the null term is 0.
std::uint64_t size_of(const Term& t, std::uint32_t enc_overhead = 0);

/// True iff `needle` equals `haystack` or one of its transitive subterms.
bool subterm_exists(const Term& needle, const Term& haystack);

/// Every distinct subterm of `t` (including `t`), in pre-order.
std::vector<Term> subterms(const Term& t);

/// Every atom occurring in `t`, including key handles of Enc nodes.
std::vector<Atom> atoms_of(const Term& t);

Term encrypt(const Term& body, const Key& key);

/// Perfect decryption: succeeds only on an Enc node whose key inverse is
/// exactly `key`.
std::optional<Term> decrypt(const Term& t, const Key& key);

/// Rebuilds `t` through the canonicalizing constructors.
Term canonical(const Term& t);

}  // namespace mimc

#endif  // MIMC_TERMS_HPP_
