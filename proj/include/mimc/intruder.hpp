#ifndef MIMC_INTRUDER_HPP_
#define MIMC_INTRUDER_HPP_

#include <array>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mimc/protocol.hpp"
#include "mimc/terms.hpp"

namespace mimc {

/// Attack actions of the intruder. A1 is split by recipient class: a third
/// participant (A1_1), the original sender (A1_2), the intended recipient
/// (A1_3).
enum class Tag : std::uint8_t { A1_1, A1_2, A1_3, A2, A3, A4, A5 };

inline constexpr std::array<Tag, 7> kAllTags = {Tag::A1_1, Tag::A1_2, Tag::A1_3, Tag::A2,
                                                Tag::A3,   Tag::A4,   Tag::A5};

std::string_view to_string(Tag tag);
std::optional<Tag> tag_from_string(std::string_view text);

/// Small value set of attack-action tags.
class TagSet {
 public:
  constexpr TagSet() = default;
  TagSet(std::initializer_list<Tag> tags) {
    for (Tag t : tags) insert(t);
  }

  static TagSet all() {
    TagSet s;
    s.bits_ = 0x7f;
    return s;
  }

  bool contains(Tag t) const { return (bits_ >> static_cast<int>(t)) & 1u; }
  void insert(Tag t) { bits_ |= static_cast<std::uint8_t>(1u << static_cast<int>(t)); }
  void erase(Tag t) { bits_ &= static_cast<std::uint8_t>(~(1u << static_cast<int>(t))); }
  bool empty() const { return bits_ == 0; }
  std::vector<Tag> tags() const;
  TagSet complement() const {
    TagSet s;
    s.bits_ = static_cast<std::uint8_t>(~bits_ & 0x7f);
    return s;
  }
  bool is_subset_of(const TagSet& other) const { return (bits_ & ~other.bits_) == 0; }
  std::string to_string() const;

  friend bool operator==(const TagSet&, const TagSet&) = default;

 private:
  std::uint8_t bits_ = 0;
};

/// One intercepted message with its (step, session) coordinate.
struct InterceptRecord {
  Term message;
  int step = 0;     // a
  int session = 0;  // b
  Atom sender;
  Atom recipient;
  std::uint32_t timestamp = 0;

  friend bool operator==(const InterceptRecord&, const InterceptRecord&) = default;
};

/// Dolev-Yao knowledge: initial terms plus intercepted messages, with the
/// decomposition closure (projection and decryption to saturation) kept up
/// to date. Copies share the initial part.
class Knowledge {
 public:
  Knowledge();
  explicit Knowledge(std::vector<Term> initial);

  /// Initial knowledge of the intruder of `spec`: agent names, every public
  /// key, its own private keys and symmetric keys, public constants.
  static Knowledge initial_for(const ProtocolSpec& spec);

  /// Records an intercepted message. The (step, session) coordinate must be
  /// new; throws std::logic_error otherwise.
  const InterceptRecord& intercept(const Term& msg, int step, int session, const Atom& sender,
                                   const Atom& recipient);

  /// Adds a term without an interception record.
  void add(const Term& t);

  const std::vector<InterceptRecord>& records() const { return records_; }
  const InterceptRecord* find(int step, int session) const;
  std::uint32_t clock() const { return clock_; }

  /// Sorted base terms: initial knowledge, added terms, intercepted messages.
  std::vector<Term> base() const;
  /// Sorted decomposition closure of the base.
  const std::vector<Term>& analyzed() const { return analyzed_; }
  bool knows(const Term& t) const;
  bool knows(const Atom& a) const { return knows(Term::atom(a)); }
  std::vector<Atom> known_atoms() const;

 private:
  void saturate(std::vector<Term> work);

  std::shared_ptr<const std::vector<Term>> initial_;
  std::vector<Term> extra_;
  std::vector<InterceptRecord> records_;
  std::vector<Term> analyzed_;
  std::uint32_t clock_ = 0;
};

/// Bounded Dolev-Yao derivation: `goal` is obtainable from the closure by at
/// most `depth` nested composition layers (concatenation, encryption under a
/// known key).
bool can_derive(const Knowledge& kb, const Term& goal, int depth);

/// Strips outer encryption layers the intruder can open.
Term readable_view(const Knowledge& kb, const Term& msg);

/// Readability class of a message from the intruder's point of view: a
/// fully encrypted message whose key inverse the intruder holds counts as
/// plain text (0).
int intruder_encryption_class(const Knowledge& kb, const Term& msg);

/// A receive slot an attack action can target.
struct TargetSlot {
  int process = -1;
  Atom agent;
  int session = 0;
  int expected_step = 0;
  bool fresh = false;  // the process has not acted yet (new session)
  std::uint64_t expected_size = 0;
  KeyRing keys;
};

struct ActionContext {
  std::vector<TargetSlot> slots;
  int fake_depth = 2;
  const ProtocolSpec* spec = nullptr;
};

struct AttackAction {
  Tag tag = Tag::A1_3;
  Term payload;
  int target_process = -1;
  Atom target_agent;
  int target_session = 0;
  int target_step = 0;
  int source_step = 0;     // coordinate of the intercepted message used
  int source_session = 0;

  friend bool operator==(const AttackAction&, const AttackAction&) = default;
};

/// Every concrete attack-action instance enabled in the given context, in
/// deterministic order (tag, payload, target).
std::vector<AttackAction> enumerate_actions(const Knowledge& kb, const TagSet& active,
                                            const ActionContext& ctx);

/// Keys `agent` can open that the intruder can encrypt with.
std::vector<Key> keys_towards(const Knowledge& kb, const ProtocolSpec& spec,
                              const Atom& agent);

/// Size of the message a receive pattern accepts when every variable takes
/// a value of its declared kind.
std::uint64_t pattern_size(const ProtocolSpec& spec, const Pattern& p);

}  // namespace mimc

#endif  // MIMC_INTRUDER_HPP_
