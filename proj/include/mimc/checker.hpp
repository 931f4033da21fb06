#ifndef MIMC_CHECKER_HPP_
#define MIMC_CHECKER_HPP_

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mimc/intruder.hpp"
#include "mimc/protocol.hpp"

namespace mimc {

/// Composition of the honest agent processes and the intruder's knowledge.
/// Every send is intercepted synchronously, so no message is ever in flight
/// between transitions.
struct GlobalState {
  std::vector<LocalState> locals;  // indexed like Instance::processes
  Knowledge kb;

  static GlobalState initial(const Instance& inst);
};

/// Canonical byte encoding; equal states encode equally.
std::string serialize(const Instance& inst, const GlobalState& s);

struct Transition {
  enum class Kind : std::uint8_t { Start, Deliver };

  Kind kind = Kind::Start;
  int process = -1;
  std::vector<Atom> peers;  // Start: chosen peer agents, in peer-choice order
  Tag tag = Tag::A1_3;      // Deliver only
  Term payload;             // Deliver only
  int source_step = 0;
  int source_session = 0;

  // Outcome, filled by apply(); not part of the transition's identity.
  bool accepted = true;
  std::vector<Emission> emitted;

  bool same_action(const Transition& other) const;
};

struct Successor {
  Transition transition;
  GlobalState state;
};

/// Every enabled transition, honest starts first (by process order, i.e.
/// session then role) and then attack actions by tag and payload.
std::vector<Successor> successors(const Instance& inst, const GlobalState& s,
                                  const TagSet& active);

/// Receive slots of `s` that attack actions can target.
ActionContext action_context(const Instance& inst, const GlobalState& s);

/// Applies one transition. Throws std::logic_error if it is not enabled.
GlobalState apply(const Instance& inst, const GlobalState& s, Transition& t);

struct Fingerprint {
  enum class Kind : std::uint8_t { Authentication, Secrecy };

  Kind kind = Kind::Authentication;
  std::string victim;
  std::string peer;
  std::vector<std::string> nonces;  // variable names, sorted

  std::string to_string() const;
  friend auto operator<=>(const Fingerprint&, const Fingerprint&) = default;
};

/// Secrecy and agreement goals violated in `s`, sorted.
std::vector<Fingerprint> violations(const Instance& inst, const GlobalState& s);

inline std::optional<Fingerprint> is_violation(const Instance& inst, const GlobalState& s) {
  auto v = violations(inst, s);
  if (v.empty()) return std::nullopt;
  return v.front();
}

enum class Strategy : std::uint8_t { Dfs, Bfs };
enum class StopMode : std::uint8_t { FirstError, Exhaustive };
enum class Verdict : std::uint8_t { NoViolation, Violation, Inconclusive };

std::string_view to_string(Strategy s);
std::string_view to_string(StopMode s);
std::string_view to_string(Verdict v);

struct SearchOptions {
  Strategy strategy = Strategy::Dfs;
  StopMode stop = StopMode::FirstError;
  TagSet active = TagSet::all();
  std::uint64_t max_states = 1'000'000;
  std::uint32_t max_depth = 10'000;
  bool record_visited = false;  // fill SearchResult::visited
  bool audit = false;           // count states expanded more than once
};

struct SearchStats {
  std::uint64_t states_stored = 0;
  std::uint64_t states_matched = 0;
  std::uint64_t transitions = 0;  // stored + matched; the initial state counts once
  std::uint32_t max_depth = 0;
  std::optional<std::uint32_t> error_depth;
  double wall_seconds = 0.0;
};

using Counterexample = std::vector<Transition>;

struct SearchResult {
  Verdict verdict = Verdict::NoViolation;
  SearchStats stats;
  std::optional<Fingerprint> violation;  // the one the counterexample reaches
  Counterexample counterexample;
  std::vector<Fingerprint> fingerprints;  // every distinct violation seen
  std::string cap_reason;
  std::vector<std::string> visited;  // sorted canonical encodings, on request
  std::uint64_t repeated_expansions = 0;  // audit only; 0 for a sound visited set
};

/// Warning for action sets without plain forwarding.
std::optional<std::string> deadlock_warning(const TagSet& active);

/// Serial reference search over unique canonical states.
SearchResult search(const Instance& inst, const SearchOptions& opts);

/// Level-synchronized BFS whose successor generation runs in parallel.
/// Produces exactly the statistics and counterexample of the serial BFS.
SearchResult search_parallel_bfs(const Instance& inst, const SearchOptions& opts);

class ReplayError : public std::runtime_error {
 public:
  ReplayError(std::size_t index, const std::string& msg)
      : std::runtime_error("trace diverges at step " + std::to_string(index) + ": " + msg),
        index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

struct ReplayResult {
  GlobalState final_state;
  Counterexample executed;  // with outcomes filled in
  std::vector<std::string> narration;
  std::optional<Fingerprint> violation;
};

/// Re-executes a trace from the initial state. Each step must be one of the
/// enabled transitions of the state it is applied to.
ReplayResult replay(const Instance& inst, const Counterexample& trace, const TagSet& active);

/// Human-readable description of a transition.
std::string describe(const Instance& inst, const Transition& t);

/// Message-sequence diagram of an executed trace in Graphviz DOT.
std::string to_dot(const Instance& inst, const Counterexample& executed);

}  // namespace mimc

#endif  // MIMC_CHECKER_HPP_
