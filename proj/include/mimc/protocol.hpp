#ifndef MIMC_PROTOCOL_HPP_
#define MIMC_PROTOCOL_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mimc/terms.hpp"

namespace mimc {

/// Parse or validation failure in a protocol description. `line` and
/// `column` are 1-based; 0 means the error is not tied to a position.
class ParseError : public std::runtime_error {
 public:
  enum class Code { Syntax, UnboundVariable, KeyWithoutOwner, Duplicate, Semantic };

  ParseError(Code code, int line, int column, const std::string& message);

  Code code() const { return code_; }
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  Code code_;
  int line_;
  int column_;
};

/// Raised by instantiate() for session configurations that do not fit the
/// protocol.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Variable {
  std::string name;
  AtomKind kind = AtomKind::Nonce;
  bool typed = false;       // receive-side kind check
  bool is_role = false;     // stands for the agent playing a role
  int fresh_role = -1;      // role generating this nonce, or -1
  std::uint32_t size = 0;   // size-class of fresh values (0 = kind default)

  friend bool operator==(const Variable&, const Variable&) = default;
};

/// Reference to an encryption key inside a pattern: either `fn(X)` for a
/// declared key-pair function applied to a role or agent, or a named
/// symmetric key.
struct KeyRef {
  std::string function;  // empty for a named symmetric key
  std::string argument;  // role variable name, agent name, or symkey name
  bool argument_is_role = false;

  friend bool operator==(const KeyRef&, const KeyRef&) = default;
};

struct Pattern {
  enum class Kind { Literal, Var, Concat, Enc };

  Kind kind = Kind::Literal;
  Atom literal;
  int var = -1;
  std::vector<Pattern> parts;  // Concat parts or the single Enc body
  KeyRef key;

  friend bool operator==(const Pattern&, const Pattern&) = default;
};

struct Step {
  int index = 0;  // 1-based position in the narration
  int sender = -1;
  int receiver = -1;
  Pattern pattern;

  friend bool operator==(const Step&, const Step&) = default;
};

struct RoleAction {
  enum class Kind { Fresh, Send, Receive };
  Kind kind = Kind::Send;
  int step = 0;  // 1-based step, 0 for Fresh
  int var = -1;  // fresh variable

  friend bool operator==(const RoleAction&, const RoleAction&) = default;
};

struct RoleScript {
  std::string name;
  int var = -1;  // the role's own variable
  std::vector<RoleAction> actions;
  /// Role variables this role must know before its first receive; they are
  /// bound from the session configuration.
  std::vector<int> known_peers;

  friend bool operator==(const RoleScript&, const RoleScript&) = default;
};

struct KeyPairFunction {
  std::string public_name;
  std::string private_name;

  friend bool operator==(const KeyPairFunction&, const KeyPairFunction&) = default;
};

struct SymmetricKeyDecl {
  Atom atom;
  std::vector<std::string> owners;

  friend bool operator==(const SymmetricKeyDecl&, const SymmetricKeyDecl&) = default;
};

struct Goal {
  enum class Kind { Secret, Agree };
  Kind kind = Kind::Secret;
  int role = -1;        // Agree: the role whose completion is checked
  int peer_role = -1;   // Agree: the role it must agree with
  std::vector<int> vars;

  friend bool operator==(const Goal&, const Goal&) = default;
};

/// One configured session: for every role, the agents that may play it. The
/// first entry is the configured agent; further entries are alternative peers
/// an initiating role may pick (typically the intruder's own identity).
struct SessionAssignment {
  std::vector<std::vector<std::string>> agents;  // indexed by role
  /// Passive-simulation only: the message of this step is intercepted but
  /// never delivered, interrupting the session. 0 means no cutoff.
  int cutoff = 0;

  friend bool operator==(const SessionAssignment&, const SessionAssignment&) = default;
};

struct ProtocolSpec {
  std::string name;
  std::vector<Atom> agents;  // honest agents, declaration order
  Atom intruder;
  std::vector<KeyPairFunction> keypairs;
  std::vector<SymmetricKeyDecl> symkeys;
  std::vector<Atom> data;          // declared constants
  std::vector<Atom> public_data;   // constants known to the intruder
  std::map<AtomKind, std::uint32_t> kind_sizes;
  std::vector<Variable> variables;
  std::vector<RoleScript> roles;
  std::vector<Step> steps;
  std::vector<Goal> goals;
  std::vector<SessionAssignment> sessions;

  int z() const { return static_cast<int>(steps.size()); }
  int role_index(std::string_view name) const;
  int variable_index(std::string_view name) const;
  const Atom* find_agent(std::string_view name) const;  // includes the intruder
  bool is_honest(const Atom& agent) const { return !(agent == intruder); }

  std::uint32_t size_for(AtomKind kind) const;
  /// The key a KeyRef denotes once its argument resolves to `agent_name`.
  std::optional<Key> resolve_key(const KeyRef& ref, std::string_view agent_name) const;
  std::vector<Atom> public_keys() const;

  friend bool operator==(const ProtocolSpec&, const ProtocolSpec&) = default;
};

ProtocolSpec parse_spec(std::string_view text);
ProtocolSpec load_spec_file(const std::string& path);

/// Pretty-prints a spec in the DSL; parse_spec(to_text(s)) == s.
std::string to_text(const ProtocolSpec& spec);
std::string to_text(const Pattern& pattern, const ProtocolSpec& spec);

struct SessionConfig {
  std::vector<SessionAssignment> sessions;
  int fake_depth = 2;

  int n() const { return static_cast<int>(sessions.size()); }

  /// First `n` sessions declared in the spec.
  static SessionConfig from_spec(const ProtocolSpec& spec, int n, int fake_depth = 2);
};

/// Variable store of one agent process; the null term marks unbound.
using Bindings = std::vector<Term>;

/// Atoms an honest agent can use to open ciphertexts.
struct KeyRing {
  std::set<Atom> atoms;
  bool holds(const Atom& a) const { return atoms.count(a) > 0; }
};

KeyRing keys_of(const ProtocolSpec& spec, const Atom& agent);

/// Instantiates a send pattern. Every variable must be bound.
Term build_message(const ProtocolSpec& spec, const Pattern& pattern, const Bindings& b);

/// Matches an incoming message against a receive pattern. On success returns
/// the extended bindings; std::nullopt means the receiver fail-stops.
std::optional<Bindings> match_receive(const ProtocolSpec& spec, const Pattern& pattern,
                                      const Term& incoming, const Bindings& bindings,
                                      const KeyRing& keys);

/// Static description of one honest agent process (a role in a session).
struct ProcessInfo {
  int session = 0;  // 1-based
  int role = -1;
  Atom agent;
  /// Initial bindings: own role, fresh nonces, single-choice peers.
  Bindings initial;
  /// Peer roles with several candidate agents, resolved by the first send.
  std::vector<std::pair<int, std::vector<Atom>>> peer_choices;
  KeyRing keys;
};

struct Instance {
  const ProtocolSpec* spec = nullptr;
  SessionConfig config;
  std::vector<ProcessInfo> processes;
  std::vector<Atom> fresh_nonces;
  /// Every atom the model can mention, sorted.
  std::vector<Atom> atoms;

  const RoleScript& role_of(int process) const {
    return spec->roles[processes[process].role];
  }
  std::optional<Atom> find_atom(std::string_view name) const;
};

/// Builds the agent processes of every configured session. The spec must
/// outlive the instance.
Instance instantiate(const ProtocolSpec& spec, const SessionConfig& config);

/// Step of the message an action sends or receives.
int action_step(const RoleAction& a);

enum class ProcessStatus : std::uint8_t { Running, Done, Stopped };

/// Run-time state of one honest agent process.
struct LocalState {
  int pc = 0;
  ProcessStatus status = ProcessStatus::Running;
  Bindings bindings;

  friend bool operator==(const LocalState&, const LocalState&) = default;
};

LocalState initial_local_state(const ProcessInfo& info);

struct Emission {
  int step = 0;
  Term message;
  Atom recipient;
};

/// True if the process has not acted yet and starts by sending.
bool can_start(const Instance& inst, int process, const LocalState& ls);

/// Step of the receive the process is blocked on, or 0.
int pending_receive(const Instance& inst, int process, const LocalState& ls);

/// Executes fresh and send actions from the current position up to the next
/// receive (or the end of the role). Peer choices must already be bound.
std::vector<Emission> run_until_receive(const Instance& inst, int process, LocalState& ls);

/// Offers `msg` to the pending receive. On a pattern mismatch the process
/// fail-stops permanently and false is returned.
bool deliver(const Instance& inst, int process, LocalState& ls, const Term& msg);

}  // namespace mimc

#endif  // MIMC_PROTOCOL_HPP_
