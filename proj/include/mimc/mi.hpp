#ifndef MIMC_MI_HPP_
#define MIMC_MI_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "mimc/intruder.hpp"
#include "mimc/protocol.hpp"
#include "mimc/terms.hpp"

namespace mimc {

/// Metadata recorded for one intercepted message. The all-zero, unrecorded
/// entry stands for a message that was never sent.
struct MetadataEntry {
  int encryption = 0;           // readability class 0/1/2
  std::uint64_t size = 0;
  std::uint32_t timestamp = 0;  // interception counter, 0 if never sent
  bool recorded = false;
  /// Values of additionally registered sub-functions, in registration order.
  std::vector<std::int64_t> extra;

  friend bool operator==(const MetadataEntry&, const MetadataEntry&) = default;
};

/// Extension point for further metadata sub-functions. Each registered
/// function contributes one more component to every entry and to the
/// comparison disjunction.
class MetadataRegistry {
 public:
  using Function = std::function<std::int64_t(const Term& msg, const Knowledge& kb)>;

  void add(std::string name, Function fn) { fns_.push_back({std::move(name), std::move(fn)}); }
  std::size_t size() const { return fns_.size(); }
  const std::string& name(std::size_t i) const { return fns_[i].name; }
  std::int64_t evaluate(std::size_t i, const Term& msg, const Knowledge& kb) const {
    return fns_[i].fn(msg, kb);
  }

 private:
  struct Entry {
    std::string name;
    Function fn;
  };
  std::vector<Entry> fns_;
};

class IktError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The z x n intruder knowledge table, indexed by 1-based (step, session).
class IktTable {
 public:
  IktTable(int steps, int sessions, std::shared_ptr<const MetadataRegistry> registry = {});

  int steps() const { return steps_; }
  int sessions() const { return sessions_; }
  const MetadataEntry& at(int step, int session) const;

  /// Writes entry (step, session) once. Requires (step-1, session) to be
  /// recorded already, which keeps every column zero-suffixed.
  void record(int step, int session, const Term& msg, const Knowledge& kb,
              std::uint32_t enc_overhead = 0);

  /// Every column is a recorded prefix followed by all-zero entries.
  bool zero_suffix_holds() const;
  std::uint32_t clock() const { return clock_; }
  const MetadataRegistry* registry() const { return registry_.get(); }

  friend bool operator==(const IktTable& a, const IktTable& b) {
    return a.steps_ == b.steps_ && a.sessions_ == b.sessions_ && a.entries_ == b.entries_;
  }

 private:
  MetadataEntry& slot(int step, int session);

  int steps_;
  int sessions_;
  std::vector<MetadataEntry> entries_;
  std::uint32_t clock_ = 0;
  std::shared_ptr<const MetadataRegistry> registry_;
};

/// The comparison operator: true iff some metadata component (encryption,
/// size, or a registered extra) is equal. Timestamps do not take part.
bool compare(const MetadataEntry& p1, const MetadataEntry& p2);

struct RuleLogEntry {
  std::string rule;
  int a = 0, b = 0;  // first coordinate
  int c = 0, d = 0;  // second coordinate, 0 for single-entry rules
  bool fired = false;
  TagSet enables;
  std::string detail;

  friend bool operator==(const RuleLogEntry&, const RuleLogEntry&) = default;
};

struct PruneReport {
  TagSet removable;
  TagSet retained;
  std::vector<RuleLogEntry> log;

  friend bool operator==(const PruneReport&, const PruneReport&) = default;
};

/// Applies the feasibility rules to a populated table. `kb` must hold the
/// intercepted messages behind every recorded entry.
PruneReport evaluate_rules(const IktTable& ikt, const Knowledge& kb);

struct SimulationResult {
  IktTable ikt;
  PruneReport report;
  Knowledge knowledge;
};

/// Passive preliminary run: every session is executed in order (all of
/// session 1, then session 2, ...) with the intruder intercepting, recording
/// and forwarding each message unchanged. Initiators talk to their first
/// configured peer.
SimulationResult mi_simulate(const ProtocolSpec& spec, const SessionConfig& config,
                             std::shared_ptr<const MetadataRegistry> registry = {});

}  // namespace mimc

#endif  // MIMC_MI_HPP_
