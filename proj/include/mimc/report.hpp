#ifndef MIMC_REPORT_HPP_
#define MIMC_REPORT_HPP_

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mimc/checker.hpp"
#include "mimc/mi.hpp"

namespace mimc {

using json = nlohmann::ordered_json;

/// Malformed report or trace document.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json to_json(const Atom& a);
Atom atom_from_json(const json& j);
json to_json(const Term& t);
Term term_from_json(const json& j);
json to_json(const Transition& t);
Transition transition_from_json(const json& j);
json to_json(const Fingerprint& f);
Fingerprint fingerprint_from_json(const json& j);
json to_json(const RuleLogEntry& e);
RuleLogEntry rule_log_entry_from_json(const json& j);
json to_json(const TagSet& s);
TagSet tagset_from_json(const json& j);

/// Transitions compared including their recorded outcome.
bool same_transition(const Transition& a, const Transition& b);

/// Result of a `check` run in the documented report schema.
struct CheckReport {
  Verdict verdict = Verdict::NoViolation;
  std::uint64_t states_stored = 0;
  std::uint64_t states_matched = 0;
  std::uint64_t transitions = 0;
  std::uint32_t max_depth = 0;
  std::optional<std::uint32_t> error_depth;
  TagSet pruned_actions;
  std::vector<RuleLogEntry> rule_log;
  Counterexample counterexample;
  std::optional<Fingerprint> violation;
  std::vector<Fingerprint> fingerprints;
  std::string cap_reason;

  static CheckReport from(const SearchResult& r, const TagSet& pruned,
                          std::vector<RuleLogEntry> log);
  bool operator==(const CheckReport& o) const;
};

json to_json(const CheckReport& r);
CheckReport check_report_from_json(const json& j);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

/// Self-contained counterexample file.
struct TraceFile {
  std::string spec_path;
  std::string spec_hash;  // hex FNV-1a of the spec file contents
  int sessions = 1;
  int fake_depth = 2;
  std::string intruder;  // dy, mi or mi-report-only
  TagSet active;
  Counterexample transitions;
};

json to_json(const TraceFile& t);
TraceFile trace_from_json(const json& j);

}  // namespace mimc

#endif  // MIMC_REPORT_HPP_
