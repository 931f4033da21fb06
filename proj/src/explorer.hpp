#ifndef MIMC_SRC_EXPLORER_HPP_
#define MIMC_SRC_EXPLORER_HPP_

#include <algorithm>
#include <chrono>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "mimc/checker.hpp"

namespace mimc::detail {

/// Bookkeeping shared by the search variants: visited set, parent links,
/// statistics and violation collection.
class Explorer {
 public:
  explicit Explorer(const SearchOptions& opts) : opts_(opts) {}

  struct Node {
    std::int64_t parent;
    Transition via;
    std::uint32_t depth;
  };

  /// Registers a state reached at `depth`. Returns its id, or -1 if it was
  /// already visited.
  std::int64_t admit(std::string key, std::int64_t parent, Transition via, std::uint32_t depth) {
    auto [it, inserted] = visited_.emplace(std::move(key), static_cast<std::int64_t>(nodes_.size()));
    if (!inserted) {
      ++res.stats.states_matched;
      return -1;
    }
    nodes_.push_back({parent, std::move(via), depth});
    ++res.stats.states_stored;
    res.stats.max_depth = std::max(res.stats.max_depth, depth);
    return it->second;
  }

  /// Records the violations of a newly stored state. True if the search
  /// must stop.
  bool note_violations(std::int64_t id, const std::vector<Fingerprint>& v) {
    if (v.empty()) return false;
    for (const auto& f : v) fingerprints_.insert(f);
    if (!res.violation) {
      res.violation = v.front();
      res.stats.error_depth = nodes_[id].depth;
      res.counterexample = path_to(id);
    }
    return opts_.stop == StopMode::FirstError;
  }

  /// Called once per state whose successors are generated.
  void expanding(std::int64_t id) {
    if (!opts_.audit) return;
    if (expanded_.size() <= static_cast<std::size_t>(id)) expanded_.resize(id + 1, 0);
    if (expanded_[id]++) ++res.repeated_expansions;
  }

  bool at_state_cap() const { return res.stats.states_stored >= opts_.max_states; }

  void finish(bool state_cap, bool depth_cap) {
    res.stats.transitions = res.stats.states_stored + res.stats.states_matched;
    res.fingerprints.assign(fingerprints_.begin(), fingerprints_.end());
    if (opts_.record_visited) {
      res.visited.reserve(visited_.size());
      for (const auto& kv : visited_) res.visited.push_back(kv.first);
      std::sort(res.visited.begin(), res.visited.end());
    }
    const bool stopped_early = res.violation && opts_.stop == StopMode::FirstError;
    if (!stopped_early && (state_cap || depth_cap)) {
      res.verdict = Verdict::Inconclusive;
      res.cap_reason = state_cap ? "state limit of " + std::to_string(opts_.max_states) +
                                       " stored states reached"
                                 : "depth limit of " + std::to_string(opts_.max_depth) +
                                       " reached";
    } else {
      res.verdict = res.violation ? Verdict::Violation : Verdict::NoViolation;
    }
  }

  Counterexample path_to(std::int64_t id) const {
    Counterexample out;
    while (id > 0) {
      out.push_back(nodes_[id].via);
      id = nodes_[id].parent;
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

  SearchResult res;

 private:
  const SearchOptions& opts_;
  std::unordered_map<std::string, std::int64_t> visited_;
  std::vector<Node> nodes_;
  std::set<Fingerprint> fingerprints_;
  std::vector<std::uint8_t> expanded_;
};

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace mimc::detail

#endif  // MIMC_SRC_EXPLORER_HPP_
