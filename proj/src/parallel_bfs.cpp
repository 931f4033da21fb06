#include <chrono>

#include "explorer.hpp"
#include "mimc/checker.hpp"

namespace mimc {

// Each BFS level is expanded in parallel; the results are then merged in
// frontier order, so the visited set, statistics and counterexample come out
// exactly as in the serial BFS.
SearchResult search_parallel_bfs(const Instance& inst, const SearchOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  detail::Explorer ex(opts);
  GlobalState init = GlobalState::initial(inst);
  const std::int64_t root = ex.admit(serialize(inst, init), -1, {}, 0);
  bool state_cap = false, depth_cap = false;

  struct Item {
    std::int64_t id;
    GlobalState state;
  };
  struct Expanded {
    std::vector<Successor> succ;
    std::vector<std::string> keys;
    std::vector<std::vector<Fingerprint>> bad;
  };

  std::vector<Item> frontier;
  const auto v0 = violations(inst, init);
  bool stop = ex.note_violations(root, v0);
  if (v0.empty()) frontier.push_back({root, std::move(init)});

  for (std::uint32_t depth = 0; !frontier.empty() && !stop && !state_cap; ++depth) {
    if (depth >= opts.max_depth) {
      depth_cap = true;
      break;
    }
    for (const auto& it : frontier) ex.expanding(it.id);
    std::vector<Expanded> level(frontier.size());
    const long n = static_cast<long>(frontier.size());
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 4)
    for (long i = 0; i < n; ++i) {
      try {
        Expanded& e = level[i];
        e.succ = successors(inst, frontier[i].state, opts.active);
        for (const auto& sc : e.succ) {
          e.keys.push_back(serialize(inst, sc.state));
          e.bad.push_back(violations(inst, sc.state));
        }
      } catch (...) {
#pragma omp critical
        error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);

    std::vector<Item> next;
    for (std::size_t i = 0; i < level.size() && !stop && !state_cap; ++i) {
      Expanded& e = level[i];
      for (std::size_t j = 0; j < e.succ.size(); ++j) {
        const std::int64_t id =
            ex.admit(std::move(e.keys[j]), frontier[i].id, e.succ[j].transition, depth + 1);
        if (id < 0) continue;
        if (!e.bad[j].empty()) {
          if ((stop = ex.note_violations(id, e.bad[j]))) break;
          continue;
        }
        if (ex.at_state_cap()) {
          state_cap = true;
          break;
        }
        next.push_back({id, std::move(e.succ[j].state)});
      }
    }
    frontier = std::move(next);
  }
  ex.finish(state_cap, depth_cap);
  ex.res.stats.wall_seconds = detail::seconds_since(t0);
  return ex.res;
}

}  // namespace mimc
