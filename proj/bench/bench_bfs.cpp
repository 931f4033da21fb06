// Serial vs. parallel breadth-first search on the bundled protocols.
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "mimc/checker.hpp"
#include "mimc/mi.hpp"

using namespace mimc;

namespace {

template <class F>
double best_of(int reps, F&& f) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                              .count());
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs parallel BFS"};
  std::string spec_path = std::string(MIMC_PROTOCOL_DIR) + "/nspk.proto";
  int sessions = 2, reps = 3;
  bool dy = false, exhaustive = true;
  app.add_option("--spec", spec_path);
  app.add_option("--sessions", sessions)->check(CLI::PositiveNumber);
  app.add_option("--reps", reps)->check(CLI::PositiveNumber);
  app.add_flag("--dy", dy, "full action set instead of the pruned one");
  app.add_flag("!--first-error", exhaustive, "stop at the first violation");
  CLI11_PARSE(app, argc, argv);

  const ProtocolSpec spec = load_spec_file(spec_path);
  const SessionConfig cfg = SessionConfig::from_spec(spec, sessions);
  const Instance inst = instantiate(spec, cfg);
  SearchOptions o;
  o.strategy = Strategy::Bfs;
  o.stop = exhaustive ? StopMode::Exhaustive : StopMode::FirstError;
  o.active = dy ? TagSet::all() : mi_simulate(spec, cfg).report.retained;

  SearchResult a, b;
  const double ts = best_of(reps, [&] { a = search(inst, o); });
  const double tp = best_of(reps, [&] { b = search_parallel_bfs(inst, o); });
  const bool same = a.stats.states_stored == b.stats.states_stored &&
                    a.stats.states_matched == b.stats.states_matched &&
                    a.fingerprints == b.fingerprints;
  std::printf("%s n=%d %s %s, %d threads\n", spec.name.c_str(), sessions, dy ? "dy" : "mi",
              std::string(to_string(o.stop)).c_str(), omp_get_max_threads());
  std::printf("serial    %9.4f s  stored %llu\n", ts,
              static_cast<unsigned long long>(a.stats.states_stored));
  std::printf("parallel  %9.4f s  stored %llu\n", tp,
              static_cast<unsigned long long>(b.stats.states_stored));
  std::printf("speedup   %9.2fx  results %s\n", ts / tp, same ? "identical" : "DIFFER");
  return same ? 0 : 1;
}
