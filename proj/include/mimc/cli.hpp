#ifndef MIMC_CLI_HPP_
#define MIMC_CLI_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mimc/checker.hpp"
#include "mimc/mi.hpp"
#include "mimc/report.hpp"

namespace mimc {

enum class IntruderMode : std::uint8_t { Dy, Mi, MiReportOnly };

std::string_view to_string(IntruderMode m);

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitClean = 0, kExitViolation = 1, kExitUsage = 2, kExitInconclusive = 3 };

struct RunConfig {
  std::string spec_path;
  int sessions = 2;
  IntruderMode intruder = IntruderMode::Mi;
  Strategy strategy = Strategy::Dfs;
  StopMode stop = StopMode::FirstError;
  int fake_depth = 2;
  std::uint64_t max_states = 1'000'000;
  std::uint32_t max_depth = 10'000;
  bool json = false;
  std::string out;  // empty: standard output
};

/// [Ikt] dump and pruning decision of the passive phase.
json simulation_to_json(const ProtocolSpec& spec, const SimulationResult& sim);

struct CheckOutcome {
  CheckReport report;
  TagSet active;
  std::uint64_t spec_hash = 0;
};

/// Runs the MI phase when the mode asks for it, then the search.
CheckOutcome run_check(const ProtocolSpec& spec, std::uint64_t spec_hash, const RunConfig& cfg);

/// Entry point of the `mimc` tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mimc

#endif  // MIMC_CLI_HPP_
