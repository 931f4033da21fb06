#include "mimc/cli.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

namespace mimc {

std::string_view to_string(IntruderMode m) {
  switch (m) {
    case IntruderMode::Dy: return "dy";
    case IntruderMode::Mi: return "mi";
    case IntruderMode::MiReportOnly: return "mi-report-only";
  }
  return "?";
}

json simulation_to_json(const ProtocolSpec& spec, const SimulationResult& sim) {
  json ikt = json::array();
  for (int b = 1; b <= sim.ikt.sessions(); ++b) {
    for (int a = 1; a <= sim.ikt.steps(); ++a) {
      const MetadataEntry& e = sim.ikt.at(a, b);
      ikt.push_back({{"step", a},
                     {"session", b},
                     {"recorded", e.recorded},
                     {"encryption", e.encryption},
                     {"size", e.size},
                     {"timestamp", e.timestamp}});
    }
  }
  json log = json::array();
  for (const auto& e : sim.report.log) log.push_back(to_json(e));
  return json{{"protocol", spec.name},
              {"steps", sim.ikt.steps()},
              {"sessions", sim.ikt.sessions()},
              {"ikt", ikt},
              {"removable", to_json(sim.report.removable)},
              {"retained", to_json(sim.report.retained)},
              {"rule_log", log}};
}

CheckOutcome run_check(const ProtocolSpec& spec, std::uint64_t spec_hash, const RunConfig& cfg) {
  SessionConfig sc = SessionConfig::from_spec(spec, cfg.sessions, cfg.fake_depth);
  Instance inst = instantiate(spec, sc);
  SearchOptions opts;
  opts.strategy = cfg.strategy;
  opts.stop = cfg.stop;
  opts.max_states = cfg.max_states;
  opts.max_depth = cfg.max_depth;

  TagSet pruned;
  std::vector<RuleLogEntry> log;
  if (cfg.intruder != IntruderMode::Dy) {
    SimulationResult sim = mi_simulate(spec, sc);
    pruned = sim.report.removable;
    log = std::move(sim.report.log);
    if (cfg.intruder == IntruderMode::Mi) opts.active = sim.report.retained;
  }
  SearchResult res = search(inst, opts);
  return {CheckReport::from(res, pruned, std::move(log)), opts.active, spec_hash};
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const RunConfig& cfg, std::ostream& out, const std::string& text) {
  if (cfg.out.empty()) {
    out << text;
    return;
  }
  std::ofstream f(cfg.out, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + cfg.out + "'");
  f << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

int exit_for(Verdict v) {
  switch (v) {
    case Verdict::NoViolation: return kExitClean;
    case Verdict::Violation: return kExitViolation;
    case Verdict::Inconclusive: return kExitInconclusive;
  }
  return kExitUsage;
}

std::string simulation_text(const ProtocolSpec& spec, const SimulationResult& sim) {
  std::ostringstream os;
  os << "protocol " << spec.name << ": " << sim.ikt.steps() << " steps, " << sim.ikt.sessions()
     << " sessions\n\n";
  os << "step session  enc  size  time\n";
  for (int b = 1; b <= sim.ikt.sessions(); ++b) {
    for (int a = 1; a <= sim.ikt.steps(); ++a) {
      const MetadataEntry& e = sim.ikt.at(a, b);
      os << std::setw(4) << a << std::setw(8) << b;
      if (e.recorded) {
        os << std::setw(5) << e.encryption << std::setw(6) << e.size << std::setw(6)
           << e.timestamp << "\n";
      } else {
        os << "      (never sent)\n";
      }
    }
  }
  os << "\nrules:\n";
  for (const auto& e : sim.report.log) {
    os << "  " << (e.fired ? "+ " : "- ") << e.rule << " (" << e.a << "," << e.b << ")";
    if (e.c) os << " (" << e.c << "," << e.d << ")";
    os << " " << e.enables.to_string() << ": " << e.detail << "\n";
  }
  os << "\nretained: " << sim.report.retained.to_string() << "\n";
  os << "removable: " << sim.report.removable.to_string() << "\n";
  return os.str();
}

std::string check_text(const Instance& inst, const RunConfig& cfg, const CheckReport& r,
                       double seconds) {
  std::ostringstream os;
  os << "protocol " << inst.spec->name << ", " << cfg.sessions << " sessions, intruder "
     << to_string(cfg.intruder) << ", " << to_string(cfg.strategy) << ", "
     << to_string(cfg.stop) << ", fake depth " << cfg.fake_depth << "\n";
  if (cfg.intruder != IntruderMode::Dy) {
    os << "pruned actions: " << r.pruned_actions.to_string()
       << (cfg.intruder == IntruderMode::MiReportOnly ? " (report only)" : "") << "\n";
  }
  os << "verdict: " << to_string(r.verdict) << "\n";
  if (!r.cap_reason.empty()) os << "cap: " << r.cap_reason << "\n";
  os << "states stored: " << r.states_stored << "\n"
     << "states matched: " << r.states_matched << "\n"
     << "transitions: " << r.transitions << "\n"
     << "max depth: " << r.max_depth << "\n";
  if (r.error_depth) os << "error depth: " << *r.error_depth << "\n";
  if (seconds >= 0) os << "time: " << std::fixed << std::setprecision(3) << seconds << " s\n";
  for (const auto& f : r.fingerprints) os << "found: " << f.to_string() << "\n";
  if (r.violation) {
    os << "counterexample to " << r.violation->to_string() << ":\n";
    for (std::size_t i = 0; i < r.counterexample.size(); ++i) {
      os << "  " << i + 1 << ". " << describe(inst, r.counterexample[i]) << "\n";
    }
  }
  return os.str();
}

template <typename E>
std::vector<std::string> keys(const std::map<std::string, E>& m) {
  std::vector<std::string> out;
  for (const auto& kv : m) out.push_back(kv.first);
  return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Explicit-state security protocol checker with message-inspection pruning",
               "mimc"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string trace_out, dot_out, spec_override;
  std::string trace_in;

  const std::map<std::string, IntruderMode> modes{{"dy", IntruderMode::Dy},
                                                  {"mi", IntruderMode::Mi},
                                                  {"mi-report-only", IntruderMode::MiReportOnly}};
  const std::map<std::string, Strategy> strategies{{"dfs", Strategy::Dfs},
                                                   {"bfs", Strategy::Bfs}};
  const std::map<std::string, StopMode> stops{{"first-error", StopMode::FirstError},
                                              {"exhaustive", StopMode::Exhaustive}};
  std::string format = "text";
  std::string mode_s = "mi", strategy_s = "dfs", stop_s = "first-error";

  auto common = [&](CLI::App* c, bool search_flags) {
    c->add_option("spec", cfg.spec_path, "protocol description")->required();
    c->add_option("--sessions", cfg.sessions, "number of sessions")->check(CLI::PositiveNumber);
    c->add_option("--fake-depth", cfg.fake_depth, "nesting bound for fabricated messages")
        ->check(CLI::NonNegativeNumber);
    c->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}));
    c->add_option("--out", cfg.out, "write the report here");
    if (!search_flags) return;
    c->add_option("--search", strategy_s, "dfs or bfs")->check(CLI::IsMember(keys(strategies)));
    c->add_option("--stop", stop_s, "first-error or exhaustive")->check(CLI::IsMember(keys(stops)));
    c->add_option("--max-states", cfg.max_states, "stored-state cap")
        ->check(CLI::PositiveNumber);
    c->add_option("--max-depth", cfg.max_depth, "depth cap")->check(CLI::PositiveNumber);
  };

  CLI::App* sim = app.add_subcommand("simulate", "passive run and pruning report");
  common(sim, false);
  CLI::App* chk = app.add_subcommand("check", "model check the protocol");
  common(chk, true);
  chk->add_option("--intruder", mode_s, "dy, mi or mi-report-only")
      ->check(CLI::IsMember(keys(modes)));
  chk->add_option("--trace", trace_out, "write the counterexample as a trace file");
  CLI::App* rep = app.add_subcommand("replay", "re-execute a trace file");
  rep->add_option("trace", trace_in, "trace file")->required();
  rep->add_option("--spec", spec_override, "protocol file to use instead of the recorded path");
  rep->add_option("--dot", dot_out, "write a message sequence diagram in DOT");
  rep->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}));
  rep->add_option("--out", cfg.out, "write the narration here");
  CLI::App* cmp = app.add_subcommand("compare", "dy and mi back to back");
  common(cmp, true);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitClean : kExitUsage;
  }
  cfg.json = format == "json";
  cfg.intruder = modes.at(mode_s);
  cfg.strategy = strategies.at(strategy_s);
  cfg.stop = stops.at(stop_s);

  try {
    if (sim->parsed()) {
      const ProtocolSpec spec = load_spec_file(cfg.spec_path);
      SimulationResult res = mi_simulate(spec, SessionConfig::from_spec(spec, cfg.sessions,
                                                                        cfg.fake_depth));
      emit(cfg, out, cfg.json ? dump(simulation_to_json(spec, res)) : simulation_text(spec, res));
      return kExitClean;
    }

    if (chk->parsed()) {
      const std::string text = read_file(cfg.spec_path);
      const ProtocolSpec spec = parse_spec(text);
      const std::uint64_t hash = fnv1a64(text);
      const auto t0 = std::chrono::steady_clock::now();
      CheckOutcome res = run_check(spec, hash, cfg);
      if (auto w = deadlock_warning(res.active)) err << "mimc: warning: " << *w << "\n";
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      Instance inst = instantiate(spec, SessionConfig::from_spec(spec, cfg.sessions,
                                                                 cfg.fake_depth));
      emit(cfg, out, cfg.json ? dump(to_json(res.report)) : check_text(inst, cfg, res.report, secs));
      if (!trace_out.empty()) {
        TraceFile t{cfg.spec_path, hex64(hash), cfg.sessions, cfg.fake_depth,
                    std::string(to_string(cfg.intruder)), res.active, res.report.counterexample};
        std::ofstream f(trace_out, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write '" + trace_out + "'");
        f << dump(to_json(t));
      }
      return exit_for(res.report.verdict);
    }

    if (rep->parsed()) {
      TraceFile t;
      try {
        t = trace_from_json(json::parse(read_file(trace_in)));
      } catch (const json::exception& e) {
        throw FormatError(std::string("malformed trace file: ") + e.what());
      }
      const std::string path = spec_override.empty() ? t.spec_path : spec_override;
      const std::string text = read_file(path);
      const std::string hash = hex64(fnv1a64(text));
      if (hash != t.spec_hash) {
        err << "mimc: " << path << " has hash " << hash << " but the trace was recorded for "
            << t.spec_hash << "; refusing to replay against a changed protocol\n";
        return kExitUsage;
      }
      const ProtocolSpec spec = parse_spec(text);
      Instance inst = instantiate(spec, SessionConfig::from_spec(spec, t.sessions, t.fake_depth));
      ReplayResult r = replay(inst, t.transitions, t.active);
      if (cfg.json) {
        json j{{"narration", r.narration},
               {"verdict", r.violation ? "violation" : "no-violation"},
               {"violation", r.violation ? to_json(*r.violation) : json(nullptr)}};
        emit(cfg, out, dump(j));
      } else {
        std::string text_out;
        for (const auto& line : r.narration) text_out += line + "\n";
        emit(cfg, out, text_out);
      }
      if (!dot_out.empty()) {
        std::ofstream f(dot_out, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write '" + dot_out + "'");
        f << to_dot(inst, r.executed);
      }
      return r.violation ? kExitViolation : kExitClean;
    }

    if (cmp->parsed()) {
      const std::string text = read_file(cfg.spec_path);
      const ProtocolSpec spec = parse_spec(text);
      const std::uint64_t hash = fnv1a64(text);
      RunConfig dy = cfg, mi = cfg;
      dy.intruder = IntruderMode::Dy;
      mi.intruder = IntruderMode::Mi;
      CheckOutcome a = run_check(spec, hash, dy);
      CheckOutcome b = run_check(spec, hash, mi);
      const double ratio = b.report.states_stored
                               ? static_cast<double>(a.report.states_stored) /
                                     static_cast<double>(b.report.states_stored)
                               : 0.0;
      if (cfg.json) {
        emit(cfg, out,
             dump(json{{"dy", to_json(a.report)},
                       {"mi", to_json(b.report)},
                       {"reduction_factor", ratio}}));
      } else {
        std::ostringstream os;
        os << "protocol " << spec.name << ", " << cfg.sessions << " sessions, "
           << to_string(cfg.strategy) << ", " << to_string(cfg.stop) << "\n";
        os << "mode  verdict       stored   matched  transitions  error depth\n";
        for (auto* o : {&a, &b}) {
          const CheckReport& r = o->report;
          os << std::left << std::setw(6) << (o == &a ? "dy" : "mi") << std::setw(12)
             << to_string(r.verdict) << std::right << std::setw(8) << r.states_stored
             << std::setw(10) << r.states_matched << std::setw(13) << r.transitions
             << std::setw(13) << (r.error_depth ? std::to_string(*r.error_depth) : "-") << "\n";
        }
        os << "pruned by mi: " << b.report.pruned_actions.to_string() << "\n";
        os << "stored-state reduction: " << std::fixed << std::setprecision(2) << ratio << "x\n";
        emit(cfg, out, os.str());
      }
      return std::max(exit_for(a.report.verdict), exit_for(b.report.verdict));
    }
  } catch (const ParseError& e) {
    err << "mimc: " << cfg.spec_path << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const ReplayError& e) {
    err << "mimc: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "mimc: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace mimc
