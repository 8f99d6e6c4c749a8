#include "emergent/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"

#include "emergent/errors.hpp"
#include "emergent/orchestrator.hpp"
#include "emergent/scenario.hpp"
#include "emergent/trace.hpp"

namespace emergent {

namespace {

void report(std::ostream& err, const std::string& source, const ParseError& e) {
  err << "error: " << source << ":" << e.line() << ":" << e.column() << ": " << e.what() << "\n";
}

void report(std::ostream& err, const std::string& source, const ValidationError& e) {
  err << "error: " << source << ": " << e.problems().size() << " problem(s)\n";
  for (const auto& p : e.problems()) err << "  " << p << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Emergent configuration simulator", "ecsim"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::optional<std::uint64_t> seed;
  SimTime max_time = 600000;
  std::string trace_path;
  auto* run = app.add_subcommand("run", "run a scenario and write its trace");
  run->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  run->add_option("--seed", seed, "RNG seed (default: the scenario's sim.seed)");
  run->add_option("--max-time", max_time, "simulated time limit in ms")->capture_default_str();
  run->add_option("--trace", trace_path, "trace output file (default stdout)");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "load and cross-validate a scenario");
  validate->add_option("--scenario", validate_path, "scenario JSON file")->required();

  std::string summary_path;
  auto* summarize_cmd = app.add_subcommand("summarize", "print per-configuration metrics of a trace");
  summarize_cmd->add_option("--trace", summary_path, "trace JSON-lines file")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitRuntimeError;
  }

  try {
    if (*run) {
      ScenarioDoc doc;
      try {
        doc = load_scenario(scenario_path);
      } catch (const ParseError& e) {
        report(err, scenario_path, e);
        return kExitScenarioError;
      } catch (const ValidationError& e) {
        report(err, scenario_path, e);
        return kExitScenarioError;
      }
      const Trace trace = run_scenario(doc, seed.value_or(doc.sim.seed), max_time);
      if (trace_path.empty()) {
        write_trace(out, trace);
      } else {
        std::ofstream f(trace_path, std::ios::binary);
        if (!f) {
          err << "error: cannot write " << trace_path << "\n";
          return kExitRuntimeError;
        }
        write_trace(f, trace);
      }
      return kExitOk;
    }
    if (*validate) {
      try {
        const ScenarioDoc doc = load_scenario(validate_path);
        out << "ok: " << doc.name << " (" << doc.things.size() << " things, " << doc.roles.size() << " roles, "
            << doc.templates.size() << " templates)\n";
        return kExitOk;
      } catch (const ParseError& e) {
        report(err, validate_path, e);
      } catch (const ValidationError& e) {
        report(err, validate_path, e);
      }
      return kExitScenarioError;
    }
    if (*summarize_cmd) {
      std::ifstream f(summary_path, std::ios::binary);
      if (!f) {
        err << "error: cannot read " << summary_path << "\n";
        return kExitScenarioError;
      }
      try {
        print_summary(out, summarize(read_trace(f)));
        return kExitOk;
      } catch (const ParseError& e) {
        report(err, summary_path, e);
      } catch (const ValidationError& e) {
        report(err, summary_path, e);
      }
      return kExitScenarioError;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
  return kExitRuntimeError;
}

}  // namespace emergent
