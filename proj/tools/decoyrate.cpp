// Command-line front end: distance scans, reach tables, Monte-Carlo
// validation runs, and single-shot evaluation of recorded counts.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "decoyrate/config.hpp"
#include "decoyrate/scan.hpp"

namespace {

struct CliState {
  std::string config_path;
  std::string out_override;
  std::string counts_override;
  std::string mode = "default";
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CliState& st) {
  cmd->add_option("--config", st.config_path, "run configuration file (key = value lines)")
      ->required();
  cmd->add_option("--out", st.out_override, "output CSV path (default: config 'out' or stdout)");
  cmd->add_option("--mode", st.mode, "default | compat (compat reproduces the alternative "
                                     "coefficient, deviation, and transmittance conventions)")
      ->check(CLI::IsMember({"default", "compat"}));
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&st](const std::uint64_t& v) { st.seed = v; st.seed_set = true; },
      "override the RNG seed from the config");
}

decoyrate::RunConfig load(const CliState& st) {
  decoyrate::RunConfig cfg = decoyrate::load_config(st.config_path);
  if (!st.out_override.empty()) cfg.out = st.out_override;
  if (!st.counts_override.empty()) cfg.counts = st.counts_override;
  if (st.seed_set) cfg.seed = st.seed;
  if (st.mode == "compat") {
    cfg.options.wide_error_coefficient = true;
    cfg.options.reproduction_delta_n = true;
    cfg.complement_transmittance = true;
  }
  return cfg;
}

// Writes through a file when a path is configured, stdout otherwise.
template <class Fn>
void with_output(const decoyrate::RunConfig& cfg, Fn&& fn) {
  if (cfg.out.empty()) {
    fn(std::cout);
    return;
  }
  std::ofstream out(cfg.out);
  if (!out) throw decoyrate::FileError("cannot open output file: " + cfg.out);
  fn(out);
  out.flush();
  if (!out) throw decoyrate::FileError("failed writing output file: " + cfg.out);
}

int dispatch(const std::string& action, const CliState& st) {
  using namespace decoyrate;
  const RunConfig cfg = load(st);
  if (action == "scan") {
    // Finite scans evaluate the first entry of the N list; set
    // asymptotic = true for the infinite-acquisition limit.
    const double n = cfg.asymptotic ? 0.0 : cfg.n_values.front();
    const auto rows = run_scan(cfg, n);
    with_output(cfg, [&](std::ostream& o) { write_scan_csv(o, cfg, rows); });
  } else if (action == "max-distance") {
    const auto rows = run_max_distance(cfg);
    with_output(cfg, [&](std::ostream& o) { write_max_distance_csv(o, rows); });
  } else if (action == "validate") {
    const ValidationSummary summary = run_validation(cfg);
    with_output(cfg, [&](std::ostream& o) { write_validation_csv(o, summary); });
  } else if (action == "rate-from-counts") {
    if (cfg.counts.empty())
      throw ConfigError("rate-from-counts needs a counts file (--counts or config 'counts')");
    const FiniteCounts counts = load_counts(cfg.counts);
    const auto rows = evaluate_counts(cfg, counts);
    with_output(cfg, [&](std::ostream& o) { write_counts_evaluation_csv(o, rows); });
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decoy-state key-rate bounds with finite-statistics guarantees"};
  app.require_subcommand(1);

  CliState st;
  std::string action;
  for (const char* name : {"scan", "max-distance", "validate", "rate-from-counts"}) {
    CLI::App* cmd = app.add_subcommand(
        name, name == std::string("scan")           ? "key rate vs distance (CSV)"
              : name == std::string("max-distance") ? "largest distance with positive rate"
              : name == std::string("validate")     ? "Monte-Carlo failure-rate check"
                                                    : "evaluate one recorded counts file");
    add_common(cmd, st);
    if (name == std::string("rate-from-counts"))
      cmd->add_option("--counts", st.counts_override, "counts CSV (overrides config 'counts')");
    cmd->callback([&action, name]() { action = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage problems are config-class failures
  }

  try {
    return dispatch(action, st);
  } catch (const decoyrate::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const decoyrate::FileError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  }
}
