#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "scalepress/scalepress.hpp"

namespace fs = std::filesystem;
namespace ex = scalepress::experiment;

namespace {

enum Exit : int { kOk = 0, kCellFailures = 1, kUsage = 2, kIo = 3, kRefused = 4 };

struct Flags {
  std::string mode;
  unsigned jobs = 1;
  long long seed = -1;
  std::string out;
  bool no_cache = false;
  bool timing = false;
};

ex::Overrides overrides(const Flags& f) {
  ex::Overrides ov;
  if (!f.mode.empty()) ov.mode = ex::parse_mode(f.mode);
  if (f.seed >= 0) ov.seed = static_cast<std::uint64_t>(f.seed);
  if (!f.out.empty()) ov.output = f.out;
  return ov;
}

int cmd_run(const std::string& config_path, const Flags& flags) {
  const auto cfg = ex::load_config(config_path, overrides(flags));
  ex::Runner runner(cfg, {flags.jobs, !flags.no_cache, flags.timing});
  const auto res = runner.run();
  const fs::path dir = cfg.output;
  ex::write_outputs(cfg, res, dir);
  std::size_t failed = 0, greedy = 0;
  for (const auto& c : res.cells) {
    if (c.status.rfind("error", 0) == 0) {
      ++failed;
      std::cerr << "cell " << c.cell << ": " << c.status << "\n";
    } else if (c.status.rfind("greedy", 0) == 0) {
      ++greedy;
    }
  }
  std::cout << "wrote " << res.rows.size() << " rows to " << (dir / "results.csv").string() << " (" << greedy
            << " greedy, " << failed << " failed; cache hits " << res.cache_hits << ")\n";
  return failed == 0 ? kOk : kCellFailures;
}

int cmd_oracle(const std::string& config_path, const Flags& flags) {
  const auto cfg = ex::load_config(config_path, overrides(flags));
  const auto rep = ex::run_oracle(cfg, flags.jobs);
  const fs::path dir = cfg.output;
  fs::create_directories(dir);
  ex::write_text(dir / "oracle.json", ex::oracle_to_json(rep).dump(2) + "\n");
  std::printf("oracle: %zu cells, max discrepancy %.3g, %s\n", rep.cells.size(), rep.max_discrepancy,
              rep.pass() ? "pass" : "FAIL");
  for (const auto& m : rep.window_mismatches) std::printf("  %s\n", m.c_str());
  return rep.pass() ? kOk : kCellFailures;
}

int cmd_report(const std::string& dir) {
  std::cout << ex::report(dir);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scalepress: pressure-like quantities on finite metric G-systems"};
  app.require_subcommand(1);
  Flags flags;
  std::string target;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--mode", flags.mode, "solver mode")->check(CLI::IsMember({"exact", "greedy", "auto"}));
    sub->add_option("--jobs", flags.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", flags.seed, "seed for randomised builders")->check(CLI::NonNegativeNumber);
    sub->add_option("--out", flags.out, "output directory (overrides the config)");
  };
  auto* run = app.add_subcommand("run", "evaluate every cell of a config and write results");
  run->add_option("config", target, "experiment config (JSON)")->required();
  add_common(run);
  run->add_flag("--no-cache", flags.no_cache, "recompute patch metrics and windows for every cell");
  run->add_flag("--timing", flags.timing, "record measured wall_ms in the CSV (breaks byte-identical reruns)");

  auto* oracle = app.add_subcommand("oracle", "cross-check every cell against exhaustive enumeration");
  oracle->add_option("config", target, "experiment config (JSON)")->required();
  add_common(oracle);

  auto* report = app.add_subcommand("report", "summarise a results directory");
  report->add_option("dir", target, "directory written by `run`")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (run->parsed()) return cmd_run(target, flags);
    if (oracle->parsed()) return cmd_oracle(target, flags);
    return cmd_report(target);
  } catch (const scalepress::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const scalepress::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const scalepress::SizeLimitError& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return kRefused;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kCellFailures;
  }
}
