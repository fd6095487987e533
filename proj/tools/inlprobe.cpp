// Command-line front end: run / figure / constants / sweep.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>

#include "inlprobe/inlprobe.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

int report(const inlprobe::RunManifest& man) {
  for (const auto& a : man.artifacts) std::cout << a.string() << '\n';
  if (!man.ok) {
    std::cerr << "numerical failure: " << man.error << (man.partial ? " (partial output written)" : "") << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const inlprobe::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const inlprobe::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const inlprobe::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-spin NMR entanglement and collapse-term simulator"};
  app.set_version_flag("--version", inlprobe::kVersion);
  app.require_subcommand(1);

  std::string run_path;
  auto* run_cmd = app.add_subcommand("run", "Run the scenario described by a config file");
  run_cmd->add_option("config", run_path, "Config file")->required();

  int figure_id = 0;
  std::string out_dir = ".";
  auto* fig_cmd = app.add_subcommand("figure", "Reproduce one of the reference figure scenarios");
  fig_cmd->add_option("--id", figure_id, "Figure id")->required()->check(CLI::Range(1, 4));
  fig_cmd->add_option("--out", out_dir, "Output directory");

  std::string const_path;
  auto* const_cmd = app.add_subcommand("constants", "Print derived constants without running");
  const_cmd->add_option("config", const_path, "Config file")->required();

  std::string sweep_path;
  auto* sweep_cmd = app.add_subcommand("sweep", "Average a scenario over a detuning profile");
  sweep_cmd->add_option("config", sweep_path, "Config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  if (*run_cmd) return guarded([&] { return report(inlprobe::run(inlprobe::load_config(run_path))); });

  if (*fig_cmd) {
    return guarded([&] {
      auto cfg = inlprobe::figure_config(figure_id);
      cfg.output_dir = out_dir;
      return report(inlprobe::run(cfg));
    });
  }

  if (*const_cmd) {
    return guarded([&] {
      const auto cfg = inlprobe::load_config(const_path);
      std::cout << inlprobe::constants_text(inlprobe::compute_constants(cfg));
      return kExitOk;
    });
  }

  if (*sweep_cmd) {
    return guarded([&] {
      auto cfg = inlprobe::load_config(sweep_path);
      if (cfg.mode != inlprobe::Mode::Sweep) {
        cfg.mode = inlprobe::Mode::Sweep;
        inlprobe::validate(cfg);
      }
      return report(inlprobe::run(cfg));
    });
  }
  return kExitConfig;
}
