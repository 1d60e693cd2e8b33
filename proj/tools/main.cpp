// Command-line experiment runner.
//
//   bbvi run <config> [--seed N] [--out PATH] [--override key=value]...
//   bbvi batch <dir>  [--override key=value]...

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bbvi/config.hpp"
#include "bbvi/errors.hpp"
#include "bbvi/harness.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void apply_cli_overrides(bbvi::RunConfig& config, const std::vector<std::string>& overrides,
                         const std::optional<std::uint64_t>& seed,
                         const std::optional<std::string>& out) {
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw bbvi::ConfigError(kv, "override must look like key=value");
    bbvi::apply_override(config, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (seed) config.seed = *seed;
  if (out) config.out = *out;
}

int run_one(const bbvi::RunConfig& config) {
  const auto summary = bbvi::run_experiment(config);
  std::cout << "terminal_step=" << summary.terminal_step
            << " sqrt_skl=" << summary.sqrt_skl_to_opt << " reason=" << summary.reason
            << " wrote " << summary.jsonl_path << ", " << summary.csv_path << "\n";
  return summary.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Black-box variational inference optimization harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::string batch_dir;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;

  auto* run = app.add_subcommand("run", "run one experiment from a config file");
  run->add_option("config", config_path, "key=value config file")->required();
  run->add_option("--seed", seed, "override the rng seed");
  run->add_option("--out", out, "override the output path prefix");
  run->add_option("--override", overrides, "key=value override (repeatable)");

  auto* batch = app.add_subcommand("batch", "run every *.cfg in a directory");
  batch->add_option("dir", batch_dir, "directory of config files")->required();
  batch->add_option("--override", overrides, "key=value override (repeatable)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      bbvi::RunConfig config = bbvi::parse_config(read_file(config_path));
      apply_cli_overrides(config, overrides, seed, out);
      return run_one(config);
    }
    int worst = 0;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(batch_dir))
      if (entry.path().extension() == ".cfg") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) {
      std::cerr << "no .cfg files in " << batch_dir << "\n";
      return 2;
    }
    for (const auto& file : files) {
      bbvi::RunConfig config = bbvi::parse_config(read_file(file.string()));
      apply_cli_overrides(config, overrides, std::nullopt, std::nullopt);
      std::cout << file.filename().string() << ": ";
      worst = std::max(worst, run_one(config));
    }
    return worst;
  } catch (const bbvi::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
