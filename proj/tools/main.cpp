// Command-line front end: build the invariant-measure model for a weighted
// backward shift, sample points of the measure, and run the verification
// suite (invariance, mixing, full support, visit density, exactness).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ergoshift/cli.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::int64_t samples = 0;
  bool samples_set = false;
  std::int64_t level = 0;
  bool level_set = false;
  std::int64_t depth = 0;
  bool depth_set = false;
  std::vector<std::int64_t> lags;
  std::vector<std::string> tests;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config,
                  "preset name (l2-doubling, l2-bilateral, omega-any) or path to a JSON config");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--seed", f.seed, "master seed; all randomness derives from it")
      ->each([&](const std::string&) { f.seed_set = true; });
  cmd->add_option("--samples", f.samples, "Monte-Carlo sample count")
      ->each([&](const std::string&) { f.samples_set = true; });
  cmd->add_option("--level", f.level, "evaluation level L")
      ->each([&](const std::string&) { f.level_set = true; });
  cmd->add_option("--depth", f.depth, "schedule depth")
      ->each([&](const std::string&) { f.depth_set = true; });
  cmd->add_option("--lags", f.lags, "mixing lags")->delimiter(',');
  cmd->add_option("--tests", f.tests,
                  "subset of {invariance, mixing, support, density, exactness}")
      ->delimiter(',');
}

ergoshift::ExperimentConfig load_config(const CommonFlags& f) {
  ergoshift::ExperimentConfig cfg;
  if (!f.config.empty()) {
    if (std::filesystem::exists(f.config)) {
      std::ifstream in(f.config);
      ergoshift::ordered_json j;
      try {
        in >> j;
      } catch (const std::exception& e) {
        throw std::invalid_argument("cannot parse config file " + f.config + ": " + e.what());
      }
      cfg = ergoshift::config_from_json(j);
    } else {
      cfg = ergoshift::preset_config(f.config);
    }
  } else {
    cfg = ergoshift::preset_config("l2-doubling");
  }
  if (!f.out.empty()) cfg.out = f.out;
  if (f.seed_set) cfg.seed = f.seed;
  if (f.samples_set) cfg.samples = f.samples;
  if (f.level_set) cfg.level = f.level;
  if (f.depth_set) cfg.depth = f.depth;
  if (!f.lags.empty()) cfg.lags = f.lags;
  if (!f.tests.empty()) cfg.tests = f.tests;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"invariant-measure construction and verification for weighted backward shifts"};
  app.require_subcommand(1);

  CommonFlags build_flags, sample_flags, verify_flags;
  std::int64_t sample_count = 10;

  CLI::App* build = app.add_subcommand("build", "build the model and write its summary");
  add_common(build, build_flags);

  CLI::App* sample = app.add_subcommand("sample", "sample points of the constructed measure");
  add_common(sample, sample_flags);
  sample->add_option("--count", sample_count, "number of points to sample");

  CLI::App* verify = app.add_subcommand("verify", "run the verification suite");
  add_common(verify, verify_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : ergoshift::cli::kExitUsage;
  }

  try {
    if (build->parsed()) return ergoshift::cli::run_build(load_config(build_flags));
    if (sample->parsed()) return ergoshift::cli::run_sample(load_config(sample_flags), sample_count);
    if (verify->parsed()) return ergoshift::cli::run_verify(load_config(verify_flags));
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return ergoshift::cli::kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ergoshift::cli::kExitFail;
  }
  return ergoshift::cli::kExitUsage;
}
