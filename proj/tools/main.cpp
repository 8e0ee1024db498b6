#include <CLI11.hpp>
#include <iostream>

#include "dynflow/bench.hpp"

using dynflow::bench::App;
using dynflow::bench::CliConfig;

namespace {

// --pin gauss=2,med=1
void parse_pins(const std::vector<std::string>& entries, CliConfig& cfg) {
  for (const std::string& entry : entries) {
    std::stringstream ss(entry);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw CLI::ValidationError("--pin", "expected actor=core, got '" + item + "'");
      }
      cfg.pins[item.substr(0, eq)] = unsigned(std::stoul(item.substr(eq + 1)));
    }
  }
}

void add_common_flags(CLI::App* cmd, CliConfig& cfg, std::vector<std::string>& pins) {
  cmd->add_option("--seed", cfg.seed, "Seed for synthetic inputs and schedules");
  cmd->add_option("--input", cfg.input_path, "Input file (omit for seeded synthetic input)");
  cmd->add_option("--output", cfg.output_path, "Output file");
  cmd->add_option("--reps", cfg.reps, "Timing repetitions (median reported)")
      ->check(CLI::PositiveNumber);
  std::map<std::string, dynflow::MappingMode> mappings{
      {"free", dynflow::MappingMode::free}, {"fixed", dynflow::MappingMode::fixed}};
  cmd->add_option("--mapping", cfg.mapping, "Actor-to-core mapping")
      ->transform(CLI::CheckedTransformer(mappings, CLI::ignore_case));
  cmd->add_option("--pin", pins, "Pin actors: actor=core[,actor=core...] (implies fixed)");
  cmd->add_flag("--porcelain", cfg.porcelain, "Line-oriented key=value output");
}

void add_motion_flags(CLI::App* cmd, CliConfig& cfg) {
  cmd->add_option("--frames", cfg.frames, "Frames to process");
  cmd->add_option("--width", cfg.width, "Frame width")->check(CLI::PositiveNumber);
  cmd->add_option("--height", cfg.height, "Frame height")->check(CLI::PositiveNumber);
  cmd->add_option("--rate", cfg.rate, "Channel token rate")->check(CLI::PositiveNumber);
  cmd->add_option("--threshold", cfg.threshold, "Motion threshold")->check(CLI::Range(0, 255));
}

void add_dpd_flags(CLI::App* cmd, CliConfig& cfg) {
  cmd->add_option("--samples", cfg.samples, "Samples to process");
  cmd->add_option("--period", cfg.period, "Reconfiguration period in samples")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--schedule", cfg.schedule_path, "Schedule file (omit for a seeded schedule)");
  cmd->add_option("--taps", cfg.taps_path, "Taps file (omit for seeded taps)");
}

}  // namespace

int main(int argc, char** argv) try {
  CLI::App app{"dynflow: dynamic dataflow runtime benchmarks"};
  app.require_subcommand(1);

  CliConfig cfg;
  std::vector<std::string> pins;

  CLI::App* motion = app.add_subcommand("motion", "Run the motion detection pipeline");
  add_motion_flags(motion, cfg);
  add_common_flags(motion, cfg, pins);

  CLI::App* dpd = app.add_subcommand("dpd", "Run the dynamic predistortion filter");
  add_dpd_flags(dpd, cfg);
  add_common_flags(dpd, cfg, pins);

  std::map<std::string, App> apps{{"motion", App::motion}, {"dpd", App::dpd}};

  CLI::App* verify = app.add_subcommand("verify", "Check network output against the reference");
  verify->add_option("app", cfg.app, "Application to verify")
      ->required()
      ->transform(CLI::CheckedTransformer(apps, CLI::ignore_case));
  add_motion_flags(verify, cfg);
  add_dpd_flags(verify, cfg);
  add_common_flags(verify, cfg, pins);

  CLI::App* mem = app.add_subcommand("mem", "Print the channel buffer memory table");
  mem->add_option("app", cfg.app, "Application network")
      ->required()
      ->transform(CLI::CheckedTransformer(apps, CLI::ignore_case));
  add_motion_flags(mem, cfg);
  add_dpd_flags(mem, cfg);
  mem->add_flag("--porcelain", cfg.porcelain, "Line-oriented key=value output");

  try {
    app.parse(argc, argv);
    parse_pins(pins, cfg);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : dynflow::bench::kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return dynflow::bench::kExitConfigError;
  }

  if (motion->parsed()) {
    cfg.app = App::motion;
    return dynflow::bench::cmd_motion(cfg, std::cout);
  }
  if (dpd->parsed()) {
    cfg.app = App::dpd;
    return dynflow::bench::cmd_dpd(cfg, std::cout);
  }
  if (verify->parsed()) return dynflow::bench::cmd_verify(cfg, std::cout);
  return dynflow::bench::cmd_mem(cfg, std::cout);
} catch (const std::exception& e) {
  std::cerr << "error: " << e.what() << "\n";
  return dynflow::bench::kExitConfigError;
}
