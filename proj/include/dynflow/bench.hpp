#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dynflow/runtime.hpp"

namespace dynflow::bench {

enum class App { motion, dpd };

/// Everything the command line can configure. Paths left empty select
/// seeded synthetic inputs, so every command runs self-contained.
struct CliConfig {
  App app = App::motion;
  std::string input_path;
  std::string output_path;
  std::string schedule_path;
  std::string taps_path;
  std::uint64_t frames = 64;
  std::uint64_t samples = 1ull << 20;
  std::uint32_t rate = 1;
  unsigned width = 320;
  unsigned height = 240;
  unsigned threshold = 32;
  std::uint32_t period = 65536;
  MappingMode mapping = MappingMode::free;
  std::map<std::string, unsigned> pins;  // actor -> core, implies fixed for those actors
  std::uint64_t seed = 1;
  unsigned reps = 1;
  bool porcelain = false;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitConfigError = 2;

/// Runs the motion detection network, reports throughput in frames per
/// second (median over reps), per-actor firing counts and the channel
/// memory table. Returns an exit code.
int cmd_motion(const CliConfig& cfg, std::ostream& out);

/// Runs the predistortion network and reports megasamples per second.
int cmd_dpd(const CliConfig& cfg, std::ostream& out);

/// Runs network and reference on identical input and reports PASS or
/// FAIL with first-divergence diagnostics.
int cmd_verify(const CliConfig& cfg, std::ostream& out);

/// Prints the per-channel capacity table and total, without running.
int cmd_mem(const CliConfig& cfg, std::ostream& out);

/// Comparison used by cmd_verify for motion output: byte-exact.
struct Divergence {
  std::uint64_t index = 0;  // frame index / sample index
  std::string detail;
};
std::optional<Divergence> compare_frames(std::span<const std::uint8_t> got,
                                         std::span<const std::uint8_t> want,
                                         std::size_t frame_size);

/// Comparison used by cmd_verify for dpd output: per-sample relative
/// error against a floor of 1e-3, tolerance 1e-5.
std::optional<Divergence> compare_samples(std::span<const std::complex<float>> got,
                                          std::span<const std::complex<float>> want,
                                          double tolerance = 1e-5);

}  // namespace dynflow::bench
