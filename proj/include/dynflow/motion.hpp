#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dynflow/model.hpp"

namespace dynflow::motion {

/// One 8-bit grayscale frame, row-major. The channel token size of a
/// motion network is width * height bytes.
struct Frame {
  unsigned width = 0;
  unsigned height = 0;
  std::vector<std::uint8_t> pixels;

  Frame() = default;
  Frame(unsigned w, unsigned h) : width(w), height(h), pixels(std::size_t(w) * h, 0) {}

  bool operator==(const Frame&) const = default;
};

// Raw-buffer kernels, usable directly on channel regions.
void gauss5x5(std::span<const std::uint8_t> in, std::span<std::uint8_t> out, unsigned width,
              unsigned height);
void thres_diff(std::span<const std::uint8_t> prev, std::span<const std::uint8_t> cur,
                std::span<std::uint8_t> out, unsigned width, unsigned height,
                std::uint8_t threshold);
void median5(std::span<const std::uint8_t> in, std::span<std::uint8_t> out, unsigned width,
             unsigned height);

/// 5x5 binomial Gaussian smoothing. The two outermost rows and columns
/// are copied through unfiltered. Throws if the frame is smaller than
/// the kernel.
Frame gauss5x5(const Frame& in);

/// Per-pixel |cur - prev| > threshold ? 255 : 0. Frames must have equal
/// dimensions.
Frame thres_diff(const Frame& prev, const Frame& cur, std::uint8_t threshold);

/// Median over the plus-shaped 5-pixel neighborhood; the one-pixel
/// border is copied through. Frames below 3x3 are rejected.
Frame median5(const Frame& in);

struct Params {
  unsigned width = 320;
  unsigned height = 240;
  std::uint8_t threshold = 32;
  std::uint32_t token_rate = 1;
  std::uint64_t frames = 0;
  std::span<const std::uint8_t> input;  // frames * width * height bytes
  std::span<std::uint8_t> output;       // filled by the sink actor
};

/// Five-actor motion detection pipeline: source -> gauss -> thres ->
/// med -> sink, with two gauss->thres channels of which one carries a
/// one-frame delay token (the previous-frame reference; its initial
/// token is a black frame). All actors are static. `frames` must be a
/// multiple of the token rate.
NetworkGraph build_network(const Params& params);

/// Source firings needed to stream params.frames frames.
std::uint64_t source_firings(const Params& params);

/// Single-threaded reference: gauss5x5 -> thres_diff (previous frame
/// initialized to black) -> median5, per frame.
std::vector<Frame> oracle_motion_detection(const std::vector<Frame>& frames,
                                           std::uint8_t threshold);

/// Same reference over concatenated raw frames.
std::vector<std::uint8_t> oracle_motion_detection_raw(std::span<const std::uint8_t> frames,
                                                      unsigned width, unsigned height,
                                                      std::uint8_t threshold);

/// Seeded noise frames for self-contained benchmarking.
std::vector<std::uint8_t> synth_frames(std::uint64_t frames, unsigned width, unsigned height,
                                       std::uint64_t seed);

}  // namespace dynflow::motion
