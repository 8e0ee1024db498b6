#include "dynflow/motion.hpp"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <cstring>
#include <random>
#include <stdexcept>

namespace dynflow::motion {

namespace {

constexpr int kBinomial[5] = {1, 4, 6, 4, 1};  // outer product sums to 256

std::size_t frame_bytes(const Params& p) {
  return std::size_t(p.width) * p.height;
}

const std::uint8_t* frame_at(std::span<const std::uint8_t> bytes, std::size_t frame,
                             std::size_t size) {
  return bytes.data() + frame * size;
}

}  // namespace

void gauss5x5(std::span<const std::uint8_t> in, std::span<std::uint8_t> out, unsigned width,
              unsigned height) {
  for (unsigned y = 0; y < height; ++y) {
    for (unsigned x = 0; x < width; ++x) {
      const std::size_t idx = std::size_t(y) * width + x;
      // Filtering skips the two outermost rows and columns so the
      // kernel never reaches outside the frame.
      if (y < 2 || y >= height - 2 || x < 2 || x >= width - 2) {
        out[idx] = in[idx];
        continue;
      }
      int acc = 0;
      for (int dy = -2; dy <= 2; ++dy) {
        for (int dx = -2; dx <= 2; ++dx) {
          acc += kBinomial[dy + 2] * kBinomial[dx + 2] *
                 in[std::size_t(y + dy) * width + (x + dx)];
        }
      }
      out[idx] = static_cast<std::uint8_t>((acc + 128) >> 8);
    }
  }
}

void thres_diff(std::span<const std::uint8_t> prev, std::span<const std::uint8_t> cur,
                std::span<std::uint8_t> out, unsigned width, unsigned height,
                std::uint8_t threshold) {
  const std::size_t n = std::size_t(width) * height;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::abs(int(cur[i]) - int(prev[i])) > threshold ? 255 : 0;
  }
}

void median5(std::span<const std::uint8_t> in, std::span<std::uint8_t> out, unsigned width,
             unsigned height) {
  for (unsigned y = 0; y < height; ++y) {
    for (unsigned x = 0; x < width; ++x) {
      const std::size_t idx = std::size_t(y) * width + x;
      if (y == 0 || y == height - 1 || x == 0 || x == width - 1) {
        out[idx] = in[idx];
        continue;
      }
      std::array<std::uint8_t, 5> v{in[idx], in[idx - width], in[idx + width], in[idx - 1],
                                    in[idx + 1]};
      std::nth_element(v.begin(), v.begin() + 2, v.end());
      out[idx] = v[2];
    }
  }
}

Frame gauss5x5(const Frame& in) {
  if (in.width < 5 || in.height < 5) {
    throw std::invalid_argument("gauss5x5: frame smaller than the 5x5 kernel");
  }
  Frame out(in.width, in.height);
  gauss5x5(in.pixels, out.pixels, in.width, in.height);
  return out;
}

Frame thres_diff(const Frame& prev, const Frame& cur, std::uint8_t threshold) {
  if (prev.width != cur.width || prev.height != cur.height) {
    throw std::invalid_argument("thres_diff: frame dimensions differ");
  }
  Frame out(cur.width, cur.height);
  thres_diff(prev.pixels, cur.pixels, out.pixels, cur.width, cur.height, threshold);
  return out;
}

Frame median5(const Frame& in) {
  if (in.width < 3 || in.height < 3) {
    throw std::invalid_argument("median5: frame smaller than 3x3");
  }
  Frame out(in.width, in.height);
  median5(in.pixels, out.pixels, in.width, in.height);
  return out;
}

std::uint64_t source_firings(const Params& params) {
  return params.frames / params.token_rate;
}

NetworkGraph build_network(const Params& params) {
  if (params.width < 5 || params.height < 5) {
    throw std::invalid_argument("motion: frame must be at least 5x5");
  }
  if (params.token_rate < 1) {
    throw std::invalid_argument("motion: token rate must be >= 1");
  }
  if (params.frames % params.token_rate != 0) {
    throw std::invalid_argument("motion: frame count must be a multiple of the token rate");
  }
  const std::size_t size = frame_bytes(params);
  if (params.input.size() != params.frames * size || params.output.size() != params.frames * size) {
    throw std::invalid_argument("motion: input/output buffers must hold exactly `frames` frames");
  }

  const std::uint32_t r = params.token_rate;
  const unsigned w = params.width;
  const unsigned h = params.height;
  const std::uint8_t threshold = params.threshold;
  const std::span<const std::uint8_t> input = params.input;
  const std::span<std::uint8_t> output = params.output;

  std::vector<ChannelSpec> channels = {
      {"gauss_thres_cur", size, r, false, {}},
      {"gauss_thres_prev", size, r, true, {}},  // one-frame delay, black initial frame
      {"med_sink", size, r, false, {}},
      {"src_gauss", size, r, false, {}},
      {"thres_med", size, r, false, {}},
  };

  ActorBehavior source;
  source.fire = [input, size](FiringContext& ctx) {
    auto region = ctx.output(0);
    std::memcpy(region.data(), frame_at(input, ctx.firing_index() * ctx.output_tokens(0), size),
                region.size());
  };

  ActorBehavior gauss;
  gauss.fire = [w, h, size](FiringContext& ctx) {
    auto in = ctx.input(0);
    auto cur = ctx.output(0);
    for (std::size_t f = 0; f < ctx.input_tokens(0); ++f) {
      gauss5x5({reinterpret_cast<const std::uint8_t*>(in.data()) + f * size, size},
               {reinterpret_cast<std::uint8_t*>(cur.data()) + f * size, size}, w, h);
    }
    // The delayed channel carries the same filtered stream.
    std::memcpy(ctx.output(1).data(), cur.data(), cur.size());
  };

  ActorBehavior thres;
  thres.fire = [w, h, size, threshold](FiringContext& ctx) {
    auto prev = ctx.input(0);
    auto cur = ctx.input(1);
    auto out = ctx.output(0);
    for (std::size_t f = 0; f < ctx.input_tokens(0); ++f) {
      thres_diff({reinterpret_cast<const std::uint8_t*>(prev.data()) + f * size, size},
                 {reinterpret_cast<const std::uint8_t*>(cur.data()) + f * size, size},
                 {reinterpret_cast<std::uint8_t*>(out.data()) + f * size, size}, w, h, threshold);
    }
  };

  ActorBehavior med;
  med.fire = [w, h, size](FiringContext& ctx) {
    auto in = ctx.input(0);
    auto out = ctx.output(0);
    for (std::size_t f = 0; f < ctx.input_tokens(0); ++f) {
      median5({reinterpret_cast<const std::uint8_t*>(in.data()) + f * size, size},
              {reinterpret_cast<std::uint8_t*>(out.data()) + f * size, size}, w, h);
    }
  };

  ActorBehavior sink;
  sink.fire = [output, size](FiringContext& ctx) {
    auto region = ctx.input(0);
    std::memcpy(output.data() + ctx.firing_index() * ctx.input_tokens(0) * size, region.data(),
                region.size());
  };

  std::vector<ActorSpec> actors;
  actors.push_back({"source",
                    ActorKind::static_rate,
                    {{PortDirection::output, PortKind::regular, "src_gauss"}},
                    std::move(source),
                    {}});
  actors.push_back({"gauss",
                    ActorKind::static_rate,
                    {{PortDirection::input, PortKind::regular, "src_gauss"},
                     {PortDirection::output, PortKind::regular, "gauss_thres_cur"},
                     {PortDirection::output, PortKind::regular, "gauss_thres_prev"}},
                    std::move(gauss),
                    {}});
  actors.push_back({"thres",
                    ActorKind::static_rate,
                    {{PortDirection::input, PortKind::regular, "gauss_thres_prev"},
                     {PortDirection::input, PortKind::regular, "gauss_thres_cur"},
                     {PortDirection::output, PortKind::regular, "thres_med"}},
                    std::move(thres),
                    {}});
  actors.push_back({"med",
                    ActorKind::static_rate,
                    {{PortDirection::input, PortKind::regular, "thres_med"},
                     {PortDirection::output, PortKind::regular, "med_sink"}},
                    std::move(med),
                    {}});
  actors.push_back({"sink",
                    ActorKind::static_rate,
                    {{PortDirection::input, PortKind::regular, "med_sink"}},
                    std::move(sink),
                    {}});

  return build_network(std::move(actors), std::move(channels));
}

std::vector<Frame> oracle_motion_detection(const std::vector<Frame>& frames,
                                           std::uint8_t threshold) {
  std::vector<Frame> out;
  out.reserve(frames.size());
  if (frames.empty()) return out;

  Frame prev_filtered(frames[0].width, frames[0].height);  // black frame reference
  for (const Frame& frame : frames) {
    Frame filtered = gauss5x5(frame);
    Frame diff = thres_diff(prev_filtered, filtered, threshold);
    out.push_back(median5(diff));
    prev_filtered = std::move(filtered);
  }
  return out;
}

std::vector<std::uint8_t> oracle_motion_detection_raw(std::span<const std::uint8_t> frames,
                                                      unsigned width, unsigned height,
                                                      std::uint8_t threshold) {
  const std::size_t size = std::size_t(width) * height;
  const std::size_t count = frames.size() / size;
  std::vector<std::uint8_t> out(frames.size());
  std::vector<std::uint8_t> prev(size, 0);
  std::vector<std::uint8_t> filtered(size);
  std::vector<std::uint8_t> diff(size);
  for (std::size_t f = 0; f < count; ++f) {
    gauss5x5(frames.subspan(f * size, size), filtered, width, height);
    thres_diff(prev, filtered, diff, width, height, threshold);
    median5(diff, {out.data() + f * size, size}, width, height);
    std::swap(prev, filtered);
  }
  return out;
}

std::vector<std::uint8_t> synth_frames(std::uint64_t frames, unsigned width, unsigned height,
                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> out(frames * std::size_t(width) * height);
  for (auto& px : out) px = static_cast<std::uint8_t>(rng() & 0xFF);
  return out;
}

}  // namespace dynflow::motion
