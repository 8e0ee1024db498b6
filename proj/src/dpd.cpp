#include "dynflow/dpd.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace dynflow::dpd {

namespace {

std::string branch_tag(unsigned branch) {
  return branch < 10 ? "0" + std::to_string(branch) : std::to_string(branch);
}

float uniform_pm1(std::mt19937_64& rng) {
  // Top 24 bits -> [0,1), mapped to [-1,1). Keeps the stream stable
  // across standard library implementations.
  const float u = static_cast<float>(rng() >> 40) / static_cast<float>(1u << 24);
  return 2.0f * u - 1.0f;
}

std::span<float> float_region(std::span<std::byte> bytes) {
  return {reinterpret_cast<float*>(bytes.data()), bytes.size() / sizeof(float)};
}

std::span<const float> float_region(std::span<const std::byte> bytes) {
  return {reinterpret_cast<const float*>(bytes.data()), bytes.size() / sizeof(float)};
}

}  // namespace

void encode_config(ConfigToken token, std::span<std::byte> out) {
  const std::uint32_t v = token.active_mask;
  for (int i = 0; i < 4; ++i) out[i] = static_cast<std::byte>((v >> (8 * i)) & 0xFF);
}

ConfigToken decode_config(std::span<const std::byte> in) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[i]) << (8 * i);
  return {static_cast<std::uint16_t>(v)};
}

void check_config(ConfigToken token) {
  if (token.active_mask >> kBranchCount) {
    throw std::invalid_argument("config token names a branch beyond 10");
  }
  const unsigned k = token.active_count();
  if (k < 2 || k > kBranchCount) {
    throw std::invalid_argument("active branch count " + std::to_string(k) +
                                " outside [2,10]");
  }
}

void poly_branch(unsigned branch, std::span<const float> re_in, std::span<const float> im_in,
                 std::span<float> re_out, std::span<float> im_out) {
  if (branch < 1 || branch > kBranchCount) {
    throw std::invalid_argument("poly branch index outside 1..10");
  }
  const std::size_t n = re_in.size();
  for (std::size_t i = 0; i < n; ++i) {
    const float re = re_in[i];
    const float im = im_in[i];
    const float mag = std::sqrt(re * re + im * im);
    float scale = 1.0f;
    for (unsigned p = 1; p < branch; ++p) scale *= mag;
    re_out[i] = re * scale;
    im_out[i] = im * scale;
  }
}

SampleBlock poly_branch(unsigned branch, const SampleBlock& in) {
  SampleBlock out(in.size());
  poly_branch(branch, in.re, in.im, out.re, out.im);
  return out;
}

void fir10(const BranchTaps& taps, FirState& state, std::span<const float> re_in,
           std::span<const float> im_in, std::span<float> re_out, std::span<float> im_out) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(re_in.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    float acc_re = 0.0f;
    float acc_im = 0.0f;
    for (unsigned k = 0; k < kTapCount; ++k) {
      const std::ptrdiff_t j = i - static_cast<std::ptrdiff_t>(k);
      float x_re;
      float x_im;
      if (j >= 0) {
        x_re = re_in[j];
        x_im = im_in[j];
      } else {
        x_re = state.re[-j - 1];
        x_im = state.im[-j - 1];
      }
      const float t_re = taps[k].real();
      const float t_im = taps[k].imag();
      acc_re += t_re * x_re - t_im * x_im;
      acc_im += t_re * x_im + t_im * x_re;
    }
    re_out[i] = acc_re;
    im_out[i] = acc_im;
  }
  // History becomes the last nine inputs (older state fills short blocks).
  FirState next;
  for (unsigned j = 0; j < kTapCount - 1; ++j) {
    const std::ptrdiff_t idx = n - 1 - static_cast<std::ptrdiff_t>(j);
    if (idx >= 0) {
      next.re[j] = re_in[idx];
      next.im[j] = im_in[idx];
    } else {
      next.re[j] = state.re[-idx - 1];
      next.im[j] = state.im[-idx - 1];
    }
  }
  state = next;
}

SampleBlock fir10(const BranchTaps& taps, FirState& state, const SampleBlock& in) {
  SampleBlock out(in.size());
  fir10(taps, state, in.re, in.im, out.re, out.im);
  return out;
}

SampleBlock dpd_adder(const std::vector<const SampleBlock*>& active_blocks) {
  if (active_blocks.empty()) return SampleBlock(0);
  const std::size_t n = active_blocks.front()->size();
  for (const SampleBlock* block : active_blocks) {
    if (block->size() != n) {
      throw std::invalid_argument("adder: branch block lengths differ");
    }
  }
  SampleBlock out(n);
  for (const SampleBlock* block : active_blocks) {
    for (std::size_t i = 0; i < n; ++i) {
      out.re[i] += block->re[i];
      out.im[i] += block->im[i];
    }
  }
  return out;
}

std::uint64_t source_firings(const Params& params) {
  return params.samples / params.period;
}

NetworkGraph build_network(const Params& params) {
  if (params.period < 1) {
    throw std::invalid_argument("dpd: period must be >= 1");
  }
  if (params.samples == 0 || params.samples % params.period != 0) {
    throw std::invalid_argument("dpd: sample count must be a nonzero multiple of the period");
  }
  if (params.schedule.empty()) {
    throw std::invalid_argument("dpd: schedule must not be empty");
  }
  for (ConfigToken token : params.schedule) check_config(token);
  if (params.input.size() != params.samples || params.output.size() != params.samples) {
    throw std::invalid_argument("dpd: input/output buffers must hold exactly `samples` samples");
  }

  const std::size_t period = params.period;
  const std::size_t plane_bytes = period * sizeof(float);
  const std::span<const std::complex<float>> input = params.input;
  const std::span<std::complex<float>> output = params.output;
  const std::vector<ConfigToken> schedule = params.schedule;

  std::vector<ChannelSpec> channels;
  auto pair_channel = [&](const std::string& base) {
    channels.push_back({base + "_re", plane_bytes, 1, false, {}});
    channels.push_back({base + "_im", plane_bytes, 1, false, {}});
  };
  pair_channel("src_split");
  for (unsigned b = 1; b <= kBranchCount; ++b) pair_channel("split_b" + branch_tag(b));
  for (unsigned b = 1; b <= kBranchCount; ++b) pair_channel("b" + branch_tag(b) + "_adder");
  pair_channel("adder_sink");
  channels.push_back({"cfg_split", kConfigTokenBytes, 1, false, {}});
  for (unsigned b = 1; b <= kBranchCount; ++b) {
    channels.push_back({"cfg_b" + branch_tag(b), kConfigTokenBytes, 1, false, {}});
  }
  channels.push_back({"cfg_adder", kConfigTokenBytes, 1, false, {}});

  std::vector<ActorSpec> actors;

  ActorBehavior source;
  source.fire = [input, period](FiringContext& ctx) {
    auto re = float_region(ctx.output(0));
    auto im = float_region(ctx.output(1));
    const std::size_t base = ctx.firing_index() * period;
    for (std::size_t i = 0; i < period; ++i) {
      re[i] = input[base + i].real();
      im[i] = input[base + i].imag();
    }
  };
  actors.push_back({"source",
                    ActorKind::static_rate,
                    {{PortDirection::output, PortKind::regular, "src_split_re"},
                     {PortDirection::output, PortKind::regular, "src_split_im"}},
                    std::move(source),
                    {}});

  ActorBehavior config;
  config.fire = [schedule](FiringContext& ctx) {
    const ConfigToken token = schedule[ctx.firing_index() % schedule.size()];
    for (std::size_t o = 0; o < ctx.output_count(); ++o) {
      encode_config(token, ctx.output(o));
    }
  };
  {
    std::vector<PortSpec> ports;
    ports.push_back({PortDirection::output, PortKind::regular, "cfg_split"});
    for (unsigned b = 1; b <= kBranchCount; ++b) {
      ports.push_back({PortDirection::output, PortKind::regular, "cfg_b" + branch_tag(b)});
    }
    ports.push_back({PortDirection::output, PortKind::regular, "cfg_adder"});
    actors.push_back({"config", ActorKind::static_rate, std::move(ports), std::move(config), {}});
  }

  // Splitter: consumes the input pair every firing, duplicates it to
  // the branch pairs selected by the control token.
  ActorBehavior split;
  split.control = [](std::span<const std::byte> token) {
    const ConfigToken cfg = decode_config(token);
    FiringRates rates;
    rates.by_regular_port.assign(2, 1);  // input pair
    for (unsigned b = 1; b <= kBranchCount; ++b) {
      const std::uint32_t on = cfg.active(b) ? 1 : 0;
      rates.by_regular_port.push_back(on);
      rates.by_regular_port.push_back(on);
    }
    return rates;
  };
  split.fire = [](FiringContext& ctx) {
    auto re = ctx.input(0);
    auto im = ctx.input(1);
    for (std::size_t o = 0; o < ctx.output_count(); o += 2) {
      if (ctx.output_tokens(o) == 0) continue;
      std::memcpy(ctx.output(o).data(), re.data(), re.size());
      std::memcpy(ctx.output(o + 1).data(), im.data(), im.size());
    }
  };
  {
    std::vector<PortSpec> ports;
    ports.push_back({PortDirection::input, PortKind::control, "cfg_split"});
    ports.push_back({PortDirection::input, PortKind::regular, "src_split_re"});
    ports.push_back({PortDirection::input, PortKind::regular, "src_split_im"});
    for (unsigned b = 1; b <= kBranchCount; ++b) {
      ports.push_back({PortDirection::output, PortKind::regular, "split_b" + branch_tag(b) + "_re"});
      ports.push_back({PortDirection::output, PortKind::regular, "split_b" + branch_tag(b) + "_im"});
    }
    actors.push_back({"split", ActorKind::dynamic_rate, std::move(ports), std::move(split), {}});
  }

  for (unsigned b = 1; b <= kBranchCount; ++b) {
    ActorBehavior branch;
    branch.control = [b](std::span<const std::byte> token) {
      const std::uint32_t on = decode_config(token).active(b) ? 1 : 0;
      return FiringRates::uniform(4, on);
    };
    struct BranchState {
      FirState fir;
      std::vector<float> poly_re, poly_im;
    };
    auto state = std::make_shared<BranchState>();
    state->poly_re.resize(period);
    state->poly_im.resize(period);
    const BranchTaps taps = params.taps[b - 1];
    branch.fire = [b, taps, state](FiringContext& ctx) {
      if (ctx.input_tokens(0) == 0) return;  // inactive this period
      auto re_in = float_region(ctx.input(0));
      auto im_in = float_region(ctx.input(1));
      poly_branch(b, re_in, im_in, state->poly_re, state->poly_im);
      fir10(taps, state->fir, state->poly_re, state->poly_im, float_region(ctx.output(0)),
            float_region(ctx.output(1)));
    };
    actors.push_back({"branch" + branch_tag(b),
                      ActorKind::dynamic_rate,
                      {{PortDirection::input, PortKind::control, "cfg_b" + branch_tag(b)},
                       {PortDirection::input, PortKind::regular, "split_b" + branch_tag(b) + "_re"},
                       {PortDirection::input, PortKind::regular, "split_b" + branch_tag(b) + "_im"},
                       {PortDirection::output, PortKind::regular, "b" + branch_tag(b) + "_adder_re"},
                       {PortDirection::output, PortKind::regular, "b" + branch_tag(b) + "_adder_im"}},
                      std::move(branch),
                      {}});
  }

  // Adder: sums the active branch pairs in ascending branch order, so
  // float results are reproducible run to run.
  ActorBehavior adder;
  adder.control = [](std::span<const std::byte> token) {
    const ConfigToken cfg = decode_config(token);
    FiringRates rates;
    for (unsigned b = 1; b <= kBranchCount; ++b) {
      const std::uint32_t on = cfg.active(b) ? 1 : 0;
      rates.by_regular_port.push_back(on);
      rates.by_regular_port.push_back(on);
    }
    rates.by_regular_port.push_back(1);  // output pair
    rates.by_regular_port.push_back(1);
    return rates;
  };
  adder.fire = [period](FiringContext& ctx) {
    auto out_re = float_region(ctx.output(0));
    auto out_im = float_region(ctx.output(1));
    std::fill(out_re.begin(), out_re.end(), 0.0f);
    std::fill(out_im.begin(), out_im.end(), 0.0f);
    for (std::size_t i = 0; i < ctx.input_count(); i += 2) {
      if (ctx.input_tokens(i) == 0) continue;
      auto re = float_region(ctx.input(i));
      auto im = float_region(ctx.input(i + 1));
      for (std::size_t s = 0; s < period; ++s) {
        out_re[s] += re[s];
        out_im[s] += im[s];
      }
    }
  };
  {
    std::vector<PortSpec> ports;
    ports.push_back({PortDirection::input, PortKind::control, "cfg_adder"});
    for (unsigned b = 1; b <= kBranchCount; ++b) {
      ports.push_back({PortDirection::input, PortKind::regular, "b" + branch_tag(b) + "_adder_re"});
      ports.push_back({PortDirection::input, PortKind::regular, "b" + branch_tag(b) + "_adder_im"});
    }
    ports.push_back({PortDirection::output, PortKind::regular, "adder_sink_re"});
    ports.push_back({PortDirection::output, PortKind::regular, "adder_sink_im"});
    actors.push_back({"adder", ActorKind::dynamic_rate, std::move(ports), std::move(adder), {}});
  }

  ActorBehavior sink;
  sink.fire = [output, period](FiringContext& ctx) {
    auto re = float_region(ctx.input(0));
    auto im = float_region(ctx.input(1));
    const std::size_t base = ctx.firing_index() * period;
    for (std::size_t i = 0; i < period; ++i) {
      output[base + i] = {re[i], im[i]};
    }
  };
  actors.push_back({"sink",
                    ActorKind::static_rate,
                    {{PortDirection::input, PortKind::regular, "adder_sink_re"},
                     {PortDirection::input, PortKind::regular, "adder_sink_im"}},
                    std::move(sink),
                    {}});

  NetworkGraph net = dynflow::build_network(std::move(actors), std::move(channels));
  if (net.channels().size() != kChannelCount) {
    throw std::logic_error("dpd: constructed channel count " +
                           std::to_string(net.channels().size()) + " != expected " +
                           std::to_string(kChannelCount));
  }
  return net;
}

std::vector<std::complex<float>> oracle_dpd(std::span<const std::complex<float>> input,
                                            const TapSet& taps,
                                            const std::vector<ConfigToken>& schedule,
                                            std::uint32_t period) {
  if (schedule.empty() || period == 0 || input.size() % period != 0) {
    throw std::invalid_argument("oracle_dpd: bad schedule or period");
  }
  const std::size_t periods = input.size() / period;
  std::array<FirState, kBranchCount> states{};
  std::vector<std::complex<float>> out(input.size());

  SampleBlock block(period);
  for (std::size_t p = 0; p < periods; ++p) {
    const ConfigToken cfg = schedule[p % schedule.size()];
    for (std::size_t i = 0; i < period; ++i) {
      block.re[i] = input[p * period + i].real();
      block.im[i] = input[p * period + i].imag();
    }
    SampleBlock acc(period);
    for (unsigned b = 1; b <= kBranchCount; ++b) {
      if (!cfg.active(b)) continue;
      SampleBlock shaped = poly_branch(b, block);
      SampleBlock filtered = fir10(taps[b - 1], states[b - 1], shaped);
      for (std::size_t i = 0; i < period; ++i) {
        acc.re[i] += filtered.re[i];
        acc.im[i] += filtered.im[i];
      }
    }
    for (std::size_t i = 0; i < period; ++i) {
      out[p * period + i] = {acc.re[i], acc.im[i]};
    }
  }
  return out;
}

std::vector<ConfigToken> parse_schedule(std::istream& in) {
  std::vector<ConfigToken> schedule;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    int k = 0;
    if (!(ls >> k)) continue;  // blank line

    const auto fail = [&](const std::string& why) {
      throw std::runtime_error("schedule line " + std::to_string(line_no) + ": " + why);
    };
    if (k < 2 || k > int(kBranchCount)) fail("active count " + std::to_string(k) + " outside [2,10]");

    char c = 0;
    ConfigToken token;
    if (ls >> c) {
      if (c != ':') fail("expected ':' after count");
      for (int i = 0; i < k; ++i) {
        int branch = 0;
        if (!(ls >> branch)) fail("expected " + std::to_string(k) + " branch indices");
        if (branch < 1 || branch > int(kBranchCount)) fail("branch index outside 1..10");
        if (token.active(branch)) fail("branch " + std::to_string(branch) + " listed twice");
        token.active_mask |= std::uint16_t(1u << (branch - 1));
        if (i + 1 < k && !(ls >> c && c == ',')) fail("expected ',' between branch indices");
      }
    } else {
      token = ConfigToken::first_n(unsigned(k));
    }
    schedule.push_back(token);
  }
  if (schedule.empty()) throw std::runtime_error("schedule file has no entries");
  return schedule;
}

TapSet parse_taps(std::istream& in) {
  TapSet taps{};
  std::string line;
  unsigned branch = 0;
  while (branch < kBranchCount && std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string pair;
    unsigned tap = 0;
    while (ls >> pair) {
      if (tap >= kTapCount) {
        throw std::runtime_error("taps line for branch " + std::to_string(branch + 1) +
                                 " has more than 10 entries");
      }
      float re = 0.0f;
      float im = 0.0f;
      char comma = 0;
      std::istringstream ps(pair);
      if (!(ps >> re >> comma >> im) || comma != ',') {
        throw std::runtime_error("malformed tap '" + pair + "' (expected re,im)");
      }
      taps[branch][tap++] = {re, im};
    }
    if (tap == 0) continue;  // blank line
    if (tap != kTapCount) {
      throw std::runtime_error("branch " + std::to_string(branch + 1) + " has " +
                               std::to_string(tap) + " taps, expected 10");
    }
    ++branch;
  }
  if (branch != kBranchCount) {
    throw std::runtime_error("taps file defines " + std::to_string(branch) +
                             " branches, expected 10");
  }
  return taps;
}

std::vector<ConfigToken> random_schedule(std::size_t entries, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<ConfigToken> schedule;
  schedule.reserve(entries);
  std::array<unsigned, kBranchCount> branches{};
  std::iota(branches.begin(), branches.end(), 1u);
  for (std::size_t i = 0; i < entries; ++i) {
    const unsigned k = 2 + static_cast<unsigned>(rng() % (kBranchCount - 1));  // 2..10
    for (std::size_t j = branches.size(); j > 1; --j) {
      std::swap(branches[j - 1], branches[rng() % j]);
    }
    ConfigToken token;
    for (unsigned j = 0; j < k; ++j) token.active_mask |= std::uint16_t(1u << (branches[j] - 1));
    schedule.push_back(token);
  }
  return schedule;
}

TapSet random_taps(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TapSet taps{};
  for (auto& branch : taps) {
    for (auto& tap : branch) {
      tap = {0.5f * uniform_pm1(rng), 0.5f * uniform_pm1(rng)};
    }
  }
  return taps;
}

std::vector<std::complex<float>> synth_samples(std::uint64_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::complex<float>> out(samples);
  for (auto& s : out) {
    const float re = uniform_pm1(rng);
    const float im = uniform_pm1(rng);
    s = {re, im};
  }
  return out;
}

}  // namespace dynflow::dpd
