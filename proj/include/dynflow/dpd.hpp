#pragma once

#include <array>
#include <bit>
#include <complex>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "dynflow/model.hpp"

namespace dynflow::dpd {

inline constexpr unsigned kBranchCount = 10;
inline constexpr unsigned kTapCount = 10;

/// Channels in the predistortion network: every complex edge is a pair
/// of float channels (source->splitter, splitter->branch x10,
/// branch->adder x10, adder->sink), plus one control channel from the
/// configuration actor to each of the twelve dynamic actors.
inline constexpr std::size_t kChannelCount = 2 + 20 + 20 + 2 + 12;

/// Active-branch selection for one reconfiguration period. Bit b set
/// means branch b+1 processes the period.
struct ConfigToken {
  std::uint16_t active_mask = 0;

  unsigned active_count() const { return std::popcount(active_mask); }
  bool active(unsigned branch) const { return (active_mask >> (branch - 1)) & 1u; }

  /// Branches 1..k active.
  static ConfigToken first_n(unsigned k) { return {static_cast<std::uint16_t>((1u << k) - 1)}; }

  bool operator==(const ConfigToken&) const = default;
};

/// Wire form of a config token: 4 bytes, little endian.
inline constexpr std::size_t kConfigTokenBytes = 4;
void encode_config(ConfigToken token, std::span<std::byte> out);
ConfigToken decode_config(std::span<const std::byte> in);

/// Throws if the selection uses branches outside 1..10 or activates
/// fewer than 2 or more than 10 of them.
void check_config(ConfigToken token);

using BranchTaps = std::array<std::complex<float>, kTapCount>;
using TapSet = std::array<BranchTaps, kBranchCount>;

/// Block of complex samples as separate real and imaginary planes, the
/// payload carried by one (re, im) channel pair token.
struct SampleBlock {
  std::vector<float> re;
  std::vector<float> im;

  SampleBlock() = default;
  explicit SampleBlock(std::size_t n) : re(n, 0.0f), im(n, 0.0f) {}
  std::size_t size() const { return re.size(); }

  bool operator==(const SampleBlock&) const = default;
};

/// Memoryless branch nonlinearity y[n] = x[n] * |x[n]|^(branch-1),
/// branch in 1..10. Branch 1 is the identity.
void poly_branch(unsigned branch, std::span<const float> re_in, std::span<const float> im_in,
                 std::span<float> re_out, std::span<float> im_out);
SampleBlock poly_branch(unsigned branch, const SampleBlock& in);

/// Complex sample history carried between firings of one FIR branch.
struct FirState {
  std::array<float, kTapCount - 1> re{};
  std::array<float, kTapCount - 1> im{};  // [j] holds x[-(j+1)]
};

/// 10-tap complex FIR: y[n] = sum_k taps[k] * x[n-k], with the history
/// supplying samples before the block start and updated to the block's
/// last nine inputs.
void fir10(const BranchTaps& taps, FirState& state, std::span<const float> re_in,
           std::span<const float> im_in, std::span<float> re_out, std::span<float> im_out);
SampleBlock fir10(const BranchTaps& taps, FirState& state, const SampleBlock& in);

/// Element-wise complex sum of the active branch blocks, in ascending
/// branch order. Throws on block length mismatch.
SampleBlock dpd_adder(const std::vector<const SampleBlock*>& active_blocks);

struct Params {
  std::uint32_t period = 65536;  // samples per token in the dynamic part
  std::uint64_t samples = 0;     // must be a multiple of period
  TapSet taps{};
  std::vector<ConfigToken> schedule;  // one entry per period, cycling
  std::span<const std::complex<float>> input;
  std::span<std::complex<float>> output;
};

/// Dynamic predistortion network: source -> splitter -> 10 poly+FIR
/// branches -> adder -> sink, with a configuration actor driving the
/// control port of the splitter, every branch and the adder. One token
/// carries one reconfiguration period of samples, so every channel in
/// the dynamic part has token rate 1 and each dynamic firing consumes
/// exactly one control token.
NetworkGraph build_network(const Params& params);

std::uint64_t source_firings(const Params& params);

/// Single-threaded reference: per period, apply poly_branch and fir10
/// for each active branch (branch FIR state frozen while inactive) and
/// sum in ascending branch order.
std::vector<std::complex<float>> oracle_dpd(std::span<const std::complex<float>> input,
                                            const TapSet& taps,
                                            const std::vector<ConfigToken>& schedule,
                                            std::uint32_t period);

/// Schedule file: one entry per line, either "k" (branches 1..k) or
/// "k: i1,i2,...,ik" naming the active branches. Blank lines and
/// '#' comments are skipped. Entries outside [2,10] are rejected.
std::vector<ConfigToken> parse_schedule(std::istream& in);

/// Taps file: one branch per line, 10 complex taps as "re,im" pairs
/// separated by whitespace.
TapSet parse_taps(std::istream& in);

std::vector<ConfigToken> random_schedule(std::size_t entries, std::uint64_t seed);
TapSet random_taps(std::uint64_t seed);
std::vector<std::complex<float>> synth_samples(std::uint64_t samples, std::uint64_t seed);

}  // namespace dynflow::dpd
