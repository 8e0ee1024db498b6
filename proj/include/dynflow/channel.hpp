#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "dynflow/model.hpp"

namespace dynflow {

/// Token capacity of a channel buffer: 3r + 1 slots when the channel
/// carries a delay token, 2r otherwise.
std::size_t capacity_tokens(const ChannelSpec& spec);

/// Buffer size in bytes: capacity_tokens * token_size.
std::size_t capacity_bytes(const ChannelSpec& spec);

/// A contiguous run of token slots inside a channel buffer.
struct SlotRange {
  std::size_t first_slot = 0;
  std::size_t tokens = 0;

  bool operator==(const SlotRange&) const = default;
};

/// Slot range written in the given phase. Delay channels cycle through
/// phases 0..2 writing slots [p*r+1, p*r+r]; regular channels alternate
/// halves, phase parity selecting slots [(p%2)*r, (p%2)*r + r - 1].
SlotRange write_region(const ChannelSpec& spec, unsigned phase);

/// Slot range read in the given phase. Delay channels read slots
/// [p*r, p*r + r - 1] (the delay token sits in slot 0 at phase 0);
/// regular channels alternate halves exactly like writes.
SlotRange read_region(const ChannelSpec& spec, unsigned phase);

enum class RegionDirection { read, write };

/// Exclusive claim on a contiguous region of channel storage, returned
/// by a start call and surrendered by the matching end call. Owned by
/// the acquiring actor; never wraps around the buffer end.
struct RegionHandle {
  std::size_t first_slot = 0;
  std::size_t tokens = 0;
  RegionDirection direction = RegionDirection::read;
  std::span<std::byte> bytes;

  bool active() const { return serial != 0; }

  // Matches the handle to the channel's outstanding operation.
  std::uint64_t serial = 0;
};

/// Thrown by blocked channel operations when the run is torn down after
/// an actor fault.
class RunAborted : public std::runtime_error {
public:
  RunAborted() : std::runtime_error("run aborted") {}
};

/// Bounded FIFO channel between one producer and one consumer actor.
///
/// Regular channels are double buffers of 2r tokens; channels with a
/// delay token use the 3r+1-slot layout whose write phase 2 ends with a
/// copy of slot 3r into slot 0, keeping every transfer contiguous.
/// Start calls block the calling thread until the transfer is possible.
/// Safe for exactly one concurrent producer and one concurrent consumer.
class Channel {
public:
  explicit Channel(ChannelSpec spec);

  Channel(const Channel&) = delete;
  Channel& operator=(const Channel&) = delete;

  const ChannelSpec& spec() const { return spec_; }
  std::size_t capacity_tokens() const { return capacity_tokens_; }

  /// Claims a writable region of exactly n == token_rate tokens,
  /// blocking until enough slots are free.
  RegionHandle write_start(std::size_t n);

  /// Commits the outstanding write: tokens become visible to the
  /// reader. On a delay channel ending phase 2 this first copies slot
  /// 3r into slot 0.
  void write_end(RegionHandle& handle);

  /// Claims a readable region of exactly n == token_rate tokens in FIFO
  /// order, blocking until enough tokens are committed. Returns nullopt
  /// once the channel is closed and fewer than n tokens remain.
  std::optional<RegionHandle> read_start(std::size_t n);

  /// Releases the outstanding read's slots back to the writer.
  void read_end(RegionHandle& handle);

  /// Producer-side end of stream: no further writes are allowed and a
  /// reader that can no longer be satisfied observes end of stream.
  void close();
  bool closed() const;

  /// Tears the channel down after a fault; every blocked or future
  /// start call throws RunAborted.
  void abort();

  /// Committed tokens not yet released by a read_end.
  std::size_t tokens_available() const;

  std::uint64_t tokens_written() const;
  std::uint64_t tokens_read() const;

private:
  std::size_t distinct_capacity() const;  // write-side accounting limit
  std::span<std::byte> slot_bytes(const SlotRange& range);

  ChannelSpec spec_;
  std::size_t capacity_tokens_ = 0;
  std::vector<std::byte> storage_;

  mutable std::mutex mutex_;
  std::condition_variable readable_;
  std::condition_variable writable_;

  std::size_t available_ = 0;  // committed tokens, including those under read
  unsigned write_phase_ = 0;
  unsigned read_phase_ = 0;
  std::uint64_t write_serial_ = 0;  // nonzero while a write is outstanding
  std::uint64_t read_serial_ = 0;
  std::uint64_t next_serial_ = 1;
  std::uint64_t written_ = 0;
  std::uint64_t read_ = 0;
  bool closed_ = false;
  bool aborted_ = false;
};

/// Per-channel and total buffer memory of a network, per the capacity
/// rule above.
struct MemoryReport {
  struct Line {
    std::string channel_id;
    std::uint32_t token_rate = 0;
    std::size_t token_size = 0;
    bool has_delay = false;
    std::size_t capacity_tokens = 0;
    std::size_t capacity_bytes = 0;
  };
  std::vector<Line> channels;
  std::size_t total_bytes = 0;
};

MemoryReport memory_bytes(const NetworkGraph& net);

}  // namespace dynflow
