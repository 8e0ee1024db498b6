#include "dynflow/channel.hpp"

#include <cstring>
#include <stdexcept>
#include <string>

namespace dynflow {

std::size_t capacity_tokens(const ChannelSpec& spec) {
  const std::size_t r = spec.token_rate;
  return spec.has_delay ? r * 3 + 1 : r * 2;
}

std::size_t capacity_bytes(const ChannelSpec& spec) {
  return capacity_tokens(spec) * spec.token_size;
}

SlotRange write_region(const ChannelSpec& spec, unsigned phase) {
  const std::size_t r = spec.token_rate;
  if (spec.has_delay) {
    return SlotRange{static_cast<std::size_t>(phase % 3) * r + 1, r};
  }
  return SlotRange{static_cast<std::size_t>(phase % 2) * r, r};
}

SlotRange read_region(const ChannelSpec& spec, unsigned phase) {
  const std::size_t r = spec.token_rate;
  if (spec.has_delay) {
    return SlotRange{static_cast<std::size_t>(phase % 3) * r, r};
  }
  return SlotRange{static_cast<std::size_t>(phase % 2) * r, r};
}

Channel::Channel(ChannelSpec spec)
    : spec_(std::move(spec)),
      capacity_tokens_(dynflow::capacity_tokens(spec_)),
      storage_(capacity_bytes(spec_)) {
  if (spec_.token_rate < 1 || spec_.token_size < 1) {
    throw std::invalid_argument("channel '" + spec_.id + "': token_rate and token_size must be >= 1");
  }
  if (spec_.has_delay) {
    // The initial token occupies slot 0 before any firing.
    if (!spec_.initial_token_value.empty()) {
      if (spec_.initial_token_value.size() != spec_.token_size) {
        throw std::invalid_argument("channel '" + spec_.id + "': initial token payload size mismatch");
      }
      std::memcpy(storage_.data(), spec_.initial_token_value.data(), spec_.token_size);
    }
    available_ = 1;
  }
}

std::size_t Channel::distinct_capacity() const {
  // A delay buffer has 3r+1 slots but slot 0 only ever holds the copy of
  // slot 3r, so at most 3r distinct tokens are in flight.
  return spec_.has_delay ? spec_.token_rate * 3 : spec_.token_rate * 2;
}

std::span<std::byte> Channel::slot_bytes(const SlotRange& range) {
  return {storage_.data() + range.first_slot * spec_.token_size, range.tokens * spec_.token_size};
}

RegionHandle Channel::write_start(std::size_t n) {
  std::unique_lock lock(mutex_);
  if (n != spec_.token_rate) {
    throw std::logic_error("channel '" + spec_.id + "': write of " + std::to_string(n) +
                           " tokens, rate is " + std::to_string(spec_.token_rate));
  }
  if (write_serial_ != 0) {
    throw std::logic_error("channel '" + spec_.id + "': write already outstanding");
  }
  if (closed_) {
    throw std::logic_error("channel '" + spec_.id + "': write after close");
  }
  writable_.wait(lock, [&] { return aborted_ || available_ + n <= distinct_capacity(); });
  if (aborted_) {
    throw RunAborted();
  }

  const SlotRange range = write_region(spec_, write_phase_);
  RegionHandle handle;
  handle.first_slot = range.first_slot;
  handle.tokens = range.tokens;
  handle.direction = RegionDirection::write;
  handle.bytes = slot_bytes(range);
  handle.serial = next_serial_++;
  write_serial_ = handle.serial;
  return handle;
}

void Channel::write_end(RegionHandle& handle) {
  std::unique_lock lock(mutex_);
  if (handle.direction != RegionDirection::write || handle.serial == 0 ||
      handle.serial != write_serial_) {
    throw std::logic_error("channel '" + spec_.id + "': write_end without matching write_start");
  }
  if (spec_.has_delay && write_phase_ == 2) {
    // Third write of the cycle reached the last slot; duplicate it into
    // slot 0 so the next phase-0 read stays contiguous. Slot 0 is free
    // here: the phase-0 read released it before this write could claim
    // space.
    const std::size_t r = spec_.token_rate;
    std::memcpy(storage_.data(), storage_.data() + 3 * r * spec_.token_size, spec_.token_size);
  }
  write_phase_ = (write_phase_ + 1) % (spec_.has_delay ? 3 : 2);
  available_ += handle.tokens;
  written_ += handle.tokens;
  write_serial_ = 0;
  handle.serial = 0;
  lock.unlock();
  readable_.notify_all();
}

std::optional<RegionHandle> Channel::read_start(std::size_t n) {
  std::unique_lock lock(mutex_);
  if (n != spec_.token_rate) {
    throw std::logic_error("channel '" + spec_.id + "': read of " + std::to_string(n) +
                           " tokens, rate is " + std::to_string(spec_.token_rate));
  }
  if (read_serial_ != 0) {
    throw std::logic_error("channel '" + spec_.id + "': read already outstanding");
  }
  readable_.wait(lock, [&] { return aborted_ || available_ >= n || closed_; });
  if (aborted_) {
    throw RunAborted();
  }
  if (available_ < n) {
    return std::nullopt;  // closed and drained: end of stream
  }

  const SlotRange range = read_region(spec_, read_phase_);
  RegionHandle handle;
  handle.first_slot = range.first_slot;
  handle.tokens = range.tokens;
  handle.direction = RegionDirection::read;
  handle.bytes = slot_bytes(range);
  handle.serial = next_serial_++;
  read_serial_ = handle.serial;
  return handle;
}

void Channel::read_end(RegionHandle& handle) {
  std::unique_lock lock(mutex_);
  if (handle.direction != RegionDirection::read || handle.serial == 0 ||
      handle.serial != read_serial_) {
    throw std::logic_error("channel '" + spec_.id + "': read_end without matching read_start");
  }
  read_phase_ = (read_phase_ + 1) % (spec_.has_delay ? 3 : 2);
  available_ -= handle.tokens;
  read_ += handle.tokens;
  read_serial_ = 0;
  handle.serial = 0;
  lock.unlock();
  writable_.notify_all();
}

void Channel::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  readable_.notify_all();
}

bool Channel::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

void Channel::abort() {
  {
    std::lock_guard lock(mutex_);
    aborted_ = true;
  }
  readable_.notify_all();
  writable_.notify_all();
}

std::size_t Channel::tokens_available() const {
  std::lock_guard lock(mutex_);
  return available_;
}

std::uint64_t Channel::tokens_written() const {
  std::lock_guard lock(mutex_);
  return written_;
}

std::uint64_t Channel::tokens_read() const {
  std::lock_guard lock(mutex_);
  return read_;
}

MemoryReport memory_bytes(const NetworkGraph& net) {
  MemoryReport report;
  for (const ChannelSpec& spec : net.channels()) {
    MemoryReport::Line line;
    line.channel_id = spec.id;
    line.token_rate = spec.token_rate;
    line.token_size = spec.token_size;
    line.has_delay = spec.has_delay;
    line.capacity_tokens = capacity_tokens(spec);
    line.capacity_bytes = capacity_bytes(spec);
    report.total_bytes += line.capacity_bytes;
    report.channels.push_back(std::move(line));
  }
  return report;
}

}  // namespace dynflow
