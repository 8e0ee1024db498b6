#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dynflow/channel.hpp"
#include "dynflow/model.hpp"

namespace dynflow {

enum class MappingMode { free, fixed };

/// Execution parameters for one run. With fixed mapping, actors named
/// in `pins` (or carrying a mapping_hint) are pinned to those cores and
/// the rest are left free; with free mapping placement is entirely up
/// to the OS scheduler.
struct ExecutionConfig {
  MappingMode mapping = MappingMode::free;
  std::map<std::string, unsigned> pins;
  std::optional<std::uint64_t> source_firing_limit;
  bool stats_enabled = true;
};

/// Records a pin request for one actor. Must be called before run().
/// Throws BuildError if the actor id does not exist in the network.
void pin_actor(ExecutionConfig& cfg, const NetworkGraph& net, std::string_view actor_id,
               unsigned core_index);

struct RunStats {
  struct ActorStats {
    std::string id;
    std::uint64_t firings = 0;
    // Steady-state window: from just before the first fire call to the
    // moment the actor stopped firing.
    std::chrono::steady_clock::time_point first_fire{};
    std::chrono::steady_clock::time_point stopped{};
  };
  struct ChannelStats {
    std::string id;
    std::uint64_t tokens_written = 0;
    std::uint64_t tokens_read = 0;
    std::uint64_t tokens_residual = 0;  // committed but never consumed
  };

  std::vector<ActorStats> actors;
  std::vector<ChannelStats> channels;
  std::chrono::nanoseconds wall{0};
  std::vector<std::string> warnings;

  const ActorStats& actor(std::string_view id) const;
  std::uint64_t firings(std::string_view id) const { return actor(id).firings; }

  /// Seconds between an actor's first firing and its end of stream;
  /// the steady-state window used for throughput reporting.
  double active_seconds(std::string_view id) const;
};

/// An actor raised an exception during the run.
class ActorFault : public std::runtime_error {
public:
  ActorFault(std::string actor_id, const std::string& what)
      : std::runtime_error("actor '" + actor_id + "' faulted: " + what),
        actor_id_(std::move(actor_id)) {}

  const std::string& actor_id() const { return actor_id_; }

private:
  std::string actor_id_;
};

/// A network failed validation on entry to run().
class ValidationError : public std::runtime_error {
public:
  ValidationError(std::string what, std::vector<Violation> violations)
      : std::runtime_error(std::move(what)), violations_(std::move(violations)) {}

  const std::vector<Violation>& violations() const { return violations_; }

private:
  std::vector<Violation> violations_;
};

/// Executes a validated network to completion: one OS thread per actor,
/// created up front and retired before return. Each actor runs init
/// once, then fires as data permits (dynamic actors consume one control
/// token per firing before their rates are known), and runs finish once
/// after its end of stream. Source actors stop after
/// cfg.source_firing_limit firings and end of stream propagates
/// downstream, draining every committed token.
RunStats run(const NetworkGraph& net, const ExecutionConfig& cfg);

/// Batch function mirroring a device-kernel invocation: one contiguous
/// input array per regular input port, one produced array per regular
/// output port.
using BatchKernel = std::function<std::vector<std::vector<std::byte>>(
    const std::vector<std::span<const std::byte>>&)>;

/// Wraps a batch kernel as an actor behavior whose fire hands the
/// kernel whole r-token regions. For a token-wise kernel this is
/// behaviorally identical to firing it r times at rate 1. The kernel
/// must return one array per output port, sized exactly to the region;
/// anything else faults the actor.
ActorBehavior bulk_kernel_adapter(BatchKernel kernel);

}  // namespace dynflow
