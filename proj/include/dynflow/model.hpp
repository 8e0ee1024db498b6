#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dynflow {

enum class PortDirection { input, output };
enum class PortKind { regular, control };
enum class ActorKind { static_rate, dynamic_rate };

/// One port of an actor. A port is attached to exactly one channel and
/// inherits that channel's token rate. Control ports are input-only and
/// always transfer one token per firing.
struct PortSpec {
  PortDirection direction = PortDirection::input;
  PortKind kind = PortKind::regular;
  std::string channel_id;
};

/// Static description of a FIFO channel. `token_rate` is the number of
/// tokens transferred per firing on both endpoints; `has_delay` marks a
/// channel that holds one initial token before any actor has fired.
/// An empty `initial_token_value` means the initial token is all zeros.
struct ChannelSpec {
  std::string id;
  std::size_t token_size = 1;
  std::uint32_t token_rate = 1;
  bool has_delay = false;
  std::vector<std::byte> initial_token_value;
};

/// Per-firing port access handed to an actor's fire function. Ports are
/// indexed by declaration order within their direction (regular ports
/// only; the control port is consumed by the runtime before fire runs).
/// A port gated to rate 0 for this firing yields an empty region.
class FiringContext {
public:
  struct Region {
    std::span<std::byte> bytes;
    std::size_t token_size = 0;
    std::size_t tokens = 0;
  };

  std::size_t input_count() const { return inputs_.size(); }
  std::size_t output_count() const { return outputs_.size(); }

  std::span<const std::byte> input(std::size_t i) const { return inputs_.at(i).bytes; }
  std::span<std::byte> output(std::size_t i) const { return outputs_.at(i).bytes; }

  std::size_t input_tokens(std::size_t i) const { return inputs_.at(i).tokens; }
  std::size_t output_tokens(std::size_t i) const { return outputs_.at(i).tokens; }

  std::size_t input_token_size(std::size_t i) const { return inputs_.at(i).token_size; }
  std::size_t output_token_size(std::size_t i) const { return outputs_.at(i).token_size; }

  /// Index of this firing within the actor's lifetime, starting at 0.
  std::uint64_t firing_index() const { return firing_index_; }

  // Assembled by the runtime (and by adapter tests) before each firing.
  void reset(std::uint64_t firing_index) {
    inputs_.clear();
    outputs_.clear();
    firing_index_ = firing_index;
  }
  void add_input(std::span<std::byte> bytes, std::size_t token_size, std::size_t tokens) {
    inputs_.push_back(Region{bytes, token_size, tokens});
  }
  void add_output(std::span<std::byte> bytes, std::size_t token_size, std::size_t tokens) {
    outputs_.push_back(Region{bytes, token_size, tokens});
  }

private:
  std::vector<Region> inputs_;
  std::vector<Region> outputs_;
  std::uint64_t firing_index_ = 0;
};

/// Token rates chosen for one firing of a dynamic actor. Entry i belongs
/// to the actor's i-th regular port in declaration order and must be
/// either 0 or the token rate of the attached channel. The control port
/// has no entry; its rate is always 1.
struct FiringRates {
  std::vector<std::uint32_t> by_regular_port;

  static FiringRates uniform(std::size_t port_count, std::uint32_t rate) {
    FiringRates r;
    r.by_regular_port.assign(port_count, rate);
    return r;
  }
};

/// Behavior bundle backing an actor: the mandatory fire function plus
/// optional init, control and finish. `control` is required for dynamic
/// actors; it maps one control token value to the rates of the regular
/// ports and must not perform channel I/O of its own.
struct ActorBehavior {
  std::function<void(FiringContext&)> fire;
  std::function<void()> init;
  std::function<FiringRates(std::span<const std::byte>)> control;
  std::function<void()> finish;
};

struct ActorSpec {
  std::string id;
  ActorKind kind = ActorKind::static_rate;
  std::vector<PortSpec> ports;
  ActorBehavior behavior;
  std::optional<unsigned> mapping_hint;
};

/// Resolved endpoints of one channel within a network.
struct ChannelEndpoints {
  std::size_t producer_actor = npos;
  std::size_t producer_port = npos;
  std::size_t consumer_actor = npos;
  std::size_t consumer_port = npos;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

class BuildError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ControlError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// One rule violation found by validate(). Violations are collected and
/// returned rather than thrown so a caller can print a full diagnosis.
struct Violation {
  std::string subject;
  std::string message;

  bool operator==(const Violation&) const = default;
};

/// An actor network: actors, channels and the resolved port-to-channel
/// wiring. Immutable once built; safe to share read-only across threads.
class NetworkGraph {
public:
  const std::vector<ActorSpec>& actors() const { return actors_; }
  const std::vector<ChannelSpec>& channels() const { return channels_; }
  const std::vector<ChannelEndpoints>& endpoints() const { return endpoints_; }

  std::size_t actor_index(std::string_view id) const;
  std::size_t channel_index(std::string_view id) const;

  const ChannelSpec& channel(std::string_view id) const { return channels_[channel_index(id)]; }

  /// Positions (within ActorSpec::ports) of the actor's regular ports,
  /// declaration order. This is the port order FiringRates refers to.
  std::vector<std::size_t> regular_ports(std::size_t actor) const;
  /// Position of the actor's control port, if it has exactly one.
  std::optional<std::size_t> control_port(std::size_t actor) const;

  friend NetworkGraph build_network(std::vector<ActorSpec> actors,
                                    std::vector<ChannelSpec> channels);

private:
  std::vector<ActorSpec> actors_;
  std::vector<ChannelSpec> channels_;
  std::vector<ChannelEndpoints> endpoints_;
};

/// Assembles a network from actor and channel specs, resolving the
/// port wiring. Throws BuildError on structural defects: duplicate ids,
/// ports naming unknown channels, channels with a missing or duplicated
/// endpoint. Rule checking beyond structure is validate()'s job.
NetworkGraph build_network(std::vector<ActorSpec> actors, std::vector<ChannelSpec> channels);

/// Checks every model rule and returns the complete list of violations
/// (empty means the network is runnable). Pure: the same graph always
/// yields the same list, ordered by channel id, then actor id, then
/// structural findings.
std::vector<Violation> validate(const NetworkGraph& net);

/// Runs the actor's control function on one control token value and
/// checks the result: one entry per regular port, each 0 or the rate of
/// the attached channel. Throws ControlError on a malformed vector.
FiringRates control_dispatch(const NetworkGraph& net, std::size_t actor,
                             std::span<const std::byte> control_token);

}  // namespace dynflow
