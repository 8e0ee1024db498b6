#include "dynflow/runtime.hpp"

#include <cstring>
#include <latch>
#include <memory>
#include <sstream>
#include <thread>

#ifdef __linux__
#include <pthread.h>
#include <sched.h>
#endif

namespace dynflow {

namespace {

struct PortBinding {
  Channel* channel = nullptr;
  std::uint32_t rate = 1;
  std::size_t token_size = 0;
};

// Maps entry k of a FiringRates vector onto the actor's input or output
// binding list.
struct RateSlot {
  bool is_input = false;
  std::size_t pos = 0;
};

struct ActorRun {
  const ActorSpec* spec = nullptr;
  std::size_t actor_index = 0;
  std::vector<PortBinding> inputs;   // regular inputs, declaration order
  std::vector<PortBinding> outputs;  // regular outputs, declaration order
  std::vector<RateSlot> rate_slots;  // one per regular port
  Channel* control = nullptr;
  bool is_source = false;
  std::optional<unsigned> core;

  std::uint64_t firings = 0;
  std::chrono::steady_clock::time_point first_fire{};
  std::chrono::steady_clock::time_point stopped{};
};

class Run {
public:
  Run(const NetworkGraph& net, const ExecutionConfig& cfg) : net_(net), cfg_(cfg) {}

  RunStats execute();

private:
  void resolve(RunStats& stats);
  void actor_main(ActorRun& ar);
  bool fire_once(ActorRun& ar, FiringContext& ctx, std::vector<RegionHandle>& in_handles,
                 std::vector<RegionHandle>& out_handles);
  void record_fault(const std::string& actor_id, const std::string& what);
  void abort_all();

  const NetworkGraph& net_;
  const ExecutionConfig& cfg_;
  std::vector<std::unique_ptr<Channel>> channels_;
  std::vector<ActorRun> actors_;
  std::unique_ptr<std::latch> start_latch_;

  std::mutex fault_mutex_;
  std::optional<ActorFault> fault_;
};

void Run::resolve(RunStats& stats) {
  channels_.reserve(net_.channels().size());
  for (const ChannelSpec& spec : net_.channels()) {
    channels_.push_back(std::make_unique<Channel>(spec));
  }

  const unsigned cores = std::max(1u, std::thread::hardware_concurrency());
  actors_.resize(net_.actors().size());
  for (std::size_t a = 0; a < net_.actors().size(); ++a) {
    const ActorSpec& spec = net_.actors()[a];
    ActorRun& ar = actors_[a];
    ar.spec = &spec;
    ar.actor_index = a;

    bool has_input = false;
    for (std::size_t p : net_.regular_ports(a)) {
      const PortSpec& port = spec.ports[p];
      const std::size_t c = net_.channel_index(port.channel_id);
      PortBinding binding{channels_[c].get(), net_.channels()[c].token_rate,
                          net_.channels()[c].token_size};
      if (port.direction == PortDirection::input) {
        ar.rate_slots.push_back({true, ar.inputs.size()});
        ar.inputs.push_back(binding);
        has_input = true;
      } else {
        ar.rate_slots.push_back({false, ar.outputs.size()});
        ar.outputs.push_back(binding);
      }
    }
    if (auto cp = net_.control_port(a)) {
      ar.control = channels_[net_.channel_index(spec.ports[*cp].channel_id)].get();
      has_input = true;
    }
    ar.is_source = !has_input;

    if (cfg_.mapping == MappingMode::fixed) {
      std::optional<unsigned> core;
      if (auto it = cfg_.pins.find(spec.id); it != cfg_.pins.end()) {
        core = it->second;
      } else if (spec.mapping_hint) {
        core = spec.mapping_hint;
      }
      if (core && *core >= cores) {
        stats.warnings.push_back("actor '" + spec.id + "': core " + std::to_string(*core) +
                                 " out of range (" + std::to_string(cores) +
                                 " cores), using free mapping");
        core.reset();
      }
      ar.core = core;
    }
  }
}

void Run::record_fault(const std::string& actor_id, const std::string& what) {
  std::lock_guard lock(fault_mutex_);
  if (!fault_) fault_.emplace(actor_id, what);
}

void Run::abort_all() {
  for (auto& ch : channels_) ch->abort();
}

bool Run::fire_once(ActorRun& ar, FiringContext& ctx, std::vector<RegionHandle>& in_handles,
                    std::vector<RegionHandle>& out_handles) {
  ctx.reset(ar.firings);

  // Rates are fixed for the duration of this firing: a dynamic actor
  // learns them from one control token before touching regular ports.
  FiringRates rates;
  if (ar.control) {
    auto handle = ar.control->read_start(1);
    if (!handle) return false;
    rates = control_dispatch(net_, ar.actor_index,
                             {handle->bytes.data(), handle->bytes.size()});
    ar.control->read_end(*handle);
  } else {
    rates.by_regular_port.reserve(ar.rate_slots.size());
    for (const RateSlot& slot : ar.rate_slots) {
      rates.by_regular_port.push_back(slot.is_input ? ar.inputs[slot.pos].rate
                                                    : ar.outputs[slot.pos].rate);
    }
  }

  for (std::size_t k = 0; k < ar.rate_slots.size(); ++k) {
    const RateSlot& slot = ar.rate_slots[k];
    if (!slot.is_input) continue;
    PortBinding& in = ar.inputs[slot.pos];
    const std::uint32_t rate = rates.by_regular_port[k];
    if (rate == 0) {
      in_handles[slot.pos] = RegionHandle{};
      ctx.add_input({}, in.token_size, 0);
      continue;
    }
    auto handle = in.channel->read_start(rate);
    if (!handle) return false;
    in_handles[slot.pos] = *handle;
    ctx.add_input(handle->bytes, in.token_size, rate);
  }
  for (std::size_t k = 0; k < ar.rate_slots.size(); ++k) {
    const RateSlot& slot = ar.rate_slots[k];
    if (slot.is_input) continue;
    PortBinding& out = ar.outputs[slot.pos];
    const std::uint32_t rate = rates.by_regular_port[k];
    if (rate == 0) {
      out_handles[slot.pos] = RegionHandle{};
      ctx.add_output({}, out.token_size, 0);
      continue;
    }
    out_handles[slot.pos] = out.channel->write_start(rate);
    ctx.add_output(out_handles[slot.pos].bytes, out.token_size, rate);
  }

  if (ar.firings == 0) ar.first_fire = std::chrono::steady_clock::now();
  ar.spec->behavior.fire(ctx);

  for (std::size_t o = 0; o < ar.outputs.size(); ++o) {
    if (out_handles[o].active()) ar.outputs[o].channel->write_end(out_handles[o]);
  }
  for (std::size_t i = 0; i < ar.inputs.size(); ++i) {
    if (in_handles[i].active()) ar.inputs[i].channel->read_end(in_handles[i]);
  }
  ++ar.firings;
  return true;
}

// After an actor stops it keeps consuming (and discarding) whatever its
// producers still commit, until they close. Without this an upstream
// actor can stay blocked on a full channel whose consumer has already
// observed end of stream elsewhere and left.
void drain_channel(Channel& ch) {
  const std::size_t r = ch.spec().token_rate;
  while (auto handle = ch.read_start(r)) {
    ch.read_end(*handle);
  }
}

void Run::actor_main(ActorRun& ar) {
  start_latch_->arrive_and_wait();

  FiringContext ctx;
  std::vector<RegionHandle> in_handles(ar.inputs.size());
  std::vector<RegionHandle> out_handles(ar.outputs.size());
  bool faulted = false;

  try {
    if (ar.spec->behavior.init) ar.spec->behavior.init();
    for (;;) {
      if (ar.is_source && cfg_.source_firing_limit && ar.firings >= *cfg_.source_firing_limit) {
        break;
      }
      if (!fire_once(ar, ctx, in_handles, out_handles)) break;
    }
    ar.stopped = std::chrono::steady_clock::now();

    for (PortBinding& out : ar.outputs) out.channel->close();
    for (RegionHandle& h : in_handles) {
      if (h.active()) ar.inputs[&h - in_handles.data()].channel->read_end(h);
    }
    for (PortBinding& in : ar.inputs) drain_channel(*in.channel);
    if (ar.control) drain_channel(*ar.control);

    if (ar.spec->behavior.finish) ar.spec->behavior.finish();
  } catch (const RunAborted&) {
    faulted = true;  // collateral of another actor's fault
  } catch (const std::exception& e) {
    record_fault(ar.spec->id, e.what());
    abort_all();
    faulted = true;
  } catch (...) {
    record_fault(ar.spec->id, "unknown exception");
    abort_all();
    faulted = true;
  }

  if (faulted) {
    ar.stopped = std::chrono::steady_clock::now();
    for (PortBinding& out : ar.outputs) out.channel->close();
  }
}

RunStats Run::execute() {
  RunStats stats;
  resolve(stats);

  const auto t0 = std::chrono::steady_clock::now();
  start_latch_ = std::make_unique<std::latch>(static_cast<std::ptrdiff_t>(actors_.size()) + 1);

  std::vector<std::jthread> threads;
  threads.reserve(actors_.size());
  for (ActorRun& ar : actors_) {
    threads.emplace_back([this, &ar] { actor_main(ar); });
#ifdef __linux__
    if (ar.core) {
      cpu_set_t set;
      CPU_ZERO(&set);
      CPU_SET(*ar.core, &set);
      if (pthread_setaffinity_np(threads.back().native_handle(), sizeof(set), &set) != 0) {
        stats.warnings.push_back("actor '" + ar.spec->id + "': pinning to core " +
                                 std::to_string(*ar.core) + " failed, using free mapping");
      }
    }
#else
    if (ar.core) {
      stats.warnings.push_back("actor '" + ar.spec->id +
                               "': core pinning unsupported on this platform, using free mapping");
    }
#endif
  }

  // Every execution unit exists before any actor fires.
  start_latch_->arrive_and_wait();
  for (auto& t : threads) t.join();
  stats.wall = std::chrono::steady_clock::now() - t0;

  {
    std::lock_guard lock(fault_mutex_);
    if (fault_) throw *fault_;
  }

  for (const ActorRun& ar : actors_) {
    stats.actors.push_back({ar.spec->id, ar.firings, ar.first_fire, ar.stopped});
  }
  if (cfg_.stats_enabled) {
    for (std::size_t c = 0; c < channels_.size(); ++c) {
      stats.channels.push_back({net_.channels()[c].id, channels_[c]->tokens_written(),
                                channels_[c]->tokens_read(), channels_[c]->tokens_available()});
    }
  }
  return stats;
}

}  // namespace

void pin_actor(ExecutionConfig& cfg, const NetworkGraph& net, std::string_view actor_id,
               unsigned core_index) {
  net.actor_index(actor_id);  // throws on unknown id
  cfg.pins[std::string(actor_id)] = core_index;
}

const RunStats::ActorStats& RunStats::actor(std::string_view id) const {
  for (const ActorStats& a : actors) {
    if (a.id == id) return a;
  }
  throw std::out_of_range("no stats for actor '" + std::string(id) + "'");
}

double RunStats::active_seconds(std::string_view id) const {
  const ActorStats& a = actor(id);
  if (a.firings == 0) return 0.0;
  return std::chrono::duration<double>(a.stopped - a.first_fire).count();
}

RunStats run(const NetworkGraph& net, const ExecutionConfig& cfg) {
  std::vector<Violation> violations = validate(net);
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << "network failed validation:";
    for (const Violation& v : violations) msg << "\n  " << v.subject << ": " << v.message;
    throw ValidationError(msg.str(), std::move(violations));
  }
  Run r(net, cfg);
  return r.execute();
}

ActorBehavior bulk_kernel_adapter(BatchKernel kernel) {
  ActorBehavior behavior;
  behavior.fire = [kernel = std::move(kernel)](FiringContext& ctx) {
    std::vector<std::span<const std::byte>> inputs;
    inputs.reserve(ctx.input_count());
    for (std::size_t i = 0; i < ctx.input_count(); ++i) inputs.push_back(ctx.input(i));

    std::vector<std::vector<std::byte>> produced = kernel(inputs);
    if (produced.size() != ctx.output_count()) {
      throw std::runtime_error("bulk kernel produced " + std::to_string(produced.size()) +
                               " arrays for " + std::to_string(ctx.output_count()) + " ports");
    }
    for (std::size_t o = 0; o < produced.size(); ++o) {
      auto region = ctx.output(o);
      if (produced[o].size() != region.size()) {
        throw std::runtime_error("bulk kernel output " + std::to_string(o) + " is " +
                                 std::to_string(produced[o].size()) + " bytes, region is " +
                                 std::to_string(region.size()));
      }
      std::memcpy(region.data(), produced[o].data(), produced[o].size());
    }
  };
  return behavior;
}

}  // namespace dynflow
