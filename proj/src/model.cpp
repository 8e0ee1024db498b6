#include "dynflow/model.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace dynflow {

std::size_t NetworkGraph::actor_index(std::string_view id) const {
  for (std::size_t i = 0; i < actors_.size(); ++i) {
    if (actors_[i].id == id) return i;
  }
  throw BuildError("unknown actor id '" + std::string(id) + "'");
}

std::size_t NetworkGraph::channel_index(std::string_view id) const {
  for (std::size_t i = 0; i < channels_.size(); ++i) {
    if (channels_[i].id == id) return i;
  }
  throw BuildError("unknown channel id '" + std::string(id) + "'");
}

std::vector<std::size_t> NetworkGraph::regular_ports(std::size_t actor) const {
  std::vector<std::size_t> out;
  const auto& ports = actors_.at(actor).ports;
  for (std::size_t p = 0; p < ports.size(); ++p) {
    if (ports[p].kind == PortKind::regular) out.push_back(p);
  }
  return out;
}

std::optional<std::size_t> NetworkGraph::control_port(std::size_t actor) const {
  std::optional<std::size_t> found;
  const auto& ports = actors_.at(actor).ports;
  for (std::size_t p = 0; p < ports.size(); ++p) {
    if (ports[p].kind == PortKind::control) {
      if (found) return std::nullopt;  // more than one: not a usable control port
      found = p;
    }
  }
  return found;
}

NetworkGraph build_network(std::vector<ActorSpec> actors, std::vector<ChannelSpec> channels) {
  NetworkGraph net;
  net.actors_ = std::move(actors);
  net.channels_ = std::move(channels);

  std::map<std::string, std::size_t> channel_by_id;
  for (std::size_t c = 0; c < net.channels_.size(); ++c) {
    const auto& id = net.channels_[c].id;
    if (id.empty()) throw BuildError("channel with empty id");
    if (!channel_by_id.emplace(id, c).second) {
      throw BuildError("duplicate channel id '" + id + "'");
    }
  }
  std::set<std::string> actor_ids;
  for (const auto& actor : net.actors_) {
    if (actor.id.empty()) throw BuildError("actor with empty id");
    if (!actor_ids.insert(actor.id).second) {
      throw BuildError("duplicate actor id '" + actor.id + "'");
    }
  }

  net.endpoints_.resize(net.channels_.size());
  for (std::size_t a = 0; a < net.actors_.size(); ++a) {
    const auto& actor = net.actors_[a];
    for (std::size_t p = 0; p < actor.ports.size(); ++p) {
      const PortSpec& port = actor.ports[p];
      auto it = channel_by_id.find(port.channel_id);
      if (it == channel_by_id.end()) {
        throw BuildError("actor '" + actor.id + "' port " + std::to_string(p) +
                         " references unknown channel '" + port.channel_id + "'");
      }
      ChannelEndpoints& ep = net.endpoints_[it->second];
      if (port.direction == PortDirection::output) {
        if (ep.producer_actor != ChannelEndpoints::npos) {
          throw BuildError("channel '" + port.channel_id + "' has more than one producer port");
        }
        ep.producer_actor = a;
        ep.producer_port = p;
      } else {
        if (ep.consumer_actor != ChannelEndpoints::npos) {
          throw BuildError("channel '" + port.channel_id + "' has more than one consumer port");
        }
        ep.consumer_actor = a;
        ep.consumer_port = p;
      }
    }
  }
  for (std::size_t c = 0; c < net.channels_.size(); ++c) {
    const ChannelEndpoints& ep = net.endpoints_[c];
    if (ep.producer_actor == ChannelEndpoints::npos) {
      throw BuildError("channel '" + net.channels_[c].id + "' has no producer port attached");
    }
    if (ep.consumer_actor == ChannelEndpoints::npos) {
      throw BuildError("channel '" + net.channels_[c].id + "' has no consumer port attached");
    }
  }
  return net;
}

namespace {

// Channel ids ordered, then actor ids, then network-level findings;
// keeps validate() output stable for identical graphs.
void check_channels(const NetworkGraph& net, std::vector<Violation>& out) {
  std::vector<std::size_t> order(net.channels().size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return net.channels()[a].id < net.channels()[b].id;
  });

  for (std::size_t c : order) {
    const ChannelSpec& spec = net.channels()[c];
    const ChannelEndpoints& ep = net.endpoints()[c];
    if (spec.token_rate < 1) {
      out.push_back({spec.id, "token rate must be >= 1"});
    }
    if (spec.token_size < 1) {
      out.push_back({spec.id, "token size must be >= 1"});
    }
    if (!spec.initial_token_value.empty()) {
      if (!spec.has_delay) {
        out.push_back({spec.id, "initial token value on a channel without a delay token"});
      } else if (spec.initial_token_value.size() != spec.token_size) {
        out.push_back({spec.id, "initial token value size differs from token size"});
      }
    }
    const PortSpec& consumer = net.actors()[ep.consumer_actor].ports[ep.consumer_port];
    if (consumer.kind == PortKind::control) {
      if (spec.token_rate != 1) {
        out.push_back({spec.id, "control rate must be 1"});
      }
      if (spec.has_delay) {
        out.push_back({spec.id, "delay token on a channel into a control port"});
      }
    }
    const PortSpec& producer = net.actors()[ep.producer_actor].ports[ep.producer_port];
    if (producer.kind == PortKind::control) {
      out.push_back({spec.id, "control port used as a producer"});
    }
  }
}

void check_actors(const NetworkGraph& net, std::vector<Violation>& out) {
  std::vector<std::size_t> order(net.actors().size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return net.actors()[a].id < net.actors()[b].id;
  });

  for (std::size_t a : order) {
    const ActorSpec& actor = net.actors()[a];
    std::size_t control_ports = 0;
    for (const PortSpec& port : actor.ports) {
      if (port.kind == PortKind::control) {
        ++control_ports;
        if (port.direction != PortDirection::input) {
          out.push_back({actor.id, "control port must be an input"});
        }
      }
    }
    if (actor.kind == ActorKind::dynamic_rate) {
      if (control_ports != 1) {
        out.push_back({actor.id, "dynamic actor must have exactly one control port"});
      }
      if (!actor.behavior.control) {
        out.push_back({actor.id, "dynamic actor without a control function"});
      }
    } else {
      if (control_ports != 0) {
        out.push_back({actor.id, "static actor with a control port"});
      }
      if (actor.behavior.control) {
        out.push_back({actor.id, "static actor with a control function"});
      }
    }
    if (!actor.behavior.fire) {
      out.push_back({actor.id, "missing fire function"});
    }
  }
}

// A cycle of channels none of which carries a delay token can never
// fire: every actor on it blocks reading its predecessor forever.
void check_undelayed_cycles(const NetworkGraph& net, std::vector<Violation>& out) {
  const std::size_t n = net.actors().size();
  std::vector<std::vector<std::size_t>> next(n);
  for (std::size_t c = 0; c < net.channels().size(); ++c) {
    if (net.channels()[c].has_delay) continue;
    const ChannelEndpoints& ep = net.endpoints()[c];
    next[ep.producer_actor].push_back(ep.consumer_actor);
  }

  enum class Mark { unseen, active, done };
  std::vector<Mark> mark(n, Mark::unseen);
  std::vector<std::size_t> stack;

  std::function<bool(std::size_t)> visit = [&](std::size_t a) -> bool {
    mark[a] = Mark::active;
    stack.push_back(a);
    for (std::size_t b : next[a]) {
      if (mark[b] == Mark::active) {
        std::ostringstream path;
        auto it = std::find(stack.begin(), stack.end(), b);
        for (; it != stack.end(); ++it) path << net.actors()[*it].id << " -> ";
        path << net.actors()[b].id;
        out.push_back({"network", "undelayed cycle: " + path.str()});
        return true;
      }
      if (mark[b] == Mark::unseen && visit(b)) return true;
    }
    stack.pop_back();
    mark[a] = Mark::done;
    return false;
  };

  // Reports one cycle per affected component; enumerating every
  // elementary cycle would be exponential and adds nothing actionable.
  for (std::size_t a = 0; a < n; ++a) {
    if (mark[a] == Mark::unseen) {
      stack.clear();
      visit(a);
    }
  }
}

}  // namespace

std::vector<Violation> validate(const NetworkGraph& net) {
  std::vector<Violation> out;
  check_channels(net, out);
  check_actors(net, out);
  check_undelayed_cycles(net, out);
  return out;
}

FiringRates control_dispatch(const NetworkGraph& net, std::size_t actor,
                             std::span<const std::byte> control_token) {
  const ActorSpec& spec = net.actors().at(actor);
  if (spec.kind != ActorKind::dynamic_rate || !spec.behavior.control) {
    throw ControlError("actor '" + spec.id + "' has no control function");
  }
  FiringRates rates = spec.behavior.control(control_token);

  const std::vector<std::size_t> regular = net.regular_ports(actor);
  if (rates.by_regular_port.size() != regular.size()) {
    throw ControlError("actor '" + spec.id + "': control returned " +
                       std::to_string(rates.by_regular_port.size()) + " rates for " +
                       std::to_string(regular.size()) + " regular ports");
  }
  for (std::size_t i = 0; i < regular.size(); ++i) {
    const PortSpec& port = spec.ports[regular[i]];
    const std::uint32_t r = net.channels()[net.channel_index(port.channel_id)].token_rate;
    const std::uint32_t rate = rates.by_regular_port[i];
    if (rate != 0 && rate != r) {
      throw ControlError("actor '" + spec.id + "': control set rate " + std::to_string(rate) +
                         " on port " + std::to_string(regular[i]) + ", allowed 0 or " +
                         std::to_string(r));
    }
  }
  return rates;
}

}  // namespace dynflow
