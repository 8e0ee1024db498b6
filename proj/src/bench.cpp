#include "dynflow/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include "dynflow/channel.hpp"
#include "dynflow/dpd.hpp"
#include "dynflow/motion.hpp"

namespace dynflow::bench {

namespace {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return data;
}

void write_file(const std::string& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out.write(static_cast<const char*>(data), std::streamsize(size));
  if (!out) throw ConfigError("short write to '" + path + "'");
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

struct PgmStream {
  unsigned width = 0;
  unsigned height = 0;
  std::vector<std::uint8_t> pixels;  // concatenated frames
  std::uint64_t frames = 0;
};

// Binary PGM (P5), possibly several images concatenated in one file.
PgmStream read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");

  auto next_token = [&in, &path]() -> std::string {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
      if (c == '#') {
        while ((c = in.get()) != EOF && c != '\n') {
        }
        continue;
      }
      if (std::isspace(c)) {
        if (!tok.empty()) return tok;
        continue;
      }
      tok.push_back(char(c));
    }
    if (tok.empty()) throw ConfigError("truncated PGM header in '" + path + "'");
    return tok;
  };

  PgmStream s;
  while (in.peek() != EOF) {
    if (next_token() != "P5") throw ConfigError("'" + path + "' is not binary PGM (P5)");
    const unsigned w = unsigned(std::stoul(next_token()));
    const unsigned h = unsigned(std::stoul(next_token()));
    const unsigned maxval = unsigned(std::stoul(next_token()));
    if (maxval != 255) throw ConfigError("PGM maxval must be 255 in '" + path + "'");
    if (s.frames == 0) {
      s.width = w;
      s.height = h;
    } else if (w != s.width || h != s.height) {
      throw ConfigError("PGM frames in '" + path + "' change dimensions");
    }
    const std::size_t size = std::size_t(w) * h;
    const std::size_t off = s.pixels.size();
    s.pixels.resize(off + size);
    in.read(reinterpret_cast<char*>(s.pixels.data() + off), std::streamsize(size));
    if (std::size_t(in.gcount()) != size) throw ConfigError("truncated PGM data in '" + path + "'");
    ++s.frames;
    while (in.peek() != EOF && std::isspace(in.peek())) in.get();
  }
  if (s.frames == 0) throw ConfigError("'" + path + "' holds no PGM frames");
  return s;
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

const char* mapping_name(MappingMode m) {
  return m == MappingMode::free ? "free" : "fixed";
}

ExecutionConfig make_exec_config(const CliConfig& cfg, const NetworkGraph& net,
                                 std::uint64_t source_limit) {
  ExecutionConfig exec;
  exec.mapping = cfg.pins.empty() ? cfg.mapping : MappingMode::fixed;
  exec.source_firing_limit = source_limit;
  if (cfg.mapping == MappingMode::fixed) {
    // Benchmark-style fixed mapping: every actor gets a core, round
    // robin by default, explicit --pin entries override.
    const unsigned cores = std::max(1u, std::thread::hardware_concurrency());
    for (std::size_t a = 0; a < net.actors().size(); ++a) {
      exec.pins[net.actors()[a].id] = unsigned(a) % cores;
    }
  }
  // --pin alone pins just the named actors and leaves the rest free.
  for (const auto& [actor, core] : cfg.pins) {
    pin_actor(exec, net, actor, core);
  }
  return exec;
}

void print_run_stats(const CliConfig& cfg, const RunStats& stats, std::ostream& out) {
  if (cfg.porcelain) {
    for (const auto& a : stats.actors) {
      out << "actor." << a.id << ".firings=" << a.firings << "\n";
    }
    for (std::size_t i = 0; i < stats.warnings.size(); ++i) {
      out << "warning." << i << "=" << stats.warnings[i] << "\n";
    }
    return;
  }
  out << "firings:";
  for (const auto& a : stats.actors) out << " " << a.id << "=" << a.firings;
  out << "\n";
  for (const auto& w : stats.warnings) out << "warning: " << w << "\n";
}

void print_memory(const CliConfig& cfg, const NetworkGraph& net, std::ostream& out) {
  const MemoryReport report = memory_bytes(net);
  if (cfg.porcelain) {
    for (const auto& line : report.channels) {
      out << "channel." << line.channel_id << ".capacity_bytes=" << line.capacity_bytes << "\n";
    }
    out << "mem_total_bytes=" << report.total_bytes << "\n";
    return;
  }
  out << "channel memory:\n";
  for (const auto& line : report.channels) {
    out << "  " << std::left << std::setw(20) << line.channel_id << std::right << " r="
        << std::setw(3) << line.token_rate << "  S=" << std::setw(8) << line.token_size
        << (line.has_delay ? "  delay" : "       ") << "  tokens=" << std::setw(3)
        << line.capacity_tokens << "  " << std::setw(10) << line.capacity_bytes << " B\n";
  }
  out << "total buffer memory: " << report.total_bytes << " B (" << std::fixed
      << std::setprecision(3) << double(report.total_bytes) / 1e6 << " MB)\n"
      << std::defaultfloat << std::setprecision(6);
}

struct MotionInput {
  std::vector<std::uint8_t> pixels;
  std::uint64_t frames = 0;
  unsigned width = 0;
  unsigned height = 0;
};

MotionInput load_motion_input(const CliConfig& cfg) {
  MotionInput mi;
  mi.width = cfg.width;
  mi.height = cfg.height;
  if (cfg.input_path.empty()) {
    mi.frames = cfg.frames;
    mi.pixels = motion::synth_frames(mi.frames, mi.width, mi.height, cfg.seed);
    return mi;
  }
  if (ends_with(cfg.input_path, ".pgm")) {
    PgmStream pgm = read_pgm(cfg.input_path);
    mi.width = pgm.width;
    mi.height = pgm.height;
    mi.frames = pgm.frames;
    mi.pixels = std::move(pgm.pixels);
  } else {
    std::vector<char> raw = read_file(cfg.input_path);
    const std::size_t size = std::size_t(mi.width) * mi.height;
    if (raw.empty() || raw.size() % size != 0) {
      throw ConfigError("'" + cfg.input_path + "' is not a multiple of " + std::to_string(size) +
                        "-byte frames");
    }
    mi.frames = raw.size() / size;
    mi.pixels.resize(raw.size());
    std::memcpy(mi.pixels.data(), raw.data(), raw.size());
  }
  if (cfg.frames > 0 && cfg.frames < mi.frames) {
    mi.frames = cfg.frames;
    mi.pixels.resize(mi.frames * std::size_t(mi.width) * mi.height);
  }
  return mi;
}

motion::Params motion_params(const CliConfig& cfg, const MotionInput& in,
                             std::vector<std::uint8_t>& output) {
  motion::Params params;
  params.width = in.width;
  params.height = in.height;
  params.threshold = std::uint8_t(cfg.threshold);
  params.token_rate = cfg.rate;
  params.frames = in.frames;
  params.input = in.pixels;
  output.assign(in.pixels.size(), 0);
  params.output = output;
  return params;
}

struct DpdSetup {
  std::vector<std::complex<float>> input;  // padded to a whole number of periods
  std::uint64_t samples = 0;               // user-visible sample count
  dpd::TapSet taps{};
  std::vector<dpd::ConfigToken> schedule;
};

DpdSetup load_dpd_setup(const CliConfig& cfg) {
  DpdSetup s;
  if (!cfg.taps_path.empty()) {
    std::ifstream in(cfg.taps_path);
    if (!in) throw ConfigError("cannot open '" + cfg.taps_path + "'");
    s.taps = dpd::parse_taps(in);
  } else {
    s.taps = dpd::random_taps(cfg.seed);
  }
  if (!cfg.schedule_path.empty()) {
    std::ifstream in(cfg.schedule_path);
    if (!in) throw ConfigError("cannot open '" + cfg.schedule_path + "'");
    s.schedule = dpd::parse_schedule(in);
  } else {
    s.schedule = dpd::random_schedule(16, cfg.seed);
  }

  if (cfg.input_path.empty()) {
    s.samples = cfg.samples;
    s.input = dpd::synth_samples(s.samples, cfg.seed);
  } else {
    std::vector<char> raw = read_file(cfg.input_path);
    if (raw.empty() || raw.size() % (2 * sizeof(float)) != 0) {
      throw ConfigError("'" + cfg.input_path + "' is not interleaved float re,im pairs");
    }
    s.samples = raw.size() / (2 * sizeof(float));
    if (cfg.samples > 0 && cfg.samples < s.samples) s.samples = cfg.samples;
    s.input.resize(s.samples);
    std::memcpy(s.input.data(), raw.data(), s.samples * 2 * sizeof(float));
  }
  if (s.samples == 0) throw ConfigError("no samples to process");
  // Pad the tail so the stream is a whole number of period tokens.
  const std::uint64_t padded = (s.samples + cfg.period - 1) / cfg.period * cfg.period;
  s.input.resize(padded, {0.0f, 0.0f});
  return s;
}

dpd::Params dpd_params(const CliConfig& cfg, const DpdSetup& s,
                       std::vector<std::complex<float>>& output) {
  dpd::Params params;
  params.period = cfg.period;
  params.samples = s.input.size();
  params.taps = s.taps;
  params.schedule = s.schedule;
  params.input = s.input;
  output.assign(s.input.size(), {0.0f, 0.0f});
  params.output = output;
  return params;
}

int config_error(const CliConfig& cfg, std::ostream& out, const std::string& what) {
  if (cfg.porcelain) {
    out << "error=" << what << "\n";
  } else {
    out << "error: " << what << "\n";
  }
  return kExitConfigError;
}

}  // namespace

std::optional<Divergence> compare_frames(std::span<const std::uint8_t> got,
                                         std::span<const std::uint8_t> want,
                                         std::size_t frame_size) {
  if (got.size() != want.size()) {
    return Divergence{0, "output size " + std::to_string(got.size()) + " != " +
                             std::to_string(want.size())};
  }
  for (std::size_t i = 0; i < got.size(); ++i) {
    if (got[i] != want[i]) {
      const std::uint64_t frame = i / frame_size;
      std::ostringstream detail;
      detail << "frame " << frame << " byte " << i % frame_size << ": got " << int(got[i])
             << ", want " << int(want[i]);
      return Divergence{frame, detail.str()};
    }
  }
  return std::nullopt;
}

std::optional<Divergence> compare_samples(std::span<const std::complex<float>> got,
                                          std::span<const std::complex<float>> want,
                                          double tolerance) {
  if (got.size() != want.size()) {
    return Divergence{0, "output size " + std::to_string(got.size()) + " != " +
                             std::to_string(want.size())};
  }
  for (std::size_t i = 0; i < got.size(); ++i) {
    const std::complex<double> g = got[i];
    const std::complex<double> w = want[i];
    const double err = std::abs(g - w) / std::max(std::abs(w), 1e-3);
    if (err > tolerance) {
      std::ostringstream detail;
      detail << "sample " << i << ": got (" << g.real() << "," << g.imag() << "), want ("
             << w.real() << "," << w.imag() << "), rel err " << err;
      return Divergence{i, detail.str()};
    }
  }
  return std::nullopt;
}

int cmd_motion(const CliConfig& cfg, std::ostream& out) {
  try {
    MotionInput input = load_motion_input(cfg);
    if (input.frames % cfg.rate != 0) {
      return config_error(cfg, out,
                          "frame count " + std::to_string(input.frames) +
                              " is not a multiple of token rate " + std::to_string(cfg.rate));
    }

    std::vector<std::uint8_t> output;
    std::vector<double> fps;
    RunStats last_stats;
    NetworkGraph net;
    for (unsigned rep = 0; rep < std::max(1u, cfg.reps); ++rep) {
      motion::Params params = motion_params(cfg, input, output);
      net = motion::build_network(params);
      ExecutionConfig exec = make_exec_config(cfg, net, motion::source_firings(params));
      last_stats = run(net, exec);
      const double secs = last_stats.active_seconds("sink");
      fps.push_back(secs > 0 ? double(input.frames) / secs : 0.0);
    }
    if (!cfg.output_path.empty()) {
      write_file(cfg.output_path, output.data(), output.size());
    }

    if (cfg.porcelain) {
      out << "app=motion\nframes=" << input.frames << "\nwidth=" << input.width
          << "\nheight=" << input.height << "\nrate=" << cfg.rate
          << "\nthreshold=" << cfg.threshold << "\nseed=" << cfg.seed
          << "\nmapping=" << mapping_name(cfg.pins.empty() ? cfg.mapping : MappingMode::fixed)
          << "\n";
      for (std::size_t i = 0; i < fps.size(); ++i) out << "fps_run" << i << "=" << fps[i] << "\n";
      out << "fps_median=" << median(fps) << "\n";
    } else {
      out << "motion detection: " << input.frames << " frames " << input.width << "x"
          << input.height << ", rate " << cfg.rate << ", threshold " << cfg.threshold
          << ", mapping " << mapping_name(cfg.pins.empty() ? cfg.mapping : MappingMode::fixed)
          << ", seed " << cfg.seed << "\n";
      for (std::size_t i = 0; i < fps.size(); ++i) {
        out << "  run " << i << ": " << std::fixed << std::setprecision(1) << fps[i]
            << " frames/s\n"
            << std::defaultfloat;
      }
      out << "throughput: " << std::fixed << std::setprecision(1) << median(fps)
          << " frames/s (median of " << fps.size() << ")\n"
          << std::defaultfloat;
    }
    print_run_stats(cfg, last_stats, out);
    print_memory(cfg, net, out);
    return kExitOk;
  } catch (const std::exception& e) {
    return config_error(cfg, out, e.what());
  }
}

int cmd_dpd(const CliConfig& cfg, std::ostream& out) {
  try {
    DpdSetup setup = load_dpd_setup(cfg);

    std::vector<std::complex<float>> output;
    std::vector<double> msps;
    RunStats last_stats;
    NetworkGraph net;
    for (unsigned rep = 0; rep < std::max(1u, cfg.reps); ++rep) {
      dpd::Params params = dpd_params(cfg, setup, output);
      net = dpd::build_network(params);
      ExecutionConfig exec = make_exec_config(cfg, net, dpd::source_firings(params));
      last_stats = run(net, exec);
      const double secs = last_stats.active_seconds("sink");
      msps.push_back(secs > 0 ? double(setup.samples) / secs / 1e6 : 0.0);
    }
    if (!cfg.output_path.empty()) {
      write_file(cfg.output_path, output.data(), setup.samples * 2 * sizeof(float));
    }

    // All channels feeding or fed by the dynamic actors carry one token
    // per firing; anything else risks deadlock under arbitrary schedules.
    for (const ChannelSpec& c : net.channels()) {
      if (c.token_rate != 1) {
        return config_error(cfg, out, "dynamic-part channel '" + c.id + "' has rate != 1");
      }
    }

    if (cfg.porcelain) {
      out << "app=dpd\nsamples=" << setup.samples << "\nperiod=" << cfg.period
          << "\nschedule_entries=" << setup.schedule.size() << "\nseed=" << cfg.seed
          << "\nmapping=" << mapping_name(cfg.pins.empty() ? cfg.mapping : MappingMode::fixed)
          << "\ndynamic_rate=1\n";
      for (std::size_t i = 0; i < msps.size(); ++i) {
        out << "msps_run" << i << "=" << msps[i] << "\n";
      }
      out << "msps_median=" << median(msps) << "\n";
    } else {
      out << "dynamic predistortion: " << setup.samples << " samples, period " << cfg.period
          << ", " << setup.schedule.size() << " schedule entries, mapping "
          << mapping_name(cfg.pins.empty() ? cfg.mapping : MappingMode::fixed) << ", seed "
          << cfg.seed << "\n";
      out << "dynamic-part token rate: 1 (checked over all channels)\n";
      for (std::size_t i = 0; i < msps.size(); ++i) {
        out << "  run " << i << ": " << std::fixed << std::setprecision(2) << msps[i]
            << " Msamples/s\n"
            << std::defaultfloat;
      }
      out << "throughput: " << std::fixed << std::setprecision(2) << median(msps)
          << " Msamples/s (median of " << msps.size() << ")\n"
          << std::defaultfloat;
    }
    print_run_stats(cfg, last_stats, out);
    print_memory(cfg, net, out);
    return kExitOk;
  } catch (const std::exception& e) {
    return config_error(cfg, out, e.what());
  }
}

int cmd_verify(const CliConfig& cfg, std::ostream& out) {
  try {
    std::optional<Divergence> divergence;
    if (cfg.app == App::motion) {
      MotionInput input = load_motion_input(cfg);
      if (input.frames % cfg.rate != 0) {
        return config_error(cfg, out, "frame count is not a multiple of the token rate");
      }
      std::vector<std::uint8_t> output;
      motion::Params params = motion_params(cfg, input, output);
      NetworkGraph net = motion::build_network(params);
      ExecutionConfig exec = make_exec_config(cfg, net, motion::source_firings(params));
      run(net, exec);

      const auto expected = motion::oracle_motion_detection_raw(
          input.pixels, input.width, input.height, std::uint8_t(cfg.threshold));
      divergence = compare_frames(output, expected, std::size_t(input.width) * input.height);
    } else {
      DpdSetup setup = load_dpd_setup(cfg);
      std::vector<std::complex<float>> output;
      dpd::Params params = dpd_params(cfg, setup, output);
      NetworkGraph net = dpd::build_network(params);
      ExecutionConfig exec = make_exec_config(cfg, net, dpd::source_firings(params));
      run(net, exec);

      const auto expected = dpd::oracle_dpd(setup.input, setup.taps, setup.schedule, cfg.period);
      divergence = compare_samples(output, expected);
    }

    const char* app_name = cfg.app == App::motion ? "motion" : "dpd";
    if (cfg.porcelain) {
      out << "app=" << app_name << "\nseed=" << cfg.seed << "\nverify="
          << (divergence ? "FAIL" : "PASS") << "\n";
      if (divergence) {
        out << "divergence_index=" << divergence->index << "\ndivergence=" << divergence->detail
            << "\n";
      }
    } else {
      out << "verify " << app_name << " (seed " << cfg.seed << "): "
          << (divergence ? "FAIL" : "PASS") << "\n";
      if (divergence) out << "first divergence: " << divergence->detail << "\n";
    }
    return divergence ? kExitVerifyFailed : kExitOk;
  } catch (const std::exception& e) {
    return config_error(cfg, out, e.what());
  }
}

int cmd_mem(const CliConfig& cfg, std::ostream& out) {
  try {
    NetworkGraph net;
    if (cfg.app == App::motion) {
      // One firing's worth of frames is enough to shape the channels.
      std::vector<std::uint8_t> io(std::size_t(cfg.width) * cfg.height * cfg.rate);
      motion::Params params;
      params.width = cfg.width;
      params.height = cfg.height;
      params.token_rate = cfg.rate;
      params.frames = cfg.rate;
      params.input = io;
      params.output = io;
      net = motion::build_network(params);
    } else {
      std::vector<std::complex<float>> io(cfg.period);
      dpd::Params params;
      params.period = cfg.period;
      params.samples = cfg.period;
      params.schedule = {dpd::ConfigToken::first_n(2)};
      params.input = io;
      params.output = io;
      net = dpd::build_network(params);
    }
    if (cfg.porcelain) {
      out << "app=" << (cfg.app == App::motion ? "motion" : "dpd") << "\n";
    } else {
      out << "buffer memory for " << (cfg.app == App::motion ? "motion" : "dpd") << ":\n";
    }
    print_memory(cfg, net, out);
    return kExitOk;
  } catch (const std::exception& e) {
    return config_error(cfg, out, e.what());
  }
}

}  // namespace dynflow::bench
