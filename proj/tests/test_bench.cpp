#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "dynflow/bench.hpp"
#include "dynflow/motion.hpp"

using namespace dynflow;
using bench::CliConfig;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("dynflow-test-" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

CliConfig small_motion_config() {
  CliConfig cfg;
  cfg.app = bench::App::motion;
  cfg.frames = 6;
  cfg.width = 32;
  cfg.height = 24;
  cfg.seed = 9;
  return cfg;
}

}  // namespace

TEST_CASE("comparators report the first divergence") {
  SUBCASE("frames") {
    std::vector<std::uint8_t> a(300, 1);
    std::vector<std::uint8_t> b = a;
    CHECK_FALSE(bench::compare_frames(a, b, 100).has_value());
    b[235] = 2;
    auto d = bench::compare_frames(a, b, 100);
    REQUIRE(d.has_value());
    CHECK(d->index == 2);  // frame index
    CHECK(d->detail.find("byte 35") != std::string::npos);
  }
  SUBCASE("samples") {
    std::vector<std::complex<float>> a(64, {1.0f, -1.0f});
    std::vector<std::complex<float>> b = a;
    CHECK_FALSE(bench::compare_samples(a, b).has_value());
    b[17] += std::complex<float>(1e-3f, 0.0f);
    auto d = bench::compare_samples(a, b);
    REQUIRE(d.has_value());
    CHECK(d->index == 17);
  }
  SUBCASE("a tiny wobble stays within tolerance") {
    std::vector<std::complex<float>> a(4, {2.0f, 0.0f});
    std::vector<std::complex<float>> b = a;
    b[1] += std::complex<float>(1e-5f, 0.0f);  // 5e-6 relative
    CHECK_FALSE(bench::compare_samples(a, b).has_value());
  }
}

TEST_CASE("verify passes on synthetic input and fails on corrupted taps") {
  TempDir tmp;

  SUBCASE("motion verify passes") {
    CliConfig cfg = small_motion_config();
    std::ostringstream out;
    CHECK(bench::cmd_verify(cfg, out) == bench::kExitOk);
    CHECK(out.str().find("PASS") != std::string::npos);
  }
  SUBCASE("dpd verify passes and is porcelain-friendly") {
    CliConfig cfg;
    cfg.app = bench::App::dpd;
    cfg.samples = 4096;
    cfg.period = 512;
    cfg.porcelain = true;
    std::ostringstream out;
    CHECK(bench::cmd_verify(cfg, out) == bench::kExitOk);
    CHECK(out.str().find("verify=PASS") != std::string::npos);
  }
  SUBCASE("negative control: corrupted output fails with the first divergent frame") {
    // Run the pipeline on one input, compare against a reference for a
    // perturbed input; the comparator must point at the first frame hit.
    const unsigned w = 32;
    const unsigned h = 24;
    const std::size_t size = std::size_t(w) * h;
    auto input = motion::synth_frames(4, w, h, 3);
    auto expected = motion::oracle_motion_detection_raw(input, w, h, 32);
    auto corrupted = input;
    for (unsigned y = 4; y < 12; ++y) {
      std::memset(corrupted.data() + 2 * size + y * w + 4, 0, 8);
    }
    auto other = motion::oracle_motion_detection_raw(corrupted, w, h, 32);
    auto d = bench::compare_frames(other, expected, size);
    REQUIRE(d.has_value());
    CHECK(d->index == 2);
  }
}

TEST_CASE("motion round-trips through raw frame files") {
  TempDir tmp;
  const auto input = motion::synth_frames(4, 32, 24, 11);
  const std::string in_path = tmp.file("frames.raw");
  {
    std::ofstream f(in_path, std::ios::binary);
    f.write(reinterpret_cast<const char*>(input.data()), std::streamsize(input.size()));
  }

  CliConfig cfg = small_motion_config();
  cfg.frames = 0;  // take the count from the file
  cfg.input_path = in_path;
  cfg.output_path = tmp.file("out.raw");
  std::ostringstream report;
  REQUIRE(bench::cmd_motion(cfg, report) == bench::kExitOk);

  std::ifstream f(cfg.output_path, std::ios::binary);
  std::vector<char> out((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const auto expected = motion::oracle_motion_detection_raw(input, 32, 24, 32);
  REQUIRE(out.size() == expected.size());
  CHECK(std::memcmp(out.data(), expected.data(), out.size()) == 0);
}

TEST_CASE("pgm input is accepted and overrides the dimensions") {
  TempDir tmp;
  const unsigned w = 40;
  const unsigned h = 30;
  const auto frames = motion::synth_frames(3, w, h, 21);
  const std::string path = tmp.file("clip.pgm");
  {
    std::ofstream f(path, std::ios::binary);
    for (int i = 0; i < 3; ++i) {
      f << "P5\n# frame " << i << "\n" << w << " " << h << "\n255\n";
      f.write(reinterpret_cast<const char*>(frames.data() + i * w * h), w * h);
    }
  }

  CliConfig cfg = small_motion_config();
  cfg.width = 999;  // must be replaced by the file header
  cfg.height = 999;
  cfg.frames = 0;
  cfg.input_path = path;
  cfg.porcelain = true;
  std::ostringstream report;
  REQUIRE(bench::cmd_motion(cfg, report) == bench::kExitOk);
  CHECK(report.str().find("width=40") != std::string::npos);
  CHECK(report.str().find("height=30") != std::string::npos);
  CHECK(report.str().find("frames=3") != std::string::npos);
}

TEST_CASE("configuration errors exit with code 2") {
  SUBCASE("frames not a multiple of the rate") {
    CliConfig cfg = small_motion_config();
    cfg.frames = 5;
    cfg.rate = 2;
    std::ostringstream out;
    CHECK(bench::cmd_motion(cfg, out) == bench::kExitConfigError);
    CHECK(out.str().find("error") != std::string::npos);
  }
  SUBCASE("missing input file") {
    CliConfig cfg = small_motion_config();
    cfg.input_path = "/nonexistent/input.raw";
    std::ostringstream out;
    CHECK(bench::cmd_motion(cfg, out) == bench::kExitConfigError);
  }
  SUBCASE("schedule entry out of range is rejected at load") {
    TempDir tmp;
    const std::string path = tmp.file("sched.txt");
    std::ofstream(path) << "11\n";
    CliConfig cfg;
    cfg.app = bench::App::dpd;
    cfg.samples = 1024;
    cfg.period = 256;
    cfg.schedule_path = path;
    std::ostringstream out;
    CHECK(bench::cmd_dpd(cfg, out) == bench::kExitConfigError);
    CHECK(out.str().find("outside [2,10]") != std::string::npos);
  }
}

TEST_CASE("dpd command reports and writes output samples") {
  TempDir tmp;
  CliConfig cfg;
  cfg.app = bench::App::dpd;
  cfg.samples = 3000;  // deliberately not a period multiple: tail is padded
  cfg.period = 1024;
  cfg.seed = 4;
  cfg.output_path = tmp.file("out.cf32");
  cfg.porcelain = true;
  std::ostringstream report;
  REQUIRE(bench::cmd_dpd(cfg, report) == bench::kExitOk);
  CHECK(report.str().find("samples=3000") != std::string::npos);
  CHECK(report.str().find("dynamic_rate=1") != std::string::npos);
  CHECK(std::filesystem::file_size(cfg.output_path) == 3000 * 2 * sizeof(float));
}

TEST_CASE("memory table doubles every non-delay channel when the rate doubles") {
  CliConfig cfg = small_motion_config();
  cfg.porcelain = true;

  auto totals = [&](std::uint32_t rate) {
    CliConfig c = cfg;
    c.rate = rate;
    std::ostringstream out;
    REQUIRE(bench::cmd_mem(c, out) == bench::kExitOk);
    std::map<std::string, std::uint64_t> bytes;
    std::istringstream in(out.str());
    std::string line;
    while (std::getline(in, line)) {
      const auto dot = line.find("channel.");
      const auto eq = line.rfind('=');
      if (dot == 0 && eq != std::string::npos) {
        bytes[line.substr(8, line.find(".capacity_bytes") - 8)] = std::stoull(line.substr(eq + 1));
      }
    }
    return bytes;
  };

  auto r1 = totals(1);
  auto r2 = totals(2);
  REQUIRE(r1.size() == 5);
  for (const auto& [id, b] : r1) {
    CAPTURE(id);
    if (id == "gauss_thres_prev") {
      CHECK(r2[id] == (3 * 2 + 1) * (b / 4));  // 3r+1 tokens vs 4 at r=1
    } else {
      CHECK(r2[id] == 2 * b);
    }
  }
}
