#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstdint>
#include <deque>
#include <future>
#include <random>
#include <thread>

#include "dynflow/channel.hpp"

using namespace dynflow;
using namespace std::chrono_literals;

namespace {

ChannelSpec make_spec(std::uint32_t rate, std::size_t token_size, bool delay) {
  ChannelSpec spec;
  spec.id = "ch";
  spec.token_rate = rate;
  spec.token_size = token_size;
  spec.has_delay = delay;
  return spec;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic payload of token `index` for a given stream seed; lets
// the consumer check contents without sharing state with the producer.
std::vector<std::byte> token_payload(std::uint64_t seed, std::uint64_t index,
                                     std::size_t token_size) {
  std::vector<std::byte> out(token_size);
  for (std::size_t i = 0; i < token_size; ++i) {
    out[i] = static_cast<std::byte>(splitmix64(seed ^ (index * 1315423911ULL + i)) & 0xFF);
  }
  return out;
}

void fill_tokens(std::span<std::byte> region, std::size_t token_size, std::uint64_t seed,
                 std::uint64_t first_index) {
  const std::size_t n = region.size() / token_size;
  for (std::size_t t = 0; t < n; ++t) {
    auto payload = token_payload(seed, first_index + t, token_size);
    std::copy(payload.begin(), payload.end(), region.begin() + t * token_size);
  }
}

}  // namespace

TEST_CASE("capacity follows the delay rule") {
  CHECK(capacity_tokens(make_spec(4, 1, true)) == 13);  // slots 0..12
  CHECK(capacity_tokens(make_spec(1, 76800, false)) == 2);
  CHECK(capacity_bytes(make_spec(1, 76800, false)) == 153600);
  CHECK(capacity_tokens(make_spec(1, 1, true)) == 4);
  CHECK(capacity_bytes(make_spec(1, 76800, true)) == 307200);

  for (std::uint32_t r : {1u, 2u, 3u, 4u, 8u, 16u}) {
    for (std::size_t s : {std::size_t(1), std::size_t(76800)}) {
      CHECK(capacity_tokens(make_spec(r, s, true)) == 3 * r + 1);
      CHECK(capacity_tokens(make_spec(r, s, false)) == 2 * r);
      CHECK(capacity_bytes(make_spec(r, s, true)) == (3 * r + 1) * s);
      CHECK(capacity_bytes(make_spec(r, s, false)) == 2 * r * s);
    }
  }
}

TEST_CASE("region layout") {
  const ChannelSpec d4 = make_spec(4, 1, true);
  CHECK(write_region(d4, 0) == SlotRange{1, 4});
  CHECK(write_region(d4, 1) == SlotRange{5, 4});
  CHECK(write_region(d4, 2) == SlotRange{9, 4});  // ends at slot 12
  CHECK(read_region(d4, 0) == SlotRange{0, 4});
  CHECK(read_region(d4, 1) == SlotRange{4, 4});
  CHECK(read_region(d4, 2) == SlotRange{8, 4});

  const ChannelSpec d1 = make_spec(1, 1, true);
  CHECK(write_region(d1, 1) == SlotRange{2, 1});
  CHECK(read_region(d1, 0) == SlotRange{0, 1});

  const ChannelSpec r2 = make_spec(2, 1, false);
  CHECK(write_region(r2, 0) == SlotRange{0, 2});
  CHECK(write_region(r2, 1) == SlotRange{2, 2});
  CHECK(read_region(r2, 0) == SlotRange{0, 2});
  CHECK(read_region(r2, 1) == SlotRange{2, 2});
}

TEST_CASE("delay channel rest state") {
  SUBCASE("default initial token is all zero") {
    Channel ch(make_spec(1, 4, true));
    CHECK(ch.tokens_available() == 1);
    auto h = ch.read_start(1);
    REQUIRE(h.has_value());
    for (std::byte b : h->bytes) CHECK(b == std::byte{0});
    ch.read_end(*h);
  }
  SUBCASE("explicit initial token payload") {
    ChannelSpec spec = make_spec(1, 2, true);
    spec.initial_token_value = {std::byte{0xAB}, std::byte{0xCD}};
    Channel ch(spec);
    auto h = ch.read_start(1);
    REQUIRE(h.has_value());
    CHECK(h->bytes[0] == std::byte{0xAB});
    CHECK(h->bytes[1] == std::byte{0xCD});
    ch.read_end(*h);
  }
  SUBCASE("regular channel starts empty") {
    Channel ch(make_spec(3, 2, false));
    CHECK(ch.tokens_available() == 0);
  }
}

// The documented r=4 access pattern: writes occupy 1..4, 5..8, 9..12,
// reads consume 0..3, 4..7, 8..11, and the third write is followed by a
// copy of slot 12 into slot 0 before the pattern repeats.
TEST_CASE("delay buffer access pattern for rate 4") {
  const std::size_t token = 4;
  Channel ch(make_spec(4, token, true));
  CHECK(ch.capacity_tokens() == 13);

  auto write4 = [&](std::uint64_t first_value) {
    RegionHandle h = ch.write_start(4);
    fill_tokens(h.bytes, token, 7, first_value);
    const std::size_t slot = h.first_slot;
    ch.write_end(h);
    return slot;
  };
  auto read4 = [&](std::uint64_t first_expected, bool first_is_initial = false) {
    auto h = ch.read_start(4);
    REQUIRE(h.has_value());
    const std::size_t slot = h->first_slot;
    for (std::size_t t = 0; t < 4; ++t) {
      std::vector<std::byte> got(h->bytes.begin() + t * token, h->bytes.begin() + (t + 1) * token);
      if (t == 0 && first_is_initial) {
        CHECK(got == std::vector<std::byte>(token, std::byte{0}));
      } else {
        CHECK(got == token_payload(7, first_expected + t, token));
      }
    }
    ch.read_end(*h);
    return slot;
  };

  // One full cycle plus the wrap-around read that sees the copied token.
  CHECK(write4(1) == 1);                 // tokens 1..4 into slots 1..4
  CHECK(read4(0, true) == 0);            // initial, 1, 2, 3 from slots 0..3
  CHECK(write4(5) == 5);                 // tokens 5..8 into slots 5..8
  CHECK(read4(4) == 4);                  // tokens 4..7 from slots 4..7
  CHECK(write4(9) == 9);                 // tokens 9..12 into slots 9..12, copy 12 -> 0
  CHECK(read4(8) == 8);                  // tokens 8..11 from slots 8..11
  CHECK(write4(13) == 1);                // pattern repeats
  CHECK(read4(12) == 0);                 // token 12 arrives via the slot 0 copy
}

TEST_CASE("write start on a fresh delay channel returns the slot after the initial token") {
  Channel ch(make_spec(4, 1, true));
  RegionHandle h = ch.write_start(4);
  CHECK(h.first_slot == 1);
  CHECK(h.tokens == 4);
  ch.write_end(h);
}

TEST_CASE("delay channel with rate 1 is readable before any write") {
  Channel ch(make_spec(1, 8, true));
  auto h = ch.read_start(1);
  REQUIRE(h.has_value());
  CHECK(h->first_slot == 0);
  ch.read_end(*h);
}

TEST_CASE("channel contract violations") {
  Channel ch(make_spec(2, 1, false));
  CHECK_THROWS_AS((void)ch.write_start(1), std::logic_error);  // n != r
  CHECK_THROWS_AS((void)ch.read_start(3), std::logic_error);

  RegionHandle w = ch.write_start(2);
  CHECK_THROWS_AS((void)ch.write_start(2), std::logic_error);  // already outstanding
  ch.write_end(w);
  CHECK_THROWS_AS(ch.write_end(w), std::logic_error);  // double end

  auto r = ch.read_start(2);
  REQUIRE(r.has_value());
  RegionHandle stale = *r;
  ch.read_end(*r);
  CHECK_THROWS_AS(ch.read_end(stale), std::logic_error);

  ch.close();
  CHECK_THROWS_AS((void)ch.write_start(2), std::logic_error);  // write after close
}

TEST_CASE("mismatched end direction is rejected") {
  Channel ch(make_spec(1, 1, false));
  RegionHandle w = ch.write_start(1);
  ch.write_end(w);
  auto r = ch.read_start(1);
  REQUIRE(r.has_value());
  RegionHandle h = *r;
  h.direction = RegionDirection::write;
  CHECK_THROWS_AS(ch.write_end(h), std::logic_error);
  h.direction = RegionDirection::read;
  ch.read_end(h);
}

TEST_CASE("reader on an empty channel suspends until a commit") {
  Channel ch(make_spec(1, 4, false));
  std::atomic<bool> got{false};
  auto reader = std::async(std::launch::async, [&] {
    auto h = ch.read_start(1);
    REQUIRE(h.has_value());
    got = true;
    ch.read_end(*h);
  });
  std::this_thread::sleep_for(30ms);
  CHECK_FALSE(got.load());

  RegionHandle w = ch.write_start(1);
  ch.write_end(w);
  REQUIRE(reader.wait_for(5s) == std::future_status::ready);
  CHECK(got.load());
}

TEST_CASE("writer on a full channel suspends until a release") {
  Channel ch(make_spec(1, 4, false));  // capacity 2 tokens
  for (int i = 0; i < 2; ++i) {
    RegionHandle w = ch.write_start(1);
    ch.write_end(w);
  }
  CHECK(ch.tokens_available() == 2);

  std::atomic<bool> wrote{false};
  auto writer = std::async(std::launch::async, [&] {
    RegionHandle w = ch.write_start(1);
    wrote = true;
    ch.write_end(w);
  });
  std::this_thread::sleep_for(30ms);
  CHECK_FALSE(wrote.load());

  auto h = ch.read_start(1);
  REQUIRE(h.has_value());
  ch.read_end(*h);
  REQUIRE(writer.wait_for(5s) == std::future_status::ready);
  CHECK(wrote.load());
}

TEST_CASE("abort wakes a blocked reader with RunAborted") {
  Channel ch(make_spec(1, 1, false));
  auto reader = std::async(std::launch::async, [&] {
    CHECK_THROWS_AS((void)ch.read_start(1), RunAborted);
  });
  std::this_thread::sleep_for(10ms);
  ch.abort();
  REQUIRE(reader.wait_for(5s) == std::future_status::ready);
}

// Single-threaded randomized interleaving against a plain FIFO oracle:
// every read must return exactly the initial token (if any) followed by
// the committed tokens in order, regions must never wrap, and the
// available count must track commits minus releases.
TEST_CASE("stream equivalence against a queue oracle") {
  for (std::uint32_t rate : {1u, 2u, 4u, 7u}) {
    for (bool delay : {false, true}) {
      CAPTURE(rate);
      CAPTURE(delay);
      const std::size_t token = 6;
      const std::uint64_t seed = 1000 + rate * 10 + delay;
      Channel ch(make_spec(rate, token, delay));
      std::deque<std::vector<std::byte>> oracle;
      if (delay) oracle.emplace_back(token, std::byte{0});

      std::mt19937_64 rng(seed);
      std::uint64_t next_token = 0;
      std::size_t model_available = delay ? 1 : 0;
      const std::size_t writable_limit = (delay ? 3 : 2) * std::size_t(rate);

      for (int step = 0; step < 4000; ++step) {
        const bool can_write = model_available + rate <= writable_limit;
        const bool can_read = model_available >= rate;
        REQUIRE((can_write || can_read));
        const bool do_write = can_write && (!can_read || (rng() & 1));

        if (do_write) {
          RegionHandle h = ch.write_start(rate);
          CHECK(h.first_slot + h.tokens <= ch.capacity_tokens());
          for (std::uint32_t t = 0; t < rate; ++t) {
            auto payload = token_payload(seed, next_token++, token);
            std::copy(payload.begin(), payload.end(), h.bytes.begin() + t * token);
            oracle.push_back(std::move(payload));
          }
          ch.write_end(h);
          model_available += rate;
        } else {
          auto h = ch.read_start(rate);
          REQUIRE(h.has_value());
          CHECK(h->first_slot + h->tokens <= ch.capacity_tokens());
          for (std::uint32_t t = 0; t < rate; ++t) {
            std::vector<std::byte> got(h->bytes.begin() + t * token,
                                       h->bytes.begin() + (t + 1) * token);
            REQUIRE_FALSE(oracle.empty());
            CHECK(got == oracle.front());
            oracle.pop_front();
          }
          ch.read_end(*h);
          model_available -= rate;
        }
        CHECK(ch.tokens_available() == model_available);
      }
      // Conservation at a quiescent point.
      CHECK(ch.tokens_written() - ch.tokens_read() ==
            ch.tokens_available() - (delay ? 1 : 0));
    }
  }
}

// One producer and one consumer running concurrently with randomized
// stalls; the consumer checks the byte-exact stream order on its own.
TEST_CASE("concurrent producer/consumer keeps the stream intact") {
  for (std::uint32_t rate : {1u, 4u, 7u}) {
    for (bool delay : {false, true}) {
      CAPTURE(rate);
      CAPTURE(delay);
      const std::size_t token = 8;
      const std::uint64_t seed = 42 + rate + (delay ? 100 : 0);
      const std::uint64_t batches = 3000;
      Channel ch(make_spec(rate, token, delay));

      std::thread producer([&] {
        std::mt19937_64 rng(seed);
        std::uint64_t next = 0;
        for (std::uint64_t b = 0; b < batches; ++b) {
          RegionHandle h = ch.write_start(rate);
          fill_tokens(h.bytes, token, seed, next);
          next += rate;
          ch.write_end(h);
          if ((rng() & 63) == 0) std::this_thread::yield();
        }
        ch.close();
      });

      std::uint64_t consumed = 0;
      bool order_ok = true;
      {
        std::mt19937_64 rng(seed ^ 0xdead);
        std::uint64_t expected = 0;
        bool initial_pending = delay;
        while (auto h = ch.read_start(rate)) {
          for (std::uint32_t t = 0; t < rate && order_ok; ++t) {
            std::vector<std::byte> got(h->bytes.begin() + t * token,
                                       h->bytes.begin() + (t + 1) * token);
            if (initial_pending) {
              order_ok = got == std::vector<std::byte>(token, std::byte{0});
              initial_pending = false;
            } else {
              order_ok = got == token_payload(seed, expected++, token);
            }
          }
          consumed += rate;
          ch.read_end(*h);
          if ((rng() & 63) == 0) std::this_thread::yield();
        }
      }
      producer.join();

      CHECK(order_ok);
      const std::uint64_t total = batches * rate + (delay ? 1 : 0);
      CHECK(consumed == (total / rate) * rate);
      CHECK(ch.tokens_available() == total - consumed);  // residual below one batch
    }
  }
}

TEST_CASE("end of stream after close and drain") {
  Channel ch(make_spec(2, 1, false));
  RegionHandle w = ch.write_start(2);
  ch.write_end(w);
  ch.close();

  auto h = ch.read_start(2);
  REQUIRE(h.has_value());
  ch.read_end(*h);
  CHECK_FALSE(ch.read_start(2).has_value());
  CHECK_FALSE(ch.read_start(2).has_value());  // stays at end of stream
}
