#include <doctest.h>

#include <algorithm>
#include <chrono>

#include "lisa/errors.hpp"
#include "lisa/streaming.hpp"
#include "support/generators.hpp"

using namespace lisa;

TEST_CASE("init") {
  const auto s = state_init(2, 4);
  CHECK(s.step == 0);
  CHECK(s.counts == std::vector<std::uint32_t>(8, 0));
  CHECK(s.last_indices == std::vector<CodewordId>(2, kUnsetIndex));
  CHECK(state_init(2, 4) == s);
  CHECK_THROWS_AS(state_init(0, 4), InvalidInput);
  CHECK_THROWS_AS(state_init(2, 1), InvalidInput);
}

TEST_CASE("update") {
  auto s = state_init(2, 4);
  state_update(s, std::vector<CodewordId>{0, 1});
  CHECK(s.step == 1);
  CHECK(s.counts == std::vector<std::uint32_t>{1, 0, 0, 0, 0, 1, 0, 0});
  CHECK(s.last_indices == std::vector<CodewordId>{0, 1});

  auto r = state_init(2, 4);
  for (int t = 0; t < 9; ++t) state_update(r, std::vector<CodewordId>{3, 2});
  CHECK(r.counts[3] == 9);
  CHECK(r.counts[4 + 2] == 9);

  CHECK_THROWS_AS(state_update(s, std::vector<CodewordId>{4, 0}), OutOfRange);
  CHECK_THROWS_AS(state_update(s, std::vector<CodewordId>{0}), InvalidInput);
  CHECK(s.step == 1);
}

TEST_CASE("state histogram equals the last prefix histogram row") {
  gen::Rng rng(40);
  const auto ids = gen::codes(rng, 200, 3, 16);
  auto s = state_init(3, 16);
  for (std::size_t i = 0; i < 200; ++i) {
    state_update(s, ids.row(i));
    for (std::size_t b = 0; b < 3; ++b) {
      std::uint64_t sum = 0;
      for (std::size_t w = 0; w < 16; ++w) sum += s.counts[b * 16 + w];
      CHECK(sum == s.step);
    }
  }
  const auto f = histogram_prefix(ids, 16);
  for (std::size_t k = 0; k < 48; ++k) CHECK(static_cast<double>(s.counts[k]) == f.slab(199)[k]);
}

TEST_CASE("step inference") {
  gen::Rng rng(41);
  const auto cb = gen::codebooks(rng, 3, 8, 5);
  const auto proj = gen::projections(rng, 5);
  const auto table = build_ip_table(cb, proj);
  const auto values = project_values(cb, proj);

  SUBCASE("empty history") {
    CHECK_THROWS_AS(step_infer(state_init(3, 8), table, values), EmptyHistory);
  }
  SUBCASE("first step returns the item's value composition") {
    auto s = state_init(3, 8);
    const std::vector<CodewordId> item{1, 7, 4};
    state_update(s, item);
    const auto out = step_infer(s, table, values);
    for (std::size_t k = 0; k < 5; ++k) {
      const double expect = values.row(0, 1)[k] + values.row(1, 7)[k] + values.row(2, 4)[k];
      CHECK(out[k] == doctest::Approx(expect));
    }
    for (int t = 0; t < 5; ++t) {
      state_update(s, item);
      const auto again = step_infer(s, table, values);
      for (std::size_t k = 0; k < 5; ++k) CHECK(again[k] == doctest::Approx(out[k]).epsilon(1e-14));
    }
  }
  SUBCASE("agrees with the batch forward at checkpoints") {
    const auto ids = gen::codes(rng, 500, 3, 8);
    const auto batch = lisa_forward(ids, table, values, AttentionMode::unidirectional);
    auto s = state_init(3, 8);
    for (std::size_t i = 0; i < 500; ++i) {
      state_update(s, ids.row(i));
      const auto out = step_infer(s, table, values);
      for (std::size_t k = 0; k < 5; ++k) CHECK(std::abs(out[k] - batch(i, k)) <= 1e-6);
    }
  }
  SUBCASE("shape mismatch") {
    auto s = state_init(2, 8);
    state_update(s, std::vector<CodewordId>{0, 0});
    CHECK_THROWS_AS(step_infer(s, table, values), InvalidInput);
  }
}

TEST_CASE("soft states") {
  gen::Rng rng(42);
  const auto cb = gen::codebooks(rng, 2, 4, 3);
  const auto proj = gen::projections(rng, 3);
  const auto table = build_ip_table(cb, proj);
  const auto values = project_values(cb, proj);
  const auto ids = gen::codes(rng, 30, 2, 4);
  const auto masses = gen::soft(rng, 30, 2, 4);
  const auto batch = lisa_forward_soft(masses, ids, table, values, AttentionMode::unidirectional);

  auto s = state_init(2, 4, StateMode::soft);
  CHECK_THROWS_AS(state_update(s, ids.row(0)), InvalidInput);
  for (std::size_t i = 0; i < 30; ++i) {
    state_update_soft(s, masses.position(i), ids.row(i));
    const auto out = step_infer(s, table, values);
    for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(out[k] - batch(i, k)) <= 1e-9);
  }
  auto hard = state_init(2, 4);
  CHECK_THROWS_AS(state_update_soft(hard, masses.position(0), ids.row(0)), InvalidInput);

  const auto restored = deserialize_state(serialize_state(s));
  CHECK(restored == s);
  CHECK(restored.mode == StateMode::soft);
}

TEST_CASE("serialization") {
  CHECK(state_record_size(8, 256, StateMode::hard) == 8 * 256 * 4 + 8 * 2 + 16);

  gen::Rng rng(43);
  const auto ids = gen::codes(rng, 50, 4, 32);
  auto s = state_init(4, 32);
  CHECK(deserialize_state(serialize_state(s)) == s);
  for (std::size_t i = 0; i < 50; ++i) state_update(s, ids.row(i));
  const auto bytes = serialize_state(s);
  CHECK(bytes.size() == state_record_size(4, 32, StateMode::hard));
  CHECK(deserialize_state(bytes) == s);

  // Layout spot checks: little-endian header then last ids.
  CHECK(bytes[0] == 4);
  CHECK(bytes[4] == 32);
  CHECK(bytes[8] == 50);
  CHECK(bytes[16] == (ids(49, 0) & 0xFF));

  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(deserialize_state(truncated), InvalidInput);

  auto inconsistent = bytes;
  inconsistent[8] = 51;  // step no longer matches the histogram rows
  CHECK_THROWS_AS(deserialize_state(inconsistent), InvalidInput);

  auto bad_id = bytes;
  bad_id[16] = 40;
  bad_id[17] = 0;
  CHECK_THROWS_AS(deserialize_state(bad_id), OutOfRange);
}

TEST_CASE("step inference cost does not grow with history") {
  gen::Rng rng(44);
  const auto cb = gen::codebooks(rng, 8, 64, 32);
  const auto proj = ProjectionSet::identity(32);
  const auto table = build_ip_table(cb, proj);
  const auto values = project_values(cb, proj);
  auto s = state_init(8, 64);
  std::vector<CodewordId> item(8);

  auto per_call_us = [&] {
    std::vector<double> samples;
    for (int rep = 0; rep < 7; ++rep) {
      const auto start = std::chrono::steady_clock::now();
      for (int t = 0; t < 200; ++t) {
        const auto out = step_infer(s, table, values);
        REQUIRE(out.size() == 32);
      }
      const auto stop = std::chrono::steady_clock::now();
      samples.push_back(std::chrono::duration<double, std::micro>(stop - start).count() / 200.0);
    }
    std::sort(samples.begin(), samples.end());
    return samples[3];
  };
  auto advance_to = [&](std::uint64_t step) {
    while (s.step < step) {
      for (auto& id : item) id = static_cast<CodewordId>(rng.size(0, 63));
      state_update(s, item);
    }
  };
  advance_to(100);
  per_call_us();  // warm
  const double early = per_call_us();
  advance_to(100000);
  const double late = per_call_us();
  MESSAGE("step 1e2: " << early << " us, step 1e5: " << late << " us");
  CHECK(late <= 2.0 * early);
}
