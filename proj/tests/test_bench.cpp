#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include "lisa/bench.hpp"
#include "lisa/errors.hpp"
#include "lisa/quantizer.hpp"

using namespace lisa;

namespace {

BenchOptions small_options() {
  BenchOptions o;
  o.lengths = {16};
  o.token_budget = 64;
  o.dim = 8;
  o.num_books = 2;
  o.num_words = 8;
  o.threads = 1;
  return o;
}

}  // namespace

TEST_CASE("memory estimate") {
  MemoryConfig c;
  c.num_items = 80000;
  c.length = 50;
  c.dim = 128;
  c.num_books = 8;
  c.num_words = 256;
  const auto m = memory_estimate(c);
  CHECK(m.projected_values == 2097152);
  CHECK(m.ip_table == 8ull * 256 * 256 * 8);
  CHECK(m.prefix_histogram == 50ull * 8 * 256 * 8);
  CHECK(m.streaming_histogram == 8ull * 256 * 8);
  CHECK(m.state_record == 8 * 256 * 4 + 8 * 2 + 16);
  const double ratio =
      static_cast<double>(m.dense_embeddings) / (m.index_storage + static_cast<double>(m.codebook_storage));
  CHECK(std::abs(ratio - 24.26) <= 0.01);
  CHECK(ratio == doctest::Approx(compression_ratio(80000, 128, {8, 256})).epsilon(1e-15));
  c.num_words = 100;
  CHECK_THROWS_AS(memory_estimate(c), InvalidInput);
}

TEST_CASE("single length gives one row per method") {
  const auto report = bench_attention(small_options());
  REQUIRE(report.rows.size() == 2);
  for (const auto& row : report.rows) {
    CHECK(row.length == 16);
    CHECK(row.batch == 4);
    CHECK(row.mean_ms > 0.0);
    CHECK(row.std_ms >= 0.0);
    CHECK(row.est_bytes > 0);
    CHECK(!row.skipped);
  }
  CHECK(report.find("vanilla", 16).method == "vanilla");
  CHECK_THROWS_AS(report.find("lisa", 32), InvalidInput);
}

TEST_CASE("csv shape is stable") {
  auto o = small_options();
  o.lengths = {16, 32};
  const auto a = bench_to_csv(bench_attention(o));
  const auto b = bench_to_csv(bench_attention(o));
  CHECK(a.rfind("method,L,batch,mean_ms,std_ms,est_bytes\n", 0) == 0);
  auto shape = [](const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    std::vector<std::string> keys;
    while (std::getline(in, line)) {
      keys.push_back(line.substr(0, line.find(',', line.find(',') + 1)));
    }
    return keys;
  };
  CHECK(shape(a) == shape(b));
  CHECK(shape(a).size() == 5);
}

TEST_CASE("vanilla rows over the memory cap are skipped") {
  auto o = small_options();
  o.memory_cap_bytes = 100;
  const auto report = bench_attention(o);
  const auto& row = report.find("vanilla", 16);
  CHECK(row.skipped);
  CHECK(row.reason.find("out of memory") != std::string::npos);
  CHECK(!report.find("lisa", 16).skipped);
  CHECK(bench_to_csv(report).find("vanilla,16,4,,,") != std::string::npos);
}

TEST_CASE("bad bench options") {
  auto o = small_options();
  o.lengths = {24};
  CHECK_THROWS_AS(bench_attention(o), InvalidInput);
  o = small_options();
  o.runs = 4;
  CHECK_THROWS_AS(bench_attention(o), InvalidInput);
  CHECK_THROWS_AS(parse_bench_method("reformer"), InvalidInput);
}

TEST_CASE("worker count from the environment") {
  ::setenv("LISA_THREADS", "3", 1);
  CHECK(threads_from_env() == 3);
  auto o = small_options();
  o.threads = 0;
  o.methods = {BenchMethod::lisa};
  CHECK(bench_attention(o).threads == 3);
  ::setenv("LISA_THREADS", "zero", 1);
  CHECK_THROWS_AS(threads_from_env(), InvalidInput);
  ::unsetenv("LISA_THREADS");
  CHECK(threads_from_env(1) == 1);
}
