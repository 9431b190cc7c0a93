#include "lisa/bench.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "lisa/attention.hpp"
#include "lisa/errors.hpp"
#include "lisa/streaming.hpp"

namespace lisa {

namespace {

using Clock = std::chrono::steady_clock;

// Resident set size from /proc; 0 where unavailable.
std::uint64_t resident_bytes() {
  std::ifstream in("/proc/self/statm");
  std::uint64_t pages = 0;
  std::uint64_t resident = 0;
  if (!(in >> pages >> resident)) {
    return 0;
  }
  return resident * 4096;
}

std::uint64_t vanilla_bytes(std::size_t batch, std::size_t length, std::size_t dim) {
  // Materialized L x L scores plus Q, K, V per sequence.
  return static_cast<std::uint64_t>(batch) *
         (static_cast<std::uint64_t>(length) * length * 8 + 3ull * length * dim * 8);
}

std::uint64_t lisa_bytes(std::size_t batch, std::size_t length, const BenchOptions& o) {
  const std::uint64_t table = o.num_books * o.num_words * o.num_words * 8ull;
  const std::uint64_t values = o.num_books * o.num_words * o.dim * 8ull;
  const std::uint64_t per_seq = length * o.num_books * 2ull + length * o.dim * 8ull +
                                o.num_books * o.num_words * 8ull;
  return table + values + batch * per_seq;
}

struct Timing {
  double mean_ms = 0.0;
  double std_ms = 0.0;
};

template <class Fn>
Timing time_runs(std::size_t runs, Fn&& fn) {
  fn();  // warmup
  std::vector<double> ms;
  ms.reserve(runs);
  for (std::size_t r = 0; r < runs; ++r) {
    const auto start = Clock::now();
    fn();
    const auto stop = Clock::now();
    ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
  }
  Timing t;
  for (double v : ms) {
    t.mean_ms += v;
  }
  t.mean_ms /= static_cast<double>(runs);
  double var = 0.0;
  for (double v : ms) {
    var += (v - t.mean_ms) * (v - t.mean_ms);
  }
  t.std_ms = runs > 1 ? std::sqrt(var / static_cast<double>(runs - 1)) : 0.0;
  return t;
}

BenchRow run_lisa(const BenchOptions& o, std::size_t length, std::size_t threads,
                  std::mt19937_64& rng) {
  const std::size_t batch = o.token_budget / length;
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> words(o.num_books * o.num_words * o.dim);
  for (double& w : words) {
    w = gauss(rng);
  }
  const Codebooks codebooks(o.num_books, o.num_words, o.dim, std::move(words));
  const auto proj = ProjectionSet::identity(o.dim);
  const auto table = build_ip_table(codebooks, proj);
  const auto values = project_values(codebooks, proj);

  PaddedBatch input;
  input.max_length = length;
  input.lengths.assign(batch, length);
  input.packed = CodewordIndices(batch * length, o.num_books);
  std::uniform_int_distribution<std::size_t> any_word(0, o.num_words - 1);
  for (std::size_t i = 0; i < input.packed.length(); ++i) {
    for (std::size_t b = 0; b < o.num_books; ++b) {
      input.packed(i, b) = static_cast<CodewordId>(any_word(rng));
    }
  }

  BenchRow row;
  row.method = "lisa";
  row.length = length;
  row.batch = batch;
  row.est_bytes = lisa_bytes(batch, length, o);
  const std::uint64_t before = resident_bytes();
  std::uint64_t peak = before;
  const auto t = time_runs(o.runs, [&] {
    const auto out = lisa_forward_batch(input, table, values, AttentionMode::unidirectional,
                                        threads);
    peak = std::max(peak, resident_bytes());
  });
  row.mean_ms = t.mean_ms;
  row.std_ms = t.std_ms;
  row.measured_bytes = peak > before ? peak - before : 0;
  return row;
}

BenchRow run_vanilla(const BenchOptions& o, std::size_t length, std::mt19937_64& rng) {
  const std::size_t batch = o.token_budget / length;
  BenchRow row;
  row.method = "vanilla";
  row.length = length;
  row.batch = batch;
  row.est_bytes = vanilla_bytes(batch, length, o.dim);
  if (row.est_bytes > o.memory_cap_bytes) {
    row.skipped = true;
    row.reason = "out of memory: estimate " + std::to_string(row.est_bytes) +
                 " bytes exceeds cap " + std::to_string(o.memory_cap_bytes);
    return row;
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Matrix> inputs;
  inputs.reserve(batch);
  for (std::size_t s = 0; s < batch; ++s) {
    Matrix x(length, o.dim);
    for (double& v : x.values()) {
      v = gauss(rng);
    }
    inputs.push_back(std::move(x));
  }
  const auto proj = ProjectionSet::identity(o.dim);
  const std::uint64_t before = resident_bytes();
  std::uint64_t peak = before;
  const auto t = time_runs(o.runs, [&] {
    for (const auto& x : inputs) {
      const auto out = dense_attention(x, proj, true);
    }
    peak = std::max(peak, resident_bytes());
  });
  row.mean_ms = t.mean_ms;
  row.std_ms = t.std_ms;
  row.measured_bytes = peak > before ? peak - before : 0;
  return row;
}

}  // namespace

BenchMethod parse_bench_method(const std::string& name) {
  if (name == "lisa") {
    return BenchMethod::lisa;
  }
  if (name == "vanilla") {
    return BenchMethod::vanilla;
  }
  throw InvalidInput("unknown bench method '" + name + "' (expected lisa or vanilla)");
}

std::string to_string(BenchMethod method) {
  return method == BenchMethod::lisa ? "lisa" : "vanilla";
}

const BenchRow& BenchReport::find(const std::string& method, std::size_t length) const {
  for (const auto& row : rows) {
    if (row.method == method && row.length == length) {
      return row;
    }
  }
  throw InvalidInput("no bench row for " + method + " at L=" + std::to_string(length));
}

std::size_t threads_from_env(std::size_t fallback) {
  const char* raw = std::getenv("LISA_THREADS");
  if (raw == nullptr || *raw == '\0') {
    return fallback;
  }
  char* end = nullptr;
  const long value = std::strtol(raw, &end, 10);
  LISA_REQUIRE(end != raw && *end == '\0' && value >= 1, InvalidInput,
               std::string("LISA_THREADS must be a positive integer, got '") + raw + "'");
  return static_cast<std::size_t>(value);
}

BenchReport bench_attention(const BenchOptions& options) {
  LISA_REQUIRE(options.runs >= 5, InvalidInput, "bench needs runs >= 5");
  LISA_REQUIRE(!options.lengths.empty(), InvalidInput, "bench needs at least one length");
  LISA_REQUIRE(options.dim >= 1 && options.num_books >= 1 && options.num_words >= 2 &&
                   options.num_words <= kMaxCodewords,
               InvalidInput, "bench needs D >= 1, B >= 1, 2 <= W <= 65536");
  for (std::size_t length : options.lengths) {
    LISA_REQUIRE(length >= 1 && options.token_budget % length == 0, InvalidInput,
                 "token budget " + std::to_string(options.token_budget) +
                     " is not divisible by L=" + std::to_string(length));
  }
  BenchReport report;
  report.threads = options.threads == 0 ? threads_from_env(1) : options.threads;
  std::mt19937_64 rng(options.seed);
  for (BenchMethod method : options.methods) {
    for (std::size_t length : options.lengths) {
      report.rows.push_back(method == BenchMethod::lisa
                                ? run_lisa(options, length, report.threads, rng)
                                : run_vanilla(options, length, rng));
    }
  }
  return report;
}

std::string bench_to_csv(const BenchReport& report) {
  std::ostringstream out;
  out << "method,L,batch,mean_ms,std_ms,est_bytes\n";
  out.setf(std::ios::fixed);
  out.precision(4);
  for (const auto& row : report.rows) {
    out << row.method << ',' << row.length << ',' << row.batch << ',';
    if (!row.skipped) {
      out << row.mean_ms << ',' << row.std_ms;
    } else {
      out << ',';
    }
    out << ',' << row.est_bytes << '\n';
  }
  return out.str();
}

MemoryEstimate memory_estimate(const MemoryConfig& c) {
  LISA_REQUIRE(c.num_books >= 1 && c.num_words >= 2 && std::has_single_bit(c.num_words),
               InvalidInput, "memory estimate needs B >= 1 and W a power of two >= 2");
  const std::uint64_t b = c.num_books;
  const std::uint64_t w = c.num_words;
  const std::uint64_t d = c.dim;
  MemoryEstimate m;
  m.ip_table = b * w * w * 8;
  m.projected_values = b * w * d * 8;
  m.prefix_histogram = static_cast<std::uint64_t>(c.length) * b * w * 8;
  m.streaming_histogram = b * w * 8;
  m.index_storage = static_cast<double>(c.num_items) * static_cast<double>(b) *
                    static_cast<double>(std::bit_width(c.num_words) - 1) / 8.0;
  m.codebook_storage = b * w * d * 4;
  m.state_record = state_record_size(c.num_books, c.num_words, StateMode::hard);
  m.dense_embeddings = static_cast<std::uint64_t>(c.num_items) * d * 4;
  return m;
}

}  // namespace lisa
