#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lisa {

enum class BenchMethod { lisa, vanilla };

BenchMethod parse_bench_method(const std::string& name);
std::string to_string(BenchMethod method);

struct BenchOptions {
  std::vector<BenchMethod> methods{BenchMethod::lisa, BenchMethod::vanilla};
  std::vector<std::size_t> lengths{256, 512, 1024, 2048, 4096, 8192};
  /// Tokens per timed pass; every length must divide it.
  std::size_t token_budget = 8192;
  std::size_t dim = 32;
  std::size_t num_books = 8;
  std::size_t num_words = 32;
  /// Timed passes per row, after one discarded warmup. At least 5.
  std::size_t runs = 5;
  /// Vanilla rows whose score buffer estimate exceeds this are skipped.
  std::uint64_t memory_cap_bytes = 2ull << 30;
  /// Worker threads for the LISA batch; 0 reads LISA_THREADS, else 1.
  std::size_t threads = 0;
  std::uint64_t seed = 5;
};

struct BenchRow {
  std::string method;
  std::size_t length = 0;
  std::size_t batch = 0;
  double mean_ms = 0.0;
  double std_ms = 0.0;
  /// Analytic working-set estimate for one pass.
  std::uint64_t est_bytes = 0;
  /// Resident-set growth observed across the row, 0 when unavailable.
  std::uint64_t measured_bytes = 0;
  bool skipped = false;
  std::string reason;
};

struct BenchReport {
  std::size_t threads = 1;
  std::vector<BenchRow> rows;

  const BenchRow& find(const std::string& method, std::size_t length) const;
};

/// Times LISA (histogram attention over random codes) and causal dense
/// attention over random embeddings with batch = token_budget / L, so every
/// pass processes the same number of tokens.
BenchReport bench_attention(const BenchOptions& options);

/// CSV with header `method,L,batch,mean_ms,std_ms,est_bytes`. Skipped rows
/// leave mean_ms and std_ms empty.
std::string bench_to_csv(const BenchReport& report);

/// Worker count from LISA_THREADS, or `fallback` when unset.
std::size_t threads_from_env(std::size_t fallback = 1);

struct MemoryConfig {
  std::size_t num_items = 0;
  std::size_t length = 0;
  std::size_t dim = 0;
  std::size_t num_books = 0;
  std::size_t num_words = 0;
};

/// Closed-form byte counts of the structures behind histogram attention.
struct MemoryEstimate {
  std::uint64_t ip_table = 0;           // B W^2 f64
  std::uint64_t projected_values = 0;   // B W D f64
  std::uint64_t prefix_histogram = 0;   // L B W f64
  std::uint64_t streaming_histogram = 0;  // B W f64
  double index_storage = 0.0;           // N B log2(W) / 8
  std::uint64_t codebook_storage = 0;   // B W D f32
  std::uint64_t state_record = 0;       // serialized hard streaming state
  std::uint64_t dense_embeddings = 0;   // N D f32
};

MemoryEstimate memory_estimate(const MemoryConfig& config);

}  // namespace lisa
