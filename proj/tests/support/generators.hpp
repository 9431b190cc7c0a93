#pragma once

// Seeded random instances for property tests.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "lisa/attention.hpp"
#include "lisa/types.hpp"

namespace gen {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::size_t size(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(engine_);
  }
  double normal(double scale = 1.0) { return scale * std::normal_distribution<double>()(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

inline lisa::Matrix matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  lisa::Matrix m(rows, cols);
  for (double& v : m.values()) {
    v = rng.normal(scale);
  }
  return m;
}

inline lisa::Codebooks codebooks(Rng& rng, std::size_t books, std::size_t words, std::size_t dim,
                                 double scale = 1.0) {
  std::vector<double> values(books * words * dim);
  for (double& v : values) {
    v = rng.normal(scale);
  }
  return lisa::Codebooks(books, words, dim, std::move(values));
}

inline lisa::CodewordIndices codes(Rng& rng, std::size_t length, std::size_t books,
                                   std::size_t words) {
  lisa::CodewordIndices ids(length, books);
  for (std::size_t i = 0; i < length; ++i) {
    for (std::size_t b = 0; b < books; ++b) {
      ids(i, b) = static_cast<lisa::CodewordId>(rng.size(0, words - 1));
    }
  }
  return ids;
}

/// Random projections near the identity, scale 1/sqrt(D).
inline lisa::ProjectionSet projections(Rng& rng, std::size_t dim, double noise = 0.3) {
  auto near_identity = [&] {
    lisa::Matrix m = lisa::Matrix::identity(dim);
    for (double& v : m.values()) {
      v += rng.normal(noise);
    }
    return m;
  };
  lisa::ProjectionSet p;
  p.query = near_identity();
  p.key = near_identity();
  p.value = near_identity();
  p.scale = 1.0 / std::sqrt(static_cast<double>(dim));
  return p;
}

/// Random soft assignments: a Dirichlet-like row per (position, codebook).
inline lisa::SoftAssignments soft(Rng& rng, std::size_t length, std::size_t books,
                                  std::size_t words) {
  lisa::SoftAssignments s(length, books, words);
  for (std::size_t i = 0; i < length; ++i) {
    for (std::size_t b = 0; b < books; ++b) {
      auto row = s.row(i, b);
      double total = 0.0;
      for (double& v : row) {
        v = -std::log(rng.uniform(1e-12, 1.0));
        total += v;
      }
      for (double& v : row) {
        v /= total;
      }
    }
  }
  return s;
}

inline double max_abs_diff(const lisa::Matrix& a, const lisa::Matrix& b) {
  double worst = 0.0;
  for (std::size_t k = 0; k < a.values().size(); ++k) {
    worst = std::max(worst, std::abs(a.values()[k] - b.values()[k]));
  }
  return worst;
}

}  // namespace gen
