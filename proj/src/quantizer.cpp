#include "lisa/quantizer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <random>

#include "lisa/errors.hpp"

namespace lisa {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    acc += diff * diff;
  }
  return acc;
}

void check_codebook_request(std::size_t num_books, std::size_t num_words) {
  LISA_REQUIRE(num_books >= 1, InvalidInput, "need at least one codebook");
  LISA_REQUIRE(num_words >= 2 && num_words <= kMaxCodewords, InvalidInput,
               "W must be in [2, 65536], got " + std::to_string(num_words));
}

void check_vector(std::span<const double> x, const Codebooks& codebooks) {
  LISA_REQUIRE(x.size() == codebooks.dim(), InvalidInput,
               "vector has dimension " + std::to_string(x.size()) + ", codebooks expect " +
                   std::to_string(codebooks.dim()));
  for (double v : x) {
    LISA_REQUIRE(std::isfinite(v), InvalidInput, "vector contains non-finite values");
  }
}

/// One k-means codebook over a fixed residual set. Codewords are a W x D
/// window into the shared Codebooks storage.
class StageFitter {
 public:
  StageFitter(const Matrix& residual, std::span<double> words, std::size_t num_words)
      : residual_(residual),
        words_(words),
        num_words_(num_words),
        dim_(residual.cols()),
        errors_(residual.rows(), 0.0) {}

  std::span<double> word(std::size_t w) { return words_.subspan(w * dim_, dim_); }

  /// First codeword is the residual mean; the rest are drawn by D^2
  /// sampling. Starting from the mean keeps the first iteration's error at
  /// or below the error of leaving this codebook out.
  void seed(std::mt19937_64& rng) {
    const std::size_t n = residual_.rows();
    auto first = word(0);
    std::fill(first.begin(), first.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = residual_.row(i);
      for (std::size_t k = 0; k < dim_; ++k) {
        first[k] += r[k];
      }
    }
    for (double& v : first) {
      v /= static_cast<double>(n);
    }

    std::vector<double> nearest(n);
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = squared_distance(residual_.row(i), first);
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t w = 1; w < num_words_; ++w) {
      double total = 0.0;
      for (double d : nearest) {
        total += d;
      }
      std::size_t pick = 0;
      if (total > 0.0) {
        const double target = unit(rng) * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (nearest[i] <= 0.0) {
            continue;
          }
          pick = i;
          acc += nearest[i];
          if (acc > target) {
            break;
          }
        }
      }
      const auto src = residual_.row(pick);
      auto dst = word(w);
      std::copy(src.begin(), src.end(), dst.begin());
      for (std::size_t i = 0; i < n; ++i) {
        nearest[i] = std::min(nearest[i], squared_distance(residual_.row(i), dst));
      }
    }
  }

  /// Assign, recompute means, reseed dead codewords. An item only changes
  /// codeword if another is strictly closer, so the error never increases.
  /// Returns the total squared error and whether anything moved.
  std::pair<double, bool> iterate(std::vector<CodewordId>& assign, bool has_assignment) {
    const std::size_t n = residual_.rows();
    bool changed = !has_assignment;
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = residual_.row(i);
      std::size_t best = has_assignment ? assign[i] : 0;
      double best_dist = squared_distance(r, word(best));
      for (std::size_t w = 0; w < num_words_; ++w) {
        const double dist = squared_distance(r, word(w));
        if (dist < best_dist) {
          best = w;
          best_dist = dist;
        }
      }
      if (best != assign[i]) {
        changed = true;
      }
      assign[i] = static_cast<CodewordId>(best);
    }

    std::vector<std::size_t> counts(num_words_, 0);
    std::vector<double> sums(num_words_ * dim_, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = residual_.row(i);
      ++counts[assign[i]];
      double* s = sums.data() + assign[i] * dim_;
      for (std::size_t k = 0; k < dim_; ++k) {
        s[k] += r[k];
      }
    }
    for (std::size_t w = 0; w < num_words_; ++w) {
      if (counts[w] == 0) {
        continue;
      }
      auto c = word(w);
      const double inv = 1.0 / static_cast<double>(counts[w]);
      for (std::size_t k = 0; k < dim_; ++k) {
        c[k] = sums[w * dim_ + k] * inv;
      }
    }

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      errors_[i] = squared_distance(residual_.row(i), word(assign[i]));
      total += errors_[i];
    }

    // Reseeding leaves every current assignment untouched, so the error
    // reported for this iteration stands; the next assignment step can only
    // lower it.
    std::vector<bool> taken(n, false);
    for (std::size_t w = 0; w < num_words_; ++w) {
      if (counts[w] != 0) {
        continue;
      }
      changed = true;
      std::size_t worst = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) {
          continue;
        }
        if (worst == n || errors_[i] > errors_[worst]) {
          worst = i;
        }
      }
      if (worst == n) {
        worst = 0;
      } else {
        taken[worst] = true;
      }
      const auto src = residual_.row(worst);
      auto dst = word(w);
      std::copy(src.begin(), src.end(), dst.begin());
    }
    return {total, changed};
  }

 private:
  const Matrix& residual_;
  std::span<double> words_;
  std::size_t num_words_;
  std::size_t dim_;
  std::vector<double> errors_;
};

void subtract_codewords(Matrix& residual, const std::vector<CodewordId>& assign,
                        std::span<const double> words, std::size_t dim) {
  for (std::size_t i = 0; i < residual.rows(); ++i) {
    auto r = residual.row(i);
    const double* c = words.data() + assign[i] * dim;
    for (std::size_t k = 0; k < dim; ++k) {
      r[k] -= c[k];
    }
  }
}

void add_codewords(Matrix& residual, const std::vector<CodewordId>& assign,
                   std::span<const double> words, std::size_t dim) {
  for (std::size_t i = 0; i < residual.rows(); ++i) {
    auto r = residual.row(i);
    const double* c = words.data() + assign[i] * dim;
    for (std::size_t k = 0; k < dim; ++k) {
      r[k] += c[k];
    }
  }
}

std::size_t best_codeword(std::span<const double> residual, const Codebooks& codebooks,
                          std::size_t b) {
  std::size_t best = 0;
  double best_sim = -std::numeric_limits<double>::infinity();
  for (std::size_t w = 0; w < codebooks.num_words(); ++w) {
    const double sim = codeword_similarity(residual, codebooks.codeword(b, w));
    if (sim > best_sim) {
      best_sim = sim;
      best = w;
    }
  }
  return best;
}

}  // namespace

FitResult fit_codebooks(const EmbeddingMatrix& embeddings, const FitOptions& options) {
  LISA_REQUIRE(embeddings.rows() >= 1 && embeddings.cols() >= 1, InvalidInput,
               "cannot fit codebooks to an empty embedding matrix");
  LISA_REQUIRE(embeddings.all_finite(), InvalidInput, "embeddings contain non-finite values");
  LISA_REQUIRE(options.iters >= 1, InvalidInput, "fit needs iters >= 1");
  check_codebook_request(options.num_books, options.num_words);

  const std::size_t n = embeddings.rows();
  const std::size_t dim = embeddings.cols();
  const std::size_t num_books = options.num_books;
  const std::size_t num_words = options.num_words;

  FitResult result;
  if (n < num_words) {
    result.warnings.push_back("only " + std::to_string(n) + " items for " +
                              std::to_string(num_words) +
                              " codewords per codebook; some codewords will duplicate");
  }

  std::vector<double> storage(num_books * num_words * dim, 0.0);
  std::vector<std::vector<CodewordId>> assign(num_books, std::vector<CodewordId>(n, 0));
  Matrix residual = embeddings;
  std::mt19937_64 rng(options.seed);
  const double scale = 1.0 / static_cast<double>(n * dim);

  auto words_of = [&](std::size_t b) {
    return std::span<double>(storage).subspan(b * num_words * dim, num_words * dim);
  };

  for (std::size_t b = 0; b < num_books; ++b) {
    StageFitter stage(residual, words_of(b), num_words);
    stage.seed(rng);
    for (std::size_t it = 0; it < options.iters; ++it) {
      const auto [err, changed] = stage.iterate(assign[b], it > 0);
      result.mse_history.push_back(err * scale);
      if (!changed) {
        break;
      }
    }
    subtract_codewords(residual, assign[b], words_of(b), dim);
  }

  for (std::size_t pass = 0; pass < options.refine_passes; ++pass) {
    for (std::size_t b = 0; b < num_books; ++b) {
      add_codewords(residual, assign[b], words_of(b), dim);
      StageFitter stage(residual, words_of(b), num_words);
      const auto [err, changed] = stage.iterate(assign[b], true);
      (void)changed;
      result.mse_history.push_back(err * scale);
      subtract_codewords(residual, assign[b], words_of(b), dim);
    }
  }

  double total = 0.0;
  for (double v : residual.values()) {
    total += v * v;
  }
  result.final_mse = total * scale;
  result.codebooks = Codebooks(num_books, num_words, dim, std::move(storage));
  result.assignments = CodewordIndices(n, num_books);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t b = 0; b < num_books; ++b) {
      result.assignments(i, b) = assign[b][i];
    }
  }
  return result;
}

double codeword_similarity(std::span<const double> residual, std::span<const double> codeword) {
  double dot = 0.0;
  double norm = 0.0;
  for (std::size_t k = 0; k < codeword.size(); ++k) {
    dot += residual[k] * codeword[k];
    norm += codeword[k] * codeword[k];
  }
  return 2.0 * dot - norm;
}

std::vector<CodewordId> encode(std::span<const double> x, const Codebooks& codebooks) {
  check_vector(x, codebooks);
  std::vector<double> residual(x.begin(), x.end());
  std::vector<CodewordId> ids(codebooks.num_books());
  for (std::size_t b = 0; b < codebooks.num_books(); ++b) {
    const std::size_t best = best_codeword(residual, codebooks, b);
    ids[b] = static_cast<CodewordId>(best);
    const auto c = codebooks.codeword(b, best);
    for (std::size_t k = 0; k < residual.size(); ++k) {
      residual[k] -= c[k];
    }
  }
  return ids;
}

CodewordIndices encode_all(const Matrix& items, const Codebooks& codebooks) {
  CodewordIndices out(items.rows(), codebooks.num_books());
  for (std::size_t i = 0; i < items.rows(); ++i) {
    const auto ids = encode(items.row(i), codebooks);
    std::copy(ids.begin(), ids.end(), out.row(i).begin());
  }
  return out;
}

std::vector<double> reconstruct(std::span<const CodewordId> ids, const Codebooks& codebooks) {
  LISA_REQUIRE(ids.size() == codebooks.num_books(), InvalidInput,
               "expected one codeword id per codebook");
  std::vector<double> out(codebooks.dim(), 0.0);
  for (std::size_t b = 0; b < ids.size(); ++b) {
    LISA_REQUIRE(ids[b] < codebooks.num_words(), OutOfRange,
                 "codeword id " + std::to_string(ids[b]) + " in codebook " + std::to_string(b) +
                     " is >= W=" + std::to_string(codebooks.num_words()));
    const auto c = codebooks.codeword(b, ids[b]);
    for (std::size_t k = 0; k < out.size(); ++k) {
      out[k] += c[k];
    }
  }
  return out;
}

Matrix reconstruct_all(const CodewordIndices& ids, const Codebooks& codebooks) {
  Matrix out(ids.length(), codebooks.dim());
  for (std::size_t i = 0; i < ids.length(); ++i) {
    const auto x = reconstruct(ids.row(i), codebooks);
    std::copy(x.begin(), x.end(), out.row(i).begin());
  }
  return out;
}

std::vector<double> soft_assign(std::span<const double> x, const Codebooks& codebooks,
                                double temperature) {
  LISA_REQUIRE(temperature > 0.0 && std::isfinite(temperature), InvalidInput,
               "soft assignment temperature must be positive");
  check_vector(x, codebooks);
  const std::size_t num_words = codebooks.num_words();
  std::vector<double> residual(x.begin(), x.end());
  std::vector<double> out(codebooks.num_books() * num_words);
  for (std::size_t b = 0; b < codebooks.num_books(); ++b) {
    double* row = out.data() + b * num_words;
    std::size_t best = 0;
    for (std::size_t w = 0; w < num_words; ++w) {
      row[w] = codeword_similarity(residual, codebooks.codeword(b, w));
      if (row[w] > row[best]) {
        best = w;
      }
    }
    const double peak = row[best];
    double total = 0.0;
    for (std::size_t w = 0; w < num_words; ++w) {
      row[w] = std::exp((row[w] - peak) / temperature);
      total += row[w];
    }
    for (std::size_t w = 0; w < num_words; ++w) {
      row[w] /= total;
    }
    const auto c = codebooks.codeword(b, best);
    for (std::size_t k = 0; k < residual.size(); ++k) {
      residual[k] -= c[k];
    }
  }
  return out;
}

SoftAssignments soft_assign_all(const Matrix& items, const Codebooks& codebooks,
                                double temperature) {
  const std::size_t per_item = codebooks.num_books() * codebooks.num_words();
  std::vector<double> values;
  values.reserve(items.rows() * per_item);
  for (std::size_t i = 0; i < items.rows(); ++i) {
    const auto row = soft_assign(items.row(i), codebooks, temperature);
    values.insert(values.end(), row.begin(), row.end());
  }
  return SoftAssignments(items.rows(), codebooks.num_books(), codebooks.num_words(),
                         std::move(values));
}

double reconstruction_mse(const Matrix& items, const CodewordIndices& ids,
                          const Codebooks& codebooks) {
  LISA_REQUIRE(items.rows() == ids.length() && items.cols() == codebooks.dim(), InvalidInput,
               "items and codes disagree in shape");
  double total = 0.0;
  for (std::size_t i = 0; i < items.rows(); ++i) {
    total += squared_distance(items.row(i), reconstruct(ids.row(i), codebooks));
  }
  return total / static_cast<double>(items.rows() * items.cols());
}

double compressed_bytes(std::size_t n, std::size_t d, CodebookShape shape) {
  LISA_REQUIRE(shape.num_books >= 1, InvalidInput, "need at least one codebook");
  LISA_REQUIRE(shape.num_words >= 2 && std::has_single_bit(shape.num_words), InvalidInput,
               "W=" + std::to_string(shape.num_words) +
                   " is not a power of two; packed index size is undefined");
  const auto bits = static_cast<double>(std::countr_zero(shape.num_words));
  const double index_bytes = static_cast<double>(n) * static_cast<double>(shape.num_books) * bits / 8.0;
  const double codebook_bytes = 4.0 * static_cast<double>(shape.num_books) *
                                static_cast<double>(shape.num_words) * static_cast<double>(d);
  return index_bytes + codebook_bytes;
}

double compression_ratio(std::size_t n, std::size_t d, CodebookShape sequence,
                         std::optional<CodebookShape> target) {
  LISA_REQUIRE(n >= 1 && d >= 1, InvalidInput, "compression ratio needs N >= 1 and D >= 1");
  double bytes = compressed_bytes(n, d, sequence);
  if (target) {
    bytes += compressed_bytes(n, d, *target);
  }
  return 4.0 * static_cast<double>(n) * static_cast<double>(d) / bytes;
}

}  // namespace lisa
