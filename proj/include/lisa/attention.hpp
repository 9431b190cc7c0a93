#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lisa/types.hpp"

namespace lisa {

enum class AttentionMode { unidirectional, bidirectional };

/// Query/key/value projections. A row vector x projects to x * P (D x D).
/// `scale` multiplies every query-key inner product before the exponent.
struct ProjectionSet {
  Matrix query;
  Matrix key;
  Matrix value;
  double scale = 1.0;

  /// Identity projections with scale 1/sqrt(dim).
  static ProjectionSet identity(std::size_t dim);
  static ProjectionSet identity(std::size_t dim, double scale);

  std::size_t dim() const { return query.rows(); }
  /// Throws InvalidInput on shape mismatch, non-finite entries or scale <= 0.
  void validate() const;
};

/// x * P for a row vector x.
std::vector<double> project(std::span<const double> x, const Matrix& projection);

/// Exponentiated projected inner products between codewords of the same
/// codebook: at(b, i, j) = exp(scale * <c^b_i P_Q, c^b_j P_K>).
class InnerProductTable {
 public:
  /// Exponents are clamped to [-kExponentClamp, kExponentClamp].
  static constexpr double kExponentClamp = 60.0;

  InnerProductTable() = default;
  InnerProductTable(std::size_t num_books, std::size_t num_words, std::vector<double> values,
                    double max_abs_exponent);

  std::size_t num_books() const { return num_books_; }
  std::size_t num_words() const { return num_words_; }

  double at(std::size_t b, std::size_t i, std::size_t j) const {
    return data_[(b * num_words_ + i) * num_words_ + j];
  }
  /// Scores of query codeword i against every key codeword of codebook b.
  std::span<const double> row(std::size_t b, std::size_t i) const {
    return {data_.data() + (b * num_words_ + i) * num_words_, num_words_};
  }
  std::span<const double> values() const { return data_; }

  /// Largest |exponent| seen before clamping.
  double max_abs_exponent() const { return max_abs_exponent_; }
  bool clamped() const { return max_abs_exponent_ > kExponentClamp; }

 private:
  std::size_t num_books_ = 0;
  std::size_t num_words_ = 0;
  std::vector<double> data_;
  double max_abs_exponent_ = 0.0;
};

/// Codewords projected by the value matrix: row(b, w) = c^b_w P_V.
class ProjectedValues {
 public:
  ProjectedValues() = default;
  ProjectedValues(std::size_t num_books, std::size_t num_words, std::size_t dim,
                  std::vector<double> values);

  std::size_t num_books() const { return num_books_; }
  std::size_t num_words() const { return num_words_; }
  std::size_t dim() const { return dim_; }

  std::span<const double> row(std::size_t b, std::size_t w) const {
    return {data_.data() + (b * num_words_ + w) * dim_, dim_};
  }
  std::span<const double> values() const { return data_; }

 private:
  std::size_t num_books_ = 0;
  std::size_t num_words_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// Codeword masses per position and codebook. Prefix histograms store one
/// B x W slab per position; a whole-sequence histogram stores a single slab
/// that every position reads (`broadcast`).
class HistogramTensor {
 public:
  HistogramTensor() = default;
  HistogramTensor(std::size_t positions, std::size_t num_books, std::size_t num_words,
                  bool broadcast);

  std::size_t positions() const { return positions_; }
  std::size_t num_books() const { return num_books_; }
  std::size_t num_words() const { return num_words_; }
  bool broadcast() const { return broadcast_; }

  double at(std::size_t i, std::size_t b, std::size_t w) const { return slab(i)[b * num_words_ + w]; }
  std::span<const double> row(std::size_t i, std::size_t b) const {
    return slab(i).subspan(b * num_words_, num_words_);
  }
  /// B x W masses seen by position i.
  std::span<const double> slab(std::size_t i) const {
    const std::size_t s = broadcast_ ? 0 : i;
    return {data_.data() + s * num_books_ * num_words_, num_books_ * num_words_};
  }
  std::span<double> mutable_slab(std::size_t i) {
    const std::size_t s = broadcast_ ? 0 : i;
    return {data_.data() + s * num_books_ * num_words_, num_books_ * num_words_};
  }

 private:
  std::size_t positions_ = 0;
  std::size_t num_books_ = 0;
  std::size_t num_words_ = 0;
  bool broadcast_ = false;
  std::vector<double> data_;
};

InnerProductTable build_ip_table(const Codebooks& codebooks, const ProjectionSet& proj);
ProjectedValues project_values(const Codebooks& codebooks, const ProjectionSet& proj);

/// F[i, b, w] = number of j <= i with indices(j, b) == w.
HistogramTensor histogram_prefix(const CodewordIndices& indices, std::size_t num_words);
/// Whole-sequence counts, broadcast over positions.
HistogramTensor histogram_total(const CodewordIndices& indices, std::size_t num_words);
/// Running sums of soft masses.
HistogramTensor histogram_prefix_soft(const SoftAssignments& assignments);
HistogramTensor histogram_total_soft(const SoftAssignments& assignments);

/// One output row from a B x W histogram slab and the query's codeword ids:
///   out = sum_b sum_w F[b,w] M[b,q_b,w] C_V[b,w] / sum_w F[b,w] M[b,q_b,w]
/// Throws InvariantViolation if a normalizer is not above `min_denominator`.
void attend_row(std::span<const double> histogram, std::span<const CodewordId> query,
                const InnerProductTable& table, const ProjectedValues& values,
                std::span<double> out, double min_denominator = 0.0);

/// Histogram attention over hard codeword ids (L x B). Returns L x D.
Matrix lisa_forward(const CodewordIndices& indices, const InnerProductTable& table,
                    const ProjectedValues& values, AttentionMode mode);

/// Soft-histogram variant: masses come from `assignments`, query lookups
/// still use the hard ids in `queries`.
Matrix lisa_forward_soft(const SoftAssignments& assignments, const CodewordIndices& queries,
                         const InnerProductTable& table, const ProjectedValues& values,
                         AttentionMode mode);

/// Normalized attention weights A[i, b, w] (L x B x W, row-major).
std::vector<double> lisa_attention_weights(const CodewordIndices& indices,
                                           const InnerProductTable& table, AttentionMode mode);

/// Variable-length sequences packed into max_length rows each. Rows past a
/// sequence's length are padding: they add no mass and produce no output.
struct PaddedBatch {
  CodewordIndices packed;  // (batch * max_length) x B
  std::size_t max_length = 0;
  std::vector<std::size_t> lengths;

  std::size_t size() const { return lengths.size(); }
};

/// Per-sequence lisa_forward over a padded batch; `threads` workers split the
/// sequences.
std::vector<Matrix> lisa_forward_batch(const PaddedBatch& batch, const InnerProductTable& table,
                                       const ProjectedValues& values, AttentionMode mode,
                                       std::size_t threads = 1);

/// Plain softmax(scale * Q K^T) V self-attention over dense rows, with an
/// optional causal mask. Cost O(L^2 D); used as the full-attention baseline.
Matrix dense_attention(const Matrix& x, const ProjectionSet& proj, bool causal);

AttentionMode parse_attention_mode(const std::string& name);
std::string to_string(AttentionMode mode);

}  // namespace lisa
