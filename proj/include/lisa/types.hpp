#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lisa {

using CodewordId = std::uint16_t;
using ItemId = std::uint32_t;

/// Largest codebook size addressable by a CodewordId.
inline constexpr std::size_t kMaxCodewords = 65536;

/// Dense row-major matrix of doubles. Used for embedding tables, input
/// sequences and attention outputs.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }

  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

using EmbeddingMatrix = Matrix;
using DenseSequence = Matrix;

/// B codebooks of W codewords, each a D-dimensional vector. Codeword c^b_w
/// lives at values[(b * W + w) * D].
class Codebooks {
 public:
  Codebooks() = default;
  /// Zero-initialized codebooks.
  Codebooks(std::size_t num_books, std::size_t num_words, std::size_t dim);
  Codebooks(std::size_t num_books, std::size_t num_words, std::size_t dim,
            std::vector<double> values);

  std::size_t num_books() const { return num_books_; }
  std::size_t num_words() const { return num_words_; }
  std::size_t dim() const { return dim_; }

  std::span<const double> codeword(std::size_t b, std::size_t w) const {
    return {data_.data() + (b * num_words_ + w) * dim_, dim_};
  }
  std::span<double> codeword(std::size_t b, std::size_t w) {
    return {data_.data() + (b * num_words_ + w) * dim_, dim_};
  }

  std::span<const double> values() const { return data_; }

  friend bool operator==(const Codebooks&, const Codebooks&) = default;

 private:
  std::size_t num_books_ = 0;
  std::size_t num_words_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// L x B matrix of codeword ids; row i holds the ids of item i in each
/// codebook.
class CodewordIndices {
 public:
  CodewordIndices() = default;
  CodewordIndices(std::size_t length, std::size_t num_books);
  CodewordIndices(std::size_t length, std::size_t num_books, std::vector<CodewordId> ids);

  std::size_t length() const { return length_; }
  std::size_t num_books() const { return num_books_; }

  CodewordId operator()(std::size_t i, std::size_t b) const { return ids_[i * num_books_ + b]; }
  CodewordId& operator()(std::size_t i, std::size_t b) { return ids_[i * num_books_ + b]; }

  std::span<const CodewordId> row(std::size_t i) const {
    return {ids_.data() + i * num_books_, num_books_};
  }
  std::span<CodewordId> row(std::size_t i) { return {ids_.data() + i * num_books_, num_books_}; }

  std::span<const CodewordId> values() const { return ids_; }

  /// Throws OutOfRange if any id is >= num_words.
  void check_bounds(std::size_t num_words) const;

  /// Rows [first, first + count) as a new index matrix.
  CodewordIndices slice(std::size_t first, std::size_t count) const;

  friend bool operator==(const CodewordIndices&, const CodewordIndices&) = default;

 private:
  std::size_t length_ = 0;
  std::size_t num_books_ = 0;
  std::vector<CodewordId> ids_;
};

/// L x B x W soft codeword masses; each (i, b) row lies on the W-simplex.
class SoftAssignments {
 public:
  SoftAssignments() = default;
  SoftAssignments(std::size_t length, std::size_t num_books, std::size_t num_words);
  SoftAssignments(std::size_t length, std::size_t num_books, std::size_t num_words,
                  std::vector<double> values);

  static SoftAssignments one_hot(const CodewordIndices& indices, std::size_t num_words);

  std::size_t length() const { return length_; }
  std::size_t num_books() const { return num_books_; }
  std::size_t num_words() const { return num_words_; }

  std::span<const double> row(std::size_t i, std::size_t b) const {
    return {data_.data() + (i * num_books_ + b) * num_words_, num_words_};
  }
  std::span<double> row(std::size_t i, std::size_t b) {
    return {data_.data() + (i * num_books_ + b) * num_words_, num_words_};
  }
  /// All B x W masses of position i.
  std::span<const double> position(std::size_t i) const {
    return {data_.data() + i * num_books_ * num_words_, num_books_ * num_words_};
  }

  std::span<const double> values() const { return data_; }

  /// Throws InvalidInput unless every row is nonnegative and sums to 1 within
  /// tolerance.
  void check_simplex(double tolerance = 1e-5) const;

 private:
  std::size_t length_ = 0;
  std::size_t num_books_ = 0;
  std::size_t num_words_ = 0;
  std::vector<double> data_;
};

}  // namespace lisa
