#include "lisa/types.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lisa/errors.hpp"

namespace lisa {

namespace {

bool finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  LISA_REQUIRE(data_.size() == rows_ * cols_, InvalidInput,
               "matrix payload has " + std::to_string(data_.size()) + " values, expected " +
                   std::to_string(rows_ * cols_));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = 1.0;
  }
  return m;
}

bool Matrix::all_finite() const { return finite(data_); }

Codebooks::Codebooks(std::size_t num_books, std::size_t num_words, std::size_t dim)
    : Codebooks(num_books, num_words, dim, std::vector<double>(num_books * num_words * dim, 0.0)) {}

Codebooks::Codebooks(std::size_t num_books, std::size_t num_words, std::size_t dim,
                     std::vector<double> values)
    : num_books_(num_books), num_words_(num_words), dim_(dim), data_(std::move(values)) {
  LISA_REQUIRE(num_books_ >= 1, InvalidInput, "codebooks need B >= 1");
  LISA_REQUIRE(num_words_ >= 2 && num_words_ <= kMaxCodewords, InvalidInput,
               "codebooks need 2 <= W <= 65536, got W=" + std::to_string(num_words_));
  LISA_REQUIRE(dim_ >= 1, InvalidInput, "codebooks need D >= 1");
  LISA_REQUIRE(data_.size() == num_books_ * num_words_ * dim_, InvalidInput,
               "codebook payload does not match B x W x D");
  LISA_REQUIRE(finite(data_), InvalidInput, "codebooks contain non-finite values");
}

CodewordIndices::CodewordIndices(std::size_t length, std::size_t num_books)
    : length_(length), num_books_(num_books), ids_(length * num_books, 0) {}

CodewordIndices::CodewordIndices(std::size_t length, std::size_t num_books,
                                 std::vector<CodewordId> ids)
    : length_(length), num_books_(num_books), ids_(std::move(ids)) {
  LISA_REQUIRE(ids_.size() == length_ * num_books_, InvalidInput,
               "index payload does not match L x B");
}

void CodewordIndices::check_bounds(std::size_t num_words) const {
  for (std::size_t k = 0; k < ids_.size(); ++k) {
    if (ids_[k] >= num_words) {
      throw OutOfRange("codeword id " + std::to_string(ids_[k]) + " at position " +
                       std::to_string(k / num_books_) + ", codebook " +
                       std::to_string(k % num_books_) + " is >= W=" + std::to_string(num_words));
    }
  }
}

CodewordIndices CodewordIndices::slice(std::size_t first, std::size_t count) const {
  LISA_REQUIRE(first + count <= length_, OutOfRange, "index slice past end of sequence");
  auto begin = ids_.begin() + static_cast<std::ptrdiff_t>(first * num_books_);
  return CodewordIndices(count, num_books_,
                         std::vector<CodewordId>(begin, begin + static_cast<std::ptrdiff_t>(
                                                                    count * num_books_)));
}

SoftAssignments::SoftAssignments(std::size_t length, std::size_t num_books, std::size_t num_words)
    : length_(length),
      num_books_(num_books),
      num_words_(num_words),
      data_(length * num_books * num_words, 0.0) {}

SoftAssignments::SoftAssignments(std::size_t length, std::size_t num_books, std::size_t num_words,
                                 std::vector<double> values)
    : length_(length), num_books_(num_books), num_words_(num_words), data_(std::move(values)) {
  LISA_REQUIRE(data_.size() == length_ * num_books_ * num_words_, InvalidInput,
               "soft assignment payload does not match L x B x W");
}

SoftAssignments SoftAssignments::one_hot(const CodewordIndices& indices, std::size_t num_words) {
  indices.check_bounds(num_words);
  SoftAssignments out(indices.length(), indices.num_books(), num_words);
  for (std::size_t i = 0; i < indices.length(); ++i) {
    for (std::size_t b = 0; b < indices.num_books(); ++b) {
      out.row(i, b)[indices(i, b)] = 1.0;
    }
  }
  return out;
}

void SoftAssignments::check_simplex(double tolerance) const {
  for (std::size_t i = 0; i < length_; ++i) {
    for (std::size_t b = 0; b < num_books_; ++b) {
      double sum = 0.0;
      for (double m : row(i, b)) {
        LISA_REQUIRE(std::isfinite(m) && m >= 0.0, InvalidInput,
                     "soft assignment has a negative or non-finite mass");
        sum += m;
      }
      LISA_REQUIRE(std::abs(sum - 1.0) <= tolerance, InvalidInput,
                   "soft assignment row (" + std::to_string(i) + ", " + std::to_string(b) +
                       ") sums to " + std::to_string(sum));
    }
  }
}

}  // namespace lisa
