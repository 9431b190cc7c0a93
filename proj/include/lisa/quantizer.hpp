#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lisa/types.hpp"

namespace lisa {

struct FitOptions {
  std::size_t num_books = 8;
  std::size_t num_words = 256;
  std::size_t iters = 25;
  std::uint64_t seed = 0;
  /// Extra passes that refit each codebook against the residual left by all
  /// the others. 0 keeps the plain sequential residual fit.
  std::size_t refine_passes = 0;
  /// Softmax temperature used when the fit is followed by soft encoding.
  double temperature = 1.0;
};

struct FitResult {
  Codebooks codebooks;
  /// Codes the fit converged to (N x B).
  CodewordIndices assignments;
  /// Mean squared reconstruction error (per element) after every iteration,
  /// across all stages. Non-increasing.
  std::vector<double> mse_history;
  double final_mse = 0.0;
  std::vector<std::string> warnings;
};

/// Fits B additive codebooks of W codewords by sequential residual k-means:
/// codebook b is a k-means fit to what codebooks 0..b-1 leave unexplained.
/// Dead codewords are reseeded to the worst-reconstructed residual.
/// Deterministic for a given seed.
FitResult fit_codebooks(const EmbeddingMatrix& embeddings, const FitOptions& options);

/// Similarity used for assignment: 2<r, c> - |c|^2. Its argmax over c is the
/// nearest codeword to r in L2.
double codeword_similarity(std::span<const double> residual, std::span<const double> codeword);

/// Residual-greedy encoding: for b = 0..B-1 pick the codeword most similar to
/// the running residual, then subtract it. Ties go to the lowest id.
std::vector<CodewordId> encode(std::span<const double> x, const Codebooks& codebooks);
CodewordIndices encode_all(const Matrix& items, const Codebooks& codebooks);

/// Sum of the selected codewords.
std::vector<double> reconstruct(std::span<const CodewordId> ids, const Codebooks& codebooks);
Matrix reconstruct_all(const CodewordIndices& ids, const Codebooks& codebooks);

/// B x W row-major softmax(similarity / temperature). The residual for
/// codebook b follows the hard greedy path, so the argmax of each row is the
/// encode() id.
std::vector<double> soft_assign(std::span<const double> x, const Codebooks& codebooks,
                                double temperature);
SoftAssignments soft_assign_all(const Matrix& items, const Codebooks& codebooks,
                                double temperature);

/// Per-element mean squared error of reconstructing `items` from `ids`.
double reconstruction_mse(const Matrix& items, const CodewordIndices& ids,
                          const Codebooks& codebooks);

struct CodebookShape {
  std::size_t num_books = 0;
  std::size_t num_words = 0;
};

/// Storage bytes of N items coded with `shape`: packed log2(W)-bit ids plus
/// float32 codebooks.
double compressed_bytes(std::size_t n, std::size_t d, CodebookShape shape);

/// 4ND / compressed bytes. With a target shape (small sequence codebooks plus
/// large target-item codebooks) both sets are paid for.
double compression_ratio(std::size_t n, std::size_t d, CodebookShape sequence,
                         std::optional<CodebookShape> target = std::nullopt);

}  // namespace lisa
