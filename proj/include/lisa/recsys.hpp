#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lisa/attention.hpp"
#include "lisa/quantizer.hpp"
#include "lisa/types.hpp"

namespace lisa {

/// One user's evaluation case: the held-out positive and sampled negatives.
struct RankingTask {
  ItemId positive = 0;
  std::vector<ItemId> negatives;
  std::vector<std::size_t> cutoffs{5, 10};

  /// Candidates in scoring order: positive first, then negatives.
  std::vector<ItemId> candidates() const;
  /// Throws InvalidInput if the positive is among the negatives or a
  /// negative repeats.
  void validate() const;
};

struct RankingOutcome {
  std::size_t rank = 0;  // 1-based
  std::vector<double> hit;
  std::vector<double> ndcg;
};

struct MetricReport {
  std::vector<std::size_t> cutoffs;
  std::vector<double> hr;
  std::vector<double> ndcg;
  std::size_t n_users = 0;

  double hr_at(std::size_t k) const;
  double ndcg_at(std::size_t k) const;
};

/// Inner product of the user representation with each candidate embedding.
std::vector<double> score_candidates(std::span<const double> user_repr, const Matrix& embeddings,
                                     std::span<const ItemId> candidates);
/// Same, with candidates stored as codeword ids and reconstructed on the fly.
std::vector<double> score_candidates(std::span<const double> user_repr,
                                     const CodewordIndices& item_codes, const Codebooks& codebooks,
                                     std::span<const ItemId> candidates);

/// `scores` follow task.candidates(). A negative whose score equals the
/// positive's ranks ahead of it.
RankingOutcome evaluate_ranking(std::span<const double> scores, const RankingTask& task);

/// Mean of per-user outcomes.
MetricReport aggregate(std::span<const RankingOutcome> outcomes, std::span<const std::size_t> cutoffs);

struct SynthConfig {
  std::size_t n_users = 2000;
  std::size_t n_items = 1000;
  std::size_t min_length = 10;
  std::size_t max_length = 50;
  std::size_t num_clusters = 32;
  std::size_t num_books = 4;
  std::size_t num_words = 32;
  std::size_t dim = 32;
  /// Probability that the next item stays in the current item's cluster.
  double stay_probability = 0.8;
  /// Per-coordinate scale of the cluster codewords (codebook 0).
  double cluster_scale = 1.4;
  /// Per-coordinate scale of the within-cluster codewords (codebooks 1..B-1).
  double detail_scale = 0.25;
  /// Per-coordinate Gaussian noise added to each item embedding.
  double noise_scale = 0.05;
  std::uint64_t seed = 7;
};

/// Items are additive compositions of planted codebooks: codebook 0 holds one
/// codeword per cluster, the others add within-cluster detail. Users walk a
/// cluster Markov chain that mostly stays put, so the next item is
/// predictable from the recent history.
struct SynthDataset {
  SynthConfig config;
  Matrix item_embeddings;           // N x D
  Codebooks planted_codebooks;      // B x W x D
  CodewordIndices planted_codes;    // N x B
  std::vector<std::size_t> item_cluster;
  std::vector<std::vector<ItemId>> histories;
  std::vector<ItemId> next_items;
};

SynthDataset synth_dataset(const SynthConfig& config);

/// Up to `count` distinct items outside `history` and != positive.
std::vector<ItemId> sample_negatives(std::span<const ItemId> history, ItemId positive,
                                     std::size_t n_items, std::size_t count, std::uint64_t seed);

/// Scores task.candidates() for one user.
using UserScorer =
    std::function<std::vector<double>(std::size_t user, std::span<const ItemId> candidates)>;

struct EvalOptions {
  std::size_t num_negatives = 100;
  std::vector<std::size_t> cutoffs{5, 10};
  std::uint64_t seed = 11;
  /// 0 evaluates every user.
  std::size_t max_users = 0;
};

/// Builds one RankingTask per user (negatives seeded per user) and averages
/// the scorer's outcomes.
MetricReport evaluate_users(const SynthDataset& data, const UserScorer& scorer,
                            const EvalOptions& options);

UserScorer make_random_scorer(std::uint64_t seed);
/// Last row of causal dense attention over the raw history embeddings,
/// dotted with raw candidate embeddings.
UserScorer make_vanilla_scorer(const SynthDataset& data, const ProjectionSet& proj);
/// Last row of unidirectional histogram attention over the history's codes,
/// dotted with candidates reconstructed from the same codes.
UserScorer make_lisa_scorer(const SynthDataset& data, const Codebooks& codebooks,
                            const CodewordIndices& item_codes, const ProjectionSet& proj);

/// Codebooks fitted to frozen item embeddings, and the items' codes under them.
struct MigratedCodes {
  Codebooks codebooks;
  CodewordIndices codes;
  double mse = 0.0;
};

/// Fits fresh codebooks to `embeddings` and encodes every item with them.
MigratedCodes migrate_codebooks(const Matrix& embeddings, const FitOptions& options);

std::string metrics_to_json(const std::vector<std::pair<std::string, MetricReport>>& reports);
std::string metrics_to_csv(const std::vector<std::pair<std::string, MetricReport>>& reports);

}  // namespace lisa
