#include "lisa/recsys.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "lisa/errors.hpp"
#include "lisa/quantizer.hpp"

namespace lisa {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::size_t cutoff_slot(const std::vector<std::size_t>& cutoffs, std::size_t k) {
  const auto it = std::find(cutoffs.begin(), cutoffs.end(), k);
  LISA_REQUIRE(it != cutoffs.end(), InvalidInput,
               "metric cutoff " + std::to_string(k) + " was not evaluated");
  return static_cast<std::size_t>(it - cutoffs.begin());
}

}  // namespace

std::vector<ItemId> RankingTask::candidates() const {
  std::vector<ItemId> out;
  out.reserve(negatives.size() + 1);
  out.push_back(positive);
  out.insert(out.end(), negatives.begin(), negatives.end());
  return out;
}

void RankingTask::validate() const {
  std::unordered_set<ItemId> seen;
  for (ItemId n : negatives) {
    LISA_REQUIRE(n != positive, InvalidInput, "positive item appears among the negatives");
    LISA_REQUIRE(seen.insert(n).second, InvalidInput,
                 "negative item " + std::to_string(n) + " is repeated");
  }
  for (std::size_t k : cutoffs) {
    LISA_REQUIRE(k >= 1, InvalidInput, "metric cutoffs must be >= 1");
  }
}

double MetricReport::hr_at(std::size_t k) const { return hr[cutoff_slot(cutoffs, k)]; }
double MetricReport::ndcg_at(std::size_t k) const { return ndcg[cutoff_slot(cutoffs, k)]; }

std::vector<double> score_candidates(std::span<const double> user_repr, const Matrix& embeddings,
                                     std::span<const ItemId> candidates) {
  LISA_REQUIRE(user_repr.size() == embeddings.cols(), InvalidInput,
               "user representation and item embeddings disagree on D");
  std::vector<double> scores(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    LISA_REQUIRE(candidates[c] < embeddings.rows(), OutOfRange,
                 "candidate item " + std::to_string(candidates[c]) + " is not in the catalog");
    const auto x = embeddings.row(candidates[c]);
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      s += user_repr[k] * x[k];
    }
    scores[c] = s;
  }
  return scores;
}

std::vector<double> score_candidates(std::span<const double> user_repr,
                                     const CodewordIndices& item_codes, const Codebooks& codebooks,
                                     std::span<const ItemId> candidates) {
  LISA_REQUIRE(user_repr.size() == codebooks.dim(), InvalidInput,
               "user representation and codebooks disagree on D");
  LISA_REQUIRE(item_codes.num_books() == codebooks.num_books(), InvalidInput,
               "item codes and codebooks disagree on B");
  // <repr, sum_b c^b> = sum_b <repr, c^b>; each codeword's score is computed
  // once and reused by every candidate that selects it.
  const std::size_t num_words = codebooks.num_words();
  std::vector<double> partial(codebooks.num_books() * num_words);
  for (std::size_t b = 0; b < codebooks.num_books(); ++b) {
    for (std::size_t w = 0; w < num_words; ++w) {
      const auto c = codebooks.codeword(b, w);
      double s = 0.0;
      for (std::size_t k = 0; k < c.size(); ++k) {
        s += user_repr[k] * c[k];
      }
      partial[b * num_words + w] = s;
    }
  }
  std::vector<double> scores(candidates.size(), 0.0);
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    LISA_REQUIRE(candidates[c] < item_codes.length(), OutOfRange,
                 "candidate item " + std::to_string(candidates[c]) + " is not in the catalog");
    const auto ids = item_codes.row(candidates[c]);
    for (std::size_t b = 0; b < ids.size(); ++b) {
      LISA_REQUIRE(ids[b] < num_words, OutOfRange, "candidate codeword id out of range");
      scores[c] += partial[b * num_words + ids[b]];
    }
  }
  return scores;
}

RankingOutcome evaluate_ranking(std::span<const double> scores, const RankingTask& task) {
  task.validate();
  LISA_REQUIRE(scores.size() == task.negatives.size() + 1, InvalidInput,
               "expected one score for the positive plus one per negative");
  for (double s : scores) {
    LISA_REQUIRE(!std::isnan(s), InvalidInput, "candidate score is NaN");
  }
  const double positive = scores[0];
  std::size_t ahead = 0;
  for (std::size_t c = 1; c < scores.size(); ++c) {
    if (scores[c] >= positive) {
      ++ahead;
    }
  }
  RankingOutcome outcome;
  outcome.rank = ahead + 1;
  for (std::size_t k : task.cutoffs) {
    const bool hit = outcome.rank <= k;
    outcome.hit.push_back(hit ? 1.0 : 0.0);
    outcome.ndcg.push_back(hit ? 1.0 / std::log2(static_cast<double>(outcome.rank) + 1.0) : 0.0);
  }
  return outcome;
}

MetricReport aggregate(std::span<const RankingOutcome> outcomes,
                       std::span<const std::size_t> cutoffs) {
  MetricReport report;
  report.cutoffs.assign(cutoffs.begin(), cutoffs.end());
  report.hr.assign(cutoffs.size(), 0.0);
  report.ndcg.assign(cutoffs.size(), 0.0);
  report.n_users = outcomes.size();
  for (const auto& o : outcomes) {
    LISA_REQUIRE(o.hit.size() == cutoffs.size() && o.ndcg.size() == cutoffs.size(), InvalidInput,
                 "outcome was evaluated at different cutoffs");
    for (std::size_t c = 0; c < cutoffs.size(); ++c) {
      report.hr[c] += o.hit[c];
      report.ndcg[c] += o.ndcg[c];
    }
  }
  if (!outcomes.empty()) {
    for (std::size_t c = 0; c < cutoffs.size(); ++c) {
      report.hr[c] /= static_cast<double>(outcomes.size());
      report.ndcg[c] /= static_cast<double>(outcomes.size());
    }
  }
  return report;
}

SynthDataset synth_dataset(const SynthConfig& config) {
  LISA_REQUIRE(config.n_users >= 1 && config.n_items >= 1, InvalidInput,
               "synthetic data needs at least one user and one item");
  LISA_REQUIRE(config.min_length >= 1 && config.min_length <= config.max_length, InvalidInput,
               "sequence length range must satisfy 1 <= min <= max");
  LISA_REQUIRE(config.num_clusters >= 1 && config.num_clusters <= config.num_words, InvalidInput,
               "need 1 <= clusters <= W (codebook 0 holds one codeword per cluster)");
  LISA_REQUIRE(config.n_items <= 0xFFFFFFFFu, InvalidInput, "too many items");
  LISA_REQUIRE(config.stay_probability >= 0.0 && config.stay_probability <= 1.0, InvalidInput,
               "stay probability must be in [0, 1]");

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const std::size_t num_books = config.num_books;
  const std::size_t num_words = config.num_words;
  const std::size_t dim = config.dim;

  std::vector<double> words(num_books * num_words * dim);
  for (std::size_t b = 0; b < num_books; ++b) {
    const double scale = b == 0 ? config.cluster_scale : config.detail_scale;
    for (std::size_t k = 0; k < num_words * dim; ++k) {
      words[b * num_words * dim + k] = scale * gauss(rng);
    }
  }

  SynthDataset data;
  data.config = config;
  data.planted_codebooks = Codebooks(num_books, num_words, dim, std::move(words));

  const std::size_t clusters = std::min(config.num_clusters, config.n_items);
  std::vector<std::vector<ItemId>> members(clusters);
  data.planted_codes = CodewordIndices(config.n_items, num_books);
  data.item_embeddings = Matrix(config.n_items, dim);
  data.item_cluster.resize(config.n_items);
  std::uniform_int_distribution<std::size_t> any_word(0, num_words - 1);
  for (std::size_t i = 0; i < config.n_items; ++i) {
    const std::size_t cluster = i % clusters;
    data.item_cluster[i] = cluster;
    members[cluster].push_back(static_cast<ItemId>(i));
    data.planted_codes(i, 0) = static_cast<CodewordId>(cluster);
    for (std::size_t b = 1; b < num_books; ++b) {
      data.planted_codes(i, b) = static_cast<CodewordId>(any_word(rng));
    }
    auto x = data.item_embeddings.row(i);
    for (std::size_t b = 0; b < num_books; ++b) {
      const auto c = data.planted_codebooks.codeword(b, data.planted_codes(i, b));
      for (std::size_t k = 0; k < dim; ++k) {
        x[k] += c[k];
      }
    }
    for (double& v : x) {
      v += config.noise_scale * gauss(rng);
    }
  }

  std::uniform_int_distribution<std::size_t> pick_length(config.min_length, config.max_length);
  std::uniform_int_distribution<std::size_t> pick_cluster(0, clusters - 1);
  std::bernoulli_distribution stay(config.stay_probability);
  auto draw_from = [&](std::size_t cluster) {
    const auto& pool = members[cluster];
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    return pool[pick(rng)];
  };

  data.histories.resize(config.n_users);
  data.next_items.resize(config.n_users);
  for (std::size_t u = 0; u < config.n_users; ++u) {
    const std::size_t length = pick_length(rng);
    std::size_t cluster = pick_cluster(rng);
    auto& history = data.histories[u];
    history.reserve(length);
    for (std::size_t t = 0; t <= length; ++t) {
      if (t > 0 && !stay(rng)) {
        cluster = pick_cluster(rng);
      }
      const ItemId item = draw_from(cluster);
      if (t < length) {
        history.push_back(item);
      } else {
        data.next_items[u] = item;
      }
    }
  }
  return data;
}

std::vector<ItemId> sample_negatives(std::span<const ItemId> history, ItemId positive,
                                     std::size_t n_items, std::size_t count, std::uint64_t seed) {
  std::unordered_set<ItemId> excluded(history.begin(), history.end());
  excluded.insert(positive);
  std::size_t available = 0;
  for (ItemId e : excluded) {
    if (e < n_items) {
      ++available;
    }
  }
  available = n_items - available;

  std::vector<ItemId> out;
  if (count >= available) {
    for (std::size_t i = 0; i < n_items; ++i) {
      if (!excluded.contains(static_cast<ItemId>(i))) {
        out.push_back(static_cast<ItemId>(i));
      }
    }
    return out;
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n_items - 1);
  out.reserve(count);
  while (out.size() < count) {
    const auto item = static_cast<ItemId>(pick(rng));
    if (excluded.insert(item).second) {
      out.push_back(item);
    }
  }
  return out;
}

MetricReport evaluate_users(const SynthDataset& data, const UserScorer& scorer,
                            const EvalOptions& options) {
  const std::size_t users = options.max_users == 0
                                ? data.histories.size()
                                : std::min(options.max_users, data.histories.size());
  std::vector<RankingOutcome> outcomes;
  outcomes.reserve(users);
  for (std::size_t u = 0; u < users; ++u) {
    RankingTask task;
    task.positive = data.next_items[u];
    task.negatives = sample_negatives(data.histories[u], task.positive, data.config.n_items,
                                      options.num_negatives, mix_seed(options.seed, u));
    task.cutoffs = options.cutoffs;
    const auto candidates = task.candidates();
    const auto scores = scorer(u, candidates);
    outcomes.push_back(evaluate_ranking(scores, task));
  }
  return aggregate(outcomes, options.cutoffs);
}

UserScorer make_random_scorer(std::uint64_t seed) {
  return [seed](std::size_t user, std::span<const ItemId> candidates) {
    std::mt19937_64 rng(mix_seed(seed, user));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> scores(candidates.size());
    for (double& s : scores) {
      s = unit(rng);
    }
    return scores;
  };
}

UserScorer make_vanilla_scorer(const SynthDataset& data, const ProjectionSet& proj) {
  return [&data, proj](std::size_t user, std::span<const ItemId> candidates) {
    const auto& history = data.histories[user];
    Matrix x(history.size(), data.item_embeddings.cols());
    for (std::size_t t = 0; t < history.size(); ++t) {
      const auto src = data.item_embeddings.row(history[t]);
      std::copy(src.begin(), src.end(), x.row(t).begin());
    }
    const Matrix out = dense_attention(x, proj, true);
    return score_candidates(out.row(out.rows() - 1), data.item_embeddings, candidates);
  };
}

UserScorer make_lisa_scorer(const SynthDataset& data, const Codebooks& codebooks,
                            const CodewordIndices& item_codes, const ProjectionSet& proj) {
  struct Model {
    Codebooks codebooks;
    CodewordIndices codes;
    InnerProductTable table;
    ProjectedValues values;
  };
  auto model = std::make_shared<const Model>(Model{codebooks, item_codes,
                                                   build_ip_table(codebooks, proj),
                                                   project_values(codebooks, proj)});
  return [&data, model](std::size_t user, std::span<const ItemId> candidates) {
    const auto& history = data.histories[user];
    CodewordIndices seq(history.size(), model->codebooks.num_books());
    for (std::size_t t = 0; t < history.size(); ++t) {
      const auto src = model->codes.row(history[t]);
      std::copy(src.begin(), src.end(), seq.row(t).begin());
    }
    const Matrix out =
        lisa_forward(seq, model->table, model->values, AttentionMode::unidirectional);
    return score_candidates(out.row(out.rows() - 1), model->codes, model->codebooks, candidates);
  };
}

MigratedCodes migrate_codebooks(const Matrix& embeddings, const FitOptions& options) {
  auto fit = fit_codebooks(embeddings, options);
  MigratedCodes out;
  out.codes = encode_all(embeddings, fit.codebooks);
  out.mse = reconstruction_mse(embeddings, out.codes, fit.codebooks);
  out.codebooks = std::move(fit.codebooks);
  return out;
}

std::string metrics_to_json(const std::vector<std::pair<std::string, MetricReport>>& reports) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const auto& [name, report] : reports) {
    nlohmann::ordered_json entry;
    entry["n_users"] = report.n_users;
    for (std::size_t c = 0; c < report.cutoffs.size(); ++c) {
      entry["hr@" + std::to_string(report.cutoffs[c])] = report.hr[c];
      entry["ndcg@" + std::to_string(report.cutoffs[c])] = report.ndcg[c];
    }
    doc[name] = entry;
  }
  return doc.dump(2);
}

std::string metrics_to_csv(const std::vector<std::pair<std::string, MetricReport>>& reports) {
  std::ostringstream out;
  out.precision(10);
  out << "method,k,hr,ndcg,n_users\n";
  for (const auto& [name, report] : reports) {
    for (std::size_t c = 0; c < report.cutoffs.size(); ++c) {
      out << name << ',' << report.cutoffs[c] << ',' << report.hr[c] << ',' << report.ndcg[c]
          << ',' << report.n_users << '\n';
    }
  }
  return out.str();
}

}  // namespace lisa
