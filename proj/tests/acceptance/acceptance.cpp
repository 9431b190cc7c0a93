// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "lisa/attention.hpp"
#include "lisa/bench.hpp"
#include "lisa/cli.hpp"
#include "lisa/oracles.hpp"
#include "lisa/quantizer.hpp"
#include "lisa/recsys.hpp"
#include "lisa/streaming.hpp"
#include "support/brute_force.hpp"
#include "support/generators.hpp"

using namespace lisa;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  std::function<Verdict()> check;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

// Tolerances and sizes, pinned.
constexpr double kRatioTol = 0.01;
constexpr double kRatioSeconds = 1.0;
constexpr double kSingleBookTol = 1e-5;
constexpr double kSingleBookSeconds = 30.0;
constexpr double kRelaxedTol = 1e-6;
constexpr double kStreamTol = 1e-6;
constexpr double kStreamSlowdown = 2.0;
constexpr double kLisaSpread = 0.6;
constexpr double kVanillaGrowth = 1.4;
constexpr double kSoftRowTol = 1e-4;
constexpr double kNdcgTol = 1e-5;
constexpr double kRandomHrTol = 0.03;
constexpr double kLisaVsVanilla = 0.9;
constexpr double kBeatRandom = 3.0;
constexpr double kMigrationLoss = 0.05;

Verdict compression_ratios() {
  struct Case {
    std::vector<std::string> args;
    double expect;
  };
  const std::vector<Case> cases{
      {{"--n", "80000", "--b", "8", "--w", "256"}, 24.26},
      {{"--n", "3416", "--b", "8", "--w", "128"}, 3.19},
      {{"--n", "33487", "--b", "8", "--w", "256"}, 13.02},
      {{"--n", "32720", "--b", "8", "--w", "256"}, 12.78},
      {{"--n", "80000", "--b", "8", "--w", "32", "--target-b", "8", "--target-w", "256"}, 18.45},
      {{"--n", "3416", "--b", "8", "--w", "32", "--target-b", "8", "--target-w", "128"}, 2.51},
      {{"--n", "33487", "--b", "8", "--w", "32", "--target-b", "8", "--target-w", "256"}, 10.62},
      {{"--n", "32720", "--b", "8", "--w", "32", "--target-b", "8", "--target-w", "256"}, 10.44},
  };
  const auto start = Clock::now();
  bool ok = true;
  std::string got;
  for (const auto& c : cases) {
    std::vector<std::string> args{"lisa", "ratio", "--d", "128"};
    args.insert(args.end(), c.args.begin(), c.args.end());
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    const double value = code == 0 ? std::stod(out.str()) : -1.0;
    ok = ok && std::abs(value - c.expect) <= kRatioTol;
    got += (got.empty() ? "" : " ") + fmt(value);
  }
  const double elapsed = seconds_since(start);
  ok = ok && elapsed < kRatioSeconds;
  return {ok, "ratios " + got + ", " + fmt(elapsed * 1000, 3) + " ms"};
}

Verdict single_codebook_exactness() {
  const auto start = Clock::now();
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    gen::Rng rng(1000 + seed);
    const std::size_t length = rng.size(1, 512);
    const std::size_t words = rng.size(2, 64);
    const std::size_t dim = rng.size(1, 32);
    const auto cb = gen::codebooks(rng, 1, words, dim);
    const auto ids = gen::codes(rng, length, 1, words);
    const auto proj = gen::projections(rng, dim);
    const auto out = lisa_forward(ids, build_ip_table(cb, proj), project_values(cb, proj),
                                  AttentionMode::unidirectional);
    const auto ref = oracle::vanilla_attention(reconstruct_all(ids, cb), proj, true);
    worst = std::max(worst, gen::max_abs_diff(out, ref));
  }
  const double elapsed = seconds_since(start);
  return {worst <= kSingleBookTol && elapsed < kSingleBookSeconds,
          "max diff " + fmt(worst) + ", " + fmt(elapsed, 3) + " s"};
}

Verdict relaxation_equivalence() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    gen::Rng rng(2000 + seed);
    const std::size_t books = rng.size(1, 4);
    const std::size_t words = rng.size(2, 16);
    const std::size_t length = rng.size(1, 128);
    const std::size_t dim = rng.size(1, 16);
    const auto cb = gen::codebooks(rng, books, words, dim);
    const auto ids = gen::codes(rng, length, books, words);
    const auto proj = gen::projections(rng, dim);
    const auto table = build_ip_table(cb, proj);
    const auto values = project_values(cb, proj);
    for (auto mode : {AttentionMode::unidirectional, AttentionMode::bidirectional}) {
      const auto fast = lisa_forward(ids, table, values, mode);
      const auto direct = oracle::direct_relaxed_attention(ids, cb, proj, mode);
      const auto setform = oracle::setform_attention(ids, cb, proj, mode);
      worst = std::max({worst, gen::max_abs_diff(fast, direct), gen::max_abs_diff(fast, setform),
                        gen::max_abs_diff(direct, setform)});
    }
  }
  return {worst <= kRelaxedTol, "max pairwise diff " + fmt(worst)};
}

double median_step_us(const UserState& state, const InnerProductTable& table,
                      const ProjectedValues& values) {
  std::vector<double> samples;
  for (int rep = 0; rep < 9; ++rep) {
    const auto start = Clock::now();
    for (int t = 0; t < 200; ++t) {
      const auto out = step_infer(state, table, values);
      if (out.empty()) return 0.0;
    }
    samples.push_back(std::chrono::duration<double, std::micro>(Clock::now() - start).count() /
                      200.0);
  }
  std::sort(samples.begin(), samples.end());
  return samples[samples.size() / 2];
}

Verdict streaming_agreement() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    gen::Rng rng(3000 + seed);
    const std::size_t books = rng.size(1, 8);
    const std::size_t words = rng.size(2, 64);
    const std::size_t dim = rng.size(1, 32);
    const auto cb = gen::codebooks(rng, books, words, dim);
    const auto proj = gen::projections(rng, dim);
    const auto table = build_ip_table(cb, proj);
    const auto values = project_values(cb, proj);
    const auto ids = gen::codes(rng, 500, books, words);
    auto state = state_init(books, words);
    for (std::size_t i = 0; i < 500; ++i) {
      state_update(state, ids.row(i));
      const std::size_t step = i + 1;
      if (step == 1 || step == 10 || step == 100 || step == 500) {
        const auto batch = lisa_forward(ids.slice(0, step), table, values,
                                        AttentionMode::unidirectional);
        const auto online = step_infer(state, table, values);
        for (std::size_t k = 0; k < dim; ++k) {
          worst = std::max(worst, std::abs(online[k] - batch(step - 1, k)));
        }
      }
    }
  }

  gen::Rng rng(3100);
  const auto cb = gen::codebooks(rng, 8, 256, 32);
  const auto proj = ProjectionSet::identity(32);
  const auto table = build_ip_table(cb, proj);
  const auto values = project_values(cb, proj);
  auto state = state_init(8, 256);
  std::vector<CodewordId> item(8);
  auto advance_to = [&](std::uint64_t step) {
    while (state.step < step) {
      for (auto& id : item) id = static_cast<CodewordId>(rng.size(0, 255));
      state_update(state, item);
    }
  };
  advance_to(100);
  median_step_us(state, table, values);
  const double early = median_step_us(state, table, values);
  advance_to(100000);
  const double late = median_step_us(state, table, values);
  return {worst <= kStreamTol && late <= kStreamSlowdown * early,
          "max diff " + fmt(worst) + ", step 1e2 " + fmt(early, 3) + " us, step 1e5 " +
              fmt(late, 3) + " us"};
}

Verdict linear_scaling() {
  BenchOptions options;
  options.lengths = {256, 512, 1024, 2048, 4096, 8192};
  options.token_budget = 8192;
  options.dim = 32;
  options.num_books = 8;
  options.num_words = 32;
  options.runs = 10;
  options.threads = 1;
  const auto report = bench_attention(options);
  std::cout << bench_to_csv(report);

  double lo = INFINITY;
  double hi = 0.0;
  for (std::size_t len : options.lengths) {
    const double t = report.find("lisa", len).mean_ms;
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  const double spread = hi / lo - 1.0;
  double min_growth = INFINITY;
  bool vanilla_complete = true;
  for (std::size_t k = 1; k < options.lengths.size(); ++k) {
    const auto& prev = report.find("vanilla", options.lengths[k - 1]);
    const auto& cur = report.find("vanilla", options.lengths[k]);
    if (prev.skipped || cur.skipped) {
      vanilla_complete = false;
      continue;
    }
    min_growth = std::min(min_growth, cur.mean_ms / prev.mean_ms);
  }
  return {spread < kLisaSpread && vanilla_complete && min_growth >= kVanillaGrowth,
          "lisa spread " + fmt(spread * 100, 3) + "%, vanilla min growth per doubling " +
              fmt(min_growth, 3) + "x"};
}

Verdict histogram_invariants() {
  bool exact = true;
  double soft_worst = 0.0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    gen::Rng rng(4000 + seed);
    const std::size_t books = rng.size(1, 4);
    const std::size_t words = rng.size(2, 16);
    const std::size_t length = rng.size(1, 64);
    const auto ids = gen::codes(rng, length, books, words);
    const auto f = histogram_prefix(ids, words);
    for (std::size_t i = 0; i < length; ++i) {
      for (std::size_t b = 0; b < books; ++b) {
        double sum = 0.0;
        for (std::size_t w = 0; w < words; ++w) {
          const double v = f.at(i, b, w);
          sum += v;
          if (v != std::floor(v) || v < 0.0 || (i > 0 && v < f.at(i - 1, b, w))) exact = false;
        }
        if (sum != static_cast<double>(i + 1)) exact = false;
      }
    }
    const auto s = histogram_prefix_soft(gen::soft(rng, length, books, words));
    for (std::size_t i = 0; i < length; ++i) {
      for (std::size_t b = 0; b < books; ++b) {
        double sum = 0.0;
        for (double v : s.row(i, b)) {
          sum += v;
          if (v < 0.0) exact = false;
        }
        soft_worst = std::max(soft_worst, std::abs(sum - static_cast<double>(i + 1)));
      }
    }
  }
  return {exact && soft_worst <= kSoftRowTol,
          std::string("hard rows ") + (exact ? "exact" : "violated") + ", soft row-sum error " +
              fmt(soft_worst)};
}

Verdict quantizer_sanity() {
  std::size_t increases = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    gen::Rng rng(5000 + seed);
    const auto x = gen::matrix(rng, rng.size(20, 200), rng.size(2, 16));
    FitOptions opt;
    opt.num_books = rng.size(1, 4);
    opt.num_words = rng.size(2, 16);
    opt.iters = 15;
    opt.seed = seed;
    const auto fit = fit_codebooks(x, opt);
    for (std::size_t t = 1; t < fit.mse_history.size(); ++t) {
      if (fit.mse_history[t] > fit.mse_history[t - 1]) ++increases;
    }
  }

  gen::Rng rng(5100);
  const auto four = gen::matrix(rng, 4, 5);
  FitOptions exact;
  exact.num_books = 1;
  exact.num_words = 4;
  const double capacity_mse = fit_codebooks(four, exact).final_mse;

  gen::Rng rng0(0);
  const auto sixteen = gen::matrix(rng0, 16, 4);
  FitOptions two;
  two.num_books = 2;
  two.num_words = 2;
  two.seed = 0;
  const double fitted = fit_codebooks(sixteen, two).final_mse;
  const double brute = brute::best_two_means_mse(sixteen);

  return {increases == 0 && capacity_mse == 0.0 && fitted <= brute,
          std::to_string(increases) + " mse increases, N=W mse " + fmt(capacity_mse) +
              ", B=2 W=2 mse " + fmt(fitted) + " vs exhaustive B=1 " + fmt(brute)};
}

Verdict ranking_metrics() {
  auto outcome_at = [](std::size_t rank, std::size_t k) {
    RankingTask task;
    task.positive = 0;
    task.cutoffs = {k};
    std::vector<double> scores{0.0};
    for (ItemId n = 1; n <= 100; ++n) {
      task.negatives.push_back(n);
      scores.push_back(n < rank ? 1.0 : -1.0);
    }
    return evaluate_ranking(scores, task);
  };
  const double r1 = outcome_at(1, 5).ndcg[0];
  const double r2 = outcome_at(2, 5).ndcg[0];
  const auto r11 = outcome_at(11, 10);
  const bool closed = std::abs(r1 - 1.0) <= kNdcgTol && std::abs(r2 - 0.63093) <= kNdcgTol &&
                      r11.hit[0] == 0.0 && r11.ndcg[0] == 0.0;

  SynthConfig config;
  config.n_users = 2000;
  const auto data = synth_dataset(config);
  const double hr = evaluate_users(data, make_random_scorer(17), EvalOptions{}).hr_at(10);
  return {closed && std::abs(hr - 10.0 / 101.0) <= kRandomHrTol,
          "ndcg " + fmt(r1) + " / " + fmt(r2, 6) + " / " + fmt(r11.ndcg[0]) +
              ", random HR@10 " + fmt(hr) + " (expect " + fmt(10.0 / 101.0) + ")"};
}

struct RecResults {
  double random = 0.0;
  double vanilla = 0.0;
  double lisa = 0.0;
  double migrated = 0.0;
};

const RecResults& recommendation_results() {
  static const RecResults results = [] {
    SynthConfig config;
    config.n_users = 2000;
    const auto data = synth_dataset(config);
    const auto proj = ProjectionSet::identity(config.dim);
    const EvalOptions options;
    RecResults r;
    r.random = evaluate_users(data, make_random_scorer(23), options).hr_at(10);
    r.vanilla = evaluate_users(data, make_vanilla_scorer(data, proj), options).hr_at(10);
    r.lisa = evaluate_users(
                 data, make_lisa_scorer(data, data.planted_codebooks, data.planted_codes, proj),
                 options)
                 .hr_at(10);
    FitOptions fit;
    fit.num_books = config.num_books;
    fit.num_words = config.num_words;
    fit.seed = 1;
    const auto migrated = migrate_codebooks(data.item_embeddings, fit);
    r.migrated =
        evaluate_users(data, make_lisa_scorer(data, migrated.codebooks, migrated.codes, proj),
                       options)
            .hr_at(10);
    return r;
  }();
  return results;
}

Verdict recommendation_property() {
  const auto& r = recommendation_results();
  const bool ok = r.lisa >= kLisaVsVanilla * r.vanilla && r.lisa >= kBeatRandom * r.random &&
                  r.vanilla >= kBeatRandom * r.random;
  return {ok, "HR@10 lisa " + fmt(r.lisa) + ", vanilla " + fmt(r.vanilla) + ", random " +
                  fmt(r.random)};
}

Verdict codebook_migration() {
  const auto& r = recommendation_results();
  const double loss = (r.lisa - r.migrated) / r.lisa;
  return {loss < kMigrationLoss, "HR@10 fitted " + fmt(r.migrated) + " vs planted " +
                                     fmt(r.lisa) + ", relative loss " + fmt(loss * 100, 3) + "%"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "compression ratios", compression_ratios},
      {2, "single-codebook exactness", single_codebook_exactness},
      {3, "relaxation equivalence", relaxation_equivalence},
      {4, "streaming/batch agreement", streaming_agreement},
      {5, "linear scaling", linear_scaling},
      {6, "histogram invariants", histogram_invariants},
      {7, "quantizer sanity", quantizer_sanity},
      {8, "ranking metrics", ranking_metrics},
      {9, "recommendation property", recommendation_property},
      {10, "codebook migration", codebook_migration},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    if (!v.pass) ++failures;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << c.id << ": " << c.name << " -- "
              << v.detail << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/" << criteria.size()
            << " criteria passed" << std::endl;
  return failures == 0 ? 0 : 1;
}
