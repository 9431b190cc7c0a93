#include "lisa/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lisa/attention.hpp"
#include "lisa/bench.hpp"
#include "lisa/config.hpp"
#include "lisa/errors.hpp"
#include "lisa/quantizer.hpp"
#include "lisa/recsys.hpp"
#include "lisa/streaming.hpp"
#include "lisa/tensor_io.hpp"

namespace lisa {

namespace {

ProjectionSet load_projections(const std::string& path, std::size_t dim,
                               std::optional<double> scale) {
  const double s = scale.value_or(1.0 / std::sqrt(static_cast<double>(dim)));
  if (path.empty()) {
    return ProjectionSet::identity(dim, s);
  }
  const Tensor t = read_tensor(path);
  LISA_REQUIRE(t.dims.size() == 3 && t.dims[0] == 3 && t.dims[1] == dim && t.dims[2] == dim,
               InvalidInput, "projection file must be a 3 x D x D tensor (query, key, value)");
  const auto values = t.to_f64();
  const std::size_t block = dim * dim;
  auto slice = [&](std::size_t k) {
    return Matrix(dim, dim,
                  std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(k * block),
                                      values.begin() + static_cast<std::ptrdiff_t>((k + 1) * block)));
  };
  ProjectionSet proj{slice(0), slice(1), slice(2), s};
  proj.validate();
  return proj;
}

void write_matrix_csv(std::ostream& out, const Matrix& m) {
  out << std::setprecision(17);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t k = 0; k < m.cols(); ++k) {
      out << (k ? "," : "") << m(i, k);
    }
    out << '\n';
  }
}

void write_text(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty()) {
    fallback << text;
    return;
  }
  std::ofstream file(path);
  LISA_REQUIRE(file.good(), Error, "cannot open " + path + " for writing");
  file << text;
}

std::vector<ItemId> read_item_stream(const std::string& path) {
  std::ifstream in(path);
  LISA_REQUIRE(in.good(), Error, "cannot open item stream " + path);
  std::vector<ItemId> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    std::istringstream fields(line);
    long long id = -1;
    std::string rest;
    LISA_REQUIRE((fields >> id) && !(fields >> rest) && id >= 0 && id <= 0xFFFFFFFFLL,
                 InvalidInput, "line " + std::to_string(line_no) + " of " + path +
                                   " is not a nonnegative item id");
    items.push_back(static_cast<ItemId>(id));
  }
  return items;
}

struct FitArgs {
  std::string embeddings;
  std::string config;
  std::string out_codebooks;
  std::string out_codes;
  std::optional<std::size_t> books;
  std::optional<std::size_t> words;
  std::optional<std::size_t> iters;
  std::optional<std::uint64_t> seed;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  RunConfig config = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  if (a.books) config.fit.num_books = *a.books;
  if (a.words) config.fit.num_words = *a.words;
  if (a.iters) config.fit.iters = *a.iters;
  if (a.seed) config.fit.seed = *a.seed;
  const Matrix embeddings = tensor_to_matrix(read_tensor(a.embeddings));
  const FitResult fit = fit_codebooks(embeddings, config.fit);
  if (!a.out_codebooks.empty()) {
    write_tensor(a.out_codebooks, to_tensor(fit.codebooks));
  }
  if (!a.out_codes.empty()) {
    write_tensor(a.out_codes, to_tensor(fit.assignments));
  }
  nlohmann::ordered_json summary;
  summary["items"] = embeddings.rows();
  summary["B"] = config.fit.num_books;
  summary["W"] = config.fit.num_words;
  summary["iterations"] = fit.mse_history.size();
  summary["final_mse"] = fit.final_mse;
  summary["warnings"] = fit.warnings;
  out << summary.dump(2) << '\n';
  return 0;
}

struct EncodeArgs {
  std::string codebooks;
  std::string embeddings;
  std::string out;
  std::string out_soft;
  double temperature = 1.0;
};

int cmd_encode(const EncodeArgs& a, std::ostream&) {
  const Codebooks codebooks = tensor_to_codebooks(read_tensor(a.codebooks));
  const Matrix embeddings = tensor_to_matrix(read_tensor(a.embeddings));
  write_tensor(a.out, to_tensor(encode_all(embeddings, codebooks)));
  if (!a.out_soft.empty()) {
    const auto soft = soft_assign_all(embeddings, codebooks, a.temperature);
    write_tensor(a.out_soft, Tensor::from_f64({soft.length(), soft.num_books(), soft.num_words()},
                                              soft.values()));
  }
  return 0;
}

struct AttendArgs {
  std::string codebooks;
  std::string codes;
  std::string embeddings;
  std::string proj;
  std::string config;
  std::string mode;
  std::string variant;
  std::optional<double> scale;
  double temperature = 1.0;
  std::string out;
};

int cmd_attend(const AttendArgs& a, std::ostream& out) {
  RunConfig config = a.config.empty() ? RunConfig{} : load_run_config(a.config);
  if (!a.mode.empty()) config.forward.mode = parse_attention_mode(a.mode);
  if (!a.variant.empty()) config.forward.variant = parse_forward_variant(a.variant);
  if (a.scale) config.forward.scale = *a.scale;

  const Codebooks codebooks = tensor_to_codebooks(read_tensor(a.codebooks));
  const ProjectionSet proj = load_projections(a.proj, codebooks.dim(), config.forward.scale);
  const auto table = build_ip_table(codebooks, proj);
  const auto values = project_values(codebooks, proj);

  Matrix result;
  if (config.forward.variant == ForwardVariant::soft) {
    LISA_REQUIRE(!a.embeddings.empty(), InvalidInput,
                 "the soft variant needs --embeddings to compute assignment masses");
    const Matrix x = tensor_to_matrix(read_tensor(a.embeddings));
    const auto masses = soft_assign_all(x, codebooks, a.temperature);
    result = lisa_forward_soft(masses, encode_all(x, codebooks), table, values,
                               config.forward.mode);
  } else {
    LISA_REQUIRE(!a.codes.empty() || !a.embeddings.empty(), InvalidInput,
                 "attend needs --codes or --embeddings");
    const CodewordIndices codes =
        !a.codes.empty() ? tensor_to_indices(read_tensor(a.codes))
                         : encode_all(tensor_to_matrix(read_tensor(a.embeddings)), codebooks);
    result = lisa_forward(codes, table, values, config.forward.mode);
  }
  if (a.out.empty()) {
    write_matrix_csv(out, result);
  } else {
    write_tensor(a.out, to_tensor(result));
  }
  return 0;
}

struct BenchArgs {
  std::vector<std::string> methods{"lisa", "vanilla"};
  std::vector<std::size_t> lengths{256, 512, 1024, 2048, 4096, 8192};
  std::size_t tokens = 8192;
  std::size_t dim = 32;
  std::size_t books = 8;
  std::size_t words = 32;
  std::size_t runs = 5;
  double mem_cap_mib = 2048.0;
  std::size_t threads = 0;
  std::string csv;
};

int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream& err) {
  BenchOptions options;
  options.methods.clear();
  for (const auto& m : a.methods) {
    options.methods.push_back(parse_bench_method(m));
  }
  options.lengths = a.lengths;
  options.token_budget = a.tokens;
  options.dim = a.dim;
  options.num_books = a.books;
  options.num_words = a.words;
  options.runs = a.runs;
  options.memory_cap_bytes = static_cast<std::uint64_t>(a.mem_cap_mib * 1024.0 * 1024.0);
  options.threads = a.threads;
  const BenchReport report = bench_attention(options);
  err << "bench threads: " << report.threads << '\n';
  for (const auto& row : report.rows) {
    if (row.skipped) {
      err << row.method << " L=" << row.length << " skipped: " << row.reason << '\n';
    }
  }
  write_text(a.csv, bench_to_csv(report), out);
  return 0;
}

struct StreamArgs {
  std::string codebooks;
  std::string codes;
  std::string items;
  std::string proj;
  std::optional<double> scale;
  std::size_t k = 10;
  std::string out;
};

int cmd_stream(const StreamArgs& a, std::ostream& out) {
  const Codebooks codebooks = tensor_to_codebooks(read_tensor(a.codebooks));
  const CodewordIndices item_codes = tensor_to_indices(read_tensor(a.codes));
  LISA_REQUIRE(item_codes.num_books() == codebooks.num_books(), InvalidInput,
               "item codes and codebooks disagree on B");
  item_codes.check_bounds(codebooks.num_words());
  LISA_REQUIRE(a.k >= 1, InvalidInput, "--k must be >= 1");
  const ProjectionSet proj = load_projections(a.proj, codebooks.dim(), a.scale);
  const auto table = build_ip_table(codebooks, proj);
  const auto values = project_values(codebooks, proj);
  const auto stream = read_item_stream(a.items);

  std::vector<ItemId> catalog(item_codes.length());
  std::iota(catalog.begin(), catalog.end(), ItemId{0});
  const std::size_t k = std::min(a.k, catalog.size());

  std::ostringstream csv;
  csv << "step,item";
  for (std::size_t r = 1; r <= a.k; ++r) {
    csv << ",top" << r;
  }
  csv << '\n';
  UserState state = state_init(codebooks.num_books(), codebooks.num_words());
  std::vector<ItemId> order(catalog.size());
  for (ItemId item : stream) {
    LISA_REQUIRE(item < item_codes.length(), OutOfRange,
                 "stream item " + std::to_string(item) + " is not in the catalog");
    state_update(state, item_codes.row(item));
    const auto repr = step_infer(state, table, values);
    const auto scores = score_candidates(repr, item_codes, codebooks, catalog);
    std::iota(order.begin(), order.end(), ItemId{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](ItemId x, ItemId y) {
                        return scores[x] != scores[y] ? scores[x] > scores[y] : x < y;
                      });
    csv << state.step << ',' << item;
    for (std::size_t r = 0; r < a.k; ++r) {
      csv << ',';
      if (r < k) {
        csv << order[r];
      }
    }
    csv << '\n';
  }
  write_text(a.out, csv.str(), out);
  return 0;
}

struct EvalArgs {
  std::size_t users = 2000;
  std::size_t items = 1000;
  std::uint64_t seed = 7;
  std::size_t negatives = 100;
  std::vector<std::string> methods{"random", "vanilla", "lisa", "lisa-fit"};
  std::string json;
  std::string csv;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  SynthConfig config;
  config.n_users = a.users;
  config.n_items = a.items;
  config.seed = a.seed;
  config.num_clusters = std::min(config.num_clusters, config.num_words);
  const SynthDataset data = synth_dataset(config);
  const auto proj = ProjectionSet::identity(config.dim);
  EvalOptions options;
  options.num_negatives = a.negatives;

  std::vector<std::pair<std::string, MetricReport>> reports;
  for (const auto& method : a.methods) {
    UserScorer scorer;
    if (method == "random") {
      scorer = make_random_scorer(a.seed + 1);
    } else if (method == "vanilla") {
      scorer = make_vanilla_scorer(data, proj);
    } else if (method == "lisa") {
      scorer = make_lisa_scorer(data, data.planted_codebooks, data.planted_codes, proj);
    } else if (method == "lisa-fit") {
      FitOptions fit;
      fit.num_books = config.num_books;
      fit.num_words = config.num_words;
      fit.seed = a.seed;
      const auto migrated = migrate_codebooks(data.item_embeddings, fit);
      scorer = make_lisa_scorer(data, migrated.codebooks, migrated.codes, proj);
    } else {
      throw InvalidInput("unknown eval method '" + method +
                         "' (expected random, vanilla, lisa or lisa-fit)");
    }
    reports.emplace_back(method, evaluate_users(data, scorer, options));
  }
  const std::string json = metrics_to_json(reports) + "\n";
  if (a.json.empty()) {
    out << json;
  } else {
    write_text(a.json, json, out);
  }
  if (!a.csv.empty()) {
    write_text(a.csv, metrics_to_csv(reports), out);
  }
  return 0;
}

struct RatioArgs {
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t b = 0;
  std::size_t w = 0;
  std::optional<std::size_t> target_b;
  std::optional<std::size_t> target_w;
};

int cmd_ratio(const RatioArgs& a, std::ostream& out) {
  LISA_REQUIRE(a.target_b.has_value() == a.target_w.has_value(), InvalidInput,
               "--target-b and --target-w must be given together");
  std::optional<CodebookShape> target;
  if (a.target_b) {
    target = CodebookShape{*a.target_b, *a.target_w};
  }
  const double ratio = compression_ratio(a.n, a.d, CodebookShape{a.b, a.w}, target);
  out << std::fixed << std::setprecision(2) << ratio << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Linear-time attention over codeword histograms"};
  app.name("lisa");
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit additive codebooks to an embedding table");
  fit_cmd->add_option("--embeddings", fit.embeddings, "N x D embedding tensor")->required();
  fit_cmd->add_option("--config", fit.config, "JSON run config");
  fit_cmd->add_option("--b", fit.books, "Number of codebooks");
  fit_cmd->add_option("--w", fit.words, "Codewords per codebook");
  fit_cmd->add_option("--iters", fit.iters, "k-means iterations per codebook");
  fit_cmd->add_option("--seed", fit.seed, "Random seed");
  fit_cmd->add_option("--out-codebooks", fit.out_codebooks, "Where to write B x W x D codebooks");
  fit_cmd->add_option("--out-codes", fit.out_codes, "Where to write N x B codes");

  EncodeArgs enc;
  auto* enc_cmd = app.add_subcommand("encode", "Encode embeddings as codeword ids");
  enc_cmd->add_option("--codebooks", enc.codebooks, "B x W x D codebook tensor")->required();
  enc_cmd->add_option("--embeddings", enc.embeddings, "N x D embedding tensor")->required();
  enc_cmd->add_option("--out", enc.out, "Where to write N x B codes")->required();
  enc_cmd->add_option("--out-soft", enc.out_soft, "Where to write N x B x W soft masses");
  enc_cmd->add_option("--temperature", enc.temperature, "Soft assignment temperature")
      ->check(CLI::PositiveNumber);

  AttendArgs att;
  auto* att_cmd = app.add_subcommand("attend", "Run histogram attention over a sequence");
  att_cmd->add_option("--codebooks", att.codebooks, "B x W x D codebook tensor")->required();
  att_cmd->add_option("--codes", att.codes, "L x B code tensor");
  att_cmd->add_option("--embeddings", att.embeddings, "L x D sequence embeddings");
  att_cmd->add_option("--proj", att.proj, "3 x D x D query/key/value projections");
  att_cmd->add_option("--config", att.config, "JSON run config");
  att_cmd->add_option("--mode", att.mode, "uni or bi");
  att_cmd->add_option("--variant", att.variant, "base or soft");
  att_cmd->add_option("--scale", att.scale, "Query-key scale (default 1/sqrt(D))")
      ->check(CLI::PositiveNumber);
  att_cmd->add_option("--temperature", att.temperature, "Soft assignment temperature")
      ->check(CLI::PositiveNumber);
  att_cmd->add_option("--out", att.out, "Where to write the L x D output (CSV on stdout if unset)");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Time attention at a fixed token budget");
  bench_cmd->add_option("--methods", bench.methods, "lisa,vanilla")->delimiter(',');
  bench_cmd->add_option("--lengths", bench.lengths, "Sequence lengths")->delimiter(',');
  bench_cmd->add_option("--tokens", bench.tokens, "Tokens per pass");
  bench_cmd->add_option("--d", bench.dim, "Embedding dimension");
  bench_cmd->add_option("--b", bench.books, "Number of codebooks");
  bench_cmd->add_option("--w", bench.words, "Codewords per codebook");
  bench_cmd->add_option("--runs", bench.runs, "Timed passes per row (>= 5)");
  bench_cmd->add_option("--mem-cap-mib", bench.mem_cap_mib, "Skip vanilla rows above this");
  bench_cmd->add_option("--threads", bench.threads, "Worker threads (default LISA_THREADS or 1)");
  bench_cmd->add_option("--csv", bench.csv, "Where to write the CSV (stdout if unset)");

  StreamArgs stream;
  auto* stream_cmd = app.add_subcommand("stream", "Replay an item stream through a user state");
  stream_cmd->add_option("--codebooks", stream.codebooks, "B x W x D codebook tensor")->required();
  stream_cmd->add_option("--codes", stream.codes, "N x B catalog code tensor")->required();
  stream_cmd->add_option("--items", stream.items, "Item ids, one per line")->required();
  stream_cmd->add_option("--proj", stream.proj, "3 x D x D query/key/value projections");
  stream_cmd->add_option("--scale", stream.scale, "Query-key scale (default 1/sqrt(D))")
      ->check(CLI::PositiveNumber);
  stream_cmd->add_option("--k", stream.k, "Items to recommend per step");
  stream_cmd->add_option("--out", stream.out, "Where to write the CSV (stdout if unset)");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Rank held-out next items on synthetic users");
  eval_cmd->add_option("--users", eval.users, "Number of users");
  eval_cmd->add_option("--items", eval.items, "Catalog size");
  eval_cmd->add_option("--seed", eval.seed, "Dataset seed");
  eval_cmd->add_option("--negatives", eval.negatives, "Sampled negatives per user");
  eval_cmd->add_option("--methods", eval.methods, "random,vanilla,lisa,lisa-fit")
      ->delimiter(',');
  eval_cmd->add_option("--json", eval.json, "Where to write metrics JSON (stdout if unset)");
  eval_cmd->add_option("--csv", eval.csv, "Where to write metrics CSV");

  RatioArgs ratio;
  auto* ratio_cmd = app.add_subcommand("ratio", "Embedding compression ratio of a codebook shape");
  ratio_cmd->add_option("--n", ratio.n, "Number of items")->required();
  ratio_cmd->add_option("--d", ratio.d, "Embedding dimension")->required();
  ratio_cmd->add_option("--b", ratio.b, "Number of sequence codebooks")->required();
  ratio_cmd->add_option("--w", ratio.w, "Codewords per sequence codebook")->required();
  ratio_cmd->add_option("--target-b", ratio.target_b, "Number of target-item codebooks");
  ratio_cmd->add_option("--target-w", ratio.target_w, "Codewords per target-item codebook");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*fit_cmd) return cmd_fit(fit, out);
    if (*enc_cmd) return cmd_encode(enc, out);
    if (*att_cmd) return cmd_attend(att, out);
    if (*bench_cmd) return cmd_bench(bench, out, err);
    if (*stream_cmd) return cmd_stream(stream, out);
    if (*eval_cmd) return cmd_eval(eval, out);
    if (*ratio_cmd) return cmd_ratio(ratio, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace lisa
