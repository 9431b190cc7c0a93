#include "lisa/attention.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "lisa/errors.hpp"

namespace lisa {

namespace {

void check_forward_shapes(std::size_t num_books, const InnerProductTable& table,
                          const ProjectedValues& values) {
  LISA_REQUIRE(table.num_books() == num_books && values.num_books() == num_books, InvalidInput,
               "sequence, inner-product table and projected values disagree on B");
  LISA_REQUIRE(table.num_words() == values.num_words(), InvalidInput,
               "inner-product table and projected values disagree on W");
}

std::vector<double> project_rows(std::span<const double> rows, std::size_t count,
                                 const Matrix& projection) {
  const std::size_t dim = projection.rows();
  std::vector<double> out(count * dim, 0.0);
  for (std::size_t r = 0; r < count; ++r) {
    const double* x = rows.data() + r * dim;
    double* y = out.data() + r * dim;
    for (std::size_t k = 0; k < dim; ++k) {
      const double xk = x[k];
      if (xk == 0.0) {
        continue;
      }
      const auto p = projection.row(k);
      for (std::size_t j = 0; j < dim; ++j) {
        y[j] += xk * p[j];
      }
    }
  }
  return out;
}

void check_codebooks_match(const Codebooks& codebooks, const ProjectionSet& proj) {
  proj.validate();
  LISA_REQUIRE(codebooks.dim() == proj.dim(), InvalidInput,
               "codebook dimension " + std::to_string(codebooks.dim()) +
                   " does not match projection dimension " + std::to_string(proj.dim()));
}

}  // namespace

ProjectionSet ProjectionSet::identity(std::size_t dim) {
  return identity(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
}

ProjectionSet ProjectionSet::identity(std::size_t dim, double scale) {
  return ProjectionSet{Matrix::identity(dim), Matrix::identity(dim), Matrix::identity(dim), scale};
}

void ProjectionSet::validate() const {
  const std::size_t d = query.rows();
  LISA_REQUIRE(d >= 1, InvalidInput, "projection matrices are empty");
  for (const Matrix* m : {&query, &key, &value}) {
    LISA_REQUIRE(m->rows() == d && m->cols() == d, InvalidInput,
                 "projection matrices must all be D x D");
    LISA_REQUIRE(m->all_finite(), InvalidInput, "projection matrix has non-finite entries");
  }
  LISA_REQUIRE(scale > 0.0 && std::isfinite(scale), InvalidInput,
               "attention scale must be positive and finite");
}

std::vector<double> project(std::span<const double> x, const Matrix& projection) {
  LISA_REQUIRE(x.size() == projection.rows(), InvalidInput, "projection dimension mismatch");
  return project_rows(x, 1, projection);
}

InnerProductTable::InnerProductTable(std::size_t num_books, std::size_t num_words,
                                     std::vector<double> values, double max_abs_exponent)
    : num_books_(num_books),
      num_words_(num_words),
      data_(std::move(values)),
      max_abs_exponent_(max_abs_exponent) {
  LISA_REQUIRE(data_.size() == num_books_ * num_words_ * num_words_, InvalidInput,
               "inner-product table payload does not match B x W x W");
}

ProjectedValues::ProjectedValues(std::size_t num_books, std::size_t num_words, std::size_t dim,
                                 std::vector<double> values)
    : num_books_(num_books), num_words_(num_words), dim_(dim), data_(std::move(values)) {
  LISA_REQUIRE(data_.size() == num_books_ * num_words_ * dim_, InvalidInput,
               "projected values payload does not match B x W x D");
}

HistogramTensor::HistogramTensor(std::size_t positions, std::size_t num_books,
                                 std::size_t num_words, bool broadcast)
    : positions_(positions),
      num_books_(num_books),
      num_words_(num_words),
      broadcast_(broadcast),
      data_((broadcast ? 1 : positions) * num_books * num_words, 0.0) {}

InnerProductTable build_ip_table(const Codebooks& codebooks, const ProjectionSet& proj) {
  check_codebooks_match(codebooks, proj);
  const std::size_t num_books = codebooks.num_books();
  const std::size_t num_words = codebooks.num_words();
  const std::size_t dim = codebooks.dim();

  std::vector<double> table(num_books * num_words * num_words);
  double max_abs = 0.0;
  for (std::size_t b = 0; b < num_books; ++b) {
    const auto words = codebooks.values().subspan(b * num_words * dim, num_words * dim);
    const auto queries = project_rows(words, num_words, proj.query);
    const auto keys = project_rows(words, num_words, proj.key);
    for (std::size_t i = 0; i < num_words; ++i) {
      const double* q = queries.data() + i * dim;
      for (std::size_t j = 0; j < num_words; ++j) {
        const double* k = keys.data() + j * dim;
        double dot = 0.0;
        for (std::size_t t = 0; t < dim; ++t) {
          dot += q[t] * k[t];
        }
        const double exponent = proj.scale * dot;
        if (std::isnan(exponent)) {
          throw NumericRange("inner product at (b=" + std::to_string(b) + ", i=" +
                             std::to_string(i) + ", j=" + std::to_string(j) + ") is not a number");
        }
        max_abs = std::max(max_abs, std::abs(exponent));
        const double clamped = std::clamp(exponent, -InnerProductTable::kExponentClamp,
                                          InnerProductTable::kExponentClamp);
        const double entry = std::exp(clamped);
        if (!(entry > 0.0) || !std::isfinite(entry)) {
          throw NumericRange("table entry at (b=" + std::to_string(b) + ", i=" +
                             std::to_string(i) + ", j=" + std::to_string(j) + ") overflowed");
        }
        table[(b * num_words + i) * num_words + j] = entry;
      }
    }
  }
  return InnerProductTable(num_books, num_words, std::move(table), max_abs);
}

ProjectedValues project_values(const Codebooks& codebooks, const ProjectionSet& proj) {
  check_codebooks_match(codebooks, proj);
  return ProjectedValues(
      codebooks.num_books(), codebooks.num_words(), codebooks.dim(),
      project_rows(codebooks.values(), codebooks.num_books() * codebooks.num_words(),
                   proj.value));
}

HistogramTensor histogram_prefix(const CodewordIndices& indices, std::size_t num_words) {
  indices.check_bounds(num_words);
  const std::size_t num_books = indices.num_books();
  HistogramTensor hist(indices.length(), num_books, num_words, false);
  for (std::size_t i = 0; i < indices.length(); ++i) {
    auto cur = hist.mutable_slab(i);
    if (i > 0) {
      const auto prev = hist.slab(i - 1);
      std::copy(prev.begin(), prev.end(), cur.begin());
    }
    for (std::size_t b = 0; b < num_books; ++b) {
      cur[b * num_words + indices(i, b)] += 1.0;
    }
  }
  return hist;
}

HistogramTensor histogram_total(const CodewordIndices& indices, std::size_t num_words) {
  indices.check_bounds(num_words);
  const std::size_t num_books = indices.num_books();
  HistogramTensor hist(indices.length(), num_books, num_words, true);
  auto slab = hist.mutable_slab(0);
  for (std::size_t i = 0; i < indices.length(); ++i) {
    for (std::size_t b = 0; b < num_books; ++b) {
      slab[b * num_words + indices(i, b)] += 1.0;
    }
  }
  return hist;
}

HistogramTensor histogram_prefix_soft(const SoftAssignments& assignments) {
  HistogramTensor hist(assignments.length(), assignments.num_books(), assignments.num_words(),
                       false);
  for (std::size_t i = 0; i < assignments.length(); ++i) {
    auto cur = hist.mutable_slab(i);
    const auto mass = assignments.position(i);
    for (std::size_t k = 0; k < cur.size(); ++k) {
      cur[k] = (i > 0 ? hist.slab(i - 1)[k] : 0.0) + mass[k];
    }
  }
  return hist;
}

HistogramTensor histogram_total_soft(const SoftAssignments& assignments) {
  HistogramTensor hist(assignments.length(), assignments.num_books(), assignments.num_words(),
                       true);
  auto slab = hist.mutable_slab(0);
  for (std::size_t i = 0; i < assignments.length(); ++i) {
    const auto mass = assignments.position(i);
    for (std::size_t k = 0; k < slab.size(); ++k) {
      slab[k] += mass[k];
    }
  }
  return hist;
}

void attend_row(std::span<const double> histogram, std::span<const CodewordId> query,
                const InnerProductTable& table, const ProjectedValues& values,
                std::span<double> out, double min_denominator) {
  const std::size_t num_words = table.num_words();
  const std::size_t dim = values.dim();
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t b = 0; b < query.size(); ++b) {
    const auto scores = table.row(b, query[b]);
    const double* mass = histogram.data() + b * num_words;
    double denom = 0.0;
    for (std::size_t w = 0; w < num_words; ++w) {
      denom += mass[w] * scores[w];
    }
    if (!(denom > min_denominator)) {
      throw InvariantViolation("attention normalizer for codebook " + std::to_string(b) +
                               " is " + std::to_string(denom));
    }
    // Codewords with zero mass are not skipped: they add exactly zero, and a
    // dense loop keeps the cost at B*W*D whatever the histogram occupancy.
    for (std::size_t w = 0; w < num_words; ++w) {
      const double coeff = mass[w] * scores[w] / denom;
      const double* v = values.row(b, w).data();
      for (std::size_t k = 0; k < dim; ++k) {
        out[k] += coeff * v[k];
      }
    }
  }
}

Matrix lisa_forward(const CodewordIndices& indices, const InnerProductTable& table,
                    const ProjectedValues& values, AttentionMode mode) {
  LISA_REQUIRE(indices.length() >= 1, InvalidInput, "attention needs a non-empty sequence");
  check_forward_shapes(indices.num_books(), table, values);
  const std::size_t num_words = table.num_words();
  indices.check_bounds(num_words);

  const std::size_t length = indices.length();
  const std::size_t num_books = indices.num_books();
  Matrix out(length, values.dim());

  if (mode == AttentionMode::bidirectional) {
    const auto hist = histogram_total(indices, num_words);
    for (std::size_t i = 0; i < length; ++i) {
      attend_row(hist.slab(0), indices.row(i), table, values, out.row(i));
    }
    return out;
  }

  // Prefix histogram kept as a single running slab: position i sees the
  // counts of positions 0..i.
  std::vector<double> running(num_books * num_words, 0.0);
  for (std::size_t i = 0; i < length; ++i) {
    for (std::size_t b = 0; b < num_books; ++b) {
      running[b * num_words + indices(i, b)] += 1.0;
    }
    attend_row(running, indices.row(i), table, values, out.row(i));
  }
  return out;
}

Matrix lisa_forward_soft(const SoftAssignments& assignments, const CodewordIndices& queries,
                         const InnerProductTable& table, const ProjectedValues& values,
                         AttentionMode mode) {
  LISA_REQUIRE(queries.length() >= 1, InvalidInput, "attention needs a non-empty sequence");
  LISA_REQUIRE(assignments.length() == queries.length() &&
                   assignments.num_books() == queries.num_books(),
               InvalidInput, "soft assignments and query ids disagree in shape");
  LISA_REQUIRE(assignments.num_words() == table.num_words(), InvalidInput,
               "soft assignments and inner-product table disagree on W");
  check_forward_shapes(queries.num_books(), table, values);
  queries.check_bounds(table.num_words());
  assignments.check_simplex();

  constexpr double kMinSoftDenominator = 1e-30;
  const std::size_t length = queries.length();
  Matrix out(length, values.dim());

  if (mode == AttentionMode::bidirectional) {
    const auto hist = histogram_total_soft(assignments);
    for (std::size_t i = 0; i < length; ++i) {
      attend_row(hist.slab(0), queries.row(i), table, values, out.row(i), kMinSoftDenominator);
    }
    return out;
  }

  std::vector<double> running(queries.num_books() * table.num_words(), 0.0);
  for (std::size_t i = 0; i < length; ++i) {
    const auto mass = assignments.position(i);
    for (std::size_t k = 0; k < running.size(); ++k) {
      running[k] += mass[k];
    }
    attend_row(running, queries.row(i), table, values, out.row(i), kMinSoftDenominator);
  }
  return out;
}

std::vector<double> lisa_attention_weights(const CodewordIndices& indices,
                                           const InnerProductTable& table, AttentionMode mode) {
  const std::size_t num_words = table.num_words();
  LISA_REQUIRE(indices.num_books() == table.num_books(), InvalidInput,
               "sequence and inner-product table disagree on B");
  const auto hist = mode == AttentionMode::unidirectional ? histogram_prefix(indices, num_words)
                                                          : histogram_total(indices, num_words);
  const std::size_t num_books = indices.num_books();
  std::vector<double> weights(indices.length() * num_books * num_words);
  for (std::size_t i = 0; i < indices.length(); ++i) {
    for (std::size_t b = 0; b < num_books; ++b) {
      const auto scores = table.row(b, indices(i, b));
      const auto mass = hist.row(i, b);
      double* a = weights.data() + (i * num_books + b) * num_words;
      double denom = 0.0;
      for (std::size_t w = 0; w < num_words; ++w) {
        a[w] = mass[w] * scores[w];
        denom += a[w];
      }
      if (!(denom > 0.0)) {
        throw InvariantViolation("attention normalizer is not positive");
      }
      for (std::size_t w = 0; w < num_words; ++w) {
        a[w] /= denom;
      }
    }
  }
  return weights;
}

std::vector<Matrix> lisa_forward_batch(const PaddedBatch& batch, const InnerProductTable& table,
                                       const ProjectedValues& values, AttentionMode mode,
                                       std::size_t threads) {
  LISA_REQUIRE(batch.packed.length() == batch.size() * batch.max_length, InvalidInput,
               "packed batch must hold batch_size * max_length rows");
  for (std::size_t len : batch.lengths) {
    LISA_REQUIRE(len >= 1 && len <= batch.max_length, InvalidInput,
                 "sequence length must be in [1, max_length]");
  }
  std::vector<Matrix> outputs(batch.size());
  threads = std::max<std::size_t>(1, std::min(threads, batch.size()));
  std::vector<std::exception_ptr> failures(threads);
  auto run = [&](std::size_t worker) {
    try {
      for (std::size_t s = worker; s < batch.size(); s += threads) {
        const auto seq = batch.packed.slice(s * batch.max_length, batch.lengths[s]);
        outputs[s] = lisa_forward(seq, table, values, mode);
      }
    } catch (...) {
      failures[worker] = std::current_exception();
    }
  };
  if (threads == 1) {
    run(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back(run, t);
    }
  }
  for (const auto& failure : failures) {
    if (failure) {
      std::rethrow_exception(failure);
    }
  }
  return outputs;
}

Matrix dense_attention(const Matrix& x, const ProjectionSet& proj, bool causal) {
  proj.validate();
  LISA_REQUIRE(x.rows() >= 1 && x.cols() == proj.dim(), InvalidInput,
               "dense attention input must be L x D with L >= 1");
  const std::size_t length = x.rows();
  const std::size_t dim = x.cols();
  const auto q = project_rows(x.values(), length, proj.query);
  const auto k = project_rows(x.values(), length, proj.key);
  const auto v = project_rows(x.values(), length, proj.value);

  Matrix out(length, dim);
  std::vector<double> scores(length);
  for (std::size_t i = 0; i < length; ++i) {
    const std::size_t visible = causal ? i + 1 : length;
    const double* qi = q.data() + i * dim;
    double peak = -INFINITY;
    for (std::size_t j = 0; j < visible; ++j) {
      const double* kj = k.data() + j * dim;
      double dot = 0.0;
      for (std::size_t t = 0; t < dim; ++t) {
        dot += qi[t] * kj[t];
      }
      scores[j] = proj.scale * dot;
      peak = std::max(peak, scores[j]);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < visible; ++j) {
      scores[j] = std::exp(scores[j] - peak);
      total += scores[j];
    }
    auto o = out.row(i);
    for (std::size_t j = 0; j < visible; ++j) {
      const double p = scores[j] / total;
      const double* vj = v.data() + j * dim;
      for (std::size_t t = 0; t < dim; ++t) {
        o[t] += p * vj[t];
      }
    }
  }
  return out;
}

AttentionMode parse_attention_mode(const std::string& name) {
  if (name == "uni" || name == "unidirectional") {
    return AttentionMode::unidirectional;
  }
  if (name == "bi" || name == "bidirectional") {
    return AttentionMode::bidirectional;
  }
  throw InvalidInput("unknown attention mode '" + name + "' (expected uni or bi)");
}

std::string to_string(AttentionMode mode) {
  return mode == AttentionMode::unidirectional ? "uni" : "bi";
}

}  // namespace lisa
