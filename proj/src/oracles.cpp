#include "lisa/oracles.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

namespace lisa::oracle {

namespace {

// Scalar y = x * P, kept local so the oracles share no arithmetic with the
// library's projection helpers.
std::vector<double> times(std::span<const double> x, const Matrix& p) {
  std::vector<double> y(p.cols(), 0.0);
  for (std::size_t j = 0; j < p.cols(); ++j) {
    for (std::size_t k = 0; k < x.size(); ++k) {
      y[j] += x[k] * p(k, j);
    }
  }
  return y;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    s += a[k] * b[k];
  }
  return s;
}

void check(const ProjectionSet& proj, std::size_t dim) {
  proj.validate();
  if (proj.dim() != dim) {
    throw std::invalid_argument("oracle: projection dimension mismatch");
  }
}

struct Projected {
  std::vector<double> q, k, v;
};

Projected project_codeword(const Codebooks& codebooks, const ProjectionSet& proj, std::size_t b,
                           std::size_t w) {
  const auto c = codebooks.codeword(b, w);
  return {times(c, proj.query), times(c, proj.key), times(c, proj.value)};
}

}  // namespace

Matrix vanilla_attention_probs(const DenseSequence& x, const ProjectionSet& proj, bool causal) {
  check(proj, x.cols());
  const std::size_t length = x.rows();
  std::vector<std::vector<double>> q(length), k(length);
  for (std::size_t i = 0; i < length; ++i) {
    q[i] = times(x.row(i), proj.query);
    k[i] = times(x.row(i), proj.key);
  }
  Matrix probs(length, length);
  for (std::size_t i = 0; i < length; ++i) {
    const std::size_t visible = causal ? i + 1 : length;
    double peak = -INFINITY;
    for (std::size_t j = 0; j < visible; ++j) {
      peak = std::fmax(peak, proj.scale * dot(q[i], k[j]));
    }
    double z = 0.0;
    for (std::size_t j = 0; j < visible; ++j) {
      probs(i, j) = std::exp(proj.scale * dot(q[i], k[j]) - peak);
      z += probs(i, j);
    }
    for (std::size_t j = 0; j < visible; ++j) {
      probs(i, j) /= z;
    }
  }
  return probs;
}

Matrix vanilla_attention(const DenseSequence& x, const ProjectionSet& proj, bool causal) {
  const Matrix probs = vanilla_attention_probs(x, proj, causal);
  const std::size_t length = x.rows();
  const std::size_t dim = x.cols();
  Matrix out(length, dim);
  for (std::size_t j = 0; j < length; ++j) {
    const auto v = times(x.row(j), proj.value);
    for (std::size_t i = 0; i < length; ++i) {
      for (std::size_t t = 0; t < dim; ++t) {
        out(i, t) += probs(i, j) * v[t];
      }
    }
  }
  return out;
}

Matrix direct_relaxed_attention(const CodewordIndices& indices, const Codebooks& codebooks,
                                const ProjectionSet& proj, AttentionMode mode) {
  check(proj, codebooks.dim());
  const std::size_t length = indices.length();
  const std::size_t dim = codebooks.dim();
  Matrix out(length, dim);
  for (std::size_t i = 0; i < length; ++i) {
    const std::size_t visible = mode == AttentionMode::unidirectional ? i + 1 : length;
    for (std::size_t b = 0; b < indices.num_books(); ++b) {
      const auto query = project_codeword(codebooks, proj, b, indices(i, b));
      std::vector<double> numer(dim, 0.0);
      double denom = 0.0;
      for (std::size_t j = 0; j < visible; ++j) {
        const auto item = project_codeword(codebooks, proj, b, indices(j, b));
        const double weight = std::exp(proj.scale * dot(query.q, item.k));
        denom += weight;
        for (std::size_t t = 0; t < dim; ++t) {
          numer[t] += weight * item.v[t];
        }
      }
      for (std::size_t t = 0; t < dim; ++t) {
        out(i, t) += numer[t] / denom;
      }
    }
  }
  return out;
}

Matrix setform_attention(const CodewordIndices& indices, const Codebooks& codebooks,
                         const ProjectionSet& proj, AttentionMode mode) {
  check(proj, codebooks.dim());
  const std::size_t length = indices.length();
  const std::size_t dim = codebooks.dim();
  Matrix out(length, dim);
  for (std::size_t i = 0; i < length; ++i) {
    const std::size_t visible = mode == AttentionMode::unidirectional ? i + 1 : length;
    for (std::size_t b = 0; b < indices.num_books(); ++b) {
      // Occurring codeword set with counts.
      std::map<CodewordId, std::size_t> occurrences;
      for (std::size_t j = 0; j < visible; ++j) {
        ++occurrences[indices(j, b)];
      }
      const auto query = project_codeword(codebooks, proj, b, indices(i, b));
      std::vector<double> numer(dim, 0.0);
      double denom = 0.0;
      for (const auto& [word, count] : occurrences) {
        const auto key = project_codeword(codebooks, proj, b, word);
        const double weight =
            static_cast<double>(count) * std::exp(proj.scale * dot(query.q, key.k));
        denom += weight;
        for (std::size_t t = 0; t < dim; ++t) {
          numer[t] += weight * key.v[t];
        }
      }
      for (std::size_t t = 0; t < dim; ++t) {
        out(i, t) += numer[t] / denom;
      }
    }
  }
  return out;
}

}  // namespace lisa::oracle
