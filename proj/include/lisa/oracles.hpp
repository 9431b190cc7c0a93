#pragma once

#include "lisa/attention.hpp"
#include "lisa/types.hpp"

// Slow reference implementations. Everything here is O(L^2) and written with
// plain scalar loops; nothing calls into the histogram attention code, so the
// two can be checked against each other.

namespace lisa::oracle {

/// softmax(scale * (X P_Q)(X P_K)^T) (X P_V), optionally causal.
Matrix vanilla_attention(const DenseSequence& x, const ProjectionSet& proj, bool causal);

/// The L x L softmax matrix of vanilla_attention (row i, column j).
Matrix vanilla_attention_probs(const DenseSequence& x, const ProjectionSet& proj, bool causal);

/// Per-codebook attention summed over codebooks, evaluated item by item:
/// every visible position j contributes exp(scale <c^b_{q} P_Q, c^b_{j} P_K>)
/// times c^b_j P_V. No histograms, no tables.
Matrix direct_relaxed_attention(const CodewordIndices& indices, const Codebooks& codebooks,
                                const ProjectionSet& proj, AttentionMode mode);

/// Same quantity summed over the set of codewords that occur in the visible
/// prefix, each weighted by its occurrence count.
Matrix setform_attention(const CodewordIndices& indices, const Codebooks& codebooks,
                         const ProjectionSet& proj, AttentionMode mode);

}  // namespace lisa::oracle
