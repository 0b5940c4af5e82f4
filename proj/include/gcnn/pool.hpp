#pragma once

#include <vector>

#include "gcnn/conv.hpp"
#include "gcnn/graph.hpp"
#include "gcnn/matrix.hpp"

namespace gcnn {

// Parameters of graph embed pooling: a 1-hop vertex filter whose F output
// features are the N' target vertices of the pooled graph.
struct EmbedPoolParams {
    FilterParams filter;  // out_features == target_size
    int target_size = 0;  // N'
};

EmbedPoolParams init_embed_pool_params(int l, int c, int target, Rng& rng);

// Embedding logits: identical computation to conv_forward with F = N'.
Matrix embed_logits(const AdjacencyTensor& adjacency, const Matrix& vertices,
                    const EmbedPoolParams& params);

// Row-wise softmax, stabilized by subtracting the row maximum. Every output
// row sums to 1 and all entries are strictly positive.
Matrix softmax_rows(const Matrix& logits);

// V_out = emb^T * V_in  (N' x C)
Matrix pool_vertices(const Matrix& emb, const Matrix& vertices);

// Each slice l >= 1 pools to emb^T * A_l * emb; slice 0 of the output is
// reset to the exact N' x N' identity so the tensor invariant holds.
AdjacencyTensor pool_adjacency(const Matrix& emb, const AdjacencyTensor& adjacency);

// Forward pass with everything backward needs retained.
struct EmbedPoolCache {
    Matrix nbr;        // neighbor matrix used for the logits
    Matrix emb;        // softmax output, N x N'
    Matrix vertices;   // input V
    AdjacencyTensor adjacency;  // input tensor
};

struct EmbedPoolResult {
    Matrix vertices;           // pooled V, N' x C
    AdjacencyTensor adjacency;  // pooled tensor, N' x N' x L
    EmbedPoolCache cache;
};

EmbedPoolResult embed_pool_forward(const AdjacencyTensor& adjacency,
                                   const Matrix& vertices,
                                   const EmbedPoolParams& params);

struct EmbedPoolGrads {
    Matrix logits;                // N x N'
    Matrix vertices;              // N x C
    std::vector<double> weights;  // filter weight grads
    std::vector<double> biases;
    std::vector<Matrix> adjacency;  // per input slice, empty unless requested
};

// Adjoint of the full pooling step. Gradients flow through both the pooled
// vertices and the pooled adjacency into the embedding logits and from there
// into the filter parameters and the input vertices. grad_pooled_adjacency
// holds one dense N' x N' matrix per slice l >= 1 (element 0 ignored); pass
// an empty vector when no adjacency gradient arrives from downstream.
EmbedPoolGrads pool_backward(const EmbedPoolCache& cache, const EmbedPoolParams& params,
                             const Matrix& grad_pooled_vertices,
                             const std::vector<Matrix>& grad_pooled_adjacency,
                             bool need_adjacency_grad);

// Graph Fully-Connected vector: embed pooling with N' = 1. The softmax over a
// single output vertex forces every embedding weight to exactly 1, so the
// result is the column sum of the vertex features.
std::vector<double> gfc(const AdjacencyTensor& adjacency, const Matrix& vertices,
                        const EmbedPoolParams& params);

}  // namespace gcnn
