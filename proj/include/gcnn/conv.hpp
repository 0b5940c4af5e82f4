#pragma once

#include <vector>

#include "gcnn/graph.hpp"
#include "gcnn/matrix.hpp"
#include "gcnn/rng.hpp"

namespace gcnn {

// Learnable taps of a linear vertex filter: one scalar per (slice, input
// feature, output filter) plus one bias per filter. The full N x N x C x F
// filter tensor is never materialized; dense_filter_reference below builds it
// explicitly for small test instances.
struct FilterParams {
    int num_slices = 0;    // L
    int in_features = 0;   // C
    int out_features = 0;  // F
    std::vector<double> weights;  // L*C*F, laid out [l][c][f]
    std::vector<double> biases;   // F

    FilterParams() = default;
    FilterParams(int l, int c, int f)
        : num_slices(l), in_features(c), out_features(f),
          weights(static_cast<std::size_t>(l) * c * f, 0.0),
          biases(f, 0.0) {}

    double& w(int l, int c, int f) {
        return weights[(static_cast<std::size_t>(l) * in_features + c) * out_features + f];
    }
    double w(int l, int c, int f) const {
        return weights[(static_cast<std::size_t>(l) * in_features + c) * out_features + f];
    }
};

// Zero-mean Gaussian weights with std 1/sqrt(L*C); biases zero. Batch
// normalization downstream handles the remaining scale.
FilterParams init_filter_params(int l, int c, int f, Rng& rng);

// Neighbor matrix: N x (L*C), column block l holds A_l * V. Block 0 is V
// itself (identity slice). Accumulation follows the sorted entry order of
// each slice, so results are bit-reproducible.
Matrix neighbor_aggregate(const AdjacencyTensor& adjacency, const Matrix& vertices);

// V_out[n][f] = sum_{l,c} w(l,c,f) * nbr[n][l*C+c] + bias[f]
Matrix conv_forward(const Matrix& nbr, const FilterParams& params);

struct ConvGrads {
    Matrix vertices;              // N x C
    std::vector<double> weights;  // same layout as FilterParams.weights
    std::vector<double> biases;   // F
};

ConvGrads conv_backward(const Matrix& nbr, const AdjacencyTensor& adjacency,
                        const FilterParams& params, const Matrix& grad_out);

// Gradient of the filter output with respect to the adjacency entries, one
// dense N x N matrix per slice: dA_l = grad_out * h_l^T * V^T. Slice 0 is the
// constant identity and gets no gradient (element 0 stays empty). Needed when
// the adjacency itself is learned, i.e. downstream of an embed pooling layer.
std::vector<Matrix> conv_adjacency_backward(const Matrix& vertices,
                                            const FilterParams& params,
                                            const Matrix& grad_out);

// Explicit H^{(c,f)} = sum_l w(l,c,f) * dense(A_l); index (c*F + f) into the
// returned vector. Test oracle only: O(N^2 C F) memory.
std::vector<Matrix> dense_filter_reference(const AdjacencyTensor& adjacency,
                                           const FilterParams& params);

// Applies an explicit filter tensor plus biases; used together with
// dense_filter_reference to cross-check the sparse path.
Matrix apply_dense_filter(const std::vector<Matrix>& filter, int out_features,
                          const Matrix& vertices, const std::vector<double>& biases);

// (h0 I + h1 A + ... + hk A^k) V via iterated sparse products; A^k is never
// materialized. Applied independently to every feature column.
Matrix poly_filter(const AdjacencySlice& adjacency, const std::vector<double>& coeffs,
                   const Matrix& vertices);

// out += A * v (sparse product, sorted entry order)
void sparse_apply(const AdjacencySlice& a, const Matrix& v, Matrix& out);
// out += A^T * v
void sparse_apply_transposed(const AdjacencySlice& a, const Matrix& v, Matrix& out);

}  // namespace gcnn
