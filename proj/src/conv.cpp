#include "gcnn/conv.hpp"

#include <cmath>
#include <string>

#include "gcnn/errors.hpp"

namespace gcnn {

FilterParams init_filter_params(int l, int c, int f, Rng& rng) {
    FilterParams p(l, c, f);
    const double stddev = 1.0 / std::sqrt(static_cast<double>(l) * c);
    for (auto& w : p.weights) w = rng.normal(0.0, stddev);
    return p;
}

void sparse_apply(const AdjacencySlice& a, const Matrix& v, Matrix& out) {
    if (v.rows() != a.n || out.rows() != a.n || out.cols() != v.cols())
        throw ShapeMismatch("sparse_apply: slice n=" + std::to_string(a.n) +
                            " vs vertices " + std::to_string(v.rows()) + "x" +
                            std::to_string(v.cols()));
    const int c = v.cols();
    for (const auto& e : a.entries) {
        const double w = e.w;
        for (int k = 0; k < c; ++k) out(e.i, k) += w * v(e.j, k);
    }
}

void sparse_apply_transposed(const AdjacencySlice& a, const Matrix& v, Matrix& out) {
    if (v.rows() != a.n || out.rows() != a.n || out.cols() != v.cols())
        throw ShapeMismatch("sparse_apply_transposed shape mismatch");
    const int c = v.cols();
    for (const auto& e : a.entries) {
        const double w = e.w;
        for (int k = 0; k < c; ++k) out(e.j, k) += w * v(e.i, k);
    }
}

Matrix neighbor_aggregate(const AdjacencyTensor& adjacency, const Matrix& vertices) {
    const int n = adjacency.vertex_count();
    const int l = adjacency.slice_count();
    const int c = vertices.cols();
    if (vertices.rows() != n)
        throw ShapeMismatch("neighbor_aggregate: V has " +
                            std::to_string(vertices.rows()) + " rows, adjacency n=" +
                            std::to_string(n));

    Matrix nbr(n, l * c);
    for (int s = 0; s < l; ++s) {
        const auto& slice = adjacency.slices[s];
        for (const auto& e : slice.entries) {
            const double w = e.w;
            for (int k = 0; k < c; ++k) nbr(e.i, s * c + k) += w * vertices(e.j, k);
        }
    }
    return nbr;
}

Matrix conv_forward(const Matrix& nbr, const FilterParams& params) {
    const std::size_t lc =
        static_cast<std::size_t>(params.num_slices) * params.in_features;
    if (static_cast<std::size_t>(nbr.cols()) != lc)
        throw ShapeMismatch("conv_forward: neighbor matrix has " +
                            std::to_string(nbr.cols()) + " columns, params expect " +
                            std::to_string(lc));
    const int n = nbr.rows();
    const int f = params.out_features;
    Matrix out(n, f);
    // weights is the (L*C) x F matrix in row-major order: out = nbr * W + b.
    for (int r = 0; r < n; ++r) {
        for (std::size_t k = 0; k < lc; ++k) {
            const double v = nbr(r, static_cast<int>(k));
            if (v == 0.0) continue;
            const double* wrow = &params.weights[k * f];
            for (int q = 0; q < f; ++q) out(r, q) += v * wrow[q];
        }
        for (int q = 0; q < f; ++q) out(r, q) += params.biases[q];
    }
    return out;
}

ConvGrads conv_backward(const Matrix& nbr, const AdjacencyTensor& adjacency,
                        const FilterParams& params, const Matrix& grad_out) {
    const int n = nbr.rows();
    const int f = params.out_features;
    const int c = params.in_features;
    const int l = params.num_slices;
    if (grad_out.rows() != n || grad_out.cols() != f)
        throw ShapeMismatch("conv_backward: grad_out is " +
                            std::to_string(grad_out.rows()) + "x" +
                            std::to_string(grad_out.cols()) + ", expected " +
                            std::to_string(n) + "x" + std::to_string(f));
    if (adjacency.slice_count() != l || adjacency.vertex_count() != n)
        throw ShapeMismatch("conv_backward: adjacency inconsistent with params");

    ConvGrads g;
    g.weights.assign(params.weights.size(), 0.0);
    g.biases.assign(f, 0.0);

    // dW = nbr^T * grad_out, db = column sums of grad_out
    for (int r = 0; r < n; ++r) {
        for (int k = 0; k < nbr.cols(); ++k) {
            const double v = nbr(r, k);
            if (v == 0.0) continue;
            double* wrow = &g.weights[static_cast<std::size_t>(k) * f];
            for (int q = 0; q < f; ++q) wrow[q] += v * grad_out(r, q);
        }
        for (int q = 0; q < f; ++q) g.biases[q] += grad_out(r, q);
    }

    // dV = sum_l A_l^T * (grad_out * h_l^T); h_l is the C x F slab of slice l.
    g.vertices = Matrix(n, c);
    Matrix slab(n, c);
    for (int s = 0; s < l; ++s) {
        slab.fill(0.0);
        for (int r = 0; r < n; ++r)
            for (int k = 0; k < c; ++k) {
                const double* wrow = &params.weights[(static_cast<std::size_t>(s) * c + k) * f];
                double acc = 0.0;
                for (int q = 0; q < f; ++q) acc += grad_out(r, q) * wrow[q];
                slab(r, k) = acc;
            }
        sparse_apply_transposed(adjacency.slices[s], slab, g.vertices);
    }
    return g;
}

std::vector<Matrix> conv_adjacency_backward(const Matrix& vertices,
                                            const FilterParams& params,
                                            const Matrix& grad_out) {
    const int n = vertices.rows();
    const int c = params.in_features;
    const int f = params.out_features;
    std::vector<Matrix> grads(params.num_slices);
    Matrix vt = transpose(vertices);
    for (int s = 1; s < params.num_slices; ++s) {
        // grad_A_l = (grad_out * h_l^T) * V^T
        Matrix gh(n, c);
        for (int r = 0; r < n; ++r)
            for (int k = 0; k < c; ++k) {
                const double* wrow = &params.weights[(static_cast<std::size_t>(s) * c + k) * f];
                double acc = 0.0;
                for (int q = 0; q < f; ++q) acc += grad_out(r, q) * wrow[q];
                gh(r, k) = acc;
            }
        grads[s] = matmul(gh, vt);
    }
    return grads;
}

std::vector<Matrix> dense_filter_reference(const AdjacencyTensor& adjacency,
                                           const FilterParams& params) {
    const int n = adjacency.vertex_count();
    const int c = params.in_features;
    const int f = params.out_features;
    if (adjacency.slice_count() != params.num_slices)
        throw ShapeMismatch("dense_filter_reference: slice count mismatch");

    std::vector<Matrix> filter(static_cast<std::size_t>(c) * f);
    for (auto& m : filter) m = Matrix(n, n);
    for (int s = 0; s < params.num_slices; ++s) {
        Matrix dense = densify_slice(adjacency.slices[s]);
        for (int k = 0; k < c; ++k)
            for (int q = 0; q < f; ++q)
                add_scaled(filter[static_cast<std::size_t>(k) * f + q], dense,
                           params.w(s, k, q));
    }
    return filter;
}

Matrix apply_dense_filter(const std::vector<Matrix>& filter, int out_features,
                          const Matrix& vertices, const std::vector<double>& biases) {
    const int n = vertices.rows();
    const int c = vertices.cols();
    Matrix out(n, out_features);
    for (int k = 0; k < c; ++k)
        for (int q = 0; q < out_features; ++q) {
            const Matrix& h = filter[static_cast<std::size_t>(k) * out_features + q];
            for (int i = 0; i < n; ++i) {
                double acc = 0.0;
                for (int j = 0; j < n; ++j) acc += h(i, j) * vertices(j, k);
                out(i, q) += acc;
            }
        }
    for (int i = 0; i < n; ++i)
        for (int q = 0; q < out_features; ++q) out(i, q) += biases[q];
    return out;
}

Matrix poly_filter(const AdjacencySlice& adjacency, const std::vector<double>& coeffs,
                   const Matrix& vertices) {
    if (vertices.rows() != adjacency.n)
        throw ShapeMismatch("poly_filter: vertex count mismatch");
    Matrix out(vertices.rows(), vertices.cols());
    if (coeffs.empty()) return out;

    Matrix term = vertices;  // A^0 * V
    for (std::size_t k = 0; k < coeffs.size(); ++k) {
        if (k > 0) {
            Matrix next(term.rows(), term.cols());
            sparse_apply(adjacency, term, next);
            term = std::move(next);
        }
        add_scaled(out, term, coeffs[k]);
    }
    return out;
}

}  // namespace gcnn
