#include "gcnn/pool.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gcnn/errors.hpp"

namespace gcnn {

EmbedPoolParams init_embed_pool_params(int l, int c, int target, Rng& rng) {
    EmbedPoolParams p;
    p.filter = init_filter_params(l, c, target, rng);
    p.target_size = target;
    return p;
}

Matrix embed_logits(const AdjacencyTensor& adjacency, const Matrix& vertices,
                    const EmbedPoolParams& params) {
    return conv_forward(neighbor_aggregate(adjacency, vertices), params.filter);
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix out(logits.rows(), logits.cols());
    for (int r = 0; r < logits.rows(); ++r) {
        double row_max = logits(r, 0);
        for (int c = 1; c < logits.cols(); ++c) row_max = std::max(row_max, logits(r, c));
        double sum = 0.0;
        for (int c = 0; c < logits.cols(); ++c) {
            out(r, c) = std::exp(logits(r, c) - row_max);
            sum += out(r, c);
        }
        for (int c = 0; c < logits.cols(); ++c) out(r, c) /= sum;
    }
    return out;
}

Matrix pool_vertices(const Matrix& emb, const Matrix& vertices) {
    if (emb.rows() != vertices.rows())
        throw ShapeMismatch("pool_vertices: embedding has " +
                            std::to_string(emb.rows()) + " rows, vertices " +
                            std::to_string(vertices.rows()));
    return matmul(transpose(emb), vertices);
}

AdjacencyTensor pool_adjacency(const Matrix& emb, const AdjacencyTensor& adjacency) {
    if (emb.rows() != adjacency.vertex_count())
        throw ShapeMismatch("pool_adjacency: embedding rows != adjacency n");
    const int target = emb.cols();

    AdjacencyTensor out;
    out.slices.resize(adjacency.slice_count());
    out.slices[0] = identity_slice(target);
    for (int l = 1; l < adjacency.slice_count(); ++l) {
        // emb^T * (A_l * emb), with the inner product done sparsely
        Matrix ae(adjacency.vertex_count(), target);
        sparse_apply(adjacency.slices[l], emb, ae);
        Matrix pooled = matmul(transpose(emb), ae);
        auto& slice = out.slices[l];
        slice.n = target;
        for (int i = 0; i < target; ++i)
            for (int j = 0; j < target; ++j)
                if (pooled(i, j) != 0.0) slice.entries.push_back({i, j, pooled(i, j)});
    }
    return out;
}

EmbedPoolResult embed_pool_forward(const AdjacencyTensor& adjacency,
                                   const Matrix& vertices,
                                   const EmbedPoolParams& params) {
    EmbedPoolResult res;
    res.cache.nbr = neighbor_aggregate(adjacency, vertices);
    Matrix logits = conv_forward(res.cache.nbr, params.filter);
    res.cache.emb = softmax_rows(logits);
    res.cache.vertices = vertices;
    res.cache.adjacency = adjacency;
    res.vertices = pool_vertices(res.cache.emb, vertices);
    res.adjacency = pool_adjacency(res.cache.emb, adjacency);
    return res;
}

EmbedPoolGrads pool_backward(const EmbedPoolCache& cache, const EmbedPoolParams& params,
                             const Matrix& grad_pooled_vertices,
                             const std::vector<Matrix>& grad_pooled_adjacency,
                             bool need_adjacency_grad) {
    const Matrix& emb = cache.emb;
    const Matrix& v_in = cache.vertices;
    const int n = emb.rows();
    const int target = emb.cols();
    if (grad_pooled_vertices.rows() != target || grad_pooled_vertices.cols() != v_in.cols())
        throw ShapeMismatch("pool_backward: pooled vertex grad shape");

    EmbedPoolGrads g;

    // Eq. V_out = emb^T V_in: d emb += V_in * dV_out^T, dV_in += emb * dV_out
    Matrix d_emb = matmul(v_in, transpose(grad_pooled_vertices));
    g.vertices = matmul(emb, grad_pooled_vertices);

    if (need_adjacency_grad)
        g.adjacency.resize(cache.adjacency.slice_count());

    // A_out = emb^T A_l emb per slice (slice 0 is reset, no gradient path).
    for (int l = 1; l < cache.adjacency.slice_count(); ++l) {
        if (static_cast<int>(grad_pooled_adjacency.size()) <= l ||
            grad_pooled_adjacency[l].empty())
            continue;
        const Matrix& da = grad_pooled_adjacency[l];
        if (da.rows() != target || da.cols() != target)
            throw ShapeMismatch("pool_backward: pooled adjacency grad shape");
        const auto& slice = cache.adjacency.slices[l];

        // d emb += A_l * emb * dA^T + A_l^T * emb * dA
        Matrix e_dat = matmul(emb, transpose(da));
        Matrix tmp(n, target);
        sparse_apply(slice, e_dat, tmp);
        add_scaled(d_emb, tmp, 1.0);

        Matrix e_da = matmul(emb, da);
        tmp.fill(0.0);
        sparse_apply_transposed(slice, e_da, tmp);
        add_scaled(d_emb, tmp, 1.0);

        // dA_l = emb * dA * emb^T when the input adjacency is itself learned
        if (need_adjacency_grad)
            g.adjacency[l] = matmul(matmul(emb, da), transpose(emb));
    }

    // Softmax adjoint, row-wise: dlogit = emb .* (d_emb - rowdot(d_emb, emb))
    g.logits = Matrix(n, target);
    for (int r = 0; r < n; ++r) {
        double dot = 0.0;
        for (int c = 0; c < target; ++c) dot += d_emb(r, c) * emb(r, c);
        for (int c = 0; c < target; ++c)
            g.logits(r, c) = emb(r, c) * (d_emb(r, c) - dot);
    }

    // Logits were produced by the 1-hop filter; finish with its adjoint.
    ConvGrads cg = conv_backward(cache.nbr, cache.adjacency, params.filter, g.logits);
    g.weights = std::move(cg.weights);
    g.biases = std::move(cg.biases);
    add_scaled(g.vertices, cg.vertices, 1.0);

    if (need_adjacency_grad) {
        auto conv_adj = conv_adjacency_backward(v_in, params.filter, g.logits);
        for (int l = 1; l < cache.adjacency.slice_count(); ++l) {
            if (conv_adj[l].empty()) continue;
            if (g.adjacency[l].empty())
                g.adjacency[l] = std::move(conv_adj[l]);
            else
                add_scaled(g.adjacency[l], conv_adj[l], 1.0);
        }
    }
    return g;
}

std::vector<double> gfc(const AdjacencyTensor& adjacency, const Matrix& vertices,
                        const EmbedPoolParams& params) {
    if (params.target_size != 1)
        throw ShapeMismatch("gfc requires target_size 1, got " +
                            std::to_string(params.target_size));
    EmbedPoolResult res = embed_pool_forward(adjacency, vertices, params);
    std::vector<double> out(res.vertices.cols());
    for (int c = 0; c < res.vertices.cols(); ++c) out[c] = res.vertices(0, c);
    return out;
}

}  // namespace gcnn
