#include "doctest.h"

#include <cmath>
#include <vector>

#include "gcnn/conv.hpp"
#include "gcnn/errors.hpp"
#include "gcnn/graph.hpp"
#include "gcnn/rng.hpp"

using namespace gcnn;

namespace {

// Dense oracle for the neighbor matrix: block l = dense(A_l) * V.
Matrix dense_neighbor_oracle(const AdjacencyTensor& adj, const Matrix& v) {
    Matrix out(v.rows(), adj.slice_count() * v.cols());
    for (int l = 0; l < adj.slice_count(); ++l) {
        Matrix block = matmul(densify_slice(adj.slices[l]), v);
        for (int r = 0; r < v.rows(); ++r)
            for (int c = 0; c < v.cols(); ++c) out(r, l * v.cols() + c) = block(r, c);
    }
    return out;
}

struct RandomInstance {
    AdjacencyTensor adj;
    Matrix v;
    FilterParams params;
};

RandomInstance random_instance(Rng& rng, int max_n, int max_l, int max_c, int max_f,
                               double edge_prob = 0.4) {
    RandomInstance inst;
    const int n = rng.uniform_int(1, max_n);
    const int l = rng.uniform_int(1, max_l);
    const int c = rng.uniform_int(1, max_c);
    const int f = rng.uniform_int(1, max_f);

    std::vector<EdgeSpec> edges;
    for (int s = 1; s < l; ++s)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (rng.uniform(0.0, 1.0) < edge_prob)
                    edges.push_back({s, i, j, rng.uniform(-1.0, 1.0)});
    inst.adj = adjacency_from_edges(n, edges, l);

    inst.v = Matrix(n, c);
    for (auto& x : inst.v.values()) x = rng.uniform(-1.0, 1.0);

    inst.params = FilterParams(l, c, f);
    for (auto& w : inst.params.weights) w = rng.uniform(-1.0, 1.0);
    for (auto& b : inst.params.biases) b = rng.uniform(-1.0, 1.0);
    return inst;
}

double loss_of(const Matrix& out) {
    // Simple smooth scalar head for finite differences: sum of squares / 2.
    double acc = 0.0;
    for (double v : out.values()) acc += 0.5 * v * v;
    return acc;
}

Matrix loss_grad(const Matrix& out) { return out; }

}  // namespace

TEST_SUITE("conv") {

TEST_CASE("neighbor_aggregate matches the dense multiply oracle") {
    auto adj = adjacency_from_edges(2, {{1, 0, 1, 1.0}, {1, 1, 0, 1.0}});
    Matrix v{{1.0}, {2.0}};
    Matrix nbr = neighbor_aggregate(adj, v);
    REQUIRE(nbr.rows() == 2);
    REQUIRE(nbr.cols() == 2);
    CHECK(nbr(0, 0) == 1.0);
    CHECK(nbr(0, 1) == 2.0);
    CHECK(nbr(1, 0) == 2.0);
    CHECK(nbr(1, 1) == 1.0);
    CHECK(max_abs_diff(nbr, dense_neighbor_oracle(adj, v)) == 0.0);
}

TEST_CASE("identity-only tensor aggregates to the vertices themselves") {
    auto adj = adjacency_from_edges(2, {});
    Matrix v{{3.0}, {-4.0}};
    CHECK(max_abs_diff(neighbor_aggregate(adj, v), v) == 0.0);
}

TEST_CASE("an empty slice contributes a zero block") {
    auto adj = adjacency_from_edges(2, {}, 2);
    Matrix v{{1.0}, {2.0}};
    Matrix nbr = neighbor_aggregate(adj, v);
    CHECK(nbr(0, 0) == 1.0);
    CHECK(nbr(1, 0) == 2.0);
    CHECK(nbr(0, 1) == 0.0);
    CHECK(nbr(1, 1) == 0.0);
}

TEST_CASE("conv_forward on the worked two-vertex fixture") {
    Matrix nbr{{1.0, 2.0}, {2.0, 1.0}};
    FilterParams p(2, 1, 1);
    p.w(0, 0, 0) = 3.0;
    p.w(1, 0, 0) = 5.0;
    Matrix out = conv_forward(nbr, p);
    CHECK(out(0, 0) == doctest::Approx(13.0).epsilon(1e-15));
    CHECK(out(1, 0) == doctest::Approx(11.0).epsilon(1e-15));
}

TEST_CASE("zero weights leave only the bias") {
    Matrix nbr{{1.0, 2.0}, {2.0, 1.0}};
    FilterParams p(2, 1, 1);
    p.biases[0] = 7.0;
    Matrix out = conv_forward(nbr, p);
    CHECK(out(0, 0) == 7.0);
    CHECK(out(1, 0) == 7.0);
}

TEST_CASE("identity tap reproduces the input") {
    auto adj = adjacency_from_edges(3, {{1, 0, 1, 1.0}});
    Matrix v(3, 2);
    Rng rng(5);
    for (auto& x : v.values()) x = rng.uniform(-1.0, 1.0);
    FilterParams p(2, 2, 2);
    p.w(0, 0, 0) = 1.0;
    p.w(0, 1, 1) = 1.0;
    Matrix out = conv_forward(neighbor_aggregate(adj, v), p);
    CHECK(max_abs_diff(out, v) == 0.0);
}

TEST_CASE("sparse path equals the dense filter reference") {
    Rng rng(1234);
    for (int trial = 0; trial < 40; ++trial) {
        auto inst = random_instance(rng, 16, 4, 4, 4);
        Matrix sparse = conv_forward(neighbor_aggregate(inst.adj, inst.v), inst.params);
        auto filter = dense_filter_reference(inst.adj, inst.params);
        Matrix dense = apply_dense_filter(filter, inst.params.out_features, inst.v,
                                          inst.params.biases);
        CHECK(max_abs_diff(sparse, dense) < 1e-12);
    }
}

TEST_CASE("dense_filter_reference worked examples") {
    auto ident = adjacency_from_edges(2, {});
    FilterParams scale(1, 1, 1);
    scale.w(0, 0, 0) = 2.0;
    auto filter = dense_filter_reference(ident, scale);
    Matrix expected = Matrix::identity(2);
    add_scaled(expected, Matrix::identity(2), 1.0);  // 2I
    CHECK(max_abs_diff(filter[0], expected) == 0.0);

    FilterParams zero(1, 1, 1);
    auto zf = dense_filter_reference(ident, zero);
    CHECK(max_abs_diff(zf[0], Matrix(2, 2)) == 0.0);

    auto adj = adjacency_from_edges(2, {{1, 0, 1, 1.0}, {1, 1, 0, 1.0}});
    FilterParams p(2, 1, 1);
    p.w(0, 0, 0) = 1.0;
    p.w(1, 0, 0) = 3.0;
    auto hf = dense_filter_reference(adj, p);
    CHECK(max_abs_diff(hf[0], Matrix{{1.0, 3.0}, {3.0, 1.0}}) == 0.0);
}

TEST_CASE("conv_backward zero output gradient gives zero gradients") {
    Rng rng(7);
    auto inst = random_instance(rng, 6, 3, 2, 2);
    Matrix nbr = neighbor_aggregate(inst.adj, inst.v);
    Matrix out = conv_forward(nbr, inst.params);
    Matrix zeros(out.rows(), out.cols());
    auto g = conv_backward(nbr, inst.adj, inst.params, zeros);
    CHECK(max_abs_diff(g.vertices, Matrix(inst.v.rows(), inst.v.cols())) == 0.0);
    for (double w : g.weights) CHECK(w == 0.0);
    for (double b : g.biases) CHECK(b == 0.0);
}

TEST_CASE("single-vertex scalar chain rule") {
    auto adj = adjacency_from_edges(1, {});
    Matrix v{{3.0}};
    FilterParams p(1, 1, 1);
    p.w(0, 0, 0) = 4.0;
    Matrix nbr = neighbor_aggregate(adj, v);
    Matrix grad_out{{1.0}};
    auto g = conv_backward(nbr, adj, p, grad_out);
    CHECK(g.weights[0] == 3.0);   // d(out)/dw = v
    CHECK(g.vertices(0, 0) == 4.0);  // d(out)/dv = w
    CHECK(g.biases[0] == 1.0);    // d(out)/db = 1
}

TEST_CASE("conv_backward matches central finite differences") {
    Rng rng(42);
    for (int trial = 0; trial < 5; ++trial) {
        auto inst = random_instance(rng, 4, 2, 2, 3);
        const double eps = 1e-5;

        Matrix nbr = neighbor_aggregate(inst.adj, inst.v);
        Matrix out = conv_forward(nbr, inst.params);
        auto g = conv_backward(nbr, inst.adj, inst.params, loss_grad(out));

        auto check = [&](double analytic, double numeric) {
            const double denom =
                std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
            CHECK(std::fabs(analytic - numeric) / denom < 1e-6);
        };

        for (std::size_t k = 0; k < inst.params.weights.size(); ++k) {
            const double saved = inst.params.weights[k];
            inst.params.weights[k] = saved + eps;
            const double lp = loss_of(conv_forward(nbr, inst.params));
            inst.params.weights[k] = saved - eps;
            const double lm = loss_of(conv_forward(nbr, inst.params));
            inst.params.weights[k] = saved;
            check(g.weights[k], (lp - lm) / (2 * eps));
        }
        for (std::size_t k = 0; k < inst.params.biases.size(); ++k) {
            const double saved = inst.params.biases[k];
            inst.params.biases[k] = saved + eps;
            const double lp = loss_of(conv_forward(nbr, inst.params));
            inst.params.biases[k] = saved - eps;
            const double lm = loss_of(conv_forward(nbr, inst.params));
            inst.params.biases[k] = saved;
            check(g.biases[k], (lp - lm) / (2 * eps));
        }
        for (int r = 0; r < inst.v.rows(); ++r)
            for (int c = 0; c < inst.v.cols(); ++c) {
                const double saved = inst.v(r, c);
                inst.v(r, c) = saved + eps;
                const double lp = loss_of(
                    conv_forward(neighbor_aggregate(inst.adj, inst.v), inst.params));
                inst.v(r, c) = saved - eps;
                const double lm = loss_of(
                    conv_forward(neighbor_aggregate(inst.adj, inst.v), inst.params));
                inst.v(r, c) = saved;
                check(g.vertices(r, c), (lp - lm) / (2 * eps));
            }
    }
}

TEST_CASE("adjacency gradient matches finite differences") {
    Rng rng(77);
    for (int trial = 0; trial < 4; ++trial) {
        auto inst = random_instance(rng, 5, 3, 2, 2, 0.6);
        const double eps = 1e-5;
        Matrix nbr = neighbor_aggregate(inst.adj, inst.v);
        Matrix out = conv_forward(nbr, inst.params);
        auto dA = conv_adjacency_backward(inst.v, inst.params, loss_grad(out));

        for (int s = 1; s < inst.adj.slice_count(); ++s) {
            for (auto& e : inst.adj.slices[s].entries) {
                const double saved = e.w;
                e.w = saved + eps;
                const double lp = loss_of(
                    conv_forward(neighbor_aggregate(inst.adj, inst.v), inst.params));
                e.w = saved - eps;
                const double lm = loss_of(
                    conv_forward(neighbor_aggregate(inst.adj, inst.v), inst.params));
                e.w = saved;
                const double numeric = (lp - lm) / (2 * eps);
                const double analytic = dA[s](e.i, e.j);
                const double denom =
                    std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
                CHECK(std::fabs(analytic - numeric) / denom < 1e-6);
            }
        }
    }
}

TEST_CASE("filters are linear in the weights") {
    Rng rng(11);
    auto inst = random_instance(rng, 8, 3, 3, 2);
    Matrix nbr = neighbor_aggregate(inst.adj, inst.v);

    FilterParams p1 = inst.params, p2 = inst.params;
    for (auto& w : p2.weights) w = rng.uniform(-1.0, 1.0);
    p1.biases.assign(p1.biases.size(), 0.0);
    p2.biases.assign(p2.biases.size(), 0.0);
    const double alpha = 0.7, beta = -1.3;

    FilterParams mix = p1;
    for (std::size_t k = 0; k < mix.weights.size(); ++k)
        mix.weights[k] = alpha * p1.weights[k] + beta * p2.weights[k];

    Matrix lhs = conv_forward(nbr, mix);
    Matrix rhs = conv_forward(nbr, p1);
    for (auto& v : rhs.values()) v *= alpha;
    Matrix r2 = conv_forward(nbr, p2);
    add_scaled(rhs, r2, beta);
    CHECK(max_abs_diff(lhs, rhs) < 1e-12);
}

TEST_CASE("filtering is equivariant under vertex permutation") {
    Rng rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        auto inst = random_instance(rng, 7, 3, 2, 2);
        const int n = inst.v.rows();
        std::vector<int> perm(n);
        for (int i = 0; i < n; ++i) perm[i] = i;
        rng.shuffle(perm.begin(), perm.end());

        // Permuted graph: V'[perm[i]] = V[i], A'[perm[i]][perm[j]] = A[i][j]
        Matrix pv(n, inst.v.cols());
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < inst.v.cols(); ++c) pv(perm[i], c) = inst.v(i, c);
        std::vector<EdgeSpec> edges;
        for (int s = 1; s < inst.adj.slice_count(); ++s)
            for (const auto& e : inst.adj.slices[s].entries)
                edges.push_back({s, perm[e.i], perm[e.j], e.w});
        auto padj = adjacency_from_edges(n, edges, inst.adj.slice_count());

        Matrix out = conv_forward(neighbor_aggregate(inst.adj, inst.v), inst.params);
        Matrix pout = conv_forward(neighbor_aggregate(padj, pv), inst.params);
        for (int i = 0; i < n; ++i)
            for (int f = 0; f < out.cols(); ++f)
                CHECK(std::fabs(pout(perm[i], f) - out(i, f)) < 1e-12);
    }
}

TEST_CASE("poly_filter worked examples") {
    AdjacencySlice a;
    a.n = 2;
    a.entries = {{0, 1, 1.0}, {1, 0, 1.0}};

    Matrix v{{1.0}, {3.0}};
    Matrix deg0 = poly_filter(a, {2.0}, v);
    CHECK(deg0(0, 0) == 2.0);
    CHECK(deg0(1, 0) == 6.0);

    Matrix v2{{1.0}, {2.0}};
    Matrix hop1 = poly_filter(a, {1.0, 1.0}, v2);
    CHECK(hop1(0, 0) == 3.0);
    CHECK(hop1(1, 0) == 3.0);
}

TEST_CASE("poly_filter matches a dense polynomial oracle") {
    Rng rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = rng.uniform_int(2, 6);
        std::vector<EdgeSpec> edges;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (rng.uniform(0.0, 1.0) < 0.5) edges.push_back({1, i, j, rng.uniform(-1.0, 1.0)});
        auto adj = adjacency_from_edges(n, edges, 2);
        Matrix v(n, 2);
        for (auto& x : v.values()) x = rng.uniform(-1.0, 1.0);
        std::vector<double> coeffs;
        const int degree = rng.uniform_int(0, 3);
        for (int k = 0; k <= degree; ++k) coeffs.push_back(rng.uniform(-1.0, 1.0));

        // Dense oracle: accumulate h_k * A^k explicitly.
        Matrix a = densify_slice(adj.slices[1]);
        Matrix power = Matrix::identity(n);
        Matrix h(n, n);
        for (std::size_t k = 0; k < coeffs.size(); ++k) {
            if (k > 0) power = matmul(a, power);
            add_scaled(h, power, coeffs[k]);
        }
        Matrix expected = matmul(h, v);
        CHECK(max_abs_diff(poly_filter(adj.slices[1], coeffs, v), expected) < 1e-12);
    }
}

TEST_CASE("two cascaded linear filters equal the squared polynomial") {
    Rng rng(59);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = rng.uniform_int(2, 8);
        std::vector<EdgeSpec> edges;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (rng.uniform(0.0, 1.0) < 0.4) edges.push_back({1, i, j, rng.uniform(-1.0, 1.0)});
        auto adj = adjacency_from_edges(n, edges, 2);
        Matrix v(n, 1);
        for (auto& x : v.values()) x = rng.uniform(-1.0, 1.0);
        const double h0 = rng.uniform(-1.0, 1.0), h1 = rng.uniform(-1.0, 1.0);

        Matrix once = poly_filter(adj.slices[1], {h0, h1}, v);
        Matrix twice = poly_filter(adj.slices[1], {h0, h1}, once);
        Matrix direct = poly_filter(adj.slices[1], {h0 * h0, 2 * h0 * h1, h1 * h1}, v);
        CHECK(max_abs_diff(twice, direct) < 1e-12);
    }
}

TEST_CASE("convolution leaves the adjacency untouched") {
    Rng rng(67);
    auto inst = random_instance(rng, 6, 3, 2, 2);
    AdjacencyTensor before = inst.adj;
    (void)conv_forward(neighbor_aggregate(inst.adj, inst.v), inst.params);
    REQUIRE(before.slice_count() == inst.adj.slice_count());
    for (int s = 0; s < before.slice_count(); ++s) {
        REQUIRE(before.slices[s].entries.size() == inst.adj.slices[s].entries.size());
        for (std::size_t k = 0; k < before.slices[s].entries.size(); ++k) {
            CHECK(before.slices[s].entries[k].i == inst.adj.slices[s].entries[k].i);
            CHECK(before.slices[s].entries[k].j == inst.adj.slices[s].entries[k].j);
            CHECK(before.slices[s].entries[k].w == inst.adj.slices[s].entries[k].w);
        }
    }
}

TEST_CASE("shape mismatches are rejected") {
    auto adj = adjacency_from_edges(2, {});
    Matrix wrong(3, 1);
    CHECK_THROWS_AS(neighbor_aggregate(adj, wrong), ShapeMismatch);

    FilterParams p(2, 1, 1);
    Matrix nbr(2, 3);
    CHECK_THROWS_AS(conv_forward(nbr, p), ShapeMismatch);
}

}  // TEST_SUITE
