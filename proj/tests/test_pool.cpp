#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "gcnn/errors.hpp"
#include "gcnn/pool.hpp"
#include "gcnn/rng.hpp"

using namespace gcnn;

namespace {

struct PoolInstance {
    AdjacencyTensor adj;
    Matrix v;
    EmbedPoolParams params;
};

PoolInstance random_pool_instance(Rng& rng, int max_n, int max_target,
                                  bool symmetric = false) {
    PoolInstance inst;
    const int n = rng.uniform_int(2, max_n);
    const int c = rng.uniform_int(1, 3);
    const int target = rng.uniform_int(1, max_target);

    std::vector<EdgeSpec> edges;
    for (int i = 0; i < n; ++i)
        for (int j = symmetric ? i : 0; j < n; ++j) {
            if (rng.uniform(0.0, 1.0) >= 0.4) continue;
            const double w = rng.uniform(-1.0, 1.0);
            edges.push_back({1, i, j, w});
            if (symmetric && j != i) edges.push_back({1, j, i, w});
        }
    inst.adj = adjacency_from_edges(n, edges, 2);
    inst.v = Matrix(n, c);
    for (auto& x : inst.v.values()) x = rng.uniform(-1.0, 1.0);
    inst.params.target_size = target;
    inst.params.filter = FilterParams(2, c, target);
    for (auto& w : inst.params.filter.weights) w = rng.uniform(-1.0, 1.0);
    for (auto& b : inst.params.filter.biases) b = rng.uniform(-1.0, 1.0);
    return inst;
}

double scalar_loss(const EmbedPoolResult& res) {
    double acc = 0.0;
    for (double v : res.vertices.values()) acc += 0.5 * v * v;
    // Weight the adjacency path differently so both adjoints are exercised.
    for (int l = 1; l < res.adjacency.slice_count(); ++l)
        for (const auto& e : res.adjacency.slices[l].entries) acc += 0.25 * e.w * e.w;
    return acc;
}

}  // namespace

TEST_SUITE("pool") {

TEST_CASE("zero parameters give all-zero logits") {
    auto adj = adjacency_from_edges(3, {{1, 0, 1, 1.0}});
    Matrix v(3, 2);
    v(0, 0) = 1.0;
    EmbedPoolParams p;
    p.target_size = 2;
    p.filter = FilterParams(2, 2, 2);
    Matrix logits = embed_logits(adj, v, p);
    CHECK(max_abs_diff(logits, Matrix(3, 2)) == 0.0);
}

TEST_CASE("identity tap with target 1 copies the vertex feature") {
    auto adj = adjacency_from_edges(3, {});
    Matrix v{{1.5}, {-2.0}, {0.25}};
    EmbedPoolParams p;
    p.target_size = 1;
    p.filter = FilterParams(1, 1, 1);
    p.filter.w(0, 0, 0) = 1.0;
    CHECK(max_abs_diff(embed_logits(adj, v, p), v) == 0.0);
}

TEST_CASE("embed_logits shares the conv_forward fixture") {
    auto adj = adjacency_from_edges(2, {{1, 0, 1, 1.0}, {1, 1, 0, 1.0}});
    Matrix v{{1.0}, {2.0}};
    EmbedPoolParams p;
    p.target_size = 1;
    p.filter = FilterParams(2, 1, 1);
    p.filter.w(0, 0, 0) = 3.0;
    p.filter.w(1, 0, 0) = 5.0;
    Matrix logits = embed_logits(adj, v, p);
    CHECK(logits(0, 0) == doctest::Approx(13.0).epsilon(1e-15));
    CHECK(logits(1, 0) == doctest::Approx(11.0).epsilon(1e-15));
}

TEST_CASE("softmax_rows worked examples") {
    Matrix zeros(3, 2);
    Matrix sm = softmax_rows(zeros);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 2; ++c) CHECK(sm(r, c) == doctest::Approx(0.5).epsilon(1e-12));

    Matrix big{{1000.0, 1000.0}};
    Matrix sb = softmax_rows(big);
    CHECK(sb(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(sb(0, 1) == doctest::Approx(0.5).epsilon(1e-12));

    Matrix ln3{{0.0, std::log(3.0)}};
    Matrix s3 = softmax_rows(ln3);
    CHECK(s3(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(s3(0, 1) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("pool_vertices worked examples") {
    Matrix ident = Matrix::identity(3);
    Matrix v{{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}};
    CHECK(max_abs_diff(pool_vertices(ident, v), v) == 0.0);

    Matrix half{{0.5, 0.5}, {0.5, 0.5}};
    Matrix v2{{2.0}, {4.0}};
    Matrix out = pool_vertices(half, v2);
    CHECK(out(0, 0) == doctest::Approx(3.0));
    CHECK(out(1, 0) == doctest::Approx(3.0));

    // Constant input: each pooled vertex is (column sum of emb) * c.
    Matrix emb{{0.5, 0.5}, {0.5, 0.5}};
    Matrix constant{{7.0}, {7.0}};
    Matrix pooled = pool_vertices(emb, constant);
    CHECK(pooled(0, 0) == doctest::Approx(7.0));
    CHECK(pooled(1, 0) == doctest::Approx(7.0));
}

TEST_CASE("pool_adjacency worked examples") {
    // Identity embedding preserves slices beyond the reset slice 0.
    auto adj = adjacency_from_edges(2, {{1, 0, 1, 1.0}, {1, 1, 0, 1.0}});
    Matrix ident = Matrix::identity(2);
    auto pooled = pool_adjacency(ident, adj);
    CHECK(max_abs_diff(densify_slice(pooled.slices[1]), densify_slice(adj.slices[1])) ==
          0.0);
    CHECK(max_abs_diff(densify_slice(pooled.slices[0]), Matrix::identity(2)) == 0.0);

    Matrix half{{0.5, 0.5}, {0.5, 0.5}};
    auto pooled2 = pool_adjacency(half, adj);
    Matrix d = densify_slice(pooled2.slices[1]);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) CHECK(d(i, j) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("embedding rows are stochastic and strictly positive") {
    Rng rng(101);
    for (int trial = 0; trial < 50; ++trial) {
        auto inst = random_pool_instance(rng, 12, 5);
        auto res = embed_pool_forward(inst.adj, inst.v, inst.params);
        for (int r = 0; r < res.cache.emb.rows(); ++r) {
            double sum = 0.0;
            for (int c = 0; c < res.cache.emb.cols(); ++c) {
                CHECK(res.cache.emb(r, c) > 0.0);
                CHECK(res.cache.emb(r, c) < 1.0 + 1e-12);
                sum += res.cache.emb(r, c);
            }
            CHECK(std::fabs(sum - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("pooled graphs have exactly the target vertex count") {
    Rng rng(55);
    for (int n = 3; n <= 40; ++n) {
        auto inst = random_pool_instance(rng, 5, 4);
        (void)inst;
        std::vector<EdgeSpec> edges;
        for (int k = 0; k + 1 < n; ++k) edges.push_back({1, k, k + 1, 1.0});
        auto adj = adjacency_from_edges(n, edges, 2);
        Matrix v(n, 2);
        for (auto& x : v.values()) x = rng.uniform(-1.0, 1.0);
        EmbedPoolParams p;
        p.target_size = 3;
        p.filter = FilterParams(2, 2, 3);
        for (auto& w : p.filter.weights) w = rng.uniform(-1.0, 1.0);
        auto res = embed_pool_forward(adj, v, p);
        CHECK(res.vertices.rows() == 3);
        CHECK(res.adjacency.vertex_count() == 3);
    }
}

TEST_CASE("symmetric slices stay symmetric after pooling") {
    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        auto inst = random_pool_instance(rng, 10, 4, /*symmetric=*/true);
        auto res = embed_pool_forward(inst.adj, inst.v, inst.params);
        Matrix d = densify_slice(res.adjacency.slices[1]);
        CHECK(max_abs_diff(d, transpose(d)) < 1e-12);
    }
}

TEST_CASE("pooled features are convex combinations up to the column mass") {
    // Each output vertex p mixes the inputs with positive weights emb[:,p];
    // the row-wise softmax makes rows (not columns) sum to 1, so the mixture
    // carries a total mass s_p = sum_n emb[n][p]. Dividing it out leaves a
    // true convex combination, which must sit inside the per-feature range.
    Rng rng(303);
    for (int trial = 0; trial < 30; ++trial) {
        auto inst = random_pool_instance(rng, 10, 4);
        auto res = embed_pool_forward(inst.adj, inst.v, inst.params);
        for (int c = 0; c < inst.v.cols(); ++c) {
            double lo = inst.v(0, c), hi = inst.v(0, c);
            for (int r = 1; r < inst.v.rows(); ++r) {
                lo = std::min(lo, inst.v(r, c));
                hi = std::max(hi, inst.v(r, c));
            }
            for (int r = 0; r < res.vertices.rows(); ++r) {
                double mass = 0.0;
                for (int n = 0; n < inst.v.rows(); ++n) mass += res.cache.emb(n, r);
                const double v = res.vertices(r, c) / mass;
                CHECK(v >= lo - 1e-12);
                CHECK(v <= hi + 1e-12);
            }
        }
    }
}

TEST_CASE("pooled adjacency entries respect the absolute-sum bound") {
    Rng rng(404);
    for (int trial = 0; trial < 20; ++trial) {
        auto inst = random_pool_instance(rng, 10, 4);
        auto res = embed_pool_forward(inst.adj, inst.v, inst.params);
        double total = 0.0;
        for (const auto& e : inst.adj.slices[1].entries) total += std::fabs(e.w);
        for (const auto& e : res.adjacency.slices[1].entries)
            CHECK(std::fabs(e.w) <= total + 1e-12);
    }
}

TEST_CASE("pool_backward zero downstream gradients give zero upstream") {
    Rng rng(13);
    auto inst = random_pool_instance(rng, 6, 3);
    auto res = embed_pool_forward(inst.adj, inst.v, inst.params);
    Matrix dz(res.vertices.rows(), res.vertices.cols());
    auto g = pool_backward(res.cache, inst.params, dz, {}, false);
    CHECK(max_abs_diff(g.logits, Matrix(inst.v.rows(), inst.params.target_size)) == 0.0);
    CHECK(max_abs_diff(g.vertices, Matrix(inst.v.rows(), inst.v.cols())) == 0.0);
    for (double w : g.weights) CHECK(w == 0.0);
    for (double b : g.biases) CHECK(b == 0.0);
}

TEST_CASE("degenerate single-output softmax gets zero logit gradient") {
    auto adj = adjacency_from_edges(1, {});
    Matrix v{{2.0}};
    EmbedPoolParams p;
    p.target_size = 1;
    p.filter = FilterParams(1, 1, 1);
    p.filter.w(0, 0, 0) = 0.7;
    auto res = embed_pool_forward(adj, v, p);
    CHECK(res.cache.emb(0, 0) == 1.0);
    Matrix dv{{1.0}};
    auto g = pool_backward(res.cache, p, dv, {}, false);
    CHECK(g.logits(0, 0) == 0.0);
    for (double w : g.weights) CHECK(w == 0.0);
}

TEST_CASE("pool_backward matches finite differences through both paths") {
    Rng rng(909);
    for (int trial = 0; trial < 4; ++trial) {
        auto inst = random_pool_instance(rng, 6, 3);
        const double eps = 1e-5;

        auto res = embed_pool_forward(inst.adj, inst.v, inst.params);
        // Loss gradients: dV = pooled V, dA_l = 0.5 * pooled A_l.
        Matrix dv = res.vertices;
        std::vector<Matrix> da(res.adjacency.slice_count());
        for (int l = 1; l < res.adjacency.slice_count(); ++l)
            da[l] = densify_slice(res.adjacency.slices[l]);
        for (auto& m : da)
            if (!m.empty())
                for (auto& x : m.values()) x *= 0.5;
        auto g = pool_backward(res.cache, inst.params, dv, da, false);

        auto loss_at = [&]() {
            return scalar_loss(embed_pool_forward(inst.adj, inst.v, inst.params));
        };
        auto check = [&](double analytic, double numeric) {
            const double denom =
                std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
            CHECK(std::fabs(analytic - numeric) / denom < 1e-6);
        };

        for (std::size_t k = 0; k < inst.params.filter.weights.size(); ++k) {
            const double saved = inst.params.filter.weights[k];
            inst.params.filter.weights[k] = saved + eps;
            const double lp = loss_at();
            inst.params.filter.weights[k] = saved - eps;
            const double lm = loss_at();
            inst.params.filter.weights[k] = saved;
            check(g.weights[k], (lp - lm) / (2 * eps));
        }
        for (std::size_t k = 0; k < inst.params.filter.biases.size(); ++k) {
            const double saved = inst.params.filter.biases[k];
            inst.params.filter.biases[k] = saved + eps;
            const double lp = loss_at();
            inst.params.filter.biases[k] = saved - eps;
            const double lm = loss_at();
            inst.params.filter.biases[k] = saved;
            check(g.biases[k], (lp - lm) / (2 * eps));
        }
        for (int r = 0; r < inst.v.rows(); ++r)
            for (int c = 0; c < inst.v.cols(); ++c) {
                const double saved = inst.v(r, c);
                inst.v(r, c) = saved + eps;
                const double lp = loss_at();
                inst.v(r, c) = saved - eps;
                const double lm = loss_at();
                inst.v(r, c) = saved;
                check(g.vertices(r, c), (lp - lm) / (2 * eps));
            }
    }
}

TEST_CASE("gfc returns the feature column sums") {
    auto adj = adjacency_from_edges(3, {{1, 0, 1, 1.0}});
    Matrix v{{1.0}, {2.0}, {3.0}};
    EmbedPoolParams p;
    p.target_size = 1;
    p.filter = FilterParams(2, 1, 1);
    p.filter.w(0, 0, 0) = 0.3;
    p.filter.w(1, 0, 0) = -0.8;
    auto out = gfc(adj, v, p);
    REQUIRE(out.size() == 1);
    CHECK(out[0] == doctest::Approx(6.0).epsilon(1e-12));

    auto adj1 = adjacency_from_edges(1, {});
    Matrix row{{5.0, 7.0}};
    EmbedPoolParams p2;
    p2.target_size = 1;
    p2.filter = FilterParams(1, 2, 1);
    auto out2 = gfc(adj1, row, p2);
    REQUIRE(out2.size() == 2);
    CHECK(out2[0] == doctest::Approx(5.0));
    CHECK(out2[1] == doctest::Approx(7.0));
}

TEST_CASE("gfc gradient with respect to each input entry is one") {
    auto adj = adjacency_from_edges(3, {{1, 0, 1, 1.0}});
    Matrix v{{1.0}, {2.0}, {3.0}};
    EmbedPoolParams p;
    p.target_size = 1;
    p.filter = FilterParams(2, 1, 1);
    p.filter.w(0, 0, 0) = 0.4;
    auto res = embed_pool_forward(adj, v, p);
    Matrix dv{{1.0}};
    auto g = pool_backward(res.cache, p, dv, {}, false);
    for (int r = 0; r < 3; ++r) CHECK(g.vertices(r, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

}  // TEST_SUITE
