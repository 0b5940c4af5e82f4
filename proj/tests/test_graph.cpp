#include "doctest.h"

#include <limits>

#include "gcnn/errors.hpp"
#include "gcnn/graph.hpp"
#include "gcnn/rng.hpp"

using namespace gcnn;

namespace {

GraphSample two_vertex_sample() {
    GraphSample s;
    s.vertices = Matrix{{1.0}, {2.0}};
    s.adjacency = adjacency_from_edges(2, {{1, 0, 1, 1.0}});
    s.label = 0;
    return s;
}

}  // namespace

TEST_SUITE("graph") {

TEST_CASE("valid two-vertex sample passes validation") {
    CHECK(validate_graph(two_vertex_sample()).empty());
}

TEST_CASE("non-identity first slice is reported") {
    GraphSample s = two_vertex_sample();
    s.adjacency.slices[0].entries = {{0, 1, 1.0}};
    auto violations = validate_graph(s);
    REQUIRE_FALSE(violations.empty());
    bool found = false;
    for (const auto& v : violations)
        if (v.kind == ViolationKind::non_identity_first_slice) found = true;
    CHECK(found);
}

TEST_CASE("vertex/adjacency size disagreement is a shape mismatch") {
    GraphSample s = two_vertex_sample();
    s.vertices = Matrix(3, 1);
    auto violations = validate_graph(s);
    REQUIRE_FALSE(violations.empty());
    CHECK(violations[0].kind == ViolationKind::shape_mismatch);
}

TEST_CASE("non-finite vertex values and duplicate edges are caught") {
    GraphSample s = two_vertex_sample();
    s.vertices(0, 0) = std::numeric_limits<double>::infinity();
    s.adjacency.slices[1].entries.push_back({0, 1, 2.0});
    auto violations = validate_graph(s);
    bool non_finite = false, dup = false;
    for (const auto& v : violations) {
        if (v.kind == ViolationKind::non_finite_value) non_finite = true;
        if (v.kind == ViolationKind::duplicate_edge) dup = true;
    }
    CHECK(non_finite);
    CHECK(dup);
}

TEST_CASE("adjacency_from_edges prepends the identity") {
    auto t = adjacency_from_edges(2, {{1, 0, 1, 1.0}});
    REQUIRE(t.slice_count() == 2);
    Matrix id = densify_slice(t.slices[0]);
    CHECK(max_abs_diff(id, Matrix::identity(2)) == 0.0);
    Matrix a = densify_slice(t.slices[1]);
    CHECK(a(0, 1) == 1.0);
    CHECK(a(1, 0) == 0.0);
}

TEST_CASE("empty edge list yields identity-only tensor") {
    auto t = adjacency_from_edges(3, {});
    CHECK(t.slice_count() == 1);
    CHECK(max_abs_diff(densify_slice(t.slices[0]), Matrix::identity(3)) == 0.0);
}

TEST_CASE("slice 0 cannot be set by callers") {
    CHECK_THROWS_AS(adjacency_from_edges(2, {{0, 0, 1, 1.0}}), ReservedSlice);
}

TEST_CASE("out-of-range and duplicate edges are rejected") {
    CHECK_THROWS_AS(adjacency_from_edges(2, {{1, 0, 2, 1.0}}), IndexOutOfRange);
    CHECK_THROWS_AS(adjacency_from_edges(2, {{1, 0, 1, 1.0}, {1, 0, 1, 2.0}}),
                    DuplicateEdge);
}

TEST_CASE("densify_slice places entries and zeros elsewhere") {
    CHECK(max_abs_diff(densify_slice(identity_slice(2)), Matrix::identity(2)) == 0.0);

    AdjacencySlice s;
    s.n = 2;
    s.entries = {{0, 1, 2.5}};
    Matrix m = densify_slice(s);
    CHECK(m(0, 1) == 2.5);
    CHECK(m(0, 0) == 0.0);
    CHECK(m(1, 0) == 0.0);
    CHECK(m(1, 1) == 0.0);

    AdjacencySlice empty;
    empty.n = 1;
    CHECK(densify_slice(empty)(0, 0) == 0.0);
}

TEST_CASE("densify round-trips every constructed edge") {
    Rng rng(91);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = rng.uniform_int(1, 8);
        const int slices = rng.uniform_int(1, 3);
        std::vector<EdgeSpec> edges;
        for (int l = 1; l <= slices; ++l)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    if (rng.uniform(0.0, 1.0) < 0.3)
                        edges.push_back({l, i, j, rng.uniform(-2.0, 2.0)});
        auto t = adjacency_from_edges(n, edges, slices + 1);
        for (const auto& e : edges)
            CHECK(densify_slice(t.slices[e.slice])(e.i, e.j) == e.w);

        // Closure under construction: generated tensors always validate.
        GraphSample sample;
        sample.vertices = Matrix(n, 1);
        sample.adjacency = t;
        CHECK(validate_graph(sample).empty());
    }
}

}  // TEST_SUITE
