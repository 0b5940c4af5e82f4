#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gcnn/matrix.hpp"

namespace gcnn {

// One adjacency matrix stored in coordinate form. Entries are kept sorted by
// (i, j) and deduplicated so that sparse products accumulate in a fixed order.
struct AdjacencySlice {
    struct Entry {
        int i;
        int j;
        double w;
    };

    int n = 0;
    std::vector<Entry> entries;
};

AdjacencySlice identity_slice(int n);
Matrix densify_slice(const AdjacencySlice& slice);

// Stack of adjacency matrices over one vertex set. Slice 0 is always the
// identity (reflexive connections only); constructors enforce this.
struct AdjacencyTensor {
    std::vector<AdjacencySlice> slices;

    int vertex_count() const { return slices.empty() ? 0 : slices[0].n; }
    int slice_count() const { return static_cast<int>(slices.size()); }
};

struct EdgeSpec {
    int slice;  // >= 1; slice 0 is reserved for the identity
    int i;
    int j;
    double w;
};

// Builds a tensor with the identity prepended as slice 0 and the given edges
// placed in slices 1..L-1. Slice count is 1 + max slice index seen, or
// total_slices when given (so trailing empty slices survive).
AdjacencyTensor adjacency_from_edges(int n, const std::vector<EdgeSpec>& edges,
                                     int total_slices = 0);

enum class ImageMode { isotropic, directional };

struct GridShape {
    int height = 0;
    int width = 0;
    int channels = 0;
};

// Optional annotation carried by samples that came from images. Ordinary
// graph operations ignore it; grid max-pooling requires it.
struct GridMeta {
    GridShape shape;
    ImageMode mode = ImageMode::isotropic;
};

struct GraphSample {
    Matrix vertices;           // N x C
    AdjacencyTensor adjacency;  // N x N x L, slice 0 = identity
    int label = -1;            // graph-level class, -1 if unused

    // Vertex-classification task: per-vertex classes plus a train mask
    // (1 = vertex contributes to the loss, 0 = held-out test vertex).
    std::vector<int> vertex_labels;
    std::vector<std::uint8_t> label_mask;

    std::optional<GridMeta> grid;

    bool is_vertex_task() const { return !vertex_labels.empty(); }
};

enum class ViolationKind {
    shape_mismatch,
    non_identity_first_slice,
    non_finite_value,
    index_out_of_range,
    duplicate_edge,
};

struct Violation {
    ViolationKind kind;
    std::string detail;
};

const char* violation_name(ViolationKind kind);

// Returns the complete list of invariant violations; empty means valid.
std::vector<Violation> validate_graph(const GraphSample& sample);

}  // namespace gcnn
