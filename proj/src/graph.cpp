#include "gcnn/graph.hpp"

#include <algorithm>
#include <cmath>

#include "gcnn/errors.hpp"

namespace gcnn {

AdjacencySlice identity_slice(int n) {
    AdjacencySlice s;
    s.n = n;
    s.entries.reserve(n);
    for (int i = 0; i < n; ++i) s.entries.push_back({i, i, 1.0});
    return s;
}

Matrix densify_slice(const AdjacencySlice& slice) {
    Matrix m(slice.n, slice.n);
    for (const auto& e : slice.entries) m(e.i, e.j) = e.w;
    return m;
}

AdjacencyTensor adjacency_from_edges(int n, const std::vector<EdgeSpec>& edges,
                                     int total_slices) {
    int max_slice = total_slices > 0 ? total_slices - 1 : 0;
    for (const auto& e : edges) {
        if (e.slice == 0)
            throw ReservedSlice("slice 0 is the identity and cannot be set");
        if (e.slice < 0)
            throw IndexOutOfRange("negative slice index " +
                                  std::to_string(e.slice));
        if (total_slices > 0 && e.slice >= total_slices)
            throw IndexOutOfRange("slice " + std::to_string(e.slice) +
                                  " outside the declared " +
                                  std::to_string(total_slices) + " slices");
        if (e.i < 0 || e.i >= n || e.j < 0 || e.j >= n)
            throw IndexOutOfRange("edge (" + std::to_string(e.i) + "," +
                                  std::to_string(e.j) + ") outside 0.." +
                                  std::to_string(n - 1));
        max_slice = std::max(max_slice, e.slice);
    }

    AdjacencyTensor t;
    t.slices.resize(max_slice + 1);
    t.slices[0] = identity_slice(n);
    for (int l = 1; l <= max_slice; ++l) t.slices[l].n = n;

    for (const auto& e : edges) t.slices[e.slice].entries.push_back({e.i, e.j, e.w});

    for (int l = 1; l <= max_slice; ++l) {
        auto& entries = t.slices[l].entries;
        std::sort(entries.begin(), entries.end(),
                  [](const AdjacencySlice::Entry& a, const AdjacencySlice::Entry& b) {
                      return a.i != b.i ? a.i < b.i : a.j < b.j;
                  });
        for (std::size_t k = 1; k < entries.size(); ++k) {
            if (entries[k].i == entries[k - 1].i && entries[k].j == entries[k - 1].j)
                throw DuplicateEdge("slice " + std::to_string(l) + " entry (" +
                                    std::to_string(entries[k].i) + "," +
                                    std::to_string(entries[k].j) + ")");
        }
    }
    return t;
}

const char* violation_name(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::shape_mismatch: return "ShapeMismatch";
        case ViolationKind::non_identity_first_slice: return "NonIdentityFirstSlice";
        case ViolationKind::non_finite_value: return "NonFiniteValue";
        case ViolationKind::index_out_of_range: return "IndexOutOfRange";
        case ViolationKind::duplicate_edge: return "DuplicateEdge";
    }
    return "?";
}

namespace {

bool is_identity(const AdjacencySlice& s) {
    if (static_cast<int>(s.entries.size()) != s.n) return false;
    // Entries may arrive unsorted from hand-built samples.
    std::vector<bool> seen(s.n, false);
    for (const auto& e : s.entries) {
        if (e.i != e.j || e.w != 1.0) return false;
        if (e.i < 0 || e.i >= s.n || seen[e.i]) return false;
        seen[e.i] = true;
    }
    return true;
}

}  // namespace

std::vector<Violation> validate_graph(const GraphSample& sample) {
    std::vector<Violation> out;
    const int n = sample.vertices.rows();
    const int c = sample.vertices.cols();

    if (n < 1 || c < 1)
        out.push_back({ViolationKind::shape_mismatch,
                       "vertex matrix must be at least 1x1, got " +
                           std::to_string(n) + "x" + std::to_string(c)});
    if (!all_finite(sample.vertices))
        out.push_back({ViolationKind::non_finite_value, "vertex matrix has a non-finite entry"});

    const auto& slices = sample.adjacency.slices;
    if (slices.empty()) {
        out.push_back({ViolationKind::shape_mismatch, "adjacency tensor has no slices"});
        return out;
    }

    if (sample.adjacency.vertex_count() != n)
        out.push_back({ViolationKind::shape_mismatch,
                       "vertex matrix has " + std::to_string(n) +
                           " rows but adjacency has n=" +
                           std::to_string(sample.adjacency.vertex_count())});

    if (!is_identity(slices[0]))
        out.push_back({ViolationKind::non_identity_first_slice,
                       "slice 0 must be the identity matrix"});

    for (int l = 0; l < static_cast<int>(slices.size()); ++l) {
        const auto& s = slices[l];
        if (s.n != slices[0].n)
            out.push_back({ViolationKind::shape_mismatch,
                           "slice " + std::to_string(l) + " has n=" +
                               std::to_string(s.n) + ", expected " +
                               std::to_string(slices[0].n)});
        std::vector<std::pair<int, int>> coords;
        coords.reserve(s.entries.size());
        for (const auto& e : s.entries) {
            if (e.i < 0 || e.i >= s.n || e.j < 0 || e.j >= s.n) {
                out.push_back({ViolationKind::index_out_of_range,
                               "slice " + std::to_string(l) + " entry (" +
                                   std::to_string(e.i) + "," + std::to_string(e.j) + ")"});
                continue;
            }
            if (!std::isfinite(e.w))
                out.push_back({ViolationKind::non_finite_value,
                               "slice " + std::to_string(l) + " weight at (" +
                                   std::to_string(e.i) + "," + std::to_string(e.j) + ")"});
            coords.emplace_back(e.i, e.j);
        }
        std::sort(coords.begin(), coords.end());
        for (std::size_t k = 1; k < coords.size(); ++k)
            if (coords[k] == coords[k - 1])
                out.push_back({ViolationKind::duplicate_edge,
                               "slice " + std::to_string(l) + " entry (" +
                                   std::to_string(coords[k].first) + "," +
                                   std::to_string(coords[k].second) + ") repeated"});
    }

    if (sample.is_vertex_task()) {
        if (static_cast<int>(sample.vertex_labels.size()) != n)
            out.push_back({ViolationKind::shape_mismatch,
                           "vertex label count != vertex count"});
        if (static_cast<int>(sample.label_mask.size()) != n)
            out.push_back({ViolationKind::shape_mismatch,
                           "label mask length != vertex count"});
    }
    return out;
}

}  // namespace gcnn
