#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gcnn/errors.hpp"
#include "gcnn/graph.hpp"
#include "gcnn/grid.hpp"

namespace gcnn {

// Graph invariant broken by file contents; carries the offending line.
class InvariantViolation : public Error {
public:
    InvariantViolation(int line, const std::string& msg)
        : Error("InvariantViolation", "line " + std::to_string(line) + ": " + msg),
          line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

// Line-oriented graph dataset format. Per sample:
//   graph N C L label        header; L counts slices including the identity
//   <N lines of C floats>    vertex features
//   e l i j w                edges, l in [1, L-1]
//   y class maskbit          (vertex tasks only; N lines before "end")
//   end
// '#' starts a comment. The special comment "#!grid H W C mode" attaches grid
// metadata to the next sample. The identity slice is never serialized; it is
// synthesized on load.
std::vector<GraphSample> load_graph_dataset(const std::string& path);
void save_graph_dataset(const std::vector<GraphSample>& samples, const std::string& path);

// Single-sample vertex-classification file: as above with the per-vertex
// label lines required.
GraphSample load_vertex_task(const std::string& path);
void save_vertex_task(const GraphSample& sample, const std::string& path);

// Binary image container: little-endian u32 count, height, width, channels,
// then per record one u8 label followed by H*W*C u8 pixels (row-major,
// channel-last).
struct RawImageRecord {
    std::uint8_t label = 0;
    std::vector<std::uint8_t> pixels;
};

struct RawImageDataset {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<RawImageRecord> records;
};

RawImageDataset load_raw_images(const std::string& path);
void save_raw_images(const RawImageDataset& dataset, const std::string& path);

// Pixels scaled to [0,1].
Image record_to_image(const RawImageDataset& dataset, int index);

// Synthetic heterogeneous classification set: random undirected graphs with
// 6..20 vertices, edge probability 0.25 and four uniform vertex features.
// Label 1 iff the graph contains a triangle (found by exhaustive triple
// enumeration); rejection sampling balances the classes.
std::vector<GraphSample> gen_motif_dataset(int count, std::uint64_t seed);

// Exhaustive triangle test used for the labels; exposed for re-checking.
bool has_triangle(const AdjacencySlice& slice);

// Synthetic two-class image set: class 0 draws a horizontal bar, class 1 a
// vertical bar, at a random position with uniform +-32/255 pixel noise.
RawImageDataset gen_grid_dataset(int count, int height, int width, std::uint64_t seed);

}  // namespace gcnn
