#pragma once

#include <array>
#include <vector>

#include "gcnn/conv.hpp"
#include "gcnn/graph.hpp"
#include "gcnn/matrix.hpp"

namespace gcnn {

// Dense image, row-major with channel-last layout. Pixel (i, j) maps to
// vertex n = i*width + j, which makes the vertex matrix of the derived graph
// share this exact memory layout.
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int h, int w, int c)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, 0.0) {}

    double& at(int i, int j, int c) {
        return data[(static_cast<std::size_t>(i) * width + j) * channels + c];
    }
    double at(int i, int j, int c) const {
        return data[(static_cast<std::size_t>(i) * width + j) * channels + c];
    }
};

// The nine pixel relations. The enum order is the canonical slice order of a
// directional-mode adjacency tensor: identity first, then the eight
// neighbors row by row.
enum class Direction {
    self = 0,
    up_left,
    up,
    up_right,
    left,
    right,
    down_left,
    down,
    down_right,
};

inline constexpr int kNumDirections = 9;

// Row/column offset of the pixel each direction reads.
std::array<int, 2> direction_offset(Direction dir);

int pixel_index(int i, int j, const GridShape& shape);

// Entry (n, m, 1) iff pixel m lies in direction dir of pixel n and is inside
// the grid; row wrap-around is excluded so the construction matches
// zero-padded image convolution.
AdjacencySlice directional_adjacency(const GridShape& shape, Direction dir);

// Adjacency of an image graph: [I, A_8nbr] in isotropic mode, or the nine
// directional slices in directional mode.
AdjacencyTensor build_grid_adjacency(const GridShape& shape, ImageMode mode);

GraphSample image_to_graph(const Image& image, ImageMode mode);

// 3x3 filter bank: taps indexed by the relative pixel offset they read.
struct Conv3x3Taps {
    int in_channels = 0;
    int out_channels = 0;
    std::vector<double> data;  // 9 * C_in * C_out, tap-major

    Conv3x3Taps() = default;
    Conv3x3Taps(int cin, int cout)
        : in_channels(cin), out_channels(cout),
          data(static_cast<std::size_t>(9) * cin * cout, 0.0) {}

    double& at(int di, int dj, int ci, int co) {
        return data[((static_cast<std::size_t>(di + 1) * 3 + (dj + 1)) * in_channels + ci) *
                        out_channels + co];
    }
    double at(int di, int dj, int ci, int co) const {
        return data[((static_cast<std::size_t>(di + 1) * 3 + (dj + 1)) * in_channels + ci) *
                        out_channels + co];
    }
};

// Direct nested-loop 3x3 cross-correlation with zero padding; the reference
// the graph path is checked against.
Image conv3x3_oracle(const Image& image, const Conv3x3Taps& taps,
                     const std::vector<double>& biases);

struct Conv3x3Grads {
    Conv3x3Taps taps;
    std::vector<double> biases;
    Image image;
};

// Adjoint of conv3x3_oracle, same brute-force style. Used to compare against
// the graph-side parameter gradients and to train the reference CNN in
// lockstep with the graph model.
Conv3x3Grads conv3x3_backward_oracle(const Image& image, const Conv3x3Taps& taps,
                                     const Image& grad_out);

// Places 3x3 taps into the matching slices of a directional-mode filter so
// that graph convolution reproduces the image convolution exactly.
FilterParams filter_from_taps(const Conv3x3Taps& taps, const std::vector<double>& biases);

// Inverse of filter_from_taps for a 9-slice filter.
Conv3x3Taps taps_from_filter(const FilterParams& params, std::vector<double>* biases);

struct GridMaxPoolResult {
    Matrix vertices;          // pooled, row per output pixel
    GridShape shape;          // ceil(H/2) x ceil(W/2), channels unchanged
    std::vector<int> argmax;  // input vertex chosen per (output vertex, channel)
};

// Per-channel 2x2/stride-2 max over pixel blocks; edge blocks reduce over the
// pixels that exist. Ties resolve to the smallest pixel index.
GridMaxPoolResult grid_max_pool_vertices(const Matrix& vertices, const GridShape& shape);

// Routes the gradient of each pooled entry to its argmax input vertex.
Matrix grid_max_pool_backward(const GridMaxPoolResult& pooled, int input_vertices,
                              const Matrix& grad_out);

// Whole-sample pooling: requires grid metadata, rebuilds the adjacency for
// the halved grid in the sample's mode.
GraphSample grid_max_pool(const GraphSample& sample);

}  // namespace gcnn
