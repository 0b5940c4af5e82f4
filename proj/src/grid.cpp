#include "gcnn/grid.hpp"

#include <algorithm>
#include <string>

#include "gcnn/errors.hpp"

namespace gcnn {

std::array<int, 2> direction_offset(Direction dir) {
    switch (dir) {
        case Direction::self: return {0, 0};
        case Direction::up_left: return {-1, -1};
        case Direction::up: return {-1, 0};
        case Direction::up_right: return {-1, 1};
        case Direction::left: return {0, -1};
        case Direction::right: return {0, 1};
        case Direction::down_left: return {1, -1};
        case Direction::down: return {1, 0};
        case Direction::down_right: return {1, 1};
    }
    return {0, 0};
}

int pixel_index(int i, int j, const GridShape& shape) {
    if (i < 0 || i >= shape.height || j < 0 || j >= shape.width)
        throw IndexOutOfRange("pixel (" + std::to_string(i) + "," +
                              std::to_string(j) + ") outside " +
                              std::to_string(shape.height) + "x" +
                              std::to_string(shape.width));
    return i * shape.width + j;
}

AdjacencySlice directional_adjacency(const GridShape& shape, Direction dir) {
    AdjacencySlice slice;
    slice.n = shape.height * shape.width;
    if (dir == Direction::self) return identity_slice(slice.n);

    const auto [di, dj] = direction_offset(dir);
    for (int i = 0; i < shape.height; ++i) {
        const int ni = i + di;
        if (ni < 0 || ni >= shape.height) continue;
        for (int j = 0; j < shape.width; ++j) {
            const int nj = j + dj;
            if (nj < 0 || nj >= shape.width) continue;
            slice.entries.push_back({pixel_index(i, j, shape), pixel_index(ni, nj, shape), 1.0});
        }
    }
    return slice;
}

AdjacencyTensor build_grid_adjacency(const GridShape& shape, ImageMode mode) {
    AdjacencyTensor t;
    const int n = shape.height * shape.width;
    t.slices.push_back(identity_slice(n));
    if (mode == ImageMode::directional) {
        for (int d = 1; d < kNumDirections; ++d)
            t.slices.push_back(directional_adjacency(shape, static_cast<Direction>(d)));
        return t;
    }

    // Isotropic: one slice holding all eight neighbor relations. Offsets are
    // visited in ascending target order, so entries come out sorted.
    AdjacencySlice all;
    all.n = n;
    for (int i = 0; i < shape.height; ++i)
        for (int j = 0; j < shape.width; ++j)
            for (int d = 1; d < kNumDirections; ++d) {
                const auto [di, dj] = direction_offset(static_cast<Direction>(d));
                const int ni = i + di, nj = j + dj;
                if (ni < 0 || ni >= shape.height || nj < 0 || nj >= shape.width) continue;
                all.entries.push_back({pixel_index(i, j, shape), pixel_index(ni, nj, shape), 1.0});
            }
    t.slices.push_back(std::move(all));
    return t;
}

GraphSample image_to_graph(const Image& image, ImageMode mode) {
    GraphSample sample;
    const int n = image.height * image.width;
    sample.vertices = Matrix(n, image.channels);
    std::copy(image.data.begin(), image.data.end(), sample.vertices.values().begin());
    GridShape shape{image.height, image.width, image.channels};
    sample.adjacency = build_grid_adjacency(shape, mode);
    sample.grid = GridMeta{shape, mode};
    return sample;
}

Image conv3x3_oracle(const Image& image, const Conv3x3Taps& taps,
                     const std::vector<double>& biases) {
    if (taps.in_channels != image.channels)
        throw ShapeMismatch("conv3x3_oracle: image has " +
                            std::to_string(image.channels) + " channels, taps expect " +
                            std::to_string(taps.in_channels));
    if (static_cast<int>(biases.size()) != taps.out_channels)
        throw ShapeMismatch("conv3x3_oracle: bias count");

    Image out(image.height, image.width, taps.out_channels);
    for (int i = 0; i < image.height; ++i)
        for (int j = 0; j < image.width; ++j)
            for (int co = 0; co < taps.out_channels; ++co) {
                double acc = biases[co];
                for (int di = -1; di <= 1; ++di)
                    for (int dj = -1; dj <= 1; ++dj) {
                        const int y = i + di, x = j + dj;
                        if (y < 0 || y >= image.height || x < 0 || x >= image.width)
                            continue;  // zero padding
                        for (int ci = 0; ci < image.channels; ++ci)
                            acc += taps.at(di, dj, ci, co) * image.at(y, x, ci);
                    }
                out.at(i, j, co) = acc;
            }
    return out;
}

Conv3x3Grads conv3x3_backward_oracle(const Image& image, const Conv3x3Taps& taps,
                                     const Image& grad_out) {
    if (grad_out.height != image.height || grad_out.width != image.width ||
        grad_out.channels != taps.out_channels)
        throw ShapeMismatch("conv3x3_backward_oracle: grad_out shape");

    Conv3x3Grads g;
    g.taps = Conv3x3Taps(taps.in_channels, taps.out_channels);
    g.biases.assign(taps.out_channels, 0.0);
    g.image = Image(image.height, image.width, image.channels);

    for (int i = 0; i < image.height; ++i)
        for (int j = 0; j < image.width; ++j)
            for (int co = 0; co < taps.out_channels; ++co) {
                const double go = grad_out.at(i, j, co);
                g.biases[co] += go;
                for (int di = -1; di <= 1; ++di)
                    for (int dj = -1; dj <= 1; ++dj) {
                        const int y = i + di, x = j + dj;
                        if (y < 0 || y >= image.height || x < 0 || x >= image.width)
                            continue;
                        for (int ci = 0; ci < image.channels; ++ci) {
                            g.taps.at(di, dj, ci, co) += go * image.at(y, x, ci);
                            g.image.at(y, x, ci) += go * taps.at(di, dj, ci, co);
                        }
                    }
            }
    return g;
}

namespace {

// Tap offset read by each slice of a directional tensor.
constexpr std::array<std::array<int, 2>, kNumDirections> kSliceOffsets = {{
    {0, 0}, {-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1},
}};

}  // namespace

FilterParams filter_from_taps(const Conv3x3Taps& taps, const std::vector<double>& biases) {
    FilterParams params(kNumDirections, taps.in_channels, taps.out_channels);
    for (int s = 0; s < kNumDirections; ++s) {
        const auto [di, dj] = kSliceOffsets[s];
        for (int ci = 0; ci < taps.in_channels; ++ci)
            for (int co = 0; co < taps.out_channels; ++co)
                params.w(s, ci, co) = taps.at(di, dj, ci, co);
    }
    params.biases = biases;
    return params;
}

Conv3x3Taps taps_from_filter(const FilterParams& params, std::vector<double>* biases) {
    if (params.num_slices != kNumDirections)
        throw ShapeMismatch("taps_from_filter: expected 9 slices, got " +
                            std::to_string(params.num_slices));
    Conv3x3Taps taps(params.in_features, params.out_features);
    for (int s = 0; s < kNumDirections; ++s) {
        const auto [di, dj] = kSliceOffsets[s];
        for (int ci = 0; ci < params.in_features; ++ci)
            for (int co = 0; co < params.out_features; ++co)
                taps.at(di, dj, ci, co) = params.w(s, ci, co);
    }
    if (biases) *biases = params.biases;
    return taps;
}

GridMaxPoolResult grid_max_pool_vertices(const Matrix& vertices, const GridShape& shape) {
    if (vertices.rows() != shape.height * shape.width ||
        vertices.cols() != shape.channels)
        throw ShapeMismatch("grid_max_pool: vertex matrix does not match shape");

    GridMaxPoolResult res;
    res.shape = GridShape{(shape.height + 1) / 2, (shape.width + 1) / 2, shape.channels};
    const int out_n = res.shape.height * res.shape.width;
    res.vertices = Matrix(out_n, shape.channels);
    res.argmax.assign(static_cast<std::size_t>(out_n) * shape.channels, -1);

    for (int bi = 0; bi < res.shape.height; ++bi)
        for (int bj = 0; bj < res.shape.width; ++bj) {
            const int out_idx = bi * res.shape.width + bj;
            for (int c = 0; c < shape.channels; ++c) {
                double best = 0.0;
                int best_idx = -1;
                for (int i = 2 * bi; i < std::min(2 * bi + 2, shape.height); ++i)
                    for (int j = 2 * bj; j < std::min(2 * bj + 2, shape.width); ++j) {
                        const int idx = pixel_index(i, j, shape);
                        const double v = vertices(idx, c);
                        if (best_idx < 0 || v > best) {
                            best = v;
                            best_idx = idx;
                        }
                    }
                res.vertices(out_idx, c) = best;
                res.argmax[static_cast<std::size_t>(out_idx) * shape.channels + c] = best_idx;
            }
        }
    return res;
}

Matrix grid_max_pool_backward(const GridMaxPoolResult& pooled, int input_vertices,
                              const Matrix& grad_out) {
    if (!grad_out.same_shape(pooled.vertices))
        throw ShapeMismatch("grid_max_pool_backward: grad shape");
    Matrix g(input_vertices, grad_out.cols());
    for (int r = 0; r < grad_out.rows(); ++r)
        for (int c = 0; c < grad_out.cols(); ++c) {
            const int src = pooled.argmax[static_cast<std::size_t>(r) * grad_out.cols() + c];
            g(src, c) += grad_out(r, c);
        }
    return g;
}

GraphSample grid_max_pool(const GraphSample& sample) {
    if (!sample.grid)
        throw NotAGridSample("sample carries no grid metadata");
    GridMaxPoolResult res = grid_max_pool_vertices(sample.vertices, sample.grid->shape);

    GraphSample out;
    out.vertices = std::move(res.vertices);
    out.adjacency = build_grid_adjacency(res.shape, sample.grid->mode);
    out.label = sample.label;
    out.grid = GridMeta{res.shape, sample.grid->mode};
    return out;
}

}  // namespace gcnn
