#include "gcnn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gcnn/errors.hpp"

namespace gcnn {

Matrix relu(const Matrix& x) {
    Matrix y = x;
    for (auto& v : y.values()) v = std::max(0.0, v);
    return y;
}

Matrix relu_backward(const Matrix& x, const Matrix& dy) {
    if (!x.same_shape(dy)) throw ShapeMismatch("relu_backward shape mismatch");
    Matrix dx(dy.rows(), dy.cols());
    for (std::size_t k = 0; k < dx.size(); ++k)
        dx.values()[k] = x.values()[k] > 0.0 ? dy.values()[k] : 0.0;
    return dx;
}

BatchNormCache batch_norm_forward(std::vector<Matrix>& batch, BatchNormState& state,
                                  bool use_batch_stats, bool update_running) {
    std::size_t count = 0;
    for (const auto& m : batch) count += static_cast<std::size_t>(m.rows());
    if (count == 0) throw EmptyBatch("batch norm over zero vertices");
    const int f = state.features;
    for (const auto& m : batch)
        if (m.cols() != f) throw ShapeMismatch("batch norm feature count");

    std::vector<double> mean(f, 0.0), var(f, 0.0);
    if (use_batch_stats) {
        for (const auto& m : batch)
            for (int r = 0; r < m.rows(); ++r)
                for (int c = 0; c < f; ++c) mean[c] += m(r, c);
        for (int c = 0; c < f; ++c) mean[c] /= static_cast<double>(count);
        for (const auto& m : batch)
            for (int r = 0; r < m.rows(); ++r)
                for (int c = 0; c < f; ++c) {
                    const double d = m(r, c) - mean[c];
                    var[c] += d * d;
                }
        for (int c = 0; c < f; ++c) var[c] /= static_cast<double>(count);  // biased

        if (update_running && state.mode == BatchNormMode::running_average) {
            for (int c = 0; c < f; ++c) {
                state.running_mean[c] =
                    state.momentum * state.running_mean[c] + (1.0 - state.momentum) * mean[c];
                state.running_var[c] =
                    state.momentum * state.running_var[c] + (1.0 - state.momentum) * var[c];
            }
        }
    } else {
        mean = state.running_mean;
        var = state.running_var;
    }

    BatchNormCache cache;
    cache.count = count;
    cache.used_batch_stats = use_batch_stats;
    cache.inv_std.resize(f);
    for (int c = 0; c < f; ++c) cache.inv_std[c] = 1.0 / std::sqrt(var[c] + state.epsilon);

    cache.xhat.reserve(batch.size());
    for (auto& m : batch) {
        Matrix xhat(m.rows(), f);
        for (int r = 0; r < m.rows(); ++r)
            for (int c = 0; c < f; ++c) {
                xhat(r, c) = (m(r, c) - mean[c]) * cache.inv_std[c];
                m(r, c) = state.gamma[c] * xhat(r, c) + state.beta[c];
            }
        cache.xhat.push_back(std::move(xhat));
    }
    return cache;
}

BatchNormGrads batch_norm_backward(const BatchNormCache& cache, const BatchNormState& state,
                                   const std::vector<Matrix>& grad_out) {
    const int f = state.features;
    const double m = static_cast<double>(cache.count);

    BatchNormGrads g;
    g.gamma.assign(f, 0.0);
    g.beta.assign(f, 0.0);
    for (std::size_t s = 0; s < grad_out.size(); ++s) {
        const Matrix& dy = grad_out[s];
        const Matrix& xhat = cache.xhat[s];
        for (int r = 0; r < dy.rows(); ++r)
            for (int c = 0; c < f; ++c) {
                g.gamma[c] += dy(r, c) * xhat(r, c);
                g.beta[c] += dy(r, c);
            }
    }

    g.inputs.reserve(grad_out.size());
    if (cache.used_batch_stats) {
        // dx = gamma*inv_std*(dy - mean(dy) - xhat*mean(dy*xhat))
        for (std::size_t s = 0; s < grad_out.size(); ++s) {
            const Matrix& dy = grad_out[s];
            const Matrix& xhat = cache.xhat[s];
            Matrix dx(dy.rows(), f);
            for (int r = 0; r < dy.rows(); ++r)
                for (int c = 0; c < f; ++c)
                    dx(r, c) = state.gamma[c] * cache.inv_std[c] *
                               (dy(r, c) - g.beta[c] / m - xhat(r, c) * g.gamma[c] / m);
            g.inputs.push_back(std::move(dx));
        }
    } else {
        // Statistics were constants (running averages).
        for (const auto& dy : grad_out) {
            Matrix dx(dy.rows(), f);
            for (int r = 0; r < dy.rows(); ++r)
                for (int c = 0; c < f; ++c)
                    dx(r, c) = state.gamma[c] * cache.inv_std[c] * dy(r, c);
            g.inputs.push_back(std::move(dx));
        }
    }
    return g;
}

FcParams init_fc_params(int in, int out, Rng& rng) {
    FcParams p(in, out);
    const double stddev = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& w : p.weights) w = rng.normal(0.0, stddev);
    return p;
}

std::vector<double> fully_connected(const std::vector<double>& x, const FcParams& params) {
    if (static_cast<int>(x.size()) != params.in_features)
        throw ShapeMismatch("fully_connected: input size " + std::to_string(x.size()) +
                            ", expected " + std::to_string(params.in_features));
    std::vector<double> y(params.out_features);
    for (int o = 0; o < params.out_features; ++o) {
        double acc = params.biases[o];
        const double* row = &params.weights[static_cast<std::size_t>(o) * params.in_features];
        for (int i = 0; i < params.in_features; ++i) acc += row[i] * x[i];
        y[o] = acc;
    }
    return y;
}

FcGrads fully_connected_backward(const std::vector<double>& x, const FcParams& params,
                                 const std::vector<double>& dy) {
    if (static_cast<int>(dy.size()) != params.out_features)
        throw ShapeMismatch("fully_connected_backward: grad size");
    FcGrads g;
    g.input.assign(params.in_features, 0.0);
    g.weights.assign(params.weights.size(), 0.0);
    g.biases.assign(params.out_features, 0.0);
    for (int o = 0; o < params.out_features; ++o) {
        const double d = dy[o];
        g.biases[o] = d;
        const double* row = &params.weights[static_cast<std::size_t>(o) * params.in_features];
        double* wrow = &g.weights[static_cast<std::size_t>(o) * params.in_features];
        for (int i = 0; i < params.in_features; ++i) {
            wrow[i] = d * x[i];
            g.input[i] += d * row[i];
        }
    }
    return g;
}

DropoutResult dropout(const Matrix& x, double rate, Rng& rng, bool training) {
    if (rate < 0.0 || rate >= 1.0)
        throw InvalidRate("dropout rate must be in [0,1), got " + std::to_string(rate));
    DropoutResult res;
    res.y = x;
    res.mask.assign(x.size(), 1);
    if (!training || rate == 0.0) return res;

    const double scale = 1.0 / (1.0 - rate);
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (rng.bernoulli(rate)) {
            res.mask[k] = 0;
            res.y.values()[k] = 0.0;
        } else {
            res.y.values()[k] *= scale;
        }
    }
    return res;
}

Matrix dropout_backward(const std::vector<std::uint8_t>& mask, double rate,
                        const Matrix& dy) {
    Matrix dx = dy;
    const double scale = 1.0 / (1.0 - rate);
    for (std::size_t k = 0; k < dx.size(); ++k)
        dx.values()[k] = mask[k] ? dx.values()[k] * scale : 0.0;
    return dx;
}

LossOutput softmax_xent(const Matrix& logits, const std::vector<int>& targets,
                        const std::vector<std::uint8_t>* mask) {
    const int rows = logits.rows();
    const int classes = logits.cols();
    if (static_cast<int>(targets.size()) != rows)
        throw ShapeMismatch("softmax_xent: one target per logit row");
    if (mask && static_cast<int>(mask->size()) != rows)
        throw ShapeMismatch("softmax_xent: mask length");

    int active = 0;
    for (int r = 0; r < rows; ++r) {
        if (mask && !(*mask)[r]) continue;
        ++active;
        if (targets[r] < 0 || targets[r] >= classes)
            throw InvalidClass("target " + std::to_string(targets[r]) +
                               " outside 0.." + std::to_string(classes - 1));
    }
    if (active == 0) throw EmptyMask("no unmasked rows to compute a loss over");

    LossOutput out;
    out.grad = Matrix(rows, classes);
    const double inv_active = 1.0 / static_cast<double>(active);
    for (int r = 0; r < rows; ++r) {
        if (mask && !(*mask)[r]) continue;  // gradient row stays exactly zero
        double row_max = logits(r, 0);
        for (int c = 1; c < classes; ++c) row_max = std::max(row_max, logits(r, c));
        double sum = 0.0;
        for (int c = 0; c < classes; ++c) sum += std::exp(logits(r, c) - row_max);
        const double log_sum = std::log(sum);
        out.value += (log_sum - (logits(r, targets[r]) - row_max)) * inv_active;
        for (int c = 0; c < classes; ++c) {
            const double p = std::exp(logits(r, c) - row_max) / sum;
            out.grad(r, c) = (p - (c == targets[r] ? 1.0 : 0.0)) * inv_active;
        }
    }
    return out;
}

}  // namespace gcnn
