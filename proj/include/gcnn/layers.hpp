#pragma once

#include <cstdint>
#include <vector>

#include "gcnn/matrix.hpp"
#include "gcnn/rng.hpp"

namespace gcnn {

Matrix relu(const Matrix& x);
// dx = dy where x > 0, else 0 (subgradient at 0 is 0)
Matrix relu_backward(const Matrix& x, const Matrix& dy);

enum class BatchNormMode {
    running_average,  // training updates running stats, inference reads them
    batch_only,       // stats always come from the current batch
};

// Per-feature batch normalization over the vertex axis: statistics reduce
// over every vertex of every sample in the batch.
struct BatchNormState {
    int features = 0;
    std::vector<double> gamma;
    std::vector<double> beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double momentum = 0.9;
    double epsilon = 1e-5;
    BatchNormMode mode = BatchNormMode::running_average;

    BatchNormState() = default;
    explicit BatchNormState(int f)
        : features(f), gamma(f, 1.0), beta(f, 0.0),
          running_mean(f, 0.0), running_var(f, 1.0) {}
};

struct BatchNormCache {
    std::vector<Matrix> xhat;     // normalized pre-scale values per sample
    std::vector<double> inv_std;  // per feature
    std::size_t count = 0;        // rows in the reduction set
    bool used_batch_stats = false;
};

// Normalizes the batch in place. use_batch_stats selects training-style
// normalization; update_running folds the batch statistics into the running
// averages (running-average mode only).
BatchNormCache batch_norm_forward(std::vector<Matrix>& batch, BatchNormState& state,
                                  bool use_batch_stats, bool update_running);

struct BatchNormGrads {
    std::vector<Matrix> inputs;
    std::vector<double> gamma;
    std::vector<double> beta;
};

BatchNormGrads batch_norm_backward(const BatchNormCache& cache, const BatchNormState& state,
                                   const std::vector<Matrix>& grad_out);

struct FcParams {
    int in_features = 0;
    int out_features = 0;
    std::vector<double> weights;  // out x in, row-major
    std::vector<double> biases;   // out

    FcParams() = default;
    FcParams(int in, int out)
        : in_features(in), out_features(out),
          weights(static_cast<std::size_t>(in) * out, 0.0), biases(out, 0.0) {}

    double& w(int o, int i) { return weights[static_cast<std::size_t>(o) * in_features + i]; }
    double w(int o, int i) const { return weights[static_cast<std::size_t>(o) * in_features + i]; }
};

FcParams init_fc_params(int in, int out, Rng& rng);

// y = W x + b
std::vector<double> fully_connected(const std::vector<double>& x, const FcParams& params);

struct FcGrads {
    std::vector<double> input;
    std::vector<double> weights;
    std::vector<double> biases;
};

FcGrads fully_connected_backward(const std::vector<double>& x, const FcParams& params,
                                 const std::vector<double>& dy);

struct DropoutResult {
    Matrix y;
    std::vector<std::uint8_t> mask;  // 1 = kept
};

// Inverted dropout: kept entries scale by 1/(1-rate); inference is identity.
DropoutResult dropout(const Matrix& x, double rate, Rng& rng, bool training);
Matrix dropout_backward(const std::vector<std::uint8_t>& mask, double rate,
                        const Matrix& dy);

struct LossOutput {
    double value = 0.0;
    Matrix grad;  // same shape as logits; masked rows exactly zero
};

// Cross-entropy of row-wise log-softmax against one target class per row.
// With a mask, only rows with mask bit 1 enter the mean and masked rows get
// an exactly-zero gradient.
LossOutput softmax_xent(const Matrix& logits, const std::vector<int>& targets,
                        const std::vector<std::uint8_t>* mask = nullptr);

}  // namespace gcnn
