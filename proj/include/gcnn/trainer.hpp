#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gcnn/arch.hpp"
#include "gcnn/graph.hpp"
#include "gcnn/network.hpp"

namespace gcnn {

enum class OptimizerKind { sgd_momentum, adam };

struct TrainConfig {
    OptimizerKind optimizer = OptimizerKind::sgd_momentum;
    double learning_rate = 0.01;
    double momentum = 0.9;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    int epochs = 10;
    int batch_size = 16;
    int folds = 5;
    std::uint64_t seed = 0;
    bool deterministic = true;  // serial, ordered gradient accumulation
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double eval_acc = 0.0;
};

struct Metrics {
    std::vector<EpochStats> epochs;
};

// v <- momentum*v - lr*g; w <- w + v  (classical momentum)
void sgd_momentum_step(std::vector<double>& params, const std::vector<double>& grads,
                       std::vector<double>& velocity, double lr, double momentum);

// Standard Adam with bias correction; t counts steps from 1.
void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               std::vector<double>& m, std::vector<double>& v, long t,
               const TrainConfig& cfg);

// Keeps per-block state across steps; blocks must be passed in a stable order.
class Optimizer {
public:
    explicit Optimizer(const TrainConfig& cfg) : cfg_(cfg) {}
    void step(const std::vector<ParamBlock>& blocks);

private:
    TrainConfig cfg_;
    long t_ = 0;
    std::vector<std::vector<double>> slot_a_;  // velocity / first moment
    std::vector<std::vector<double>> slot_b_;  // second moment (adam)
};

// Seeded shuffle, then k contiguous near-equal folds. Returns
// (train indices, test indices) per fold; the first count%k folds hold one
// extra test sample.
std::vector<std::pair<std::vector<int>, std::vector<int>>> kfold_split(
    int count, int k, std::uint64_t seed);

struct LossResult {
    double value = 0.0;
    std::vector<GraphGrad> grads;
};

// Mean cross-entropy over the batch of per-sample class logits.
LossResult graph_batch_loss(const std::vector<GraphState>& outputs,
                            const std::vector<int>& labels);

// Masked per-vertex cross-entropy on a single graph.
LossResult vertex_loss(const GraphState& output, const std::vector<int>& labels,
                       const std::vector<std::uint8_t>& mask);

InputSpec infer_input_spec(const std::vector<GraphSample>& data, TaskKind task,
                           int classes);

struct TrainResult {
    Network network;
    Metrics metrics;
};

// Trains one network. Graph task: mini-batch SGD over train_set with
// eval_set accuracy recorded per epoch. Vertex task: train_set holds the
// single graph; train/eval accuracies are over mask-1 / mask-0 vertices.
TrainResult train(const ArchPlan& plan, const std::vector<GraphSample>& train_set,
                  const std::vector<GraphSample>& eval_set, const InputSpec& spec,
                  const TrainConfig& config);

double evaluate(Network& net, const std::vector<GraphSample>& dataset);
double evaluate_vertex(Network& net, const GraphSample& sample);

struct KFoldResult {
    std::vector<Metrics> folds;
    double mean_eval_acc = 0.0;
    double std_eval_acc = 0.0;
    Network final_network;  // fit on the full dataset with the same budget
};

KFoldResult run_kfold(const ArchPlan& plan, const std::vector<GraphSample>& dataset,
                      const InputSpec& spec, const TrainConfig& config);

struct GradCheckReport {
    std::string block;
    double max_rel_err = 0.0;
};

// Central finite differences of the batch loss against the analytic
// gradients, reported per parameter block. Dropout is inactive and batch
// statistics are recomputed per forward, so the loss is smooth in the
// parameters away from ReLU kinks.
std::vector<GradCheckReport> grad_check(Network& net,
                                        const std::vector<GraphSample>& batch,
                                        double epsilon = 1e-5);

}  // namespace gcnn
