#include "gcnn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gcnn/errors.hpp"
#include "gcnn/layers.hpp"
#include "gcnn/rng.hpp"

namespace gcnn {

void sgd_momentum_step(std::vector<double>& params, const std::vector<double>& grads,
                       std::vector<double>& velocity, double lr, double momentum) {
    if (params.size() != grads.size() || params.size() != velocity.size())
        throw ShapeMismatch("sgd_momentum_step: buffer sizes differ");
    for (std::size_t k = 0; k < params.size(); ++k) {
        velocity[k] = momentum * velocity[k] - lr * grads[k];
        params[k] += velocity[k];
    }
}

void adam_step(std::vector<double>& params, const std::vector<double>& grads,
               std::vector<double>& m, std::vector<double>& v, long t,
               const TrainConfig& cfg) {
    if (params.size() != grads.size() || params.size() != m.size() ||
        params.size() != v.size())
        throw ShapeMismatch("adam_step: buffer sizes differ");
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t k = 0; k < params.size(); ++k) {
        m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * grads[k];
        v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * grads[k] * grads[k];
        const double mhat = m[k] / bc1;
        const double vhat = v[k] / bc2;
        params[k] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_epsilon);
    }
}

void Optimizer::step(const std::vector<ParamBlock>& blocks) {
    if (slot_a_.empty()) {
        slot_a_.resize(blocks.size());
        slot_b_.resize(blocks.size());
        for (std::size_t k = 0; k < blocks.size(); ++k) {
            slot_a_[k].assign(blocks[k].value->size(), 0.0);
            slot_b_[k].assign(blocks[k].value->size(), 0.0);
        }
    }
    ++t_;
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        if (cfg_.optimizer == OptimizerKind::sgd_momentum)
            sgd_momentum_step(*blocks[k].value, *blocks[k].grad, slot_a_[k],
                              cfg_.learning_rate, cfg_.momentum);
        else
            adam_step(*blocks[k].value, *blocks[k].grad, slot_a_[k], slot_b_[k], t_, cfg_);
    }
}

std::vector<std::pair<std::vector<int>, std::vector<int>>> kfold_split(
    int count, int k, std::uint64_t seed) {
    if (k < 2) throw TooFewSamples("k-fold needs k >= 2");
    if (count < k)
        throw TooFewSamples(std::to_string(count) + " samples cannot fill " +
                            std::to_string(k) + " folds");
    std::vector<int> order(count);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order.begin(), order.end());

    std::vector<std::pair<std::vector<int>, std::vector<int>>> folds;
    const int base = count / k, rem = count % k;
    int cursor = 0;
    for (int f = 0; f < k; ++f) {
        const int size = base + (f < rem ? 1 : 0);
        std::vector<int> test(order.begin() + cursor, order.begin() + cursor + size);
        std::vector<int> train;
        train.reserve(count - size);
        train.insert(train.end(), order.begin(), order.begin() + cursor);
        train.insert(train.end(), order.begin() + cursor + size, order.end());
        folds.emplace_back(std::move(train), std::move(test));
        cursor += size;
    }
    return folds;
}

LossResult graph_batch_loss(const std::vector<GraphState>& outputs,
                            const std::vector<int>& labels) {
    if (outputs.size() != labels.size())
        throw ShapeMismatch("graph_batch_loss: one label per sample");
    LossResult res;
    res.grads.resize(outputs.size());
    const double inv_b = 1.0 / static_cast<double>(outputs.size());
    for (std::size_t k = 0; k < outputs.size(); ++k) {
        LossOutput lo = softmax_xent(outputs[k].v, {labels[k]});
        res.value += lo.value * inv_b;
        res.grads[k].v = std::move(lo.grad);
        for (auto& g : res.grads[k].v.values()) g *= inv_b;
    }
    return res;
}

LossResult vertex_loss(const GraphState& output, const std::vector<int>& labels,
                       const std::vector<std::uint8_t>& mask) {
    LossResult res;
    LossOutput lo = softmax_xent(output.v, labels, &mask);
    res.value = lo.value;
    res.grads.resize(1);
    res.grads[0].v = std::move(lo.grad);
    return res;
}

InputSpec infer_input_spec(const std::vector<GraphSample>& data, TaskKind task,
                           int classes) {
    if (data.empty()) throw EmptyBatch("cannot infer input spec from no samples");
    InputSpec spec;
    spec.vertex_features = data[0].vertices.cols();
    spec.edge_slices = data[0].adjacency.slice_count();
    spec.classes = classes;
    spec.task = task;

    spec.fixed_vertices = data[0].vertices.rows();
    bool grid_ok = data[0].grid.has_value();
    for (const auto& s : data) {
        if (s.vertices.cols() != spec.vertex_features)
            throw ShapeMismatch("samples disagree on vertex feature count");
        if (s.adjacency.slice_count() != spec.edge_slices)
            throw ShapeMismatch("samples disagree on adjacency slice count");
        if (s.vertices.rows() != spec.fixed_vertices) spec.fixed_vertices = 0;
        if (!s.grid || !data[0].grid ||
            s.grid->shape.height != data[0].grid->shape.height ||
            s.grid->shape.width != data[0].grid->shape.width ||
            s.grid->mode != data[0].grid->mode)
            grid_ok = false;
    }
    if (grid_ok) spec.grid = data[0].grid;
    return spec;
}

namespace {

int argmax_row(const Matrix& v, int row) {
    int best = 0;
    for (int c = 1; c < v.cols(); ++c)
        if (v(row, c) > v(row, best)) best = c;  // ties go to the lower class
    return best;
}

double epoch_mean(double total, std::size_t n) {
    return total / static_cast<double>(n);
}

}  // namespace

double evaluate(Network& net, const std::vector<GraphSample>& dataset) {
    if (dataset.empty()) throw EmptyEvalSet("no samples to evaluate");
    int correct = 0;
    for (const auto& sample : dataset) {
        std::vector<GraphState> states{make_state(sample)};
        net.forward(states, eval_mode(), /*keep_cache=*/false);
        if (argmax_row(states[0].v, 0) == sample.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

double evaluate_vertex(Network& net, const GraphSample& sample) {
    std::vector<GraphState> states{make_state(sample)};
    net.forward(states, eval_mode(), /*keep_cache=*/false);
    int correct = 0, total = 0;
    for (int n = 0; n < states[0].v.rows(); ++n) {
        if (sample.label_mask[n]) continue;  // train vertex
        ++total;
        if (argmax_row(states[0].v, n) == sample.vertex_labels[n]) ++correct;
    }
    if (total == 0) throw EmptyEvalSet("no held-out vertices to evaluate");
    return static_cast<double>(correct) / static_cast<double>(total);
}

TrainResult train(const ArchPlan& plan, const std::vector<GraphSample>& train_set,
                  const std::vector<GraphSample>& eval_set, const InputSpec& spec,
                  const TrainConfig& config) {
    if (train_set.empty()) throw EmptyBatch("empty training set");
    const bool vertex_task = spec.task == TaskKind::vertex_classification;
    if (vertex_task && train_set.size() != 1)
        throw ShapeMismatch("vertex classification trains on a single graph");

    TrainResult result;
    result.network = instantiate(plan, spec, mix_seed(config.seed, 0xA110C));
    Network& net = result.network;

    std::vector<GraphState> prototypes;
    prototypes.reserve(train_set.size());
    for (const auto& s : train_set) prototypes.push_back(make_state(s));

    // One seeded shuffle per fit, reused every epoch: with a frozen model the
    // recorded losses are then bit-identical across epochs.
    std::vector<int> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(mix_seed(config.seed, 0x5FF1E));
    shuffle_rng.shuffle(order.begin(), order.end());

    Optimizer optimizer(config);
    const int batch = std::max(1, config.batch_size);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double loss_total = 0.0;
        std::size_t seen = 0;
        for (std::size_t at = 0; at < order.size(); at += batch) {
            const std::size_t end = std::min(order.size(), at + batch);
            std::vector<GraphState> states;
            std::vector<int> labels;
            states.reserve(end - at);
            for (std::size_t k = at; k < end; ++k) {
                states.push_back(prototypes[order[k]]);
                labels.push_back(train_set[order[k]].label);
            }

            net.zero_grads();
            net.forward(states, train_mode(), /*keep_cache=*/true);
            LossResult loss =
                vertex_task
                    ? vertex_loss(states[0], train_set[0].vertex_labels,
                                  train_set[0].label_mask)
                    : graph_batch_loss(states, labels);
            if (!std::isfinite(loss.value))
                throw NonFiniteLoss("epoch " + std::to_string(epoch) + ", sample offset " +
                                    std::to_string(at));
            net.backward(loss.grads);
            optimizer.step(net.param_blocks());

            loss_total += loss.value * static_cast<double>(end - at);
            seen += end - at;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = epoch_mean(loss_total, seen);
        if (vertex_task) {
            const GraphSample& g = train_set[0];
            std::vector<GraphState> states{prototypes[0]};
            net.forward(states, eval_mode(), /*keep_cache=*/false);
            int correct = 0, total = 0;
            for (int n = 0; n < states[0].v.rows(); ++n) {
                if (!g.label_mask[n]) continue;
                ++total;
                if (argmax_row(states[0].v, n) == g.vertex_labels[n]) ++correct;
            }
            stats.train_acc = total ? static_cast<double>(correct) / total : 0.0;
            stats.eval_acc = evaluate_vertex(net, g);
        } else {
            stats.train_acc = evaluate(net, train_set);
            stats.eval_acc =
                eval_set.empty() ? std::nan("") : evaluate(net, eval_set);
        }
        result.metrics.epochs.push_back(stats);
    }
    return result;
}

KFoldResult run_kfold(const ArchPlan& plan, const std::vector<GraphSample>& dataset,
                      const InputSpec& spec, const TrainConfig& config) {
    KFoldResult result;
    auto folds = kfold_split(static_cast<int>(dataset.size()), config.folds, config.seed);

    std::vector<double> finals;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<GraphSample> train_set, test_set;
        for (int idx : folds[f].first) train_set.push_back(dataset[idx]);
        for (int idx : folds[f].second) test_set.push_back(dataset[idx]);

        TrainConfig fold_cfg = config;
        fold_cfg.seed = mix_seed(config.seed, 0xF01D + f);
        TrainResult tr = train(plan, train_set, test_set, spec, fold_cfg);
        finals.push_back(tr.metrics.epochs.back().eval_acc);
        result.folds.push_back(std::move(tr.metrics));
    }

    double mean = 0.0;
    for (double a : finals) mean += a;
    mean /= static_cast<double>(finals.size());
    double var = 0.0;
    for (double a : finals) var += (a - mean) * (a - mean);
    var /= static_cast<double>(finals.size());
    result.mean_eval_acc = mean;
    result.std_eval_acc = std::sqrt(var);

    TrainConfig final_cfg = config;
    final_cfg.seed = mix_seed(config.seed, 0xF1A1);
    result.final_network =
        std::move(train(plan, dataset, {}, spec, final_cfg).network);
    return result;
}

std::vector<GradCheckReport> grad_check(Network& net,
                                        const std::vector<GraphSample>& batch,
                                        double epsilon) {
    const bool vertex_task = net.task == TaskKind::vertex_classification;

    auto run_loss = [&](bool keep_cache) -> LossResult {
        std::vector<GraphState> states;
        states.reserve(batch.size());
        for (const auto& s : batch) states.push_back(make_state(s));
        net.forward(states, grad_check_mode(), keep_cache);
        if (vertex_task)
            return vertex_loss(states[0], batch[0].vertex_labels, batch[0].label_mask);
        std::vector<int> labels;
        for (const auto& s : batch) labels.push_back(s.label);
        return graph_batch_loss(states, labels);
    };

    net.zero_grads();
    LossResult loss = run_loss(/*keep_cache=*/true);
    net.backward(loss.grads);

    std::vector<GradCheckReport> reports;
    for (const auto& block : net.param_blocks()) {
        GradCheckReport rep;
        rep.block = block.name;
        for (std::size_t k = 0; k < block.value->size(); ++k) {
            const double saved = (*block.value)[k];
            (*block.value)[k] = saved + epsilon;
            const double lp = run_loss(false).value;
            (*block.value)[k] = saved - epsilon;
            const double lm = run_loss(false).value;
            (*block.value)[k] = saved;

            const double numeric = (lp - lm) / (2.0 * epsilon);
            const double analytic = (*block.grad)[k];
            const double denom =
                std::max({std::fabs(numeric), std::fabs(analytic), 1e-8});
            rep.max_rel_err =
                std::max(rep.max_rel_err, std::fabs(numeric - analytic) / denom);
        }
        reports.push_back(std::move(rep));
    }
    return reports;
}

}  // namespace gcnn
