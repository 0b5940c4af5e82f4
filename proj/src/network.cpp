#include "gcnn/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "gcnn/conv.hpp"
#include "gcnn/errors.hpp"
#include "gcnn/grid.hpp"

namespace gcnn {

GraphState make_state(const GraphSample& sample) {
    GraphState s;
    s.v = sample.vertices;
    s.adj = std::make_shared<AdjacencyTensor>(sample.adjacency);
    s.grid = sample.grid;
    return s;
}

namespace {

void merge_adjacency_grads(std::vector<Matrix>& into, std::vector<Matrix>&& from) {
    if (into.empty()) {
        into = std::move(from);
        return;
    }
    for (std::size_t l = 0; l < from.size(); ++l) {
        if (from[l].empty()) continue;
        if (into[l].empty())
            into[l] = std::move(from[l]);
        else
            add_scaled(into[l], from[l], 1.0);
    }
}

void accumulate(std::vector<double>& into, const std::vector<double>& from) {
    for (std::size_t k = 0; k < into.size(); ++k) into[k] += from[k];
}

class GraphConvLayer final : public Layer {
public:
    GraphConvLayer(std::string name, FilterParams params)
        : name_(std::move(name)), params_(std::move(params)),
          w_grad_(params_.weights.size(), 0.0), b_grad_(params_.biases.size(), 0.0) {}

    void forward(std::vector<GraphState>& states, const RunMode&, bool keep_cache) override {
        if (keep_cache) {
            nbr_.clear();
            adj_.clear();
            v_in_.clear();
            adj_grad_.clear();
        }
        for (auto& s : states) {
            Matrix nbr = neighbor_aggregate(*s.adj, s.v);
            Matrix out = conv_forward(nbr, params_);
            if (keep_cache) {
                adj_.push_back(s.adj);
                adj_grad_.push_back(s.adj_requires_grad);
                v_in_.push_back(s.adj_requires_grad ? s.v : Matrix());
                nbr_.push_back(std::move(nbr));
            }
            s.v = std::move(out);
        }
    }

    void backward(std::vector<GraphGrad>& grads) override {
        for (std::size_t k = 0; k < grads.size(); ++k) {
            auto& g = grads[k];
            if (adj_grad_[k])
                merge_adjacency_grads(
                    g.adj, conv_adjacency_backward(v_in_[k], params_, g.v));
            ConvGrads cg = conv_backward(nbr_[k], *adj_[k], params_, g.v);
            accumulate(w_grad_, cg.weights);
            accumulate(b_grad_, cg.biases);
            g.v = std::move(cg.vertices);
        }
    }

    void collect_params(std::vector<ParamBlock>& out) override {
        out.push_back({name_ + ".weights", &params_.weights, &w_grad_});
        out.push_back({name_ + ".biases", &params_.biases, &b_grad_});
    }

    std::string describe() const override {
        return "graph conv, " + std::to_string(params_.out_features) + " filters over " +
               std::to_string(params_.num_slices) + " slices";
    }

    long param_count() const override {
        return static_cast<long>(params_.weights.size() + params_.biases.size());
    }

    const FilterParams& params() const { return params_; }
    FilterParams& params() { return params_; }

private:
    std::string name_;
    FilterParams params_;
    std::vector<double> w_grad_, b_grad_;
    std::vector<Matrix> nbr_, v_in_;
    std::vector<std::shared_ptr<const AdjacencyTensor>> adj_;
    std::vector<char> adj_grad_;
};

// Per-vertex linear map: a convolution whose weights touch only slice 0.
class ZeroHopLayer final : public Layer {
public:
    ZeroHopLayer(std::string name, FilterParams params)
        : name_(std::move(name)), params_(std::move(params)),
          w_grad_(params_.weights.size(), 0.0), b_grad_(params_.biases.size(), 0.0) {}

    void forward(std::vector<GraphState>& states, const RunMode&, bool keep_cache) override {
        if (keep_cache) v_in_.clear();
        for (auto& s : states) {
            const int n = s.v.rows();
            Matrix out(n, params_.out_features);
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < params_.in_features; ++c) {
                    const double v = s.v(r, c);
                    if (v == 0.0) continue;
                    for (int f = 0; f < params_.out_features; ++f)
                        out(r, f) += v * params_.w(0, c, f);
                }
            for (int r = 0; r < n; ++r)
                for (int f = 0; f < params_.out_features; ++f)
                    out(r, f) += params_.biases[f];
            if (keep_cache) v_in_.push_back(std::move(s.v));
            s.v = std::move(out);
        }
    }

    void backward(std::vector<GraphGrad>& grads) override {
        for (std::size_t k = 0; k < grads.size(); ++k) {
            auto& g = grads[k];
            const Matrix& x = v_in_[k];
            Matrix dx(x.rows(), params_.in_features);
            for (int r = 0; r < x.rows(); ++r) {
                for (int f = 0; f < params_.out_features; ++f) {
                    const double d = g.v(r, f);
                    b_grad_[f] += d;
                    for (int c = 0; c < params_.in_features; ++c) {
                        w_grad_[static_cast<std::size_t>(c) * params_.out_features + f] +=
                            d * x(r, c);
                        dx(r, c) += d * params_.w(0, c, f);
                    }
                }
            }
            g.v = std::move(dx);
        }
    }

    void collect_params(std::vector<ParamBlock>& out) override {
        out.push_back({name_ + ".weights", &params_.weights, &w_grad_});
        out.push_back({name_ + ".biases", &params_.biases, &b_grad_});
    }

    std::string describe() const override {
        return "0-hop conv, " + std::to_string(params_.out_features) + " filters";
    }

    long param_count() const override {
        return static_cast<long>(params_.weights.size() + params_.biases.size());
    }

private:
    std::string name_;
    FilterParams params_;
    std::vector<double> w_grad_, b_grad_;
    std::vector<Matrix> v_in_;
};

class EmbedPoolLayer final : public Layer {
public:
    EmbedPoolLayer(std::string name, EmbedPoolParams params)
        : name_(std::move(name)), params_(std::move(params)),
          w_grad_(params_.filter.weights.size(), 0.0),
          b_grad_(params_.filter.biases.size(), 0.0) {}

    void forward(std::vector<GraphState>& states, const RunMode&, bool keep_cache) override {
        if (keep_cache) {
            caches_.clear();
            input_adj_grad_.clear();
        }
        for (auto& s : states) {
            EmbedPoolResult res = embed_pool_forward(*s.adj, s.v, params_);
            if (keep_cache) {
                input_adj_grad_.push_back(s.adj_requires_grad);
                caches_.push_back(std::move(res.cache));
            }
            s.v = std::move(res.vertices);
            s.adj = std::make_shared<AdjacencyTensor>(std::move(res.adjacency));
            s.grid.reset();  // pooled graphs are no longer image grids
            s.adj_requires_grad = true;
        }
    }

    void backward(std::vector<GraphGrad>& grads) override {
        for (std::size_t k = 0; k < grads.size(); ++k) {
            auto& g = grads[k];
            EmbedPoolGrads pg = pool_backward(caches_[k], params_, g.v, g.adj,
                                              input_adj_grad_[k]);
            accumulate(w_grad_, pg.weights);
            accumulate(b_grad_, pg.biases);
            g.v = std::move(pg.vertices);
            g.adj = std::move(pg.adjacency);
        }
    }

    void collect_params(std::vector<ParamBlock>& out) override {
        out.push_back({name_ + ".weights", &params_.filter.weights, &w_grad_});
        out.push_back({name_ + ".biases", &params_.filter.biases, &b_grad_});
    }

    std::string describe() const override {
        return "graph embed pool to " + std::to_string(params_.target_size) + " vertices";
    }

    long param_count() const override {
        return static_cast<long>(params_.filter.weights.size() +
                                 params_.filter.biases.size());
    }

private:
    std::string name_;
    EmbedPoolParams params_;
    std::vector<double> w_grad_, b_grad_;
    std::vector<EmbedPoolCache> caches_;
    std::vector<char> input_adj_grad_;
};

class GridMaxPoolLayer final : public Layer {
public:
    void forward(std::vector<GraphState>& states, const RunMode&, bool keep_cache) override {
        if (keep_cache) {
            results_.clear();
            in_vertices_.clear();
        }
        for (auto& s : states) {
            if (!s.grid) throw NotAGridSample("P/2 needs image-derived input");
            GridMaxPoolResult res = grid_max_pool_vertices(s.v, s.grid->shape);
            const ImageMode mode = s.grid->mode;
            if (keep_cache) {
                in_vertices_.push_back(s.v.rows());
                results_.push_back(res);
            }
            s.v = std::move(res.vertices);
            s.adj = std::make_shared<AdjacencyTensor>(build_grid_adjacency(res.shape, mode));
            s.grid = GridMeta{res.shape, mode};
        }
    }

    void backward(std::vector<GraphGrad>& grads) override {
        for (std::size_t k = 0; k < grads.size(); ++k) {
            auto& g = grads[k];
            g.v = grid_max_pool_backward(results_[k], in_vertices_[k], g.v);
            g.adj.clear();  // output adjacency is fixed grid geometry
        }
    }

    std::string describe() const override { return "grid max pool /2"; }

private:
    std::vector<GridMaxPoolResult> results_;
    std::vector<int> in_vertices_;
};

class BatchNormLayer final : public Layer {
public:
    BatchNormLayer(std::string name, int features, BatchNormMode mode)
        : name_(std::move(name)), state_(features),
          g_gamma_(features, 0.0), g_beta_(features, 0.0) {
        state_.mode = mode;
    }

    void forward(std::vector<GraphState>& states, const RunMode& mode,
                 bool keep_cache) override {
        std::vector<Matrix> batch;
        batch.reserve(states.size());
        for (auto& s : states) batch.push_back(std::move(s.v));
        const bool use_batch =
            state_.mode == BatchNormMode::batch_only ? true : mode.batch_stats;
        BatchNormCache cache = batch_norm_forward(batch, state_, use_batch,
                                                  mode.update_running);
        if (keep_cache) cache_ = std::move(cache);
        for (std::size_t k = 0; k < states.size(); ++k) states[k].v = std::move(batch[k]);
    }

    void backward(std::vector<GraphGrad>& grads) override {
        std::vector<Matrix> dy;
        dy.reserve(grads.size());
        for (auto& g : grads) dy.push_back(std::move(g.v));
        BatchNormGrads bg = batch_norm_backward(cache_, state_, dy);
        accumulate(g_gamma_, bg.gamma);
        accumulate(g_beta_, bg.beta);
        for (std::size_t k = 0; k < grads.size(); ++k) grads[k].v = std::move(bg.inputs[k]);
    }

    void collect_params(std::vector<ParamBlock>& out) override {
        out.push_back({name_ + ".gamma", &state_.gamma, &g_gamma_});
        out.push_back({name_ + ".beta", &state_.beta, &g_beta_});
    }

    std::string describe() const override {
        return "batch norm (" + std::to_string(state_.features) + " features)";
    }

    long param_count() const override { return 2L * state_.features; }

private:
    std::string name_;
    BatchNormState state_;
    std::vector<double> g_gamma_, g_beta_;
    BatchNormCache cache_;
};

class ReluLayer final : public Layer {
public:
    void forward(std::vector<GraphState>& states, const RunMode&, bool keep_cache) override {
        if (keep_cache) x_.clear();
        for (auto& s : states) {
            if (keep_cache) x_.push_back(s.v);
            s.v = relu(s.v);
        }
    }

    void backward(std::vector<GraphGrad>& grads) override {
        for (std::size_t k = 0; k < grads.size(); ++k)
            grads[k].v = relu_backward(x_[k], grads[k].v);
    }

    std::string describe() const override { return "relu"; }

    double kink_gap() const override {
        double gap = std::numeric_limits<double>::infinity();
        for (const auto& m : x_)
            for (double v : m.values()) gap = std::min(gap, std::fabs(v));
        return gap;
    }

private:
    std::vector<Matrix> x_;
};

class DropoutLayer final : public Layer {
public:
    DropoutLayer(double rate, std::uint64_t seed) : rate_(rate), rng_(seed) {}

    void forward(std::vector<GraphState>& states, const RunMode& mode,
                 bool keep_cache) override {
        if (keep_cache) masks_.clear();
        for (auto& s : states) {
            DropoutResult res = dropout(s.v, rate_, rng_, mode.dropout_active);
            if (keep_cache) masks_.push_back(std::move(res.mask));
            s.v = std::move(res.y);
        }
    }

    void backward(std::vector<GraphGrad>& grads) override {
        for (std::size_t k = 0; k < grads.size(); ++k)
            grads[k].v = dropout_backward(masks_[k], rate_, grads[k].v);
    }

    std::string describe() const override {
        return "dropout (rate " + std::to_string(rate_) + ")";
    }

private:
    double rate_;
    Rng rng_;
    std::vector<std::vector<std::uint8_t>> masks_;
};

class FcLayer final : public Layer {
public:
    FcLayer(std::string name, FcParams params)
        : name_(std::move(name)), params_(std::move(params)),
          w_grad_(params_.weights.size(), 0.0), b_grad_(params_.biases.size(), 0.0) {}

    void forward(std::vector<GraphState>& states, const RunMode&, bool keep_cache) override {
        if (keep_cache) {
            x_.clear();
            in_shape_.clear();
        }
        for (auto& s : states) {
            if (static_cast<int>(s.v.size()) != params_.in_features)
                throw ShapeMismatch("fully-connected layer expected " +
                                    std::to_string(params_.in_features) +
                                    " inputs, got " + std::to_string(s.v.size()));
            std::vector<double> y = fully_connected(s.v.values(), params_);
            if (keep_cache) {
                in_shape_.emplace_back(s.v.rows(), s.v.cols());
                x_.push_back(std::move(s.v.values()));
            }
            Matrix out(1, params_.out_features);
            out.values() = std::move(y);
            s.v = std::move(out);
            s.adj.reset();  // downstream layers are dense only
            s.grid.reset();
            s.adj_requires_grad = false;
        }
    }

    void backward(std::vector<GraphGrad>& grads) override {
        for (std::size_t k = 0; k < grads.size(); ++k) {
            auto& g = grads[k];
            FcGrads fg = fully_connected_backward(x_[k], params_, g.v.values());
            accumulate(w_grad_, fg.weights);
            accumulate(b_grad_, fg.biases);
            Matrix dx(in_shape_[k].first, in_shape_[k].second);
            dx.values() = std::move(fg.input);
            g.v = std::move(dx);
            g.adj.clear();
        }
    }

    void collect_params(std::vector<ParamBlock>& out) override {
        out.push_back({name_ + ".weights", &params_.weights, &w_grad_});
        out.push_back({name_ + ".biases", &params_.biases, &b_grad_});
    }

    std::string describe() const override {
        return "fully connected " + std::to_string(params_.in_features) + " -> " +
               std::to_string(params_.out_features);
    }

    long param_count() const override {
        return static_cast<long>(params_.weights.size() + params_.biases.size());
    }

private:
    std::string name_;
    FcParams params_;
    std::vector<double> w_grad_, b_grad_;
    std::vector<std::vector<double>> x_;
    std::vector<std::pair<int, int>> in_shape_;
};

// Shape bookkeeping while building the network.
struct RepState {
    bool is_graph = true;
    int n = 0;  // 0 = variable
    int c = 0;
    int l = 0;
    std::optional<GridShape> grid;
};

}  // namespace

void Network::forward(std::vector<GraphState>& states, const RunMode& mode,
                      bool keep_cache) {
    for (auto& layer : layers) layer->forward(states, mode, keep_cache);
}

void Network::backward(std::vector<GraphGrad>& grads) {
    for (auto it = layers.rbegin(); it != layers.rend(); ++it) (*it)->backward(grads);
}

std::vector<ParamBlock> Network::param_blocks() {
    std::vector<ParamBlock> out;
    for (auto& layer : layers) layer->collect_params(out);
    return out;
}

void Network::zero_grads() {
    for (const auto& block : param_blocks())
        std::fill(block.grad->begin(), block.grad->end(), 0.0);
}

long Network::param_count() const {
    long total = 0;
    for (const auto& layer : layers) total += layer->param_count();
    return total;
}

double Network::kink_gap() const {
    double gap = std::numeric_limits<double>::infinity();
    for (const auto& layer : layers) gap = std::min(gap, layer->kink_gap());
    return gap;
}

Network instantiate(const ArchPlan& plan, const InputSpec& spec, std::uint64_t seed) {
    if (plan.layers.empty()) throw EmptyPlan("cannot instantiate an empty plan");
    if (spec.vertex_features < 1 || spec.edge_slices < 1 || spec.classes < 1)
        throw DimensionError("input spec needs positive C, L and class count");

    Network net;
    net.task = spec.task;
    net.classes = spec.classes;

    Rng rng(seed);
    RepState rep;
    rep.c = spec.vertex_features;
    rep.l = spec.edge_slices;
    rep.n = spec.fixed_vertices;
    if (spec.grid) {
        rep.grid = spec.grid->shape;
        rep.n = spec.grid->shape.height * spec.grid->shape.width;
    }

    int layer_no = 0;
    auto name = [&layer_no](const char* kind) {
        return "layer" + std::to_string(layer_no) + "." + kind;
    };
    const BatchNormMode bn_mode = spec.task == TaskKind::vertex_classification
                                      ? BatchNormMode::batch_only
                                      : BatchNormMode::running_average;

    auto add_norm_relu = [&](Network& n) {
        n.layers.push_back(
            std::make_unique<BatchNormLayer>(name("batchnorm"), rep.c, bn_mode));
        n.layers.push_back(std::make_unique<ReluLayer>());
    };

    auto require_graph = [&](const char* what) {
        if (!rep.is_graph)
            throw DimensionError(std::string(what) + " cannot follow a fully-connected layer");
    };

    auto fc_input_size = [&](const char* what) -> int {
        if (!rep.is_graph) return rep.c;
        if (rep.n == 0)
            throw DimensionError(std::string(what) +
                                 " needs a fixed-size input; heterogeneous graphs require "
                                 "an embed pooling (Pool/GFC) layer first");
        return rep.n * rep.c;
    };

    for (std::size_t idx = 0; idx < plan.layers.size(); ++idx) {
        const LayerSpec& ls = plan.layers[idx];
        const bool last = idx + 1 == plan.layers.size();
        const int begin = static_cast<int>(net.layers.size());

        switch (ls.kind) {
            case LayerSpec::Kind::gconv: {
                require_graph("a graph convolution");
                auto params = init_filter_params(rep.l, rep.c, ls.count, rng);
                net.layers.push_back(
                    std::make_unique<GraphConvLayer>(name("gconv"), std::move(params)));
                rep.c = ls.count;
                break;
            }
            case LayerSpec::Kind::zero_hop: {
                require_graph("a 0-hop filter");
                auto params = init_filter_params(1, rep.c, ls.count, rng);
                net.layers.push_back(
                    std::make_unique<ZeroHopLayer>(name("zerohop"), std::move(params)));
                rep.c = ls.count;
                break;
            }
            case LayerSpec::Kind::embed_pool: {
                require_graph("graph embed pooling");
                auto params = init_embed_pool_params(rep.l, rep.c, ls.count, rng);
                net.layers.push_back(
                    std::make_unique<EmbedPoolLayer>(name("embedpool"), std::move(params)));
                rep.n = ls.count;
                rep.grid.reset();
                break;
            }
            case LayerSpec::Kind::grid_max_pool: {
                require_graph("grid max pooling");
                if (!rep.grid)
                    throw NotAGridSample("P/2 requires image-derived input");
                net.layers.push_back(std::make_unique<GridMaxPoolLayer>());
                rep.grid = GridShape{(rep.grid->height + 1) / 2,
                                     (rep.grid->width + 1) / 2, rep.c};
                rep.n = rep.grid->height * rep.grid->width;
                break;
            }
            case LayerSpec::Kind::fc: {
                const int in = fc_input_size("a fully-connected layer");
                net.layers.push_back(std::make_unique<FcLayer>(
                    name("fc"), init_fc_params(in, ls.count, rng)));
                rep.is_graph = false;
                rep.n = 1;
                rep.c = ls.count;
                rep.grid.reset();
                break;
            }
            case LayerSpec::Kind::gfc: {
                require_graph("graph fully-connected pooling");
                auto pool = init_embed_pool_params(rep.l, rep.c, 1, rng);
                net.layers.push_back(
                    std::make_unique<EmbedPoolLayer>(name("gfcpool"), std::move(pool)));
                net.layers.push_back(std::make_unique<FcLayer>(
                    name("gfcfc"), init_fc_params(rep.c, ls.count, rng)));
                rep.is_graph = false;
                rep.n = 1;
                rep.c = ls.count;
                rep.grid.reset();
                break;
            }
            case LayerSpec::Kind::dropout: {
                net.layers.push_back(
                    std::make_unique<DropoutLayer>(ls.rate, rng.next_u64()));
                break;
            }
        }
        net.plan_ranges.emplace_back(begin, static_cast<int>(net.layers.size()));

        // Batch norm + ReLU after every conv/pool and ReLU after hidden FC
        // layers; the plan's final layer feeds the head directly.
        if (!last) {
            switch (ls.kind) {
                case LayerSpec::Kind::gconv:
                case LayerSpec::Kind::zero_hop:
                case LayerSpec::Kind::embed_pool:
                case LayerSpec::Kind::grid_max_pool:
                    add_norm_relu(net);
                    break;
                case LayerSpec::Kind::fc:
                case LayerSpec::Kind::gfc:
                    net.layers.push_back(std::make_unique<ReluLayer>());
                    break;
                case LayerSpec::Kind::dropout:
                    break;
            }
        }
        ++layer_no;
    }

    if (spec.task == TaskKind::graph_classification) {
        const int in = fc_input_size("the classifier head");
        net.layers.push_back(std::make_unique<FcLayer>(
            "classifier.fc", init_fc_params(in, spec.classes, rng)));
    } else {
        if (!rep.is_graph)
            throw DimensionError("vertex classification needs per-vertex outputs; "
                                 "the plan must not end in a fully-connected layer");
        if (rep.c != spec.classes)
            throw DimensionError("vertex classification: final layer emits " +
                                 std::to_string(rep.c) + " features but there are " +
                                 std::to_string(spec.classes) + " classes");
    }
    return net;
}

void save_params(Network& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "gcnn-params 1\n";
    char buf[64];
    for (const auto& block : net.param_blocks()) {
        out << "block " << block.name << ' ' << block.value->size() << '\n';
        for (double v : *block.value) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            out << buf << '\n';
        }
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

void load_params(Network& net, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != "gcnn-params" || version != 1)
        throw IoError("'" + path + "' is not a parameter file");
    for (const auto& block : net.param_blocks()) {
        std::string tag, name;
        std::size_t count = 0;
        if (!(in >> tag >> name >> count) || tag != "block")
            throw IoError("truncated parameter file '" + path + "'");
        if (name != block.name || count != block.value->size())
            throw IoError("parameter block mismatch: file has '" + name +
                          "' x" + std::to_string(count) + ", network expects '" +
                          block.name + "' x" + std::to_string(block.value->size()));
        for (auto& v : *block.value)
            if (!(in >> v)) throw IoError("truncated parameter block '" + name + "'");
    }
}

std::vector<std::string> describe_plan_layers(const ArchPlan& plan, const Network& net) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < plan.layers.size(); ++i) {
        const auto [begin, end] = net.plan_ranges[i];
        long params = 0;
        for (int k = begin; k < end; ++k) params += net.layers[k]->param_count();
        ArchPlan one;
        one.layers.push_back(plan.layers[i]);
        out.push_back(render_arch(one) + ": " + net.layers[begin]->describe() + ", " +
                      std::to_string(params) + " params");
    }
    return out;
}

}  // namespace gcnn
