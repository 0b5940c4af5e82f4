#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gcnn/arch.hpp"
#include "gcnn/graph.hpp"
#include "gcnn/layers.hpp"
#include "gcnn/matrix.hpp"
#include "gcnn/pool.hpp"
#include "gcnn/rng.hpp"

namespace gcnn {

enum class TaskKind { graph_classification, vertex_classification };

struct InputSpec {
    int vertex_features = 0;  // C
    int edge_slices = 0;      // L, counting the identity
    int classes = 0;
    TaskKind task = TaskKind::graph_classification;
    // Vertex count when every sample shares it (images, fixed-structure
    // graphs); 0 means heterogeneous sizes.
    int fixed_vertices = 0;
    std::optional<GridMeta> grid;
};

struct RunMode {
    bool batch_stats = true;      // batch norm normalizes with batch statistics
    bool update_running = false;  // fold batch stats into the running averages
    bool dropout_active = false;
};

inline RunMode train_mode() { return {true, true, true}; }
inline RunMode grad_check_mode() { return {true, false, false}; }
inline RunMode eval_mode() { return {false, false, false}; }

// Data flowing through the network for one sample. The adjacency is shared,
// never mutated; layers that transform it install a fresh tensor.
// adj_requires_grad marks adjacencies that depend on parameters (anything
// downstream of an embed pooling layer).
struct GraphState {
    Matrix v;
    std::shared_ptr<const AdjacencyTensor> adj;
    std::optional<GridMeta> grid;
    bool adj_requires_grad = false;
};

GraphState make_state(const GraphSample& sample);

// Backward companion of GraphState. adj holds one dense matrix per slice
// (slice 0 always empty: the identity is constant) and stays empty while the
// adjacency is plain input data.
struct GraphGrad {
    Matrix v;
    std::vector<Matrix> adj;
};

struct ParamBlock {
    std::string name;
    std::vector<double>* value;
    std::vector<double>* grad;
};

class Layer {
public:
    virtual ~Layer() = default;
    // Transforms every state in the batch in place. keep_cache retains what
    // backward() needs; pure evaluation passes false.
    virtual void forward(std::vector<GraphState>& states, const RunMode& mode,
                         bool keep_cache) = 0;
    // Consumes output gradients and leaves input gradients in place,
    // accumulating parameter gradients.
    virtual void backward(std::vector<GraphGrad>& grads) = 0;
    virtual void collect_params(std::vector<ParamBlock>& out) { (void)out; }
    virtual std::string describe() const = 0;
    virtual long param_count() const { return 0; }
    // Distance of the last cached forward pass to the nearest activation
    // kink (ReLU input magnitude). Finite-difference checks use this to
    // reject instances whose loss is locally non-smooth.
    virtual double kink_gap() const { return std::numeric_limits<double>::infinity(); }
};

class Network {
public:
    TaskKind task = TaskKind::graph_classification;
    int classes = 0;
    std::vector<std::unique_ptr<Layer>> layers;
    // Network layer range built for each plan layer, for reporting.
    std::vector<std::pair<int, int>> plan_ranges;

    void forward(std::vector<GraphState>& states, const RunMode& mode,
                 bool keep_cache = true);
    void backward(std::vector<GraphGrad>& grads);
    std::vector<ParamBlock> param_blocks();
    void zero_grads();
    long param_count() const;
    double kink_gap() const;
};

// Builds the runnable network for a plan: allocates parameters, inserts
// batch norm + ReLU after every conv/pool except the plan's final layer,
// expands GFC(k) into embed-pool-to-1 followed by FC(k), and appends the
// FC(classes) classifier head for graph-level tasks. Throws DimensionError
// when an FC layer would receive variable-size input and NotAGridSample when
// P/2 appears without image-derived input.
Network instantiate(const ArchPlan& plan, const InputSpec& spec, std::uint64_t seed);

// One line per plan layer with its parameter count.
std::vector<std::string> describe_plan_layers(const ArchPlan& plan, const Network& net);

// Text serialization of all parameter blocks (17-significant-digit decimals,
// so doubles round-trip exactly). Loading requires matching block names and
// sizes, i.e. a network instantiated from the same plan and input shapes.
void save_params(Network& net, const std::string& path);
void load_params(Network& net, const std::string& path);

}  // namespace gcnn
