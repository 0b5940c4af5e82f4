// Command-line front end: training with k-fold cross-validation, evaluation
// of saved parameters, gradient checking, image-to-graph conversion,
// synthetic dataset generation, and architecture-string inspection.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gcnn/arch.hpp"
#include "gcnn/dataset_io.hpp"
#include "gcnn/errors.hpp"
#include "gcnn/grid.hpp"
#include "gcnn/network.hpp"
#include "gcnn/rng.hpp"
#include "gcnn/trainer.hpp"

namespace {

using namespace gcnn;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct TrainArgs {
    std::string arch;
    std::string data;
    std::string task = "graph";
    std::string opt = "sgd";
    std::string out_dir;
    int folds = 5;
    int epochs = 10;
    int batch = 16;
    int classes = 0;
    double lr = 0.01;
    double momentum = 0.9;
    std::uint64_t seed = 0;
    bool deterministic = false;
};

TrainConfig make_config(const TrainArgs& args) {
    TrainConfig cfg;
    cfg.optimizer = args.opt == "adam" ? OptimizerKind::adam : OptimizerKind::sgd_momentum;
    cfg.learning_rate = args.lr;
    cfg.momentum = args.momentum;
    cfg.epochs = args.epochs;
    cfg.batch_size = args.batch;
    cfg.folds = args.folds;
    cfg.seed = args.seed;
    cfg.deterministic = args.deterministic;
    return cfg;
}

int infer_class_count(const std::vector<GraphSample>& data, bool vertex_task) {
    int classes = 0;
    for (const auto& s : data) {
        if (vertex_task)
            for (int y : s.vertex_labels) classes = std::max(classes, y + 1);
        else
            classes = std::max(classes, s.label + 1);
    }
    if (classes < 2)
        throw EmptyBatch("dataset labels define fewer than two classes");
    return classes;
}

void write_csv(const std::string& path, const std::vector<Metrics>& folds) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << "epoch,fold,train_loss,train_acc,eval_acc\n";
    for (std::size_t f = 0; f < folds.size(); ++f)
        for (const auto& e : folds[f].epochs)
            out << e.epoch << ',' << f << ',' << fmt(e.train_loss) << ','
                << fmt(e.train_acc) << ',' << fmt(e.eval_acc) << '\n';
    if (!out) throw IoError("write failed for '" + path + "'");
}

void print_summary(const std::vector<double>& finals) {
    double mean = 0.0;
    for (double a : finals) mean += a;
    mean /= static_cast<double>(finals.size());
    double var = 0.0;
    for (double a : finals) var += (a - mean) * (a - mean);
    var /= static_cast<double>(finals.size());
    std::printf("eval accuracy: %.2f ± %.2f %%\n", 100.0 * mean,
                100.0 * std::sqrt(var));
}

int cmd_train(const TrainArgs& args) {
    TrainConfig cfg = make_config(args);
    ArchPlan plan = parse_arch(args.arch);
    for (const auto& w : plan.warnings) std::cerr << "warning: " << w << "\n";

    std::filesystem::create_directories(args.out_dir);
    const std::string csv_path = (std::filesystem::path(args.out_dir) / "metrics.csv").string();
    const std::string params_path =
        (std::filesystem::path(args.out_dir) / "params.txt").string();

    if (args.task == "vertex") {
        GraphSample base = load_vertex_task(args.data);
        const int classes =
            args.classes > 0 ? args.classes : infer_class_count({base}, true);
        InputSpec spec = infer_input_spec({base}, TaskKind::vertex_classification, classes);

        std::vector<Metrics> fold_metrics;
        std::vector<double> finals;
        if (cfg.folds <= 1) {
            // Single run on the mask stored in the file.
            TrainResult res = train(plan, {base}, {}, spec, cfg);
            finals.push_back(res.metrics.epochs.back().eval_acc);
            fold_metrics.push_back(std::move(res.metrics));
            save_params(res.network, params_path);
        } else {
            // Cross-validate over vertices: each fold masks out its test set.
            const int n = base.vertices.rows();
            auto folds = kfold_split(n, cfg.folds, cfg.seed);
            Network last;
            for (std::size_t f = 0; f < folds.size(); ++f) {
                GraphSample fold_sample = base;
                std::fill(fold_sample.label_mask.begin(), fold_sample.label_mask.end(),
                          static_cast<std::uint8_t>(1));
                for (int idx : folds[f].second) fold_sample.label_mask[idx] = 0;
                TrainConfig fold_cfg = cfg;
                fold_cfg.seed = mix_seed(cfg.seed, 0xF01D + f);
                TrainResult res = train(plan, {fold_sample}, {}, spec, fold_cfg);
                finals.push_back(res.metrics.epochs.back().eval_acc);
                fold_metrics.push_back(std::move(res.metrics));
                if (f + 1 == folds.size()) last = std::move(res.network);
            }
            save_params(last, params_path);
        }
        write_csv(csv_path, fold_metrics);
        print_summary(finals);
        return 0;
    }

    std::vector<GraphSample> data = load_graph_dataset(args.data);
    const int classes = args.classes > 0 ? args.classes : infer_class_count(data, false);
    InputSpec spec = infer_input_spec(data, TaskKind::graph_classification, classes);

    KFoldResult res = run_kfold(plan, data, spec, cfg);
    write_csv(csv_path, res.folds);
    save_params(res.final_network, params_path);
    std::printf("eval accuracy: %.2f ± %.2f %%\n", 100.0 * res.mean_eval_acc,
                100.0 * res.std_eval_acc);
    return 0;
}

int cmd_eval(const std::string& arch, const std::string& data_path,
             const std::string& task, const std::string& params_path, int classes_flag) {
    ArchPlan plan = parse_arch(arch);
    if (task == "vertex") {
        GraphSample base = load_vertex_task(data_path);
        const int classes =
            classes_flag > 0 ? classes_flag : infer_class_count({base}, true);
        InputSpec spec = infer_input_spec({base}, TaskKind::vertex_classification, classes);
        Network net = instantiate(plan, spec, 0);
        load_params(net, params_path);
        std::printf("accuracy: %s\n", fmt(evaluate_vertex(net, base)).c_str());
        return 0;
    }
    std::vector<GraphSample> data = load_graph_dataset(data_path);
    const int classes = classes_flag > 0 ? classes_flag : infer_class_count(data, false);
    InputSpec spec = infer_input_spec(data, TaskKind::graph_classification, classes);
    Network net = instantiate(plan, spec, 0);
    load_params(net, params_path);
    std::printf("accuracy: %s\n", fmt(evaluate(net, data)).c_str());
    return 0;
}

int cmd_gradcheck(const std::string& arch, int n, int c, int l, int classes,
                  std::uint64_t seed) {
    Rng rng(seed);
    GraphSample sample;
    std::vector<EdgeSpec> edges;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j || rng.uniform(0.0, 1.0) >= 0.4) continue;
            const int slice = l > 1 ? rng.uniform_int(1, l - 1) : 1;
            if (slice < l) edges.push_back({slice, i, j, rng.uniform(-1.0, 1.0)});
        }
    sample.adjacency = adjacency_from_edges(n, edges, l);
    sample.vertices = Matrix(n, c);
    for (auto& v : sample.vertices.values()) v = rng.uniform(-1.0, 1.0);
    sample.label = rng.uniform_int(0, classes - 1);

    InputSpec spec;
    spec.vertex_features = c;
    spec.edge_slices = l;
    spec.classes = classes;
    Network net = instantiate(parse_arch(arch), spec, mix_seed(seed, 0xC0DE));

    bool ok = true;
    for (const auto& rep : grad_check(net, {sample})) {
        std::printf("%-32s max rel err %.3e\n", rep.block.c_str(), rep.max_rel_err);
        if (!(rep.max_rel_err < 1e-5)) ok = false;
    }
    std::printf("%s\n", ok ? "OK" : "FAILED");
    return ok ? 0 : 1;
}

int cmd_convert_image(const std::string& in_path, const std::string& mode_name,
                      const std::string& out_path) {
    const ImageMode mode =
        mode_name == "directional" ? ImageMode::directional : ImageMode::isotropic;
    RawImageDataset raw = load_raw_images(in_path);
    std::vector<GraphSample> samples;
    samples.reserve(raw.records.size());
    for (std::size_t k = 0; k < raw.records.size(); ++k) {
        GraphSample s = image_to_graph(record_to_image(raw, static_cast<int>(k)), mode);
        s.label = raw.records[k].label;
        samples.push_back(std::move(s));
    }
    save_graph_dataset(samples, out_path);
    std::printf("wrote %zu graphs to %s\n", samples.size(), out_path.c_str());
    return 0;
}

int cmd_gen_synth(const std::string& kind, int count, std::uint64_t seed,
                  const std::string& out_path, int height, int width) {
    if (kind == "motif") {
        save_graph_dataset(gen_motif_dataset(count, seed), out_path);
    } else {
        save_raw_images(gen_grid_dataset(count, height, width, seed), out_path);
    }
    std::printf("wrote %d %s samples to %s\n", count, kind.c_str(), out_path.c_str());
    return 0;
}

int cmd_parse_arch(const std::string& arch, int c, int l, int classes, int fixed_n) {
    ArchPlan plan = parse_arch(arch);
    for (const auto& w : plan.warnings) std::cerr << "warning: " << w << "\n";
    std::printf("%zu layers\n", plan.layers.size());
    try {
        InputSpec spec;
        spec.vertex_features = c;
        spec.edge_slices = l;
        spec.classes = classes;
        spec.fixed_vertices = fixed_n;
        Network net = instantiate(plan, spec, 0);
        for (const auto& line : describe_plan_layers(plan, net))
            std::printf("  %s\n", line.c_str());
        std::printf("total parameters (with heads): %ld\n", net.param_count());
    } catch (const Error& e) {
        std::printf("  (not instantiable with C=%d, L=%d: %s)\n", c, l, e.what());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spatial graph convolutional networks over adjacency tensors"};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "k-fold training on a dataset");
    train_cmd->add_option("--arch", train_args.arch, "architecture string")->required();
    train_cmd->add_option("--data", train_args.data, "dataset path")->required();
    train_cmd->add_option("--task", train_args.task, "graph|vertex")
        ->check(CLI::IsMember({"graph", "vertex"}));
    train_cmd->add_option("--folds", train_args.folds, "cross-validation folds");
    train_cmd->add_option("--epochs", train_args.epochs, "training epochs");
    train_cmd->add_option("--batch", train_args.batch, "mini-batch size");
    train_cmd->add_option("--opt", train_args.opt, "sgd|adam")
        ->check(CLI::IsMember({"sgd", "adam"}));
    train_cmd->add_option("--lr", train_args.lr, "learning rate");
    train_cmd->add_option("--momentum", train_args.momentum, "sgd momentum");
    train_cmd->add_option("--classes", train_args.classes, "class count override");
    train_cmd->add_option("--seed", train_args.seed, "rng seed");
    train_cmd->add_flag("--deterministic", train_args.deterministic,
                        "serial, bit-reproducible execution");
    train_cmd->add_option("--out", train_args.out_dir, "output directory")->required();

    std::string eval_arch, eval_data, eval_task = "graph", eval_params;
    int eval_classes = 0;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate saved parameters");
    eval_cmd->add_option("--arch", eval_arch, "architecture string")->required();
    eval_cmd->add_option("--data", eval_data, "dataset path")->required();
    eval_cmd->add_option("--task", eval_task, "graph|vertex")
        ->check(CLI::IsMember({"graph", "vertex"}));
    eval_cmd->add_option("--params", eval_params, "params.txt from train --out")->required();
    eval_cmd->add_option("--classes", eval_classes, "class count override");

    std::string gc_arch;
    int gc_n = 6, gc_c = 3, gc_l = 2, gc_classes = 3;
    std::uint64_t gc_seed = 0;
    auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient check");
    gc_cmd->add_option("--arch", gc_arch, "architecture string")->required();
    gc_cmd->add_option("--n", gc_n, "vertex count");
    gc_cmd->add_option("--c", gc_c, "vertex features");
    gc_cmd->add_option("--l", gc_l, "adjacency slices (incl. identity)");
    gc_cmd->add_option("--classes", gc_classes, "class count");
    gc_cmd->add_option("--seed", gc_seed, "rng seed");

    std::string ci_in, ci_mode = "isotropic", ci_out;
    auto* ci_cmd = app.add_subcommand("convert-image", "raw images to a graph dataset");
    ci_cmd->add_option("--in", ci_in, "raw image file")->required();
    ci_cmd->add_option("--mode", ci_mode, "isotropic|directional")
        ->check(CLI::IsMember({"isotropic", "directional"}));
    ci_cmd->add_option("--out", ci_out, "output graph dataset")->required();

    std::string gs_kind, gs_out;
    int gs_count = 100, gs_height = 8, gs_width = 8;
    std::uint64_t gs_seed = 0;
    auto* gs_cmd = app.add_subcommand("gen-synth", "generate synthetic datasets");
    gs_cmd->add_option("--kind", gs_kind, "motif|grid")
        ->required()
        ->check(CLI::IsMember({"motif", "grid"}));
    gs_cmd->add_option("--count", gs_count, "sample count");
    gs_cmd->add_option("--seed", gs_seed, "rng seed");
    gs_cmd->add_option("--height", gs_height, "image height (grid)");
    gs_cmd->add_option("--width", gs_width, "image width (grid)");
    gs_cmd->add_option("--out", gs_out, "output path")->required();

    std::string pa_arch;
    int pa_c = 1, pa_l = 2, pa_classes = 2, pa_n = 0;
    auto* pa_cmd = app.add_subcommand("parse-arch", "expand an architecture string");
    pa_cmd->add_option("--arch", pa_arch, "architecture string")->required();
    pa_cmd->add_option("--c", pa_c, "vertex features for parameter counts");
    pa_cmd->add_option("--l", pa_l, "adjacency slices for parameter counts");
    pa_cmd->add_option("--classes", pa_classes, "class count");
    pa_cmd->add_option("--n", pa_n, "fixed vertex count (0 = variable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train_args);
        if (eval_cmd->parsed())
            return cmd_eval(eval_arch, eval_data, eval_task, eval_params, eval_classes);
        if (gc_cmd->parsed())
            return cmd_gradcheck(gc_arch, gc_n, gc_c, gc_l, gc_classes, gc_seed);
        if (ci_cmd->parsed()) return cmd_convert_image(ci_in, ci_mode, ci_out);
        if (gs_cmd->parsed())
            return cmd_gen_synth(gs_kind, gs_count, gs_seed, gs_out, gs_height, gs_width);
        if (pa_cmd->parsed()) return cmd_parse_arch(pa_arch, pa_c, pa_l, pa_classes, pa_n);
    } catch (const NonFiniteLoss& e) {
        std::cerr << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    return 2;
}
