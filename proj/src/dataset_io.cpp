#include "gcnn/dataset_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gcnn/rng.hpp"

namespace gcnn {

namespace {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct LineReader {
    explicit LineReader(std::istream& s) : in(s) {}

    std::istream& in;
    int line_no = 0;
    std::string line;
    std::optional<GridMeta> pending_grid;

    // Next content line, skipping blanks and comments. "#!grid" comments are
    // remembered and attached to the next sample header.
    bool next() {
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            if (line[0] == '#') {
                parse_grid_comment();
                continue;
            }
            return true;
        }
        return false;
    }

    void parse_grid_comment() {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag != "#!grid") return;
        GridMeta meta;
        std::string mode;
        if (!(ss >> meta.shape.height >> meta.shape.width >> meta.shape.channels >> mode))
            throw ParseError(line_no, "malformed #!grid comment");
        if (mode == "isotropic")
            meta.mode = ImageMode::isotropic;
        else if (mode == "directional")
            meta.mode = ImageMode::directional;
        else
            throw ParseError(line_no, "unknown grid mode '" + mode + "'");
        pending_grid = meta;
    }
};

std::vector<GraphSample> parse_samples(const std::string& path, bool allow_vertex_labels) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "' for reading");

    std::vector<GraphSample> samples;
    LineReader reader(in);
    while (reader.next()) {
        std::istringstream header(reader.line);
        std::string tag;
        int n = 0, c = 0, l = 0, label = 0;
        header >> tag;
        if (tag != "graph")
            throw ParseError(reader.line_no, "expected 'graph N C L label', got '" +
                                                 reader.line + "'");
        if (!(header >> n >> c >> l >> label))
            throw ParseError(reader.line_no, "malformed graph header");
        if (n < 1 || c < 1 || l < 1)
            throw ParseError(reader.line_no, "graph dimensions must be positive");
        const int header_line = reader.line_no;

        GraphSample sample;
        sample.label = label;
        sample.grid = reader.pending_grid;
        reader.pending_grid.reset();

        sample.vertices = Matrix(n, c);
        for (int r = 0; r < n; ++r) {
            if (!reader.next())
                throw ParseError(reader.line_no, "unexpected end of file in vertex rows");
            std::istringstream row(reader.line);
            for (int k = 0; k < c; ++k)
                if (!(row >> sample.vertices(r, k)))
                    throw ParseError(reader.line_no, "expected " + std::to_string(c) +
                                                         " vertex features");
            std::string extra;
            if (row >> extra)
                throw ParseError(reader.line_no, "trailing data after vertex features");
        }

        std::vector<EdgeSpec> edges;
        bool saw_end = false;
        int label_rows = 0;
        while (reader.next()) {
            if (reader.line == "end") {
                saw_end = true;
                break;
            }
            std::istringstream row(reader.line);
            std::string kind;
            row >> kind;
            if (kind == "e") {
                EdgeSpec e{};
                if (!(row >> e.slice >> e.i >> e.j >> e.w))
                    throw ParseError(reader.line_no, "malformed edge line");
                if (e.slice == 0)
                    throw ParseError(reader.line_no, "slice 0 is reserved for the identity");
                if (e.slice < 0 || e.slice >= l)
                    throw ParseError(reader.line_no,
                                     "edge slice " + std::to_string(e.slice) +
                                         " outside 1.." + std::to_string(l - 1));
                if (label_rows > 0)
                    throw ParseError(reader.line_no, "edge lines must precede label lines");
                edges.push_back(e);
            } else if (kind == "y") {
                if (!allow_vertex_labels)
                    throw ParseError(reader.line_no,
                                     "vertex label lines are not valid in a graph dataset");
                int cls = 0, mask = 0;
                if (!(row >> cls >> mask))
                    throw ParseError(reader.line_no, "malformed vertex label line");
                if (mask != 0 && mask != 1)
                    throw ParseError(reader.line_no, "mask bit must be 0 or 1");
                if (label_rows >= n)
                    throw ParseError(reader.line_no, "more label lines than vertices");
                sample.vertex_labels.push_back(cls);
                sample.label_mask.push_back(static_cast<std::uint8_t>(mask));
                ++label_rows;
            } else {
                throw ParseError(reader.line_no, "expected 'e', 'y' or 'end', got '" +
                                                     kind + "'");
            }
        }
        if (!saw_end)
            throw ParseError(reader.line_no, "missing 'end' terminator");
        if (label_rows != 0 && label_rows != n)
            throw ParseError(reader.line_no, "expected " + std::to_string(n) +
                                                 " label lines, got " +
                                                 std::to_string(label_rows));

        try {
            sample.adjacency = adjacency_from_edges(n, edges, l);
        } catch (const Error& err) {
            throw InvariantViolation(header_line, err.what());
        }
        auto violations = validate_graph(sample);
        if (!violations.empty())
            throw InvariantViolation(header_line,
                                     std::string(violation_name(violations[0].kind)) +
                                         ": " + violations[0].detail);
        samples.push_back(std::move(sample));
    }
    return samples;
}

void write_sample(std::ostream& out, const GraphSample& sample) {
    if (sample.grid) {
        out << "#!grid " << sample.grid->shape.height << ' ' << sample.grid->shape.width
            << ' ' << sample.grid->shape.channels << ' '
            << (sample.grid->mode == ImageMode::isotropic ? "isotropic" : "directional")
            << '\n';
    }
    const int n = sample.vertices.rows();
    const int c = sample.vertices.cols();
    const int l = sample.adjacency.slice_count();
    out << "graph " << n << ' ' << c << ' ' << l << ' '
        << (sample.is_vertex_task() ? 0 : sample.label) << '\n';
    for (int r = 0; r < n; ++r) {
        for (int k = 0; k < c; ++k) {
            if (k) out << ' ';
            out << format_double(sample.vertices(r, k));
        }
        out << '\n';
    }
    // Slices are kept sorted by (i, j), so this emits the canonical
    // (l, i, j) order; the identity slice is implicit.
    for (int s = 1; s < l; ++s)
        for (const auto& e : sample.adjacency.slices[s].entries)
            out << "e " << s << ' ' << e.i << ' ' << e.j << ' ' << format_double(e.w)
                << '\n';
    if (sample.is_vertex_task())
        for (int r = 0; r < n; ++r)
            out << "y " << sample.vertex_labels[r] << ' '
                << static_cast<int>(sample.label_mask[r]) << '\n';
    out << "end\n";
}

}  // namespace

std::vector<GraphSample> load_graph_dataset(const std::string& path) {
    return parse_samples(path, /*allow_vertex_labels=*/false);
}

void save_graph_dataset(const std::vector<GraphSample>& samples, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    for (const auto& s : samples) write_sample(out, s);
    if (!out) throw IoError("write failed for '" + path + "'");
}

GraphSample load_vertex_task(const std::string& path) {
    auto samples = parse_samples(path, /*allow_vertex_labels=*/true);
    if (samples.size() != 1)
        throw ParseError(0, "vertex task file must hold exactly one sample, found " +
                                std::to_string(samples.size()));
    if (!samples[0].is_vertex_task())
        throw ParseError(0, "vertex task file is missing per-vertex label lines");
    samples[0].label = -1;
    return samples[0];
}

void save_vertex_task(const GraphSample& sample, const std::string& path) {
    if (!sample.is_vertex_task())
        throw ShapeMismatch("sample has no per-vertex labels to save");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_sample(out, sample);
    if (!out) throw IoError("write failed for '" + path + "'");
}

namespace {

std::uint32_t read_u32(std::istream& in, const std::string& path) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char*>(buf), 4))
        throw IoError("truncated header in '" + path + "'");
    return static_cast<std::uint32_t>(buf[0]) | (static_cast<std::uint32_t>(buf[1]) << 8) |
           (static_cast<std::uint32_t>(buf[2]) << 16) |
           (static_cast<std::uint32_t>(buf[3]) << 24);
}

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v & 0xff),
                            static_cast<unsigned char>((v >> 8) & 0xff),
                            static_cast<unsigned char>((v >> 16) & 0xff),
                            static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

}  // namespace

RawImageDataset load_raw_images(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");

    RawImageDataset ds;
    const std::uint32_t count = read_u32(in, path);
    ds.height = static_cast<int>(read_u32(in, path));
    ds.width = static_cast<int>(read_u32(in, path));
    ds.channels = static_cast<int>(read_u32(in, path));
    if (ds.height < 1 || ds.width < 1 || ds.channels < 1)
        throw IoError("invalid image dimensions in '" + path + "'");

    const std::size_t pixel_count =
        static_cast<std::size_t>(ds.height) * ds.width * ds.channels;
    ds.records.resize(count);
    for (auto& rec : ds.records) {
        char label = 0;
        if (!in.get(label)) throw IoError("truncated record in '" + path + "'");
        rec.label = static_cast<std::uint8_t>(label);
        rec.pixels.resize(pixel_count);
        if (!in.read(reinterpret_cast<char*>(rec.pixels.data()),
                     static_cast<std::streamsize>(pixel_count)))
            throw IoError("truncated pixels in '" + path + "'");
    }
    return ds;
}

void save_raw_images(const RawImageDataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    write_u32(out, static_cast<std::uint32_t>(dataset.records.size()));
    write_u32(out, static_cast<std::uint32_t>(dataset.height));
    write_u32(out, static_cast<std::uint32_t>(dataset.width));
    write_u32(out, static_cast<std::uint32_t>(dataset.channels));
    for (const auto& rec : dataset.records) {
        out.put(static_cast<char>(rec.label));
        out.write(reinterpret_cast<const char*>(rec.pixels.data()),
                  static_cast<std::streamsize>(rec.pixels.size()));
    }
    if (!out) throw IoError("write failed for '" + path + "'");
}

Image record_to_image(const RawImageDataset& dataset, int index) {
    const auto& rec = dataset.records.at(index);
    Image img(dataset.height, dataset.width, dataset.channels);
    for (std::size_t k = 0; k < rec.pixels.size(); ++k)
        img.data[k] = static_cast<double>(rec.pixels[k]) / 255.0;
    return img;
}

bool has_triangle(const AdjacencySlice& slice) {
    Matrix a = densify_slice(slice);
    for (int i = 0; i < a.rows(); ++i)
        for (int j = i + 1; j < a.rows(); ++j) {
            if (a(i, j) == 0.0) continue;
            for (int k = j + 1; k < a.rows(); ++k)
                if (a(j, k) != 0.0 && a(i, k) != 0.0) return true;
        }
    return false;
}

std::vector<GraphSample> gen_motif_dataset(int count, std::uint64_t seed) {
    if (count < 2) throw TooFewSamples("motif dataset needs at least 2 samples");
    Rng rng(seed);
    const int want_positive = count / 2;
    const int want_negative = count - want_positive;
    int have_positive = 0, have_negative = 0;

    std::vector<GraphSample> out;
    out.reserve(count);
    while (static_cast<int>(out.size()) < count) {
        const int n = rng.uniform_int(6, 20);
        std::vector<EdgeSpec> edges;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (rng.uniform(0.0, 1.0) < 0.25) {
                    edges.push_back({1, i, j, 1.0});
                    edges.push_back({1, j, i, 1.0});
                }
        GraphSample sample;
        sample.adjacency = adjacency_from_edges(n, edges, 2);
        sample.vertices = Matrix(n, 4);
        for (auto& v : sample.vertices.values()) v = rng.uniform(0.0, 1.0);
        sample.label = has_triangle(sample.adjacency.slices[1]) ? 1 : 0;

        if (sample.label == 1) {
            if (have_positive >= want_positive) continue;
            ++have_positive;
        } else {
            if (have_negative >= want_negative) continue;
            ++have_negative;
        }
        out.push_back(std::move(sample));
    }
    return out;
}

RawImageDataset gen_grid_dataset(int count, int height, int width, std::uint64_t seed) {
    if (height < 4 || width < 4)
        throw ShapeMismatch("bar images need at least a 4x4 grid");
    Rng rng(seed);
    RawImageDataset ds;
    ds.height = height;
    ds.width = width;
    ds.channels = 1;
    ds.records.resize(count);

    constexpr int kBackground = 64;
    constexpr int kBar = 192;
    constexpr int kNoise = 32;

    for (auto& rec : ds.records) {
        rec.label = static_cast<std::uint8_t>(rng.uniform_int(0, 1));
        rec.pixels.assign(static_cast<std::size_t>(height) * width, 0);
        const int bar_pos = rec.label == 0 ? rng.uniform_int(0, height - 1)
                                           : rng.uniform_int(0, width - 1);
        for (int i = 0; i < height; ++i)
            for (int j = 0; j < width; ++j) {
                const bool on_bar = rec.label == 0 ? (i == bar_pos) : (j == bar_pos);
                int value = (on_bar ? kBar : kBackground) + rng.uniform_int(-kNoise, kNoise);
                value = std::min(255, std::max(0, value));
                rec.pixels[static_cast<std::size_t>(i) * width + j] =
                    static_cast<std::uint8_t>(value);
            }
    }
    return ds;
}

}  // namespace gcnn
