#include "gcnn/arch.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>

#include "gcnn/errors.hpp"

namespace gcnn {

LayerSpec gconv_spec(int filters) { return {LayerSpec::Kind::gconv, filters, 0.0}; }
LayerSpec zero_hop_spec(int filters) { return {LayerSpec::Kind::zero_hop, filters, 0.0}; }
LayerSpec embed_pool_spec(int target) { return {LayerSpec::Kind::embed_pool, target, 0.0}; }
LayerSpec grid_max_pool_spec() { return {LayerSpec::Kind::grid_max_pool, 0, 0.0}; }
LayerSpec fc_spec(int outputs) { return {LayerSpec::Kind::fc, outputs, 0.0}; }
LayerSpec gfc_spec(int outputs) { return {LayerSpec::Kind::gfc, outputs, 0.0}; }
LayerSpec dropout_spec(double rate) { return {LayerSpec::Kind::dropout, 0, rate}; }

namespace {

constexpr int kDefaultFcWidth = 128;  // "FC is a fully connected layer with 128 hidden vertices"

class Parser {
public:
    explicit Parser(const std::string& text) : text_(text) {}

    ArchPlan parse() {
        if (text_.empty()) throw EmptyPlan("empty architecture string");
        ArchPlan plan;
        parse_plan(plan.layers);
        if (pos_ != text_.size()) fail("unexpected trailing input");
        collect_warnings(plan);
        return plan;
    }

private:
    const std::string& text_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& expected) const {
        throw SyntaxError(pos_, expected);
    }

    bool done() const { return pos_ >= text_.size(); }
    char peek() const { return done() ? '\0' : text_[pos_]; }

    bool at_repeat_marker() const {
        if (done()) return false;
        if (text_[pos_] == 'x' || text_[pos_] == 'X') return true;
        // U+00D7 multiplication sign in UTF-8
        return pos_ + 1 < text_.size() &&
               static_cast<unsigned char>(text_[pos_]) == 0xc3 &&
               static_cast<unsigned char>(text_[pos_ + 1]) == 0x97;
    }

    void consume_repeat_marker() {
        if (text_[pos_] == 'x' || text_[pos_] == 'X') {
            ++pos_;
        } else {
            pos_ += 2;
        }
    }

    bool match_keyword(const char* kw) {
        std::size_t p = pos_;
        for (const char* c = kw; *c; ++c, ++p) {
            if (p >= text_.size() ||
                std::tolower(static_cast<unsigned char>(text_[p])) != *c)
                return false;
        }
        pos_ = p;
        return true;
    }

    int parse_int(const char* what, int min_value) {
        const std::size_t start = pos_;
        if (done() || !std::isdigit(static_cast<unsigned char>(peek())))
            fail(std::string("expected ") + what);
        long v = 0;
        while (!done() && std::isdigit(static_cast<unsigned char>(peek()))) {
            v = v * 10 + (text_[pos_] - '0');
            if (v > 1'000'000'000L) {
                pos_ = start;
                fail(std::string(what) + " too large");
            }
            ++pos_;
        }
        if (v < min_value) {
            pos_ = start;
            fail(std::string(what) + " must be at least " + std::to_string(min_value));
        }
        return static_cast<int>(v);
    }

    double parse_float() {
        const std::size_t start = pos_;
        while (!done() && (std::isdigit(static_cast<unsigned char>(peek())) ||
                           peek() == '.'))
            ++pos_;
        if (!done() && (peek() == 'e' || peek() == 'E')) {
            std::size_t p = pos_ + 1;
            if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
            if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
                pos_ = p;
                while (!done() && std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
            }
        }
        if (pos_ == start) fail("expected a number");
        double value = 0.0;
        const auto res = std::from_chars(text_.data() + start, text_.data() + pos_, value);
        if (res.ec != std::errc{} || res.ptr != text_.data() + pos_) {
            pos_ = start;
            fail("malformed number");
        }
        return value;
    }

    void parse_plan(std::vector<LayerSpec>& out) {
        parse_item(out);
        while (!done() && peek() == '-') {
            ++pos_;
            parse_item(out);
        }
    }

    void parse_item(std::vector<LayerSpec>& out) {
        if (done()) fail("expected a layer");
        if (std::isdigit(static_cast<unsigned char>(peek()))) {
            const std::size_t start = pos_;
            const int n = parse_int("integer", 0);
            if (at_repeat_marker()) {
                if (n < 1) {
                    pos_ = start;
                    fail("repeat count must be at least 1");
                }
                consume_repeat_marker();
                std::vector<LayerSpec> group;
                if (peek() == '(') {
                    ++pos_;
                    parse_plan(group);
                    if (peek() != ')') fail("expected ')'");
                    ++pos_;
                } else {
                    parse_layer(group);
                }
                for (int k = 0; k < n; ++k)
                    out.insert(out.end(), group.begin(), group.end());
                return;
            }
            // Not a repeat: the integer starts a layer token.
            finish_int_layer(out, n, start);
            return;
        }
        parse_layer(out);
    }

    // A layer that begins with an integer: nF or 0hopN.
    void finish_int_layer(std::vector<LayerSpec>& out, int n, std::size_t int_start) {
        if (peek() == 'F' || peek() == 'f') {
            ++pos_;
            if (n < 1) {
                pos_ = int_start;
                fail("filter count must be at least 1");
            }
            out.push_back(gconv_spec(n));
            return;
        }
        if (n == 0 && match_keyword("hop")) {
            out.push_back(zero_hop_spec(parse_int("0-hop filter count", 1)));
            return;
        }
        fail("expected 'F', a repeat marker, or 'hop' after integer");
    }

    void parse_layer(std::vector<LayerSpec>& out) {
        if (std::isdigit(static_cast<unsigned char>(peek()))) {
            const std::size_t start = pos_;
            const int n = parse_int("integer", 0);
            finish_int_layer(out, n, start);
            return;
        }
        const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(peek())));
        if (c == 'p') {
            if (match_keyword("p/2")) {
                out.push_back(grid_max_pool_spec());
                return;
            }
            if (match_keyword("pool")) {
                out.push_back(embed_pool_spec(parse_int("pool target", 1)));
                return;
            }
            fail("expected 'P/2' or 'Pool'");
        }
        if (c == 'g') {
            if (match_keyword("gfc")) {
                out.push_back(gfc_spec(parse_int("GFC output count", 1)));
                return;
            }
            fail("expected 'GFC'");
        }
        if (c == 'f') {
            if (match_keyword("fc")) {
                if (!done() && std::isdigit(static_cast<unsigned char>(peek())))
                    out.push_back(fc_spec(parse_int("FC output count", 1)));
                else
                    out.push_back(fc_spec(kDefaultFcWidth));
                return;
            }
            fail("expected 'FC'");
        }
        if (c == 'd') {
            if (match_keyword("drop")) {
                const std::size_t start = pos_;
                const double rate = parse_float();
                if (rate < 0.0 || rate >= 1.0) {
                    pos_ = start;
                    fail("dropout rate must be in [0,1)");
                }
                out.push_back(dropout_spec(rate));
                return;
            }
            fail("expected 'Drop'");
        }
        fail("expected a layer");
    }

    static void collect_warnings(ArchPlan& plan) {
        int last_target = 0;
        bool seen_pool = false;
        for (const auto& layer : plan.layers) {
            if (layer.kind != LayerSpec::Kind::embed_pool) continue;
            if (seen_pool && layer.count >= last_target)
                plan.warnings.push_back(
                    "embed pool target " + std::to_string(layer.count) +
                    " does not decrease from " + std::to_string(last_target));
            seen_pool = true;
            last_target = layer.count;
        }
    }
};

std::string format_rate(double rate) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), rate);
    return std::string(buf, res.ptr);
}

}  // namespace

ArchPlan parse_arch(const std::string& text) { return Parser(text).parse(); }

std::string render_arch(const ArchPlan& plan) {
    if (plan.layers.empty()) throw EmptyPlan("cannot render an empty plan");
    std::string out;
    bool first = true;
    for (const auto& layer : plan.layers) {
        if (!first) out += '-';
        first = false;
        switch (layer.kind) {
            case LayerSpec::Kind::gconv:
                out += std::to_string(layer.count) + "F";
                break;
            case LayerSpec::Kind::zero_hop:
                out += "0hop" + std::to_string(layer.count);
                break;
            case LayerSpec::Kind::embed_pool:
                out += "Pool" + std::to_string(layer.count);
                break;
            case LayerSpec::Kind::grid_max_pool:
                out += "P/2";
                break;
            case LayerSpec::Kind::fc:
                out += "FC" + std::to_string(layer.count);
                break;
            case LayerSpec::Kind::gfc:
                out += "GFC" + std::to_string(layer.count);
                break;
            case LayerSpec::Kind::dropout:
                out += "Drop" + format_rate(layer.rate);
                break;
        }
    }
    return out;
}

}  // namespace gcnn
