#pragma once

#include <string>
#include <vector>

namespace gcnn {

// One entry of a parsed architecture string.
//   nF      -> gconv(n)        graph convolution, n filters
//   0hopN   -> zero_hop(n)     identity-slice-only convolution
//   PoolN   -> embed_pool(n)   graph embed pooling to n vertices
//   P/2     -> grid_max_pool   2x2/stride-2 max pooling (image graphs only)
//   FCn     -> fc(n)           fully connected, n outputs (bare FC = FC128)
//   GFCn    -> gfc(n)          embed-pool to one vertex, then FC(n)
//   DropR   -> dropout(R)
struct LayerSpec {
    enum class Kind { gconv, zero_hop, embed_pool, grid_max_pool, fc, gfc, dropout };

    Kind kind;
    int count = 0;      // filters / pool target / fc outputs
    double rate = 0.0;  // dropout only

    bool operator==(const LayerSpec&) const = default;
};

LayerSpec gconv_spec(int filters);
LayerSpec zero_hop_spec(int filters);
LayerSpec embed_pool_spec(int target);
LayerSpec grid_max_pool_spec();
LayerSpec fc_spec(int outputs);
LayerSpec gfc_spec(int outputs);
LayerSpec dropout_spec(double rate);

struct ArchPlan {
    std::vector<LayerSpec> layers;
    // Non-fatal findings, e.g. embed-pool targets that do not decrease.
    std::vector<std::string> warnings;

    bool operator==(const ArchPlan& other) const { return layers == other.layers; }
};

// Grammar (ASCII, whitespace forbidden, keywords case-insensitive):
//   PLAN   := ITEM ('-' ITEM)*
//   ITEM   := REPEAT | LAYER
//   REPEAT := INT ('x'|'×') ( LAYER | '(' PLAN ')' )
//   LAYER  := INT 'F' | 'P/2' | 'Pool' INT | 'FC' INT? | 'GFC' INT
//           | '0hop' INT | 'Drop' FLOAT
// A bare 'FC' takes the default width 128. Errors carry byte offsets.
ArchPlan parse_arch(const std::string& text);

// Canonical string: repeats expanded, never re-compressed.
// parse_arch(render_arch(p)) == p for every valid plan.
std::string render_arch(const ArchPlan& plan);

}  // namespace gcnn
