#ifndef NCP_NETMODEL_HPP
#define NCP_NETMODEL_HPP

#include <array>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ncp/coding.hpp"
#include "ncp/common.hpp"

namespace ncp {

// Analytic cost model of the multi-resolution network family. Conventions,
// fixed here so absolute numbers are internally consistent:
//   * FLOPs are multiply-accumulates, counted once per MAC.
//   * A residual unit is a basic block: 3x3 conv (Cin->Cout), 3x3 conv
//     (Cout->Cout), plus a 1x1 skip projection when Cin != Cout or stride != 1.
//   * Normalization, activations, element-wise additions, resizing and
//     pooling are free; biases are not counted.
//   * Branch j runs at 1/(4*2^(j-1)) of the input resolution.

struct LayerCost {
    std::string label;
    int stage;   // 0 = stem, 1..4 = stages, 5 = head
    int branch;  // output branch, 0 when not applicable
    double macs;
    double params;
    bool is_conv;  // false only for the classification head's linear layer
};

struct CostReport {
    double total_macs = 0.0;
    double total_params = 0.0;
    std::vector<LayerCost> per_layer;

    double gflops() const { return total_macs / 1e9; }
    double params_m() const { return total_params / 1e6; }
};

inline void write_per_layer_csv(const CostReport& report, std::ostream& os) {
    os << "layer,stage,branch,flops_mac,params\n";
    for (const LayerCost& l : report.per_layer)
        os << l.label << ',' << l.stage << ',' << l.branch << ',' << l.macs << ',' << l.params
           << '\n';
}

namespace detail {

struct CostBuilder {
    std::vector<LayerCost>& layers;

    void conv(const std::string& label, int stage, int branch, int k, int cin, int cout,
              double px) {
        const double weights = static_cast<double>(k) * k * cin * cout;
        layers.push_back({label, stage, branch, weights * px, weights, true});
    }

    // One residual unit producing cout channels over px output pixels.
    void unit(const std::string& label, int stage, int branch, int cin, int cout, double px,
              int stride) {
        conv(label + ".conv_a", stage, branch, 3, cin, cout, px);
        conv(label + ".conv_b", stage, branch, 3, cout, cout, px);
        if (cin != cout || stride != 1) conv(label + ".proj", stage, branch, 1, cin, cout, px);
    }
};

} // namespace detail

/// Per-layer FLOPs/params of a decoded architecture.
inline CostReport cost(const NetworkSpec& spec) {
    validate(spec);
    const int H = spec.input.height;
    const int W = spec.input.width;
    if (H % 32 != 0 || W % 32 != 0)
        throw ValidationError("input height and width must be divisible by 32, got " +
                              std::to_string(H) + "x" + std::to_string(W));

    CostReport report;
    detail::CostBuilder b{report.per_layer};

    // Pixel counts per branch resolution (branch j at 1/(4*2^(j-1))).
    std::array<double, 5> px{};  // px[1..4]
    for (int j = 1; j <= 4; ++j) {
        const int div = 4 << (j - 1);
        px[static_cast<std::size_t>(j)] = static_cast<double>(H / div) * (W / div);
    }

    b.conv("stem.conv1", 0, 0, 3, spec.input.in_channels, spec.stem1,
           static_cast<double>(H / 2) * (W / 2));
    b.conv("stem.conv2", 0, 0, 3, spec.stem1, spec.stem2, px[1]);

    std::vector<int> prev_channels = {spec.stem2};
    for (int s = 1; s <= 4; ++s) {
        const StageSpec& st = spec.stages[static_cast<std::size_t>(s - 1)];
        const std::vector<int>& cs = st.channels;
        for (int t = 1; t <= st.blocks; ++t) {
            const std::string blk = "s" + std::to_string(s) + ".b" + std::to_string(t);
            // Fusion module. A single-branch stage fuses nothing (identity);
            // block 1 of stages 2..4 is the transition from the previous
            // stage's branches and creates branch s.
            if (s > 1) {
                const std::vector<int>& in_ch = (t == 1) ? prev_channels : cs;
                const int n_in = static_cast<int>(in_ch.size());
                for (int j = 1; j <= s; ++j) {
                    const int cout = cs[static_cast<std::size_t>(j - 1)];
                    const std::string fuse = blk + ".fuse.br" + std::to_string(j);
                    for (int m = j - 1; m <= j + 1; ++m) {
                        if (m < 1 || m > n_in) continue;
                        const int cin = in_ch[static_cast<std::size_t>(m - 1)];
                        const std::string path = fuse + ".from" + std::to_string(m);
                        if (m == j - 1)
                            b.unit(path, s, j, cin, cout, px[static_cast<std::size_t>(j)], 2);
                        else if (m == j)
                            b.unit(path, s, j, cin, cout, px[static_cast<std::size_t>(j)], 1);
                        else  // coarser neighbour: unit at its own resolution, then free 2x upsample
                            b.unit(path, s, j, cin, cout, px[static_cast<std::size_t>(m)], 1);
                    }
                }
            }
            // Parallel module: a run of units per branch at constant width.
            for (int j = 1; j <= s; ++j) {
                const int c = cs[static_cast<std::size_t>(j - 1)];
                for (int u = 1; u <= st.units[static_cast<std::size_t>(j - 1)]; ++u) {
                    const int cin = (s == 1 && t == 1 && u == 1) ? spec.stem2 : c;
                    b.unit(blk + ".par.br" + std::to_string(j) + ".u" + std::to_string(u), s, j,
                           cin, c, px[static_cast<std::size_t>(j)], 1);
                }
            }
        }
        prev_channels = cs;
    }

    // Head: branches resized (free) and concatenated, then fused by o1.
    int concat = 0;
    for (int c : spec.stages[3].channels) concat += c;
    if (spec.head == Head::Classification) {
        b.conv("head.fuse", 5, 0, 1, concat, spec.output_width, px[4]);
        const double w = static_cast<double>(spec.output_width) * spec.input.num_classes;
        report.per_layer.push_back({"head.linear", 5, 0, w, w, false});
    } else {
        b.conv("head.fuse", 5, 0, 1, concat, spec.output_width, px[1]);
        b.conv("head.classify", 5, 0, 1, spec.output_width, spec.input.num_classes, px[1]);
    }

    for (const LayerCost& l : report.per_layer) {
        report.total_macs += l.macs;
        report.total_params += l.params;
    }
    return report;
}

/// The lookup table T: rounded code -> GFLOPs, memoized. Pure apart from the
/// cache, safe for concurrent lookups.
class FlopsTable {
public:
    explicit FlopsTable(Head head = Head::Segmentation, InputGeometry input = {})
        : head_(head), input_(input) {}

    Head head() const { return head_; }
    const InputGeometry& input() const { return input_; }

    double lookup(const ArchCode& code) const { return lookup_raw(round_code(code)); }

    double lookup_raw(const std::array<int, kCodeDims>& raw) const {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = memo_.find(raw);
            if (it != memo_.end()) return it->second;
        }
        ArchCode code;
        for (int i = 0; i < kCodeDims; ++i)
            code[i] = normalize_dim(i, static_cast<double>(raw[static_cast<std::size_t>(i)]));
        const double gflops = cost(decode(code, head_, input_)).gflops();
        std::lock_guard<std::mutex> lock(mutex_);
        memo_.emplace(raw, gflops);
        return gflops;
    }

    /// FLOPs increase when dimension `dim` is raised by one grid notch
    /// (+8 raw for channels, +1 for counts); empty when the raise would
    /// leave the grid.
    std::optional<double> flops_delta(const ArchCode& code, int dim) const {
        check_dim_index(dim);
        std::array<int, kCodeDims> raw = round_code(code);
        const DimBounds bnd = bounds(dim);
        const int step = static_cast<int>(bnd.unit);
        if (raw[static_cast<std::size_t>(dim)] + step > static_cast<int>(bnd.max))
            return std::nullopt;
        const double base = lookup_raw(raw);
        raw[static_cast<std::size_t>(dim)] += step;
        return lookup_raw(raw) - base;
    }

private:
    struct RawHash {
        std::size_t operator()(const std::array<int, kCodeDims>& raw) const {
            std::uint64_t h = 0x51ed270b3a4c5b61ULL;
            for (int v : raw) h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(v)));
            return static_cast<std::size_t>(h);
        }
    };

    Head head_;
    InputGeometry input_;
    mutable std::mutex mutex_;
    mutable std::unordered_map<std::array<int, kCodeDims>, double, RawHash> memo_;
};

} // namespace ncp

#endif // NCP_NETMODEL_HPP
