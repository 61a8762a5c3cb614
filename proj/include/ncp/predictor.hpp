#ifndef NCP_PREDICTOR_HPP
#define NCP_PREDICTOR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncp/coding.hpp"
#include "ncp/common.hpp"
#include "ncp/metrics.hpp"

namespace ncp {

// Multi-head regressor from architecture codes to metrics: one shared
// 256-wide rectified layer, then a 128-wide rectified branch plus a scalar
// regression layer per metric. Weights are plain value members; a trained
// predictor is treated as immutable and all inference paths are const.

inline constexpr int kSharedWidth = 256;
inline constexpr int kBranchWidth = 128;

struct LossTerm {
    std::string metric;
    double target = 0.0;
    double weight = 1.0;
};

struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}
    double* row(int r) { return a.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const { return a.data() + static_cast<std::size_t>(r) * cols; }
};

namespace detail {

inline double dot(const double* a, const double* b, int n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    for (; i < n; ++i) s0 += a[i] * b[i];
    return (s0 + s1) + (s2 + s3);
}

inline void axpy(double alpha, const double* x, double* y, int n) {
    for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

} // namespace detail

class Predictor {
public:
    struct Branch {
        Matrix w2;               // kBranchWidth x kSharedWidth
        std::vector<double> b2;  // kBranchWidth
        std::vector<double> w3;  // kBranchWidth
        double b3 = 0.0;
    };

    Predictor() = default;

    /// Fan-in-scaled uniform initialization, deterministic under seed.
    Predictor(int input_dim, std::vector<std::string> metric_names, std::uint64_t seed)
        : input_dim_(input_dim), metric_names_(std::move(metric_names)) {
        if (input_dim_ <= 0) throw ValidationError("predictor input dimension must be positive");
        if (metric_names_.empty()) throw ValidationError("predictor needs at least one metric");
        Rng rng(splitmix64(seed ^ 0x707265646374ULL));
        w1_ = Matrix(kSharedWidth, input_dim_);
        b1_.assign(kSharedWidth, 0.0);
        init_uniform(w1_, rng);
        branches_.resize(metric_names_.size());
        out_scale_.assign(metric_names_.size(), 1.0);
        out_offset_.assign(metric_names_.size(), 0.0);
        for (Branch& br : branches_) {
            br.w2 = Matrix(kBranchWidth, kSharedWidth);
            br.b2.assign(kBranchWidth, 0.0);
            br.w3.assign(kBranchWidth, 0.0);
            init_uniform(br.w2, rng);
            const double bound = 1.0 / std::sqrt(static_cast<double>(kBranchWidth));
            for (double& w : br.w3) w = rng.uniform(-bound, bound);
            br.b3 = 0.0;
        }
    }

    int input_dim() const { return input_dim_; }
    const std::vector<std::string>& metric_names() const { return metric_names_; }

    bool has_metric(std::string_view name) const { return metric_index_or(name) >= 0; }

    int metric_index(std::string_view name) const {
        const int idx = metric_index_or(name);
        if (idx < 0) throw ValidationError("predictor has no head for metric '" + std::string(name) + "'");
        return idx;
    }

    std::vector<double> predict_values(std::span<const double> x) const {
        check_input(x);
        std::vector<double> h1(kSharedWidth);
        forward_shared(x, h1.data());
        std::vector<double> out(branches_.size());
        std::vector<double> h2(kBranchWidth);
        for (std::size_t m = 0; m < branches_.size(); ++m) {
            const Branch& br = branches_[m];
            for (int u = 0; u < kBranchWidth; ++u)
                h2[static_cast<std::size_t>(u)] =
                    std::max(0.0, detail::dot(br.w2.row(u), h1.data(), kSharedWidth) +
                                      br.b2[static_cast<std::size_t>(u)]);
            const double y = detail::dot(br.w3.data(), h2.data(), kBranchWidth) + br.b3;
            out[m] = y * out_scale_[m] + out_offset_[m];
        }
        return out;
    }

    MetricSet predict(std::span<const double> x) const {
        const std::vector<double> vals = predict_values(x);
        MetricSet out;
        for (std::size_t m = 0; m < metric_names_.size(); ++m) out.set(metric_names_[m], vals[m]);
        return out;
    }

    MetricSet predict(const ArchCode& code) const { return predict(std::span(code.values)); }

    /// Gradient of sum_i weight_i * smoothL1(pred_i, target_i) with respect
    /// to the input coordinates, by backpropagation through the frozen
    /// weights. Optionally reports the loss value.
    std::vector<double> input_gradient(std::span<const double> x, const std::vector<LossTerm>& terms,
                                       double* loss_out = nullptr) const {
        check_input(x);
        std::vector<double> pre1(kSharedWidth), h1(kSharedWidth);
        for (int u = 0; u < kSharedWidth; ++u) {
            pre1[static_cast<std::size_t>(u)] =
                detail::dot(w1_.row(u), x.data(), input_dim_) + b1_[static_cast<std::size_t>(u)];
            h1[static_cast<std::size_t>(u)] = std::max(0.0, pre1[static_cast<std::size_t>(u)]);
        }
        std::vector<double> dh1(kSharedWidth, 0.0);
        std::vector<double> pre2(kBranchWidth), h2(kBranchWidth);
        double loss = 0.0;
        for (const LossTerm& term : terms) {
            const std::size_t m = static_cast<std::size_t>(metric_index(term.metric));
            const Branch& br = branches_[m];
            for (int u = 0; u < kBranchWidth; ++u) {
                pre2[static_cast<std::size_t>(u)] =
                    detail::dot(br.w2.row(u), h1.data(), kSharedWidth) + br.b2[static_cast<std::size_t>(u)];
                h2[static_cast<std::size_t>(u)] = std::max(0.0, pre2[static_cast<std::size_t>(u)]);
            }
            const double y = detail::dot(br.w3.data(), h2.data(), kBranchWidth) + br.b3;
            const double raw = y * out_scale_[m] + out_offset_[m];
            loss += term.weight * smooth_l1(raw, term.target);
            const double dy = term.weight * smooth_l1_grad(raw, term.target) * out_scale_[m];
            if (dy == 0.0) continue;
            for (int u = 0; u < kBranchWidth; ++u) {
                if (pre2[static_cast<std::size_t>(u)] <= 0.0) continue;
                const double dpre2 = dy * br.w3[static_cast<std::size_t>(u)];
                if (dpre2 != 0.0) detail::axpy(dpre2, br.w2.row(u), dh1.data(), kSharedWidth);
            }
        }
        std::vector<double> dx(static_cast<std::size_t>(input_dim_), 0.0);
        for (int u = 0; u < kSharedWidth; ++u) {
            if (pre1[static_cast<std::size_t>(u)] <= 0.0 || dh1[static_cast<std::size_t>(u)] == 0.0)
                continue;
            detail::axpy(dh1[static_cast<std::size_t>(u)], w1_.row(u), dx.data(), input_dim_);
        }
        if (loss_out) *loss_out = loss;
        return dx;
    }

    std::vector<double> input_gradient(const ArchCode& code, const std::vector<LossTerm>& terms,
                                       double* loss_out = nullptr) const {
        return input_gradient(std::span(code.values), terms, loss_out);
    }

    void save(const std::string& path) const {
        nlohmann::ordered_json j;
        j["format"] = "ncp-predictor";
        j["version"] = kFormatVersion;
        j["input_dim"] = input_dim_;
        j["shared_width"] = kSharedWidth;
        j["branch_width"] = kBranchWidth;
        j["metrics"] = metric_names_;
        j["out_scale"] = out_scale_;
        j["out_offset"] = out_offset_;
        j["w1"] = w1_.a;
        j["b1"] = b1_;
        nlohmann::ordered_json heads = nlohmann::ordered_json::array();
        for (const Branch& br : branches_) {
            nlohmann::ordered_json h;
            h["w2"] = br.w2.a;
            h["b2"] = br.b2;
            h["w3"] = br.w3;
            h["b3"] = br.b3;
            heads.push_back(std::move(h));
        }
        j["heads"] = std::move(heads);
        std::ofstream os(path, std::ios::binary);
        if (!os) throw IoError("cannot open predictor file for writing: " + path);
        os << j.dump();
        os << '\n';
        if (!os) throw IoError("failed writing predictor file: " + path);
    }

    static Predictor load(const std::string& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw IoError("cannot open predictor file: " + path);
        nlohmann::json j;
        try {
            is >> j;
        } catch (const nlohmann::json::exception& e) {
            throw IoError("corrupt predictor file " + path + ": " + e.what());
        }
        try {
            if (j.at("format") != "ncp-predictor")
                throw IoError("not a predictor file: " + path);
            const int version = j.at("version").get<int>();
            if (version > kFormatVersion)
                throw IoError("predictor file " + path + " uses format version " +
                              std::to_string(version) + "; this build reads up to " +
                              std::to_string(kFormatVersion));
            if (j.at("shared_width").get<int>() != kSharedWidth ||
                j.at("branch_width").get<int>() != kBranchWidth)
                throw IoError("predictor file " + path + " has unsupported layer widths");
            Predictor p;
            p.input_dim_ = j.at("input_dim").get<int>();
            p.metric_names_ = j.at("metrics").get<std::vector<std::string>>();
            p.out_scale_ = j.at("out_scale").get<std::vector<double>>();
            p.out_offset_ = j.at("out_offset").get<std::vector<double>>();
            p.w1_ = Matrix(kSharedWidth, p.input_dim_);
            p.w1_.a = j.at("w1").get<std::vector<double>>();
            p.b1_ = j.at("b1").get<std::vector<double>>();
            for (const auto& h : j.at("heads")) {
                Branch br;
                br.w2 = Matrix(kBranchWidth, kSharedWidth);
                br.w2.a = h.at("w2").get<std::vector<double>>();
                br.b2 = h.at("b2").get<std::vector<double>>();
                br.w3 = h.at("w3").get<std::vector<double>>();
                br.b3 = h.at("b3").get<double>();
                if (br.w2.a.size() != static_cast<std::size_t>(kBranchWidth) * kSharedWidth ||
                    br.b2.size() != kBranchWidth || br.w3.size() != kBranchWidth)
                    throw IoError("predictor file " + path + " has inconsistent head shapes");
                p.branches_.push_back(std::move(br));
            }
            if (p.input_dim_ <= 0 || p.metric_names_.empty() ||
                p.branches_.size() != p.metric_names_.size() ||
                p.out_scale_.size() != p.metric_names_.size() ||
                p.out_offset_.size() != p.metric_names_.size() ||
                p.w1_.a.size() != static_cast<std::size_t>(kSharedWidth) * p.input_dim_ ||
                p.b1_.size() != kSharedWidth)
                throw IoError("predictor file " + path + " has inconsistent shapes");
            return p;
        } catch (const nlohmann::json::exception& e) {
            throw IoError("corrupt predictor file " + path + ": " + e.what());
        }
    }

    // Direct parameter access; used by the trainer and by tests that build
    // predictors with hand-placed weights.
    Matrix& w1() { return w1_; }
    const Matrix& w1() const { return w1_; }
    std::vector<double>& b1() { return b1_; }
    const std::vector<double>& b1() const { return b1_; }
    std::vector<Branch>& branches() { return branches_; }
    const std::vector<Branch>& branches() const { return branches_; }
    std::vector<double>& out_scale() { return out_scale_; }
    const std::vector<double>& out_scale() const { return out_scale_; }
    std::vector<double>& out_offset() { return out_offset_; }
    const std::vector<double>& out_offset() const { return out_offset_; }

private:
    static constexpr int kFormatVersion = 1;

    void check_input(std::span<const double> x) const {
        if (static_cast<int>(x.size()) != input_dim_)
            throw ValidationError("input has " + std::to_string(x.size()) + " dims, predictor expects " +
                                  std::to_string(input_dim_));
    }

    void forward_shared(std::span<const double> x, double* h1) const {
        for (int u = 0; u < kSharedWidth; ++u)
            h1[u] = std::max(0.0, detail::dot(w1_.row(u), x.data(), input_dim_) +
                                      b1_[static_cast<std::size_t>(u)]);
    }

    static void init_uniform(Matrix& m, Rng& rng) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(m.cols));
        for (double& w : m.a) w = rng.uniform(-bound, bound);
    }

    int metric_index_or(std::string_view name) const {
        for (std::size_t i = 0; i < metric_names_.size(); ++i)
            if (metric_names_[i] == name) return static_cast<int>(i);
        return -1;
    }

    int input_dim_ = 0;
    std::vector<std::string> metric_names_;
    Matrix w1_;
    std::vector<double> b1_;
    std::vector<Branch> branches_;
    std::vector<double> out_scale_;
    std::vector<double> out_offset_;
};

struct TrainConfig {
    double learning_rate = 0.01;
    double weight_decay = 1e-7;  // decoupled
    int batch_size = 128;
    int epochs = 200;
    double dropout = 0.5;
    std::uint64_t seed = 1;
    // One-cycle schedule: linear warm-up over the first 30% of steps from
    // lr/25 to lr, then cosine decay to lr/1e4.
    double warmup_fraction = 0.3;
    double start_div = 25.0;
    double final_div = 1e4;
};

/// One-cycle learning rate at `step` of `total_steps`.
inline double one_cycle_lr(const TrainConfig& cfg, int step, int total_steps) {
    const double lr0 = cfg.learning_rate;
    const int warmup = std::max(1, static_cast<int>(std::round(cfg.warmup_fraction * total_steps)));
    if (step < warmup) {
        const double t = static_cast<double>(step) / warmup;
        return lr0 / cfg.start_div + (lr0 - lr0 / cfg.start_div) * t;
    }
    const double t = total_steps > warmup
                         ? static_cast<double>(step - warmup) / (total_steps - warmup)
                         : 1.0;
    const double lr_end = lr0 / cfg.final_div;
    return lr_end + (lr0 - lr_end) * 0.5 * (1.0 + std::cos(3.14159265358979323846 * t));
}

struct Sample {
    std::vector<double> input;
    MetricSet metrics;
};

struct MetricReport {
    std::string name;
    double val_mae = 0.0;
    double target_mean = 0.0;  // over all records
    double target_std = 0.0;   // over all records
};

struct TrainReport {
    std::size_t train_count = 0;
    std::size_t val_count = 0;
    std::vector<MetricReport> metrics;
    double final_train_loss = 0.0;
};

/// Split rule: 2500 records -> first 2000 train / next 500 val (record
/// order); any other size -> floor(0.8 n) / rest.
inline std::size_t train_split(std::size_t n) {
    if (n == 2500) return 2000;
    return static_cast<std::size_t>(0.8 * static_cast<double>(n));
}

namespace detail {

struct AdamTensor {
    std::vector<double> grad, m, v;
    explicit AdamTensor(std::size_t n) : grad(n, 0.0), m(n, 0.0), v(n, 0.0) {}

    void step(double* theta, double lr, double wd, int t) {
        constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
        const double c1 = 1.0 - std::pow(beta1, t);
        const double c2 = 1.0 - std::pow(beta2, t);
        for (std::size_t i = 0; i < grad.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            theta[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + wd * theta[i]);
            grad[i] = 0.0;
        }
    }
};

} // namespace detail

/// Fit a predictor to (code, metrics) records. Deterministic under
/// cfg.seed; the validation report carries per-metric mean absolute error on
/// the held-out split.
inline std::pair<Predictor, TrainReport> train(const std::vector<Sample>& records,
                                               const TrainConfig& cfg) {
    if (records.size() < 2) throw ValidationError("training needs at least 2 records");
    const int input_dim = static_cast<int>(records.front().input.size());
    std::vector<std::string> names;
    for (const auto& [k, v] : records.front().metrics.items) names.push_back(k);
    if (names.empty()) throw ValidationError("records carry no metrics");
    for (std::size_t r = 0; r < records.size(); ++r) {
        const Sample& s = records[r];
        if (static_cast<int>(s.input.size()) != input_dim)
            throw ValidationError("record " + std::to_string(r) + " has inconsistent input size");
        for (double v : s.input)
            if (!std::isfinite(v)) throw ValidationError("record " + std::to_string(r) + " has non-finite input");
        for (const std::string& name : names) {
            if (!s.metrics.has(name))
                throw ValidationError("record " + std::to_string(r) + " is missing metric '" + name + "'");
            if (!std::isfinite(s.metrics.at(name)))
                throw ValidationError("record " + std::to_string(r) + " has non-finite metric '" + name + "'");
        }
    }

    const std::size_t n_train = train_split(records.size());
    const std::size_t n_val = records.size() - n_train;
    const std::size_t n_metrics = names.size();

    Predictor p(input_dim, names, cfg.seed);
    // Anchor each head at the train-split mean so the network fits residuals.
    for (std::size_t m = 0; m < n_metrics; ++m) {
        double mean = 0.0;
        for (std::size_t r = 0; r < n_train; ++r) mean += records[r].metrics.at(names[m]);
        p.out_offset()[m] = mean / static_cast<double>(n_train);
    }

    const int batch = std::max(1, cfg.batch_size);
    const int batches_per_epoch = static_cast<int>((n_train + batch - 1) / batch);
    const int total_steps = std::max(1, cfg.epochs * batches_per_epoch);
    const double keep = 1.0 - cfg.dropout;

    detail::AdamTensor g_w1(p.w1().a.size()), g_b1(p.b1().size());
    std::vector<detail::AdamTensor> g_w2, g_b2, g_w3, g_b3;
    for (std::size_t m = 0; m < n_metrics; ++m) {
        g_w2.emplace_back(p.branches()[m].w2.a.size());
        g_b2.emplace_back(p.branches()[m].b2.size());
        g_w3.emplace_back(p.branches()[m].w3.size());
        g_b3.emplace_back(1);
    }

    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(splitmix64(cfg.seed ^ 0x747261696eULL));

    // Per-batch scratch.
    const std::size_t B = static_cast<std::size_t>(batch);
    std::vector<double> x(B * static_cast<std::size_t>(input_dim));
    std::vector<double> pre1(B * kSharedWidth), h1d(B * kSharedWidth), dh1(B * kSharedWidth);
    std::vector<double> pre2(B * kBranchWidth), h2d(B * kBranchWidth);
    std::vector<double> dy(B);
    std::vector<double> targets(B * n_metrics);
    double last_epoch_loss = 0.0;

    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (int bi = 0; bi < batches_per_epoch; ++bi) {
            const std::size_t begin = static_cast<std::size_t>(bi) * B;
            const std::size_t count = std::min(B, n_train - begin);
            for (std::size_t i = 0; i < count; ++i) {
                const Sample& s = records[order[begin + i]];
                std::copy(s.input.begin(), s.input.end(),
                          x.begin() + static_cast<std::ptrdiff_t>(i * static_cast<std::size_t>(input_dim)));
                for (std::size_t m = 0; m < n_metrics; ++m)
                    targets[i * n_metrics + m] = s.metrics.at(names[m]);
            }

            // Shared layer forward with inverted dropout.
            for (std::size_t i = 0; i < count; ++i) {
                const double* xi = x.data() + i * static_cast<std::size_t>(input_dim);
                double* p1 = pre1.data() + i * kSharedWidth;
                double* h = h1d.data() + i * kSharedWidth;
                for (int u = 0; u < kSharedWidth; ++u) {
                    p1[u] = detail::dot(p.w1().row(u), xi, input_dim) + p.b1()[static_cast<std::size_t>(u)];
                    double a = p1[u] > 0.0 ? p1[u] : 0.0;
                    if (cfg.dropout > 0.0) a = rng.uniform01() < keep ? a / keep : 0.0;
                    h[u] = a;
                }
            }
            std::fill(dh1.begin(), dh1.begin() + static_cast<std::ptrdiff_t>(count * kSharedWidth), 0.0);

            double batch_loss = 0.0;
            for (std::size_t m = 0; m < n_metrics; ++m) {
                Predictor::Branch& br = p.branches()[m];
                const double inv_n = 1.0 / static_cast<double>(count);
                for (std::size_t i = 0; i < count; ++i) {
                    const double* h = h1d.data() + i * kSharedWidth;
                    double* p2 = pre2.data() + i * kBranchWidth;
                    double* h2 = h2d.data() + i * kBranchWidth;
                    for (int u = 0; u < kBranchWidth; ++u) {
                        p2[u] = detail::dot(br.w2.row(u), h, kSharedWidth) + br.b2[static_cast<std::size_t>(u)];
                        double a = p2[u] > 0.0 ? p2[u] : 0.0;
                        if (cfg.dropout > 0.0) a = rng.uniform01() < keep ? a / keep : 0.0;
                        h2[u] = a;
                    }
                    const double y = detail::dot(br.w3.data(), h2, kBranchWidth) + br.b3;
                    const double raw = y * p.out_scale()[m] + p.out_offset()[m];
                    const double target = targets[i * n_metrics + m];
                    batch_loss += smooth_l1(raw, target);
                    dy[i] = smooth_l1_grad(raw, target) * p.out_scale()[m] * inv_n;
                }
                // Backward through this head.
                for (std::size_t i = 0; i < count; ++i) {
                    if (dy[i] == 0.0) continue;
                    const double* h = h1d.data() + i * kSharedWidth;
                    const double* p2 = pre2.data() + i * kBranchWidth;
                    const double* h2 = h2d.data() + i * kBranchWidth;
                    double* dh = dh1.data() + i * kSharedWidth;
                    g_b3[m].grad[0] += dy[i];
                    detail::axpy(dy[i], h2, g_w3[m].grad.data(), kBranchWidth);
                    for (int u = 0; u < kBranchWidth; ++u) {
                        // h2d already folds relu and the dropout mask; its
                        // scale is recovered from h2/p2 where active.
                        if (h2[u] == 0.0 && p2[u] <= 0.0) continue;
                        const double mask_scale = p2[u] > 0.0 ? h2[u] / p2[u] : 0.0;
                        const double dpre2 = dy[i] * br.w3[static_cast<std::size_t>(u)] * mask_scale;
                        if (dpre2 == 0.0) continue;
                        g_b2[m].grad[static_cast<std::size_t>(u)] += dpre2;
                        detail::axpy(dpre2, h, g_w2[m].grad.data() + static_cast<std::size_t>(u) * kSharedWidth,
                                     kSharedWidth);
                        detail::axpy(dpre2, br.w2.row(u), dh, kSharedWidth);
                    }
                }
            }
            epoch_loss += batch_loss / static_cast<double>(count);

            // Shared layer backward.
            for (std::size_t i = 0; i < count; ++i) {
                const double* xi = x.data() + i * static_cast<std::size_t>(input_dim);
                const double* p1 = pre1.data() + i * kSharedWidth;
                const double* h = h1d.data() + i * kSharedWidth;
                const double* dh = dh1.data() + i * kSharedWidth;
                for (int u = 0; u < kSharedWidth; ++u) {
                    if (h[u] == 0.0 && p1[u] <= 0.0) continue;
                    const double mask_scale = p1[u] > 0.0 ? h[u] / p1[u] : 0.0;
                    const double dpre1 = dh[u] * mask_scale;
                    if (dpre1 == 0.0) continue;
                    g_b1.grad[static_cast<std::size_t>(u)] += dpre1;
                    detail::axpy(dpre1, xi, g_w1.grad.data() + static_cast<std::size_t>(u) * input_dim,
                                 input_dim);
                }
            }

            const double lr = one_cycle_lr(cfg, step, total_steps);
            ++step;
            g_w1.step(p.w1().a.data(), lr, cfg.weight_decay, step);
            g_b1.step(p.b1().data(), lr, cfg.weight_decay, step);
            for (std::size_t m = 0; m < n_metrics; ++m) {
                g_w2[m].step(p.branches()[m].w2.a.data(), lr, cfg.weight_decay, step);
                g_b2[m].step(p.branches()[m].b2.data(), lr, cfg.weight_decay, step);
                g_w3[m].step(p.branches()[m].w3.data(), lr, cfg.weight_decay, step);
                g_b3[m].step(&p.branches()[m].b3, lr, cfg.weight_decay, step);
            }
        }
        last_epoch_loss = epoch_loss / batches_per_epoch;
    }

    TrainReport report;
    report.train_count = n_train;
    report.val_count = n_val;
    report.final_train_loss = last_epoch_loss;
    for (std::size_t m = 0; m < n_metrics; ++m) {
        MetricReport mr;
        mr.name = names[m];
        double mean = 0.0;
        for (const Sample& s : records) mean += s.metrics.at(names[m]);
        mean /= static_cast<double>(records.size());
        double var = 0.0;
        for (const Sample& s : records) {
            const double d = s.metrics.at(names[m]) - mean;
            var += d * d;
        }
        mr.target_mean = mean;
        mr.target_std = std::sqrt(var / static_cast<double>(records.size()));
        report.metrics.push_back(mr);
    }
    if (n_val > 0) {
        for (std::size_t r = n_train; r < records.size(); ++r) {
            const std::vector<double> pred = p.predict_values(records[r].input);
            for (std::size_t m = 0; m < n_metrics; ++m)
                report.metrics[m].val_mae += std::abs(pred[m] - records[r].metrics.at(names[m]));
        }
        for (std::size_t m = 0; m < n_metrics; ++m)
            report.metrics[m].val_mae /= static_cast<double>(n_val);
    }
    return {std::move(p), std::move(report)};
}

} // namespace ncp

#endif // NCP_PREDICTOR_HPP
