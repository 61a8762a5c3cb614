#ifndef NCP_PROPAGATION_HPP
#define NCP_PROPAGATION_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ncp/coding.hpp"
#include "ncp/common.hpp"
#include "ncp/netmodel.hpp"
#include "ncp/predictor.hpp"

namespace ncp {

// Propagation inverts a frozen predictor: set targets slightly beyond the
// current predictions, backpropagate the target loss to the code, and walk
// the code along the gradient. Continuous mode updates every dimension,
// winner-takes-all edits the single best dimension per unit of FLOPs, and
// one-hot mode periodically projects grouped dimensions back onto their
// argmax corner.

enum class Strategy { Continuous, WinnerTakesAll, OneHot };

enum class StopReason { TargetReached, MaxIters, NoAdmissibleDim, Converged };

inline const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::TargetReached: return "TargetReached";
        case StopReason::MaxIters: return "MaxIters";
        case StopReason::NoAdmissibleDim: return "NoAdmissibleDim";
        case StopReason::Converged: return "Converged";
    }
    return "?";
}

/// How targets are derived. OffsetEachIter re-reads the current prediction
/// every iteration (constant +delta/-delta pull); OffsetFromInit fixes the
/// targets from the initial prediction; Absolute uses user-given values.
enum class TargetRule { OffsetEachIter, OffsetFromInit, Absolute };

struct PropagationConfig {
    Strategy strategy = Strategy::Continuous;
    double lambda = 0.5;  // FLOPs weight in the loss
    double eta = 3.0;     // step size
    int max_iters = 70;
    std::string acc_metric = "acc";
    std::string flops_metric = "flops";
    TargetRule target_rule = TargetRule::OffsetEachIter;
    double acc_delta = 1.0;    // t_acc = p_acc + acc_delta
    double flops_delta = 1.0;  // t_flops = p_flops - flops_delta
    double acc_target = 0.0;   // Absolute rule only
    double flops_target = 0.0;
    double target_tolerance = 1e-6;
    int onehot_project_every = 10;
};

/// Named trade-off presets: S = 0.7, M = 0.3, L = 0.1.
inline double lambda_profile(std::string_view profile) {
    if (profile == "S" || profile == "s") return 0.7;
    if (profile == "M" || profile == "m") return 0.3;
    if (profile == "L" || profile == "l") return 0.1;
    throw ValidationError("unknown lambda profile '" + std::string(profile) + "', expected S, M or L");
}

struct TraceRow {
    int iter = 0;
    std::vector<double> code_raw;  // continuous raw units (or the relaxed one-hot values)
    std::vector<std::pair<std::string, double>> predictions;
    double loss = 0.0;
    double grad_norm = 0.0;
    int chosen_dim = -1;     // winner-takes-all only
    double chosen_step = 0;  // raw-unit step of the chosen dimension
};

struct PropagationTrace {
    std::vector<TraceRow> rows;
    StopReason stop_reason = StopReason::MaxIters;

    void write_csv(std::ostream& os) const {
        os << "iter";
        const std::size_t dims = rows.empty() ? 0 : rows.front().code_raw.size();
        for (std::size_t i = 0; i < dims; ++i) os << ",e_" << i;
        if (!rows.empty())
            for (const auto& [name, value] : rows.front().predictions) os << ',' << name;
        os << ",loss,grad_norm,chosen_dim,chosen_step,stop_reason\n";
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const TraceRow& row = rows[r];
            os << row.iter;
            for (double v : row.code_raw) os << ',' << v;
            for (const auto& [name, value] : row.predictions) os << ',' << value;
            os << ',' << row.loss << ',' << row.grad_norm << ',';
            if (row.chosen_dim >= 0) os << row.chosen_dim;
            os << ',';
            if (row.chosen_dim >= 0) os << row.chosen_step;
            os << ',';
            if (r + 1 == rows.size()) os << to_string(stop_reason);
            os << '\n';
        }
    }
};

/// Weighted sum of per-task gradients; default weights are all one.
inline std::vector<double> accumulate_gradients(const std::vector<std::vector<double>>& grads,
                                                const std::vector<double>& weights = {}) {
    if (grads.empty()) throw ValidationError("accumulate_gradients needs at least one gradient");
    if (!weights.empty() && weights.size() != grads.size())
        throw ValidationError("gradient and weight counts differ");
    const std::size_t n = grads.front().size();
    std::vector<double> total(n, 0.0);
    for (std::size_t t = 0; t < grads.size(); ++t) {
        if (grads[t].size() != n) throw ValidationError("gradients have mismatched lengths");
        const double w = weights.empty() ? 1.0 : weights[t];
        for (std::size_t i = 0; i < n; ++i) total[i] += w * grads[t][i];
    }
    return total;
}

namespace detail {

struct TaskState {
    const Predictor* predictor = nullptr;
    double weight = 1.0;
    int acc_idx = -1;
    int flops_idx = -1;  // -1 when lambda == 0
    double t_acc = 0.0;
    double t_flops = 0.0;
    bool targets_fixed = false;
};

struct IterEval {
    std::vector<std::pair<std::string, double>> predictions;
    std::vector<double> grad;
    double loss = 0.0;
    double grad_norm = 0.0;
    bool targets_met = true;
};

inline std::vector<TaskState> make_task_states(const std::vector<const Predictor*>& predictors,
                                               const std::vector<double>& weights,
                                               const PropagationConfig& cfg) {
    if (predictors.empty()) throw ValidationError("propagation needs at least one predictor");
    if (!weights.empty() && weights.size() != predictors.size())
        throw ValidationError("predictor and weight counts differ");
    std::vector<TaskState> tasks;
    for (std::size_t t = 0; t < predictors.size(); ++t) {
        const Predictor* p = predictors[t];
        TaskState task;
        task.predictor = p;
        task.weight = weights.empty() ? 1.0 : weights[t];
        if (!p->has_metric(cfg.acc_metric))
            throw ValidationError("predictor lacks the accuracy head '" + cfg.acc_metric + "'");
        task.acc_idx = p->metric_index(cfg.acc_metric);
        if (cfg.lambda > 0.0) {
            if (!p->has_metric(cfg.flops_metric))
                throw ValidationError("lambda > 0 but predictor lacks the FLOPs head '" +
                                      cfg.flops_metric + "'");
            task.flops_idx = p->metric_index(cfg.flops_metric);
        }
        if (cfg.target_rule == TargetRule::Absolute) {
            task.t_acc = cfg.acc_target;
            task.t_flops = cfg.flops_target;
            task.targets_fixed = true;
        }
        tasks.push_back(task);
    }
    return tasks;
}

inline IterEval eval_iteration(std::vector<TaskState>& tasks, const std::vector<double>& x,
                               const PropagationConfig& cfg, bool prefix_task_names) {
    IterEval ev;
    std::vector<std::vector<double>> grads;
    std::vector<double> task_weights;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        TaskState& task = tasks[t];
        const std::vector<double> preds = task.predictor->predict_values(x);
        const double p_acc = preds[static_cast<std::size_t>(task.acc_idx)];
        const double p_flops = task.flops_idx >= 0 ? preds[static_cast<std::size_t>(task.flops_idx)] : 0.0;
        if (!task.targets_fixed) {
            task.t_acc = p_acc + cfg.acc_delta;
            task.t_flops = p_flops - cfg.flops_delta;
            task.targets_fixed = cfg.target_rule == TargetRule::OffsetFromInit;
        }
        std::vector<LossTerm> terms = {{cfg.acc_metric, task.t_acc, 1.0}};
        if (task.flops_idx >= 0) terms.push_back({cfg.flops_metric, task.t_flops, cfg.lambda});
        double loss = 0.0;
        grads.push_back(task.predictor->input_gradient(x, terms, &loss));
        task_weights.push_back(task.weight);
        ev.loss += task.weight * loss;
        const std::string prefix = prefix_task_names ? "p" + std::to_string(t) + "." : "";
        for (std::size_t m = 0; m < preds.size(); ++m)
            ev.predictions.emplace_back(prefix + task.predictor->metric_names()[m], preds[m]);
        if (std::abs(p_acc - task.t_acc) >= cfg.target_tolerance) ev.targets_met = false;
        if (task.flops_idx >= 0 && std::abs(p_flops - task.t_flops) >= cfg.target_tolerance)
            ev.targets_met = false;
    }
    ev.grad = accumulate_gradients(grads, task_weights);
    double norm = 0.0;
    for (double g : ev.grad) norm += g * g;
    ev.grad_norm = std::sqrt(norm);
    return ev;
}

} // namespace detail

/// Snap each group of a grouped code onto its argmax one-hot corner (first
/// index wins ties).
inline std::vector<double> project_onehot(const std::vector<double>& x, const std::vector<int>& groups) {
    std::size_t total = 0;
    for (int g : groups) {
        if (g <= 0) throw ValidationError("one-hot group sizes must be positive");
        total += static_cast<std::size_t>(g);
    }
    if (total != x.size())
        throw ValidationError("one-hot group sizes sum to " + std::to_string(total) +
                              " but the code has " + std::to_string(x.size()) + " dimensions");
    std::vector<double> out(x.size(), 0.0);
    std::size_t off = 0;
    for (int g : groups) {
        std::size_t best = off;
        for (std::size_t i = off + 1; i < off + static_cast<std::size_t>(g); ++i)
            if (x[i] > x[best]) best = i;
        out[best] = 1.0;
        off += static_cast<std::size_t>(g);
    }
    return out;
}

/// Continuous propagation over a generic box-constrained vector. Used for
/// both normalized architecture codes and relaxed one-hot codes; `groups`
/// enables the periodic argmax projection.
inline std::pair<std::vector<double>, PropagationTrace> propagate_vector(
    const std::vector<const Predictor*>& predictors, std::vector<double> x,
    const PropagationConfig& cfg, const std::vector<double>& weights = {},
    const std::vector<int>& groups = {},
    const std::function<std::vector<double>(const std::vector<double>&)>& to_raw = {}) {
    if (cfg.eta <= 0.0) throw ValidationError("eta must be positive");
    if (cfg.max_iters < 1) throw ValidationError("max_iters must be at least 1");
    if (cfg.lambda < 0.0) throw ValidationError("lambda must be nonnegative");
    if (!groups.empty()) project_onehot(x, groups);  // validates the grouping
    std::vector<detail::TaskState> tasks = detail::make_task_states(predictors, weights, cfg);

    PropagationTrace trace;
    trace.stop_reason = StopReason::MaxIters;
    const bool prefix = predictors.size() > 1;
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        const detail::IterEval ev = detail::eval_iteration(tasks, x, cfg, prefix);
        TraceRow row;
        row.iter = iter;
        row.code_raw = to_raw ? to_raw(x) : x;
        row.predictions = ev.predictions;
        row.loss = ev.loss;
        row.grad_norm = ev.grad_norm;
        trace.rows.push_back(std::move(row));
        if (ev.targets_met) {
            trace.stop_reason = StopReason::TargetReached;
            break;
        }
        if (ev.grad_norm == 0.0) {
            trace.stop_reason = StopReason::Converged;
            break;
        }
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = std::clamp(x[i] - cfg.eta * ev.grad[i], 0.0, 1.0);
        if (!groups.empty() && (iter + 1) % cfg.onehot_project_every == 0)
            x = project_onehot(x, groups);
    }
    if (!groups.empty()) x = project_onehot(x, groups);
    return {std::move(x), std::move(trace)};
}

namespace detail {
inline std::vector<double> arch_to_raw(const std::vector<double>& x) {
    std::vector<double> raw(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        raw[i] = denormalize_dim(static_cast<int>(i), x[i]);
    return raw;
}

inline ArchCode snap_to_grid(const std::vector<double>& x) {
    ArchCode code;
    for (int i = 0; i < kCodeDims; ++i) code[i] = x[static_cast<std::size_t>(i)];
    const auto raw = round_code(code);
    for (int i = 0; i < kCodeDims; ++i)
        code[i] = normalize_dim(i, static_cast<double>(raw[static_cast<std::size_t>(i)]));
    return code;
}
} // namespace detail

/// Joint propagation: per-task losses backpropagate to per-task gradients,
/// which are accumulated (weighted) before each continuous step.
inline std::pair<ArchCode, PropagationTrace> propagate_multitask(
    const std::vector<const Predictor*>& predictors, const ArchCode& init,
    const PropagationConfig& cfg, const std::vector<double>& weights = {}) {
    std::vector<double> x(init.values.begin(), init.values.end());
    auto [final_x, trace] =
        propagate_vector(predictors, std::move(x), cfg, weights, {}, detail::arch_to_raw);
    return {detail::snap_to_grid(final_x), std::move(trace)};
}

inline std::pair<ArchCode, PropagationTrace> propagate_continuous(const Predictor& predictor,
                                                                  const ArchCode& init,
                                                                  const PropagationConfig& cfg) {
    return propagate_multitask({&predictor}, init, cfg);
}

/// Cross-task warm start: plain continuous propagation on the target task's
/// predictor, initialized at the source task's optimum.
inline std::pair<ArchCode, PropagationTrace> transfer(const ArchCode& source_optimum,
                                                      const Predictor& target_predictor,
                                                      const PropagationConfig& cfg) {
    return propagate_continuous(target_predictor, source_optimum, cfg);
}

/// One winner-takes-all decision: pick the dimension with the extreme
/// gradient per unit of FLOPs among admissible dimensions.
struct WtaChoice {
    enum class Kind { Step, Converged, NoAdmissible } kind = Kind::NoAdmissible;
    int dim = -1;
    int step_raw = 0;  // -unit or +unit
};

inline WtaChoice wta_choose(const std::vector<double>& grad,
                            const std::vector<std::optional<double>>& flops_deltas,
                            const std::array<int, kCodeDims>& raw) {
    WtaChoice choice;
    bool any = false;
    double best_pos = 0.0, best_neg = 0.0;
    int dim_pos = -1, dim_neg = -1;
    for (int l = 0; l < kCodeDims; ++l) {
        const auto& delta = flops_deltas[static_cast<std::size_t>(l)];
        if (!delta.has_value() || *delta <= 0.0) continue;
        const double g = grad[static_cast<std::size_t>(l)] / *delta;
        const DimBounds b = bounds(l);
        const int unit = static_cast<int>(b.unit);
        if (g > 0.0 && raw[static_cast<std::size_t>(l)] - unit < static_cast<int>(b.min))
            continue;  // a decrement would leave the grid
        any = true;
        if (g > 0.0 && (dim_pos < 0 || g > best_pos)) {
            best_pos = g;
            dim_pos = l;
        }
        if (g < 0.0 && (dim_neg < 0 || g < best_neg)) {
            best_neg = g;
            dim_neg = l;
        }
    }
    if (!any) {
        choice.kind = WtaChoice::Kind::NoAdmissible;
        return choice;
    }
    if (dim_pos >= 0) {
        choice.kind = WtaChoice::Kind::Step;
        choice.dim = dim_pos;
        choice.step_raw = -static_cast<int>(bounds(dim_pos).unit);
    } else if (dim_neg >= 0) {
        choice.kind = WtaChoice::Kind::Step;
        choice.dim = dim_neg;
        choice.step_raw = static_cast<int>(bounds(dim_neg).unit);
    } else {
        choice.kind = WtaChoice::Kind::Converged;  // every admissible gradient is exactly zero
    }
    return choice;
}

/// Winner-takes-all propagation: the code stays on the raw grid and exactly
/// one dimension moves by one notch per iteration.
inline std::pair<ArchCode, PropagationTrace> propagate_wta(const Predictor& predictor,
                                                           const ArchCode& init,
                                                           const PropagationConfig& cfg,
                                                           const FlopsTable& table) {
    if (cfg.eta <= 0.0) throw ValidationError("eta must be positive");
    if (cfg.max_iters < 1) throw ValidationError("max_iters must be at least 1");
    if (cfg.lambda < 0.0) throw ValidationError("lambda must be nonnegative");
    std::vector<detail::TaskState> tasks = detail::make_task_states({&predictor}, {}, cfg);

    std::array<int, kCodeDims> raw = round_code(init);
    std::vector<double> x(kCodeDims);
    for (int i = 0; i < kCodeDims; ++i)
        x[static_cast<std::size_t>(i)] = normalize_dim(i, static_cast<double>(raw[static_cast<std::size_t>(i)]));

    PropagationTrace trace;
    trace.stop_reason = StopReason::MaxIters;
    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        const detail::IterEval ev = detail::eval_iteration(tasks, x, cfg, false);
        TraceRow row;
        row.iter = iter;
        row.code_raw.assign(raw.begin(), raw.end());
        row.predictions = ev.predictions;
        row.loss = ev.loss;
        row.grad_norm = ev.grad_norm;
        if (ev.targets_met) {
            trace.rows.push_back(std::move(row));
            trace.stop_reason = StopReason::TargetReached;
            break;
        }
        ArchCode code;
        for (int i = 0; i < kCodeDims; ++i) code[i] = x[static_cast<std::size_t>(i)];
        std::vector<std::optional<double>> deltas(kCodeDims);
        for (int l = 0; l < kCodeDims; ++l) deltas[static_cast<std::size_t>(l)] = table.flops_delta(code, l);
        const WtaChoice choice = wta_choose(ev.grad, deltas, raw);
        if (choice.kind == WtaChoice::Kind::NoAdmissible) {
            trace.rows.push_back(std::move(row));
            trace.stop_reason = StopReason::NoAdmissibleDim;
            break;
        }
        if (choice.kind == WtaChoice::Kind::Converged) {
            trace.rows.push_back(std::move(row));
            trace.stop_reason = StopReason::Converged;
            break;
        }
        row.chosen_dim = choice.dim;
        row.chosen_step = choice.step_raw;
        trace.rows.push_back(std::move(row));
        raw[static_cast<std::size_t>(choice.dim)] += choice.step_raw;
        x[static_cast<std::size_t>(choice.dim)] =
            normalize_dim(choice.dim, static_cast<double>(raw[static_cast<std::size_t>(choice.dim)]));
    }
    ArchCode final_code;
    for (int i = 0; i < kCodeDims; ++i)
        final_code[i] = normalize_dim(i, static_cast<double>(raw[static_cast<std::size_t>(i)]));
    return {final_code, std::move(trace)};
}

/// Relaxed one-hot propagation for cell-based spaces: continuous updates
/// with an argmax projection every cfg.onehot_project_every iterations.
inline std::pair<std::vector<double>, PropagationTrace> propagate_onehot(
    const Predictor& predictor, const std::vector<double>& init, const std::vector<int>& groups,
    const PropagationConfig& cfg) {
    if (groups.empty()) throw ValidationError("one-hot propagation needs a non-empty grouping");
    return propagate_vector({&predictor}, init, cfg, {}, groups);
}

} // namespace ncp

#endif // NCP_PROPAGATION_HPP
