#ifndef NCP_BASELINES_HPP
#define NCP_BASELINES_HPP

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "ncp/coding.hpp"
#include "ncp/common.hpp"
#include "ncp/metrics.hpp"
#include "ncp/netmodel.hpp"
#include "ncp/predictor.hpp"

namespace ncp {

// Reference strategies evaluated under the same predictor, coding space and
// objective as propagation, so comparisons are budget-fair.

/// Scalar search objective: accuracy, optionally penalized by FLOPs.
struct ObjectiveConfig {
    std::string acc_metric = "acc";
    std::string flops_metric = "flops";
    double lambda = 0.0;  // objective = acc - lambda * flops
};

inline double objective_value(const MetricSet& metrics, const ObjectiveConfig& cfg) {
    double v = metrics.at(cfg.acc_metric);
    if (cfg.lambda > 0.0) v -= cfg.lambda * metrics.at(cfg.flops_metric);
    return v;
}

struct ScoredCode {
    ArchCode code;
    MetricSet metrics;
    double objective = 0.0;
};

struct SearchResult {
    std::vector<ScoredCode> ranked;  // descending objective
    std::int64_t evaluations_used = 0;
    double wall_time_s = 0.0;

    void write_csv(std::ostream& os) const {
        os << "rank,code";
        if (!ranked.empty())
            for (const auto& [name, value] : ranked.front().metrics.items) os << ',' << name;
        os << ",objective\n";
        for (std::size_t r = 0; r < ranked.size(); ++r) {
            os << (r + 1) << ",\"" << format_raw_code(round_code(ranked[r].code)) << '"';
            for (const auto& [name, value] : ranked[r].metrics.items) os << ',' << value;
            os << ',' << ranked[r].objective << '\n';
        }
    }
};

using Scorer = std::function<MetricSet(const ArchCode&)>;

inline Scorer predictor_scorer(const Predictor& p) {
    return [&p](const ArchCode& code) { return p.predict(code); };
}

namespace detail {

// Evaluation order must not affect the ranking: ties break on the raw code.
inline void rank_descending(std::vector<ScoredCode>& scored) {
    std::sort(scored.begin(), scored.end(), [](const ScoredCode& a, const ScoredCode& b) {
        if (a.objective != b.objective) return a.objective > b.objective;
        return round_code(a.code) < round_code(b.code);
    });
}

struct Stopwatch {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

} // namespace detail

/// Uniformly sample `budget` codes, score them, keep the best `keep`.
inline SearchResult random_search(int budget, const Scorer& scorer, std::uint64_t seed,
                                  const ObjectiveConfig& objective = {}, int keep = 10) {
    if (budget < 1) throw ValidationError("search budget must be at least 1");
    detail::Stopwatch timer;
    Rng rng(splitmix64(seed ^ 0x72616e64ULL));
    std::vector<ScoredCode> scored;
    scored.reserve(static_cast<std::size_t>(budget));
    for (int i = 0; i < budget; ++i) {
        ScoredCode s;
        s.code = sample(rng);
        s.metrics = scorer(s.code);
        s.objective = objective_value(s.metrics, objective);
        scored.push_back(std::move(s));
    }
    detail::rank_descending(scored);
    if (static_cast<int>(scored.size()) > keep) scored.resize(static_cast<std::size_t>(keep));
    SearchResult out;
    out.ranked = std::move(scored);
    out.evaluations_used = budget;
    out.wall_time_s = timer.seconds();
    return out;
}

/// Score `budget` random codes with the predictor and return the top k.
inline SearchResult predictor_topk(int budget, int k, const Predictor& predictor, std::uint64_t seed,
                                   const ObjectiveConfig& objective = {}) {
    if (k < 1 || k > budget) throw ValidationError("top-k needs 1 <= k <= budget");
    return random_search(budget, predictor_scorer(predictor), seed, objective, k);
}

/// Greedy single-dimension adaptation: each round tries every +-one-notch
/// edit, scores the predicted-objective improvement per unit of FLOPs
/// change, and applies the best improving edit. Stops when nothing improves.
inline SearchResult netadapt_greedy(const ArchCode& init, const Predictor& predictor,
                                    const FlopsTable& table, int max_rounds = 70,
                                    const ObjectiveConfig& objective = {}) {
    if (max_rounds < 0) throw ValidationError("max_rounds must be nonnegative");
    detail::Stopwatch timer;
    SearchResult out;

    std::array<int, kCodeDims> raw = round_code(init);
    auto as_code = [](const std::array<int, kCodeDims>& r) {
        ArchCode c;
        for (int i = 0; i < kCodeDims; ++i) c[i] = normalize_dim(i, static_cast<double>(r[i]));
        return c;
    };

    ArchCode current = as_code(raw);
    MetricSet current_metrics = predictor.predict(current);
    double current_obj = objective_value(current_metrics, objective);
    double current_flops = table.lookup_raw(raw);
    out.evaluations_used = 1;
    out.ranked.push_back({current, current_metrics, current_obj});

    for (int round = 0; round < max_rounds; ++round) {
        double best_score = 0.0;
        int best_dim = -1, best_step = 0;
        double best_obj = 0.0;
        MetricSet best_metrics;
        for (int dim = 0; dim < kCodeDims; ++dim) {
            const DimBounds b = bounds(dim);
            const int unit = static_cast<int>(b.unit);
            for (const int step : {+unit, -unit}) {
                const int moved = raw[static_cast<std::size_t>(dim)] + step;
                if (moved < static_cast<int>(b.min) || moved > static_cast<int>(b.max)) continue;
                auto edited = raw;
                edited[static_cast<std::size_t>(dim)] = moved;
                const ArchCode code = as_code(edited);
                const MetricSet metrics = predictor.predict(code);
                ++out.evaluations_used;
                const double improvement = objective_value(metrics, objective) - current_obj;
                if (improvement <= 0.0) continue;
                const double dflops = std::abs(table.lookup_raw(edited) - current_flops);
                const double score = improvement / std::max(dflops, 1e-12);
                if (best_dim < 0 || score > best_score) {
                    best_score = score;
                    best_dim = dim;
                    best_step = step;
                    best_obj = objective_value(metrics, objective);
                    best_metrics = metrics;
                }
            }
        }
        if (best_dim < 0) break;
        raw[static_cast<std::size_t>(best_dim)] += best_step;
        current = as_code(raw);
        current_metrics = best_metrics;
        current_obj = best_obj;
        current_flops = table.lookup_raw(raw);
        out.ranked.push_back({current, current_metrics, current_obj});
    }

    std::reverse(out.ranked.begin(), out.ranked.end());  // objective rises monotonically
    out.wall_time_s = timer.seconds();
    return out;
}

} // namespace ncp

#endif // NCP_BASELINES_HPP
