#ifndef NCP_BENCHIO_HPP
#define NCP_BENCHIO_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ncp/coding.hpp"
#include "ncp/common.hpp"
#include "ncp/metrics.hpp"
#include "ncp/netmodel.hpp"
#include "ncp/predictor.hpp"

namespace ncp {

/// One benchmark entry: a raw integer code, the task it was evaluated on,
/// and its metrics. Files are JSON-lines, one record per line:
///   {"code":[27 ints],"task":"seg","metrics":{"acc":77.2,"flops":1.23}}
struct BenchRecord {
    std::vector<int> code;
    std::string task;
    MetricSet metrics;
};

inline void save_records(const std::vector<BenchRecord>& records, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open benchmark file for writing: " + path);
    for (const BenchRecord& r : records) {
        nlohmann::ordered_json j;
        j["code"] = r.code;
        j["task"] = r.task;
        nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
        for (const auto& [k, v] : r.metrics.items) metrics[k] = v;
        j["metrics"] = std::move(metrics);
        os << j.dump() << '\n';
    }
    if (!os) throw IoError("failed writing benchmark file: " + path);
}

/// Load JSONL records. Codes are validated against the coding grid when
/// expected_dims is 27 (the default); other lengths (one-hot spaces) only
/// check the length. Record order is preserved; the train/val split depends
/// on it.
inline std::vector<BenchRecord> load_records(const std::string& path, int expected_dims = kCodeDims) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open benchmark file: " + path);
    std::vector<BenchRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        nlohmann::ordered_json j;
        try {
            j = nlohmann::ordered_json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(where + ": malformed record: " + e.what());
        }
        BenchRecord r;
        try {
            r.code = j.at("code").get<std::vector<int>>();
            r.task = j.at("task").get<std::string>();
            for (const auto& [k, v] : j.at("metrics").items()) {
                if (!v.is_number()) throw ValidationError(where + ": metric '" + k + "' is not a number");
                r.metrics.set(k, v.get<double>());
            }
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(where + ": malformed record: " + e.what());
        }
        if (static_cast<int>(r.code.size()) != expected_dims)
            throw ValidationError(where + ": code has " + std::to_string(r.code.size()) +
                                  " entries, expected " + std::to_string(expected_dims));
        if (expected_dims == kCodeDims) {
            std::array<int, kCodeDims> raw{};
            std::copy(r.code.begin(), r.code.end(), raw.begin());
            try {
                code_from_raw_ints(raw);
            } catch (const ValidationError& e) {
                throw ValidationError(where + ": " + e.what());
            }
        }
        records.push_back(std::move(r));
    }
    return records;
}

/// Deterministic analytic stand-in for a trained benchmark metric: a concave
/// quadratic bowl around `optimum_raw` plus pairwise cross terms and
/// per-architecture noise, clamped to [0, 100]. All coefficients are in raw
/// code units.
struct SyntheticTask {
    std::string name = "synthetic";
    std::array<double, kCodeDims> optimum_raw{};
    std::array<double, kCodeDims> curvature{};  // nonnegative
    struct Interaction {
        int i = 0;
        int j = 0;
        double coeff = 0.0;
    };
    std::vector<Interaction> interactions;
    double base = 80.0;
    double noise_sigma = 0.3;
    std::uint64_t seed = 0;
};

/// Accuracy-like score of a code under a synthetic task. The quadratic part
/// is evaluated on the continuous raw coordinates; the noise term is hashed
/// from the rounded grid point, so one architecture always gets one noise
/// draw.
inline double synth_oracle(const SyntheticTask& task, const ArchCode& code) {
    const std::array<double, kCodeDims> x = denormalize(clamp01(code));
    double score = task.base;
    for (int i = 0; i < kCodeDims; ++i) {
        const double d = x[static_cast<std::size_t>(i)] - task.optimum_raw[static_cast<std::size_t>(i)];
        score -= task.curvature[static_cast<std::size_t>(i)] * d * d;
    }
    for (const SyntheticTask::Interaction& it : task.interactions) {
        check_dim_index(it.i);
        check_dim_index(it.j);
        const double di = x[static_cast<std::size_t>(it.i)] - task.optimum_raw[static_cast<std::size_t>(it.i)];
        const double dj = x[static_cast<std::size_t>(it.j)] - task.optimum_raw[static_cast<std::size_t>(it.j)];
        score += it.coeff * di * dj;
    }
    if (task.noise_sigma > 0.0) {
        std::uint64_t h = splitmix64(task.seed ^ 0x6f7261636c65ULL);
        for (int v : round_code(code)) h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(v)));
        // Box-Muller on two hash-derived uniforms.
        const double u1 = std::max(static_cast<double>(splitmix64(h) >> 11) * 0x1.0p-53, 1e-300);
        const double u2 = static_cast<double>(splitmix64(h ^ 0x9e3779b97f4a7c15ULL) >> 11) * 0x1.0p-53;
        score += task.noise_sigma * std::sqrt(-2.0 * std::log(u1)) *
                 std::cos(6.283185307179586476925287 * u2);
    }
    return std::clamp(score, 0.0, 100.0);
}

inline void save_task(const SyntheticTask& task, const std::string& path) {
    nlohmann::ordered_json j;
    j["format"] = "ncp-task";
    j["version"] = 1;
    j["name"] = task.name;
    j["optimum_raw"] = task.optimum_raw;
    j["curvature"] = task.curvature;
    nlohmann::ordered_json inter = nlohmann::ordered_json::array();
    for (const auto& it : task.interactions) inter.push_back({it.i, it.j, it.coeff});
    j["interactions"] = std::move(inter);
    j["base"] = task.base;
    j["noise_sigma"] = task.noise_sigma;
    j["seed"] = task.seed;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open task file for writing: " + path);
    os << j.dump(2) << '\n';
    if (!os) throw IoError("failed writing task file: " + path);
}

inline SyntheticTask load_task(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open task file: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt task file " + path + ": " + e.what());
    }
    try {
        if (j.at("format") != "ncp-task") throw IoError("not a task file: " + path);
        if (j.at("version").get<int>() > 1)
            throw IoError("task file " + path + " uses a newer format version");
        SyntheticTask task;
        task.name = j.at("name").get<std::string>();
        const auto mu = j.at("optimum_raw").get<std::vector<double>>();
        const auto w = j.at("curvature").get<std::vector<double>>();
        if (mu.size() != kCodeDims || w.size() != kCodeDims)
            throw IoError("task file " + path + " must carry 27-dim optimum and curvature");
        std::copy(mu.begin(), mu.end(), task.optimum_raw.begin());
        std::copy(w.begin(), w.end(), task.curvature.begin());
        for (const auto& it : j.at("interactions"))
            task.interactions.push_back({it.at(0).get<int>(), it.at(1).get<int>(), it.at(2).get<double>()});
        task.base = j.at("base").get<double>();
        task.noise_sigma = j.at("noise_sigma").get<double>();
        task.seed = j.at("seed").get<std::uint64_t>();
        return task;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt task file " + path + ": " + e.what());
    }
}

/// Knobs for make_synthetic_task. A few "strong" dimensions prefer one edge
/// of their range and carry most of the score variance (capacity-monotone
/// behaviour); "interior" dimensions hide their optimum strictly inside the
/// range; every other dimension is a weak edge preference. Keeping the
/// strong set small leaves realistic probability mass near the top, the way
/// trained benchmarks behave.
struct SyntheticTaskParams {
    int strong_dims = 6;
    int interior_dims = 7;
    double strong_curvature_lo = 1.05;  // per normalized unit^2
    double strong_curvature_hi = 1.45;
    double interior_curvature_lo = 0.01;
    double interior_curvature_hi = 0.025;
    double weak_curvature_lo = 0.01;
    double weak_curvature_hi = 0.025;
    int interactions = 3;
    double interaction_strength = 0.4;  // cap as a fraction of the smaller curvature
    double noise_sigma = 0.02;
    double base_lo = 70.0;
    double base_hi = 85.0;
};

/// Construct a task with seeded structure: a random split of dimensions into
/// strong-edge, interior and weak-edge, grid-aligned interior optima, and a
/// few bounded cross terms between interior dimensions (diagonally dominant,
/// so the bowl has a unique maximum).
inline SyntheticTask make_synthetic_task(const std::string& name, std::uint64_t seed,
                                         const SyntheticTaskParams& params = {}) {
    SyntheticTask task;
    task.name = name;
    task.seed = splitmix64(seed ^ 0x7461736bULL);
    task.noise_sigma = params.noise_sigma;
    Rng rng(task.seed);
    task.base = rng.uniform(params.base_lo, params.base_hi);

    // Strong preferences live on channel dimensions: their grid is fine
    // enough that near-optimal codes keep realistic sampling mass. Count
    // dimensions land in the interior or weak sets.
    std::vector<int> channel_dims, other_dims;
    for (int i = 0; i < kCodeDims; ++i)
        (dim_kind(i) == DimKind::Channel ? channel_dims : other_dims).push_back(i);
    rng.shuffle(channel_dims);
    rng.shuffle(other_dims);
    std::vector<int> strong(channel_dims.begin(), channel_dims.begin() + params.strong_dims);
    std::vector<int> rest(channel_dims.begin() + params.strong_dims, channel_dims.end());
    rest.insert(rest.end(), other_dims.begin(), other_dims.end());
    rng.shuffle(rest);
    std::vector<int> interior(rest.begin(), rest.begin() + params.interior_dims);

    std::array<double, kCodeDims> curvature_norm{};  // per normalized unit^2
    for (int i = 0; i < kCodeDims; ++i) {
        const DimBounds b = bounds(i);
        const double range = b.max - b.min;
        double mu_norm;
        double w_norm;
        if (std::find(interior.begin(), interior.end(), i) != interior.end()) {
            // Grid-aligned optimum strictly inside the range.
            const int steps = static_cast<int>(range / b.unit);  // 15 or 3
            const int lo = steps == 3 ? 1 : 5;
            const int hi = steps == 3 ? 2 : 11;
            const int notch = lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
            mu_norm = static_cast<double>(notch) / steps;
            w_norm = rng.uniform(params.interior_curvature_lo, params.interior_curvature_hi);
        } else {
            // Monotone preference: the bowl peaks slightly outside the box,
            // so the in-box surface has nonzero slope all the way to the
            // preferred edge. Strong channel dimensions overhang less, which
            // keeps the benchmark's near-optimal mass realistic.
            const bool is_strong = std::find(strong.begin(), strong.end(), i) != strong.end();
            const double overhang = (is_strong && b.unit == 8.0) ? 0.2 : 0.3;
            mu_norm = rng.below(2) == 0 ? -overhang : 1.0 + overhang;
            w_norm = is_strong ? rng.uniform(params.strong_curvature_lo, params.strong_curvature_hi)
                               : rng.uniform(params.weak_curvature_lo, params.weak_curvature_hi);
        }
        task.optimum_raw[static_cast<std::size_t>(i)] = b.min + mu_norm * range;
        curvature_norm[static_cast<std::size_t>(i)] = w_norm;
        task.curvature[static_cast<std::size_t>(i)] = w_norm / (range * range);
    }

    // Cross terms between disjoint interior pairs, each bounded well below
    // the diagonal so the quadratic stays negative definite.
    const int n_pairs = std::min(params.interactions, params.interior_dims / 2);
    for (int k = 0; k < n_pairs; ++k) {
        const int i = interior[static_cast<std::size_t>(2 * k)];
        const int j = interior[static_cast<std::size_t>(2 * k + 1)];
        const double cap = std::min(curvature_norm[static_cast<std::size_t>(i)],
                                    curvature_norm[static_cast<std::size_t>(j)]);
        const double c_norm = (rng.below(2) == 0 ? 1.0 : -1.0) *
                              rng.uniform(0.5 * params.interaction_strength, params.interaction_strength) * cap;
        const double range_i = bounds(i).max - bounds(i).min;
        const double range_j = bounds(j).max - bounds(j).min;
        task.interactions.push_back({i, j, c_norm / (range_i * range_j)});
    }
    return task;
}

/// Parameters for correlated pairs: interior optima need enough curvature
/// that cross-task differences dominate the oracle noise.
inline SyntheticTaskParams task_pair_params() {
    SyntheticTaskParams params;
    params.strong_dims = 8;
    params.interior_dims = 12;
    params.interior_curvature_lo = 0.22;
    params.interior_curvature_hi = 0.28;
    params.interaction_strength = 0.2;
    params.noise_sigma = 0.02;
    return params;
}

/// A pair of tasks with positively correlated optima: edge structure is
/// shared, interior optima are displaced by a fixed fraction of each
/// dimension's range (one count notch, several channel notches).
inline std::pair<SyntheticTask, SyntheticTask> make_synthetic_task_pair(
    std::uint64_t seed, const SyntheticTaskParams& params = task_pair_params()) {
    SyntheticTask a = make_synthetic_task("task_a", seed, params);
    SyntheticTask b = a;
    b.name = "task_b";
    b.seed = splitmix64(seed ^ 0x706169725fULL);
    Rng rng(b.seed);
    b.base = rng.uniform(params.base_lo, params.base_hi);
    for (int i = 0; i < kCodeDims; ++i) {
        const DimBounds bd = bounds(i);
        const double mu = a.optimum_raw[static_cast<std::size_t>(i)];
        if (mu <= bd.min || mu >= bd.max) continue;  // shared edge preference
        // Shift channels by ~half their range, counts by one notch, keeping
        // the optimum strictly inside.
        const double shift = bd.unit == 1.0 ? 1.0 : 7.0 * bd.unit;
        double shifted = mu + (rng.below(2) == 0 ? 1.0 : -1.0) * shift;
        if (shifted <= bd.min) shifted = mu + shift;
        if (shifted >= bd.max) shifted = mu - shift;
        b.optimum_raw[static_cast<std::size_t>(i)] = shifted;
    }
    return {std::move(a), std::move(b)};
}

/// Sample n codes uniformly from the grid and score them with the synthetic
/// oracle (accuracy) and the cost model (FLOPs).
inline std::vector<BenchRecord> gen_benchmark(const SyntheticTask& task, int n, std::uint64_t seed,
                                              const FlopsTable& table) {
    if (n < 1) throw ValidationError("benchmark size must be at least 1");
    Rng rng(splitmix64(seed ^ 0x67656e62ULL));
    std::vector<BenchRecord> records;
    records.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const ArchCode code = sample(rng);
        const auto raw = round_code(code);
        BenchRecord r;
        r.code.assign(raw.begin(), raw.end());
        r.task = task.name;
        r.metrics.set("acc", synth_oracle(task, code));
        r.metrics.set("flops", table.lookup(code));
        records.push_back(std::move(r));
    }
    return records;
}

/// Adapt records for the predictor trainer: raw codes become normalized
/// inputs, metrics stay in their native units.
inline std::vector<Sample> records_to_samples(const std::vector<BenchRecord>& records) {
    std::vector<Sample> samples;
    samples.reserve(records.size());
    for (const BenchRecord& r : records) {
        Sample s;
        s.input.reserve(r.code.size());
        if (static_cast<int>(r.code.size()) == kCodeDims) {
            for (int i = 0; i < kCodeDims; ++i)
                s.input.push_back(normalize_dim(i, static_cast<double>(r.code[static_cast<std::size_t>(i)])));
        } else {
            for (int v : r.code) s.input.push_back(static_cast<double>(v));
        }
        s.metrics = r.metrics;
        samples.push_back(std::move(s));
    }
    return samples;
}

namespace detail {
inline std::vector<double> average_ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double rank = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = rank;
        i = j + 1;
    }
    return ranks;
}
} // namespace detail

/// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size())
        throw ValidationError("spearman inputs have different lengths: " + std::to_string(x.size()) +
                              " vs " + std::to_string(y.size()));
    if (x.size() < 2) throw ValidationError("spearman needs at least 2 points");
    const std::vector<double> rx = detail::average_ranks(x);
    const std::vector<double> ry = detail::average_ranks(y);
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = rx[i] - mx;
        const double dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw ValidationError("spearman is undefined for a constant input");
    return sxy / std::sqrt(sxx * syy);
}

struct CorrMatrix {
    std::vector<std::string> tasks;
    std::vector<std::vector<double>> rho;

    void write_csv(std::ostream& os) const {
        os << "task";
        for (const std::string& t : tasks) os << ',' << t;
        os << '\n';
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            os << tasks[i];
            for (std::size_t j = 0; j < tasks.size(); ++j) os << ',' << rho[i][j];
            os << '\n';
        }
    }
};

/// Spearman matrix of a shared metric across benchmarks covering the
/// identical code set. Symmetric with an exactly-unit diagonal.
inline CorrMatrix cross_task_matrix(const std::vector<std::pair<std::string, std::vector<BenchRecord>>>& benchmarks,
                                    const std::string& metric = "acc") {
    if (benchmarks.empty()) throw ValidationError("cross_task_matrix needs at least one benchmark");
    const std::size_t n_tasks = benchmarks.size();

    // Align records by code across tasks.
    std::vector<std::map<std::vector<int>, double>> by_code(n_tasks);
    for (std::size_t t = 0; t < n_tasks; ++t)
        for (const BenchRecord& r : benchmarks[t].second) by_code[t][r.code] = r.metrics.at(metric);

    const auto& reference = by_code[0];
    for (std::size_t t = 1; t < n_tasks; ++t) {
        if (by_code[t].size() == reference.size() &&
            std::equal(by_code[t].begin(), by_code[t].end(), reference.begin(),
                       [](const auto& a, const auto& b) { return a.first == b.first; }))
            continue;
        std::string missing;
        int shown = 0;
        for (const auto& [code, v] : reference)
            if (!by_code[t].count(code) && shown < 3) {
                missing += " [" + format_raw_code([&] {
                               std::array<int, kCodeDims> raw{};
                               std::copy(code.begin(), code.end(), raw.begin());
                               return raw;
                           }()) + "]";
                ++shown;
            }
        for (const auto& [code, v] : by_code[t])
            if (!reference.count(code) && shown < 6) {
                missing += " extra-in-" + benchmarks[t].first;
                ++shown;
            }
        throw ValidationError("benchmark '" + benchmarks[t].first + "' does not cover the code set of '" +
                              benchmarks[0].first + "':" + (missing.empty() ? " size mismatch" : missing));
    }

    std::vector<std::vector<double>> columns(n_tasks);
    for (std::size_t t = 0; t < n_tasks; ++t) {
        columns[t].reserve(reference.size());
        for (const auto& [code, v] : by_code[t]) columns[t].push_back(v);
    }

    CorrMatrix out;
    out.rho.assign(n_tasks, std::vector<double>(n_tasks, 1.0));
    for (std::size_t i = 0; i < n_tasks; ++i) {
        out.tasks.push_back(benchmarks[i].first);
        for (std::size_t j = i + 1; j < n_tasks; ++j) {
            const double rho = spearman(columns[i], columns[j]);
            out.rho[i][j] = rho;
            out.rho[j][i] = rho;
        }
    }
    return out;
}

} // namespace ncp

#endif // NCP_BENCHIO_HPP
