#ifndef NCP_TESTS_TEST_UTIL_HPP
#define NCP_TESTS_TEST_UTIL_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "ncp/coding.hpp"
#include "ncp/predictor.hpp"

namespace ncp_test {

inline void zero_weights(ncp::Predictor& p) {
    std::fill(p.w1().a.begin(), p.w1().a.end(), 0.0);
    std::fill(p.b1().begin(), p.b1().end(), 0.0);
    for (auto& br : p.branches()) {
        std::fill(br.w2.a.begin(), br.w2.a.end(), 0.0);
        std::fill(br.b2.begin(), br.b2.end(), 0.0);
        std::fill(br.w3.begin(), br.w3.end(), 0.0);
        br.b3 = 0.0;
    }
}

/// A predictor that computes exactly w.x + bias on [0,1]^27: the rectifier
/// pre-activations are biased positive over the whole box, so the network is
/// affine there.
inline ncp::Predictor linear_predictor(const std::vector<double>& w, double bias,
                                       const std::string& metric = "acc") {
    ncp::Predictor p(ncp::kCodeDims, {metric}, 0);
    zero_weights(p);
    for (int i = 0; i < ncp::kCodeDims; ++i) {
        p.w1().row(i)[i] = 1.0;
        p.b1()[static_cast<std::size_t>(i)] = 1.0;  // h1_i = x_i + 1 > 0
    }
    auto& br = p.branches()[0];
    double abs_sum = 0.0, sum = 0.0;
    for (int i = 0; i < ncp::kCodeDims; ++i) {
        br.w2.row(0)[i] = w[static_cast<std::size_t>(i)];
        abs_sum += std::abs(w[static_cast<std::size_t>(i)]);
        sum += w[static_cast<std::size_t>(i)];
    }
    br.b2[0] = 4.0 * abs_sum + 1.0;  // keeps pre2 positive over the box
    br.w3[0] = 1.0;
    br.b3 = bias - sum - br.b2[0];
    return p;
}

/// max_i |analytic_i - fd_i| / max(|analytic_i|, |fd_i|, 1e-6) with central
/// differences of the loss at step h.
inline double max_rel_error_vs_fd(const ncp::Predictor& p, const std::vector<double>& x,
                                  const std::vector<ncp::LossTerm>& terms, double h) {
    const auto loss_at = [&](const std::vector<double>& point) {
        const std::vector<double> pred = p.predict_values(point);
        double loss = 0.0;
        for (const ncp::LossTerm& t : terms)
            loss += t.weight * ncp::smooth_l1(pred[static_cast<std::size_t>(p.metric_index(t.metric))],
                                              t.target);
        return loss;
    };
    const std::vector<double> analytic = p.input_gradient(x, terms);
    double worst = 0.0;
    std::vector<double> probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double up = loss_at(probe);
        probe[i] = x[i] - h;
        const double down = loss_at(probe);
        probe[i] = x[i];
        const double fd = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(analytic[i]), std::abs(fd), 1e-6});
        worst = std::max(worst, std::abs(analytic[i] - fd) / denom);
    }
    return worst;
}

/// Small deterministic training set: a separable quadratic of the normalized
/// coordinates.
inline std::vector<ncp::Sample> quadratic_records(int n, std::uint64_t seed) {
    ncp::Rng rng(seed);
    std::vector<ncp::Sample> records;
    for (int k = 0; k < n; ++k) {
        ncp::Sample s;
        s.input.resize(ncp::kCodeDims);
        double score = 80.0;
        for (int i = 0; i < ncp::kCodeDims; ++i) {
            s.input[static_cast<std::size_t>(i)] = rng.uniform01();
            const double d = s.input[static_cast<std::size_t>(i)] - 0.6;
            score -= 0.5 * d * d;
        }
        s.metrics.set("acc", score);
        records.push_back(std::move(s));
    }
    return records;
}

} // namespace ncp_test

#endif // NCP_TESTS_TEST_UTIL_HPP
