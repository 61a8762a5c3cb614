#ifndef NCP_METRICS_HPP
#define NCP_METRICS_HPP

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ncp/common.hpp"

namespace ncp {

/// Named scalar metrics in insertion order (order is part of file formats and
/// must survive round-trips). Accuracy-like metrics are percentages, FLOPs
/// are GFLOPs.
struct MetricSet {
    std::vector<std::pair<std::string, double>> items;

    MetricSet() = default;
    MetricSet(std::initializer_list<std::pair<std::string, double>> init) : items(init) {}

    bool has(std::string_view name) const {
        for (const auto& [k, v] : items)
            if (k == name) return true;
        return false;
    }

    double at(std::string_view name) const {
        for (const auto& [k, v] : items)
            if (k == name) return v;
        throw ValidationError("metric not present: " + std::string(name));
    }

    void set(std::string_view name, double value) {
        for (auto& [k, v] : items)
            if (k == name) {
                v = value;
                return;
            }
        items.emplace_back(std::string(name), value);
    }

    std::size_t size() const { return items.size(); }

    friend bool operator==(const MetricSet&, const MetricSet&) = default;
};

} // namespace ncp

#endif // NCP_METRICS_HPP
