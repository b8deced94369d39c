#pragma once

#include "grdd/error.hpp"
#include "grdd/spaces.hpp"

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace grdd {

/// One unit: running variable, outcome, and optional treatment / assignment indicators.
struct Observation {
    double r = 0.0;
    MetricObject y;
    std::optional<int> t;
    std::optional<int> z;

    friend bool operator==(const Observation&, const Observation&) = default;
};

struct RddSample {
    SpaceDescriptor space;
    double cutoff = 0.0;
    std::vector<Observation> records;

    [[nodiscard]] std::size_t size() const { return records.size(); }

    [[nodiscard]] std::vector<double> running() const {
        std::vector<double> r;
        r.reserve(records.size());
        for (const auto& o : records) r.push_back(o.r);
        return r;
    }

    [[nodiscard]] std::vector<MetricObject> outcomes() const {
        std::vector<MetricObject> y;
        y.reserve(records.size());
        for (const auto& o : records) y.push_back(o.y);
        return y;
    }

    [[nodiscard]] bool has_treatment() const {
        if (records.empty()) return false;
        for (const auto& o : records)
            if (!o.t) return false;
        return true;
    }

    [[nodiscard]] bool has_assignment() const {
        if (records.empty()) return false;
        for (const auto& o : records)
            if (!o.z) return false;
        return true;
    }

    /// Units strictly below the cutoff (control side).
    [[nodiscard]] std::size_t count_below() const {
        std::size_t k = 0;
        for (const auto& o : records) k += o.r < cutoff ? 1 : 0;
        return k;
    }
    [[nodiscard]] std::size_t count_at_or_above() const { return size() - count_below(); }
};

/// Checks that outcomes share the sample's space, running values are finite and
/// indicators are binary. `check_objects` additionally validates each outcome.
inline void validate_sample(const RddSample& s, bool check_objects = true) {
    if (!std::isfinite(s.cutoff)) fail(ErrorCode::NonFinite, "cutoff is not finite");
    for (std::size_t i = 0; i < s.records.size(); ++i) {
        const auto& o = s.records[i];
        const std::string where = "record " + std::to_string(i);
        if (!std::isfinite(o.r)) fail(ErrorCode::NonFinite, where + ": running variable is not finite");
        if (!o.y.space.same_geometry(s.space)) fail(ErrorCode::MixedSpaces, where + ": outcome space differs");
        if (check_objects) {
            try {
                validate(o.y);
            } catch (const Error& e) {
                fail(e.code(), where + ": " + e.detail());
            }
        }
        if (o.t && *o.t != 0 && *o.t != 1) fail(ErrorCode::InvalidArgument, where + ": treatment must be 0/1");
        if (o.z && *o.z != 0 && *o.z != 1) fail(ErrorCode::InvalidArgument, where + ": assignment must be 0/1");
    }
}

} // namespace grdd
