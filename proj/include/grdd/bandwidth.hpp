#pragma once

// Data-adaptive bandwidth selection: pick the b whose one-sided fits agree best
// away from the cutoff, where the regression function is continuous.

#include "grdd/error.hpp"
#include "grdd/frechet.hpp"
#include "grdd/sample.hpp"
#include "grdd/spaces.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace grdd {

inline constexpr std::size_t kMinPerSide = 20;

struct BandwidthBounds {
    double b_min = 0.0;
    double b_max = 0.0;
};

struct BandwidthConfig {
    std::size_t grid_size = 20;
    std::size_t eval_points = 100;
    KernelKind kernel = KernelKind::Triangular;
    FrechetSolveConfig solver;
    /// Worker threads for candidate losses; 0 means one per hardware thread.
    unsigned threads = 1;
};

/// Evaluation region as up to two open intervals.
struct EvalRegion {
    struct Piece {
        double lo = 0.0;
        double hi = 0.0;
        std::vector<double> points;
    };
    std::vector<Piece> pieces;

    [[nodiscard]] bool contains(double r) const {
        return std::any_of(pieces.begin(), pieces.end(), [r](const Piece& p) { return r > p.lo && r < p.hi; });
    }
    [[nodiscard]] std::vector<double> points() const {
        std::vector<double> out;
        for (const auto& p : pieces) out.insert(out.end(), p.points.begin(), p.points.end());
        return out;
    }
};

struct LossResult {
    double loss = 0.0;
    std::size_t evaluated = 0;
    std::size_t degenerate = 0;
};

struct BandwidthSearch {
    double b_min = 0.0;
    double b_max = 0.0;
    std::vector<double> grid;
    EvalRegion region;
    std::vector<double> losses;
    std::vector<std::size_t> degenerate;
    double b_star = 0.0;
    std::size_t star_index = 0;
    double loss_floor = 0.0;
};

/// Bounds before the b_min < b_max check.
inline BandwidthBounds raw_bounds(std::span<const double> r_values, double c) {
    std::vector<double> below, above;
    for (double r : r_values) {
        if (!std::isfinite(r)) fail(ErrorCode::NonFinite, "running variable is not finite");
        (r < c ? below : above).push_back(r);
    }
    if (below.size() < kMinPerSide || above.size() < kMinPerSide)
        fail(ErrorCode::InsufficientData, "need at least 20 observations on each side of the cutoff (have " +
                                              std::to_string(below.size()) + " below, " + std::to_string(above.size()) +
                                              " at or above)");
    std::vector<double> r(r_values.begin(), r_values.end());
    std::sort(r.begin(), r.end());
    double gap = 0.0;
    for (std::size_t i = 1; i < r.size(); ++i) gap = std::max(gap, r[i] - r[i - 1]);

    std::sort(below.begin(), below.end(), std::greater<>());
    std::sort(above.begin(), above.end());
    const double d_below = c - below[kMinPerSide - 1];
    const double d_above = above[kMinPerSide - 1] - c;

    BandwidthBounds b;
    b.b_min = std::max({gap, d_below, d_above});
    b.b_max = 0.5 * std::min(c - r.front(), r.back() - c);
    return b;
}

inline BandwidthBounds compute_bounds(std::span<const double> r_values, double c) {
    const BandwidthBounds b = raw_bounds(r_values, c);
    if (!(b.b_min < b.b_max))
        fail(ErrorCode::InvertedBounds, "b_min = " + std::to_string(b.b_min) + " is not below b_max = " + std::to_string(b.b_max));
    return b;
}

/// Log-spaced candidates from b_min to b_max inclusive.
inline std::vector<double> bandwidth_grid(const BandwidthBounds& b, std::size_t size) {
    if (size == 0) fail(ErrorCode::InvalidArgument, "bandwidth grid needs at least one candidate");
    if (size == 1) return {b.b_min};
    std::vector<double> g(size);
    const double l0 = std::log(b.b_min), l1 = std::log(b.b_max);
    for (std::size_t k = 0; k < size; ++k)
        g[k] = std::exp(l0 + (l1 - l0) * static_cast<double>(k) / static_cast<double>(size - 1));
    g.front() = b.b_min;
    g.back() = b.b_max;
    return g;
}

/// Equally spaced points over [R_min, R_max] that avoid the cutoff band and both tails.
inline EvalRegion evaluation_region(std::span<const double> r_values, double c, double b_min, std::size_t n_points) {
    if (r_values.empty()) fail(ErrorCode::EmptyInput, "no running values");
    if (n_points < 2) fail(ErrorCode::InvalidArgument, "need at least two evaluation points");
    const auto [lo_it, hi_it] = std::minmax_element(r_values.begin(), r_values.end());
    const double r_min = *lo_it, r_max = *hi_it;
    EvalRegion region;
    region.pieces.push_back({r_min + b_min, c - b_min, {}});
    region.pieces.push_back({c + b_min, r_max - b_min, {}});
    for (std::size_t k = 0; k < n_points; ++k) {
        const double x = r_min + (r_max - r_min) * static_cast<double>(k) / static_cast<double>(n_points - 1);
        for (auto& p : region.pieces)
            if (x > p.lo && x < p.hi) p.points.push_back(x);
    }
    return region;
}

namespace detail {

inline WindowLimits left_window(double r, double c, double r_min, double b) {
    WindowLimits w;
    w.lo = r < c ? std::max(r - 2.0 * b, r_min) : std::max(r - 2.0 * b, c);
    w.hi = r;
    return w;
}

/// For r < c the window stops short of c: units at R = c are treated.
inline WindowLimits right_window(double r, double c, double r_max, double b) {
    WindowLimits w;
    w.lo = r;
    if (r < c) {
        w.hi = std::min(r + 2.0 * b, c);
        w.hi_open = w.hi == c;
    } else {
        w.hi = std::min(r + 2.0 * b, r_max);
    }
    return w;
}

} // namespace detail

/// Integrated squared discrepancy between left- and right-windowed fits over the region.
inline LossResult discrepancy_loss(const LocalFrechetRegressor& reg, double c, double b, const EvalRegion& region) {
    if (!(b > 0.0)) fail(ErrorCode::InvalidArgument, "bandwidth must be positive");
    const auto r = reg.running();
    const auto [lo_it, hi_it] = std::minmax_element(r.begin(), r.end());
    const double r_min = *lo_it, r_max = *hi_it;

    LossResult out;
    double integral = 0.0, covered = 0.0, nominal = 0.0, point_sum = 0.0;
    for (const auto& piece : region.pieces) {
        std::vector<double> d2(piece.points.size(), 0.0);
        std::vector<bool> ok(piece.points.size(), false);
        for (std::size_t k = 0; k < piece.points.size(); ++k) {
            const double x = piece.points[k];
            try {
                const MetricObject m_left = reg.estimate(x, 2.0 * b, KernelSide::TwoSided, detail::left_window(x, c, r_min, b)).point;
                const MetricObject m_right = reg.estimate(x, 2.0 * b, KernelSide::TwoSided, detail::right_window(x, c, r_max, b)).point;
                const double d = distance(m_left, m_right);
                d2[k] = d * d;
                ok[k] = true;
                ++out.evaluated;
                point_sum += d2[k];
            } catch (const Error& e) {
                if (e.code() != ErrorCode::DegenerateWindow && e.code() != ErrorCode::SolverDiverged) throw;
                ++out.degenerate;
            }
        }
        for (std::size_t k = 1; k < piece.points.size(); ++k) {
            const double len = piece.points[k] - piece.points[k - 1];
            nominal += len;
            if (ok[k] && ok[k - 1]) {
                integral += 0.5 * len * (d2[k] + d2[k - 1]);
                covered += len;
            }
        }
    }
    if (out.evaluated == 0)
        fail(ErrorCode::AllWindowsDegenerate, "every evaluation window is degenerate at b = " + std::to_string(b));
    if (covered > 0.0)
        out.loss = integral * nominal / covered;
    else
        out.loss = point_sum / static_cast<double>(out.evaluated) * (nominal > 0.0 ? nominal : 1.0);
    return out;
}

inline LossResult discrepancy_loss(const RddSample& sample, double b, const EvalRegion& region, const BandwidthConfig& cfg = {}) {
    return discrepancy_loss(LocalFrechetRegressor(sample, cfg.kernel, cfg.solver), sample.cutoff, b, region);
}

/// Smallest candidate whose loss is within round-off of the minimum. Losses at or
/// below `floor` count as zero.
inline std::size_t argmin_smallest(std::span<const double> losses, double floor = 0.0) {
    const double lo = *std::min_element(losses.begin(), losses.end());
    const double hi = *std::max_element(losses.begin(), losses.end());
    const double cut = std::max(lo + 1e-9 * lo + 1e-12 * hi, floor);
    for (std::size_t k = 0; k < losses.size(); ++k)
        if (losses[k] <= cut) return k;
    return 0;
}

/// Round-off level of L(b): squared outcome spread times 1e-24 times the region length.
inline double loss_floor(std::span<const MetricObject> y, const EvalRegion& region) {
    if (y.empty()) return 0.0;
    double spread = 0.0;
    for (const auto& o : y) spread = std::max(spread, distance(o, y.front()));
    double length = 0.0;
    for (const auto& p : region.pieces) length += std::max(0.0, p.hi - p.lo);
    return 1e-24 * spread * spread * length;
}

inline BandwidthSearch select_bandwidth(const RddSample& sample, const BandwidthConfig& cfg = {}) {
    const std::vector<double> r = sample.running();
    const BandwidthBounds bounds = compute_bounds(r, sample.cutoff);
    BandwidthSearch s;
    s.b_min = bounds.b_min;
    s.b_max = bounds.b_max;
    s.grid = bandwidth_grid(bounds, cfg.grid_size);
    s.region = evaluation_region(r, sample.cutoff, bounds.b_min, cfg.eval_points);
    if (s.region.points().empty()) fail(ErrorCode::AllWindowsDegenerate, "evaluation region contains no points");

    const LocalFrechetRegressor reg(sample, cfg.kernel, cfg.solver);
    s.losses.assign(s.grid.size(), 0.0);
    s.degenerate.assign(s.grid.size(), 0);
    std::vector<std::exception_ptr> errors(s.grid.size());
    auto work = [&](std::size_t k) {
        try {
            const LossResult l = discrepancy_loss(reg, sample.cutoff, s.grid[k], s.region);
            s.losses[k] = l.loss;
            s.degenerate[k] = l.degenerate;
        } catch (...) {
            errors[k] = std::current_exception();
        }
    };
    unsigned threads = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.threads;
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, s.grid.size()));
    if (threads <= 1) {
        for (std::size_t k = 0; k < s.grid.size(); ++k) work(k);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t k = t; k < s.grid.size(); k += threads) work(k);
            });
        for (auto& th : pool) th.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    s.loss_floor = loss_floor(reg.outcomes(), s.region);
    s.star_index = argmin_smallest(s.losses, s.loss_floor);
    s.b_star = s.grid[s.star_index];
    return s;
}

inline void write_bandwidth_csv(std::ostream& os, const BandwidthSearch& s) {
    const auto old = os.precision(17);
    os << "b,L\n";
    for (std::size_t k = 0; k < s.grid.size(); ++k) os << s.grid[k] << ',' << s.losses[k] << "\n";
    os.precision(old);
}

} // namespace grdd
