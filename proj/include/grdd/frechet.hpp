#pragma once

// Kernel machinery, local-linear (signed) weights and weighted Fréchet means.
//
// The local Fréchet regression estimate at x0 on one side is the minimizer of
//   n_t⁻¹ Σ ŝ(x0; R_i, h) d²(ν, Y_i)
// where ŝ are the local-linear weights built from the one-sided kernel moments.
// Spaces with a Hilbert embedding are solved exactly by averaging in the
// embedding; the sphere uses projected Riemannian gradient descent.

#include "grdd/error.hpp"
#include "grdd/sample.hpp"
#include "grdd/spaces.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace grdd {

enum class KernelKind { Triangular, Uniform };
enum class KernelSide { Left, Right, TwoSided };
enum class Side { Left, Right };

struct KernelSpec {
    KernelKind kind = KernelKind::Triangular;
    KernelSide side = KernelSide::TwoSided;
};

inline KernelSide to_kernel_side(Side s) { return s == Side::Left ? KernelSide::Left : KernelSide::Right; }
inline const char* to_string(Side s) { return s == Side::Left ? "left" : "right"; }

/// k(x) restricted to the requested side: Left keeps x < 0, Right keeps x >= 0.
inline double kernel_eval(KernelSpec spec, double x) {
    if (!(x >= -1.0 && x <= 1.0)) return 0.0;
    if (spec.side == KernelSide::Left && !(x < 0.0)) return 0.0;
    if (spec.side == KernelSide::Right && !(x >= 0.0)) return 0.0;
    switch (spec.kind) {
    case KernelKind::Triangular: return 1.0 - std::abs(x);
    case KernelKind::Uniform: return 1.0;
    }
    return 0.0;
}

/// Restricts which observations may enter a window (in units of R).
struct WindowLimits {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool lo_open = false;
    bool hi_open = false;

    [[nodiscard]] bool contains(double r) const {
        const bool above = lo_open ? r > lo : r >= lo;
        const bool below = hi_open ? r < hi : r <= hi;
        return above && below;
    }
};

inline constexpr double kDegenerateSigma2 = 1e-14;

struct WeightProfile {
    double x0 = 0.0;
    double h = 0.0;
    KernelSpec kernel;
    double mu0 = 0.0;
    double mu1 = 0.0;
    double mu2 = 0.0;
    double sigma2 = 0.0;
    /// Count normalization n_t: eligible observations on the kernel's side.
    std::size_t n_norm = 0;
    /// Signed weights ŝ(x0; R_i, h), one per input observation (zero outside the window).
    std::vector<double> weights;

    [[nodiscard]] double normalized_sum() const {
        return std::accumulate(weights.begin(), weights.end(), 0.0) / static_cast<double>(n_norm);
    }
    [[nodiscard]] std::size_t contributing() const {
        return static_cast<std::size_t>(std::count_if(weights.begin(), weights.end(), [](double w) { return w != 0.0; }));
    }
};

/// Local-linear weights at x0 with bandwidth h. Throws DegenerateWindow when fewer than
/// two distinct running values carry kernel mass or σ̂² ≤ 1e-14. Moments are summed in
/// `order` when given, so callers can make the result independent of record order.
inline WeightProfile compute_weights(std::span<const double> r, double x0, double h, KernelSpec spec,
                                     WindowLimits limits = {}, std::span<const std::size_t> order = {}) {
    if (!(h > 0.0) || !std::isfinite(h)) fail(ErrorCode::InvalidArgument, "bandwidth must be positive and finite");
    WeightProfile p;
    p.x0 = x0;
    p.h = h;
    p.kernel = spec;
    p.weights.assign(r.size(), 0.0);

    std::vector<double> kern(r.size(), 0.0);
    double lo_r = std::numeric_limits<double>::infinity();
    double hi_r = -lo_r;
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) {
        const std::size_t i = order.empty() ? j : order[j];
        if (!limits.contains(r[i])) continue;
        const double x = r[i] - x0;
        const bool on_side = spec.side == KernelSide::TwoSided || (spec.side == KernelSide::Left ? x < 0.0 : x >= 0.0);
        if (!on_side) continue;
        ++p.n_norm;
        const double k = kernel_eval(spec, x / h) / h;
        if (k == 0.0) continue;
        kern[i] = k;
        s0 += k;
        s1 += k * x;
        s2 += k * x * x;
        lo_r = std::min(lo_r, r[i]);
        hi_r = std::max(hi_r, r[i]);
    }
    if (p.n_norm == 0 || !(hi_r > lo_r))
        fail(ErrorCode::DegenerateWindow, "fewer than two distinct running values in the window at " + std::to_string(x0));
    const double n = static_cast<double>(p.n_norm);
    p.mu0 = s0 / n;
    p.mu1 = s1 / n;
    p.mu2 = s2 / n;
    p.sigma2 = p.mu0 * p.mu2 - p.mu1 * p.mu1;
    if (!(p.sigma2 > kDegenerateSigma2))
        fail(ErrorCode::DegenerateWindow, "normalizer sigma^2 = " + std::to_string(p.sigma2) + " at " + std::to_string(x0));
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (kern[i] == 0.0) continue;
        p.weights[i] = kern[i] * (p.mu2 - p.mu1 * (r[i] - x0)) / p.sigma2;
    }
    return p;
}

struct FrechetSolveConfig {
    int max_iter = 1000;
    double grad_tol = 1e-12;
    double step_shrink = 0.5;
    int multistart = 5;
};

struct FrechetSolution {
    MetricObject point;
    /// Σ w_i d²(point, Y_i) with the weights as supplied.
    double objective = 0.0;
    int iterations = 0;
    bool converged = true;
    /// The unconstrained minimizer left the space and was projected back.
    bool projected = false;
    /// Largest distance between multistart solutions whose objectives tie with the best.
    double multistart_spread = 0.0;
};

namespace detail {

inline void check_frechet_inputs(std::span<const MetricObject> objects, std::span<const double> weights) {
    if (objects.empty()) fail(ErrorCode::EmptyInput, "no objects to average");
    if (objects.size() != weights.size()) fail(ErrorCode::ShapeMismatch, "objects and weights differ in length");
    for (double w : weights)
        if (!std::isfinite(w)) fail(ErrorCode::NonFinite, "weight is not finite");
    for (const auto& o : objects) {
        if (!o.space.same_geometry(objects.front().space)) fail(ErrorCode::SpaceMismatch, "objects from different spaces");
        require_shape(o.space, o.data);
    }
}

inline double weight_total(std::span<const double> weights) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(total > 1e-300))
        fail(ErrorCode::SolverDiverged, "weights sum to a non-positive value; the objective has no minimizer");
    return total;
}

/// Exact minimizer for embeddable spaces given embedded rows.
template <class Rows>
FrechetSolution solve_embedded(const SpaceDescriptor& space, const Rows& psi, std::span<const std::size_t> idx,
                               std::span<const double> w) {
    double total = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) total += w[k];
    if (!(total > 1e-300))
        fail(ErrorCode::SolverDiverged, "weights sum to a non-positive value; the objective has no minimizer");
    // Accumulate offsets from the first row so that identical inputs reproduce exactly.
    const Vector anchor = psi.row(static_cast<Eigen::Index>(idx.front())).transpose();
    Vector offset = Vector::Zero(psi.cols());
    for (std::size_t k = 1; k < idx.size(); ++k)
        offset.noalias() += w[k] * (psi.row(static_cast<Eigen::Index>(idx[k])).transpose() - anchor);
    const Vector mean = anchor + offset / total;
    FrechetSolution sol;
    sol.point = inverse_embed_projected(mean, space, &sol.projected);
    const Vector hw = hilbert_weights(space);
    const Vector at = sol.projected ? embed(sol.point) : mean;
    double obj = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const auto diff = at.transpose() - psi.row(static_cast<Eigen::Index>(idx[k]));
        obj += w[k] * (hw.transpose().array() * diff.array().square()).sum();
    }
    sol.objective = obj;
    return sol;
}

inline double sphere_objective(std::span<const Vector> ys, std::span<const double> w, const Vector& nu) {
    double f = 0.0;
    for (std::size_t i = 0; i < ys.size(); ++i) {
        const double d = sphere_dist(nu, ys[i]);
        f += w[i] * d * d;
    }
    return f;
}

/// Projected Riemannian gradient descent with backtracking from one start.
inline FrechetSolution sphere_descent(const SpaceDescriptor& space, std::span<const Vector> ys,
                                      std::span<const double> w, const Vector& start, const FrechetSolveConfig& cfg) {
    Vector nu = start;
    double f = sphere_objective(ys, w, nu);
    FrechetSolution sol;
    sol.converged = false;
    int it = 0;
    for (; it < cfg.max_iter; ++it) {
        Vector g = Vector::Zero(nu.size());
        for (std::size_t i = 0; i < ys.size(); ++i) {
            if (w[i] == 0.0) continue;
            g.noalias() -= 2.0 * w[i] * sphere_log(nu, ys[i]);
        }
        const double gn = g.norm();
        if (gn < cfg.grad_tol) {
            sol.converged = true;
            break;
        }
        double eta = 0.5;
        double gain = 0.0;
        for (int k = 0; k < 60; ++k, eta *= cfg.step_shrink) {
            Vector cand = orthant_project(sphere_exp(nu, -eta * g));
            const double fc = sphere_objective(ys, w, cand);
            if (fc < f) {
                gain = f - fc;
                nu = std::move(cand);
                f = fc;
                break;
            }
        }
        // No descent left inside the orthant, or progress below round-off.
        if (gain <= 1e-15 * (1.0 + std::abs(f))) {
            sol.converged = true;
            ++it;
            break;
        }
    }
    sol.point = MetricObject{space, nu};
    sol.objective = f;
    sol.iterations = it;
    return sol;
}

inline FrechetSolution solve_sphere(const SpaceDescriptor& space, std::span<const Vector> ys,
                                    std::span<const double> weights, const FrechetSolveConfig& cfg) {
    const double total = weight_total(weights);
    std::vector<double> w(weights.begin(), weights.end());
    for (double& x : w) x /= total;

    std::vector<Vector> starts;
    Vector extrinsic = Vector::Zero(ys.front().size());
    for (std::size_t i = 0; i < ys.size(); ++i) extrinsic += w[i] * ys[i];
    starts.push_back(orthant_project(extrinsic));

    std::vector<std::size_t> order(ys.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(w[a]) > std::abs(w[b]); });
    const std::size_t top = std::min<std::size_t>(static_cast<std::size_t>(std::max(cfg.multistart, 0)), order.size());
    for (std::size_t k = 0; k < top; ++k) starts.push_back(ys[order[k]]);

    // The best input object is always a start, so the result never loses to any of them.
    std::size_t best_obj = 0;
    double best_obj_f = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ys.size(); ++i) {
        const double f = sphere_objective(ys, w, ys[i]);
        if (f < best_obj_f) {
            best_obj_f = f;
            best_obj = i;
        }
    }
    starts.push_back(ys[best_obj]);

    std::vector<FrechetSolution> runs;
    runs.reserve(starts.size());
    for (const auto& s : starts) runs.push_back(sphere_descent(space, ys, w, s, cfg));
    std::size_t best = 0;
    for (std::size_t k = 1; k < runs.size(); ++k)
        if (runs[k].objective < runs[best].objective) best = k;
    FrechetSolution out = runs[best];
    int iters = 0;
    double spread = 0.0;
    for (const auto& run : runs) {
        iters += run.iterations;
        if (run.objective <= out.objective + 1e-9 * (1.0 + std::abs(out.objective)))
            spread = std::max(spread, sphere_dist(run.point.data, out.point.data));
    }
    out.iterations = iters;
    out.multistart_spread = spread;
    out.objective *= total;
    return out;
}

} // namespace detail

/// Σ w_i d²(ν, Y_i).
inline double frechet_objective(std::span<const MetricObject> objects, std::span<const double> weights,
                                const MetricObject& nu) {
    double f = 0.0;
    for (std::size_t i = 0; i < objects.size(); ++i) {
        const double d = distance(nu, objects[i]);
        f += weights[i] * d * d;
    }
    return f;
}

/// Minimizer of Σ w_i d²(ν, Y_i) over the space, for possibly signed weights with positive sum.
inline FrechetSolution solve_frechet(std::span<const MetricObject> objects, std::span<const double> weights,
                                     const FrechetSolveConfig& cfg = {}) {
    detail::check_frechet_inputs(objects, weights);
    if (cfg.max_iter < 1 || !(cfg.grad_tol > 0.0)) fail(ErrorCode::InvalidArgument, "invalid solver configuration");
    const SpaceDescriptor& space = objects.front().space;
    std::vector<std::size_t> idx;
    std::vector<double> w;
    for (std::size_t i = 0; i < objects.size(); ++i)
        if (weights[i] != 0.0) {
            idx.push_back(i);
            w.push_back(weights[i]);
        }
    if (idx.empty()) fail(ErrorCode::SolverDiverged, "all weights are zero");
    if (space.embedding_available()) {
        linalg::RowMajorMatrix psi(static_cast<Eigen::Index>(objects.size()),
                                   static_cast<Eigen::Index>(space.payload_size()));
        for (std::size_t k = 0; k < idx.size(); ++k) psi.row(static_cast<Eigen::Index>(idx[k])) = embed(objects[idx[k]]).transpose();
        return detail::solve_embedded(space, psi, idx, w);
    }
    std::vector<Vector> ys;
    ys.reserve(idx.size());
    for (std::size_t i : idx) ys.push_back(objects[i].data);
    return detail::solve_sphere(space, ys, w, cfg);
}

inline MetricObject weighted_frechet_mean(std::span<const MetricObject> objects, std::span<const double> weights,
                                          const FrechetSolveConfig& cfg = {}) {
    return solve_frechet(objects, weights, cfg).point;
}

/// Unweighted sample Fréchet mean.
inline MetricObject sample_frechet_mean(std::span<const MetricObject> objects, const FrechetSolveConfig& cfg = {}) {
    std::vector<double> ones(objects.size(), 1.0);
    return weighted_frechet_mean(objects, ones, cfg);
}

/// Indices sorted by running value, then payload. Sums taken in this order do not
/// depend on how the records were listed.
inline std::vector<std::size_t> canonical_order(std::span<const double> r, std::span<const MetricObject> y) {
    std::vector<std::size_t> idx(r.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (r[a] != r[b]) return r[a] < r[b];
        const Vector& u = y[a].data;
        const Vector& v = y[b].data;
        return std::lexicographical_compare(u.data(), u.data() + u.size(), v.data(), v.data() + v.size());
    });
    return idx;
}

/// Local Fréchet regression bound to one set of observations. Embeddings are
/// computed once so repeated fits (bandwidth search, curves) stay cheap.
class LocalFrechetRegressor {
public:
    LocalFrechetRegressor(SpaceDescriptor space, std::vector<double> r, std::vector<MetricObject> y,
                          KernelKind kernel = KernelKind::Triangular, FrechetSolveConfig cfg = {})
        : space_(std::move(space)), r_(std::move(r)), y_(std::move(y)), kernel_(kernel), cfg_(cfg) {
        if (r_.size() != y_.size()) fail(ErrorCode::ShapeMismatch, "running values and outcomes differ in length");
        if (space_.embedding_available()) {
            psi_.resize(static_cast<Eigen::Index>(y_.size()), static_cast<Eigen::Index>(space_.payload_size()));
            for (std::size_t i = 0; i < y_.size(); ++i) psi_.row(static_cast<Eigen::Index>(i)) = embed(y_[i]).transpose();
        }
        order_ = canonical_order(r_, y_);
    }

    explicit LocalFrechetRegressor(const RddSample& sample, KernelKind kernel = KernelKind::Triangular,
                                   FrechetSolveConfig cfg = {})
        : LocalFrechetRegressor(sample.space, sample.running(), sample.outcomes(), kernel, cfg) {}

    [[nodiscard]] const SpaceDescriptor& space() const { return space_; }
    [[nodiscard]] std::span<const double> running() const { return r_; }
    [[nodiscard]] std::span<const MetricObject> outcomes() const { return y_; }
    [[nodiscard]] std::size_t size() const { return r_.size(); }
    [[nodiscard]] std::span<const std::size_t> order() const { return order_; }

    [[nodiscard]] WeightProfile weights(double x0, double h, KernelSide side, WindowLimits limits = {}) const {
        return compute_weights(r_, x0, h, KernelSpec{kernel_, side}, limits, order_);
    }

    [[nodiscard]] FrechetSolution fit(const WeightProfile& p) const {
        std::vector<std::size_t> idx;
        std::vector<double> w;
        for (std::size_t i : order_)
            if (p.weights[i] != 0.0) {
                idx.push_back(i);
                w.push_back(p.weights[i] / static_cast<double>(p.n_norm));
            }
        if (idx.empty()) fail(ErrorCode::DegenerateWindow, "no observation carries weight");
        if (space_.embedding_available()) return detail::solve_embedded(space_, psi_, idx, w);
        std::vector<Vector> ys;
        ys.reserve(idx.size());
        for (std::size_t i : idx) ys.push_back(y_[i].data);
        return detail::solve_sphere(space_, ys, w, cfg_);
    }

    [[nodiscard]] FrechetSolution estimate(double x0, double h, KernelSide side, WindowLimits limits = {}) const {
        return fit(weights(x0, h, side, limits));
    }

private:
    SpaceDescriptor space_;
    std::vector<double> r_;
    std::vector<MetricObject> y_;
    linalg::RowMajorMatrix psi_;
    std::vector<std::size_t> order_;
    KernelKind kernel_;
    FrechetSolveConfig cfg_;
};

/// One-sided local Fréchet regression of the sample's outcomes at r.
inline MetricObject lfr_estimate(const RddSample& sample, double r, double h, Side side,
                                 const FrechetSolveConfig& cfg = {}, KernelKind kernel = KernelKind::Triangular) {
    return LocalFrechetRegressor(sample, kernel, cfg).estimate(r, h, to_kernel_side(side)).point;
}

} // namespace grdd
