#pragma once

#include "grdd/grdd.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace grdd::testing {

using Rng = std::mt19937_64;

inline std::vector<SpaceDescriptor> all_spaces() {
    return {SpaceDescriptor::euclidean(3),
            SpaceDescriptor::functional(11, 0.0, 2.0),
            SpaceDescriptor::sphere(4),
            SpaceDescriptor::laplacian(4),
            SpaceDescriptor::spd(3, SpdMetric::Frobenius),
            SpaceDescriptor::spd(3, SpdMetric::Power, 0.5),
            SpaceDescriptor::spd(3, SpdMetric::LogEuclidean),
            SpaceDescriptor::spd(3, SpdMetric::LogCholesky),
            SpaceDescriptor::wasserstein(21)};
}

inline std::vector<SpaceDescriptor> embeddable_spaces() {
    std::vector<SpaceDescriptor> out;
    for (const auto& s : all_spaces())
        if (s.embedding_available()) out.push_back(s);
    return out;
}

inline Vector normal_vector(Rng& rng, Eigen::Index n, double sd = 1.0) {
    std::normal_distribution<double> nd(0.0, sd);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(rng);
    return v;
}

/// A random valid object of `s`.
inline MetricObject random_object(const SpaceDescriptor& s, Rng& rng) {
    const auto m = static_cast<Eigen::Index>(s.dim);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    switch (s.tag) {
    case SpaceTag::Euclidean:
    case SpaceTag::FunctionalL2: return make_object(s, normal_vector(rng, m));
    case SpaceTag::CompositionalSphere: {
        Vector v = normal_vector(rng, m).cwiseAbs().array() + 0.05;
        return make_object(s, v / v.norm());
    }
    case SpaceTag::NetworkLaplacian: {
        linalg::Matrix w = linalg::Matrix::Zero(m, m);
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = i + 1; j < m; ++j)
                if (u(rng) < 0.7) w(i, j) = w(j, i) = 2.0 * u(rng);
        return make_object(s, sim::laplacian_from_weights(w));
    }
    case SpaceTag::SpdMatrix: {
        const linalg::Matrix b = linalg::as_matrix(normal_vector(rng, m * m, 0.7), m);
        const linalg::Matrix a = b * b.transpose() + 0.3 * linalg::Matrix::Identity(m, m);
        return make_object(s, linalg::flatten(linalg::symmetrize(a)));
    }
    case SpaceTag::Wasserstein1D: {
        Vector q(m);
        double acc = 2.0 * (u(rng) - 0.5);
        for (Eigen::Index i = 0; i < m; ++i) {
            acc += 0.2 * std::exp(normal_vector(rng, 1)[0]);
            q[i] = acc;
        }
        return make_object(s, q);
    }
    }
    return {};
}

/// Sharp Euclidean sample with a unit jump at 0.
inline RddSample scalar_sample(Rng& rng, std::size_t n, double noise = 0.3) {
    RddSample s;
    s.space = SpaceDescriptor::euclidean(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> e(0.0, noise > 0.0 ? noise : 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = u(rng);
        Vector y(1);
        y[0] = 0.5 * r + (r >= 0.0 ? 1.0 : 0.0) + (noise > 0.0 ? e(rng) : 0.0);
        const int t = r >= 0.0;
        s.records.push_back({r, MetricObject{s.space, y}, t, t});
    }
    return s;
}

/// Sample in `space` whose outcome moves along a geodesic in r and jumps at 0.
inline RddSample space_sample(const SpaceDescriptor& space, Rng& rng, std::size_t n) {
    const MetricObject a = random_object(space, rng);
    const MetricObject b = random_object(space, rng);
    const MetricObject c = random_object(space, rng);
    RddSample s;
    s.space = space;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> jitter(0.0, 0.3);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = u(rng);
        const double t = std::clamp(0.5 + 0.4 * r + (jitter(rng) - 0.15), 0.0, 1.0);
        MetricObject y = r >= 0.0 ? geodesic_eval(a, c, t) : geodesic_eval(a, b, t);
        const int d = r >= 0.0;
        s.records.push_back({r, std::move(y), d, d});
    }
    return s;
}

/// Normalized local-linear weights ŝ(c; R_i, h) / n_side for one side with the
/// triangular kernel, computed from scratch.
inline std::vector<double> oracle_weights(const std::vector<double>& r, double c, double h, bool right) {
    double n = 0, s0 = 0, s1 = 0, s2 = 0;
    std::vector<double> k(r.size(), 0.0);
    for (std::size_t i = 0; i < r.size(); ++i) {
        const double x = r[i] - c;
        if ((x >= 0.0) != right) continue;
        n += 1.0;
        k[i] = std::max(0.0, 1.0 - std::abs(x) / h) / h;
        s0 += k[i];
        s1 += k[i] * x;
        s2 += k[i] * x * x;
    }
    s0 /= n;
    s1 /= n;
    s2 /= n;
    const double sigma2 = s0 * s2 - s1 * s1;
    std::vector<double> w(r.size(), 0.0);
    for (std::size_t i = 0; i < r.size(); ++i)
        if (k[i] > 0.0) w[i] = k[i] * (s2 - s1 * (r[i] - c)) / sigma2 / n;
    return w;
}

/// Fuzzy sample with one-sided noncompliance. Z = 1{R >= 0}; a share of units are
/// always-takers (T = 1) or never-takers (T = 0) regardless of Z. Compliers follow
/// a geodesic that jumps at 0, noncompliers a third geodesic.
inline RddSample fuzzy_sample(const SpaceDescriptor& space, Rng& rng, std::size_t n, Noncompliance side,
                              double share = 0.3) {
    const MetricObject a = random_object(space, rng);
    const MetricObject b = random_object(space, rng);
    const MetricObject c = random_object(space, rng);
    const MetricObject d = random_object(space, rng);
    RddSample s;
    s.space = space;
    std::uniform_real_distribution<double> u(-1.0, 1.0), u01(0.0, 1.0), jitter(-0.1, 0.1);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = u(rng);
        const int z = r >= 0.0;
        const bool noncomplier = u01(rng) < share;
        const int t = noncomplier ? (side == Noncompliance::AlwaysTakers ? 1 : 0) : z;
        const double g = std::clamp(0.5 + 0.3 * r + jitter(rng), 0.0, 1.0);
        MetricObject y = noncomplier ? geodesic_eval(a, d, g) : (t ? geodesic_eval(a, c, g) : geodesic_eval(a, b, g));
        s.records.push_back({r, std::move(y), t, z});
    }
    return s;
}

/// Smallest d such that at least k points of `side` lie within d of c, by counting.
inline double kth_distance_by_count(const std::vector<double>& r, double c, bool above, std::size_t k) {
    double best = std::numeric_limits<double>::infinity();
    for (double x : r) {
        if ((x >= c) != above) continue;
        const double d = std::abs(x - c);
        std::size_t within = 0;
        for (double y : r)
            if ((y >= c) == above && std::abs(y - c) <= d) ++within;
        if (within >= k) best = std::min(best, d);
    }
    return best;
}

/// Largest gap between a value and its nearest strictly larger neighbour, pairwise.
inline double largest_gap_pairwise(const std::vector<double>& r) {
    double gap = 0.0;
    for (double x : r) {
        double next = std::numeric_limits<double>::infinity();
        for (double y : r)
            if (y > x) next = std::min(next, y);
        if (std::isfinite(next)) gap = std::max(gap, next - x);
    }
    return gap;
}

/// Design on [-a, b] with side scales drawn from [0.5, 3].
inline std::vector<double> random_design(Rng& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> scale(0.5, 3.0);
    const double a = scale(rng), b = scale(rng);
    std::vector<double> r(n);
    for (auto& x : r) {
        const double v = u(rng);
        x = v < 0.0 ? a * v : b * v;
    }
    return r;
}

inline double weighted_sum(const std::vector<double>& w, const std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * v[i];
    return s;
}

inline Vector weighted_mean(const std::vector<double>& w, const std::vector<Vector>& v, const std::vector<bool>& keep) {
    Vector acc = Vector::Zero(v.front().size());
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (!keep[i] || w[i] == 0.0) continue;
        acc += w[i] * v[i];
        total += w[i];
    }
    return acc / total;
}

/// Sphere log and exp maps written out directly.
inline Vector sphere_log_oracle(const Vector& omega, const Vector& y) {
    const double c = std::clamp(omega.dot(y), -1.0, 1.0);
    const double th = std::acos(c);
    if (th < 1e-15) return Vector::Zero(y.size());
    return th / std::sin(th) * (y - c * omega);
}

inline Vector sphere_exp_oracle(const Vector& omega, const Vector& v) {
    const double nv = v.norm();
    if (nv < 1e-15) return omega;
    return std::cos(nv) * omega + std::sin(nv) * v / nv;
}

/// Side weights, stratum membership and compliance jump, all from the oracle weights.
struct Pieces {
    std::vector<double> w0, w1;
    std::vector<bool> stratum;
    double den = 0.0;
};

inline Pieces oracle_pieces(const RddSample& s, double h0, double h1, Noncompliance side) {
    Pieces p;
    const auto r = s.running();
    p.w0 = oracle_weights(r, 0.0, h0, false);
    p.w1 = oracle_weights(r, 0.0, h1, true);
    std::vector<double> t;
    for (const auto& o : s.records) {
        t.push_back(*o.t);
        p.stratum.push_back(side == Noncompliance::AlwaysTakers ? (*o.t == 1 && *o.z == 0) : (*o.t == 0 && *o.z == 1));
    }
    p.den = std::clamp(weighted_sum(p.w1, t), 0.0, 1.0) - std::clamp(weighted_sum(p.w0, t), 0.0, 1.0);
    return p;
}

} // namespace grdd::testing
