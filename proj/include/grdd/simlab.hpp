#pragma once

// Monte Carlo lab: scalar Settings I–IV, the weighted stochastic block model for
// network outcomes, replicated campaigns, and log-log rate fits.

#include "grdd/bandwidth.hpp"
#include "grdd/error.hpp"
#include "grdd/rdd_sharp.hpp"
#include "grdd/sample.hpp"
#include "grdd/spaces.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace grdd::sim {

inline constexpr const char* kRngAlgorithm = "mt19937_64/seed_seq";

using Rng = std::mt19937_64;

/// Deterministic per-unit stream: one generator per (seed, stream, n, rep).
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t n, std::uint64_t rep) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(n),
                      static_cast<std::uint32_t>(rep)};
    return Rng(seq);
}

enum class Setting { I = 1, II = 2, III = 3, IV = 4 };

inline const char* to_string(Setting s) {
    switch (s) {
    case Setting::I: return "I";
    case Setting::II: return "II";
    case Setting::III: return "III";
    case Setting::IV: return "IV";
    }
    return "?";
}

inline Setting parse_setting(const std::string& s) {
    if (s == "I" || s == "1") return Setting::I;
    if (s == "II" || s == "2") return Setting::II;
    if (s == "III" || s == "3") return Setting::III;
    if (s == "IV" || s == "4") return Setting::IV;
    fail(ErrorCode::InvalidArgument, "unknown setting '" + s + "'");
}

/// Control regression function m₋(r).
inline double m_minus(Setting s, double r) {
    using std::numbers::pi;
    switch (s) {
    case Setting::I: return r;
    case Setting::II: return r + std::sin(3 * pi * r);
    case Setting::III: return r + std::sin(8 * pi * r) + std::cos(6 * pi * r);
    case Setting::IV: return r + std::sin(6 * pi * r);
    }
    return 0.0;
}

/// Treated regression function m₊(r), including the jump τ.
inline double m_plus(Setting s, double r, double tau) {
    using std::numbers::pi;
    switch (s) {
    case Setting::I: return r + tau;
    case Setting::II: return r + std::sin(3 * pi * r) + tau;
    case Setting::III: return r + std::sin(6 * pi * r) + std::cos(8 * pi * r) + tau;
    case Setting::IV: return r + std::sin(6 * pi * r) + tau;
    }
    return 0.0;
}

struct ScalarDgp {
    Setting setting = Setting::I;
    double tau = 1.0;
    double sigma = 0.5;
    std::size_t n = 1000;
    std::uint64_t seed = 1;
};

struct NetworkDgp {
    std::size_t nodes = 10;
    double p_within = 0.5;
    double p_between = 0.2;
    /// Weight added at R ≥ 0; zero removes the treatment effect.
    double jump = 1.0;
    std::size_t n = 1000;
    std::uint64_t seed = 1;
};

struct SimDraw {
    RddSample sample;
    GeodesicEffect truth;
};

inline void require_min_n(std::size_t n) {
    if (n < 40) fail(ErrorCode::InvalidArgument, "simulated samples need n >= 40");
}

inline GeodesicEffect scalar_truth(const ScalarDgp& dgp) {
    const SpaceDescriptor space = SpaceDescriptor::euclidean(1);
    Vector a(1), b(1);
    a[0] = m_minus(dgp.setting, 0.0);
    b[0] = m_plus(dgp.setting, 0.0, dgp.tau);
    MetricObject start{space, a};
    return make_effect(start, MetricObject{space, b}, start);
}

inline SimDraw generate_scalar(const ScalarDgp& dgp, std::uint64_t rep = 0) {
    require_min_n(dgp.n);
    Rng rng = make_rng(dgp.seed, static_cast<std::uint64_t>(dgp.setting), dgp.n, rep);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::normal_distribution<double> noise(0.0, dgp.sigma > 0.0 ? dgp.sigma : 1.0);
    SimDraw d;
    d.sample.space = SpaceDescriptor::euclidean(1);
    d.sample.cutoff = 0.0;
    d.sample.records.reserve(dgp.n);
    for (std::size_t i = 0; i < dgp.n; ++i) {
        const double r = unif(rng);
        const double e = dgp.sigma > 0.0 ? noise(rng) : 0.0;
        Vector y(1);
        y[0] = (r < 0.0 ? m_minus(dgp.setting, r) : m_plus(dgp.setting, r, dgp.tau)) + e;
        const int t = r >= 0.0 ? 1 : 0;
        d.sample.records.push_back({r, MetricObject{d.sample.space, std::move(y)}, t, t});
    }
    d.truth = scalar_truth(dgp);
    return d;
}

inline double block_probability(const NetworkDgp& dgp, std::size_t i, std::size_t j) {
    const std::size_t half = dgp.nodes / 2;
    return (i < half) == (j < half) ? dgp.p_within : dgp.p_between;
}

/// Laplacian D − W from a symmetric hollow weight matrix.
inline Vector laplacian_from_weights(const linalg::Matrix& w) {
    const Eigen::Index m = w.rows();
    linalg::Matrix l = -w;
    for (Eigen::Index i = 0; i < m; ++i) l(i, i) = w.row(i).sum() - w(i, i);
    return linalg::flatten(l);
}

/// Expected Laplacians at R = 0⁻ and 0⁺: edge probability times expected weight (1.5, 1.5 + jump).
inline GeodesicEffect network_truth(const NetworkDgp& dgp) {
    const auto m = static_cast<Eigen::Index>(dgp.nodes);
    linalg::Matrix w0 = linalg::Matrix::Zero(m, m), w1 = linalg::Matrix::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j)
            if (i != j) {
                const double p = block_probability(dgp, static_cast<std::size_t>(i), static_cast<std::size_t>(j));
                w0(i, j) = p * 1.5;
                w1(i, j) = p * (1.5 + dgp.jump);
            }
    const SpaceDescriptor space = SpaceDescriptor::laplacian(dgp.nodes);
    MetricObject start{space, laplacian_from_weights(w0)};
    return make_effect(start, MetricObject{space, laplacian_from_weights(w1)}, start);
}

inline SimDraw generate_network(const NetworkDgp& dgp, std::uint64_t rep = 0) {
    require_min_n(dgp.n);
    if (dgp.nodes < 2) fail(ErrorCode::InvalidArgument, "network needs at least two nodes");
    Rng rng = make_rng(dgp.seed, 100, dgp.n, rep);
    std::uniform_real_distribution<double> unif_r(-1.0, 1.0);
    std::uniform_real_distribution<double> unif01(0.0, 1.0);
    const auto m = static_cast<Eigen::Index>(dgp.nodes);
    SimDraw d;
    d.sample.space = SpaceDescriptor::laplacian(dgp.nodes);
    d.sample.cutoff = 0.0;
    d.sample.records.reserve(dgp.n);
    linalg::Matrix w(m, m);
    for (std::size_t k = 0; k < dgp.n; ++k) {
        const double r = unif_r(rng);
        const double base = std::cos(std::numbers::pi / 2.0 * r) + (r >= 0.0 ? dgp.jump : 0.0);
        w.setZero();
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = i + 1; j < m; ++j) {
                const double p = block_probability(dgp, static_cast<std::size_t>(i), static_cast<std::size_t>(j));
                if (unif01(rng) < p) w(i, j) = w(j, i) = base + unif01(rng);
            }
        const int t = r >= 0.0 ? 1 : 0;
        d.sample.records.push_back({r, MetricObject{d.sample.space, laplacian_from_weights(w)}, t, t});
    }
    d.truth = network_truth(dgp);
    return d;
}

// ---------------------------------------------------------------------------
// Cross-validated local-linear baseline (scalar outcomes only)

/// One-sided local-linear prediction at x from observations on x's side of c, leaving out `skip`.
inline std::optional<double> loo_prediction(std::span<const double> r, std::span<const double> y, double c,
                                            std::size_t skip, double h) {
    const double x0 = r[skip];
    const bool right = x0 >= c;
    double s0 = 0, s1 = 0, s2 = 0, t0 = 0, t1 = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (i == skip || (r[i] >= c) != right) continue;
        const double x = r[i] - x0;
        const double u = std::abs(x) / h;
        if (u >= 1.0) continue;
        const double k = 1.0 - u;
        s0 += k;
        s1 += k * x;
        s2 += k * x * x;
        t0 += k * y[i];
        t1 += k * x * y[i];
    }
    const double det = s0 * s2 - s1 * s1;
    if (!(det > 1e-14 * std::max(1.0, s0 * s2))) return std::nullopt;
    return (s2 * t0 - s1 * t1) / det;
}

/// Leave-one-out cross-validation over the candidate grid; returns the minimizing bandwidth.
inline double cv_bandwidth(const RddSample& sample, std::span<const double> grid) {
    if (sample.space.tag != SpaceTag::Euclidean || sample.space.dim != 1)
        fail(ErrorCode::InvalidArgument, "cross-validated baseline supports scalar outcomes only");
    if (grid.empty()) fail(ErrorCode::InvalidArgument, "empty bandwidth grid");
    const std::vector<double> r = sample.running();
    std::vector<double> y;
    for (const auto& o : sample.records) y.push_back(o.y.data[0]);
    double best = grid.front(), best_mse = std::numeric_limits<double>::infinity();
    for (double h : grid) {
        double sse = 0.0;
        std::size_t used = 0;
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (const auto p = loo_prediction(r, y, sample.cutoff, i, h)) {
                sse += (*p - y[i]) * (*p - y[i]);
                ++used;
            }
        }
        if (used == 0) continue;
        const double mse = sse / static_cast<double>(used);
        if (mse < best_mse) {
            best_mse = mse;
            best = h;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Campaigns

enum class BandwidthMode { Auto, BMax, Fixed, CrossValidated };

inline const char* to_string(BandwidthMode m) {
    switch (m) {
    case BandwidthMode::Auto: return "auto";
    case BandwidthMode::BMax: return "bmax";
    case BandwidthMode::Fixed: return "fixed";
    case BandwidthMode::CrossValidated: return "cv";
    }
    return "?";
}

enum class DgpKind { Scalar, Network };

struct CampaignConfig {
    DgpKind kind = DgpKind::Scalar;
    Setting setting = Setting::I;
    double tau = 1.0;
    double sigma = 0.5;
    NetworkDgp network;
    std::vector<std::size_t> sizes{100, 200, 500, 1000};
    std::size_t reps = 100;
    std::uint64_t seed = 1;
    BandwidthMode bandwidth = BandwidthMode::Auto;
    double fixed_bandwidth = 0.0;
    BandwidthConfig bw;
    SharpConfig estimator;
    /// Worker threads across replications; 0 means one per hardware thread.
    unsigned threads = 1;
    /// With inverted bandwidth bounds (small n), estimate at b_min instead of failing the replication.
    bool inverted_fallback = true;
    /// Fraction of failed replications (per sample size) that aborts the campaign.
    double max_failure_rate = 0.05;
};

struct RepRecord {
    std::string setting;
    std::size_t n = 0;
    std::size_t rep = 0;
    double bandwidth = std::numeric_limits<double>::quiet_NaN();
    double bias = std::numeric_limits<double>::quiet_NaN();
    double magnitude = std::numeric_limits<double>::quiet_NaN();
    bool failed = false;
    /// Bandwidth bounds inverted; the replication used b_min instead.
    bool fallback = false;
    std::string error;
};

struct RateFit {
    std::vector<std::size_t> sizes;
    std::vector<double> mean_bias;
    double slope = std::numeric_limits<double>::quiet_NaN();
    double intercept = std::numeric_limits<double>::quiet_NaN();
};

struct CampaignResult {
    std::vector<RepRecord> records;
    RateFit rate;
    std::vector<std::size_t> failures;
};

/// OLS of log(mean bias) on log n.
inline RateFit fit_rate(std::span<const std::size_t> sizes, std::span<const double> mean_bias) {
    if (sizes.size() != mean_bias.size()) fail(ErrorCode::ShapeMismatch, "sizes and biases differ in length");
    RateFit fit;
    fit.sizes.assign(sizes.begin(), sizes.end());
    fit.mean_bias.assign(mean_bias.begin(), mean_bias.end());
    if (sizes.size() < 2) return fit;
    const auto k = static_cast<double>(sizes.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (!(mean_bias[i] > 0.0)) return fit;
        const double x = std::log(static_cast<double>(sizes[i]));
        const double y = std::log(mean_bias[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double den = k * sxx - sx * sx;
    if (den == 0.0) return fit;
    fit.slope = (k * sxy - sx * sy) / den;
    fit.intercept = (sy - fit.slope * sx) / k;
    return fit;
}

inline std::string setting_label(const CampaignConfig& cfg) {
    return cfg.kind == DgpKind::Network ? "network" : to_string(cfg.setting);
}

inline SimDraw draw(const CampaignConfig& cfg, std::size_t n, std::size_t rep) {
    if (cfg.kind == DgpKind::Network) {
        NetworkDgp dgp = cfg.network;
        dgp.n = n;
        dgp.seed = cfg.seed;
        return generate_network(dgp, rep);
    }
    return generate_scalar(ScalarDgp{cfg.setting, cfg.tau, cfg.sigma, n, cfg.seed}, rep);
}

inline double choose_bandwidth(const CampaignConfig& cfg, const RddSample& sample, bool* fallback = nullptr) {
    switch (cfg.bandwidth) {
    case BandwidthMode::Auto:
        try {
            return select_bandwidth(sample, cfg.bw).b_star;
        } catch (const Error& e) {
            if (e.code() != ErrorCode::InvertedBounds || !cfg.inverted_fallback) throw;
            if (fallback) *fallback = true;
            return raw_bounds(sample.running(), sample.cutoff).b_min;
        }
    case BandwidthMode::BMax: return raw_bounds(sample.running(), sample.cutoff).b_max;
    case BandwidthMode::Fixed:
        if (!(cfg.fixed_bandwidth > 0.0)) fail(ErrorCode::InvalidArgument, "fixed bandwidth must be positive");
        return cfg.fixed_bandwidth;
    case BandwidthMode::CrossValidated: {
        const std::vector<double> r = sample.running();
        return cv_bandwidth(sample, bandwidth_grid(compute_bounds(r, sample.cutoff), cfg.bw.grid_size));
    }
    }
    return 0.0;
}

inline RepRecord run_replication(const CampaignConfig& cfg, std::size_t n, std::size_t rep) {
    RepRecord rec;
    rec.setting = setting_label(cfg);
    rec.n = n;
    rec.rep = rep;
    try {
        const SimDraw d = draw(cfg, n, rep);
        rec.bandwidth = choose_bandwidth(cfg, d.sample, &rec.fallback);
        SharpConfig sc = cfg.estimator;
        sc.reference = d.truth.reference;
        const SharpEstimate est = estimate_sharp(d.sample, rec.bandwidth, rec.bandwidth, sc);
        rec.magnitude = est.magnitude;
        rec.bias = effect_bias(est.effect, d.truth);
    } catch (const Error& e) {
        rec.failed = true;
        rec.error = std::string(to_string(e.code()));
    }
    return rec;
}

inline CampaignResult run_campaign(const CampaignConfig& cfg) {
    if (cfg.reps < 1) fail(ErrorCode::InvalidArgument, "campaign needs at least one replication");
    if (cfg.sizes.empty()) fail(ErrorCode::InvalidArgument, "campaign needs at least one sample size");
    const std::size_t total = cfg.sizes.size() * cfg.reps;
    CampaignResult res;
    res.records.resize(total);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < total; k = next++)
            res.records[k] = run_replication(cfg, cfg.sizes[k / cfg.reps], k % cfg.reps);
    };
    unsigned threads = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.threads;
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, total));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    std::vector<double> means;
    for (std::size_t s = 0; s < cfg.sizes.size(); ++s) {
        double sum = 0.0;
        std::size_t ok = 0, bad = 0;
        for (std::size_t r = 0; r < cfg.reps; ++r) {
            const RepRecord& rec = res.records[s * cfg.reps + r];
            if (rec.failed) {
                ++bad;
            } else {
                sum += rec.bias;
                ++ok;
            }
        }
        res.failures.push_back(bad);
        means.push_back(ok ? sum / static_cast<double>(ok) : std::numeric_limits<double>::quiet_NaN());
    }
    res.rate = fit_rate(cfg.sizes, means);
    for (std::size_t s = 0; s < cfg.sizes.size(); ++s)
        if (static_cast<double>(res.failures[s]) > cfg.max_failure_rate * static_cast<double>(cfg.reps))
            fail(ErrorCode::CampaignFailed, std::to_string(res.failures[s]) + " of " + std::to_string(cfg.reps) +
                                                " replications failed at n = " + std::to_string(cfg.sizes[s]));
    return res;
}

// ---------------------------------------------------------------------------
// Output

inline nlohmann::json config_json(const CampaignConfig& cfg) {
    nlohmann::json j;
    j["dgp"] = cfg.kind == DgpKind::Network ? "network" : "scalar";
    j["setting"] = setting_label(cfg);
    if (cfg.kind == DgpKind::Scalar) {
        j["tau"] = cfg.tau;
        j["sigma"] = cfg.sigma;
    } else {
        j["nodes"] = cfg.network.nodes;
        j["p_within"] = cfg.network.p_within;
        j["p_between"] = cfg.network.p_between;
        j["jump"] = cfg.network.jump;
    }
    j["sizes"] = cfg.sizes;
    j["reps"] = cfg.reps;
    j["seed"] = cfg.seed;
    j["bandwidth"] = to_string(cfg.bandwidth);
    if (cfg.bandwidth == BandwidthMode::Fixed) j["fixed_bandwidth"] = cfg.fixed_bandwidth;
    j["grid_size"] = cfg.bw.grid_size;
    j["eval_points"] = cfg.bw.eval_points;
    j["inverted_fallback"] = cfg.inverted_fallback;
    j["kernel"] = cfg.estimator.kernel == KernelKind::Triangular ? "triangular" : "uniform";
    return j;
}

/// FNV-1a over the canonical JSON dump.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string config_hash(const CampaignConfig& cfg) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(config_json(cfg).dump())));
    return buf;
}

inline nlohmann::json campaign_metadata(const CampaignConfig& cfg) {
    nlohmann::json j;
    j["seed"] = cfg.seed;
    j["rng"] = kRngAlgorithm;
    j["config"] = config_json(cfg);
    j["config_hash"] = config_hash(cfg);
    return j;
}

inline nlohmann::json rate_json(const CampaignResult& res) {
    nlohmann::json j;
    j["sizes"] = res.rate.sizes;
    j["mean_bias"] = res.rate.mean_bias;
    j["slope"] = std::isfinite(res.rate.slope) ? nlohmann::json(res.rate.slope) : nlohmann::json(nullptr);
    j["intercept"] = std::isfinite(res.rate.intercept) ? nlohmann::json(res.rate.intercept) : nlohmann::json(nullptr);
    j["failures"] = res.failures;
    return j;
}

inline void write_campaign_csv(std::ostream& os, const CampaignResult& res) {
    const auto old = os.precision(17);
    os << "setting,n,rep,bandwidth,bias,fail_flag,magnitude,fallback,error\n";
    for (const auto& r : res.records) {
        os << r.setting << ',' << r.n << ',' << r.rep << ',';
        if (!r.failed) os << r.bandwidth;
        os << ',';
        if (!r.failed) os << r.bias;
        os << ',' << (r.failed ? 1 : 0) << ',';
        if (!r.failed) os << r.magnitude;
        os << ',' << (r.fallback ? 1 : 0) << ',';
        if (r.error.find_first_of(",\"\r\n") == std::string::npos) {
            os << r.error;
        } else {
            os << '"';
            for (char ch : r.error) os << (ch == '"' ? "\"\"" : std::string(1, ch));
            os << '"';
        }
        os << '\n';
    }
    os.precision(old);
}

} // namespace grdd::sim
