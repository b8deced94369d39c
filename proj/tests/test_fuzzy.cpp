#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

using namespace grdd;
using namespace grdd::testing;

namespace {

bool has_warning(const FuzzyEstimate& e, const std::string& code) {
    return std::any_of(e.warnings.begin(), e.warnings.end(), [&](const std::string& w) { return w.rfind(code, 0) == 0; });
}

std::vector<bool> all_of(std::size_t n) { return std::vector<bool>(n, true); }

RddSample sharp_design(const SpaceDescriptor& space, Rng& rng, std::size_t n) {
    return space_sample(space, rng, n);
}

} // namespace

TEST(Compliance, SharpComplianceGivesZeroAndOne) {
    Rng rng(21);
    const RddSample s = scalar_sample(rng, 300);
    const auto fit = estimate_compliance(s, 0.5, 0.5);
    EXPECT_NEAR(fit.m0, 0.0, 1e-12);
    EXPECT_NEAR(fit.m1, 1.0, 1e-12);
    EXPECT_NEAR(fit.denominator(), 1.0, 1e-12);
}

TEST(Compliance, MatchesClosedFormIntercepts) {
    Rng rng(22);
    for (int k = 0; k < 20; ++k) {
        const RddSample s = fuzzy_sample(SpaceDescriptor::euclidean(1), rng, 300, Noncompliance::AlwaysTakers);
        const auto p = oracle_pieces(s, 0.4, 0.6, Noncompliance::AlwaysTakers);
        const auto fit = estimate_compliance(s, 0.4, 0.6);
        EXPECT_NEAR(fit.denominator(), p.den, 1e-12);
    }
}

TEST(Compliance, LogisticJump) {
    // P(T=1 | R) is 0.2 left of the cutoff and 0.8 right of it, smoothed by a logistic in R.
    Rng rng(23);
    RddSample s;
    s.space = SpaceDescriptor::euclidean(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0), u01(0.0, 1.0);
    for (int i = 0; i < 2000; ++i) {
        const double r = u(rng);
        const double base = r >= 0.0 ? 0.8 : 0.2;
        const double p = base + 0.05 * (2.0 / (1.0 + std::exp(-3.0 * r)) - 1.0);
        const int t = u01(rng) < p;
        s.records.push_back({r, make_object(s.space, Vector::Constant(1, r)), t, r >= 0.0});
    }
    EXPECT_NEAR(estimate_compliance(s, 0.5, 0.5).denominator(), 0.6, 0.1);
}

TEST(Compliance, Errors) {
    Rng rng(24);
    RddSample s = scalar_sample(rng, 100);
    s.records[5].t.reset();
    try {
        estimate_compliance(s, 0.5, 0.5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingTreatment);
    }
}

TEST(FuzzyLate, WeakComplianceRefused) {
    Rng rng(25);
    RddSample s = scalar_sample(rng, 200);
    for (auto& o : s.records) o.t = 1;
    try {
        estimate_fuzzy_late(s, 0.5, 0.5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::WeakCompliance);
    }
}

TEST(FuzzyLate, DividesEmbeddingJump) {
    Rng rng(26);
    const RddSample s = fuzzy_sample(SpaceDescriptor::wasserstein(11), rng, 400, Noncompliance::AlwaysTakers);
    const auto p = oracle_pieces(s, 0.5, 0.5, Noncompliance::AlwaysTakers);
    std::vector<Vector> q;
    for (const auto& o : s.records) q.push_back(o.y.data);
    const Vector jump = (weighted_mean(p.w1, q, all_of(q.size())) - weighted_mean(p.w0, q, all_of(q.size()))) / p.den;
    const auto est = estimate_fuzzy_late(s, 0.5, 0.5);
    EXPECT_NEAR((est.tau - jump).cwiseAbs().maxCoeff(), 0.0, 1e-9);
    EXPECT_NEAR(est.magnitude, hilbert_norm(s.space, est.tau), 1e-12);
}

TEST(FuzzyLate, ZeroJumpGivesZero) {
    Rng rng(27);
    RddSample s;
    s.space = SpaceDescriptor::euclidean(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0), u01(0.0, 1.0);
    for (int i = 0; i < 400; ++i) {
        const double r = u(rng);
        const int t = u01(rng) < (r >= 0.0 ? 0.75 : 0.25);
        s.records.push_back({r, make_object(s.space, (Vector(2) << r, 1.0 - r).finished()), t, r >= 0.0});
    }
    EXPECT_NEAR(estimate_fuzzy_late(s, 0.5, 0.5).tau.norm(), 0.0, 1e-10);
}

TEST(FuzzyLate, SphereHasNoEmbedding) {
    Rng rng(28);
    const RddSample s = space_sample(SpaceDescriptor::sphere(3), rng, 100);
    try {
        estimate_fuzzy_late(s, 0.5, 0.5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmbeddingUnavailable);
    }
}

TEST(FuzzyReduction, FullComplianceReproducesSharp) {
    Rng rng(29);
    const std::vector<SpaceDescriptor> spaces{SpaceDescriptor::euclidean(2), SpaceDescriptor::wasserstein(11),
                                              SpaceDescriptor::laplacian(4)};
    for (const auto& space : spaces) {
        for (int k = 0; k < 4; ++k) {
            const RddSample s = sharp_design(space, rng, 150);
            const auto sharp = estimate_sharp(s, 0.5, 0.6);
            const auto late = estimate_fuzzy_late(s, 0.5, 0.6);
            EXPECT_NEAR((late.tau - (embed(sharp.effect.end) - embed(sharp.effect.start))).norm(), 0.0, 1e-8);
            for (auto side : {Noncompliance::AlwaysTakers, Noncompliance::NeverTakers}) {
                const auto geo = estimate_geodesic_fuzzy(s, 0.5, 0.6, side);
                EXPECT_NEAR(distance(*geo.start, sharp.effect.start), 0.0, 1e-8) << space.name();
                EXPECT_NEAR(distance(*geo.end, sharp.effect.end), 0.0, 1e-8) << space.name();
                EXPECT_NEAR(geo.magnitude, sharp.magnitude, 1e-8);
                EXPECT_TRUE(has_warning(geo, "StratumUnused"));
            }
            if (space.logexp_available()) {
                const auto rie = estimate_riemannian_fuzzy(s, sharp.effect.reference, 0.5, 0.6);
                EXPECT_NEAR((rie.tau - (sharp.effect.end.data - sharp.effect.start.data)).norm(), 0.0, 1e-8);
                const auto gr = estimate_geodesic_riemannian_fuzzy(s, sharp.effect.reference, Noncompliance::AlwaysTakers, 0.5, 0.6);
                EXPECT_NEAR(distance(*gr.start, sharp.effect.start), 0.0, 1e-8);
                EXPECT_NEAR(distance(*gr.end, sharp.effect.end), 0.0, 1e-8);
            }
        }
    }
}

TEST(GeodesicFuzzy, ClosedFormWasserstein) {
    Rng rng(30);
    int checked = 0;
    for (int k = 0; k < 20; ++k) {
        const auto side = k % 2 ? Noncompliance::NeverTakers : Noncompliance::AlwaysTakers;
        const RddSample s = fuzzy_sample(SpaceDescriptor::wasserstein(11), rng, 600, side);
        const auto p = oracle_pieces(s, 0.5, 0.5, side);
        std::vector<Vector> q;
        for (const auto& o : s.records) q.push_back(o.y.data);
        const Vector nu0 = weighted_mean(p.w0, q, all_of(q.size()));
        const Vector nu1 = weighted_mean(p.w1, q, all_of(q.size()));
        const Vector mu = weighted_mean(side == Noncompliance::AlwaysTakers ? p.w0 : p.w1, q, p.stratum);
        const Vector start = mu + (nu0 - mu) / p.den;
        const Vector end = mu + (nu1 - mu) / p.den;
        const auto est = estimate_geodesic_fuzzy(s, 0.5, 0.5, side);
        EXPECT_NEAR(est.denominator, p.den, 1e-12);
        EXPECT_NEAR((est.stratum->data - mu).cwiseAbs().maxCoeff(), 0.0, 1e-9);
        if (has_warning(est, "ProjectionApplied")) continue;
        ++checked;
        EXPECT_NEAR((est.start->data - start).cwiseAbs().maxCoeff(), 0.0, 1e-8);
        EXPECT_NEAR((est.end->data - end).cwiseAbs().maxCoeff(), 0.0, 1e-8);
        EXPECT_FALSE(has_warning(est, "OneSidedViolation"));
    }
    EXPECT_GE(checked, 10);
}

TEST(GeodesicFuzzy, EmbeddingAlgebraPreProjection) {
    Rng rng(31);
    for (const auto& space : embeddable_spaces()) {
        const RddSample s = fuzzy_sample(space, rng, 400, Noncompliance::AlwaysTakers);
        const auto est = estimate_geodesic_fuzzy(s, 0.5, 0.5, Noncompliance::AlwaysTakers);
        if (has_warning(est, "ProjectionApplied")) continue;
        const Vector lhs = embed(*est.start) - embed(*est.stratum);
        const Vector rhs = (embed(*est.limit_left) - embed(*est.stratum)) / est.denominator;
        EXPECT_NEAR((lhs - rhs).norm(), 0.0, 1e-8 * (1.0 + rhs.norm())) << space.name();
    }
}

TEST(GeodesicFuzzy, EmptyStratum) {
    Rng rng(32);
    // Never-taker data has no {T=1, Z=0} units.
    const RddSample s = fuzzy_sample(SpaceDescriptor::wasserstein(11), rng, 400, Noncompliance::NeverTakers);
    try {
        estimate_geodesic_fuzzy(s, 0.5, 0.5, Noncompliance::AlwaysTakers);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyStratum);
    }
}

TEST(GeodesicFuzzy, OneSidedViolationWarns) {
    Rng rng(33);
    RddSample s = fuzzy_sample(SpaceDescriptor::euclidean(1), rng, 400, Noncompliance::AlwaysTakers);
    for (auto& o : s.records)
        if (o.r > 0.5) {
            o.t = 0;
            break;
        }
    EXPECT_TRUE(has_warning(estimate_geodesic_fuzzy(s, 0.5, 0.5, Noncompliance::AlwaysTakers), "OneSidedViolation"));
}

TEST(GeodesicFuzzy, MissingAssignment) {
    Rng rng(34);
    RddSample s = scalar_sample(rng, 100);
    for (auto& o : s.records) o.z.reset();
    try {
        estimate_geodesic_fuzzy(s, 0.5, 0.5, Noncompliance::AlwaysTakers);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingAssignment);
    }
}

TEST(RiemannianFuzzy, EuclideanMatchesEmbedding) {
    Rng rng(35);
    for (int k = 0; k < 10; ++k) {
        const RddSample s = fuzzy_sample(SpaceDescriptor::euclidean(3), rng, 300, Noncompliance::AlwaysTakers);
        const auto omega = random_object(s.space, rng);
        const auto a = estimate_riemannian_fuzzy(s, omega, 0.5, 0.5);
        const auto b = estimate_fuzzy_late(s, 0.5, 0.5);
        EXPECT_NEAR((a.tau - b.tau).norm(), 0.0, 1e-10);
        const auto g1 = estimate_geodesic_riemannian_fuzzy(s, omega, Noncompliance::AlwaysTakers, 0.5, 0.5);
        const auto g2 = estimate_geodesic_fuzzy(s, 0.5, 0.5, Noncompliance::AlwaysTakers);
        EXPECT_NEAR(distance(*g1.start, *g2.start), 0.0, 1e-10);
        EXPECT_NEAR(distance(*g1.end, *g2.end), 0.0, 1e-10);
    }
}

TEST(RiemannianFuzzy, SphereTangentOracle) {
    Rng rng(36);
    for (int k = 0; k < 10; ++k) {
        const RddSample s = fuzzy_sample(SpaceDescriptor::sphere(4), rng, 400, Noncompliance::AlwaysTakers);
        const auto omega = random_object(s.space, rng);
        const auto p = oracle_pieces(s, 0.5, 0.5, Noncompliance::AlwaysTakers);
        std::vector<Vector> v;
        for (const auto& o : s.records) v.push_back(sphere_log_oracle(omega.data, o.y.data));
        const Vector tau = (weighted_mean(p.w1, v, all_of(v.size())) - weighted_mean(p.w0, v, all_of(v.size()))) / p.den;
        const auto est = estimate_riemannian_fuzzy(s, omega, 0.5, 0.5);
        EXPECT_NEAR((est.tau - tau).norm(), 0.0, 1e-8);
    }
}

TEST(RiemannianFuzzy, Unavailable) {
    Rng rng(37);
    const RddSample s = space_sample(SpaceDescriptor::laplacian(3), rng, 100);
    try {
        estimate_riemannian_fuzzy(s, 0.5, 0.5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::LogExpUnavailable);
    }
}

TEST(GeodesicRiemannian, ClosedFormSphere) {
    Rng rng(38);
    int checked = 0;
    for (int k = 0; k < 20; ++k) {
        const auto side = k % 2 ? Noncompliance::NeverTakers : Noncompliance::AlwaysTakers;
        const RddSample s = fuzzy_sample(SpaceDescriptor::sphere(4), rng, 600, side);
        const auto omega = sample_frechet_mean(s.outcomes());
        const auto p = oracle_pieces(s, 0.5, 0.5, side);
        std::vector<Vector> v;
        for (const auto& o : s.records) v.push_back(sphere_log_oracle(omega.data, o.y.data));
        const Vector nu0 = weighted_mean(p.w0, v, all_of(v.size()));
        const Vector nu1 = weighted_mean(p.w1, v, all_of(v.size()));
        const Vector mu = weighted_mean(side == Noncompliance::AlwaysTakers ? p.w0 : p.w1, v, p.stratum);
        const Vector start = sphere_exp_oracle(omega.data, mu + (nu0 - mu) / p.den);
        const Vector end = sphere_exp_oracle(omega.data, mu + (nu1 - mu) / p.den);
        const auto est = estimate_geodesic_riemannian_fuzzy(s, omega, side, 0.5, 0.5);
        if (has_warning(est, "ExpOutOfDomain")) continue;
        ++checked;
        EXPECT_NEAR((est.start->data - start).norm(), 0.0, 1e-8);
        EXPECT_NEAR((est.end->data - end).norm(), 0.0, 1e-8);
        EXPECT_NEAR(est.magnitude, std::acos(std::clamp(start.dot(end), -1.0, 1.0)), 1e-8);
    }
    EXPECT_GE(checked, 10);
}

TEST(FuzzyInvariance, AffineRescaling) {
    Rng rng(39);
    const RddSample s = fuzzy_sample(SpaceDescriptor::wasserstein(11), rng, 400, Noncompliance::AlwaysTakers);
    RddSample t = s;
    t.cutoff = 3.0;
    for (auto& o : t.records) o.r = 3.0 + 2.0 * o.r;
    const auto a = estimate_geodesic_fuzzy(s, 0.5, 0.4, Noncompliance::AlwaysTakers);
    const auto b = estimate_geodesic_fuzzy(t, 1.0, 0.8, Noncompliance::AlwaysTakers);
    EXPECT_NEAR(a.denominator, b.denominator, 1e-12);
    EXPECT_NEAR(distance(*a.start, *b.start), 0.0, 1e-9);
    EXPECT_NEAR(distance(*a.end, *b.end), 0.0, 1e-9);
}

TEST(FuzzyLate, ErrorShrinksWithN) {
    // Y = 0.5 R + 2 T + noise with P(T=1) jumping 0.2 -> 0.8, so the complier effect is 2.
    const std::vector<std::size_t> sizes{200, 500, 1000, 2000};
    std::vector<double> medians;
    for (std::size_t n : sizes) {
        std::vector<double> err;
        for (std::uint64_t rep = 0; rep < 100; ++rep) {
            Rng rng = sim::make_rng(99, 7, n, rep);
            std::uniform_real_distribution<double> u(-1.0, 1.0), u01(0.0, 1.0);
            std::normal_distribution<double> e(0.0, 0.5);
            RddSample s;
            s.space = SpaceDescriptor::euclidean(1);
            for (std::size_t i = 0; i < n; ++i) {
                const double r = u(rng);
                const int t = u01(rng) < (r >= 0.0 ? 0.8 : 0.2);
                s.records.push_back({r, make_object(s.space, Vector::Constant(1, 0.5 * r + 2.0 * t + e(rng))), t, r >= 0.0});
            }
            const double h = std::pow(static_cast<double>(n), -0.2);
            try {
                err.push_back(std::abs(estimate_fuzzy_late(s, h, h).tau[0] - 2.0));
            } catch (const Error& e) {
                ASSERT_EQ(e.code(), ErrorCode::WeakCompliance);
                err.push_back(std::numeric_limits<double>::infinity());
            }
        }
        std::sort(err.begin(), err.end());
        medians.push_back(err[err.size() / 2]);
    }
    int inversions = 0;
    for (std::size_t i = 1; i < medians.size(); ++i) inversions += medians[i] > medians[i - 1];
    EXPECT_LE(inversions, 1);
    EXPECT_LT(medians.back(), medians.front());
}
