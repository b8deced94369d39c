#include "support.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace grdd;
using namespace grdd::testing;
using namespace grdd::sim;

namespace {

std::string campaign_csv(const CampaignResult& res) {
    std::ostringstream os;
    write_campaign_csv(os, res);
    return os.str();
}

} // namespace

TEST(Scalar, RegressionFunctions) {
    using std::numbers::pi;
    for (double r : {-0.9, -0.3, 0.0, 0.2, 0.7}) {
        EXPECT_EQ(m_minus(Setting::I, r), r);
        EXPECT_EQ(m_plus(Setting::I, r, 2.0), r + 2.0);
        EXPECT_NEAR(m_minus(Setting::II, r), r + std::sin(3 * pi * r), 1e-15);
        EXPECT_NEAR(m_plus(Setting::III, r, 1.0), r + std::sin(6 * pi * r) + std::cos(8 * pi * r) + 1.0, 1e-15);
        EXPECT_NEAR(m_minus(Setting::IV, r), r + std::sin(6 * pi * r), 1e-15);
    }
}

TEST(Scalar, SettingThreeJumpIsTau) {
    for (double tau : {0.0, 0.5, 1.0, 3.0}) EXPECT_NEAR(m_plus(Setting::III, 0.0, tau) - m_minus(Setting::III, 0.0), tau, 1e-15);
}

TEST(Scalar, NoiselessSettingOne) {
    const auto d = generate_scalar({Setting::I, 1.0, 0.0, 200, 5});
    ASSERT_EQ(d.sample.size(), 200u);
    for (const auto& o : d.sample.records) {
        EXPECT_EQ(o.y.data[0], o.r + (o.r >= 0.0 ? 1.0 : 0.0));
        EXPECT_EQ(*o.t, o.r >= 0.0 ? 1 : 0);
        EXPECT_GE(o.r, -1.0);
        EXPECT_LT(o.r, 1.0);
    }
    const auto est = estimate_sharp(d.sample, 0.5, 0.5);
    EXPECT_LE(effect_bias(est.effect, d.truth), 1e-10);
}

TEST(Scalar, Deterministic) {
    const auto a = generate_scalar({Setting::II, 1.0, 0.5, 100, 9}, 3);
    const auto b = generate_scalar({Setting::II, 1.0, 0.5, 100, 9}, 3);
    const auto c = generate_scalar({Setting::II, 1.0, 0.5, 100, 9}, 4);
    EXPECT_EQ(a.sample.records, b.sample.records);
    EXPECT_NE(a.sample.records, c.sample.records);
    EXPECT_THROW(generate_scalar({Setting::I, 1.0, 0.5, 39, 1}), Error);
}

TEST(Network, DrawsAreValidLaplacians) {
    const auto d = generate_network({.n = 1000, .seed = 11});
    for (const auto& o : d.sample.records) {
        ASSERT_TRUE(is_valid(o.y));
        const auto l = linalg::as_matrix(o.y.data, 10);
        for (Eigen::Index i = 0; i < 10; ++i) {
            EXPECT_NEAR(l.row(i).sum(), 0.0, 1e-12);
            for (Eigen::Index j = 0; j < 10; ++j) {
                EXPECT_EQ(l(i, j), l(j, i));
                if (i != j) {
                    EXPECT_LE(l(i, j), 0.0);
                }
            }
        }
    }
}

TEST(Network, TruthMatchesExpectationOracle) {
    const NetworkDgp dgp;
    const auto truth = network_truth(dgp);
    double ss = 0.0;
    for (int i = 0; i < 10; ++i) {
        double row = 0.0;
        for (int j = 0; j < 10; ++j) {
            if (i == j) continue;
            const double p = (i < 5) == (j < 5) ? 0.5 : 0.2;
            // Expected weight rises from 1.5 to 2.5, so each off-diagonal entry drops by p.
            ss += p * p;
            row += p;
            EXPECT_NEAR(linalg::as_matrix(truth.start.data, 10)(i, j), -1.5 * p, 1e-15);
        }
        ss += row * row;
    }
    EXPECT_NEAR(truth.length, std::sqrt(ss), 1e-12);
    EXPECT_EQ(truth.reference, truth.start);
}

TEST(Network, ZeroJumpTruth) {
    NetworkDgp dgp;
    dgp.jump = 0.0;
    EXPECT_NEAR(network_truth(dgp).length, 0.0, 1e-15);
}

TEST(Network, Deterministic) {
    const auto a = generate_network({.n = 60, .seed = 2}, 1);
    const auto b = generate_network({.n = 60, .seed = 2}, 1);
    EXPECT_EQ(a.sample.records, b.sample.records);
}

TEST(Network, BlockStructure) {
    const NetworkDgp dgp;
    EXPECT_EQ(block_probability(dgp, 0, 4), 0.5);
    EXPECT_EQ(block_probability(dgp, 5, 9), 0.5);
    EXPECT_EQ(block_probability(dgp, 4, 5), 0.2);
}

TEST(Rate, OrdinaryLeastSquares) {
    const std::vector<std::size_t> n{100, 1000};
    const std::vector<double> b{1.0, 0.1};
    EXPECT_NEAR(fit_rate(n, b).slope, -1.0, 1e-12);
    const std::vector<std::size_t> n4{100, 200, 500, 1000};
    std::vector<double> b4;
    for (auto x : n4) b4.push_back(3.0 * std::pow(static_cast<double>(x), -0.4));
    const auto fit = fit_rate(n4, b4);
    EXPECT_NEAR(fit.slope, -0.4, 1e-12);
    EXPECT_NEAR(fit.intercept, std::log(3.0), 1e-12);
}

TEST(Campaign, SmokeEmitsAllColumns) {
    CampaignConfig cfg;
    cfg.sizes = {100, 200};
    cfg.reps = 10;
    const auto res = run_campaign(cfg);
    const std::string csv = campaign_csv(res);
    std::istringstream is(csv);
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "setting,n,rep,bandwidth,bias,fail_flag,magnitude,fallback,error");
    std::size_t rows = 0;
    while (std::getline(is, line)) {
        ++rows;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 8) << line;
    }
    EXPECT_EQ(rows, 20u);
    EXPECT_EQ(res.rate.mean_bias.size(), 2u);
    const auto meta = campaign_metadata(cfg);
    EXPECT_EQ(meta["rng"], "mt19937_64/seed_seq");
    EXPECT_EQ(meta["config_hash"].get<std::string>().size(), 16u);
}

TEST(Campaign, ByteIdenticalAcrossRunsAndThreads) {
    CampaignConfig cfg;
    cfg.kind = DgpKind::Network;
    cfg.sizes = {100, 200};
    cfg.reps = 10;
    const std::string a = campaign_csv(run_campaign(cfg));
    const std::string b = campaign_csv(run_campaign(cfg));
    cfg.threads = 3;
    const std::string c = campaign_csv(run_campaign(cfg));
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
}

TEST(Campaign, ConfigHashTracksConfig) {
    CampaignConfig a, b;
    EXPECT_EQ(config_hash(a), config_hash(b));
    b.seed = 2;
    EXPECT_NE(config_hash(a), config_hash(b));
    EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(Campaign, FailsWhenTooManyRepsFail) {
    CampaignConfig cfg;
    cfg.sizes = {100};
    cfg.reps = 10;
    cfg.bandwidth = BandwidthMode::Fixed;
    cfg.fixed_bandwidth = 1e-9;
    try {
        run_campaign(cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::CampaignFailed);
    }
}

TEST(Campaign, RecordsFailuresInCsv) {
    CampaignConfig cfg;
    cfg.sizes = {100};
    cfg.reps = 10;
    cfg.bandwidth = BandwidthMode::Fixed;
    cfg.fixed_bandwidth = 1e-9;
    RepRecord rec = run_replication(cfg, 100, 0);
    EXPECT_TRUE(rec.failed);
    EXPECT_FALSE(rec.error.empty());
    CampaignResult res;
    rec.error = "a, \"b\"";
    res.records.push_back(rec);
    EXPECT_NE(campaign_csv(res).find(",\"a, \"\"b\"\"\"\n"), std::string::npos);
}

TEST(Campaign, BandwidthModes) {
    const auto d = generate_scalar({Setting::I, 1.0, 0.5, 500, 1});
    CampaignConfig cfg;
    const auto raw = raw_bounds(d.sample.running(), 0.0);
    cfg.bandwidth = BandwidthMode::BMax;
    EXPECT_EQ(choose_bandwidth(cfg, d.sample), raw.b_max);
    cfg.bandwidth = BandwidthMode::Fixed;
    cfg.fixed_bandwidth = 0.3;
    EXPECT_EQ(choose_bandwidth(cfg, d.sample), 0.3);
    cfg.bandwidth = BandwidthMode::Auto;
    const double b = choose_bandwidth(cfg, d.sample);
    EXPECT_GE(b, raw.b_min);
    EXPECT_LE(b, raw.b_max);
    cfg.bandwidth = BandwidthMode::CrossValidated;
    const double cv = choose_bandwidth(cfg, d.sample);
    EXPECT_GT(cv, 0.0);
}

TEST(Campaign, LooPredictionExactOnLines) {
    std::vector<double> r, y;
    for (int i = 0; i < 20; ++i) {
        r.push_back(-1.0 + 0.1 * i);
        y.push_back(3.0 * r.back() + (r.back() >= 0.0 ? 1.0 : 0.0));
    }
    for (std::size_t k = 2; k + 2 < r.size(); ++k) {
        const auto p = loo_prediction(r, y, 0.0, k, 0.5);
        if (!p) continue;
        EXPECT_NEAR(*p, y[k], 1e-10);
    }
}

TEST(Rng, StreamsDiffer) {
    auto a = make_rng(1, 2, 3, 4), b = make_rng(1, 2, 3, 4), c = make_rng(1, 2, 3, 5);
    EXPECT_EQ(a(), b());
    EXPECT_NE(make_rng(1, 2, 3, 4)(), c());
}
