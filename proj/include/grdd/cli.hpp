#pragma once

// Batch front end shared by the `grdd` executable and its tests.

#include "grdd/bandwidth.hpp"
#include "grdd/error.hpp"
#include "grdd/frechet.hpp"
#include "grdd/io.hpp"
#include "grdd/rdd_fuzzy.hpp"
#include "grdd/rdd_sharp.hpp"
#include "grdd/sample.hpp"
#include "grdd/simlab.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace grdd::cli {

using nlohmann::json;

struct RunConfig {
    std::string command;
    std::string input;
    std::string space;
    io::SpaceOptions space_options;
    double cutoff = 0.0;
    /// "auto" or "h0,h1" (a single value sets both sides).
    std::string bw = "auto";
    std::string fuzzy_variant = "embedding";
    std::string side = "always";
    std::optional<std::string> reference;
    std::string kernel = "triangular";
    double delta_comply = 0.05;
    std::size_t grid_size = 20;
    std::size_t eval_points = 100;
    std::size_t curve_points = 50;
    std::size_t bins = 20;
    // simulate
    std::string dgp = "network";
    std::size_t reps = 100;
    std::vector<std::size_t> sizes{100, 200, 500, 1000};
    std::uint64_t seed = 1;
    /// Bandwidth rule for simulations: auto, bmax, cv, or a fixed positive value.
    std::string sim_bw = "auto";
    double tau = 1.0;
    double sigma = 0.5;
    unsigned threads = 1;
    std::string out = ".";
};

/// Exit code for an error: 2 when estimation itself failed on valid input, 1 otherwise.
inline int exit_code_for(ErrorCode c) {
    switch (c) {
    case ErrorCode::WeakCompliance:
    case ErrorCode::DegenerateWindow:
    case ErrorCode::EmptyStratum:
    case ErrorCode::AllWindowsDegenerate:
    case ErrorCode::InsufficientData:
    case ErrorCode::InvertedBounds:
    case ErrorCode::SolverDiverged:
    case ErrorCode::InverseInfeasible:
    case ErrorCode::TransportOutOfSpace:
    case ErrorCode::ExpOutOfDomain:
    case ErrorCode::AntipodalPoints:
    case ErrorCode::CampaignFailed:
        return 2;
    default:
        return 1;
    }
}

/// Overlays keys of a JSON config onto `cfg`. Unknown keys are rejected.
inline void apply_json(RunConfig& cfg, const json& j) {
    if (!j.is_object()) fail(ErrorCode::ParseError, "config must be a JSON object");
    try {
        for (const auto& [k, v] : j.items()) {
            if (k == "command") cfg.command = v.get<std::string>();
            else if (k == "input") cfg.input = v.get<std::string>();
            else if (k == "space") cfg.space = v.get<std::string>();
            else if (k == "cutoff") cfg.cutoff = v.get<double>();
            else if (k == "bw") cfg.bw = v.is_string() ? v.get<std::string>() : io::format_double(v.get<double>());
            else if (k == "fuzzy_variant") cfg.fuzzy_variant = v.get<std::string>();
            else if (k == "side") cfg.side = v.get<std::string>();
            else if (k == "reference") cfg.reference = v.get<std::string>();
            else if (k == "kernel") cfg.kernel = v.get<std::string>();
            else if (k == "delta_comply") cfg.delta_comply = v.get<double>();
            else if (k == "grid_size") cfg.grid_size = v.get<std::size_t>();
            else if (k == "eval_points") cfg.eval_points = v.get<std::size_t>();
            else if (k == "curve_points") cfg.curve_points = v.get<std::size_t>();
            else if (k == "bins") cfg.bins = v.get<std::size_t>();
            else if (k == "dgp") cfg.dgp = v.get<std::string>();
            else if (k == "reps") cfg.reps = v.get<std::size_t>();
            else if (k == "sizes") cfg.sizes = v.get<std::vector<std::size_t>>();
            else if (k == "seed") cfg.seed = v.get<std::uint64_t>();
            else if (k == "sim_bw") cfg.sim_bw = v.is_string() ? v.get<std::string>() : io::format_double(v.get<double>());
            else if (k == "tau") cfg.tau = v.get<double>();
            else if (k == "sigma") cfg.sigma = v.get<double>();
            else if (k == "threads") cfg.threads = v.get<unsigned>();
            else if (k == "out") cfg.out = v.get<std::string>();
            else if (k == "power") cfg.space_options.power = v.get<double>();
            else if (k == "eps_pd") cfg.space_options.eps_pd = v.get<double>();
            else if (k == "w_max") cfg.space_options.w_max = v.get<double>();
            else if (k == "domain") {
                cfg.space_options.domain_lo = v.at(0).get<double>();
                cfg.space_options.domain_hi = v.at(1).get<double>();
            } else if (k == "support") {
                cfg.space_options.support_lo = v.at(0).get<double>();
                cfg.space_options.support_hi = v.at(1).get<double>();
            } else
                fail(ErrorCode::InvalidArgument, "unknown config key '" + k + "'");
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, std::string("config: ") + e.what());
    }
}

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, path + ": " + e.what());
    }
}

/// Parses "a,b,c" into positive values.
inline std::vector<double> parse_list(const std::string& s, const char* what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto v = io::parse_double(item);
        if (!v || !(*v > 0.0)) fail(ErrorCode::InvalidArgument, std::string(what) + ": '" + item + "' is not a positive number");
        out.push_back(*v);
    }
    if (out.empty()) fail(ErrorCode::InvalidArgument, std::string(what) + " is empty");
    return out;
}

namespace detail {

inline KernelKind parse_kernel(const std::string& k) {
    if (k == "triangular") return KernelKind::Triangular;
    if (k == "uniform") return KernelKind::Uniform;
    fail(ErrorCode::InvalidArgument, "unknown kernel '" + k + "'");
}

inline Noncompliance parse_side(const std::string& s) {
    if (s == "always") return Noncompliance::AlwaysTakers;
    if (s == "never") return Noncompliance::NeverTakers;
    fail(ErrorCode::InvalidArgument, "--side must be 'always' or 'never'");
}

inline FuzzyVariant parse_variant(const std::string& v) {
    if (v == "embedding" || v == "late") return FuzzyVariant::Embedding;
    if (v == "geodesic") return FuzzyVariant::GeodesicOneSided;
    if (v == "riemannian" || v == "tangent") return FuzzyVariant::RiemannianTangent;
    if (v == "geodesic-riemannian" || v == "geodesic_riemannian") return FuzzyVariant::GeodesicRiemannian;
    fail(ErrorCode::InvalidArgument, "unknown fuzzy variant '" + v + "'");
}

inline std::filesystem::path out_path(const RunConfig& cfg, const std::string& name) {
    return std::filesystem::path(cfg.out) / name;
}

inline std::ofstream open_out(const RunConfig& cfg, const std::string& name) {
    std::ofstream os(out_path(cfg, name), std::ios::binary);
    if (!os) fail(ErrorCode::IoError, "cannot write '" + out_path(cfg, name).string() + "'");
    return os;
}

inline void write_json(const RunConfig& cfg, const std::string& name, const json& j) {
    auto os = open_out(cfg, name);
    os << j.dump(2) << '\n';
}

inline RddSample load(const RunConfig& cfg) {
    if (cfg.input.empty()) fail(ErrorCode::InvalidArgument, "--input is required");
    RddSample s = io::load_sample(cfg.input, cfg.space, cfg.cutoff, cfg.space_options);
    validate_sample(s);
    return s;
}

struct Bandwidths {
    double h0 = 0.0;
    double h1 = 0.0;
    std::optional<BandwidthSearch> search;
};

inline BandwidthConfig bandwidth_config(const RunConfig& cfg) {
    BandwidthConfig b;
    b.grid_size = cfg.grid_size;
    b.eval_points = cfg.eval_points;
    b.kernel = parse_kernel(cfg.kernel);
    b.threads = cfg.threads;
    return b;
}

inline Bandwidths resolve_bandwidths(const RunConfig& cfg, const RddSample& s) {
    Bandwidths b;
    if (cfg.bw == "auto") {
        b.search = select_bandwidth(s, bandwidth_config(cfg));
        b.h0 = b.h1 = b.search->b_star;
        auto os = open_out(cfg, "bandwidth_search.csv");
        write_bandwidth_csv(os, *b.search);
        return b;
    }
    const auto v = parse_list(cfg.bw, "--bw");
    if (v.size() > 2) fail(ErrorCode::InvalidArgument, "--bw takes 'auto', 'h' or 'h0,h1'");
    b.h0 = v[0];
    b.h1 = v.size() == 2 ? v[1] : v[0];
    return b;
}

inline json bandwidth_json(const Bandwidths& b, const std::string& mode) {
    json j{{"mode", mode == "auto" ? "auto" : "fixed"}, {"h0", b.h0}, {"h1", b.h1}};
    if (b.search) {
        j["b_min"] = b.search->b_min;
        j["b_max"] = b.search->b_max;
        j["b_star"] = b.search->b_star;
        j["grid"] = b.search->grid;
        j["losses"] = b.search->losses;
        j["eval_points"] = b.search->region.points().size();
    }
    return j;
}

inline json diagnostics_json(const SolverDiagnostics& d) {
    return {{"iterations", d.iterations},   {"converged", d.converged}, {"projected", d.projected},
            {"objective", d.objective},     {"multistart_spread", d.multistart_spread},
            {"contributing", d.contributing}};
}

inline std::optional<MetricObject> load_reference(const RunConfig& cfg, const SpaceDescriptor& space) {
    if (!cfg.reference) return std::nullopt;
    MetricObject omega = io::object_from_json(load_json_file(*cfg.reference));
    if (!omega.space.same_geometry(space)) fail(ErrorCode::SpaceMismatch, "reference point is not in " + space.name());
    return omega;
}

/// Writes per-side fitted curves and bin averages for plotting.
inline void write_plot_data(const RunConfig& cfg, const RddSample& s, double h0, double h1) {
    const LocalFrechetRegressor reg(s, parse_kernel(cfg.kernel));
    const auto r = s.running();
    const auto [lo_it, hi_it] = std::minmax_element(r.begin(), r.end());
    const double r_min = *lo_it, r_max = *hi_it, c = s.cutoff;
    const auto cols = io::payload_columns(s.space);

    std::vector<std::string> header{"side", "r"};
    header.insert(header.end(), cols.begin(), cols.end());
    {
        auto os = open_out(cfg, "fit_curves.csv");
        io::write_csv_row(os, header);
        const std::size_t k = std::max<std::size_t>(cfg.curve_points, 2);
        for (const Side side : {Side::Left, Side::Right}) {
            const double a = side == Side::Left ? r_min : c;
            const double b = side == Side::Left ? c : r_max;
            const double h = side == Side::Left ? h0 : h1;
            WindowLimits lim;
            if (side == Side::Left) {
                lim.hi = c;
                lim.hi_open = true;
            } else {
                lim.lo = c;
            }
            for (std::size_t i = 0; i < k; ++i) {
                const double x = a + (b - a) * static_cast<double>(i) / static_cast<double>(k - 1);
                try {
                    const MetricObject m = reg.estimate(x, h, KernelSide::TwoSided, lim).point;
                    std::vector<std::string> row{to_string(side), io::format_double(x)};
                    for (Eigen::Index j = 0; j < m.data.size(); ++j) row.push_back(io::format_double(m.data[j]));
                    io::write_csv_row(os, row);
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::DegenerateWindow && e.code() != ErrorCode::SolverDiverged) throw;
                }
            }
        }
    }
    {
        std::vector<std::string> bh{"side", "bin_lo", "bin_hi", "count"};
        bh.insert(bh.end(), cols.begin(), cols.end());
        auto os = open_out(cfg, "bins.csv");
        io::write_csv_row(os, bh);
        const std::size_t nb = std::max<std::size_t>(cfg.bins, 1);
        for (const Side side : {Side::Left, Side::Right}) {
            const double a = side == Side::Left ? r_min : c;
            const double b = side == Side::Left ? c : r_max;
            if (!(b > a)) continue;
            const double width = (b - a) / static_cast<double>(nb);
            std::vector<std::vector<MetricObject>> members(nb);
            for (const auto& o : s.records) {
                if ((side == Side::Left) != (o.r < c)) continue;
                auto idx = static_cast<std::size_t>((o.r - a) / width);
                members[std::min(idx, nb - 1)].push_back(o.y);
            }
            for (std::size_t k = 0; k < nb; ++k) {
                if (members[k].empty()) continue;
                const MetricObject m = sample_frechet_mean(members[k]);
                const Vector v = s.space.embedding_available() ? embed(m) : m.data;
                std::vector<std::string> row{to_string(side), io::format_double(a + width * static_cast<double>(k)),
                                             io::format_double(a + width * static_cast<double>(k + 1)),
                                             std::to_string(members[k].size())};
                for (Eigen::Index j = 0; j < v.size(); ++j) row.push_back(io::format_double(v[j]));
                io::write_csv_row(os, row);
            }
        }
    }
}

inline json base_report(const RunConfig& cfg, const RddSample& s) {
    return {{"command", cfg.command},
            {"space", io::space_to_json(s.space)},
            {"cutoff", s.cutoff},
            {"n", s.size()},
            {"n0", s.count_below()},
            {"n1", s.count_at_or_above()},
            {"kernel", cfg.kernel}};
}

inline int run_sharp(const RunConfig& cfg) {
    const RddSample s = load(cfg);
    const Bandwidths bw = resolve_bandwidths(cfg, s);
    SharpConfig sc;
    sc.kernel = parse_kernel(cfg.kernel);
    sc.reference = load_reference(cfg, s.space);
    const SharpEstimate est = estimate_sharp(s, bw.h0, bw.h1, sc);
    json j = base_report(cfg, s);
    j["estimator"] = "geodesic_sharp";
    j["bandwidth"] = bandwidth_json(bw, cfg.bw);
    j["magnitude"] = est.magnitude;
    j["start"] = io::object_to_json(est.effect.start);
    j["end"] = io::object_to_json(est.effect.end);
    j["reference"] = io::object_to_json(est.effect.reference);
    j["diagnostics"] = {{"left", diagnostics_json(est.left)}, {"right", diagnostics_json(est.right)}};
    write_json(cfg, "report.json", j);
    write_plot_data(cfg, s, bw.h0, bw.h1);
    return 0;
}

inline int run_fuzzy(const RunConfig& cfg) {
    const FuzzyVariant variant = parse_variant(cfg.fuzzy_variant);
    const RddSample s = load(cfg);
    if (!s.has_treatment()) fail(ErrorCode::MissingTreatment, "fuzzy estimation needs a 't' column");
    const bool geodesic = variant == FuzzyVariant::GeodesicOneSided || variant == FuzzyVariant::GeodesicRiemannian;
    if (geodesic && !s.has_assignment()) fail(ErrorCode::MissingAssignment, "geodesic fuzzy estimation needs a 'z' column");
    const Noncompliance side = parse_side(cfg.side);
    const Bandwidths bw = resolve_bandwidths(cfg, s);
    FuzzyConfig fc;
    fc.kernel = parse_kernel(cfg.kernel);
    fc.delta_comply = cfg.delta_comply;
    fc.reference = load_reference(cfg, s.space);

    FuzzyEstimate est;
    switch (variant) {
    case FuzzyVariant::Embedding: est = estimate_fuzzy_late(s, bw.h0, bw.h1, fc); break;
    case FuzzyVariant::GeodesicOneSided: est = estimate_geodesic_fuzzy(s, bw.h0, bw.h1, side, fc); break;
    case FuzzyVariant::RiemannianTangent: est = estimate_riemannian_fuzzy(s, bw.h0, bw.h1, fc); break;
    case FuzzyVariant::GeodesicRiemannian: est = estimate_geodesic_riemannian_fuzzy(s, side, bw.h0, bw.h1, fc); break;
    }
    json j = base_report(cfg, s);
    j["estimator"] = std::string("fuzzy_") + to_string(variant);
    j["bandwidth"] = bandwidth_json(bw, cfg.bw);
    j["m0"] = est.m0;
    j["m1"] = est.m1;
    j["denominator"] = est.denominator;
    j["tau"] = std::vector<double>(est.tau.data(), est.tau.data() + est.tau.size());
    j["magnitude"] = est.magnitude;
    if (geodesic) j["side"] = cfg.side;
    if (est.limit_left) j["limit_left"] = io::object_to_json(*est.limit_left);
    if (est.limit_right) j["limit_right"] = io::object_to_json(*est.limit_right);
    if (est.stratum) j["stratum"] = io::object_to_json(*est.stratum);
    if (est.effect) {
        j["start"] = io::object_to_json(est.effect->start);
        j["end"] = io::object_to_json(est.effect->end);
        j["reference"] = io::object_to_json(est.effect->reference);
    }
    j["warnings"] = est.warnings;
    write_json(cfg, "report.json", j);
    write_plot_data(cfg, s, bw.h0, bw.h1);
    return 0;
}

inline int run_bandwidth(const RunConfig& cfg) {
    const RddSample s = load(cfg);
    RunConfig auto_cfg = cfg;
    auto_cfg.bw = "auto";
    const Bandwidths bw = resolve_bandwidths(auto_cfg, s);
    json j = base_report(cfg, s);
    j["bandwidth"] = bandwidth_json(bw, "auto");
    j["degenerate_points"] = bw.search->degenerate;
    write_json(cfg, "report.json", j);
    return 0;
}

inline int run_validate(const RunConfig& cfg) {
    const RddSample s = load(cfg);
    json j = base_report(cfg, s);
    j["valid"] = true;
    j["has_treatment"] = s.has_treatment();
    j["has_assignment"] = s.has_assignment();
    write_json(cfg, "report.json", j);
    return 0;
}

inline sim::CampaignConfig campaign_config(const RunConfig& cfg) {
    sim::CampaignConfig c;
    if (cfg.dgp == "network") {
        c.kind = sim::DgpKind::Network;
    } else {
        c.kind = sim::DgpKind::Scalar;
        c.setting = sim::parse_setting(cfg.dgp);
    }
    c.tau = cfg.tau;
    c.sigma = cfg.sigma;
    c.sizes = cfg.sizes;
    c.reps = cfg.reps;
    c.seed = cfg.seed;
    c.threads = cfg.threads;
    c.bw = bandwidth_config(cfg);
    c.estimator.kernel = c.bw.kernel;
    if (cfg.sim_bw == "auto") c.bandwidth = sim::BandwidthMode::Auto;
    else if (cfg.sim_bw == "bmax") c.bandwidth = sim::BandwidthMode::BMax;
    else if (cfg.sim_bw == "cv") c.bandwidth = sim::BandwidthMode::CrossValidated;
    else {
        c.bandwidth = sim::BandwidthMode::Fixed;
        c.fixed_bandwidth = parse_list(cfg.sim_bw, "--sim-bw").at(0);
    }
    return c;
}

inline int run_simulate(const RunConfig& cfg) {
    const sim::CampaignConfig c = campaign_config(cfg);
    if (c.reps < 10) fail(ErrorCode::InvalidArgument, "simulate needs --reps >= 10");
    const sim::CampaignResult res = sim::run_campaign(c);
    {
        auto os = open_out(cfg, "campaign.csv");
        sim::write_campaign_csv(os, res);
    }
    write_json(cfg, "campaign_meta.json", sim::campaign_metadata(c));
    json rate = sim::rate_json(res);
    rate["config_hash"] = sim::config_hash(c);
    write_json(cfg, "rate.json", rate);
    return 0;
}

} // namespace detail

/// Runs one command; errors are reported as JSON on `err` and mapped to exit codes.
inline int run(const RunConfig& cfg, std::ostream& err) {
    try {
        std::error_code ec;
        std::filesystem::create_directories(cfg.out, ec);
        if (ec) fail(ErrorCode::IoError, "cannot create output directory '" + cfg.out + "': " + ec.message());
        if (cfg.command == "sharp") return detail::run_sharp(cfg);
        if (cfg.command == "fuzzy") return detail::run_fuzzy(cfg);
        if (cfg.command == "bandwidth") return detail::run_bandwidth(cfg);
        if (cfg.command == "simulate") return detail::run_simulate(cfg);
        if (cfg.command == "validate") return detail::run_validate(cfg);
        fail(ErrorCode::InvalidArgument, "unknown command '" + cfg.command + "'");
    } catch (const Error& e) {
        const int code = exit_code_for(e.code());
        err << io::error_json(e, code).dump() << '\n';
        return code;
    } catch (const std::exception& e) {
        err << io::error_json(Error(ErrorCode::IoError, e.what()), 1).dump() << '\n';
        return 1;
    }
}

} // namespace grdd::cli
