#include "grdd/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using grdd::cli::RunConfig;

    CLI::App app{"Regression-discontinuity estimation for metric-space outcomes"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "JSON file with default settings (flags take precedence)");

    RunConfig flags;
    std::string support, domain;
    std::vector<CLI::Option*> given;
    auto opt = [&](CLI::App* sub, const std::string& name, auto& target, const std::string& help) {
        given.push_back(sub->add_option(name, target, help));
        return given.back();
    };

    auto add_data_options = [&](CLI::App* sub) {
        opt(sub, "--input", flags.input, "CSV or JSON-lines sample");
        opt(sub, "--space", flags.space, "euclid|l2|simplex|laplacian|spd:<metric>|wass");
        opt(sub, "--cutoff", flags.cutoff, "cutoff c of the running variable");
        opt(sub, "--out", flags.out, "output directory");
        opt(sub, "--kernel", flags.kernel, "triangular|uniform");
        opt(sub, "--power", flags.space_options.power, "power for spd:power");
        opt(sub, "--eps-pd", flags.space_options.eps_pd, "eigenvalue floor for SPD inputs");
        opt(sub, "--wmax", flags.space_options.w_max, "maximum edge weight for Laplacians");
        opt(sub, "--support", support, "lo,hi support bounds for quantile functions");
        opt(sub, "--domain", domain, "lo,hi domain of functional outcomes");
        opt(sub, "--grid-size", flags.grid_size, "candidate bandwidths in the automatic search");
        opt(sub, "--eval-points", flags.eval_points, "evaluation points in the automatic search");
        opt(sub, "--threads", flags.threads, "worker threads (0 = all cores)");
    };

    auto* sharp = app.add_subcommand("sharp", "geodesic effect under a sharp design");
    auto* fuzzy = app.add_subcommand("fuzzy", "compliers' effect under a fuzzy design");
    auto* bandwidth = app.add_subcommand("bandwidth", "data-adaptive bandwidth search only");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo campaign");
    auto* validate = app.add_subcommand("validate", "load and check a sample");
    for (auto* sub : {sharp, fuzzy, bandwidth, validate}) add_data_options(sub);
    for (auto* sub : {sharp, fuzzy}) {
        opt(sub, "--bw", flags.bw, "auto, h, or h0,h1");
        opt(sub, "--reference", flags.reference, "JSON object used as the reference point");
        opt(sub, "--curve-points", flags.curve_points, "grid size of exported fitted curves");
        opt(sub, "--bins", flags.bins, "bins per side in exported bin averages");
    }
    opt(fuzzy, "--fuzzy-variant", flags.fuzzy_variant, "embedding|geodesic|riemannian|geodesic-riemannian");
    opt(fuzzy, "--side", flags.side, "always|never");
    opt(fuzzy, "--delta-comply", flags.delta_comply, "smallest accepted compliance jump");

    std::string sizes;
    opt(simulate, "--dgp", flags.dgp, "network|I|II|III|IV");
    opt(simulate, "--reps", flags.reps, "replications per sample size");
    opt(simulate, "--sizes", sizes, "comma-separated sample sizes");
    opt(simulate, "--seed", flags.seed, "campaign seed");
    opt(simulate, "--sim-bw", flags.sim_bw, "auto|bmax|cv|<fixed bandwidth>");
    opt(simulate, "--tau", flags.tau, "scalar treatment effect");
    opt(simulate, "--sigma", flags.sigma, "scalar noise standard deviation");
    opt(simulate, "--out", flags.out, "output directory");
    opt(simulate, "--threads", flags.threads, "worker threads (0 = all cores)");
    opt(simulate, "--grid-size", flags.grid_size, "candidate bandwidths in the automatic search");
    opt(simulate, "--eval-points", flags.eval_points, "evaluation points in the automatic search");

    CLI11_PARSE(app, argc, argv);

    RunConfig cfg;
    try {
        if (!config_path.empty()) grdd::cli::apply_json(cfg, grdd::cli::load_json_file(config_path));
        cfg.command = app.get_subcommands().front()->get_name();

        // Flags override the config file field by field.
        auto take = [&](const CLI::Option* o, auto member) {
            if (o->count() > 0) cfg.*member = flags.*member;
        };
        for (const CLI::Option* o : given) {
            if (o->count() == 0) continue;
            const std::string n = o->get_name();
            if (n == "--input") take(o, &RunConfig::input);
            else if (n == "--space") take(o, &RunConfig::space);
            else if (n == "--cutoff") take(o, &RunConfig::cutoff);
            else if (n == "--out") take(o, &RunConfig::out);
            else if (n == "--kernel") take(o, &RunConfig::kernel);
            else if (n == "--power") cfg.space_options.power = flags.space_options.power;
            else if (n == "--eps-pd") cfg.space_options.eps_pd = flags.space_options.eps_pd;
            else if (n == "--wmax") cfg.space_options.w_max = flags.space_options.w_max;
            else if (n == "--support") {
                const auto v = grdd::cli::parse_list(support, "--support");
                if (v.size() != 2) grdd::fail(grdd::ErrorCode::InvalidArgument, "--support takes lo,hi");
                cfg.space_options.support_lo = v[0];
                cfg.space_options.support_hi = v[1];
            } else if (n == "--domain") {
                const auto v = grdd::cli::parse_list(domain, "--domain");
                if (v.size() != 2) grdd::fail(grdd::ErrorCode::InvalidArgument, "--domain takes lo,hi");
                cfg.space_options.domain_lo = v[0];
                cfg.space_options.domain_hi = v[1];
            } else if (n == "--grid-size") take(o, &RunConfig::grid_size);
            else if (n == "--eval-points") take(o, &RunConfig::eval_points);
            else if (n == "--threads") take(o, &RunConfig::threads);
            else if (n == "--bw") take(o, &RunConfig::bw);
            else if (n == "--reference") take(o, &RunConfig::reference);
            else if (n == "--curve-points") take(o, &RunConfig::curve_points);
            else if (n == "--bins") take(o, &RunConfig::bins);
            else if (n == "--fuzzy-variant") take(o, &RunConfig::fuzzy_variant);
            else if (n == "--side") take(o, &RunConfig::side);
            else if (n == "--delta-comply") take(o, &RunConfig::delta_comply);
            else if (n == "--dgp") take(o, &RunConfig::dgp);
            else if (n == "--reps") take(o, &RunConfig::reps);
            else if (n == "--sizes") {
                cfg.sizes.clear();
                for (double v : grdd::cli::parse_list(sizes, "--sizes")) cfg.sizes.push_back(static_cast<std::size_t>(v));
            } else if (n == "--seed") take(o, &RunConfig::seed);
            else if (n == "--sim-bw") take(o, &RunConfig::sim_bw);
            else if (n == "--tau") take(o, &RunConfig::tau);
            else if (n == "--sigma") take(o, &RunConfig::sigma);
        }
    } catch (const grdd::Error& e) {
        const int code = grdd::cli::exit_code_for(e.code());
        std::cerr << grdd::io::error_json(e, code).dump() << '\n';
        return code;
    }
    return grdd::cli::run(cfg, std::cerr);
}
