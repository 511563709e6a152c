// treeaoi: batch front-end for the tree-splitting AoI analysis and simulator.
//
//   treeaoi analyze  --users 100 --rhoU 0.05:0.8:0.025 --lmax 2,5,10,inf
//   treeaoi simulate --users 100 --rhoU 0.8 --lmax 2 --horizon 10000000 --seeds 10
//   treeaoi optimize --users 100 --rhoU 0.05:1:0.05 --lmax 2:64,inf
//
// Rates and truncation lengths accept comma lists and start:stop[:step]
// ranges. Options may also come from a TOML/INI file given with --config;
// command-line flags win over the file, which wins over defaults.

#include <cmath>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "treeaoi/errors.hpp"
#include "treeaoi/sweep.hpp"

namespace {

using treeaoi::ConfigError;

std::vector<std::string> split_list(const std::vector<std::string>& items)
{
    std::vector<std::string> out;
    for (const auto& item : items) {
        std::size_t start = 0;
        while (start <= item.size()) {
            const auto comma = item.find(',', start);
            const auto token = item.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            if (!token.empty())
                out.push_back(token);
            if (comma == std::string::npos)
                break;
            start = comma + 1;
        }
    }
    return out;
}

double parse_double(const std::string& s)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ConfigError("invalid number '" + s + "'");
    }
    if (used != s.size())
        throw ConfigError("invalid number '" + s + "'");
    return v;
}

// "a:b:step" expands inclusively; the count is rounded so 0.05:0.8:0.025
// yields exactly 31 points.
std::vector<double> parse_rates(const std::vector<std::string>& items)
{
    std::vector<double> out;
    for (const auto& token : split_list(items)) {
        const auto c1 = token.find(':');
        if (c1 == std::string::npos) {
            out.push_back(parse_double(token));
            continue;
        }
        const auto c2 = token.find(':', c1 + 1);
        if (c2 == std::string::npos)
            throw ConfigError("rate range needs start:stop:step, got '" + token + "'");
        const double a = parse_double(token.substr(0, c1));
        const double b = parse_double(token.substr(c1 + 1, c2 - c1 - 1));
        const double step = parse_double(token.substr(c2 + 1));
        if (!(step > 0.0) || b < a)
            throw ConfigError("bad rate range '" + token + "'");
        const long n = std::lround(std::floor((b - a) / step + 1e-9));
        for (long i = 0; i <= n; ++i)
            out.push_back(a + static_cast<double>(i) * step);
    }
    return out;
}

std::vector<std::optional<int>> parse_lmax_list(const std::vector<std::string>& items)
{
    std::vector<std::optional<int>> out;
    for (const auto& token : split_list(items)) {
        const auto colon = token.find(':');
        if (colon == std::string::npos) {
            out.push_back(treeaoi::parse_lmax(token));
            continue;
        }
        const auto lo = treeaoi::parse_lmax(token.substr(0, colon));
        const auto hi = treeaoi::parse_lmax(token.substr(colon + 1));
        if (!lo || !hi || *hi < *lo)
            throw ConfigError("bad truncation range '" + token + "'");
        for (int l = *lo; l <= *hi; ++l)
            out.push_back(l);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Age of Information of gated tree-splitting random access (CTM / CTM-ET)"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "TOML/INI file with option defaults");

    std::vector<int> users{100};
    std::vector<std::string> rho_items;
    std::vector<std::string> rho_u_items;
    std::vector<std::string> lmax_items;
    std::int64_t horizon = 1'000'000;
    std::int64_t warmup = -1;
    int seeds = 1;
    std::uint64_t seed = 1;
    int workers = treeaoi::default_workers();
    std::string output = "-";
    std::string format = "csv";
    bool both = false;

    app.add_option("-U,--users", users, "Population sizes")->delimiter(',')->check(CLI::PositiveNumber);
    auto* rho_opt = app.add_option("--rho", rho_items, "Per-user generation probabilities (list or a:b:step)");
    auto* rho_u_opt = app.add_option("--rhoU", rho_u_items, "Aggregate generation rates rho*U (list or a:b:step)");
    rho_opt->excludes(rho_u_opt);
    app.add_option("--lmax", lmax_items,
                   "CRI truncation lengths; 'inf' for plain CTM (analyze/simulate default: inf; "
                   "optimize default: 2:64,inf)");
    app.add_option("--horizon", horizon, "Simulated slots per seed");
    app.add_option("--warmup", warmup, "Warmup slots (default: 10% of horizon, at least 1e4)");
    app.add_option("--seeds", seeds, "Independent replicas per grid point");
    app.add_option("--seed", seed, "Base seed; replica i uses seed + i");
    app.add_option("-j,--workers", workers, "Worker threads (env TREEAOI_WORKERS)")->check(CLI::PositiveNumber);
    app.add_option("-o,--output", output, "Output path, '-' for stdout");
    app.add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));

    auto* analyze = app.add_subcommand("analyze", "Analytical average AoI, delivery rate and delay");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimates with standard errors");
    auto* optimize = app.add_subcommand("optimize", "AoI-optimal truncation length per rate");
    analyze->add_flag("--both", both, "Also simulate every point");
    simulate->add_flag("--both", both, "Also analyze every point");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    treeaoi::SweepSpec spec;
    try {
        const bool aggregate = rho_u_opt->count() > 0;
        if (!aggregate && rho_opt->count() == 0)
            throw ConfigError("one of --rho or --rhoU is required");
        const auto rates = parse_rates(aggregate ? rho_u_items : rho_items);
        std::vector<std::optional<int>> lmax;
        if (lmax_items.empty()) {
            lmax = optimize->parsed() ? parse_lmax_list({"2:64", "inf"}) : std::vector<std::optional<int>>{std::nullopt};
        } else {
            lmax = parse_lmax_list(lmax_items);
        }
        if (optimize->parsed()) {
            spec.mode = treeaoi::SweepMode::optimize;
            spec.lmax_grid = lmax;
            spec.points = treeaoi::make_grid(users, rates, aggregate, std::vector<std::optional<int>>{std::nullopt});
        } else {
            spec.mode = both ? treeaoi::SweepMode::both
                             : (simulate->parsed() ? treeaoi::SweepMode::simulate : treeaoi::SweepMode::analyze);
            spec.points = treeaoi::make_grid(users, rates, aggregate, lmax);
        }
        spec.horizon_slots = horizon;
        spec.warmup_slots = warmup;
        spec.seeds = seeds;
        spec.base_seed = seed;
        spec.workers = workers;
        spec.validate();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    }

    const auto rows = treeaoi::run_sweep(spec);

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (output != "-") {
        file.open(output);
        if (!file) {
            std::cerr << "cannot open output file " << output << '\n';
            return 1;
        }
        out = &file;
    }
    if (format == "json")
        treeaoi::write_json(*out, rows);
    else
        treeaoi::write_csv(*out, rows);

    int failures = 0;
    for (const auto& r : rows) {
        if (r.failed()) {
            ++failures;
            std::cerr << "point U=" << r.point.users << " rho=" << r.point.gen_prob
                      << " lmax=" << treeaoi::format_lmax(r.point.max_cri_slots) << " failed: " << r.error << '\n';
        }
    }
    return failures > 0 ? 2 : 0;
}
