#include "treeaoi/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <thread>

#include <fmt/format.h>
#include "json.hpp"

#include "treeaoi/aoi.hpp"
#include "treeaoi/errors.hpp"
#include "treeaoi/simulator.hpp"

namespace treeaoi {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

ProtocolConfig to_config(const GridPoint& p)
{
    return {p.users, p.gen_prob, p.max_cri_slots};
}

// Runs fn(0..n-1) on up to `workers` threads; results are written by index so
// ordering never depends on scheduling.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn)
{
    const auto threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++)
                fn(i);
        });
}

ResultRow failed_row(const GridPoint& point, std::string mode, std::string error)
{
    ResultRow row;
    row.point = point;
    row.mode = std::move(mode);
    row.delta = row.delta_norm = row.ps = row.mean_delay = row.mean_y = kNaN;
    row.error = std::move(error);
    return row;
}

ResultRow analyze_point(const GridPoint& point)
{
    try {
        const auto r = average_aoi(ChainModel(to_config(point)));
        ResultRow row;
        row.point = point;
        row.mode = "analyze";
        row.delta = r.average_aoi;
        row.delta_norm = r.average_aoi / point.users;
        row.ps = r.delivery_rate;
        row.mean_delay = r.mean_delay;
        row.mean_y = r.mean_y;
        row.mean_cri = r.mean_cri;
        return row;
    } catch (const std::exception& e) {
        return failed_row(point, "analyze", e.what());
    }
}

std::string format_number(double v)
{
    if (std::isnan(v))
        return "nan";
    return fmt::format("{:.10g}", v);
}

}  // namespace

std::string to_string(SweepMode mode)
{
    switch (mode) {
    case SweepMode::analyze: return "analyze";
    case SweepMode::simulate: return "simulate";
    case SweepMode::both: return "both";
    case SweepMode::optimize: return "optimize";
    }
    return "unknown";
}

void SweepSpec::validate() const
{
    if (points.empty())
        throw ConfigError("empty parameter grid");
    const bool simulated = mode == SweepMode::simulate || mode == SweepMode::both;
    for (const auto& p : points)
        to_config(p).validate();
    if (simulated) {
        if (seeds < 1)
            throw ConfigError("simulation needs at least one seed");
        if (horizon_slots <= 0)
            throw ConfigError("simulation horizon must be positive");
        const auto warm = warmup_slots < 0 ? default_warmup(horizon_slots) : warmup_slots;
        if (warm >= horizon_slots)
            throw ConfigError("warmup must be shorter than the horizon");
    }
    if (mode == SweepMode::optimize) {
        if (lmax_grid.empty())
            throw ConfigError("optimize needs a non-empty truncation grid");
        for (const auto& l : lmax_grid)
            if (l && *l < 2)
                throw ConfigError("truncation lengths must be at least 2");
    }
}

std::vector<GridPoint> make_grid(std::span<const int> users, std::span<const double> rates, bool aggregate_rates,
                                 std::span<const std::optional<int>> lmax)
{
    std::vector<GridPoint> grid;
    for (int u : users)
        for (double r : rates)
            for (const auto& l : lmax)
                grid.push_back({u, aggregate_rates ? r / u : r, l});
    return grid;
}

std::vector<ResultRow> cmd_analyze(const SweepSpec& spec)
{
    spec.validate();
    std::vector<ResultRow> rows(spec.points.size());
    parallel_for(rows.size(), spec.workers, [&](std::size_t i) { rows[i] = analyze_point(spec.points[i]); });
    return rows;
}

std::vector<ResultRow> cmd_simulate(const SweepSpec& spec)
{
    spec.validate();
    const std::size_t seeds = static_cast<std::size_t>(spec.seeds);
    std::vector<SimMetrics> runs(spec.points.size() * seeds);
    std::vector<std::string> errors(runs.size());
    parallel_for(runs.size(), spec.workers, [&](std::size_t task) {
        const auto& point = spec.points[task / seeds];
        SimOptions opt;
        opt.horizon_slots = spec.horizon_slots;
        opt.warmup_slots = spec.warmup_slots;
        opt.seed = spec.base_seed + task % seeds;
        try {
            runs[task] = run_simulation(to_config(point), opt);
        } catch (const std::exception& e) {
            errors[task] = e.what();
        }
    });

    std::vector<ResultRow> rows;
    rows.reserve(spec.points.size());
    for (std::size_t p = 0; p < spec.points.size(); ++p) {
        const auto& point = spec.points[p];
        const auto first = p * seeds;
        if (auto bad = std::find_if(errors.begin() + first, errors.begin() + first + seeds,
                                    [](const std::string& e) { return !e.empty(); });
            bad != errors.begin() + first + seeds) {
            rows.push_back(failed_row(point, "simulate", *bad));
            continue;
        }
        SimMetrics pooled = runs[first];
        double sum = 0.0;
        double sq = 0.0;
        int with_age = 0;
        for (std::size_t s = 0; s < seeds; ++s) {
            if (s > 0)
                pooled.merge(runs[first + s]);
            if (auto d = runs[first + s].average_aoi()) {
                sum += *d;
                sq += *d * *d;
                ++with_age;
            }
        }
        ResultRow row;
        row.point = point;
        row.mode = "simulate";
        row.seed_count = spec.seeds;
        row.delta = with_age > 0 ? sum / with_age : kNaN;
        row.delta_norm = row.delta / point.users;
        if (with_age > 1) {
            const double var = std::max(0.0, (sq - sum * sum / with_age) / (with_age - 1));
            row.stderr_delta = std::sqrt(var / with_age);
        } else {
            row.stderr_delta = 0.0;
        }
        row.ps = pooled.delivery_rate().value_or(kNaN);
        row.mean_delay = pooled.mean_delay().value_or(kNaN);
        row.mean_y = pooled.mean_refresh().value_or(kNaN);
        if (const auto n = pooled.cri_count(); n > 0) {
            double acc = 0.0;
            for (std::size_t i = 0; i < pooled.cri_hist.size(); ++i)
                acc += static_cast<double>(pooled.cri_hist[i]) * static_cast<double>(i + 1);
            row.mean_cri = acc / static_cast<double>(n);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<ResultRow> cmd_optimize(const SweepSpec& spec)
{
    spec.validate();
    std::vector<ResultRow> rows(spec.points.size());
    parallel_for(rows.size(), spec.workers, [&](std::size_t i) {
        GridPoint point = spec.points[i];
        try {
            const auto choice = optimize_lmax(point.users, point.gen_prob, spec.lmax_grid);
            point.max_cri_slots = choice.max_cri_slots;
            rows[i] = analyze_point(point);
            rows[i].mode = "optimize";
        } catch (const std::exception& e) {
            rows[i] = failed_row(point, "optimize", e.what());
        }
    });
    return rows;
}

std::vector<ResultRow> run_sweep(const SweepSpec& spec)
{
    switch (spec.mode) {
    case SweepMode::analyze: return cmd_analyze(spec);
    case SweepMode::simulate: return cmd_simulate(spec);
    case SweepMode::optimize: return cmd_optimize(spec);
    case SweepMode::both: {
        const auto analytic = cmd_analyze(spec);
        const auto simulated = cmd_simulate(spec);
        std::vector<ResultRow> rows;
        rows.reserve(2 * analytic.size());
        for (std::size_t i = 0; i < analytic.size(); ++i) {
            rows.push_back(analytic[i]);
            rows.push_back(simulated[i]);
        }
        return rows;
    }
    }
    return {};
}

void write_csv(std::ostream& out, std::span<const ResultRow> rows)
{
    out << kCsvHeader << '\n';
    for (const auto& r : rows) {
        out << r.point.users << ',' << format_number(r.point.gen_prob) << ','
            << format_number(r.point.gen_prob * r.point.users) << ',' << format_lmax(r.point.max_cri_slots) << ','
            << r.mode << ',' << format_number(r.delta) << ',' << format_number(r.delta_norm) << ','
            << format_number(r.ps) << ',' << format_number(r.mean_delay) << ',' << format_number(r.mean_y) << ','
            << (r.stderr_delta ? format_number(*r.stderr_delta) : std::string{}) << ',' << r.seed_count << '\n';
    }
}

void write_json(std::ostream& out, std::span<const ResultRow> rows)
{
    const auto number = [](double v) -> nlohmann::json {
        if (std::isnan(v))
            return nullptr;
        return v;
    };
    auto doc = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json j;
        j["U"] = r.point.users;
        j["rho"] = r.point.gen_prob;
        j["rhoU"] = r.point.gen_prob * r.point.users;
        if (r.point.max_cri_slots)
            j["lmax"] = *r.point.max_cri_slots;
        else
            j["lmax"] = "inf";
        j["mode"] = r.mode;
        j["delta"] = number(r.delta);
        j["delta_norm"] = number(r.delta_norm);
        j["ps"] = number(r.ps);
        j["mean_delay"] = number(r.mean_delay);
        j["mean_Y"] = number(r.mean_y);
        j["stderr_delta"] = r.stderr_delta ? number(*r.stderr_delta) : nlohmann::json(nullptr);
        j["seed_count"] = r.seed_count;
        if (r.mean_cri)
            j["mean_cri"] = *r.mean_cri;
        if (r.failed())
            j["error"] = r.error;
        doc.push_back(std::move(j));
    }
    out << doc.dump(2) << '\n';
}

std::optional<int> parse_lmax(const std::string& text)
{
    if (text == "inf" || text == "plain")
        return std::nullopt;
    int value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end)
        throw ConfigError(fmt::format("invalid truncation length '{}'", text));
    if (value < 2)
        throw ConfigError(fmt::format("truncation length must be at least 2 (got {})", value));
    return value;
}

std::string format_lmax(const std::optional<int>& lmax)
{
    return lmax ? std::to_string(*lmax) : std::string{"inf"};
}

int default_workers()
{
    if (const char* env = std::getenv("TREEAOI_WORKERS")) {
        int n = 0;
        const std::string_view s{env};
        if (auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
            ec == std::errc{} && ptr == s.data() + s.size() && n >= 1)
            return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace treeaoi
