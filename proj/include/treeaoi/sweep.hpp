#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace treeaoi {

enum class SweepMode { analyze, simulate, both, optimize };

std::string to_string(SweepMode mode);

struct GridPoint {
    int users = 100;
    double gen_prob = 0.0;
    std::optional<int> max_cri_slots;
};

struct SweepSpec {
    std::vector<GridPoint> points;
    SweepMode mode = SweepMode::analyze;
    std::int64_t horizon_slots = 1'000'000;
    std::int64_t warmup_slots = -1;
    int seeds = 1;
    std::uint64_t base_seed = 1;
    int workers = 1;
    /// Truncation lengths searched by optimize (nullopt = plain CTM).
    std::vector<std::optional<int>> lmax_grid;

    /// Throws ConfigError on an empty grid, invalid points or seeds < 1.
    void validate() const;
};

/// Cartesian grid over users x rates x truncation lengths, preserving input
/// order (users outermost). Rates are per-user unless `aggregate_rates`.
std::vector<GridPoint> make_grid(std::span<const int> users, std::span<const double> rates,
                                 bool aggregate_rates, std::span<const std::optional<int>> lmax);

struct ResultRow {
    GridPoint point;
    std::string mode;
    double delta = 0.0;
    double delta_norm = 0.0;
    double ps = 0.0;
    double mean_delay = 0.0;
    double mean_y = 0.0;
    std::optional<double> stderr_delta;
    int seed_count = 0;
    std::optional<double> mean_cri;
    /// Non-empty when the point failed; numeric columns are then NaN.
    std::string error;

    bool failed() const { return !error.empty(); }
};

std::vector<ResultRow> cmd_analyze(const SweepSpec& spec);
std::vector<ResultRow> cmd_simulate(const SweepSpec& spec);
std::vector<ResultRow> cmd_optimize(const SweepSpec& spec);
/// Dispatches on spec.mode; `both` yields an analyze row followed by a
/// simulate row per point.
std::vector<ResultRow> run_sweep(const SweepSpec& spec);

inline constexpr const char* kCsvHeader =
    "U,rho,rhoU,lmax,mode,delta,delta_norm,ps,mean_delay,mean_Y,stderr_delta,seed_count";

void write_csv(std::ostream& out, std::span<const ResultRow> rows);
void write_json(std::ostream& out, std::span<const ResultRow> rows);

/// Parses "inf"/"plain" to nullopt, otherwise an integer >= 2.
std::optional<int> parse_lmax(const std::string& text);
std::string format_lmax(const std::optional<int>& lmax);

/// Worker count from the TREEAOI_WORKERS environment variable, else the
/// hardware concurrency (at least 1).
int default_workers();

}  // namespace treeaoi
