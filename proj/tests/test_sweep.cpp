#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "treeaoi/errors.hpp"
#include "treeaoi/sweep.hpp"

using namespace treeaoi;

namespace {

std::string slurp(const std::string& path)
{
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(TREEAOI_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

SweepSpec spec_for(std::vector<GridPoint> points, SweepMode mode)
{
    SweepSpec s;
    s.points = std::move(points);
    s.mode = mode;
    s.horizon_slots = 50'000;
    s.lmax_grid = {2, 5, std::nullopt};
    return s;
}

}  // namespace

TEST_CASE("lmax parsing")
{
    CHECK_FALSE(parse_lmax("inf").has_value());
    CHECK_FALSE(parse_lmax("plain").has_value());
    CHECK(parse_lmax("2") == 2);
    CHECK(parse_lmax("64") == 64);
    CHECK_THROWS_AS(parse_lmax("1"), ConfigError);
    CHECK_THROWS_AS(parse_lmax("abc"), ConfigError);
    CHECK_THROWS_AS(parse_lmax("3x"), ConfigError);
    CHECK(format_lmax(std::nullopt) == "inf");
    CHECK(format_lmax(7) == "7");
}

TEST_CASE("grid construction keeps input order")
{
    const std::vector<int> users{10, 100};
    const std::vector<double> rates{0.1, 0.8};
    const std::vector<std::optional<int>> lmax{2, std::nullopt};
    const auto grid = make_grid(users, rates, true, lmax);
    REQUIRE(grid.size() == 8);
    CHECK(grid[0].users == 10);
    CHECK(grid[0].gen_prob == doctest::Approx(0.01));
    CHECK(grid[1].max_cri_slots == std::nullopt);
    CHECK(grid[7].users == 100);
    CHECK(grid[7].gen_prob == doctest::Approx(0.008));
    const auto per_user = make_grid(users, rates, false, lmax);
    CHECK(per_user[2].gen_prob == doctest::Approx(0.8));
}

TEST_CASE("spec validation")
{
    CHECK_THROWS_AS(spec_for({}, SweepMode::analyze).validate(), ConfigError);
    CHECK_THROWS_AS(spec_for({GridPoint{0, 0.1, 2}}, SweepMode::analyze).validate(), ConfigError);
    auto s = spec_for({GridPoint{10, 0.1, 2}}, SweepMode::simulate);
    s.seeds = 0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    CHECK_THROWS_AS(run_sweep(spec_for({}, SweepMode::analyze)), ConfigError);
}

TEST_CASE("analyze rows and CSV schema")
{
    const auto rows = cmd_analyze(spec_for({GridPoint{1, 0.5, std::nullopt}, GridPoint{100, 0.008, 2}}, SweepMode::analyze));
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].mean_y == doctest::Approx(2.0));
    CHECK(rows[0].delta == doctest::Approx(3.5));
    CHECK(rows[1].delta_norm == doctest::Approx(rows[1].delta / 100.0));
    CHECK(rows[1].mode == "analyze");

    std::ostringstream out;
    write_csv(out, rows);
    std::istringstream lines(out.str());
    std::string header, first;
    std::getline(lines, header);
    std::getline(lines, first);
    CHECK(header == kCsvHeader);
    CHECK(first.rfind("1,0.5,0.5,inf,analyze,3.5,", 0) == 0);

    std::ostringstream json;
    write_json(json, rows);
    CHECK(json.str().find("\"lmax\": \"inf\"") != std::string::npos);
}

TEST_CASE("failed points become error rows")
{
    const auto rows = cmd_analyze(spec_for({GridPoint{10, 0.0, 3}}, SweepMode::analyze));
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].failed());
    CHECK(std::isnan(rows[0].delta));
    std::ostringstream out;
    write_csv(out, rows);
    CHECK(out.str().find(",nan,") != std::string::npos);
}

TEST_CASE("optimize: one row per point")
{
    const auto single = cmd_optimize(spec_for({GridPoint{100, 0.008, std::nullopt}}, SweepMode::optimize));
    REQUIRE(single.size() == 1);
    CHECK(single[0].point.max_cri_slots == 2);
    CHECK(single[0].mode == "optimize");
    const auto low = cmd_optimize(spec_for({GridPoint{100, 0.0005, std::nullopt}}, SweepMode::optimize));
    REQUIRE(low.size() == 1);
    CHECK_FALSE(low[0].point.max_cri_slots.has_value());
}

TEST_CASE("simulate is independent of the worker count")
{
    auto s = spec_for({GridPoint{20, 0.02, 3}, GridPoint{20, 0.02, std::nullopt}}, SweepMode::both);
    s.seeds = 3;
    s.workers = 1;
    std::ostringstream one;
    write_csv(one, run_sweep(s));
    s.workers = 4;
    std::ostringstream four;
    write_csv(four, run_sweep(s));
    const std::string text = one.str();
    CHECK(text == four.str());
    CHECK(std::count(text.begin(), text.end(), '\n') == 5);
}

TEST_CASE("command line exit codes and reproducibility")
{
    const std::string a = "treeaoi_test_a.csv";
    const std::string b = "treeaoi_test_b.csv";
    CHECK(run_cli("analyze -U 100 --rhoU 0.4,0.8 --lmax 2,inf -o " + a) == 0);
    CHECK(slurp(a).rfind(kCsvHeader, 0) == 0);
    CHECK(run_cli("simulate -U 20 --rhoU 0.5 --lmax 3 --horizon 30000 --seeds 2 --seed 5 -o " + a) == 0);
    CHECK(run_cli("simulate -U 20 --rhoU 0.5 --lmax 3 --horizon 30000 --seeds 2 --seed 5 -j 2 -o " + b) == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK(run_cli("analyze -U 100 --rhoU 0.4 --lmax 1") == 1);
    CHECK(run_cli("analyze -U 100 --rho 0.1 --rhoU 0.4") == 1);
    CHECK(run_cli("analyze --bogus") == 1);
    CHECK(run_cli("analyze -U 10 --rho 0 --lmax 3") == 2);
    std::remove(a.c_str());
    std::remove(b.c_str());
}
