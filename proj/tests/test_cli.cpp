#include "stochint/cli.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

using namespace stochint;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(cells);
    }
    return rows;
}

std::filesystem::path scratch(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("stochint_cli_" + std::to_string(::getpid()) + "_" + name);
}

} // namespace

TEST(Cli, BasisCheckDefaultsPass) {
    const Outcome o = run({"basis-check"});
    EXPECT_EQ(o.code, 0) << o.err;
    const auto rows = parse_csv(o.out);
    ASSERT_GT(rows.size(), 1u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"basis", "check", "row", "col", "residual", "pass"}));
    for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LT(std::stod(rows[i][4]), 1e-9) << i;
}

TEST(Cli, BasisCheckTightToleranceFails) { EXPECT_EQ(run({"basis-check", "--tol", "1e-15"}).code, 1); }

TEST(Cli, BasisCheckSingleFunction) {
    const auto rows = parse_csv(run({"basis-check", "--q", "0", "--basis", "legendre"}).out);
    int ortho = 0;
    for (const auto& r : rows) ortho += r[1] == "orthonormality";
    EXPECT_EQ(ortho, 1);
}

TEST(Cli, UsageErrors) {
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"nope"}).code, 2);
    EXPECT_EQ(run({"basis-check", "--basis", "haar"}).code, 2);
    EXPECT_EQ(run({"basis-check", "--format", "xml"}).code, 2);
    EXPECT_EQ(run({"levy-error", "--q", "0"}).code, 2);
    EXPECT_EQ(run({"levy-error", "--paths", "-5"}).code, 2);
    EXPECT_EQ(run({"levy-error", "--t0", "1", "--t1", "1"}).code, 2);
    EXPECT_EQ(run({"hermite-check", "--k", "6"}).code, 2);
    EXPECT_EQ(run({"milstein-order", "--problem", "unknown"}).code, 2);
    // a single step size leaves the slope undefined
    EXPECT_EQ(run({"milstein-order", "--steps", "16", "--paths", "4"}).code, 2);
    EXPECT_EQ(run({"bridge-check", "--q", "1,2"}).code, 2);
    EXPECT_EQ(run({"basis-check", "--out", "/nonexistent-dir/x.csv"}).code, 2);
    EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, LevyErrorColumns) {
    const Outcome o = run({"levy-error", "--paths", "200", "--grid-n", "512", "--q", "2,1", "--basis", "legendre", "--seed", "3"});
    const auto rows = parse_csv(o.out);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"basis", "tail", "q", "n", "analytic_ms", "mc_ms", "mc_stderr", "bound_2n", "mc_2n",
                                                 "envelope", "slope", "pass"}));
    // rows come out sorted by q
    EXPECT_EQ(rows[1][2], "1");
    EXPECT_EQ(rows[2][2], "2");
    EXPECT_DOUBLE_EQ(std::stod(rows[1][4]), 1.0 / 12.0);
    EXPECT_DOUBLE_EQ(std::stod(rows[1][9]) / 2.0, std::stod(rows[2][9]));
    EXPECT_GT(std::stod(rows[1][6]), 0.0);
    EXPECT_EQ(rows[1][3], "200");
}

TEST(Cli, JsonAndCsvCarryTheSameNumbers) {
    const std::vector<std::string> base{"hermite-check", "--paths", "20", "--q", "8", "--k", "1,2,3"};
    std::vector<std::string> csv = base, json = base;
    csv.insert(csv.end(), {"--format", "csv"});
    json.insert(json.end(), {"--format", "json"});
    const auto rows = parse_csv(run(csv).out);
    const auto doc = nlohmann::json::parse(run(json).out);
    ASSERT_EQ(doc["rows"].size() + 1, rows.size());
    EXPECT_EQ(doc["command"], "hermite-check");
    for (std::size_t i = 1; i < rows.size(); ++i)
        for (std::size_t c = 0; c < rows[0].size(); ++c) {
            const auto& v = doc["rows"][i - 1][rows[0][c]];
            if (v.is_number_float())
                EXPECT_EQ(v.get<double>(), std::strtod(rows[i][c].c_str(), nullptr)) << rows[0][c];
            else if (v.is_number_integer())
                EXPECT_EQ(std::to_string(v.get<std::int64_t>()), rows[i][c]);
            else if (v.is_boolean())
                EXPECT_EQ(v.get<bool>() ? "true" : "false", rows[i][c]);
            else
                EXPECT_EQ(v.get<std::string>(), rows[i][c]);
        }
}

TEST(Cli, SeventeenDigitFloats) {
    const auto rows = parse_csv(run({"levy-error", "--paths", "50", "--grid-n", "256", "--q", "1", "--basis", "trig"}).out);
    EXPECT_EQ(rows[1][4], "0.098018224536493337");
}

TEST(Cli, ConfigFileWithFlagOverride) {
    const auto cfg = scratch("config.toml");
    {
        std::ofstream f(cfg);
        f << "[bridge-check]\npaths = 5000\nseed = 11\nq = 2\n";
    }
    const Outcome from_file = run({"--config", cfg.string(), "bridge-check"});
    const Outcome explicit_flags = run({"bridge-check", "--paths", "5000", "--seed", "11", "--q", "2"});
    EXPECT_EQ(from_file.code, 0) << from_file.err;
    EXPECT_EQ(from_file.out, explicit_flags.out);
    // flags win over the file
    const Outcome override = run({"--config", cfg.string(), "bridge-check", "--seed", "12"});
    EXPECT_EQ(override.out, run({"bridge-check", "--paths", "5000", "--seed", "12", "--q", "2"}).out);
    EXPECT_NE(override.out, from_file.out);
    std::filesystem::remove(cfg);
}

TEST(Cli, OutFileMatchesStdout) {
    const auto path = scratch("out.json");
    const std::vector<std::string> base{"milstein-order", "--paths", "8", "--steps", "4,8", "--grid-n", "512", "--ref-steps", "128", "--format", "json"};
    std::vector<std::string> to_file = base;
    to_file.insert(to_file.end(), {"--out", path.string()});
    const Outcome file_run = run(to_file);
    EXPECT_TRUE(file_run.out.empty());
    std::ifstream in(path, std::ios::binary);
    const std::string written((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    EXPECT_EQ(written, run(base).out);
    EXPECT_EQ(file_run.code, run(base).code);
    std::filesystem::remove(path);
}

TEST(Cli, ThreadCountDoesNotChangeReports) {
    for (const std::vector<std::string>& base : std::vector<std::vector<std::string>>{
             {"levy-error", "--paths", "130", "--grid-n", "512", "--q", "1,2"},
             {"bridge-check", "--paths", "9000"},
             {"hermite-check", "--paths", "70", "--q", "10"},
         }) {
        std::vector<std::string> one = base, four = base;
        one.insert(one.end(), {"--threads", "1"});
        four.insert(four.end(), {"--threads", "4"});
        EXPECT_EQ(run(one).out, run(four).out) << base[0];
    }
}
