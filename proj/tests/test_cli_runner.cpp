#include <catch2/catch_amalgamated.hpp>

#include <qotto/cli_runner.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "oracles.hpp"

using namespace qotto;
using Catch::Matchers::WithinAbs;

namespace {

struct CliResult {
    int code = 0;
    std::string out;
};

CliResult run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "qotto");
    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const std::string& a : args) argv.push_back(a.c_str());
    std::ostringstream captured;
    std::streambuf* old = std::cout.rdbuf(captured.rdbuf());
    const int code = cli_main(static_cast<int>(argv.size()), argv.data());
    std::cout.rdbuf(old);
    return {code, captured.str()};
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

std::filesystem::path temp_file(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "qotto_cli_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

struct ParsedCsv {
    std::map<std::string, std::string> meta;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(line);
    while (std::getline(is, item, ',')) out.push_back(item);
    return out;
}

ParsedCsv parse_csv(const std::string& text) {
    ParsedCsv csv;
    std::istringstream is(text);
    std::string line;
    bool header_seen = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line.rfind("# ", 0) == 0) {
            const auto colon = line.find(": ");
            REQUIRE(colon != std::string::npos);
            csv.meta[line.substr(2, colon - 2)] = line.substr(colon + 2);
            continue;
        }
        if (!header_seen) {
            csv.columns = split_commas(line);
            header_seen = true;
            continue;
        }
        csv.rows.push_back(split_commas(line));
    }
    return csv;
}

std::size_t column_index(const ParsedCsv& csv, const std::string& name) {
    for (std::size_t i = 0; i < csv.columns.size(); ++i)
        if (csv.columns[i] == name) return i;
    FAIL("missing column " + name);
    return 0;
}

std::string strip_timestamp(const std::string& text) {
    std::istringstream is(text);
    std::ostringstream os;
    std::string line;
    while (std::getline(is, line))
        if (line.rfind("# generated:", 0) != 0) os << line << "\n";
    return os.str();
}

}  // namespace

TEST_CASE("tau grid parsing") {
    const TauGrid g = TauGrid::parse("0.001:20:200:log");
    CHECK_THAT(g.start, WithinAbs(0.001, 0.0));
    CHECK_THAT(g.stop, WithinAbs(20.0, 0.0));
    CHECK(g.count == 200);
    CHECK(g.spacing == GridSpacing::log);
    const std::vector<double> v = g.values();
    REQUIRE(v.size() == 200);
    CHECK_THAT(v.front(), WithinAbs(0.001, 1e-15));
    CHECK_THAT(v.back(), WithinAbs(20.0, 1e-12));

    const TauGrid lin = TauGrid::parse("1:3:5");
    const std::vector<double> lv = lin.values();
    REQUIRE(lv.size() == 5);
    CHECK_THAT(lv[1], WithinAbs(1.5, 1e-15));
    CHECK(lin.spacing == GridSpacing::linear);

    CHECK(TauGrid::parse("2:2:1").values() == std::vector<double>{2.0});

    CHECK_THROWS_AS(TauGrid::parse("1:2"), ValidationError);
    CHECK_THROWS_AS(TauGrid::parse("a:2:3"), ValidationError);
    CHECK_THROWS_AS(TauGrid::parse("1:2:3:weird"), ValidationError);
    CHECK_THROWS_AS(TauGrid::parse("2:1:3"), ValidationError);
    CHECK_THROWS_AS(TauGrid::parse("0:2:3"), ValidationError);
    CHECK_THROWS_AS(TauGrid::parse("1:2:0"), ValidationError);
}

TEST_CASE("exit codes map error classes") {
    // Validation: gamma out of range.
    CHECK(run_cli({"cycle", "--coupling-J", "1", "--gamma", "1.5"}).code == 2);
    // Usage: required flag missing.
    CHECK(run_cli({"cycle"}).code == 2);
    // Usage: unknown format.
    CHECK(run_cli({"cycle", "--coupling-J", "1", "--format", "xml"}).code == 2);
    // Numerical: eigenlabel collision at B = 0 with |gamma| J = J.
    CHECK(run_cli({"cycle", "--coupling-J", "1", "--gamma", "1", "--b1", "0", "--b2", "0"}).code ==
          3);
    // I/O: unwritable output path.
    CHECK(run_cli({"cycle", "--coupling-J", "1", "--out", "/nonexistent-dir/x.csv"}).code == 4);
    // Success writes to stdout by default.
    const CliResult ok = run_cli({"cycle", "--coupling-J", "1", "--tau", "0.01"});
    CHECK(ok.code == 0);
    CHECK(ok.out.find("# kind: cycle") != std::string::npos);
}

TEST_CASE("cycle command output is duration-invariant for isotropic coupling") {
    const auto path_fast = temp_file("cycle_fast.csv");
    const auto path_slow = temp_file("cycle_slow.csv");
    REQUIRE(run_cli({"cycle", "--coupling-J", "1", "--gamma", "0", "--tau", "0.001", "--out",
                     path_fast.string()})
                .code == 0);
    REQUIRE(run_cli({"cycle", "--coupling-J", "1", "--gamma", "0", "--tau", "20", "--out",
                     path_slow.string()})
                .code == 0);
    const ParsedCsv fast = parse_csv(slurp(path_fast));
    const ParsedCsv slow = parse_csv(slurp(path_slow));
    REQUIRE(fast.rows.size() == 1);
    REQUIRE(slow.rows.size() == 1);
    for (std::size_t c = 0; c < fast.columns.size(); ++c) {
        if (fast.columns[c] == "is_engine") {
            CHECK(fast.rows[0][c] == slow.rows[0][c]);
            continue;
        }
        CHECK_THAT(std::stod(fast.rows[0][c]), WithinAbs(std::stod(slow.rows[0][c]), 1e-8));
    }
}

TEST_CASE("two-bath cycle reports zero coherence at the thermal points") {
    const auto path = temp_file("cycle_two_bath.csv");
    REQUIRE(run_cli({"cycle", "--coupling-J", "1", "--gamma", "1", "--mode", "two_bath",
                     "--temp-hot", "10", "--tau", "0.5", "--out", path.string()})
                .code == 0);
    const ParsedCsv csv = parse_csv(slurp(path));
    CHECK(std::stod(csv.rows[0][column_index(csv, "coherence_a")]) <= 1e-12);
    CHECK(std::stod(csv.rows[0][column_index(csv, "coherence_c")]) <= 1e-12);
}

TEST_CASE("work distribution files carry signed quasi-probabilities and residuals") {
    SECTION("measurement mode has a negative row") {
        const auto path = temp_file("dist_meas.csv");
        REQUIRE(run_cli({"work-dist", "--coupling-J", "1", "--gamma", "1", "--tau", "0.001",
                         "--out", path.string()})
                    .code == 0);
        const ParsedCsv csv = parse_csv(slurp(path));
        CHECK(csv.columns == std::vector<std::string>{"w", "p", "origin", "stage"});
        const std::size_t pc = column_index(csv, "p");
        double min_p = 0.0;
        for (const auto& row : csv.rows) min_p = std::min(min_p, std::stod(row[pc]));
        CHECK(min_p < 0.0);
        CHECK(std::stod(csv.meta.at("normalization_residual_full_cycle")) <= 1e-9);
        CHECK(std::stod(csv.meta.at("normalization_residual_AB")) <= 1e-9);
        CHECK(csv.meta.at("gamma") == "1");
        // Rows are sorted by w within each stage block.
        const std::size_t wc = column_index(csv, "w");
        const std::size_t sc = column_index(csv, "stage");
        for (std::size_t i = 1; i < csv.rows.size(); ++i)
            if (csv.rows[i][sc] == csv.rows[i - 1][sc])
                CHECK(std::stod(csv.rows[i][wc]) >= std::stod(csv.rows[i - 1][wc]));
    }
    SECTION("two-bath mode has none") {
        const auto path = temp_file("dist_two_bath.csv");
        REQUIRE(run_cli({"work-dist", "--coupling-J", "1", "--gamma", "1", "--mode", "two_bath",
                         "--temp-hot", "10", "--tau", "0.001", "--out", path.string()})
                    .code == 0);
        const ParsedCsv csv = parse_csv(slurp(path));
        const std::size_t pc = column_index(csv, "p");
        for (const auto& row : csv.rows) CHECK(std::stod(row[pc]) >= -1e-12);
    }
}

TEST_CASE("identical configurations produce identical bytes modulo timestamp") {
    const auto path_a = temp_file("det_a.csv");
    const auto path_b = temp_file("det_b.csv");
    const std::vector<std::string> args{"work-dist", "--coupling-J", "1",     "--gamma", "0.7",
                                        "--tau",     "0.3",          "--tol", "1e-9"};
    auto with_out = [&](const std::filesystem::path& p) {
        std::vector<std::string> a = args;
        a.push_back("--out");
        a.push_back(p.string());
        return a;
    };
    REQUIRE(run_cli(with_out(path_a)).code == 0);
    REQUIRE(run_cli(with_out(path_b)).code == 0);
    CHECK(strip_timestamp(slurp(path_a)) == strip_timestamp(slurp(path_b)));
}

TEST_CASE("json output round-trips every float exactly") {
    const auto path = temp_file("dist.json");
    REQUIRE(run_cli({"work-dist", "--coupling-J", "1", "--gamma", "1", "--tau", "0.8", "--format",
                     "json", "--out", path.string()})
                .code == 0);
    const nlohmann::json j = nlohmann::json::parse(slurp(path));
    // Serialization round-trip is lossless.
    const nlohmann::json j2 = nlohmann::json::parse(j.dump());
    CHECK(j == j2);

    // Values equal the in-process computation bit for bit.
    EngineParams p;
    p.coupling_j = 1.0;
    p.gamma = 1.0;
    p.tau = 0.8;
    const FcsBundle bundle = fcs_bundle(run_cycle_context(p, 1e-10));
    std::vector<const WorkDistribution*> stages{&bundle.ab, &bundle.cd, &bundle.full};
    std::size_t row = 0;
    for (const WorkDistribution* d : stages) {
        for (const WorkPoint& q : d->points) {
            REQUIRE(row < j["rows"].size());
            CHECK(j["rows"][row][0].get<double>() == q.w);
            CHECK(j["rows"][row][1].get<double>() == q.p);
            CHECK(j["rows"][row][3].get<std::string>() == to_string(d->stage));
            ++row;
        }
    }
    CHECK(row == j["rows"].size());
}

TEST_CASE("tau sweep emits one ordered row per grid point") {
    const auto path = temp_file("sweep.csv");
    REQUIRE(run_cli({"sweep-tau", "--coupling-J", "1", "--gamma", "1", "--tau-grid",
                     "0.001:3:12:log", "--tol", "1e-8", "--out", path.string()})
                .code == 0);
    const ParsedCsv csv = parse_csv(slurp(path));
    REQUIRE(csv.rows.size() == 12);
    const std::size_t tc = column_index(csv, "tau");
    for (std::size_t i = 1; i < csv.rows.size(); ++i)
        CHECK(std::stod(csv.rows[i][tc]) > std::stod(csv.rows[i - 1][tc]));
    for (const auto& row : csv.rows) CHECK(row[column_index(csv, "status")] == "ok");

    // Interference work changes sign across the sweep.
    const std::size_t oc = column_index(csv, "mean_w_off_diagonal");
    bool neg = false;
    bool pos = false;
    for (const auto& row : csv.rows) {
        const double v = std::stod(row[oc]);
        neg = neg || v < -1e-9;
        pos = pos || v > 1e-9;
    }
    CHECK((neg && pos));

    SECTION("isotropic sweep is constant in the mean work") {
        const auto iso_path = temp_file("sweep_iso.csv");
        REQUIRE(run_cli({"sweep-tau", "--coupling-J", "1", "--gamma", "0", "--tau-grid",
                         "0.001:3:6:log", "--tol", "1e-8", "--out", iso_path.string()})
                    .code == 0);
        const ParsedCsv iso = parse_csv(slurp(iso_path));
        const std::size_t mc = column_index(iso, "mean_w");
        const double first = std::stod(iso.rows[0][mc]);
        for (const auto& row : iso.rows)
            CHECK_THAT(std::stod(row[mc]), WithinAbs(first, 1e-8));
    }
    SECTION("grid flag is mandatory") {
        CHECK(run_cli({"sweep-tau", "--coupling-J", "1"}).code == 2);
    }
}

TEST_CASE("single-point sweep equals the cycle command values") {
    const auto sweep_path = temp_file("sweep_one.csv");
    const auto cycle_path = temp_file("cycle_one.csv");
    REQUIRE(run_cli({"sweep-tau", "--coupling-J", "1", "--gamma", "1", "--tau-grid", "0.7:0.7:1",
                     "--out", sweep_path.string()})
                .code == 0);
    REQUIRE(run_cli({"cycle", "--coupling-J", "1", "--gamma", "1", "--tau", "0.7", "--out",
                     cycle_path.string()})
                .code == 0);
    const ParsedCsv sweep = parse_csv(slurp(sweep_path));
    const ParsedCsv cycle = parse_csv(slurp(cycle_path));
    for (const std::string name : {"w1", "w2", "q_in", "q_out", "w_engine"})
        CHECK(sweep.rows[0][column_index(sweep, name)] ==
              cycle.rows[0][column_index(cycle, name)]);
}

TEST_CASE("coherence command tracks the anisotropy") {
    const auto path = temp_file("coh.csv");
    REQUIRE(run_cli({"coherence", "--coupling-J", "1", "--gamma", "1", "--tau-grid", "0.01:2:5",
                     "--out", path.string()})
                .code == 0);
    const ParsedCsv csv = parse_csv(slurp(path));
    REQUIRE(csv.rows.size() == 5);
    const std::size_t cc = column_index(csv, "coherence_c");
    bool any_positive = false;
    for (const auto& row : csv.rows) any_positive = any_positive || std::stod(row[cc]) > 1e-6;
    CHECK(any_positive);

    const auto iso_path = temp_file("coh_iso.csv");
    REQUIRE(run_cli({"coherence", "--coupling-J", "1", "--gamma", "0", "--tau-grid", "0.01:2:4",
                     "--out", iso_path.string()})
                .code == 0);
    const ParsedCsv iso = parse_csv(slurp(iso_path));
    for (const auto& row : iso.rows)
        CHECK(std::stod(row[column_index(iso, "coherence_c")]) <= 1e-12);
}

TEST_CASE("expansion report lists the eight terms and reassembles cleanly") {
    const auto path = temp_file("expansion.csv");
    REQUIRE(run_cli({"expansion-report", "--coupling-J", "1", "--gamma", "1", "--tau", "0.6",
                     "--out", path.string()})
                .code == 0);
    const ParsedCsv csv = parse_csv(slurp(path));
    REQUIRE(csv.rows.size() == 8);
    CHECK(std::stod(csv.meta.at("reassembly_residual")) <= 1e-12);
    int interference = 0;
    for (const auto& row : csv.rows)
        if (row[column_index(csv, "term")].rfind("interference_final", 0) == 0) ++interference;
    CHECK(interference == 2);

    CHECK(run_cli({"expansion-report", "--coupling-J", "1", "--mode", "two_bath", "--temp-hot",
                   "10"})
              .code == 2);
}
