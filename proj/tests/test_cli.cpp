#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "resint/cli.hpp"

using namespace resint;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

CliResult run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    CliResult r;
    r.code = run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

const fs::path& work_dir() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / "resint-cli-tests";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

CsvTable parse_file(const fs::path& p) { return parse_csv(slurp(p)); }

std::size_t column(const CsvTable& t, const std::string& name) {
    for (std::size_t i = 0; i < t.header.size(); ++i)
        if (t.header[i] == name) return i;
    FAIL("missing column " << name);
    return 0;
}

double column_max(const CsvTable& t, const std::string& name) {
    const auto c = column(t, name);
    double m = 0.0;
    for (const auto& row : t.rows)
        if (std::isfinite(row[c])) m = std::max(m, std::abs(row[c]));
    return m;
}

bool has_comment(const CsvTable& t, const std::string& text) {
    for (const auto& c : t.comments)
        if (c == text) return true;
    return false;
}

double summary_value(const std::string& out, const std::string& key) {
    const auto pos = out.find(key + "=");
    REQUIRE(pos != std::string::npos);
    return std::strtod(out.c_str() + pos + key.size() + 1, nullptr);
}

}  // namespace

TEST_CASE("run with no overrides follows the standard protocol", "[cli]") {
    const auto out_path = work_dir() / "defaults.csv";
    const auto r = run({"run", "--out", out_path.string()});
    REQUIRE(r.code == 0);
    const auto table = parse_file(out_path);
    CHECK(has_comment(table, "system=damped-ho"));
    CHECK(has_comment(table, "integrator=en-gr"));
    CHECK(has_comment(table, "h=0.001"));
    CHECK(has_comment(table, "T=100"));
    CHECK(has_comment(table, "starred=midpoint"));
    CHECK(has_comment(table, "predictor=explicit-euler"));
    CHECK(has_comment(table, "reservoir=on"));
    CHECK(has_comment(table, "x0=1.3"));
    CHECK(has_comment(table, "y0=-2.2000000000000002"));  // exact 17-digit echo of -2.2
    CHECK(table.header == std::vector<std::string>{"t", "x", "y", "z", "H", "K"});
    CHECK(table.rows.size() == 100001);
    CHECK(summary_value(r.out, "max_k_drift") <= 1e-10);
    CHECK(summary_value(r.out, "iter_max") <= 25.0);
}

TEST_CASE("identical command lines give byte-identical output", "[cli]") {
    const auto a = work_dir() / "det-a.csv";
    const auto b = work_dir() / "det-b.csv";
    const std::vector<std::string> base = {"run",  "--system", "duffing", "--integrator",
                                           "en-gr", "--T",      "1"};
    auto args_a = base;
    args_a.insert(args_a.end(), {"--out", a.string()});
    auto args_b = base;
    args_b.insert(args_b.end(), {"--out", b.string()});
    REQUIRE(run(args_a).code == 0);
    REQUIRE(run(args_b).code == 0);
    CHECK(slurp(a) == slurp(b));
}

TEST_CASE("emitted csv re-parses and re-serialises to the same bytes", "[cli]") {
    const auto path = work_dir() / "roundtrip.csv";
    REQUIRE(run({"run", "--T", "1", "--out", path.string()}).code == 0);
    const auto original = slurp(path);
    const auto table = parse_csv(original);
    std::ostringstream rewritten;
    write_csv(rewritten, table);
    CHECK(rewritten.str() == original);
}

TEST_CASE("run with the exact reference reports error columns", "[cli]") {
    const auto path = work_dir() / "exact-ref.csv";
    const auto r = run({"run", "--T", "1", "--reference", "exact", "--out", path.string()});
    REQUIRE(r.code == 0);
    const auto table = parse_file(path);
    CHECK(table.header == std::vector<std::string>{"t", "x", "y", "z", "H", "K", "err_x",
                                                   "err_y", "R_dev", "K_dev"});
    CHECK(column_max(table, "err_x") <= 1e-4);
    CHECK(summary_value(r.out, "max_err_x") <= 1e-4);
    CHECK(summary_value(r.out, "max_decrement_dev") <= 1e-6);
}

TEST_CASE("run with an rk4 reference at the coarse step", "[cli]") {
    const auto path = work_dir() / "rk4-ref.csv";
    const auto cache = work_dir() / "cache-run";
    const auto r = run({"run", "--T", "1", "--reference", "rk4:1e-3:1", "--cache-dir",
                        cache.string(), "--out", path.string()});
    REQUIRE(r.code == 0);
    CHECK(column_max(parse_file(path), "err_x") <= 1e-4);
    CHECK(fs::exists(cache));
}

TEST_CASE("duffing run reports its basin", "[cli]") {
    const auto path = work_dir() / "duffing-imr.csv";
    const auto r = run({"run", "--system", "duffing", "--integrator", "imr", "--out",
                        path.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("basin=left") != std::string::npos);
}

TEST_CASE("strict mode refuses st-gr on van der pol", "[cli]") {
    const auto path = work_dir() / "strict.csv";
    const auto r = run({"run", "--system", "vdp", "--integrator", "st-gr", "--strict", "--T",
                        "1", "--out", path.string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("van der pol") != std::string::npos);

    const auto ok = run({"run", "--system", "vdp", "--integrator", "st-gr", "--T", "1",
                         "--out", path.string()});
    CHECK(ok.code == 0);
}

TEST_CASE("numerical failures exit with code two", "[cli]") {
    const auto r = run({"run", "--system", "duffing", "--h", "10", "--T", "100", "--out",
                        (work_dir() / "boom.csv").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("numerical failure") != std::string::npos);
}

TEST_CASE("usage errors exit with code one", "[cli]") {
    CHECK(run({"figure", "9.9"}).code == 1);
    CHECK(run({"run", "--system", "pendulum"}).code == 1);
    CHECK(run({"run", "--param", "q=1"}).code == 1);
    CHECK(run({"run", "--param", "b=abc"}).code == 1);
    CHECK(run({"compare", "--integrators", "en-gr"}).code == 1);  // no reference
}

TEST_CASE("convergence subcommand fits the observed order", "[cli]") {
    const auto en = run({"convergence", "--integrator", "en-gr", "--h-list", "0.01,0.005,0.0025",
                         "--T", "10"});
    REQUIRE(en.code == 0);
    const double en_order = summary_value(en.out, "order");
    CHECK(en_order >= 1.9);
    CHECK(en_order <= 2.1);

    const auto euler = run({"convergence", "--integrator", "euler", "--h-list",
                            "0.01,0.005,0.0025", "--T", "10"});
    REQUIRE(euler.code == 0);
    const double euler_order = summary_value(euler.out, "order");
    CHECK(euler_order >= 0.9);
    CHECK(euler_order <= 1.1);

    const auto rk4 = run({"convergence", "--integrator", "rk4-38", "--h-list",
                          "0.01,0.005,0.0025", "--T", "1"});
    REQUIRE(rk4.code == 0);
    const double rk4_order = summary_value(rk4.out, "order");
    CHECK(rk4_order >= 3.8);
    CHECK(rk4_order <= 4.2);
}

TEST_CASE("compare emits one column group per integrator", "[cli]") {
    const auto path = work_dir() / "compare.csv";
    const auto r = run({"compare", "--integrators", "en-gr,imr,sv", "--T", "1", "--reference",
                        "exact", "--out", path.string()});
    REQUIRE(r.code == 0);
    const auto table = parse_file(path);
    for (const auto& name : {"en_gr", "imr", "sv"}) {
        column(table, std::string(name) + "_x");
        column(table, std::string(name) + "_H");
        column(table, std::string(name) + "_err_x");
        column(table, std::string(name) + "_K_dev");
        column(table, std::string(name) + "_R_dev");
    }
    CHECK(table.rows.size() == 1001);
    CHECK(column_max(table, "en_gr_err_x") <= 1e-4);
    // One summary line per integrator.
    CHECK(r.out.find("summary integrator=en-gr") != std::string::npos);
    CHECK(r.out.find("summary integrator=imr") != std::string::npos);
    CHECK(r.out.find("summary integrator=sv") != std::string::npos);

    // Concurrent execution does not disturb the output.
    const auto again = work_dir() / "compare-again.csv";
    REQUIRE(run({"compare", "--integrators", "en-gr,imr,sv", "--T", "1", "--reference", "exact",
                 "--out", again.string()}).code == 0);
    CHECK(slurp(again) == slurp(path));
}

TEST_CASE("compare can share an rk4 reference through the cache", "[cli]") {
    const auto path = work_dir() / "compare-rk4.csv";
    const auto cache = work_dir() / "cache-compare";
    const auto r = run({"compare", "--system", "duffing", "--integrators", "en-gr,imr", "--T",
                        "1", "--reference", "rk4:1e-3:1", "--cache-dir", cache.string(),
                        "--out", path.string()});
    REQUIRE(r.code == 0);
    const auto table = parse_file(path);
    CHECK(column_max(table, "en_gr_err_x") <= 5e-4);
    CHECK(column_max(table, "imr_err_x") <= 5e-4);
    CHECK(fs::exists(cache));
}

TEST_CASE("mismatched reference grids are a usage error", "[cli]") {
    const auto r = run({"run", "--T", "1", "--reference", "rk4:1e-3:7",
                        "--out", (work_dir() / "mismatch.csv").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("grid") != std::string::npos);
}

TEST_CASE("figure 3.1 bounds the reservoir scheme drift", "[cli]") {
    const auto path = work_dir() / "fig31.csv";
    REQUIRE(run({"figure", "3.1", "--out", path.string()}).code == 0);
    const auto table = parse_file(path);
    const double en = column_max(table, "k_dev_en_gr");
    const double sv = column_max(table, "k_dev_sv_reservoir");
    CHECK(en <= 1e-10);
    CHECK(sv > en);
}

TEST_CASE("figure 3.2 emits both deviation series", "[cli]") {
    const auto path = work_dir() / "fig32.csv";
    REQUIRE(run({"figure", "3.2", "--out", path.string()}).code == 0);
    const auto table = parse_file(path);
    const double imr = column_max(table, "r_dev_imr");
    CHECK(imr > 1e-11);
    CHECK(imr < 1e-7);
    CHECK(column_max(table, "r_dev_en_gr") < 1e-5);
    CHECK(table.rows.size() == 100000);
}

TEST_CASE("figure 4.2 keeps K flat on the limit cycle", "[cli]") {
    const auto path = work_dir() / "fig42.csv";
    REQUIRE(run({"figure", "4.2", "--out", path.string()}).code == 0);
    CHECK(column_max(parse_file(path), "k_dev_en_gr") <= 1e-10);
}

TEST_CASE("figures with a reference reuse the cache", "[cli]") {
    const auto cache = work_dir() / "cache-figures";
    const auto path = work_dir() / "fig44.csv";

    REQUIRE(run({"figure", "4.4", "--cache-dir", cache.string(), "--out", path.string()}).code ==
            0);
    const auto first = slurp(path);
    const auto table = parse_csv(first);
    column(table, "err_x_en_gr");
    column(table, "err_x_st_gr_left");
    column(table, "err_x_st_gr_midpoint");
    bool engr_basin = false;
    bool left_basin = false;
    for (const auto& c : table.comments) {
        if (c == "basin en-gr=left") engr_basin = true;
        if (c.rfind("basin st-gr-left=", 0) == 0) left_basin = true;
    }
    CHECK(engr_basin);
    CHECK(left_basin);

    // Second run hits the cache and reproduces the same bytes.
    const auto again = work_dir() / "fig44-again.csv";
    REQUIRE(run({"figure", "4.4", "--cache-dir", cache.string(), "--out", again.string()}).code ==
            0);
    CHECK(slurp(again) == first);

    // 4.3 shares the cached duffing reference.  The ratio series legitimately
    // spikes where H crosses zero on the way into the well, so only the
    // structure is asserted here.
    const auto path43 = work_dir() / "fig43.csv";
    REQUIRE(run({"figure", "4.3", "--cache-dir", cache.string(), "--out", path43.string()}).code ==
            0);
    const auto t43 = parse_file(path43);
    column(t43, "r_dev_en_gr");
    column(t43, "r_dev_imr");
    CHECK(t43.rows.size() == 100000);
}

TEST_CASE("figure 4.1 measures against the rk4 reference", "[cli]") {
    const auto cache = work_dir() / "cache-figures";
    const auto path = work_dir() / "fig41.csv";
    REQUIRE(run({"figure", "4.1", "--cache-dir", cache.string(), "--out", path.string()}).code ==
            0);
    const auto table = parse_file(path);
    const double err = column_max(table, "err_y_en_gr");
    CHECK(err > 1e-8);
    CHECK(err < 1.0);
}

TEST_CASE("help is available", "[cli]") {
    const auto r = run({"--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("run") != std::string::npos);
}
