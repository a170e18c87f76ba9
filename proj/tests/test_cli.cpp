#include "doctest.h"
#include "cli.hpp"

#include "hopfcole/core.hpp"

#include <fstream>
#include <set>
#include <sstream>

using namespace hopfcole;
using namespace hopfcole::cli;

namespace {

std::filesystem::path scratch(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("hopfcole_test_cli_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

nlohmann::json summary(const std::filesystem::path& dir, const std::string& command)
{
    return nlohmann::json::parse(slurp(dir / (command + "_summary.json")));
}

Config small_integrable()
{
    Config c("integrable");
    c.set("instances", "24");
    c.set("identity_trials", "10");
    return c;
}

} // namespace

TEST_CASE("every command has a seed and unique keys")
{
    for (const auto& spec : command_specs()) {
        std::set<std::string> keys;
        for (const auto& p : spec.params) CHECK(keys.insert(p.key).second);
        CHECK(keys.count("seed") == 1);
        CHECK_NOTHROW(Config(spec.name).seed());
    }
    CHECK_THROWS_AS(Config("train"), Error);
}

TEST_CASE("config accessors and validation")
{
    Config c("robustness");
    CHECK(c.integer("trials") == 10000);
    CHECK(c.number("eps_min") == 0.01);
    CHECK(c.integers("shock_ks") == std::vector<long long>{1, 2, 4, 8});
    CHECK_THROWS_AS(c.set("no_such_key", "1"), Error);
    c.set("trials", "1.5");
    CHECK_THROWS_AS(c.integer("trials"), Error);
    c.set("eps_min", "abc");
    CHECK_THROWS_AS(c.number("eps_min"), Error);
    c.set("seed", "-3");
    CHECK_THROWS_AS(c.seed(), Error);
    c.set("shock_ks", "1, 2,x");
    CHECK_THROWS_AS(c.integers("shock_ks"), Error);
}

TEST_CASE("config file, then flags")
{
    const auto dir = scratch("file");
    {
        std::ofstream f(dir / "cfg.txt");
        f << "# comment\n\ninstances = 7   # trailing\n  tol=1e-9\n";
    }
    Config c("integrable");
    c.load_file(dir / "cfg.txt");
    CHECK(c.integer("instances") == 7);
    CHECK(c.number("tol") == 1e-9);
    c.set("instances", "9");
    CHECK(c.integer("instances") == 9);

    {
        std::ofstream f(dir / "bad.txt");
        f << "instances 7\n";
    }
    CHECK_THROWS_AS(c.load_file(dir / "bad.txt"), Error);
    {
        std::ofstream f(dir / "unknown.txt");
        f << "atoms = 3\n";
    }
    CHECK_THROWS_AS(c.load_file(dir / "unknown.txt"), Error);
    CHECK_THROWS_AS(c.load_file(dir / "missing.txt"), Error);
}

TEST_CASE("summary embeds the full effective config")
{
    const auto dir = scratch("summary");
    std::ostringstream log;
    CHECK(run_command(small_integrable(), dir, log) == 0);
    const auto s = summary(dir, "integrable");
    CHECK(s["schema_version"] == kSchemaVersion);
    CHECK(s["passed"] == true);
    for (const auto& p : command_spec("integrable").params) CHECK(s["config"].contains(p.key));
    CHECK(s["config"]["instances"] == "24");
    CHECK(s["config"]["kmax"] == "3.0");
    for (const auto& name : s["tables"]) CHECK(std::filesystem::exists(dir / name.get<std::string>()));
    CHECK(log.str().find("PASS") != std::string::npos);
}

TEST_CASE("identical config gives byte-identical tables")
{
    for (const std::string cmd : {"integrable", "characteristics", "robustness"}) {
        Config c(cmd);
        if (cmd == "integrable") c = small_integrable();
        if (cmd == "characteristics") c.set("instances", "10");
        if (cmd == "robustness") {
            c.set("trials", "200");
            c.set("perturb_trials", "20");
        }
        const auto a = scratch(cmd + "_a"), b = scratch(cmd + "_b");
        std::ostringstream log;
        run_command(c, a, log);
        run_command(c, b, log);
        auto sa = summary(a, cmd), sb = summary(b, cmd);
        for (const auto& name : sa["tables"]) CHECK(slurp(a / name.get<std::string>()) == slurp(b / name.get<std::string>()));
        sa.erase("duration_seconds");
        sb.erase("duration_seconds");
        CHECK(sa == sb);
    }
}

TEST_CASE("a different seed changes the tables")
{
    auto c = small_integrable();
    const auto a = scratch("seed_a"), b = scratch("seed_b");
    std::ostringstream log;
    run_command(c, a, log);
    c.set("seed", "2");
    run_command(c, b, log);
    CHECK(slurp(a / "integrable.csv") != slurp(b / "integrable.csv"));
}

TEST_CASE("exit status follows the assertions")
{
    std::ostringstream log;
    auto c = small_integrable();
    c.set("tol", "-1");
    const auto dir = scratch("fail");
    CHECK(run_command(c, dir, log) == 1);
    CHECK(summary(dir, "integrable")["passed"] == false);

    Config b("build");
    b.set("support", (dir / "missing.csv").string());
    CHECK(run_command(b, dir, log) == 1);
    const auto s = summary(dir, "build");
    CHECK(s["assertions"][0]["name"] == "completed");
}

TEST_CASE("a single-point quadrature curve leaves the slope empty")
{
    Config c("quadrature");
    c.set("d", "1");
    c.set("Ns", "10");
    c.set("bias_supports", "0");
    const auto dir = scratch("quad");
    std::ostringstream log;
    CHECK(run_command(c, dir, log) == 0);
    CHECK(slurp(dir / "quadrature_curve_d1.csv").rfind("N,eps,error,rms_error,oracle_resolution\n10,", 0) == 0);
    CHECK(slurp(dir / "quadrature_fit_d1.csv") == "d,points,slope,r_squared,target\n1,1,,,-1\n");
    CHECK(summary(dir, "quadrature")["results"]["quadrature_d1"].is_null());
}

TEST_CASE("build writes a loadable network")
{
    const auto dir = scratch("build");
    CounterRng rng(3);
    const core::SupportSet s(normal_matrix(rng, 6, 2), normal_vector(rng, 6));
    io::save_support_csv(dir / "support.csv", s);
    Config c("build");
    c.set("support", (dir / "support.csv").string());
    c.set("eps", "0.25");
    c.set("t", "0.5");
    std::ostringstream log;
    CHECK(run_command(c, dir, log) == 0);
    const auto net = io::network_from_json(nlohmann::json::parse(slurp(dir / "network.json")));
    const auto ref = core::build_network(s, 0.5, 0.25);
    CHECK(net.weights() == ref.weights());
    CHECK(net.biases() == ref.biases());
    CHECK(net.eps() == 0.25);
}
