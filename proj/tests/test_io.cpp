#include "doctest.h"
#include "hopfcole/io.hpp"

#include <sstream>

using namespace hopfcole;
using namespace hopfcole::io;

TEST_CASE("number formatting round-trips")
{
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(-2.0) == "-2");
    CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(format_double(std::nan("")) == "nan");
    CounterRng rng(51);
    for (int i = 0; i < 2000; ++i) {
        const double v = rng.normal() * std::pow(10.0, rng.uniform(-300, 300));
        CHECK(parse_double(format_double(v)) == v);
    }
    CHECK(parse_double(" 1e-3\r") == 1e-3);
    CHECK(parse_double("+2.5") == 2.5);
    CHECK_THROWS_AS(parse_double("1.0x"), Error);
    CHECK_THROWS_AS(parse_double(""), Error);
    CHECK_THROWS_AS(parse_double("1,5"), Error);
}

TEST_CASE("support csv")
{
    CounterRng rng(52);
    const core::SupportSet s(normal_matrix(rng, 7, 3), normal_vector(rng, 7));
    std::stringstream buf;
    write_support_csv(buf, s);
    CHECK(buf.str().substr(0, 14) == "y_0,y_1,y_2,g\n");
    const core::SupportSet back = read_support_csv(buf);
    CHECK(back.atoms() == s.atoms());
    CHECK(back.values() == s.values());

    std::stringstream crlf("y_0,g\r\n1,2\r\n3,4\r\n");
    CHECK(read_support_csv(crlf).size() == 2);

    std::stringstream bad_header("x,g\n1,2\n");
    CHECK_THROWS_AS(read_support_csv(bad_header), Error);
    std::stringstream ragged("y_0,g\n1,2,3\n");
    CHECK_THROWS_WITH_AS(read_support_csv(ragged), "support csv: line 2 has 3 fields", Error);
    std::stringstream dup("y_0,g\n1,2\n1,3\n");
    CHECK_THROWS_AS(read_support_csv(dup), Error);
    std::stringstream empty("y_0,g\n");
    CHECK_THROWS_AS(read_support_csv(empty), Error);
}

TEST_CASE("network json")
{
    CounterRng rng(53);
    const core::SupportSet s(normal_matrix(rng, 5, 2), normal_vector(rng, 5));
    Matrix b = normal_matrix(rng, 2, 2);
    const core::HJNetwork net = core::build_network(s, 0.7, 0.3, core::Metric(b * b.transpose() + Matrix::Identity(2, 2)));
    const nlohmann::json j = network_to_json(net);
    CHECK(j["N"] == 5);
    CHECK(j["W"].size() == 10);
    // text round trip
    const core::HJNetwork back = network_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.weights() == net.weights());
    CHECK(back.biases() == net.biases());
    CHECK(back.eps() == net.eps());
    CHECK(back.t() == net.t());
    REQUIRE(back.metric());
    CHECK(back.metric()->matrix() == net.metric()->matrix());
    const Vector x = normal_vector(rng, 2);
    CHECK(core::lse_forward(back, x) == core::lse_forward(net, x));

    nlohmann::json short_w = j;
    short_w["W"] = std::vector<double>{1.0};
    CHECK_THROWS_AS(network_from_json(short_w), Error);
    nlohmann::json missing = j;
    missing.erase("eps");
    CHECK_THROWS_AS(network_from_json(missing), Error);
    nlohmann::json neg = j;
    neg["eps"] = -1.0;
    CHECK_THROWS_AS(network_from_json(neg), Error);
}

TEST_CASE("csv tables")
{
    Table t{"demo", {"N", "error", "note"}, {}};
    t.add_row({10LL, 0.25, std::string("ok")});
    t.add_row({20LL, Cell{}, std::string("")});
    std::stringstream out;
    write_csv(out, t);
    CHECK(out.str() == "N,error,note\n10,0.25,ok\n20,,\n");
    CHECK_THROWS_AS(t.add_row({1LL}), Error);
}
