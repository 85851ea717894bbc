#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "cdfi/io.hpp"
#include "cdfi/params.hpp"

using namespace cdfi;

TEST_CASE("format_real round trips") {
    std::mt19937_64 rng(51);
    std::uniform_real_distribution<double> u(-300, 300);
    for (int i = 0; i < 2000; ++i) {
        const double x = std::pow(10.0, u(rng)) * (i % 2 ? -1 : 1);
        CHECK(std::stod(format_real(x)) == x);
    }
    CHECK(format_real(0.1) == "0.1");
    CHECK(format_real(2) == "2");
    CHECK(format_real(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(format_real(-std::numeric_limits<double>::infinity()) == "-inf");
    CHECK(format_real(std::nan("")) == "nan");
}

TEST_CASE("grids and level ranges") {
    const auto g = parse_grid("0:1:5");
    REQUIRE(g.size() == 5);
    CHECK(g.front() == 0);
    CHECK(g[2] == doctest::Approx(0.5));
    CHECK(g.back() == 1);
    const auto l = parse_grid("1e-3:10:5:log");
    REQUIRE(l.size() == 5);
    CHECK(l[1] == doctest::Approx(1e-2));
    CHECK(l.back() == doctest::Approx(10));
    CHECK_THROWS_AS(parse_grid("0:1"), std::invalid_argument);
    CHECK_THROWS_AS(parse_grid("0:1:2.5"), std::invalid_argument);
    CHECK_THROWS_AS(parse_grid("0:1:5:lin"), std::invalid_argument);
    CHECK_THROWS_AS(parse_grid("a:1:5"), std::invalid_argument);

    CHECK(parse_level_range("1..300") == std::pair<std::int64_t, std::int64_t>{1, 300});
    CHECK(parse_level_range("7..7") == std::pair<std::int64_t, std::int64_t>{7, 7});
    CHECK_THROWS_AS(parse_level_range("5..2"), std::invalid_argument);
    CHECK_THROWS_AS(parse_level_range("1-3"), std::invalid_argument);
    CHECK_THROWS_AS(parse_level_range("1..x"), std::invalid_argument);
}

TEST_CASE("digests and CSV writer") {
    CHECK(hex64(fnv1a("")) == "cbf29ce484222325");
    CHECK(hex64(fnv1a("a")) == "af63dc4c8601ec8c");
    CHECK(hex64(fnv1a("foobar")) == "85944171f73967e8");

    std::ostringstream os;
    CsvWriter w(os);
    w.header({"n", "x", "name", "ok"});
    w.field(std::int64_t(3)).field(0.25).field("kingman").field(true);
    w.end_row();
    CHECK(os.str() == "n,x,name,ok\n3,0.25,kingman,true\n");
}

TEST_CASE("parameter assignments") {
    CHECK(parse_param_assignment("rho=2.5") == std::pair<std::string, double>{"rho", 2.5});
    CHECK(parse_param_assignment(" c = 1e-3 ").second == 1e-3);
    CHECK_THROWS_AS(parse_param_assignment("rho"), std::invalid_argument);
    CHECK_THROWS_AS(parse_param_assignment("rho=abc"), std::invalid_argument);
    ParamList p;
    set_param(p, "b", 1);
    set_param(p, "a", 2);
    set_param(p, "b", 3);
    REQUIRE(p.size() == 2);
    CHECK(p[0].first == "b");
    CHECK(get_param(p, "b", 0) == 3);
    CHECK(get_param(p, "z", 9) == 9);
    CHECK_FALSE(find_param(p, "z"));
}
