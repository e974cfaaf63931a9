#include <random>

#include "doctest.h"

#include "exinv/model.hpp"
#include "support.hpp"

using namespace exinv;
using exinv::testing::load;
using exinv::testing::poly;
using exinv::testing::q;

namespace {

const std::vector<std::string> kXY{"x1", "x2"};

bool has_error(const std::vector<Diagnostic>& d) {
    for (const auto& x : d)
        if (x.severity == Diagnostic::Severity::Error) return true;
    return false;
}

std::string parse_error(const std::string& text) {
    try {
        parse_system(text);
    } catch (const ParseError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("example2 model structure") {
    HybridSystem h = load("example2.model");
    CHECK(h.vars == kXY);
    REQUIRE(h.locations.size() == 1);
    CHECK(h.transitions.empty());
    const auto& l = h.locations[0];
    CHECK(l.flow[0] == poly("x2", kXY));
    CHECK(l.flow[1] == poly("-x1 + 1/3*x1^3 - x2", kXY));
    CHECK(l.inv.is_universe());
    REQUIRE(h.init.ge.size() == 1);
    CHECK(h.init.ge[0] == poly("1/4 - (x1 - 3/2)^2 - x2^2", kXY));
    REQUIRE(l.unsafe.size() == 1);
    REQUIRE(l.unsafe[0].ge.size() == 1);
    CHECK(l.unsafe[0].ge[0] == poly("4/25 - (x1 + 1)^2 - (x2 + 1)^2", kXY));
}

TEST_CASE("example3 model structure") {
    HybridSystem h = load("example3.model");
    REQUIRE(h.locations.size() == 1);
    CHECK(h.locations[0].inv.ge.size() == 4);
    CHECK(h.init.ge.size() == 2);
    REQUIRE(h.init.eq.size() == 1);
    CHECK(h.init.eq[0] == poly("x2", kXY));
    REQUIRE(h.locations[0].unsafe.size() == 1);
    CHECK(h.locations[0].unsafe[0].ge[0] == poly("2 - x1", kXY));
    auto box = box_bounds(h.locations[0].inv, 2);
    CHECK(*box[0].lo == 0);
    CHECK(*box[0].hi == 4);
    CHECK(*box[1].lo == 0);
    CHECK(*box[1].hi == 4);
}

TEST_CASE("every shipped model parses, validates and round-trips") {
    for (const char* name : {"example1.model", "example2.model", "example2_large.model", "example3.model",
                             "example5.model"}) {
        CAPTURE(name);
        HybridSystem h = load(name);
        CHECK(validate_system(h).empty());
        CHECK(parse_system(render_system(h)) == h);
    }
}

TEST_CASE("parse errors") {
    const std::string head = "system s; vars x1; init x1 >= 0;\n";
    std::string e = parse_error(head + "location l { flow x1' = sin(x1); }");
    CHECK(e.find("non-polynomial") != std::string::npos);
    CHECK(e.find("line 2") != std::string::npos);
    CHECK(parse_error(head + "location l { flow x1' = y; }").find("unknown variable 'y'") != std::string::npos);
    CHECK(parse_error(head + "location l { flow x1' = x1; }\ntransition l -> m { guard true; }")
              .find("unknown location 'm'") != std::string::npos);
    CHECK(parse_error(head + "location l { flow x1' = x1 / x1; }").find("non-polynomial") != std::string::npos);
    CHECK(parse_error("system s; vars x1; init x1 > 0; location l { flow x1' = x1; }").find("strict") !=
          std::string::npos);
}

TEST_CASE("decimal literals are exact") {
    HybridSystem h = parse_system("system s; vars x; init x >= 0.1; location l { flow x' = 1.25*x; }");
    CHECK(h.init.ge[0] == poly("x - 1/10", {"x"}));
    CHECK(h.locations[0].flow[0] == poly("5/4*x", {"x"}));
}

TEST_CASE("structural diagnostics") {
    HybridSystem h = load("example2.model");
    h.vars = {"x1", "x1"};
    CHECK(has_error(validate_system(h)));
}

TEST_CASE("initial set outside the invariant is reported by sampling") {
    HybridSystem h = parse_system("system s; vars x; init x >= 1; location l { flow x' = -x; inv x <= 0; }");
    auto d = validate_system(h);
    REQUIRE(d.size() == 1);
    CHECK(d[0].severity == Diagnostic::Severity::Warning);
    // Oracle: rejection sampling of init points, none of which lies in inv.
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> num(-400, 400);
    int in_init = 0, in_both = 0;
    for (int k = 0; k < 2000; ++k) {
        std::vector<Rational> x{Rational(num(rng), 16)};
        x[0].canonicalize();
        if (!h.init.contains(x)) continue;
        ++in_init;
        if (h.locations[0].inv.contains(x)) ++in_both;
    }
    CHECK(in_init > 0);
    CHECK(in_both == 0);
}

TEST_CASE("functional resets") {
    HybridSystem h = parse_system(
        "system s; vars x y; init x >= 0; location a { flow x' = 1, y' = 0; } location b { flow x' = 0, y' = 1; }\n"
        "transition a -> b { guard x >= 1; reset x' = 0 && y' = y + x^2; }\n"
        "transition b -> a { guard y >= 2; }");
    REQUIRE(h.transitions.size() == 2);
    auto fr = functional_reset(h.transitions[0], 2);
    REQUIRE(fr);
    CHECK(fr->images[0].is_zero());
    CHECK(fr->images[1] == poly("y + x^2", {"x", "y"}));
    auto id = functional_reset(h.transitions[1], 2);
    REQUIRE(id);
    CHECK(id->images[0] == poly("x", {"x", "y"}));
    CHECK(h.transitions[1].reset == identity_reset(2));
}

TEST_CASE("box bounds from one-variable linear conjuncts") {
    SemialgebraicSet s{{poly("2 - x1", kXY), poly("x1 + 1", kXY), poly("x2^2 - 1", kXY)}, {}};
    auto b = box_bounds(s, 2);
    CHECK(*b[0].lo == -1);
    CHECK(*b[0].hi == 2);
    CHECK(!b[1].lo);
    CHECK(!b[1].hi);
    SemialgebraicSet e{{}, {poly("2*x2 - 1", kXY)}};
    auto be = box_bounds(e, 2);
    CHECK(*be[1].lo == q("1/2"));
    CHECK(*be[1].hi == q("1/2"));
}

TEST_CASE("sampled points lie in the set exactly") {
    HybridSystem h = load("example3.model");
    std::mt19937_64 rng(1);
    auto pts = sample_set(h.init, 2, rng, 500, Rational(10));
    CHECK(!pts.empty());
    for (const auto& p : pts) CHECK(h.init.contains(p));
}

TEST_CASE("leading zeros are decimal") {
    CHECK(parse_rational("0.25") == q("1/4"));
    CHECK(parse_rational("010") == 10);
    CHECK(parse_rational("08/09") == q("8/9"));
    CHECK(parse_rational("0.016e2") == q("8/5"));
}
