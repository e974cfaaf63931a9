#include <random>

#include "doctest.h"

#include "exinv/polynomial.hpp"
#include "support.hpp"

using namespace exinv;
using exinv::testing::poly;
using exinv::testing::q;

namespace {

const std::vector<std::string> kXY{"x1", "x2"};

// d/dt p(x + t f(x)) at t = 0, from exact values at t = 0..k and the
// Lagrange derivative formula; no symbolic differentiation involved.
Rational lie_oracle(const QPoly& p, const VectorField<Rational>& f, const std::vector<Rational>& x) {
    const int k = std::max(1, p.degree() * 4);
    std::vector<Rational> ts, vals;
    std::vector<Rational> fx;
    for (const auto& fi : f) fx.push_back(eval_exact(fi, x));
    for (int t = 0; t <= k; ++t) {
        std::vector<Rational> y(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + Rational(t) * fx[i];
        ts.emplace_back(t);
        vals.push_back(eval_exact(p, y));
    }
    // L_j'(0) for the nodes 0..k.
    Rational out = 0;
    for (int j = 0; j <= k; ++j) {
        Rational denom = 1;
        for (int m = 0; m <= k; ++m)
            if (m != j) denom *= ts[j] - ts[m];
        Rational deriv = 0;
        for (int skip = 0; skip <= k; ++skip) {
            if (skip == j) continue;
            Rational prod = 1;
            for (int m = 0; m <= k; ++m)
                if (m != j && m != skip) prod *= -ts[m];
            deriv += prod;
        }
        out += vals[j] * deriv / denom;
    }
    return out;
}

}  // namespace

TEST_CASE("monomial basis sizes and order") {
    auto b = monomial_basis(2, 2);
    REQUIRE(b.size() == 6);
    std::vector<std::string> names;
    for (const auto& m : b) names.push_back(m.to_string(kXY));
    CHECK(names == std::vector<std::string>{"1", "x1", "x2", "x1^2", "x1*x2", "x2^2"});
    auto b1 = monomial_basis(1, 1);
    REQUIRE(b1.size() == 2);
    CHECK(b1[0].degree() == 0);
    CHECK(b1[1].degree() == 1);
    CHECK(monomial_basis(3, 2).size() == 10);
    CHECK(monomial_basis(2, 4).size() == 15);
}

TEST_CASE("lie derivative of a linear template under x' = 2x") {
    // Template coefficients carried as extra variables with zero flow.
    const std::vector<std::string> names{"x", "u0", "u1"};
    QPoly p = poly("u0 + u1*x", names);
    VectorField<Rational> f{poly("2*x", names), QPoly(3), QPoly(3)};
    CHECK(lie_derivative(p, f) == poly("2*u1*x", names));
}

TEST_CASE("lie derivative vanishes under rotation") {
    QPoly p = poly("x1^2 + x2^2", kXY);
    VectorField<Rational> f{poly("x2", kXY), poly("-x1", kXY)};
    CHECK(lie_derivative(p, f).is_zero());
}

TEST_CASE("lie derivative of a quadratic certificate matches the interpolation oracle") {
    QPoly p = poly("-151/99 - 62/33*x2 - 152/99*x1 - 106/99*x1*x2 - 4/9*x1^2", kXY);
    VectorField<Rational> f{poly("x2", kXY), poly("-x1 + 1/3*x1^3 - x2", kXY)};
    QPoly lp = lie_derivative(p, f);
    // Frozen from the oracle below (and an external computer-algebra check).
    QPoly frozen = poly("-106/297*x1^4 - 62/99*x1^3 + 106/99*x1^2 + 2/11*x1*x2 + 62/33*x1 - 106/99*x2^2 + 34/99*x2", kXY);
    CHECK(lp == frozen);
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> num(-40, 40), den(1, 9);
    for (int k = 0; k < 25; ++k) {
        std::vector<Rational> x{Rational(num(rng), den(rng)), Rational(num(rng), den(rng))};
        for (auto& v : x) v.canonicalize();
        CHECK(eval_exact(lp, x) == lie_oracle(p, f, x));
    }
}

TEST_CASE("gram expansion with the continuous-condition block of the one-dimensional model") {
    // Q = [[-u2 - u0 v1, u1 - u1 v1 / 2], [., u2]] over m = [1, x] expands to
    // u2 x^2 + (2 u1 - u1 v1) x - u2 - u0 v1.
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> num(-9, 9), den(1, 5);
    for (int k = 0; k < 20; ++k) {
        Rational u0(num(rng), den(rng)), u1(num(rng), den(rng)), u2(num(rng), den(rng)), v1(num(rng), den(rng));
        for (Rational* r : {&u0, &u1, &u2, &v1}) r->canonicalize();
        GramForm<Rational> g{monomial_basis(1, 1), QMat(2, 2)};
        g.matrix(0, 0) = -u2 - u0 * v1;
        g.matrix(0, 1) = g.matrix(1, 0) = u1 - u1 * v1 / 2;
        g.matrix(1, 1) = u2;
        QPoly want(1);
        want.add_term(Monomial::variable(1, 0, 2), u2);
        want.add_term(Monomial::variable(1, 0, 1), 2 * u1 - u1 * v1);
        want.add_term(Monomial(1), -u2 - u0 * v1);
        CHECK(gram_expand(g) == want);
    }
}

TEST_CASE("gram expansion of the 1x1 identity") {
    GramForm<Rational> g{{Monomial(2)}, QMat::identity(1)};
    CHECK(gram_expand(g) == QPoly::constant(2, Rational(1)));
}

TEST_CASE("gram expansion round trip through coefficient matching") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> num(-6, 6), den(1, 4);
    auto basis = monomial_basis(2, 1);  // 1, x1, x2: all products distinct
    for (int k = 0; k < 50; ++k) {
        QMat w(3, 3);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = i; j < 3; ++j) {
                w(i, j) = Rational(num(rng), den(rng));
                w(i, j).canonicalize();
                w(j, i) = w(i, j);
            }
        QPoly p = gram_expand(GramForm<Rational>{basis, w});
        // Oracle: with distinct products, entry (i, j) is the coefficient of
        // m_i m_j, halved off the diagonal.
        QMat back(3, 3);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) {
                Rational c = p.coefficient(basis[i] * basis[j]);
                back(i, j) = i == j ? c : c / 2;
            }
        CHECK(back == w);
        CHECK(gram_expand(GramForm<Rational>{basis, back}) == p);
    }
}

TEST_CASE("exact evaluation") {
    std::vector<Rational> pt{q("-127/64"), q("-7/8")};
    CHECK(eval_exact(QPoly(2), pt) == 0);
    QPoly p2 = poly("-151/99 - 62/33*x2 - 152/99*x1 - 106/99*x1*x2 - 4/9*x1^2", kXY);
    std::vector<Rational> origin{Rational(0), Rational(0)};
    CHECK(eval_exact(p2, origin) == q("-151/99"));

    QPoly bar = poly("-6843/5000 + 62499/100000*x1^2 + 10669/10000*x1*x2 + 7543/5000*x2^2 - 56749/100000*x1*x2^2"
                     " - 15231/100000*x2^3 - 10417/100000*x1^4 - 8891/25000*x1^3*x2 - 23739/100000*x1^2*x2^2"
                     " - 3019/12500*x1*x2^3",
                     kXY);
    // Integer oracle: scale by 100000 * 64^4 so every term is an integer.
    // Numerators a = -127, b = -7 * 8 = -56 over the common denominator 64.
    const mpz_class a = -127, b = -56, s = 64;
    auto term = [&](long cnum, long cden, int i, int j) -> mpz_class {
        mpz_class ai, bj, rest;
        mpz_pow_ui(ai.get_mpz_t(), a.get_mpz_t(), static_cast<unsigned long>(i));
        mpz_pow_ui(bj.get_mpz_t(), b.get_mpz_t(), static_cast<unsigned long>(j));
        mpz_pow_ui(rest.get_mpz_t(), s.get_mpz_t(), static_cast<unsigned long>(4 - i - j));
        return mpz_class(cnum * (100000 / cden)) * ai * bj * rest;
    };
    mpz_class total = term(-6843, 5000, 0, 0) + term(62499, 100000, 2, 0) + term(10669, 10000, 1, 1) +
                      term(7543, 5000, 0, 2) + term(-56749, 100000, 1, 2) + term(-15231, 100000, 0, 3) +
                      term(-10417, 100000, 4, 0) + term(-8891, 25000, 3, 1) + term(-23739, 100000, 2, 2) +
                      term(-3019, 12500, 1, 3);
    mpz_class scale = mpz_class(100000) * 64 * 64 * 64 * 64;
    Rational oracle(total, scale);
    oracle.canonicalize();
    CHECK(eval_exact(bar, pt) == oracle);
    CHECK(oracle == q("-32573412817/1677721600000"));
}

TEST_CASE("polynomial text round trip") {
    QPoly p = poly("3/7*x1^3*x2 - x2 + 1/2", kXY);
    CHECK(poly(to_string(p, kXY), kXY) == p);
    CHECK(to_string(QPoly(2), kXY) == "0");
}
