#include <random>
#include <set>

#include "doctest.h"

#include "oracles.hpp"
#include "pipeline.hpp"
#include "support.hpp"

using namespace exinv;
using namespace exinv::testing;
using exinv::testing::load;
using exinv::testing::q;
using exinv::testing::run_pipeline;

namespace {

std::size_t id_of(const SosProgram& p, const std::string& name) {
    for (std::size_t i = 0; i < p.unknowns.size(); ++i)
        if (p.unknowns[i].name == name) return i;
    FAIL("no unknown named " << name);
    return 0;
}

SosProgram example1_continuous() {
    HybridSystem h = load("example1.model");
    EncoderConfig cfg;
    cfg.degree = 1;
    cfg.sos_template_multiplier = true;
    cfg.eps_continuous = 0;
    return build_sos_program(h, all_unsafe_targets(h), cfg).restricted_to({ConditionKind::Continuous});
}

// Best common denominator by brute force over every q <= D (max-norm error,
// smallest q on ties).
DiophantineResult diophantine_oracle(const std::vector<double>& x, long D) {
    DiophantineResult best;
    best.error = std::numeric_limits<double>::infinity();
    for (long qq = 1; qq <= D; ++qq) {
        std::vector<Rational> vals;
        double err = 0;
        for (double xi : x) {
            Rational r(static_cast<long>(std::llround(xi * static_cast<double>(qq))), qq);
            r.canonicalize();
            err = std::max(err, std::abs(xi - r.get_d()));
            vals.push_back(r);
        }
        if (err < best.error) {
            best.error = err;
            best.values = vals;
            best.q = qq;
        }
    }
    return best;
}

// Rank by fraction-free (Bareiss) elimination on a dense integer copy.
std::size_t bareiss_rank(const HyperplaneSystem& hp) {
    const std::size_t m = hp.nrows(), n = hp.ncols();
    std::vector<std::vector<mpz_class>> a(m, std::vector<mpz_class>(n));
    for (std::size_t i = 0; i < m; ++i) {
        mpz_class l = 1;
        for (const auto& [c, v] : hp.rows[i]) mpz_lcm(l.get_mpz_t(), l.get_mpz_t(), v.get_den_mpz_t());
        for (const auto& [c, v] : hp.rows[i]) a[i][c] = v.get_num() * (l / v.get_den());
    }
    std::size_t rank = 0;
    mpz_class prev = 1;
    for (std::size_t col = 0; col < n && rank < m; ++col) {
        std::size_t piv = rank;
        while (piv < m && a[piv][col] == 0) ++piv;
        if (piv == m) continue;
        std::swap(a[piv], a[rank]);
        for (std::size_t i = rank + 1; i < m; ++i) {
            for (std::size_t j = col + 1; j < n; ++j) {
                mpz_class t = a[rank][col] * a[i][j] - a[i][col] * a[rank][j];
                a[i][j] = t / prev;
            }
            a[i][col] = 0;
        }
        prev = a[rank][col];
        ++rank;
    }
    return rank;
}

}  // namespace

TEST_CASE("truncated PSD rationalization") {
    CHECK(truncate_psd_rational(Eigen::MatrixXd::Identity(3, 3), 1000) == QMat::identity(3));
    QMat half(1, 1);
    half(0, 0) = q("1/2");
    CHECK(truncate_psd_rational(Eigen::MatrixXd::Constant(1, 1, 0.5), 2) == half);

    // Eigenvalues (2, 1, -1e-12).
    Eigen::MatrixXd v = Eigen::HouseholderQR<Eigen::MatrixXd>(Eigen::MatrixXd::Random(3, 3)).householderQ();
    Eigen::MatrixXd w = v * Eigen::Vector3d(2.0, 1.0, -1e-12).asDiagonal() * v.transpose();
    w = (w + w.transpose()) / 2;
    QMat t = truncate_psd_rational(w, Integer("1000000000"));
    CHECK(psd_exact(t).psd);
    CHECK((to_eigen(t) - w).norm() < 1e-6);

    std::mt19937_64 rng(43);
    for (int k = 0; k < 50; ++k) {
        Eigen::MatrixXd r = Eigen::MatrixXd::Random(4, 4);
        Eigen::MatrixXd sym = (r + r.transpose()) / 2;  // usually indefinite
        CHECK(psd_exact(truncate_psd_rational(sym, 100)).psd);
    }
}

TEST_CASE("simultaneous Diophantine approximation examples") {
    auto r = simultaneous_diophantine({0.333333, 0.666667}, 10);
    CHECK(r.values == std::vector<Rational>{q("1/3"), q("2/3")});
    CHECK(r.q == 3);
    auto o = diophantine_oracle({0.333333, 0.666667}, 10);
    CHECK(o.values == r.values);
    CHECK(o.q == r.q);

    auto same = simultaneous_diophantine({0.25, -1.5, 3.0}, 10);
    CHECK(same.values == std::vector<Rational>{q("1/4"), q("-3/2"), Rational(3)});

    auto e4 = simultaneous_diophantine({-1.358974, 0.615385}, 100);
    CHECK(e4.values[0] == q("-53/39"));
    CHECK(e4.values[1] == q("8/13"));
}

TEST_CASE("Diophantine agrees with brute force on short vectors") {
    std::mt19937_64 rng(47);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int k = 0; k < 100; ++k) {
        std::vector<double> x{u(rng), u(rng)};
        const long D = 1 + k % 30;
        auto r = simultaneous_diophantine(x, D);
        auto o = diophantine_oracle(x, D);
        CHECK(r.q == o.q);
        CHECK(r.values == o.values);
    }
}

TEST_CASE("Diophantine recovers planted vectors") {
    Tally t = diophantine_planted(1000, 53);
    CHECK(t.cases == 1000);
    CHECK(t.failures == 0);
}

TEST_CASE("hyperplane rows of the one-dimensional continuous condition") {
    SosProgram p = example1_continuous();
    const std::size_t u0 = id_of(p, "c0.0[0]"), u1 = id_of(p, "c0.0[1]"), v1 = id_of(p, "W1.2[0,0]");
    const Rational a0 = q("-2"), a1 = 1, b1 = 1;
    HyperplaneSystem hp = hyperplane_system(p, {{u0, a0}, {u1, a1}, {v1, b1}});
    std::set<std::size_t> used;
    for (const auto& row : hp.rows)
        for (const auto& [c, a] : row) used.insert(c);
    CHECK(used.size() == 4);  // Q00, Q01, Q11, u2
    const std::size_t q00 = hp.column_of.at(id_of(p, "W1.0[0,0]"));
    const std::size_t u2 = hp.column_of.at(id_of(p, "W1.1[0,0]"));
    bool found = false;
    for (std::size_t r = 0; r < hp.nrows(); ++r) {
        if (hp.monomial[r].degree() != 0) continue;
        found = true;
        // Q00 + u2 + u0 v1 = 0, in whatever scaling the row carries.
        const Rational s = hp.rows[r].at(q00);
        CHECK(hp.rows[r].at(u2) / s == 1);
        CHECK(hp.rhs[r] / s == -a0 * b1);
    }
    CHECK(found);
    CHECK(hp.full_row_rank);
}

TEST_CASE("zero identity gives a homogeneous system") {
    // Zero template, zero multiplier: every target coefficient vanishes.
    SosProgram p = example1_continuous();
    HyperplaneSystem hp =
        hyperplane_system(p, {{id_of(p, "c0.0[0]"), 0}, {id_of(p, "c0.0[1]"), 0}, {id_of(p, "W1.2[0,0]"), 0}});
    for (const auto& b : hp.rhs) CHECK(b == 0);
}

TEST_CASE("exact rank of the two-dimensional system") {
    HybridSystem h = load("example2.model");
    SosProgram p = build_sos_program(h, 2, 1, Mode::Bmi);
    std::map<std::size_t, Rational> frozen;
    std::mt19937_64 rng(59);
    for (std::size_t v : p.v_vars()) frozen[v] = random_rational(rng, 5, 3);
    HyperplaneSystem hp = hyperplane_system(p, frozen);
    std::size_t oracle = bareiss_rank(hp);
    CHECK(hp.rank == oracle);
    CHECK(hp.full_row_rank == (oracle == hp.nrows()));
    CHECK(hp.full_row_rank);
}

TEST_CASE("projection examples") {
    HyperplaneSystem one = manual_system({{{0, Rational(1)}}}, {Rational(5)}, 1);
    for (const char* start : {"0", "-7/3", "5"}) CHECK(project_orthogonal(one, {q(start)}, {Rational(1)})[0] == 5);

    // x + y = 2 from (1, 1): already on the plane.
    HyperplaneSystem line = manual_system({{{0, Rational(1)}, {1, Rational(1)}}}, {Rational(2)}, 2);
    std::vector<Rational> on{Rational(1), Rational(1)};
    CHECK(project_orthogonal(line, on, {Rational(1), Rational(1)}) == on);
    // From (0, 0) with weights (1, 1) to (1, 1); with weights (1, 3) the
    // cheap coordinate moves further: (3/2, 1/2).
    CHECK(project_orthogonal(line, {Rational(0), Rational(0)}, {Rational(1), Rational(1)}) == on);
    CHECK(project_orthogonal(line, {Rational(0), Rational(0)}, {Rational(1), Rational(3)}) ==
          std::vector<Rational>{q("3/2"), q("1/2")});
    // Fixed column keeps its start value.
    CHECK(project_orthogonal(line, {Rational(5), Rational(0)}, {Rational(1), Rational(1)}, {true, false}) ==
          std::vector<Rational>{Rational(5), Rational(-3)});

    HyperplaneSystem bad = manual_system({{{0, Rational(1)}}, {{0, Rational(2)}}}, {Rational(1), Rational(3)}, 1);
    CHECK_THROWS_AS(project_orthogonal(bad, {Rational(0)}, {Rational(1)}), SingularSystem);
}

TEST_CASE("projection is exact and idempotent") {
    Tally t = projection_planted(100, 61);
    CHECK(t.cases > 50);
    CHECK(t.failures == 0);
}

TEST_CASE("recovery bound examples") {
    CHECK(recovery_bound_holds({1.0, 1.0, 1.0, 1e-10}));
    CHECK(!recovery_bound_holds({0.0, 1.0, 1.0, 1e-10}));
    CHECK(!recovery_bound_holds({1e-3, 1e6, 1e9, 1e-10}));
}

TEST_CASE("projection of planted full-rank Gram matrices stays PSD") {
    PlantedProjection r = full_rank_planted(50, 67);
    CHECK(r.planted == 50);
    CHECK(r.bound_holds == 50);
    CHECK(r.off_hyperplane == 0);
    CHECK(r.psd_failures == 0);
}

TEST_CASE("full-rank blocks take the projection path") {
    // phi = x - 2, s2 = 1: 2x - (x - 2) = s0 + s1 (1 - x^2) with s1 = 1 and
    // s0 = [[1, 1/2], [1/2, 1]] over (1, x). Every block is definite.
    SosProgram p = example1_continuous();
    std::vector<double> v(p.unknowns.size(), 0.0);
    v[id_of(p, "c0.0[0]")] = -2.0 + 1e-12;
    v[id_of(p, "c0.0[1]")] = 1.0;
    v[id_of(p, "W1.1[0,0]")] = 1.0;
    v[id_of(p, "W1.0[0,0]")] = 1.0;
    v[id_of(p, "W1.0[0,1]")] = 0.5 - 1e-12;
    v[id_of(p, "W1.0[1,1]")] = 1.0;
    const std::size_t s2 = id_of(p, "W1.2[0,0]");
    v[s2] = 1.0;
    RationalCertificate rc = recover_certificate({v, {{s2, Rational(1)}}}, p, RecoverConfig{});
    CHECK(rc.recovery_case.substr(0, 1) == "1");
    CHECK(rc.bound_holds);
    CHECK(identity_check(p, rc.values).ok);
    CHECK(rc.values[id_of(p, "c0.0[0]")] == -2);
}

TEST_CASE("all-singular blocks take the joint rounding path") {
    // phi = x, s2 = 2: 2x - 2x = 0, so s0 = s1 = 0.
    SosProgram p = example1_continuous();
    std::vector<double> v(p.unknowns.size(), 0.0);
    v[id_of(p, "c0.0[1]")] = 1.0 + 1e-13;
    v[id_of(p, "W1.0[0,1]")] = 1e-13;
    const std::size_t s2 = id_of(p, "W1.2[0,0]");
    v[s2] = 2.0;
    RationalCertificate rc = recover_certificate({v, {{s2, Rational(2)}}}, p, RecoverConfig{});
    CHECK(rc.recovery_case == "2.1");
    CHECK(rc.denominator == 10);
    CHECK(!rc.bound_holds);
    CHECK(rc.values[id_of(p, "c0.0[1]")] == 1);
    CHECK(rc.values[id_of(p, "W1.0[0,1]")] == 0);
}

TEST_CASE("recovery on the two-dimensional model is accepted by the checker") {
    HybridSystem h = load("example2.model");
    SosProgram p = build_sos_program(h, 2, 1, Mode::Bmi);
    auto run = run_pipeline(p);
    REQUIRE(run.exact);
    CHECK(identity_check(p, run.exact->values).ok);
    auto targets = all_unsafe_targets(h);
    UnitCertificate unit = extract_certificate(p, run.exact->values, targets);
    CHECK(verify_unit(h, unit).verdict == Verdict::Safe);
    // The advisory bound is recorded; the exact check is what decides.
    MESSAGE("case " << run.exact->recovery_case << ", bound holds: " << run.exact->bound_holds
                    << ", lambda = " << run.exact->bound.lambda << ", kappa2 = " << run.exact->bound.kappa2);
}

TEST_CASE("recovery failure is reported") {
    SosProgram p = example1_continuous();
    // phi = 1 and s2 = 1 held fixed: -1 = s0 + s1 (1 - x^2) has no PSD
    // solution (x^2: s0_11 = s1, constant: s0_00 + s1 = -1).
    std::vector<double> v(p.unknowns.size(), 0.0);
    const std::size_t c0 = id_of(p, "c0.0[0]"), c1 = id_of(p, "c0.0[1]"), s2 = id_of(p, "W1.2[0,0]");
    v[c0] = 1.0;
    v[s2] = 1.0;
    std::map<std::size_t, Rational> frozen{{c0, Rational(1)}, {c1, Rational(0)}, {s2, Rational(1)}};
    CHECK_THROWS_AS(recover_certificate({v, frozen}, p, RecoverConfig{}), RecoveryFailed);
}
