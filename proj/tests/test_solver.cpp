#include <random>
#include <sstream>

#include "doctest.h"

#include "exinv/certificate.hpp"
#include "exinv/solver.hpp"
#include "support.hpp"

using namespace exinv;
using exinv::testing::load;

namespace {

Eigen::MatrixXd random_symmetric(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> g;
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) m(i, j) = m(j, i) = g(rng);
    return m;
}

// F(y) assembled directly from the problem data.
std::vector<Eigen::MatrixXd> assemble(const LmiProblem& p, const std::vector<double>& y) {
    std::vector<Eigen::MatrixXd> out = p.constant;
    for (std::size_t i = 0; i < p.nvars(); ++i)
        for (const auto& t : p.vars[i]) out[t.block] += y[i] * t.matrix;
    return out;
}

double oracle_min_eig(const std::vector<Eigen::MatrixXd>& blocks) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& b : blocks) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
        m = std::min(m, es.eigenvalues().minCoeff());
    }
    return m;
}

LmiProblem interval_problem() {
    // diag(x, 1 - x) as two 1x1 blocks.
    LmiProblem p;
    p.constant = {Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Ones(1, 1)};
    p.vars = {{{0, Eigen::MatrixXd::Ones(1, 1)}, {1, -Eigen::MatrixXd::Ones(1, 1)}}};
    return p;
}

}  // namespace

TEST_CASE("max-margin point of an interval") {
    LmiResult r = solve_lmi(interval_problem(), SolverConfig{});
    REQUIRE(r.status == SolveStatus::Feasible);
    CHECK(r.y[0] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(r.margin == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("negative constant block is infeasible") {
    LmiProblem p;
    p.constant = {-Eigen::MatrixXd::Ones(1, 1)};
    p.vars = {{}};
    LmiResult r = solve_lmi(p, SolverConfig{});
    CHECK(r.status == SolveStatus::Infeasible);
    CHECK(r.min_eig == doctest::Approx(-1.0));
}

TEST_CASE("inconsistent equalities are infeasible") {
    LmiProblem p = interval_problem();
    p.equalities.push_back({{{0, 1.0}}, 2.0});
    CHECK(solve_lmi(p, SolverConfig{}).status == SolveStatus::Infeasible);
}

TEST_CASE("equalities are honoured") {
    LmiProblem p = interval_problem();
    p.equalities.push_back({{{0, 4.0}}, 1.0});
    LmiResult r = solve_lmi(p, SolverConfig{});
    REQUIRE(r.status == SolveStatus::Feasible);
    CHECK(r.y[0] == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("planted LMIs are solved and never over-claimed") {
    std::mt19937_64 rng(31);
    SolverConfig cfg;
    for (int k = 0; k < 20; ++k) {
        const int nv = 2 + k % 4;
        std::vector<int> sides{3, 2};
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        std::vector<double> planted(nv);
        for (auto& x : planted) x = unit(rng);
        LmiProblem p;
        p.vars.assign(nv, {});
        for (std::size_t b = 0; b < sides.size(); ++b) {
            Eigen::MatrixXd r = random_symmetric(rng, sides[b]);
            Eigen::MatrixXd m = r * r.transpose() + 0.1 * Eigen::MatrixXd::Identity(sides[b], sides[b]);
            Eigen::MatrixXd a0 = m;
            for (int i = 0; i < nv; ++i) {
                Eigen::MatrixXd ai = random_symmetric(rng, sides[b]);
                a0 -= planted[i] * ai;
                p.vars[i].push_back({b, ai});
            }
            p.constant.push_back(a0);
        }
        LmiResult res = solve_lmi(p, cfg);
        CHECK(res.status == SolveStatus::Feasible);
        double oracle = oracle_min_eig(assemble(p, res.y));
        CHECK(oracle >= -cfg.delta);
        CHECK(res.min_eig == doctest::Approx(oracle).epsilon(1e-9));
    }
}

TEST_CASE("random LMIs: a feasible answer always passes the eigenvalue oracle") {
    std::mt19937_64 rng(37);
    SolverConfig cfg;
    int feasible = 0, other = 0;
    for (int k = 0; k < 30; ++k) {
        LmiProblem p;
        p.constant = {random_symmetric(rng, 3)};
        p.vars.assign(2, {});
        for (auto& v : p.vars) v.push_back({0, random_symmetric(rng, 3)});
        LmiResult r = solve_lmi(p, cfg);
        if (r.status == SolveStatus::Feasible) {
            ++feasible;
            CHECK(oracle_min_eig(assemble(p, r.y)) >= -cfg.delta);
        } else {
            ++other;
        }
    }
    CHECK(feasible + other == 30);
}

TEST_CASE("first inner problem of the one-dimensional model freezes u") {
    HybridSystem h = load("example1.model");
    EncoderConfig ec;
    ec.degree = 1;
    ec.sos_template_multiplier = true;
    ec.eps_continuous = 0;
    SosProgram p = build_sos_program(h, all_unsafe_targets(h), ec).restricted_to({ConditionKind::Continuous});
    BmiProblem b = assemble_bmi(p);
    std::vector<double> zero(b.nunknowns, 0.0);
    LmiProblem lp = lmi_slice(b, zero, b.v, false);
    REQUIRE(lp.nvars() == 1);
    for (double v : {0.0, 0.5, 2.0}) {
        std::vector<double> at = zero;
        at[b.v[0]] = v;
        std::vector<Eigen::MatrixXd> f = assemble(lp, {v});
        REQUIRE(f.size() == b.blocks.size());
        for (std::size_t k = 0; k < f.size(); ++k) CHECK(f[k].isApprox(b.evaluate_block(k, at)));
    }
}

TEST_CASE("an LMI-shaped BMI takes one sweep") {
    HybridSystem h = load("example2.model");
    SosProgram p = build_sos_program(h, 2, 1, Mode::Lmi);
    BmiProblem b = assemble_bmi(p);
    REQUIRE(b.v.empty());
    NumericSolution s = solve_bmi_alternating(b, std::vector<double>(b.nunknowns, 0.0), SolverConfig{});
    CHECK(s.sweeps == 1);
    CHECK(s.trace.size() == 1);
}

TEST_CASE("alternating iteration on the two-dimensional model") {
    HybridSystem h = load("example2.model");
    SosProgram p = build_sos_program(h, 2, 1, Mode::Bmi);
    BmiProblem b = assemble_bmi(p);
    SolverConfig cfg;
    NumericSolution s = solve_program(p, b, cfg);
    REQUIRE(s.status == SolveStatus::Feasible);
    CHECK(s.min_eig >= -cfg.delta);

    // Oracle: Gram matrices rebuilt from the program's own terms.
    double oracle = std::numeric_limits<double>::infinity();
    for (const auto& g : gram_blocks(p)) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(block_matrix(g, s.values));
        oracle = std::min(oracle, es.eigenvalues().minCoeff());
    }
    CHECK(oracle >= -cfg.delta);

    for (std::size_t k = 1; k < s.trace.size(); ++k) CHECK(s.trace[k] >= s.trace[k - 1]);

    NumericSolution again = solve_program(p, b, cfg);
    CHECK(again.values == s.values);
    CHECK(again.trace == s.trace);
}

TEST_CASE("value files round trip") {
    HybridSystem h = load("example1.model");
    SosProgram p = build_sos_program(h, 1, 1, Mode::Bmi);
    std::vector<double> v(p.unknowns.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.1 * static_cast<double>(i) - 1.0 / 3.0;
    std::stringstream ss;
    write_values(ss, p, v);
    CHECK(read_values(ss, p) == v);
}
