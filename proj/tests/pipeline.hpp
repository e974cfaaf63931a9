#pragma once

#include <limits>
#include <optional>
#include <random>
#include <sstream>

#include "exinv/checker.hpp"
#include "exinv/recover.hpp"
#include "exinv/refine.hpp"
#include "exinv/solver.hpp"
#include "support.hpp"

namespace exinv::testing {

struct PipelineRun {
    NumericSolution numeric;
    CertificateNumeric frozen;
    RefineResult refined;
    std::optional<RationalCertificate> exact;
};

/// solve -> freeze -> refine -> recover with the default settings.
inline PipelineRun run_pipeline(const SosProgram& p, const Integer& D = 1000, double tau = 1e-10) {
    PipelineRun r;
    BmiProblem b = assemble_bmi(p);
    r.numeric = solve_program(p, b, SolverConfig{});
    if (r.numeric.status != SolveStatus::Feasible) return r;
    r.frozen = freeze_bilinear(p, r.numeric.values, D);
    RefineConfig rc;
    rc.tau = tau;
    r.refined = newton_refine(r.frozen, p, rc);
    RecoverConfig cfg;
    cfg.D = D;
    cfg.tau = tau;
    cfg.schedule = {10, 100, D};
    try {
        r.exact = recover_certificate(r.refined.cert, p, cfg);
    } catch (const RecoveryFailed&) {
    }
    return r;
}

inline double min_block_eig(const SosProgram& p, const std::vector<double>& values) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& g : gram_blocks(p)) m = std::min(m, min_eigenvalue(block_matrix(g, values)));
    return m;
}

struct RefineTally {
    int runs = 0;
    int converged = 0;
    /// Runs whose start was already below 1e-10 or took no step.
    int trivial = 0;
    int non_monotone = 0;
    int above_tau = 0;
    int psd_violations = 0;
    int frozen_moved = 0;
};

/// Exact certificates of the two small models (degree 2, e = 1), perturbed
/// by Gaussian noise on every unknown refinement may move, then refined.
inline RefineTally refine_planted(int count, std::uint64_t seed, double noise_sd = 1e-4) {
    std::vector<std::pair<SosProgram, RationalCertificate>> planted;
    for (const char* name : {"example2.model", "example1.model"}) {
        SosProgram p = build_sos_program(load(name), 2, 1, Mode::Bmi);
        auto run = run_pipeline(p);
        if (!run.exact || !identity_check(p, run.exact->values).ok)
            throw std::runtime_error(std::string("no exact certificate for ") + name);
        planted.emplace_back(p, *run.exact);
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_sd);
    RefineTally t;
    for (int k = 0; k < count; ++k) {
        const auto& [prog, exact] = planted[k % planted.size()];
        CertificateNumeric cert;
        for (std::size_t i : prog.v_vars()) cert.frozen[i] = exact.values[i];
        for (std::size_t i = 0; i < exact.values.size(); ++i) {
            double x = exact.values[i].get_d();
            cert.values.push_back(cert.frozen.count(i) ? x : x + noise(rng));
        }
        RefineResult r = newton_refine(cert, prog, RefineConfig{});
        ++t.runs;
        if (r.converged) ++t.converged;
        if (r.trace.front() <= 1e-10 || r.iterations == 0) ++t.trivial;
        for (std::size_t s = 1; s < r.trace.size(); ++s)
            if (r.trace[s] > r.trace[s - 1]) {
                ++t.non_monotone;
                break;
            }
        if (!(r.theta < 1e-10)) ++t.above_tau;
        if (min_block_eig(prog, r.cert.values) < -1e-12) ++t.psd_violations;
        for (const auto& [var, value] : cert.frozen)
            if (r.cert.frozen.at(var) != value) {
                ++t.frozen_moved;
                break;
            }
    }
    return t;
}

/// Linear or mildly cubic flows in one or two variables with an initial disc
/// and an unsafe disc centred elsewhere.
inline std::string random_model(std::mt19937_64& rng, int k) {
    std::uniform_int_distribution<int> coef(-3, 3), pos(1, 3), centre(-4, 4), rad(1, 4);
    std::ostringstream m;
    const bool planar = k % 3 != 0;
    m << "system fuzz" << k << ";\n";
    if (!planar) {
        int c = centre(rng), u = centre(rng);
        if (u == c) u = c + 3;
        m << "vars x;\n";
        m << "init (x - " << c << ")^2 <= 1/" << rad(rng) << ";\n";
        m << "location l0 {\n  flow x' = " << -pos(rng) << "*x";
        if (k % 2) m << " + " << coef(rng) << "/10*x^3";
        m << ";\n  unsafe (x - " << u << ")^2 <= 1/" << rad(rng) << ";\n}\n";
        return m.str();
    }
    int c1 = centre(rng), c2 = centre(rng), u1 = centre(rng), u2 = centre(rng);
    if (u1 == c1 && u2 == c2) u1 += 4;
    m << "vars x1 x2;\n";
    m << "init (x1 - " << c1 << ")^2 + (x2 - " << c2 << ")^2 <= 1/" << rad(rng) << ";\n";
    m << "location l0 {\n  flow x1' = " << -pos(rng) << "*x1 + " << coef(rng) << "*x2, x2' = " << coef(rng)
      << "*x1 + " << -pos(rng) << "*x2";
    if (k % 2) m << " + " << coef(rng) << "/10*x1^3";
    m << ";\n  unsafe (x1 - " << u1 << ")^2 + (x2 - " << u2 << ")^2 <= 1/" << rad(rng) << ";\n}\n";
    return m.str();
}

struct FuzzTally {
    int runs = 0;
    int returned = 0;
    /// Returned certificates failing identity_check or psd_exact.
    int failures = 0;
    std::vector<std::string> failing_models;
};

/// Random models through the full pipeline at degree 1 or 2, alternating
/// bmi and lmi; every returned certificate is re-checked exactly.
inline FuzzTally fuzz_pipeline(int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    FuzzTally t;
    for (int k = 0; k < count; ++k) {
        const std::string text = random_model(rng, k);
        HybridSystem h = parse_system(text);
        const Mode mode = k % 4 < 2 ? Mode::Bmi : Mode::Lmi;
        SosProgram p = build_sos_program(h, 1 + k % 2, 1, mode);
        auto run = run_pipeline(p);
        ++t.runs;
        if (!run.exact) continue;
        ++t.returned;
        bool ok = run.exact->values.size() == p.unknowns.size() && identity_check(p, run.exact->values).ok;
        for (const auto& g : gram_blocks(p)) ok = ok && psd_exact(block_matrix(g, run.exact->values)).psd;
        if (!ok) {
            ++t.failures;
            t.failing_models.push_back(text);
        }
    }
    return t;
}

}  // namespace exinv::testing
