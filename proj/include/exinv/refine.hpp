#pragma once

#include <vector>

#include "exinv/certificate.hpp"

namespace exinv {

/// Residual polynomial of every constraint (lhs - rhs) in binary64 and
/// theta = sum of squared coefficients.
struct ResidualSet {
    std::vector<DPoly> residuals;
    double theta = 0;
};

ResidualSet backward_error(const CertificateNumeric& cert, const SosProgram& prog);

/// Fix the v-group: Gram matrices of template multipliers become exact PSD
/// rationals, sign-free template multipliers are rounded to denominator D.
CertificateNumeric freeze_bilinear(const SosProgram& prog, const std::vector<double>& values, const Integer& D);

struct RefineConfig {
    double tau = 1e-10;
    int max_iters = 50;
    double damping = 1e-12;
};

struct RefineResult {
    CertificateNumeric cert;
    double theta = 0;
    int iterations = 0;
    bool converged = false;
    /// theta before the first step and after each accepted step.
    std::vector<double> trace;
};

/// Gauss-Newton on the identities with every free Gram block written as
/// P^T P (rank from the eigenvalues above sqrt(tau) * ||W||). Frozen values
/// are never changed. Steps are accepted only on strict descent. `converged`
/// is false when theta stagnates above tau or the iteration cap is hit.
RefineResult newton_refine(const CertificateNumeric& cert, const SosProgram& prog, const RefineConfig& cfg);

}  // namespace exinv
