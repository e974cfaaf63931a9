#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include "exinv/certificate.hpp"

namespace exinv {

/// Pivoted LDL^T in binary64, negative pivots clamped to zero, entries of L
/// and D rounded to denominator D, reassembled exactly. PSD by construction.
QMat truncate_psd_rational(const Eigen::MatrixXd& w, const Integer& D);

/// p/q with one common q <= D minimizing max |x_i - p_i/q| (smallest q on
/// ties).
struct DiophantineResult {
    std::vector<Rational> values;
    Integer q;
    double error = 0;
};
DiophantineResult simultaneous_diophantine(const std::vector<double>& x, long D);

HyperplaneSystem hyperplane_system(const SosProgram& prog, const std::map<std::size_t, Rational>& frozen);

/// Rank of a sparse rational matrix by exact elimination.
std::size_t exact_rank(const std::vector<std::map<std::size_t, Rational>>& rows);

class SingularSystem : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// argmin sum_j w_j (y_j - y0_j)^2 subject to A y = b, solved exactly.
/// `fixed` columns keep their y0 value (their terms move to the right-hand
/// side). Weights: 2 for off-diagonal Gram entries, 1 otherwise.
std::vector<Rational> project_orthogonal(const HyperplaneSystem& hp, const std::vector<Rational>& y0,
                                         const std::vector<Rational>& weights,
                                         const std::vector<bool>& fixed = {});

/// Projection weights of the hyperplane columns.
std::vector<Rational> projection_weights(const HyperplaneSystem& hp, const SosProgram& prog);

/// Advisory; the exact PSD check decides.
bool recovery_bound_holds(const RecoveryBound& bound);

/// Largest / smallest singular value ratio of A, from the eigenvalues of A A^T.
double condition_number(const HyperplaneSystem& hp);

struct RecoverConfig {
    Integer D = 1000;
    double tau = 1e-10;
    std::vector<Integer> schedule{10, 100, 1000};
};

class RecoveryFailed : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Exact recovery over the escalating denominator schedule. Every
/// returned certificate satisfies identity_check and psd_exact.
RationalCertificate recover_certificate(const CertificateNumeric& cert, const SosProgram& prog,
                                        const RecoverConfig& cfg);

}  // namespace exinv
