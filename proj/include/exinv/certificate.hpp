#pragma once

#include <map>
#include <string>
#include <vector>

#include "exinv/encoder.hpp"

namespace exinv {

/// A PSD unknown of the program: the Gram matrix of one SOS term, or a slack
/// that is a decision variable (1x1).
struct GramBlock {
    std::size_t constraint = 0;
    std::size_t term = 0;
    bool eps = false;
    /// Multiplies a template, so it belongs to the v-group.
    bool bilinear = false;
    std::size_t side = 0;
    /// Unknown ids, upper triangle row-major.
    std::vector<std::size_t> vars;

    std::size_t var(std::size_t i, std::size_t j) const;
};

std::vector<GramBlock> gram_blocks(const SosProgram& p);

Eigen::MatrixXd block_matrix(const GramBlock& b, const std::vector<double>& values);
QMat block_matrix(const GramBlock& b, const std::vector<Rational>& values);

/// Numeric values of every unknown. Unknowns in `frozen` carry exact values
/// that refinement does not touch (the rationalized template multipliers).
struct CertificateNumeric {
    std::vector<double> values;
    std::map<std::size_t, Rational> frozen;
};

/// A y = b over the unknowns that are not frozen; coefficient matching of
/// every identity with frozen values substituted.
struct HyperplaneSystem {
    std::vector<std::size_t> columns;
    std::map<std::size_t, std::size_t> column_of;
    std::vector<std::map<std::size_t, Rational>> rows;
    std::vector<Rational> rhs;
    /// Source row of each equation.
    std::vector<std::size_t> constraint;
    std::vector<Monomial> monomial;
    std::size_t rank = 0;
    bool full_row_rank = false;

    std::size_t nrows() const { return rows.size(); }
    std::size_t ncols() const { return columns.size(); }
};

/// Projection keeps every block PSD when lambda > 2 eta kappa2^2 tau^2
/// (lambda: smallest block eigenvalue, eta: squared norm of the numeric
/// solution, kappa2: condition number of A).
struct RecoveryBound {
    double lambda = 0;
    double eta = 0;
    double kappa2 = 0;
    double tau = 0;
};

/// Exact values of every unknown.
struct RationalCertificate {
    std::vector<Rational> values;
    Integer denominator;
    std::string recovery_case;
    RecoveryBound bound;
    bool bound_holds = false;
};

}  // namespace exinv
