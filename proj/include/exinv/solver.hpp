#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "exinv/encoder.hpp"

namespace exinv {

struct LmiTerm {
    std::size_t block = 0;
    Eigen::MatrixXd matrix;
};

/// sum coef_i y_i = rhs
struct LinearEquality {
    std::vector<std::pair<std::size_t, double>> coef;
    double rhs = 0;
};

/// F(y) = F0 + sum_i y_i F_i, block diagonal, binary64, subject to linear
/// equalities.
struct LmiProblem {
    std::vector<Eigen::MatrixXd> constant;
    /// Nonzero blocks of F_i, one list per variable.
    std::vector<std::vector<LmiTerm>> vars;
    std::vector<LinearEquality> equalities;

    std::size_t nvars() const { return vars.size(); }
    Eigen::MatrixXd evaluate_block(std::size_t b, const std::vector<double>& y) const;
    double min_eigenvalue(const std::vector<double>& y) const;
};

struct SolverConfig {
    int max_outer_iters = 30;
    double delta = 1e-8;
    int lmi_iters = 120;
    double stall = 1e-9;
    int stall_sweeps = 3;
    /// |y_i| <= box for every LMI variable.
    double box = 100.0;
    /// Alternation stops once the margin reaches this value.
    double target_margin = 1e-6;
    /// Constant values given to the template multipliers by seeded restarts.
    std::vector<double> seeds{1.0, 0.1, 10.0};
};

enum class SolveStatus { Feasible, Infeasible, Unknown };
std::string to_string(SolveStatus s);

struct LmiResult {
    SolveStatus status = SolveStatus::Unknown;
    std::vector<double> y;
    /// Largest t found with F(y) - tI >= 0.
    double margin = 0;
    /// Upper bound on the best margin inside the box, from the primal side.
    double bound = 0;
    /// Smallest eigenvalue of F(y), computed independently of the iteration.
    double min_eig = 0;
    int iterations = 0;
    bool converged = false;
    bool primal_feasible = false;
};

/// max t s.t. F(y) - tI >= 0, |y| <= box. Rows whose diagonal vanishes
/// identically on the feasible affine set are held at zero and excluded from
/// t. Feasible iff the independently computed min eigenvalue is >= -delta;
/// Infeasible iff the bound is below -delta or the equalities are
/// inconsistent; Unknown otherwise.
LmiResult solve_lmi(const LmiProblem& p, const SolverConfig& cfg);

/// LMI obtained from B by fixing every unknown not in `free` at `values`.
/// Blocks that become constant are dropped when `drop_constant` is set.
LmiProblem lmi_slice(const BmiProblem& b, const std::vector<double>& values, const std::vector<std::size_t>& free,
                     bool drop_constant = true);

struct NumericSolution {
    SolveStatus status = SolveStatus::Unknown;
    /// One value per program unknown (pivots completed).
    std::vector<double> values;
    double min_eig = 0;
    /// Min eigenvalue after dropping rows that vanish (see face_margin).
    double margin = 0;
    int sweeps = 0;
    /// Best min eigenvalue after each half-step.
    std::vector<double> trace;
    std::string start;
};

/// Smallest eigenvalue over all blocks after removing rows whose diagonal
/// entry and off-diagonal entries are zero up to roundoff.
double face_margin(const BmiProblem& b, const std::vector<double>& values);

/// Alternating scheme: starting from `values` (u part used), solve the
/// LMI in v with u fixed and the LMI in u with v fixed. Returns the best
/// iterate seen; Feasible only when its min eigenvalue is >= -delta.
NumericSolution solve_bmi_alternating(const BmiProblem& b, const std::vector<double>& values, const SolverConfig& cfg,
                                      bool fix_u_first = true);

/// Starting point with every template multiplier set to a constant: the
/// sign-free continuous multiplier gets -lambda, SOS ones get +lambda.
std::vector<double> seeded_start(const SosProgram& p, double lambda);

/// Warm start (v = 0, u from the resulting LMI), then seeded restarts.
NumericSolution solve_program(const SosProgram& p, const BmiProblem& b, const SolverConfig& cfg);

/// Plain-text value vectors ("name value" per line) for exchange with
/// external solvers.
void write_values(std::ostream& os, const SosProgram& p, const std::vector<double>& values);
std::vector<double> read_values(std::istream& is, const SosProgram& p);

}  // namespace exinv
