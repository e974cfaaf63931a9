#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "exinv/model.hpp"

namespace exinv {

enum class Mode { Bmi, Lmi, Conjunction, Boundary };
std::string to_string(Mode m);
std::optional<Mode> parse_mode(std::string_view s);

enum class ConditionKind { Init, Discrete, Continuous, Unsafe, Boundary, Disjoint, Separation };
std::string to_string(ConditionKind k);
std::optional<ConditionKind> parse_condition_kind(std::string_view s);

/// One scalar decision variable of the program.
struct Unknown {
    enum class Role { TemplateCoeff, GramEntry, FreeCoeff, Slack };
    Role role = Role::TemplateCoeff;
    /// Member of the v-group: coefficients of multipliers that multiply a
    /// template.
    bool bilinear = false;
    std::string name;
    /// Template index for TemplateCoeff, (constraint, term) otherwise.
    std::size_t owner = 0;
    std::size_t term = 0;
    std::size_t row = 0;
    std::size_t col = 0;
};

struct InvariantTemplate {
    std::size_t loc = 0;
    int slot = 0;
    int degree = 0;
    std::vector<Monomial> basis;
    /// Unknown ids, parallel to basis. Empty when the invariant is fixed.
    std::vector<std::size_t> coeffs;
    std::optional<QPoly> fixed;

    bool is_fixed() const { return fixed.has_value(); }
};

/// Template with fresh coefficient ids 0..nu-1.
InvariantTemplate build_template(const HybridSystem& h, std::size_t loc, int d);

/// multiplier(x) * factor(x). The factor is a known polynomial or a template.
struct SosTerm {
    enum class Kind { Sos, Free };
    Kind kind = Kind::Sos;
    std::string factor;
    std::optional<QPoly> known;
    std::optional<std::size_t> templ;
    /// Sos: Gram basis. Free: coefficient basis.
    std::vector<Monomial> basis;
    /// Sos: upper-triangle entries, row-major. Free: one per basis monomial.
    std::vector<std::size_t> vars;
    bool slack = false;

    std::size_t side() const { return basis.size(); }
    std::size_t gram_var(std::size_t i, std::size_t j) const;
};

/// lhs(x) = sum_t multiplier_t(x) * factor_t(x) + eps.
struct SosConstraint {
    ConditionKind kind = ConditionKind::Init;
    std::size_t loc = 0;
    std::size_t transition = 0;
    std::size_t region = 0;
    std::size_t conjunct = 0;
    int slot = 0;
    std::size_t nvars = 0;
    int degree = 0;
    QPoly lhs_known;
    std::vector<std::pair<std::size_t, QPoly>> lhs_parts;
    std::vector<SosTerm> terms;
    Rational eps = 0;
    /// Set when eps is a decision variable (a 1x1 block).
    std::optional<std::size_t> eps_var;
};

/// Unsafe (sub)region handed to the encoder.
struct UnsafeTarget {
    std::size_t loc = 0;
    SemialgebraicSet set;
    std::size_t region = 0;
};

struct EncoderConfig {
    int degree = 2;
    int e = 1;
    Mode mode = Mode::Bmi;
    Rational eps_continuous{1, 100};
    /// Slack of the strengthened continuous condition; zero keeps it
    /// satisfiable around equilibria.
    Rational eps_continuous_lmi{0};
    Rational eps_unsafe{1, 100};
    /// Make every slack a decision variable instead of a constant.
    bool eps_variable = false;
    /// Multiplier of the template in the continuous condition is SOS rather
    /// than sign-free.
    bool sos_template_multiplier = false;
    /// Conjoin the location invariant to the unsafe set.
    bool unsafe_within_inv = true;
    /// Reject conjunction mode when a transition needs more variables.
    std::size_t max_conjunction_vars = 6;
};

struct SosProgram {
    std::size_t nvars = 0;
    EncoderConfig cfg;
    std::vector<Unknown> unknowns;
    std::vector<InvariantTemplate> templates;
    std::vector<SosConstraint> constraints;

    std::optional<std::size_t> template_index(std::size_t loc, int slot) const;
    std::vector<std::size_t> u_vars() const;
    std::vector<std::size_t> v_vars() const;
    /// Keep only constraints of the given kinds (unknowns are retained).
    SosProgram restricted_to(const std::vector<ConditionKind>& kinds) const;
};

/// invariants[loc][slot], used to certify given polynomials.
using FixedInvariants = std::vector<std::vector<QPoly>>;

class EncodeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

SosProgram build_sos_program(const HybridSystem& h, int d, int e, Mode mode);
SosProgram build_sos_program(const HybridSystem& h, const std::vector<UnsafeTarget>& targets, const EncoderConfig& cfg,
                             const FixedInvariants* fixed = nullptr);

/// Every unsafe item of every location, region ids in order.
std::vector<UnsafeTarget> all_unsafe_targets(const HybridSystem& h);

/// Constant + linear + bilinear expression in the unknowns.
struct BiExpr {
    Rational constant;
    std::map<std::size_t, Rational> linear;
    std::map<std::pair<std::size_t, std::size_t>, Rational> bilinear;

    bool is_zero() const { return constant == 0 && linear.empty() && bilinear.empty(); }
    void add_constant(const Rational& c) { constant += c; }
    void add_linear(std::size_t var, const Rational& c);
    void add_bilinear(std::size_t a, std::size_t b, const Rational& c);
    BiExpr& operator+=(const BiExpr& o);
    BiExpr& operator*=(const Rational& s);
    double evaluate(const std::vector<double>& values) const;
    Rational evaluate(const std::vector<Rational>& values) const;
    friend bool operator==(const BiExpr&, const BiExpr&) = default;
};

/// Coefficient of one monomial in the residual lhs - rhs of one constraint.
struct IdentityRow {
    std::size_t constraint = 0;
    Monomial monomial;
    BiExpr expr;
};

/// Coefficient-matching rows of every constraint; a point satisfies the
/// program's identities iff every row evaluates to zero.
std::vector<IdentityRow> compile_identities(const SosProgram& p);

/// Multiplier polynomial of a term at given values.
QPoly multiplier_polynomial(const SosTerm& t, const std::vector<Rational>& values, std::size_t nvars);
QMat gram_matrix(const SosTerm& t, const std::vector<Rational>& values);
Eigen::MatrixXd gram_matrix(const SosTerm& t, const std::vector<double>& values);
/// Template polynomial at given values.
QPoly template_polynomial(const InvariantTemplate& t, const std::vector<Rational>& values, std::size_t nvars);

/// B(u, v) = A0 + sum u_i A_i + sum v_j A_{m+j} + sum u_i v_j B_ij, block
/// diagonal. Entries are stored per block, upper triangle row-major.
struct BmiBlock {
    std::string label;
    std::size_t side = 0;
    std::vector<BiExpr> entries;
    const BiExpr& at(std::size_t i, std::size_t j) const;
};

struct BmiProblem {
    std::size_t nunknowns = 0;
    std::vector<std::size_t> u;
    std::vector<std::size_t> v;
    std::vector<BmiBlock> blocks;
    /// Unknowns eliminated by coefficient matching and their expressions.
    std::map<std::size_t, BiExpr> pivots;
    /// Coefficient rows no slack entry can absorb; each must vanish.
    std::vector<BiExpr> equalities;

    std::size_t side() const;
    QMat constant_matrix() const;
    QMat linear_matrix(std::size_t var) const;
    QMat bilinear_matrix(std::size_t uvar, std::size_t vvar) const;
    Eigen::MatrixXd evaluate_block(std::size_t b, const std::vector<double>& values) const;
    double min_eigenvalue(const std::vector<double>& values) const;
    /// Largest |equality| at the given values.
    double equality_residual(const std::vector<double>& values) const;
    /// Fill pivot unknowns from the free ones.
    void complete(std::vector<double>& values) const;
};

BmiProblem assemble_bmi(const SosProgram& p);

/// Structured text dump: unknowns, blocks and entries as exact rationals.
std::string dump_bmi(const BmiProblem& b, const SosProgram& p);

}  // namespace exinv
