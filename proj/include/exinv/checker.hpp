#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "exinv/certificate.hpp"

namespace exinv {

/// P W P^T = L D L^T with P given as `perm` (row k of P W P^T is row
/// perm[k] of W).
struct LdltResult {
    std::vector<std::size_t> perm;
    QMat L;
    std::vector<Rational> D;
    bool psd = false;
    /// False when elimination stopped at a zero pivot with a nonzero row.
    bool complete = false;
};

/// Exact pivoted LDL^T; throws std::invalid_argument on non-symmetric input.
LdltResult psd_exact(const QMat& w);

struct IdentityReport {
    bool ok = false;
    /// lhs - rhs per constraint.
    std::vector<QPoly> residuals;
};

/// Expands every constraint at exact values and compares both sides.
IdentityReport identity_check(const SosProgram& prog, const std::vector<Rational>& values);

// ---------------------------------------------------------------------------
// Self-contained certificates

/// One product multiplier * factor. The factor is named by a tag that the
/// checker resolves against the model ("1", "init.ge[0]", "guard.eq[1]",
/// "reset.rest.ge[0]", "inv.ge[0]", "unsafe.ge[2]", "phi[0]", ...).
struct TermCertificate {
    std::string factor;
    bool sos = true;
    std::vector<Monomial> basis;
    /// Gram matrix over `basis` when sos.
    QMat gram;
    /// Multiplier polynomial when not sos.
    QPoly free;
};

struct ConditionCertificate {
    ConditionKind kind = ConditionKind::Init;
    std::size_t loc = 0;
    std::size_t transition = 0;
    std::size_t region = 0;
    std::size_t conjunct = 0;
    int slot = 0;
    std::size_t nvars = 0;
    std::vector<TermCertificate> terms;
    Rational eps = 0;
};

/// Invariants of every location plus the product certificates of every
/// condition, for one set of unsafe targets.
struct UnitCertificate {
    Mode mode = Mode::Bmi;
    /// invariants[loc][slot]; the certified set is the conjunction of
    /// invariant >= 0 over the slots.
    std::vector<std::vector<QPoly>> invariants;
    std::vector<UnsafeTarget> targets;
    std::vector<ConditionCertificate> conditions;
};

UnitCertificate extract_certificate(const SosProgram& prog, const std::vector<Rational>& values,
                                    const std::vector<UnsafeTarget>& targets);

// ---------------------------------------------------------------------------
// Falsification

/// ge >= 0 and eq = 0 imply consequent >= 0 (> 0 when strict).
struct Implication {
    std::size_t nvars = 0;
    std::vector<QPoly> ge;
    std::vector<QPoly> eq;
    QPoly consequent;
    bool strict = false;
};

struct FalsifyConfig {
    std::size_t budget = 20000;
    std::uint64_t seed = 1;
    /// Sampling half-width for variables without bounds in the antecedent.
    Rational radius = 10;
};

/// First sample point found in the antecedent (checked exactly) that violates
/// the consequent exactly. Tries the origin and the box center, then dyadic
/// grids, box faces and random rationals with denominator <= 2^10.
std::optional<std::vector<Rational>> falsify(const Implication& imp, const FalsifyConfig& cfg);

/// The implication a condition stands for, built from the model and the
/// invariants alone.
Implication condition_implication(const HybridSystem& h, const UnitCertificate& unit, const ConditionCertificate& c);

// ---------------------------------------------------------------------------
// Safety

enum class Verdict { Safe, Falsified, Unknown };
std::string to_string(Verdict v);

enum class ConditionStatus { Certified, Falsified, Unknown };
std::string to_string(ConditionStatus s);

struct ConditionReport {
    ConditionKind kind = ConditionKind::Init;
    std::size_t loc = 0;
    std::size_t transition = 0;
    std::size_t region = 0;
    std::size_t conjunct = 0;
    int slot = 0;
    ConditionStatus status = ConditionStatus::Unknown;
    /// Which slack carried strictness, or why certification failed.
    std::string detail;
    std::optional<std::vector<Rational>> counterexample;
};

struct SafetyReport {
    Verdict verdict = Verdict::Unknown;
    std::vector<std::vector<QPoly>> invariants;
    std::vector<ConditionReport> conditions;
    std::vector<std::string> diagnostics;
    std::uint64_t seed = 0;

    std::string render(const HybridSystem& h) const;
};

struct CheckConfig {
    /// Run the falsifier on conditions that fail certification.
    bool falsify = true;
    FalsifyConfig falsifier;
    /// Check only these condition kinds (all when empty). A partial check
    /// never yields SAFE.
    std::vector<ConditionKind> kinds;
};

/// Every condition required for the unit's mode and targets must be present
/// and certified: exact identity, exactly PSD Gram matrices, factors resolved
/// from the model, eps > 0 for strict conditions. A continuous condition
/// with eps = 0 is accepted when it uses no invariant factor (the derivative
/// is then nonnegative on the whole domain).
SafetyReport verify_unit(const HybridSystem& h, const UnitCertificate& unit, const CheckConfig& cfg = {});

SafetyReport verify_safety(const HybridSystem& h, const SosProgram& prog, const std::vector<Rational>& values,
                           const std::vector<UnsafeTarget>& targets, const CheckConfig& cfg = {});

}  // namespace exinv
