#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "exinv/checker.hpp"
#include "exinv/solver.hpp"

namespace exinv {

struct RunConfig {
    int d_min = 1;
    int d_max = 2;
    /// Multiplier half-degree range; the multiplier degree bound is 2e.
    int e_min = 1;
    int e_max = 3;
    Integer D = 1000;
    double tau = 1e-10;
    Mode mode = Mode::Bmi;
    int split_depth = 0;
    /// Bisect down to split_depth before solving anything.
    bool split_first = false;
    /// Split axis and cut for every bisection; auto picks the widest range
    /// and its midpoint.
    std::optional<std::size_t> split_axis;
    std::optional<Rational> split_cut;
    std::uint64_t seed = 1;
    std::size_t falsify_budget = 20000;
    SolverConfig solver;

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
};

class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Splits `set` at x_axis = cut into set + (cut - x_axis >= 0) and
/// set + (x_axis - cut >= 0). Without an axis the variable with the widest
/// range over set and `context` is used; without a cut the midpoint of that
/// range. Throws std::invalid_argument when a needed range is unbounded.
std::pair<SemialgebraicSet, SemialgebraicSet> bisect_region(const SemialgebraicSet& set,
                                                            const SemialgebraicSet& context, std::size_t nvars,
                                                            std::optional<std::size_t> axis = {},
                                                            std::optional<Rational> cut = {});

struct RegionNode {
    std::size_t id = 0;
    std::optional<std::size_t> parent;
    std::size_t loc = 0;
    SemialgebraicSet set;
    int depth = 0;
    std::optional<std::size_t> axis;
    Rational cut;
    std::vector<std::size_t> children;
    bool certified = false;
    std::string note;
};

/// A certified leaf region.
struct UnitRecord {
    std::size_t region = 0;
    int degree = 0;
    int e = 0;
    std::string recovery_case;
    Integer denominator;
    UnitCertificate cert;
    SafetyReport report;
};

struct RunResult {
    Verdict verdict = Verdict::Unknown;
    std::vector<RegionNode> regions;
    std::vector<UnitRecord> units;
    std::vector<std::string> messages;
    std::optional<std::vector<Rational>> counterexample;

    int exit_code() const;
};

RunResult run_verification(const HybridSystem& h, const RunConfig& cfg);

/// Conditions of user-supplied invariants, certified with multipliers from
/// the pipeline, escalating the multiplier half-degree over cfg's range.
/// With a non-empty `kinds` only those conditions are encoded
/// and checked, and the verdict stays UNKNOWN.
struct FixedCheck {
    SafetyReport report;
    std::optional<UnitCertificate> cert;
    std::string note;
};
FixedCheck certify_invariants(const HybridSystem& h, const FixedInvariants& invariants, const RunConfig& cfg,
                              const std::vector<ConditionKind>& kinds = {});

/// 64-bit FNV-1a of the canonical model text, as 16 hex digits.
std::string model_hash(const HybridSystem& h);

nlohmann::ordered_json certificate_json(const HybridSystem& h, const RunConfig& cfg, const RunResult& r);
std::string render_run(const HybridSystem& h, const RunResult& r);

struct CheckResult {
    Verdict verdict = Verdict::Unknown;
    bool matches_stored = false;
    std::vector<std::string> messages;
    std::vector<SafetyReport> reports;
};

/// Independent re-check of a certificate file: re-parses the model, checks
/// the hash, rebuilds every unit and runs verify_unit, and checks that the
/// region tree covers every unsafe region through exact midpoint splits.
/// Throws InputError on malformed input.
CheckResult check_certificate(const nlohmann::ordered_json& file);

/// Units of a certificate file (after hash and parse checks).
std::vector<UnitCertificate> load_units(const nlohmann::ordered_json& file, const HybridSystem& h);

}  // namespace exinv
