#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "exinv/polynomial.hpp"

namespace exinv {

/// {x : p(x) >= 0 for p in ge, q(x) = 0 for q in eq}. Empty lists denote the
/// whole space.
struct SemialgebraicSet {
    std::vector<QPoly> ge;
    std::vector<QPoly> eq;

    bool is_universe() const { return ge.empty() && eq.empty(); }
    bool contains(std::span<const Rational> point) const;
    friend bool operator==(const SemialgebraicSet&, const SemialgebraicSet&) = default;
};

/// Reset relations live over 2n variables: x1..xn followed by x1'..xn'.
struct Transition {
    std::size_t pre = 0;
    std::size_t post = 0;
    SemialgebraicSet guard;
    SemialgebraicSet reset;
    friend bool operator==(const Transition&, const Transition&) = default;
};

struct Location {
    std::string id;
    VectorField<Rational> flow;
    SemialgebraicSet inv;
    /// Unsafe regions; several entries describe a union.
    std::vector<SemialgebraicSet> unsafe;
    friend bool operator==(const Location&, const Location&) = default;
};

struct HybridSystem {
    std::string name;
    std::vector<std::string> vars;
    std::vector<Location> locations;
    std::vector<Transition> transitions;
    SemialgebraicSet init;
    std::size_t init_loc = 0;

    std::size_t nvars() const { return vars.size(); }
    std::optional<std::size_t> location_index(std::string_view id) const;
    /// x1..xn, x1'..xn'
    std::vector<std::string> primed_names() const;
    friend bool operator==(const HybridSystem&, const HybridSystem&) = default;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, int line, int column)
        : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
          line_(line), column_(column) {}
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

/// Parses the line-oriented model language. Decimal literals become exact
/// rationals. A transition without a reset keeps every variable unchanged.
/// Throws ParseError on syntax errors, unknown variables or locations and
/// non-polynomial expressions.
HybridSystem parse_system(std::string_view text);

/// Parses a single polynomial over the given variable names (primed names are
/// allowed when listed).
QPoly parse_polynomial(std::string_view text, const std::vector<std::string>& names);

/// Canonical text form accepted by parse_system.
std::string render_system(const HybridSystem& h);
std::string render_set(const SemialgebraicSet& s, const std::vector<std::string>& names);

struct Diagnostic {
    enum class Severity { Error, Warning };
    Severity severity;
    std::string message;
};

/// Structural checks plus a sampled check that the initial set lies inside
/// the invariant of the initial location.
std::vector<Diagnostic> validate_system(const HybridSystem& h, std::uint64_t seed = 1, int samples = 2000);

/// Rational points drawn from a box and repaired onto linear equalities;
/// only points that lie in `set` exactly are returned.
std::vector<std::vector<Rational>> sample_set(const SemialgebraicSet& set, std::size_t nvars, std::mt19937_64& rng,
                                              int attempts, const Rational& radius);

/// Axis-aligned bounds implied by linear one-variable conjuncts of the set;
/// nullopt where a side is unbounded.
struct Interval {
    std::optional<Rational> lo;
    std::optional<Rational> hi;
};
std::vector<Interval> box_bounds(const SemialgebraicSet& set, std::size_t nvars);

/// A reset whose equalities determine every x_i' as a polynomial in x.
/// `rest` holds the remaining reset conjuncts with x' substituted, over n
/// variables.
struct FunctionalReset {
    std::vector<QPoly> images;
    SemialgebraicSet rest;
};
std::optional<FunctionalReset> functional_reset(const Transition& t, std::size_t nvars);

/// x_i' = x_i for every variable.
SemialgebraicSet identity_reset(std::size_t nvars);

}  // namespace exinv
