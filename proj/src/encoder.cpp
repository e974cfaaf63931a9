#include "exinv/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

namespace exinv {

std::string to_string(Mode m) {
    switch (m) {
        case Mode::Bmi: return "bmi";
        case Mode::Lmi: return "lmi";
        case Mode::Conjunction: return "conjunction";
        case Mode::Boundary: return "boundary";
    }
    return "?";
}

std::optional<Mode> parse_mode(std::string_view s) {
    for (Mode m : {Mode::Bmi, Mode::Lmi, Mode::Conjunction, Mode::Boundary})
        if (to_string(m) == s) return m;
    return std::nullopt;
}

std::string to_string(ConditionKind k) {
    switch (k) {
        case ConditionKind::Init: return "init";
        case ConditionKind::Discrete: return "discrete";
        case ConditionKind::Continuous: return "continuous";
        case ConditionKind::Unsafe: return "unsafe";
        case ConditionKind::Boundary: return "boundary";
        case ConditionKind::Disjoint: return "disjoint";
        case ConditionKind::Separation: return "separation";
    }
    return "?";
}

std::optional<ConditionKind> parse_condition_kind(std::string_view s) {
    for (ConditionKind k : {ConditionKind::Init, ConditionKind::Discrete, ConditionKind::Continuous,
                            ConditionKind::Unsafe, ConditionKind::Boundary, ConditionKind::Disjoint,
                            ConditionKind::Separation})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

std::size_t SosTerm::gram_var(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    const std::size_t s = basis.size();
    // Row-major upper triangle: rows before i contribute s + (s-1) + ...
    std::size_t offset = i * s - i * (i - 1) / 2;
    return vars.at(offset + (j - i));
}

InvariantTemplate build_template(const HybridSystem& h, std::size_t loc, int d) {
    if (d < 1) throw std::invalid_argument("template degree must be at least 1");
    InvariantTemplate t;
    t.loc = loc;
    t.degree = d;
    t.basis = monomial_basis(h.nvars(), d);
    for (std::size_t k = 0; k < t.basis.size(); ++k) t.coeffs.push_back(k);
    return t;
}

std::optional<std::size_t> SosProgram::template_index(std::size_t loc, int slot) const {
    for (std::size_t i = 0; i < templates.size(); ++i)
        if (templates[i].loc == loc && templates[i].slot == slot) return i;
    return std::nullopt;
}

std::vector<std::size_t> SosProgram::u_vars() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < unknowns.size(); ++i)
        if (!unknowns[i].bilinear) out.push_back(i);
    return out;
}

std::vector<std::size_t> SosProgram::v_vars() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < unknowns.size(); ++i)
        if (unknowns[i].bilinear) out.push_back(i);
    return out;
}

SosProgram SosProgram::restricted_to(const std::vector<ConditionKind>& kinds) const {
    SosProgram out = *this;
    out.constraints.clear();
    for (const auto& c : constraints)
        if (std::find(kinds.begin(), kinds.end(), c.kind) != kinds.end()) out.constraints.push_back(c);
    return out;
}

// ---------------------------------------------------------------------------

void BiExpr::add_linear(std::size_t var, const Rational& c) {
    if (c == 0) return;
    auto [it, inserted] = linear.try_emplace(var, c);
    if (!inserted) {
        it->second += c;
        if (it->second == 0) linear.erase(it);
    }
}

void BiExpr::add_bilinear(std::size_t a, std::size_t b, const Rational& c) {
    if (c == 0) return;
    if (a > b) std::swap(a, b);
    auto [it, inserted] = bilinear.try_emplace({a, b}, c);
    if (!inserted) {
        it->second += c;
        if (it->second == 0) bilinear.erase(it);
    }
}

BiExpr& BiExpr::operator+=(const BiExpr& o) {
    constant += o.constant;
    for (const auto& [v, c] : o.linear) add_linear(v, c);
    for (const auto& [vv, c] : o.bilinear) add_bilinear(vv.first, vv.second, c);
    return *this;
}

BiExpr& BiExpr::operator*=(const Rational& s) {
    if (s == 0) {
        *this = BiExpr{};
        return *this;
    }
    constant *= s;
    for (auto& [v, c] : linear) c *= s;
    for (auto& [v, c] : bilinear) c *= s;
    return *this;
}

double BiExpr::evaluate(const std::vector<double>& values) const {
    double s = constant.get_d();
    for (const auto& [v, c] : linear) s += c.get_d() * values[v];
    for (const auto& [vv, c] : bilinear) s += c.get_d() * values[vv.first] * values[vv.second];
    return s;
}

Rational BiExpr::evaluate(const std::vector<Rational>& values) const {
    Rational s = constant;
    for (const auto& [v, c] : linear) s += c * values[v];
    for (const auto& [vv, c] : bilinear) s += c * values[vv.first] * values[vv.second];
    return s;
}

// ---------------------------------------------------------------------------
// Program construction

namespace {

QPoly lift(const QPoly& p, std::size_t target, std::size_t offset) {
    if (p.nvars() == target && offset == 0) return p;
    std::vector<std::size_t> map(p.nvars());
    for (std::size_t i = 0; i < map.size(); ++i) map[i] = offset + i;
    return p.embed(target, map);
}

Monomial lift(const Monomial& m, std::size_t target) {
    std::vector<int> e(target, 0);
    for (std::size_t i = 0; i < m.nvars(); ++i) e[i] = m[i];
    return Monomial(std::move(e));
}

int even_up(int d) { return d + (d & 1); }

Unknown make_unknown(Unknown::Role role, bool bilinear = false) {
    Unknown u;
    u.role = role;
    u.bilinear = bilinear;
    return u;
}

struct PendingTerm {
    SosTerm::Kind kind;
    std::string tag;
    std::optional<QPoly> known;
    std::optional<std::size_t> templ;
};

class Builder {
public:
    Builder(const HybridSystem& h, const EncoderConfig& cfg, const FixedInvariants* fixed)
        : h_(h), cfg_(cfg), fixed_(fixed), n_(h.nvars()) {
        prog_.nvars = n_;
        prog_.cfg = cfg;
    }

    SosProgram build(const std::vector<UnsafeTarget>& targets);

private:
    using LhsOp = std::function<QPoly(const QPoly&)>;

    std::size_t add_unknown(Unknown u) {
        prog_.unknowns.push_back(std::move(u));
        return prog_.unknowns.size() - 1;
    }

    void make_templates(int slots);
    const InvariantTemplate& templ(std::size_t loc, int slot) const {
        return prog_.templates[*prog_.template_index(loc, slot)];
    }

    SosConstraint start(ConditionKind kind, std::size_t nvars) {
        SosConstraint c;
        c.kind = kind;
        c.nvars = nvars;
        c.lhs_known = QPoly(nvars);
        pending_.clear();
        return c;
    }

    // lhs += sign * op(template)
    void lhs_template(SosConstraint& c, std::size_t loc, int slot, const LhsOp& op, const Rational& sign) {
        const auto& t = templ(loc, slot);
        if (t.is_fixed()) {
            c.lhs_known += op(*t.fixed) * sign;
            return;
        }
        for (std::size_t k = 0; k < t.basis.size(); ++k) {
            QPoly img = op(QPoly::term(t.basis[k], Rational(1))) * sign;
            if (!img.is_zero()) c.lhs_parts.emplace_back(t.coeffs[k], std::move(img));
        }
    }

    void known_factor(SosTerm::Kind kind, std::string tag, QPoly p) {
        pending_.push_back({kind, std::move(tag), std::move(p), std::nullopt});
    }

    void set_factors(const SemialgebraicSet& s, const std::string& prefix, std::size_t nvars, std::size_t offset = 0) {
        for (std::size_t i = 0; i < s.ge.size(); ++i)
            known_factor(SosTerm::Kind::Sos, prefix + ".ge[" + std::to_string(i) + "]", lift(s.ge[i], nvars, offset));
        for (std::size_t i = 0; i < s.eq.size(); ++i)
            known_factor(SosTerm::Kind::Free, prefix + ".eq[" + std::to_string(i) + "]", lift(s.eq[i], nvars, offset));
    }

    void template_factor(SosTerm::Kind kind, std::size_t loc, int slot, std::size_t nvars) {
        const auto& t = templ(loc, slot);
        std::string tag = "phi[" + std::to_string(slot) + "]";
        if (t.is_fixed())
            pending_.push_back({kind, tag, lift(*t.fixed, nvars, 0), std::nullopt});
        else
            pending_.push_back({kind, tag, std::nullopt, *prog_.template_index(loc, slot)});
    }

    void finish(SosConstraint c, const Rational& eps, bool has_eps);

    const HybridSystem& h_;
    EncoderConfig cfg_;
    const FixedInvariants* fixed_;
    std::size_t n_;
    SosProgram prog_;
    std::vector<PendingTerm> pending_;
};

void Builder::make_templates(int slots) {
    for (std::size_t l = 0; l < h_.locations.size(); ++l) {
        for (int s = 0; s < slots; ++s) {
            InvariantTemplate t;
            t.loc = l;
            t.slot = s;
            if (fixed_) {
                if (l >= fixed_->size() || static_cast<std::size_t>(s) >= (*fixed_)[l].size())
                    throw EncodeError("missing fixed invariant for location '" + h_.locations[l].id + "'");
                const QPoly& p = (*fixed_)[l][static_cast<std::size_t>(s)];
                if (p.nvars() != n_) throw EncodeError("fixed invariant has wrong dimension");
                t.fixed = p;
                t.degree = std::max(p.degree(), 0);
            } else {
                t.degree = cfg_.degree;
                t.basis = monomial_basis(n_, cfg_.degree);
                for (std::size_t k = 0; k < t.basis.size(); ++k) {
                    Unknown u = make_unknown(Unknown::Role::TemplateCoeff);
                    u.owner = prog_.templates.size();
                    u.row = k;
                    u.name = "c" + std::to_string(l) + "." + std::to_string(s) + "[" + std::to_string(k) + "]";
                    t.coeffs.push_back(add_unknown(std::move(u)));
                }
            }
            prog_.templates.push_back(std::move(t));
        }
    }
}

void Builder::finish(SosConstraint c, const Rational& eps, bool has_eps) {
    const std::size_t nv = c.nvars;
    const std::size_t cidx = prog_.constraints.size();

    int lhs_deg = c.lhs_known.degree();
    for (const auto& [v, p] : c.lhs_parts) lhs_deg = std::max(lhs_deg, p.degree());
    int D = std::max(lhs_deg, 2 * cfg_.e);
    for (const auto& pt : pending_) {
        int fd = pt.known ? pt.known->degree() : prog_.templates[*pt.templ].degree;
        D = std::max(D, fd);
    }
    D = std::max(even_up(D), 0);
    c.degree = D;

    // Multipliers other than the slack block.
    std::vector<SosTerm> others;
    for (auto& pt : pending_) {
        int fd = pt.known ? pt.known->degree() : prog_.templates[*pt.templ].degree;
        if (pt.known && pt.known->is_zero()) continue;
        int md = std::min(2 * cfg_.e, D - fd);
        if (pt.kind == SosTerm::Kind::Sos) md -= (md & 1);
        if (md < 0) continue;
        SosTerm t;
        t.kind = pt.kind;
        t.factor = pt.tag;
        t.known = pt.known;
        t.templ = pt.templ;
        t.basis = monomial_basis(nv, pt.kind == SosTerm::Kind::Sos ? md / 2 : md);
        others.push_back(std::move(t));
    }

    // Monomials reachable without the slack block.
    std::set<Monomial, GrlexLess> support;
    for (const auto& [m, q] : c.lhs_known.terms()) support.insert(m);
    for (const auto& [v, p] : c.lhs_parts)
        for (const auto& [m, q] : p.terms()) support.insert(m);
    if (eps != 0 || (has_eps && cfg_.eps_variable)) support.insert(Monomial(nv));
    for (const auto& t : others) {
        std::vector<Monomial> fm;
        if (t.known) {
            for (const auto& [m, q] : t.known->terms()) fm.push_back(m);
        } else {
            for (const auto& m : prog_.templates[*t.templ].basis) fm.push_back(lift(m, nv));
        }
        std::vector<Monomial> mm;
        if (t.kind == SosTerm::Kind::Sos) {
            for (std::size_t i = 0; i < t.basis.size(); ++i)
                for (std::size_t j = i; j < t.basis.size(); ++j) mm.push_back(t.basis[i] * t.basis[j]);
        } else {
            mm = t.basis;
        }
        for (const auto& a : mm)
            for (const auto& b : fm) support.insert(a * b);
    }

    // Slack block; drop basis monomials whose square can only come from the
    // diagonal entry itself (that entry is then forced to zero, and so is its
    // row).
    std::vector<Monomial> sb = monomial_basis(nv, D / 2);
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t i = 0; i < sb.size(); ++i) {
            Monomial sq = sb[i] * sb[i];
            if (support.count(sq)) continue;
            bool other = false;
            for (std::size_t a = 0; a < sb.size() && !other; ++a)
                for (std::size_t b = a; b < sb.size() && !other; ++b)
                    if (!(a == i && b == i) && sb[a] * sb[b] == sq) other = true;
            if (other) continue;
            sb.erase(sb.begin() + static_cast<long>(i));
            changed = true;
            break;
        }
    }
    SosTerm slack;
    slack.kind = SosTerm::Kind::Sos;
    slack.factor = "1";
    slack.known = QPoly::constant(nv, Rational(1));
    slack.basis = std::move(sb);
    slack.slack = true;
    c.terms.push_back(std::move(slack));
    for (auto& t : others) c.terms.push_back(std::move(t));

    for (std::size_t ti = 0; ti < c.terms.size(); ++ti) {
        auto& t = c.terms[ti];
        bool bil = t.templ.has_value();
        std::string base = (t.kind == SosTerm::Kind::Sos ? "W" : "f") + std::to_string(cidx) + "." + std::to_string(ti);
        if (t.kind == SosTerm::Kind::Sos) {
            for (std::size_t i = 0; i < t.basis.size(); ++i)
                for (std::size_t j = i; j < t.basis.size(); ++j) {
                    Unknown u = make_unknown(Unknown::Role::GramEntry, bil);
                    u.owner = cidx;
                    u.term = ti;
                    u.row = i;
                    u.col = j;
                    u.name = base + "[" + std::to_string(i) + "," + std::to_string(j) + "]";
                    t.vars.push_back(add_unknown(std::move(u)));
                }
        } else {
            for (std::size_t k = 0; k < t.basis.size(); ++k) {
                Unknown u = make_unknown(Unknown::Role::FreeCoeff, bil);
                u.owner = cidx;
                u.term = ti;
                u.row = k;
                u.name = base + "[" + std::to_string(k) + "]";
                t.vars.push_back(add_unknown(std::move(u)));
            }
        }
    }
    if (has_eps && cfg_.eps_variable) {
        Unknown u = make_unknown(Unknown::Role::Slack);
        u.owner = cidx;
        u.name = "eps" + std::to_string(cidx);
        c.eps_var = add_unknown(std::move(u));
    } else {
        c.eps = has_eps ? eps : Rational(0);
    }
    prog_.constraints.push_back(std::move(c));
}

SosProgram Builder::build(const std::vector<UnsafeTarget>& targets) {
    const Mode mode = cfg_.mode;
    if (h_.locations.empty()) throw EncodeError("system has no locations");
    if (mode == Mode::Boundary && (h_.locations.size() != 1 || !h_.transitions.empty()))
        throw EncodeError("boundary mode needs a continuous system with one location and no transitions");
    const int slots = mode == Mode::Conjunction ? 2 : 1;
    std::vector<std::optional<FunctionalReset>> resets;
    for (const auto& tr : h_.transitions) {
        resets.push_back(functional_reset(tr, n_));
        if (mode == Mode::Conjunction && !resets.back() && 2 * n_ > cfg_.max_conjunction_vars)
            throw EncodeError("conjunction mode does not support this transition: its reset needs " +
                              std::to_string(2 * n_) + " variables, limit is " +
                              std::to_string(cfg_.max_conjunction_vars));
    }
    for (std::size_t l = 0; l < h_.locations.size(); ++l)
        if (h_.locations[l].flow.size() != n_) throw EncodeError("location '" + h_.locations[l].id + "' has no dynamics");
    make_templates(slots);

    const LhsOp identity = [](const QPoly& p) { return p; };
    const bool bilinear_terms = mode != Mode::Lmi;

    // (i) initial condition
    for (int s = 0; s < slots; ++s) {
        auto c = start(ConditionKind::Init, n_);
        c.loc = h_.init_loc;
        c.slot = s;
        lhs_template(c, h_.init_loc, s, identity, Rational(1));
        set_factors(h_.init, "init", n_);
        finish(std::move(c), 0, false);
    }

    // (ii) discrete consecution
    for (std::size_t ti = 0; ti < h_.transitions.size(); ++ti) {
        const auto& tr = h_.transitions[ti];
        const auto& fr = resets[ti];
        for (int s = 0; s < slots; ++s) {
            std::size_t nv = fr ? n_ : 2 * n_;
            auto c = start(ConditionKind::Discrete, nv);
            c.loc = tr.pre;
            c.transition = ti;
            c.slot = s;
            if (fr) {
                std::vector<QPoly> images = fr->images;
                lhs_template(c, tr.post, s, [images](const QPoly& p) { return p.compose(images); }, Rational(1));
                set_factors(tr.guard, "guard", nv);
                set_factors(fr->rest, "reset.rest", nv);
            } else {
                std::size_t n = n_;
                lhs_template(c, tr.post, s, [n](const QPoly& p) { return lift(p, 2 * n, n); }, Rational(1));
                set_factors(tr.guard, "guard", nv);
                set_factors(tr.reset, "reset", nv);
            }
            if (bilinear_terms)
                for (int s2 = 0; s2 < slots; ++s2) template_factor(SosTerm::Kind::Sos, tr.pre, s2, nv);
            finish(std::move(c), 0, false);
        }
    }

    // (iii) continuous consecution
    for (std::size_t l = 0; l < h_.locations.size(); ++l) {
        const auto& f = h_.locations[l].flow;
        for (int s = 0; s < slots; ++s) {
            auto c = start(ConditionKind::Continuous, n_);
            c.loc = l;
            c.slot = s;
            lhs_template(c, l, s, [&f](const QPoly& p) { return lie_derivative(p, f); }, Rational(1));
            set_factors(h_.locations[l].inv, "inv", n_);
            if (bilinear_terms) {
                template_factor(cfg_.sos_template_multiplier ? SosTerm::Kind::Sos : SosTerm::Kind::Free, l, s, n_);
                if (slots == 2) template_factor(SosTerm::Kind::Sos, l, 1 - s, n_);
            }
            finish(std::move(c), mode == Mode::Lmi ? cfg_.eps_continuous_lmi : cfg_.eps_continuous, true);
        }
    }

    // (iv) separation from the unsafe regions
    for (const auto& tg : targets) {
        if (tg.loc >= h_.locations.size()) throw EncodeError("unsafe target refers to an unknown location");
        const auto& inv = h_.locations[tg.loc].inv;
        if (mode == Mode::Conjunction) {
            auto c = start(ConditionKind::Separation, n_);
            c.loc = tg.loc;
            c.region = tg.region;
            set_factors(tg.set, "unsafe", n_);
            if (cfg_.unsafe_within_inv) set_factors(inv, "inv", n_);
            for (int s = 0; s < slots; ++s) template_factor(SosTerm::Kind::Sos, tg.loc, s, n_);
            finish(std::move(c), cfg_.eps_unsafe, true);
            continue;
        }
        if (mode == Mode::Boundary && tg.set.eq.empty() && !tg.set.ge.empty()) {
            for (std::size_t j = 0; j < tg.set.ge.size(); ++j) {
                auto c = start(ConditionKind::Boundary, n_);
                c.loc = tg.loc;
                c.region = tg.region;
                c.conjunct = j;
                lhs_template(c, tg.loc, 0, identity, Rational(-1));
                for (std::size_t i = 0; i < tg.set.ge.size(); ++i)
                    known_factor(i == j ? SosTerm::Kind::Free : SosTerm::Kind::Sos,
                                 "unsafe.ge[" + std::to_string(i) + "]", tg.set.ge[i]);
                if (cfg_.unsafe_within_inv) set_factors(inv, "inv", n_);
                finish(std::move(c), cfg_.eps_unsafe, true);
            }
            auto c = start(ConditionKind::Disjoint, n_);
            c.loc = tg.loc;
            c.region = tg.region;
            set_factors(h_.init, "init", n_);
            set_factors(tg.set, "unsafe", n_);
            finish(std::move(c), cfg_.eps_unsafe, true);
            continue;
        }
        auto c = start(ConditionKind::Unsafe, n_);
        c.loc = tg.loc;
        c.region = tg.region;
        lhs_template(c, tg.loc, 0, identity, Rational(-1));
        set_factors(tg.set, "unsafe", n_);
        if (cfg_.unsafe_within_inv) set_factors(inv, "inv", n_);
        finish(std::move(c), cfg_.eps_unsafe, true);
    }
    return std::move(prog_);
}

}  // namespace

std::vector<UnsafeTarget> all_unsafe_targets(const HybridSystem& h) {
    std::vector<UnsafeTarget> out;
    for (std::size_t l = 0; l < h.locations.size(); ++l)
        for (const auto& u : h.locations[l].unsafe) out.push_back({l, u, out.size()});
    return out;
}

SosProgram build_sos_program(const HybridSystem& h, int d, int e, Mode mode) {
    EncoderConfig cfg;
    cfg.degree = d;
    cfg.e = e;
    cfg.mode = mode;
    return build_sos_program(h, all_unsafe_targets(h), cfg);
}

SosProgram build_sos_program(const HybridSystem& h, const std::vector<UnsafeTarget>& targets, const EncoderConfig& cfg,
                             const FixedInvariants* fixed) {
    if (!fixed && cfg.degree < 1) throw EncodeError("invariant degree must be at least 1");
    if (cfg.e < 0) throw EncodeError("multiplier degree bound must be non-negative");
    Builder b(h, cfg, fixed);
    return b.build(targets);
}

// ---------------------------------------------------------------------------
// Identities

namespace {

// Parts (unknown id, polynomial) of a template lifted into nv variables.
std::vector<std::pair<std::size_t, QPoly>> template_parts(const InvariantTemplate& t, std::size_t nv) {
    std::vector<std::pair<std::size_t, QPoly>> out;
    for (std::size_t k = 0; k < t.basis.size(); ++k)
        out.emplace_back(t.coeffs[k], QPoly::term(lift(t.basis[k], nv), Rational(1)));
    return out;
}

std::vector<std::pair<std::size_t, QPoly>> multiplier_parts(const SosTerm& t, std::size_t nv) {
    std::vector<std::pair<std::size_t, QPoly>> out;
    (void)nv;
    if (t.kind == SosTerm::Kind::Sos) {
        for (std::size_t i = 0; i < t.basis.size(); ++i)
            for (std::size_t j = i; j < t.basis.size(); ++j)
                out.emplace_back(t.gram_var(i, j), QPoly::term(t.basis[i] * t.basis[j], Rational(i == j ? 1 : 2)));
    } else {
        for (std::size_t k = 0; k < t.basis.size(); ++k) out.emplace_back(t.vars[k], QPoly::term(t.basis[k], Rational(1)));
    }
    return out;
}

}  // namespace

std::vector<IdentityRow> compile_identities(const SosProgram& p) {
    std::vector<IdentityRow> rows;
    for (std::size_t ci = 0; ci < p.constraints.size(); ++ci) {
        const auto& c = p.constraints[ci];
        std::map<Monomial, BiExpr, GrlexLess> acc;
        for (const auto& [m, q] : c.lhs_known.terms()) acc[m].add_constant(q);
        for (const auto& [v, poly] : c.lhs_parts)
            for (const auto& [m, q] : poly.terms()) acc[m].add_linear(v, q);
        for (const auto& t : c.terms) {
            auto mparts = multiplier_parts(t, c.nvars);
            if (t.known) {
                for (const auto& [v, mp] : mparts) {
                    QPoly prod = mp * *t.known;
                    for (const auto& [m, q] : prod.terms()) acc[m].add_linear(v, Rational(-q));
                }
            } else {
                auto tparts = template_parts(p.templates[*t.templ], c.nvars);
                for (const auto& [v, mp] : mparts)
                    for (const auto& [cv, tp] : tparts) {
                        QPoly prod = mp * tp;
                        for (const auto& [m, q] : prod.terms()) acc[m].add_bilinear(v, cv, Rational(-q));
                    }
            }
        }
        Monomial one(c.nvars);
        if (c.eps_var)
            acc[one].add_linear(*c.eps_var, Rational(-1));
        else if (c.eps != 0)
            acc[one].add_constant(Rational(-c.eps));
        for (auto& [m, e] : acc)
            if (!e.is_zero()) rows.push_back({ci, m, std::move(e)});
    }
    return rows;
}

QMat gram_matrix(const SosTerm& t, const std::vector<Rational>& values) {
    const std::size_t s = t.basis.size();
    QMat w(s, s);
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = i; j < s; ++j) w(i, j) = w(j, i) = values[t.gram_var(i, j)];
    return w;
}

Eigen::MatrixXd gram_matrix(const SosTerm& t, const std::vector<double>& values) {
    const auto s = static_cast<Eigen::Index>(t.basis.size());
    Eigen::MatrixXd w(s, s);
    for (Eigen::Index i = 0; i < s; ++i)
        for (Eigen::Index j = i; j < s; ++j)
            w(i, j) = w(j, i) = values[t.gram_var(static_cast<std::size_t>(i), static_cast<std::size_t>(j))];
    return w;
}

QPoly multiplier_polynomial(const SosTerm& t, const std::vector<Rational>& values, std::size_t nvars) {
    if (t.kind == SosTerm::Kind::Sos) {
        if (t.basis.empty()) return QPoly(nvars);
        return gram_expand(GramForm<Rational>{t.basis, gram_matrix(t, values)});
    }
    QPoly r(nvars);
    for (std::size_t k = 0; k < t.basis.size(); ++k) r.add_term(t.basis[k], values[t.vars[k]]);
    return r;
}

QPoly template_polynomial(const InvariantTemplate& t, const std::vector<Rational>& values, std::size_t nvars) {
    if (t.is_fixed()) return *t.fixed;
    QPoly r(nvars);
    for (std::size_t k = 0; k < t.basis.size(); ++k) r.add_term(t.basis[k], values[t.coeffs[k]]);
    return r;
}

// ---------------------------------------------------------------------------
// BMI assembly

const BiExpr& BmiBlock::at(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return entries.at(i * side - i * (i - 1) / 2 + (j - i));
}

std::size_t BmiProblem::side() const {
    std::size_t s = 0;
    for (const auto& b : blocks) s += b.side;
    return s;
}

namespace {

template <class Pick>
QMat block_diagonal(const BmiProblem& p, Pick pick) {
    QMat m(p.side(), p.side());
    std::size_t off = 0;
    for (const auto& b : p.blocks) {
        for (std::size_t i = 0; i < b.side; ++i)
            for (std::size_t j = 0; j < b.side; ++j) m(off + i, off + j) = pick(b.at(i, j));
        off += b.side;
    }
    return m;
}

}  // namespace

QMat BmiProblem::constant_matrix() const {
    return block_diagonal(*this, [](const BiExpr& e) { return e.constant; });
}

QMat BmiProblem::linear_matrix(std::size_t var) const {
    return block_diagonal(*this, [var](const BiExpr& e) {
        auto it = e.linear.find(var);
        return it == e.linear.end() ? Rational(0) : it->second;
    });
}

QMat BmiProblem::bilinear_matrix(std::size_t a, std::size_t b) const {
    auto key = std::minmax(a, b);
    return block_diagonal(*this, [key](const BiExpr& e) {
        auto it = e.bilinear.find({key.first, key.second});
        return it == e.bilinear.end() ? Rational(0) : it->second;
    });
}

Eigen::MatrixXd BmiProblem::evaluate_block(std::size_t bi, const std::vector<double>& values) const {
    const auto& b = blocks.at(bi);
    const auto s = static_cast<Eigen::Index>(b.side);
    Eigen::MatrixXd m(s, s);
    for (Eigen::Index i = 0; i < s; ++i)
        for (Eigen::Index j = i; j < s; ++j)
            m(i, j) = m(j, i) = b.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)).evaluate(values);
    return m;
}

double BmiProblem::min_eigenvalue(const std::vector<double>& values) const {
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < blocks.size(); ++b) lo = std::min(lo, exinv::min_eigenvalue(evaluate_block(b, values)));
    return lo;
}

double BmiProblem::equality_residual(const std::vector<double>& values) const {
    double r = 0;
    for (const auto& e : equalities) r = std::max(r, std::abs(e.evaluate(values)));
    return r;
}

void BmiProblem::complete(std::vector<double>& values) const {
    for (const auto& [var, e] : pivots) values[var] = e.evaluate(values);
}

BmiProblem assemble_bmi(const SosProgram& p) {
    BmiProblem out;
    out.nunknowns = p.unknowns.size();
    auto rows = compile_identities(p);

    // Slack-block entries per (constraint, monomial).
    std::vector<std::map<Monomial, std::vector<std::pair<std::size_t, std::size_t>>, GrlexLess>> slack_entries(
        p.constraints.size());
    for (std::size_t ci = 0; ci < p.constraints.size(); ++ci) {
        const auto& c = p.constraints[ci];
        for (const auto& t : c.terms) {
            if (!t.slack) continue;
            for (std::size_t i = 0; i < t.basis.size(); ++i)
                for (std::size_t j = i; j < t.basis.size(); ++j)
                    slack_entries[ci][t.basis[i] * t.basis[j]].emplace_back(i, j);
        }
    }

    for (const auto& row : rows) {
        const auto& c = p.constraints[row.constraint];
        const SosTerm* slack = nullptr;
        for (const auto& t : c.terms)
            if (t.slack) slack = &t;
        auto it = slack_entries[row.constraint].find(row.monomial);
        if (!slack || it == slack_entries[row.constraint].end()) {
            if (row.expr.linear.empty() && row.expr.bilinear.empty())
                throw EncodeError("inconsistent coefficient-matching system: " + to_string(c.kind) + " condition, monomial " +
                                  row.monomial.to_string(default_names(c.nvars)) + " has a nonzero known coefficient");
            out.equalities.push_back(row.expr);
            continue;
        }
        std::pair<std::size_t, std::size_t> pick = it->second.front();
        for (const auto& ij : it->second)
            if (ij.first == ij.second) {
                pick = ij;
                break;
            }
        std::size_t pv = slack->gram_var(pick.first, pick.second);
        BiExpr rest = row.expr;
        Rational w = rest.linear.at(pv);
        rest.linear.erase(pv);
        rest *= Rational(-1 / w);
        out.pivots.emplace(pv, std::move(rest));
    }

    for (std::size_t ci = 0; ci < p.constraints.size(); ++ci) {
        const auto& c = p.constraints[ci];
        std::vector<const SosTerm*> order;
        for (const auto& t : c.terms)
            if (!t.slack && t.kind == SosTerm::Kind::Sos) order.push_back(&t);
        for (const auto& t : c.terms)
            if (t.slack) order.push_back(&t);
        for (const SosTerm* t : order) {
            if (t->basis.empty()) continue;
            BmiBlock b;
            b.side = t->basis.size();
            b.label = to_string(c.kind) + "#" + std::to_string(ci) + ":" + (t->slack ? "slack" : t->factor);
            for (std::size_t i = 0; i < b.side; ++i)
                for (std::size_t j = i; j < b.side; ++j) {
                    std::size_t var = t->gram_var(i, j);
                    auto pit = out.pivots.find(var);
                    if (pit != out.pivots.end()) {
                        b.entries.push_back(pit->second);
                    } else {
                        BiExpr e;
                        e.add_linear(var, Rational(1));
                        b.entries.push_back(std::move(e));
                    }
                }
            out.blocks.push_back(std::move(b));
        }
        if (c.eps_var) {
            BmiBlock b;
            b.side = 1;
            b.label = to_string(c.kind) + "#" + std::to_string(ci) + ":eps";
            BiExpr e;
            e.add_linear(*c.eps_var, Rational(1));
            b.entries.push_back(std::move(e));
            out.blocks.push_back(std::move(b));
        }
    }

    std::set<std::size_t> used;
    auto use = [&](const BiExpr& e) {
        for (const auto& [v, c] : e.linear) used.insert(v);
        for (const auto& [vv, c] : e.bilinear) {
            used.insert(vv.first);
            used.insert(vv.second);
        }
    };
    for (const auto& b : out.blocks)
        for (const auto& e : b.entries) use(e);
    for (const auto& e : out.equalities) use(e);
    for (std::size_t i : used) (p.unknowns[i].bilinear ? out.v : out.u).push_back(i);
    return out;
}

std::string dump_bmi(const BmiProblem& b, const SosProgram& p) {
    std::ostringstream os;
    os << "bmi side " << b.side() << " blocks " << b.blocks.size() << " u " << b.u.size() << " v " << b.v.size() << "\n";
    auto name = [&](std::size_t v) { return p.unknowns[v].name; };
    os << "u";
    for (auto v : b.u) os << " " << name(v);
    os << "\nv";
    for (auto v : b.v) os << " " << name(v);
    os << "\n";
    for (const auto& [var, e] : b.pivots) {
        (void)e;
        os << "eliminated " << name(var) << "\n";
    }
    auto expr = [&](const BiExpr& e) {
        if (e.constant != 0) os << " " << to_string(e.constant);
        for (const auto& [v, c] : e.linear) os << " " << (c >= 0 ? "+" : "") << to_string(c) << "*" << name(v);
        for (const auto& [vv, c] : e.bilinear)
            os << " " << (c >= 0 ? "+" : "") << to_string(c) << "*" << name(vv.first) << "*" << name(vv.second);
        os << "\n";
    };
    for (const auto& e : b.equalities) {
        os << "equality :";
        expr(e);
    }
    for (std::size_t bi = 0; bi < b.blocks.size(); ++bi) {
        const auto& blk = b.blocks[bi];
        os << "block " << bi << " " << blk.label << " side " << blk.side << "\n";
        for (std::size_t i = 0; i < blk.side; ++i)
            for (std::size_t j = i; j < blk.side; ++j) {
                const auto& e = blk.at(i, j);
                if (e.is_zero()) continue;
                os << "  " << i << " " << j << " :";
                expr(e);
            }
    }
    return os.str();
}

}  // namespace exinv
