#include "exinv/checker.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

namespace exinv {

LdltResult psd_exact(const QMat& w) {
    if (!w.is_symmetric()) throw std::invalid_argument("psd_exact needs a symmetric matrix");
    const std::size_t n = w.rows();
    LdltResult r;
    QMat a = w;
    r.L = QMat::identity(n);
    r.D.assign(n, Rational(0));
    r.perm.resize(n);
    for (std::size_t i = 0; i < n; ++i) r.perm[i] = i;
    r.psd = true;
    r.complete = true;

    auto swap_index = [&](std::size_t k, std::size_t p) {
        if (k == p) return;
        for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
        for (std::size_t i = 0; i < n; ++i) std::swap(a(i, k), a(i, p));
        std::swap(r.perm[k], r.perm[p]);
        for (std::size_t j = 0; j < k; ++j) std::swap(r.L(k, j), r.L(p, j));
    };

    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (a(i, i) > a(p, p)) p = i;
        if (a(p, p) <= 0) {
            bool zero_rest = true;
            for (std::size_t i = k; i < n && zero_rest; ++i)
                for (std::size_t j = k; j < n; ++j)
                    if (a(i, j) != 0) {
                        zero_rest = false;
                        break;
                    }
            if (zero_rest) break;
            r.psd = false;
            // Keep factoring through a negative pivot when there is one.
            p = n;
            for (std::size_t i = k; i < n; ++i)
                if (a(i, i) != 0) {
                    p = i;
                    break;
                }
            if (p == n) {
                r.complete = false;
                break;
            }
        }
        swap_index(k, p);
        r.D[k] = a(k, k);
        for (std::size_t i = k + 1; i < n; ++i) r.L(i, k) = a(i, k) / r.D[k];
        for (std::size_t i = k + 1; i < n; ++i) {
            if (r.L(i, k) == 0) continue;
            for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= r.L(i, k) * a(k, j);
        }
    }
    return r;
}

namespace {

QPoly lift_to(const QPoly& p, std::size_t target) {
    if (p.nvars() == target) return p;
    std::vector<std::size_t> map(p.nvars());
    for (std::size_t i = 0; i < map.size(); ++i) map[i] = i;
    return p.embed(target, map);
}

}  // namespace

IdentityReport identity_check(const SosProgram& prog, const std::vector<Rational>& values) {
    if (values.size() != prog.unknowns.size()) throw std::invalid_argument("values do not match the program's unknowns");
    IdentityReport rep;
    rep.ok = true;
    for (const auto& c : prog.constraints) {
        QPoly res = c.lhs_known;
        for (const auto& [v, p] : c.lhs_parts) res += p * values[v];
        for (const auto& t : c.terms) {
            QPoly factor = t.known ? *t.known : lift_to(template_polynomial(prog.templates[*t.templ], values, prog.nvars), c.nvars);
            res -= multiplier_polynomial(t, values, c.nvars) * factor;
        }
        Rational eps = c.eps_var ? values[*c.eps_var] : c.eps;
        res -= QPoly::constant(c.nvars, eps);
        if (!res.is_zero()) rep.ok = false;
        rep.residuals.push_back(std::move(res));
    }
    return rep;
}

UnitCertificate extract_certificate(const SosProgram& prog, const std::vector<Rational>& values,
                                    const std::vector<UnsafeTarget>& targets) {
    UnitCertificate u;
    u.mode = prog.cfg.mode;
    u.targets = targets;
    for (const auto& t : prog.templates) {
        if (u.invariants.size() <= t.loc) u.invariants.resize(t.loc + 1);
        auto& slots = u.invariants[t.loc];
        if (slots.size() <= static_cast<std::size_t>(t.slot)) slots.resize(static_cast<std::size_t>(t.slot) + 1);
        slots[static_cast<std::size_t>(t.slot)] = template_polynomial(t, values, prog.nvars);
    }
    for (const auto& c : prog.constraints) {
        ConditionCertificate cc;
        cc.kind = c.kind;
        cc.loc = c.loc;
        cc.transition = c.transition;
        cc.region = c.region;
        cc.conjunct = c.conjunct;
        cc.slot = c.slot;
        cc.nvars = c.nvars;
        cc.eps = c.eps_var ? values[*c.eps_var] : c.eps;
        for (const auto& t : c.terms) {
            if (t.basis.empty()) continue;
            TermCertificate tc;
            tc.factor = t.factor;
            tc.sos = t.kind == SosTerm::Kind::Sos;
            tc.basis = t.basis;
            if (tc.sos)
                tc.gram = gram_matrix(t, values);
            else
                tc.free = multiplier_polynomial(t, values, c.nvars);
            cc.terms.push_back(std::move(tc));
        }
        u.conditions.push_back(std::move(cc));
    }
    return u;
}

// ---------------------------------------------------------------------------
// Condition derivation

namespace {

struct Factor {
    QPoly poly;
    bool sos_only = true;
    bool invariant = false;
};

struct Derived {
    std::size_t nvars = 0;
    QPoly lhs;
    std::map<std::string, Factor> factors;
    std::vector<QPoly> ge;
    std::vector<QPoly> eq;
    bool strict = false;
    std::string error;
};

const UnsafeTarget* find_target(const UnitCertificate& unit, std::size_t region) {
    for (const auto& t : unit.targets)
        if (t.region == region) return &t;
    return nullptr;
}

Derived derive(const HybridSystem& h, const UnitCertificate& unit, const ConditionCertificate& c) {
    Derived d;
    const std::size_t n = h.nvars();
    const std::size_t slots = unit.mode == Mode::Conjunction ? 2 : 1;
    auto fail = [&](std::string msg) {
        d.error = std::move(msg);
        return d;
    };
    auto phi = [&](std::size_t loc, std::size_t slot) -> const QPoly& { return unit.invariants.at(loc).at(slot); };
    auto add_set = [&](const std::string& prefix, const SemialgebraicSet& s, std::size_t nv) {
        for (std::size_t i = 0; i < s.ge.size(); ++i) {
            QPoly p = lift_to(s.ge[i], nv);
            d.factors[prefix + ".ge[" + std::to_string(i) + "]"] = {p, true, false};
            d.ge.push_back(std::move(p));
        }
        for (std::size_t i = 0; i < s.eq.size(); ++i) {
            QPoly p = lift_to(s.eq[i], nv);
            d.factors[prefix + ".eq[" + std::to_string(i) + "]"] = {p, false, false};
            d.eq.push_back(std::move(p));
        }
    };
    auto add_one = [&](std::size_t nv) { d.factors["1"] = {QPoly::constant(nv, Rational(1)), true, false}; };
    const auto s = static_cast<std::size_t>(c.slot);
    if (s >= slots) return fail("slot out of range");

    switch (c.kind) {
    case ConditionKind::Init:
        d.nvars = n;
        d.lhs = phi(h.init_loc, s);
        add_set("init", h.init, n);
        break;
    case ConditionKind::Discrete: {
        if (c.transition >= h.transitions.size()) return fail("unknown transition");
        const auto& tr = h.transitions[c.transition];
        if (auto fr = functional_reset(tr, n)) {
            d.nvars = n;
            d.lhs = phi(tr.post, s).compose(fr->images);
            add_set("guard", tr.guard, n);
            add_set("reset.rest", fr->rest, n);
        } else {
            d.nvars = 2 * n;
            std::vector<std::size_t> map(n);
            for (std::size_t i = 0; i < n; ++i) map[i] = n + i;
            d.lhs = phi(tr.post, s).embed(2 * n, map);
            add_set("guard", tr.guard, 2 * n);
            add_set("reset", tr.reset, 2 * n);
        }
        for (std::size_t s2 = 0; s2 < slots; ++s2) {
            QPoly p = lift_to(phi(tr.pre, s2), d.nvars);
            d.factors["phi[" + std::to_string(s2) + "]"] = {p, true, true};
            d.ge.push_back(std::move(p));
        }
        break;
    }
    case ConditionKind::Continuous: {
        if (c.loc >= h.locations.size()) return fail("unknown location");
        const auto& loc = h.locations[c.loc];
        d.nvars = n;
        d.lhs = lie_derivative(phi(c.loc, s), loc.flow);
        d.strict = true;
        add_set("inv", loc.inv, n);
        d.factors["phi[" + std::to_string(s) + "]"] = {phi(c.loc, s), false, true};
        d.eq.push_back(phi(c.loc, s));
        if (slots == 2) {
            d.factors["phi[" + std::to_string(1 - s) + "]"] = {phi(c.loc, 1 - s), true, true};
            d.ge.push_back(phi(c.loc, 1 - s));
        }
        break;
    }
    case ConditionKind::Unsafe:
    case ConditionKind::Separation:
    case ConditionKind::Boundary:
    case ConditionKind::Disjoint: {
        const UnsafeTarget* tg = find_target(unit, c.region);
        if (!tg) return fail("no unsafe target with region " + std::to_string(c.region));
        if (tg->loc >= h.locations.size()) return fail("unsafe target refers to an unknown location");
        d.nvars = n;
        d.strict = true;
        const auto& inv = h.locations[tg->loc].inv;
        if (c.kind == ConditionKind::Unsafe) {
            d.lhs = -phi(tg->loc, 0);
            add_set("unsafe", tg->set, n);
            add_set("inv", inv, n);
        } else if (c.kind == ConditionKind::Separation) {
            d.lhs = QPoly(n);
            add_set("unsafe", tg->set, n);
            add_set("inv", inv, n);
            for (std::size_t s2 = 0; s2 < slots; ++s2) {
                d.factors["phi[" + std::to_string(s2) + "]"] = {phi(tg->loc, s2), true, true};
                d.ge.push_back(phi(tg->loc, s2));
            }
        } else if (c.kind == ConditionKind::Boundary) {
            if (c.conjunct >= tg->set.ge.size() || !tg->set.eq.empty()) return fail("boundary piece out of range");
            d.lhs = -phi(tg->loc, 0);
            for (std::size_t i = 0; i < tg->set.ge.size(); ++i) {
                bool on = i == c.conjunct;
                d.factors["unsafe.ge[" + std::to_string(i) + "]"] = {tg->set.ge[i], !on, false};
                (on ? d.eq : d.ge).push_back(tg->set.ge[i]);
            }
            add_set("inv", inv, n);
        } else {
            d.lhs = QPoly(n);
            add_set("init", h.init, n);
            add_set("unsafe", tg->set, n);
        }
        break;
    }
    }
    add_one(d.nvars);
    if (c.nvars != d.nvars) return fail("condition has " + std::to_string(c.nvars) + " variables, expected " +
                                        std::to_string(d.nvars));
    return d;
}

struct Expected {
    ConditionKind kind;
    std::size_t loc = 0;
    std::size_t transition = 0;
    std::size_t region = 0;
    std::size_t conjunct = 0;
    int slot = 0;
};

bool matches(const Expected& e, const ConditionCertificate& c) {
    if (e.kind != c.kind || e.slot != c.slot) return false;
    switch (e.kind) {
    case ConditionKind::Init:
        return true;
    case ConditionKind::Discrete:
        return e.transition == c.transition;
    case ConditionKind::Continuous:
        return e.loc == c.loc;
    case ConditionKind::Boundary:
        return e.region == c.region && e.conjunct == c.conjunct;
    default:
        return e.region == c.region;
    }
}

std::vector<Expected> expected_conditions(const HybridSystem& h, const UnitCertificate& unit) {
    const int slots = unit.mode == Mode::Conjunction ? 2 : 1;
    std::vector<Expected> out;
    for (int s = 0; s < slots; ++s) out.push_back({ConditionKind::Init, h.init_loc, 0, 0, 0, s});
    for (std::size_t t = 0; t < h.transitions.size(); ++t)
        for (int s = 0; s < slots; ++s) out.push_back({ConditionKind::Discrete, h.transitions[t].pre, t, 0, 0, s});
    for (std::size_t l = 0; l < h.locations.size(); ++l)
        for (int s = 0; s < slots; ++s) out.push_back({ConditionKind::Continuous, l, 0, 0, 0, s});
    for (const auto& tg : unit.targets) {
        if (unit.mode == Mode::Conjunction) {
            out.push_back({ConditionKind::Separation, tg.loc, 0, tg.region, 0, 0});
        } else if (unit.mode == Mode::Boundary && tg.set.eq.empty() && !tg.set.ge.empty()) {
            for (std::size_t j = 0; j < tg.set.ge.size(); ++j)
                out.push_back({ConditionKind::Boundary, tg.loc, 0, tg.region, j, 0});
            out.push_back({ConditionKind::Disjoint, tg.loc, 0, tg.region, 0, 0});
        } else {
            out.push_back({ConditionKind::Unsafe, tg.loc, 0, tg.region, 0, 0});
        }
    }
    return out;
}

// Certification of one condition; empty string on success, else the reason.
std::string certify(const Derived& d, const ConditionCertificate& c, std::string& detail) {
    if (!d.error.empty()) return d.error;
    QPoly rhs = QPoly::constant(d.nvars, c.eps);
    bool uses_invariant = false;
    for (const auto& t : c.terms) {
        auto it = d.factors.find(t.factor);
        if (it == d.factors.end()) return "factor '" + t.factor + "' is not allowed in this condition";
        const Factor& f = it->second;
        for (const auto& m : t.basis)
            if (m.nvars() != d.nvars) return "multiplier basis of factor '" + t.factor + "' has the wrong dimension";
        QPoly mult(d.nvars);
        if (t.sos) {
            if (t.gram.rows() != t.basis.size() || t.gram.cols() != t.basis.size())
                return "Gram matrix of factor '" + t.factor + "' does not match its basis";
            if (!t.gram.is_symmetric()) return "Gram matrix of factor '" + t.factor + "' is not symmetric";
            if (!psd_exact(t.gram).psd) return "Gram matrix of factor '" + t.factor + "' is not PSD";
            mult = gram_expand(GramForm<Rational>{t.basis, t.gram});
        } else {
            if (f.sos_only) return "factor '" + t.factor + "' needs an SOS multiplier";
            if (t.free.nvars() != d.nvars) return "multiplier of factor '" + t.factor + "' has the wrong dimension";
            mult = t.free;
        }
        if (f.invariant && !mult.is_zero()) uses_invariant = true;
        rhs += mult * f.poly;
    }
    QPoly residual = d.lhs - rhs;
    if (!residual.is_zero()) return "identity residual " + to_string(residual) + " is not zero";
    if (c.eps < 0) return "negative slack";
    if (d.strict) {
        if (c.eps > 0) {
            detail = "strict via eps = " + to_string(c.eps);
        } else if (c.kind == ConditionKind::Continuous && !uses_invariant) {
            detail = "derivative nonnegative on the whole domain (eps = 0, no invariant factor)";
        } else {
            return "strict inequality needs a positive slack";
        }
    } else {
        detail = c.eps > 0 ? "eps = " + to_string(c.eps) : "exact";
    }
    return {};
}

}  // namespace

Implication condition_implication(const HybridSystem& h, const UnitCertificate& unit, const ConditionCertificate& c) {
    Derived d = derive(h, unit, c);
    if (!d.error.empty()) throw std::invalid_argument(d.error);
    Implication imp;
    imp.nvars = d.nvars;
    imp.ge = std::move(d.ge);
    imp.eq = std::move(d.eq);
    imp.consequent = std::move(d.lhs);
    imp.strict = d.strict;
    return imp;
}

// ---------------------------------------------------------------------------
// Falsifier

namespace {

class Sampler {
public:
    Sampler(const Implication& imp, const FalsifyConfig& cfg) : imp_(imp), rng_(cfg.seed) {
        SemialgebraicSet s{imp.ge, imp.eq};
        auto box = box_bounds(s, imp.nvars);
        for (std::size_t i = 0; i < imp.nvars; ++i) {
            Rational lo, hi;
            if (box[i].lo && box[i].hi) {
                lo = *box[i].lo;
                hi = *box[i].hi;
            } else if (box[i].lo) {
                lo = *box[i].lo;
                hi = lo + 2 * cfg.radius;
            } else if (box[i].hi) {
                hi = *box[i].hi;
                lo = hi - 2 * cfg.radius;
            } else {
                lo = -cfg.radius;
                hi = cfg.radius;
            }
            lo_.push_back(lo);
            hi_.push_back(hi);
        }
        for (const auto& p : imp.ge) dge_.push_back(to_double(p));
        for (const auto& p : imp.eq) deq_.push_back(to_double(p));
    }

    // Exact test of one point; true when it is a counterexample.
    bool test(std::vector<Rational> x) {
        repair(x);
        std::vector<double> xd;
        for (const auto& q : x) xd.push_back(q.get_d());
        for (const auto& p : dge_)
            if (p.evaluate(xd) < -1e-7) return false;
        for (const auto& p : deq_)
            if (std::abs(p.evaluate(xd)) > 1e-7) return false;
        for (const auto& p : imp_.eq)
            if (eval_exact(p, x) != 0) return false;
        for (const auto& p : imp_.ge)
            if (eval_exact(p, x) < 0) return false;
        Rational v = eval_exact(imp_.consequent, x);
        if (imp_.strict ? v <= 0 : v < 0) {
            found_ = std::move(x);
            return true;
        }
        return false;
    }

    Rational along(std::size_t i, const Rational& t) const { return lo_[i] + (hi_[i] - lo_[i]) * t; }

    Rational random_unit() {
        std::uniform_int_distribution<int> num(0, 1024);
        return Rational(num(rng_), 1024);
    }

    std::mt19937_64& rng() { return rng_; }
    const std::vector<Rational>& found() const { return found_; }
    std::size_t nvars() const { return imp_.nvars; }

private:
    // Move the point onto equalities that are linear in some variable.
    void repair(std::vector<Rational>& x) const {
        std::vector<bool> used(x.size(), false);
        for (const auto& e : imp_.eq) {
            for (std::size_t k = 0; k < x.size(); ++k) {
                if (used[k]) continue;
                bool linear = true, present = false;
                for (const auto& [m, c] : e.terms()) {
                    if (m[k] > 1) linear = false;
                    if (m[k] == 1) present = true;
                }
                if (!linear || !present) continue;
                Rational a = 0, b = 0;
                for (const auto& [m, c] : e.terms()) {
                    Rational v = c;
                    for (std::size_t i = 0; i < x.size(); ++i)
                        if (i != k)
                            for (int p = 0; p < m[i]; ++p) v *= x[i];
                    (m[k] == 1 ? a : b) += v;
                }
                if (a == 0) continue;
                x[k] = -b / a;
                used[k] = true;
                break;
            }
        }
    }

    const Implication& imp_;
    std::mt19937_64 rng_;
    std::vector<Rational> lo_, hi_;
    std::vector<DPoly> dge_, deq_;
    std::vector<Rational> found_;
};

}  // namespace

std::optional<std::vector<Rational>> falsify(const Implication& imp, const FalsifyConfig& cfg) {
    Sampler s(imp, cfg);
    const std::size_t n = imp.nvars;
    std::size_t used = 0;
    auto attempt = [&](std::vector<Rational> x) {
        ++used;
        return s.test(std::move(x));
    };

    if (attempt(std::vector<Rational>(n, Rational(0)))) return s.found();
    {
        std::vector<Rational> c(n);
        for (std::size_t i = 0; i < n; ++i) c[i] = s.along(i, Rational(1, 2));
        if (attempt(c)) return s.found();
    }

    // Dyadic grids, coarse to fine, up to half the budget.
    for (int level = 1; level <= 10 && used < cfg.budget / 2; ++level) {
        const long per = (1L << level) + 1;
        double total = std::pow(static_cast<double>(per), static_cast<double>(n));
        if (used + total > static_cast<double>(cfg.budget / 2)) break;
        std::vector<long> idx(n, 0);
        for (;;) {
            std::vector<Rational> x(n);
            for (std::size_t i = 0; i < n; ++i) x[i] = s.along(i, Rational(idx[i], 1L << level));
            if (attempt(std::move(x))) return s.found();
            std::size_t k = 0;
            while (k < n && ++idx[k] == per) idx[k++] = 0;
            if (k == n) break;
        }
    }

    // Faces of the sampling box, then the interior.
    std::uniform_int_distribution<std::size_t> axis(0, n == 0 ? 0 : n - 1);
    std::bernoulli_distribution side(0.5);
    while (used < cfg.budget) {
        std::vector<Rational> x(n);
        for (std::size_t i = 0; i < n; ++i) x[i] = s.along(i, s.random_unit());
        if (n > 0 && used % 4 == 0) {
            std::size_t k = axis(s.rng());
            x[k] = s.along(k, Rational(side(s.rng()) ? 1 : 0));
        }
        if (attempt(std::move(x))) return s.found();
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Reports

std::string to_string(Verdict v) {
    switch (v) {
    case Verdict::Safe:
        return "SAFE";
    case Verdict::Falsified:
        return "FALSIFIED";
    case Verdict::Unknown:
        break;
    }
    return "UNKNOWN";
}

std::string to_string(ConditionStatus s) {
    switch (s) {
    case ConditionStatus::Certified:
        return "certified";
    case ConditionStatus::Falsified:
        return "falsified";
    case ConditionStatus::Unknown:
        break;
    }
    return "unknown";
}

SafetyReport verify_unit(const HybridSystem& h, const UnitCertificate& unit, const CheckConfig& cfg) {
    SafetyReport rep;
    rep.invariants = unit.invariants;
    rep.seed = cfg.falsifier.seed;
    const std::size_t n = h.nvars();
    const std::size_t slots = unit.mode == Mode::Conjunction ? 2 : 1;

    bool shape_ok = unit.invariants.size() == h.locations.size();
    for (const auto& li : unit.invariants) {
        if (li.size() != slots) shape_ok = false;
        for (const auto& p : li)
            if (p.nvars() != n) shape_ok = false;
    }
    if (!shape_ok) {
        rep.diagnostics.push_back("missing certificate: expected " + std::to_string(slots) +
                                  " invariant(s) over " + std::to_string(n) + " variables for each of " +
                                  std::to_string(h.locations.size()) + " location(s)");
        return rep;
    }
    if (unit.mode == Mode::Boundary && (h.locations.size() != 1 || !h.transitions.empty()))
        rep.diagnostics.push_back("boundary conditions only apply to a single location without transitions");
    if (unit.targets.empty()) rep.diagnostics.push_back("no unsafe targets");
    for (const auto& tg : unit.targets)
        if (tg.loc >= h.locations.size()) rep.diagnostics.push_back("unsafe target refers to an unknown location");
    if (!rep.diagnostics.empty()) return rep;

    bool all = true, falsified = false;
    for (const auto& e : expected_conditions(h, unit)) {
        if (!cfg.kinds.empty() && std::find(cfg.kinds.begin(), cfg.kinds.end(), e.kind) == cfg.kinds.end()) continue;
        ConditionReport cr;
        cr.kind = e.kind;
        cr.loc = e.loc;
        cr.transition = e.transition;
        cr.region = e.region;
        cr.conjunct = e.conjunct;
        cr.slot = e.slot;
        const ConditionCertificate* cc = nullptr;
        for (const auto& c : unit.conditions)
            if (matches(e, c)) {
                cc = &c;
                break;
            }
        if (!cc) {
            cr.detail = "missing certificate";
            all = false;
            if (cfg.falsify) {
                ConditionCertificate probe;
                probe.kind = e.kind;
                probe.loc = e.loc;
                probe.transition = e.transition;
                probe.region = e.region;
                probe.conjunct = e.conjunct;
                probe.slot = e.slot;
                probe.nvars = n;
                if (e.kind == ConditionKind::Discrete && !functional_reset(h.transitions[e.transition], n))
                    probe.nvars = 2 * n;
                Derived d = derive(h, unit, probe);
                if (d.error.empty())
                    if (auto x = falsify({d.nvars, d.ge, d.eq, d.lhs, d.strict}, cfg.falsifier)) {
                        cr.status = ConditionStatus::Falsified;
                        cr.counterexample = std::move(x);
                        falsified = true;
                    }
            }
            rep.conditions.push_back(std::move(cr));
            continue;
        }
        Derived d = derive(h, unit, *cc);
        std::string detail;
        std::string why = certify(d, *cc, detail);
        if (why.empty()) {
            cr.status = ConditionStatus::Certified;
            cr.detail = detail;
        } else {
            all = false;
            cr.detail = why;
            if (cfg.falsify && d.error.empty()) {
                Implication imp{d.nvars, d.ge, d.eq, d.lhs, d.strict};
                if (auto x = falsify(imp, cfg.falsifier)) {
                    cr.status = ConditionStatus::Falsified;
                    cr.counterexample = std::move(x);
                    falsified = true;
                }
            }
        }
        rep.conditions.push_back(std::move(cr));
    }
    rep.verdict = all ? Verdict::Safe : falsified ? Verdict::Falsified : Verdict::Unknown;
    if (!cfg.kinds.empty()) {
        if (rep.verdict == Verdict::Safe) rep.verdict = Verdict::Unknown;
        rep.diagnostics.push_back("partial check: only the listed conditions were examined");
    }
    return rep;
}

SafetyReport verify_safety(const HybridSystem& h, const SosProgram& prog, const std::vector<Rational>& values,
                           const std::vector<UnsafeTarget>& targets, const CheckConfig& cfg) {
    return verify_unit(h, extract_certificate(prog, values, targets), cfg);
}

std::string SafetyReport::render(const HybridSystem& h) const {
    std::ostringstream os;
    os << "verdict: " << to_string(verdict) << "\n";
    os << "falsifier seed: " << seed << "\n";
    for (std::size_t l = 0; l < invariants.size(); ++l)
        for (std::size_t s = 0; s < invariants[l].size(); ++s)
            os << "invariant " << (l < h.locations.size() ? h.locations[l].id : std::to_string(l)) << "[" << s
               << "]: " << to_string(invariants[l][s], h.vars) << " >= 0\n";
    for (const auto& c : conditions) {
        os << "condition " << to_string(c.kind);
        if (c.kind == ConditionKind::Discrete)
            os << " transition=" << c.transition;
        else if (c.loc < h.locations.size())
            os << " location=" << h.locations[c.loc].id;
        if (c.kind == ConditionKind::Unsafe || c.kind == ConditionKind::Separation ||
            c.kind == ConditionKind::Boundary || c.kind == ConditionKind::Disjoint)
            os << " region=" << c.region;
        if (c.kind == ConditionKind::Boundary) os << " conjunct=" << c.conjunct;
        os << " slot=" << c.slot << ": " << to_string(c.status);
        if (!c.detail.empty()) os << " (" << c.detail << ")";
        if (c.counterexample) {
            os << " counterexample (";
            for (std::size_t i = 0; i < c.counterexample->size(); ++i)
                os << (i ? ", " : "") << to_string((*c.counterexample)[i]);
            os << ")";
        }
        os << "\n";
    }
    for (const auto& d : diagnostics) os << "diagnostic: " << d << "\n";
    return os.str();
}

}  // namespace exinv
