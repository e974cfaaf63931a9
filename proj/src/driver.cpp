#include "exinv/driver.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <sstream>

#include "exinv/recover.hpp"
#include "exinv/refine.hpp"

namespace exinv {

using nlohmann::ordered_json;

void RunConfig::validate() const {
    if (d_min < 1 || d_max < d_min) throw std::invalid_argument("invariant degree range must satisfy 1 <= d1 <= d2");
    if (e_min < 0 || e_max < e_min) throw std::invalid_argument("multiplier half-degree range must satisfy 0 <= e1 <= e2");
    if (D < 1) throw std::invalid_argument("denominator bound must be at least 1");
    if (!(tau > 0)) throw std::invalid_argument("tolerance must be positive");
    if (split_depth < 0) throw std::invalid_argument("split depth must be nonnegative");
}

// ---------------------------------------------------------------------------
// Bisection

std::pair<SemialgebraicSet, SemialgebraicSet> bisect_region(const SemialgebraicSet& set,
                                                            const SemialgebraicSet& context, std::size_t nvars,
                                                            std::optional<std::size_t> axis,
                                                            std::optional<Rational> cut) {
    if (axis && *axis >= nvars) throw std::invalid_argument("split axis out of range");
    if (!axis || !cut) {
        SemialgebraicSet both = set;
        both.ge.insert(both.ge.end(), context.ge.begin(), context.ge.end());
        both.eq.insert(both.eq.end(), context.eq.begin(), context.eq.end());
        auto box = box_bounds(both, nvars);
        if (!axis) {
            std::optional<Rational> best;
            for (std::size_t i = 0; i < nvars; ++i) {
                if (!box[i].lo || !box[i].hi) continue;
                Rational w = *box[i].hi - *box[i].lo;
                if (!best || w > *best) {
                    best = w;
                    axis = i;
                }
            }
            if (!axis) throw std::invalid_argument("no variable has a finite range over the region");
        }
        if (!cut) {
            const Interval& iv = box[*axis];
            if (!iv.lo || !iv.hi) throw std::invalid_argument("split variable has no finite range over the region");
            cut = (*iv.lo + *iv.hi) / 2;
        }
    }
    const QPoly x = QPoly::variable(nvars, *axis);
    const QPoly c = QPoly::constant(nvars, *cut);
    SemialgebraicSet lo = set, hi = set;
    lo.ge.push_back(c - x);
    hi.ge.push_back(x - c);
    return {lo, hi};
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

struct Attempt {
    std::optional<UnitRecord> unit;
    std::string note;
};

CheckConfig check_config(const RunConfig& cfg) {
    CheckConfig cc;
    cc.falsifier.seed = cfg.seed;
    cc.falsifier.budget = cfg.falsify_budget;
    return cc;
}

RecoverConfig recover_config(const RunConfig& cfg) {
    RecoverConfig rc;
    rc.D = cfg.D;
    rc.tau = cfg.tau;
    rc.schedule.clear();
    for (long q : {10L, 100L})
        if (q < cfg.D) rc.schedule.emplace_back(q);
    rc.schedule.push_back(cfg.D);
    return rc;
}

// Numeric solve, refinement and exact recovery. The returned values pass
// identity_check and psd_exact.
std::optional<std::vector<Rational>> recover_values(const SosProgram& prog, const RunConfig& cfg, std::string& note,
                                                    RationalCertificate* info = nullptr) {
    BmiProblem bmi;
    try {
        bmi = assemble_bmi(prog);
    } catch (const EncodeError& e) {
        note = std::string("encoding: ") + e.what();
        return std::nullopt;
    }
    NumericSolution sol = solve_program(prog, bmi, cfg.solver);
    if (sol.status != SolveStatus::Feasible) {
        note = "numeric solve " + to_string(sol.status);
        return std::nullopt;
    }
    CertificateNumeric cert = freeze_bilinear(prog, sol.values, cfg.D);
    RefineConfig rfc;
    rfc.tau = cfg.tau;
    RefineResult rr = newton_refine(cert, prog, rfc);
    try {
        RationalCertificate rc = recover_certificate(rr.cert, prog, recover_config(cfg));
        if (info) *info = rc;
        return std::move(rc.values);
    } catch (const RecoveryFailed& e) {
        note = std::string("recovery: ") + e.what();
        return std::nullopt;
    }
}

// The unit is returned only when the checker certifies it.
Attempt solve_and_check(const HybridSystem& h, const SosProgram& prog, const std::vector<UnsafeTarget>& targets,
                        const RunConfig& cfg, const CheckConfig& cc) {
    Attempt out;
    RationalCertificate rc;
    auto values = recover_values(prog, cfg, out.note, &rc);
    if (!values) return out;
    UnitRecord u;
    u.cert = extract_certificate(prog, *values, targets);
    u.report = verify_unit(h, u.cert, cc);
    u.recovery_case = rc.recovery_case;
    u.denominator = rc.denominator;
    if (u.report.verdict != Verdict::Safe) {
        out.note = "checker rejected the recovered certificate";
        return out;
    }
    out.unit = std::move(u);
    return out;
}

Attempt certify_region(const HybridSystem& h, const UnsafeTarget& target, const RunConfig& cfg) {
    Attempt last;
    for (int d = cfg.d_min; d <= cfg.d_max; ++d)
        for (int e = cfg.e_min; e <= cfg.e_max; ++e) {
            EncoderConfig ec;
            ec.degree = d;
            ec.e = e;
            ec.mode = cfg.mode;
            SosProgram prog;
            try {
                prog = build_sos_program(h, {target}, ec);
            } catch (const EncodeError& err) {
                last.note = std::string("encoding: ") + err.what();
                continue;
            }
            Attempt a = solve_and_check(h, prog, {target}, cfg, check_config(cfg));
            if (a.unit) {
                a.unit->region = target.region;
                a.unit->degree = d;
                a.unit->e = e;
                return a;
            }
            last = std::move(a);
        }
    return last;
}

std::string point_text(const std::vector<Rational>& x) {
    std::string s = "(";
    for (std::size_t i = 0; i < x.size(); ++i) s += (i ? ", " : "") + to_string(x[i]);
    return s + ")";
}

// A point of init within the initial location's invariant that lies in the
// unsafe region is a counterexample to safety.
std::optional<std::vector<Rational>> unsafe_initial_point(const HybridSystem& h, const RegionNode& r,
                                                          const RunConfig& cfg) {
    if (r.loc != h.init_loc) return std::nullopt;
    const std::size_t n = h.nvars();
    Implication imp;
    imp.nvars = n;
    for (const SemialgebraicSet* s : {&h.init, &h.locations[r.loc].inv, &r.set}) {
        imp.ge.insert(imp.ge.end(), s->ge.begin(), s->ge.end());
        imp.eq.insert(imp.eq.end(), s->eq.begin(), s->eq.end());
    }
    imp.consequent = QPoly::constant(n, Rational(-1));
    FalsifyConfig fc;
    fc.seed = cfg.seed;
    fc.budget = cfg.falsify_budget;
    return falsify(imp, fc);
}

}  // namespace

int RunResult::exit_code() const {
    switch (verdict) {
    case Verdict::Safe:
        return 0;
    case Verdict::Falsified:
        return 2;
    case Verdict::Unknown:
        break;
    }
    return 1;
}

RunResult run_verification(const HybridSystem& h, const RunConfig& cfg) {
    cfg.validate();
    RunResult res;
    std::deque<std::size_t> queue;
    for (const auto& t : all_unsafe_targets(h)) {
        RegionNode r;
        r.id = res.regions.size();
        r.loc = t.loc;
        r.set = t.set;
        res.regions.push_back(std::move(r));
        queue.push_back(res.regions.back().id);
    }
    if (res.regions.empty()) res.messages.push_back("the model has no unsafe region");

    std::vector<std::size_t> failed;
    while (!queue.empty()) {
        const std::size_t id = queue.front();
        queue.pop_front();
        const bool may_split = res.regions[id].depth < cfg.split_depth;
        if (!(cfg.split_first && may_split)) {
            UnsafeTarget target{res.regions[id].loc, res.regions[id].set, id};
            Attempt a = certify_region(h, target, cfg);
            if (a.unit) {
                res.regions[id].certified = true;
                res.regions[id].note = "certified";
                res.units.push_back(std::move(*a.unit));
                continue;
            }
            res.regions[id].note = a.note;
        }
        if (!may_split) {
            failed.push_back(id);
            continue;
        }
        std::pair<SemialgebraicSet, SemialgebraicSet> halves;
        try {
            const RegionNode& r = res.regions[id];
            std::optional<std::size_t> axis = cfg.split_axis;
            std::optional<Rational> cut = cfg.split_cut;
            if (!axis || !cut) {
                // Resolve auto choices here so the tree records them.
                SemialgebraicSet both = r.set;
                const auto& inv = h.locations[r.loc].inv;
                both.ge.insert(both.ge.end(), inv.ge.begin(), inv.ge.end());
                both.eq.insert(both.eq.end(), inv.eq.begin(), inv.eq.end());
                auto box = box_bounds(both, h.nvars());
                if (!axis) {
                    std::optional<Rational> best;
                    for (std::size_t i = 0; i < h.nvars(); ++i)
                        if (box[i].lo && box[i].hi && (!best || *box[i].hi - *box[i].lo > *best)) {
                            best = *box[i].hi - *box[i].lo;
                            axis = i;
                        }
                }
                if (axis && !cut && box[*axis].lo && box[*axis].hi) cut = (*box[*axis].lo + *box[*axis].hi) / 2;
            }
            halves = bisect_region(r.set, h.locations[r.loc].inv, h.nvars(), axis, cut);
            res.regions[id].axis = axis;
            res.regions[id].cut = *cut;
        } catch (const std::invalid_argument& e) {
            res.regions[id].note += (res.regions[id].note.empty() ? "" : "; ") + std::string("cannot split: ") + e.what();
            failed.push_back(id);
            continue;
        }
        for (SemialgebraicSet* s : {&halves.first, &halves.second}) {
            RegionNode c;
            c.id = res.regions.size();
            c.parent = id;
            c.loc = res.regions[id].loc;
            c.set = std::move(*s);
            c.depth = res.regions[id].depth + 1;
            res.regions[id].children.push_back(c.id);
            queue.push_back(c.id);
            res.regions.push_back(std::move(c));
        }
    }

    if (failed.empty() && !res.regions.empty()) {
        res.verdict = Verdict::Safe;
        return res;
    }
    std::sort(failed.begin(), failed.end());
    for (std::size_t id : failed) {
        if (auto x = unsafe_initial_point(h, res.regions[id], cfg)) {
            res.verdict = Verdict::Falsified;
            res.counterexample = x;
            res.messages.push_back("initial state " + point_text(*x) + " lies in unsafe region " + std::to_string(id));
            return res;
        }
    }
    for (std::size_t id : failed)
        res.messages.push_back("region " + std::to_string(id) + ": no certified invariant of degree <= " +
                               std::to_string(cfg.d_max) + " with multiplier degree bound 2e = " +
                               std::to_string(2 * cfg.e_max) + " (" + res.regions[id].note + ")");
    return res;
}

FixedCheck certify_invariants(const HybridSystem& h, const FixedInvariants& invariants, const RunConfig& cfg,
                              const std::vector<ConditionKind>& kinds) {
    cfg.validate();
    FixedCheck out;
    const auto targets = all_unsafe_targets(h);
    CheckConfig cc = check_config(cfg);
    cc.kinds = kinds;
    UnitCertificate unit;
    unit.mode = cfg.mode;
    unit.invariants = invariants;
    unit.targets = targets;

    // With the invariants fixed the constraints share no unknowns, so each
    // one is solved on its own.
    std::vector<SosProgram> progs;
    for (int e = cfg.e_min; e <= cfg.e_max; ++e) {
        EncoderConfig ec;
        ec.e = e;
        ec.mode = cfg.mode;
        try {
            SosProgram p = build_sos_program(h, targets, ec, &invariants);
            progs.push_back(kinds.empty() ? std::move(p) : p.restricted_to(kinds));
        } catch (const EncodeError& err) {
            out.note = std::string("encoding: ") + err.what();
            out.report = verify_unit(h, unit, cc);
            return out;
        }
    }
    std::vector<std::string> notes;
    const std::size_t ncons = progs.empty() ? 0 : progs.front().constraints.size();
    for (std::size_t i = 0; i < ncons; ++i) {
        std::string why;
        for (std::size_t k = 0; k < progs.size(); ++k) {
            SosProgram single = progs[k];
            single.constraints = {progs[k].constraints[i]};
            std::string note;
            auto values = recover_values(single, cfg, note);
            if (!values) {
                why = note;
                continue;
            }
            auto part = extract_certificate(single, *values, targets);
            unit.conditions.insert(unit.conditions.end(), part.conditions.begin(), part.conditions.end());
            why.clear();
            break;
        }
        const auto& c = progs.front().constraints[i];
        if (!why.empty()) notes.push_back(to_string(c.kind) + " condition " + std::to_string(i) + ": " + why);
    }
    out.report = verify_unit(h, unit, cc);
    out.cert = unit;
    for (const auto& n : notes) out.note += (out.note.empty() ? "" : "; ") + n;
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

std::string model_hash(const HybridSystem& h) {
    std::uint64_t x = 0xcbf29ce484222325ULL;
    for (unsigned char c : render_system(h)) {
        x ^= c;
        x *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

namespace {

constexpr const char* kFormat = "exinv-certificate-1";

const std::vector<std::string>& names_for(const HybridSystem& h, std::size_t nvars,
                                          const std::vector<std::string>& primed) {
    if (nvars == h.nvars()) return h.vars;
    if (nvars == 2 * h.nvars()) return primed;
    throw InputError("polynomial over " + std::to_string(nvars) + " variables does not fit the model");
}

ordered_json polys_json(const std::vector<QPoly>& ps, const std::vector<std::string>& names) {
    ordered_json a = ordered_json::array();
    for (const auto& p : ps) a.push_back(to_string(p, names));
    return a;
}

ordered_json set_json(const SemialgebraicSet& s, const std::vector<std::string>& names) {
    return ordered_json{{"ge", polys_json(s.ge, names)}, {"eq", polys_json(s.eq, names)}};
}

ordered_json unit_json(const HybridSystem& h, const UnitRecord& u) {
    const auto primed = h.primed_names();
    ordered_json j;
    j["region"] = u.region;
    j["mode"] = to_string(u.cert.mode);
    j["degree"] = u.degree;
    j["sos_degree"] = u.e;
    j["recovery_case"] = u.recovery_case;
    j["denominator"] = u.denominator.get_str();
    ordered_json inv = ordered_json::array();
    for (const auto& li : u.cert.invariants) inv.push_back(polys_json(li, h.vars));
    j["invariants"] = inv;
    ordered_json tg = ordered_json::array();
    for (const auto& t : u.cert.targets) {
        ordered_json tj = set_json(t.set, h.vars);
        tj["location"] = h.locations[t.loc].id;
        tj["region"] = t.region;
        tg.push_back(tj);
    }
    j["targets"] = tg;
    ordered_json conds = ordered_json::array();
    for (const auto& c : u.cert.conditions) {
        const auto& names = names_for(h, c.nvars, primed);
        ordered_json cj;
        cj["kind"] = to_string(c.kind);
        cj["location"] = c.loc;
        cj["transition"] = c.transition;
        cj["region"] = c.region;
        cj["conjunct"] = c.conjunct;
        cj["slot"] = c.slot;
        cj["nvars"] = c.nvars;
        cj["eps"] = to_string(c.eps);
        ordered_json terms = ordered_json::array();
        for (const auto& t : c.terms) {
            ordered_json tj;
            tj["factor"] = t.factor;
            tj["sos"] = t.sos;
            if (t.sos) {
                ordered_json basis = ordered_json::array();
                for (const auto& m : t.basis) basis.push_back(m.to_string(names));
                tj["basis"] = basis;
                ordered_json gram = ordered_json::array();
                for (std::size_t r = 0; r < t.gram.rows(); ++r) {
                    ordered_json row = ordered_json::array();
                    for (std::size_t k = 0; k < t.gram.cols(); ++k) row.push_back(to_string(t.gram(r, k)));
                    gram.push_back(row);
                }
                tj["gram"] = gram;
            } else {
                tj["multiplier"] = to_string(t.free, names);
            }
            terms.push_back(tj);
        }
        cj["terms"] = terms;
        conds.push_back(cj);
    }
    j["conditions"] = conds;
    return j;
}

template <class T>
T field(const ordered_json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw InputError(std::string("certificate: missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InputError(std::string("certificate: field '") + key + "' has the wrong type");
    }
}

QPoly poly_from(const ordered_json& j, const std::vector<std::string>& names) {
    try {
        return parse_polynomial(j.get<std::string>(), names);
    } catch (const ParseError& e) {
        throw InputError(std::string("certificate: bad polynomial: ") + e.what());
    } catch (const nlohmann::json::exception&) {
        throw InputError("certificate: polynomial must be a string");
    }
}

Rational rational_from(const ordered_json& j) {
    try {
        return parse_rational(j.get<std::string>());
    } catch (const nlohmann::json::exception&) {
        throw InputError("certificate: rational must be a string");
    } catch (const std::invalid_argument& e) {
        throw InputError(std::string("certificate: bad rational: ") + e.what());
    }
}

std::vector<QPoly> polys_from(const ordered_json& j, const std::vector<std::string>& names) {
    if (!j.is_array()) throw InputError("certificate: expected a polynomial list");
    std::vector<QPoly> out;
    for (const auto& p : j) out.push_back(poly_from(p, names));
    return out;
}

SemialgebraicSet set_from(const ordered_json& j, const std::vector<std::string>& names) {
    return {polys_from(field<ordered_json>(j, "ge"), names), polys_from(field<ordered_json>(j, "eq"), names)};
}

Monomial monomial_from(const ordered_json& j, const std::vector<std::string>& names) {
    QPoly p = poly_from(j, names);
    if (p.size() != 1 || p.terms().begin()->second != 1) throw InputError("certificate: bad basis monomial");
    return p.terms().begin()->first;
}

std::size_t location_from(const HybridSystem& h, const ordered_json& j) {
    auto l = h.location_index(field<std::string>(j, "location"));
    if (!l) throw InputError("certificate: unknown location");
    return *l;
}

HybridSystem model_from(const ordered_json& file) {
    if (field<std::string>(file, "format") != kFormat) throw InputError("certificate: unsupported format");
    try {
        return parse_system(field<std::string>(file, "model"));
    } catch (const ParseError& e) {
        throw InputError(std::string("certificate: model does not parse: ") + e.what());
    }
}

std::string cut_text(const RegionNode& r, const HybridSystem& h) {
    return h.vars[*r.axis] + " at " + to_string(r.cut);
}

}  // namespace

ordered_json certificate_json(const HybridSystem& h, const RunConfig& cfg, const RunResult& r) {
    ordered_json j;
    j["format"] = kFormat;
    j["model_hash"] = model_hash(h);
    j["model"] = render_system(h);
    ordered_json c;
    c["degree"] = {cfg.d_min, cfg.d_max};
    c["sos_degree"] = {cfg.e_min, cfg.e_max};
    c["denominator_bound"] = cfg.D.get_str();
    c["tolerance"] = cfg.tau;
    c["mode"] = to_string(cfg.mode);
    c["split_depth"] = cfg.split_depth;
    c["split_first"] = cfg.split_first;
    c["split_axis"] = cfg.split_axis ? ordered_json(h.vars.at(*cfg.split_axis)) : ordered_json();
    c["split_cut"] = cfg.split_cut ? ordered_json(to_string(*cfg.split_cut)) : ordered_json();
    c["seed"] = cfg.seed;
    j["config"] = c;
    j["verdict"] = to_string(r.verdict);
    ordered_json regions = ordered_json::array();
    for (const auto& n : r.regions) {
        ordered_json rj;
        rj["id"] = n.id;
        rj["parent"] = n.parent ? ordered_json(*n.parent) : ordered_json();
        rj["location"] = h.locations[n.loc].id;
        rj["depth"] = n.depth;
        rj["set"] = set_json(n.set, h.vars);
        if (!n.children.empty()) {
            rj["split"] = {{"axis", h.vars[*n.axis]}, {"cut", to_string(n.cut)}, {"children", n.children}};
        }
        rj["certified"] = n.certified;
        regions.push_back(rj);
    }
    j["regions"] = regions;
    ordered_json units = ordered_json::array();
    for (const auto& u : r.units) units.push_back(unit_json(h, u));
    j["units"] = units;
    if (r.counterexample) {
        ordered_json x = ordered_json::array();
        for (const auto& v : *r.counterexample) x.push_back(to_string(v));
        j["counterexample"] = x;
    }
    return j;
}

std::vector<UnitCertificate> load_units(const ordered_json& file, const HybridSystem& h) {
    const auto primed = h.primed_names();
    std::vector<UnitCertificate> out;
    const auto units = field<ordered_json>(file, "units");
    if (!units.is_array()) throw InputError("certificate: 'units' must be a list");
    for (const auto& uj : units) {
        UnitCertificate u;
        auto mode = parse_mode(field<std::string>(uj, "mode"));
        if (!mode) throw InputError("certificate: unknown mode");
        u.mode = *mode;
        for (const auto& li : field<ordered_json>(uj, "invariants")) u.invariants.push_back(polys_from(li, h.vars));
        for (const auto& tj : field<ordered_json>(uj, "targets"))
            u.targets.push_back({location_from(h, tj), set_from(tj, h.vars), field<std::size_t>(tj, "region")});
        for (const auto& cj : field<ordered_json>(uj, "conditions")) {
            ConditionCertificate c;
            auto kind = parse_condition_kind(field<std::string>(cj, "kind"));
            if (!kind) throw InputError("certificate: unknown condition kind");
            c.kind = *kind;
            c.loc = field<std::size_t>(cj, "location");
            c.transition = field<std::size_t>(cj, "transition");
            c.region = field<std::size_t>(cj, "region");
            c.conjunct = field<std::size_t>(cj, "conjunct");
            c.slot = field<int>(cj, "slot");
            c.nvars = field<std::size_t>(cj, "nvars");
            c.eps = rational_from(field<ordered_json>(cj, "eps"));
            const auto& names = names_for(h, c.nvars, primed);
            for (const auto& tj : field<ordered_json>(cj, "terms")) {
                TermCertificate t;
                t.factor = field<std::string>(tj, "factor");
                t.sos = field<bool>(tj, "sos");
                if (t.sos) {
                    for (const auto& m : field<ordered_json>(tj, "basis")) t.basis.push_back(monomial_from(m, names));
                    const auto gram = field<ordered_json>(tj, "gram");
                    const std::size_t s = t.basis.size();
                    if (!gram.is_array() || gram.size() != s) throw InputError("certificate: Gram matrix shape");
                    t.gram = QMat(s, s);
                    for (std::size_t r = 0; r < s; ++r) {
                        if (!gram[r].is_array() || gram[r].size() != s) throw InputError("certificate: Gram matrix shape");
                        for (std::size_t k = 0; k < s; ++k) t.gram(r, k) = rational_from(gram[r][k]);
                    }
                } else {
                    t.free = poly_from(field<ordered_json>(tj, "multiplier"), names);
                }
                c.terms.push_back(std::move(t));
            }
            u.conditions.push_back(std::move(c));
        }
        out.push_back(std::move(u));
    }
    return out;
}

CheckResult check_certificate(const ordered_json& file) {
    CheckResult res;
    HybridSystem h = model_from(file);
    const std::string stored = field<std::string>(file, "verdict");
    if (field<std::string>(file, "model_hash") != model_hash(h)) {
        res.messages.push_back("model hash mismatch");
        res.matches_stored = false;
        return res;
    }
    const std::uint64_t seed = field<ordered_json>(file, "config").value("seed", std::uint64_t{1});

    // Region tree: roots are the model's unsafe regions in order; every split
    // node has exactly the two half-space children of its recorded cut.
    const auto regions = field<ordered_json>(file, "regions");
    if (!regions.is_array()) throw InputError("certificate: 'regions' must be a list");
    std::vector<RegionNode> nodes;
    for (const auto& rj : regions) {
        RegionNode n;
        n.id = field<std::size_t>(rj, "id");
        if (n.id != nodes.size()) throw InputError("certificate: region ids must be consecutive");
        if (!rj.at("parent").is_null()) n.parent = field<std::size_t>(rj, "parent");
        n.loc = location_from(h, rj);
        n.set = set_from(field<ordered_json>(rj, "set"), h.vars);
        if (rj.contains("split")) {
            const auto& sj = rj.at("split");
            auto it = std::find(h.vars.begin(), h.vars.end(), field<std::string>(sj, "axis"));
            if (it == h.vars.end()) throw InputError("certificate: unknown split axis");
            n.axis = static_cast<std::size_t>(it - h.vars.begin());
            n.cut = rational_from(field<ordered_json>(sj, "cut"));
            n.children = field<std::vector<std::size_t>>(sj, "children");
        }
        nodes.push_back(std::move(n));
    }
    bool tree_ok = true;
    auto complain = [&](const std::string& m) {
        tree_ok = false;
        res.messages.push_back(m);
    };
    const auto roots = all_unsafe_targets(h);
    std::size_t nroots = 0;
    for (const auto& n : nodes)
        if (!n.parent) {
            if (nroots >= roots.size() || roots[nroots].loc != n.loc || !(roots[nroots].set == n.set))
                complain("region " + std::to_string(n.id) + " is not an unsafe region of the model");
            ++nroots;
        }
    if (nroots != roots.size()) complain("the region tree does not list every unsafe region of the model");
    for (const auto& n : nodes) {
        if (n.children.empty()) continue;
        if (n.children.size() != 2) {
            complain("region " + std::to_string(n.id) + " must have two children");
            continue;
        }
        auto halves = bisect_region(n.set, {}, h.nvars(), n.axis, n.cut);
        for (std::size_t k = 0; k < 2; ++k) {
            std::size_t c = n.children[k];
            const SemialgebraicSet& want = k == 0 ? halves.first : halves.second;
            if (c >= nodes.size() || nodes[c].parent != n.id || nodes[c].loc != n.loc || !(nodes[c].set == want))
                complain("region " + std::to_string(c) + " is not the half of region " + std::to_string(n.id) +
                         " split on " + cut_text(n, h));
        }
    }

    // Every leaf needs a unit the checker certifies for exactly that region.
    std::vector<bool> covered(nodes.size(), false);
    CheckConfig cc;
    cc.falsifier.seed = seed;
    for (const auto& u : load_units(file, h)) {
        SafetyReport rep = verify_unit(h, u, cc);
        if (rep.verdict == Verdict::Safe)
            for (const auto& t : u.targets)
                if (t.region < nodes.size() && nodes[t.region].children.empty() && nodes[t.region].loc == t.loc &&
                    nodes[t.region].set == t.set)
                    covered[t.region] = true;
        res.reports.push_back(std::move(rep));
    }
    bool all = tree_ok && !nodes.empty();
    for (const auto& n : nodes)
        if (n.children.empty() && !covered[n.id]) {
            all = false;
            res.messages.push_back("region " + std::to_string(n.id) + " is not certified");
        }
    if (all) {
        res.verdict = Verdict::Safe;
    } else if (file.contains("counterexample")) {
        std::vector<Rational> x;
        for (const auto& v : file.at("counterexample")) x.push_back(rational_from(v));
        bool in = x.size() == h.nvars() && h.init.contains(x) && h.locations[h.init_loc].inv.contains(x);
        bool hit = false;
        for (const auto& t : roots) hit = hit || (in && t.loc == h.init_loc && t.set.contains(x));
        if (hit)
            res.verdict = Verdict::Falsified;
        else
            res.messages.push_back("stored counterexample does not reproduce");
    }
    res.matches_stored = to_string(res.verdict) == stored;
    if (!res.matches_stored) res.messages.push_back("verdict " + to_string(res.verdict) + " differs from stored " + stored);
    return res;
}

std::string render_run(const HybridSystem& h, const RunResult& r) {
    std::ostringstream os;
    os << "verdict: " << to_string(r.verdict) << "\n";
    for (const auto& m : r.messages) os << "message: " << m << "\n";
    for (const auto& n : r.regions) {
        os << "region " << n.id << " location=" << h.locations[n.loc].id << " depth=" << n.depth << ": "
           << render_set(n.set, h.vars);
        if (!n.children.empty())
            os << " | split on " << cut_text(n, h) << " -> " << n.children[0] << ", " << n.children[1];
        else
            os << " | " << (n.certified ? "certified" : "not certified");
        os << "\n";
    }
    for (const auto& u : r.units) {
        os << "unit region=" << u.region << " degree=" << u.degree << " e=" << u.e << " recovery=" << u.recovery_case
           << " denominator=" << u.denominator.get_str() << "\n";
        std::istringstream lines(u.report.render(h));
        for (std::string line; std::getline(lines, line);) os << "  " << line << "\n";
    }
    if (r.counterexample) os << "counterexample: " << point_text(*r.counterexample) << "\n";
    return os.str();
}

}  // namespace exinv
