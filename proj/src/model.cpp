#include "exinv/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

namespace exinv {

bool SemialgebraicSet::contains(std::span<const Rational> point) const {
    for (const auto& p : ge)
        if (p.evaluate(point) < 0) return false;
    for (const auto& p : eq)
        if (p.evaluate(point) != 0) return false;
    return true;
}

std::optional<std::size_t> HybridSystem::location_index(std::string_view id) const {
    for (std::size_t i = 0; i < locations.size(); ++i)
        if (locations[i].id == id) return i;
    return std::nullopt;
}

std::vector<std::string> HybridSystem::primed_names() const {
    std::vector<std::string> names = vars;
    for (const auto& v : vars) names.push_back(v + "'");
    return names;
}

// ---------------------------------------------------------------------------
// Lexer

namespace {

enum class Tok { Ident, Number, Symbol, End };

struct Token {
    Tok kind;
    std::string text;
    int line;
    int col;
};

std::vector<Token> lex(std::string_view src) {
    std::vector<Token> out;
    int line = 1, col = 1;
    std::size_t i = 0;
    auto advance = [&](std::size_t k) {
        for (std::size_t j = 0; j < k; ++j) {
            if (src[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
            ++i;
        }
    };
    while (i < src.size()) {
        char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            continue;
        }
        if (c == '#' || (c == '/' && i + 1 < src.size() && src[i + 1] == '/')) {
            while (i < src.size() && src[i] != '\n') advance(1);
            continue;
        }
        int tl = line, tc = col;
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
            out.push_back({Tok::Ident, std::string(src.substr(i, j - i)), tl, tc});
            advance(j - i);
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
            std::size_t j = i;
            while (j < src.size() && (std::isdigit(static_cast<unsigned char>(src[j])) || src[j] == '.')) ++j;
            if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
                if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
                    while (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) ++k;
                    j = k;
                }
            }
            out.push_back({Tok::Number, std::string(src.substr(i, j - i)), tl, tc});
            advance(j - i);
            continue;
        }
        static const char* two[] = {">=", "<=", "==", "&&", "->", "**"};
        bool matched = false;
        for (const char* t : two) {
            if (src.substr(i, 2) == t) {
                out.push_back({Tok::Symbol, t, tl, tc});
                advance(2);
                matched = true;
                break;
            }
        }
        if (matched) continue;
        if (std::string_view(";{}()+-*/^=<>,'").find(c) != std::string_view::npos) {
            out.push_back({Tok::Symbol, std::string(1, c), tl, tc});
            advance(1);
            continue;
        }
        throw ParseError(std::string("unexpected character '") + c + "'", tl, tc);
    }
    out.push_back({Tok::End, "", line, col});
    return out;
}

// ---------------------------------------------------------------------------
// Parser

class Parser {
public:
    explicit Parser(std::string_view src) : toks_(lex(src)) {}

    HybridSystem system();
    QPoly standalone_poly(const std::vector<std::string>& names) {
        names_ = names;
        allow_primed_ = true;
        QPoly p = expr();
        expect_end();
        return p;
    }

private:
    const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
    const Token& next() { return toks_[std::min(pos_++, toks_.size() - 1)]; }
    bool is(std::string_view sym) const { return peek().kind != Tok::End && peek().kind != Tok::Number && peek().text == sym; }
    bool accept(std::string_view sym) {
        if (is(sym)) {
            ++pos_;
            return true;
        }
        return false;
    }
    [[noreturn]] void fail(const std::string& msg, const Token& at) const { throw ParseError(msg, at.line, at.col); }
    void expect(std::string_view sym) {
        if (!accept(sym)) fail("expected '" + std::string(sym) + "' but found '" + describe(peek()) + "'", peek());
    }
    void expect_end() {
        if (peek().kind != Tok::End) fail("unexpected '" + describe(peek()) + "'", peek());
    }
    static std::string describe(const Token& t) { return t.kind == Tok::End ? "end of input" : t.text; }
    std::string ident(const char* what) {
        if (peek().kind != Tok::Ident) fail(std::string("expected ") + what, peek());
        return next().text;
    }

    std::size_t nvars() const { return vars_.size(); }

    // Polynomial expressions over names_ (x or x, x').
    QPoly expr();
    QPoly term();
    QPoly unary();
    QPoly power();
    QPoly primary();

    SemialgebraicSet conjunction();
    void atom(SemialgebraicSet& set);
    void location_block(HybridSystem& h, std::vector<std::vector<bool>>& flow_seen);
    void transition_block(HybridSystem& h);

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    std::vector<std::string> vars_;
    std::vector<std::string> names_;
    bool allow_primed_ = false;
};

QPoly Parser::expr() {
    QPoly acc = term();
    while (true) {
        if (accept("+"))
            acc += term();
        else if (accept("-"))
            acc -= term();
        else
            return acc;
    }
}

QPoly Parser::term() {
    QPoly acc = unary();
    while (true) {
        if (accept("*")) {
            acc = acc * unary();
        } else if (is("/")) {
            const Token& at = next();
            QPoly d = unary();
            if (d.degree() > 0) fail("non-polynomial expression: division by a non-constant", at);
            Rational c = d.coefficient(Monomial(d.nvars()));
            if (c == 0) fail("division by zero", at);
            acc *= Rational(1 / c);
        } else {
            return acc;
        }
    }
}

QPoly Parser::unary() {
    if (accept("-")) return -unary();
    if (accept("+")) return unary();
    return power();
}

QPoly Parser::power() {
    QPoly base = primary();
    if (is("^") || is("**")) {
        const Token& at = next();
        bool negative = accept("-");
        if (peek().kind != Tok::Number) fail("non-polynomial expression: exponent must be an integer literal", at);
        const Token& num = next();
        if (negative || num.text.find_first_not_of("0123456789") != std::string::npos)
            fail("non-polynomial expression: exponent must be a non-negative integer", num);
        long e = std::stol(num.text);
        if (e > 64) fail("exponent too large", num);
        QPoly r = QPoly::constant(base.nvars(), Rational(1));
        for (long k = 0; k < e; ++k) r = r * base;
        return r;
    }
    return base;
}

QPoly Parser::primary() {
    const std::size_t n = names_.size();
    const Token& t = peek();
    if (t.kind == Tok::Number) {
        next();
        try {
            return QPoly::constant(n, parse_rational(t.text));
        } catch (const std::invalid_argument& e) {
            fail(e.what(), t);
        }
    }
    if (accept("(")) {
        QPoly p = expr();
        expect(")");
        return p;
    }
    if (t.kind == Tok::Ident) {
        next();
        if (is("(")) fail("non-polynomial expression: function '" + t.text + "' is not allowed", t);
        bool primed = accept("'");
        std::string name = t.text + (primed ? "'" : "");
        if (primed && !allow_primed_) fail("primed variable '" + name + "' is only allowed in resets", t);
        auto it = std::find(names_.begin(), names_.end(), name);
        if (it == names_.end()) fail("unknown variable '" + name + "'", t);
        return QPoly::variable(n, static_cast<std::size_t>(it - names_.begin()));
    }
    fail("expected an expression but found '" + describe(t) + "'", t);
}

void Parser::atom(SemialgebraicSet& set) {
    const Token& at = peek();
    QPoly lhs = expr();
    if (is("<") || is(">")) fail("strict inequalities are not supported; use >= or <=", peek());
    if (accept(">=")) {
        set.ge.push_back(lhs - expr());
    } else if (accept("<=")) {
        QPoly rhs = expr();
        set.ge.push_back(rhs - lhs);
    } else if (accept("=") || accept("==")) {
        set.eq.push_back(lhs - expr());
    } else {
        fail("expected a relation (>=, <=, =) after expression", at);
    }
}

SemialgebraicSet Parser::conjunction() {
    SemialgebraicSet s;
    if (peek().kind == Tok::Ident && peek().text == "true" && (peek(1).text == ";" )) {
        next();
        return s;
    }
    atom(s);
    while (accept("&&")) atom(s);
    return s;
}

void Parser::location_block(HybridSystem& h, std::vector<std::vector<bool>>& flow_seen) {
    const Token& head = peek();
    Location loc;
    loc.id = ident("location name");
    if (h.location_index(loc.id)) fail("duplicate location '" + loc.id + "'", head);
    loc.flow.assign(nvars(), QPoly(nvars()));
    std::vector<bool> seen(nvars(), false);
    expect("{");
    names_ = vars_;
    allow_primed_ = false;
    while (!accept("}")) {
        if (peek().kind == Tok::End) fail("unterminated location block", peek());
        const Token& kw = peek();
        bool flow_stmt = kw.kind == Tok::Ident && (kw.text == "flow" || peek(1).text == "'");
        if (flow_stmt) {
            if (kw.text == "flow" && peek(1).text != "'") next();
            do {
                const Token& v = peek();
                std::string name = ident("variable in flow");
                expect("'");
                auto it = std::find(vars_.begin(), vars_.end(), name);
                if (it == vars_.end()) fail("unknown variable '" + name + "'", v);
                auto idx = static_cast<std::size_t>(it - vars_.begin());
                if (seen[idx]) fail("duplicate flow for '" + name + "'", v);
                expect("=");
                loc.flow[idx] = expr();
                seen[idx] = true;
            } while (accept(","));
            expect(";");
        } else if (kw.kind == Tok::Ident && kw.text == "inv") {
            next();
            SemialgebraicSet s = conjunction();
            loc.inv.ge.insert(loc.inv.ge.end(), s.ge.begin(), s.ge.end());
            loc.inv.eq.insert(loc.inv.eq.end(), s.eq.begin(), s.eq.end());
            expect(";");
        } else if (kw.kind == Tok::Ident && kw.text == "unsafe") {
            next();
            loc.unsafe.push_back(conjunction());
            expect(";");
        } else {
            fail("unexpected '" + describe(kw) + "' in location block", kw);
        }
    }
    for (std::size_t i = 0; i < nvars(); ++i)
        if (!seen[i]) fail("location '" + loc.id + "' has no flow for '" + vars_[i] + "'", head);
    flow_seen.push_back(seen);
    h.locations.push_back(std::move(loc));
}

void Parser::transition_block(HybridSystem& h) {
    const Token& a = peek();
    std::string from = ident("source location");
    expect("->");
    const Token& b = peek();
    std::string to = ident("target location");
    auto pre = h.location_index(from);
    if (!pre) fail("unknown location '" + from + "'", a);
    auto post = h.location_index(to);
    if (!post) fail("unknown location '" + to + "'", b);
    Transition tr;
    tr.pre = *pre;
    tr.post = *post;
    expect("{");
    while (!accept("}")) {
        const Token& kw = peek();
        if (kw.kind == Tok::Ident && kw.text == "guard") {
            next();
            names_ = vars_;
            allow_primed_ = false;
            SemialgebraicSet s = conjunction();
            tr.guard.ge.insert(tr.guard.ge.end(), s.ge.begin(), s.ge.end());
            tr.guard.eq.insert(tr.guard.eq.end(), s.eq.begin(), s.eq.end());
            expect(";");
        } else if (kw.kind == Tok::Ident && kw.text == "reset") {
            next();
            names_ = vars_;
            for (const auto& v : vars_) names_.push_back(v + "'");
            allow_primed_ = true;
            SemialgebraicSet s = conjunction();
            tr.reset.ge.insert(tr.reset.ge.end(), s.ge.begin(), s.ge.end());
            tr.reset.eq.insert(tr.reset.eq.end(), s.eq.begin(), s.eq.end());
            expect(";");
        } else {
            fail("unexpected '" + describe(kw) + "' in transition block", kw);
        }
    }
    if (tr.reset.is_universe()) tr.reset = identity_reset(nvars());
    h.transitions.push_back(std::move(tr));
}

HybridSystem Parser::system() {
    HybridSystem h;
    std::vector<std::vector<bool>> flow_seen;
    std::optional<std::string> init_loc_name;
    Token init_loc_tok{};
    std::vector<SemialgebraicSet> global_unsafe;
    std::vector<std::size_t> pending_init_tokens;
    bool have_init = false;
    std::size_t init_pos = 0;

    // Two passes would complicate error positions; instead remember where the
    // init conjunction starts and parse it once variables are known.
    while (peek().kind != Tok::End) {
        const Token& kw = peek();
        if (kw.kind != Tok::Ident) fail("expected a declaration but found '" + describe(kw) + "'", kw);
        next();
        if (kw.text == "system") {
            h.name = ident("system name");
            expect(";");
        } else if (kw.text == "vars") {
            if (!vars_.empty()) fail("variables declared twice", kw);
            while (peek().kind == Tok::Ident) vars_.push_back(next().text);
            if (vars_.empty()) fail("expected at least one variable", peek());
            expect(";");
            h.vars = vars_;
        } else if (kw.text == "init") {
            if (vars_.empty()) fail("init declared before vars", kw);
            if (have_init) fail("init declared twice", kw);
            names_ = vars_;
            allow_primed_ = false;
            init_pos = pos_;
            h.init = conjunction();
            have_init = true;
            expect(";");
        } else if (kw.text == "init_location") {
            init_loc_tok = peek();
            init_loc_name = ident("location name");
            expect(";");
        } else if (kw.text == "unsafe") {
            if (vars_.empty()) fail("unsafe declared before vars", kw);
            names_ = vars_;
            allow_primed_ = false;
            global_unsafe.push_back(conjunction());
            expect(";");
        } else if (kw.text == "location") {
            if (vars_.empty()) fail("location declared before vars", kw);
            location_block(h, flow_seen);
        } else if (kw.text == "transition") {
            transition_block(h);
        } else {
            fail("unknown declaration '" + kw.text + "'", kw);
        }
    }
    (void)init_pos;
    if (vars_.empty()) fail("missing vars declaration", peek());
    if (!have_init) fail("missing init declaration", peek());
    if (h.locations.empty()) fail("system has no locations", peek());
    if (init_loc_name) {
        auto idx = h.location_index(*init_loc_name);
        if (!idx) fail("unknown location '" + *init_loc_name + "'", init_loc_tok);
        h.init_loc = *idx;
    }
    for (auto& loc : h.locations)
        for (const auto& u : global_unsafe) loc.unsafe.push_back(u);
    return h;
}

}  // namespace

HybridSystem parse_system(std::string_view text) {
    Parser p(text);
    return p.system();
}

QPoly parse_polynomial(std::string_view text, const std::vector<std::string>& names) {
    Parser p(text);
    return p.standalone_poly(names);
}

// ---------------------------------------------------------------------------
// Rendering

std::string render_set(const SemialgebraicSet& s, const std::vector<std::string>& names) {
    if (s.is_universe()) return "true";
    std::string out;
    for (const auto& p : s.ge) {
        if (!out.empty()) out += " && ";
        out += to_string(p, names) + " >= 0";
    }
    for (const auto& p : s.eq) {
        if (!out.empty()) out += " && ";
        out += to_string(p, names) + " = 0";
    }
    return out;
}

std::string render_system(const HybridSystem& h) {
    std::string out;
    out += "system " + (h.name.empty() ? std::string("unnamed") : h.name) + ";\n";
    out += "vars";
    for (const auto& v : h.vars) out += " " + v;
    out += ";\n";
    out += "init " + render_set(h.init, h.vars) + ";\n";
    if (!h.locations.empty()) out += "init_location " + h.locations[h.init_loc].id + ";\n";
    for (const auto& loc : h.locations) {
        out += "location " + loc.id + " {\n";
        for (std::size_t i = 0; i < loc.flow.size(); ++i)
            out += "  flow " + h.vars[i] + "' = " + to_string(loc.flow[i], h.vars) + ";\n";
        if (!loc.inv.is_universe()) out += "  inv " + render_set(loc.inv, h.vars) + ";\n";
        for (const auto& u : loc.unsafe) out += "  unsafe " + render_set(u, h.vars) + ";\n";
        out += "}\n";
    }
    auto pn = h.primed_names();
    for (const auto& t : h.transitions) {
        out += "transition " + h.locations[t.pre].id + " -> " + h.locations[t.post].id + " {\n";
        if (!t.guard.is_universe()) out += "  guard " + render_set(t.guard, h.vars) + ";\n";
        if (!t.reset.is_universe()) out += "  reset " + render_set(t.reset, pn) + ";\n";
        out += "}\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Validation and sampling

namespace {

Rational random_rational(std::mt19937_64& rng, const Rational& radius) {
    // Uniform on a grid of step 1/1024 in [-radius, radius].
    std::uniform_int_distribution<long> dist(-1024, 1024);
    return Rational(dist(rng), 1024) * radius;
}

// Index of a variable in which p is affine with a nonzero constant
// coefficient and which is not yet fixed.
std::optional<std::size_t> solvable_variable(const QPoly& p, const std::vector<bool>& fixed) {
    for (std::size_t v = 0; v < p.nvars(); ++v) {
        if (fixed[v]) continue;
        QPoly d = p.derivative(v);
        if (d.is_zero()) continue;
        if (d.degree() == 0) return v;
    }
    return std::nullopt;
}

}  // namespace

std::vector<std::vector<Rational>> sample_set(const SemialgebraicSet& set, std::size_t nvars, std::mt19937_64& rng,
                                              int attempts, const Rational& radius) {
    std::vector<std::vector<Rational>> out;
    auto bounds = box_bounds(set, nvars);
    for (int a = 0; a < attempts; ++a) {
        std::vector<Rational> pt(nvars);
        for (std::size_t i = 0; i < nvars; ++i) {
            const auto& b = bounds[i];
            if (b.lo && b.hi) {
                std::uniform_int_distribution<long> dist(0, 1024);
                pt[i] = *b.lo + (*b.hi - *b.lo) * Rational(dist(rng), 1024);
            } else if (b.lo) {
                pt[i] = *b.lo + abs(random_rational(rng, radius));
            } else if (b.hi) {
                pt[i] = *b.hi - abs(random_rational(rng, radius));
            } else {
                pt[i] = random_rational(rng, radius);
            }
        }
        // Solve linear equalities for one free variable each.
        std::vector<bool> fixed(nvars, false);
        bool ok = true;
        for (const auto& e : set.eq) {
            auto v = solvable_variable(e, fixed);
            if (!v) continue;
            QPoly d = e.derivative(*v);
            Rational a = d.coefficient(Monomial(nvars));
            std::vector<Rational> probe = pt;
            probe[*v] = 0;
            Rational rest = e.evaluate(probe);
            pt[*v] = -rest / a;
            fixed[*v] = true;
        }
        if (ok && set.contains(pt)) out.push_back(std::move(pt));
    }
    return out;
}

std::vector<Interval> box_bounds(const SemialgebraicSet& set, std::size_t nvars) {
    std::vector<Interval> box(nvars);
    auto tighten_lo = [&](std::size_t v, const Rational& x) {
        if (!box[v].lo || *box[v].lo < x) box[v].lo = x;
    };
    auto tighten_hi = [&](std::size_t v, const Rational& x) {
        if (!box[v].hi || *box[v].hi > x) box[v].hi = x;
    };
    auto single_var = [&](const QPoly& p) -> std::optional<std::size_t> {
        std::optional<std::size_t> var;
        for (const auto& [m, c] : p.terms()) {
            for (std::size_t i = 0; i < nvars; ++i) {
                if (m[i] == 0) continue;
                if (var && *var != i) return std::nullopt;
                var = i;
            }
        }
        return var;
    };
    auto linear_bound = [&](const QPoly& p, bool is_eq) {
        if (p.degree() != 1) return;
        auto v = single_var(p);
        if (!v) return;
        Rational a = p.coefficient(Monomial::variable(nvars, *v));
        Rational b = p.coefficient(Monomial(nvars));
        Rational root = -b / a;
        if (is_eq || a > 0) tighten_lo(*v, root);
        if (is_eq || a < 0) tighten_hi(*v, root);
    };
    for (const auto& p : set.ge) linear_bound(p, false);
    for (const auto& p : set.eq) linear_bound(p, true);

    // Separable concave quadratics c - sum a_i (x_i - b_i)^2 >= 0 bound every
    // variable that occurs; the irrational radius is rounded outward.
    for (const auto& p : set.ge) {
        if (p.degree() != 2) continue;
        bool separable = true;
        std::vector<Rational> sq(nvars), lin(nvars);
        Rational c0 = 0;
        for (const auto& [m, c] : p.terms()) {
            int nz = 0;
            for (std::size_t i = 0; i < nvars; ++i) nz += m[i] > 0;
            if (m.degree() == 0) {
                c0 = c;
            } else if (nz != 1) {
                separable = false;
            } else {
                for (std::size_t i = 0; i < nvars; ++i) {
                    if (m[i] == 2) sq[i] = c;
                    if (m[i] == 1) lin[i] = c;
                }
            }
        }
        if (!separable) continue;
        bool concave = true;
        for (std::size_t i = 0; i < nvars; ++i) {
            if (sq[i] > 0 || (sq[i] == 0 && lin[i] != 0)) concave = false;
        }
        if (!concave) continue;
        // p = c0 + sum (sq_i x_i^2 + lin_i x_i), sq_i < 0: complete squares.
        Rational slack = c0;
        std::vector<Rational> center(nvars);
        for (std::size_t i = 0; i < nvars; ++i) {
            if (sq[i] == 0) continue;
            center[i] = -lin[i] / (2 * sq[i]);
            slack += -sq[i] * center[i] * center[i];
        }
        if (slack < 0) continue;
        for (std::size_t i = 0; i < nvars; ++i) {
            if (sq[i] == 0) continue;
            double r = std::sqrt(Rational(slack / -sq[i]).get_d());
            Rational rr = round_to_denominator(r * (1 + 1e-9) + 1e-9, Integer(1 << 20)) + Rational(1, 1 << 20);
            tighten_lo(i, center[i] - rr);
            tighten_hi(i, center[i] + rr);
        }
    }
    return box;
}

SemialgebraicSet identity_reset(std::size_t nvars) {
    SemialgebraicSet s;
    for (std::size_t i = 0; i < nvars; ++i)
        s.eq.push_back(QPoly::variable(2 * nvars, nvars + i) - QPoly::variable(2 * nvars, i));
    return s;
}

std::optional<FunctionalReset> functional_reset(const Transition& t, std::size_t n) {
    std::vector<std::optional<QPoly>> images(n);
    std::vector<bool> used(t.reset.eq.size(), false);
    for (std::size_t e = 0; e < t.reset.eq.size(); ++e) {
        const QPoly& p = t.reset.eq[e];
        std::optional<std::size_t> target;
        bool ok = true;
        for (std::size_t i = 0; i < n && ok; ++i) {
            QPoly d = p.derivative(n + i);
            if (d.is_zero()) continue;
            if (target || d.degree() != 0) ok = false;
            target = i;
        }
        if (!ok || !target || images[*target]) continue;
        Rational a = p.derivative(n + *target).coefficient(Monomial(2 * n));
        QPoly rest = p - QPoly::variable(2 * n, n + *target) * a;
        // rest depends on x only; drop the primed half.
        QPoly img(n);
        for (const auto& [m, c] : rest.terms()) {
            std::vector<int> ex(m.exponents().begin(), m.exponents().begin() + static_cast<long>(n));
            img.add_term(Monomial(std::move(ex)), Rational(-c / a));
        }
        images[*target] = std::move(img);
        used[e] = true;
    }
    FunctionalReset out;
    for (auto& im : images) {
        if (!im) return std::nullopt;
        out.images.push_back(std::move(*im));
    }
    std::vector<QPoly> subst;
    for (std::size_t i = 0; i < n; ++i) subst.push_back(QPoly::variable(n, i));
    for (const auto& im : out.images) subst.push_back(im);
    for (const auto& g : t.reset.ge) out.rest.ge.push_back(g.compose(subst));
    for (std::size_t e = 0; e < t.reset.eq.size(); ++e)
        if (!used[e]) {
            QPoly q = t.reset.eq[e].compose(subst);
            if (!q.is_zero()) out.rest.eq.push_back(std::move(q));
        }
    return out;
}

std::vector<Diagnostic> validate_system(const HybridSystem& h, std::uint64_t seed, int samples) {
    std::vector<Diagnostic> diags;
    auto error = [&](std::string m) { diags.push_back({Diagnostic::Severity::Error, std::move(m)}); };
    const std::size_t n = h.nvars();
    if (n == 0) error("system declares no variables");
    std::set<std::string> seen;
    for (const auto& v : h.vars)
        if (!seen.insert(v).second) error("duplicate variable name '" + v + "'");
    std::set<std::string> locs;
    for (const auto& l : h.locations)
        if (!locs.insert(l.id).second) error("duplicate location '" + l.id + "'");
    if (h.locations.empty()) error("system has no locations");
    if (h.init_loc >= h.locations.size()) error("initial location index out of range");

    auto check_set = [&](const SemialgebraicSet& s, std::size_t dim, const std::string& where) {
        for (const auto& p : s.ge)
            if (p.nvars() != dim) error(where + ": polynomial dimension mismatch");
        for (const auto& p : s.eq)
            if (p.nvars() != dim) error(where + ": polynomial dimension mismatch");
    };
    check_set(h.init, n, "init");
    for (const auto& l : h.locations) {
        if (l.flow.size() != n) error("location '" + l.id + "': flow has " + std::to_string(l.flow.size()) + " components, expected " + std::to_string(n));
        for (const auto& f : l.flow)
            if (f.nvars() != n) error("location '" + l.id + "': flow dimension mismatch");
        check_set(l.inv, n, "location '" + l.id + "' inv");
        for (const auto& u : l.unsafe) check_set(u, n, "location '" + l.id + "' unsafe");
    }
    for (std::size_t t = 0; t < h.transitions.size(); ++t) {
        const auto& tr = h.transitions[t];
        std::string where = "transition " + std::to_string(t);
        if (tr.pre >= h.locations.size() || tr.post >= h.locations.size()) error(where + ": unknown location reference");
        check_set(tr.guard, n, where + " guard");
        check_set(tr.reset, 2 * n, where + " reset");
    }
    if (!diags.empty()) return diags;

    // Sampled semantic check of init |= inv(l0).
    const auto& inv0 = h.locations[h.init_loc].inv;
    if (!inv0.is_universe()) {
        std::mt19937_64 rng(seed);
        for (Rational radius : {Rational(1), Rational(10), Rational(100)}) {
            auto pts = sample_set(h.init, n, rng, samples / 3, radius);
            for (const auto& p : pts) {
                if (!inv0.contains(p)) {
                    std::string s = "(";
                    for (std::size_t i = 0; i < n; ++i) s += (i ? ", " : "") + to_string(p[i]);
                    diags.push_back({Diagnostic::Severity::Warning,
                                     "initial state " + s + ") violates the invariant of initial location '" +
                                         h.locations[h.init_loc].id + "' (sampled check)"});
                    return diags;
                }
            }
        }
    }
    return diags;
}

}  // namespace exinv
