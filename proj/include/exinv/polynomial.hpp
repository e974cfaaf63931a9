#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "exinv/matrix.hpp"
#include "exinv/rational.hpp"

namespace exinv {

/// x^a = x1^a1 * ... * xn^an.
class Monomial {
public:
    Monomial() = default;
    explicit Monomial(std::size_t nvars) : exps_(nvars, 0) {}
    explicit Monomial(std::vector<int> exps);

    static Monomial variable(std::size_t nvars, std::size_t index, int power = 1);

    std::size_t nvars() const { return exps_.size(); }
    int degree() const { return degree_; }
    int operator[](std::size_t i) const { return exps_[i]; }
    const std::vector<int>& exponents() const { return exps_; }

    Monomial operator*(const Monomial& other) const;
    friend bool operator==(const Monomial& a, const Monomial& b) { return a.exps_ == b.exps_; }

    std::string to_string(const std::vector<std::string>& names) const;

private:
    std::vector<int> exps_;
    int degree_ = 0;
};

/// Graded lexicographic order: total degree first, then x1 > x2 > ... within
/// a degree. For n = 2, d = 2 this gives 1, x1, x2, x1^2, x1*x2, x2^2.
struct GrlexLess {
    bool operator()(const Monomial& a, const Monomial& b) const {
        if (a.degree() != b.degree()) return a.degree() < b.degree();
        return a.exponents() > b.exponents();
    }
};

/// All monomials of total degree <= d in n variables, in graded lex order.
std::vector<Monomial> monomial_basis(std::size_t n, int d);

/// Monomials of total degree exactly d.
std::vector<Monomial> homogeneous_basis(std::size_t n, int d);

std::vector<std::string> default_names(std::size_t n);

/// Sparse multivariate polynomial over a coefficient field T (Rational or
/// double). The field is part of the type, so mixing fields does not compile;
/// conversions are explicit.
template <class T>
class Poly {
public:
    using Terms = std::map<Monomial, T, GrlexLess>;

    Poly() = default;
    explicit Poly(std::size_t nvars) : nvars_(nvars) {}

    static Poly constant(std::size_t nvars, const T& c) {
        Poly p(nvars);
        p.add_term(Monomial(nvars), c);
        return p;
    }
    static Poly variable(std::size_t nvars, std::size_t index) {
        Poly p(nvars);
        p.add_term(Monomial::variable(nvars, index), T(1));
        return p;
    }
    static Poly term(const Monomial& m, const T& c) {
        Poly p(m.nvars());
        p.add_term(m, c);
        return p;
    }

    std::size_t nvars() const { return nvars_; }
    const Terms& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    std::size_t size() const { return terms_.size(); }

    int degree() const { return terms_.empty() ? -1 : terms_.rbegin()->first.degree(); }

    T coefficient(const Monomial& m) const {
        auto it = terms_.find(m);
        return it == terms_.end() ? T(0) : it->second;
    }

    void add_term(const Monomial& m, const T& c) {
        if (m.nvars() != nvars_) throw std::invalid_argument("monomial dimension mismatch");
        if (c == 0) return;
        auto [it, inserted] = terms_.try_emplace(m, c);
        if (!inserted) {
            it->second += c;
            if (it->second == 0) terms_.erase(it);
        }
    }

    Poly& operator+=(const Poly& o) {
        check_dims(o);
        for (const auto& [m, c] : o.terms_) add_term(m, c);
        return *this;
    }
    Poly& operator-=(const Poly& o) {
        check_dims(o);
        for (const auto& [m, c] : o.terms_) add_term(m, T(-c));
        return *this;
    }
    Poly& operator*=(const T& s) {
        if (s == 0) {
            terms_.clear();
            return *this;
        }
        for (auto& [m, c] : terms_) c *= s;
        return *this;
    }

    friend Poly operator+(Poly a, const Poly& b) { return a += b; }
    friend Poly operator-(Poly a, const Poly& b) { return a -= b; }
    friend Poly operator-(Poly a) { return a *= T(-1); }
    friend Poly operator*(Poly a, const T& s) { return a *= s; }
    friend Poly operator*(const T& s, Poly a) { return a *= s; }

    friend Poly operator*(const Poly& a, const Poly& b) {
        a.check_dims(b);
        Poly r(a.nvars_);
        for (const auto& [ma, ca] : a.terms_)
            for (const auto& [mb, cb] : b.terms_) r.add_term(ma * mb, T(ca * cb));
        return r;
    }

    friend bool operator==(const Poly& a, const Poly& b) {
        return a.nvars_ == b.nvars_ && a.terms_ == b.terms_;
    }

    Poly derivative(std::size_t var) const {
        if (var >= nvars_) throw std::invalid_argument("derivative variable out of range");
        Poly r(nvars_);
        for (const auto& [m, c] : terms_) {
            int e = m[var];
            if (e == 0) continue;
            std::vector<int> exps = m.exponents();
            exps[var] -= 1;
            r.add_term(Monomial(std::move(exps)), T(c * T(e)));
        }
        return r;
    }

    T evaluate(std::span<const T> point) const {
        if (point.size() != nvars_) throw std::invalid_argument("evaluation point has wrong dimension");
        T sum(0);
        for (const auto& [m, c] : terms_) {
            T v = c;
            for (std::size_t i = 0; i < nvars_; ++i)
                for (int k = 0; k < m[i]; ++k) v *= point[i];
            sum += v;
        }
        return sum;
    }

    /// x_i -> images[i]; result lives in the images' variable space.
    Poly compose(const std::vector<Poly>& images) const {
        if (images.size() != nvars_) throw std::invalid_argument("compose needs one image per variable");
        std::size_t target = images.empty() ? 0 : images.front().nvars();
        for (const auto& im : images)
            if (im.nvars() != target) throw std::invalid_argument("compose images disagree on dimension");
        Poly r(target);
        std::vector<std::vector<Poly>> powers(nvars_);
        for (const auto& [m, c] : terms_) {
            Poly t = Poly::constant(target, c);
            for (std::size_t i = 0; i < nvars_; ++i) {
                auto& pw = powers[i];
                if (pw.empty()) pw.push_back(Poly::constant(target, T(1)));
                while (static_cast<int>(pw.size()) <= m[i]) pw.push_back(pw.back() * images[i]);
                if (m[i] > 0) t = t * pw[m[i]];
            }
            r += t;
        }
        return r;
    }

    /// Re-index variables: x_i -> x_{var_map[i]} in a space of new_nvars.
    Poly embed(std::size_t new_nvars, std::span<const std::size_t> var_map) const {
        if (var_map.size() != nvars_) throw std::invalid_argument("embed map has wrong size");
        Poly r(new_nvars);
        for (const auto& [m, c] : terms_) {
            std::vector<int> exps(new_nvars, 0);
            for (std::size_t i = 0; i < nvars_; ++i) {
                if (var_map[i] >= new_nvars) throw std::invalid_argument("embed target out of range");
                exps[var_map[i]] += m[i];
            }
            r.add_term(Monomial(std::move(exps)), c);
        }
        return r;
    }

    template <class Fn>
    auto map_coefficients(Fn fn) const {
        using U = decltype(fn(std::declval<const T&>()));
        Poly<U> r(nvars_);
        for (const auto& [m, c] : terms_) r.add_term(m, fn(c));
        return r;
    }

private:
    void check_dims(const Poly& o) const {
        if (o.nvars_ != nvars_) throw std::invalid_argument("polynomial dimension mismatch");
    }

    std::size_t nvars_ = 0;
    Terms terms_;
};

using QPoly = Poly<Rational>;
using DPoly = Poly<double>;

template <class T>
using VectorField = std::vector<Poly<T>>;

DPoly to_double(const QPoly& p);

/// Coefficient 2-norm squared.
double norm2_squared(const DPoly& p);

/// Canonical rendering: terms in graded lex order, rationals as num/den,
/// e.g. "-151/99 - 152/99*x1 - 62/33*x2".
std::string to_string(const QPoly& p, const std::vector<std::string>& names);
std::string to_string(const QPoly& p);
std::string to_string(const DPoly& p, const std::vector<std::string>& names);

/// Exact evaluation at a rational point.
Rational eval_exact(const QPoly& p, std::span<const Rational> point);

/// Sum_i dp/dx_i * f_i.
template <class T>
Poly<T> lie_derivative(const Poly<T>& p, const VectorField<T>& f) {
    if (f.size() != p.nvars()) throw std::invalid_argument("vector field dimension does not match polynomial");
    Poly<T> r(p.nvars());
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (f[i].nvars() != p.nvars()) throw std::invalid_argument("vector field component dimension mismatch");
        r += p.derivative(i) * f[i];
    }
    return r;
}

/// Square matrix representation m(x)^T W m(x).
template <class T>
struct GramForm {
    std::vector<Monomial> basis;
    Mat<T> matrix;
};

template <class T>
Poly<T> gram_expand(const GramForm<T>& g) {
    const auto n = g.basis.size();
    if (g.matrix.rows() != n || g.matrix.cols() != n) throw std::invalid_argument("Gram matrix side differs from basis length");
    if (n == 0) return Poly<T>();
    Poly<T> r(g.basis.front().nvars());
    for (std::size_t i = 0; i < n; ++i) {
        r.add_term(g.basis[i] * g.basis[i], g.matrix(i, i));
        for (std::size_t j = i + 1; j < n; ++j) {
            if (g.matrix(i, j) != g.matrix(j, i)) throw std::invalid_argument("Gram matrix is not symmetric");
            r.add_term(g.basis[i] * g.basis[j], T(g.matrix(i, j) * T(2)));
        }
    }
    return r;
}

}  // namespace exinv
