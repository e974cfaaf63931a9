#include "exinv/polynomial.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

namespace exinv {

Monomial::Monomial(std::vector<int> exps) : exps_(std::move(exps)) {
    for (int e : exps_) {
        if (e < 0) throw std::invalid_argument("negative exponent");
        degree_ += e;
    }
}

Monomial Monomial::variable(std::size_t nvars, std::size_t index, int power) {
    if (index >= nvars) throw std::invalid_argument("variable index out of range");
    std::vector<int> e(nvars, 0);
    e[index] = power;
    return Monomial(std::move(e));
}

Monomial Monomial::operator*(const Monomial& other) const {
    if (other.nvars() != nvars()) throw std::invalid_argument("monomial dimension mismatch");
    std::vector<int> e(exps_);
    for (std::size_t i = 0; i < e.size(); ++i) e[i] += other.exps_[i];
    return Monomial(std::move(e));
}

std::string Monomial::to_string(const std::vector<std::string>& names) const {
    std::string out;
    for (std::size_t i = 0; i < exps_.size(); ++i) {
        if (exps_[i] == 0) continue;
        if (!out.empty()) out += "*";
        out += names.at(i);
        if (exps_[i] > 1) out += "^" + std::to_string(exps_[i]);
    }
    return out.empty() ? "1" : out;
}

namespace {

void homogeneous(std::size_t var, std::size_t n, int remaining, std::vector<int>& cur, std::vector<Monomial>& out) {
    if (var + 1 == n) {
        cur[var] = remaining;
        out.emplace_back(cur);
        cur[var] = 0;
        return;
    }
    for (int e = remaining; e >= 0; --e) {
        cur[var] = e;
        homogeneous(var + 1, n, remaining - e, cur, out);
    }
    cur[var] = 0;
}

}  // namespace

std::vector<Monomial> homogeneous_basis(std::size_t n, int d) {
    if (n == 0) throw std::invalid_argument("monomial basis needs at least one variable");
    std::vector<Monomial> out;
    if (d < 0) return out;
    std::vector<int> cur(n, 0);
    homogeneous(0, n, d, cur, out);
    return out;
}

std::vector<Monomial> monomial_basis(std::size_t n, int d) {
    if (n == 0) throw std::invalid_argument("monomial basis needs at least one variable");
    std::vector<Monomial> out;
    for (int k = 0; k <= d; ++k) {
        auto h = homogeneous_basis(n, k);
        out.insert(out.end(), h.begin(), h.end());
    }
    return out;
}

std::vector<std::string> default_names(std::size_t n) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) names.push_back("x" + std::to_string(i + 1));
    return names;
}

DPoly to_double(const QPoly& p) {
    return p.map_coefficients([](const Rational& q) { return q.get_d(); });
}

double norm2_squared(const DPoly& p) {
    double s = 0.0;
    for (const auto& [m, c] : p.terms()) s += c * c;
    return s;
}

namespace {

template <class T, class Fmt>
std::string render(const Poly<T>& p, const std::vector<std::string>& names, Fmt fmt) {
    if (p.is_zero()) return "0";
    std::string out;
    bool first = true;
    for (const auto& [m, c] : p.terms()) {
        bool negative = c < 0;
        T mag = negative ? T(-c) : c;
        if (first)
            out += negative ? "-" : "";
        else
            out += negative ? " - " : " + ";
        first = false;
        if (m.degree() == 0) {
            out += fmt(mag);
        } else if (mag == 1) {
            out += m.to_string(names);
        } else {
            out += fmt(mag) + "*" + m.to_string(names);
        }
    }
    return out;
}

}  // namespace

std::string to_string(const QPoly& p, const std::vector<std::string>& names) {
    return render(p, names, [](const Rational& q) { return exinv::to_string(q); });
}

std::string to_string(const QPoly& p) { return to_string(p, default_names(p.nvars())); }

std::string to_string(const DPoly& p, const std::vector<std::string>& names) {
    return render(p, names, [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    });
}

Rational eval_exact(const QPoly& p, std::span<const Rational> point) { return p.evaluate(point); }

}  // namespace exinv
