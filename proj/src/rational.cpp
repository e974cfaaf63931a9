#include "exinv/rational.hpp"

#include <cctype>
#include <cmath>

namespace exinv {

std::string to_string(const Rational& q) {
    if (q.get_den() == 1) return q.get_num().get_str();
    return q.get_num().get_str() + "/" + q.get_den().get_str();
}

namespace {

bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return true;
}

Integer pow10(long e) {
    Integer r;
    mpz_ui_pow_ui(r.get_mpz_t(), 10, static_cast<unsigned long>(e));
    return r;
}

}  // namespace

Rational parse_rational(std::string_view text) {
    std::string_view s = text;
    bool negative = false;
    if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
        negative = s.front() == '-';
        s.remove_prefix(1);
    }
    auto fail = [&] { throw std::invalid_argument("malformed number '" + std::string(text) + "'"); };

    Rational value;
    if (auto slash = s.find('/'); slash != std::string_view::npos) {
        auto num = s.substr(0, slash);
        auto den = s.substr(slash + 1);
        if (!all_digits(num) || !all_digits(den)) fail();
        Integer d(std::string(den), 10);
        if (d == 0) throw std::invalid_argument("zero denominator in '" + std::string(text) + "'");
        value = Rational(Integer(std::string(num), 10), d);
        value.canonicalize();
    } else {
        long exponent = 0;
        if (auto epos = s.find_first_of("eE"); epos != std::string_view::npos) {
            auto es = s.substr(epos + 1);
            bool eneg = false;
            if (!es.empty() && (es.front() == '-' || es.front() == '+')) {
                eneg = es.front() == '-';
                es.remove_prefix(1);
            }
            if (!all_digits(es) || es.size() > 6) fail();
            exponent = std::stol(std::string(es));
            if (eneg) exponent = -exponent;
            s = s.substr(0, epos);
        }
        std::string digits;
        if (auto dot = s.find('.'); dot != std::string_view::npos) {
            auto ip = s.substr(0, dot);
            auto fp = s.substr(dot + 1);
            if (ip.empty() && fp.empty()) fail();
            if ((!ip.empty() && !all_digits(ip)) || (!fp.empty() && !all_digits(fp))) fail();
            digits = std::string(ip) + std::string(fp);
            exponent -= static_cast<long>(fp.size());
        } else {
            if (!all_digits(s)) fail();
            digits = std::string(s);
        }
        Integer mant(digits, 10);
        if (exponent >= 0)
            value = Rational(mant * pow10(exponent));
        else
            value = Rational(mant, pow10(-exponent));
        value.canonicalize();
    }
    return negative ? Rational(-value) : value;
}

Rational exact_rational(double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("non-finite value has no rational form");
    Rational q;
    mpq_set_d(q.get_mpq_t(), x);
    return q;
}

Rational round_to_denominator(double x, const Integer& den) {
    // Rounding done exactly: floor(x*den + 1/2) on the exact binary value of x.
    Rational scaled = exact_rational(x) * den + Rational(1, 2);
    Integer fl;
    mpz_fdiv_q(fl.get_mpz_t(), scaled.get_num_mpz_t(), scaled.get_den_mpz_t());
    Rational r(fl, den);
    r.canonicalize();
    return r;
}

}  // namespace exinv
