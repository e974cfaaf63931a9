#include "exinv/certificate.hpp"

namespace exinv {

std::size_t GramBlock::var(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return vars.at(i * side - i * (i - 1) / 2 + (j - i));
}

std::vector<GramBlock> gram_blocks(const SosProgram& p) {
    std::vector<GramBlock> out;
    for (std::size_t ci = 0; ci < p.constraints.size(); ++ci) {
        const auto& c = p.constraints[ci];
        for (std::size_t ti = 0; ti < c.terms.size(); ++ti) {
            const auto& t = c.terms[ti];
            if (t.kind != SosTerm::Kind::Sos || t.basis.empty()) continue;
            GramBlock b;
            b.constraint = ci;
            b.term = ti;
            b.bilinear = t.templ.has_value();
            b.side = t.basis.size();
            b.vars = t.vars;
            out.push_back(std::move(b));
        }
        if (c.eps_var) {
            GramBlock b;
            b.constraint = ci;
            b.eps = true;
            b.side = 1;
            b.vars = {*c.eps_var};
            out.push_back(std::move(b));
        }
    }
    return out;
}

Eigen::MatrixXd block_matrix(const GramBlock& b, const std::vector<double>& values) {
    const auto s = static_cast<Eigen::Index>(b.side);
    Eigen::MatrixXd m(s, s);
    for (Eigen::Index i = 0; i < s; ++i)
        for (Eigen::Index j = i; j < s; ++j)
            m(i, j) = m(j, i) = values[b.var(static_cast<std::size_t>(i), static_cast<std::size_t>(j))];
    return m;
}

QMat block_matrix(const GramBlock& b, const std::vector<Rational>& values) {
    QMat m(b.side, b.side);
    for (std::size_t i = 0; i < b.side; ++i)
        for (std::size_t j = i; j < b.side; ++j) m(i, j) = m(j, i) = values[b.var(i, j)];
    return m;
}

}  // namespace exinv
