#include "exinv/refine.hpp"

#include <cmath>

#include "exinv/recover.hpp"

namespace exinv {

ResidualSet backward_error(const CertificateNumeric& cert, const SosProgram& prog) {
    if (cert.values.size() != prog.unknowns.size())
        throw std::invalid_argument("certificate does not match the program's unknowns");
    std::vector<double> v = cert.values;
    for (const auto& [id, q] : cert.frozen) v[id] = q.get_d();
    ResidualSet out;
    for (const auto& c : prog.constraints) out.residuals.emplace_back(c.nvars);
    for (const auto& row : compile_identities(prog)) {
        double r = row.expr.evaluate(v);
        out.residuals[row.constraint].add_term(row.monomial, r);
        out.theta += r * r;
    }
    return out;
}

CertificateNumeric freeze_bilinear(const SosProgram& prog, const std::vector<double>& values, const Integer& D) {
    CertificateNumeric out;
    out.values = values;
    for (const auto& c : prog.constraints)
        for (const auto& t : c.terms) {
            if (!t.templ) continue;
            if (t.kind == SosTerm::Kind::Sos) {
                if (t.basis.empty()) continue;
                QMat w = truncate_psd_rational(gram_matrix(t, values), D);
                for (std::size_t i = 0; i < t.basis.size(); ++i)
                    for (std::size_t j = i; j < t.basis.size(); ++j) out.frozen[t.gram_var(i, j)] = w(i, j);
            } else {
                for (std::size_t v : t.vars) out.frozen[v] = round_to_denominator(values[v], D);
            }
        }
    for (const auto& [id, q] : out.frozen) out.values[id] = q.get_d();
    return out;
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Factor {
    std::size_t block = 0;
    Eigen::Index rank = 0;
    std::size_t offset = 0;  // first parameter index
};

class Refiner {
public:
    Refiner(const CertificateNumeric& cert, const SosProgram& prog, const RefineConfig& cfg)
        : prog_(prog), cfg_(cfg), hp_(hyperplane_system(prog, cert.frozen)), cert_(cert) {
        const auto nr = static_cast<Eigen::Index>(hp_.nrows());
        const auto nc = static_cast<Eigen::Index>(hp_.ncols());
        a_ = MatrixXd::Zero(nr, nc);
        b_ = VectorXd::Zero(nr);
        for (Eigen::Index r = 0; r < nr; ++r) {
            for (const auto& [col, q] : hp_.rows[static_cast<std::size_t>(r)]) a_(r, static_cast<Eigen::Index>(col)) = q.get_d();
            b_(r) = hp_.rhs[static_cast<std::size_t>(r)].get_d();
        }
        for (const auto& g : gram_blocks(prog))
            if (!g.bilinear) blocks_.push_back(g);

        // Columns that belong to a factored block.
        std::vector<bool> in_block(hp_.ncols(), false);
        for (const auto& g : blocks_)
            for (std::size_t v : g.vars) {
                auto it = hp_.column_of.find(v);
                if (it != hp_.column_of.end()) in_block[it->second] = true;
            }
        for (std::size_t col = 0; col < hp_.ncols(); ++col)
            if (!in_block[col]) direct_.push_back(col);
    }

    VectorXd initial_parameters() {
        std::size_t np = direct_.size();
        std::vector<MatrixXd> ps;
        for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
            MatrixXd w = block_matrix(blocks_[bi], cert_.values);
            Eigen::SelfAdjointEigenSolver<MatrixXd> es(w);
            const auto& ev = es.eigenvalues();
            double norm = ev.cwiseAbs().maxCoeff();
            double thr = std::sqrt(cfg_.tau) * norm;
            std::vector<Eigen::Index> keep;
            for (Eigen::Index k = ev.size() - 1; k >= 0; --k)
                if (norm > 0 && ev(k) > thr) keep.push_back(k);
            MatrixXd p(static_cast<Eigen::Index>(keep.size()), w.rows());
            for (std::size_t r = 0; r < keep.size(); ++r)
                p.row(static_cast<Eigen::Index>(r)) = std::sqrt(ev(keep[r])) * es.eigenvectors().col(keep[r]).transpose();
            factors_.push_back({bi, p.rows(), np});
            np += static_cast<std::size_t>(p.size());
            ps.push_back(std::move(p));
        }
        VectorXd x(static_cast<Eigen::Index>(np));
        for (std::size_t k = 0; k < direct_.size(); ++k)
            x(static_cast<Eigen::Index>(k)) = cert_.values[hp_.columns[direct_[k]]];
        for (std::size_t f = 0; f < factors_.size(); ++f)
            x.segment(static_cast<Eigen::Index>(factors_[f].offset), ps[f].size()) =
                Eigen::Map<const VectorXd>(ps[f].data(), ps[f].size());
        return x;
    }

    MatrixXd factor(const VectorXd& x, const Factor& f) const {
        const auto s = static_cast<Eigen::Index>(blocks_[f.block].side);
        return Eigen::Map<const MatrixXd>(x.data() + f.offset, f.rank, s);
    }

    VectorXd columns_from(const VectorXd& x) const {
        VectorXd y = VectorXd::Zero(static_cast<Eigen::Index>(hp_.ncols()));
        for (std::size_t k = 0; k < direct_.size(); ++k) y(static_cast<Eigen::Index>(direct_[k])) = x(static_cast<Eigen::Index>(k));
        for (const auto& f : factors_) {
            const auto& g = blocks_[f.block];
            MatrixXd w = f.rank > 0 ? MatrixXd(factor(x, f).transpose() * factor(x, f))
                                    : MatrixXd::Zero(static_cast<Eigen::Index>(g.side), static_cast<Eigen::Index>(g.side));
            for (std::size_t i = 0; i < g.side; ++i)
                for (std::size_t j = i; j < g.side; ++j) {
                    auto it = hp_.column_of.find(g.var(i, j));
                    if (it != hp_.column_of.end())
                        y(static_cast<Eigen::Index>(it->second)) = w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                }
        }
        return y;
    }

    VectorXd residual(const VectorXd& x) const { return a_ * columns_from(x) - b_; }

    MatrixXd jacobian(const VectorXd& x) const {
        MatrixXd dy = MatrixXd::Zero(static_cast<Eigen::Index>(hp_.ncols()), x.size());
        for (std::size_t k = 0; k < direct_.size(); ++k) dy(static_cast<Eigen::Index>(direct_[k]), static_cast<Eigen::Index>(k)) = 1.0;
        for (const auto& f : factors_) {
            const auto& g = blocks_[f.block];
            MatrixXd p = factor(x, f);
            const auto s = static_cast<Eigen::Index>(g.side);
            for (Eigen::Index k = 0; k < f.rank; ++k)
                for (Eigen::Index l = 0; l < s; ++l) {
                    const auto param = static_cast<Eigen::Index>(f.offset) + l * f.rank + k;
                    for (Eigen::Index m = 0; m < s; ++m) {
                        auto it = hp_.column_of.find(g.var(static_cast<std::size_t>(l), static_cast<std::size_t>(m)));
                        if (it == hp_.column_of.end()) continue;
                        dy(static_cast<Eigen::Index>(it->second), param) += (m == l ? 2.0 : 1.0) * p(k, m);
                    }
                }
        }
        return a_ * dy;
    }

    CertificateNumeric result(const VectorXd& x) const {
        CertificateNumeric c = cert_;
        VectorXd y = columns_from(x);
        for (std::size_t col = 0; col < hp_.ncols(); ++col) c.values[hp_.columns[col]] = y(static_cast<Eigen::Index>(col));
        return c;
    }

private:
    const SosProgram& prog_;
    RefineConfig cfg_;
    HyperplaneSystem hp_;
    CertificateNumeric cert_;
    MatrixXd a_;
    VectorXd b_;
    std::vector<GramBlock> blocks_;
    std::vector<std::size_t> direct_;
    std::vector<Factor> factors_;
};

}  // namespace

RefineResult newton_refine(const CertificateNumeric& cert, const SosProgram& prog, const RefineConfig& cfg) {
    if (cert.values.size() != prog.unknowns.size())
        throw std::invalid_argument("certificate does not match the program's unknowns");
    Refiner rf(cert, prog, cfg);
    RefineResult out;
    VectorXd x = rf.initial_parameters();
    VectorXd r = rf.residual(x);
    double theta = r.squaredNorm();
    out.trace.push_back(theta);
    const double sq = std::sqrt(cfg.damping);
    while (theta >= cfg.tau && out.iterations < cfg.max_iters) {
        MatrixXd j = rf.jacobian(x);
        MatrixXd aug(j.rows() + j.cols(), j.cols());
        aug << j, sq * MatrixXd::Identity(j.cols(), j.cols());
        VectorXd rhs = VectorXd::Zero(aug.rows());
        rhs.head(r.size()) = -r;
        VectorXd step = aug.colPivHouseholderQr().solve(rhs);
        bool accepted = false;
        for (double alpha = 1.0; alpha > 1e-9; alpha *= 0.5) {
            VectorXd xn = x + alpha * step;
            VectorXd rn = rf.residual(xn);
            double tn = rn.squaredNorm();
            if (tn < theta) {
                x = std::move(xn);
                r = std::move(rn);
                theta = tn;
                accepted = true;
                break;
            }
        }
        if (!accepted) break;
        ++out.iterations;
        out.trace.push_back(theta);
    }
    out.cert = rf.result(x);
    out.theta = theta;
    out.converged = theta < cfg.tau;
    return out;
}

}  // namespace exinv
