#include "exinv/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace exinv {

std::string to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::Feasible: return "feasible";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Unknown: return "unknown";
    }
    return "?";
}

Eigen::MatrixXd LmiProblem::evaluate_block(std::size_t b, const std::vector<double>& y) const {
    Eigen::MatrixXd m = constant.at(b);
    for (std::size_t i = 0; i < vars.size(); ++i)
        for (const auto& t : vars[i])
            if (t.block == b) m += y[i] * t.matrix;
    return m;
}

double LmiProblem::min_eigenvalue(const std::vector<double>& y) const {
    std::vector<Eigen::MatrixXd> blocks = constant;
    for (std::size_t i = 0; i < vars.size(); ++i)
        for (const auto& t : vars[i]) blocks[t.block] += y[i] * t.matrix;
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& m : blocks) lo = std::min(lo, exinv::min_eigenvalue(m));
    return lo;
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Standard-form SDP with a diagonal (LP) block:
//   primal  min <C, X>  s.t. <A_k, X> = b_k, X >= 0
//   dual    max b'z     s.t. S = C - sum z_k A_k >= 0
struct Sdp {
    std::size_t m = 0;
    VectorXd b;
    std::vector<MatrixXd> c;
    std::vector<std::vector<std::pair<std::size_t, MatrixXd>>> a;  // per block
    VectorXd lp_c;
    std::vector<std::vector<std::pair<std::size_t, double>>> lp_a;  // per LP row
};

struct Iterate {
    std::vector<MatrixXd> x, s;
    VectorXd lx, ls;
    VectorXd z;
};

double inner(const MatrixXd& a, const MatrixXd& b) { return (a.array() * b.array()).sum(); }

MatrixXd sym(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

// Largest alpha with x + alpha * dx >= 0 (infinity if unbounded).
double max_step(const MatrixXd& x, const MatrixXd& dx) {
    Eigen::LLT<MatrixXd> llt(x);
    if (llt.info() != Eigen::Success) return 0.0;
    MatrixXd linv = llt.matrixL().solve(MatrixXd::Identity(x.rows(), x.cols()));
    double lo = exinv::min_eigenvalue(sym(linv * dx * linv.transpose()));
    return lo >= 0 ? std::numeric_limits<double>::infinity() : -1.0 / lo;
}

double max_step_lp(const VectorXd& x, const VectorXd& dx) {
    double a = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < x.size(); ++i)
        if (dx(i) < 0) a = std::min(a, -x(i) / dx(i));
    return a;
}

VectorXd apply_a(const Sdp& p, const std::vector<MatrixXd>& x, const VectorXd& lx) {
    VectorXd r = VectorXd::Zero(static_cast<Eigen::Index>(p.m));
    for (std::size_t bl = 0; bl < p.a.size(); ++bl)
        for (const auto& [k, ak] : p.a[bl]) r(static_cast<Eigen::Index>(k)) += inner(ak, x[bl]);
    for (std::size_t row = 0; row < p.lp_a.size(); ++row)
        for (const auto& [k, v] : p.lp_a[row]) r(static_cast<Eigen::Index>(k)) += v * lx(static_cast<Eigen::Index>(row));
    return r;
}

void apply_at(const Sdp& p, const VectorXd& z, std::vector<MatrixXd>& out, VectorXd& lout) {
    out.resize(p.c.size());
    for (std::size_t bl = 0; bl < p.c.size(); ++bl) {
        out[bl] = MatrixXd::Zero(p.c[bl].rows(), p.c[bl].cols());
        for (const auto& [k, ak] : p.a[bl]) out[bl] += z(static_cast<Eigen::Index>(k)) * ak;
    }
    lout = VectorXd::Zero(p.lp_c.size());
    for (std::size_t row = 0; row < p.lp_a.size(); ++row)
        for (const auto& [k, v] : p.lp_a[row]) lout(static_cast<Eigen::Index>(row)) += v * z(static_cast<Eigen::Index>(k));
}

struct IpmOutcome {
    VectorXd z;
    double primal_obj = 0;
    double dual_obj = 0;
    double pinf = 0;
    double dinf = 0;
    bool converged = false;
    int iterations = 0;
};

IpmOutcome interior_point(const Sdp& p, int max_iters) {
    const std::size_t nb = p.c.size();
    double n_total = static_cast<double>(p.lp_c.size());
    for (const auto& c : p.c) n_total += static_cast<double>(c.rows());

    double cnorm = p.lp_c.norm(), anorm = 0;
    for (const auto& c : p.c) cnorm = std::max(cnorm, c.norm());
    for (const auto& blk : p.a)
        for (const auto& [k, a] : blk) anorm = std::max(anorm, a.norm());
    const double scale = std::max({10.0, std::sqrt(n_total), cnorm, anorm});

    Iterate it;
    for (const auto& c : p.c) {
        it.x.push_back(scale * MatrixXd::Identity(c.rows(), c.cols()));
        it.s.push_back(scale * MatrixXd::Identity(c.rows(), c.cols()));
    }
    it.lx = VectorXd::Constant(p.lp_c.size(), scale);
    it.ls = VectorXd::Constant(p.lp_c.size(), scale);
    it.z = VectorXd::Zero(static_cast<Eigen::Index>(p.m));

    IpmOutcome out;
    const double bnorm = p.b.norm();
    for (int iter = 0; iter < max_iters; ++iter) {
        out.iterations = iter + 1;
        VectorXd rp = p.b - apply_a(p, it.x, it.lx);
        std::vector<MatrixXd> atz;
        VectorXd latz;
        apply_at(p, it.z, atz, latz);
        std::vector<MatrixXd> rd(nb);
        double rdn2 = 0;
        for (std::size_t bl = 0; bl < nb; ++bl) {
            rd[bl] = p.c[bl] - atz[bl] - it.s[bl];
            rdn2 += rd[bl].squaredNorm();
        }
        VectorXd lrd = p.lp_c - latz - it.ls;
        rdn2 += lrd.squaredNorm();

        double pobj = it.lx.dot(p.lp_c), gapsum = it.lx.dot(it.ls);
        for (std::size_t bl = 0; bl < nb; ++bl) {
            pobj += inner(p.c[bl], it.x[bl]);
            gapsum += inner(it.x[bl], it.s[bl]);
        }
        const double dobj = p.b.dot(it.z);
        out.z = it.z;
        out.primal_obj = pobj;
        out.dual_obj = dobj;
        out.pinf = rp.norm() / (1 + bnorm);
        out.dinf = std::sqrt(rdn2) / (1 + cnorm);
        const double relgap = std::abs(pobj - dobj) / (1 + std::abs(pobj) + std::abs(dobj));
        if (out.pinf < 1e-9 && out.dinf < 1e-9 && relgap < 1e-9) {
            out.converged = true;
            break;
        }
        const double mu = gapsum / n_total;

        std::vector<MatrixXd> sinv(nb);
        bool ok = true;
        for (std::size_t bl = 0; bl < nb; ++bl) {
            Eigen::LLT<MatrixXd> llt(it.s[bl]);
            if (llt.info() != Eigen::Success) {
                ok = false;
                break;
            }
            sinv[bl] = llt.solve(MatrixXd::Identity(it.s[bl].rows(), it.s[bl].cols()));
        }
        if (!ok) break;

        // Schur complement M_kl = <A_k, X A_l S^-1>.
        MatrixXd schur = MatrixXd::Zero(static_cast<Eigen::Index>(p.m), static_cast<Eigen::Index>(p.m));
        std::vector<std::vector<MatrixXd>> xas(nb);
        for (std::size_t bl = 0; bl < nb; ++bl) {
            const auto& blk = p.a[bl];
            xas[bl].resize(blk.size());
            for (std::size_t l = 0; l < blk.size(); ++l) xas[bl][l] = it.x[bl] * blk[l].second * sinv[bl];
            for (std::size_t k = 0; k < blk.size(); ++k)
                for (std::size_t l = k; l < blk.size(); ++l) {
                    double v = inner(blk[k].second, xas[bl][l].transpose());
                    auto ik = static_cast<Eigen::Index>(blk[k].first), il = static_cast<Eigen::Index>(blk[l].first);
                    schur(ik, il) += v;
                    if (ik != il) schur(il, ik) += v;
                }
        }
        VectorXd lratio = it.lx.cwiseQuotient(it.ls);
        for (std::size_t row = 0; row < p.lp_a.size(); ++row) {
            const auto& r = p.lp_a[row];
            for (const auto& [k, a] : r)
                for (const auto& [l, b] : r)
                    schur(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l)) +=
                        a * b * lratio(static_cast<Eigen::Index>(row));
        }
        Eigen::LDLT<MatrixXd> ldlt;
        {
            double reg = 1e-14 * std::max(1.0, schur.diagonal().cwiseAbs().maxCoeff());
            MatrixXd m = schur;
            m.diagonal().array() += reg;
            ldlt.compute(m);
        }

        // Direction for a given G = target - X - corr.
        auto direction = [&](const std::vector<MatrixXd>& g, const VectorXd& lg, std::vector<MatrixXd>& dx,
                             VectorXd& ldx, std::vector<MatrixXd>& ds, VectorXd& lds, VectorXd& dz) {
            std::vector<MatrixXd> t(nb);
            for (std::size_t bl = 0; bl < nb; ++bl) t[bl] = g[bl] - it.x[bl] * rd[bl] * sinv[bl];
            VectorXd lt = lg - lratio.cwiseProduct(lrd);
            dz = ldlt.solve(rp - apply_a(p, t, lt));
            std::vector<MatrixXd> atdz;
            VectorXd latdz;
            apply_at(p, dz, atdz, latdz);
            dx.resize(nb);
            ds.resize(nb);
            for (std::size_t bl = 0; bl < nb; ++bl) {
                ds[bl] = rd[bl] - atdz[bl];
                dx[bl] = sym(g[bl] - it.x[bl] * ds[bl] * sinv[bl]);
            }
            lds = lrd - latdz;
            ldx = lg - lratio.cwiseProduct(lds);
        };
        auto steps = [&](const std::vector<MatrixXd>& dx, const VectorXd& ldx, const std::vector<MatrixXd>& ds,
                         const VectorXd& lds) {
            double ap = max_step_lp(it.lx, ldx), ad = max_step_lp(it.ls, lds);
            for (std::size_t bl = 0; bl < nb; ++bl) {
                ap = std::min(ap, max_step(it.x[bl], dx[bl]));
                ad = std::min(ad, max_step(it.s[bl], ds[bl]));
            }
            return std::make_pair(ap, ad);
        };

        // Predictor.
        std::vector<MatrixXd> g(nb), dxa, dsa;
        VectorXd ldxa, ldsa, dza;
        for (std::size_t bl = 0; bl < nb; ++bl) g[bl] = -it.x[bl];
        VectorXd lg = -it.lx;
        direction(g, lg, dxa, ldxa, dsa, ldsa, dza);
        auto [apa, ada] = steps(dxa, ldxa, dsa, ldsa);
        apa = std::min(1.0, apa);
        ada = std::min(1.0, ada);
        double mu_aff = (it.lx + apa * ldxa).dot(it.ls + ada * ldsa);
        for (std::size_t bl = 0; bl < nb; ++bl) mu_aff += inner(it.x[bl] + apa * dxa[bl], it.s[bl] + ada * dsa[bl]);
        mu_aff /= n_total;
        double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 0.0, 1.0);

        // Corrector.
        for (std::size_t bl = 0; bl < nb; ++bl)
            g[bl] = sigma * mu * sinv[bl] - it.x[bl] - dxa[bl] * dsa[bl] * sinv[bl];
        lg = (sigma * mu) * it.ls.cwiseInverse() - it.lx - ldxa.cwiseProduct(ldsa).cwiseQuotient(it.ls);
        std::vector<MatrixXd> dx, ds;
        VectorXd ldx, lds, dz;
        direction(g, lg, dx, ldx, ds, lds, dz);
        auto [ap, ad] = steps(dx, ldx, ds, lds);
        const double gamma = 0.95;
        ap = std::min(1.0, gamma * ap);
        ad = std::min(1.0, gamma * ad);
        for (std::size_t bl = 0; bl < nb; ++bl) {
            it.x[bl] += ap * dx[bl];
            it.s[bl] += ad * ds[bl];
        }
        it.lx += ap * ldx;
        it.ls += ad * lds;
        it.z += ad * dz;
    }
    return out;
}

}  // namespace

namespace {

// Faces of the LMI on which some diagonal entries vanish identically. Such an
// entry forces its whole row to zero, so the row is dropped from the margin
// and its off-diagonal entries become linear equalities y = y0 + N w.
struct Face {
    std::vector<std::vector<Eigen::Index>> keep;
    VectorXd y0;
    MatrixXd basis;
};

Face facial_reduction(const LmiProblem& lp, bool& consistent) {
    consistent = true;
    const auto n = static_cast<Eigen::Index>(lp.nvars());
    const std::size_t nb = lp.constant.size();
    std::vector<std::vector<std::pair<std::size_t, const MatrixXd*>>> by_block(nb);
    double scale = 1.0;
    for (const auto& c : lp.constant) scale = std::max(scale, c.cwiseAbs().maxCoeff());
    for (std::size_t i = 0; i < lp.vars.size(); ++i)
        for (const auto& t : lp.vars[i]) {
            by_block[t.block].emplace_back(i, &t.matrix);
            scale = std::max(scale, t.matrix.cwiseAbs().maxCoeff());
        }
    const double tol = 1e-11 * scale;

    std::vector<std::vector<bool>> removed(nb);
    for (std::size_t b = 0; b < nb; ++b) removed[b].assign(static_cast<std::size_t>(lp.constant[b].rows()), false);
    std::vector<VectorXd> rows;
    std::vector<double> rhs;
    for (const auto& eq : lp.equalities) {
        VectorXd row = VectorXd::Zero(n);
        for (const auto& [i, v] : eq.coef) row(static_cast<Eigen::Index>(i)) += v;
        rows.push_back(std::move(row));
        rhs.push_back(eq.rhs);
    }
    Face f;
    f.y0 = VectorXd::Zero(n);
    f.basis = MatrixXd::Identity(n, n);
    for (bool changed = true; changed;) {
        changed = false;
        if (!rows.empty()) {
            MatrixXd e(static_cast<Eigen::Index>(rows.size()), n);
            VectorXd g(static_cast<Eigen::Index>(rows.size()));
            for (std::size_t r = 0; r < rows.size(); ++r) {
                e.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
                g(static_cast<Eigen::Index>(r)) = rhs[r];
            }
            Eigen::JacobiSVD<MatrixXd> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
            const auto& sv = svd.singularValues();
            Eigen::Index rank = 0;
            for (Eigen::Index k = 0; k < sv.size(); ++k)
                if (sv(k) > 1e-10 * std::max(1.0, sv(0))) ++rank;
            VectorXd y0 = VectorXd::Zero(n);
            VectorXd ug = svd.matrixU().transpose() * g;
            for (Eigen::Index k = 0; k < rank; ++k) y0 += svd.matrixV().col(k) * (ug(k) / sv(k));
            if ((e * y0 - g).norm() > 1e-8 * (1 + g.norm())) {
                consistent = false;
                return f;
            }
            f.y0 = y0;
            f.basis = svd.matrixV().rightCols(n - rank);
        }
        for (std::size_t b = 0; b < nb; ++b) {
            const auto& c = lp.constant[b];
            for (Eigen::Index k = 0; k < c.rows(); ++k) {
                if (removed[b][static_cast<std::size_t>(k)]) continue;
                double cst = c(k, k);
                VectorXd coef = VectorXd::Zero(f.basis.cols());
                for (const auto& [i, m] : by_block[b]) {
                    cst += f.y0(static_cast<Eigen::Index>(i)) * (*m)(k, k);
                    coef += (*m)(k, k) * f.basis.row(static_cast<Eigen::Index>(i)).transpose();
                }
                if (std::abs(cst) > tol || coef.cwiseAbs().maxCoeff() > tol) continue;
                removed[b][static_cast<std::size_t>(k)] = true;
                changed = true;
                for (Eigen::Index j = 0; j < c.rows(); ++j) {
                    if (j == k || removed[b][static_cast<std::size_t>(j)]) continue;
                    VectorXd row = VectorXd::Zero(n);
                    for (const auto& [i, m] : by_block[b]) row(static_cast<Eigen::Index>(i)) = (*m)(k, j);
                    if (row.cwiseAbs().maxCoeff() <= tol && std::abs(c(k, j)) <= tol) continue;
                    rows.push_back(std::move(row));
                    rhs.push_back(-c(k, j));
                }
            }
        }
    }
    f.keep.resize(nb);
    for (std::size_t b = 0; b < nb; ++b)
        for (std::size_t k = 0; k < removed[b].size(); ++k)
            if (!removed[b][k]) f.keep[b].push_back(static_cast<Eigen::Index>(k));
    return f;
}

MatrixXd principal(const MatrixXd& m, const std::vector<Eigen::Index>& idx) {
    const auto s = static_cast<Eigen::Index>(idx.size());
    MatrixXd r(s, s);
    for (Eigen::Index i = 0; i < s; ++i)
        for (Eigen::Index j = 0; j < s; ++j) r(i, j) = m(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    return r;
}

// max t s.t. F(y0 + N w) - tI >= 0, |y0 + N w| <= box, t <= box.
IpmOutcome margin_sdp(const LmiProblem& lp, const VectorXd& y0, const MatrixXd& nb_basis, double box, int max_iters) {
    const auto nw = static_cast<std::size_t>(nb_basis.cols());
    const auto ny = static_cast<std::size_t>(nb_basis.rows());
    Sdp p;
    p.m = nw + 1;
    p.b = VectorXd::Zero(static_cast<Eigen::Index>(p.m));
    p.b(static_cast<Eigen::Index>(nw)) = 1.0;
    p.c.resize(lp.constant.size());
    p.a.resize(lp.constant.size());
    std::vector<std::map<std::size_t, MatrixXd>> acc(lp.constant.size());
    for (std::size_t b = 0; b < lp.constant.size(); ++b) p.c[b] = lp.constant[b];
    for (std::size_t i = 0; i < ny; ++i)
        for (const auto& t : lp.vars[i]) {
            p.c[t.block] += y0(static_cast<Eigen::Index>(i)) * t.matrix;
            for (std::size_t l = 0; l < nw; ++l) {
                double w = nb_basis(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l));
                if (w == 0) continue;
                auto [it, ins] = acc[t.block].try_emplace(l, MatrixXd::Zero(t.matrix.rows(), t.matrix.cols()));
                it->second -= w * t.matrix;
            }
        }
    for (std::size_t b = 0; b < lp.constant.size(); ++b) {
        for (auto& [l, m] : acc[b])
            if (m.cwiseAbs().maxCoeff() > 1e-15) p.a[b].emplace_back(l, std::move(m));
        p.a[b].emplace_back(nw, MatrixXd::Identity(lp.constant[b].rows(), lp.constant[b].cols()));
    }
    p.lp_c.resize(static_cast<Eigen::Index>(2 * ny + 1));
    p.lp_a.resize(2 * ny + 1);
    for (std::size_t i = 0; i < ny; ++i) {
        const double yi = y0(static_cast<Eigen::Index>(i));
        p.lp_c(static_cast<Eigen::Index>(2 * i)) = box - yi;
        p.lp_c(static_cast<Eigen::Index>(2 * i + 1)) = box + yi;
        for (std::size_t l = 0; l < nw; ++l) {
            double w = nb_basis(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l));
            if (std::abs(w) < 1e-15) continue;
            p.lp_a[2 * i].emplace_back(l, w);
            p.lp_a[2 * i + 1].emplace_back(l, -w);
        }
    }
    p.lp_c(static_cast<Eigen::Index>(2 * ny)) = box;
    p.lp_a[2 * ny].emplace_back(nw, 1.0);
    return interior_point(p, max_iters);
}

}  // namespace

LmiResult solve_lmi(const LmiProblem& lp, const SolverConfig& cfg) {
    LmiResult res;
    const std::size_t n = lp.nvars();
    res.y.assign(n, 0.0);

    bool consistent = true;
    Face face = facial_reduction(lp, consistent);
    if (!consistent) {
        res.status = SolveStatus::Infeasible;
        res.margin = res.bound = res.min_eig = -std::numeric_limits<double>::infinity();
        return res;
    }
    LmiProblem reduced;
    reduced.vars.resize(n);
    std::vector<std::size_t> new_index(lp.constant.size(), SIZE_MAX);
    for (std::size_t b = 0; b < lp.constant.size(); ++b) {
        if (face.keep[b].empty()) continue;
        new_index[b] = reduced.constant.size();
        reduced.constant.push_back(principal(lp.constant[b], face.keep[b]));
    }
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& t : lp.vars[i])
            if (new_index[t.block] != SIZE_MAX)
                reduced.vars[i].push_back({new_index[t.block], principal(t.matrix, face.keep[t.block])});

    VectorXd y = face.y0;
    if (reduced.constant.empty()) {
        res.margin = res.bound = std::numeric_limits<double>::infinity();
        res.converged = res.primal_feasible = true;
    } else {
        IpmOutcome o = margin_sdp(reduced, face.y0, face.basis, cfg.box, cfg.lmi_iters);
        const auto nw = face.basis.cols();
        y += face.basis * o.z.head(nw);
        res.iterations = o.iterations;
        res.margin = o.z(nw);
        res.bound = o.primal_obj;
        res.converged = o.converged;
        res.primal_feasible = o.pinf < 1e-8;
    }
    for (std::size_t i = 0; i < n; ++i) res.y[i] = y(static_cast<Eigen::Index>(i));
    res.min_eig = lp.constant.empty() ? std::numeric_limits<double>::infinity() : lp.min_eigenvalue(res.y);
    if (res.min_eig >= -cfg.delta)
        res.status = SolveStatus::Feasible;
    else if (res.primal_feasible && res.bound < -cfg.delta)
        res.status = SolveStatus::Infeasible;
    else
        res.status = SolveStatus::Unknown;
    return res;
}

LmiProblem lmi_slice(const BmiProblem& b, const std::vector<double>& values, const std::vector<std::size_t>& free,
                     bool drop_constant) {
    std::map<std::size_t, std::size_t> pos;
    for (std::size_t k = 0; k < free.size(); ++k) pos[free[k]] = k;
    LmiProblem out;
    out.vars.resize(free.size());
    for (const auto& blk : b.blocks) {
        const auto s = static_cast<Eigen::Index>(blk.side);
        MatrixXd c = MatrixXd::Zero(s, s);
        std::map<std::size_t, MatrixXd> coef;
        auto add = [&](std::size_t k, Eigen::Index i, Eigen::Index j, double v) {
            auto [it, ins] = coef.try_emplace(k, MatrixXd::Zero(s, s));
            it->second(i, j) += v;
            if (i != j) it->second(j, i) += v;
        };
        for (Eigen::Index i = 0; i < s; ++i)
            for (Eigen::Index j = i; j < s; ++j) {
                const BiExpr& e = blk.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
                double cv = e.constant.get_d();
                for (const auto& [v, q] : e.linear) {
                    auto it = pos.find(v);
                    if (it == pos.end())
                        cv += q.get_d() * values[v];
                    else
                        add(it->second, i, j, q.get_d());
                }
                for (const auto& [vv, q] : e.bilinear) {
                    auto ia = pos.find(vv.first), ib = pos.find(vv.second);
                    if (ia != pos.end() && ib != pos.end())
                        throw std::logic_error("lmi_slice: product of two free unknowns");
                    if (ia == pos.end() && ib == pos.end())
                        cv += q.get_d() * values[vv.first] * values[vv.second];
                    else if (ia != pos.end())
                        add(ia->second, i, j, q.get_d() * values[vv.second]);
                    else
                        add(ib->second, i, j, q.get_d() * values[vv.first]);
                }
                c(i, j) += cv;
                if (i != j) c(j, i) += cv;
            }
        bool constant_block = true;
        for (const auto& [k, m] : coef)
            if (m.cwiseAbs().maxCoeff() > 0) constant_block = false;
        if (constant_block && drop_constant) continue;
        const std::size_t bi = out.constant.size();
        out.constant.push_back(std::move(c));
        for (auto& [k, m] : coef)
            if (m.cwiseAbs().maxCoeff() > 0) out.vars[k].push_back({bi, std::move(m)});
    }
    for (const auto& e : b.equalities) {
        LinearEquality eq;
        double cv = e.constant.get_d();
        std::map<std::size_t, double> coef;
        for (const auto& [v, q] : e.linear) {
            auto it = pos.find(v);
            if (it == pos.end())
                cv += q.get_d() * values[v];
            else
                coef[it->second] += q.get_d();
        }
        for (const auto& [vv, q] : e.bilinear) {
            auto ia = pos.find(vv.first), ib = pos.find(vv.second);
            if (ia != pos.end() && ib != pos.end()) throw std::logic_error("lmi_slice: product of two free unknowns");
            if (ia == pos.end() && ib == pos.end())
                cv += q.get_d() * values[vv.first] * values[vv.second];
            else if (ia != pos.end())
                coef[ia->second] += q.get_d() * values[vv.second];
            else
                coef[ib->second] += q.get_d() * values[vv.first];
        }
        for (const auto& [k, v] : coef)
            if (v != 0) eq.coef.emplace_back(k, v);
        eq.rhs = -cv;
        out.equalities.push_back(std::move(eq));
    }
    return out;
}

namespace {

constexpr double kEqualityTol = 1e-7;

// Face margin, or -inf when the equalities do not hold.
double evaluate_margin(const BmiProblem& b, std::vector<double>& values) {
    b.complete(values);
    if (b.equality_residual(values) > kEqualityTol) return -std::numeric_limits<double>::infinity();
    return face_margin(b, values);
}

}  // namespace

double face_margin(const BmiProblem& b, const std::vector<double>& values) {
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t bi = 0; bi < b.blocks.size(); ++bi) {
        MatrixXd m = b.evaluate_block(bi, values);
        const double tol = 1e-9 * std::max(1.0, m.cwiseAbs().maxCoeff());
        std::vector<Eigen::Index> keep;
        for (Eigen::Index k = 0; k < m.rows(); ++k)
            if (std::abs(m(k, k)) > tol || m.row(k).cwiseAbs().maxCoeff() > tol) keep.push_back(k);
        if (!keep.empty()) lo = std::min(lo, exinv::min_eigenvalue(principal(m, keep)));
    }
    return lo;
}

NumericSolution solve_bmi_alternating(const BmiProblem& b, const std::vector<double>& start, const SolverConfig& cfg,
                                      bool fix_u_first) {
    NumericSolution sol;
    std::vector<double> cur = start;
    cur.resize(b.nunknowns, 0.0);
    double cur_eig = evaluate_margin(b, cur);
    std::vector<double> best = cur;
    double best_eig = cur_eig;

    auto half_step = [&](const std::vector<std::size_t>& free) {
        if (free.empty()) return;
        LmiProblem lp = lmi_slice(b, cur, free);
        LmiResult r = solve_lmi(lp, cfg);
        std::vector<double> cand = cur;
        for (std::size_t k = 0; k < free.size(); ++k) cand[free[k]] = r.y[k];
        double e = evaluate_margin(b, cand);
        if (std::isfinite(e) && e >= cur_eig - 1e-12) {
            cur = std::move(cand);
            cur_eig = e;
        }
        if (cur_eig > best_eig) {
            best = cur;
            best_eig = cur_eig;
        }
        sol.trace.push_back(best_eig);
    };

    if (b.v.empty()) {
        half_step(b.u);
        sol.sweeps = 1;
    } else {
        int flat = 0;
        double last = best_eig;
        for (int sweep = 0; sweep < cfg.max_outer_iters; ++sweep) {
            sol.sweeps = sweep + 1;
            if (fix_u_first) {
                half_step(b.v);
                half_step(b.u);
            } else {
                half_step(b.u);
                half_step(b.v);
            }
            if (best_eig >= cfg.target_margin) break;
            if (best_eig - last < cfg.stall) {
                if (++flat >= cfg.stall_sweeps) break;
            } else {
                flat = 0;
            }
            last = best_eig;
        }
    }
    sol.values = std::move(best);
    sol.margin = best_eig;
    sol.min_eig = b.min_eigenvalue(sol.values);
    sol.status = sol.min_eig >= -cfg.delta && b.equality_residual(sol.values) <= kEqualityTol ? SolveStatus::Feasible
                                                                                               : SolveStatus::Unknown;
    return sol;
}

std::vector<double> seeded_start(const SosProgram& p, double lambda) {
    std::vector<double> values(p.unknowns.size(), 0.0);
    for (const auto& c : p.constraints)
        for (const auto& t : c.terms) {
            if (!t.templ || t.basis.empty() || t.basis.front().degree() != 0) continue;
            if (t.kind == SosTerm::Kind::Free)
                values[t.vars.front()] = -lambda;
            else
                values[t.gram_var(0, 0)] = lambda;
        }
    return values;
}

NumericSolution solve_program(const SosProgram& p, const BmiProblem& b, const SolverConfig& cfg) {
    std::vector<std::pair<std::string, std::vector<double>>> starts;
    starts.emplace_back("strengthened", std::vector<double>(p.unknowns.size(), 0.0));
    if (!b.v.empty())
        for (double s : cfg.seeds) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "seed %g", s);
            starts.emplace_back(buf, seeded_start(p, s));
        }
    NumericSolution best;
    best.margin = -std::numeric_limits<double>::infinity();
    for (auto& [label, v0] : starts) {
        NumericSolution s = solve_bmi_alternating(b, v0, cfg, false);
        s.start = label;
        if (s.status == SolveStatus::Feasible && s.margin >= cfg.target_margin) return s;
        if (s.status == SolveStatus::Feasible && best.status != SolveStatus::Feasible) best = std::move(s);
        else if (s.status == best.status && s.margin > best.margin) best = std::move(s);
    }
    return best;
}

void write_values(std::ostream& os, const SosProgram& p, const std::vector<double>& values) {
    for (std::size_t i = 0; i < p.unknowns.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", i < values.size() ? values[i] : 0.0);
        os << p.unknowns[i].name << " " << buf << "\n";
    }
}

std::vector<double> read_values(std::istream& is, const SosProgram& p) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < p.unknowns.size(); ++i) index[p.unknowns[i].name] = i;
    std::vector<double> values(p.unknowns.size(), 0.0);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string name;
        double v;
        if (!(ls >> name >> v)) throw std::runtime_error("values line " + std::to_string(lineno) + ": expected 'name value'");
        auto it = index.find(name);
        if (it == index.end()) throw std::runtime_error("values line " + std::to_string(lineno) + ": unknown name '" + name + "'");
        values[it->second] = v;
    }
    return values;
}

}  // namespace exinv
