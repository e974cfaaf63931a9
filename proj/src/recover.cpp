#include "exinv/recover.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "exinv/checker.hpp"

namespace exinv {

QMat truncate_psd_rational(const Eigen::MatrixXd& w, const Integer& D) {
    const auto n = w.rows();
    if (w.cols() != n) throw std::invalid_argument("truncate_psd_rational needs a square matrix");
    Eigen::MatrixXd a = 0.5 * (w + w.transpose());
    Eigen::MatrixXd l = Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;

    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::Index p = k;
        for (Eigen::Index i = k + 1; i < n; ++i)
            if (a(i, i) > a(p, p)) p = i;
        if (p != k) {
            a.row(k).swap(a.row(p));
            a.col(k).swap(a.col(p));
            std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(p)]);
            for (Eigen::Index j = 0; j < k; ++j) std::swap(l(k, j), l(p, j));
        }
        if (!(a(k, k) > 0)) break;  // remaining Schur complement truncated to zero
        d(k) = a(k, k);
        for (Eigen::Index i = k + 1; i < n; ++i) l(i, k) = a(i, k) / d(k);
        for (Eigen::Index i = k + 1; i < n; ++i)
            for (Eigen::Index j = k + 1; j < n; ++j) a(i, j) -= l(i, k) * a(k, j);
    }

    const auto sn = static_cast<std::size_t>(n);
    QMat lq(sn, sn), out(sn, sn);
    std::vector<Rational> dq(sn);
    for (std::size_t k = 0; k < sn; ++k) {
        dq[k] = round_to_denominator(d(static_cast<Eigen::Index>(k)), D);
        if (dq[k] < 0) dq[k] = 0;
    }
    for (std::size_t i = 0; i < sn; ++i) {
        lq(i, i) = 1;
        for (std::size_t j = 0; j < i; ++j)
            if (dq[j] != 0) lq(i, j) = round_to_denominator(l(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), D);
    }
    for (std::size_t i = 0; i < sn; ++i)
        for (std::size_t j = i; j < sn; ++j) {
            Rational s = 0;
            for (std::size_t k = 0; k <= i; ++k)
                if (dq[k] != 0) s += lq(i, k) * dq[k] * lq(j, k);
            auto pi = static_cast<std::size_t>(perm[i]), pj = static_cast<std::size_t>(perm[j]);
            out(pi, pj) = s;
            out(pj, pi) = s;
        }
    return out;
}

DiophantineResult simultaneous_diophantine(const std::vector<double>& x, long D) {
    if (D < 1) throw std::invalid_argument("denominator bound must be positive");
    DiophantineResult best;
    best.error = std::numeric_limits<double>::infinity();
    long best_q = 1;
    for (long q = 1; q <= D; ++q) {
        double err = 0;
        for (double v : x) {
            double p = std::nearbyint(v * static_cast<double>(q));
            err = std::max(err, std::abs(v - p / static_cast<double>(q)));
        }
        if (err < best.error) {
            best.error = err;
            best_q = q;
            if (err == 0) break;
        }
    }
    best.q = best_q;
    for (double v : x) {
        Integer p;
        mpz_set_d(p.get_mpz_t(), std::nearbyint(v * static_cast<double>(best_q)));
        best.values.emplace_back(p, Integer(best_q));
        best.values.back().canonicalize();
    }
    return best;
}

HyperplaneSystem hyperplane_system(const SosProgram& prog, const std::map<std::size_t, Rational>& frozen) {
    HyperplaneSystem hp;
    for (std::size_t id = 0; id < prog.unknowns.size(); ++id) {
        if (frozen.count(id)) continue;
        hp.column_of[id] = hp.columns.size();
        hp.columns.push_back(id);
    }
    auto value = [&](std::size_t id) -> const Rational* {
        auto it = frozen.find(id);
        return it == frozen.end() ? nullptr : &it->second;
    };
    for (auto& row : compile_identities(prog)) {
        std::map<std::size_t, Rational> coef;
        Rational cst = row.expr.constant;
        auto add = [&](std::size_t id, const Rational& q) {
            if (q == 0) return;
            auto col = hp.column_of.at(id);
            auto [it, ins] = coef.try_emplace(col, q);
            if (!ins) {
                it->second += q;
                if (it->second == 0) coef.erase(it);
            }
        };
        for (const auto& [id, q] : row.expr.linear) {
            if (const Rational* v = value(id))
                cst += q * *v;
            else
                add(id, q);
        }
        for (const auto& [ids, q] : row.expr.bilinear) {
            const Rational* va = value(ids.first);
            const Rational* vb = value(ids.second);
            if (va && vb)
                cst += q * *va * *vb;
            else if (va)
                add(ids.second, q * *va);
            else if (vb)
                add(ids.first, q * *vb);
            else
                throw std::logic_error("hyperplane_system: bilinear term with no frozen factor");
        }
        hp.rows.push_back(std::move(coef));
        hp.rhs.push_back(-cst);
        hp.constraint.push_back(row.constraint);
        hp.monomial.push_back(row.monomial);
    }
    hp.rank = exact_rank(hp.rows);
    hp.full_row_rank = hp.rank == hp.rows.size();
    return hp;
}

namespace {

using SparseRow = std::map<std::size_t, Rational>;

// Gaussian elimination on sparse rational rows with a shortest-row pivot
// rule. Returns a solution of rows * x = rhs (free columns zero), or nullopt
// when inconsistent. `rank` receives the number of pivots.
std::optional<std::map<std::size_t, Rational>> sparse_solve(std::vector<SparseRow> rows, std::vector<Rational> rhs,
                                                           std::size_t* rank) {
    const std::size_t nr = rows.size();
    for (auto& row : rows) std::erase_if(row, [](const auto& kv) { return kv.second == 0; });
    std::map<std::size_t, std::set<std::size_t>> col_rows;
    for (std::size_t r = 0; r < nr; ++r)
        for (const auto& [c, q] : rows[r]) col_rows[c].insert(r);
    std::vector<bool> active(nr, true);
    std::vector<std::pair<std::size_t, std::size_t>> pivots;  // (row, col)
    bool consistent = true;

    for (;;) {
        std::size_t pr = nr;
        for (std::size_t r = 0; r < nr; ++r) {
            if (!active[r]) continue;
            if (rows[r].empty()) {
                active[r] = false;
                if (rhs[r] != 0) consistent = false;
                continue;
            }
            if (pr == nr || rows[r].size() < rows[pr].size()) pr = r;
        }
        if (pr == nr) break;
        std::size_t pc = rows[pr].begin()->first;
        std::size_t best = SIZE_MAX;
        for (const auto& [c, q] : rows[pr]) {
            std::size_t cnt = col_rows[c].size();
            if (cnt < best) {
                best = cnt;
                pc = c;
            }
        }
        active[pr] = false;
        pivots.emplace_back(pr, pc);
        const Rational piv = rows[pr].at(pc);
        std::vector<std::size_t> targets;
        for (std::size_t r : col_rows[pc])
            if (r != pr && active[r]) targets.push_back(r);
        for (std::size_t r : targets) {
            Rational f = rows[r].at(pc) / piv;
            for (const auto& [c, q] : rows[pr]) {
                auto [it, ins] = rows[r].try_emplace(c, 0);
                it->second -= f * q;
                if (ins) col_rows[c].insert(r);
                if (it->second == 0) {
                    rows[r].erase(it);
                    col_rows[c].erase(r);
                }
            }
            rhs[r] -= f * rhs[pr];
        }
    }
    if (rank) *rank = pivots.size();
    if (!consistent) return std::nullopt;
    std::map<std::size_t, Rational> x;
    for (auto it = pivots.rbegin(); it != pivots.rend(); ++it) {
        const auto [r, c] = *it;
        Rational s = rhs[r];
        for (const auto& [cc, q] : rows[r]) {
            if (cc == c) continue;
            auto xv = x.find(cc);
            if (xv != x.end()) s -= q * xv->second;
        }
        s /= rows[r].at(c);
        if (s != 0) x[c] = s;
    }
    return x;
}

}  // namespace

std::size_t exact_rank(const std::vector<std::map<std::size_t, Rational>>& rows) {
    std::size_t rank = 0;
    sparse_solve(rows, std::vector<Rational>(rows.size(), Rational(0)), &rank);
    return rank;
}

std::vector<Rational> projection_weights(const HyperplaneSystem& hp, const SosProgram& prog) {
    std::vector<Rational> w;
    for (std::size_t id : hp.columns) {
        const auto& u = prog.unknowns[id];
        w.emplace_back(u.role == Unknown::Role::GramEntry && u.row != u.col ? 2 : 1);
    }
    return w;
}

std::vector<Rational> project_orthogonal(const HyperplaneSystem& hp, const std::vector<Rational>& y0,
                                         const std::vector<Rational>& weights, const std::vector<bool>& fixed) {
    const std::size_t nc = hp.ncols();
    if (y0.size() != nc || weights.size() != nc) throw std::invalid_argument("projection vector sizes do not match");
    auto is_fixed = [&](std::size_t c) { return !fixed.empty() && fixed[c]; };

    // r = b - A y0, A restricted to free columns.
    std::vector<SparseRow> af;
    std::vector<Rational> r;
    for (std::size_t i = 0; i < hp.nrows(); ++i) {
        Rational s = hp.rhs[i];
        SparseRow row;
        for (const auto& [c, q] : hp.rows[i]) {
            s -= q * y0[c];
            if (!is_fixed(c)) row.emplace(c, q);
        }
        af.push_back(std::move(row));
        r.push_back(std::move(s));
    }

    // (A W^-1 A^T) lambda = r
    std::vector<std::vector<std::pair<std::size_t, Rational>>> by_col(nc);
    for (std::size_t i = 0; i < af.size(); ++i)
        for (const auto& [c, q] : af[i]) by_col[c].emplace_back(i, q);
    std::vector<SparseRow> m(af.size());
    for (std::size_t c = 0; c < nc; ++c) {
        const auto& list = by_col[c];
        for (std::size_t a = 0; a < list.size(); ++a)
            for (std::size_t b = 0; b < list.size(); ++b) {
                Rational v = list[a].second * list[b].second / weights[c];
                auto [it, ins] = m[list[a].first].try_emplace(list[b].first, v);
                if (!ins) {
                    it->second += v;
                    if (it->second == 0) m[list[a].first].erase(it);
                }
            }
    }
    auto lambda = sparse_solve(std::move(m), r, nullptr);
    if (!lambda) throw SingularSystem("projection system is inconsistent: the identities cannot be met with the fixed values");

    std::vector<Rational> y = y0;
    for (const auto& [row, lv] : *lambda)
        for (const auto& [c, q] : af[row]) y[c] += q * lv / weights[c];
    return y;
}

bool recovery_bound_holds(const RecoveryBound& bound) { return bound.lambda > 2.0 * bound.eta * bound.kappa2 * bound.kappa2 * bound.tau * bound.tau; }

double condition_number(const HyperplaneSystem& hp) {
    const auto nr = static_cast<Eigen::Index>(hp.nrows());
    if (nr == 0) return 1.0;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(nr, static_cast<Eigen::Index>(hp.ncols()));
    for (Eigen::Index i = 0; i < nr; ++i)
        for (const auto& [c, q] : hp.rows[static_cast<std::size_t>(i)]) a(i, static_cast<Eigen::Index>(c)) = q.get_d();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a * a.transpose(), Eigen::EigenvaluesOnly);
    double lo = es.eigenvalues()(0), hi = es.eigenvalues()(nr - 1);
    if (!(lo > 0)) return std::numeric_limits<double>::infinity();
    return std::sqrt(hi / lo);
}

namespace {

// Rational basis of the numeric kernel of a singular block: the eigenvectors
// below the threshold brought to reduced row echelon form (unit entries on
// the pivot columns), then each vector rounded with one common denominator
// <= q.
std::vector<std::vector<Rational>> rational_kernel(const Eigen::MatrixXd& w, double thr, long q) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w);
    std::vector<Eigen::Index> cols;
    for (Eigen::Index k = 0; k < w.rows(); ++k)
        if (es.eigenvalues()(k) < thr) cols.push_back(k);
    Eigen::MatrixXd kt(static_cast<Eigen::Index>(cols.size()), w.rows());
    for (std::size_t r = 0; r < cols.size(); ++r) kt.row(static_cast<Eigen::Index>(r)) = es.eigenvectors().col(cols[r]).transpose();
    // Complete pivoting, so noise in near-zero entries never becomes a pivot.
    std::vector<bool> pivot_col(static_cast<std::size_t>(kt.cols()), false);
    for (Eigen::Index r = 0; r < kt.rows(); ++r) {
        Eigen::Index pr = r, pc = -1;
        double best = 0;
        for (Eigen::Index i = r; i < kt.rows(); ++i)
            for (Eigen::Index j = 0; j < kt.cols(); ++j)
                if (!pivot_col[static_cast<std::size_t>(j)] && std::abs(kt(i, j)) > best) {
                    best = std::abs(kt(i, j));
                    pr = i;
                    pc = j;
                }
        if (pc < 0 || best < 1e-6) {
            kt.conservativeResize(r, Eigen::NoChange);
            break;
        }
        pivot_col[static_cast<std::size_t>(pc)] = true;
        kt.row(r).swap(kt.row(pr));
        kt.row(r) /= kt(r, pc);
        for (Eigen::Index i = 0; i < kt.rows(); ++i)
            if (i != r) kt.row(i) -= kt(i, pc) * kt.row(r);
    }
    std::vector<std::vector<Rational>> out;
    for (Eigen::Index r = 0; r < kt.rows(); ++r) {
        std::vector<double> v;
        for (Eigen::Index j = 0; j < kt.cols(); ++j) v.push_back(kt(r, j));
        out.push_back(simultaneous_diophantine(v, q).values);
    }
    return out;
}

struct Attempt {
    std::string label;
    std::vector<Rational> values;
};

}  // namespace

RationalCertificate recover_certificate(const CertificateNumeric& cert, const SosProgram& prog,
                                        const RecoverConfig& cfg) {
    if (cert.values.size() != prog.unknowns.size())
        throw std::invalid_argument("certificate does not match the program's unknowns");
    const HyperplaneSystem hp = hyperplane_system(prog, cert.frozen);
    const std::vector<Rational> weights = projection_weights(hp, prog);

    std::vector<GramBlock> blocks;
    for (const auto& g : gram_blocks(prog))
        if (!g.bilinear) blocks.push_back(g);

    RecoveryBound bound;
    bound.tau = cfg.tau;
    bound.lambda = std::numeric_limits<double>::infinity();
    std::vector<bool> singular(blocks.size(), false);
    std::vector<double> thresholds(blocks.size());
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
        Eigen::MatrixXd w = block_matrix(blocks[bi], cert.values);
        double lo = exinv::min_eigenvalue(w);
        bound.lambda = std::min(bound.lambda, lo);
        bound.eta += w.squaredNorm();
        thresholds[bi] = std::sqrt(cfg.tau) * (1 + w.norm());
        singular[bi] = lo < thresholds[bi];
    }
    for (const auto& t : prog.templates)
        for (std::size_t id : t.coeffs) bound.eta += cert.values[id] * cert.values[id];
    bound.kappa2 = condition_number(hp);
    if (blocks.empty()) bound.lambda = 0;

    const bool any_singular = std::find(singular.begin(), singular.end(), true) != singular.end();
    const bool all_singular = std::find(singular.begin(), singular.end(), false) == singular.end();

    std::vector<Integer> schedule;
    for (const auto& q : cfg.schedule)
        if (q < cfg.D) schedule.push_back(q);
    schedule.push_back(cfg.D);

    auto assemble = [&](const std::vector<Rational>& y) {
        std::vector<Rational> values(prog.unknowns.size());
        for (const auto& [id, q] : cert.frozen) values[id] = q;
        for (std::size_t c = 0; c < hp.ncols(); ++c) values[hp.columns[c]] = y[c];
        return values;
    };
    auto accept = [&](const std::vector<Rational>& values) {
        if (!identity_check(prog, values).ok) return false;
        for (const auto& g : gram_blocks(prog))
            if (!psd_exact(block_matrix(g, values)).psd) return false;
        return true;
    };

    std::string failures;
    // y0 with the template coefficients replaced by a simultaneous rounding
    // on one denominator <= q, and the mask of those columns.
    std::vector<std::size_t> tcols;
    for (const auto& t : prog.templates)
        for (std::size_t id : t.coeffs)
            if (hp.column_of.count(id)) tcols.push_back(hp.column_of.at(id));
    auto template_fixed = [&](const std::vector<Rational>& y0, long q) {
        std::vector<double> tx;
        for (std::size_t c : tcols) tx.push_back(cert.values[hp.columns[c]]);
        auto dio = simultaneous_diophantine(tx, q);
        std::pair<std::vector<Rational>, std::vector<bool>> out{y0, std::vector<bool>(hp.ncols(), false)};
        for (std::size_t k = 0; k < tcols.size(); ++k) {
            out.first[tcols[k]] = dio.values[k];
            out.second[tcols[k]] = true;
        }
        return out;
    };

    // hp plus W v = 0 for the rounded kernel vectors v of every singular
    // block.
    auto face_system = [&](long q) {
        HyperplaneSystem face = hp;
        for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
            if (!singular[bi]) continue;
            const auto& g = blocks[bi];
            Eigen::MatrixXd w = block_matrix(g, cert.values);
            for (const auto& v : rational_kernel(w, thresholds[bi], q))
                for (std::size_t i = 0; i < g.side; ++i) {
                    std::map<std::size_t, Rational> row;
                    for (std::size_t j = 0; j < g.side; ++j)
                        if (v[j] != 0) row[hp.column_of.at(g.var(i, j))] += v[j];
                    if (row.empty()) continue;
                    face.rows.push_back(std::move(row));
                    face.rhs.emplace_back(0);
                    face.constraint.push_back(g.constraint);
                    face.monomial.emplace_back();
                }
        }
        return face;
    };

    // Pass 0 keeps template coefficients on small denominators; pass 1 lets
    // the projection move everything.
    for (int pass = 0; pass < (any_singular ? 2 : 1); ++pass) {
    for (const auto& q : schedule) {
        const long ql = q.get_si();
        std::vector<Rational> y0(hp.ncols());
        for (std::size_t c = 0; c < hp.ncols(); ++c) y0[c] = round_to_denominator(cert.values[hp.columns[c]], q);
        std::vector<Attempt> attempts;
        auto try_project = [&](const std::string& label, const std::vector<Rational>& start, const std::vector<bool>& fixed,
                               const HyperplaneSystem& sys, const std::vector<Rational>& wts) {
            try {
                attempts.push_back({label, assemble(project_orthogonal(sys, start, wts, fixed))});
            } catch (const SingularSystem&) {
                failures += " " + label + "@" + q.get_str() + ":inconsistent";
            }
        };

        if (!any_singular) {
            auto [tstart, tfixed] = template_fixed(y0, ql);
            try_project("1/template-fixed", tstart, tfixed, hp, weights);
            try_project("1", y0, {}, hp, weights);
        } else if (pass == 0) {
            // Joint rounding of the template coefficients and the singular blocks.
            std::vector<std::size_t> joint;
            for (const auto& t : prog.templates)
                for (std::size_t id : t.coeffs)
                    if (hp.column_of.count(id)) joint.push_back(hp.column_of.at(id));
            for (std::size_t bi = 0; bi < blocks.size(); ++bi)
                if (singular[bi])
                    for (std::size_t id : blocks[bi].vars) joint.push_back(hp.column_of.at(id));
            std::vector<double> xs;
            for (std::size_t c : joint) xs.push_back(cert.values[hp.columns[c]]);
            auto dio = simultaneous_diophantine(xs, ql);
            std::vector<Rational> start = y0;
            std::vector<bool> fixed(hp.ncols(), false);
            for (std::size_t k = 0; k < joint.size(); ++k) {
                start[joint[k]] = dio.values[k];
                fixed[joint[k]] = true;
            }
            if (all_singular) {
                std::vector<Rational> vals = assemble(start);
                attempts.push_back({"2.1", vals});
            } else {
                try_project("2.2", start, fixed, hp, weights);
            }

            auto [tstart, tfixed] = template_fixed(y0, ql);
            try_project("face", tstart, tfixed, face_system(ql), weights);
        } else {
            try_project("face-projected", y0, {}, face_system(ql), weights);
        }

        for (auto& a : attempts) {
            if (accept(a.values)) {
                RationalCertificate rc;
                rc.values = std::move(a.values);
                rc.denominator = q;
                rc.recovery_case = a.label;
                rc.bound = bound;
                rc.bound_holds = recovery_bound_holds(bound);
                return rc;
            }
            failures += " " + a.label + "@" + q.get_str() + ":rejected";
        }
    }
    }
    throw RecoveryFailed("no exact certificate with denominator <= " + cfg.D.get_str() + " (" +
                         (failures.empty() ? std::string("no attempts") : failures.substr(1)) + ")");
}

}  // namespace exinv
