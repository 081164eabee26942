#include "risac/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace risac {

namespace {

// Re tr(a b) without forming the product: tr(ab) = sum_pq a(p,q) b(q,p).
double re_inner(const MatC& a, const MatC& b) {
    return a.cwiseProduct(b.transpose()).sum().real();
}

MatC hermitize(const MatC& m) { return 0.5 * (m + m.adjoint()); }

/// Largest step t in [0, inf) keeping X + t*D positive definite, via the
/// smallest eigenvalue of L^-1 D L^-H where X = L L^H.
double max_psd_step(const MatC& x, const MatC& d) {
    Eigen::LLT<MatC> llt(x);
    if (llt.info() != Eigen::Success) return 0.0;
    const MatC l = llt.matrixL();
    MatC s = l.triangularView<Eigen::Lower>().solve(d);
    s = l.triangularView<Eigen::Lower>().solve(s.adjoint()).adjoint();
    Eigen::SelfAdjointEigenSolver<MatC> eig(hermitize(s), Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    if (lo >= 0.0) return std::numeric_limits<double>::infinity();
    return -1.0 / lo;
}

struct State {
    std::vector<MatC> x, z;
    VecD xl, zl;
    VecD y;
};

}  // namespace

SdpResult solve_sdp(const SdpProblem& prob, double tol, int max_iters) {
    const int m = prob.num_constraints();
    const int nb = static_cast<int>(prob.block_dims.size());
    const int lp = prob.lp_dim;

    double nu = lp;
    for (int d : prob.block_dims) nu += d;
    if (nu == 0 || m == 0) throw ConfigError("solve_sdp: empty problem");

    // Initial point: scaled identity well inside both cones. The scale tracks
    // the data magnitude so the first iterations are not spent rescaling.
    double data_scale = 1.0;
    for (int i = 0; i < m; ++i) {
        data_scale = std::max(data_scale, std::fabs(prob.b(i)));
        for (int bkt = 0; bkt < nb; ++bkt) data_scale = std::max(data_scale, prob.a_blocks[i][bkt].norm());
        if (lp > 0) data_scale = std::max(data_scale, prob.a_lp[i].lpNorm<Eigen::Infinity>());
    }
    for (int bkt = 0; bkt < nb; ++bkt) data_scale = std::max(data_scale, prob.c_blocks[bkt].norm());
    if (lp > 0) data_scale = std::max(data_scale, prob.c_lp.lpNorm<Eigen::Infinity>());
    const double xi = std::max(10.0, data_scale);

    State s;
    s.x.resize(nb);
    s.z.resize(nb);
    for (int bkt = 0; bkt < nb; ++bkt) {
        s.x[bkt] = xi * MatC::Identity(prob.block_dims[bkt], prob.block_dims[bkt]);
        s.z[bkt] = xi * MatC::Identity(prob.block_dims[bkt], prob.block_dims[bkt]);
    }
    s.xl = VecD::Constant(lp, xi);
    s.zl = VecD::Constant(lp, xi);
    s.y = VecD::Zero(m);

    SdpResult res;
    const double b_norm = 1.0 + prob.b.norm();
    double c_norm = prob.c_lp.size() ? prob.c_lp.norm() : 0.0;
    for (int bkt = 0; bkt < nb; ++bkt) c_norm += prob.c_blocks[bkt].norm();
    c_norm += 1.0;

    std::vector<MatC> zinv(nb), rd(nb), dz_aff(nb), dx_aff(nb), dz(nb), dx(nb), rc(nb);
    VecD rp(m), rd_lp(lp), rc_lp(lp), dxl(lp), dzl(lp), dxl_aff(lp), dzl_aff(lp);
    double mu = 0.0;

    // Recomputes residuals, snapshots the iterate into res, and reports
    // whether the convergence test passes.
    auto measure = [&](int iter) {
        double gap_inner = 0.0;
        for (int bkt = 0; bkt < nb; ++bkt) gap_inner += re_inner(s.x[bkt], s.z[bkt]);
        gap_inner += s.xl.dot(s.zl);
        mu = gap_inner / nu;

        for (int i = 0; i < m; ++i) {
            double ax = 0.0;
            for (int bkt = 0; bkt < nb; ++bkt) ax += re_inner(prob.a_blocks[i][bkt], s.x[bkt]);
            if (lp > 0) ax += prob.a_lp[i].dot(s.xl);
            rp(i) = prob.b(i) - ax;
        }
        double dual_res_sq = 0.0;
        for (int bkt = 0; bkt < nb; ++bkt) {
            rd[bkt] = prob.c_blocks[bkt] - s.z[bkt];
            for (int i = 0; i < m; ++i) rd[bkt] -= s.y(i) * prob.a_blocks[i][bkt];
            rd[bkt] = hermitize(rd[bkt]);
            dual_res_sq += rd[bkt].squaredNorm();
        }
        if (lp > 0) {
            rd_lp = prob.c_lp - s.zl;
            for (int i = 0; i < m; ++i) rd_lp -= s.y(i) * prob.a_lp[i];
            dual_res_sq += rd_lp.squaredNorm();
        }

        double pobj = lp > 0 ? prob.c_lp.dot(s.xl) : 0.0;
        for (int bkt = 0; bkt < nb; ++bkt) pobj += re_inner(prob.c_blocks[bkt], s.x[bkt]);
        const double dobj = prob.b.dot(s.y);

        res.x_blocks = s.x;
        res.x_lp = s.xl;
        res.y = s.y;
        res.primal_obj = pobj;
        res.dual_obj = dobj;
        res.primal_infeas = rp.norm() / b_norm;
        res.dual_infeas = std::sqrt(dual_res_sq) / c_norm;
        res.rel_gap = std::fabs(pobj - dobj) / (1.0 + std::fabs(pobj) + std::fabs(dobj));
        res.iterations = iter;
        return res.primal_infeas <= tol && res.dual_infeas <= tol && res.rel_gap <= tol;
    };

    for (int iter = 0; iter < max_iters; ++iter) {
        if (measure(iter)) {
            res.status = SdpStatus::Optimal;
            return res;
        }
        if (!std::isfinite(mu) || mu <= 0.0) {
            res.status = SdpStatus::NumericalError;
            return res;
        }

        // Z inverses through Cholesky.
        bool ok = true;
        for (int bkt = 0; bkt < nb && ok; ++bkt) {
            Eigen::LLT<MatC> llt(s.z[bkt]);
            if (llt.info() != Eigen::Success) { ok = false; break; }
            zinv[bkt] = llt.solve(MatC::Identity(prob.block_dims[bkt], prob.block_dims[bkt]));
            zinv[bkt] = hermitize(zinv[bkt]);
        }
        if (!ok) {
            res.status = SdpStatus::NumericalError;
            return res;
        }

        // Schur complement M_ij = sum_b Re tr(A_i X A_j Z^-1) + sum_l a_i a_j x/z.
        std::vector<std::vector<MatC>> u(m, std::vector<MatC>(nb));
        for (int j = 0; j < m; ++j)
            for (int bkt = 0; bkt < nb; ++bkt)
                u[j][bkt] = s.x[bkt] * prob.a_blocks[j][bkt] * zinv[bkt];
        MatD schur = MatD::Zero(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                double v = 0.0;
                for (int bkt = 0; bkt < nb; ++bkt) v += re_inner(prob.a_blocks[i][bkt], u[j][bkt]);
                schur(i, j) = v;
            }
        if (lp > 0) {
            VecD w = s.xl.cwiseQuotient(s.zl);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j) schur(i, j) += prob.a_lp[i].dot(w.cwiseProduct(prob.a_lp[j]));
        }
        schur = 0.5 * (schur + schur.transpose());
        // Tiny ridge keeps the factorization honest when constraints become
        // near-dependent close to the optimum.
        schur.diagonal().array() += 1e-13 * (1.0 + schur.diagonal().maxCoeff());
        Eigen::LDLT<MatD> schur_fac(schur);
        if (schur_fac.info() != Eigen::Success) {
            res.status = SdpStatus::NumericalError;
            return res;
        }

        std::vector<MatC> xrz(nb);  // X * Rd * Z^-1, shared by both direction solves
        for (int bkt = 0; bkt < nb; ++bkt) xrz[bkt] = s.x[bkt] * rd[bkt] * zinv[bkt];
        VecD lp_dual_term;
        if (lp > 0) lp_dual_term = s.xl.cwiseProduct(rd_lp).cwiseQuotient(s.zl);

        auto solve_direction = [&](const std::vector<MatC>& rc_b, const VecD& rc_l,
                                   std::vector<MatC>& dxo, std::vector<MatC>& dzo,
                                   VecD& dxlo, VecD& dzlo) {
            VecD rhs = rp;
            for (int i = 0; i < m; ++i) {
                double acc = 0.0;
                for (int bkt = 0; bkt < nb; ++bkt) {
                    acc -= re_inner(prob.a_blocks[i][bkt], rc_b[bkt]);
                    acc += re_inner(prob.a_blocks[i][bkt], xrz[bkt]);
                }
                if (lp > 0) {
                    acc -= prob.a_lp[i].dot(rc_l);
                    acc += prob.a_lp[i].dot(lp_dual_term);
                }
                rhs(i) += acc;
            }
            VecD dy = schur_fac.solve(rhs);
            for (int bkt = 0; bkt < nb; ++bkt) {
                dzo[bkt] = rd[bkt];
                for (int i = 0; i < m; ++i) dzo[bkt] -= dy(i) * prob.a_blocks[i][bkt];
                dzo[bkt] = hermitize(dzo[bkt]);
                dxo[bkt] = hermitize(rc_b[bkt] - s.x[bkt] * dzo[bkt] * zinv[bkt]);
            }
            if (lp > 0) {
                dzlo = rd_lp;
                for (int i = 0; i < m; ++i) dzlo -= dy(i) * prob.a_lp[i];
                dxlo = rc_l - s.xl.cwiseProduct(dzlo).cwiseQuotient(s.zl);
            }
            return dy;
        };

        // Predictor (affine direction, sigma = 0).
        for (int bkt = 0; bkt < nb; ++bkt) rc[bkt] = -s.x[bkt];
        rc_lp = -s.xl;
        solve_direction(rc, rc_lp, dx_aff, dz_aff, dxl_aff, dzl_aff);

        auto primal_step = [&](const std::vector<MatC>& dxb, const VecD& dxl_v) {
            double a = std::numeric_limits<double>::infinity();
            for (int bkt = 0; bkt < nb; ++bkt) a = std::min(a, max_psd_step(s.x[bkt], dxb[bkt]));
            for (int l = 0; l < lp; ++l)
                if (dxl_v(l) < 0.0) a = std::min(a, -s.xl(l) / dxl_v(l));
            return a;
        };
        auto dual_step = [&](const std::vector<MatC>& dzb, const VecD& dzl_v) {
            double a = std::numeric_limits<double>::infinity();
            for (int bkt = 0; bkt < nb; ++bkt) a = std::min(a, max_psd_step(s.z[bkt], dzb[bkt]));
            for (int l = 0; l < lp; ++l)
                if (dzl_v(l) < 0.0) a = std::min(a, -s.zl(l) / dzl_v(l));
            return a;
        };

        const double ap_aff = std::min(1.0, 0.99 * primal_step(dx_aff, dxl_aff));
        const double ad_aff = std::min(1.0, 0.99 * dual_step(dz_aff, dzl_aff));

        double gap_aff = 0.0;
        for (int bkt = 0; bkt < nb; ++bkt)
            gap_aff += re_inner(s.x[bkt] + ap_aff * dx_aff[bkt], s.z[bkt] + ad_aff * dz_aff[bkt]);
        gap_aff += (s.xl + ap_aff * dxl_aff).dot(s.zl + ad_aff * dzl_aff);
        const double mu_aff = std::max(gap_aff / nu, 0.0);
        const double sigma = std::clamp(std::pow(mu_aff / mu, 3.0), 1e-10, 1.0);

        // Corrector: recenter to sigma*mu and subtract the second-order term.
        for (int bkt = 0; bkt < nb; ++bkt) {
            MatC second = dx_aff[bkt] * dz_aff[bkt] * zinv[bkt];
            rc[bkt] = sigma * mu * zinv[bkt] - s.x[bkt] - hermitize(second);
        }
        for (int l = 0; l < lp; ++l)
            rc_lp(l) = (sigma * mu - dxl_aff(l) * dzl_aff(l)) / s.zl(l) - s.xl(l);
        VecD dy = solve_direction(rc, rc_lp, dx, dz, dxl, dzl);

        const double gamma = 0.99;
        const double ap = std::min(1.0, gamma * primal_step(dx, dxl));
        const double ad = std::min(1.0, gamma * dual_step(dz, dzl));
        if (ap < 1e-10 && ad < 1e-10) {
            res.status = SdpStatus::NumericalError;
            return res;
        }

        for (int bkt = 0; bkt < nb; ++bkt) {
            s.x[bkt] = hermitize(s.x[bkt] + ap * dx[bkt]);
            s.z[bkt] = hermitize(s.z[bkt] + ad * dz[bkt]);
        }
        s.xl += ap * dxl;
        s.zl += ad * dzl;
        s.y += ad * dy;
    }

    // Account for the final step before reporting the cap.
    if (measure(max_iters)) {
        res.status = SdpStatus::Optimal;
    } else {
        res.status = SdpStatus::MaxIters;
    }
    return res;
}

}  // namespace risac
