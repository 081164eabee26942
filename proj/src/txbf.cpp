#include "risac/txbf.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace risac {

MatC combine_channels(const ChannelSet& ch, const std::array<VecD, 2>& theta) {
    MatC out;
    for (int i = 0; i < 2; ++i) {
        if (ch.h_ru[i].size() == 0 || ch.H_br[i].size() == 0) continue;
        const int n = static_cast<int>(ch.H_br[i].rows());
        if (theta[i].size() != n)
            throw ConfigError("combine_channels: phase vector length mismatch");
        VecC e(n);
        for (int j = 0; j < n; ++j) e(j) = std::polar(1.0, theta[i](j));
        MatC part = (ch.h_ru[i] * e.asDiagonal()) * ch.H_br[i];
        if (out.size() == 0)
            out = part;
        else
            out += part;
    }
    if (out.size() == 0) throw ConfigError("combine_channels: no channels");
    return out;
}

VecD sinr_per_user(const MatC& h_combined, const MatC& w, double noise_power) {
    const int k = static_cast<int>(h_combined.rows());
    MatC g = h_combined * w;  // g(k, j) = h_k^H w_j
    VecD out(k);
    for (int i = 0; i < k; ++i) {
        double sig = std::norm(g(i, i));
        double intf = 0.0;
        for (int j = 0; j < k; ++j)
            if (j != i) intf += std::norm(g(i, j));
        out(i) = sig / (intf + noise_power);
    }
    return out;
}

VecD sinr_lifted(const MatC& h_combined, const std::vector<MatC>& w_lifted,
                 double noise_power) {
    const int k = static_cast<int>(h_combined.rows());
    VecD out(k);
    for (int i = 0; i < k; ++i) {
        const VecC h = h_combined.row(i).adjoint();  // column h_k
        double sig = 0.0, intf = 0.0;
        for (int j = 0; j < k; ++j) {
            const double q = (h.adjoint() * w_lifted[j] * h).real()(0, 0);
            if (j == i)
                sig = q;
            else
                intf += q;
        }
        out(i) = sig / (intf + noise_power);
    }
    return out;
}

FeasibilityResult solve_feasibility(const MatC& h_combined, double tau,
                                    double p_max, double noise_power,
                                    double sdp_tol, int sdp_max_iters) {
    const int k = static_cast<int>(h_combined.rows());
    const int nt = static_cast<int>(h_combined.cols());
    if (k < 1 || nt < 1) throw ConfigError("solve_feasibility: empty channel");
    if (tau < 0.0) throw ConfigError("solve_feasibility: negative target");

    // Row-norm equilibration. The solve is exactly equivalent (constraints are
    // divided through by eta^2); without it the channel outer products sit ten
    // orders of magnitude below the power constraint and the interior point
    // stalls.
    double eta = 0.0;
    for (int i = 0; i < k; ++i) eta = std::max(eta, h_combined.row(i).norm());
    if (eta <= 0.0) throw SolverError("solve_feasibility: zero channel matrix");
    const MatC hn = h_combined / eta;
    const double noise_n = noise_power / (eta * eta);

    // Margin maximization in standard equality form. Variables: K covariance
    // blocks, then slack scalars [u_1..u_K, p, t] with t = margin + tau*noise_n
    // + 1 (the shift keeps t in the nonnegative orthant; W = 0, u = 0 already
    // gives t = 1, and any optimum has t >= 1, so the shifted bound is never
    // active and the reformulation is exact).
    SdpProblem prob;
    prob.block_dims.assign(k, nt);
    prob.lp_dim = k + 2;
    const int m = k + 1;
    prob.b = VecD(m);
    prob.c_blocks.assign(k, MatC::Zero(nt, nt));
    prob.c_lp = VecD::Zero(k + 2);
    prob.c_lp(k + 1) = -1.0;  // maximize the shifted margin
    prob.a_blocks.assign(m, std::vector<MatC>(k));
    prob.a_lp.assign(m, VecD::Zero(k + 2));

    for (int i = 0; i < k; ++i) {
        const VecC h = hn.row(i).adjoint();
        const MatC outer = h * h.adjoint();
        for (int j = 0; j < k; ++j)
            prob.a_blocks[i][j] = (j == i) ? outer : MatC(-tau * outer);
        prob.a_lp[i](i) = -1.0;      // SINR slack u_i
        prob.a_lp[i](k + 1) = -1.0;  // shifted margin t
        prob.b(i) = -1.0;            // tau*noise_n - (tau*noise_n + 1)
    }
    for (int j = 0; j < k; ++j) prob.a_blocks[k][j] = MatC::Identity(nt, nt);
    prob.a_lp[k](k) = 1.0;  // power slack p
    prob.b(k) = p_max;

    SdpResult sol = solve_sdp(prob, sdp_tol, sdp_max_iters);

    FeasibilityResult out;
    out.status = sol.status;
    out.iterations = sol.iterations;
    out.w_lifted = sol.x_blocks;
    const double t = sol.x_lp(k + 1);
    out.slack = t - (tau * noise_n + 1.0);
    out.feasible = (sol.status != SdpStatus::NumericalError) && out.slack >= -1e-7;
    return out;
}

BeamExtraction extract_rank1(const std::vector<MatC>& w_lifted,
                             const MatC& h_combined, double tau, double p_max,
                             double noise_power, int n_draws, std::uint64_t seed) {
    const int k = static_cast<int>(w_lifted.size());
    const int nt = static_cast<int>(h_combined.cols());

    // Eigen-decompose every covariance once; reuse for principal vectors,
    // rank tests, and gaussian shaping.
    std::vector<Eigen::SelfAdjointEigenSolver<MatC>> eig(k);
    bool all_rank_one = true;
    for (int j = 0; j < k; ++j) {
        eig[j].compute(0.5 * (w_lifted[j] + w_lifted[j].adjoint()));
        const auto& ev = eig[j].eigenvalues();  // ascending
        const double lead = std::max(ev(nt - 1), 0.0);
        const double second = nt >= 2 ? std::max(ev(nt - 2), 0.0) : 0.0;
        if (lead <= 0.0 || second > 1e-6 * lead) all_rank_one = false;
    }

    auto principal = [&](int j) {
        const double lead = std::max(eig[j].eigenvalues()(nt - 1), 0.0);
        return VecC(std::sqrt(lead) * eig[j].eigenvectors().col(nt - 1));
    };

    auto score = [&](MatC& w) {
        const double power = w.squaredNorm();
        if (power <= 0.0) return -1.0;
        w *= std::sqrt(p_max / power);  // scaling every column together is SINR-monotone
        return sinr_per_user(h_combined, w, noise_power).minCoeff();
    };

    MatC best(nt, k);
    for (int j = 0; j < k; ++j) best.col(j) = principal(j);
    double best_sinr = score(best);

    if (!all_rank_one) {
        std::vector<MatC> shape(k);  // W^(1/2) with negative eigenvalues clamped
        for (int j = 0; j < k; ++j) {
            VecD root = eig[j].eigenvalues().cwiseMax(0.0).cwiseSqrt();
            shape[j] = eig[j].eigenvectors() * root.asDiagonal() *
                       eig[j].eigenvectors().adjoint();
        }
        Rng rng(derive_seed(seed, 0xBEA11));
        MatC cand(nt, k);
        for (int r = 0; r < n_draws; ++r) {
            for (int j = 0; j < k; ++j) {
                VecC e(nt);
                for (int a = 0; a < nt; ++a) e(a) = rng.cgaussian(1.0);
                cand.col(j) = shape[j] * e;
            }
            const double s = score(cand);
            if (s > best_sinr) {
                best_sinr = s;
                best = cand;
            }
        }
    }

    BeamExtraction out;
    out.w = best;
    out.min_sinr = best_sinr;
    out.degraded = best_sinr < 0.95 * tau;
    return out;
}

TxbfSolution optimize_txbf(const MatC& h_combined, double p_max,
                           double noise_power, const TxbfOptions& opts,
                           std::uint64_t seed) {
    if (opts.tau_max <= opts.tau_min)
        throw ConfigError("optimize_txbf: tau_max must exceed tau_min");
    if (opts.epsilon <= 0.0) throw ConfigError("optimize_txbf: epsilon must be positive");

    TxbfSolution sol;
    int probe = 0;
    const auto timed_solve = [&](double tau) {
        const auto t0 = std::chrono::steady_clock::now();
        FeasibilityResult r = solve_feasibility(h_combined, tau, p_max, noise_power,
                                                opts.sdp_tol, opts.sdp_max_iters);
        const double ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
        sol.sdp_iterations += r.iterations;
        sol.trace.push_back({probe++, tau, r.feasible, r.iterations, ms});
        return r;
    };

    FeasibilityResult base = timed_solve(opts.tau_min);
    if (!base.feasible)
        throw SolverError("optimize_txbf: lower bisection bound infeasible");

    double lo = opts.tau_min;
    double hi = opts.tau_max;
    sol.w_lifted = std::move(base.w_lifted);

    if (opts.warm_tau && *opts.warm_tau > lo && *opts.warm_tau < hi) {
        FeasibilityResult warm = timed_solve(*opts.warm_tau);
        if (warm.feasible) {
            lo = *opts.warm_tau;
            sol.w_lifted = std::move(warm.w_lifted);
        }
    }

    while (hi - lo > opts.epsilon) {
        const double mid = 0.5 * (lo + hi);
        FeasibilityResult r = timed_solve(mid);
        sol.bisection_steps += 1;
        if (r.feasible) {
            lo = mid;
            sol.w_lifted = std::move(r.w_lifted);
        } else {
            hi = mid;
        }
    }

    sol.tau = lo;
    sol.beams = extract_rank1(sol.w_lifted, h_combined, lo, p_max, noise_power,
                              opts.n_draws, seed);
    return sol;
}

}  // namespace risac
