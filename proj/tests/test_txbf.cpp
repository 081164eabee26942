#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "risac/txbf.hpp"

using namespace risac;

namespace {

MatC random_channel(int k, int nt, std::uint64_t seed) {
    Rng rng(seed);
    MatC h(k, nt);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < nt; ++j) h(i, j) = rng.cgaussian(1.0);
    return h;
}

// Exhaustive max-min SINR for N_t = 2, K = 2 over beam directions and the
// power split, with a few local refinement rounds. Global beam phases are
// irrelevant, so each beam is two real parameters.
double brute_force_two_user(const MatC& h, double p_max, double noise) {
    auto eval = [&](double t1, double f1, double t2, double f2, double rho) {
        MatC w(2, 2);
        w(0, 0) = std::cos(t1);
        w(1, 0) = std::polar(std::sin(t1), f1);
        w(0, 1) = std::cos(t2);
        w(1, 1) = std::polar(std::sin(t2), f2);
        w.col(0) *= std::sqrt(rho * p_max);
        w.col(1) *= std::sqrt((1.0 - rho) * p_max);
        return sinr_per_user(h, w, noise).minCoeff();
    };

    double bt1 = 0, bf1 = 0, bt2 = 0, bf2 = 0, brho = 0.5;
    double best = -1.0;
    const int na = 16, nf = 24, nr = 17;
    for (int i1 = 0; i1 < na; ++i1)
        for (int j1 = 0; j1 < nf; ++j1)
            for (int i2 = 0; i2 < na; ++i2)
                for (int j2 = 0; j2 < nf; ++j2)
                    for (int r = 1; r < nr; ++r) {
                        const double t1 = (kPi / 2.0) * i1 / (na - 1);
                        const double f1 = kTwoPi * j1 / nf;
                        const double t2 = (kPi / 2.0) * i2 / (na - 1);
                        const double f2 = kTwoPi * j2 / nf;
                        const double rho = static_cast<double>(r) / nr;
                        const double s = eval(t1, f1, t2, f2, rho);
                        if (s > best) {
                            best = s;
                            bt1 = t1; bf1 = f1; bt2 = t2; bf2 = f2; brho = rho;
                        }
                    }

    // Coordinate refinement shrinks the grid error well below a percent.
    double step_a = (kPi / 2.0) / (na - 1), step_f = kTwoPi / nf, step_r = 1.0 / nr;
    for (int round = 0; round < 6; ++round) {
        for (int p = 0; p < 5; ++p) {
            for (int d = -4; d <= 4; ++d) {
                double t1 = bt1, f1 = bf1, t2 = bt2, f2 = bf2, rho = brho;
                if (p == 0) t1 += d * step_a / 4.0;
                if (p == 1) f1 += d * step_f / 4.0;
                if (p == 2) t2 += d * step_a / 4.0;
                if (p == 3) f2 += d * step_f / 4.0;
                if (p == 4) rho = std::clamp(rho + d * step_r / 4.0, 1e-3, 1.0 - 1e-3);
                const double s = eval(t1, f1, t2, f2, rho);
                if (s > best) {
                    best = s;
                    bt1 = t1; bf1 = f1; bt2 = t2; bf2 = f2; brho = rho;
                }
            }
        }
        step_a /= 4.0;
        step_f /= 4.0;
        step_r /= 4.0;
    }
    return best;
}

}  // namespace

TEST_CASE("lifted and vector SINR coincide on rank-one covariances") {
    const MatC h = random_channel(3, 4, 71);
    Rng rng(72);
    MatC w(4, 3);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 3; ++j) w(i, j) = rng.cgaussian(1.0);
    std::vector<MatC> lifted;
    for (int j = 0; j < 3; ++j)
        lifted.push_back(w.col(j) * w.col(j).adjoint());
    const VecD a = sinr_per_user(h, w, 0.3);
    const VecD b = sinr_lifted(h, lifted, 0.3);
    for (int i = 0; i < 3; ++i) CHECK(a(i) == doctest::Approx(b(i)).epsilon(1e-10));
}

TEST_CASE("combine_channels matches a hand-multiplied cascade") {
    ChannelSet ch;
    ch.H_br[0] = MatC(2, 2);
    ch.H_br[0] << cd(1, 0), cd(0, 1), cd(0.5, -0.5), cd(2, 0);
    ch.h_ru[0] = MatC(1, 2);
    ch.h_ru[0] << cd(0, -1), cd(1, 1);
    std::array<VecD, 2> theta;
    theta[0] = VecD(2);
    theta[0] << 0.7, -1.1;

    const MatC got = combine_channels(ch, theta);
    REQUIRE(got.rows() == 1);
    REQUIRE(got.cols() == 2);
    for (int j = 0; j < 2; ++j) {
        cd want = 0.0;
        for (int n = 0; n < 2; ++n)
            want += ch.h_ru[0](0, n) * std::polar(1.0, theta[0](n)) * ch.H_br[0](n, j);
        CHECK(got(0, j).real() == doctest::Approx(want.real()).epsilon(1e-12));
        CHECK(got(0, j).imag() == doctest::Approx(want.imag()).epsilon(1e-12));
    }

    theta[0] = VecD::Zero(3);
    CHECK_THROWS_AS(combine_channels(ch, theta), ConfigError);
}

TEST_CASE("single-user optimum is the matched filter") {
    const MatC h = random_channel(1, 6, 73);
    const double noise = 0.5, p_max = 2.0;
    const double tau_mf = p_max * h.squaredNorm() / noise;

    TxbfOptions opts;
    opts.tau_max = 1.5 * tau_mf;
    opts.epsilon = 1e-4 * tau_mf;
    const TxbfSolution sol = optimize_txbf(h, p_max, noise, opts, 99);

    CHECK(sol.tau <= tau_mf * (1.0 + 1e-6));
    CHECK(sol.tau >= tau_mf - 2.0 * opts.epsilon);
    CHECK(sol.beams.min_sinr == doctest::Approx(tau_mf).epsilon(1e-5));
    CHECK_FALSE(sol.beams.degraded);
    CHECK(sol.beams.w.squaredNorm() == doctest::Approx(p_max).epsilon(1e-9));

    // Direction must align with the channel up to a global phase.
    const VecC hc = h.row(0).adjoint();
    const double corr = std::abs((hc.adjoint() * sol.beams.w.col(0))(0, 0)) /
                        (hc.norm() * sol.beams.w.col(0).norm());
    CHECK(corr == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("bisection step count is the pinned ceil(log2(range/eps))") {
    const MatC h = random_channel(1, 4, 79);
    // Scale the channel so the matched-filter optimum lands inside (0, 10).
    const MatC hs = h * std::sqrt(4.0 / (2.0 * h.squaredNorm()));
    TxbfOptions opts;
    opts.tau_min = 0.0;
    opts.tau_max = 10.0;
    opts.epsilon = 0.01;
    const TxbfSolution sol = optimize_txbf(hs, 2.0, 1.0, opts, 99);
    CHECK(sol.bisection_steps == 10);
}

TEST_CASE("warm start is used when feasible and ignored when not") {
    const MatC h = random_channel(1, 4, 83);
    const double noise = 1.0, p_max = 2.0;
    const double tau_mf = p_max * h.squaredNorm() / noise;

    TxbfOptions opts;
    opts.tau_max = 1.5 * tau_mf;
    opts.epsilon = 1e-3 * tau_mf;
    opts.warm_tau = 0.9 * tau_mf;
    const TxbfSolution warm = optimize_txbf(h, p_max, noise, opts, 99);
    CHECK(warm.tau >= 0.9 * tau_mf - 1e-9);
    CHECK(warm.tau <= tau_mf * (1.0 + 1e-6));

    opts.warm_tau = 1.1 * tau_mf;  // infeasible hint must not poison the result
    const TxbfSolution cold = optimize_txbf(h, p_max, noise, opts, 99);
    CHECK(cold.tau <= tau_mf * (1.0 + 1e-6));
    CHECK(cold.tau >= tau_mf - 2.0 * opts.epsilon - 1e-9);
}

TEST_CASE("two-user relaxation matches an exhaustive search") {
    const MatC h = random_channel(2, 2, 89);
    const double noise = 1.0, p_max = 2.0;
    const double tau_bf = brute_force_two_user(h, p_max, noise);

    TxbfOptions opts;
    opts.tau_max = 4.0 * tau_bf;
    opts.epsilon = 1e-3;
    const TxbfSolution sol = optimize_txbf(h, p_max, noise, opts, 99);

    // The relaxation upper-bounds every explicit scheme, and for two users it
    // is tight, so the two values must bracket each other.
    CHECK(sol.tau >= tau_bf * (1.0 - 1e-3) - 2.0 * opts.epsilon);
    CHECK(tau_bf <= sol.tau + 2.0 * opts.epsilon + 1e-3 * sol.tau);

    CHECK(solve_feasibility(h, 0.95 * tau_bf, p_max, noise).feasible);
    CHECK_FALSE(solve_feasibility(h, sol.tau + 3.0 * opts.epsilon + 1e-2 * sol.tau,
                                  p_max, noise).feasible);
}

TEST_CASE("feasible covariances satisfy every reported constraint") {
    const MatC h = random_channel(3, 6, 97);
    const double noise = 0.7, p_max = 1.5;

    TxbfOptions opts;
    opts.tau_max = 20.0;
    opts.epsilon = 1e-3;
    const TxbfSolution sol = optimize_txbf(h, p_max, noise, opts, 99);
    const double tau = 0.8 * sol.tau;
    const FeasibilityResult r = solve_feasibility(h, tau, p_max, noise);
    REQUIRE(r.feasible);

    double total = 0.0;
    for (const MatC& w : r.w_lifted) {
        Eigen::SelfAdjointEigenSolver<MatC> eig(w);
        CHECK(eig.eigenvalues().minCoeff() > -1e-8 * std::max(1.0, w.trace().real()));
        total += w.trace().real();
    }
    CHECK(total <= p_max * (1.0 + 1e-6));

    const VecD sinr = sinr_lifted(h, r.w_lifted, noise);
    for (int k = 0; k < 3; ++k) CHECK(sinr(k) >= tau * (1.0 - 1e-3));
}

TEST_CASE("rank-one covariances pass through extraction unchanged") {
    const MatC h = random_channel(2, 4, 101);
    Rng rng(102);
    MatC w(4, 2);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 2; ++j) w(i, j) = rng.cgaussian(1.0);
    const double p_max = 2.0 * w.squaredNorm();  // extraction rescales by sqrt(2)
    std::vector<MatC> lifted;
    for (int j = 0; j < 2; ++j) lifted.push_back(w.col(j) * w.col(j).adjoint());

    const BeamExtraction ext = extract_rank1(lifted, h, 0.0, p_max, 1.0, 50, 99);
    CHECK(ext.w.squaredNorm() == doctest::Approx(p_max).epsilon(1e-9));
    for (int j = 0; j < 2; ++j) {
        const double corr = std::abs((w.col(j).adjoint() * ext.w.col(j))(0, 0)) /
                            (w.col(j).norm() * ext.w.col(j).norm());
        CHECK(corr == doctest::Approx(1.0).epsilon(1e-8));
    }
    const double expect = sinr_per_user(h, std::sqrt(2.0) * w, 1.0).minCoeff();
    CHECK(ext.min_sinr == doctest::Approx(expect).epsilon(1e-8));
}

TEST_CASE("degenerate inputs raise typed errors") {
    CHECK_THROWS_AS(solve_feasibility(MatC::Zero(2, 3), 1.0, 1.0, 1.0), SolverError);

    const MatC h = 1e-3 * random_channel(1, 3, 103);
    TxbfOptions opts;
    opts.tau_min = 1.0;  // far above anything this faint channel can reach
    opts.tau_max = 2.0;
    CHECK_THROWS_AS(optimize_txbf(h, 1.0, 1.0, opts, 99), SolverError);

    opts.tau_min = 0.0;
    opts.tau_max = 0.0;
    CHECK_THROWS_AS(optimize_txbf(h, 1.0, 1.0, opts, 99), ConfigError);
}
