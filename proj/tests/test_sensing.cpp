#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "risac/sensing.hpp"

using namespace risac;

namespace {

// Independent shortest-covering-arc search: try every (start, length) pair.
Arc brute_force_arc(const std::vector<int>& pts, int q) {
    for (int len = 1; len <= q; ++len) {
        for (int start = 0; start < q; ++start) {
            bool covers = true;
            for (int p : pts) {
                const int off = (p - start + q) % q;
                if (off >= len) { covers = false; break; }
            }
            if (covers) return Arc{start, len};
        }
    }
    return Arc{0, q};
}

int quantize_ref(double theta, int q) {
    const double r = wrap_angle(theta) / (kTwoPi / q);
    int idx = static_cast<int>(std::ceil(r - 0.5));
    return ((idx % q) + q) % q;
}

}  // namespace

TEST_CASE("narrow_feasible_set pinned example at three bits") {
    // Optimal phases 0.3 and 1.4 quantize to grid indices 0 and 2 on the
    // eight-point grid; the shortest covering arc is {0, pi/4, pi/2}.
    const FeasibleSetTable t = narrow_feasible_set({{0.3, 1.4}}, 3);
    REQUIRE(t.arcs.size() == 1);
    CHECK(t.arcs[0].start == 0);
    CHECK(t.arcs[0].length == 3);
    CHECK(t.grid_value(0) == doctest::Approx(0.0));
    CHECK(t.grid_value(1) == doctest::Approx(kPi / 4.0));
    CHECK(t.grid_value(2) == doctest::Approx(kPi / 2.0));
}

TEST_CASE("quantization pins at two bits") {
    // 1.7 rad sits closest to pi/2 (index 1); 6.2 rad wraps to index 0.
    const FeasibleSetTable a = narrow_feasible_set({{1.7}}, 2);
    CHECK(a.arcs[0].start == 1);
    CHECK(a.arcs[0].length == 1);
    const FeasibleSetTable b = narrow_feasible_set({{6.2}}, 2);
    CHECK(b.arcs[0].start == 0);
    CHECK(b.arcs[0].length == 1);
    // Exact halfway cases round to the smaller index.
    const FeasibleSetTable c = narrow_feasible_set({{kPi / 4.0}}, 2);
    CHECK(c.arcs[0].start == 0);
}

TEST_CASE("one-bit arcs never exceed two points") {
    Rng rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> users(4);
        for (double& u : users) u = rng.uniform_angle();
        const FeasibleSetTable t = narrow_feasible_set({users}, 1);
        CHECK(t.arcs[0].length >= 1);
        CHECK(t.arcs[0].length <= 2);
    }
}

TEST_CASE("narrowed arcs cover all quantized points and are minimal") {
    Rng rng(33);
    for (int trial = 0; trial < 300; ++trial) {
        const int bits = 1 + static_cast<int>(rng.uniform() * 4.0);
        const int q = 1 << bits;
        const int k = 1 + static_cast<int>(rng.uniform() * 5.0);
        std::vector<double> users(k);
        for (double& u : users) u = rng.uniform_angle();
        const FeasibleSetTable t = narrow_feasible_set({users}, bits);
        const Arc got = t.arcs[0];

        std::set<int> pts;
        for (double u : users) pts.insert(quantize_ref(u, q));
        for (int p : pts) {
            const int off = (p - got.start + q) % q;
            CHECK(off < got.length);
        }
        const Arc want = brute_force_arc(std::vector<int>(pts.begin(), pts.end()), q);
        CHECK(got.length == want.length);
    }
}

TEST_CASE("codebook_size multiplies arc lengths and saturates") {
    FeasibleSetTable t;
    t.bits = 2;
    t.arcs = {{0, 3}, {1, 2}, {2, 4}};
    CHECK(t.codebook_size() == 24);
    t.arcs.assign(63, Arc{0, 2});
    CHECK(t.codebook_size() == (1ULL << 62));
}

TEST_CASE("optimal_phase pinned values") {
    BoresightAngles incident;  // normal incidence: phi = 0
    BoresightAngles departure;
    departure.phi = kPi / 2.0;  // grazing along +y
    departure.vphi = 0.0;
    CHECK(optimal_phase(1, 1, incident, departure, 0.01, 0.01, 0.02) ==
          doctest::Approx(kPi / 2.0));
    CHECK(optimal_phase(2, 1, incident, departure, 0.01, 0.01, 0.02) ==
          doctest::Approx(3.0 * kPi / 2.0));
    CHECK_THROWS_AS(optimal_phase(0, 1, incident, departure, 0.01, 0.01, 0.02),
                    ConfigError);
}

TEST_CASE("optimal_phase aligns the cascaded element responses") {
    // With theta from optimal_phase, conj(a_dep) .* e^{j theta} .* a_arr has a
    // constant phase across elements, so the cascade magnitude reaches N.
    const double d = 0.01, lam = 0.02;
    const double s = kTwoPi * d / lam;
    const int n_y = 5, n_z = 4;
    Rng rng(37);
    for (int trial = 0; trial < 20; ++trial) {
        BoresightAngles inc, dep;
        inc.phi = rng.uniform() * kPi / 2.0;
        inc.vphi = rng.uniform_angle() - kPi;
        dep.phi = rng.uniform() * kPi / 2.0;
        dep.vphi = rng.uniform_angle() - kPi;

        // Arrival steering points back along the incident propagation.
        const double u_arr = -s * std::sin(inc.phi) * std::cos(inc.vphi);
        const double v_arr = -s * std::sin(inc.phi) * std::sin(inc.vphi);
        const double u_dep = s * std::sin(dep.phi) * std::cos(dep.vphi);
        const double v_dep = s * std::sin(dep.phi) * std::sin(dep.vphi);
        const VecC a_arr = steering_upa(n_y, n_z, u_arr, v_arr);
        const VecC a_dep = steering_upa(n_y, n_z, u_dep, v_dep);

        cd cascade = 0.0;
        for (int ny = 0; ny < n_y; ++ny) {
            for (int nz = 0; nz < n_z; ++nz) {
                const int idx = ny * n_z + nz;
                const double th = optimal_phase(ny + 1, nz + 1, inc, dep, d, d, lam);
                cascade += std::conj(a_dep(idx)) * std::polar(1.0, th) * a_arr(idx);
            }
        }
        CHECK(std::abs(cascade) == doctest::Approx(n_y * n_z).epsilon(1e-9));
    }
}

TEST_CASE("covariance of a noiseless echo has rank K") {
    SystemConfig cfg;
    cfg.snapshots = 200;
    cfg.user_cluster_radius = 12.0;  // rank check wants separated directions
    // Deterministic seed scan for a draw whose user directions are pairwise
    // separated enough that the rank check is well conditioned.
    std::uint64_t pick = 41;
    for (; pick < 141; ++pick) {
        const Scenario probe = make_scenario(cfg, pick);
        double min_sep = 1e9;
        for (int a = 0; a < cfg.n_users; ++a)
            for (int b = a + 1; b < cfg.n_users; ++b) {
                const double du = probe.ris[0].user_links[a].u - probe.ris[0].user_links[b].u;
                const double dv = probe.ris[0].user_links[a].v - probe.ris[0].user_links[b].v;
                min_sep = std::min(min_sep, std::hypot(du, dv));
            }
        if (min_sep > 0.12) break;
    }
    REQUIRE(pick < 141);
    Scenario sc = make_scenario(cfg, pick);
    const ChannelSet ch = synth_channels(sc, pick);
    sc.cfg.noise_power_sensor = 0.0;  // bypass validate: probe the noiseless limit
    const SnapshotMatrix snaps = simulate_echo(sc, ch, 0, pick);
    const MatC cov = covariance(snaps);
    Eigen::SelfAdjointEigenSolver<MatC> eig(cov);
    const VecD ev = eig.eigenvalues().reverse();
    // Clustered user directions give a geometrically decaying signal spectrum,
    // so assert rank K through the gap between the K-th eigenvalue and the
    // rounding floor rather than an absolute threshold.
    const int k = cfg.n_users;
    CHECK(ev(k - 1) / ev(0) > 1e-13);   // K-th signal dimension above rounding
    CHECK(ev(k - 1) > 1e4 * ev(k));     // clean gap to the noise floor
    CHECK(ev(k) / ev(0) < 1e-12);       // nothing beyond K but rounding
}

TEST_CASE("subspace_split returns an orthonormal descending basis") {
    SystemConfig cfg;
    cfg.snapshots = 100;
    const Scenario sc = make_scenario(cfg, 43);
    const ChannelSet ch = synth_channels(sc, 43);
    const SnapshotMatrix snaps = simulate_echo(sc, ch, 1, 43);
    const MatC cov = covariance(snaps);
    const SubspacePair sp = subspace_split(cov, cfg.n_users);
    const int m = cfg.n_sense_elements();
    REQUIRE(sp.signal.cols() == cfg.n_users);
    REQUIRE(sp.noise.cols() == m - cfg.n_users);
    CHECK((sp.signal.adjoint() * sp.signal - MatC::Identity(4, 4)).norm() < 1e-10);
    CHECK((sp.signal.adjoint() * sp.noise).norm() < 1e-10);
    for (int i = 1; i < m; ++i) CHECK(sp.eigenvalues(i) <= sp.eigenvalues(i - 1) + 1e-18);
    CHECK_THROWS_AS(subspace_split(cov, 0), ConfigError);
    CHECK_THROWS_AS(subspace_split(cov, m), ConfigError);
}

TEST_CASE("music_spectrum agrees with the direct noise-subspace formula") {
    const int n_y = 2, n_z = 3, m = n_y * n_z;
    Rng rng(47);
    MatC y(m, 40);
    const VecC a1 = steering_upa(n_y, n_z, 0.9, -1.2);
    const VecC a2 = steering_upa(n_y, n_z, -2.0, 0.4);
    for (int t = 0; t < 40; ++t)
        y.col(t) = rng.cgaussian(1.0) * a1 + rng.cgaussian(1.0) * a2 +
                   0.01 * VecC::NullaryExpr(m, [&](Eigen::Index) { return rng.cgaussian(1.0); });
    SnapshotMatrix snaps;
    snaps.y = y;
    const MatC cov = covariance(snaps);
    const SubspacePair sp = subspace_split(cov, 2);

    GridSpec grid;
    grid.n_u = 21;
    grid.n_v = 21;
    const MatD spec = music_spectrum(sp, n_y, n_z, grid);
    for (int i = 0; i < grid.n_u; ++i) {
        for (int j = 0; j < grid.n_v; ++j) {
            const VecC a = steering_upa(n_y, n_z, grid.u_at(i), grid.v_at(j));
            const double denom = (a.adjoint() * sp.noise).squaredNorm();
            const double want = std::min(1.0 / std::max(denom, 1e-15), 1e15);
            CHECK(spec(i, j) == doctest::Approx(want).epsilon(1e-8));
        }
    }
}

TEST_CASE("noiseless sources at grid points are recovered exactly") {
    const int n_y = 8, n_z = 8, m = n_y * n_z;
    GridSpec grid;
    const std::vector<std::pair<int, int>> src = {{45, 60}, {90, 100}, {135, 30}};
    MatC a(m, 3);
    for (int c = 0; c < 3; ++c)
        a.col(c) = steering_upa(n_y, n_z, grid.u_at(src[c].first), grid.v_at(src[c].second));
    Rng rng(53);
    MatC y(m, 60);
    for (int t = 0; t < 60; ++t) {
        VecC sym(3);
        for (int c = 0; c < 3; ++c) sym(c) = rng.cgaussian(1.0);
        y.col(t) = a * sym;
    }
    SnapshotMatrix snaps;
    snaps.y = y;
    const SubspacePair sp = subspace_split(covariance(snaps), 3);
    const MatD spec = music_spectrum(sp, n_y, n_z, grid);
    const auto peaks = pick_peaks(spec, grid, 3, 0.01, 0.02);

    std::set<std::pair<int, int>> got, want(src.begin(), src.end());
    for (const AngleEstimate& e : peaks) got.insert({e.grid_iu, e.grid_iv});
    CHECK(got == want);
    // Exact steering nulls the projection up to eigendecomposition rounding.
    for (const AngleEstimate& e : peaks) CHECK(e.peak_value > 1e12);
}

TEST_CASE("pick_peaks orders by value and reports a shortfall") {
    GridSpec grid;
    grid.n_u = 5;
    grid.n_v = 5;
    MatD spec = MatD::Zero(5, 5);
    spec(1, 1) = 3.0;
    spec(3, 3) = 7.0;
    const auto peaks = pick_peaks(spec, grid, 2, 0.01, 0.02);
    CHECK(peaks[0].grid_iu == 3);
    CHECK(peaks[0].peak_value == 7.0);
    CHECK(peaks[1].grid_iu == 1);
    CHECK_THROWS_AS(pick_peaks(spec, grid, 3, 0.01, 0.02), SolverError);
    // A flat spectrum has no strict maxima at all.
    CHECK_THROWS_AS(pick_peaks(MatD::Ones(5, 5), grid, 1, 0.01, 0.02), SolverError);
}

TEST_CASE("echo of a full scenario localizes the users") {
    SystemConfig cfg;
    cfg.n_users = 3;
    cfg.snapshots = 400;
    cfg.user_cluster_radius = 12.0;  // localization wants resolvable users

    GridSpec grid;
    grid.n_u = cfg.music_grid;
    grid.n_v = cfg.music_grid;

    // The test presumes resolvable users; scan for a draw with enough
    // pairwise (u, v) separation (deterministic: first qualifying seed).
    std::uint64_t pick = 59;
    for (; pick < 159; ++pick) {
        const Scenario probe = make_scenario(cfg, pick);
        double min_sep = 1e9;
        for (int a = 0; a < 3; ++a)
            for (int b = a + 1; b < 3; ++b) {
                const double du = probe.ris[0].user_links[a].u - probe.ris[0].user_links[b].u;
                const double dv = probe.ris[0].user_links[a].v - probe.ris[0].user_links[b].v;
                min_sep = std::min(min_sep, std::hypot(du, dv));
            }
        if (min_sep > 6.0 * grid.u_step()) break;
    }
    REQUIRE(pick < 159);
    Scenario sc = make_scenario(cfg, pick);
    const ChannelSet ch = synth_channels(sc, pick);
    sc.cfg.noise_power_sensor = 1e-18;  // essentially noise-free

    const SnapshotMatrix snaps = simulate_echo(sc, ch, 0, pick);
    const SubspacePair sp = subspace_split(covariance(snaps), 3);
    const MatD spec = music_spectrum(sp, cfg.n_sense_y, cfg.n_sense_z, grid);
    const auto peaks = pick_peaks(spec, grid, 3, cfg.spacing, cfg.wavelength);

    // Each estimated direction must sit within one grid step of some user.
    for (const AngleEstimate& e : peaks) {
        double best = 1e9;
        for (int k = 0; k < 3; ++k) {
            const double du = e.u - sc.ris[0].user_links[k].u;
            const double dv = e.v - sc.ris[0].user_links[k].v;
            best = std::min(best, std::max(std::fabs(du), std::fabs(dv)));
        }
        CHECK(best <= grid.u_step() + 1e-12);
    }
}

TEST_CASE("simulate_echo is deterministic and rejects bad indices") {
    SystemConfig cfg;
    cfg.snapshots = 16;
    const Scenario sc = make_scenario(cfg, 61);
    const ChannelSet ch = synth_channels(sc, 61);
    const SnapshotMatrix a = simulate_echo(sc, ch, 0, 7);
    const SnapshotMatrix b = simulate_echo(sc, ch, 0, 7);
    const SnapshotMatrix c = simulate_echo(sc, ch, 0, 8);
    CHECK((a.y - b.y).norm() == 0.0);
    CHECK((a.y - c.y).norm() > 0.0);
    CHECK(a.y.rows() == cfg.n_sense_elements());
    CHECK(a.y.cols() == cfg.snapshots);
    CHECK_THROWS_AS(simulate_echo(sc, ch, 2, 7), ConfigError);

    SystemConfig single = cfg;
    single.single_ris = true;
    const Scenario sc1 = make_scenario(single, 61);
    const ChannelSet ch1 = synth_channels(sc1, 61);
    CHECK_THROWS_AS(simulate_echo(sc1, ch1, 1, 7), ConfigError);
}
