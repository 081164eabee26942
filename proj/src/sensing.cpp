#include "risac/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace risac {

std::uint64_t FeasibleSetTable::codebook_size() const {
    constexpr std::uint64_t cap = 1ULL << 62;
    std::uint64_t total = 1;
    for (const Arc& a : arcs) {
        total *= static_cast<std::uint64_t>(a.length);
        if (total >= cap) return cap;
    }
    return total;
}

SnapshotMatrix simulate_echo(const Scenario& sc, const ChannelSet& ch, int ris_index,
                             std::uint64_t seed) {
    if (ris_index < 0 || ris_index > 1) throw ConfigError("simulate_echo: ris_index must be 0 or 1");
    const SystemConfig& cfg = sc.cfg;
    const RisGeometry& g = sc.ris[ris_index];
    if (!g.active) throw ConfigError("simulate_echo: RIS is disabled in this topology");

    const int n = g.n_y * g.n_z;
    const int m = cfg.n_sense_elements();
    const int t_total = cfg.snapshots;

    // Matched transmit beam at the full power budget, steered at this RIS.
    const VecC b_bs = steering_ula(cfg.n_tx, g.bs_link.v);
    const VecC w_s = std::sqrt(cfg.p_max) * b_bs / b_bs.norm();

    // Incident field on the reflective array; per snapshot only the element
    // phases and the unit-power symbol change.
    const VecC incident = ch.H_br[ris_index] * w_s;  // length n

    // Per-user departure steering rows scaled by the echo gains are exactly the
    // rows/cols of H_echo; factor them once so each snapshot costs O(K(N + M)).
    const int k_users = cfg.n_users;
    MatC depart(k_users, n);   // alpha_3,k * a_R(u_k, v_k)^H
    MatC arrive(m, k_users);   // a_S(u_k, v_k)
    for (int k = 0; k < k_users; ++k) {
        const LinkAngles& lu = g.user_links[k];
        const VecC a_r = steering_upa(g.n_y, g.n_z, lu.u, lu.v);
        const VecC a_s = steering_upa(cfg.n_sense_y, cfg.n_sense_z, lu.u, lu.v);
        const cd a3 = std::polar(g.gain_echo[k], 0.0);
        depart.row(k) = a3 * a_r.adjoint();
        arrive.col(k) = a_s;
    }

    SnapshotMatrix out;
    out.ris = ris_index;
    out.y = MatC::Zero(m, t_total);
    VecC reflected(n), coeffs(k_users);
    for (int t = 0; t < t_total; ++t) {
        Rng rng(derive_seed(seed, 0x5E15, static_cast<std::uint64_t>(ris_index),
                            static_cast<std::uint64_t>(t)));
        for (int e = 0; e < n; ++e)
            reflected(e) = std::polar(1.0, rng.uniform_angle()) * incident(e);
        const cd symbol = std::polar(1.0, rng.uniform_angle());
        coeffs = depart * reflected * symbol;
        out.y.col(t) = arrive * coeffs;
        for (int e = 0; e < m; ++e)
            out.y(e, t) += rng.cgaussian(cfg.noise_power_sensor);
    }
    return out;
}

MatC covariance(const SnapshotMatrix& snaps) {
    const int t_total = static_cast<int>(snaps.y.cols());
    if (t_total < 1) throw ConfigError("covariance: no snapshots");
    return (snaps.y * snaps.y.adjoint()) / static_cast<double>(t_total);
}

SubspacePair subspace_split(const MatC& cov, int k) {
    const int m = static_cast<int>(cov.rows());
    if (cov.cols() != m) throw ConfigError("subspace_split: covariance must be square");
    if (k < 1 || k >= m)
        throw ConfigError("subspace_split: need 1 <= k < M (no noise subspace otherwise)");
    Eigen::SelfAdjointEigenSolver<MatC> eig(cov);
    if (eig.info() != Eigen::Success) throw SolverError("subspace_split: eigendecomposition failed");
    // Eigen returns ascending order; flip to descending.
    SubspacePair sp;
    sp.eigenvalues = eig.eigenvalues().reverse();
    sp.signal = MatC(m, k);
    sp.noise = MatC(m, m - k);
    for (int i = 0; i < k; ++i) sp.signal.col(i) = eig.eigenvectors().col(m - 1 - i);
    for (int i = k; i < m; ++i) sp.noise.col(i - k) = eig.eigenvectors().col(m - 1 - i);
    return sp;
}

MatD music_spectrum(const SubspacePair& sub, int n_y, int n_z, const GridSpec& grid) {
    const int m = static_cast<int>(sub.noise.rows());
    if (sub.noise.cols() < 1) throw ConfigError("music_spectrum: empty noise subspace");
    if (n_y * n_z != m) throw ConfigError("music_spectrum: grid does not match subspace dim");
    const int k = static_cast<int>(sub.signal.cols());

    // ||a^H E_noise||^2 = ||a||^2 - ||a^H E_signal||^2 for an orthonormal
    // eigenbasis; the signal side is k columns instead of M - k, and the
    // Kronecker structure of a = a_y (x) a_z splits the projection into an
    // O(k * M) sweep per u followed by O(k * n_z) per (u, v).
    std::vector<MatC> sig_mats(k);  // column c reshaped to n_y x n_z
    for (int c = 0; c < k; ++c) {
        sig_mats[c] = MatC(n_y, n_z);
        for (int iy = 0; iy < n_y; ++iy)
            for (int iz = 0; iz < n_z; ++iz)
                sig_mats[c](iy, iz) = sub.signal(iy * n_z + iz, c);
    }

    MatD spec(grid.n_u, grid.n_v);
    const double m_norm = static_cast<double>(m);
    MatC partial(k, n_z);
    VecC a_y(n_y), a_z(n_z);
    for (int i = 0; i < grid.n_u; ++i) {
        const double u = grid.u_at(i);
        for (int iy = 0; iy < n_y; ++iy) a_y(iy) = std::polar(1.0, iy * u);
        for (int c = 0; c < k; ++c)
            partial.row(c) = a_y.adjoint() * sig_mats[c];
        for (int j = 0; j < grid.n_v; ++j) {
            const double v = grid.v_at(j);
            for (int iz = 0; iz < n_z; ++iz) a_z(iz) = std::polar(1.0, iz * v);
            double proj = 0.0;
            for (int c = 0; c < k; ++c) {
                cd s = 0.0;
                for (int iz = 0; iz < n_z; ++iz) s += std::conj(a_z(iz)) * partial(c, iz);
                proj += std::norm(s);
            }
            const double denom = std::max(m_norm - proj, 1e-15);
            spec(i, j) = std::min(1.0 / denom, 1e15);
        }
    }
    return spec;
}

std::vector<AngleEstimate> pick_peaks(const MatD& spectrum, const GridSpec& grid, int k,
                                      double spacing, double wavelength) {
    const int nu = static_cast<int>(spectrum.rows());
    const int nv = static_cast<int>(spectrum.cols());
    if (nu != grid.n_u || nv != grid.n_v)
        throw ConfigError("pick_peaks: spectrum does not match grid");
    if (k < 1) throw ConfigError("pick_peaks: k must be >= 1");

    std::vector<AngleEstimate> peaks;
    for (int i = 0; i < nu; ++i) {
        for (int j = 0; j < nv; ++j) {
            const double val = spectrum(i, j);
            bool strict_max = true;
            for (int di = -1; di <= 1 && strict_max; ++di) {
                for (int dj = -1; dj <= 1 && strict_max; ++dj) {
                    if (di == 0 && dj == 0) continue;
                    const int ni = i + di, nj = j + dj;
                    if (ni < 0 || ni >= nu || nj < 0 || nj >= nv) continue;
                    if (spectrum(ni, nj) >= val) strict_max = false;
                }
            }
            if (!strict_max) continue;
            AngleEstimate est;
            est.u = grid.u_at(i);
            est.v = grid.v_at(j);
            est.grid_iu = i;
            est.grid_iv = j;
            est.peak_value = val;
            const auto [el, az] = uv_to_angles(est.u, est.v, spacing, wavelength);
            est.phi_des = el;
            est.vphi_des = az;
            peaks.push_back(est);
        }
    }
    std::sort(peaks.begin(), peaks.end(), [](const AngleEstimate& a, const AngleEstimate& b) {
        if (a.peak_value != b.peak_value) return a.peak_value > b.peak_value;
        if (a.grid_iu != b.grid_iu) return a.grid_iu < b.grid_iu;
        return a.grid_iv < b.grid_iv;
    });

    // The grid carries both endpoints of the phase circle, so a direction near
    // the seam shows up again at the opposite edge. Keep the strongest copy of
    // each direction: a weaker maximum inside another's wrapped 8-neighborhood
    // is the same summit.
    const auto wrapped_cells = [](int a, int b, int n) {
        const int d = std::abs(a - b);
        return std::min(d, (n - 1) - d);
    };
    std::vector<AngleEstimate> kept;
    for (const auto& p : peaks) {
        bool duplicate = false;
        for (const auto& q : kept) {
            if (wrapped_cells(p.grid_iu, q.grid_iu, nu) <= 1 &&
                wrapped_cells(p.grid_iv, q.grid_iv, nv) <= 1) {
                duplicate = true;
                break;
            }
        }
        if (!duplicate) kept.push_back(p);
    }
    peaks = std::move(kept);

    if (static_cast<int>(peaks.size()) < k) {
        std::ostringstream msg;
        msg << "pick_peaks: found " << peaks.size() << " strict local maxima, need " << k;
        throw SolverError(msg.str());
    }
    peaks.resize(k);
    return peaks;
}

double optimal_phase(int y, int z, const BoresightAngles& incident,
                     const BoresightAngles& departure, double d_y, double d_z,
                     double wavelength) {
    if (y < 1 || z < 1) throw ConfigError("optimal_phase: element indices are 1-based");
    const double cy = std::sin(incident.phi) * std::cos(incident.vphi) +
                      std::sin(departure.phi) * std::cos(departure.vphi);
    const double cz = std::sin(incident.phi) * std::sin(incident.vphi) +
                      std::sin(departure.phi) * std::sin(departure.vphi);
    const double phase = (kTwoPi / wavelength) * (cy * (y - 0.5) * d_y + cz * (z - 0.5) * d_z);
    return wrap_angle(phase);
}

int quantize_phase_index(double theta, int bits) {
    if (bits < 1 || bits > 8) throw ConfigError("quantize_phase_index: bits must be in [1, 8]");
    const int q = 1 << bits;
    const double r = wrap_angle(theta) / (kTwoPi / q);
    const int idx = static_cast<int>(std::ceil(r - 0.5));
    return ((idx % q) + q) % q;
}

FeasibleSetTable narrow_feasible_set(const std::vector<std::vector<double>>& theta_opt,
                                     int bits) {
    if (bits < 1 || bits > 8) throw ConfigError("narrow_feasible_set: bits must be in [1, 8]");
    if (theta_opt.empty()) throw ConfigError("narrow_feasible_set: no elements");
    const int q = 1 << bits;

    FeasibleSetTable table;
    table.bits = bits;
    table.theta_opt = theta_opt;
    table.arcs.reserve(theta_opt.size());

    for (const std::vector<double>& users : theta_opt) {
        if (users.empty()) throw ConfigError("narrow_feasible_set: element with no user phases");
        std::vector<bool> used(q, false);
        for (double th : users) used[quantize_phase_index(th, bits)] = true;
        std::vector<int> pts;
        for (int i = 0; i < q; ++i)
            if (used[i]) pts.push_back(i);

        Arc arc;
        if (pts.size() == 1) {
            arc.start = pts[0];
            arc.length = 1;
        } else {
            // The shortest covering arc is the complement of the largest gap
            // between circularly consecutive occupied points. Ties pick the
            // arc with the smaller start index.
            int best_gap = -1, best_start = 0, best_len = q;
            const int npts = static_cast<int>(pts.size());
            for (int i = 0; i < npts; ++i) {
                const int cur = pts[i];
                const int nxt = pts[(i + 1) % npts];
                const int gap = (nxt - cur + q) % q;  // steps from cur to nxt
                const int len = q - gap + 1;          // arc nxt..cur inclusive
                if (gap > best_gap || (gap == best_gap && nxt < best_start)) {
                    best_gap = gap;
                    best_start = nxt;
                    best_len = len;
                }
            }
            arc.start = best_start;
            arc.length = std::min(best_len, q);
        }
        table.arcs.push_back(arc);
    }
    return table;
}

}  // namespace risac
