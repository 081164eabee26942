#include "risac/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

namespace risac {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

LinkAngles link_toward(const Vec3& from, const Vec3& to, double spacing, double wavelength) {
    const Vec3 d = (to - from).normalized();
    LinkAngles la;
    la.elevation = std::asin(std::clamp(d.z(), -1.0, 1.0));
    la.azimuth = (std::hypot(d.x(), d.y()) > 1e-12) ? std::atan2(d.y(), d.x()) : 0.0;
    std::tie(la.u, la.v) = angles_to_uv(la.elevation, la.azimuth, spacing, wavelength);
    return la;
}

}  // namespace

void SystemConfig::validate() const {
    require(n_tx >= 1, "n_tx must be >= 1");
    require(n_ris_y >= 1 && n_ris_z >= 1, "RIS grid must be >= 1x1");
    require(n_sense_y >= 1 && n_sense_z >= 1, "sensing grid must be >= 1x1");
    require(n_users >= 1, "n_users must be >= 1");
    require(n_users < n_sense_elements(),
            "n_users must be smaller than the sensing element count");
    require(bits >= 1 && bits <= 8, "bits must be in [1, 8]");
    require(p_max > 0.0, "p_max must be positive");
    require(noise_power_user > 0.0 && noise_power_sensor > 0.0,
            "noise powers must be positive");
    require(wavelength > 0.0 && spacing > 0.0, "wavelength and spacing must be positive");
    require(c0_db >= 0.0, "c0_db is a loss in dB and must be >= 0");
    require(snapshots >= n_users, "snapshots must be >= n_users");
    require(music_grid >= 3, "music_grid must be >= 3");
    require(peak_rel_floor >= 0.0 && peak_rel_floor < 1.0,
            "peak_rel_floor must be in [0, 1)");
    require(spread_min_fraction > 0.0 && spread_min_fraction <= 1.0,
            "spread_min_fraction must be in (0, 1]");
    require(estimate_span_cells >= 0, "estimate_span_cells must be >= 0");
    require(tau_min >= 0.0 && tau_max > tau_min, "need 0 <= tau_min < tau_max");
    require(epsilon > 0.0, "epsilon must be positive");
    require(outer_max_iters >= 1, "outer_max_iters must be >= 1");
    require(od_max_sweeps >= 1, "od_max_sweeps must be >= 1");
    require(od_tol >= 0.0, "od_tol must be >= 0");
    require(enum_budget >= 1, "enum_budget must be >= 1");
    require(n_draws >= 1, "n_draws must be >= 1");
    require(sdp_tol > 0.0 && sdp_max_iters >= 10, "bad interior-point settings");
    const double min_reach = std::hypot(bs_pos.x(), bs_pos.z() - ris_height);
    require(ris1_dist > min_reach && ris2_dist > min_reach,
            "RIS distances unreachable from the BS on the x=0 plane");
    require(user_dist_min > 0.0 && user_dist_max > user_dist_min,
            "need 0 < user_dist_min < user_dist_max");
    require(user_cluster_radius > 0.0 &&
                2.0 * user_cluster_radius < user_dist_max - user_dist_min,
            "user_cluster_radius must be positive and fit inside the distance band");
}

double path_loss(double distance_m, double kappa, double c0) {
    if (!(distance_m > 0.0)) throw ConfigError("path_loss: distance must be positive");
    if (!(c0 > 0.0)) throw ConfigError("path_loss: c0 must be positive");
    return c0 * std::pow(distance_m, -kappa);
}

VecC steering_ula(int n, double v) {
    if (n < 1) throw ConfigError("steering_ula: n must be >= 1");
    VecC a(n);
    for (int m = 0; m < n; ++m) a(m) = std::polar(1.0, m * v);
    return a;
}

VecC steering_upa(int n_y, int n_z, double u, double v) {
    if (n_y < 1 || n_z < 1) throw ConfigError("steering_upa: grid must be >= 1x1");
    VecC a(n_y * n_z);
    for (int ny = 0; ny < n_y; ++ny)
        for (int nz = 0; nz < n_z; ++nz)
            a(ny * n_z + nz) = std::polar(1.0, ny * u + nz * v);
    return a;
}

std::pair<double, double> angles_to_uv(double elevation, double azimuth,
                                       double spacing, double wavelength) {
    const double s = kTwoPi * spacing / wavelength;
    return {s * std::cos(elevation) * std::sin(azimuth), s * std::sin(azimuth)};
}

std::pair<double, double> uv_to_angles(double u, double v,
                                       double spacing, double wavelength) {
    const double s = kTwoPi * spacing / wavelength;
    const double sin_az = std::clamp(v / s, -1.0, 1.0);
    const double azimuth = std::asin(sin_az);
    double cos_el = 0.0;
    if (std::fabs(sin_az) > 1e-12) cos_el = std::clamp(u / (s * sin_az), -1.0, 1.0);
    return {std::acos(cos_el), azimuth};
}

BoresightAngles uv_to_boresight(double u, double v, double spacing, double wavelength) {
    const double s = kTwoPi * spacing / wavelength;
    BoresightAngles ba;
    ba.phi = std::asin(std::min(1.0, std::hypot(u, v) / s));
    ba.vphi = std::atan2(v, u);
    return ba;
}

Scenario make_scenario(const SystemConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Scenario sc;
    sc.cfg = cfg;
    sc.seed = seed;
    sc.bs_pos = cfg.bs_pos;

    const double c0 = db_to_linear(-cfg.c0_db);

    // The two surfaces flank the BS on opposite sides of its y coordinate.
    // With the azimuth-keyed array response this is what separates the two
    // BS-side departure directions; stacking both surfaces on one side would
    // make them nearly collinear as seen from the BS.
    auto place_ris = [&](double dist, double side) {
        const double dy2 = dist * dist - cfg.bs_pos.x() * cfg.bs_pos.x() -
                           (cfg.bs_pos.z() - cfg.ris_height) * (cfg.bs_pos.z() - cfg.ris_height);
        return Vec3(0.0, cfg.bs_pos.y() + side * std::sqrt(dy2), cfg.ris_height);
    };

    sc.ris[0].center = place_ris(cfg.ris1_dist, 1.0);
    sc.ris[1].center = place_ris(cfg.ris2_dist, -1.0);
    sc.ris[0].n_y = cfg.single_ris ? 2 * cfg.n_ris_y : cfg.n_ris_y;
    sc.ris[0].n_z = cfg.n_ris_z;
    sc.ris[1].n_y = cfg.n_ris_y;
    sc.ris[1].n_z = cfg.n_ris_z;
    sc.ris[1].active = !cfg.single_ris;

    // Users: a hotspot disc of radius user_cluster_radius, its center drawn
    // uniformly (by rejection from a bounding box) over the lens of points on
    // the +x side whose distance to each surface stays inside
    // [user_dist_min, user_dist_max] for the whole disc. Clustered drops keep
    // the per-surface angular spread of the users to a few degrees, so the
    // per-user matched phase profiles mostly agree element by element; a
    // scattered drop would leave nothing for the narrowed search to share.
    const double y_lo =
        std::min(sc.ris[0].center.y(), sc.ris[1].center.y()) - cfg.user_dist_max;
    const double y_hi =
        std::max(sc.ris[0].center.y(), sc.ris[1].center.y()) + cfg.user_dist_max;
    Rng urng(derive_seed(seed, 0xA11CE5));
    const double r_c = cfg.user_cluster_radius;
    Vec3 hub = Vec3::Zero();
    bool hub_ok = false;
    for (int attempt = 0; attempt < 10000 && !hub_ok; ++attempt) {
        const double x = urng.uniform() * cfg.user_dist_max;
        const double y = y_lo + urng.uniform() * (y_hi - y_lo);
        hub = Vec3(x, y, cfg.user_height);
        const double d1 = (hub - sc.ris[0].center).norm();
        const double d2 = (hub - sc.ris[1].center).norm();
        hub_ok = x > r_c && d1 >= cfg.user_dist_min + r_c &&
                 d1 <= cfg.user_dist_max - r_c && d2 >= cfg.user_dist_min + r_c &&
                 d2 <= cfg.user_dist_max - r_c;
    }
    if (!hub_ok)
        throw ConfigError("make_scenario: user distance bounds define an empty region");
    sc.user_pos.reserve(cfg.n_users);
    for (int k = 0; k < cfg.n_users; ++k) {
        const double ang = kTwoPi * urng.uniform();
        const double rad = r_c * std::sqrt(urng.uniform());
        sc.user_pos.push_back(hub + Vec3(rad * std::cos(ang), rad * std::sin(ang), 0.0));
    }

    for (int i = 0; i < 2; ++i) {
        RisGeometry& g = sc.ris[i];
        const double bs_dist = (cfg.bs_pos - g.center).norm();
        g.bs_link = link_toward(g.center, cfg.bs_pos, cfg.spacing, cfg.wavelength);
        const LinkAngles in = link_toward(cfg.bs_pos, g.center, cfg.spacing, cfg.wavelength);
        g.bs_incident = uv_to_boresight(in.u, in.v, cfg.spacing, cfg.wavelength);
        g.gain_bs = std::sqrt(path_loss(bs_dist, cfg.kappa_bs_ris, c0));
        g.user_links.resize(cfg.n_users);
        g.gain_user.resize(cfg.n_users);
        g.gain_echo.resize(cfg.n_users);
        for (int k = 0; k < cfg.n_users; ++k) {
            const double d = (sc.user_pos[k] - g.center).norm();
            g.user_links[k] = link_toward(g.center, sc.user_pos[k], cfg.spacing, cfg.wavelength);
            g.gain_user[k] = std::sqrt(path_loss(d, cfg.kappa_ris_user, c0));
            g.gain_echo[k] = std::sqrt(path_loss(d, cfg.kappa_echo, c0));
        }
        if (!g.active) {
            g.gain_bs = 0.0;
            for (int k = 0; k < cfg.n_users; ++k) {
                g.gain_user[k] = 0.0;
                g.gain_echo[k] = 0.0;
            }
        }
    }
    return sc;
}

ChannelSet synth_channels(const Scenario& sc, std::uint64_t seed) {
    const SystemConfig& cfg = sc.cfg;
    ChannelSet ch;
    for (int i = 0; i < 2; ++i) {
        const RisGeometry& g = sc.ris[i];
        const int n = g.n_y * g.n_z;
        const int m = cfg.n_sense_elements();
        ch.H_br[i] = MatC::Zero(n, cfg.n_tx);
        ch.h_ru[i] = MatC::Zero(cfg.n_users, n);
        ch.H_echo[i] = MatC::Zero(m, n);
        if (!g.active) continue;

        Rng grng(derive_seed(seed, 0xC4A17, static_cast<std::uint64_t>(i)));
        // Draw order is fixed: BS gain phase, then per-user access phases, then
        // per-user echo phases.
        const cd a1 = std::polar(g.gain_bs, grng.uniform_angle());
        std::vector<cd> a2(cfg.n_users), a3(cfg.n_users);
        for (int k = 0; k < cfg.n_users; ++k)
            a2[k] = std::polar(g.gain_user[k], grng.uniform_angle());
        for (int k = 0; k < cfg.n_users; ++k)
            a3[k] = std::polar(g.gain_echo[k], grng.uniform_angle());

        // The BS ULA is steered by the same scalar v that steers the RIS z axis
        // (model contract; both sides of the BS->RIS dyad share v).
        const VecC a_r_bs = steering_upa(g.n_y, g.n_z, g.bs_link.u, g.bs_link.v);
        const VecC b_bs = steering_ula(cfg.n_tx, g.bs_link.v);
        ch.H_br[i] = a1 * (a_r_bs * b_bs.adjoint());

        for (int k = 0; k < cfg.n_users; ++k) {
            const LinkAngles& lu = g.user_links[k];
            const VecC a_r = steering_upa(g.n_y, g.n_z, lu.u, lu.v);
            ch.h_ru[i].row(k) = a2[k] * a_r.adjoint();
            const VecC a_s = steering_upa(cfg.n_sense_y, cfg.n_sense_z, lu.u, lu.v);
            ch.H_echo[i] += a3[k] * (a_s * a_r.adjoint());
        }
    }
    return ch;
}

}  // namespace risac
