#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "risac/common.hpp"

namespace risac {

/// Full system parameterization. Distances/powers in SI units (meters, watts).
/// Defaults give the stock deployment: 6-antenna BS, two 4x4 reflective RIS
/// with 8x8 sensing arrays, 4 users, half-wavelength spacing at lambda = 2 cm.
struct SystemConfig {
    int n_tx = 6;          // BS ULA size N_t
    int n_ris_y = 4;       // reflective elements per RIS, y axis
    int n_ris_z = 4;       // reflective elements per RIS, z axis
    int n_sense_y = 8;     // sensing elements per RIS, y axis
    int n_sense_z = 8;     // sensing elements per RIS, z axis
    int n_users = 4;       // K
    int bits = 2;          // phase resolution b; grid step 2*pi/2^b

    double p_max = 1.0;             // transmit power budget, watts (30 dBm)
    double noise_power_user = 1e-13;    // sigma_k^2, watts
    double noise_power_sensor = 1e-12;  // sigma^2 at the sensing arrays, watts

    double wavelength = 0.02;  // lambda, meters
    double spacing = 0.01;     // d = d_y = d_z, meters (lambda/2)

    double kappa_bs_ris = 2.2;   // path-loss exponent BS->RIS
    double kappa_ris_user = 2.5; // path-loss exponent RIS->user
    double kappa_echo = 2.5;     // path-loss exponent echo (user->RIS sensors)
    double c0_db = 30.0;         // reference path loss at 1 m, dB (power gain 10^-c0/10)

    int snapshots = 1000;  // T sensing snapshots per RIS
    int music_grid = 181;  // points per axis of the (u, v) search grid over [-pi, pi]
    // Spectrum maxima weaker than this fraction of the strongest one are
    // treated as sidelobe/noise artifacts, not user directions.
    double peak_rel_floor = 0.5;
    // When a spectral summit covers several unresolved users, the replacement
    // estimates are spread over the stretch of grid diagonal whose steering
    // vectors keep at least this fraction of their energy inside the signal
    // subspace. Higher values give tighter spreads and narrower feasible arcs.
    double spread_min_fraction = 0.8;
    // The phase tables only trust angular estimates inside a box of this many
    // grid cells (per axis) around the estimate centroid; estimates further
    // out are pulled to the box edge. This bounds the per-element phase spread
    // entering the feasible arcs, and with it the enumeration cost of the
    // narrowed search.
    int estimate_span_cells = 4;

    double tau_min = 0.0;   // bisection lower bound
    double tau_max = 10.0;  // bisection upper bound
    double epsilon = 1e-3;  // bisection width target and outer-loop convergence test

    int outer_max_iters = 100;  // alternation cap
    int od_max_sweeps = 1000;   // one-dimensional search sweep cap
    double od_tol = 1e-6;       // stop a 1-D/continuous sweep when gain falls below this

    std::uint64_t enum_budget = 1000000;  // global-search codebook refusal threshold
    int n_th = 0;          // auto rule override: gs iff N < n_th (0 = use budget rule)
    int n_draws = 400;     // gaussian randomization draws in rank-1 extraction

    double sdp_tol = 1e-7;   // interior-point convergence tolerance
    int sdp_max_iters = 200; // interior-point iteration cap

    // Deployment geometry. The RIS plane is x = 0; everything of interest sits
    // at x > 0. Users are dropped uniformly over a disc of user_cluster_radius
    // whose center keeps the whole disc within [user_dist_min, user_dist_max]
    // of both surfaces (see make_scenario).
    Vec3 bs_pos = Vec3(10.0, 0.0, 10.0);
    double ris1_dist = 45.0;   // BS->RIS1 center distance, meters
    double ris2_dist = 50.0;   // BS->RIS2 center distance, meters
    double ris_height = 5.0;   // RIS center z, meters (y follows from the distance)
    double user_dist_min = 40.0;
    double user_dist_max = 70.0;
    double user_cluster_radius = 5.0;  // users fall in a disc of this radius
    double user_height = 1.5;

    bool single_ris = false;   // disable RIS 2, double RIS 1's y extent (2N elements)
    bool record_wall_ms = false;  // write real wall-clock into CSVs (breaks byte-identity)

    int n_ris_elements() const { return n_ris_y * n_ris_z; }
    int n_sense_elements() const { return n_sense_y * n_sense_z; }

    /// Throws ConfigError on out-of-range or inconsistent values.
    void validate() const;
};

/// One directional link: steering phase rates (u, v) plus the elevation and
/// azimuth angles they encode. Elevation is measured from the horizontal
/// plane, azimuth in the x-y plane from the +x axis; u carries
/// (2*pi*d/lambda)*cos(elevation)*sin(azimuth) and v carries
/// (2*pi*d/lambda)*sin(azimuth).
struct LinkAngles {
    double u = 0.0;
    double v = 0.0;
    double elevation = 0.0;
    double azimuth = 0.0;
};

/// Boresight angle pair used by the reflection phase formula: sin(phi)cos(vphi)
/// and sin(phi)sin(vphi) recover u and v (normalized by 2*pi*d/lambda), so the
/// formula stays a pure function of the (u, v) pair the estimator produces.
struct BoresightAngles {
    double phi = 0.0;   // asin(hypot(u, v) / (2*pi*d/lambda))
    double vphi = 0.0;  // atan2(v, u)
};

struct RisGeometry {
    Vec3 center = Vec3::Zero();
    int n_y = 0;  // reflective grid
    int n_z = 0;
    LinkAngles bs_link;            // RIS -> BS (arrival steering)
    BoresightAngles bs_incident;   // BS -> RIS propagation direction, for the phase formula
    std::vector<LinkAngles> user_links;  // RIS -> user k (departure steering; echo arrival)
    double gain_bs = 0.0;                // |alpha_1|, amplitude
    std::vector<double> gain_user;       // |alpha_2,k|, amplitude
    std::vector<double> gain_echo;       // |alpha_3,k|, amplitude
    bool active = true;
};

/// A drawn deployment: positions, per-link angles, per-link amplitude gains.
/// Complex gain phases are drawn separately in synth_channels.
struct Scenario {
    SystemConfig cfg;
    std::uint64_t seed = 0;
    Vec3 bs_pos = Vec3::Zero();
    std::array<RisGeometry, 2> ris;
    std::vector<Vec3> user_pos;
};

/// Synthesized channel matrices for one scenario draw.
struct ChannelSet {
    // H_br[i]: N x N_t, BS -> RIS i reflective array.
    std::array<MatC, 2> H_br;
    // h_ru[i]: K x N, row k is the conjugated departure steering (channel row
    // h_{i,k}^H) from RIS i to user k, including the complex gain.
    std::array<MatC, 2> h_ru;
    // H_echo[i]: M x N, sensing response of RIS i (sum over users of
    // alpha_3 * a_S * a_R^H).
    std::array<MatC, 2> H_echo;
};

/// Distance-dependent power gain: c0 * (q / 1 m)^(-kappa). c0 is linear
/// (10^(-c0_db/10)). q must be positive.
double path_loss(double distance_m, double kappa, double c0);

/// ULA steering vector [1, e^{jv}, ..., e^{j(n-1)v}].
VecC steering_ula(int n, double v);

/// UPA steering vector, Kronecker of the y-axis ULA (rate u) with the z-axis
/// ULA (rate v); element (ny, nz) maps to index ny * n_z + nz.
VecC steering_upa(int n_y, int n_z, double u, double v);

/// (elevation, azimuth) -> (u, v) in the printed convention:
/// u = 2*pi*(d/lambda)*cos(elevation)*sin(azimuth), v = 2*pi*(d/lambda)*sin(azimuth).
std::pair<double, double> angles_to_uv(double elevation, double azimuth,
                                       double spacing, double wavelength);

/// Inverse of angles_to_uv for interior angles (sin(azimuth) != 0). Arguments
/// outside the representable set are clamped into [-1, 1] before acos/asin.
std::pair<double, double> uv_to_angles(double u, double v,
                                       double spacing, double wavelength);

/// (u, v) -> boresight angles whose direction cosines reproduce (u, v):
/// sin(phi) = hypot(u, v)/(2*pi*d/lambda), vphi = atan2(v, u). Only exact for
/// hypot(u, v) <= 2*pi*d/lambda; steeper pairs clamp to phi = pi/2 and shrink
/// the reproduced gradient, so phase-table code works in (u, v) space instead.
BoresightAngles uv_to_boresight(double u, double v, double spacing, double wavelength);

/// Draws a deployment: BS fixed, RIS centers on the x = 0 plane at the
/// configured distances, K users uniform in a disc of user_cluster_radius whose
/// center is rejection-sampled so the whole disc keeps both surface distances
/// inside [user_dist_min, user_dist_max]. Deterministic in (cfg, seed).
Scenario make_scenario(const SystemConfig& cfg, std::uint64_t seed);

/// Builds the channel matrices. Gain magnitudes come from the scenario; gain
/// phases are uniform in [0, 2*pi), drawn from (seed, link id). Deterministic.
ChannelSet synth_channels(const Scenario& sc, std::uint64_t seed);

}  // namespace risac
