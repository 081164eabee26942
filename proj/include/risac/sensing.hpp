#pragma once

#include <cstdint>
#include <vector>

#include "risac/scenario.hpp"

namespace risac {

/// M x T matrix of received sensing snapshots for one RIS.
struct SnapshotMatrix {
    MatC y;       // M x T
    int ris = 0;  // which RIS produced it
};

/// Orthonormal eigen-split of a sample covariance matrix. Eigenvalues are
/// stored descending; signal holds the top-k eigenvectors, noise the rest.
struct SubspacePair {
    MatC signal;  // M x k
    MatC noise;   // M x (M - k)
    VecD eigenvalues;  // all M, descending
};

/// Uniform search grid over (u, v), inclusive endpoints.
struct GridSpec {
    int n_u = 181;
    int n_v = 181;
    double u_min = -kPi, u_max = kPi;
    double v_min = -kPi, v_max = kPi;
    double u_at(int i) const { return u_min + (u_max - u_min) * i / (n_u - 1); }
    double v_at(int j) const { return v_min + (v_max - v_min) * j / (n_v - 1); }
    double u_step() const { return (u_max - u_min) / (n_u - 1); }
    double v_step() const { return (v_max - v_min) / (n_v - 1); }
};

/// One detected source direction. (phi_des, vphi_des) are the elevation/azimuth
/// recovered by inverting the printed (u,v) convention (uv_to_angles); they are
/// informational. Phase-formula consumers convert (u, v) with uv_to_boresight
/// instead, which is the documented inversion for the reflection phase formula.
struct AngleEstimate {
    double u = 0.0;
    double v = 0.0;
    double phi_des = 0.0;
    double vphi_des = 0.0;
    double peak_value = 0.0;
    int grid_iu = 0;
    int grid_iv = 0;
};

/// Circular arc of consecutive grid indices on the 2^bits phase grid.
struct Arc {
    int start = 0;   // first grid index of the arc
    int length = 1;  // number of consecutive grid points, 1..2^bits
};

/// Per-element narrowed feasible phase sets for one RIS, plus the raw per-user
/// optimal phases they were built from.
struct FeasibleSetTable {
    int bits = 0;
    std::vector<Arc> arcs;                    // one per element, index ny * n_z + nz
    std::vector<std::vector<double>> theta_opt;  // [element][user] raw optimal phases
    int grid_size() const { return 1 << bits; }
    double grid_value(int idx) const { return kTwoPi * idx / grid_size(); }
    /// Product of arc lengths, saturated at 2^62.
    std::uint64_t codebook_size() const;
};

/// Simulates T sensing snapshots at RIS `ris_index`: the BS transmits a matched
/// beam at full power toward the RIS, the reflective array applies a fresh
/// uniform-random phase configuration every snapshot (decorrelates the user
/// echoes), and the sensing array receives through the echo response plus
/// complex Gaussian noise. Deterministic in (scenario, channels, ris_index, seed).
SnapshotMatrix simulate_echo(const Scenario& sc, const ChannelSet& ch, int ris_index,
                             std::uint64_t seed);

/// Sample covariance Y Y^H / T.
MatC covariance(const SnapshotMatrix& snaps);

/// Eigen-splits a Hermitian covariance into k-dimensional signal and (M-k)-
/// dimensional noise subspaces. Requires 1 <= k < M.
SubspacePair subspace_split(const MatC& cov, int k);

/// 2-D MUSIC pseudo-spectrum over the grid: 1 / ||a(u,v)^H E_noise||^2 with
/// a(u,v) the (n_y x n_z) sensing-array steering vector. Values are clamped at
/// 1e15 (exact steering nulls the denominator). Row i of the result is u index
/// i, column j is v index j.
MatD music_spectrum(const SubspacePair& sub, int n_y, int n_z, const GridSpec& grid);

/// Picks the k largest strict local maxima (8-neighborhood; boundary cells use
/// their existing neighbors) in descending peak order. Throws SolverError if
/// fewer than k strict maxima exist, reporting how many were found.
std::vector<AngleEstimate> pick_peaks(const MatD& spectrum, const GridSpec& grid, int k,
                                      double spacing, double wavelength);

/// Reflection phase that aligns an incident wave from boresight direction
/// (phi_t, vphi_t) with a departure toward (phi_des, vphi_des), for the element
/// in row y, column z (1-based):
///   theta = mod( (2*pi/lambda) * [ (sin(phi_t)cos(vphi_t) + sin(phi_des)cos(vphi_des)) (y - 1/2) d_y
///                                + (sin(phi_t)sin(vphi_t) + sin(phi_des)sin(vphi_des)) (z - 1/2) d_z ], 2*pi )
/// The angle pairs must be boresight pairs (uv_to_boresight) so the sin/cos
/// products are direction cosines along the array axes.
double optimal_phase(int y, int z, const BoresightAngles& incident,
                     const BoresightAngles& departure, double d_y, double d_z,
                     double wavelength);

/// Nearest grid index on the 2^bits phase grid (circular distance); exact
/// halfway cases round to the smaller index.
int quantize_phase_index(double theta, int bits);

/// Narrows each element's phase alphabet: quantize every user's optimal phase
/// to the nearest grid point (circular distance), then take the shortest
/// circular arc of grid points covering all of them. Equal-length candidates
/// tie-break toward the smaller start index. theta_opt is [element][user].
FeasibleSetTable narrow_feasible_set(const std::vector<std::vector<double>>& theta_opt,
                                     int bits);

}  // namespace risac
