#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "risac/scenario.hpp"
#include "risac/sdp.hpp"

namespace risac {

/// Effective BS->user channels for fixed reflection phases. Row k is the
/// combined row vector h_k^H = sum_i h_{i,k}^H * diag(e^{j theta_i}) * H_br_i,
/// so the received symbol at user k is h_k^H * x. Output is K x N_t.
MatC combine_channels(const ChannelSet& ch, const std::array<VecD, 2>& theta);

/// Per-user SINR for beamformer columns w_k of w (N_t x K):
/// |h_k^H w_k|^2 / (sum_{j != k} |h_k^H w_j|^2 + noise).
VecD sinr_per_user(const MatC& h_combined, const MatC& w, double noise_power);

/// Same quantity evaluated on lifted covariances W_k (positive semidefinite,
/// N_t x N_t): h_k^H W_k h_k / (sum_{j != k} h_k^H W_j h_k + noise). Equals
/// sinr_per_user when W_k = w_k w_k^H.
VecD sinr_lifted(const MatC& h_combined, const std::vector<MatC>& w_lifted,
                 double noise_power);

struct FeasibilityResult {
    bool feasible = false;
    double slack = 0.0;  // achieved margin in channel-normalized units
    std::vector<MatC> w_lifted;  // K covariances, watts
    int iterations = 0;          // interior-point iterations spent
    SdpStatus status = SdpStatus::NumericalError;
};

/// Decides whether SINR target tau is achievable under the power budget by
/// maximizing the worst-case constraint margin over lifted covariances
/// (semidefinite relaxation; the margin program is always strictly feasible,
/// so the solve itself cannot fail for want of a starting point). Channels
/// are rescaled by their largest row norm before the solve; `slack` is
/// reported in those normalized units and `feasible` means slack >= -1e-7.
FeasibilityResult solve_feasibility(const MatC& h_combined, double tau,
                                    double p_max, double noise_power,
                                    double sdp_tol = 1e-7, int sdp_max_iters = 200);

struct BeamExtraction {
    MatC w;               // N_t x K, columns scaled so total power is exactly p_max
    double min_sinr = 0.0;
    bool degraded = false;  // extracted min SINR fell below 0.95 * tau
};

/// Rank-1 beamformers from lifted covariances. Uses the principal eigenvector
/// directly when the covariance is numerically rank one; otherwise augments it
/// with shaped gaussian draws and keeps the candidate with the best min SINR
/// after rescaling the whole set to the power budget (uniform rescaling can
/// only improve every SINR, so exact-budget scaling is safe). Deterministic
/// in seed.
BeamExtraction extract_rank1(const std::vector<MatC>& w_lifted,
                             const MatC& h_combined, double tau, double p_max,
                             double noise_power, int n_draws, std::uint64_t seed);

struct TxbfOptions {
    double tau_min = 0.0;
    double tau_max = 10.0;
    double epsilon = 1e-3;  // terminate when the bracket is narrower than this
    double sdp_tol = 1e-7;
    int sdp_max_iters = 200;
    int n_draws = 100;
    std::optional<double> warm_tau;  // previously achieved target, tried before bisecting
};

/// One feasibility probe of the bisection, for the trace export.
struct BisectionTraceRow {
    int step = 0;         // 0 = lower-bound probe, then warm/midpoint probes
    double tau = 0.0;     // target tested
    bool feasible = false;
    int solver_iters = 0;
    double wall_ms = 0.0;
};

struct TxbfSolution {
    double tau = 0.0;          // largest target proven feasible (lifted)
    std::vector<MatC> w_lifted;
    BeamExtraction beams;
    int bisection_steps = 0;   // midpoint feasibility solves
    int sdp_iterations = 0;    // total interior-point iterations across all solves
    std::vector<BisectionTraceRow> trace;
};

/// Max-min SINR transmit design for fixed reflection phases: bisection over
/// the target with a feasibility solve per step. tau_min is verified up front
/// (throws SolverError if even that fails); when warm_tau is set and proves
/// feasible the bracket starts there, which keeps successive calls monotone
/// during alternating optimization. Deterministic in seed.
TxbfSolution optimize_txbf(const MatC& h_combined, double p_max,
                           double noise_power, const TxbfOptions& opts,
                           std::uint64_t seed);

}  // namespace risac
