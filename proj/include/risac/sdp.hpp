#pragma once

#include <vector>

#include "risac/common.hpp"

namespace risac {

/// Linear conic program over a product of complex Hermitian PSD blocks and a
/// nonnegative orthant:
///
///   minimize    sum_b <C_b, X_b> + c_lp . x_lp
///   subject to  sum_b <A_ib, X_b> + a_lp_i . x_lp = b_i,   i = 1..m
///               X_b >= 0 (PSD),  x_lp >= 0
///
/// with <A, B> = Re tr(A B) for Hermitian A, B. All matrices dense; intended
/// for small blocks (tens of rows) and few constraints.
struct SdpProblem {
    std::vector<int> block_dims;
    int lp_dim = 0;
    std::vector<std::vector<MatC>> a_blocks;  // [constraint][block]
    std::vector<VecD> a_lp;                   // [constraint]
    VecD b;
    std::vector<MatC> c_blocks;
    VecD c_lp;

    int num_constraints() const { return static_cast<int>(b.size()); }
};

enum class SdpStatus { Optimal, MaxIters, NumericalError };

struct SdpResult {
    SdpStatus status = SdpStatus::NumericalError;
    std::vector<MatC> x_blocks;
    VecD x_lp;
    VecD y;  // dual multipliers
    double primal_obj = 0.0;
    double dual_obj = 0.0;
    double rel_gap = 0.0;
    double primal_infeas = 0.0;
    double dual_infeas = 0.0;
    int iterations = 0;
};

/// Primal-dual path-following interior-point method (HKM scaling, Mehrotra
/// predictor-corrector, infeasible start). Deterministic. Returns Optimal once
/// primal/dual residuals and the duality gap all fall below tol; MaxIters or
/// NumericalError otherwise, with the best iterate so far in the result.
SdpResult solve_sdp(const SdpProblem& prob, double tol, int max_iters);

}  // namespace risac
