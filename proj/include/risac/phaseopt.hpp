#pragma once

#include <cstdint>
#include <vector>

#include "risac/sensing.hpp"

namespace risac {

/// Worst-user SINR as a function of one RIS's reflection phases, with the
/// transmit beamformers and the other RIS frozen. Keeps the K x K inner
/// products g(k, j) = h_k^H w_j current under single-element phase edits, so
/// one edit costs O(K^2) instead of a full channel rebuild.
class PhaseObjective {
 public:
    /// fixed: K x N_t effective channel contribution of everything except the
    /// varying RIS. h_ru (K x N) and h_br (N x N_t) belong to the varying RIS;
    /// w is N_t x K; theta0 sets the starting phases.
    PhaseObjective(const MatC& fixed, const MatC& h_ru, const MatC& h_br,
                   const MatC& w, double noise_power, const VecD& theta0);

    void set_element(int n, double theta);
    double theta(int n) const { return theta_(n); }
    const VecD& thetas() const { return theta_; }
    int n_elements() const { return static_cast<int>(theta_.size()); }

    /// min_k SINR_k at the current phases.
    double min_sinr() const;

 private:
    std::vector<MatC> d_;  // per element: K x K sensitivity h_ru(k,n) * (h_br.row(n) w)(j)
    MatC g_;               // K x K current inner products
    VecD theta_;
    VecC phase_;           // e^{j theta_n}
    double noise_;
};

/// One accepted phase update, for the optimization trace export.
struct PhaseTraceRow {
    int sweep = 0;
    int element = 0;
    int phase_index = 0;  // grid index of the accepted phase; -1 off-grid
    double objective = 0.0;
};

/// Outcome of one reflection-phase update step.
struct PhaseStepResult {
    VecD theta;                   // accepted configuration
    double min_sinr = 0.0;        // objective at theta
    std::uint64_t evaluations = 0;  // objective evaluations spent
    int sweeps = 0;                 // element sweeps executed (cyclic modes)
    int bisection_steps = 0;        // target-bisection steps (exhaustive mode)
    bool refused = false;           // codebook exceeded the enumeration budget
};

/// Per-element starting phases: the arc grid point closest (circular
/// distance) to the circular mean of that element's per-user optimal phases;
/// ties pick the earlier arc point.
VecD arc_representative_phases(const FeasibleSetTable& table);

/// Exhaustive search over the narrowed codebook (odometer order, first
/// improvement wins ties), wrapped in a bisection over the SINR target that
/// replays against the cached maximum. Refuses (without evaluating) when the
/// codebook size exceeds `budget`. The objective is left at the best point.
PhaseStepResult exhaustive_phase_step(PhaseObjective& obj, const FeasibleSetTable& table,
                                      double tau_min, double tau_max, double epsilon,
                                      std::uint64_t budget,
                                      std::vector<PhaseTraceRow>* trace = nullptr);

/// Cyclic one-dimensional refinement: sweeps the elements in index order and
/// sets each to the argmax over its arc (earlier arc points win ties), so
/// every element ends on its arc. Start from arc_representative_phases; the
/// objective is then non-decreasing at every update. Stops when a full sweep
/// improves the objective by at most `tol` or after `max_sweeps` sweeps.
PhaseStepResult coordinate_phase_step(PhaseObjective& obj, const FeasibleSetTable& table,
                                      double tol, int max_sweeps,
                                      std::vector<PhaseTraceRow>* trace = nullptr);

/// Continuous relaxation of the coordinate sweep: each element scans a coarse
/// phase grid over [0, 2pi) and refines the best cell by golden-section
/// search. Same stopping rule as coordinate_phase_step. Used by the
/// unquantized baselines.
PhaseStepResult continuous_phase_step(PhaseObjective& obj, double tol, int max_sweeps);

}  // namespace risac
