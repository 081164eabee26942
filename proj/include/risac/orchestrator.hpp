#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "risac/phaseopt.hpp"
#include "risac/scenario.hpp"
#include "risac/sensing.hpp"
#include "risac/txbf.hpp"

namespace risac {

/// Reflection-phase update strategies for the alternating loop.
///   Exhaustive ("gs")    search the whole narrowed codebook per step
///   Coordinate ("1d")    cyclic per-element sweeps over the arcs
///   Auto       ("auto")  Exhaustive while the codebook stays enumerable,
///                        Coordinate otherwise
///   Continuous ("continuous")  unquantized per-element refinement benchmark
///   Quantized  ("quantized")   Continuous, then one-shot grid rounding
enum class Algorithm { Exhaustive, Coordinate, Auto, Continuous, Quantized };

std::string algorithm_label(Algorithm a);
Algorithm algorithm_from_label(const std::string& label);

/// Sensing products for every active RIS: raw direction estimates and the
/// narrowed per-element phase sets they induce.
struct SensingOutcome {
    std::array<FeasibleSetTable, 2> tables;
    std::array<std::vector<AngleEstimate>, 2> estimates;
    std::array<MatD, 2> spectra;        // MUSIC pseudo-spectrum per RIS
    std::array<int, 2> peaks_found{0, 0};  // strict maxima located (<= K)
};

/// Echo simulation, covariance eigensplit, 2-D spectral search and feasible-
/// set narrowing for each active RIS. Users standing close together can merge
/// into one spectral peak; when fewer than K strict maxima exist the found
/// peaks are reused cyclically (strongest first) so narrowing still sees one
/// direction per user. Deterministic in (scenario, channels, seed).
SensingOutcome run_sensing(const Scenario& sc, const ChannelSet& ch, std::uint64_t seed);

/// Everything a single end-to-end run produces, including the counters the
/// experiment CSVs report.
struct RunResult {
    Algorithm requested = Algorithm::Auto;
    Algorithm effective = Algorithm::Exhaustive;  // mode actually applied to phases
    double tau_lifted = 0.0;     // bisection optimum before rank-1 extraction
    double tau_extracted = 0.0;  // worst-user SINR of the extracted beams
    VecD sinr;                   // per-user SINR at the final solution
    bool converged = false;      // outer loop hit the epsilon test before the cap
    int outer_iters = 0;
    std::uint64_t gs_candidates = 0;  // codebook points evaluated by Exhaustive
    std::uint64_t od_evals = 0;       // objective evaluations by sweep modes
    std::uint64_t od_sweeps = 0;      // element sweeps executed by sweep modes
    int sdr_total_iters = 0;          // interior-point iterations, all solves
    int bisection_steps = 0;          // midpoint + replay bisection steps
    int rank1_failures = 0;           // extractions below 0.95 * tau
    bool gs_refused = false;          // Exhaustive hit the enumeration budget
    std::array<VecD, 2> theta;        // final reflection phases
    MatC w;                           // final beamformers, N_t x K
    double wall_ms = 0.0;
    SensingOutcome sensing;
    std::vector<BisectionTraceRow> bisection_trace;       // final transmit solve
    std::array<std::vector<PhaseTraceRow>, 2> phase_trace;  // last phase pass per RIS
};

/// Full alternating run: sensing, then repeated {transmit design, RIS-1 phase
/// step, RIS-2 phase step} until the lifted objective moves less than
/// cfg.epsilon between consecutive transmit designs (or the iteration cap).
/// Exhaustive falls back to Coordinate for the rest of the run if the
/// codebook ever exceeds cfg.enum_budget. Quantized rounds the converged
/// continuous phases to the grid and re-solves the transmit design once.
/// Deterministic in (scenario, channels, algorithm, seed).
RunResult joint_optimize(const Scenario& sc, const ChannelSet& ch, Algorithm alg,
                         std::uint64_t seed);

}  // namespace risac
