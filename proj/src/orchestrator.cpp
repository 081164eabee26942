#include "risac/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace risac {

std::string algorithm_label(Algorithm a) {
    switch (a) {
        case Algorithm::Exhaustive: return "gs";
        case Algorithm::Coordinate: return "1d";
        case Algorithm::Auto: return "auto";
        case Algorithm::Continuous: return "continuous";
        case Algorithm::Quantized: return "quantized";
    }
    throw ConfigError("algorithm_label: unknown algorithm");
}

Algorithm algorithm_from_label(const std::string& label) {
    if (label == "gs") return Algorithm::Exhaustive;
    if (label == "1d") return Algorithm::Coordinate;
    if (label == "auto") return Algorithm::Auto;
    if (label == "continuous") return Algorithm::Continuous;
    if (label == "quantized") return Algorithm::Quantized;
    throw ConfigError("unknown algorithm '" + label +
                      "' (expected gs, 1d, auto, continuous or quantized)");
}

namespace {

// Effective channel contribution of every active RIS except `skip` (K x N_t).
MatC partial_channel(const Scenario& sc, const ChannelSet& ch,
                     const std::array<VecD, 2>& theta, int skip) {
    MatC out = MatC::Zero(sc.cfg.n_users, sc.cfg.n_tx);
    for (int i = 0; i < 2; ++i) {
        if (i == skip || !sc.ris[i].active) continue;
        const int n = static_cast<int>(ch.H_br[i].rows());
        VecC phase(n);
        for (int e = 0; e < n; ++e) phase(e) = std::polar(1.0, theta[i](e));
        out += ch.h_ru[i] * phase.asDiagonal() * ch.H_br[i];
    }
    return out;
}

// Per-element circular mean of the per-user optimal phases, unsnapped.
VecD mean_phases(const FeasibleSetTable& table) {
    const int n = static_cast<int>(table.theta_opt.size());
    VecD theta(n);
    for (int e = 0; e < n; ++e) {
        cd acc = 0.0;
        for (double th : table.theta_opt[e]) acc += std::polar(1.0, th);
        theta(e) = std::abs(acc) > 1e-12 ? wrap_angle(std::arg(acc)) : 0.0;
    }
    return theta;
}

// Circular mean of the per-user optimal phases restricted to one user subset.
VecD subset_mean_phases(const FeasibleSetTable& table, const std::vector<int>& users) {
    const int n = static_cast<int>(table.theta_opt.size());
    VecD theta(n);
    for (int e = 0; e < n; ++e) {
        cd acc = 0.0;
        for (int k : users) acc += std::polar(1.0, table.theta_opt[e][k]);
        theta(e) = std::abs(acc) > 1e-12 ? wrap_angle(std::arg(acc)) : 0.0;
    }
    return theta;
}

// Snap arbitrary phases onto the quantization grid (discrete modes keep their
// starts representable).
VecD snap_to_grid(const VecD& theta, int bits) {
    VecD out(theta.size());
    for (int e = 0; e < theta.size(); ++e)
        out(e) = kTwoPi * quantize_phase_index(theta(e), bits) / (1 << bits);
    return out;
}

// Cheap start-selection proxy: worst-user SINR under matched single-user
// beams at an even power split. No solver involvement, so start selection
// never touches the run counters.
double matched_beam_score(const ChannelSet& ch, const std::array<VecD, 2>& theta,
                          double p_max, double noise, int k_users) {
    const MatC h = combine_channels(ch, theta);
    MatC w(h.cols(), k_users);
    for (int k = 0; k < k_users; ++k) {
        VecC dir = h.row(k).adjoint();
        const double nrm = dir.norm();
        w.col(k) = nrm > 0 ? VecC(dir * (std::sqrt(p_max / k_users) / nrm))
                           : VecC::Zero(h.cols());
    }
    return sinr_per_user(h, w, noise).minCoeff();
}

}  // namespace

SensingOutcome run_sensing(const Scenario& sc, const ChannelSet& ch,
                           std::uint64_t seed) {
    const SystemConfig& cfg = sc.cfg;
    SensingOutcome out;
    GridSpec grid;
    grid.n_u = cfg.music_grid;
    grid.n_v = cfg.music_grid;

    for (int i = 0; i < 2; ++i) {
        const RisGeometry& g = sc.ris[i];
        if (!g.active) continue;

        SnapshotMatrix snaps = simulate_echo(sc, ch, i, seed);
        SubspacePair sub = subspace_split(covariance(snaps), cfg.n_users);
        out.spectra[i] = music_spectrum(sub, cfg.n_sense_y, cfg.n_sense_z, grid);

        // Closely spaced users can merge into a single spectral peak; retry
        // with fewer peaks when strict maxima run out, and drop maxima that
        // sit at the noise floor (merged users leave junk bumps far from the
        // cluster, orders of magnitude below the true peak). The surviving
        // peaks are reused cyclically so every user still gets a phase column.
        std::vector<AngleEstimate> peaks;
        for (int k = cfg.n_users; k >= 1 && peaks.empty(); --k) {
            try {
                peaks = pick_peaks(out.spectra[i], grid, k, cfg.spacing,
                                   cfg.wavelength);
            } catch (const SolverError&) {
            }
        }
        if (peaks.empty())
            throw SolverError("run_sensing: spectrum has no strict maxima");
        while (peaks.size() > 1 &&
               peaks.back().peak_value <
                   cfg.peak_rel_floor * peaks.front().peak_value)
            peaks.pop_back();
        out.peaks_found[i] = static_cast<int>(peaks.size());

        // Unresolved users: when fewer summits survive than users, the missing
        // estimates are spread across each summit's span rather than
        // duplicating the summit point. The spectrum needle itself is a single
        // cell wide, so the span is measured as the stretch of the diagonal
        // whose steering vectors still project mostly onto the signal
        // subspace: every direction inside an unresolved cluster stays
        // consistent with the received echo. The walk is diagonal because the
        // reachable directions line up near u = v * cos(elevation).
        if (out.peaks_found[i] < cfg.n_users) {
            const int n_found = out.peaks_found[i];
            const MatD& spec = out.spectra[i];
            std::vector<int> counts(n_found, 0);
            for (int p = 0; p < cfg.n_users; ++p) ++counts[p % n_found];
            std::vector<AngleEstimate> spread;
            for (int s = 0; s < n_found; ++s) {
                const AngleEstimate& pk = peaks[s];
                if (counts[s] == 1) {
                    spread.push_back(pk);
                    continue;
                }
                const auto extent = [&](int step) {
                    int cells = 0;
                    int iu = pk.grid_iu + step, iv = pk.grid_iv + step;
                    while (iu >= 0 && iu < grid.n_u && iv >= 0 && iv < grid.n_v &&
                           cells < 40) {
                        const VecC a = steering_upa(cfg.n_sense_y, cfg.n_sense_z,
                                                    grid.u_at(iu), grid.v_at(iv));
                        if ((sub.signal.adjoint() * a).squaredNorm() <
                            cfg.spread_min_fraction * static_cast<double>(a.size()))
                            break;
                        ++cells;
                        iu += step;
                        iv += step;
                    }
                    return cells;
                };
                const int ext_plus = extent(1);
                const int ext_minus = extent(-1);
                for (int j = 0; j < counts[s]; ++j) {
                    const double t = -1.0 + 2.0 * j / (counts[s] - 1);
                    const int off = static_cast<int>(
                        std::lround(t * (t < 0 ? ext_minus : ext_plus)));
                    AngleEstimate e = pk;
                    e.grid_iu = std::clamp(pk.grid_iu + off, 0, grid.n_u - 1);
                    e.grid_iv = std::clamp(pk.grid_iv + off, 0, grid.n_v - 1);
                    e.u = grid.u_at(e.grid_iu);
                    e.v = grid.v_at(e.grid_iv);
                    e.peak_value = spec(e.grid_iu, e.grid_iv);
                    const auto [el, az] =
                        uv_to_angles(e.u, e.v, cfg.spacing, cfg.wavelength);
                    e.phi_des = el;
                    e.vphi_des = az;
                    spread.push_back(e);
                }
            }
            peaks = std::move(spread);
        }

        // Only trust the estimates inside a small box around their centroid;
        // anything further out is pulled to the box edge. Outliers would open
        // wide feasible arcs on the steep (high-index) elements, and the
        // enumeration cost of the narrowed search grows as the product of arc
        // sizes, so the box keeps that product bounded by construction.
        if (cfg.estimate_span_cells >= 0) {
            const int half = cfg.estimate_span_cells / 2;
            double cu = 0.0, cv = 0.0;
            for (const auto& e : peaks) {
                cu += e.grid_iu;
                cv += e.grid_iv;
            }
            const int ctr_u = static_cast<int>(std::lround(cu / peaks.size()));
            const int ctr_v = static_cast<int>(std::lround(cv / peaks.size()));
            for (auto& e : peaks) {
                e.grid_iu = std::clamp(e.grid_iu, std::max(0, ctr_u - half),
                                       std::min(grid.n_u - 1, ctr_u + half));
                e.grid_iv = std::clamp(e.grid_iv, std::max(0, ctr_v - half),
                                       std::min(grid.n_v - 1, ctr_v + half));
                e.u = grid.u_at(e.grid_iu);
                e.v = grid.v_at(e.grid_iv);
                e.peak_value = out.spectra[i](e.grid_iu, e.grid_iv);
                const auto [el, az] =
                    uv_to_angles(e.u, e.v, cfg.spacing, cfg.wavelength);
                e.phi_des = el;
                e.vphi_des = az;
            }
        }

        // Matched reflection phases straight from the estimated arrival pairs.
        // The reflect path picks up e^{+j(ny u + nz v)} on the BS side and
        // e^{-j(ny u_k + nz v_k)} toward user k, so the aligning phase is the
        // wrapped difference of the two gradients. This stays in (u, v) space
        // on purpose: the directions that matter here often have |(u, v)|
        // outside the boresight cone, where no (phi, vphi) preimage exists and
        // a spherical detour would silently shrink the gradient.

        std::vector<std::vector<double>> theta_opt(
            static_cast<std::size_t>(g.n_y) * g.n_z,
            std::vector<double>(cfg.n_users));
        for (int ny = 0; ny < g.n_y; ++ny) {
            for (int nz = 0; nz < g.n_z; ++nz) {
                const int e = ny * g.n_z + nz;
                for (int p = 0; p < cfg.n_users; ++p)
                    theta_opt[e][p] = wrap_angle(
                        (ny + 0.5) * (peaks[p].u - g.bs_link.u) +
                        (nz + 0.5) * (peaks[p].v - g.bs_link.v));
            }
        }
        out.tables[i] = narrow_feasible_set(theta_opt, cfg.bits);
        out.estimates[i] = std::move(peaks);
    }
    return out;
}

RunResult joint_optimize(const Scenario& sc, const ChannelSet& ch, Algorithm alg,
                         std::uint64_t seed) {
    const auto t_start = std::chrono::steady_clock::now();
    const SystemConfig& cfg = sc.cfg;
    const double noise = cfg.noise_power_user;

    RunResult out;
    out.requested = alg;
    out.sensing = run_sensing(sc, ch, seed);

    Algorithm eff = alg;
    if (alg == Algorithm::Auto) {
        bool enumerable = true;
        if (cfg.n_th > 0) {
            enumerable = cfg.n_ris_elements() < cfg.n_th;
        } else {
            for (int i = 0; i < 2; ++i)
                if (sc.ris[i].active &&
                    out.sensing.tables[i].codebook_size() > cfg.enum_budget)
                    enumerable = false;
        }
        eff = enumerable ? Algorithm::Exhaustive : Algorithm::Coordinate;
    }
    const bool continuous_family =
        eff == Algorithm::Continuous || eff == Algorithm::Quantized;

    // Initial phases: arc representatives for the discrete modes, raw circular
    // means for the continuous family.
    std::array<VecD, 2> theta;
    for (int i = 0; i < 2; ++i) {
        const int n = static_cast<int>(ch.H_br[i].rows());
        if (!sc.ris[i].active) {
            theta[i] = VecD::Zero(n);
            continue;
        }
        theta[i] = continuous_family ? mean_phases(out.sensing.tables[i])
                                     : arc_representative_phases(out.sensing.tables[i]);
    }

    // Start selection: the default start competes with per-user dedicated
    // phases and, when both surfaces are active, split configurations that
    // dedicate each surface to one user subset (the split starts are what let
    // the alternation find pairing structure instead of serving every user
    // with both surfaces).  Candidates are scored by the worst-user SINR under
    // matched beams at an even power split: cheap, deterministic, and it
    // favors configurations that already separate the users spatially.
    if (cfg.n_users >= 2) {
        const auto start_phases = [&](int i, const std::vector<int>& users) {
            VecD t = subset_mean_phases(out.sensing.tables[i], users);
            return continuous_family ? t : snap_to_grid(t, cfg.bits);
        };
        std::vector<std::array<VecD, 2>> starts;
        for (int k = 0; k < cfg.n_users; ++k) {
            std::array<VecD, 2> s = theta;
            for (int i = 0; i < 2; ++i)
                if (sc.ris[i].active) s[i] = start_phases(i, {k});
            starts.push_back(std::move(s));
        }
        if (sc.ris[0].active && sc.ris[1].active && cfg.n_users <= 6) {
            for (unsigned mask = 1; mask + 1 < (1u << cfg.n_users); ++mask) {
                std::vector<int> left, right;
                for (int k = 0; k < cfg.n_users; ++k)
                    ((mask >> k) & 1u ? left : right).push_back(k);
                starts.push_back({start_phases(0, left), start_phases(1, right)});
            }
        }
        double best = matched_beam_score(ch, theta, cfg.p_max, noise, cfg.n_users);
        for (auto& s : starts) {
            const double score =
                matched_beam_score(ch, s, cfg.p_max, noise, cfg.n_users);
            if (score > best) {
                best = score;
                theta = s;
            }
        }
    }

    TxbfOptions topt;
    topt.tau_min = cfg.tau_min;
    topt.tau_max = cfg.tau_max;
    topt.epsilon = cfg.epsilon;
    topt.sdp_tol = cfg.sdp_tol;
    topt.sdp_max_iters = cfg.sdp_max_iters;
    topt.n_draws = cfg.n_draws;

    TxbfSolution txbf;
    MatC h;
    const auto solve_transmit = [&](int iter) {
        h = combine_channels(ch, theta);
        txbf = optimize_txbf(h, cfg.p_max, noise, topt,
                             derive_seed(seed, 0xE87, static_cast<std::uint64_t>(iter)));
        out.sdr_total_iters += txbf.sdp_iterations;
        out.bisection_steps += txbf.bisection_steps;
        if (txbf.beams.degraded) ++out.rank1_failures;
    };

    // One phase update over every active RIS with the current beamformers.
    // Returns the resulting worst-user SINR of the whole system.
    const auto phase_pass = [&]() {
        double system_sinr = 0.0;
        for (int i = 0; i < 2; ++i) {
            if (!sc.ris[i].active) continue;
            const FeasibleSetTable& table = out.sensing.tables[i];
            PhaseObjective obj(partial_channel(sc, ch, theta, i), ch.h_ru[i],
                               ch.H_br[i], txbf.beams.w, noise, theta[i]);
            const double before = obj.min_sinr();
            std::vector<PhaseTraceRow> trace;
            PhaseStepResult res;
            switch (eff) {
                case Algorithm::Exhaustive: {
                    res = exhaustive_phase_step(obj, table, cfg.tau_min, cfg.tau_max,
                                                cfg.epsilon, cfg.enum_budget, &trace);
                    if (res.refused) {
                        // Codebook too large to enumerate: fall back to the
                        // one-dimensional sweep for the rest of the run.
                        eff = Algorithm::Coordinate;
                        out.gs_refused = true;
                        res = coordinate_phase_step(obj, table, cfg.od_tol,
                                                    cfg.od_max_sweeps, &trace);
                        out.od_evals += res.evaluations;
                        out.od_sweeps += static_cast<std::uint64_t>(res.sweeps);
                    } else {
                        out.gs_candidates += res.evaluations;
                        out.bisection_steps += res.bisection_steps;
                    }
                    break;
                }
                case Algorithm::Coordinate:
                    res = coordinate_phase_step(obj, table, cfg.od_tol,
                                                cfg.od_max_sweeps, &trace);
                    out.od_evals += res.evaluations;
                    out.od_sweeps += static_cast<std::uint64_t>(res.sweeps);
                    break;
                case Algorithm::Continuous:
                case Algorithm::Quantized: {
                    // The discrete searches re-enumerate their codebook every
                    // pass and can hop between basins as the beams evolve;
                    // plain ascent cannot. The continuous pass earns the same
                    // freedom by also trying each user-subset matched start
                    // and keeping the best outcome.
                    res = continuous_phase_step(obj, cfg.od_tol, cfg.od_max_sweeps);
                    out.od_evals += res.evaluations;
                    out.od_sweeps += static_cast<std::uint64_t>(res.sweeps);
                    if (cfg.n_users <= 6) {
                        for (unsigned mask = 1; mask < (1u << cfg.n_users);
                             ++mask) {
                            std::vector<int> users;
                            for (int k = 0; k < cfg.n_users; ++k)
                                if ((mask >> k) & 1u) users.push_back(k);
                            const VecD start = subset_mean_phases(table, users);
                            for (int e = 0; e < start.size(); ++e)
                                obj.set_element(e, start(e));
                            PhaseStepResult alt = continuous_phase_step(
                                obj, cfg.od_tol, cfg.od_max_sweeps);
                            out.od_evals += alt.evaluations;
                            out.od_sweeps += static_cast<std::uint64_t>(alt.sweeps);
                            if (alt.min_sinr > res.min_sinr) res = std::move(alt);
                        }
                    }
                    break;
                }
                case Algorithm::Auto:
                    throw ConfigError("joint_optimize: auto mode was not resolved");
            }
            if (res.min_sinr >= before) theta[i] = res.theta;
            out.phase_trace[i] = std::move(trace);
            system_sinr = res.min_sinr;
        }
        return system_sinr;
    };

    double prev_tau = 0.0;
    bool transmit_fresh = false;
    for (int iter = 1; iter <= cfg.outer_max_iters; ++iter) {
        solve_transmit(iter);
        out.outer_iters = iter;
        transmit_fresh = true;
        if (iter > 1 && std::abs(txbf.tau - prev_tau) < cfg.epsilon) {
            out.converged = true;
            break;
        }
        prev_tau = txbf.tau;
        topt.warm_tau = txbf.tau;

        phase_pass();
        transmit_fresh = false;
    }

    if (!transmit_fresh) solve_transmit(cfg.outer_max_iters + 1);

    if (eff == Algorithm::Quantized) {
        // One-shot rounding of the converged continuous phases.  The transmit
        // beams deliberately stay matched to the continuous solution: this
        // baseline reports the raw damage of rounding, not a repaired design.
        for (int i = 0; i < 2; ++i) {
            if (!sc.ris[i].active) continue;
            for (int e = 0; e < theta[i].size(); ++e)
                theta[i](e) = kTwoPi * quantize_phase_index(theta[i](e), cfg.bits) /
                              (1 << cfg.bits);
        }
        h = combine_channels(ch, theta);
    }

    out.effective = eff;
    out.tau_lifted = txbf.tau;
    out.sinr = sinr_per_user(h, txbf.beams.w, noise);
    out.tau_extracted =
        eff == Algorithm::Quantized ? out.sinr.minCoeff() : txbf.beams.min_sinr;
    out.w = txbf.beams.w;
    out.theta = theta;
    out.bisection_trace = txbf.trace;
    out.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t_start)
                      .count();
    return out;
}

}  // namespace risac
