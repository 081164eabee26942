#include "risac/phaseopt.hpp"

#include <algorithm>
#include <cmath>

namespace risac {

PhaseObjective::PhaseObjective(const MatC& fixed, const MatC& h_ru, const MatC& h_br,
                               const MatC& w, double noise_power, const VecD& theta0)
    : noise_(noise_power) {
    const int k = static_cast<int>(h_ru.rows());
    const int n = static_cast<int>(h_ru.cols());
    if (h_br.rows() != n) throw ConfigError("PhaseObjective: h_ru/h_br disagree on N");
    if (fixed.rows() != k || w.cols() != k || fixed.cols() != w.rows())
        throw ConfigError("PhaseObjective: dimension mismatch");
    if (theta0.size() != n) throw ConfigError("PhaseObjective: theta0 length mismatch");
    if (!(noise_power > 0.0)) throw ConfigError("PhaseObjective: noise must be positive");

    theta_ = theta0;
    phase_ = VecC(n);
    for (int e = 0; e < n; ++e) phase_(e) = std::polar(1.0, theta_(e));

    const MatC row_w = h_br * w;  // N x K, row n is h_br.row(n) * w
    d_.resize(n);
    for (int e = 0; e < n; ++e) {
        d_[e] = MatC(k, k);
        for (int kk = 0; kk < k; ++kk)
            for (int j = 0; j < k; ++j) d_[e](kk, j) = h_ru(kk, e) * row_w(e, j);
    }

    g_ = fixed * w;  // K x K base inner products
    for (int e = 0; e < n; ++e) g_ += phase_(e) * d_[e];
}

void PhaseObjective::set_element(int n, double theta) {
    const cd next = std::polar(1.0, theta);
    g_ += (next - phase_(n)) * d_[n];
    phase_(n) = next;
    theta_(n) = theta;
}

double PhaseObjective::min_sinr() const {
    const int k = static_cast<int>(g_.rows());
    double worst = 0.0;
    for (int i = 0; i < k; ++i) {
        double intf = 0.0;
        for (int j = 0; j < k; ++j)
            if (j != i) intf += std::norm(g_(i, j));
        const double s = std::norm(g_(i, i)) / (intf + noise_);
        if (i == 0 || s < worst) worst = s;
    }
    return worst;
}

VecD arc_representative_phases(const FeasibleSetTable& table) {
    const int n = static_cast<int>(table.arcs.size());
    VecD theta(n);
    for (int e = 0; e < n; ++e) {
        // Circular mean of the per-user optimal phases.
        cd acc = 0.0;
        for (double th : table.theta_opt[e]) acc += std::polar(1.0, th);
        const double mean = std::abs(acc) > 1e-12 ? wrap_angle(std::arg(acc)) : 0.0;

        const Arc& arc = table.arcs[e];
        int best_p = 0;
        double best_d = 1e9;
        for (int p = 0; p < arc.length; ++p) {
            const double cand = table.grid_value((arc.start + p) % table.grid_size());
            const double d = circular_distance(cand, mean);
            if (d < best_d - 1e-15) {
                best_d = d;
                best_p = p;
            }
        }
        theta(e) = table.grid_value((arc.start + best_p) % table.grid_size());
    }
    return theta;
}

PhaseStepResult exhaustive_phase_step(PhaseObjective& obj, const FeasibleSetTable& table,
                                      double tau_min, double tau_max, double epsilon,
                                      std::uint64_t budget,
                                      std::vector<PhaseTraceRow>* trace) {
    const int n = obj.n_elements();
    if (static_cast<int>(table.arcs.size()) != n)
        throw ConfigError("exhaustive_phase_step: table does not match objective");

    PhaseStepResult out;
    if (table.codebook_size() > budget) {
        out.theta = obj.thetas();
        out.min_sinr = obj.min_sinr();
        out.refused = true;
        return out;
    }

    const int q = table.grid_size();
    std::vector<int> pos(n, 0);
    for (int e = 0; e < n; ++e)
        obj.set_element(e, table.grid_value(table.arcs[e].start % q));

    VecD best = obj.thetas();
    double best_val = obj.min_sinr();
    out.evaluations = 1;

    // Odometer over the arc product, last element fastest. Each tick edits
    // one element and resets the tail, so the amortized cost per candidate
    // stays O(K^2).
    while (true) {
        int e = n - 1;
        while (e >= 0 && pos[e] == table.arcs[e].length - 1) {
            pos[e] = 0;
            obj.set_element(e, table.grid_value(table.arcs[e].start % q));
            --e;
        }
        if (e < 0) break;
        ++pos[e];
        obj.set_element(e, table.grid_value((table.arcs[e].start + pos[e]) % q));
        const double val = obj.min_sinr();
        ++out.evaluations;
        if (val > best_val) {
            best_val = val;
            best = obj.thetas();
        }
    }

    for (int e = 0; e < n; ++e) obj.set_element(e, best(e));
    out.theta = best;
    out.min_sinr = best_val;
    if (trace) {
        for (int e = 0; e < n; ++e) {
            const int idx =
                static_cast<int>(std::lround(best(e) / (kTwoPi / q))) % q;
            trace->push_back({0, e, idx, best_val});
        }
    }

    // Bisection over the SINR target, replayed against the cached maximum:
    // a midpoint is feasible exactly when some codebook point reaches it.
    double lo = tau_min, hi = std::max(tau_max, tau_min + 1e-12);
    while (hi - lo > epsilon) {
        const double mid = 0.5 * (lo + hi);
        if (best_val >= mid)
            lo = mid;
        else
            hi = mid;
        ++out.bisection_steps;
    }
    return out;
}

PhaseStepResult coordinate_phase_step(PhaseObjective& obj, const FeasibleSetTable& table,
                                      double tol, int max_sweeps,
                                      std::vector<PhaseTraceRow>* trace) {
    const int n = obj.n_elements();
    if (static_cast<int>(table.arcs.size()) != n)
        throw ConfigError("coordinate_phase_step: table does not match objective");

    PhaseStepResult out;
    const int q = table.grid_size();
    double cur = obj.min_sinr();
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        const double at_sweep_start = cur;
        ++out.sweeps;
        for (int e = 0; e < n; ++e) {
            // Argmax over the element's arc (ties pick the earliest arc
            // point). The element is forced onto its arc, so with an on-arc
            // start the objective is non-decreasing at every update.
            const Arc& arc = table.arcs[e];
            double best_theta = 0.0;
            double best_val = -1.0;
            int best_idx = 0;
            for (int p = 0; p < arc.length; ++p) {
                const int idx = (arc.start + p) % q;
                const double cand = table.grid_value(idx);
                obj.set_element(e, cand);
                const double val = obj.min_sinr();
                ++out.evaluations;
                if (val > best_val) {
                    best_val = val;
                    best_theta = cand;
                    best_idx = idx;
                }
            }
            obj.set_element(e, best_theta);
            cur = best_val;
            if (trace) trace->push_back({sweep, e, best_idx, best_val});
        }
        if (cur - at_sweep_start <= tol) break;
    }
    out.theta = obj.thetas();
    out.min_sinr = cur;
    return out;
}

PhaseStepResult continuous_phase_step(PhaseObjective& obj, double tol, int max_sweeps) {
    const int n = obj.n_elements();
    constexpr int kScanPoints = 32;
    constexpr double kGolden = 0.6180339887498949;  // 1/phi

    PhaseStepResult out;
    double cur = obj.min_sinr();
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        const double at_sweep_start = cur;
        ++out.sweeps;
        for (int e = 0; e < n; ++e) {
            // Coarse scan locates the best cell.
            double best_theta = obj.theta(e);
            double best_val = cur;
            for (int p = 0; p < kScanPoints; ++p) {
                const double cand = kTwoPi * p / kScanPoints;
                obj.set_element(e, cand);
                const double val = obj.min_sinr();
                ++out.evaluations;
                if (val > best_val) {
                    best_val = val;
                    best_theta = cand;
                }
            }
            // Golden-section refinement around the winning cell.
            double a = best_theta - kTwoPi / kScanPoints;
            double b = best_theta + kTwoPi / kScanPoints;
            double x1 = b - kGolden * (b - a);
            double x2 = a + kGolden * (b - a);
            obj.set_element(e, wrap_angle(x1));
            double f1 = obj.min_sinr();
            obj.set_element(e, wrap_angle(x2));
            double f2 = obj.min_sinr();
            out.evaluations += 2;
            for (int it = 0; it < 40; ++it) {
                if (f1 >= f2) {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - kGolden * (b - a);
                    obj.set_element(e, wrap_angle(x1));
                    f1 = obj.min_sinr();
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + kGolden * (b - a);
                    obj.set_element(e, wrap_angle(x2));
                    f2 = obj.min_sinr();
                }
                ++out.evaluations;
            }
            const double refined = wrap_angle(f1 >= f2 ? x1 : x2);
            obj.set_element(e, refined);
            const double val = obj.min_sinr();
            ++out.evaluations;
            if (val > best_val) {
                best_val = val;
                best_theta = refined;
            }
            obj.set_element(e, best_theta);
            cur = best_val;
        }
        if (cur - at_sweep_start <= tol) {
            // Element-wise ascent stalls on min-SINR ties: moving a single
            // element trades one user's SINR against another's. A coarse
            // two-element pass crosses those ridges; if it finds an
            // improvement the element-wise sweeps resume from the new point.
            constexpr int kPairPoints = 12;
            const double at_pair_start = cur;
            for (int e = 0; e < n; ++e) {
                for (int f = e + 1; f < n; ++f) {
                    double best_te = obj.theta(e);
                    double best_tf = obj.theta(f);
                    double best_pair = cur;
                    for (int pe = 0; pe < kPairPoints; ++pe) {
                        obj.set_element(e, kTwoPi * pe / kPairPoints);
                        for (int pf = 0; pf < kPairPoints; ++pf) {
                            obj.set_element(f, kTwoPi * pf / kPairPoints);
                            const double val = obj.min_sinr();
                            ++out.evaluations;
                            if (val > best_pair) {
                                best_pair = val;
                                best_te = obj.theta(e);
                                best_tf = obj.theta(f);
                            }
                        }
                    }
                    obj.set_element(e, best_te);
                    obj.set_element(f, best_tf);
                    cur = best_pair;
                }
            }
            if (cur - at_pair_start <= tol) break;
        }
    }
    out.theta = obj.thetas();
    out.min_sinr = cur;
    return out;
}

}  // namespace risac
