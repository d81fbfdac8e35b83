#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "rtrw/measures.hpp"
#include "rtrw/rng.hpp"
#include "rtrw/walk.hpp"

namespace rtrw {

struct BrownianGridPath {
    double dt = 0.0;
    std::vector<double> b;  // B_0 = 0, B_dt, B_2dt, ...
    double horizon() const { return dt * static_cast<double>(b.empty() ? 0 : b.size() - 1); }
};

BrownianGridPath sample_bm(double T, double dt, Stream& rng);

// Binned occupation density: ell(x, t) ~ (time spent in the bin of x up to t)/h.
struct LocalTimeEstimate {
    double h = 0.0;
    std::vector<double> times;
    std::map<std::int64_t, std::vector<double>> ell;  // bin -> values at `times`

    std::int64_t bin(double x) const;
    double at(double x, std::size_t time_index) const;
};

LocalTimeEstimate bm_local_time(const BrownianGridPath& path, double h, const std::vector<double>& times);

// Nondecreasing clock phi on a grid of s values with right-continuous inverse
// psi(t) = inf{s : phi(s) > t}.
struct TimeChange {
    std::vector<double> s;
    std::vector<double> phi;
    double psi(double t) const;
};

// Discretization of the limit samplers.
struct LimitOptions {
    double dt = 0.0;         // Brownian step; 0 means 1e-4 * T
    double h = 0.0;          // local-time bin width; 0 means sqrt(dt)
    std::size_t grid = 100;  // output points t_k = k T / grid
    // v_min relative to the observation scale T^{1/(1+gamma)}; used when the
    // intensity's own cutoff is not set explicitly (v_min <= 0).
    double v_min_rel = 1e-3;
    // Add the mean clock rate of the atoms below the cutoff as a drift.
    bool compensate_cutoff = true;
    bool keep_atoms = false;
    std::uint64_t max_steps = 4'000'000'000ULL;
};

struct LimitSample {
    Trajectory trajectory;        // X on the output grid, held over each cell
    std::vector<double> psi;      // psi at the grid times
    std::vector<SsbmAtom> atoms;  // environment, when requested
    double neglected_rate = 0.0;  // clock rate of atoms below the cutoff
    std::uint64_t steps = 0;
};

double default_v_min(double gamma, double T, double v_min_rel = 1e-3);

// B time-changed by the inverse of a gamma-stable subordinator with Laplace
// exponent scale * lambda^gamma.
LimitSample sample_fk(double gamma, double T, Stream& rng, LimitOptions opts = {}, double scale = 1.0);

// FIN diffusion: speed measure sum_i v_i delta_{x_i}. v_min <= 0 selects the
// default cutoff.
LimitSample sample_fin(double gamma, double v_min, double T, Stream& rng, LimitOptions opts = {});

// SSBM: phi_t = sum_i S^i(ell(x_i, t)); each atom runs its own subordinator.
LimitSample sample_ssbm(const AtomIntensity& F, double T, Stream& rng, LimitOptions opts = {});

// phi = SSBM clock + independent gamma-stable subordinator.
LimitSample sample_fk_ssbm_mixture(double gamma, const AtomIntensity& F, double T, Stream& rng,
                                   LimitOptions opts = {}, double scale = 1.0);

struct SpeedMeasure {
    double lebesgue = 0.0;                        // density of the absolutely continuous part
    std::vector<std::pair<double, double>> atoms;  // (x, mass)
};

TimeChange speed_measure_clock(const SpeedMeasure& rho, const BrownianGridPath& path, double h);
// X = B_psi on the grid t_k = k T / grid.
Trajectory speed_measure_time_change(const SpeedMeasure& rho, const BrownianGridPath& path, double h, double T,
                                     std::size_t grid = 100);

struct MassCheck {
    bool finite = true;
    std::vector<double> shell_means;  // mean mass from atoms in successive dyadic shells below the cutoff
    double decay_ratio = 0.0;         // fitted ratio between consecutive shells
    double mean_total = 0.0;          // mean of sum over [0,1] of S^i_1 down to the deepest shell
    std::string diagnostic;
};

MassCheck ssbm_mass_check(const AtomIntensity& F, Stream& rng, std::size_t n_trials, std::size_t shells = 24);

}  // namespace rtrw
