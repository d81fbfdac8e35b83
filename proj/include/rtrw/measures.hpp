#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "rtrw/rng.hpp"
#include "rtrw/summation.hpp"

namespace rtrw {

struct Estimate {
    double value = 0.0;
    double std_error = 0.0;  // 0 for analytic values
};

// ---------------------------------------------------------------------------
// Trap distributions: holding-time laws on (0, inf).

struct PointMassLaw {
    double c;
};
struct ExponentialLaw {
    double mean;
};
// (1-p) delta_low + p delta_high. low = 0 is only allowed in analysis form.
struct TwoPointLaw {
    double low, high, p_high;
};
struct EmpiricalLaw {
    std::shared_ptr<const std::vector<double>> samples;
};
// Time spent on one visit to a comb backbone vertex with a tooth of length N.
struct CombVisitLaw {
    std::int64_t n;
    double beta;
    double p;           // tooth walk: probability of stepping towards the tip
    double tooth_mean;  // m(theta^N)
};

enum class TrapKind { point_mass, exponential, two_point, empirical, comb_visit };

class TrapDistribution {
public:
    using Variant = std::variant<PointMassLaw, ExponentialLaw, TwoPointLaw, EmpiricalLaw, CombVisitLaw>;

    static TrapDistribution point_mass(double c);
    static TrapDistribution exponential(double mean);
    static TrapDistribution two_point(double low, double high, double p_high);
    // Transparent trap (1 - tau^-beta) delta_1 + tau^-beta delta_tau; with
    // analysis_form the non-trapping atom sits at 0 instead of 1.
    static TrapDistribution transparent(double tau, double beta, bool analysis_form = false);
    static TrapDistribution empirical(std::vector<double> samples);
    static TrapDistribution comb_visit(std::int64_t n, double beta);

    TrapKind kind() const { return static_cast<TrapKind>(law_.index()); }
    const Variant& law() const { return law_; }

    double sample(Stream& rng) const;
    // Returns min(duration, cap); exact for the censored variable, and lets
    // expensive samplers stop once the cap is reached.
    double sample_capped(Stream& rng, double cap) const;

    double laplace(double lambda) const;
    Estimate laplace_estimate(double lambda) const;
    // 1 - laplace(lambda), evaluated without cancellation where possible.
    double one_minus_laplace(double lambda) const;

    double mean() const;
    double second_moment() const;
    bool analytic() const { return kind() != TrapKind::empirical; }

private:
    explicit TrapDistribution(Variant v) : law_(std::move(v)) {}
    Variant law_;
};

double sample_trap(const TrapDistribution& dist, Stream& rng);
double laplace(const TrapDistribution& dist, double lambda);
double mean(const TrapDistribution& dist);
double second_moment(const TrapDistribution& dist);

// eps^-1 (1 - laplace(q lambda))
double psi_epsilon(const TrapDistribution& dist, double eps, double q, double lambda);

// ---------------------------------------------------------------------------
// Heavy-tailed and stable samplers.

// P(X > u) = (u/u0)^-alpha for u >= u0.
double sample_pareto(double alpha, double u0, Stream& rng);

// Positive stable variable with E exp(-lambda S) = exp(-lambda^gamma).
double sample_positive_stable(double gamma, Stream& rng);

// Increments of a subordinator with Laplace exponent scale * lambda^gamma.
std::vector<double> sample_stable_increments(double gamma, double scale, double dt, std::size_t n, Stream& rng);

// ---------------------------------------------------------------------------
// Laplace exponents of subordinators: drift plus one jump component.

struct NoJumps {};
struct CompoundPoissonJumps {
    double rate;
    TrapDistribution jump;
};
struct StableJumps {
    double gamma, scale;
};
struct AtomJumps {
    std::vector<double> sizes;
    std::vector<double> intensities;
};

class LaplaceExponent {
public:
    using Jumps = std::variant<NoJumps, CompoundPoissonJumps, StableJumps, AtomJumps>;

    LaplaceExponent() = default;
    LaplaceExponent(double drift, Jumps jumps);

    static LaplaceExponent zero() { return {}; }
    static LaplaceExponent linear(double v) { return LaplaceExponent(v, NoJumps{}); }
    static LaplaceExponent compound_poisson(double rate, TrapDistribution jump, double drift = 0.0);
    static LaplaceExponent stable(double gamma, double scale = 1.0);
    static LaplaceExponent atoms(std::vector<double> sizes, std::vector<double> intensities, double drift = 0.0);

    double operator()(double lambda) const;
    double drift() const { return drift_; }
    const Jumps& jumps() const { return jumps_; }
    // Mean rate f'(0); infinite for stable jumps.
    double mean_rate() const;
    bool is_zero() const;

    // One increment over a time step dt.
    double increment(double dt, Stream& rng) const;

private:
    double drift_ = 0.0;
    Jumps jumps_ = NoJumps{};
};

std::vector<double> subordinator_path(const LaplaceExponent& f, const std::vector<double>& t_grid, Stream& rng);

// ---------------------------------------------------------------------------
// Poisson point processes.

// Spatial atoms (x, v) with intensity dx * gamma v^-1-gamma dv, v >= v_min,
// each carrying a Laplace exponent built from its mass v.
struct AtomIntensity {
    enum class Map { zero, linear, poisson, custom };
    Map map = Map::zero;
    double gamma = 0.5;
    double v_min = 1e-3;
    std::function<LaplaceExponent(double)> custom;

    static AtomIntensity none() { return {}; }
    // FIN: f_v(lambda) = v lambda.
    static AtomIntensity fin(double gamma, double v_min);
    // Poissonian SSBM: f_v(lambda) = v^-gamma (1 - exp(-v^{1+gamma} lambda)).
    static AtomIntensity poissonian(double gamma, double v_min);

    double rate_per_length() const;
    LaplaceExponent exponent_of(double v) const;
    // Expected clock contribution per unit local time carried by atoms below
    // v_min (mean rate of f_v integrated against the cut mass law).
    double neglected_rate() const;
};

// Triples (x, y, z) with intensity gamma z^-1-gamma dx dy dz, z >= z_min.
struct FkIntensity {
    double gamma = 0.5;
    double z_min = 1e-3;
};

struct Window {
    double lo = 0.0, hi = 0.0;
    double length() const { return hi > lo ? hi - lo : 0.0; }
};

struct SsbmAtom {
    double x;
    double v;
    LaplaceExponent f;
};

struct PointProcessSample {
    Window x_window;
    Window y_window;
    std::vector<SsbmAtom> atoms;
    struct Triple {
        double x, y, z;
    };
    std::vector<Triple> triples;
    std::size_t size() const { return atoms.size() + triples.size(); }
};

PointProcessSample sample_poisson_points(const AtomIntensity& intensity, Window x_window, Stream& rng);
PointProcessSample sample_poisson_points(const FkIntensity& intensity, Window x_window, Window y_window, Stream& rng);

std::uint64_t sample_poisson(double mean, Stream& rng);

}  // namespace rtrw
