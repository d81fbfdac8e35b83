#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rtrw/measures.hpp"
#include "rtrw/rng.hpp"

namespace rtrw {

// ---------------------------------------------------------------------------
// Comb teeth.

// Largest tooth length we represent; longer teeth behave identically for any
// walk that cannot reach the tip within its horizon.
inline constexpr std::int64_t kMaxToothLength = std::int64_t{1} << 62;

double comb_drift(std::int64_t n, double beta);

struct ToothLaw {
    std::int64_t n;
    double beta;
    double g;   // drift towards the tip
    double p;   // probability of stepping away from the backbone
    double xi;  // (1-p)/p

    static ToothLaw make(std::int64_t n, double beta);
    // Walk never returns when p = 1 and the tooth has an interior.
    bool returns() const { return n == 1 || p < 1.0; }
};

struct ToothSample {
    std::int64_t steps;
    bool censored;
};

// Step-by-step simulation of the tooth walk started at 1 until it hits 0.
ToothSample comb_tooth_walk_sample(std::int64_t n, double beta, Stream& rng,
                                   std::int64_t step_cap = std::int64_t{1} << 40);

// Exact sampler of min(tau^N, cap) using block moves: dyadic exit-time tables
// for the symmetric tooth, binomial blocks for the drifted one.
double comb_tooth_excursion(std::int64_t n, double p, Stream& rng, double cap);
inline double comb_tooth_excursion(const ToothLaw& law, Stream& rng, double cap) {
    return comb_tooth_excursion(law.n, law.p, rng, cap);
}

double comb_tooth_pgf(std::int64_t n, double beta, double s);
double comb_tooth_pgf_recursive(std::int64_t n, double beta, double s);
// 1 - E[s^tau], accurate as s -> 1. Accepts real n (continuous extension).
double comb_tooth_one_minus_pgf(double n, double beta, double s);
// 1 - E[exp(-lambda tau)]
double comb_tooth_laplace_one_minus(double n, double beta, double lambda);
// Closed forms for the tooth moments; +inf when the walk never returns.
double comb_tooth_mean(double n, double beta);
double comb_tooth_second_moment(std::int64_t n, double beta);

template <class Real>
struct ToothMoments {
    Real m;
    Real m2;
};

// First-step recursions for E_x[tau] and E_x[tau^2]; c_x is the expected time
// to go from x down to x-1, v_x its second moment.
template <class Real>
ToothMoments<Real> tooth_moments_recursive(std::int64_t n, const Real& p) {
    const Real one(1);
    const Real q = one - p;
    Real c_next = one, v_next = one;
    for (std::int64_t x = n - 1; x >= 1; --x) {
        Real c = (one + p * c_next) / q;
        Real v = (one + Real(2) * p * (c_next + c) + p * v_next + Real(2) * p * c_next * c) / q;
        c_next = c;
        v_next = v;
    }
    return {c_next, v_next};
}

ToothMoments<double> comb_tooth_moments_exact(std::int64_t n, double beta);

struct AsymptoticMoments {
    double m;
    std::optional<double> m2;
};
AsymptoticMoments comb_tooth_moments_asymptotic(double n, double beta);

// One visit to a backbone vertex: 1 + sum_{i=1}^K (1 + xi_i),
// P(K = k) = (2/3)(1/3)^k, xi_i i.i.d. tooth excursions.
double comb_visit_duration(std::int64_t n, double beta, Stream& rng);
double comb_visit_laplace(std::int64_t n, double beta, double lambda);

// Inverse-CDF sampler for P(N = n) = n^{-1-alpha} / zeta(1 + alpha).
class ToothLengthSampler {
public:
    explicit ToothLengthSampler(double alpha);
    std::int64_t sample(Stream& rng) const;
    double pmf(std::int64_t n) const;
    // P(N >= n) for real n >= 1.
    double survival(double n) const;
    // Real n* with survival(n*) = u (continuous extension of the tail).
    double survival_inverse(double u) const;
    double alpha() const { return alpha_; }
    double zeta() const { return zeta_; }

private:
    double hurwitz_tail(double n) const;  // sum_{k >= n} k^{-s}
    double alpha_;
    double s_;
    double zeta_;
    std::vector<double> surv_;  // surv_[n] = P(N >= n), n = 1..table size
};

std::shared_ptr<const ToothLengthSampler> tooth_length_sampler(double alpha);

// ---------------------------------------------------------------------------
// Models and landscapes.

struct TransparentParams {
    double alpha = 0.5;
    double beta = 0.0;
    double c = 1.0;
    void validate() const;
    // tau with P(tau > u) = c u^{-alpha} in the tail and tau > 1 a.s.
    double sample_tau(Stream& rng) const;
    // E[h(tau)] by quadrature over the tau law.
    double expect(const std::function<double(double)>& h) const;
    // P(tau > u)
    double survival(double u) const;
};

struct CombParams {
    double alpha = 0.5;
    double beta = 0.0;
    void validate() const;
};

enum class ModelId { srw, constant, bouchaud, transparent, comb };

struct ModelSpec {
    ModelId id = ModelId::srw;
    double alpha = 0.5;
    double beta = 0.0;
    double gamma = 0.5;  // Bouchaud tail index
    double c = 1.0;      // tail constant or constant trap value
    bool analysis_form = false;

    static ModelSpec srw() { return {}; }
    static ModelSpec constant(double c);
    static ModelSpec bouchaud(double gamma, double c = 1.0);
    static ModelSpec transparent(double alpha, double beta, double c = 1.0);
    static ModelSpec comb(double alpha, double beta);

    std::string name() const;
    void validate() const;
    TransparentParams transparent_params() const { return {alpha, beta, c}; }
};

ModelId parse_model_id(const std::string& s);
std::string to_string(ModelId id);

// Draws the trapping law of one site.
class LandscapeModel {
public:
    virtual ~LandscapeModel() = default;
    virtual TrapDistribution draw(Stream& rng) const = 0;
    virtual const ModelSpec& spec() const = 0;
};

std::shared_ptr<const LandscapeModel> make_landscape_model(const ModelSpec& spec);
std::shared_ptr<const LandscapeModel> bouchaud_landscape(double gamma, double c = 1.0);
std::shared_ptr<const LandscapeModel> transparent_landscape(const TransparentParams& params, bool analysis_form = false);
std::shared_ptr<const LandscapeModel> comb_landscape(const CombParams& params);

// Site -> tooth length, lazily over any window.
std::vector<std::int64_t> comb_teeth(double alpha, std::int64_t x_lo, std::int64_t x_hi, std::uint64_t env_seed);

// ---------------------------------------------------------------------------
// Phase predictions.

enum class PhaseLabel { BM, FK, FIN, SSBM, unclassified };
std::string to_string(PhaseLabel label);
PhaseLabel parse_phase_label(const std::string& s);

struct PhasePrediction {
    PhaseLabel label = PhaseLabel::unclassified;
    double exponent = NAN;        // gamma for FIN/SSBM, kappa for FK
    double schedule_power = NAN;  // q(eps) ~ eps^power
    bool slowly_varying = false;  // q carries a slowly varying factor
    std::string note;
    // |X_t| ~ t^nu with nu = 1 / schedule_power
    double nu() const { return 1.0 / schedule_power; }
};

// `margin` widens every excluded boundary into a band.
PhasePrediction predicted_phase(ModelId model, double alpha, double beta, double margin = 0.0);
double boundary_distance(ModelId model, double alpha, double beta);

}  // namespace rtrw
