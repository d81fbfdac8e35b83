#include "rtrw/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "rtrw/models.hpp"

namespace rtrw {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

double comb_visit_sample(const CombVisitLaw& law, Stream& rng, double cap) {
    // Each return to the backbone vertex enters the tooth with probability 1/3.
    constexpr double third = 1.0 / 3.0;
    double d = 1.0;
    while (d < cap && rng.uniform() < third) {
        d += 1.0 + comb_tooth_excursion(law.n, law.p, rng, cap - d);
    }
    return std::min(d, cap);
}

}  // namespace

// ---------------------------------------------------------------------------

TrapDistribution TrapDistribution::point_mass(double c) {
    require(c > 0 && std::isfinite(c), "point mass must be positive");
    return TrapDistribution(PointMassLaw{c});
}

TrapDistribution TrapDistribution::exponential(double mean) {
    require(mean > 0 && std::isfinite(mean), "exponential mean must be positive");
    return TrapDistribution(ExponentialLaw{mean});
}

TrapDistribution TrapDistribution::two_point(double low, double high, double p_high) {
    require(low >= 0 && high > 0 && std::isfinite(high), "two-point atoms must be nonnegative and finite");
    require(p_high >= 0 && p_high <= 1, "two-point weight must lie in [0,1]");
    require(low > 0 || p_high > 0, "two-point law has no positive mass");
    return TrapDistribution(TwoPointLaw{low, high, p_high});
}

TrapDistribution TrapDistribution::transparent(double tau, double beta, bool analysis_form) {
    require(tau >= 1, "transparent trap needs tau >= 1");
    require(beta >= 0, "transparent trap needs beta >= 0");
    return two_point(analysis_form ? 0.0 : 1.0, tau, std::pow(tau, -beta));
}

TrapDistribution TrapDistribution::empirical(std::vector<double> samples) {
    require(!samples.empty(), "empirical law needs samples");
    for (double x : samples) require(x > 0 && std::isfinite(x), "empirical samples must be positive");
    return TrapDistribution(EmpiricalLaw{std::make_shared<const std::vector<double>>(std::move(samples))});
}

TrapDistribution TrapDistribution::comb_visit(std::int64_t n, double beta) {
    require(n >= 1, "tooth length must be >= 1");
    require(beta >= 0, "drift strength must be >= 0");
    const ToothLaw tooth = ToothLaw::make(n, beta);
    return TrapDistribution(CombVisitLaw{n, beta, tooth.p, comb_tooth_mean(static_cast<double>(n), beta)});
}

double TrapDistribution::sample(Stream& rng) const {
    return sample_capped(rng, std::numeric_limits<double>::infinity());
}

double TrapDistribution::sample_capped(Stream& rng, double cap) const {
    const double x = std::visit(
        overloaded{
            [](const PointMassLaw& l) { return l.c; },
            [&](const ExponentialLaw& l) { return l.mean * rng.exponential(); },
            [&](const TwoPointLaw& l) { return rng.uniform() < l.p_high ? l.high : l.low; },
            [&](const EmpiricalLaw& l) {
                const auto& s = *l.samples;
                return s[static_cast<std::size_t>(rng.uniform() * static_cast<double>(s.size()))];
            },
            [&](const CombVisitLaw& l) { return comb_visit_sample(l, rng, cap); },
        },
        law_);
    return std::min(x, cap);
}

double TrapDistribution::laplace(double lambda) const {
    return laplace_estimate(lambda).value;
}

Estimate TrapDistribution::laplace_estimate(double lambda) const {
    require(lambda >= 0, "laplace needs lambda >= 0");
    if (lambda == 0) return {1.0, 0.0};
    return std::visit(
        overloaded{
            [&](const PointMassLaw& l) { return Estimate{std::exp(-lambda * l.c), 0.0}; },
            [&](const ExponentialLaw& l) { return Estimate{1.0 / (1.0 + l.mean * lambda), 0.0}; },
            [&](const TwoPointLaw& l) {
                return Estimate{(1.0 - l.p_high) * std::exp(-lambda * l.low) + l.p_high * std::exp(-lambda * l.high),
                                0.0};
            },
            [&](const EmpiricalLaw& l) {
                const auto& s = *l.samples;
                double sum = 0, sum2 = 0;
                for (double x : s) {
                    const double e = std::exp(-lambda * x);
                    sum += e;
                    sum2 += e * e;
                }
                const double n = static_cast<double>(s.size());
                const double m = sum / n;
                const double var = n > 1 ? std::max(0.0, (sum2 - n * m * m) / (n - 1)) : 0.0;
                return Estimate{m, std::sqrt(var / n)};
            },
            [&](const CombVisitLaw& l) { return Estimate{comb_visit_laplace(l.n, l.beta, lambda), 0.0}; },
        },
        law_);
}

double TrapDistribution::one_minus_laplace(double lambda) const {
    require(lambda >= 0, "laplace needs lambda >= 0");
    if (lambda == 0) return 0.0;
    return std::visit(
        overloaded{
            [&](const PointMassLaw& l) { return -std::expm1(-lambda * l.c); },
            [&](const ExponentialLaw& l) { return l.mean * lambda / (1.0 + l.mean * lambda); },
            [&](const TwoPointLaw& l) {
                return (1.0 - l.p_high) * -std::expm1(-lambda * l.low) + l.p_high * -std::expm1(-lambda * l.high);
            },
            [&](const EmpiricalLaw& l) {
                double sum = 0;
                for (double x : *l.samples) sum += -std::expm1(-lambda * x);
                return sum / static_cast<double>(l.samples->size());
            },
            [&](const CombVisitLaw& l) {
                // 1 - 2e/(3 - e th) = (3(1-e) + e(1-th)) / (3 - e th), e = exp(-lambda)
                const double e = std::exp(-lambda);
                const double one_minus_e = -std::expm1(-lambda);
                const double one_minus_th = comb_tooth_laplace_one_minus(static_cast<double>(l.n), l.beta, lambda);
                const double num = 3.0 * one_minus_e + e * one_minus_th;
                return num / (2.0 + one_minus_e + e * one_minus_th);
            },
        },
        law_);
}

double TrapDistribution::mean() const {
    return std::visit(overloaded{
                          [](const PointMassLaw& l) { return l.c; },
                          [](const ExponentialLaw& l) { return l.mean; },
                          [](const TwoPointLaw& l) { return (1.0 - l.p_high) * l.low + l.p_high * l.high; },
                          [](const EmpiricalLaw& l) {
                              double s = 0;
                              for (double x : *l.samples) s += x;
                              return s / static_cast<double>(l.samples->size());
                          },
                          [](const CombVisitLaw& l) { return (3.0 + l.tooth_mean) / 2.0; },
                      },
                      law_);
}

double TrapDistribution::second_moment() const {
    return std::visit(overloaded{
                          [](const PointMassLaw& l) { return l.c * l.c; },
                          [](const ExponentialLaw& l) { return 2.0 * l.mean * l.mean; },
                          [](const TwoPointLaw& l) {
                              return (1.0 - l.p_high) * l.low * l.low + l.p_high * l.high * l.high;
                          },
                          [](const EmpiricalLaw& l) {
                              double s = 0;
                              for (double x : *l.samples) s += x * x;
                              return s / static_cast<double>(l.samples->size());
                          },
                          [](const CombVisitLaw& l) {
                              // D = 1 + sum_{i<=K} Y_i, E K = 1/2, E K^2 = 1, Y = 1 + xi
                              const double m = l.tooth_mean;
                              const double m2 = comb_tooth_second_moment(l.n, l.beta);
                              const double mu = 1.0 + m;
                              const double mu2 = 1.0 + 2.0 * m + m2;
                              return 1.0 + mu + 0.5 * (mu2 + mu * mu);
                          },
                      },
                      law_);
}

double sample_trap(const TrapDistribution& dist, Stream& rng) { return dist.sample(rng); }
double laplace(const TrapDistribution& dist, double lambda) { return dist.laplace(lambda); }
double mean(const TrapDistribution& dist) { return dist.mean(); }
double second_moment(const TrapDistribution& dist) { return dist.second_moment(); }

double psi_epsilon(const TrapDistribution& dist, double eps, double q, double lambda) {
    require(eps > 0, "psi_epsilon needs eps > 0");
    require(q > 0, "psi_epsilon needs q > 0");
    require(lambda >= 0, "psi_epsilon needs lambda >= 0");
    return dist.one_minus_laplace(q * lambda) / eps;
}

// ---------------------------------------------------------------------------

double sample_pareto(double alpha, double u0, Stream& rng) {
    return u0 * std::pow(rng.uniform_pos(), -1.0 / alpha);
}

double sample_positive_stable(double gamma, Stream& rng) {
    if (gamma == 0.5) {
        // Levy law: 1/(2 Z^2) has Laplace transform exp(-sqrt(lambda)).
        const double z = rng.normal();
        return 0.5 / (z * z);
    }
    // Kanter's representation.
    const double u = std::numbers::pi * rng.uniform_pos();
    const double w = rng.exponential();
    const double a = std::sin(gamma * u) / std::pow(std::sin(u), 1.0 / gamma);
    const double b = std::pow(std::sin((1.0 - gamma) * u) / w, (1.0 - gamma) / gamma);
    return a * b;
}

std::vector<double> sample_stable_increments(double gamma, double scale, double dt, std::size_t n, Stream& rng) {
    require(gamma > 0 && gamma < 1, "stable index must lie in (0,1)");
    require(scale > 0 && dt > 0, "stable scale and step must be positive");
    const double factor = std::pow(scale * dt, 1.0 / gamma);
    std::vector<double> out(n);
    for (auto& x : out) x = factor * sample_positive_stable(gamma, rng);
    return out;
}

std::uint64_t sample_poisson(double mean, Stream& rng) {
    if (!(mean > 0)) return 0;
    std::poisson_distribution<std::uint64_t> d(mean);
    return d(rng);
}

// ---------------------------------------------------------------------------

LaplaceExponent::LaplaceExponent(double drift, Jumps jumps) : drift_(drift), jumps_(std::move(jumps)) {
    require(drift >= 0, "drift must be nonnegative");
    std::visit(overloaded{
                   [](const NoJumps&) {},
                   [](const CompoundPoissonJumps& j) { require(j.rate >= 0, "rate must be nonnegative"); },
                   [](const StableJumps& j) {
                       require(j.gamma > 0 && j.gamma < 1, "stable index must lie in (0,1)");
                       require(j.scale >= 0, "stable scale must be nonnegative");
                   },
                   [](const AtomJumps& j) {
                       require(j.sizes.size() == j.intensities.size(), "atom sizes and intensities differ in length");
                       for (std::size_t i = 0; i < j.sizes.size(); ++i)
                           require(j.sizes[i] > 0 && j.intensities[i] >= 0, "atoms must be positive");
                   },
               },
               jumps_);
}

LaplaceExponent LaplaceExponent::compound_poisson(double rate, TrapDistribution jump, double drift) {
    return LaplaceExponent(drift, CompoundPoissonJumps{rate, std::move(jump)});
}

LaplaceExponent LaplaceExponent::stable(double gamma, double scale) {
    return LaplaceExponent(0.0, StableJumps{gamma, scale});
}

LaplaceExponent LaplaceExponent::atoms(std::vector<double> sizes, std::vector<double> intensities, double drift) {
    return LaplaceExponent(drift, AtomJumps{std::move(sizes), std::move(intensities)});
}

double LaplaceExponent::operator()(double lambda) const {
    require(lambda >= 0, "Laplace exponent needs lambda >= 0");
    if (lambda == 0) return 0.0;
    const double jump = std::visit(overloaded{
                                       [](const NoJumps&) { return 0.0; },
                                       [&](const CompoundPoissonJumps& j) {
                                           return j.rate * j.jump.one_minus_laplace(lambda);
                                       },
                                       [&](const StableJumps& j) { return j.scale * std::pow(lambda, j.gamma); },
                                       [&](const AtomJumps& j) {
                                           double s = 0;
                                           for (std::size_t i = 0; i < j.sizes.size(); ++i)
                                               s += j.intensities[i] * -std::expm1(-lambda * j.sizes[i]);
                                           return s;
                                       },
                                   },
                                   jumps_);
    return drift_ * lambda + jump;
}

double LaplaceExponent::mean_rate() const {
    const double jump = std::visit(overloaded{
                                       [](const NoJumps&) { return 0.0; },
                                       [](const CompoundPoissonJumps& j) { return j.rate * j.jump.mean(); },
                                       [](const StableJumps& j) {
                                           return j.scale > 0 ? std::numeric_limits<double>::infinity() : 0.0;
                                       },
                                       [](const AtomJumps& j) {
                                           double s = 0;
                                           for (std::size_t i = 0; i < j.sizes.size(); ++i)
                                               s += j.intensities[i] * j.sizes[i];
                                           return s;
                                       },
                                   },
                                   jumps_);
    return drift_ + jump;
}

bool LaplaceExponent::is_zero() const {
    return drift_ == 0 && mean_rate() == 0;
}

double LaplaceExponent::increment(double dt, Stream& rng) const {
    double x = drift_ * dt;
    std::visit(overloaded{
                   [](const NoJumps&) {},
                   [&](const CompoundPoissonJumps& j) {
                       const auto k = sample_poisson(j.rate * dt, rng);
                       for (std::uint64_t i = 0; i < k; ++i) x += j.jump.sample(rng);
                   },
                   [&](const StableJumps& j) {
                       if (j.scale > 0) x += std::pow(j.scale * dt, 1.0 / j.gamma) * sample_positive_stable(j.gamma, rng);
                   },
                   [&](const AtomJumps& j) {
                       for (std::size_t i = 0; i < j.sizes.size(); ++i)
                           x += j.sizes[i] * static_cast<double>(sample_poisson(j.intensities[i] * dt, rng));
                   },
               },
               jumps_);
    return x;
}

std::vector<double> subordinator_path(const LaplaceExponent& f, const std::vector<double>& t_grid, Stream& rng) {
    require(!t_grid.empty() && t_grid.front() == 0.0, "grid must start at 0");
    std::vector<double> path(t_grid.size(), 0.0);
    CompensatedSum s;
    for (std::size_t i = 1; i < t_grid.size(); ++i) {
        const double dt = t_grid[i] - t_grid[i - 1];
        require(dt > 0, "grid must be strictly increasing");
        s.add(f.increment(dt, rng));
        path[i] = std::max(path[i - 1], s.value());
    }
    return path;
}

// ---------------------------------------------------------------------------

AtomIntensity AtomIntensity::fin(double gamma, double v_min) {
    AtomIntensity a;
    a.map = Map::linear;
    a.gamma = gamma;
    a.v_min = v_min;
    return a;
}

AtomIntensity AtomIntensity::poissonian(double gamma, double v_min) {
    AtomIntensity a;
    a.map = Map::poisson;
    a.gamma = gamma;
    a.v_min = v_min;
    return a;
}

double AtomIntensity::rate_per_length() const {
    if (map == Map::zero) return 0.0;
    return std::pow(v_min, -gamma);
}

LaplaceExponent AtomIntensity::exponent_of(double v) const {
    switch (map) {
        case Map::zero:
            return LaplaceExponent::zero();
        case Map::linear:
            return LaplaceExponent::linear(v);
        case Map::poisson:
            return LaplaceExponent::atoms({std::pow(v, 1.0 + gamma)}, {std::pow(v, -gamma)});
        case Map::custom:
            return custom(v);
    }
    return LaplaceExponent::zero();
}

double AtomIntensity::neglected_rate() const {
    if (map == Map::zero || map == Map::custom) return 0.0;
    if (gamma >= 1) return std::numeric_limits<double>::infinity();
    return gamma / (1.0 - gamma) * std::pow(v_min, 1.0 - gamma);
}

PointProcessSample sample_poisson_points(const AtomIntensity& intensity, Window x_window, Stream& rng) {
    PointProcessSample out;
    out.x_window = x_window;
    if (intensity.map == AtomIntensity::Map::zero || x_window.length() == 0) return out;
    require(intensity.gamma > 0, "intensity exponent must be positive");
    require(intensity.v_min > 0, "non-integrable intensity: a positive lower cutoff is required");
    require(intensity.map != AtomIntensity::Map::custom || static_cast<bool>(intensity.custom),
            "custom intensity needs a mass-to-exponent map");
    const auto k = sample_poisson(x_window.length() * intensity.rate_per_length(), rng);
    out.atoms.reserve(k);
    for (std::uint64_t i = 0; i < k; ++i) {
        const double x = x_window.lo + x_window.length() * rng.uniform();
        const double v = sample_pareto(intensity.gamma, intensity.v_min, rng);
        out.atoms.push_back({x, v, intensity.exponent_of(v)});
    }
    std::sort(out.atoms.begin(), out.atoms.end(), [](const SsbmAtom& a, const SsbmAtom& b) { return a.x < b.x; });
    return out;
}

PointProcessSample sample_poisson_points(const FkIntensity& intensity, Window x_window, Window y_window, Stream& rng) {
    PointProcessSample out;
    out.x_window = x_window;
    out.y_window = y_window;
    const double area = x_window.length() * y_window.length();
    if (area == 0) return out;
    require(intensity.gamma > 0, "intensity exponent must be positive");
    require(intensity.z_min > 0, "non-integrable intensity: a positive lower cutoff is required");
    const auto k = sample_poisson(area * std::pow(intensity.z_min, -intensity.gamma), rng);
    out.triples.reserve(k);
    for (std::uint64_t i = 0; i < k; ++i) {
        const double x = x_window.lo + x_window.length() * rng.uniform();
        const double y = y_window.lo + y_window.length() * rng.uniform();
        out.triples.push_back({x, y, sample_pareto(intensity.gamma, intensity.z_min, rng)});
    }
    std::sort(out.triples.begin(), out.triples.end(),
              [](const auto& a, const auto& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    return out;
}

}  // namespace rtrw
