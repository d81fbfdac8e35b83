#include "rtrw/models.hpp"

#include <algorithm>
#include <bit>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <random>

namespace rtrw {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

double drift_real(double n, double beta) {
    if (n <= 1 || beta == 0) return 0.0;
    return std::min(beta * std::log(n) / n, 1.0);
}

// Exit-time laws of the simple walk from the centre of (-a, a), a = 2^j.
class ExitTables {
public:
    static constexpr int levels = 8;  // a = 1 .. 128

    static const ExitTables& instance() {
        static const ExitTables tables;
        return tables;
    }

    // Exit time of (-a, a) started at 0, a = 2^level.
    std::int64_t sample(int level, Stream& rng) const {
        const auto& cdf = cdf_[level];
        const std::int64_t a = std::int64_t{1} << level;
        if (cdf.size() == 1) return a;
        const double u = rng.uniform() * cdf.back();
        const auto idx = std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
        return a + 2 * static_cast<std::int64_t>(std::min<std::ptrdiff_t>(idx, cdf.size() - 1));
    }

private:
    ExitTables() {
        for (int level = 0; level < levels; ++level) build(level);
    }

    void build(int level) {
        const int a = 1 << level;
        auto& cdf = cdf_[level];
        if (a == 1) {
            cdf = {1.0};
            return;
        }
        // Occupation probabilities on -a..a, index i + a; the ends absorb.
        std::vector<double> cur(2 * a + 1, 0.0), nxt(2 * a + 1, 0.0);
        cur[a] = 1.0;
        double absorbed = 0.0;
        for (std::int64_t n = 1;; ++n) {
            std::fill(nxt.begin(), nxt.end(), 0.0);
            for (int i = 1; i < 2 * a; ++i) {
                const double m = 0.5 * cur[i];
                if (m == 0.0) continue;
                nxt[i - 1] += m;
                nxt[i + 1] += m;
            }
            const double hit = nxt[0] + nxt[2 * a];
            nxt[0] = nxt[2 * a] = 0.0;
            std::swap(cur, nxt);
            if ((n - a) % 2 == 0 && n >= a) {
                absorbed += hit;
                cdf.push_back(absorbed);
            }
            if (n > a && (n - a) % 2 == 0) {
                double alive = 0.0;
                for (double x : cur) alive += x;
                if (alive < 1e-18) break;
            }
        }
    }

    std::vector<double> cdf_[levels];
};

}  // namespace

double comb_drift(std::int64_t n, double beta) {
    require(n >= 1, "tooth length must be >= 1");
    require(beta >= 0, "drift strength must be >= 0");
    return drift_real(static_cast<double>(n), beta);
}

ToothLaw ToothLaw::make(std::int64_t n, double beta) {
    const double g = comb_drift(n, beta);
    const double p = 0.5 * (1.0 + g);
    return {n, beta, g, p, (1.0 - g) / (1.0 + g)};
}

ToothSample comb_tooth_walk_sample(std::int64_t n, double beta, Stream& rng, std::int64_t step_cap) {
    const ToothLaw law = ToothLaw::make(n, beta);
    std::int64_t x = 1, steps = 0;
    while (x > 0) {
        if (steps >= step_cap) return {steps, true};
        ++steps;
        if (x == n)
            --x;
        else
            x += rng.uniform() < law.p ? 1 : -1;
    }
    return {steps, false};
}

double comb_tooth_excursion(std::int64_t n, double p, Stream& rng, double cap) {
    if (n == 1) return std::min(1.0, cap);
    if (p == 0.5) {
        // Unfold the reflection at the tip: the excursion is the exit time of
        // (0, 2n) for a simple walk started at 1. Move by exact exit times of
        // dyadic symmetric intervals.
        const auto& tables = ExitTables::instance();
        const std::uint64_t len = 2 * static_cast<std::uint64_t>(n);
        std::uint64_t x = 1;
        double t = 0.0;
        while (true) {
            const std::uint64_t d = std::min(x, len - x);
            if (d == 0) return std::min(t, cap);
            const int level = std::min(ExitTables::levels - 1, static_cast<int>(std::bit_width(d)) - 1);
            t += static_cast<double>(tables.sample(level, rng));
            if (t >= cap) return cap;
            const std::uint64_t a = std::uint64_t{1} << level;
            x = rng.coin() ? x + a : x - a;
        }
    }
    require(p < 1.0 || std::isfinite(cap), "tooth walk with full drift never returns");
    // Drifted tooth: binomial blocks that cannot touch either end before their last step.
    constexpr std::int64_t block_min = 16;
    if (n < 2 * block_min) {
        // Short tooth: plain steps with an integer comparison, the same test
        // as uniform() < p.
        const auto thr = static_cast<std::uint64_t>(std::ceil(p * 0x1.0p53));
        const std::int64_t icap = cap < 0x1.0p62 ? static_cast<std::int64_t>(std::ceil(cap)) : INT64_MAX;
        std::int64_t x = 1, t = 0;
        while (x > 0 && t < icap) {
            x += x == n ? -1 : ((rng() >> 11) < thr ? 1 : -1);
            ++t;
        }
        return std::min(static_cast<double>(t), cap);
    }
    std::int64_t x = 1;
    double t = 0.0;
    while (x > 0) {
        if (t >= cap) return cap;
        if (x == n) {
            --x;
            t += 1.0;
            continue;
        }
        const std::int64_t d = std::min(x, n - x);
        if (d >= block_min) {
            const double room = std::ceil(cap - t);
            const std::int64_t k_steps = room < static_cast<double>(d) ? std::max<std::int64_t>(1, static_cast<std::int64_t>(room)) : d;
            std::binomial_distribution<std::int64_t> bin(k_steps, p);
            const std::int64_t up = bin(rng);
            x += 2 * up - k_steps;
            t += static_cast<double>(k_steps);
        } else {
            x += rng.uniform() < p ? 1 : -1;
            t += 1.0;
        }
    }
    return std::min(t, cap);
}

namespace {

struct PgfParts {
    double f;
    double one_minus_f;
};

// Closed form in scaled variables: numerator and denominator divided by
// chi^{2n-1}, with r = xi^{n-1} chi^{-(2n-1)}.
PgfParts pgf_closed(double n, double beta, double s, double one_minus_s) {
    if (n <= 1) return {s, one_minus_s};
    const double g = drift_real(n, beta);
    const double root = std::sqrt(one_minus_s * (1.0 + s) + s * s * g * g);
    const double chim1 = (one_minus_s + one_minus_s * (1.0 + s) / (root + s * g)) / (s * (1.0 + g));
    const double chi = 1.0 + chim1;
    const double one_minus_xi = 2.0 * g / (1.0 + g);
    const double xi = (1.0 - g) / (1.0 + g);
    const double log_r = (n - 1.0) * std::log1p(-one_minus_xi) - (2.0 * n - 1.0) * std::log1p(chim1);
    const double r = std::exp(log_r);
    const double chi_minus_s = chim1 + one_minus_s;
    const double s_chi_minus_xi = s * chim1 + one_minus_xi - one_minus_s;
    const double chi_minus_xi = chim1 + one_minus_xi;
    const double den = chi_minus_s + r * s_chi_minus_xi;
    const double f = (xi * chi_minus_s / chi + r * chi * s_chi_minus_xi) / den;
    const double omf = (chi_minus_xi * chi_minus_s / chi - r * chim1 * s_chi_minus_xi) / den;
    return {f, omf};
}

// b_x = 1 - f_x / f_{x-1}; all terms positive, so no cancellation near s = 1.
double one_minus_pgf_recursive(std::int64_t n, double p, double s, double one_minus_s) {
    double b = one_minus_s;
    const double q = 1.0 - p;
    for (std::int64_t x = n - 1; x >= 1; --x) b = (one_minus_s + s * p * b) / (one_minus_s + s * q + s * p * b);
    return b;
}

constexpr std::int64_t kRecursiveLimit = 16;

void check_pgf_args(std::int64_t n, double beta, double s) {
    require(n >= 1, "tooth length must be >= 1");
    require(beta >= 0, "drift strength must be >= 0");
    require(s > 0 && s <= 1, "generating function argument must lie in (0,1]");
}

}  // namespace

double comb_tooth_pgf(std::int64_t n, double beta, double s) {
    check_pgf_args(n, beta, s);
    return pgf_closed(static_cast<double>(n), beta, s, 1.0 - s).f;
}

double comb_tooth_pgf_recursive(std::int64_t n, double beta, double s) {
    check_pgf_args(n, beta, s);
    const double p = ToothLaw::make(n, beta).p;
    const double q = 1.0 - p;
    double a = s;  // f_N / f_{N-1}
    for (std::int64_t x = n - 1; x >= 1; --x) a = s * q / (1.0 - s * p * a);
    return a;
}

double comb_tooth_one_minus_pgf(double n, double beta, double s) {
    require(n >= 1, "tooth length must be >= 1");
    require(s > 0 && s <= 1, "generating function argument must lie in (0,1]");
    if (n <= kRecursiveLimit && n == std::floor(n)) {
        const double p = 0.5 * (1.0 + drift_real(n, beta));
        return one_minus_pgf_recursive(static_cast<std::int64_t>(n), p, s, 1.0 - s);
    }
    return pgf_closed(n, beta, s, 1.0 - s).one_minus_f;
}

double comb_tooth_laplace_one_minus(double n, double beta, double lambda) {
    require(lambda >= 0, "laplace needs lambda >= 0");
    if (lambda == 0) return 0.0;
    const double s = std::exp(-lambda);
    const double one_minus_s = -std::expm1(-lambda);
    if (n <= kRecursiveLimit && n == std::floor(n)) {
        const double p = 0.5 * (1.0 + drift_real(n, beta));
        return one_minus_pgf_recursive(static_cast<std::int64_t>(n), p, s, one_minus_s);
    }
    return pgf_closed(n, beta, s, one_minus_s).one_minus_f;
}

double comb_tooth_mean(double n, double beta) {
    require(n >= 1, "tooth length must be >= 1");
    if (n == 1) return 1.0;
    const double g = drift_real(n, beta);
    if (g >= 1.0) return std::numeric_limits<double>::infinity();
    if (g == 0.0) return 2.0 * n - 1.0;
    // c_x = 1/q + rho c_{x+1}, c_N = 1: m = (rho^K (1+g) - 1)/g, K = n - 1.
    const double lr = (n - 1.0) * (std::log1p(g) - std::log1p(-g));
    return std::expm1(lr) / g + std::exp(lr);
}

double comb_tooth_second_moment(std::int64_t n, double beta) {
    require(n >= 1, "tooth length must be >= 1");
    const ToothLaw law = ToothLaw::make(n, beta);
    if (!law.returns()) return std::numeric_limits<double>::infinity();
    if (n <= 100'000'000) return tooth_moments_recursive<double>(n, law.p).m2;
    const long double k = static_cast<long double>(n - 1);
    if (law.g == 0.0) return static_cast<double>(1.0L + 8.0L * k * (k + 1.0L) * (k + 2.0L) / 3.0L);
    const long double g = law.g;
    const long double p = (1.0L + g) / 2.0L, q = (1.0L - g) / 2.0L;
    const long double rho = p / q;
    const long double cs = -1.0L / g;
    const long double a = 1.0L - cs;
    const long double rk = std::exp(k * std::log(rho));
    const long double geo = (rk - 1.0L) / (rho - 1.0L);
    const long double a0 = 1.0L / q + 2.0L * rho * (2.0L * cs + cs * cs);
    const long double b1 = 2.0L * a * (1.0L + cs) * (1.0L + rho);
    const long double b2 = 2.0L * a * a;
    return static_cast<double>(rk + a0 * geo + b1 * k * rk + b2 * rk * rho * geo);
}

ToothMoments<double> comb_tooth_moments_exact(std::int64_t n, double beta) {
    require(n >= 1, "tooth length must be >= 1");
    const ToothLaw law = ToothLaw::make(n, beta);
    if (!law.returns()) {
        const double inf = std::numeric_limits<double>::infinity();
        return {inf, inf};
    }
    if (n <= 100'000'000) return tooth_moments_recursive<double>(n, law.p);
    return {comb_tooth_mean(static_cast<double>(n), beta), comb_tooth_second_moment(n, beta)};
}

AsymptoticMoments comb_tooth_moments_asymptotic(double n, double beta) {
    require(n >= 1, "tooth length must be >= 1");
    require(beta >= 0, "drift strength must be >= 0");
    if (beta == 0) return {2.0 * n, std::nullopt};
    require(n > 1, "asymptotic moments need log N > 0 when beta > 0");
    const double l = std::log(n);
    return {std::pow(n, 2.0 * beta + 1.0) / (beta * l), std::pow(n, 3.0 + 4.0 * beta) / (beta * beta * beta * l * l * l)};
}

double comb_visit_duration(std::int64_t n, double beta, Stream& rng) {
    const ToothLaw law = ToothLaw::make(n, beta);
    double d = 1.0;
    while (rng.uniform() < 1.0 / 3.0) d += 1.0 + comb_tooth_excursion(law, rng, std::numeric_limits<double>::infinity());
    return d;
}

double comb_visit_laplace(std::int64_t n, double beta, double lambda) {
    require(n >= 1, "tooth length must be >= 1");
    require(lambda >= 0, "laplace needs lambda >= 0");
    const double e = std::exp(-lambda);
    const double theta = 1.0 - comb_tooth_laplace_one_minus(static_cast<double>(n), beta, lambda);
    return 2.0 * e / (3.0 - e * theta);
}

// ---------------------------------------------------------------------------

namespace {
constexpr std::int64_t kZetaTable = 1 << 16;
}

ToothLengthSampler::ToothLengthSampler(double alpha) : alpha_(alpha), s_(1.0 + alpha) {
    require(alpha > 0, "tooth tail index must be positive");
    // H(n) = sum_{k >= n} k^-s, exact partial sums below the table end and
    // Euler-Maclaurin beyond.
    std::vector<double> h(kZetaTable + 2, 0.0);
    h[kZetaTable + 1] = hurwitz_tail(static_cast<double>(kZetaTable + 1));
    for (std::int64_t n = kZetaTable; n >= 1; --n) h[n] = h[n + 1] + std::pow(static_cast<double>(n), -s_);
    zeta_ = h[1];
    surv_.assign(kZetaTable + 2, 0.0);
    for (std::int64_t n = 1; n <= kZetaTable + 1; ++n) surv_[n] = h[n] / zeta_;
    surv_[1] = 1.0;
}

double ToothLengthSampler::hurwitz_tail(double n) const {
    const double s = s_;
    return std::pow(n, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(n, -s) + s / 12.0 * std::pow(n, -s - 1.0) -
           s * (s + 1.0) * (s + 2.0) / 720.0 * std::pow(n, -s - 3.0);
}

double ToothLengthSampler::pmf(std::int64_t n) const {
    if (n < 1) return 0.0;
    return std::pow(static_cast<double>(n), -s_) / zeta_;
}

double ToothLengthSampler::survival(double n) const {
    if (n <= 1) return 1.0;
    if (n <= static_cast<double>(kZetaTable)) {
        const auto lo = static_cast<std::int64_t>(std::floor(n));
        const double frac = n - static_cast<double>(lo);
        if (frac == 0) return surv_[lo];
        return std::exp((1.0 - frac) * std::log(surv_[lo]) + frac * std::log(surv_[lo + 1]));
    }
    return hurwitz_tail(n) / zeta_;
}

double ToothLengthSampler::survival_inverse(double u) const {
    require(u > 0 && u <= 1, "survival level must lie in (0,1]");
    if (u == 1) return 1.0;
    double lo = 1.0, hi = 2.0;
    while (survival(hi) > u) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) return hi;
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (survival(mid) > u ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

std::int64_t ToothLengthSampler::sample(Stream& rng) const {
    // N = max{n : P(N >= n) >= v}
    const double v = rng.uniform_pos();
    if (v > surv_[kZetaTable + 1]) {
        std::int64_t lo = 1, hi = kZetaTable + 1;  // surv_[lo] >= v > surv_[hi]
        while (hi - lo > 1) {
            const std::int64_t mid = (lo + hi) / 2;
            (surv_[mid] >= v ? lo : hi) = mid;
        }
        return lo;
    }
    const double target = v * zeta_;
    const double guess = std::pow(target * (s_ - 1.0), -1.0 / (s_ - 1.0));
    if (!(guess < static_cast<double>(kMaxToothLength) / 2)) return kMaxToothLength;
    auto n = std::max<std::int64_t>(kZetaTable + 1, static_cast<std::int64_t>(guess));
    while (n > kZetaTable + 1 && hurwitz_tail(static_cast<double>(n)) < target) --n;
    while (hurwitz_tail(static_cast<double>(n + 1)) >= target) ++n;
    return n;
}

std::shared_ptr<const ToothLengthSampler> tooth_length_sampler(double alpha) {
    static std::mutex mu;
    static std::map<double, std::shared_ptr<const ToothLengthSampler>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[alpha];
    if (!slot) slot = std::make_shared<const ToothLengthSampler>(alpha);
    return slot;
}

// ---------------------------------------------------------------------------

void TransparentParams::validate() const {
    require(alpha > 0, "transparent traps need alpha > 0");
    require(beta >= 0, "transparent traps need beta >= 0");
    require(c > 0, "transparent traps need c > 0");
}

double TransparentParams::sample_tau(Stream& rng) const {
    if (c >= 1) return sample_pareto(alpha, std::pow(c, 1.0 / alpha), rng);
    // Body: with probability 1 - c, uniform on (1, 2).
    if (rng.uniform() < c) return sample_pareto(alpha, 1.0, rng);
    return 1.0 + rng.uniform_pos();
}

double TransparentParams::survival(double u) const {
    if (c >= 1) {
        const double u0 = std::pow(c, 1.0 / alpha);
        return u <= u0 ? 1.0 : c * std::pow(u, -alpha);
    }
    if (u <= 1) return 1.0;
    return c * std::pow(u, -alpha) + (1.0 - c) * std::max(0.0, 2.0 - u);
}

double TransparentParams::expect(const std::function<double(double)>& h) const {
    using boost::math::quadrature::gauss;
    // Pareto part in y = log(u/u0): density alpha exp(-alpha y).
    const double u0 = c >= 1 ? std::pow(c, 1.0 / alpha) : 1.0;
    const double weight = c >= 1 ? 1.0 : c;
    auto integrand = [&](double y) { return alpha * std::exp(-alpha * y) * h(u0 * std::exp(y)); };
    double total = 0.0;
    const double width = 0.5;
    const double y_max = 700.0;
    for (double y = 0.0; y < y_max; y += width) {
        const double piece = gauss<double, 20>::integrate(integrand, y, y + width);
        total += piece;
        if (y > 40.0 / alpha && std::abs(piece) <= 1e-18 * std::abs(total)) break;
    }
    total *= weight;
    if (c < 1) total += (1.0 - c) * gauss<double, 20>::integrate(h, 1.0, 2.0);
    return total;
}

void CombParams::validate() const {
    require(alpha > 0, "comb needs alpha > 0");
    require(beta >= 0, "comb needs beta >= 0");
}

ModelSpec ModelSpec::constant(double c) {
    ModelSpec m;
    m.id = ModelId::constant;
    m.c = c;
    return m;
}

ModelSpec ModelSpec::bouchaud(double gamma, double c) {
    ModelSpec m;
    m.id = ModelId::bouchaud;
    m.gamma = gamma;
    m.c = c;
    return m;
}

ModelSpec ModelSpec::transparent(double alpha, double beta, double c) {
    ModelSpec m;
    m.id = ModelId::transparent;
    m.alpha = alpha;
    m.beta = beta;
    m.c = c;
    return m;
}

ModelSpec ModelSpec::comb(double alpha, double beta) {
    ModelSpec m;
    m.id = ModelId::comb;
    m.alpha = alpha;
    m.beta = beta;
    return m;
}

std::string to_string(ModelId id) {
    switch (id) {
        case ModelId::srw:
            return "srw";
        case ModelId::constant:
            return "constant";
        case ModelId::bouchaud:
            return "bouchaud";
        case ModelId::transparent:
            return "transparent";
        case ModelId::comb:
            return "comb";
    }
    return "?";
}

ModelId parse_model_id(const std::string& s) {
    for (ModelId id : {ModelId::srw, ModelId::constant, ModelId::bouchaud, ModelId::transparent, ModelId::comb})
        if (to_string(id) == s) return id;
    throw std::invalid_argument("unknown model '" + s + "'");
}

std::string ModelSpec::name() const { return to_string(id); }

void ModelSpec::validate() const {
    switch (id) {
        case ModelId::srw:
            break;
        case ModelId::constant:
            require(c > 0, "constant trap needs c > 0");
            break;
        case ModelId::bouchaud:
            require(gamma > 0 && gamma < 1, "Bouchaud model needs gamma in (0,1)");
            require(c > 0, "Bouchaud model needs c > 0");
            break;
        case ModelId::transparent:
            transparent_params().validate();
            break;
        case ModelId::comb:
            CombParams{alpha, beta}.validate();
            break;
    }
}

namespace {

class SrwModel final : public LandscapeModel {
public:
    explicit SrwModel(ModelSpec s) : spec_(s), law_(TrapDistribution::point_mass(s.id == ModelId::srw ? 1.0 : s.c)) {}
    TrapDistribution draw(Stream&) const override { return law_; }
    const ModelSpec& spec() const override { return spec_; }

private:
    ModelSpec spec_;
    TrapDistribution law_;
};

class BouchaudModel final : public LandscapeModel {
public:
    explicit BouchaudModel(ModelSpec s) : spec_(s), u0_(std::pow(s.c, 1.0 / s.gamma)) {}
    TrapDistribution draw(Stream& rng) const override {
        return TrapDistribution::exponential(sample_pareto(spec_.gamma, u0_, rng));
    }
    const ModelSpec& spec() const override { return spec_; }

private:
    ModelSpec spec_;
    double u0_;
};

class TransparentModel final : public LandscapeModel {
public:
    explicit TransparentModel(ModelSpec s) : spec_(s) {}
    TrapDistribution draw(Stream& rng) const override {
        const double tau = spec_.transparent_params().sample_tau(rng);
        return TrapDistribution::transparent(tau, spec_.beta, spec_.analysis_form);
    }
    const ModelSpec& spec() const override { return spec_; }

private:
    ModelSpec spec_;
};

class CombModel final : public LandscapeModel {
public:
    explicit CombModel(ModelSpec s) : spec_(s), teeth_(tooth_length_sampler(s.alpha)) {}
    TrapDistribution draw(Stream& rng) const override {
        return TrapDistribution::comb_visit(teeth_->sample(rng), spec_.beta);
    }
    const ModelSpec& spec() const override { return spec_; }

private:
    ModelSpec spec_;
    std::shared_ptr<const ToothLengthSampler> teeth_;
};

}  // namespace

std::shared_ptr<const LandscapeModel> make_landscape_model(const ModelSpec& spec) {
    spec.validate();
    switch (spec.id) {
        case ModelId::srw:
        case ModelId::constant:
            return std::make_shared<SrwModel>(spec);
        case ModelId::bouchaud:
            return std::make_shared<BouchaudModel>(spec);
        case ModelId::transparent:
            return std::make_shared<TransparentModel>(spec);
        case ModelId::comb:
            return std::make_shared<CombModel>(spec);
    }
    throw std::invalid_argument("unknown model");
}

std::shared_ptr<const LandscapeModel> bouchaud_landscape(double gamma, double c) {
    return make_landscape_model(ModelSpec::bouchaud(gamma, c));
}

std::shared_ptr<const LandscapeModel> transparent_landscape(const TransparentParams& params, bool analysis_form) {
    ModelSpec s = ModelSpec::transparent(params.alpha, params.beta, params.c);
    s.analysis_form = analysis_form;
    return make_landscape_model(s);
}

std::shared_ptr<const LandscapeModel> comb_landscape(const CombParams& params) {
    return make_landscape_model(ModelSpec::comb(params.alpha, params.beta));
}

std::vector<std::int64_t> comb_teeth(double alpha, std::int64_t x_lo, std::int64_t x_hi, std::uint64_t env_seed) {
    require(x_lo <= x_hi, "empty window");
    const auto sampler = tooth_length_sampler(alpha);
    std::vector<std::int64_t> out;
    out.reserve(static_cast<std::size_t>(x_hi - x_lo + 1));
    for (std::int64_t x = x_lo; x <= x_hi; ++x) {
        Stream rng = Stream::derive(env_seed, "site", site_index(x));
        out.push_back(sampler->sample(rng));
    }
    return out;
}

// ---------------------------------------------------------------------------

std::string to_string(PhaseLabel label) {
    switch (label) {
        case PhaseLabel::BM:
            return "BM";
        case PhaseLabel::FK:
            return "FK";
        case PhaseLabel::FIN:
            return "FIN";
        case PhaseLabel::SSBM:
            return "SSBM";
        case PhaseLabel::unclassified:
            return "unclassified";
    }
    return "?";
}

PhaseLabel parse_phase_label(const std::string& s) {
    for (PhaseLabel l : {PhaseLabel::BM, PhaseLabel::FK, PhaseLabel::FIN, PhaseLabel::SSBM, PhaseLabel::unclassified})
        if (to_string(l) == s) return l;
    throw std::invalid_argument("unknown phase label '" + s + "'");
}

double boundary_distance(ModelId model, double alpha, double beta) {
    if (model == ModelId::transparent) return std::abs(alpha + beta - 1.0);
    if (model == ModelId::comb) return std::min(std::abs(alpha - 1.0), std::abs(alpha - 1.0 - 2.0 * beta));
    throw std::invalid_argument("phase diagram only defined for transparent and comb models");
}

PhasePrediction predicted_phase(ModelId model, double alpha, double beta, double margin) {
    require(alpha > 0 && beta >= 0, "phase prediction needs alpha > 0, beta >= 0");
    PhasePrediction out;
    const auto on_band = [&](double dist) { return margin > 0 ? dist < margin : dist == 0.0; };
    if (model == ModelId::transparent) {
        if (on_band(std::abs(alpha + beta - 1.0))) {
            out.note = "alpha + beta = 1: logarithmic corrections, not classified";
            return out;
        }
        if (alpha + beta > 1.0) {
            out.label = PhaseLabel::BM;
            out.schedule_power = 2.0;
            out.note = "q(eps) = eps^2 / E[m(pi)]";
            return out;
        }
        if (alpha == beta) {
            out.label = PhaseLabel::SSBM;
            out.exponent = alpha / (1.0 - beta);
            out.schedule_power = 1.0 / alpha;
            out.note = "Poissonian SSBM";
            return out;
        }
        if (on_band(std::abs(alpha - beta))) {
            out.note = "within margin of the alpha = beta line";
            return out;
        }
        if (alpha > beta) {
            out.label = PhaseLabel::FIN;
            out.exponent = alpha / (1.0 - beta);
            out.schedule_power = 1.0 + 1.0 / out.exponent;
        } else {
            out.label = PhaseLabel::FK;
            out.exponent = alpha + beta;
            out.schedule_power = 2.0 / out.exponent;
        }
        return out;
    }
    if (model == ModelId::comb) {
        if (on_band(std::abs(alpha - 1.0))) {
            out.note = "alpha = 1: not classified";
            return out;
        }
        if (alpha < 1.0) {
            out.label = PhaseLabel::FK;
            out.exponent = (1.0 + alpha) / (2.0 * (1.0 + beta));
            out.schedule_power = 2.0 / out.exponent;
            out.slowly_varying = true;
            return out;
        }
        if (on_band(std::abs(alpha - 1.0 - 2.0 * beta))) {
            out.note = "alpha = 1 + 2 beta: logarithmic corrections, not classified";
            return out;
        }
        if (1.0 + 2.0 * beta < alpha) {
            out.label = PhaseLabel::BM;
            out.schedule_power = 2.0;
            out.note = "q(eps) = eps^2 / E[m(pi)]";
            return out;
        }
        out.label = PhaseLabel::FIN;
        out.exponent = alpha / (1.0 + 2.0 * beta);
        out.schedule_power = 1.0 + 1.0 / out.exponent;
        out.slowly_varying = beta > 0;
        return out;
    }
    throw std::invalid_argument("phase diagram only defined for transparent and comb models");
}

}  // namespace rtrw
