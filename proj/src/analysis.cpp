#include "rtrw/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>

#include "rtrw/walk.hpp"

namespace rtrw {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

using boost::math::quadrature::gauss;

// E[h(tau)] for tau Pareto(alpha) above u0, in y = log(tau/u0).
double pareto_expect(double alpha, double u0, const std::function<double(double)>& h) {
    auto integrand = [&](double y) { return alpha * std::exp(-alpha * y) * h(u0 * std::exp(y)); };
    double total = 0.0;
    for (double y = 0.0; y < 700.0; y += 0.5) {
        const double piece = gauss<double, 20>::integrate(integrand, y, y + 0.5);
        total += piece;
        if (y > 40.0 / alpha && std::abs(piece) <= 1e-18 * std::abs(total)) break;
    }
    return total;
}

// Sum over tooth lengths against P(N = n), with f evaluated at real n. Exact
// sum up to kCombExact, then the integral of the continuous density over
// [kCombExact + 1/2, inf).
constexpr std::int64_t kCombExact = 20000;

double comb_expect(double alpha, const std::function<double(double)>& f) {
    const auto sampler = tooth_length_sampler(alpha);
    double head = 0.0;
    CompensatedSum sum;
    for (std::int64_t n = 1; n <= kCombExact; ++n) sum.add(sampler->pmf(n) * f(static_cast<double>(n)));
    head = sum.value();
    const double n0 = static_cast<double>(kCombExact) + 0.5;
    const double pref = std::pow(n0, -alpha) / sampler->zeta();
    auto integrand = [&](double y) { return std::exp(-alpha * y) * f(n0 * std::exp(y)); };
    double tail = 0.0;
    int small = 0;
    for (double y = 0.0; y < 680.0; y += 0.5) {
        const double piece = gauss<double, 20>::integrate(integrand, y, y + 0.5);
        if (!std::isfinite(piece)) return std::numeric_limits<double>::infinity();
        tail += piece;
        small = std::abs(piece) <= 1e-18 * std::abs(tail) ? small + 1 : 0;
        if (small >= 8) break;
    }
    return head + pref * tail;
}

// 1 - hat pi for a comb visit, from 1 - hat theta.
double comb_visit_one_minus(double one_minus_theta, double lambda) {
    const double e = std::exp(-lambda);
    const double ome = -std::expm1(-lambda);
    return (3.0 * ome + e * one_minus_theta) / (2.0 + ome + e * one_minus_theta);
}

double comb_visit_mean(double n, double beta) { return (3.0 + comb_tooth_mean(n, beta)) / 2.0; }

// Site mean as a function of tau for transparent traps.
double transparent_mean(const ModelSpec& s, double tau) {
    const double p = std::pow(tau, -s.beta);
    return (s.analysis_form ? 0.0 : 1.0 - p) + p * tau;
}

// Solves survival(x) = u for decreasing survival on [lo, inf) by bisection in log x.
double invert_decreasing(const std::function<double(double)>& surv, double lo, double u) {
    double hi = lo * 2.0;
    while (surv(hi) > u) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) throw std::domain_error("survival level too small to invert");
    }
    for (int it = 0; it < 300; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (mid <= lo || mid >= hi) break;
        (surv(mid) > u ? lo : hi) = mid;
    }
    return hi;
}

double increasing_inverse(const std::function<double(double)>& f, double lo, double target) {
    if (f(lo) >= target) return lo;
    double hi = lo * 2.0;
    while (f(hi) < target) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) throw std::domain_error("value out of range");
    }
    for (int it = 0; it < 300; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (mid <= lo || mid >= hi) break;
        (f(mid) < target ? lo : hi) = mid;
    }
    return hi;
}

bool heavy_tailed(const ModelSpec& s) {
    switch (s.id) {
        case ModelId::bouchaud: return true;
        case ModelId::transparent: return s.alpha + s.beta < 1.0;
        case ModelId::comb: return s.alpha < 1.0 + 2.0 * s.beta;
        default: return false;
    }
}

double quantile(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double f = pos - static_cast<double>(i);
    return i + 1 < v.size() ? v[i] * (1 - f) + v[i + 1] * f : v[i];
}

double hill(std::vector<double>& x, std::size_t k) {
    std::nth_element(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(k), x.end(), std::greater<>());
    const double ref = x[k];
    if (!(ref > 0)) return NAN;
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += std::log(x[i] / ref);
    return s > 0 ? static_cast<double>(k) / s : INFINITY;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

TestReport make_report(std::string stat, double value, double threshold, std::string cmp, double target = 0.0) {
    TestReport r;
    r.statistic = std::move(stat);
    r.value = value;
    r.threshold = threshold;
    r.comparison = std::move(cmp);
    r.target = target;
    return r;
}

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j);
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::pass: return "pass";
        case Verdict::fail: return "fail";
        default: return "inconclusive";
    }
}

TestReport& TestReport::decide() {
    bool ok = false;
    if (comparison == "<") ok = value < threshold;
    else if (comparison == "<=") ok = value <= threshold;
    else if (comparison == ">") ok = value > threshold;
    else if (comparison == ">=") ok = value >= threshold;
    else if (comparison == "in") ok = std::abs(value - target) <= threshold;
    else throw std::invalid_argument("unknown comparison " + comparison);
    if (std::isnan(value)) verdict = Verdict::inconclusive;
    else verdict = ok ? Verdict::pass : Verdict::fail;
    return *this;
}

nlohmann::json TestReport::to_json() const {
    auto num = [](double x) -> nlohmann::json {
        if (std::isfinite(x)) return x;
        if (std::isnan(x)) return nullptr;
        return x > 0 ? "inf" : "-inf";
    };
    nlohmann::json j{{"statistic", statistic},
                     {"value", num(value)},
                     {"threshold", num(threshold)},
                     {"comparison", comparison},
                     {"verdict", to_string(verdict)},
                     {"sample_sizes", sample_sizes},
                     {"seeds", seeds}};
    if (comparison == "in") j["target"] = num(target);
    if (!note.empty()) j["note"] = note;
    return j;
}

TestReport TestReport::from_json(const nlohmann::json& j) {
    auto num = [](const nlohmann::json& x) -> double {
        if (x.is_null()) return std::numeric_limits<double>::quiet_NaN();
        if (x.is_string()) return x.get<std::string>() == "inf" ? INFINITY : -INFINITY;
        return x.get<double>();
    };
    TestReport r;
    r.statistic = j.at("statistic").get<std::string>();
    r.value = num(j.at("value"));
    r.threshold = num(j.at("threshold"));
    r.comparison = j.at("comparison").get<std::string>();
    if (j.contains("target")) r.target = num(j.at("target"));
    r.sample_sizes = j.at("sample_sizes").get<std::vector<std::size_t>>();
    r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("note")) r.note = j.at("note").get<std::string>();
    const auto v = j.at("verdict").get<std::string>();
    r.verdict = v == "pass" ? Verdict::pass : v == "fail" ? Verdict::fail : Verdict::inconclusive;
    return r;
}

// ---------------------------------------------------------------------------

double landscape_expectation(const ModelSpec& spec, const std::function<double(const TrapDistribution&)>& h) {
    spec.validate();
    switch (spec.id) {
        case ModelId::srw: return h(TrapDistribution::point_mass(1.0));
        case ModelId::constant: return h(TrapDistribution::point_mass(spec.c));
        case ModelId::bouchaud:
            return pareto_expect(spec.gamma, std::pow(spec.c, 1.0 / spec.gamma),
                                 [&](double tau) { return h(TrapDistribution::exponential(tau)); });
        case ModelId::transparent:
            return spec.transparent_params().expect(
                [&](double tau) { return h(TrapDistribution::transparent(tau, spec.beta, spec.analysis_form)); });
        case ModelId::comb:
            return comb_expect(spec.alpha, [&](double n) {
                const double r = std::round(n);
                return h(TrapDistribution::comb_visit(r > 4.6e18 ? kMaxToothLength : static_cast<std::int64_t>(r),
                                                      spec.beta));
            });
    }
    throw std::logic_error("unknown model");
}

double gamma_analytic(const ModelSpec& spec, double eps) {
    require(eps >= 0, "Gamma needs eps >= 0");
    if (eps == 0) return 0.0;
    if (spec.id == ModelId::comb) {
        spec.validate();
        return comb_expect(spec.alpha, [&](double n) {
            return comb_visit_one_minus(comb_tooth_laplace_one_minus(n, spec.beta, eps), eps);
        });
    }
    return landscape_expectation(spec, [&](const TrapDistribution& d) { return d.one_minus_laplace(eps); });
}

Estimate gamma_of_epsilon(const ModelSpec& spec, double eps, GammaMode mode, std::size_t n_mc, std::uint64_t seed) {
    if (mode == GammaMode::analytic) return {gamma_analytic(spec, eps), 0.0};
    require(n_mc >= 2, "Monte Carlo Gamma needs at least two landscapes");
    require(eps >= 0, "Gamma needs eps >= 0");
    const auto model = make_landscape_model(spec);
    Stream rng = Stream::derive(seed, "gamma-mc");
    double mean = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < n_mc; ++i) {
        const double x = model->draw(rng).one_minus_laplace(eps);
        const double d = x - mean;
        mean += d / static_cast<double>(i + 1);
        m2 += d * (x - mean);
    }
    const double n = static_cast<double>(n_mc);
    return {mean, std::sqrt(m2 / (n - 1) / n)};
}

double gamma_max(const ModelSpec& spec) { return gamma_analytic(spec, 1e300); }

double q_fk(const ModelSpec& spec, double eps) {
    require(eps > 0, "q_FK needs eps > 0");
    const double target = eps * eps;
    const double gmax = gamma_max(spec);
    if (!(target < gmax)) {
        std::ostringstream os;
        os << "eps^2 = " << target << " is not below Gamma_max = " << gmax;
        throw std::domain_error(os.str());
    }
    // Bracket by factors of 4, then bisect in log q down to adjacent doubles.
    double lo = 1.0, hi = 1.0;
    if (gamma_analytic(spec, 1.0) < target) {
        while (gamma_analytic(spec, hi) < target) hi *= 4.0;
        lo = hi / 4.0;
    } else {
        while (gamma_analytic(spec, lo) >= target) lo /= 4.0;
        hi = lo * 4.0;
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (mid <= lo || mid >= hi) break;
        (gamma_analytic(spec, mid) < target ? lo : hi) = mid;
    }
    const double glo = gamma_analytic(spec, lo), ghi = gamma_analytic(spec, hi);
    return std::abs(glo - target) <= std::abs(ghi - target) ? lo : hi;
}

double mean_trap_mean(const ModelSpec& spec) {
    switch (spec.id) {
        case ModelId::srw: return 1.0;
        case ModelId::constant: return spec.c;
        case ModelId::bouchaud: return INFINITY;
        case ModelId::transparent:
            if (spec.alpha + spec.beta <= 1.0) return INFINITY;
            return spec.transparent_params().expect([&](double tau) { return transparent_mean(spec, tau); });
        case ModelId::comb:
            if (spec.alpha <= 1.0 + 2.0 * spec.beta) return INFINITY;
            return comb_expect(spec.alpha, [&](double n) { return comb_visit_mean(n, spec.beta); });
    }
    throw std::logic_error("unknown model");
}

double mean_survival(const ModelSpec& spec, double u) {
    switch (spec.id) {
        case ModelId::srw: return u < 1.0 ? 1.0 : 0.0;
        case ModelId::constant: return u < spec.c ? 1.0 : 0.0;
        case ModelId::bouchaud: {
            const double u0 = std::pow(spec.c, 1.0 / spec.gamma);
            return u <= u0 ? 1.0 : std::pow(u / u0, -spec.gamma);
        }
        case ModelId::transparent: {
            const auto tp = spec.transparent_params();
            const double tau = increasing_inverse([&](double t) { return transparent_mean(spec, t); }, 1.0, u);
            return tp.survival(tau);
        }
        case ModelId::comb: {
            // Continuous extension in n; exact at the attained values.
            const double n = increasing_inverse([&](double x) { return comb_visit_mean(x, spec.beta); }, 1.0, u);
            return tooth_length_sampler(spec.alpha)->survival(n);
        }
    }
    throw std::logic_error("unknown model");
}

double d_of_epsilon(const ModelSpec& spec, double eps) {
    require(eps > 0 && eps < 1, "d(eps) needs eps in (0,1)");
    require(heavy_tailed(spec), "d(eps) needs a heavy-tailed model; the mean trap time is finite");
    switch (spec.id) {
        case ModelId::bouchaud: return std::pow(spec.c, 1.0 / spec.gamma) * std::pow(eps, -1.0 / spec.gamma);
        case ModelId::transparent: {
            const auto tp = spec.transparent_params();
            const double tau = invert_decreasing([&](double t) { return tp.survival(t); }, 1.0, eps);
            return transparent_mean(spec, tau);
        }
        case ModelId::comb: {
            const double n = tooth_length_sampler(spec.alpha)->survival_inverse(eps);
            return comb_visit_mean(n, spec.beta);
        }
        default: break;
    }
    throw std::logic_error("unreachable");
}

double q_of_epsilon(const ModelSpec& spec, double eps, const PhasePrediction& phase) {
    switch (phase.label) {
        case PhaseLabel::BM: {
            const double m = mean_trap_mean(spec);
            require(std::isfinite(m), "BM schedule needs a finite mean trap time");
            return eps * eps / m;
        }
        case PhaseLabel::FIN:
        case PhaseLabel::SSBM: return eps / d_of_epsilon(spec, eps);
        case PhaseLabel::FK: return q_fk(spec, eps);
        default: throw std::domain_error("no schedule for an unclassified point");
    }
}

double q_of_epsilon(const ModelSpec& spec, double eps) {
    if (spec.id == ModelId::srw || spec.id == ModelId::constant) return eps * eps / mean_trap_mean(spec);
    if (spec.id == ModelId::bouchaud) {
        PhasePrediction fin;
        fin.label = PhaseLabel::FIN;
        return q_of_epsilon(spec, eps, fin);
    }
    return q_of_epsilon(spec, eps, predicted_phase(spec.id, spec.alpha, spec.beta));
}

std::vector<TrapDistribution> conditioned_laws(const ModelSpec& spec, double a, double delta) {
    require(a > 0, "conditioning level must be positive");
    switch (spec.id) {
        case ModelId::srw:
        case ModelId::constant: {
            const double c = spec.id == ModelId::srw ? 1.0 : spec.c;
            if (std::abs(c - a) <= delta * a) return {TrapDistribution::point_mass(c)};
            return {};
        }
        case ModelId::bouchaud: {
            if (a < std::pow(spec.c, 1.0 / spec.gamma)) return {};
            return {TrapDistribution::exponential(a)};
        }
        case ModelId::transparent: {
            const double tau = increasing_inverse([&](double t) { return transparent_mean(spec, t); }, 1.0, a);
            const double support_lo = spec.c >= 1 ? std::pow(spec.c, 1.0 / spec.alpha) : 1.0;
            if (tau < support_lo) return {};
            return {TrapDistribution::transparent(tau, spec.beta, spec.analysis_form)};
        }
        case ModelId::comb: {
            // Tooth lengths whose visit mean falls in a (1 +- delta); at most 64 of them, evenly spaced.
            const double lo = increasing_inverse([&](double x) { return comb_visit_mean(x, spec.beta); }, 1.0,
                                                 a * (1.0 - delta));
            const double hi = increasing_inverse([&](double x) { return comb_visit_mean(x, spec.beta); }, 1.0,
                                                 a * (1.0 + delta));
            const auto n_lo = static_cast<std::int64_t>(std::ceil(lo));
            const auto n_hi = static_cast<std::int64_t>(std::floor(std::min(hi, 4.6e18)));
            std::vector<TrapDistribution> out;
            if (n_hi < n_lo) return out;
            const std::int64_t count = n_hi - n_lo + 1;
            const std::int64_t take = std::min<std::int64_t>(count, 64);
            for (std::int64_t i = 0; i < take; ++i) {
                const std::int64_t n = take == 1 ? n_lo : n_lo + (count - 1) * i / (take - 1);
                out.push_back(TrapDistribution::comb_visit(n, spec.beta));
            }
            return out;
        }
    }
    throw std::logic_error("unknown model");
}

std::vector<double> mean_samples(const ModelSpec& spec, std::size_t n, Stream& rng) {
    std::vector<double> out(n);
    if (spec.id == ModelId::comb) {
        // The visit mean is a function of the tooth length alone.
        const auto sampler = tooth_length_sampler(spec.alpha);
        for (auto& x : out) x = comb_visit_mean(static_cast<double>(sampler->sample(rng)), spec.beta);
        return out;
    }
    if (spec.id == ModelId::transparent) {
        const auto tp = spec.transparent_params();
        for (auto& x : out) x = transparent_mean(spec, tp.sample_tau(rng));
        return out;
    }
    const auto model = make_landscape_model(spec);
    for (auto& x : out) x = model->draw(rng).mean();
    return out;
}

// ---------------------------------------------------------------------------

TailEstimate check_ht(std::vector<double> samples, Stream& rng, std::size_t n_boot, double level) {
    require(samples.size() >= 100, "tail estimation needs at least 100 samples");
    TailEstimate out;
    const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
    if (*mn == *mx) throw std::invalid_argument("degenerate sample: all values equal");
    const std::size_t n = samples.size();
    out.k = std::max<std::size_t>(10, static_cast<std::size_t>(std::pow(static_cast<double>(n), 2.0 / 3.0)));
    out.k = std::min(out.k, n - 1);
    for (std::size_t kk : {out.k / 4, out.k / 2, out.k}) {
        auto copy = samples;
        out.gamma_at_k.push_back(hill(copy, std::max<std::size_t>(kk, 2)));
    }
    out.gamma = out.gamma_at_k.back();
    std::vector<double> boot;
    boot.reserve(n_boot);
    std::vector<double> re(n);
    for (std::size_t b = 0; b < n_boot; ++b) {
        for (auto& x : re) x = samples[static_cast<std::size_t>(rng.uniform() * static_cast<double>(n))];
        const double g = hill(re, out.k);
        if (std::isfinite(g)) boot.push_back(g);
    }
    if (!boot.empty()) {
        out.ci_lo = quantile(boot, (1 - level) / 2);
        out.ci_hi = quantile(boot, 1 - (1 - level) / 2);
    }
    out.heavy_tail = out.gamma < 1.0 && out.ci_hi < 1.0;
    std::ostringstream os;
    os << "Hill estimates at k/4, k/2, k: " << out.gamma_at_k[0] << ", " << out.gamma_at_k[1] << ", "
       << out.gamma_at_k[2];
    const double spread = std::abs(out.gamma_at_k[0] - out.gamma_at_k[2]) / out.gamma;
    if (!out.heavy_tail) os << "; no heavy tail with index below 1";
    else if (spread > 0.2) os << "; estimates drift with k (slowly varying correction)";
    out.diagnostic = os.str();
    return out;
}

namespace {

// The checkers work with transparent traps whose idle atom sits at 0.
ModelSpec for_analysis(ModelSpec s) {
    if (s.id == ModelId::transparent) s.analysis_form = true;
    return s;
}

}  // namespace

LCheck check_L(const ModelSpec& spec_in, const std::vector<double>& eps, const std::vector<double>& lambda) {
    const ModelSpec spec = for_analysis(spec_in);
    require(!eps.empty() && !lambda.empty(), "check_L needs eps and lambda grids");
    LCheck out;
    out.eps = eps;
    out.lambda = lambda;
    for (double e : eps) {
        const double d = d_of_epsilon(spec, e);
        const double q = e / d;
        const auto laws = conditioned_laws(spec, d);
        if (laws.empty()) throw std::runtime_error("conditioning window is empty");
        std::vector<double> row(lambda.size(), 0.0);
        for (std::size_t j = 0; j < lambda.size(); ++j) {
            double s = 0.0;
            for (const auto& law : laws) s += psi_epsilon(law, e, q, lambda[j]);
            row[j] = s / static_cast<double>(laws.size());
        }
        double lin = 0, poi = 0, sup = 0;
        for (std::size_t j = 0; j < lambda.size(); ++j) {
            lin = std::max(lin, std::abs(row[j] - lambda[j]));
            poi = std::max(poi, std::abs(row[j] + std::expm1(-lambda[j])));
            sup = std::max(sup, std::abs(row[j]));
        }
        if (!out.psi.empty()) {
            double step = 0;
            for (std::size_t j = 0; j < lambda.size(); ++j) step = std::max(step, std::abs(row[j] - out.psi.back()[j]));
            out.sup_step.push_back(step);
        }
        out.sup_to_linear.push_back(lin);
        out.sup_to_poisson.push_back(poi);
        out.sup_norm.push_back(sup);
        out.n_laws.push_back(laws.size());
        out.psi.push_back(std::move(row));
    }
    // Limit read off the smallest eps.
    const double lam_max = *std::max_element(lambda.begin(), lambda.end());
    const double tol = 0.05 * std::max(1.0, lam_max) / 5.0;
    const double last_lin = out.sup_to_linear.back(), last_poi = out.sup_to_poisson.back();
    const double last_sup = out.sup_norm.back();
    const bool shrinking_to_zero = out.sup_norm.size() < 2 || out.sup_norm.back() < out.sup_norm.front();
    if (last_lin < tol) out.limit = "lambda";
    else if (last_poi < tol) out.limit = "1-exp(-lambda)";
    else if (last_sup < tol || (shrinking_to_zero && last_sup < 0.5)) out.limit = "0";
    else out.limit = "undetermined";
    out.nontrivial = out.limit == "lambda" || out.limit == "1-exp(-lambda)";
    out.verdict = out.nontrivial ? Verdict::pass : out.limit == "0" ? Verdict::fail : Verdict::inconclusive;
    return out;
}

namespace {

DecayCheck finish_decay(DecayCheck out) {
    std::vector<double> lx, ly;
    out.monotone = true;
    for (std::size_t i = 0; i < out.eps.size(); ++i) {
        if (out.values[i] > 0 && std::isfinite(out.values[i])) {
            lx.push_back(std::log(out.eps[i]));
            ly.push_back(std::log(out.values[i]));
        }
    }
    // Order by decreasing eps; the value must shrink along the list.
    std::vector<std::size_t> idx(out.eps.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return out.eps[a] > out.eps[b]; });
    for (std::size_t i = 1; i < idx.size(); ++i)
        if (!(out.values[idx[i]] < out.values[idx[i - 1]])) out.monotone = false;
    if (lx.size() >= 2) out.log_slope = slope(lx, ly);
    if (lx.size() < 2) out.verdict = Verdict::inconclusive;
    else if (out.monotone && out.log_slope > 0.02) out.verdict = Verdict::pass;
    else if (out.log_slope < 0.0) out.verdict = Verdict::fail;
    else out.verdict = Verdict::inconclusive;
    return out;
}

}  // namespace

DecayCheck check_fin_condition(const ModelSpec& spec_in, const std::vector<double>& eps) {
    const ModelSpec spec = for_analysis(spec_in);
    DecayCheck out;
    out.eps = eps;
    if (!heavy_tailed(spec)) {
        out.note = "HT fails first: the mean trap time is finite, d(eps) is undefined";
        out.values.assign(eps.size(), NAN);
        out.verdict = Verdict::inconclusive;
        return out;
    }
    for (double e : eps) {
        const double d = d_of_epsilon(spec, e);
        const auto laws = conditioned_laws(spec, d);
        if (laws.empty()) throw std::runtime_error("conditioning window is empty");
        double m2 = 0;
        for (const auto& law : laws) m2 += law.second_moment();
        m2 /= static_cast<double>(laws.size());
        out.values.push_back(e * m2 / (d * d));
    }
    return finish_decay(std::move(out));
}

DecayCheck check_fk_second_moment(const ModelSpec& spec_in, const std::vector<double>& eps) {
    const ModelSpec spec = for_analysis(spec_in);
    DecayCheck out;
    out.eps = eps;
    for (double e : eps) {
        const double q = q_fk(spec, e);
        double m;
        if (spec.id == ModelId::comb) {
            m = comb_expect(spec.alpha, [&](double n) {
                const double x = comb_visit_one_minus(comb_tooth_laplace_one_minus(n, spec.beta, q), q);
                return x * x;
            });
        } else {
            m = landscape_expectation(spec, [&](const TrapDistribution& d) {
                const double x = d.one_minus_laplace(q);
                return x * x;
            });
        }
        out.values.push_back(m / (e * e * e));
    }
    return finish_decay(std::move(out));
}

// ---------------------------------------------------------------------------

double kolmogorov_survival(double x) {
    if (x <= 0) return 1.0;
    if (x < 0.3) {
        // Small-x form of the CDF.
        const double pi = 3.14159265358979323846;
        double s = 0;
        for (int k = 1; k <= 5; ++k) {
            const double a = (2.0 * k - 1.0) * pi;
            s += std::exp(-a * a / (8.0 * x * x));
        }
        return 1.0 - std::sqrt(2.0 * pi) / x * s;
    }
    double s = 0, sign = 1;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        s += sign * term;
        sign = -sign;
        if (term < 1e-18) break;
    }
    return std::clamp(2.0 * s, 0.0, 1.0);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    require(!a.empty() && !b.empty(), "KS needs nonempty samples");
    for (double x : a) require(!std::isnan(x), "KS sample contains NaN");
    for (double x : b) require(!std::isnan(x), "KS sample contains NaN");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    KsResult r;
    r.n1 = a.size();
    r.n2 = b.size();
    const double n1 = static_cast<double>(a.size()), n2 = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / n1 - static_cast<double>(j) / n2));
    }
    r.statistic = d;
    const double en = std::sqrt(n1 * n2 / (n1 + n2));
    r.p_value = kolmogorov_survival((en + 0.12 + 0.11 / en) * d);
    return r;
}

MsdFit msd_exponent(const std::vector<std::vector<double>>& positions, const std::vector<double>& times, Stream& rng,
                    std::size_t n_boot, double level) {
    require(times.size() >= 2, "MSD fit needs at least two times");
    require(positions.size() >= 2, "MSD fit needs at least two replicas");
    for (double t : times) require(t > 0, "MSD fit needs positive times");
    const std::size_t R = positions.size(), K = times.size();
    std::vector<double> lt(K);
    for (std::size_t k = 0; k < K; ++k) lt[k] = std::log(times[k]);
    auto fit = [&](const std::vector<std::size_t>* pick, std::vector<double>* msd_out) {
        std::vector<double> msd(K, 0.0);
        for (std::size_t r = 0; r < R; ++r) {
            const auto& row = positions[pick ? (*pick)[r] : r];
            for (std::size_t k = 0; k < K; ++k) msd[k] += row[k] * row[k];
        }
        std::vector<double> lm(K);
        for (std::size_t k = 0; k < K; ++k) {
            msd[k] /= static_cast<double>(R);
            lm[k] = std::log(msd[k]);
        }
        if (msd_out) *msd_out = msd;
        return 0.5 * slope(lt, lm);
    };
    MsdFit out;
    out.nu = fit(nullptr, &out.msd);
    if (!std::isfinite(out.nu)) throw std::invalid_argument("degenerate trajectories: zero mean-square displacement");
    std::vector<double> boot;
    std::vector<std::size_t> pick(R);
    for (std::size_t b = 0; b < n_boot; ++b) {
        for (auto& p : pick) p = static_cast<std::size_t>(rng.uniform() * static_cast<double>(R));
        const double v = fit(&pick, nullptr);
        if (std::isfinite(v)) boot.push_back(v);
    }
    if (!boot.empty()) {
        out.ci_lo = quantile(boot, (1 - level) / 2);
        out.ci_hi = quantile(boot, 1 - (1 - level) / 2);
    }
    return out;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    require(a.size() == b.size() && a.size() >= 2, "correlation needs paired samples");
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0 || sbb == 0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

// ---------------------------------------------------------------------------

nlohmann::json Classification::to_json() const {
    auto num = [](double x) -> nlohmann::json { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); };
    nlohmann::json reps = nlohmann::json::array();
    for (const auto& r : reports) reps.push_back(r.to_json());
    return {{"predicted", to_string(predicted.label)},
            {"predicted_exponent", num(predicted.exponent)},
            {"schedule_power", num(predicted.schedule_power)},
            {"empirical", to_string(empirical)},
            {"verdict", to_string(verdict)},
            {"confident", confident},
            {"q", num(q)},
            {"nu_hat", num(msd.nu)},
            {"nu_ci", {num(msd.ci_lo), num(msd.ci_hi)}},
            {"ks_statistic", num(ks.statistic)},
            {"ks_p", num(ks.p_value)},
            {"env_correlation", num(env_correlation)},
            {"env_threshold", num(env_threshold)},
            {"exhausted", exhausted},
            {"reports", reps},
            {"note", note}};
}

std::vector<double> limit_marginal(const PhasePrediction& phase, double t, std::size_t n, std::uint64_t seed,
                                   const LimitOptions& base) {
    std::vector<double> out(n);
    LimitOptions opts = base;
    opts.grid = 1;
    for (std::size_t i = 0; i < n; ++i) {
        Stream rng = Stream::derive(seed, "limit", i);
        switch (phase.label) {
            case PhaseLabel::BM: out[i] = std::sqrt(t) * rng.child("bm").normal(); break;
            case PhaseLabel::FK: out[i] = sample_fk(phase.exponent, t, rng, opts).trajectory.positions.back(); break;
            case PhaseLabel::FIN:
                out[i] = sample_fin(phase.exponent, 0.0, t, rng, opts).trajectory.positions.back();
                break;
            case PhaseLabel::SSBM: {
                const double g = phase.exponent;
                const auto F = AtomIntensity::poissonian(g, default_v_min(g, t, opts.v_min_rel));
                out[i] = sample_ssbm(F, t, rng, opts).trajectory.positions.back();
                break;
            }
            default: throw std::domain_error("no limit process for an unclassified point");
        }
    }
    return out;
}

Classification classify_limit(const ModelSpec& spec, const ClassifyOptions& opts) {
    spec.validate();
    Classification out;
    out.predicted = predicted_phase(spec.id, spec.alpha, spec.beta);
    if (out.predicted.label == PhaseLabel::unclassified) {
        out.note = "inconclusive: " + out.predicted.note;
        return out;
    }
    require(opts.replicas >= 100, "classification needs at least 100 replicas");
    require(opts.eps > 0 && opts.eps < 1, "classification needs eps in (0,1)");
    const auto unit = std::find(opts.times.begin(), opts.times.end(), 1.0);
    require(unit != opts.times.end(), "time grid must contain t = 1");
    const std::size_t k1 = static_cast<std::size_t>(unit - opts.times.begin());

    out.q = q_of_epsilon(spec, opts.eps, out.predicted);
    std::vector<double> real(opts.times.size());
    for (std::size_t k = 0; k < real.size(); ++k) real[k] = opts.times[k] / out.q;
    std::vector<double> sorted = real;
    std::sort(sorted.begin(), sorted.end());
    require(sorted == real, "time grid must be sorted");

    const auto model = make_landscape_model(spec);
    std::vector<std::vector<double>> pos(opts.replicas);
    std::vector<double> x1(opts.replicas);
    std::vector<double> pair_a, pair_b;
    for (std::size_t r = 0; r < opts.replicas; ++r) {
        const std::uint64_t env_seed = Stream::derive(opts.seed, "env", r).seed();
        Landscape land(model, env_seed);
        Stream walk = Stream::derive(opts.seed, "walk", r);
        const auto obs = observe_rtrw(land, real, walk, opts.max_steps);
        if (obs.exhausted) ++out.exhausted;
        pos[r].resize(real.size());
        for (std::size_t k = 0; k < real.size(); ++k) pos[r][k] = opts.eps * obs.positions[k];
        x1[r] = pos[r][k1];
        if (r < opts.env_pairs) {
            // A second walker in the same landscape.
            Stream other = Stream::derive(opts.seed, "walk-pair", r);
            const auto o2 = observe_rtrw(land, {real[k1]}, other, opts.max_steps);
            if (o2.exhausted) ++out.exhausted;
            pair_a.push_back(std::abs(x1[r]));
            pair_b.push_back(std::abs(opts.eps * o2.positions[0]));
        }
    }

    Stream stats = Stream::derive(opts.seed, "stats");
    out.msd = msd_exponent(pos, opts.times, stats);
    const auto limit = limit_marginal(out.predicted, 1.0, opts.limit_samples, Stream::derive(opts.seed, "lim").seed(),
                                      opts.limit);
    out.ks = ks_two_sample(x1, limit);
    if (pair_a.size() >= 10) {
        out.env_correlation = pearson(ranks(pair_a), ranks(pair_b));
        out.env_threshold = 3.0 / std::sqrt(static_cast<double>(pair_a.size()));
    }

    const double nu_pred = out.predicted.nu();
    const double half_ci = 0.5 * (out.msd.ci_hi - out.msd.ci_lo);
    const double nu_dev = std::abs(out.msd.nu - nu_pred);
    const bool nu_ok = nu_dev <= opts.nu_tolerance + half_ci;
    const bool nu_far = nu_dev > 3.0 * opts.nu_tolerance + 2.0 * half_ci;
    const bool ks_ok = out.ks.p_value > opts.ks_level;
    const bool ks_far = out.ks.p_value < 1e-8;
    const bool quenched_effect = pair_a.size() >= 10 && out.env_correlation > out.env_threshold;
    const bool wants_env = out.predicted.label == PhaseLabel::FIN || out.predicted.label == PhaseLabel::SSBM;
    const bool env_ok = pair_a.size() < 10 || wants_env == quenched_effect;

    TestReport nu_rep = make_report("nu_hat", out.msd.nu, opts.nu_tolerance + half_ci, "in", nu_pred);
    nu_rep.sample_sizes = {opts.replicas};
    nu_rep.seeds = {opts.seed};
    out.reports.push_back(nu_rep.decide());
    TestReport ks_rep = make_report("ks_p_vs_limit", out.ks.p_value, opts.ks_level, ">");
    ks_rep.sample_sizes = {opts.replicas, opts.limit_samples};
    ks_rep.seeds = {opts.seed};
    out.reports.push_back(ks_rep.decide());
    TestReport env_rep = make_report("env_rank_correlation", out.env_correlation, out.env_threshold, wants_env ? ">" : "<=");
    env_rep.sample_sizes = {pair_a.size()};
    env_rep.seeds = {opts.seed};
    env_rep.note = wants_env ? "quenched trapping expected" : "landscape-independent limit expected";
    out.reports.push_back(env_rep.decide());
    if (out.exhausted > 0) {
        TestReport ex = make_report("exhausted_walks", static_cast<double>(out.exhausted), 0.0, "<=");
        ex.sample_sizes = {opts.replicas};
        out.reports.push_back(ex.decide());
    }

    std::ostringstream note;
    if (nu_ok && ks_ok && env_ok && out.exhausted == 0) {
        out.verdict = Verdict::pass;
        out.empirical = out.predicted.label;
    } else if (nu_far && ks_far && out.exhausted == 0) {
        out.verdict = Verdict::fail;
        out.confident = true;
        note << "displacement exponent and marginal both contradict the prediction";
    } else {
        out.verdict = Verdict::inconclusive;
        note << "inconclusive:";
        if (!nu_ok) note << " nu_hat off by " << nu_dev << ";";
        if (!ks_ok) note << " KS p = " << out.ks.p_value << ";";
        if (!env_ok) note << " environment correlation " << out.env_correlation << ";";
        if (out.exhausted) note << " " << out.exhausted << " walks hit the step budget;";
    }
    if (out.verdict != Verdict::pass) {
        // Best empirical guess from the exponent and the quenched signal.
        if (std::abs(out.msd.nu - 0.5) <= opts.nu_tolerance + half_ci && !quenched_effect)
            out.empirical = PhaseLabel::BM;
        else if (out.msd.nu < 0.5)
            out.empirical = quenched_effect ? (out.predicted.label == PhaseLabel::SSBM ? PhaseLabel::SSBM
                                                                                       : PhaseLabel::FIN)
                                            : PhaseLabel::FK;
    }
    out.note = note.str();
    return out;
}

EpsilonChoice scan_epsilon(const ModelSpec& spec, std::vector<double> ladder, double draw_budget,
                           std::size_t pilots, std::uint64_t seed, double t_max) {
    spec.validate();
    require(!ladder.empty() && pilots >= 1 && draw_budget >= 1, "scan_epsilon needs a ladder, pilots and a budget");
    std::sort(ladder.begin(), ladder.end(), std::greater<>());
    const auto phase = predicted_phase(spec.id, spec.alpha, spec.beta);
    const auto model = make_landscape_model(spec);
    // Draws are at least steps, so this cap bounds the walk of a pilot.
    const auto cap = static_cast<std::uint64_t>(2.0 * draw_budget);
    EpsilonChoice out;
    for (double eps : ladder) {
        const double horizon = t_max / q_of_epsilon(spec, eps, phase);
        double total = 0;
        bool exhausted = false;
        for (std::size_t r = 0; r < pilots && !exhausted; ++r) {
            Landscape land(model, Stream::derive(seed, "pilot-env", r).seed());
            Stream walk = Stream::derive(seed, "pilot-walk", r);
            const auto obs = observe_rtrw(land, {horizon}, walk, cap);
            total += static_cast<double>(obs.draws);
            exhausted = obs.exhausted;
        }
        const double mean = exhausted ? INFINITY : total / static_cast<double>(pilots);
        out.pilots.emplace_back(eps, mean);
        if (mean > draw_budget) break;
        out.eps = eps;
        out.mean_draws = mean;
        out.within_budget = true;
    }
    if (!out.within_budget) {
        // Even the coarsest level is over budget; use it anyway.
        out.eps = ladder.front();
        out.mean_draws = out.pilots.front().second;
    }
    return out;
}

}  // namespace rtrw
