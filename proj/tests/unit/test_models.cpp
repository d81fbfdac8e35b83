#include <doctest.h>

#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>

#include "commands.hpp"
#include "rtrw/analysis.hpp"
#include "rtrw/models.hpp"
#include "support.hpp"

using namespace rtrw;
using boost::multiprecision::cpp_rational;

namespace {

// E_1[s^tau] by propagating the law of the tooth walk step by step.
double pgf_by_propagation(std::int64_t n, double beta, double s) {
    const double p = 0.5 * (1 + comb_drift(n, beta));
    std::vector<double> w(n + 1, 0.0), nw(n + 1);
    w[1] = 1.0;
    double f = 0, alive = 1, sk = 1;
    for (int t = 1; t < 200000 && alive * sk > 1e-18; ++t) {
        std::fill(nw.begin(), nw.end(), 0.0);
        for (std::int64_t x = 1; x <= n; ++x) {
            if (x == n) {
                nw[x - 1] += w[x];
            } else {
                nw[x + 1] += p * w[x];
                nw[x - 1] += (1 - p) * w[x];
            }
        }
        sk *= s;
        f += sk * nw[0];
        nw[0] = 0;
        w.swap(nw);
        alive = 0;
        for (double v : w) alive += v;
    }
    return f;
}

// One visit to a backbone vertex, walked on the comb graph itself: from the
// base, 1/3 to each backbone neighbour (visit ends) and 1/3 into the tooth.
double visit_on_comb(std::int64_t n, double beta, Stream& rng) {
    const double p = 0.5 * (1 + comb_drift(n, beta));
    std::int64_t y = 0;  // height in the tooth, 0 = backbone
    double steps = 0;
    for (;;) {
        ++steps;
        if (y == 0) {
            const double u = rng.uniform();
            if (u < 2.0 / 3.0) return steps;
            y = 1;
        } else if (y == n) {
            --y;
        } else {
            y += rng.uniform() < p ? 1 : -1;
        }
    }
}

}  // namespace

TEST_CASE("comb drift") {
    for (std::int64_t n : {1, 2, 10, 1000}) CHECK(comb_drift(n, 0.0) == 0.0);
    CHECK(comb_drift(10, 1.0) == doctest::Approx(std::log(10.0) / 10).epsilon(1e-14));
    CHECK(comb_drift(10, 1.0) == doctest::Approx(0.2303).epsilon(1e-3));
    CHECK(comb_drift(3, 5.0) == 1.0);
}

TEST_CASE("tooth walk sampler") {
    Stream rng(1);
    for (int i = 0; i < 100; ++i) REQUIRE(comb_tooth_walk_sample(1, 0.7, rng).steps == 1);
    std::vector<double> t(1000000);
    for (auto& x : t) {
        const auto s = comb_tooth_walk_sample(3, 0.0, rng);
        REQUIRE(s.steps >= 1);
        x = double(s.steps);
    }
    CHECK(within_sigma(mean_se(t), 5.0));
    // a cap of 3 steps censors every walk still in the tooth after 3 steps
    int censored = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto c = comb_tooth_walk_sample(100, 0.0, rng, 3);
        REQUIRE(c.steps <= 3);
        if (c.censored) REQUIRE(c.steps == 3);
        censored += c.censored;
    }
    CHECK(censored > 0);
}

TEST_CASE("block samplers agree with the step-by-step tooth walk") {
    for (auto [n, beta] : {std::pair<std::int64_t, double>{5, 0.0}, {20, 1.0}, {40, 0.5}, {300, 0.0}, {8, 2.0}}) {
        Stream r1(n), r2(n + 1), r3(n + 2);
        const cli::ToothBlockWalk block(n, beta, 16);
        const auto law = ToothLaw::make(n, beta);
        std::vector<double> a(20000), b(20000), c(20000);
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = double(comb_tooth_walk_sample(n, beta, r1).steps);
            b[i] = block.sample(r2, 1e18);
            c[i] = comb_tooth_excursion(law, r3, 1e18);
        }
        CAPTURE(n);
        CAPTURE(beta);
        CHECK(ks_two_sample(a, b).p_value > 0.01);
        CHECK(ks_two_sample(a, c).p_value > 0.01);
        CHECK(within_sigma(mean_se(c), comb_tooth_mean(double(n), beta), 4.0));
    }
}

TEST_CASE("tooth generating function") {
    for (double b : {0.0, 1.0, 2.5})
        for (double s : {0.1, 0.5, 0.99}) {
            CHECK(comb_tooth_pgf(1, b, s) == s);
            CHECK(comb_tooth_pgf_recursive(1, b, s) == s);
        }
    for (std::int64_t n : {2, 3, 7, 10})
        for (double b : {0.0, 0.5, 2.0})
            for (double s : {0.5, 0.9}) {
                const double ref = pgf_by_propagation(n, b, s);
                CHECK(comb_tooth_pgf(n, b, s) == doctest::Approx(ref).epsilon(1e-12));
                CHECK(comb_tooth_pgf_recursive(n, b, s) == doctest::Approx(ref).epsilon(1e-12));
            }
    // N = 3, beta = 0, s = 0.9: Monte Carlo of s^tau
    Stream rng(2);
    std::vector<double> v(1000000);
    for (auto& x : v) x = std::pow(0.9, double(comb_tooth_walk_sample(3, 0.0, rng).steps));
    CHECK(within_sigma(mean_se(v), comb_tooth_pgf(3, 0.0, 0.9)));
    CHECK(std::abs(comb_tooth_pgf(3, 0.0, 0.9) - comb_tooth_pgf_recursive(3, 0.0, 0.9)) <= 1e-12);

    // slope at s = 1 is the mean
    for (std::int64_t n : {4, 30, 500})
        for (double b : {0.0, 1.0}) {
            const double m = comb_tooth_mean(double(n), b);
            // second-order term is h m_2 / 2 relative to h m
            const double s = 1 - 1e-5 * m / comb_tooth_second_moment(n, b), h = 1 - s;
            CHECK(comb_tooth_one_minus_pgf(double(n), b, s) / h == doctest::Approx(m).epsilon(1e-3));
        }
}

TEST_CASE("tooth moments") {
    const auto m1 = comb_tooth_moments_exact(1, 1.3);
    CHECK(m1.m == 1.0);
    CHECK(m1.m2 == 1.0);
    // exact rational recursion: 2N - 1 at beta = 0
    for (std::int64_t n : {1, 2, 3, 5, 17, 100, 1000}) {
        const auto r = tooth_moments_recursive<cpp_rational>(n, cpp_rational(1, 2));
        CHECK(r.m == cpp_rational(2 * n - 1));
        CHECK(comb_tooth_mean(double(n), 0.0) == doctest::Approx(2.0 * n - 1));
    }
    // Monte Carlo at N = 3, 5 for the mean; N = 4 for the second moment
    Stream rng(3);
    for (std::int64_t n : {3, 5}) {
        std::vector<double> t(200000);
        for (auto& x : t) x = double(comb_tooth_walk_sample(n, 0.0, rng).steps);
        CHECK(within_sigma(mean_se(t), 2.0 * n - 1));
    }
    std::vector<double> t2(200000);
    for (auto& x : t2) {
        const double s = double(comb_tooth_walk_sample(4, 0.8, rng).steps);
        x = s * s;
    }
    CHECK(within_sigma(mean_se(t2), comb_tooth_second_moment(4, 0.8)));

    // closed forms against the recursion in doubles
    for (std::int64_t n : {2, 9, 60})
        for (double b : {0.3, 1.0}) {
            const auto e = tooth_moments_recursive<double>(n, ToothLaw::make(n, b).p);
            CHECK(comb_tooth_mean(double(n), b) == doctest::Approx(e.m).epsilon(1e-9));
            CHECK(comb_tooth_second_moment(n, b) == doctest::Approx(e.m2).epsilon(1e-9));
        }

    // beta = 1, N = 1e4: ratio to N^3 / log N within 25%
    const double n = 1e4;
    CHECK(comb_tooth_mean(n, 1.0) / (std::pow(n, 3) / std::log(n)) == doctest::Approx(1.0).epsilon(0.25));
}

TEST_CASE("moment asymptotics") {
    CHECK(comb_tooth_moments_asymptotic(50, 0.0).m == doctest::Approx(100.0));
    CHECK(comb_tooth_moments_asymptotic(std::exp(1.0), 1.0).m == doctest::Approx(std::exp(3.0)));
    CHECK(comb_tooth_moments_asymptotic(std::exp(1.0), 1.0).m == doctest::Approx(20.09).epsilon(1e-3));
    for (double b : {0.5, 1.0}) {
        double prev = INFINITY;
        for (double n : {1e2, 1e3, 1e4, 1e5}) {
            const double dev = std::abs(comb_tooth_mean(n, b) / comb_tooth_moments_asymptotic(n, b).m - 1);
            CHECK(dev < prev);
            prev = dev;
        }
        CHECK(prev < 0.25);
    }
}

TEST_CASE("comb visit law") {
    CHECK(comb_visit_laplace(7, 0.5, 0.0) == doctest::Approx(1.0));
    // N = 1: the tooth excursion is one step, so theta(lambda) = e^-lambda
    const double e1 = std::exp(-1.0);
    CHECK(comb_visit_laplace(1, 0.0, 1.0) == doctest::Approx(2 * e1 / (3 - e1 * e1)).epsilon(1e-14));
    CHECK(comb_visit_laplace(1, 0.0, 1.0) == doctest::Approx(0.25684).epsilon(1e-4));

    // against the walk on the comb graph
    for (auto [n, beta] : {std::pair<std::int64_t, double>{1, 0.0}, {4, 0.0}, {12, 1.0}}) {
        Stream r1(10 + n), r2(20 + n);
        const auto law = TrapDistribution::comb_visit(n, beta);
        std::vector<double> a(100000), b(100000), la(100000);
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = visit_on_comb(n, beta, r1);
            la[i] = std::exp(-0.3 * a[i]);
            b[i] = law.sample(r2);
        }
        CAPTURE(n);
        const auto ma = mean_se(a);
        CHECK(within_sigma(ma, law.mean()));
        CHECK(law.mean() == doctest::Approx((3 + comb_tooth_mean(double(n), beta)) / 2));
        CHECK(within_sigma(mean_se(la), law.laplace(0.3)));
        CHECK(ks_two_sample(a, b).p_value > 0.01);
    }
}

TEST_CASE("tooth length law") {
    for (double a : {0.3, 0.5, 2.0}) {
        const ToothLengthSampler s(a);
        // normalization by direct summation plus the integral tail
        double sum = 0;
        const std::int64_t M = 2000000;
        for (std::int64_t n = 1; n < M; ++n) sum += s.pmf(n);
        sum += std::pow(double(M) - 0.5, -a) / a / s.zeta();
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-8));
        CHECK(s.survival(1.0) == doctest::Approx(1.0));
        CHECK(s.survival(11.0) == doctest::Approx(s.survival(10.0) - s.pmf(10)).epsilon(1e-10));
        CHECK(s.survival(s.survival_inverse(1e-3)) == doctest::Approx(1e-3).epsilon(1e-6));
        Stream rng(5);
        std::vector<double> small(200000);
        for (auto& x : small) x = s.sample(rng) == 1;
        CHECK(within_sigma(mean_se(small), s.pmf(1)));
    }
}

TEST_CASE("transparent trap parameters") {
    const TransparentParams p{0.4, 0.2, 1.0};
    Stream rng(6);
    std::vector<double> taus(100000);
    for (auto& t : taus) {
        t = p.sample_tau(rng);
        REQUIRE(t > 1.0);
    }
    std::vector<double> over(taus.size());
    for (std::size_t i = 0; i < taus.size(); ++i) over[i] = taus[i] > 50.0;
    CHECK(within_sigma(mean_se(over), p.survival(50.0)));
    CHECK(p.survival(50.0) == doctest::Approx(std::pow(50.0, -0.4)));

    // m(pi) = tau^{1-beta} in analysis form has tail exponent alpha / (1 - beta)
    const auto spec = ModelSpec::transparent(0.4, 0.2);
    std::vector<double> means = mean_samples(spec, 100000, rng);
    std::sort(means.begin(), means.end());
    std::vector<double> lx, ls;
    const std::size_t n = means.size();
    for (std::size_t i = n - n / 10; i < n - 10; i += 10) {
        lx.push_back(std::log(means[i]));
        ls.push_back(std::log(double(n - i) / n));
    }
    CHECK(-ls_slope(lx, ls) == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("phase predictions") {
    const auto bm = predicted_phase(ModelId::transparent, 2.0, 0.5);
    CHECK(bm.label == PhaseLabel::BM);
    CHECK(bm.nu() == 0.5);

    const auto fin = predicted_phase(ModelId::transparent, 0.4, 0.2);
    CHECK(fin.label == PhaseLabel::FIN);
    CHECK(fin.exponent == doctest::Approx(0.5));
    CHECK(fin.schedule_power == doctest::Approx(3.0));

    const auto fk = predicted_phase(ModelId::comb, 0.5, 0.0);
    CHECK(fk.label == PhaseLabel::FK);
    CHECK(fk.exponent == doctest::Approx(0.75));

    const auto ssbm = predicted_phase(ModelId::transparent, 0.3, 0.3);
    CHECK(ssbm.label == PhaseLabel::SSBM);
    CHECK(ssbm.exponent == doctest::Approx(0.3 / 0.7));

    const auto tfk = predicted_phase(ModelId::transparent, 0.2, 0.4);
    CHECK(tfk.label == PhaseLabel::FK);
    CHECK(tfk.nu() == doctest::Approx(0.3));

    const auto cfin = predicted_phase(ModelId::comb, 2.0, 1.0);
    CHECK(cfin.label == PhaseLabel::FIN);
    CHECK(cfin.exponent == doctest::Approx(2.0 / 3.0));
    CHECK(cfin.nu() == doctest::Approx(0.4));

    CHECK(predicted_phase(ModelId::comb, 4.0, 1.0).label == PhaseLabel::BM);
    CHECK(predicted_phase(ModelId::transparent, 0.6, 0.4).label == PhaseLabel::unclassified);
    CHECK(predicted_phase(ModelId::transparent, 0.55, 0.4, 0.1).label == PhaseLabel::unclassified);
    CHECK(predicted_phase(ModelId::comb, 3.0, 1.0).label == PhaseLabel::unclassified);
    CHECK(predicted_phase(ModelId::comb, 1.0, 0.3).label == PhaseLabel::unclassified);
}

TEST_CASE("model ids") {
    for (auto id : {ModelId::srw, ModelId::constant, ModelId::bouchaud, ModelId::transparent, ModelId::comb})
        CHECK(parse_model_id(to_string(id)) == id);
    for (auto l : {PhaseLabel::BM, PhaseLabel::FK, PhaseLabel::FIN, PhaseLabel::SSBM})
        CHECK(parse_phase_label(to_string(l)) == l);
    CHECK_THROWS(ModelSpec::transparent(-1, 0).validate());
}
