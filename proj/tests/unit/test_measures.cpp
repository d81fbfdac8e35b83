#include <doctest.h>

#include <cmath>
#include <numeric>

#include "rtrw/analysis.hpp"
#include "rtrw/measures.hpp"
#include "support.hpp"

using namespace rtrw;

TEST_CASE("point mass always returns its value") {
    Stream rng(3);
    const auto d = TrapDistribution::point_mass(1.0);
    for (int i = 0; i < 1000; ++i) REQUIRE(d.sample(rng) == 1.0);
    CHECK(d.mean() == 1.0);
    CHECK(TrapDistribution::point_mass(2.5).second_moment() == doctest::Approx(6.25));
    CHECK(d.laplace(0.0) == 1.0);
}

TEST_CASE("transparent trap fires with probability tau^-beta") {
    Stream rng(11);
    const auto d = TrapDistribution::transparent(4.0, 1.0);
    const int n = 100000;
    int hits = 0;
    for (int i = 0; i < n; ++i) {
        const double s = d.sample(rng);
        REQUIRE((s == 1.0 || s == 4.0));
        hits += s == 4.0;
    }
    const double p = hits / double(n);
    CHECK(std::abs(p - 0.25) <= 3 * std::sqrt(0.25 * 0.75 / n));
    // two-atom sums
    CHECK(d.mean() == doctest::Approx(1.75));
    CHECK(d.laplace(1.0) == doctest::Approx(0.75 * std::exp(-1.0) + 0.25 * std::exp(-4.0)).epsilon(1e-14));
    CHECK(d.laplace(1.0) == doctest::Approx(0.28047).epsilon(1e-4));
}

TEST_CASE("transparent trap in analysis form has mean tau^(1-beta)") {
    for (double tau : {2.0, 17.0, 1e4})
        for (double beta : {0.2, 0.5, 0.9}) {
            const auto d = TrapDistribution::transparent(tau, beta, true);
            CHECK(d.mean() == doctest::Approx(std::pow(tau, 1 - beta)).epsilon(1e-12));
        }
    // beta = 0: the trap always fires
    Stream rng(5);
    const auto d = TrapDistribution::transparent(7.0, 0.0);
    for (int i = 0; i < 100; ++i) REQUIRE(d.sample(rng) == 7.0);
}

TEST_CASE("exponential law: sample mean and Laplace transform") {
    Stream rng(7);
    const auto d = TrapDistribution::exponential(2.0);
    double s = 0;
    for (int i = 0; i < 100000; ++i) s += d.sample(rng);
    CHECK(s / 1e5 >= 1.97);
    CHECK(s / 1e5 <= 2.03);
    for (double m : {0.5, 2.0})
        for (double l : {0.1, 1.0, 3.0}) CHECK(TrapDistribution::exponential(m).laplace(l) == doctest::Approx(1 / (1 + m * l)));
    CHECK(d.second_moment() == doctest::Approx(8.0));
}

TEST_CASE("one_minus_laplace is accurate for tiny arguments") {
    const auto d = TrapDistribution::two_point(1.0, 3.0, 0.5);
    const double l = 1e-12;
    // 1 - E e^{-l T} ~ l E T
    CHECK(d.one_minus_laplace(l) == doctest::Approx(2.0 * l).epsilon(1e-9));
}

TEST_CASE("empirical law estimates carry a standard error") {
    std::vector<double> xs(1000);
    std::iota(xs.begin(), xs.end(), 1.0);
    const auto d = TrapDistribution::empirical(xs);
    CHECK(d.mean() == doctest::Approx(500.5));
    const auto e = d.laplace_estimate(0.001);
    CHECK(e.std_error > 0);
    CHECK_FALSE(d.analytic());
}

TEST_CASE("psi_epsilon") {
    const auto d = TrapDistribution::exponential(3.0);
    CHECK(psi_epsilon(d, 0.1, 0.01, 0.0) == 0.0);

    // conditioned transparent law: (1 - e^{b/a}) delta_0 + e^{b/a} delta_{e^{-1/a}}
    for (double a : {0.2, 0.4})
        for (double b : {0.1, 0.3})
            for (double eps : {1e-2, 1e-4})
                for (double lam : {0.1, 1.0, 5.0}) {
                    const double tau = std::pow(eps, -1 / a);
                    const auto pi = TrapDistribution::two_point(0.0, tau, std::pow(eps, b / a));
                    const double d_eps = std::pow(tau, 1 - b);
                    const double expect = std::pow(eps, (b - a) / a) * (1 - std::exp(-lam * std::pow(eps, (a - b) / a)));
                    CHECK(psi_epsilon(pi, eps, eps / d_eps, lam) == doctest::Approx(expect).epsilon(1e-10));
                }
    // alpha = beta: Poisson exponent for every eps
    for (double eps : {1e-1, 1e-3, 1e-6}) {
        const double a = 0.3, tau = std::pow(eps, -1 / a);
        const auto pi = TrapDistribution::two_point(0.0, tau, eps);
        const double q = eps / std::pow(tau, 1 - a);
        for (double lam : {0.5, 2.0}) CHECK(psi_epsilon(pi, eps, q, lam) == doctest::Approx(1 - std::exp(-lam)).epsilon(1e-12));
    }
}

TEST_CASE("positive stable sampler matches its Laplace transform") {
    Stream rng(21);
    for (double g : {0.3, 0.5, 0.8}) {
        std::vector<double> xs(100000);
        for (auto& x : xs) x = sample_positive_stable(g, rng);
        for (double lam : {0.5, 1.0, 2.0}) {
            std::vector<double> e(xs.size());
            for (std::size_t i = 0; i < xs.size(); ++i) e[i] = std::exp(-lam * xs[i]);
            CHECK(within_sigma(mean_se(e), std::exp(-std::pow(lam, g))));
        }
    }
}

TEST_CASE("stable increments") {
    Stream rng(4);
    const auto v = sample_stable_increments(0.5, 1.0, 1.0, 100000, rng);
    std::vector<double> e(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        REQUIRE(v[i] > 0);
        e[i] = std::exp(-v[i]);
    }
    CHECK(within_sigma(mean_se(e), std::exp(-1.0)));

    // sum of 10 increments at dt = 0.1 against one increment at dt = 1
    const std::size_t n = 10000;
    const auto fine = sample_stable_increments(0.5, 1.0, 0.1, 10 * n, rng);
    std::vector<double> sums(n, 0.0);
    for (std::size_t i = 0; i < fine.size(); ++i) sums[i / 10] += fine[i];
    const auto coarse = sample_stable_increments(0.5, 1.0, 1.0, n, rng);
    CHECK(ks_two_sample(sums, coarse).p_value > 0.01);
}

TEST_CASE("Pareto tail exponent") {
    Stream rng(8);
    std::vector<double> xs(100000);
    for (auto& x : xs) x = sample_pareto(0.5, 1.0, rng);
    std::sort(xs.begin(), xs.end());
    // log-log survival slope over the top decile
    std::vector<double> lx, ls;
    const std::size_t n = xs.size();
    for (std::size_t i = n - n / 10; i < n - 10; i += 10) {
        lx.push_back(std::log(xs[i]));
        ls.push_back(std::log(double(n - i) / n));
    }
    CHECK(-ls_slope(lx, ls) == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("subordinators") {
    Stream rng(9);
    const std::vector<double> grid = {0.0, 0.5, 1.0, 2.0};
    const auto drift = subordinator_path(LaplaceExponent::linear(1.0), grid, rng);
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(drift[i] == doctest::Approx(grid[i]));

    const auto cp = LaplaceExponent::compound_poisson(1.0, TrapDistribution::point_mass(1.0));
    std::vector<double> s1(20000);
    for (auto& x : s1) x = cp.increment(1.0, rng);
    CHECK(within_sigma(mean_se(s1), 1.0));
    for (double x : s1) REQUIRE(x == std::round(x));
    CHECK(cp(1.0) == doctest::Approx(1 - std::exp(-1.0)));

    const auto st = LaplaceExponent::stable(0.5);
    std::vector<double> a(10000);
    for (auto& x : a) x = st.increment(1.0, rng);
    const auto b = sample_stable_increments(0.5, 1.0, 1.0, 10000, rng);
    CHECK(ks_two_sample(a, b).p_value > 0.01);
    CHECK(st(4.0) == doctest::Approx(2.0));
    CHECK(std::isinf(st.mean_rate()));
    CHECK(LaplaceExponent::zero().is_zero());
}

TEST_CASE("Poisson point processes") {
    Stream rng(12);
    const auto fin = AtomIntensity::fin(0.5, 0.01);
    CHECK(fin.rate_per_length() == doctest::Approx(10.0));
    std::vector<double> c1, c2;
    for (int i = 0; i < 4000; ++i) {
        const auto s = sample_poisson_points(fin, {0.0, 1.0}, rng);
        for (const auto& a : s.atoms) {
            REQUIRE(a.v >= 0.01);
            REQUIRE(a.x >= 0.0);
            REQUIRE(a.x <= 1.0);
        }
        c1.push_back(double(s.size()));
        c2.push_back(double(sample_poisson_points(fin, {0.0, 2.0}, rng).size()));
    }
    CHECK(within_sigma(mean_se(c1), 10.0));
    CHECK(within_sigma(mean_se(c2), 20.0));
    CHECK(sample_poisson_points(fin, {1.0, 1.0}, rng).size() == 0);

    // FK triples: expected count = |x| |y| z_min^-gamma
    const FkIntensity fk{0.5, 0.04};
    std::vector<double> c3;
    for (int i = 0; i < 4000; ++i) c3.push_back(double(sample_poisson_points(fk, {0, 1}, {0, 2}, rng).size()));
    CHECK(within_sigma(mean_se(c3), 10.0));
}

TEST_CASE("Poisson counts") {
    Stream rng(13);
    for (double m : {0.3, 4.0, 250.0}) {
        std::vector<double> xs(20000);
        for (auto& x : xs) x = double(sample_poisson(m, rng));
        const auto e = mean_se(xs);
        CHECK(within_sigma(e, m));
    }
}
