#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rtrw/limits.hpp"
#include "rtrw/measures.hpp"
#include "rtrw/models.hpp"
#include "rtrw/rng.hpp"

namespace rtrw {

// ---------------------------------------------------------------------------
// Verdicts and reports.

enum class Verdict { pass, fail, inconclusive };
std::string to_string(Verdict v);

struct TestReport {
    std::string statistic;
    double value = 0.0;
    double threshold = 0.0;
    // How value is compared to threshold: "<", "<=", ">", ">=", "in" (|value - target| <= tol)
    std::string comparison = "<=";
    double target = 0.0;
    Verdict verdict = Verdict::inconclusive;
    std::vector<std::size_t> sample_sizes;
    std::vector<std::uint64_t> seeds;
    std::string note;

    // Sets verdict from value and threshold.
    TestReport& decide();
    nlohmann::json to_json() const;
    static TestReport from_json(const nlohmann::json& j);
};

// ---------------------------------------------------------------------------
// Rate functions.

// E over the landscape of h applied to the site law pi_0; quadrature over the
// site randomness for the structured models.
double landscape_expectation(const ModelSpec& spec, const std::function<double(const TrapDistribution&)>& h);

enum class GammaMode { analytic, mc };

// Gamma(eps) = E[1 - hat pi_0(eps)].
double gamma_analytic(const ModelSpec& spec, double eps);
Estimate gamma_of_epsilon(const ModelSpec& spec, double eps, GammaMode mode = GammaMode::analytic,
                          std::size_t n_mc = 100000, std::uint64_t seed = 1);
double gamma_max(const ModelSpec& spec);

// Gamma^{-1}(eps^2).
double q_fk(const ModelSpec& spec, double eps);

// M = E[m(pi_0)], +inf when infinite.
double mean_trap_mean(const ModelSpec& spec);

// P(m(pi_0) > u)
double mean_survival(const ModelSpec& spec, double u);
// d(eps) with P(m(pi_0) > d) = eps; requires a heavy-tailed model.
double d_of_epsilon(const ModelSpec& spec, double eps);

// Schedule of the predicted phase: eps^2 / M for BM, eps / d(eps) for FIN and
// SSBM, q_FK for FK.
double q_of_epsilon(const ModelSpec& spec, double eps, const PhasePrediction& phase);
double q_of_epsilon(const ModelSpec& spec, double eps);

// Law of pi_0 conditioned on m(pi_0) = a, when the model makes it exact
// (transparent traps, Bouchaud). Otherwise the laws with m within a(1 +- delta).
std::vector<TrapDistribution> conditioned_laws(const ModelSpec& spec, double a, double delta = 0.05);

// Samples of m(pi_0) over fresh landscapes.
std::vector<double> mean_samples(const ModelSpec& spec, std::size_t n, Stream& rng);

// ---------------------------------------------------------------------------
// Assumption checkers. Transparent traps are checked in the analysis form.

struct TailEstimate {
    double gamma = NAN;
    double ci_lo = NAN, ci_hi = NAN;
    std::size_t k = 0;
    std::vector<double> gamma_at_k;  // Hill estimates at k/4, k/2, k
    bool heavy_tail = false;         // gamma_hat < 1 with the whole interval below 1
    std::string diagnostic;
};

// Hill estimator over the top k = n^{2/3} order statistics, bootstrap CI.
TailEstimate check_ht(std::vector<double> samples, Stream& rng, std::size_t n_boot = 200, double level = 0.95);

struct LCheck {
    std::vector<double> eps;
    std::vector<double> lambda;
    // psi[i][j]: mean over conditioned laws of Psi_eps_i at lambda_j
    std::vector<std::vector<double>> psi;
    std::vector<std::size_t> n_laws;
    std::vector<double> sup_step;       // sup-distance between consecutive eps levels
    std::vector<double> sup_to_linear;  // sup |psi - lambda|
    std::vector<double> sup_to_poisson; // sup |psi - (1 - e^-lambda)|
    std::vector<double> sup_norm;       // sup |psi|
    std::string limit;                  // "lambda", "1-exp(-lambda)", "0" or "undetermined"
    bool nontrivial = false;
    Verdict verdict = Verdict::inconclusive;
};

LCheck check_L(const ModelSpec& spec, const std::vector<double>& eps, const std::vector<double>& lambda);

struct DecayCheck {
    std::vector<double> eps;
    std::vector<double> values;
    double log_slope = NAN;  // d log(value) / d log(eps); positive means decay as eps -> 0
    bool monotone = false;
    Verdict verdict = Verdict::inconclusive;
    std::string note;
};

// eps d(eps)^-2 m_2(d(eps)) along the list.
DecayCheck check_fin_condition(const ModelSpec& spec, const std::vector<double>& eps);
// eps^-3 E[(1 - hat pi_0(q_FK(eps)))^2] along the list.
DecayCheck check_fk_second_moment(const ModelSpec& spec, const std::vector<double>& eps);

// ---------------------------------------------------------------------------
// Statistics.

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t n1 = 0, n2 = 0;
};

// Survival of the Kolmogorov distribution, P(K > x).
double kolmogorov_survival(double x);
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

struct MsdFit {
    double nu = NAN;
    double ci_lo = NAN, ci_hi = NAN;
    std::vector<double> msd;  // E[X_t^2] per time
};

// positions[r][k] = X_{t_k} for replica r; fits log E[X_t^2] = 2 nu log t + c.
MsdFit msd_exponent(const std::vector<std::vector<double>>& positions, const std::vector<double>& times, Stream& rng,
                    std::size_t n_boot = 200, double level = 0.95);

double pearson(const std::vector<double>& a, const std::vector<double>& b);

// ---------------------------------------------------------------------------
// Classification of a model point by simulation.

struct ClassifyOptions {
    double eps = 0.05;
    std::size_t replicas = 2000;
    std::vector<double> times = {0.25, 0.5, 1.0, 2.0, 4.0};
    std::size_t limit_samples = 2000;  // limit-process draws at t = 1
    std::size_t env_pairs = 1000;      // replica pairs sharing a landscape
    std::uint64_t seed = 1;
    double nu_tolerance = 0.06;
    double ks_level = 1e-3;
    std::uint64_t max_steps = std::uint64_t{1} << 34;
    LimitOptions limit{};
};

struct Classification {
    PhasePrediction predicted;
    PhaseLabel empirical = PhaseLabel::unclassified;
    Verdict verdict = Verdict::inconclusive;
    bool confident = false;
    double q = NAN;
    MsdFit msd;
    KsResult ks;
    double env_correlation = NAN;
    double env_threshold = NAN;
    std::size_t exhausted = 0;
    std::vector<TestReport> reports;
    std::string note;
    nlohmann::json to_json() const;
};

// Marginal of the predicted limit process at time t.
std::vector<double> limit_marginal(const PhasePrediction& phase, double t, std::size_t n, std::uint64_t seed,
                                   const LimitOptions& opts = {});

Classification classify_limit(const ModelSpec& spec, const ClassifyOptions& opts);

// Smallest eps on a ladder whose pilot walks reach time t_max / q(eps) within
// a mean budget of random draws per walk (draws track the cost of long trap
// excursions, which walk steps do not). The ladder is walked from coarse to
// fine and stops at the first level over budget. The choice depends only on
// the seed, never on timing.
struct EpsilonChoice {
    double eps = NAN;
    double mean_draws = NAN;
    bool within_budget = false;
    std::vector<std::pair<double, double>> pilots;  // (eps, mean draws) tried
};
EpsilonChoice scan_epsilon(const ModelSpec& spec, std::vector<double> ladder, double draw_budget,
                           std::size_t pilots = 8, std::uint64_t seed = 1, double t_max = 4.0);

}  // namespace rtrw
