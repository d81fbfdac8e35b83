#include "rtrw/limits.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace rtrw {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

struct Resolved {
    double dt, h;
};

Resolved resolve(const LimitOptions& opts, double T) {
    require(T > 0, "time horizon must be positive");
    require(opts.grid >= 1, "output grid needs at least one cell");
    const double dt = opts.dt > 0 ? opts.dt : 1e-4 * T;
    const double h = opts.h > 0 ? opts.h : std::sqrt(dt);
    return {dt, h};
}

std::vector<double> output_grid(double T, std::size_t m) {
    std::vector<double> t(m + 1);
    for (std::size_t k = 0; k <= m; ++k) t[k] = T * static_cast<double>(k) / static_cast<double>(m);
    return t;
}

Trajectory grid_trajectory(std::vector<double> times, std::vector<double> positions) {
    Trajectory tr;
    const double cell = times.size() > 1 ? times[1] - times[0] : 1.0;
    tr.horizon = times.back() + cell;
    tr.times = std::move(times);
    tr.positions = std::move(positions);
    return tr;
}

// Environment of spatial atoms, materialized lazily in blocks of bins. Each
// block draws from its own substream, so the realization does not depend on
// the order in which the Brownian path explores space.
class AtomField {
public:
    static constexpr std::int64_t block_bins = 256;

    AtomField(const AtomIntensity& F, double h, std::uint64_t env_seed, bool aggregate_linear, bool keep)
        : F_(F), h_(h), seed_(env_seed), aggregate_(aggregate_linear && F.map == AtomIntensity::Map::linear),
          keep_(keep) {}

    struct Bin {
        double w = 0.0;                     // aggregated linear mass
        std::vector<std::size_t> atoms;     // atoms with their own subordinators
    };

    const Bin* bin(std::int64_t k) {
        if (k == last_k_) return last_;
        ensure_block(floor_div(k, block_bins));
        auto it = bins_.find(k);
        last_k_ = k;
        last_ = it == bins_.end() ? nullptr : &it->second;
        return last_;
    }

    const std::vector<SsbmAtom>& atoms() const { return atoms_; }

private:
    void ensure_block(std::int64_t kb) {
        if (!blocks_.emplace(kb, true).second) return;
        if (F_.map == AtomIntensity::Map::zero) return;
        Stream rng = Stream::derive(seed_, "block", site_index(kb));
        const Window w{static_cast<double>(kb * block_bins) * h_, static_cast<double>((kb + 1) * block_bins) * h_};
        auto sample = sample_poisson_points(F_, w, rng);
        for (auto& a : sample.atoms) {
            auto k = static_cast<std::int64_t>(std::floor(a.x / h_));
            k = std::clamp(k, kb * block_bins, (kb + 1) * block_bins - 1);
            auto& b = bins_[k];
            if (aggregate_) {
                b.w += a.v;
                if (keep_) atoms_.push_back(std::move(a));
            } else {
                b.atoms.push_back(atoms_.size());
                atoms_.push_back(std::move(a));
            }
        }
        last_k_ = std::numeric_limits<std::int64_t>::min();
    }

    AtomIntensity F_;
    double h_;
    std::uint64_t seed_;
    bool aggregate_;
    bool keep_;
    std::unordered_map<std::int64_t, bool> blocks_;
    std::unordered_map<std::int64_t, Bin> bins_;
    std::vector<SsbmAtom> atoms_;
    std::int64_t last_k_ = std::numeric_limits<std::int64_t>::min();
    const Bin* last_ = nullptr;
};

// B on a grid; phi accumulates per step the lebesgue drift, the local-time
// increments dt/h fed to the atoms of the current bin, and stable increments.
LimitSample run_time_change(const AtomIntensity& F, bool aggregate, double stable_gamma, double stable_scale,
                            double T, Stream& rng, const LimitOptions& opts) {
    const auto [dt, h] = resolve(opts, T);
    // Disjoint substreams for the driver, the environment and the clocks.
    const std::uint64_t base = rng();
    Stream bm = Stream::derive(base, "bm");
    Stream sub = Stream::derive(base, "sub");
    Stream stable = Stream::derive(base, "stable");
    AtomField field(F, h, Stream::derive(base, "env").seed(), aggregate, opts.keep_atoms);

    LimitSample out;
    out.neglected_rate = F.map == AtomIntensity::Map::zero ? 0.0 : F.neglected_rate();
    const double drift = opts.compensate_cutoff && std::isfinite(out.neglected_rate) ? out.neglected_rate : 0.0;
    const bool has_stable = stable_gamma > 0 && stable_scale > 0;
    const double stable_factor = has_stable ? std::pow(stable_scale * dt, 1.0 / stable_gamma) : 0.0;
    const double sqdt = std::sqrt(dt);
    const double dl = dt / h;

    const auto times = output_grid(T, opts.grid);
    std::vector<double> pos(times.size(), 0.0);
    out.psi.assign(times.size(), 0.0);
    std::size_t k = 1;
    double b = 0.0;
    CompensatedSum phi;
    std::uint64_t j = 0;
    while (k < times.size()) {
        if (j >= opts.max_steps) throw std::runtime_error("limit sampler exceeded its step budget");
        double inc = drift * dt;
        const auto* cell = field.bin(static_cast<std::int64_t>(std::floor(b / h)));
        if (cell) {
            inc += cell->w * dl;
            for (std::size_t a : cell->atoms) inc += field.atoms()[a].f.increment(dl, sub);
        }
        if (has_stable) inc += stable_factor * sample_positive_stable(stable_gamma, stable);
        phi.add(inc);
        b += sqdt * bm.normal();
        ++j;
        const double now = phi.value();
        while (k < times.size() && times[k] < now) {
            pos[k] = b;
            out.psi[k] = static_cast<double>(j) * dt;
            ++k;
        }
    }
    out.steps = j;
    out.trajectory = grid_trajectory(times, std::move(pos));
    if (opts.keep_atoms) out.atoms = field.atoms();
    return out;
}

}  // namespace

BrownianGridPath sample_bm(double T, double dt, Stream& rng) {
    require(T > 0 && dt > 0, "Brownian path needs T, dt > 0");
    const auto n = static_cast<std::size_t>(std::llround(T / dt));
    BrownianGridPath p;
    p.dt = dt;
    p.b.resize(n + 1);
    p.b[0] = 0.0;
    const double sq = std::sqrt(dt);
    for (std::size_t i = 1; i <= n; ++i) p.b[i] = p.b[i - 1] + sq * rng.normal();
    return p;
}

std::int64_t LocalTimeEstimate::bin(double x) const { return static_cast<std::int64_t>(std::floor(x / h)); }

double LocalTimeEstimate::at(double x, std::size_t time_index) const {
    auto it = ell.find(bin(x));
    return it == ell.end() ? 0.0 : it->second.at(time_index);
}

LocalTimeEstimate bm_local_time(const BrownianGridPath& path, double h, const std::vector<double>& times) {
    require(h > 0, "bin width must be positive");
    require(std::is_sorted(times.begin(), times.end()), "times must be sorted");
    LocalTimeEstimate est;
    est.h = h;
    est.times = times;
    std::map<std::int64_t, std::int64_t> counts;
    std::size_t step = 0;
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
        const auto upto = static_cast<std::size_t>(std::floor(times[ti] / path.dt + 1e-9));
        require(upto < path.b.size(), "requested time beyond the path");
        for (; step < upto; ++step) ++counts[est.bin(path.b[step])];
        for (const auto& [bin, c] : counts) {
            auto& v = est.ell[bin];
            v.resize(times.size(), 0.0);
            v[ti] = static_cast<double>(c) * path.dt / h;
        }
    }
    return est;
}

double TimeChange::psi(double t) const {
    const auto it = std::upper_bound(phi.begin(), phi.end(), t);
    if (it == phi.end()) return std::numeric_limits<double>::infinity();
    return s[static_cast<std::size_t>(it - phi.begin())];
}

double default_v_min(double gamma, double T, double v_min_rel) {
    return v_min_rel * std::pow(T, 1.0 / (1.0 + gamma));
}

LimitSample sample_fk(double gamma, double T, Stream& rng, LimitOptions opts, double scale) {
    require(gamma > 0 && gamma < 1, "stable index must lie in (0,1)");
    require(scale > 0, "stable scale must be positive");
    const auto [dt, h] = resolve(opts, T);
    (void)h;
    const std::uint64_t base = rng();
    Stream stable = Stream::derive(base, "stable");
    Stream bm = Stream::derive(base, "bm");
    const double factor = std::pow(scale * dt, 1.0 / gamma);
    const auto times = output_grid(T, opts.grid);
    LimitSample out;
    out.psi.assign(times.size(), 0.0);
    std::size_t k = 1;
    std::uint64_t j = 0;
    CompensatedSum v;
    while (k < times.size()) {
        if (j >= opts.max_steps) throw std::runtime_error("FK sampler exceeded its step budget");
        v.add(factor * sample_positive_stable(gamma, stable));
        ++j;
        const double now = v.value();
        while (k < times.size() && times[k] < now) out.psi[k++] = static_cast<double>(j) * dt;
    }
    // B only matters at the psi values; B and V are independent.
    std::vector<double> pos(times.size(), 0.0);
    for (std::size_t i = 1; i < times.size(); ++i) {
        const double ds = out.psi[i] - out.psi[i - 1];
        pos[i] = pos[i - 1] + (ds > 0 ? std::sqrt(ds) * bm.normal() : 0.0);
    }
    out.steps = j;
    out.trajectory = grid_trajectory(times, std::move(pos));
    return out;
}

LimitSample sample_fin(double gamma, double v_min, double T, Stream& rng, LimitOptions opts) {
    require(gamma > 0 && gamma < 1, "FIN index must lie in (0,1)");
    if (v_min <= 0) v_min = default_v_min(gamma, T, opts.v_min_rel);
    return run_time_change(AtomIntensity::fin(gamma, v_min), true, 0.0, 0.0, T, rng, opts);
}

LimitSample sample_ssbm(const AtomIntensity& F, double T, Stream& rng, LimitOptions opts) {
    // With no atoms phi is identically 0 and psi infinite: nothing to sample.
    require(F.map != AtomIntensity::Map::zero, "SSBM needs a nonzero intensity (a zero one gives phi = 0)");
    require(F.v_min > 0, "SSBM intensity needs a positive cutoff");
    Stream probe = Stream::derive(rng(), "mass-check");
    const MassCheck check = ssbm_mass_check(F, probe, 8, 12);
    if (!check.finite) throw std::runtime_error("SSBM clock diverges: " + check.diagnostic);
    return run_time_change(F, false, 0.0, 0.0, T, rng, opts);
}

LimitSample sample_fk_ssbm_mixture(double gamma, const AtomIntensity& F, double T, Stream& rng, LimitOptions opts,
                                   double scale) {
    if (F.map == AtomIntensity::Map::zero) return sample_fk(gamma, T, rng, opts, scale);
    if (scale == 0) return sample_ssbm(F, T, rng, opts);
    require(gamma > 0 && gamma < 1, "stable index must lie in (0,1)");
    return run_time_change(F, false, gamma, scale, T, rng, opts);
}

TimeChange speed_measure_clock(const SpeedMeasure& rho, const BrownianGridPath& path, double h) {
    require(h > 0, "bin width must be positive");
    require(rho.lebesgue >= 0, "speed measure density must be nonnegative");
    std::unordered_map<std::int64_t, double> mass;
    for (const auto& [x, v] : rho.atoms) {
        require(v > 0, "speed measure atoms must be positive");
        mass[static_cast<std::int64_t>(std::floor(x / h))] += v;
    }
    TimeChange tc;
    tc.s.resize(path.b.size());
    tc.phi.resize(path.b.size());
    CompensatedSum phi;
    for (std::size_t j = 0; j < path.b.size(); ++j) {
        tc.s[j] = static_cast<double>(j) * path.dt;
        tc.phi[j] = phi.value();
        if (j + 1 == path.b.size()) break;
        double rate = rho.lebesgue;
        auto it = mass.find(static_cast<std::int64_t>(std::floor(path.b[j] / h)));
        if (it != mass.end()) rate += it->second / h;
        phi.add(rate * path.dt);
    }
    return tc;
}

Trajectory speed_measure_time_change(const SpeedMeasure& rho, const BrownianGridPath& path, double h, double T,
                                     std::size_t grid) {
    const TimeChange tc = speed_measure_clock(rho, path, h);
    const auto times = output_grid(T, grid);
    std::vector<double> pos(times.size(), 0.0);
    for (std::size_t k = 1; k < times.size(); ++k) {
        const auto it = std::upper_bound(tc.phi.begin(), tc.phi.end(), times[k]);
        if (it == tc.phi.end()) throw std::out_of_range("Brownian path too short for the requested clock horizon");
        pos[k] = path.b[static_cast<std::size_t>(it - tc.phi.begin())];
    }
    return grid_trajectory(times, std::move(pos));
}

MassCheck ssbm_mass_check(const AtomIntensity& F, Stream& rng, std::size_t n_trials, std::size_t shells) {
    MassCheck out;
    if (F.map == AtomIntensity::Map::zero) {
        out.diagnostic = "zero measure";
        return out;
    }
    require(F.gamma > 0 && F.v_min > 0, "intensity needs gamma > 0 and a positive reference cutoff");
    require(n_trials >= 1, "need at least one trial");
    constexpr double guard = 1e12;
    constexpr double count_cap = 2e6;
    const double g = F.gamma;
    constexpr double shell_atoms = 1024;  // expected atoms per shell, pooled over fractional trials
    double base = 0.0;
    // Atoms above the cutoff.
    for (std::size_t trial = 0; trial < n_trials; ++trial)
        for (const auto& a : sample_poisson_points(F, Window{0.0, 1.0}, rng).atoms) base += a.f.increment(1.0, rng);
    // Dyadic shells [v_min 2^{-k-1}, v_min 2^{-k}). Each shell gets the same
    // expected atom count, so sparse shells (small gamma) are still resolved
    // and dense ones stay cheap.
    double below = 0.0;
    for (std::size_t k = 0; k < shells; ++k) {
        const double hi = F.v_min * std::ldexp(1.0, -static_cast<int>(k));
        const double lo = hi / 2.0;
        const double mass = std::pow(lo, -g) - std::pow(hi, -g);
        if (mass > count_cap) break;
        const double trials = shell_atoms / mass;
        const auto n = sample_poisson(mass * trials, rng);
        double sum = 0.0;
        for (std::uint64_t i = 0; i < n; ++i) {
            const double v = std::pow(std::pow(hi, -g) + rng.uniform() * mass, -1.0 / g);
            sum += F.exponent_of(v).increment(1.0, rng);
        }
        out.shell_means.push_back(sum / trials);
        below += sum / trials;
    }
    out.mean_total = base / static_cast<double>(n_trials) + below;

    std::ostringstream diag;
    const std::size_t n = out.shell_means.size();
    if (n < 3) {
        out.finite = false;
        diag << "only " << n << " shells below the cutoff fit the atom budget";
        out.diagnostic = diag.str();
        return out;
    }
    // Geometric decay rate over the deeper half of the shells.
    const std::size_t from = n / 2;
    const double first = out.shell_means[from], last = out.shell_means[n - 1];
    out.decay_ratio = first > 0 && last > 0 ? std::pow(last / first, 1.0 / static_cast<double>(n - 1 - from)) : 0.0;
    const double tail = out.decay_ratio < 1 ? last * out.decay_ratio / (1.0 - out.decay_ratio) : INFINITY;
    // Finitely many atoms lie above the cutoff and each is a.s. finite, so only
    // the mass below it can diverge (the mean above may be infinite for gamma < 1).
    out.finite = out.decay_ratio < 0.98 && below + tail < guard;
    diag << "shell decay ratio " << out.decay_ratio << ", mean mass below cutoff " << below << ", extrapolated tail "
         << tail;
    out.diagnostic = diag.str();
    return out;
}

}  // namespace rtrw
