#include "rtrw/walk.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rtrw {

WalkPath simulate_srw(std::size_t n_steps, Stream& rng) {
    WalkPath path;
    path.z.resize(n_steps + 1);
    path.z[0] = 0;
    std::uint64_t bits = 0;
    int left = 0;
    for (std::size_t k = 1; k <= n_steps; ++k) {
        if (left == 0) {
            bits = rng();
            left = 64;
        }
        path.z[k] = path.z[k - 1] + ((bits & 1) ? 1 : -1);
        bits >>= 1;
        --left;
    }
    return path;
}

std::int64_t LocalTimeField::total() const {
    std::int64_t t = 0;
    for (const auto& [x, c] : counts) t += c;
    return t;
}

LocalTimeField local_time(const WalkPath& path, std::size_t n) {
    if (path.z.empty() || n >= path.z.size())
        throw std::out_of_range("local time horizon " + std::to_string(n) + " exceeds path length");
    LocalTimeField L;
    for (std::size_t k = 0; k <= n; ++k) ++L.counts[path.z[k]];
    return L;
}

// ---------------------------------------------------------------------------

Landscape::Landscape(std::shared_ptr<const LandscapeModel> model, std::uint64_t env_seed)
    : model_(std::move(model)), env_seed_(env_seed) {
    if (!model_) throw std::invalid_argument("landscape needs a model");
}

Landscape Landscape::fixed(std::map<std::int64_t, TrapDistribution> laws) {
    Landscape l;
    l.fixed_ = std::move(laws);
    l.is_fixed_ = true;
    return l;
}

const TrapDistribution& Landscape::at(std::int64_t x) {
    if (is_fixed_) {
        auto it = fixed_.find(x);
        if (it == fixed_.end()) throw std::out_of_range("site " + std::to_string(x) + " missing from landscape");
        return it->second;
    }
    auto& side = x >= 0 ? pos_ : neg_;
    const auto idx = static_cast<std::size_t>(x >= 0 ? x : -(x + 1));
    if (idx >= side.size()) side.resize(std::max<std::size_t>(idx + 1, 2 * side.size()));
    auto& slot = side[idx];
    if (!slot) {
        Stream rng = Stream::derive(env_seed_, "site", site_index(x));
        slot = model_->draw(rng);
    }
    return *slot;
}

// ---------------------------------------------------------------------------

ClockProcess clock_process(const WalkPath& path, Landscape& landscape, Stream& rng, std::vector<VisitDraw>* draws) {
    ClockProcess clock;
    if (path.z.empty()) return clock;
    clock.s.resize(path.z.size());
    clock.s[0] = 0.0;
    std::map<std::int64_t, std::int64_t> visits;
    ExactSum sum;
    for (std::size_t k = 0; k + 1 < path.z.size(); ++k) {
        const std::int64_t x = path.z[k];
        const std::int64_t i = ++visits[x];
        const double d = landscape.at(x).sample(rng);
        if (draws) draws->push_back({x, i, d});
        sum.add(d);
        clock.s[k + 1] = sum.value();
    }
    return clock;
}

void AtomicTrapMeasure::add(std::int64_t x, std::int64_t visit, double mass) {
    if (!(mass > 0)) throw std::invalid_argument("trap measure masses must be positive");
    if (visit < 1) throw std::invalid_argument("visit index must be >= 1");
    atoms_[{x, visit}] = mass;
}

double AtomicTrapMeasure::mass(std::int64_t x, std::int64_t visit) const {
    auto it = atoms_.find({x, visit});
    return it == atoms_.end() ? 0.0 : it->second;
}

double AtomicTrapMeasure::total_mass(std::int64_t x_lo, std::int64_t x_hi) const {
    ExactSum s;
    for (auto it = atoms_.lower_bound({x_lo, std::numeric_limits<std::int64_t>::min()});
         it != atoms_.end() && it->first.first <= x_hi; ++it)
        s.add(it->second);
    return s.value();
}

AtomicTrapMeasure trap_measure_from_draws(const std::vector<VisitDraw>& draws) {
    AtomicTrapMeasure mu;
    for (const auto& d : draws) mu.add(d.x, d.visit, d.duration);
    return mu;
}

double trap_measure_functional(const AtomicTrapMeasure& mu, const LocalTimeField& L) {
    // Correct rounding makes this agree bit for bit with the clock, which
    // sums the same masses in time order.
    ExactSum s;
    for (const auto& [x, count] : L.counts)
        for (std::int64_t i = 1; i <= count; ++i) s.add(mu.mass(x, i));
    return s.value();
}

// ---------------------------------------------------------------------------

double Trajectory::at(double t) const {
    if (!(t >= 0) || !(t < horizon)) throw std::out_of_range("trajectory evaluated outside [0, horizon)");
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    return positions[static_cast<std::size_t>(it - times.begin()) - 1];
}

Trajectory trw_trajectory(const WalkPath& path, const ClockProcess& clock) {
    if (path.z.size() != clock.s.size()) throw std::invalid_argument("clock and path lengths differ");
    if (path.z.empty()) throw std::invalid_argument("empty path");
    Trajectory traj;
    traj.times = clock.s;
    traj.positions.assign(path.z.begin(), path.z.end());
    traj.horizon = clock.s.back();
    return traj;
}

Trajectory rescale_trajectory(const Trajectory& traj, double eps, double rho) {
    if (!(eps > 0) || !(rho > 0)) throw std::invalid_argument("rescaling factors must be positive");
    Trajectory out = traj;
    for (auto& t : out.times) t *= rho;
    for (auto& x : out.positions) x *= eps;
    out.horizon *= rho;
    return out;
}

RtrwRun simulate_rtrw(Landscape& landscape, std::size_t n_steps, Stream& rng) {
    const WalkPath path = simulate_srw(n_steps, rng);
    const ClockProcess clock = clock_process(path, landscape, rng);
    return {trw_trajectory(path, clock), false, n_steps};
}

RtrwRun simulate_rtrw_until(Landscape& landscape, double t_horizon, std::size_t max_steps, Stream& rng) {
    RtrwRun run;
    auto& tr = run.trajectory;
    tr.times.push_back(0.0);
    tr.positions.push_back(0.0);
    std::int64_t x = 0;
    CompensatedSum s;
    while (s.value() <= t_horizon) {
        if (run.steps == max_steps) {
            run.exhausted = true;
            break;
        }
        s.add(landscape.at(x).sample(rng));
        x += rng.coin() ? 1 : -1;
        ++run.steps;
        tr.times.push_back(s.value());
        tr.positions.push_back(static_cast<double>(x));
    }
    tr.horizon = tr.times.back();
    return run;
}

Observation observe_rtrw(Landscape& landscape, const std::vector<double>& times, Stream& rng,
                         std::uint64_t max_steps) {
    Observation obs;
    obs.positions.resize(times.size());
    if (times.empty()) return obs;
    if (!std::is_sorted(times.begin(), times.end()) || times.front() < 0)
        throw std::invalid_argument("observation times must be sorted and nonnegative");
    const double t_end = times.back();
    const std::uint64_t draws0 = rng.draws();
    std::size_t j = 0;
    std::int64_t x = 0;
    CompensatedSum s;
    while (true) {
        const double now = s.value();
        const double cap = (t_end - now) * (1.0 + 1e-12) + 1.0;
        s.add(landscape.at(x).sample_capped(rng, cap));
        const double next = s.value();
        while (j < times.size() && times[j] < next) obs.positions[j++] = static_cast<double>(x);
        if (j == times.size()) break;
        if (obs.steps == max_steps) {
            obs.exhausted = true;
            for (; j < times.size(); ++j) obs.positions[j] = static_cast<double>(x);
            break;
        }
        x += rng.coin() ? 1 : -1;
        ++obs.steps;
    }
    obs.draws = rng.draws() - draws0;
    return obs;
}

}  // namespace rtrw
