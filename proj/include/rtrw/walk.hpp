#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "rtrw/measures.hpp"
#include "rtrw/models.hpp"
#include "rtrw/rng.hpp"
#include "rtrw/summation.hpp"

namespace rtrw {

struct WalkPath {
    std::vector<std::int64_t> z;  // Z_0 = 0, |Z_{k+1} - Z_k| = 1
    std::size_t steps() const { return z.empty() ? 0 : z.size() - 1; }
};

WalkPath simulate_srw(std::size_t n_steps, Stream& rng);

struct LocalTimeField {
    std::map<std::int64_t, std::int64_t> counts;
    std::int64_t at(std::int64_t x) const {
        auto it = counts.find(x);
        return it == counts.end() ? 0 : it->second;
    }
    std::int64_t total() const;
};

// Visits to each site among Z_0..Z_n.
LocalTimeField local_time(const WalkPath& path, std::size_t n);

// Site -> trapping law for one landscape realization. Laws are drawn lazily
// from per-site substreams, so the realization does not depend on the order
// in which sites are explored.
class Landscape {
public:
    Landscape(std::shared_ptr<const LandscapeModel> model, std::uint64_t env_seed);
    // Explicit finite landscape; looking up any other site is an error.
    static Landscape fixed(std::map<std::int64_t, TrapDistribution> laws);

    const TrapDistribution& at(std::int64_t x);
    std::size_t materialized() const { return pos_.size() + neg_.size(); }

private:
    Landscape() = default;
    std::shared_ptr<const LandscapeModel> model_;
    std::uint64_t env_seed_ = 0;
    std::vector<std::optional<TrapDistribution>> pos_, neg_;
    std::map<std::int64_t, TrapDistribution> fixed_;
    bool is_fixed_ = false;
};

struct ClockProcess {
    std::vector<double> s;  // S(0) = 0, ..., S(n)
};

struct VisitDraw {
    std::int64_t x;
    std::int64_t visit;  // 1-based visit index at x
    double duration;
};

// S(n) = sum_{k<n} s_{Y_k}^{L(Y_k,k)}; the k-th draw is the duration of the
// visit to Z_k. Draws are optionally recorded.
ClockProcess clock_process(const WalkPath& path, Landscape& landscape, Stream& rng,
                           std::vector<VisitDraw>* draws = nullptr);

class AtomicTrapMeasure {
public:
    void add(std::int64_t x, std::int64_t visit, double mass);
    double mass(std::int64_t x, std::int64_t visit) const;
    // Total mass of atoms with site in [x_lo, x_hi].
    double total_mass(std::int64_t x_lo, std::int64_t x_hi) const;
    std::size_t size() const { return atoms_.size(); }
    const std::map<std::pair<std::int64_t, std::int64_t>, double>& atoms() const { return atoms_; }

private:
    std::map<std::pair<std::int64_t, std::int64_t>, double> atoms_;
};

AtomicTrapMeasure trap_measure_from_draws(const std::vector<VisitDraw>& draws);
// mu(U_L) = sum_x sum_{i <= L(x)} s_x^i
double trap_measure_functional(const AtomicTrapMeasure& mu, const LocalTimeField& L);

// Piecewise-constant right-continuous path: X_t = positions[k] on
// [times[k], times[k+1]), defined for t < horizon.
struct Trajectory {
    std::vector<double> times;
    std::vector<double> positions;
    double horizon = 0.0;

    double at(double t) const;
    std::size_t size() const { return times.size(); }
};

Trajectory trw_trajectory(const WalkPath& path, const ClockProcess& clock);
Trajectory rescale_trajectory(const Trajectory& traj, double eps, double rho);

struct RtrwRun {
    Trajectory trajectory;
    bool exhausted = false;  // step budget ran out before the time horizon
    std::size_t steps = 0;
};

// By step count: Z_0..Z_n with S(0)..S(n).
RtrwRun simulate_rtrw(Landscape& landscape, std::size_t n_steps, Stream& rng);
// By time horizon: runs until S(n) > t_horizon or max_steps is reached.
RtrwRun simulate_rtrw_until(Landscape& landscape, double t_horizon, std::size_t max_steps, Stream& rng);

// Positions X_t at sorted times for an RTRW, without storing the path.
// Visit durations are censored at the last requested time, which leaves the
// path on [0, times.back()] exact.
struct Observation {
    std::vector<double> positions;
    std::uint64_t steps = 0;
    std::uint64_t draws = 0;  // random draws consumed from the walk stream
    bool exhausted = false;
};
Observation observe_rtrw(Landscape& landscape, const std::vector<double>& times, Stream& rng,
                         std::uint64_t max_steps = std::uint64_t{1} << 40);

}  // namespace rtrw
