#include "commands.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "rtrw/limits.hpp"
#include "rtrw/models.hpp"
#include "rtrw/walk.hpp"

namespace rtrw::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

TestReport report(std::string stat, double value, double threshold, std::string cmp, double target = 0.0) {
    TestReport r;
    r.statistic = std::move(stat);
    r.value = value;
    r.threshold = threshold;
    r.comparison = std::move(cmp);
    r.target = target;
    r.decide();
    return r;
}

json reports_json(const std::vector<TestReport>& reports) {
    json a = json::array();
    for (const auto& r : reports) a.push_back(r.to_json());
    return a;
}

std::string padded(std::size_t i, std::size_t n) {
    std::size_t width = 1;
    for (std::size_t m = n > 0 ? n - 1 : 0; m >= 10; m /= 10) ++width;
    std::ostringstream o;
    o << std::setw(static_cast<int>(width)) << std::setfill('0') << i;
    return o.str();
}

std::string fmt(double x) { return format_double(x); }

}  // namespace

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 digest failed");
    std::ostringstream o;
    for (unsigned int i = 0; i < len; ++i) o << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return o.str();
}

// ---------------------------------------------------------------------------
// Manifest and output.

json RunManifest::to_json() const {
    json j;
    j["command"] = command;
    j["config_hash"] = config_hash;
    j["version"] = version;
    j["master_seed"] = master_seed;
    j["workers"] = workers;
    json s = json::array();
    for (const auto& r : seeds) s.push_back({{"index", r.index}, {"seeds", r.seeds}});
    j["seeds"] = s;
    json f = json::array();
    for (const auto& e : files) f.push_back({{"path", e.path}, {"sha256", e.sha256}, {"bytes", e.bytes}});
    j["files"] = f;
    j["timings"] = timings;
    return j;
}

RunManifest RunManifest::from_json(const json& j) {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.version = j.at("version").get<std::string>();
    m.master_seed = j.at("master_seed").get<std::uint64_t>();
    m.workers = j.at("workers").get<std::size_t>();
    for (const auto& s : j.at("seeds"))
        m.seeds.push_back({s.at("index").get<std::uint64_t>(), s.at("seeds").get<std::map<std::string, std::uint64_t>>()});
    for (const auto& f : j.at("files"))
        m.files.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>(),
                           f.at("bytes").get<std::uint64_t>()});
    m.timings = j.at("timings").get<std::map<std::string, double>>();
    return m;
}

OutputSink::OutputSink(const ExperimentConfig& cfg, std::string command)
    : dir_(cfg.out), start_(std::chrono::steady_clock::now()) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
    manifest_.command = std::move(command);
    const std::string canonical = cfg.to_ini(false);
    manifest_.config_hash = sha256_hex(canonical);
    manifest_.master_seed = cfg.seed;
    manifest_.workers = cfg.workers;
    write("config.ini", canonical);
}

void OutputSink::write(const std::string& name, const std::string& content) {
    const fs::path p = dir_ / name;
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    f.close();
    if (!f) throw IoError("cannot write " + p.string());
    manifest_.files.push_back({name, sha256_hex(content), content.size()});
}

void OutputSink::write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

fs::path OutputSink::finish() {
    manifest_.timings["total"] = seconds_since(start_);
    const fs::path p = dir_ / "manifest.json";
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    f << manifest_.to_json().dump(2) << "\n";
    f.close();
    if (!f) throw IoError("cannot write " + p.string());
    return p;
}

bool CommandResult::any_failed() const {
    return std::any_of(reports.begin(), reports.end(), [](const TestReport& r) { return r.verdict == Verdict::fail; });
}

// ---------------------------------------------------------------------------
// Trajectories.

std::string trajectory_csv(const Trajectory& traj) {
    std::string s = "t,x\n";
    s.reserve(s.size() + traj.size() * 24);
    for (std::size_t i = 0; i < traj.size(); ++i) {
        s += fmt(traj.times[i]);
        s += ',';
        s += fmt(traj.positions[i]);
        s += '\n';
    }
    return s;
}

LimitOptions limit_options(const ExperimentConfig& cfg, double) {
    LimitOptions o;
    o.dt = cfg.dt;
    o.h = cfg.h;
    o.grid = cfg.grid;
    o.v_min_rel = cfg.v_min_rel;
    o.keep_atoms = cfg.keep_atoms;
    o.max_steps = cfg.max_steps;
    return o;
}

namespace {

AtomIntensity ssbm_intensity(const ExperimentConfig& cfg, double T) {
    const double v_min = cfg.v_min > 0 ? cfg.v_min : default_v_min(cfg.limit_gamma, T, cfg.v_min_rel);
    return AtomIntensity::poissonian(cfg.limit_gamma, v_min);
}

}  // namespace

Trajectory simulate_limit_process(const ExperimentConfig& cfg, double T, Stream& rng) {
    const LimitOptions opts = limit_options(cfg, T);
    switch (cfg.process) {
        case ProcessId::bm: {
            const double dt = cfg.dt > 0 ? cfg.dt : 1e-4 * T;
            const auto path = sample_bm(T, dt, rng);
            Trajectory tr;
            for (std::size_t k = 0; k <= cfg.grid; ++k) {
                const double t = T * static_cast<double>(k) / static_cast<double>(cfg.grid);
                const auto j = std::min(path.b.size() - 1, static_cast<std::size_t>(std::llround(t / dt)));
                tr.times.push_back(t);
                tr.positions.push_back(path.b[j]);
            }
            tr.horizon = T + T / static_cast<double>(cfg.grid);
            return tr;
        }
        case ProcessId::fk:
            return sample_fk(cfg.limit_gamma, T, rng, opts, cfg.stable_scale).trajectory;
        case ProcessId::fin:
            return sample_fin(cfg.limit_gamma, cfg.v_min, T, rng, opts).trajectory;
        case ProcessId::ssbm:
            return sample_ssbm(ssbm_intensity(cfg, T), T, rng, opts).trajectory;
        case ProcessId::mixture:
            return sample_fk_ssbm_mixture(cfg.limit_gamma, ssbm_intensity(cfg, T), T, rng, opts, cfg.stable_scale)
                .trajectory;
        case ProcessId::walk:
            break;
    }
    throw UsageError("not a limit process: " + to_string(cfg.process));
}

CommandResult cmd_simulate(const ExperimentConfig& cfg, bool limit_only) {
    if (limit_only && cfg.process == ProcessId::walk)
        throw UsageError("simulate-limit needs [model] id = bm, fk, fin, ssbm or mixture");
    const bool walk = cfg.process == ProcessId::walk;
    OutputSink sink(cfg, limit_only ? "simulate-limit" : "simulate");
    const auto t0 = std::chrono::steady_clock::now();

    std::shared_ptr<const LandscapeModel> model;
    double q = NAN;
    if (walk) {
        cfg.model.validate();
        model = make_landscape_model(cfg.model);
        if (cfg.rescale) q = q_of_epsilon(cfg.model, cfg.eps.front());
    }
    const double T = cfg.time > 0 ? cfg.time : 1.0;

    struct Out {
        std::string csv;
        json meta;
        ReplicaSeed seeds;
    };
    auto produce = [&](std::size_t r) {
        Out o;
        o.seeds.index = r;
        Trajectory traj;
        if (walk) {
            const std::uint64_t env_seed = Stream::derive(cfg.seed, "env", r).seed();
            Stream rng = Stream::derive(cfg.seed, "walk", r);
            o.seeds.seeds = {{"env", env_seed}, {"walk", rng.seed()}};
            Landscape land(model, env_seed);
            RtrwRun run;
            if (cfg.time > 0) {
                const double horizon = cfg.rescale ? cfg.time / q : cfg.time;
                run = simulate_rtrw_until(land, horizon, cfg.max_steps, rng);
            } else {
                run = simulate_rtrw(land, cfg.steps, rng);
            }
            traj = cfg.rescale ? rescale_trajectory(run.trajectory, cfg.eps.front(), q) : run.trajectory;
            o.meta = {{"steps", run.steps}, {"exhausted", run.exhausted}};
        } else {
            Stream rng = Stream::derive(cfg.seed, "limit", r);
            o.seeds.seeds = {{"limit", rng.seed()}};
            traj = simulate_limit_process(cfg, T, rng);
        }
        o.meta["horizon"] = traj.horizon;
        o.meta["records"] = traj.size();
        o.csv = trajectory_csv(traj);
        return o;
    };

    json replicas = json::array();
    std::size_t exhausted = 0;
    parallel_ordered<Out>(cfg.replicas, cfg.workers, produce, [&](std::size_t r, Out&& o) {
        const std::string name = "traj_" + padded(r, cfg.replicas) + ".csv";
        sink.write(name, o.csv);
        o.meta["file"] = name;
        o.meta["replica"] = r;
        if (o.meta.value("exhausted", false)) ++exhausted;
        replicas.push_back(std::move(o.meta));
        sink.manifest().seeds.push_back(std::move(o.seeds));
    });

    json side;
    side["process"] = to_string(cfg.process);
    if (walk) {
        side["model"] = cfg.model.name();
        side["alpha"] = cfg.model.alpha;
        side["beta"] = cfg.model.beta;
        side["rescale"] = cfg.rescale;
        if (cfg.rescale) {
            side["eps"] = cfg.eps.front();
            side["q"] = q;
        }
    } else {
        side["gamma"] = cfg.limit_gamma;
        side["T"] = T;
    }
    side["columns"] = {"t", "x"};
    side["replicas"] = replicas;

    CommandResult res;
    if (walk && cfg.time > 0) {
        TestReport ex = report("exhausted_walks", static_cast<double>(exhausted), 0.0, "<=");
        ex.sample_sizes = {cfg.replicas};
        ex.seeds = {cfg.seed};
        res.reports.push_back(ex);
    }
    side["reports"] = reports_json(res.reports);
    sink.write_json("simulate.json", side);
    sink.manifest().timings["simulate"] = seconds_since(t0);
    sink.finish();
    res.files = sink.manifest().files.size();
    res.summary = std::to_string(cfg.replicas) + " trajectories written to " + sink.dir().string();
    return res;
}

// ---------------------------------------------------------------------------
// Comb verification.

ToothBlockWalk::ToothBlockWalk(std::int64_t n, double beta, int k) : n_(n), k_(k) {
    if (n < 1 || n > 4096 || k < 1) throw std::invalid_argument("block walk needs 1 <= n <= 4096 and k >= 1");
    const double p = ToothLaw::make(n, beta).p;
    cdf_.resize(static_cast<std::size_t>(n));
    for (std::int64_t x0 = 1; x0 <= n; ++x0) {
        std::vector<double> cur(static_cast<std::size_t>(n + 1), 0.0), nxt(cur.size());
        cur[static_cast<std::size_t>(x0)] = 1.0;
        std::vector<double> w;
        for (int s = 0; s < k; ++s) {
            std::fill(nxt.begin(), nxt.end(), 0.0);
            for (std::int64_t x = 1; x <= n; ++x) {
                const double m = cur[static_cast<std::size_t>(x)];
                if (m == 0) continue;
                if (x == n && n > 1) {
                    nxt[static_cast<std::size_t>(x - 1)] += m;
                } else if (n == 1) {
                    nxt[0] += m;
                } else {
                    nxt[static_cast<std::size_t>(x + 1)] += m * p;
                    nxt[static_cast<std::size_t>(x - 1)] += m * (1 - p);
                }
            }
            w.push_back(nxt[0]);
            nxt[0] = 0.0;
            std::swap(cur, nxt);
        }
        for (std::int64_t y = 1; y <= n; ++y) w.push_back(cur[static_cast<std::size_t>(y)]);
        auto& c = cdf_[static_cast<std::size_t>(x0 - 1)];
        c.resize(w.size());
        std::partial_sum(w.begin(), w.end(), c.begin());
    }
}

double ToothBlockWalk::sample(Stream& rng, double cap) const {
    std::int64_t x = 1;
    double t = 0.0;
    while (t < cap) {
        const auto& c = cdf_[static_cast<std::size_t>(x - 1)];
        const double u = rng.uniform() * c.back();
        const auto o = std::min<std::size_t>(static_cast<std::size_t>(std::upper_bound(c.begin(), c.end(), u) - c.begin()),
                                             c.size() - 1);
        if (o < static_cast<std::size_t>(k_)) return std::min(t + static_cast<double>(o + 1), cap);
        x = static_cast<std::int64_t>(o) - k_ + 1;
        t += k_;
    }
    return cap;
}

namespace {
const double kBetas[] = {0.0, 0.5, 1.0, 2.0};
const double kPgfS[] = {0.5, 0.9, 0.99};
// Excursions longer than this contribute at most 0.99^4000 < 1e-17 to E[s^T].
constexpr double kPgfCap = 4000;
}  // namespace

std::vector<TestReport> verify_pgf(const ExperimentConfig& cfg) {
    std::vector<TestReport> out;
    double worst = 0;
    std::string where;
    for (std::int64_t n = 1; n <= cfg.max_n; ++n)
        for (double b : kBetas)
            for (double s : kPgfS) {
                const double d = std::abs(comb_tooth_pgf(n, b, s) - comb_tooth_pgf_recursive(n, b, s));
                if (d > worst) {
                    worst = d;
                    where = "N=" + std::to_string(n) + " beta=" + fmt(b) + " s=" + fmt(s);
                }
            }
    TestReport r = report("pgf_closed_vs_recursion_max_abs", worst, 1e-10, "<=");
    r.note = "over N<=" + std::to_string(cfg.max_n) + ", beta in {0,0.5,1,2}, s in {0.5,0.9,0.99}";
    if (!where.empty()) r.note += "; worst at " + where;
    out.push_back(r);

    // Monte Carlo: one sample set per (N, beta), all s read from it.
    double worst_z = 0;
    std::string zwhere;
    for (std::int64_t n = 1; n <= cfg.mc_max_n; ++n)
        for (std::size_t bi = 0; bi < std::size(kBetas); ++bi) {
            const double b = kBetas[bi];
            const ToothBlockWalk walk(n, b, 64);
            Stream rng = Stream::derive(cfg.seed, "pgf-mc", static_cast<std::uint64_t>(n) * 16 + bi);
            double sum[3] = {0, 0, 0}, sum2[3] = {0, 0, 0};
            for (std::size_t i = 0; i < cfg.mc_samples; ++i) {
                const double t = walk.sample(rng, kPgfCap);
                for (int k = 0; k < 3; ++k) {
                    const double v = t >= kPgfCap ? 0.0 : std::pow(kPgfS[k], t);
                    sum[k] += v;
                    sum2[k] += v * v;
                }
            }
            const double ns = static_cast<double>(cfg.mc_samples);
            for (int k = 0; k < 3; ++k) {
                const double mean = sum[k] / ns;
                const double var = std::max(sum2[k] / ns - mean * mean, 0.0);
                const double se = std::sqrt(var / ns);
                const double exact = comb_tooth_pgf(n, b, kPgfS[k]);
                // A degenerate law (N = 1) has zero variance and must match up to rounding.
                const double z = se > 0 ? std::abs(mean - exact) / se : (std::abs(mean - exact) < 1e-9 ? 0.0 : INFINITY);
                if (z > worst_z) {
                    worst_z = z;
                    zwhere = "N=" + std::to_string(n) + " beta=" + fmt(b) + " s=" + fmt(kPgfS[k]);
                }
            }
        }
    TestReport mc = report("pgf_mc_max_abs_z", worst_z, 3.0, "<=");
    mc.sample_sizes = {cfg.mc_samples};
    mc.seeds = {cfg.seed};
    mc.note = "N<=" + std::to_string(cfg.mc_max_n) + ", tooth walk simulated in exact 64-step blocks, capped at 4000 steps";
    if (!zwhere.empty()) mc.note += "; worst at " + zwhere;
    out.push_back(mc);
    return out;
}

std::vector<TestReport> verify_moments(const ExperimentConfig&) {
    using boost::multiprecision::cpp_rational;
    std::vector<TestReport> out;
    // Beta = 0: the tooth walk is symmetric, p = 1/2 exactly.
    std::size_t mismatches = 0;
    const std::int64_t n_max = 1000;
    for (std::int64_t n = 1; n <= n_max; ++n) {
        const auto m = tooth_moments_recursive<cpp_rational>(n, cpp_rational(1, 2));
        if (m.m != cpp_rational(2 * n - 1)) ++mismatches;
    }
    TestReport r = report("beta0_mean_mismatches", static_cast<double>(mismatches), 0.0, "<=");
    r.note = "exact rational recursion against 2N-1 for N<=1000";
    out.push_back(r);

    for (double b : {0.5, 1.0}) {
        std::vector<double> dev;
        for (double n : {1e2, 1e3, 1e4, 1e5}) {
            const auto ex = comb_tooth_moments_exact(static_cast<std::int64_t>(n), b);
            const auto as = comb_tooth_moments_asymptotic(n, b);
            dev.push_back(std::abs(ex.m / as.m - 1.0));
        }
        TestReport last = report("mean_ratio_deviation_beta=" + fmt(b) + "_N=1e5", dev.back(), 0.25, "<=");
        std::string devs;
        for (double d : dev) devs += (devs.empty() ? "" : ", ") + fmt(d);
        last.note = "|exact/asymptotic - 1| at N=1e2..1e5: " + devs;
        out.push_back(last);
        std::size_t rises = 0;
        for (std::size_t i = 1; i < dev.size(); ++i)
            if (!(dev[i] < dev[i - 1])) ++rises;
        TestReport mono = report("mean_ratio_nonshrinking_steps_beta=" + fmt(b), static_cast<double>(rises), 0.0, "<=");
        mono.note = last.note;
        out.push_back(mono);
    }
    return out;
}

std::vector<TestReport> verify_tanh(const ExperimentConfig&, std::vector<TanhPoint>* curve) {
    std::vector<TestReport> out;
    for (double y : {0.5, 1.0, 2.0}) {
        for (double eps : {1e-3, 1e-4, 1e-5, 1e-6}) {
            const double root = std::sqrt(2 * eps);
            const double n = std::floor(y / root);
            const double v = comb_tooth_one_minus_pgf(n, 0.0, std::exp(-eps)) / root;
            if (curve) curve->push_back({y, eps, v, std::tanh(y)});
            if (eps == 1e-6) {
                TestReport r = report("tanh_rel_err_y=" + fmt(y) + "_eps=1e-06", std::abs(v / std::tanh(y) - 1), 0.01, "<=");
                r.note = "value " + fmt(v) + " vs tanh " + fmt(std::tanh(y));
                out.push_back(r);
            }
        }
    }
    return out;
}

CommandResult cmd_verify_comb(const ExperimentConfig& cfg) {
    OutputSink sink(cfg, "verify-comb");
    CommandResult res;
    auto t0 = std::chrono::steady_clock::now();
    for (auto& r : verify_pgf(cfg)) res.reports.push_back(r);
    sink.manifest().timings["pgf"] = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    for (auto& r : verify_moments(cfg)) res.reports.push_back(r);
    sink.manifest().timings["moments"] = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    std::vector<TanhPoint> curve;
    for (auto& r : verify_tanh(cfg, &curve)) res.reports.push_back(r);
    sink.manifest().timings["tanh"] = seconds_since(t0);

    std::string dat = "# y eps value tanh(y)\n";
    for (const auto& p : curve) dat += fmt(p.y) + " " + fmt(p.eps) + " " + fmt(p.value) + " " + fmt(p.target) + "\n";
    sink.write("tanh.dat", dat);

    // Tooth moments against their asymptotics, for plotting.
    std::string mom = "# N exact_mean(beta=0.5) asymptotic exact_mean(beta=1) asymptotic\n";
    for (double n : {1e1, 3e1, 1e2, 3e2, 1e3, 3e3, 1e4, 3e4, 1e5}) {
        mom += fmt(n);
        for (double b : {0.5, 1.0})
            mom += " " + fmt(comb_tooth_moments_exact(static_cast<std::int64_t>(n), b).m) + " " +
                   fmt(comb_tooth_moments_asymptotic(n, b).m);
        mom += "\n";
    }
    sink.write("moments.dat", mom);
    sink.write_json("verify_comb.json", {{"command", "verify-comb"}, {"reports", reports_json(res.reports)}});
    sink.finish();
    res.files = sink.manifest().files.size();
    return res;
}

// ---------------------------------------------------------------------------
// Phase scan.

namespace {

ModelSpec scan_spec(const ExperimentConfig& cfg, double a, double b) {
    if (cfg.model.id == ModelId::comb) return ModelSpec::comb(a, b);
    return ModelSpec::transparent(a, b, cfg.model.c);
}

int label_code(PhaseLabel l) {
    switch (l) {
        case PhaseLabel::BM: return 0;
        case PhaseLabel::FK: return 1;
        case PhaseLabel::FIN: return 2;
        case PhaseLabel::SSBM: return 3;
        case PhaseLabel::unclassified: return -1;
    }
    return -1;
}

}  // namespace

void check_scan_grid(const ExperimentConfig& cfg) {
    if (cfg.process != ProcessId::walk || (cfg.model.id != ModelId::transparent && cfg.model.id != ModelId::comb))
        throw UsageError("phase-scan needs [model] id = transparent or comb");
    if (cfg.alphas.empty() || cfg.betas.empty()) throw UsageError("phase-scan needs [scan] alpha and beta lists");
    for (double a : cfg.alphas)
        for (double b : cfg.betas) {
            const auto p = predicted_phase(cfg.model.id, a, b, cfg.margin);
            if (p.label == PhaseLabel::unclassified) {
                throw UsageError("cell (alpha=" + fmt(a) + ", beta=" + fmt(b) + ") is within margin " + fmt(cfg.margin) +
                                 " of a phase boundary (distance " + fmt(boundary_distance(cfg.model.id, a, b)) +
                                 "): " + p.note);
            }
        }
}

CellResult scan_cell(const ExperimentConfig& cfg, double alpha, double beta, std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    CellResult c;
    c.alpha = alpha;
    c.beta = beta;
    const ModelSpec spec = scan_spec(cfg, alpha, beta);
    if (cfg.eps.size() == 1) {
        c.eps.eps = cfg.eps.front();
        c.eps.within_budget = true;
    } else {
        c.eps = scan_epsilon(spec, cfg.eps, cfg.draw_budget, cfg.pilots, seed, cfg.times.back());
    }
    ClassifyOptions o;
    o.eps = c.eps.eps;
    o.replicas = cfg.replicas;
    o.times = cfg.times;
    o.limit_samples = cfg.limit_samples;
    o.env_pairs = std::min(cfg.env_pairs, cfg.replicas);
    o.seed = seed;
    o.max_steps = cfg.max_steps;
    o.limit.v_min_rel = cfg.v_min_rel;
    c.cls = classify_limit(spec, o);
    c.seconds = seconds_since(t0);
    return c;
}

std::vector<TestReport> scan_summary(const std::vector<CellResult>& cells, double required_rate) {
    std::size_t agree = 0, confident_fail = 0;
    for (const auto& c : cells) {
        if (c.cls.verdict == Verdict::pass) ++agree;
        if (c.cls.verdict == Verdict::fail && c.cls.confident) ++confident_fail;
    }
    const double rate = cells.empty() ? 0.0 : static_cast<double>(agree) / static_cast<double>(cells.size());
    TestReport r = report("phase_agreement_rate", rate, required_rate, ">=");
    r.sample_sizes = {cells.size()};
    r.note = std::to_string(agree) + " of " + std::to_string(cells.size()) + " cells match the predicted phase";
    TestReport f = report("confident_contradictions", static_cast<double>(confident_fail), 0.0, "<=");
    f.sample_sizes = {cells.size()};
    return {r, f};
}

CommandResult cmd_phase_scan(const ExperimentConfig& cfg) {
    check_scan_grid(cfg);
    OutputSink sink(cfg, "phase-scan");
    const std::string model = to_string(cfg.model.id);

    std::string table = "model,alpha,beta,label,exponent,schedule_power\n";
    struct Cell {
        double a, b;
    };
    std::vector<Cell> grid;
    for (double a : cfg.alphas)
        for (double b : cfg.betas) {
            grid.push_back({a, b});
            const auto p = predicted_phase(cfg.model.id, a, b, cfg.margin);
            table += model + "," + fmt(a) + "," + fmt(b) + "," + to_string(p.label) + "," + fmt(p.exponent) + "," +
                     fmt(p.schedule_power) + "\n";
        }
    sink.write("phase_table.csv", table);

    std::vector<CellResult> cells;
    parallel_ordered<CellResult>(
        grid.size(), cfg.workers,
        [&](std::size_t i) { return scan_cell(cfg, grid[i].a, grid[i].b, Stream::derive(cfg.seed, "cell", i).seed()); },
        [&](std::size_t i, CellResult&& c) {
            sink.manifest().seeds.push_back({i, {{"cell", Stream::derive(cfg.seed, "cell", i).seed()}}});
            sink.manifest().timings["cell_" + std::to_string(i)] = c.seconds;
            cells.push_back(std::move(c));
        });

    std::string csv = "model,alpha,beta,predicted,empirical,eps,q,nu_hat,nu_predicted,ks_p,env_correlation,verdict,confident\n";
    std::string dat = "# alpha beta predicted_code empirical_code agree\n";
    json jc = json::array();
    for (const auto& c : cells) {
        const auto& k = c.cls;
        csv += model + "," + fmt(c.alpha) + "," + fmt(c.beta) + "," + to_string(k.predicted.label) + "," +
               to_string(k.empirical) + "," + fmt(c.eps.eps) + "," + fmt(k.q) + "," + fmt(k.msd.nu) + "," +
               fmt(k.predicted.nu()) + "," + fmt(k.ks.p_value) + "," + fmt(k.env_correlation) + "," +
               to_string(k.verdict) + "," + (k.confident ? "true" : "false") + "\n";
        dat += fmt(c.alpha) + " " + fmt(c.beta) + " " + std::to_string(label_code(k.predicted.label)) + " " +
               std::to_string(label_code(k.empirical)) + " " + (k.verdict == Verdict::pass ? "1" : "0") + "\n";
        json e = k.to_json();
        e["alpha"] = c.alpha;
        e["beta"] = c.beta;
        e["eps"] = c.eps.eps;
        e["eps_within_budget"] = c.eps.within_budget;
        json pil = json::array();
        for (const auto& [eps, steps] : c.eps.pilots) pil.push_back({eps, std::isfinite(steps) ? json(steps) : json()});
        e["eps_pilots"] = pil;
        jc.push_back(e);
    }
    sink.write("phase_scan.csv", csv);
    sink.write("phase_map.dat", dat);

    CommandResult res;
    res.reports = scan_summary(cells);
    sink.write_json("phase_scan.json", {{"command", "phase-scan"},
                                        {"model", model},
                                        {"margin", cfg.margin},
                                        {"cells", jc},
                                        {"reports", reports_json(res.reports)}});
    sink.finish();
    res.files = sink.manifest().files.size();
    res.summary = res.reports.front().note;
    return res;
}

// ---------------------------------------------------------------------------
// Assumptions.

CommandResult cmd_assumptions(const ExperimentConfig& cfg) {
    if (cfg.process != ProcessId::walk) throw UsageError("assumptions needs a walk model in [model]");
    if (cfg.eps.size() < 2) throw UsageError("assumptions needs at least two [schedule] eps values");
    const ModelSpec& spec = cfg.model;
    spec.validate();
    OutputSink sink(cfg, "assumptions");
    CommandResult res;
    const auto phase = predicted_phase(spec.id, spec.alpha, spec.beta);
    json doc;
    doc["command"] = "assumptions";
    doc["model"] = spec.name();
    doc["alpha"] = spec.alpha;
    doc["beta"] = spec.beta;
    doc["predicted"] = to_string(phase.label);

    auto t0 = std::chrono::steady_clock::now();
    Stream tail_rng = Stream::derive(cfg.seed, "ht-samples");
    Stream boot = Stream::derive(cfg.seed, "ht-bootstrap");
    const auto tail = check_ht(mean_samples(spec, cfg.tail_samples, tail_rng), boot);
    sink.manifest().timings["ht"] = seconds_since(t0);
    sink.manifest().seeds.push_back({0, {{"ht-samples", tail_rng.seed()}, {"ht-bootstrap", boot.seed()}}});
    const bool expect_heavy = phase.label != PhaseLabel::BM;
    TestReport ht;
    ht.statistic = expect_heavy ? "ht_heavy_tail" : "ht_light_tail";
    ht.value = tail.gamma;
    ht.threshold = 1.0;
    ht.comparison = expect_heavy ? "<" : ">=";
    ht.verdict = tail.heavy_tail == expect_heavy ? Verdict::pass : Verdict::fail;
    ht.sample_sizes = {cfg.tail_samples};
    ht.seeds = {cfg.seed};
    ht.note = "gamma_hat " + fmt(tail.gamma) + " in [" + fmt(tail.ci_lo) + ", " + fmt(tail.ci_hi) + "], k=" +
              std::to_string(tail.k) + "; " + tail.diagnostic;
    res.reports.push_back(ht);
    doc["ht"] = {{"gamma", tail.gamma},
                 {"ci", {tail.ci_lo, tail.ci_hi}},
                 {"k", tail.k},
                 {"gamma_at_k", tail.gamma_at_k},
                 {"heavy_tail", tail.heavy_tail}};

    if (tail.heavy_tail) {
        t0 = std::chrono::steady_clock::now();
        const auto L = check_L(spec, cfg.eps, cfg.lambdas);
        sink.manifest().timings["L"] = seconds_since(t0);
        // FK points are those where the conditioned transforms vanish.
        const bool expect_zero = phase.label == PhaseLabel::FK;
        TestReport lr;
        lr.statistic = expect_zero ? "L_degenerates" : "L_nontrivial";
        lr.value = L.sup_norm.empty() ? NAN : L.sup_norm.back();
        lr.comparison = expect_zero ? "<" : ">";
        lr.threshold = 0.0;
        const bool zero = L.limit == "0";
        lr.verdict = expect_zero ? (zero ? Verdict::pass : L.nontrivial ? Verdict::fail : Verdict::inconclusive)
                                 : L.verdict;
        lr.note = "limit " + L.limit;
        res.reports.push_back(lr);
        json jl;
        jl["eps"] = L.eps;
        jl["lambda"] = L.lambda;
        jl["psi"] = L.psi;
        jl["limit"] = L.limit;
        jl["sup_step"] = L.sup_step;
        jl["sup_to_linear"] = L.sup_to_linear;
        jl["sup_to_poisson"] = L.sup_to_poisson;
        doc["L"] = jl;
        std::string dat = "# lambda psi(eps_1) psi(eps_2) ...\n";
        for (std::size_t j = 0; j < L.lambda.size(); ++j) {
            dat += fmt(L.lambda[j]);
            for (std::size_t i = 0; i < L.eps.size(); ++i) dat += " " + fmt(L.psi[i][j]);
            dat += "\n";
        }
        sink.write("psi.dat", dat);

        auto decay = [&](const char* name, const DecayCheck& d) {
            TestReport r;
            r.statistic = name;
            r.value = d.log_slope;
            r.threshold = 0.0;
            r.comparison = ">";
            r.verdict = d.verdict;
            r.note = d.note;
            res.reports.push_back(r);
            doc[name] = {{"eps", d.eps}, {"values", d.values}, {"log_slope", d.log_slope}, {"monotone", d.monotone}};
        };
        t0 = std::chrono::steady_clock::now();
        if (phase.label == PhaseLabel::FIN) decay("fin_condition", check_fin_condition(spec, cfg.eps));
        if (phase.label == PhaseLabel::FK) decay("fk_second_moment", check_fk_second_moment(spec, cfg.eps));
        sink.manifest().timings["decay"] = seconds_since(t0);
    }
    doc["reports"] = reports_json(res.reports);
    sink.write_json("assumptions.json", doc);
    sink.finish();
    res.files = sink.manifest().files.size();
    return res;
}

// ---------------------------------------------------------------------------
// Report.

CommandResult cmd_report(const ExperimentConfig& cfg) {
    const fs::path dir = cfg.out;
    const fs::path mpath = dir / "manifest.json";
    std::ifstream f(mpath);
    if (!f) throw IoError("cannot read " + mpath.string());
    RunManifest m;
    try {
        m = RunManifest::from_json(json::parse(f));
    } catch (const json::exception& e) {
        throw IoError("malformed manifest " + mpath.string() + ": " + e.what());
    }
    CommandResult res;
    std::size_t bad = 0;
    std::string bad_list;
    for (const auto& file : m.files) {
        std::ifstream in(dir / file.path, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        if (!in || sha256_hex(ss.str()) != file.sha256) {
            ++bad;
            bad_list += (bad_list.empty() ? "" : ", ") + file.path;
            continue;
        }
        if (file.path.size() > 5 && file.path.ends_with(".json")) {
            const json j = json::parse(ss.str(), nullptr, false);
            if (j.is_object() && j.contains("reports"))
                for (const auto& r : j.at("reports")) res.reports.push_back(TestReport::from_json(r));
        }
    }
    TestReport integrity = report("files_failing_hash", static_cast<double>(bad), 0.0, "<=");
    integrity.sample_sizes = {m.files.size()};
    integrity.note = bad_list.empty() ? "all files match the manifest" : "mismatch: " + bad_list;
    res.reports.insert(res.reports.begin(), integrity);
    res.files = m.files.size();
    const auto fail = std::count_if(res.reports.begin(), res.reports.end(),
                                    [](const TestReport& r) { return r.verdict == Verdict::fail; });
    res.summary = m.command + " run (config " + m.config_hash.substr(0, 12) + ", version " + m.version + "): " +
                  std::to_string(res.reports.size()) + " reports, " + std::to_string(fail) + " failed";
    return res;
}

}  // namespace rtrw::cli
