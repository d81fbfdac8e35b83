#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "rtrw/analysis.hpp"
#include "rtrw/config.hpp"

namespace rtrw::cli {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int { kOk = 0, kUsage = 1, kVerdict = 2, kIo = 3 };

// Raised for precondition violations that are the caller's fault (exit 1).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when output cannot be written or read back (exit 3).
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string sha256_hex(const std::string& bytes);

struct ManifestFile {
    std::string path;  // relative to the output directory
    std::string sha256;
    std::uint64_t bytes = 0;
};

struct ReplicaSeed {
    std::uint64_t index = 0;
    std::map<std::string, std::uint64_t> seeds;  // label -> stream seed
};

struct RunManifest {
    std::string command;
    std::string config_hash;  // SHA-256 of the canonical config text
    std::string version = kVersion;
    std::uint64_t master_seed = 0;
    std::size_t workers = 1;
    std::vector<ReplicaSeed> seeds;
    std::vector<ManifestFile> files;
    std::map<std::string, double> timings;  // seconds

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
};

// Writes files under one directory and records them in the manifest. Only
// the orchestrating thread writes.
class OutputSink {
public:
    OutputSink(const ExperimentConfig& cfg, std::string command);
    void write(const std::string& name, const std::string& content);
    void write_json(const std::string& name, const nlohmann::json& j);
    RunManifest& manifest() { return manifest_; }
    const std::filesystem::path& dir() const { return dir_; }
    // Writes manifest.json; returns its path.
    std::filesystem::path finish();

private:
    std::filesystem::path dir_;
    RunManifest manifest_;
    std::chrono::steady_clock::time_point start_;
};

struct CommandResult {
    std::vector<TestReport> reports;
    std::size_t files = 0;
    std::string summary;
    bool any_failed() const;
};

// Workers take indices from a shared counter; the caller's thread consumes
// results strictly in index order, so output never depends on scheduling.
template <class T, class Produce, class Consume>
void parallel_ordered(std::size_t n, std::size_t workers, Produce produce, Consume consume) {
    if (n == 0) return;
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) consume(i, produce(i));
        return;
    }
    std::vector<std::optional<T>> slots(n);
    std::atomic<std::size_t> next{0};
    std::mutex m;
    std::condition_variable cv;
    std::exception_ptr err;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                T v = produce(i);
                std::lock_guard<std::mutex> lock(m);
                slots[i] = std::move(v);
            } catch (...) {
                std::lock_guard<std::mutex> lock(m);
                if (!err) err = std::current_exception();
                next.store(n);
            }
            cv.notify_all();
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    try {
        for (std::size_t i = 0; i < n; ++i) {
            std::unique_lock<std::mutex> lock(m);
            cv.wait(lock, [&] { return slots[i].has_value() || err; });
            if (err) break;
            T v = std::move(*slots[i]);
            slots[i].reset();
            lock.unlock();
            consume(i, std::move(v));
        }
    } catch (...) {
        next.store(n);
        for (auto& t : pool) t.join();
        throw;
    }
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

// Building blocks shared with the acceptance suite.
std::string trajectory_csv(const Trajectory& traj);
LimitOptions limit_options(const ExperimentConfig& cfg, double T);
Trajectory simulate_limit_process(const ExperimentConfig& cfg, double T, Stream& rng);

// Exact simulation of the tooth walk on {0..n} (reflected at n, absorbed at 0)
// in blocks of k steps: for each start state the joint law of "absorbed at
// step s" or "at state y after k steps" is tabulated by dynamic programming.
class ToothBlockWalk {
public:
    ToothBlockWalk(std::int64_t n, double beta, int k = 16);
    // min(tau, cap) for the walk started at 1.
    double sample(Stream& rng, double cap) const;

private:
    std::int64_t n_;
    int k_;
    // Outcomes 0..k-1: absorbed at step s+1; k..k+n-1: at state y = o-k+1.
    std::vector<std::vector<double>> cdf_;
};

struct TanhPoint {
    double y, eps, value, target;
};
std::vector<TestReport> verify_pgf(const ExperimentConfig& cfg);
std::vector<TestReport> verify_moments(const ExperimentConfig& cfg);
std::vector<TestReport> verify_tanh(const ExperimentConfig& cfg, std::vector<TanhPoint>* curve = nullptr);

struct CellResult {
    double alpha = 0, beta = 0;
    EpsilonChoice eps;
    Classification cls;
    double seconds = 0;
};
// Rejects cells closer than the margin to a phase boundary.
void check_scan_grid(const ExperimentConfig& cfg);
CellResult scan_cell(const ExperimentConfig& cfg, double alpha, double beta, std::uint64_t seed);
// Agreement rate and confident-failure count over a scan.
std::vector<TestReport> scan_summary(const std::vector<CellResult>& cells, double required_rate = 0.8);

CommandResult cmd_simulate(const ExperimentConfig& cfg, bool limit_only = false);
CommandResult cmd_verify_comb(const ExperimentConfig& cfg);
CommandResult cmd_phase_scan(const ExperimentConfig& cfg);
CommandResult cmd_assumptions(const ExperimentConfig& cfg);
// Re-hashes the files listed in <out>/manifest.json and gathers every report.
CommandResult cmd_report(const ExperimentConfig& cfg);

}  // namespace rtrw::cli
