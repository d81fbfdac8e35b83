#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rtrw/analysis.hpp"
#include "rtrw/models.hpp"

namespace rtrw {

// Error carrying the offending line of a config file.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& source, int line, const std::string& msg);
    int line() const { return line_; }

private:
    int line_;
};

// Flat "key = value" text with [sections]; '#' and ';' start comments.
struct IniDocument {
    struct Entry {
        std::string value;
        int line = 0;
    };
    std::string source;
    std::map<std::string, std::map<std::string, Entry>> sections;

    static IniDocument parse(const std::string& text, const std::string& source = "<config>");
    static IniDocument load(const std::string& path);
};

enum class ProcessId { walk, bm, fk, fin, ssbm, mixture };
std::string to_string(ProcessId p);
std::optional<ProcessId> parse_process_id(const std::string& s);

struct ExperimentConfig {
    // [run]
    std::uint64_t seed = 1;
    std::size_t replicas = 1;
    std::size_t workers = 1;
    std::string out = "out";

    // [model]: a walk model or a limit process
    ProcessId process = ProcessId::walk;
    ModelSpec model{};
    double limit_gamma = 0.5;  // index of the limit process
    double stable_scale = 1.0;

    // [horizon]
    std::uint64_t steps = 1000;  // walk length when time = 0
    double time = 0.0;           // time horizon; > 0 selects time mode
    std::size_t grid = 100;      // output grid for limit processes and observed walks
    std::uint64_t max_steps = std::uint64_t{1} << 32;

    // [schedule]
    std::vector<double> eps = {0.05};
    bool rescale = false;  // emit eps X_{t/q(eps)} instead of the raw walk

    // [limit]
    double dt = 0.0;
    double h = 0.0;
    double v_min = 0.0;  // absolute cutoff; 0 selects v_min_rel
    double v_min_rel = 1e-3;
    bool keep_atoms = false;

    // [verify]
    std::size_t mc_samples = 1000000;
    std::int64_t max_n = 50;
    std::int64_t mc_max_n = 10;

    // [scan]
    std::vector<double> alphas = {};
    std::vector<double> betas = {};
    double margin = 0.1;
    std::size_t limit_samples = 2000;
    std::size_t env_pairs = 2000;
    std::vector<double> times = {0.25, 0.5, 1.0, 2.0, 4.0};
    // With several [schedule] eps values, each cell takes the smallest one whose
    // pilot walks fit this mean budget of random draws per replica.
    double draw_budget = 1e6;
    std::size_t pilots = 8;

    // [assumptions]
    std::vector<double> lambdas = {0.1, 1.0, 5.0};
    std::size_t tail_samples = 1000000;

    static ExperimentConfig from_ini(const IniDocument& doc);
    static ExperimentConfig load(const std::string& path);
    // Canonical text; parses back to an equal config. Without the execution
    // settings (workers, out) it describes only the experiment, so outputs
    // do not depend on where or how wide a run was.
    std::string to_ini(bool execution = true) const;
    void validate() const;

    bool operator==(const ExperimentConfig& o) const { return to_ini() == o.to_ini(); }
};

// Number formatting that round-trips doubles exactly.
std::string format_double(double x);

}  // namespace rtrw
