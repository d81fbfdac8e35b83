#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "rtrw/config.hpp"

using namespace rtrw;
using namespace rtrw::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("rtrw_unit_" + name);
    fs::remove_all(p);
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(RTRW_BIN) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> file_hashes(const RunManifest& m) {
    std::map<std::string, std::string> out;
    for (const auto& f : m.files) out[f.path] = f.sha256;
    return out;
}

}  // namespace

TEST_CASE("config parsing") {
    const std::string text =
        "# experiment\n"
        "[run]\n"
        "seed = 7\n"
        "replicas = 3 ; inline comment\n"
        "\n"
        "[model]\n"
        "id = comb\n"
        "alpha = 0.5\n"
        "beta = 0\n"
        "[schedule]\n"
        "eps = 0.1, 0.01\n";
    const auto cfg = ExperimentConfig::from_ini(IniDocument::parse(text));
    CHECK(cfg.seed == 7);
    CHECK(cfg.replicas == 3);
    CHECK(cfg.model.id == ModelId::comb);
    CHECK(cfg.eps == std::vector<double>{0.1, 0.01});
    CHECK(cfg.process == ProcessId::walk);

    // canonical text round-trips exactly
    const auto back = ExperimentConfig::from_ini(IniDocument::parse(cfg.to_ini()));
    CHECK(back == cfg);
    CHECK(back.to_ini() == cfg.to_ini());

    const auto fk = ExperimentConfig::from_ini(IniDocument::parse("[model]\nid = fk\nlimit_gamma = 0.3\n"));
    CHECK(fk.process == ProcessId::fk);
    CHECK(fk.limit_gamma == 0.3);
    CHECK_FALSE(parse_process_id("walk"));  // walks are named by their model id
    for (auto p : {ProcessId::bm, ProcessId::fk, ProcessId::fin, ProcessId::ssbm, ProcessId::mixture})
        CHECK(parse_process_id(to_string(p)) == p);
    CHECK(format_double(0.1) == "0.1");
    CHECK(std::stod(format_double(1.0 / 3)) == 1.0 / 3);
}

TEST_CASE("config errors carry the line") {
    auto line_of = [](const std::string& text) {
        try {
            ExperimentConfig::from_ini(IniDocument::parse(text, "x.ini")).validate();
        } catch (const ConfigError& e) {
            return e.line();
        }
        return -1;
    };
    CHECK(line_of("[run]\nseed = 1\nreplicas = many\n") == 3);
    CHECK(line_of("[run]\nseed = 1\n\n[model]\nalpha = -2\nid = comb\n") == 5);
    CHECK(line_of("[run]\nfrobnicate = 1\n") == 2);
    CHECK(line_of("[nosuch]\nx = 1\n") >= 1);
    CHECK(line_of("[run]\nseed = 1\nseed = 2\n") == 3);
    CHECK(line_of("[run\n") == 1);
    CHECK(line_of("[model]\nid = teapot\n") == 2);
    CHECK(line_of("[schedule]\neps = 0.1, nan\n") == 2);
    CHECK(line_of("[run]\nseed = 1\n") == -1);
}

TEST_CASE("ordered parallel map") {
    for (std::size_t w : {1u, 2u, 4u}) {
        std::vector<std::size_t> seen;
        parallel_ordered<std::size_t>(
            50, w, [](std::size_t i) { return i * i; },
            [&](std::size_t i, std::size_t v) {
                REQUIRE(v == i * i);
                seen.push_back(i);
            });
        CHECK(seen.size() == 50);
        CHECK(std::is_sorted(seen.begin(), seen.end()));
    }
    CHECK_THROWS_AS(parallel_ordered<int>(
                        10, 3,
                        [](std::size_t i) -> int {
                            if (i == 4) throw std::runtime_error("boom");
                            return int(i);
                        },
                        [](std::size_t, int) {}),
                    std::runtime_error);
}

TEST_CASE("sha256") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("simulate: files, manifest and determinism across workers") {
    ExperimentConfig cfg;
    cfg.model = ModelSpec::transparent(0.6, 0.3);
    cfg.replicas = 6;
    cfg.steps = 200;
    cfg.seed = 11;

    const auto dir1 = scratch("sim1");
    cfg.out = dir1.string();
    cfg.workers = 1;
    cmd_simulate(cfg);
    const auto m1 = RunManifest::from_json(nlohmann::json::parse(std::ifstream(fs::path(cfg.out) / "manifest.json")));
    cfg.out = scratch("sim2").string();
    cfg.workers = 3;
    cmd_simulate(cfg);
    const auto m2 = RunManifest::from_json(nlohmann::json::parse(std::ifstream(fs::path(cfg.out) / "manifest.json")));

    CHECK(file_hashes(m1) == file_hashes(m2));
    CHECK(m1.seeds.size() == 6);
    CHECK(m1.config_hash == m2.config_hash);
    CHECK(m1.workers == 1);
    CHECK(m2.workers == 3);
    for (const auto& f : m1.files) {
        std::ifstream in(dir1 / f.path, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        CHECK(sha256_hex(ss.str()) == f.sha256);
    }

    // srw with 10 steps: one file, 11 records
    ExperimentConfig srw;
    srw.steps = 10;
    srw.out = scratch("srw").string();
    cmd_simulate(srw);
    std::size_t traj = 0;
    for (const auto& e : fs::directory_iterator(srw.out))
        if (e.path().filename().string().rfind("traj_", 0) == 0) {
            ++traj;
            std::ifstream in(e.path());
            std::string line;
            int rows = -1;  // header
            while (std::getline(in, line)) ++rows;
            CHECK(rows == 11);
        }
    CHECK(traj == 1);
}

TEST_CASE("simulate-limit writes one file and seed per replica") {
    ExperimentConfig cfg;
    cfg.process = ProcessId::fk;
    cfg.limit_gamma = 0.5;
    cfg.time = 1.0;
    cfg.dt = 1e-3;
    cfg.replicas = 100;
    cfg.out = scratch("fk").string();
    const auto res = cmd_simulate(cfg, true);
    const auto m = RunManifest::from_json(nlohmann::json::parse(std::ifstream(fs::path(cfg.out) / "manifest.json")));
    CHECK(m.seeds.size() == 100);
    std::size_t traj = 0;
    for (const auto& f : m.files) traj += f.path.rfind("traj_", 0) == 0;
    CHECK(traj == 100);
    (void)res;
}

TEST_CASE("report detects tampering") {
    ExperimentConfig cfg;
    cfg.replicas = 2;
    cfg.steps = 20;
    cfg.out = scratch("tamper").string();
    cmd_simulate(cfg);
    auto ok = cmd_report(cfg);
    CHECK_FALSE(ok.any_failed());
    const auto m = RunManifest::from_json(nlohmann::json::parse(std::ifstream(fs::path(cfg.out) / "manifest.json")));
    std::ofstream(fs::path(cfg.out) / m.files.front().path, std::ios::app) << "9,9\n";
    CHECK(cmd_report(cfg).any_failed());
}

TEST_CASE("phase scan preconditions") {
    ExperimentConfig cfg;
    cfg.model = ModelSpec::transparent(0.5, 0.5);
    cfg.alphas = {0.5};
    cfg.betas = {0.5};  // on alpha + beta = 1
    cfg.margin = 0.0;
    CHECK_THROWS_AS(check_scan_grid(cfg), UsageError);
    cfg.alphas = {0.2};
    cfg.betas = {0.4};
    cfg.margin = 0.1;
    CHECK_NOTHROW(check_scan_grid(cfg));
    cfg.model = ModelSpec::bouchaud(0.5);
    CHECK_THROWS_AS(check_scan_grid(cfg), UsageError);

    // comb cells with alpha < 1 are all FK
    for (double a : {0.2, 0.5, 0.8})
        for (double b : {0.0, 0.7, 2.0}) CHECK(predicted_phase(ModelId::comb, a, b, 0.1).label == PhaseLabel::FK);
}

TEST_CASE("small phase scan on a 3x3 transparent grid") {
    ExperimentConfig cfg;
    cfg.model = ModelSpec::transparent(0.5, 0.5);
    cfg.alphas = {0.1, 0.4, 1.5};
    cfg.betas = {0.25, 0.75, 1.5};
    cfg.eps = {0.01};
    cfg.replicas = 100;
    cfg.env_pairs = 30;
    cfg.limit_samples = 500;
    cfg.out = scratch("scan").string();
    const auto res = cmd_phase_scan(cfg);
    std::ifstream in(fs::path(cfg.out) / "phase_table.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line.find("model") != std::string::npos);
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 9);
    CHECK(res.reports.size() >= 2);
}

TEST_CASE("verify-comb reports") {
    ExperimentConfig cfg;
    cfg.mc_samples = 20000;
    cfg.max_n = 20;
    cfg.mc_max_n = 4;
    for (const auto& r : verify_pgf(cfg)) CHECK_MESSAGE(r.verdict == Verdict::pass, r.statistic);
    std::vector<TanhPoint> curve;
    const auto t = verify_tanh(cfg, &curve);
    for (const auto& r : t) CHECK(r.verdict == Verdict::pass);
    for (const auto& p : curve)
        if (p.eps == 1e-6) CHECK(p.value == doctest::Approx(std::tanh(p.y)).epsilon(0.01));
}

TEST_CASE("exit codes") {
    const auto dir = scratch("exit");
    fs::create_directories(dir);
    const auto good = dir / "good.ini";
    std::ofstream(good) << "[run]\nreplicas = 1\nout = " << (dir / "o").string() << "\n[horizon]\nsteps = 10\n";
    const auto bad = dir / "bad.ini";
    std::ofstream(bad) << "[run]\nreplicas = 1\n\n\nseed = x\n";
    const auto walk_as_limit = dir / "walk.ini";
    std::ofstream(walk_as_limit) << "[model]\nid = srw\n";

    CHECK(run_cli("--config " + good.string() + " simulate") == 0);
    CHECK(run_cli("--config " + bad.string() + " simulate") == 1);
    CHECK(run_cli("--config " + walk_as_limit.string() + " simulate-limit") == 1);
    CHECK(run_cli("") == 1);
    CHECK(run_cli("--config " + good.string() + " --out /proc/forbidden/x simulate") == 3);
    CHECK(run_cli("--config " + good.string() + " --out " + (dir / "o").string() + " report") == 0);
}
