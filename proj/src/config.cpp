#include "rtrw/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace rtrw {

ConfigError::ConfigError(const std::string& source, int line, const std::string& msg)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + msg), line_(line) {}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

}  // namespace

IniDocument IniDocument::parse(const std::string& text, const std::string& source) {
    IniDocument doc;
    doc.source = source;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto cut = raw.find_first_of("#;");
        std::string s = trim(cut == std::string::npos ? raw : raw.substr(0, cut));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError(source, line, "unterminated section header");
            section = lower(trim(s.substr(1, s.size() - 2)));
            if (section.empty()) throw ConfigError(source, line, "empty section name");
            doc.sections[section];
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError(source, line, "expected 'key = value'");
        if (section.empty()) throw ConfigError(source, line, "key outside of any [section]");
        const std::string key = lower(trim(s.substr(0, eq)));
        if (key.empty()) throw ConfigError(source, line, "empty key");
        auto& sec = doc.sections[section];
        if (sec.count(key)) {
            throw ConfigError(source, line,
                              "duplicate key '" + key + "' (first set on line " + std::to_string(sec[key].line) + ")");
        }
        sec[key] = {trim(s.substr(eq + 1)), line};
    }
    return doc;
}

IniDocument IniDocument::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::ios_base::failure("cannot open config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), path);
}

std::string to_string(ProcessId p) {
    switch (p) {
        case ProcessId::walk: return "walk";
        case ProcessId::bm: return "bm";
        case ProcessId::fk: return "fk";
        case ProcessId::fin: return "fin";
        case ProcessId::ssbm: return "ssbm";
        case ProcessId::mixture: return "mixture";
    }
    return "walk";
}

std::optional<ProcessId> parse_process_id(const std::string& s) {
    for (auto p : {ProcessId::bm, ProcessId::fk, ProcessId::fin, ProcessId::ssbm, ProcessId::mixture})
        if (s == to_string(p)) return p;
    return std::nullopt;
}

std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

namespace {

// Typed reader that records which keys were consumed.
class Reader {
public:
    explicit Reader(const IniDocument& d) : doc_(d) {}

    const IniDocument::Entry* find(const std::string& sec, const std::string& key) {
        auto s = doc_.sections.find(sec);
        if (s == doc_.sections.end()) return nullptr;
        auto k = s->second.find(key);
        if (k == s->second.end()) return nullptr;
        used_.insert(sec + "." + key);
        return &k->second;
    }

    [[noreturn]] void fail(const IniDocument::Entry& e, const std::string& msg) const {
        throw ConfigError(doc_.source, e.line, msg);
    }

    double parse_double(const IniDocument::Entry& e, const std::string& text) const {
        double v = 0;
        const auto* b = text.data();
        const auto* end = b + text.size();
        auto [p, ec] = std::from_chars(b, end, v);
        if (ec != std::errc() || p != end || !std::isfinite(v)) fail(e, "expected a finite number, got '" + text + "'");
        return v;
    }

    void real(const std::string& sec, const std::string& key, double& out) {
        if (auto* e = find(sec, key)) out = parse_double(*e, e->value);
    }

    template <class Int>
    void integer(const std::string& sec, const std::string& key, Int& out) {
        if (auto* e = find(sec, key)) {
            Int v{};
            const auto* b = e->value.data();
            const auto* end = b + e->value.size();
            auto [p, ec] = std::from_chars(b, end, v);
            if (ec != std::errc() || p != end) fail(*e, "expected an integer for '" + key + "', got '" + e->value + "'");
            out = v;
        }
    }

    void boolean(const std::string& sec, const std::string& key, bool& out) {
        if (auto* e = find(sec, key)) {
            const auto v = lower(e->value);
            if (v == "true" || v == "yes" || v == "1") out = true;
            else if (v == "false" || v == "no" || v == "0") out = false;
            else fail(*e, "expected true or false for '" + key + "'");
        }
    }

    void text(const std::string& sec, const std::string& key, std::string& out) {
        if (auto* e = find(sec, key)) out = e->value;
    }

    void list(const std::string& sec, const std::string& key, std::vector<double>& out) {
        if (auto* e = find(sec, key)) {
            out.clear();
            std::stringstream ss(e->value);
            std::string item;
            while (std::getline(ss, item, ',')) {
                item = trim(item);
                if (item.empty()) fail(*e, "empty item in list '" + key + "'");
                out.push_back(parse_double(*e, item));
            }
        }
    }

    // Every key in the document must have been read.
    void reject_unknown() const {
        for (const auto& [sec, keys] : doc_.sections)
            for (const auto& [key, e] : keys)
                if (!used_.count(sec + "." + key))
                    throw ConfigError(doc_.source, e.line, "unknown key '" + key + "' in [" + sec + "]");
    }

    const IniDocument& doc() const { return doc_; }

private:
    const IniDocument& doc_;
    std::set<std::string> used_;
};

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_double(v[i]);
    return s;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_ini(const IniDocument& doc) {
    static const std::set<std::string> known = {"run",   "model", "horizon", "schedule",
                                                "limit", "verify", "scan",   "assumptions"};
    for (const auto& [sec, keys] : doc.sections) {
        if (!known.count(sec)) {
            const int line = keys.empty() ? 0 : keys.begin()->second.line;
            throw ConfigError(doc.source, line, "unknown section [" + sec + "]");
        }
    }
    ExperimentConfig c;
    Reader r(doc);
    r.integer("run", "seed", c.seed);
    r.integer("run", "replicas", c.replicas);
    r.integer("run", "workers", c.workers);
    r.text("run", "out", c.out);

    if (auto* e = r.find("model", "id")) {
        const auto v = lower(e->value);
        if (auto p = parse_process_id(v)) {
            c.process = *p;
        } else {
            try {
                c.model.id = parse_model_id(v);
            } catch (const std::exception&) {
                r.fail(*e, "unknown model id '" + e->value + "'");
            }
            c.process = ProcessId::walk;
        }
    }
    r.real("model", "alpha", c.model.alpha);
    r.real("model", "beta", c.model.beta);
    r.real("model", "gamma", c.model.gamma);
    r.real("model", "c", c.model.c);
    r.boolean("model", "analysis_form", c.model.analysis_form);
    r.real("model", "limit_gamma", c.limit_gamma);
    r.real("model", "stable_scale", c.stable_scale);

    r.integer("horizon", "steps", c.steps);
    r.real("horizon", "time", c.time);
    r.integer("horizon", "grid", c.grid);
    r.integer("horizon", "max_steps", c.max_steps);

    r.list("schedule", "eps", c.eps);
    r.boolean("schedule", "rescale", c.rescale);

    r.real("limit", "dt", c.dt);
    r.real("limit", "h", c.h);
    r.real("limit", "v_min", c.v_min);
    r.real("limit", "v_min_rel", c.v_min_rel);
    r.boolean("limit", "keep_atoms", c.keep_atoms);

    r.integer("verify", "mc_samples", c.mc_samples);
    r.integer("verify", "max_n", c.max_n);
    r.integer("verify", "mc_max_n", c.mc_max_n);

    r.list("scan", "alpha", c.alphas);
    r.list("scan", "beta", c.betas);
    r.real("scan", "margin", c.margin);
    r.integer("scan", "limit_samples", c.limit_samples);
    r.integer("scan", "env_pairs", c.env_pairs);
    r.list("scan", "times", c.times);
    r.real("scan", "draw_budget", c.draw_budget);
    r.integer("scan", "pilots", c.pilots);

    r.list("assumptions", "lambda", c.lambdas);
    r.integer("assumptions", "tail_samples", c.tail_samples);
    r.reject_unknown();

    // Range errors point at the offending line when there is one.
    auto line_of = [&](const std::string& sec, const std::string& key) {
        auto s = doc.sections.find(sec);
        if (s == doc.sections.end()) return 0;
        auto k = s->second.find(key);
        return k == s->second.end() ? 0 : k->second.line;
    };
    auto check = [&](bool ok, const std::string& sec, const std::string& key, const std::string& msg) {
        if (!ok) throw ConfigError(doc.source, line_of(sec, key), msg);
    };
    check(c.replicas >= 1, "run", "replicas", "replicas must be >= 1");
    check(c.workers >= 1, "run", "workers", "workers must be >= 1");
    check(!c.out.empty(), "run", "out", "output directory must not be empty");
    check(c.model.alpha > 0, "model", "alpha", "alpha must be > 0");
    check(c.model.beta >= 0, "model", "beta", "beta must be >= 0");
    check(c.model.gamma > 0 && c.model.gamma < 1, "model", "gamma", "gamma must lie in (0,1)");
    check(c.model.c > 0, "model", "c", "c must be > 0");
    check(c.limit_gamma > 0 && c.limit_gamma < 1, "model", "limit_gamma", "limit_gamma must lie in (0,1)");
    check(c.stable_scale >= 0, "model", "stable_scale", "stable_scale must be >= 0");
    check(c.time >= 0, "horizon", "time", "time must be >= 0");
    check(c.grid >= 1, "horizon", "grid", "grid must be >= 1");
    check(c.max_steps >= 1, "horizon", "max_steps", "max_steps must be >= 1");
    check(!c.eps.empty(), "schedule", "eps", "eps list must not be empty");
    for (double e : c.eps) check(e > 0 && e < 1, "schedule", "eps", "every eps must lie in (0,1)");
    check(c.dt >= 0 && c.h >= 0, "limit", c.dt < 0 ? "dt" : "h", "dt and h must be >= 0");
    check(c.v_min >= 0, "limit", "v_min", "v_min must be >= 0");
    check(c.v_min_rel > 0, "limit", "v_min_rel", "v_min_rel must be > 0");
    check(c.mc_samples >= 1, "verify", "mc_samples", "mc_samples must be >= 1");
    check(c.max_n >= 1, "verify", "max_n", "max_n must be >= 1");
    check(c.mc_max_n >= 1 && c.mc_max_n <= c.max_n, "verify", "mc_max_n", "mc_max_n must lie in [1, max_n]");
    for (double a : c.alphas) check(a > 0, "scan", "alpha", "scan alphas must be > 0");
    for (double b : c.betas) check(b >= 0, "scan", "beta", "scan betas must be >= 0");
    check(c.margin >= 0, "scan", "margin", "margin must be >= 0");
    check(c.limit_samples >= 100, "scan", "limit_samples", "limit_samples must be >= 100");
    check(c.draw_budget >= 1, "scan", "draw_budget", "draw_budget must be >= 1");
    check(c.pilots >= 1, "scan", "pilots", "pilots must be >= 1");
    check(std::find(c.times.begin(), c.times.end(), 1.0) != c.times.end() && c.times.size() >= 2 &&
              std::is_sorted(c.times.begin(), c.times.end()) && c.times.front() > 0,
          "scan", "times", "times must be sorted, positive, and contain 1");
    check(!c.lambdas.empty(), "assumptions", "lambda", "lambda list must not be empty");
    for (double l : c.lambdas) check(l >= 0, "assumptions", "lambda", "lambda values must be >= 0");
    check(c.tail_samples >= 100, "assumptions", "tail_samples", "tail_samples must be >= 100");
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) { return from_ini(IniDocument::load(path)); }

void ExperimentConfig::validate() const { from_ini(IniDocument::parse(to_ini())); }

std::string ExperimentConfig::to_ini(bool execution) const {
    std::ostringstream o;
    auto b = [](bool v) { return v ? "true" : "false"; };
    o << "[run]\n"
      << "seed = " << seed << "\nreplicas = " << replicas << "\n";
    if (execution) o << "workers = " << workers << "\nout = " << out << "\n";
    o << "\n";
    o << "[model]\n"
      << "id = " << (process == ProcessId::walk ? to_string(model.id) : to_string(process)) << "\n"
      << "alpha = " << format_double(model.alpha) << "\nbeta = " << format_double(model.beta)
      << "\ngamma = " << format_double(model.gamma) << "\nc = " << format_double(model.c)
      << "\nanalysis_form = " << b(model.analysis_form) << "\nlimit_gamma = " << format_double(limit_gamma)
      << "\nstable_scale = " << format_double(stable_scale) << "\n\n";
    o << "[horizon]\n"
      << "steps = " << steps << "\ntime = " << format_double(time) << "\ngrid = " << grid
      << "\nmax_steps = " << max_steps << "\n\n";
    o << "[schedule]\n"
      << "eps = " << join(eps) << "\nrescale = " << b(rescale) << "\n\n";
    o << "[limit]\n"
      << "dt = " << format_double(dt) << "\nh = " << format_double(h) << "\nv_min = " << format_double(v_min)
      << "\nv_min_rel = " << format_double(v_min_rel) << "\nkeep_atoms = " << b(keep_atoms) << "\n\n";
    o << "[verify]\n"
      << "mc_samples = " << mc_samples << "\nmax_n = " << max_n << "\nmc_max_n = " << mc_max_n << "\n\n";
    o << "[scan]\n";
    if (!alphas.empty()) o << "alpha = " << join(alphas) << "\n";
    if (!betas.empty()) o << "beta = " << join(betas) << "\n";
    o << "margin = " << format_double(margin) << "\nlimit_samples = " << limit_samples << "\nenv_pairs = " << env_pairs
      << "\ntimes = " << join(times) << "\ndraw_budget = " << format_double(draw_budget) << "\npilots = " << pilots
      << "\n\n";
    o << "[assumptions]\n"
      << "lambda = " << join(lambdas) << "\ntail_samples = " << tail_samples << "\n";
    return o.str();
}

}  // namespace rtrw
