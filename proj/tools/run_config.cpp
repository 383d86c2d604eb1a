// SPDX-FileCopyrightText: 2026 The dpnp authors
//
// SPDX-License-Identifier: Apache-2.0

#include "run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace dpnp::cli {
namespace {

namespace pt = boost::property_tree;

const std::set<std::string> kReportSections = {"run", "checksums", "variance", "metrics",
                                               "assumptions"};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& what) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(what + ": expected true or false, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& v, const std::string& what) {
    std::string s = v;
    for (char& c : s) {
        if (c == ',') c = ' ';
    }
    std::istringstream in(s);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(parse_real(tok, what));
    if (out.empty()) throw ConfigError(what + ": empty list");
    return out;
}

/// Drops a trailing comment: ';' or '#' preceded by whitespace.
std::string strip_comment(const std::string& s) {
    for (std::size_t i = 1; i < s.size(); ++i) {
        if ((s[i] == ';' || s[i] == '#') && (s[i - 1] == ' ' || s[i - 1] == '\t')) return s.substr(0, i);
    }
    return s;
}

std::string resolve(const std::string& v, const std::filesystem::path& base) {
    if (v.empty()) return v;
    const std::filesystem::path p(v);
    return std::filesystem::weakly_canonical(p.is_absolute() ? p : base / p).string();
}

/// Reads the keys of one section, rejecting any key not consumed.
class Section {
public:
    Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

    std::optional<std::string> get(const std::string& key) {
        used_.insert(key);
        if (!tree_) return std::nullopt;
        const auto it = tree_->find(key);
        if (it == tree_->not_found()) return std::nullopt;
        return trim(strip_comment(it->second.data()));
    }
    std::string label(const std::string& key) const { return "[" + name_ + "] " + key; }

    void finish() const {
        if (!tree_) return;
        for (const auto& [key, child] : *tree_) {
            if (!used_.count(key)) throw ConfigError("unknown key " + label(key));
            if (!child.empty()) throw ConfigError("nested value under " + label(key));
        }
    }

private:
    const pt::ptree* tree_;
    std::string name_;
    std::set<std::string> used_;
};

template <class T, class F>
void read(Section& s, const std::string& key, T& dst, F parse) {
    if (auto v = s.get(key)) dst = parse(*v, s.label(key));
}

int to_int(const std::string& v, const std::string& what) {
    const long long n = parse_integer(v, what);
    if (n < -2147483647LL || n > 2147483647LL) throw ConfigError(what + ": out of range");
    return static_cast<int>(n);
}

std::uint64_t to_seed(const std::string& v, const std::string& what) {
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) {
        throw ConfigError(what + ": expected a non-negative integer, got '" + v + "'");
    }
    return out;
}

std::string format_list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_real(v[i]);
    return out;
}

}  // namespace

double parse_real(const std::string& text, const std::string& what) {
    const std::string v = trim(text);
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || p != v.data() + v.size()) {
        throw ConfigError(what + ": expected a number, got '" + text + "'");
    }
    return out;
}

long long parse_integer(const std::string& text, const std::string& what) {
    const std::string v = trim(text);
    long long out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || p != v.data() + v.size()) {
        throw ConfigError(what + ": expected an integer, got '" + text + "'");
    }
    return out;
}

std::string format_real(double v) { return fmt::format("{}", v); }

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("line " + std::to_string(e.line()) + ": " + e.message());
    }
    const auto section = [&](const std::string& name) -> const pt::ptree* {
        const auto it = tree.find(name);
        return it == tree.not_found() ? nullptr : &it->second;
    };
    for (const auto& [name, child] : tree) {
        if (child.empty()) throw ConfigError("key '" + name + "' outside of a section");
        if (name != "problem" && name != "prior" && name != "sampler" && name != "output" &&
            !kReportSections.count(name)) {
            throw ConfigError("unknown section [" + name + "]");
        }
    }

    RunConfig cfg;
    const auto as_string = [](const std::string& v, const std::string&) { return v; };
    const auto as_real = [](const std::string& v, const std::string& w) { return parse_real(v, w); };

    Section pb(section("problem"), "problem");
    read(pb, "task", cfg.problem.task, as_string);
    read(pb, "image", cfg.problem.image, as_string);
    read(pb, "channels", cfg.problem.channels, to_int);
    read(pb, "observed_fraction", cfg.problem.observed_fraction, as_real);
    read(pb, "snr_db", cfg.problem.snr_db, as_real);
    read(pb, "sigma2", cfg.problem.sigma2, as_real);
    read(pb, "eta", cfg.problem.eta, as_real);
    read(pb, "kernel", cfg.problem.kernel, as_string);
    read(pb, "mask", cfg.problem.mask, as_string);
    read(pb, "seed", cfg.problem.seed, to_seed);
    pb.finish();

    Section pr(section("prior"), "prior");
    read(pr, "kind", cfg.prior.kind, as_string);
    read(pr, "weights", cfg.prior.weights, as_string);
    read(pr, "beta", cfg.prior.beta, as_real);
    read(pr, "lipschitz_bound", cfg.prior.lipschitz_bound, as_real);
    pr.finish();

    Section sm(section("sampler"), "sampler");
    read(sm, "iterations", cfg.sampler.iterations, to_int);
    read(sm, "burn_in", cfg.sampler.burn_in, to_int);
    read(sm, "seed", cfg.sampler.seed, to_seed);
    read(sm, "gamma", cfg.sampler.gamma, as_real);
    read(sm, "lambda", cfg.sampler.lambda, as_real);
    read(sm, "alpha", cfg.sampler.alpha, as_real);
    read(sm, "eps", cfg.sampler.eps, as_real);
    read(sm, "rho", cfg.sampler.rho, parse_list);
    read(sm, "kappa", cfg.sampler.kappa, parse_list);
    sm.finish();

    Section out(section("output"), "output");
    read(out, "thin", cfg.output.thin, to_int);
    read(out, "dump_samples", cfg.output.dump_samples, parse_bool);
    out.finish();

    if (cfg.problem.image.empty()) throw ConfigError("[problem] image is required");
    if (cfg.problem.channels != 1 && cfg.problem.channels != 3) {
        throw ConfigError("[problem] channels must be 1 or 3");
    }
    if (cfg.sampler.iterations <= 0) throw ConfigError("[sampler] iterations must be positive");
    if (cfg.sampler.burn_in && (*cfg.sampler.burn_in < 0 || *cfg.sampler.burn_in >= cfg.sampler.iterations)) {
        throw ConfigError("[sampler] burn_in must lie in [0, iterations)");
    }
    if (cfg.output.thin <= 0) throw ConfigError("[output] thin must be positive");
    if (cfg.prior.kind == "pnp" && cfg.prior.weights.empty()) {
        throw ConfigError("[prior] weights is required for the pnp prior");
    }

    if (cfg.problem.image.rfind("synthetic:", 0) != 0) {
        cfg.problem.image = resolve(cfg.problem.image, base_dir);
    }
    if (cfg.problem.kernel.rfind("motion:", 0) != 0) {
        cfg.problem.kernel = resolve(cfg.problem.kernel, base_dir);
    }
    cfg.problem.mask = resolve(cfg.problem.mask, base_dir);
    cfg.prior.weights = resolve(cfg.prior.weights, base_dir);
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    const auto base = std::filesystem::absolute(path).parent_path();
    return parse_run_config(text.str(), base);
}

std::string format_run_config(const RunConfig& cfg) {
    std::string s;
    const auto line = [&](const std::string& k, const std::string& v) { s += k + " = " + v + "\n"; };
    const auto opt = [&](const std::string& k, const std::optional<double>& v) {
        if (v) line(k, format_real(*v));
    };
    const auto& p = cfg.problem;
    s += "[problem]\n";
    line("task", p.task);
    line("image", p.image);
    line("channels", std::to_string(p.channels));
    opt("observed_fraction", p.observed_fraction);
    opt("snr_db", p.snr_db);
    opt("sigma2", p.sigma2);
    opt("eta", p.eta);
    if (!p.kernel.empty()) line("kernel", p.kernel);
    if (!p.mask.empty()) line("mask", p.mask);
    line("seed", std::to_string(p.seed));

    const auto& r = cfg.prior;
    s += "\n[prior]\n";
    line("kind", r.kind);
    if (!r.weights.empty()) line("weights", r.weights);
    opt("beta", r.beta);
    opt("lipschitz_bound", r.lipschitz_bound);

    const auto& m = cfg.sampler;
    s += "\n[sampler]\n";
    line("iterations", std::to_string(m.iterations));
    if (m.burn_in) line("burn_in", std::to_string(*m.burn_in));
    line("seed", std::to_string(m.seed));
    opt("gamma", m.gamma);
    opt("lambda", m.lambda);
    opt("alpha", m.alpha);
    opt("eps", m.eps);
    if (m.rho && !m.rho->empty()) line("rho", format_list(*m.rho));
    if (m.kappa && !m.kappa->empty()) line("kappa", format_list(*m.kappa));

    s += "\n[output]\n";
    line("thin", std::to_string(cfg.output.thin));
    line("dump_samples", cfg.output.dump_samples ? "true" : "false");
    return s;
}

ArchSpec parse_arch(const std::string& text) {
    ArchSpec a;
    std::vector<std::string> parts;
    std::string cur;
    for (char c : text) {
        if (c == ':') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    a.family = parts[0];
    if (a.family == "dncnn") {
        a.K = 20;
    } else if (a.family == "ddfb") {
        a.K = 4;
    } else if (a.family == "drunet") {
        a.I = 4;
        a.J = 4;
    } else if (a.family != "tv") {
        throw ConfigError("unknown architecture '" + a.family + "'");
    }
    for (std::size_t i = 1; i < parts.size(); ++i) {
        const auto eq = parts[i].find('=');
        if (eq == std::string::npos) throw ConfigError("bad architecture field '" + parts[i] + "'");
        const std::string key = parts[i].substr(0, eq);
        const std::string what = a.family + " " + key;
        const int v = static_cast<int>(parse_integer(parts[i].substr(eq + 1), what));
        const bool net = a.family != "tv";
        const bool depth = a.family == "dncnn" || a.family == "ddfb";
        if (key == "P" && net) {
            a.P = v;
        } else if (key == "K" && depth) {
            a.K = v;
        } else if (key == "I" && a.family == "drunet") {
            a.I = v;
        } else if (key == "J" && a.family == "drunet") {
            a.J = v;
        } else {
            throw ConfigError("field '" + key + "' does not apply to " + a.family);
        }
        if (v <= 0) throw ConfigError(what + " must be positive");
    }
    return a;
}

std::string format_arch(const ArchSpec& a) {
    if (a.family == "tv") return "tv";
    if (a.family == "drunet") return fmt::format("drunet:I={}:J={}:P={}", a.I, a.J, a.P);
    return fmt::format("{}:K={}:P={}", a.family, a.K, a.P);
}

}  // namespace dpnp::cli
