#pragma once

// Run configuration, output directory bookkeeping and the run manifest.

#include <natgrow/area.hpp>
#include <natgrow/error.hpp>
#include <natgrow/funcspace.hpp>
#include <natgrow/profile.hpp>
#include <natgrow/solver.hpp>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace natgrow {

inline constexpr const char* artifact_version = "0.1.0";

/// Bad config or flags; maps to exit code 64.
class UsageError : public Error {
public:
    using Error::Error;
};

/// A real parameter given either as a number or as {lo, hi, count}.
struct Range {
    double lo = 0.0;
    double hi = 0.0;
    int count = 1;

    static Range single(double v) { return {v, v, 1}; }
    bool scalar() const { return count == 1; }
    double value() const { return lo; }

    std::vector<double> values() const {
        std::vector<double> out(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i) out[i] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
        return out;
    }

    nlohmann::json to_json() const {
        if (scalar()) return lo;
        return {{"lo", lo}, {"hi", hi}, {"count", count}};
    }
};

struct RunConfig {
    std::string problem = "quasilinear"; // or "linear_oracle"
    double p = 2.0;
    int N = 1;
    std::string domain = "interval";
    double size = 1.0; // interval length or ball radius
    std::string f = "f_pos";
    std::string g = "g_one";
    std::optional<std::string> a;
    std::optional<double> alpha; // required for expression f, implied by presets
    std::optional<double> beta;
    double kappa = 2.0;
    Range L = Range::single(-1.0);
    Range lambda = Range::single(50.0);
    double amplitude = 0.5; // linear oracle level
    std::map<std::string, double> tolerances;
    int resolution = 257; // transform table rows
    std::uint64_t seed = 12345;
    std::string output_dir = "out";
    std::optional<std::string> vary;
    std::vector<double> grid;
    std::vector<double> L_sequence;
    std::optional<double> gamma1;
    std::optional<double> gamma2;
    std::vector<double> eps_grid{0.1, 0.05, 0.01};

    static const std::map<std::string, double>& default_tolerances() {
        static const std::map<std::string, double> d{{"quad_tol", 1e-11},           {"root_tol", 1e-10},
                                                     {"residual_threshold", 1e-4}, {"transform_tol", 1e-10},
                                                     {"area_quad_tol", 1e-12},      {"tol_zero", 1e-9},
                                                     {"ode_tol", 1e-12},            {"identity_tol", 5e-10}};
        return d;
    }

    double tol(const std::string& key) const {
        auto it = tolerances.find(key);
        return it != tolerances.end() ? it->second : default_tolerances().at(key);
    }

    nlohmann::json to_json() const {
        nlohmann::json tol = nlohmann::json::object();
        for (const auto& [k, v] : default_tolerances()) tol[k] = this->tol(k);
        nlohmann::json j{{"problem", problem}, {"p", p},          {"N", N},           {"domain", domain},
                         {"size", size},       {"f", f},          {"g", g},           {"kappa", kappa},
                         {"L", L.to_json()},   {"lambda", lambda.to_json()},          {"amplitude", amplitude},
                         {"tolerances", tol},  {"resolution", resolution},            {"seed", seed},
                         {"output_dir", output_dir},               {"eps_grid", eps_grid}};
        j["a"] = a ? nlohmann::json(*a) : nlohmann::json();
        j["alpha"] = alpha ? nlohmann::json(*alpha) : nlohmann::json();
        j["beta"] = beta ? nlohmann::json(*beta) : nlohmann::json();
        j["vary"] = vary ? nlohmann::json(*vary) : nlohmann::json();
        j["grid"] = grid;
        j["L_sequence"] = L_sequence;
        j["gamma1"] = gamma1 ? nlohmann::json(*gamma1) : nlohmann::json();
        j["gamma2"] = gamma2 ? nlohmann::json(*gamma2) : nlohmann::json();
        return j;
    }
};

// ---------------------------------------------------------------------------
// parsing

namespace detail {

inline double get_number(const nlohmann::json& j, const std::string& key) {
    if (!j.is_number()) throw UsageError("config key '" + key + "' must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw UsageError("config key '" + key + "' must be finite");
    return v;
}

inline int get_int(const nlohmann::json& j, const std::string& key) {
    if (!j.is_number_integer()) throw UsageError("config key '" + key + "' must be an integer");
    return j.get<int>();
}

inline std::string get_string(const nlohmann::json& j, const std::string& key) {
    if (!j.is_string()) throw UsageError("config key '" + key + "' must be a string");
    return j.get<std::string>();
}

inline std::vector<double> get_numbers(const nlohmann::json& j, const std::string& key) {
    if (!j.is_array()) throw UsageError("config key '" + key + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& x : j) out.push_back(get_number(x, key));
    return out;
}

inline Range get_range(const nlohmann::json& j, const std::string& key) {
    if (j.is_number()) return Range::single(get_number(j, key));
    if (!j.is_object()) throw UsageError("config key '" + key + "' must be a number or {lo, hi, count}");
    for (const auto& [k, v] : j.items())
        if (k != "lo" && k != "hi" && k != "count") throw UsageError("unknown key '" + key + "." + k + "'");
    if (!j.contains("lo") || !j.contains("hi") || !j.contains("count"))
        throw UsageError("range '" + key + "' needs lo, hi and count");
    Range r{get_number(j["lo"], key + ".lo"), get_number(j["hi"], key + ".hi"), get_int(j["count"], key + ".count")};
    if (r.count < 1) throw UsageError("range '" + key + "' needs count >= 1");
    if (r.count == 1 && r.lo != r.hi) throw UsageError("range '" + key + "' with count 1 needs lo == hi");
    return r;
}

} // namespace detail

/// Overlays the keys of `j` onto `cfg`. Unknown keys and wrong types are usage
/// errors; null clears an optional key.
inline void apply_config(RunConfig& cfg, const nlohmann::json& j) {
    using namespace detail;
    if (!j.is_object()) throw UsageError("config must be a JSON object");
    for (const auto& [key, v] : j.items()) {
        if (key == "problem") {
            cfg.problem = get_string(v, key);
            if (cfg.problem != "quasilinear" && cfg.problem != "linear_oracle")
                throw UsageError("problem must be 'quasilinear' or 'linear_oracle'");
        } else if (key == "p") {
            cfg.p = get_number(v, key);
        } else if (key == "N") {
            cfg.N = get_int(v, key);
        } else if (key == "domain") {
            if (v.is_string()) {
                cfg.domain = v.get<std::string>();
            } else if (v.is_object()) {
                for (const auto& [k, x] : v.items()) {
                    if (k == "kind") cfg.domain = get_string(x, "domain.kind");
                    else if (k == "size") cfg.size = get_number(x, "domain.size");
                    else if (k == "N") cfg.N = get_int(x, "domain.N");
                    else throw UsageError("unknown key 'domain." + k + "'");
                }
            } else {
                throw UsageError("config key 'domain' must be a string or {kind, size, N}");
            }
            if (cfg.domain != "interval" && cfg.domain != "ball")
                throw UsageError("domain must be 'interval' or 'ball'");
        } else if (key == "size") {
            cfg.size = get_number(v, key);
        } else if (key == "f") {
            cfg.f = get_string(v, key);
        } else if (key == "g") {
            cfg.g = get_string(v, key);
        } else if (key == "a") {
            if (v.is_null()) cfg.a.reset();
            else cfg.a = get_string(v, key);
        } else if (key == "alpha") {
            if (v.is_null()) cfg.alpha.reset();
            else cfg.alpha = get_number(v, key);
        } else if (key == "beta") {
            if (v.is_null()) cfg.beta.reset();
            else cfg.beta = get_number(v, key);
        } else if (key == "kappa") {
            cfg.kappa = get_number(v, key);
        } else if (key == "L") {
            cfg.L = get_range(v, key);
        } else if (key == "lambda") {
            cfg.lambda = get_range(v, key);
        } else if (key == "amplitude") {
            cfg.amplitude = get_number(v, key);
        } else if (key == "tolerances") {
            if (!v.is_object()) throw UsageError("config key 'tolerances' must be an object");
            for (const auto& [k, x] : v.items()) {
                if (!RunConfig::default_tolerances().count(k)) throw UsageError("unknown tolerance '" + k + "'");
                const double t = get_number(x, "tolerances." + k);
                if (!(t > 0.0)) throw UsageError("tolerance '" + k + "' must be positive");
                cfg.tolerances[k] = t;
            }
        } else if (key == "resolution") {
            cfg.resolution = get_int(v, key);
        } else if (key == "seed") {
            if (!v.is_number_unsigned()) throw UsageError("config key 'seed' must be a nonnegative integer");
            cfg.seed = v.get<std::uint64_t>();
        } else if (key == "output_dir") {
            cfg.output_dir = get_string(v, key);
        } else if (key == "vary") {
            if (v.is_null()) cfg.vary.reset();
            else cfg.vary = get_string(v, key);
        } else if (key == "grid") {
            cfg.grid = get_numbers(v, key);
        } else if (key == "L_sequence") {
            cfg.L_sequence = get_numbers(v, key);
        } else if (key == "gamma1") {
            if (v.is_null()) cfg.gamma1.reset();
            else cfg.gamma1 = get_number(v, key);
        } else if (key == "gamma2") {
            if (v.is_null()) cfg.gamma2.reset();
            else cfg.gamma2 = get_number(v, key);
        } else if (key == "eps_grid") {
            cfg.eps_grid = get_numbers(v, key);
        } else {
            throw UsageError("unknown config key '" + key + "'");
        }
    }
}

/// Builtin starting configs for --preset.
inline RunConfig preset_config(const std::string& name) {
    RunConfig c;
    if (name == "f_pos") return c;
    if (name == "f_sign") {
        c.f = "f_sign";
        return c;
    }
    if (name == "f_sqrt") {
        c.f = "f_sqrt";
        return c;
    }
    if (name == "linear") {
        c.problem = "linear_oracle";
        c.lambda = Range::single(std::numbers::pi * std::numbers::pi);
        return c;
    }
    if (name == "schrod") {
        c.f = "f_sign";
        c.a = "a_schrod";
        c.g = "g_schrod";
        c.L = Range::single(1.0);
        return c;
    }
    throw UsageError("unknown preset '" + name + "' (f_pos, f_sign, f_sqrt, linear, schrod)");
}

inline RunConfig parse_config(const nlohmann::json& j, RunConfig base = {}) {
    apply_config(base, j);
    return base;
}

inline RunConfig load_config(const std::filesystem::path& path, RunConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config '" + path.string() + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw UsageError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(j, std::move(base));
}

/// The functions named or written in a config, parsed and range-checked.
struct ResolvedProblem {
    FunctionSpec f;
    FunctionSpec g;
    std::optional<FunctionSpec> a;
    DomainSpec domain;
};

inline ResolvedProblem resolve(const RunConfig& cfg) {
    if (!(cfg.p > 1.0)) throw UsageError("p must exceed 1");
    if (!(cfg.size > 0.0)) throw UsageError("domain size must be positive");
    if (cfg.resolution < 2) throw UsageError("resolution must be at least 2");
    ResolvedProblem r;
    try {
        r.domain = cfg.domain == "interval" ? DomainSpec::interval(cfg.size) : DomainSpec::ball(cfg.size, cfg.N);
        if (cfg.domain == "interval" && cfg.N != 1) throw UsageError("an interval has N = 1");
        r.domain.validate();
    } catch (const DomainError& e) {
        throw UsageError(e.what());
    }
    try {
        if (auto pf = presets::by_name(cfg.f, cfg.kappa, cfg.p)) {
            if (pf->kind() != FunctionKind::nonlinearity) throw UsageError("preset '" + cfg.f + "' is not an f");
            r.f = *pf;
            if ((cfg.alpha && *cfg.alpha != r.f.alpha()) || (cfg.beta && *cfg.beta != r.f.beta()))
                throw UsageError("alpha/beta conflict with preset '" + cfg.f + "'");
        } else {
            if (!cfg.alpha || !cfg.beta) throw UsageError("an expression f needs alpha and beta");
            r.f = FunctionSpec::nonlinearity(cfg.f, *cfg.alpha, *cfg.beta);
        }
        const double hi = r.f.beta();
        auto weight = [&](const std::string& text, FunctionKind kind) {
            if (auto ps = presets::by_name(text, cfg.kappa, cfg.p, hi)) {
                if (ps->kind() == FunctionKind::nonlinearity) throw UsageError("preset '" + text + "' is an f");
                return *ps;
            }
            return FunctionSpec::parse(text, kind, 0.0, hi);
        };
        r.g = weight(cfg.g, FunctionKind::weight);
        if (cfg.a) r.a = weight(*cfg.a, FunctionKind::diffusion);
    } catch (const ParseError& e) {
        throw UsageError(std::string("bad expression: ") + e.what());
    } catch (const DomainError& e) {
        throw UsageError(e.what());
    }
    return r;
}

inline SolverOptions solver_options(const RunConfig& cfg) {
    SolverOptions o;
    o.quad_tol = cfg.tol("quad_tol");
    o.root_tol = cfg.tol("root_tol");
    o.residual_threshold = cfg.tol("residual_threshold");
    o.ode_tol = cfg.tol("ode_tol");
    return o;
}

inline AreaOptions area_options(const RunConfig& cfg) {
    AreaOptions o;
    o.quad_tol = cfg.tol("area_quad_tol");
    o.tol_zero = cfg.tol("tol_zero");
    return o;
}

inline TransformOptions transform_options(const RunConfig& cfg) {
    TransformOptions o;
    o.tol = cfg.tol("transform_tol");
    return o;
}

// ---------------------------------------------------------------------------
// output

inline std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Writes files into one directory and remembers their hashes for the manifest.
class OutputDir {
public:
    explicit OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) {
        std::filesystem::create_directories(dir_);
    }

    const std::filesystem::path& path() const noexcept { return dir_; }

    void write(const std::string& name, const std::string& content) {
        if (name == "manifest.json") throw Error("manifest.json is reserved");
        std::ofstream out(dir_ / name, std::ios::binary);
        out << content;
        if (!out) throw Error("cannot write " + (dir_ / name).string());
        files_[name] = {sha256_hex(content), content.size()};
    }

    void write_json(const std::string& name, const nlohmann::json& j) { write(name, j.dump(2) + "\n"); }

    template <class W>
    void write_with(const std::string& name, W&& writer) {
        std::ostringstream os;
        writer(os);
        write(name, os.str());
    }

    void stage(const std::string& name, const std::string& status, const std::string& message = {}) {
        stages_.push_back({{"stage", name}, {"status", status}, {"message", message}});
    }

    /// Writes manifest.json listing every file written through this object.
    void write_manifest(const std::string& command, const RunConfig& cfg, double seconds, int exit_code) {
        nlohmann::json files = nlohmann::json::array();
        for (const auto& [name, info] : files_)
            files.push_back({{"path", name}, {"sha256", info.first}, {"bytes", info.second}});
        nlohmann::json m{{"command", command},   {"artifact_version", artifact_version},
                         {"config", cfg.to_json()}, {"wall_clock_seconds", seconds},
                         {"stages", stages_},    {"exit_code", exit_code},
                         {"files", files}};
        std::ofstream out(dir_ / "manifest.json", std::ios::binary);
        out << m.dump(2) << "\n";
    }

    const std::map<std::string, std::pair<std::string, std::size_t>>& files() const noexcept { return files_; }

private:
    std::filesystem::path dir_;
    std::map<std::string, std::pair<std::string, std::size_t>> files_;
    nlohmann::json stages_ = nlohmann::json::array();
};

inline void write_profile_csv(std::ostream& os, const SolutionProfile& prof) {
    os << "x,u,v\n";
    for (std::size_t i = 0; i < prof.x.size(); ++i)
        os << fmt17(prof.x[i]) << ',' << fmt17(prof.u[i]) << ',' << fmt17(prof.v[i]) << '\n';
}

} // namespace natgrow
