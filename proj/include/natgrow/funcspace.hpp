#pragma once

// Validated scalar functions f, g, a and their antiderivatives.

#include <natgrow/error.hpp>
#include <natgrow/expr.hpp>
#include <natgrow/quadrature.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace natgrow {

enum class FunctionKind { nonlinearity, weight, diffusion };

/// How a function is evaluated outside its interval of validity.
enum class ClampMode {
    hard,  ///< evaluate at the nearest point of the interval
    taper, ///< linear ramps to zero on [lo-1, lo) and (hi, hi+1] (f is zero above hi)
    none,  ///< evaluate the expression as is
};

inline const char* to_string(FunctionKind k) {
    switch (k) {
    case FunctionKind::nonlinearity: return "f";
    case FunctionKind::weight: return "g";
    case FunctionKind::diffusion: return "a";
    }
    return "?";
}

class FunctionSpec {
public:
    FunctionSpec() = default;

    FunctionSpec(ExprAst ast, FunctionKind kind, double lo, double hi, std::string text = {})
        : ast_(std::make_shared<const ExprAst>(std::move(ast))), kind_(kind), lo_(lo), hi_(hi),
          text_(std::move(text)) {
        if (text_.empty()) text_ = ast_->str();
        if (!(lo_ < hi_)) throw DomainError("function domain must satisfy lo < hi");
    }

    static FunctionSpec parse(const std::string& text, FunctionKind kind, double lo, double hi) {
        return FunctionSpec(parse_expression(text), kind, lo, hi, text);
    }

    /// A nonlinearity with zeros alpha < beta; the domain is [0, beta].
    static FunctionSpec nonlinearity(const std::string& text, double alpha, double beta) {
        if (!(0.0 < alpha && alpha < beta)) throw DomainError("need 0 < alpha < beta");
        FunctionSpec s = parse(text, FunctionKind::nonlinearity, 0.0, beta);
        s.alpha_ = alpha;
        s.beta_ = beta;
        return s;
    }

    FunctionKind kind() const noexcept { return kind_; }
    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }
    double alpha() const noexcept { return alpha_; }
    double beta() const noexcept { return beta_; }
    const std::string& text() const noexcept { return text_; }
    const ExprAst& ast() const { return *ast_; }
    ClampMode clamp() const noexcept { return clamp_; }

    FunctionSpec with_clamp(ClampMode m) const {
        FunctionSpec s = *this;
        s.clamp_ = m;
        return s;
    }

    FunctionSpec with_domain(double lo, double hi) const {
        if (!(lo < hi)) throw DomainError("function domain must satisfy lo < hi");
        FunctionSpec s = *this;
        s.lo_ = lo;
        s.hi_ = hi;
        return s;
    }

    /// Raw expression value, no clamping. Throws EvaluationError on a non-finite result.
    double raw(double s) const {
        const double y = (*ast_)(s);
        if (!std::isfinite(y)) {
            std::ostringstream os;
            os.precision(17);
            os << to_string(kind_) << "(" << s << ") = " << y << " is not finite";
            throw EvaluationError(os.str(), s);
        }
        return y;
    }

    double operator()(double s) const {
        switch (clamp_) {
        case ClampMode::none: return raw(s);
        case ClampMode::hard: return raw(std::clamp(s, lo_, hi_));
        case ClampMode::taper:
            if (s >= lo_ && s <= hi_) return raw(s);
            if (s < lo_) return s >= lo_ - 1.0 ? (1.0 + s - lo_) * raw(lo_) : 0.0;
            if (kind_ == FunctionKind::nonlinearity) return 0.0;
            return s <= hi_ + 1.0 ? (hi_ + 1.0 - s) * raw(hi_) : 0.0;
        }
        return raw(s);
    }

private:
    std::shared_ptr<const ExprAst> ast_;
    FunctionKind kind_ = FunctionKind::nonlinearity;
    double lo_ = 0.0;
    double hi_ = 1.0;
    double alpha_ = 0.0;
    double beta_ = 0.0;
    std::string text_;
    ClampMode clamp_ = ClampMode::hard;
};

// ---------------------------------------------------------------------------
// Presets

namespace presets {

inline constexpr double default_alpha = 1.0;
inline constexpr double default_beta = 2.0;

inline FunctionSpec f_sign() { return FunctionSpec::nonlinearity("s*(s-1)*(2-s)", 1.0, 2.0); }
inline FunctionSpec f_pos() { return FunctionSpec::nonlinearity("max(0, (s-1)*(2-s))", 1.0, 2.0); }
/// Square-root decay at beta: violates the flat-core bound for p > 3/2.
inline FunctionSpec f_sqrt() {
    return FunctionSpec::nonlinearity("piecewise(s > 1, sqrt(abs(2-s)), 0)", 1.0, 2.0);
}

inline FunctionSpec g_one(double lo = 0.0, double hi = 2.0) {
    return FunctionSpec::parse("1", FunctionKind::weight, lo, hi);
}
inline FunctionSpec g_lin(double lo = 0.0, double hi = 2.0) {
    return FunctionSpec::parse("s + 1", FunctionKind::weight, lo, hi);
}
inline FunctionSpec g_zero(double lo = 0.0, double hi = 2.0) {
    return FunctionSpec::parse("0", FunctionKind::weight, lo, hi);
}

inline std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// a(s) = 1 + (kappa^p / 2) |s|^{p (kappa - 1)}
inline FunctionSpec a_schrod(double kappa, double p, double lo = 0.0, double hi = 2.0) {
    const std::string c = num(std::pow(kappa, p) / 2.0);
    const std::string e = num(p * (kappa - 1.0));
    return FunctionSpec::parse("1 + " + c + " * abs(s)^" + e, FunctionKind::diffusion, lo, hi);
}

/// g = a'/p for a_schrod.
inline FunctionSpec g_schrod(double kappa, double p, double lo = 0.0, double hi = 2.0) {
    const double e = p * (kappa - 1.0);
    const std::string c = num(std::pow(kappa, p) / 2.0 * e / p);
    if (e == 1.0) {
        return FunctionSpec::parse(c + " * piecewise(s < 0, -1, 1)", FunctionKind::weight, lo, hi);
    }
    return FunctionSpec::parse(c + " * abs(s)^" + num(e - 1.0) + " * piecewise(s < 0, -1, 1)",
                               FunctionKind::weight, lo, hi);
}

/// Look up a preset by name. kappa and p only matter for the Schroedinger pair.
inline std::optional<FunctionSpec> by_name(const std::string& name, double kappa = 2.0, double p = 2.0,
                                           double hi = 2.0) {
    if (name == "f_sign") return f_sign();
    if (name == "f_pos") return f_pos();
    if (name == "f_sqrt") return f_sqrt();
    if (name == "g_one") return g_one(0.0, hi);
    if (name == "g_lin") return g_lin(0.0, hi);
    if (name == "g_zero") return g_zero(0.0, hi);
    if (name == "a_schrod") return a_schrod(kappa, p, 0.0, hi);
    if (name == "g_schrod") return g_schrod(kappa, p, 0.0, hi);
    return std::nullopt;
}

inline std::vector<std::string> names() {
    return {"f_sign", "f_pos", "f_sqrt", "g_one", "g_lin", "g_zero", "a_schrod", "g_schrod"};
}

} // namespace presets

// ---------------------------------------------------------------------------
// Validation

struct ValidationEntry {
    std::string name;
    bool pass = true;
    double worst_s = 0.0;     // sample where the check is closest to failing (or fails)
    double worst_value = 0.0; // function value there
};

struct ValidationReport {
    std::vector<ValidationEntry> entries;

    bool ok() const {
        return std::all_of(entries.begin(), entries.end(), [](const ValidationEntry& e) { return e.pass; });
    }

    const ValidationEntry* find(const std::string& name) const {
        for (const auto& e : entries)
            if (e.name == name) return &e;
        return nullptr;
    }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& e : entries) {
            j.push_back({{"check", e.name}, {"pass", e.pass}, {"worst_s", e.worst_s}, {"worst_value", e.worst_value}});
        }
        return {{"ok", ok()}, {"checks", j}};
    }
};

struct ValidationOptions {
    int grid_size = 512;
    double tol_zero = 1e-9;
    bool require_f0_nonnegative = false; // f(0) >= 0
    bool require_positive_g = true;      // g >= 0 on the grid
};

/// Check the structural assumptions on one function. Failures are report entries.
inline ValidationReport validate_spec(const FunctionSpec& spec, const ValidationOptions& opt = {}) {
    if (opt.grid_size < 16) throw DomainError("validation grid needs at least 16 points");
    ValidationReport rep;
    const int n = opt.grid_size;

    auto finite_entry = [&](double lo, double hi) {
        ValidationEntry e{"finite", true, lo, 0.0};
        for (int i = 0; i < n; ++i) {
            const double s = lo + (hi - lo) * i / (n - 1);
            const double y = spec.ast()(s);
            if (!std::isfinite(y)) {
                e.pass = false;
                e.worst_s = s;
                e.worst_value = y;
                break;
            }
        }
        return e;
    };

    switch (spec.kind()) {
    case FunctionKind::nonlinearity: {
        const double a = spec.alpha();
        const double b = spec.beta();
        rep.entries.push_back(finite_entry(0.0, b));
        if (!rep.entries.back().pass) return rep;

        const double fa = spec.raw(a);
        const double fb = spec.raw(b);
        rep.entries.push_back({"zero_at_alpha", std::abs(fa) <= opt.tol_zero, a, fa});
        rep.entries.push_back({"zero_at_beta", std::abs(fb) <= opt.tol_zero, b, fb});

        // positivity on the open interval, sampled strictly inside
        const double delta = (b - a) / (n + 1);
        ValidationEntry pos{"positive_between_zeros", true, a + delta, spec.raw(a + delta)};
        for (int i = 1; i <= n; ++i) {
            const double s = a + delta * i;
            const double y = spec.raw(s);
            if (y < pos.worst_value) {
                pos.worst_s = s;
                pos.worst_value = y;
            }
        }
        pos.pass = pos.worst_value > 0.0;
        rep.entries.push_back(pos);

        if (opt.require_f0_nonnegative) {
            const double f0 = spec.raw(0.0);
            rep.entries.push_back({"f0_nonnegative", f0 >= -opt.tol_zero, 0.0, f0});
        }
        break;
    }
    case FunctionKind::weight: {
        rep.entries.push_back(finite_entry(spec.lo(), spec.hi()));
        if (!rep.entries.back().pass) return rep;
        if (opt.require_positive_g) {
            ValidationEntry e{"nonnegative", true, spec.lo(), spec.raw(spec.lo())};
            for (int i = 0; i < n; ++i) {
                const double s = spec.lo() + (spec.hi() - spec.lo()) * i / (n - 1);
                const double y = spec.raw(s);
                if (y < e.worst_value) {
                    e.worst_s = s;
                    e.worst_value = y;
                }
            }
            e.pass = e.worst_value >= -opt.tol_zero;
            rep.entries.push_back(e);
        }
        break;
    }
    case FunctionKind::diffusion: {
        rep.entries.push_back(finite_entry(spec.lo(), spec.hi()));
        if (!rep.entries.back().pass) return rep;
        ValidationEntry e{"positive", true, spec.lo(), spec.raw(spec.lo())};
        for (int i = 0; i < n; ++i) {
            const double s = spec.lo() + (spec.hi() - spec.lo()) * i / (n - 1);
            const double y = spec.raw(s);
            if (y < e.worst_value) {
                e.worst_s = s;
                e.worst_value = y;
            }
        }
        e.pass = e.worst_value > 0.0;
        rep.entries.push_back(e);
        break;
    }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Antiderivative

/// G(s) = integral of a scalar function from 0 to s, tabulated on adaptive panels.
/// Immutable after construction and safe to share between threads.
class Antiderivative {
public:
    Antiderivative() = default;

    /// `rel_tol` is relative to the integral of |fn| over each side of 0.
    /// `breaks` are known non-smooth points; panels never straddle them.
    Antiderivative(std::function<double(double)> fn, double lo, double hi, double tol = 1e-12, double rel_tol = 0.0,
                   std::vector<double> breaks = {})
        : fn_(std::move(fn)), lo_(std::min(lo, 0.0)), hi_(std::max(hi, 0.0)), tol_(tol), rel_tol_(rel_tol),
          breaks_(std::move(breaks)) {
        build();
    }

    Antiderivative(const FunctionSpec& spec, double tol = 1e-12)
        : Antiderivative([spec](double s) { return spec(s); }, spec.lo(), spec.hi(), tol) {}

    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }
    double tol() const noexcept { return tol_; }
    std::size_t panel_count() const noexcept { return knots_.empty() ? 0 : knots_.size() - 1; }
    const std::vector<double>& knots() const noexcept { return knots_; }

    /// Integrand value.
    double integrand(double s) const { return fn_(s); }

    double operator()(double s) const {
        if (s < lo_ || s > hi_) {
            std::ostringstream os;
            os << "antiderivative evaluated at " << s << " outside [" << lo_ << ", " << hi_ << "]";
            throw DomainError(os.str());
        }
        // last knot <= s
        auto it = std::upper_bound(knots_.begin(), knots_.end(), s);
        std::size_t i = static_cast<std::size_t>(it - knots_.begin());
        i = i == 0 ? 0 : i - 1;
        if (i >= cum_.size() - 1 && s == knots_.back()) return cum_.back();
        if (s == knots_[i]) return cum_[i];
        return cum_[i] + gk15(fn_, knots_[i], s).value;
    }

    /// Integral over [a, b] with both ends inside the table.
    double integral(double a, double b) const { return (*this)(b) - (*this)(a); }

private:
    std::function<double(double)> fn_;
    double lo_ = 0.0;
    double hi_ = 0.0;
    double tol_ = 1e-12;
    double rel_tol_ = 0.0;
    std::vector<double> breaks_;
    std::vector<double> knots_;
    std::vector<double> cum_; // value at each knot

    void build() {
        QuadOptions opt{0.5 * tol_, 0.5 * rel_tol_, 20000};
        auto pieces = [&](double a, double b) {
            std::vector<double> cuts{a};
            for (double x : breaks_)
                if (x > a && x < b) cuts.push_back(x);
            std::sort(cuts.begin() + 1, cuts.end());
            cuts.push_back(b);
            std::vector<Panel> out;
            for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
                auto part = integrate(fn_, cuts[i], cuts[i + 1], opt, true).panels;
                out.insert(out.end(), part.begin(), part.end());
            }
            return out;
        };
        std::vector<Panel> left, right;
        if (lo_ < 0.0) left = pieces(lo_, 0.0);
        if (hi_ > 0.0) right = pieces(0.0, hi_);

        // knots from lo to hi, cumulative anchored at 0
        knots_.clear();
        cum_.clear();
        std::vector<double> lcum(left.size() + 1, 0.0);
        for (std::size_t k = left.size(); k-- > 0;) lcum[k] = lcum[k + 1] - left[k].value;
        for (std::size_t k = 0; k < left.size(); ++k) {
            knots_.push_back(left[k].a);
            cum_.push_back(lcum[k]);
        }
        knots_.push_back(0.0);
        cum_.push_back(0.0);
        double acc = 0.0;
        for (const Panel& p : right) {
            acc += p.value;
            knots_.push_back(p.b);
            cum_.push_back(acc);
        }
    }
};

inline Antiderivative antiderivative(const FunctionSpec& spec, double tol = 1e-12) {
    return Antiderivative(spec, tol);
}

} // namespace natgrow
