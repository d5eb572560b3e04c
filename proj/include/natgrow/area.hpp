#pragma once

// Weighted area condition
//
//   H(s; gamma2, L) = int_s^gamma2 w(eta) d eta,
//   w(eta) = f(eta) a(eta)^{1/(p-1)} exp(-p/(p-1) L K(eta)),  K = int_0^eta g/a,
//
// its extrema over s in [0, gamma1], the critical strength L~ and the
// flat-core bound on f near beta.

#include <natgrow/error.hpp>
#include <natgrow/funcspace.hpp>
#include <natgrow/quadrature.hpp>

#include <boost/math/tools/roots.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace natgrow {

enum class Verdict { holds, fails, indeterminate };

inline const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::holds: return "holds";
    case Verdict::fails: return "fails";
    case Verdict::indeterminate: return "indeterminate";
    }
    return "?";
}

struct AreaOptions {
    double quad_tol = 1e-12;    // relative to int |w|
    int resolution = 256;       // s grid for extrema, >= 64
    double tol_zero = 1e-9;
    double band_factor = 10.0;  // |margin| <= band_factor * quad_tol * int|w| is indeterminate
};

/// Exponents above this are carried in a separate log scale.
inline constexpr double area_log_threshold = 600.0;

class AreaProblem {
public:
    AreaProblem(FunctionSpec f, FunctionSpec g, std::optional<FunctionSpec> a, double p, AreaOptions opt = {})
        : f_(std::move(f)), g_(std::move(g)), a_(std::move(a)), p_(p), opt_(opt) {
        if (!(p_ > 1.0)) throw DomainError("p must exceed 1");
        if (f_.kind() != FunctionKind::nonlinearity) throw DomainError("f must be a nonlinearity spec");
        if (opt_.resolution < 64) throw DomainError("area resolution must be at least 64");
        auto gg = g_;
        auto aa = a_;
        K_ = std::make_shared<const Antiderivative>(
            [gg, aa](double s) { return gg(s) / (aa ? (*aa)(s) : 1.0); }, 0.0, f_.beta(), 1e-300, 1e-13);
    }

    const FunctionSpec& f() const noexcept { return f_; }
    const FunctionSpec& g() const noexcept { return g_; }
    const std::optional<FunctionSpec>& a() const noexcept { return a_; }
    double p() const noexcept { return p_; }
    double alpha() const noexcept { return f_.alpha(); }
    double beta() const noexcept { return f_.beta(); }
    const AreaOptions& options() const noexcept { return opt_; }
    const Antiderivative& K() const noexcept { return *K_; }

    AreaProblem with_p(double p) const {
        AreaProblem q = *this;
        if (!(p > 1.0)) throw DomainError("p must exceed 1");
        q.p_ = p;
        return q;
    }

    /// log of the weight multiplying f.
    double exponent(double eta, double L) const {
        const double la = a_ ? std::log((*a_)(eta)) / (p_ - 1.0) : 0.0;
        return la - p_ / (p_ - 1.0) * L * (*K_)(std::clamp(eta, 0.0, beta()));
    }

    /// w(eta) * exp(-shift).
    double integrand(double eta, double L, double shift = 0.0) const {
        const double e = exponent(eta, L) - shift;
        if (e > 700.0) {
            std::ostringstream os;
            os.precision(10);
            os << "area weight overflows at eta = " << eta << " (exponent " << e << ")";
            throw OverflowError(os.str(), eta);
        }
        return f_(eta) * std::exp(e);
    }

    /// Log scale used for [lo, hi]: zero unless the weight would approach the double range.
    double log_shift(double L, double lo, double hi) const {
        double m = -std::numeric_limits<double>::infinity();
        const int n = 256;
        for (int i = 0; i <= n; ++i) m = std::max(m, exponent(lo + (hi - lo) * i / n, L));
        return m > area_log_threshold ? m : 0.0;
    }

    /// int_a^b w * exp(-shift), split at alpha.
    QuadResult integrate_w(double a, double b, double L, double shift) const {
        return integrate_split([&](double x) { return integrand(x, L, shift); }, a, b, {alpha()},
                               QuadOptions{1e-300, opt_.quad_tol, 4000});
    }

private:
    FunctionSpec f_;
    FunctionSpec g_;
    std::optional<FunctionSpec> a_;
    double p_;
    AreaOptions opt_;
    std::shared_ptr<const Antiderivative> K_;
};

/// w(eta) without any scaling.
inline double area_integrand(const AreaProblem& pb, double L, double eta) { return pb.integrand(eta, L); }

inline ScaledValue compute_H_scaled(const AreaProblem& pb, double s, double gamma2, double L) {
    if (!(s <= gamma2 + 1e-15)) throw DomainError("compute_H needs s <= gamma2");
    if (s >= gamma2) return {};
    const double shift = pb.log_shift(L, s, gamma2);
    return {pb.integrate_w(s, gamma2, L, shift).value, shift};
}

/// H(s; gamma2, L). Throws OverflowError when the value leaves the double range.
inline double compute_H(const AreaProblem& pb, double s, double gamma2, double L) {
    const ScaledValue h = compute_H_scaled(pb, s, gamma2, L);
    if (h.log_scale > 0.0 && h.log_abs() > 700.0) throw OverflowError("H overflows; use compute_H_scaled", s);
    return h.value();
}

/// H sampled over [0, gamma1]. Values are in units of exp(log_scale).
struct AreaProfile {
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    double L = 0.0;
    double p = 2.0;
    double log_scale = 0.0;
    std::vector<double> s_grid;
    std::vector<double> H_values;
    double h_min = 0.0;
    double h_max = 0.0;
    double s_argmin = 0.0;
    double s_argmax = 0.0;
    double l1 = 0.0; // int_0^gamma2 |w| in the same units

    ScaledValue h_min_scaled() const { return {h_min, log_scale}; }
    ScaledValue h_max_scaled() const { return {h_max, log_scale}; }

    nlohmann::json to_json() const {
        return {{"gamma1", gamma1}, {"gamma2", gamma2}, {"L", L},           {"p", p},
                {"log_scale", log_scale}, {"h_min", h_min}, {"h_max", h_max}, {"s_argmin", s_argmin},
                {"s_argmax", s_argmax}};
    }
};

/// Extrema of H(.; gamma2, L) over [0, gamma1]. Interior extrema sit at zeros of
/// w (dH/ds = -w); those are located by root finding inside each grid cell where w
/// changes sign.
inline AreaProfile extremize_H(const AreaProblem& pb, double gamma1, double gamma2, double L,
                               std::optional<int> resolution = std::nullopt) {
    const int n = resolution.value_or(pb.options().resolution);
    if (n < 64) throw DomainError("extremize_H needs resolution >= 64");
    if (!(0.0 <= gamma1 && gamma1 < gamma2 && gamma2 <= pb.beta() + 1e-15)) {
        throw DomainError("extremize_H needs 0 <= gamma1 < gamma2 <= beta");
    }
    AreaProfile prof;
    prof.gamma1 = gamma1;
    prof.gamma2 = gamma2;
    prof.L = L;
    prof.p = pb.p();
    const double shift = pb.log_shift(L, 0.0, gamma2);
    prof.log_scale = shift;

    prof.s_grid.resize(n + 1);
    for (int i = 0; i <= n; ++i) prof.s_grid[i] = gamma1 * i / n;
    prof.s_grid.back() = gamma1;
    prof.H_values.assign(n + 1, 0.0);

    const QuadResult top = pb.integrate_w(gamma1, gamma2, L, shift);
    prof.H_values[n] = top.value;
    double l1 = top.l1;
    for (int i = n - 1; i >= 0; --i) {
        const QuadResult piece = pb.integrate_w(prof.s_grid[i], prof.s_grid[i + 1], L, shift);
        prof.H_values[i] = prof.H_values[i + 1] + piece.value;
        l1 += piece.l1;
    }
    prof.l1 = l1;

    // ties resolve to the largest s
    auto imin = n - (std::min_element(prof.H_values.rbegin(), prof.H_values.rend()) - prof.H_values.rbegin());
    auto imax = std::max_element(prof.H_values.begin(), prof.H_values.end()) - prof.H_values.begin();
    prof.h_min = prof.H_values[imin];
    prof.s_argmin = prof.s_grid[imin];
    prof.h_max = prof.H_values[imax];
    prof.s_argmax = prof.s_grid[imax];

    // polish at sign changes of w
    auto w = [&](double x) { return pb.integrand(x, L, shift); };
    std::vector<double> wv(n + 1);
    for (int i = 0; i <= n; ++i) wv[i] = w(prof.s_grid[i]);
    for (int i = 0; i < n; ++i) {
        const double a = prof.s_grid[i], b = prof.s_grid[i + 1];
        if (!((wv[i] > 0 && wv[i + 1] < 0) || (wv[i] < 0 && wv[i + 1] > 0))) continue;
        boost::uintmax_t iters = 100;
        auto r = boost::math::tools::toms748_solve(w, a, b, wv[i], wv[i + 1],
                                                    boost::math::tools::eps_tolerance<double>(50), iters);
        const double z = 0.5 * (r.first + r.second);
        const double hz = prof.H_values[i] - pb.integrate_w(a, z, L, shift).value;
        if (hz < prof.h_min) {
            prof.h_min = hz;
            prof.s_argmin = z;
        }
        if (hz > prof.h_max) {
            prof.h_max = hz;
            prof.s_argmax = z;
        }
    }
    return prof;
}

struct AreaVerdict {
    Verdict verdict = Verdict::indeterminate;
    double margin = 0.0;      // inf of H(., beta, L) over [0, beta - delta], in units of exp(log_scale)
    double log_scale = 0.0;
    double s_argmin = 0.0;
    double delta = 0.0;       // final excluded window
    double band = 0.0;        // indeterminate half-width, same units as margin
    int halvings = 0;

    bool holds() const { return verdict == Verdict::holds; }
    ScaledValue margin_scaled() const { return {margin, log_scale}; }

    nlohmann::json to_json() const {
        return {{"verdict", to_string(verdict)}, {"margin", margin}, {"log_scale", log_scale},
                {"s_argmin", s_argmin},          {"delta", delta},   {"band", band}};
    }
};

/// Positivity of H(s; beta, L) for s in [0, beta). A right window [beta - delta, beta)
/// is excluded and halved until the verdict is unchanged three times in a row.
inline AreaVerdict check_area_condition(const AreaProblem& pb, double L) {
    const double alpha = pb.alpha(), beta = pb.beta();
    const AreaOptions& opt = pb.options();
    double delta = 0.25 * (beta - alpha);

    AreaVerdict out;
    std::optional<Verdict> last;
    int same = 0;
    for (int k = 0; k < 40; ++k) {
        const double g1 = beta - delta;
        const AreaProfile prof = extremize_H(pb, g1, beta, L);
        const double band = opt.band_factor * opt.quad_tol * prof.l1;
        Verdict v = prof.h_min > band ? Verdict::holds : prof.h_min < -band ? Verdict::fails : Verdict::indeterminate;
        out = {v, prof.h_min, prof.log_scale, prof.s_argmin, delta, band, k};
        if (last && *last == v) {
            if (++same >= 3) break;
        } else {
            same = 0;
        }
        last = v;
        delta *= 0.5;
    }
    return out;
}

struct CriticalL {
    bool infinite = false;
    double value = std::numeric_limits<double>::infinity();
    double L_lo = 0.0;        // h_min > 0 here
    double L_hi = 0.0;        // h_min < 0 here (absent when infinite)
    double margin_lo = 0.0;   // scaled margins at the bracket ends
    double margin_hi = 0.0;
    int evaluations = 0;

    nlohmann::json to_json() const {
        nlohmann::json j = {{"infinite", infinite}, {"L_lo", L_lo}, {"margin_lo", margin_lo}};
        j["value"] = infinite ? nlohmann::json("+inf") : nlohmann::json(value);
        if (!infinite) {
            j["L_hi"] = L_hi;
            j["margin_hi"] = margin_hi;
        }
        return j;
    }
};

/// Sign of min_{s in [0, alpha]} H(s; beta, L): +1, -1 or 0 inside the indeterminate band.
inline int area_margin_sign(const AreaProblem& pb, double L, double* margin = nullptr) {
    const AreaProfile prof = extremize_H(pb, pb.alpha(), pb.beta(), L);
    const double band = pb.options().band_factor * pb.options().quad_tol * prof.l1;
    if (margin) *margin = prof.h_min;
    return prof.h_min > band ? 1 : prof.h_min < -band ? -1 : 0;
}

/// True when f >= -tol_zero on a dense sample of [0, beta].
inline bool f_nonnegative(const FunctionSpec& f, double tol_zero, int samples = 4096) {
    for (int i = 0; i <= samples; ++i) {
        if (f(f.beta() * i / samples) < -tol_zero) return false;
    }
    return true;
}

/// L~ with (-inf, L~) the set of L for which the area condition holds.
/// Indeterminate probes count as failures during bisection.
inline CriticalL find_critical_L(const AreaProblem& pb, double L_lo_hint = -1.0, double L_hi_hint = 1.0,
                                 double tol_L = 1e-6, int budget = 80) {
    CriticalL out;
    if (f_nonnegative(pb.f(), pb.options().tol_zero)) {
        out.infinite = true;
        out.L_lo = L_lo_hint;
        area_margin_sign(pb, L_lo_hint, &out.margin_lo);
        return out;
    }
    if (!(L_lo_hint < L_hi_hint)) throw DomainError("find_critical_L needs L_lo_hint < L_hi_hint");

    double lo = L_lo_hint, hi = L_hi_hint;
    double mlo = 0.0, mhi = 0.0;
    int slo = area_margin_sign(pb, lo, &mlo);
    int shi = area_margin_sign(pb, hi, &mhi);
    out.evaluations = 2;
    double step = hi - lo;
    int used = 0;
    while (slo <= 0) {
        if (++used > budget) {
            std::ostringstream os;
            os << "no L with positive margin found down to L = " << lo << " (margin " << mlo << ")";
            throw BracketError(os.str());
        }
        hi = lo;
        shi = slo;
        mhi = mlo;
        lo -= step;
        step *= 2.0;
        slo = area_margin_sign(pb, lo, &mlo);
        ++out.evaluations;
    }
    step = hi - lo;
    while (shi > 0) {
        if (++used > budget) {
            std::ostringstream os;
            os << "no L with negative margin found up to L = " << hi << " (margin " << mhi << ")";
            throw BracketError(os.str());
        }
        lo = hi;
        mlo = mhi;
        hi += step;
        step *= 2.0;
        shi = area_margin_sign(pb, hi, &mhi);
        ++out.evaluations;
    }
    while (hi - lo > tol_L) {
        const double mid = 0.5 * (lo + hi);
        double m = 0.0;
        const int sm = area_margin_sign(pb, mid, &m);
        ++out.evaluations;
        if (sm > 0) {
            lo = mid;
            mlo = m;
        } else {
            hi = mid;
            mhi = m;
        }
    }
    out.value = 0.5 * (lo + hi);
    out.L_lo = lo;
    out.L_hi = hi;
    out.margin_lo = mlo;
    out.margin_hi = mhi;
    return out;
}

struct FlatcoreResult {
    Verdict verdict = Verdict::holds; // holds = bounded
    double sup_ratio = 0.0;
    std::vector<double> decade_max;

    bool bounded() const { return verdict == Verdict::holds; }

    nlohmann::json to_json() const {
        const char* v = verdict == Verdict::holds ? "bounded" : verdict == Verdict::fails ? "unbounded" : "indeterminate";
        return {{"verdict", v}, {"sup_ratio", sup_ratio}, {"decade_max", decade_max}};
    }
};

/// Behaviour of f(s) / (beta - s)^{p-1} as s -> beta-, sampled at beta - d with
/// d = window * 10^{-j/8} over `decades` decades.
inline FlatcoreResult check_flatcore_criterion(const FunctionSpec& f, double p, double beta, double window,
                                               int decades = 8) {
    if (!(window > 0.0 && window < beta - f.alpha())) throw DomainError("flat-core window must lie in (0, beta - alpha)");
    FlatcoreResult out;
    const int per = 8;
    for (int dec = 0; dec < decades; ++dec) {
        double m = 0.0;
        for (int j = dec * per; j <= (dec + 1) * per; ++j) {
            const double d = window * std::pow(10.0, -static_cast<double>(j) / per);
            const double r = f(beta - d) / std::pow(d, p - 1.0);
            m = std::max(m, std::abs(r));
        }
        out.decade_max.push_back(m);
        out.sup_ratio = std::max(out.sup_ratio, m);
    }
    const std::size_t k = out.decade_max.size();
    const double a = out.decade_max[k - 3], b = out.decade_max[k - 2], c = out.decade_max[k - 1];
    const double hi = std::max({a, b, c}), lo = std::min({a, b, c});
    const bool rising = b > 1.01 * a && c > 1.01 * b;
    if (hi == 0.0 || (c <= b && b <= a)) {
        out.verdict = Verdict::holds; // settled or decaying
    } else if (hi <= 2.0 * lo) {
        out.verdict = rising ? Verdict::indeterminate : Verdict::holds;
    } else {
        out.verdict = rising ? Verdict::fails : Verdict::indeterminate;
    }
    return out;
}

} // namespace natgrow
