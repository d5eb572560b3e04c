#pragma once

// The change of variables v = Psi_L(u) and the transformed nonlinearity.
//
//   K(s)     = int_0^s g/a                (= G when a is absent)
//   Psi'(s)  = a(s)^{1/(p-1)} exp(-L K(s) / (p-1))
//   ftilde   = f(Psi^{-1} v) exp(-L K(Psi^{-1} v))
//   w(s)     = f(s) a(s)^{1/(p-1)} exp(-p/(p-1) L K(s)),   Ftilde(Psi(s)) = int_0^s w

#include <natgrow/error.hpp>
#include <natgrow/funcspace.hpp>
#include <natgrow/hermite.hpp>
#include <natgrow/profile.hpp>
#include <natgrow/quadrature.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <vector>

namespace natgrow {

struct TransformOptions {
    double tol = 1e-10;       // relative interpolation error of Psi, scaled by max(1, |Psi|)
    int initial_knots = 32;
    int max_knots = 1 << 16;
    double k_tol = 1e-13;     // quadrature tolerance for K
};

/// Largest exponent accepted for Psi' before the table refuses to build.
inline constexpr double max_log_weight = 700.0;

class TransformTable {
public:
    TransformTable(const FunctionSpec& g, std::optional<FunctionSpec> a, double p, double L, double beta,
                   const TransformOptions& opt = {})
        : g_(g), a_(std::move(a)), p_(p), L_(L), beta_(beta), tol_(opt.tol) {
        if (!(p > 1.0)) throw DomainError("p must exceed 1");
        if (!(beta > 0.0)) throw DomainError("beta must be positive");
        build(opt);
    }

    double p() const noexcept { return p_; }
    double L() const noexcept { return L_; }
    double beta() const noexcept { return beta_; }
    double tol() const noexcept { return tol_; }
    bool has_a() const noexcept { return a_.has_value(); }
    const FunctionSpec& g() const noexcept { return g_; }
    const std::optional<FunctionSpec>& a() const noexcept { return a_; }

    const std::vector<double>& s_grid() const noexcept { return s_; }
    const std::vector<double>& psi_values() const noexcept { return psi_; }
    const std::vector<double>& dpsi_values() const noexcept { return dpsi_; }
    std::size_t size() const noexcept { return s_.size(); }

    double psi_beta() const noexcept { return psi_.back(); }

    double a_value(double s) const { return a_ ? (*a_)(s) : 1.0; }

    /// K(s) = int_0^s g/a, interpolated.
    double K(double s) const {
        const std::size_t i = locate(s);
        return hermite::value(s_[i], s_[i + 1], K_[i], K_[i + 1], Kp_[i], Kp_[i + 1], clamp_s(s));
    }

    /// log Psi'(s).
    double log_dpsi(double s) const {
        const double la = a_ ? std::log(a_value(s)) : 0.0;
        return (la - L_ * K(s)) / (p_ - 1.0);
    }

    double dpsi(double s) const { return std::exp(log_dpsi(s)); }

    double psi(double s) const {
        const std::size_t i = locate(s);
        return hermite::value(s_[i], s_[i + 1], psi_[i], psi_[i + 1], dpsi_[i], dpsi_[i + 1], clamp_s(s));
    }

    /// s in [0, beta] with Psi(s) = v.
    double psi_inverse(double v) const {
        const double top = psi_.back();
        const double slack = 1e-13 * std::max(1.0, top);
        if (!(v >= -slack && v <= top + slack)) {
            std::ostringstream os;
            os.precision(17);
            os << "psi_inverse: v = " << v << " outside [0, " << top << "]";
            throw DomainError(os.str());
        }
        if (v <= 0.0) return 0.0;
        if (v >= top) return beta_;
        auto it = std::upper_bound(psi_.begin(), psi_.end(), v);
        std::size_t i = static_cast<std::size_t>(it - psi_.begin()) - 1;
        i = std::min(i, s_.size() - 2);
        double lo = s_[i], hi = s_[i + 1];
        const double h = hi - lo;
        // Newton on the cubic, falling back to bisection when a step leaves the bracket
        double x = lo + h * (v - psi_[i]) / (psi_[i + 1] - psi_[i]);
        for (int it_n = 0; it_n < 100; ++it_n) {
            const double fx = hermite::value(s_[i], s_[i + 1], psi_[i], psi_[i + 1], dpsi_[i], dpsi_[i + 1], x) - v;
            if (fx == 0.0) return x;
            if (fx > 0.0) hi = x; else lo = x;
            const double d = hermite::derivative(s_[i], s_[i + 1], psi_[i], psi_[i + 1], dpsi_[i], dpsi_[i + 1], x);
            double nx = x - fx / d;
            if (!(nx > lo && nx < hi)) nx = 0.5 * (lo + hi);
            if (std::abs(nx - x) <= 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x)) ||
                hi - lo <= 4 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x))) {
                return nx;
            }
            x = nx;
        }
        return x;
    }

    void write_csv(std::ostream& os) const {
        os << "s,psi,dpsi\n";
        char buf[128];
        for (std::size_t i = 0; i < s_.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", s_[i], psi_[i], dpsi_[i]);
            os << buf;
        }
    }

    nlohmann::json to_json() const {
        return {{"p", p_}, {"L", L_}, {"beta", beta_}, {"tol", tol_}, {"g", g_.text()},
                {"a", a_ ? nlohmann::json(a_->text()) : nlohmann::json(nullptr)},
                {"s", s_}, {"psi", psi_}, {"dpsi", dpsi_}};
    }

private:
    FunctionSpec g_;
    std::optional<FunctionSpec> a_;
    double p_;
    double L_;
    double beta_;
    double tol_;

    std::vector<double> s_;
    std::vector<double> K_;
    std::vector<double> Kp_;
    std::vector<double> psi_;
    std::vector<double> dpsi_;

    double clamp_s(double s) const { return std::clamp(s, 0.0, beta_); }

    std::size_t locate(double s) const {
        const double slack = 1e-12 * std::max(1.0, beta_);
        if (!(s >= -slack && s <= beta_ + slack)) {
            std::ostringstream os;
            os.precision(17);
            os << "transform evaluated at s = " << s << " outside [0, " << beta_ << "]";
            throw DomainError(os.str());
        }
        auto it = std::upper_bound(s_.begin(), s_.end(), s);
        std::size_t i = it == s_.begin() ? 0 : static_cast<std::size_t>(it - s_.begin()) - 1;
        return std::min(i, s_.size() - 2);
    }

    double kprime(double s) const { return g_(s) / a_value(s); }

    double log_dpsi_on(std::size_t i, double s) const {
        const double k = hermite::value(s_[i], s_[i + 1], K_[i], K_[i + 1], Kp_[i], Kp_[i + 1], s);
        const double la = a_ ? std::log(a_value(s)) : 0.0;
        return (la - L_ * k) / (p_ - 1.0);
    }

    void build(const TransformOptions& opt) {
        Antiderivative Kexact([this](double s) { return kprime(s); }, 0.0, beta_, opt.k_tol, opt.k_tol);

        const int n0 = std::max(opt.initial_knots, 2);
        s_.resize(n0 + 1);
        for (int i = 0; i <= n0; ++i) s_[i] = beta_ * i / n0;
        s_.back() = beta_;

        auto fill_K = [&](std::size_t from) {
            for (std::size_t i = from; i < s_.size(); ++i) {
                K_[i] = Kexact(s_[i]);
                Kp_[i] = kprime(s_[i]);
            }
        };
        K_.assign(s_.size(), 0.0);
        Kp_.assign(s_.size(), 0.0);
        fill_K(0);

        const double expo_scale = std::abs(L_) / (p_ - 1.0);
        for (;;) {
            const std::size_t n = s_.size();
            dpsi_.assign(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                const double la = a_ ? std::log(a_value(s_[i])) : 0.0;
                const double ld = (la - L_ * K_[i]) / (p_ - 1.0);
                if (ld > max_log_weight) {
                    std::ostringstream os;
                    os.precision(10);
                    os << "exp(-L K/(p-1)) overflows at s = " << s_[i] << " (exponent " << ld << ")";
                    throw OverflowError(os.str(), s_[i]);
                }
                dpsi_[i] = std::exp(ld);
            }
            psi_.assign(n, 0.0);
            for (std::size_t i = 0; i + 1 < n; ++i) {
                auto d = [&, i](double s) { return std::exp(log_dpsi_on(i, s)); };
                psi_[i + 1] = psi_[i] + integrate(d, s_[i], s_[i + 1], QuadOptions{0.0, 1e-14, 256}).value;
            }

            std::vector<double> split;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                const double m = 0.5 * (s_[i] + s_[i + 1]);
                const double k_h = hermite::value(s_[i], s_[i + 1], K_[i], K_[i + 1], Kp_[i], Kp_[i + 1], m);
                const double k_err = std::abs(k_h - Kexact(m)) * expo_scale;
                auto d = [&, i](double s) { return std::exp(log_dpsi_on(i, s)); };
                const double psi_m = psi_[i] + integrate(d, s_[i], m, QuadOptions{0.0, 1e-14, 256}).value;
                const double psi_h = hermite::value(s_[i], s_[i + 1], psi_[i], psi_[i + 1], dpsi_[i], dpsi_[i + 1], m);
                const double psi_err = std::abs(psi_h - psi_m) / std::max(1.0, std::abs(psi_m));
                if (k_err > 0.1 * opt.tol || psi_err > opt.tol) split.push_back(m);
            }
            if (split.empty()) break;
            if (static_cast<int>(n + split.size()) > opt.max_knots) {
                throw Error("transform table: tolerance not reached within the knot budget");
            }
            std::vector<double> merged;
            merged.reserve(n + split.size());
            std::merge(s_.begin(), s_.end(), split.begin(), split.end(), std::back_inserter(merged));
            s_ = std::move(merged);
            K_.assign(s_.size(), 0.0);
            Kp_.assign(s_.size(), 0.0);
            fill_K(0);
        }
    }
};

inline std::shared_ptr<const TransformTable> build_psi(const FunctionSpec& g, const std::optional<FunctionSpec>& a,
                                                       double p, double L, double beta,
                                                       const TransformOptions& opt = {}) {
    return std::make_shared<const TransformTable>(g, a, p, L, beta, opt);
}

/// f composed with Psi^{-1}, with the weight that makes the transformed problem semilinear.
class TransformedNonlinearity {
public:
    TransformedNonlinearity(FunctionSpec f, std::shared_ptr<const TransformTable> table, double rel_tol = 1e-13)
        : f_(std::move(f)), table_(std::move(table)) {
        if (std::abs(f_.beta() - table_->beta()) > 1e-12 * std::max(1.0, f_.beta())) {
            throw DomainError("transform table and f disagree on beta");
        }
        // the integrand owns copies so the object stays safe to copy
        W_ = Antiderivative([f = f_, t = table_](double s) { return weight_of(f, *t, s); }, 0.0, table_->beta(),
                            1e-300, rel_tol, {f_.alpha()});
        w_scale_ = std::abs(W_.integral(0.0, table_->beta()));
        for (int i = 0; i <= 64; ++i) {
            w_scale_ = std::max(w_scale_, std::abs(W_(table_->beta() * i / 64)));
        }
    }

    const FunctionSpec& f() const noexcept { return f_; }
    const TransformTable& table() const noexcept { return *table_; }
    std::shared_ptr<const TransformTable> table_ptr() const noexcept { return table_; }
    double p() const noexcept { return table_->p(); }
    double L() const noexcept { return table_->L(); }
    double alpha() const noexcept { return f_.alpha(); }
    double beta() const noexcept { return f_.beta(); }
    double v_alpha() const { return table_->psi(f_.alpha()); }
    double v_beta() const { return table_->psi_beta(); }

    /// Area integrand w(s).
    double weight(double s) const { return weight_of(f_, *table_, s); }

    static double weight_of(const FunctionSpec& f, const TransformTable& t, double s) {
        const double la = t.has_a() ? std::log(t.a_value(s)) / (t.p() - 1.0) : 0.0;
        return f(s) * std::exp(la - t.p() / (t.p() - 1.0) * t.L() * t.K(s));
    }

    /// ftilde at v = Psi(s), evaluated from s.
    double f_tilde_at_s(double s) const { return f_(s) * std::exp(-table_->L() * table_->K(s)); }

    double f_tilde(double v) const { return f_tilde_at_s(table_->psi_inverse(v)); }

    /// W(s) = int_0^s w = Ftilde(Psi(s)).
    double W(double s) const { return W_(std::clamp(s, 0.0, table_->beta())); }

    double F_tilde(double v) const { return W(table_->psi_inverse(v)); }

    /// Typical magnitude of W, for relative comparisons.
    double scale() const noexcept { return w_scale_; }

    /// int_sigma^r w. Short or cancelling spans are integrated directly.
    double tail(double sigma, double r) const {
        if (sigma == r) return 0.0;
        const double diff = W(r) - W(sigma);
        if (std::abs(r - sigma) > 0.05 * table_->beta() && std::abs(diff) > 1e-3 * w_scale_) return diff;
        return integrate_split([this](double s) { return weight(s); }, sigma, r, {alpha()}, QuadOptions{0.0, 1e-14, 2000})
            .value;
    }

private:
    FunctionSpec f_;
    std::shared_ptr<const TransformTable> table_;
    Antiderivative W_;
    double w_scale_ = 0.0;
};

inline TransformedNonlinearity transformed_nonlinearity(const FunctionSpec& f,
                                                        std::shared_ptr<const TransformTable> table) {
    return TransformedNonlinearity(f, std::move(table));
}

/// v = Psi(u) pointwise.
inline SolutionProfile pushforward_solution(SolutionProfile prof, const TransformTable& t) {
    const double slack = 1e-12 * std::max(1.0, t.beta());
    prof.v.resize(prof.u.size());
    for (std::size_t i = 0; i < prof.u.size(); ++i) {
        const double u = prof.u[i];
        if (u < -slack || u > t.beta() + slack) throw DomainError("pushforward: value outside [0, beta]");
        prof.v[i] = t.psi(std::clamp(u, 0.0, t.beta()));
    }
    prof.update_norms();
    return prof;
}

/// u = Psi^{-1}(v) pointwise.
inline SolutionProfile pullback_solution(SolutionProfile prof, const TransformTable& t) {
    prof.u.resize(prof.v.size());
    for (std::size_t i = 0; i < prof.v.size(); ++i) prof.u[i] = t.psi_inverse(prof.v[i]);
    prof.update_norms();
    return prof;
}

} // namespace natgrow
