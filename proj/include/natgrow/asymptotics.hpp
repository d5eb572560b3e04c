#pragma once

// Diagnostics for the L -> -infinity limits of the weighted area quantities.
// Everything is carried as logs or scaled values so the sequences stay finite
// far past the point where exp(-L G) leaves the double range.

#include <natgrow/area.hpp>
#include <natgrow/error.hpp>
#include <natgrow/funcspace.hpp>
#include <natgrow/parallel.hpp>
#include <natgrow/quadrature.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace natgrow {

struct LimitDiagnostic {
    std::string name;
    std::vector<double> L_sequence;
    std::vector<double> ratio_values;
    double claimed_limit = 0.0;
    bool converged = false;
    double last_gap = 0.0;
    double band = 0.0;
    double fitted_exponent = std::numeric_limits<double>::quiet_NaN();
    std::string message;

    nlohmann::json to_json() const {
        nlohmann::json j{{"name", name},         {"L_sequence", L_sequence}, {"ratio_values", ratio_values},
                         {"claimed_limit", claimed_limit}, {"converged", converged}, {"last_gap", last_gap},
                         {"band", band},         {"message", message}};
        j["fitted_exponent"] = std::isfinite(fitted_exponent) ? nlohmann::json(fitted_exponent) : nlohmann::json();
        return j;
    }

    void write_csv(std::ostream& os) const {
        os << "L,ratio\n";
        char buf[64];
        for (std::size_t k = 0; k < L_sequence.size(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", L_sequence[k], ratio_values[k]);
            os << buf;
        }
    }
};

/// L_k = start * factor^k.
inline std::vector<double> default_L_sequence(double start = -5.0, double factor = 2.0, int count = 6) {
    std::vector<double> out(count);
    for (int k = 0; k < count; ++k) out[k] = start * std::pow(factor, k);
    return out;
}

namespace detail {

inline void check_L_sequence(const std::vector<double>& Ls) {
    if (Ls.empty()) throw DomainError("empty L sequence");
    for (std::size_t k = 0; k < Ls.size(); ++k) {
        if (!(Ls[k] < 0.0)) throw DomainError("L sequence must be negative");
        if (k > 0 && !(Ls[k] < Ls[k - 1])) throw DomainError("L sequence must be decreasing");
    }
}

inline void check_window(const AreaProblem& pb, double gamma1, double gamma2, bool strict_beta) {
    if (!(0.0 <= gamma1 && gamma1 < gamma2 && gamma2 <= pb.beta() + 1e-15))
        throw DomainError("need 0 <= gamma1 < gamma2 <= beta");
    if (strict_beta && !(gamma2 < pb.beta())) throw DomainError("gamma2 must be below beta");
}

// |gap_k| nonincreasing over the last three entries
inline bool tail_nonincreasing(const std::vector<double>& gaps) {
    const std::size_t n = gaps.size();
    for (std::size_t k = n >= 3 ? n - 2 : 1; k < n; ++k)
        if (gaps[k] > gaps[k - 1]) return false;
    return true;
}

inline ScaledValue h_min_checked(const AreaProblem& pb, double gamma1, double gamma2, double L, std::size_t k,
                                 AreaProfile* prof_out = nullptr) {
    AreaProfile prof = extremize_H(pb, gamma1, gamma2, L);
    if (!(prof.h_min > 0.0)) {
        std::ostringstream os;
        os << "h_min <= 0 at L = " << L << " (index " << k << "); start the sequence at more negative L";
        throw DomainError(os.str());
    }
    if (prof_out) *prof_out = prof;
    return prof.h_min_scaled();
}

} // namespace detail

/// (-L g(gamma2)) * int_gamma1^gamma2 exp(-L (G(eta) - G(gamma2))) d eta.
inline double taylor_ratio(const FunctionSpec& g, double gamma1, double gamma2, double L) {
    if (!(L < 0.0)) throw DomainError("taylor_ratio needs L < 0");
    if (!(gamma1 < gamma2)) throw DomainError("taylor_ratio needs gamma1 < gamma2");
    const double g2 = g(gamma2);
    if (!(g2 > 0.0)) throw DomainError("taylor_ratio needs g(gamma2) > 0");
    const double lo = std::min(0.0, gamma1);
    const Antiderivative G([g](double s) { return g(s); }, lo, gamma2, 1e-300, 1e-14);
    const double G2 = G(gamma2);
    auto integrand = [&](double eta) {
        const double e = -L * (G(eta) - G2);
        if (e > 700.0) throw OverflowError("taylor_ratio exponent overflows (g not positive?)", eta);
        return std::exp(e);
    };
    const QuadResult I = integrate(integrand, gamma1, gamma2, QuadOptions{1e-300, 1e-14, 4000});
    const double r = std::exp(std::log(I.value) + std::log(-L * g2));
    if (!std::isfinite(r)) throw OverflowError("taylor_ratio not finite", gamma2);
    return r;
}

/// h_max(L_k) / h_min(L_k); the claimed limit is 1.
inline LimitDiagnostic hratio_diagnostic(const AreaProblem& pb, double gamma1, double gamma2,
                                         const std::vector<double>& Ls, double band = 0.02) {
    detail::check_L_sequence(Ls);
    detail::check_window(pb, gamma1, gamma2, false);
    LimitDiagnostic d;
    d.name = "hratio";
    d.L_sequence = Ls;
    d.claimed_limit = 1.0;
    d.band = band;
    d.ratio_values = parallel_map(Ls.size(), [&](std::size_t k) {
        AreaProfile prof;
        detail::h_min_checked(pb, gamma1, gamma2, Ls[k], k, &prof);
        return prof.h_max / prof.h_min;
    });
    std::vector<double> gaps;
    for (double r : d.ratio_values) gaps.push_back(std::abs(r - 1.0));
    d.last_gap = gaps.back();
    d.converged = detail::tail_nonincreasing(gaps) && d.last_gap <= band;
    return d;
}

/// log of h_min(L) (-L) exp(p/(p-1) L K(gamma2)).
inline double growth_log_constant(const AreaProblem& pb, const ScaledValue& hmin, double gamma2, double L) {
    const double m = pb.p() / (pb.p() - 1.0);
    return hmin.log_abs() + std::log(-L) + m * L * pb.K()(gamma2);
}

/// Candidate constant C(L) = h_min(L) (-L) exp(p/(p-1) L K(gamma2)).
inline double growth_lower_bound(const AreaProblem& pb, double gamma1, double gamma2, double L) {
    if (!(L < 0.0)) throw DomainError("growth_lower_bound needs L < 0");
    detail::check_window(pb, gamma1, gamma2, true);
    const ScaledValue h = detail::h_min_checked(pb, gamma1, gamma2, L, 0);
    return std::exp(growth_log_constant(pb, h, gamma2, L));
}

/// Limit of C(L): (p-1) f(gamma2) a(gamma2)^{1/(p-1)} / (p K'(gamma2)).
inline double growth_limit(const AreaProblem& pb, double gamma2) {
    const double p = pb.p();
    const double a2 = pb.a() ? (*pb.a())(gamma2) : 1.0;
    const double k2 = pb.g()(gamma2) / a2;
    if (!(k2 > 0.0)) throw DomainError("growth limit needs g(gamma2) > 0");
    return (p - 1.0) * pb.f()(gamma2) * std::pow(a2, 1.0 / (p - 1.0)) / (p * k2);
}

/// Lower bound kept by the proof: the limit with f(gamma2) replaced by min f over [lo, gamma2].
inline double growth_limit_lower(const AreaProblem& pb, double lo, double gamma2, int samples = 1024) {
    double fmin = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= samples; ++i) fmin = std::min(fmin, pb.f()(lo + (gamma2 - lo) * i / samples));
    return growth_limit(pb, gamma2) / pb.f()(gamma2) * fmin;
}

/// C(L_k) sequence. Converges when successive values agree to `plateau` and sit
/// within `band` (relative) of the limit.
inline LimitDiagnostic growth_diagnostic(const AreaProblem& pb, double gamma1, double gamma2,
                                         const std::vector<double>& Ls, double plateau = 0.05,
                                         double band = 0.3) {
    detail::check_L_sequence(Ls);
    detail::check_window(pb, gamma1, gamma2, true);
    LimitDiagnostic d;
    d.name = "growth";
    d.L_sequence = Ls;
    d.claimed_limit = growth_limit(pb, gamma2);
    d.band = band;
    d.ratio_values = parallel_map(Ls.size(), [&](std::size_t k) {
        const ScaledValue h = detail::h_min_checked(pb, gamma1, gamma2, Ls[k], k);
        return std::exp(growth_log_constant(pb, h, gamma2, Ls[k]));
    });
    std::vector<double> gaps;
    for (double c : d.ratio_values) gaps.push_back(std::abs(c - d.claimed_limit));
    d.last_gap = gaps.back() / std::abs(d.claimed_limit);
    const std::size_t n = d.ratio_values.size();
    const bool flat =
        n >= 2 && std::abs(d.ratio_values[n - 1] - d.ratio_values[n - 2]) <= plateau * std::abs(d.ratio_values[n - 1]);
    d.converged = flat && detail::tail_nonincreasing(gaps) && d.last_gap <= band;
    return d;
}

/// Constants at gamma2 = beta: h_min_{gamma1,beta}(L) (-L) exp(p/(p-1) L K(beta - eps)) for each eps.
/// Rows follow eps_grid, columns follow L.
inline std::vector<std::vector<double>> growth_constants_at_beta(const AreaProblem& pb, double gamma1,
                                                                 const std::vector<double>& Ls,
                                                                 const std::vector<double>& eps_grid = {0.1, 0.05,
                                                                                                        0.01}) {
    detail::check_L_sequence(Ls);
    detail::check_window(pb, gamma1, pb.beta(), false);
    const auto h = parallel_map(Ls.size(), [&](std::size_t k) {
        return detail::h_min_checked(pb, gamma1, pb.beta(), Ls[k], k);
    });
    std::vector<std::vector<double>> out;
    for (double eps : eps_grid) {
        if (!(eps > 0.0 && pb.beta() - eps > gamma1)) throw DomainError("eps must leave room above gamma1");
        std::vector<double> row;
        for (std::size_t k = 0; k < Ls.size(); ++k)
            row.push_back(std::exp(growth_log_constant(pb, h[k], pb.beta() - eps, Ls[k])));
        out.push_back(std::move(row));
    }
    return out;
}

/// log Psi_L(s) from direct quadrature of a^{1/(p-1)} exp(-L K/(p-1)).
inline double log_psi(const AreaProblem& pb, double s, double L) {
    if (!(s > 0.0)) throw DomainError("log_psi needs s > 0");
    const double p = pb.p();
    auto expo = [&](double eta) {
        const double la = pb.a() ? std::log((*pb.a())(eta)) / (p - 1.0) : 0.0;
        return la - L * pb.K()(eta) / (p - 1.0);
    };
    double shift = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 256; ++i) shift = std::max(shift, expo(s * i / 256));
    const QuadResult I =
        integrate([&](double eta) { return std::exp(expo(eta) - shift); }, 0.0, s, QuadOptions{1e-300, 1e-13, 4000});
    return std::log(I.value) + shift;
}

/// Psi_L(gamma2)^p / h_min(L_k); claimed limit 0 with decay (-L)^{-(p-1)}.
inline LimitDiagnostic psi_power_ratio(const AreaProblem& pb, double gamma1, double gamma2,
                                       const std::vector<double>& Ls, double total_decay = 0.1,
                                       double exponent_slack = 0.2) {
    detail::check_L_sequence(Ls);
    detail::check_window(pb, gamma1, gamma2, true);
    const double p = pb.p();
    LimitDiagnostic d;
    d.name = "psi_power";
    d.L_sequence = Ls;
    d.claimed_limit = 0.0;
    d.band = total_decay;
    const auto logs = parallel_map(Ls.size(), [&](std::size_t k) {
        const ScaledValue h = detail::h_min_checked(pb, gamma1, gamma2, Ls[k], k);
        return p * log_psi(pb, gamma2, Ls[k]) - h.log_abs();
    });
    for (double lr : logs) d.ratio_values.push_back(std::exp(lr));
    d.last_gap = d.ratio_values.back();

    bool monotone = true;
    for (std::size_t k = 1; k < logs.size(); ++k) monotone = monotone && logs[k] < logs[k - 1];
    if (Ls.size() >= 2) {
        // least squares slope of log ratio against log(-L)
        double mx = 0, my = 0;
        const double n = static_cast<double>(Ls.size());
        for (std::size_t k = 0; k < Ls.size(); ++k) {
            mx += std::log(-Ls[k]) / n;
            my += logs[k] / n;
        }
        double sxy = 0, sxx = 0;
        for (std::size_t k = 0; k < Ls.size(); ++k) {
            const double dx = std::log(-Ls[k]) - mx;
            sxy += dx * (logs[k] - my);
            sxx += dx * dx;
        }
        d.fitted_exponent = -sxy / sxx;
    }
    const bool decayed = logs.back() - logs.front() <= std::log(total_decay);
    const bool rate = std::isfinite(d.fitted_exponent) && d.fitted_exponent >= p - 1.0 - exponent_slack;
    d.converged = monotone && decayed && rate;
    if (!d.converged) {
        std::ostringstream os;
        if (!monotone) os << "not monotone; ";
        if (!decayed) os << "total decay short of " << total_decay << "; ";
        if (!rate) os << "fitted exponent " << d.fitted_exponent << " below " << p - 1.0 - exponent_slack;
        d.message = os.str();
    }
    return d;
}

} // namespace natgrow
