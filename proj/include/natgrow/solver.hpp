#pragma once

// Solutions of the transformed problem -Delta_p v = lambda ftilde(v) on intervals
// (time map) and balls (radial shooting), pulled back to u = Psi^{-1}(v).
//
// Everything is parameterised by the original level s = Psi^{-1}(v). With
// t = Psi(sigma) the time map becomes
//
//   T(r) = c_p int_0^r Psi'(sigma) (W(r) - W(sigma))^{-1/p} d sigma,  c_p = ((p-1)/p)^{1/p},
//
// and r - sigma = zeta^{p/(p-1)} removes the endpoint singularity.

#include <natgrow/area.hpp>
#include <natgrow/error.hpp>
#include <natgrow/funcspace.hpp>
#include <natgrow/parallel.hpp>
#include <natgrow/profile.hpp>
#include <natgrow/quadrature.hpp>
#include <natgrow/transform.hpp>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace natgrow {

struct SolverOptions {
    int rho_resolution = 512;   // uniform levels on (0, beta)
    int cluster_points = 32;    // extra geometric levels toward alpha and beta, down to 1e-4 of a grid step
    int radial_resolution = 160;
    double quad_tol = 1e-11;
    double root_tol = 1e-10;    // relative lambda mismatch at a branch
    int profile_points = 2001;
    double residual_threshold = 1e-4;
    double ode_tol = 1e-12;
    bool compute_residual = true;
};

/// The reduced problem in level variables. Built from a transformed nonlinearity
/// or directly from callbacks (Psi = identity) for semilinear model problems.
class ReducedProblem {
public:
    using Fn = std::function<double(double)>;

    static ReducedProblem from(std::shared_ptr<const TransformedNonlinearity> tn) {
        ReducedProblem rp;
        rp.alpha_ = tn->alpha();
        rp.beta_ = tn->beta();
        rp.p_ = tn->p();
        rp.L_ = tn->L();
        rp.psi_ = [tn](double s) { return tn->table().psi(s); };
        rp.dpsi_ = [tn](double s) { return tn->table().dpsi(s); };
        rp.weight_ = [tn](double s) { return tn->weight(s); };
        rp.W_ = [tn](double s) { return tn->W(s); };
        rp.scale_ = tn->scale();
        rp.f_ = tn->f();
        rp.g_ = tn->table().g();
        if (tn->table().has_a()) rp.a_ = *tn->table().a();
        rp.tn_ = std::move(tn);
        return rp;
    }

    /// -Delta_p v = f(v) with primitive F on [0, top]; breaks mark kinks of f.
    static ReducedProblem semilinear(Fn f, Fn F, double p, double top, std::vector<double> breaks = {},
                                     double alpha = 0.0) {
        ReducedProblem rp;
        rp.alpha_ = alpha;
        rp.beta_ = top;
        rp.p_ = p;
        rp.psi_ = [](double s) { return s; };
        rp.dpsi_ = [](double) { return 1.0; };
        rp.weight_ = std::move(f);
        rp.W_ = std::move(F);
        rp.extra_breaks_ = std::move(breaks);
        double sc = 0.0;
        for (int i = 0; i <= 64; ++i) sc = std::max(sc, std::abs(rp.W_(top * i / 64)));
        rp.scale_ = sc > 0.0 ? sc : 1.0;
        return rp;
    }

    double alpha() const noexcept { return alpha_; }
    double beta() const noexcept { return beta_; }
    double p() const noexcept { return p_; }
    double L() const noexcept { return L_; }
    bool has_original() const noexcept { return f_.has_value(); }
    const std::optional<FunctionSpec>& f() const noexcept { return f_; }
    const std::optional<FunctionSpec>& g() const noexcept { return g_; }
    const std::optional<FunctionSpec>& a() const noexcept { return a_; }
    const TransformedNonlinearity* transformed() const noexcept { return tn_.get(); }

    double psi(double s) const { return psi_(std::clamp(s, 0.0, beta_)); }
    double dpsi(double s) const { return dpsi_(std::clamp(s, 0.0, beta_)); }
    double weight(double s) const { return weight_(std::clamp(s, 0.0, beta_)); }
    double W(double s) const { return W_(std::clamp(s, 0.0, beta_)); }
    /// ftilde at the level s.
    double ftilde(double s) const { return weight(s) / dpsi(s); }

    std::vector<double> breaks() const {
        std::vector<double> b = extra_breaks_;
        if (alpha_ > 0.0 && alpha_ < beta_) b.push_back(alpha_);
        std::sort(b.begin(), b.end());
        return b;
    }

    /// int_sigma^r w. Long spans use the primitive unless it cancels.
    double tail(double sigma, double r) const { return r > sigma ? tail_span(r, r - sigma) : 0.0; }

    /// int_{r-d}^r w, integrated in the offset t = r - sigma so tiny spans keep
    /// full relative accuracy.
    double tail_span(double r, double d) const {
        if (!(d > 0.0)) return 0.0;
        if (d > 0.05 * beta_) {
            const double diff = W(r) - W(r - d);
            if (std::abs(diff) > 1e-3 * scale_) return diff;
        }
        std::vector<double> tb;
        for (double b : breaks())
            if (b < r && r - b < d) tb.push_back(r - b);
        // near a zero of f the samples themselves carry relative noise, so the
        // budget is capped and the best estimate kept
        return integrate_split([this, r](double t) { return weight(r - t); }, 0.0, d, tb,
                               QuadOptions{0.0, 1e-14, 64, false})
            .value;
    }

private:
    double alpha_ = 0.0, beta_ = 1.0, p_ = 2.0, L_ = 0.0, scale_ = 1.0;
    Fn psi_, dpsi_, weight_, W_;
    std::vector<double> extra_breaks_;
    std::optional<FunctionSpec> f_, g_, a_;
    std::shared_ptr<const TransformedNonlinearity> tn_;
};

inline ReducedProblem make_reduced(const FunctionSpec& f, const FunctionSpec& g, const std::optional<FunctionSpec>& a,
                                   double p, double L, const TransformOptions& topt = {}) {
    auto table = build_psi(g, a, p, L, f.beta(), topt);
    return ReducedProblem::from(std::make_shared<const TransformedNonlinearity>(f, table));
}

// ---------------------------------------------------------------------------
// time map

namespace detail {

struct TimeMapKernel {
    const ReducedProblem& pb;
    double r;
    double m, cp, inv_p, limit;

    TimeMapKernel(const ReducedProblem& problem, double level) : pb(problem), r(level) {
        const double p = pb.p();
        m = p / (p - 1.0);
        cp = std::pow((p - 1.0) / p, 1.0 / p);
        inv_p = 1.0 / p;
        const double wr = pb.weight(r);
        limit = wr > 0.0 ? cp * m * pb.dpsi(r) * std::pow(wr, -inv_p) : std::numeric_limits<double>::infinity();
    }

    double zeta_max() const { return std::pow(r, 1.0 / m); }
    double zeta_of(double s) const { return std::pow(std::max(r - s, 0.0), 1.0 / m); }

    double operator()(double zeta) const {
        const double d = std::pow(zeta, m);
        if (d <= 1e-13 * r) return limit;
        const double sigma = r - d;
        const double t = pb.tail_span(r, d);
        if (!(t > 0.0)) return std::numeric_limits<double>::quiet_NaN();
        return cp * pb.dpsi(sigma) * m * std::pow(zeta, m - 1.0) * std::pow(t, -inv_p);
    }

    std::vector<double> zeta_breaks() const {
        std::vector<double> b;
        for (double x : pb.breaks())
            if (x > 0.0 && x < r) b.push_back(zeta_of(x));
        return b;
    }
};

} // namespace detail

/// Half-length at lambda = 1 of the symmetric solution with maximum at level r.
/// NaN when r is not admissible.
inline double time_map_T(const ReducedProblem& pb, double r, double tol = 1e-11) {
    if (!(r > 0.0 && r < pb.beta())) return std::numeric_limits<double>::quiet_NaN();
    if (!(pb.weight(r) > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    detail::TimeMapKernel k(pb, r);
    try {
        const QuadResult q = integrate_split(k, 0.0, k.zeta_max(), k.zeta_breaks(), QuadOptions{0.0, tol, 400, false});
        return q.error <= 1e-6 * q.value ? q.value : std::numeric_limits<double>::quiet_NaN();
    } catch (const QuadratureError&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

struct TimeMapCurve {
    DomainSpec domain;
    double p = 2.0;
    std::vector<double> s_grid;        // levels in original variables
    std::vector<double> rho_grid;      // Psi(s)
    std::vector<double> T_values;      // half-length (interval) or first zero (ball) at lambda = 1
    std::vector<int> admissible;
    std::vector<double> lambda_values; // lambda for the target domain, NaN when inadmissible

    double lambda_of_T(double T) const { return std::pow(T / domain.half_size(), p); }

    nlohmann::json to_json() const {
        nlohmann::json lam = nlohmann::json::array();
        for (double l : lambda_values) lam.push_back(std::isfinite(l) ? nlohmann::json(l) : nlohmann::json());
        nlohmann::json T = nlohmann::json::array();
        for (double t : T_values) T.push_back(std::isfinite(t) ? nlohmann::json(t) : nlohmann::json());
        return {{"domain", to_string(domain.kind)}, {"size", domain.size}, {"N", domain.N}, {"p", p},
                {"s", s_grid}, {"rho", rho_grid}, {"T", T}, {"admissible", admissible}, {"lambda", lam}};
    }

    void write_csv(std::ostream& os) const {
        os << "s,rho,T,admissible,lambda\n";
        char buf[160];
        for (std::size_t i = 0; i < s_grid.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%d,%.17g\n", s_grid[i], rho_grid[i], T_values[i],
                          admissible[i], lambda_values[i]);
            os << buf;
        }
    }
};

/// Levels used for the curve: uniform on (0, beta) plus clusters toward alpha
/// (from above) and beta.
inline std::vector<double> level_grid(double alpha, double beta, int n, int cluster) {
    std::vector<double> s;
    for (int i = 1; i < n; ++i) s.push_back(beta * i / n);
    const double h = beta / n;
    for (int k = 1; k <= cluster; ++k) {
        const double d = h * std::pow(10.0, -static_cast<double>(k) / 8.0);
        s.push_back(beta - d);
        if (alpha > 0.0 && alpha < beta) s.push_back(alpha + d);
    }
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
}

/// Energy condition on a grid: W(s_i) above W at every earlier grid level and w(s_i) > 0.
inline std::vector<int> admissibility(const ReducedProblem& pb, const std::vector<double>& s) {
    std::vector<int> out(s.size(), 0);
    double running = 0.0; // W(0)
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double Wi = pb.W(s[i]);
        const double tol = 1e-12 * std::max(1.0, std::abs(Wi));
        out[i] = (Wi > running + tol && pb.weight(s[i]) > 0.0) ? 1 : 0;
        running = std::max(running, Wi);
    }
    return out;
}

// ---------------------------------------------------------------------------
// radial shooting

struct RadialShot {
    bool reached = false;
    double r_star = std::numeric_limits<double>::quiet_NaN();
    std::string reason;
    std::vector<double> samples; // u at requested radii (lambda = 1 scaling)
};

/// Integrates (r^{N-1} |v'|^{p-2} v')' = -r^{N-1} ftilde(v), v(0) = Psi(u0), v'(0) = 0
/// outward until v reaches 0. State is (u, q = r^{N-1} phi_p(v')).
/// When `at` is given, u is sampled at those radii (ascending, <= r_star).
inline RadialShot shoot_radial(const ReducedProblem& pb, int N, double u0, double ode_tol = 1e-12,
                               const std::vector<double>* at = nullptr) {
    using namespace boost::numeric::odeint;
    using state = std::array<double, 2>;
    RadialShot shot;
    const double p = pb.p();
    const double beta = pb.beta();
    if (N < 1) throw DomainError("radial shooting needs N >= 1");
    if (!(u0 > 0.0 && u0 < beta)) throw DomainError("shooting height must lie in (0, beta)");
    const double f0 = pb.ftilde(u0);
    if (!(f0 > 0.0)) {
        shot.reason = "ftilde(rho0) <= 0: the constant state does not move";
        return shot;
    }
    const double m = p / (p - 1.0);
    const double nn = static_cast<double>(N);
    const double c = std::pow(f0 / nn, 1.0 / (p - 1.0)) / m;     // v ~ v0 - c r^m
    const double v0 = pb.psi(u0);
    const double r_typ = std::pow(v0 / c, 1.0 / m);
    const double r0 = std::min(1e-4 * r_typ, std::pow(1e-10 * std::max(v0, 1e-3) / c, 1.0 / m));
    const double d0 = pb.dpsi(u0);
    state y{u0 - c * std::pow(r0, m) / d0, -f0 * std::pow(r0, nn) / nn};

    auto rhs = [&](const state& x, state& dx, double r) {
        const double u = std::clamp(x[0], 0.0, beta);
        const double rn = N == 1 ? 1.0 : std::pow(r, nn - 1.0);
        const double z = x[1] / rn;
        const double vp = std::copysign(std::pow(std::abs(z), 1.0 / (p - 1.0)), z);
        dx[0] = vp / pb.dpsi(u);
        dx[1] = -rn * pb.ftilde(u);
    };
    auto series_u = [&](double r) { return u0 - c * std::pow(r, m) / d0; };

    auto stepper = make_dense_output(ode_tol * 1e-2, ode_tol, runge_kutta_dopri5<state>());
    stepper.initialize(y, r0, 1e-3 * r_typ);
    const double r_max = 1e3 * r_typ;
    std::size_t next = 0;
    if (at) {
        while (next < at->size() && (*at)[next] <= r0) shot.samples.push_back(series_u((*at)[next++]));
    }
    for (long steps = 0; steps < 2000000; ++steps) {
        const auto span = stepper.do_step(rhs);
        const double u1 = stepper.current_state()[0];
        const double t1 = span.second;
        double r_end = t1;
        if (u1 <= 0.0) {
            auto u_at = [&](double r) {
                state s;
                stepper.calc_state(r, s);
                return s[0];
            };
            shot.reached = true;
            shot.r_star = t1;
            // the stepper can emit a zero-length step at the crossing
            if (t1 > span.first && u_at(span.first) > 0.0) {
                boost::uintmax_t iters = 200;
                const auto br = boost::math::tools::toms748_solve(
                    u_at, span.first, t1, boost::math::tools::eps_tolerance<double>(52), iters);
                shot.r_star = 0.5 * (br.first + br.second);
            }
            r_end = shot.r_star;
        }
        if (at) {
            while (next < at->size() && (*at)[next] <= r_end) {
                state s;
                stepper.calc_state((*at)[next++], s);
                shot.samples.push_back(std::max(s[0], 0.0));
            }
        }
        if (shot.reached) {
            if (at)
                while (next < at->size()) {
                    shot.samples.push_back(0.0);
                    ++next;
                }
            return shot;
        }
        if (t1 > r_max) break;
        if (stepper.current_state()[0] > beta) {
            shot.reason = "profile left [0, beta]";
            return shot;
        }
    }
    shot.reason = "v never reached 0 within the integration budget";
    return shot;
}

// ---------------------------------------------------------------------------
// curves and branches

/// T-like quantity for the domain: half-length for intervals, first zero for balls.
inline double curve_T(const ReducedProblem& pb, const DomainSpec& domain, double s, const SolverOptions& opt) {
    if (domain.kind == DomainKind::interval) return time_map_T(pb, s, opt.quad_tol);
    const RadialShot shot = shoot_radial(pb, domain.N, s, opt.ode_tol);
    return shot.reached ? shot.r_star : std::numeric_limits<double>::quiet_NaN();
}

inline TimeMapCurve build_time_map(const ReducedProblem& pb, const DomainSpec& domain, const SolverOptions& opt = {}) {
    domain.validate();
    TimeMapCurve c;
    c.domain = domain;
    c.p = pb.p();
    const int n = domain.kind == DomainKind::interval ? opt.rho_resolution : opt.radial_resolution;
    if (n < 8) throw DomainError("curve resolution too small");
    c.s_grid = level_grid(pb.alpha(), pb.beta(), n, opt.cluster_points);
    for (double s : c.s_grid) c.rho_grid.push_back(pb.psi(s));
    std::vector<int> energy = admissibility(pb, c.s_grid);
    c.T_values = parallel_map(c.s_grid.size(), [&](std::size_t i) {
        if (domain.kind == DomainKind::interval && !energy[i]) return std::numeric_limits<double>::quiet_NaN();
        return curve_T(pb, domain, c.s_grid[i], opt);
    });
    for (std::size_t i = 0; i < c.s_grid.size(); ++i) {
        const bool ok = std::isfinite(c.T_values[i]) && c.T_values[i] > 0.0;
        c.admissible.push_back(ok ? 1 : 0);
        c.lambda_values.push_back(ok ? c.lambda_of_T(c.T_values[i]) : std::numeric_limits<double>::quiet_NaN());
    }
    return c;
}

/// Interval time map at lambda = 1 for an ad hoc level list (no domain scaling).
inline TimeMapCurve build_time_map(const ReducedProblem& pb, double p_check, int rho_resolution) {
    if (std::abs(p_check - pb.p()) > 1e-15) throw DomainError("p does not match the transformed problem");
    SolverOptions opt;
    opt.rho_resolution = rho_resolution;
    return build_time_map(pb, DomainSpec::interval(2.0), opt);
}

struct Branch {
    double s = 0.0;       // maximum level in original variables
    double lambda = 0.0;  // curve value at s
    bool tangency = false;
};

namespace detail {

inline double curve_lambda(const ReducedProblem& pb, const TimeMapCurve& c, double s, const SolverOptions& opt) {
    const double T = curve_T(pb, c.domain, s, opt);
    return std::isfinite(T) ? c.lambda_of_T(T) : std::numeric_limits<double>::quiet_NaN();
}

// contiguous admissible index runs [first, last]
inline std::vector<std::pair<std::size_t, std::size_t>> admissible_runs(const TimeMapCurve& c) {
    std::vector<std::pair<std::size_t, std::size_t>> runs;
    for (std::size_t i = 0; i < c.s_grid.size();) {
        if (!c.admissible[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < c.s_grid.size() && c.admissible[j + 1]) ++j;
        runs.emplace_back(i, j);
        i = j + 1;
    }
    return runs;
}

// Brent on lambda(s) over [a, b]; sign = +1 for a minimum, -1 for a maximum.
inline std::pair<double, double> refine_extremum(const ReducedProblem& pb, const TimeMapCurve& c, double a, double b,
                                                 int sign, const SolverOptions& opt) {
    auto fn = [&](double s) {
        const double l = curve_lambda(pb, c, s, opt);
        return std::isfinite(l) ? sign * l : std::numeric_limits<double>::max();
    };
    boost::uintmax_t iters = 100;
    const auto r = boost::math::tools::brent_find_minima(fn, a, b, 40, iters);
    return {r.first, sign * r.second};
}

inline double bracket_root(const ReducedProblem& pb, const TimeMapCurve& c, double lambda, double a, double b,
                           double fa, double fb, const SolverOptions& opt) {
    // lambda(s) can be very steep near beta, so the stop is on the lambda mismatch
    double best_s = std::abs(fa) < std::abs(fb) ? a : b;
    double best_f = std::min(std::abs(fa), std::abs(fb));
    auto fn = [&](double s) {
        const double l = curve_lambda(pb, c, s, opt);
        if (!std::isfinite(l)) throw BracketError("lambda curve undefined inside a bracket");
        if (std::abs(l - lambda) < best_f) {
            best_f = std::abs(l - lambda);
            best_s = s;
        }
        return l - lambda;
    };
    boost::uintmax_t iters = 200;
    auto tol = [&](double x, double y) {
        return best_f <= opt.root_tol * lambda || std::abs(x - y) <= 4e-16 * std::max(std::abs(x), std::abs(y));
    };
    boost::math::tools::toms748_solve(fn, a, b, fa, fb, tol, iters);
    return best_s;
}

} // namespace detail

/// All levels s with lambda(s) = lambda, sorted by s. Grid sign changes are
/// solved by bracketing; grid extrema are refined so close root pairs and
/// tangencies are not missed.
inline std::vector<Branch> find_branches(const ReducedProblem& pb, const TimeMapCurve& c, double lambda,
                                         const SolverOptions& opt = {}) {
    if (!(lambda > 0.0)) return {};
    std::vector<Branch> out;
    for (auto [i0, i1] : detail::admissible_runs(c)) {
        // segment list: split at refined interior extrema
        std::vector<std::pair<double, double>> pts; // (s, lambda - target)
        pts.emplace_back(c.s_grid[i0], c.lambda_values[i0] - lambda);
        for (std::size_t i = i0 + 1; i <= i1; ++i) {
            if (i < i1) {
                const double lp = c.lambda_values[i - 1], l = c.lambda_values[i], ln = c.lambda_values[i + 1];
                const int sign = (l < lp && l <= ln) ? 1 : ((l > lp && l >= ln) ? -1 : 0);
                if (sign != 0) {
                    const double dl = l - lambda, dp = lp - lambda, dn = ln - lambda;
                    // only refine when the extremum might reach the target
                    const bool near = std::abs(dl) < 0.5 * (std::abs(dl - dp) + std::abs(dl - dn)) + 1e-9 * lambda;
                    if (near && (dp * dl > 0.0) && (dn * dl > 0.0)) {
                        const auto [se, le] = detail::refine_extremum(pb, c, c.s_grid[i - 1], c.s_grid[i + 1], sign, opt);
                        if (std::abs(le - lambda) <= 1e-9 * lambda) {
                            out.push_back({se, le, true});
                            pts.emplace_back(c.s_grid[i], l - lambda);
                            continue;
                        }
                        if (se > c.s_grid[i - 1] && se < c.s_grid[i + 1] && se != c.s_grid[i]) {
                            if (se < c.s_grid[i]) {
                                pts.emplace_back(se, le - lambda);
                                pts.emplace_back(c.s_grid[i], l - lambda);
                            } else {
                                pts.emplace_back(c.s_grid[i], l - lambda);
                                pts.emplace_back(se, le - lambda);
                            }
                            continue;
                        }
                    }
                }
            }
            pts.emplace_back(c.s_grid[i], c.lambda_values[i] - lambda);
        }
        for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
            const auto [a, fa] = pts[k];
            const auto [b, fb] = pts[k + 1];
            if (fa == 0.0) {
                out.push_back({a, lambda, false});
                continue;
            }
            if (fa * fb < 0.0) {
                const double s = detail::bracket_root(pb, c, lambda, a, b, fa, fb, opt);
                out.push_back({s, lambda, false});
            }
        }
        if (pts.back().second == 0.0) out.push_back({pts.back().first, lambda, false});
    }
    std::sort(out.begin(), out.end(), [](const Branch& x, const Branch& y) { return x.s < y.s; });
    out.erase(std::unique(out.begin(), out.end(),
                          [&](const Branch& x, const Branch& y) {
                              return std::abs(x.s - y.s) <= 1e-9 * std::max(1.0, pb.beta());
                          }),
              out.end());
    return out;
}

// ---------------------------------------------------------------------------
// profiles

namespace detail {

// Chebyshev interpolant of degree N-1 on [a, b] together with its antiderivative
// (zero at a). Coefficients use the convention f = c0/2 + sum c_k T_k.
struct ChebPanel {
    static constexpr int N = 24;
    double a = 0.0, b = 0.0;
    std::array<double, N> c{};
    std::array<double, N + 1> ci{};

    static double clenshaw(const double* coef, int n, double t) {
        double b1 = 0.0, b2 = 0.0;
        for (int k = n - 1; k >= 1; --k) {
            const double b0 = 2.0 * t * b1 - b2 + coef[k];
            b2 = b1;
            b1 = b0;
        }
        return t * b1 - b2 + 0.5 * coef[0];
    }
    double t_of(double x) const { return (2.0 * x - a - b) / (b - a); }
    double value(double x) const { return clenshaw(c.data(), N, std::clamp(t_of(x), -1.0, 1.0)); }
    double integral(double x) const { return clenshaw(ci.data(), N + 1, std::clamp(t_of(x), -1.0, 1.0)); }
    double total() const { return clenshaw(ci.data(), N + 1, 1.0); }
    /// integral over [x, b], accurate relative to its own size
    double integral_to_end(double x) const {
        return boost::math::quadrature::gauss<double, 15>::integrate([this](double z) { return value(z); }, x, b);
    }

    template <class F>
    static ChebPanel fit(F&& f, double a, double b) {
        ChebPanel p;
        p.a = a;
        p.b = b;
        std::array<double, N> y{};
        for (int j = 0; j < N; ++j) {
            const double t = std::cos(std::numbers::pi * (j + 0.5) / N);
            const double x = 0.5 * (a + b) + 0.5 * (b - a) * t;
            y[j] = f(x);
            check_sample(y[j], x);
        }
        for (int k = 0; k < N; ++k) {
            double s = 0.0;
            for (int j = 0; j < N; ++j) s += y[j] * std::cos(std::numbers::pi * k * (j + 0.5) / N);
            p.c[k] = 2.0 * s / N;
        }
        const double half = 0.5 * (b - a);
        for (int k = 1; k <= N; ++k) {
            const double next = k + 1 < N ? p.c[k + 1] : 0.0;
            p.ci[k] = half * (p.c[k - 1] - next) / (2.0 * k);
        }
        double at_minus = 0.0; // sum_{k>=1} ci_k (-1)^k
        for (int k = 1; k <= N; ++k) at_minus += (k % 2 ? -1.0 : 1.0) * p.ci[k];
        p.ci[0] = -2.0 * at_minus;
        return p;
    }

    double tail_size() const { return std::abs(c[N - 1]) + std::abs(c[N - 2]) + std::abs(c[N - 3]); }
    double scale() const {
        double m = 0.0;
        for (double v : c) m = std::max(m, std::abs(v));
        return m;
    }
};

} // namespace detail

/// Depth profile of an interval solution: distance from the centre, scaled by
/// lambda^{1/p}, as a function of zeta = (r - u)^{(p-1)/p}. The kernel is held as
/// piecewise Chebyshev interpolants, so evaluating u costs no further quadrature.
class HalfProfile {
public:
    HalfProfile(const ReducedProblem& pb, double r, double tol = 1e-13) : k_(pb, r) {
        std::vector<double> edges{0.0};
        for (double b : k_.zeta_breaks()) edges.push_back(b);
        std::sort(edges.begin(), edges.end());
        edges.push_back(k_.zeta_max());
        const double floor = 1e-12 * k_.zeta_max();
        for (std::size_t i = 0; i + 1 < edges.size(); ++i)
            if (edges[i + 1] > edges[i]) refine(edges[i], edges[i + 1], tol, floor, 0);
        std::sort(panels_.begin(), panels_.end(), [](const auto& x, const auto& y) { return x.a < y.a; });
        cum_.assign(panels_.size() + 1, 0.0);
        for (std::size_t i = 0; i < panels_.size(); ++i) cum_[i + 1] = cum_[i] + panels_[i].total();
        rcum_.assign(panels_.size() + 1, 0.0);
        for (std::size_t i = panels_.size(); i-- > 0;) rcum_[i] = rcum_[i + 1] + panels_[i].total();
    }

    double total() const { return cum_.back(); }
    double r() const { return k_.r; }
    std::size_t panel_count() const { return panels_.size(); }

    double Y(double zeta) const {
        const std::size_t i = panel_of(zeta);
        return cum_[i] + panels_[i].integral(std::clamp(zeta, panels_[i].a, panels_[i].b));
    }

    /// u at scaled distance y from the centre (y = |x - centre| lambda^{1/p}).
    double u_at(double y) const { return std::max(0.0, k_.r - depth_at(y)); }

    /// r - u at scaled distance y; keeps full precision near the top.
    double depth_at(double y) const {
        if (y <= 0.0) return 0.0;
        if (y >= total()) return k_.r;
        std::size_t i = static_cast<std::size_t>(std::upper_bound(cum_.begin(), cum_.end(), y) - cum_.begin());
        i = std::clamp<std::size_t>(i, 1, panels_.size()) - 1;
        const auto& pn = panels_[i];
        const double target = y - cum_[i];
        double lo = pn.a, hi = pn.b;
        const double span = cum_[i + 1] - cum_[i];
        double z = span > 0.0 ? lo + (hi - lo) * target / span : lo;
        for (int it = 0; it < 100; ++it) {
            const double F = pn.integral(z) - target;
            if (F > 0.0) hi = z;
            else lo = z;
            const double d = pn.value(z);
            double zn = d > 0.0 ? z - F / d : 0.5 * (lo + hi);
            if (!(zn >= lo && zn <= hi)) zn = 0.5 * (lo + hi);
            const bool done = std::abs(zn - z) <= 4e-16 * std::max(std::abs(z), 1e-300) || hi - lo <= 4e-16 * hi;
            z = zn;
            if (done) break;
        }
        return std::min(k_.r, std::pow(z, k_.m));
    }

    /// r - u at scaled distance e from the boundary; precise for small e.
    double depth_from_edge(double e) const {
        if (e <= 0.0) return k_.r;
        if (e >= rcum_.front()) return 0.0;
        // rcum_ decreases; panel i has rcum_[i+1] <= e < rcum_[i]
        std::size_t i = static_cast<std::size_t>(
            std::upper_bound(rcum_.begin(), rcum_.end(), e, std::greater<double>()) - rcum_.begin());
        i = std::clamp<std::size_t>(i, 1, panels_.size()) - 1;
        const auto& pn = panels_[i];
        const double target = e - rcum_[i + 1];
        double lo = pn.a, hi = pn.b;
        const double span = rcum_[i] - rcum_[i + 1];
        double z = span > 0.0 ? hi - (hi - lo) * target / span : hi;
        for (int it = 0; it < 100; ++it) {
            const double F = pn.integral_to_end(z) - target; // decreasing in z
            if (F > 0.0) lo = z;
            else hi = z;
            const double d = pn.value(z);
            double zn = d > 0.0 ? z + F / d : 0.5 * (lo + hi);
            if (!(zn >= lo && zn <= hi)) zn = 0.5 * (lo + hi);
            const bool done = std::abs(zn - z) <= 4e-16 * z || hi - lo <= 4e-16 * hi;
            z = zn;
            if (done) break;
        }
        return std::min(k_.r, std::pow(z, k_.m));
    }

private:
    void refine(double a, double b, double tol, double floor, int depth) {
        auto pn = detail::ChebPanel::fit(k_, a, b);
        if (pn.tail_size() <= tol * pn.scale() || b - a <= floor || depth >= 48) {
            panels_.push_back(pn);
            return;
        }
        const double mid = 0.5 * (a + b);
        refine(a, mid, tol, floor, depth + 1);
        refine(mid, b, tol, floor, depth + 1);
    }

    std::size_t panel_of(double zeta) const {
        auto it = std::upper_bound(panels_.begin(), panels_.end(), zeta,
                                   [](double z, const detail::ChebPanel& pn) { return z < pn.a; });
        const std::size_t i = static_cast<std::size_t>(it - panels_.begin());
        return i == 0 ? 0 : i - 1;
    }

    detail::TimeMapKernel k_;
    std::vector<detail::ChebPanel> panels_;
    std::vector<double> cum_;
    std::vector<double> rcum_;
};

namespace detail {

// Fornberg weights for the first derivative at 0 from nodes z[0..n).
inline std::vector<double> fd_weights_d1(const std::vector<double>& z) {
    const std::size_t n = z.size();
    std::vector<std::array<double, 2>> c(n, {0.0, 0.0});
    double c1 = 1.0, c4 = z[0];
    c[0][0] = 1.0;
    for (std::size_t i = 1; i < n; ++i) {
        const std::size_t mn = std::min<std::size_t>(i, 1);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = z[i];
        for (std::size_t j = 0; j < i; ++j) {
            const double c3 = z[i] - z[j];
            c2 *= c3;
            if (j == i - 1) {
                for (std::size_t k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (std::size_t k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = c[i][1];
    return w;
}

} // namespace detail

/// Max-norm residual of -(a |u'|^{p-2} u')' + L g(u) |u'|^p - lambda f(u) at the n - 2
/// interior points x_i = len i / (n-1) of a symmetric profile with maximum `top` at
/// the centre, by nested finite differences. `depth_of(x)` returns top - u(x)
/// anywhere in [0, len]; differencing the depth keeps precision where u is flat.
/// u is smooth between the boundary, the centre and the points where it crosses a
/// level in `kinks` (f not smooth there). Each point uses one stencil shape for
/// both derivatives, inside one such piece: eighth-order central, shrunk to fit
/// when close to a piece end, else sixth-order one-sided. Steps follow the local
/// length scale |u'/u''|, since u = Psi^{-1}(v) can have layers much thinner than
/// the grid. The profile must be symmetric; the right half is mirrored from the
/// left. At the centre u is only C^1 for p > 2, so the flux derivative there
/// comes from its odd extension with the leading |x|^{p/(p-1)} error term
/// extrapolated away.
inline double interval_residual(const std::function<double(double)>& depth_of, double top, std::size_t n, double len,
                                const FunctionSpec& f, const FunctionSpec& g, const std::optional<FunctionSpec>& a,
                                double p, double L, double lambda, std::vector<double>* pointwise = nullptr,
                                const std::vector<double>& kinks = {}) {
    const double h = len / static_cast<double>(n - 1);
    const double centre = 0.5 * len;
    const double m = p / (p - 1.0);
    auto phi = [p](double z) { return std::copysign(std::pow(std::abs(z), p - 1.0), z); };
    auto aval = [&](double u) { return a ? (*a)(u) : 1.0; };
    auto flux = [&](double depth, double du) { return aval(top - depth) * phi(du); };

    // break points in x
    std::vector<double> cuts{0.0, centre, len};
    for (double k : kinks) {
        if (!(k > 0.0 && k < top)) continue;
        double lo = 0.0, hi = centre; // depth decreases on the left half
        for (int it = 0; it < 200 && hi - lo > 1e-16 * len; ++it) {
            const double mid = 0.5 * (lo + hi);
            (top - depth_of(mid) < k ? lo : hi) = mid;
        }
        cuts.push_back(0.5 * (lo + hi));
        cuts.push_back(len - 0.5 * (lo + hi));
    }
    std::sort(cuts.begin(), cuts.end());

    static constexpr double c8[4] = {4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0};
    std::vector<double> nodes;
    for (int k = 0; k <= 6; ++k) nodes.push_back(k);
    const std::vector<double> w6 = detail::fd_weights_d1(nodes);
    auto central = [](const double* y, double st) { // y[-4..4]
        double s = 0.0;
        for (int k = 1; k <= 4; ++k) s += c8[k - 1] * (y[k] - y[-k]);
        return s / st;
    };

    // u' at the centre + t, from a central stencil well inside the half
    auto du_near_centre = [&](double t) {
        double d[9];
        const double st = t / 32.0;
        for (int k = -4; k <= 4; ++k) d[k + 4] = depth_of(centre + t + k * st);
        return -central(d + 4, st);
    };

    // the right half mirrors the left, so only the left half is evaluated
    const std::size_t half = (n - 1) / 2;
    auto vals = parallel_map(half + 1, [&](std::size_t i) -> double {
        if (i == 0) return 0.0;
        const double x = len * static_cast<double>(i) / static_cast<double>(n - 1);
        const double d0 = depth_of(x);
        const double u0 = top - d0;
        auto it = std::upper_bound(cuts.begin(), cuts.end(), x);
        const double A = *(it - 1), B = it == cuts.end() ? len : *it;

        if (std::abs(x - centre) <= 1e-12 * len) {
            // flux is odd about the centre
            const double hf = std::min(0.25 * h, (B - A) / 16.0);
            auto D = [&](double hh) {
                double s = 0.0;
                for (int k = 1; k <= 4; ++k) {
                    const double t = k * hh;
                    s += 2.0 * c8[k - 1] * flux(depth_of(centre + t), du_near_centre(t));
                }
                return s / hh;
            };
            double dflux = D(hf);
            if (p != 2.0) {
                const double q = std::pow(2.0, m);
                dflux = (q * D(0.5 * hf) - dflux) / (q - 1.0);
            }
            return std::abs(-dflux - lambda * f(u0));
        }

        // local length scale from a crude second-order pass
        const double dist = std::min(x - A, B - x);
        const double hc = std::min(h, 0.5 * dist);
        const double dm = depth_of(x - hc), dp = depth_of(x + hc);
        const double du = std::abs(dp - dm) / (2.0 * hc);
        const double ddu = std::abs(dp - 2.0 * d0 + dm) / (hc * hc);
        double hs = std::min(h, std::abs(x - centre) / 16.0);
        if (ddu > 0.0 && du > 0.0) hs = std::min(hs, du / ddu / 64.0);

        double up = 0.0, dflux = 0.0;
        const double fit = dist / 8.5;
        if (fit >= hs / 8.0) {
            const double st = std::min(hs, fit);
            double d[17], fl[9], dd[9];
            for (int k = -8; k <= 8; ++k) d[k + 8] = k == 0 ? d0 : depth_of(x + k * st);
            for (int j = 0; j < 9; ++j) {
                dd[j] = -central(d + j + 4, st);
                fl[j] = flux(d[j + 4], dd[j]);
            }
            up = dd[4];
            dflux = central(fl + 4, st);
        } else {
            const double dir = (B - x >= x - A) ? 1.0 : -1.0;
            const double room = dir > 0 ? B - x : x - A;
            const double st = std::min(0.4 * hs, room / 12.5);
            double d[13];
            for (int k = 0; k <= 12; ++k) d[k] = k == 0 ? d0 : depth_of(x + dir * k * st);
            for (int j = 0; j <= 6; ++j) {
                double s = 0.0;
                for (int k = 0; k <= 6; ++k) s += w6[k] * d[j + k];
                const double dj = -dir * s / st;
                if (j == 0) up = dj;
                dflux += w6[j] * flux(d[j], dj);
            }
            dflux *= dir / st;
        }
        return std::abs(-dflux + L * g(u0) * std::pow(std::abs(up), p) - lambda * f(u0));
    });
    vals.resize(n, 0.0);
    for (std::size_t i = 1; i <= half; ++i) vals[n - 1 - i] = vals[i];
    if (pointwise) *pointwise = vals;
    return *std::max_element(vals.begin(), vals.end());
}

/// Symmetric interval profile with maximum level r at the given lambda.
inline SolutionProfile interval_profile(const ReducedProblem& pb, double r, double lambda, const DomainSpec& domain,
                                        const SolverOptions& opt = {}) {
    const HalfProfile hp(pb, r);
    const double len = domain.size;
    const std::size_t n = static_cast<std::size_t>(std::max(opt.profile_points, 5));
    // lambda^{1/p} up to the branch tolerance; taken from the time map so that u
    // vanishes exactly at both ends
    const double scale = 2.0 * hp.total() / domain.size;
    SolutionProfile prof;
    prof.domain = domain;
    prof.lambda = lambda;
    prof.L = pb.L();
    prof.p = pb.p();
    prof.x.resize(n);
    for (std::size_t i = 0; i < n; ++i) prof.x[i] = len * static_cast<double>(i) / static_cast<double>(n - 1);
    prof.u.assign(n, 0.0);
    const std::size_t half = (n - 1) / 2;
    const auto left = parallel_map(half + 1, [&](std::size_t i) {
        const double y = std::abs(0.5 * len - prof.x[i]) * scale;
        return hp.u_at(y);
    });
    for (std::size_t i = 0; i <= half; ++i) {
        prof.u[i] = left[i];
        prof.u[n - 1 - i] = left[i];
    }
    if (n % 2 == 0) prof.u[half + 1] = prof.u[half];
    prof.v.resize(n);
    for (std::size_t i = 0; i < n; ++i) prof.v[i] = pb.psi(prof.u[i]);
    prof.update_norms();
    if (opt.compute_residual && pb.has_original()) {
        auto depth = [&](double x) {
            const double e = std::min(x, len - x);
            return e < 0.25 * len ? hp.depth_from_edge(e * scale) : hp.depth_at(std::abs(0.5 * len - x) * scale);
        };
        prof.residual_norm = interval_residual(depth, r, n, len, *pb.f(), *pb.g(), pb.a(), pb.p(), pb.L(), lambda,
                                               nullptr, pb.breaks());
        prof.residual_checked = true;
        prof.residual_threshold = opt.residual_threshold;
    }
    return prof;
}

/// Radial profile with maximum level u0, rescaled to radius R. lambda is
/// determined by the first zero: lambda = (r_star / R)^p.
inline std::optional<SolutionProfile> solve_radial(const ReducedProblem& pb, int N, double R, double u0,
                                                   const SolverOptions& opt = {}, std::string* why = nullptr) {
    const RadialShot first = shoot_radial(pb, N, u0, opt.ode_tol);
    if (!first.reached) {
        if (why) *why = first.reason;
        return std::nullopt;
    }
    const std::size_t n = static_cast<std::size_t>(std::max(opt.profile_points, 5));
    std::vector<double> radii(n);
    for (std::size_t i = 0; i < n; ++i) radii[i] = first.r_star * static_cast<double>(i) / static_cast<double>(n - 1);
    radii.back() = first.r_star;
    const RadialShot second = shoot_radial(pb, N, u0, opt.ode_tol, &radii);
    SolutionProfile prof;
    prof.domain = N == 1 ? DomainSpec::interval(2.0 * R) : DomainSpec::ball(R, N);
    prof.lambda = std::pow(first.r_star / R, pb.p());
    prof.L = pb.L();
    prof.p = pb.p();
    prof.x.resize(n);
    for (std::size_t i = 0; i < n; ++i) prof.x[i] = R * static_cast<double>(i) / static_cast<double>(n - 1);
    prof.u = second.samples;
    prof.u.resize(n, 0.0);
    prof.u.front() = u0;
    prof.u.back() = 0.0;
    prof.v.resize(n);
    for (std::size_t i = 0; i < n; ++i) prof.v[i] = pb.psi(prof.u[i]);
    prof.update_norms();
    return prof;
}

/// All interval (or radial) solutions at lambda, one per branch of the curve.
inline std::vector<SolutionProfile> solve_domain(const ReducedProblem& pb, double lambda, const DomainSpec& domain,
                                                 const SolverOptions& opt = {},
                                                 const TimeMapCurve* curve = nullptr) {
    domain.validate();
    std::optional<TimeMapCurve> own;
    if (!curve) {
        own = build_time_map(pb, domain, opt);
        curve = &*own;
    }
    const auto branches = find_branches(pb, *curve, lambda, opt);
    auto profiles = parallel_map(branches.size(), [&](std::size_t k) {
        SolutionProfile prof;
        if (domain.kind == DomainKind::interval) {
            prof = interval_profile(pb, branches[k].s, lambda, domain, opt);
        } else {
            auto rp = solve_radial(pb, domain.N, domain.size, branches[k].s, opt);
            if (rp) prof = *rp;
            prof.lambda = lambda;
        }
        prof.branch_id = static_cast<int>(k);
        prof.tangency = branches[k].tangency;
        return prof;
    });
    return profiles;
}

inline std::vector<SolutionProfile> solve_interval(const ReducedProblem& pb, double lambda, const DomainSpec& domain,
                                                   const SolverOptions& opt = {},
                                                   const TimeMapCurve* curve = nullptr) {
    if (domain.kind != DomainKind::interval) throw DomainError("solve_interval needs an interval");
    return solve_domain(pb, lambda, domain, opt, curve);
}

/// Largest-level branch at lambda.
inline std::optional<SolutionProfile> maximal_solution(const ReducedProblem& pb, double lambda,
                                                       const DomainSpec& domain, const SolverOptions& opt = {},
                                                       const TimeMapCurve* curve = nullptr) {
    domain.validate();
    std::optional<TimeMapCurve> own;
    if (!curve) {
        own = build_time_map(pb, domain, opt);
        curve = &*own;
    }
    const auto branches = find_branches(pb, *curve, lambda, opt);
    if (branches.empty()) return std::nullopt;
    const Branch& top = branches.back();
    SolutionProfile prof;
    if (domain.kind == DomainKind::interval) {
        prof = interval_profile(pb, top.s, lambda, domain, opt);
    } else {
        auto rp = solve_radial(pb, domain.N, domain.size, top.s, opt);
        if (!rp) return std::nullopt;
        prof = *rp;
        prof.lambda = lambda;
    }
    prof.branch_id = static_cast<int>(branches.size() - 1);
    prof.tangency = top.tangency;
    return prof;
}

// ---------------------------------------------------------------------------
// lambda_min and lambda_bar_min

struct LambdaMin {
    double value = std::numeric_limits<double>::quiet_NaN();
    double s_at = std::numeric_limits<double>::quiet_NaN();
};

/// Minimum of lambda(s) over admissible s in [alpha, beta).
inline LambdaMin lambda_min(const ReducedProblem& pb, const TimeMapCurve& c, const SolverOptions& opt = {}) {
    std::size_t best = c.s_grid.size();
    for (std::size_t i = 0; i < c.s_grid.size(); ++i) {
        if (!c.admissible[i] || c.s_grid[i] < pb.alpha()) continue;
        if (best == c.s_grid.size() || c.lambda_values[i] < c.lambda_values[best]) best = i;
    }
    if (best == c.s_grid.size())
        throw DomainError("no admissible level in [alpha, beta): the area condition fails");
    LambdaMin out{c.lambda_values[best], c.s_grid[best]};
    const bool left_ok = best > 0 && c.admissible[best - 1] && c.s_grid[best - 1] >= pb.alpha();
    const bool right_ok = best + 1 < c.s_grid.size() && c.admissible[best + 1];
    if (left_ok || right_ok) {
        const double a = left_ok ? c.s_grid[best - 1] : c.s_grid[best];
        const double b = right_ok ? c.s_grid[best + 1] : c.s_grid[best];
        const auto [s, l] = detail::refine_extremum(pb, c, a, b, 1, opt);
        if (l < out.value) out = {l, s};
    }
    return out;
}

inline LambdaMin lambda_min_of_L(const ReducedProblem& pb, const DomainSpec& domain, const SolverOptions& opt = {}) {
    return lambda_min(pb, build_time_map(pb, domain, opt), opt);
}

struct LambdaBarMin {
    double value = std::numeric_limits<double>::quiet_NaN(); // +inf when no tail (lambda_bar, inf) is attained
    bool top_unbounded = false; // lambda(s) -> infinity as s -> beta
    bool flat_core_tail = false; // tail supplied by solutions touching beta
    std::vector<std::pair<double, double>> attained; // merged intervals
};

/// inf{lb : (lb, inf) attained by some admissible level in [alpha, beta)}.
/// `flat_core` tells whether solutions touching beta exist (flat-core bound
/// fails); then every lambda above the curve's limit at beta is attained.
inline LambdaBarMin lambda_bar_min(const ReducedProblem& pb, const TimeMapCurve& c,
                                   std::optional<Verdict> flat_core_bounded = std::nullopt,
                                   const SolverOptions& opt = {}) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::pair<double, double>> iv;
    bool top_run = false;
    double top_value = 0.0;
    // levels past the last admissible one (NaN from precision loss at beta) do not
    // cut the top run off
    std::size_t last = c.s_grid.size();
    for (std::size_t i = c.s_grid.size(); i-- > 0;)
        if (c.admissible[i]) {
            last = i;
            break;
        }
    for (auto [i0, i1] : detail::admissible_runs(c)) {
        std::size_t j0 = i0;
        while (j0 <= i1 && c.s_grid[j0] < pb.alpha()) ++j0;
        if (j0 > i1) continue;
        double lo = inf, hi = -inf;
        for (std::size_t i = j0; i <= i1; ++i) {
            lo = std::min(lo, c.lambda_values[i]);
            hi = std::max(hi, c.lambda_values[i]);
        }
        // refine interior grid extrema
        for (std::size_t i = j0 + 1; i < i1; ++i) {
            const double lp = c.lambda_values[i - 1], l = c.lambda_values[i], ln = c.lambda_values[i + 1];
            if (l <= lp && l <= ln) lo = std::min(lo, detail::refine_extremum(pb, c, c.s_grid[i - 1], c.s_grid[i + 1], 1, opt).second);
            if (l >= lp && l >= ln) hi = std::max(hi, detail::refine_extremum(pb, c, c.s_grid[i - 1], c.s_grid[i + 1], -1, opt).second);
        }
        if (i1 == last && pb.beta() - c.s_grid[i1] < 1e-3 * (pb.beta() - pb.alpha())) {
            top_run = true;
            top_value = c.lambda_values[i1];
            // increasing over the last decade of levels toward beta
            std::size_t k = i1;
            const double gap = pb.beta() - c.s_grid[i1];
            while (k > j0 && pb.beta() - c.s_grid[k - 1] < 10.0 * gap) --k;
            bool increasing = k < i1;
            for (std::size_t i = k + 1; i <= i1; ++i) increasing = increasing && c.lambda_values[i] > c.lambda_values[i - 1];
            const bool unbounded = flat_core_bounded ? (*flat_core_bounded != Verdict::fails) && increasing : increasing;
            if (unbounded) hi = inf;
        }
        iv.emplace_back(lo, hi);
    }
    LambdaBarMin out;
    if (top_run && !iv.empty() && iv.back().second == inf) out.top_unbounded = true;
    if (flat_core_bounded && *flat_core_bounded == Verdict::fails && top_run && !out.top_unbounded) {
        iv.emplace_back(top_value, inf);
        out.flat_core_tail = true;
    }
    std::sort(iv.begin(), iv.end());
    for (const auto& x : iv) {
        if (!out.attained.empty() && x.first <= out.attained.back().second)
            out.attained.back().second = std::max(out.attained.back().second, x.second);
        else out.attained.push_back(x);
    }
    if (out.attained.empty()) throw DomainError("no admissible level in [alpha, beta): the area condition fails");
    out.value = out.attained.back().second == inf ? out.attained.back().first : inf;
    return out;
}

/// Energy admissibility at the top level: W(beta) > W(s) for every s < beta,
/// sampled on a fine grid.
inline bool admissible_at_top(const ReducedProblem& pb, int samples = 4096) {
    const double top = pb.W(pb.beta());
    for (int i = 0; i < samples; ++i) {
        const double s = pb.beta() * i / samples;
        if (!(pb.tail(s, pb.beta()) > 0.0)) return false;
    }
    return top > 0.0;
}

// ---------------------------------------------------------------------------
// sweeps

struct ProblemConfig {
    FunctionSpec f = presets::f_pos();
    FunctionSpec g = presets::g_one();
    std::optional<FunctionSpec> a;
    double p = 2.0;
    double L = -1.0;
    double lambda = 50.0;
    DomainSpec domain = DomainSpec::interval(1.0);

    ReducedProblem reduced(const TransformOptions& topt = {}) const { return make_reduced(f, g, a, p, L, topt); }
    AreaProblem area(const AreaOptions& aopt = {}) const { return AreaProblem(f, g, a, p, aopt); }
};

struct SweepRecord {
    std::string parameter;
    double value = 0.0;
    double lambda = 0.0;
    double lambda_min = std::numeric_limits<double>::quiet_NaN();
    double lambda_bar_min = std::numeric_limits<double>::quiet_NaN();
    double maximal_norm = std::numeric_limits<double>::quiet_NaN();
    int branch_count = 0;
    double area_margin = std::numeric_limits<double>::quiet_NaN();
    std::string area_verdict;
    std::string error;

    nlohmann::json to_json() const {
        auto num = [](double x) { return std::isnan(x) ? nlohmann::json() : nlohmann::json(x); };
        return {{"parameter", parameter},          {"value", value},
                {"lambda", lambda},                {"lambda_min", num(lambda_min)},
                {"lambda_bar_min", std::isinf(lambda_bar_min) ? nlohmann::json("inf") : num(lambda_bar_min)},
                {"maximal_norm", num(maximal_norm)}, {"branch_count", branch_count},
                {"area_margin", num(area_margin)}, {"area_verdict", area_verdict},
                {"error", error}};
    }

    static void write_csv_header(std::ostream& os) {
        os << "parameter,value,lambda,lambda_min,lambda_bar_min,maximal_norm,branch_count,area_margin,area_verdict,"
              "error\n";
    }

    void write_csv(std::ostream& os) const {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%.17g,%s,", parameter.c_str(), value,
                      lambda, lambda_min, lambda_bar_min, maximal_norm, branch_count, area_margin,
                      area_verdict.c_str());
        std::string err = error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        os << buf << err << '\n';
    }
};

enum class SweepParameter { L, p, lambda };

inline SweepParameter parse_sweep_parameter(const std::string& name) {
    if (name == "L") return SweepParameter::L;
    if (name == "p") return SweepParameter::p;
    if (name == "lambda") return SweepParameter::lambda;
    throw DomainError("sweep parameter must be L, p or lambda");
}

inline const char* to_string(SweepParameter v) {
    switch (v) {
    case SweepParameter::L: return "L";
    case SweepParameter::p: return "p";
    case SweepParameter::lambda: return "lambda";
    }
    return "?";
}

/// One record per grid value; failures are stored in the record.
inline SweepRecord sweep_point(const ProblemConfig& base, SweepParameter vary, double value,
                               const SolverOptions& opt = {}) {
    ProblemConfig cfg = base;
    if (vary == SweepParameter::L) cfg.L = value;
    if (vary == SweepParameter::p) cfg.p = value;
    if (vary == SweepParameter::lambda) cfg.lambda = value;
    SweepRecord rec;
    rec.parameter = to_string(vary);
    rec.value = value;
    rec.lambda = cfg.lambda;
    std::vector<std::string> errors;
    try {
        const AreaProblem area = cfg.area();
        const AreaVerdict v = check_area_condition(area, cfg.L);
        rec.area_verdict = to_string(v.verdict);
        rec.area_margin = v.margin_scaled().value();
    } catch (const std::exception& e) {
        errors.push_back(std::string("area: ") + e.what());
    }
    try {
        const ReducedProblem pb = cfg.reduced();
        const TimeMapCurve curve = build_time_map(pb, cfg.domain, opt);
        try {
            rec.lambda_min = lambda_min(pb, curve, opt).value;
            const auto fc = check_flatcore_criterion(cfg.f, cfg.p, cfg.f.beta(), 0.1 * (cfg.f.beta() - cfg.f.alpha()));
            rec.lambda_bar_min = lambda_bar_min(pb, curve, fc.verdict, opt).value;
        } catch (const DomainError& e) {
            errors.push_back(e.what());
        }
        const auto branches = find_branches(pb, curve, cfg.lambda, opt);
        rec.branch_count = static_cast<int>(branches.size());
        if (!branches.empty()) rec.maximal_norm = branches.back().s;
    } catch (const std::exception& e) {
        errors.push_back(e.what());
    }
    for (std::size_t i = 0; i < errors.size(); ++i) rec.error += (i ? "; " : "") + errors[i];
    return rec;
}

inline std::vector<SweepRecord> sweep(const ProblemConfig& base, SweepParameter vary, const std::vector<double>& grid,
                                      const SolverOptions& opt = {}) {
    return parallel_map(grid.size(), [&](std::size_t i) { return sweep_point(base, vary, grid[i], opt); });
}

struct SweepTrend {
    bool norm_monotone = true;       // maximal norm moves toward beta along the grid once solutions exist
    bool margin_turns_negative = false;
    double p_tilde = std::numeric_limits<double>::quiet_NaN(); // first grid value with negative margin
};

/// Trend checks along the grid order.
inline SweepTrend sweep_trend(const std::vector<SweepRecord>& recs) {
    SweepTrend t;
    double prev = std::numeric_limits<double>::quiet_NaN();
    for (const auto& r : recs) {
        if (std::isfinite(r.maximal_norm)) {
            if (std::isfinite(prev) && r.maximal_norm < prev - 1e-9) t.norm_monotone = false;
            prev = r.maximal_norm;
        }
        if (!t.margin_turns_negative && std::isfinite(r.area_margin) && r.area_margin < 0.0) {
            t.margin_turns_negative = true;
            t.p_tilde = r.value;
        }
    }
    return t;
}

} // namespace natgrow
