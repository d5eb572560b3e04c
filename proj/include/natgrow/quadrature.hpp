#pragma once

// Globally adaptive Gauss-Kronrod (7/15) integration on finite intervals.

#include <natgrow/error.hpp>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>
#include <vector>

namespace natgrow {

struct QuadOptions {
    double abs_tol = 1e-12;
    double rel_tol = 1e-12; // relative to the L1 norm of the integrand
    int max_panels = 4000;
    bool strict = true; // throw when the budget runs out; otherwise return the estimate reached
};

struct Panel {
    double a = 0.0;
    double b = 0.0;
    double value = 0.0;
    double error = 0.0;
    double l1 = 0.0;
    bool at_floor = false; // error estimate is pure round-off
};

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
    double l1 = 0.0;
    int evaluations = 0;
    std::vector<Panel> panels; // sorted by left endpoint when requested
};

namespace detail {

inline void check_sample(double y, double x) {
    if (!std::isfinite(y)) {
        std::ostringstream os;
        os.precision(17);
        os << "non-finite integrand sample at x = " << x;
        throw QuadratureError(os.str());
    }
}

} // namespace detail

/// One 15-point Kronrod panel with the embedded 7-point Gauss estimate.
template <class F>
Panel gk15(F&& f, double a, double b) {
    using kronrod = boost::math::quadrature::gauss_kronrod<double, 15>;
    using gauss = boost::math::quadrature::gauss<double, 7>;
    static const auto& xk = kronrod::abscissa();
    static const auto& wk = kronrod::weights();
    static const auto& wg = gauss::weights();

    Panel p{a, b, 0.0, 0.0, 0.0, false};
    if (b == a) return p;
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);

    // xk[0] = 0; even indices are also Gauss-7 nodes (wg indexed by i/2).
    double y[2 * 8 - 1];
    const double fc = f(c);
    detail::check_sample(fc, c);
    y[0] = fc;
    double k = wk[0] * fc;
    double g = wg[0] * fc;
    double l1 = wk[0] * std::abs(fc);
    for (std::size_t i = 1; i < xk.size(); ++i) {
        const double x1 = c - h * xk[i];
        const double x2 = c + h * xk[i];
        const double y1 = f(x1);
        const double y2 = f(x2);
        detail::check_sample(y1, x1);
        detail::check_sample(y2, x2);
        y[2 * i - 1] = y1;
        y[2 * i] = y2;
        k += wk[i] * (y1 + y2);
        l1 += wk[i] * (std::abs(y1) + std::abs(y2));
        if (i % 2 == 0) g += wg[i / 2] * (y1 + y2);
    }
    // QUADPACK error scaling
    const double mean = 0.5 * k;
    double asc = wk[0] * std::abs(y[0] - mean);
    for (std::size_t i = 1; i < xk.size(); ++i) asc += wk[i] * (std::abs(y[2 * i - 1] - mean) + std::abs(y[2 * i] - mean));
    asc *= std::abs(h);
    double err = std::abs((k - g) * h);
    if (asc != 0.0 && err != 0.0) err = asc * std::min(1.0, std::pow(200.0 * err / asc, 1.5));
    l1 *= std::abs(h);
    constexpr double eps = std::numeric_limits<double>::epsilon();
    bool floor = false;
    if (l1 > std::numeric_limits<double>::min() / (50.0 * eps) && err <= 50.0 * eps * l1) {
        err = 50.0 * eps * l1;
        floor = true;
    }
    p.at_floor = floor;
    p.value = k * h;
    p.error = err;
    p.l1 = l1;
    return p;
}

/// Integrate f over [a, b]. Reversed limits flip the sign. Throws QuadratureError
/// on a non-finite sample or when the tolerance is not met within the panel budget.
template <class F>
QuadResult integrate(F&& f, double a, double b, const QuadOptions& opt = {}, bool keep_panels = false) {
    QuadResult res;
    if (a == b) return res;
    const bool flip = b < a;
    if (flip) std::swap(a, b);

    auto cmp = [](const Panel& x, const Panel& y) { return x.error < y.error; };
    std::priority_queue<Panel, std::vector<Panel>, decltype(cmp)> heap(cmp);
    std::vector<Panel> done; // panels too narrow to split further

    Panel first = gk15(f, a, b);
    res.evaluations = 15;
    double value = first.value;
    double error = first.error;
    double l1 = first.l1;
    heap.push(first);

    const double min_width = 64.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(a), std::abs(b));
    int panels = 1;
    double settled = 0.0; // error carried by panels that cannot be improved
    while (!heap.empty() && error - settled > std::max(opt.abs_tol, opt.rel_tol * l1)) {
        Panel worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (worst.at_floor || worst.b - worst.a <= min_width || mid <= worst.a || mid >= worst.b) {
            settled += worst.error;
            done.push_back(worst);
            continue;
        }
        if (panels >= opt.max_panels) {
            if (!opt.strict) {
                heap.push(worst);
                break;
            }
            std::ostringstream os;
            os.precision(6);
            os << "quadrature tolerance not reached on [" << a << ", " << b << "] within " << opt.max_panels
               << " panels (error estimate " << error << ")";
            throw QuadratureError(os.str());
        }
        Panel left = gk15(f, worst.a, mid);
        Panel right = gk15(f, mid, worst.b);
        res.evaluations += 30;
        ++panels;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        l1 += left.l1 + right.l1 - worst.l1;
        heap.push(left);
        heap.push(right);
    }

    // Recompute the sums from the final panels to shed the running round-off.
    std::vector<Panel> all = std::move(done);
    while (!heap.empty()) {
        all.push_back(heap.top());
        heap.pop();
    }
    std::sort(all.begin(), all.end(), [](const Panel& x, const Panel& y) { return x.a < y.a; });
    value = error = l1 = 0.0;
    for (const Panel& p : all) {
        value += p.value;
        error += p.error;
        l1 += p.l1;
    }
    res.value = flip ? -value : value;
    res.error = error;
    res.l1 = l1;
    if (keep_panels) res.panels = std::move(all);
    return res;
}

/// integrate() split at the breakpoints that fall strictly inside (a, b). Kinks
/// sitting just outside the outermost Kronrod nodes of a panel are invisible to
/// the error estimate, so known non-smooth points should be passed here.
template <class F>
QuadResult integrate_split(F&& f, double a, double b, const std::vector<double>& breaks, const QuadOptions& opt = {}) {
    const bool flip = b < a;
    const double lo = flip ? b : a;
    const double hi = flip ? a : b;
    std::vector<double> cuts{lo};
    for (double x : breaks)
        if (x > lo && x < hi) cuts.push_back(x);
    std::sort(cuts.begin() + 1, cuts.end());
    cuts.push_back(hi);
    QuadResult total;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        QuadResult r = integrate(f, cuts[i], cuts[i + 1], opt);
        total.value += r.value;
        total.error += r.error;
        total.l1 += r.l1;
        total.evaluations += r.evaluations;
    }
    if (flip) total.value = -total.value;
    return total;
}

/// Convenience wrapper returning only the value.
template <class F>
double quad(F&& f, double a, double b, double abs_tol = 1e-12, double rel_tol = 1e-12) {
    return integrate(f, a, b, QuadOptions{abs_tol, rel_tol, 4000}).value;
}

/// A value stored as mantissa * exp(log_scale); used where exponential weights
/// would leave the double range.
struct ScaledValue {
    double mantissa = 0.0;
    double log_scale = 0.0;

    double value() const { return mantissa == 0.0 ? 0.0 : mantissa * std::exp(log_scale); }
    int sign() const { return (mantissa > 0.0) - (mantissa < 0.0); }
    /// log|x|; -inf for zero.
    double log_abs() const { return std::log(std::abs(mantissa)) + log_scale; }

    /// This value expressed relative to another scale.
    double at_scale(double scale) const {
        return mantissa == 0.0 ? 0.0 : mantissa * std::exp(log_scale - scale);
    }
};

/// Ratio x / y computed without forming either value.
inline double ratio(const ScaledValue& x, const ScaledValue& y) {
    return x.mantissa / y.mantissa * std::exp(x.log_scale - y.log_scale);
}

} // namespace natgrow
