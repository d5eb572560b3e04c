#include <natgrow/area.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace natgrow;

namespace {

AreaProblem problem(const FunctionSpec& f, const FunctionSpec& g = presets::g_one(), double p = 2.0) {
    return AreaProblem(f, g, std::nullopt, p);
}

// int_s^2 s(s-1)(2-s) ds = s^2 (s/2 - 1)^2
double sign_tail(double s) { return s * s * (s / 2 - 1) * (s / 2 - 1); }

} // namespace

TEST(AreaIntegrand, DirectArithmetic) {
    auto pb0 = problem(presets::f_sign());
    EXPECT_NEAR(area_integrand(pb0, 0.0, 1.5), 0.375, 1e-15);
    EXPECT_NEAR(area_integrand(pb0, -1.0, 1.5), 0.375 * std::exp(3.0), 1e-12);
    for (double L : {-5.0, 0.0, 3.0}) EXPECT_EQ(area_integrand(pb0, L, 1.0), 0.0);
}

TEST(AreaIntegrand, OverflowNamesEta) {
    auto pb = problem(presets::f_sign());
    try {
        area_integrand(pb, -400.0, 1.5);
        FAIL();
    } catch (const OverflowError& e) {
        EXPECT_EQ(e.at(), 1.5);
    }
    // the scaled path still works
    ScaledValue h = compute_H_scaled(pb, 1.0, 2.0, -400.0);
    EXPECT_GT(h.mantissa, 0.0);
    EXPECT_GT(h.log_scale, 600.0);
}

TEST(ComputeH, SymbolicOracle) {
    auto pb = problem(presets::f_sign());
    EXPECT_NEAR(compute_H(pb, 1.0, 2.0, 0.0), 0.25, 1e-13);
    EXPECT_NEAR(compute_H(pb, 0.0, 2.0, 0.0), 0.0, 1e-13);
    EXPECT_EQ(compute_H(pb, 1.7, 1.7, -3.0), 0.0);
    for (int i = 0; i <= 20; ++i) {
        const double s = 0.1 * i;
        EXPECT_NEAR(compute_H(pb, s, 2.0, 0.0), sign_tail(s), 1e-13);
    }
}

TEST(ComputeH, DerivativeMatchesIntegrand) {
    auto pb = problem(presets::f_sign(), presets::g_lin());
    for (int i = 1; i <= 20; ++i) {
        const double s = 0.095 * i;
        if (std::abs(s - 1.0) < 0.02) continue;
        const double h = 1e-4;
        const double fd = (compute_H(pb, s + h, 2.0, -1.3) - compute_H(pb, s - h, 2.0, -1.3)) / (2 * h);
        const double w = area_integrand(pb, -1.3, s);
        EXPECT_NEAR(-fd, w, 1e-6 * std::max(1.0, std::abs(w))) << s;
    }
}

TEST(Extremize, NonnegativeFMinimumAtGamma1) {
    auto pb = problem(presets::f_pos());
    for (double L : {-3.0, 0.0, 2.0}) {
        AreaProfile pr = extremize_H(pb, 1.0, 2.0, L);
        EXPECT_EQ(pr.s_argmin, 1.0);
        EXPECT_NEAR(pr.h_min, compute_H(pb, 1.0, 2.0, L), 1e-12 * pr.l1);
        EXPECT_GT(pr.h_min, 0.0);
        EXPECT_LE(pr.h_min, pr.h_max);
        for (double h : pr.H_values) {
            EXPECT_GE(h, pr.h_min);
            EXPECT_LE(h, pr.h_max);
        }
    }
}

TEST(Extremize, SignChangingAtZeroL) {
    auto pb = problem(presets::f_sign());
    AreaProfile pr = extremize_H(pb, 1.0, 2.0, 0.0);
    EXPECT_NEAR(pr.h_min, 0.0, 1e-13);
    EXPECT_EQ(pr.s_argmin, 0.0);
    // maximum over [0, 1] sits at the zero of f, s = 1
    EXPECT_NEAR(pr.s_argmax, 1.0, 1e-12);
    EXPECT_NEAR(pr.h_max, 0.25, 1e-13);
}

TEST(Extremize, InteriorZeroIsPolished) {
    // f has a zero at s = 0.3 inside [0, gamma1]
    FunctionSpec f = FunctionSpec::nonlinearity("(s - 0.3) * (s - 1) * (2 - s)", 1.0, 2.0);
    auto pb = problem(f);
    AreaProfile pr = extremize_H(pb, 1.0, 2.0, 0.0, 64);
    EXPECT_NEAR(pr.s_argmin, 0.3, 1e-12);
    // oracle: antiderivative of (s-0.3)(s-1)(2-s) = -s^4/4 + 3.3 s^3/3 - 2.9 s^2/2 + 0.6 s
    auto F = [](double s) { return -std::pow(s, 4) / 4 + 3.3 * std::pow(s, 3) / 3 - 2.9 * s * s / 2 + 0.6 * s; };
    EXPECT_NEAR(pr.h_min, F(2.0) - F(0.3), 1e-13);
}

TEST(Extremize, RefinementStable) {
    auto pb = problem(presets::f_sign(), presets::g_lin());
    AreaProfile a = extremize_H(pb, 1.0, 2.0, -0.7, 64);
    AreaProfile b = extremize_H(pb, 1.0, 2.0, -0.7, 128);
    EXPECT_NEAR(a.h_min, b.h_min, 1e-11 * a.l1);
    EXPECT_THROW(extremize_H(pb, 1.0, 2.0, -0.7, 32), DomainError);
}

TEST(AreaCondition, Examples) {
    auto pos = problem(presets::f_pos());
    for (double L : {-4.0, -1.0, 0.0, 1.0, 4.0}) {
        AreaVerdict v = check_area_condition(pos, L);
        EXPECT_EQ(v.verdict, Verdict::holds) << L;
        EXPECT_GT(v.margin, 0.0);
    }
    auto sign = problem(presets::f_sign());
    EXPECT_EQ(check_area_condition(sign, 0.5).verdict, Verdict::fails);
    EXPECT_LT(check_area_condition(sign, 0.5).margin, 0.0);
    EXPECT_EQ(check_area_condition(sign, -0.5).verdict, Verdict::holds);
    EXPECT_EQ(check_area_condition(sign, 0.0).verdict, Verdict::indeterminate);
}

TEST(AreaCondition, BruteForceSignOracle) {
    // dense direct evaluation of min_s H(s) with closed-form integrals for g = 1, p = 2:
    // int_s^2 x(x-1)(2-x) e^{-2Lx} dx, by an independent composite Simpson rule
    auto sign = problem(presets::f_sign());
    auto H = [](double s, double L) {
        const int n = 4000;
        const double h = (2.0 - s) / n;
        double acc = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double x = s + h * i;
            const double y = x * (x - 1) * (2 - x) * std::exp(-2 * L * x);
            acc += y * (i == 0 || i == n ? 1 : (i % 2 ? 4 : 2));
        }
        return acc * h / 3;
    };
    for (double L : {-2.0, -0.3, 0.2, 1.5}) {
        double m = 1e300;
        for (int i = 0; i <= 200; ++i) m = std::min(m, H(0.005 * i, L));
        const Verdict v = check_area_condition(sign, L).verdict;
        EXPECT_EQ(v == Verdict::holds, m > 0) << L;
    }
}

TEST(AreaCondition, ReducesToClassicalWithoutWeight) {
    for (const char* text : {"s*(s-1)*(2-s)", "(s-1)*(2-s)*(s-0.2)", "(s-1)*(2-s)*(s-0.8)"}) {
        FunctionSpec f = FunctionSpec::nonlinearity(text, 1.0, 2.0);
        auto pb = problem(f, presets::g_zero());
        double m = 1e300;
        for (int i = 0; i <= 400; ++i) {
            const double s = 0.0025 * i;
            m = std::min(m, quad([&](double x) { return f(x); }, s, 2.0, 1e-14, 0.0));
        }
        const AreaVerdict v = check_area_condition(pb, 5.0);
        if (std::abs(m) < 1e-10) {
            EXPECT_EQ(v.verdict, Verdict::indeterminate) << text;
        } else {
            EXPECT_EQ(v.holds(), m > 0) << text;
        }
    }
}

TEST(AreaCondition, ScalingByConstant) {
    auto pb1 = problem(presets::f_sign(), presets::g_lin());
    auto pb3 = problem(FunctionSpec::nonlinearity("3*s*(s-1)*(2-s)", 1.0, 2.0), presets::g_lin());
    for (double L : {-0.8, 0.4}) {
        AreaProfile a = extremize_H(pb1, 1.0, 2.0, L);
        AreaProfile b = extremize_H(pb3, 1.0, 2.0, L);
        EXPECT_NEAR(b.h_min, 3 * a.h_min, 1e-12 * std::abs(3 * a.h_min) + 1e-15);
        EXPECT_NEAR(b.h_max, 3 * a.h_max, 1e-12 * std::abs(3 * a.h_max));
        EXPECT_EQ(check_area_condition(pb1, L).verdict, check_area_condition(pb3, L).verdict);
    }
    EXPECT_NEAR(find_critical_L(pb1).value, find_critical_L(pb3).value, 1e-6);
}

TEST(CriticalL, PositiveFIsInfinite) {
    CriticalL c = find_critical_L(problem(presets::f_pos()));
    EXPECT_TRUE(c.infinite);
    EXPECT_TRUE(std::isinf(c.value));
}

TEST(CriticalL, SignChangingCubicAtZero) {
    CriticalL c = find_critical_L(problem(presets::f_sign()));
    EXPECT_FALSE(c.infinite);
    EXPECT_NEAR(c.value, 0.0, 1e-5);
    EXPECT_LE(c.L_hi - c.L_lo, 1e-6);
    EXPECT_GT(c.margin_lo, 0.0);
    EXPECT_LE(c.margin_hi, 0.0);
    // one-sided slope: dH(0, L)/dL at 0 = -2 * int_0^2 x f(x) dx = -2 * 4/15
    auto pb = problem(presets::f_sign());
    const double h = 1e-4;
    const double slope = (compute_H(pb, 0.0, 2.0, h) - compute_H(pb, 0.0, 2.0, -h)) / (2 * h);
    EXPECT_NEAR(slope, -2.0 * 4.0 / 15.0, 1e-7);
}

TEST(CriticalL, SingleSignChangeOnGrid) {
    auto pb = problem(presets::f_sign(), presets::g_lin(), 3.0);
    CriticalL c = find_critical_L(pb);
    int changes = 0, prev = 0;
    for (int i = 0; i < 40; ++i) {
        const double L = c.value - 2.0 + 4.0 * (i + 0.5) / 40;
        const int s = area_margin_sign(pb, L);
        if (i > 0 && s != prev) ++changes;
        prev = s;
        if (L < c.value - 1e-3) EXPECT_EQ(s, 1);
        if (L > c.value + 1e-3) EXPECT_EQ(s, -1);
    }
    EXPECT_EQ(changes, 1);
}

TEST(Flatcore, Examples) {
    FlatcoreResult a = check_flatcore_criterion(presets::f_sign(), 2.0, 2.0, 0.5);
    EXPECT_TRUE(a.bounded());
    EXPECT_NEAR(a.sup_ratio, 2.0, 0.05);
    FlatcoreResult b = check_flatcore_criterion(presets::f_sqrt(), 2.0, 2.0, 0.5);
    EXPECT_EQ(b.verdict, Verdict::fails);
    FunctionSpec flat = FunctionSpec::nonlinearity("piecewise(s < 1.5, (s-1)*(1.5-s), 0)", 1.0, 2.0);
    FlatcoreResult c = check_flatcore_criterion(flat, 2.0, 2.0, 0.4);
    EXPECT_TRUE(c.bounded());
    EXPECT_EQ(c.sup_ratio, 0.0);
    // Lipschitz f with p <= 2 is always bounded
    EXPECT_TRUE(check_flatcore_criterion(presets::f_pos(), 1.5, 2.0, 0.5).bounded());
    // logarithmic growth is neither settled nor clearly unbounded
    FunctionSpec logf = FunctionSpec::nonlinearity("piecewise(s > 1, (s-1)*(2-s)*(1 - log(2.0000001-s)), 0)", 1.0, 2.0);
    EXPECT_NE(check_flatcore_criterion(logf, 2.0, 2.0, 0.5).verdict, Verdict::holds);
}

TEST(Schrodinger, GeneralisedMatchesClassical) {
    const double kappa = 2.0, p = 2.0;
    for (auto f : {presets::f_sign(), presets::f_pos()}) {
        AreaProblem gen(f, presets::g_schrod(kappa, p), presets::a_schrod(kappa, p), p);
        for (int k = 0; k < 50; ++k) {
            const double s = 2.0 * (k + 1) / 51.0;
            const double classical = quad([&](double x) { return f(x); }, s, 2.0, 1e-14, 0.0);
            const double h = compute_H(gen, s, 2.0, 1.0);
            EXPECT_EQ(h > 0, classical > 0) << s;
            EXPECT_NEAR(h, classical, 1e-9 * std::max(1.0, std::abs(classical)));
        }
    }
}
