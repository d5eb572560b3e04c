#include <natgrow/asymptotics.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace natgrow;

namespace {

AreaProblem sign_problem(double p = 2.0, FunctionSpec g = presets::g_one()) {
    return AreaProblem(presets::f_sign(), std::move(g), std::nullopt, p);
}

// composite Simpson, n even
template <class F>
double simpson(F f, double a, double b, int n = 200000) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
    return s * h / 3.0;
}

double fsign(double s) { return s * (s - 1) * (2 - s); }

// H(s; gamma2, L) exp(-2 L gamma2 ... ) for g = 1, p = 2, scaled by exp(2 L gamma2)
double H_scaled(double s, double gamma2, double L) {
    return simpson([&](double x) { return fsign(x) * std::exp(-2.0 * L * (x - gamma2)); }, s, gamma2);
}

} // namespace

TEST(TaylorRatio, ClosedFormUnitWeight) {
    const auto g = presets::g_one();
    for (int k = 0; k <= 30; ++k) {
        const double L = -1.0 - 99.0 * k / 30;
        EXPECT_NEAR(taylor_ratio(g, 0.0, 1.0, L), -std::expm1(L), 1e-10) << L;
        EXPECT_NEAR(taylor_ratio(g, 0.5, 1.5, L), -std::expm1(L), 1e-10) << L;
    }
    EXPECT_NEAR(taylor_ratio(g, 0.0, 1.0, -20.0), 1.0 - 2.0611536224385579e-9, 1e-14);
    EXPECT_NEAR(taylor_ratio(g, 0.0, 1.0, -100.0), 1.0, 1e-12);
}

TEST(TaylorRatio, LinearWeightApproachesOne) {
    const auto g = presets::g_lin();
    // G(eta) = eta + eta^2/2
    auto oracle = [](double L) {
        const double G2 = 4.0;
        const double I =
            simpson([&](double x) { return std::exp(-L * (x + 0.5 * x * x - G2)); }, 1.0, 2.0, 400000);
        return -L * 3.0 * I;
    };
    const double r50 = taylor_ratio(g, 1.0, 2.0, -50.0);
    const double r200 = taylor_ratio(g, 1.0, 2.0, -200.0);
    EXPECT_NEAR(r50, oracle(-50.0), 1e-9);
    EXPECT_NEAR(r200, oracle(-200.0), 1e-9);
    EXPECT_LT(std::abs(r50 - 1.0), 0.05);
    EXPECT_LT(std::abs(r200 - 1.0), std::abs(r50 - 1.0));
}

TEST(TaylorRatio, Rejections) {
    EXPECT_THROW(taylor_ratio(presets::g_one(), 0.0, 1.0, 1.0), DomainError);
    EXPECT_THROW(taylor_ratio(presets::g_one(), 1.0, 1.0, -1.0), DomainError);
    EXPECT_THROW(taylor_ratio(presets::g_zero(), 0.0, 1.0, -1.0), DomainError);
}

TEST(Hratio, SignExampleDecreasesToOne) {
    const auto pb = sign_problem();
    const std::vector<double> Ls{-5, -10, -20, -40};
    const auto d = hratio_diagnostic(pb, 1.0, 2.0, Ls);
    ASSERT_EQ(d.ratio_values.size(), 4u);
    // the gap decays like exp(2L), so later entries round to exactly 1
    EXPECT_LT(d.ratio_values[1], d.ratio_values[0]);
    for (std::size_t k = 1; k < 4; ++k) EXPECT_LE(d.ratio_values[k], d.ratio_values[k - 1]);
    for (std::size_t k = 0; k < 4; ++k) {
        // H increases on [0, 1] here, so max at 1 and min at 0
        const double oracle = H_scaled(1.0, 2.0, Ls[k]) / H_scaled(0.0, 2.0, Ls[k]);
        EXPECT_NEAR(d.ratio_values[k], oracle, 1e-9 * oracle);
    }
    EXPECT_LT(std::abs(d.ratio_values.back() - 1.0), std::abs(d.ratio_values.front() - 1.0));
    EXPECT_LE(d.last_gap, 0.02);
    EXPECT_TRUE(d.converged);
    EXPECT_EQ(d.claimed_limit, 1.0);
}

TEST(Hratio, ConstantWhenFVanishesBelowGamma1) {
    AreaProblem pb(presets::f_pos(), presets::g_one(), std::nullopt, 2.0);
    const auto d = hratio_diagnostic(pb, 1.0, 2.0, {-3, -6, -12});
    for (double r : d.ratio_values) EXPECT_EQ(r, 1.0);
    EXPECT_TRUE(d.converged);
}

TEST(Hratio, ReportsNonPositiveMinimum) {
    const auto pb = sign_problem();
    try {
        hratio_diagnostic(pb, 1.0, 1.5, {-0.01, -20});
        FAIL();
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("index 0"), std::string::npos) << e.what();
    }
    EXPECT_THROW(hratio_diagnostic(pb, 1.0, 2.0, {-5, -5}), DomainError);
    EXPECT_THROW(hratio_diagnostic(pb, 1.0, 2.0, {1, -5}), DomainError);
}

TEST(Growth, SignExampleStabilizes) {
    const auto pb = sign_problem();
    const double limit = 0.5 * fsign(1.9);
    EXPECT_NEAR(growth_limit(pb, 1.9), limit, 1e-15);
    for (double L : {-10.0, -20.0, -40.0}) {
        const double c = growth_lower_bound(pb, 1.0, 1.9, L);
        // minimum at s = 0 for these L
        const double oracle = H_scaled(0.0, 1.9, L) * (-L);
        EXPECT_NEAR(c, oracle, 1e-9 * oracle) << L;
        EXPECT_GT(c, 0.1 * limit);
    }
    const double c80 = growth_lower_bound(pb, 1.0, 1.9, -80.0);
    EXPECT_NEAR(c80, limit, 0.3 * limit);
    EXPECT_GE(c80, growth_limit_lower(pb, 1.05, 1.9));

    const auto d = growth_diagnostic(pb, 1.0, 1.9, default_L_sequence());
    EXPECT_TRUE(d.converged) << d.to_json().dump();
    EXPECT_THROW(growth_lower_bound(pb, 1.0, 2.0, -10.0), DomainError);
}

TEST(Growth, PositiveForNonnegativeF) {
    AreaProblem pb(presets::f_pos(), presets::g_lin(), std::nullopt, 2.0);
    for (double L : {-0.5, -2.0, -8.0, -30.0}) EXPECT_GT(growth_lower_bound(pb, 1.0, 1.8, L), 0.0);
}

TEST(Growth, EpsilonGridAtBeta) {
    const auto pb = sign_problem();
    const std::vector<double> eps{0.1, 0.05, 0.01};
    const std::vector<double> Ls{-10, -20, -40};
    const auto rows = growth_constants_at_beta(pb, 1.0, Ls, eps);
    ASSERT_EQ(rows.size(), 3u);
    for (std::size_t i = 0; i < eps.size(); ++i) {
        for (std::size_t k = 0; k < Ls.size(); ++k) {
            // h_min over [gamma1, beta] dominates h_min over [gamma1, beta - eps]
            const double c = growth_lower_bound(pb, 1.0, 2.0 - eps[i], Ls[k]);
            EXPECT_GE(rows[i][k], c * (1 - 1e-12));
            EXPECT_GT(rows[i][k], 0.0);
        }
    }
}

TEST(PsiPower, DecaysAtPredictedRate) {
    const std::vector<double> Ls{-5, -10, -20, -40, -80};
    const auto pb = sign_problem();
    for (double L : Ls) EXPECT_NEAR(log_psi(pb, 1.9, L), std::log(std::expm1(-1.9 * L) / -L), 1e-11);
    const auto d = psi_power_ratio(pb, 1.0, 1.9, Ls);
    for (std::size_t k = 1; k < Ls.size(); ++k) EXPECT_LT(d.ratio_values[k], d.ratio_values[k - 1]);
    EXPECT_LT(d.ratio_values.back(), 0.1 * d.ratio_values.front());
    EXPECT_NEAR(d.fitted_exponent, 1.0, 0.2);
    EXPECT_TRUE(d.converged) << d.message;

    const auto d3 = psi_power_ratio(sign_problem(3.0), 1.0, 1.9, Ls);
    EXPECT_NEAR(d3.fitted_exponent, 2.0, 0.3);
    EXPECT_TRUE(d3.converged) << d3.message;
}

TEST(Asymptotics, FiniteFarOut) {
    const auto pb = sign_problem();
    const std::vector<double> Ls{-2500, -5000, -10000};
    EXPECT_TRUE(std::isfinite(taylor_ratio(presets::g_one(), 1.0, 2.0, -1e4)));
    const auto h = hratio_diagnostic(pb, 1.0, 2.0, Ls);
    const auto c = growth_diagnostic(pb, 1.0, 1.9, Ls);
    const auto q = psi_power_ratio(pb, 1.0, 1.9, Ls);
    for (const auto* d : {&h, &c, &q})
        for (double r : d->ratio_values) EXPECT_TRUE(std::isfinite(r)) << d->name;
    EXPECT_NEAR(c.ratio_values.back(), growth_limit(pb, 1.9), 0.01 * growth_limit(pb, 1.9));
}

TEST(Asymptotics, ReparameterizationInvariance) {
    const double c = 3.0;
    const auto pb1 = sign_problem();
    const auto pbc = sign_problem(2.0, FunctionSpec::parse("3", FunctionKind::weight, 0.0, 2.0));
    const std::vector<double> Ls{-6, -12, -24};
    std::vector<double> Lc;
    for (double L : Ls) Lc.push_back(L / c);
    const auto h1 = hratio_diagnostic(pb1, 1.0, 2.0, Ls), hc = hratio_diagnostic(pbc, 1.0, 2.0, Lc);
    const auto q1 = psi_power_ratio(pb1, 1.0, 1.9, Ls), qc = psi_power_ratio(pbc, 1.0, 1.9, Lc);
    for (std::size_t k = 0; k < Ls.size(); ++k) {
        EXPECT_NEAR(hc.ratio_values[k], h1.ratio_values[k], 1e-9 * h1.ratio_values[k]);
        EXPECT_NEAR(qc.ratio_values[k], q1.ratio_values[k], 1e-9 * q1.ratio_values[k]);
        EXPECT_NEAR(taylor_ratio(pbc.g(), 1.0, 2.0, Lc[k]), taylor_ratio(pb1.g(), 1.0, 2.0, Ls[k]), 1e-12);
    }
}

TEST(LimitDiagnostic, Export) {
    const auto d = hratio_diagnostic(sign_problem(), 1.0, 2.0, {-5, -10});
    std::ostringstream os;
    d.write_csv(os);
    EXPECT_EQ(os.str().rfind("L,ratio\n-5,", 0), 0u);
    const auto j = d.to_json();
    EXPECT_EQ(j["ratio_values"].size(), 2u);
    EXPECT_TRUE(j["fitted_exponent"].is_null());
}
