#include <natgrow/transform.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace natgrow;

namespace {

std::shared_ptr<const TransformTable> table_g1(double L, double p = 2.0) {
    return build_psi(presets::g_one(), std::nullopt, p, L, 2.0);
}

// f_sign weighted area integrand for g = 1, evaluated directly
double w_sign(double s, double L, double p) {
    return s * (s - 1) * (2 - s) * std::exp(-p / (p - 1) * L * s);
}

} // namespace

TEST(BuildPsi, IdentityWithoutWeight) {
    for (double p : {1.5, 2.0, 4.0}) {
        auto t = build_psi(presets::g_zero(), std::nullopt, p, -3.0, 2.0);
        EXPECT_NEAR(t->psi(1.5), 1.5, 1e-12);
        for (int i = 0; i <= 200; ++i) EXPECT_NEAR(t->psi(0.01 * i), 0.01 * i, 1e-12);
    }
    auto t0 = table_g1(0.0);
    EXPECT_NEAR(t0->psi(1.5), 1.5, 1e-12);
}

TEST(BuildPsi, ExponentialClosedForms) {
    auto tm = table_g1(-1.0);
    auto tp = table_g1(1.0);
    EXPECT_NEAR(tm->psi(1.0), std::exp(1.0) - 1.0, 1e-9);
    EXPECT_NEAR(tp->psi(2.0), 1.0 - std::exp(-2.0), 1e-9);
    double em = 0, ep = 0;
    for (int i = 0; i <= 2000; ++i) {
        const double s = 2.0 * i / 2000;
        em = std::max(em, std::abs(tm->psi(s) - std::expm1(s)));
        ep = std::max(ep, std::abs(tp->psi(s) + std::expm1(-s)));
    }
    EXPECT_LE(em, 1e-9);
    EXPECT_LE(ep, 1e-9);
}

TEST(BuildPsi, TableInvariants) {
    auto t = build_psi(presets::g_lin(), std::nullopt, 3.0, -4.0, 2.0);
    const auto& s = t->s_grid();
    const auto& psi = t->psi_values();
    const auto& d = t->dpsi_values();
    EXPECT_EQ(s.front(), 0.0);
    EXPECT_EQ(psi.front(), 0.0);
    for (std::size_t i = 1; i < s.size(); ++i) EXPECT_GT(psi[i], psi[i - 1]);
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double G = s[i] + 0.5 * s[i] * s[i];
        EXPECT_NEAR(d[i] / std::exp(4.0 * G / 2.0), 1.0, 1e-10);
        EXPECT_NEAR(t->psi_inverse(psi[i]), s[i], 10 * t->tol());
    }
    // finite-difference slope against tabulated derivative
    for (std::size_t i = 1; i + 1 < s.size(); i += 7) {
        const double h = 1e-5;
        const double fd = (t->psi(s[i] + h) - t->psi(s[i] - h)) / (2 * h);
        EXPECT_NEAR(fd, d[i], 100 * t->tol() * std::max(1.0, d[i]) + 1e-8 * d[i]);
    }
}

TEST(BuildPsi, OverflowReportsLocation) {
    try {
        build_psi(presets::g_one(), std::nullopt, 2.0, -1000.0, 2.0);
        FAIL();
    } catch (const OverflowError& e) {
        EXPECT_GT(e.at(), 0.6);
        EXPECT_LE(e.at(), 0.75);
    }
}

TEST(BuildPsi, RejectsBadParameters) {
    EXPECT_THROW(build_psi(presets::g_one(), std::nullopt, 1.0, -1.0, 2.0), DomainError);
    EXPECT_THROW(build_psi(presets::g_one(), std::nullopt, 2.0, -1.0, 0.0), DomainError);
}

TEST(PsiInverse, Values) {
    auto t = table_g1(-1.0);
    EXPECT_EQ(t->psi_inverse(0.0), 0.0);
    EXPECT_NEAR(t->psi_inverse(std::exp(1.0) - 1.0), 1.0, 1e-8);
    EXPECT_NEAR(t->psi_inverse(t->psi_beta()), 2.0, 1e-8);
    EXPECT_THROW(t->psi_inverse(-0.1), DomainError);
    EXPECT_THROW(t->psi_inverse(t->psi_beta() + 0.1), DomainError);
    double prev = -1;
    for (int i = 0; i <= 1000; ++i) {
        const double v = t->psi_beta() * i / 1000;
        const double s = t->psi_inverse(v);
        EXPECT_GE(s, prev);
        EXPECT_NEAR(t->psi(s), v, t->tol() * std::max(1.0, v));
        EXPECT_NEAR(s, std::log1p(v), 1e-9);
        prev = s;
    }
}

TEST(Ftilde, IdentityAtZeroL) {
    auto t = table_g1(0.0);
    TransformedNonlinearity ft(presets::f_sign(), t);
    for (int i = 0; i <= 100; ++i) {
        const double v = 0.02 * i;
        EXPECT_NEAR(ft.f_tilde(v), v * (v - 1) * (2 - v), 1e-12);
    }
}

TEST(Ftilde, ClosedFormComposition) {
    auto t = table_g1(-1.0);
    TransformedNonlinearity ft(presets::f_sign(), t);
    EXPECT_NEAR(ft.f_tilde(std::exp(1.0) - 1.0), 0.0, 1e-9);
    for (double v : {0.3, 1.1, 2.5, 4.0, 6.0}) {
        const double s = std::log1p(v);
        EXPECT_NEAR(ft.f_tilde(v), s * (s - 1) * (2 - s) * (1 + v), 1e-8);
    }
    EXPECT_NEAR(ft.f_tilde(ft.v_alpha()), 0.0, 1e-9);
    EXPECT_NEAR(ft.f_tilde(ft.v_beta()), 0.0, 1e-9);
}

TEST(Ftilde, SignMatchesF) {
    auto t = build_psi(presets::g_lin(), std::nullopt, 2.0, -2.0, 2.0);
    TransformedNonlinearity ft(presets::f_sign(), t);
    for (int i = 1; i < 500; ++i) {
        const double v = ft.v_beta() * i / 500;
        const double s = t->psi_inverse(v);
        const double fs = s * (s - 1) * (2 - s);
        if (std::abs(fs) < 1e-12) continue;
        EXPECT_EQ(std::signbit(ft.f_tilde(v)), std::signbit(fs));
    }
}

TEST(Ftilde, TotalMassMatchesDirectQuadrature) {
    auto t = table_g1(-1.0);
    TransformedNonlinearity ft(presets::f_sign(), t);
    const double direct = quad([](double s) { return w_sign(s, -1.0, 2.0); }, 0.0, 2.0, 1e-14, 0.0);
    EXPECT_NEAR(ft.F_tilde(ft.v_beta()), direct, 2e-10);
    // int_0^2 s(s-1)(2-s) e^{2s} ds = (e^4 - 13) / 8
    EXPECT_NEAR(direct, (std::exp(4.0) - 13.0) / 8.0, 1e-12);
}

TEST(Ftilde, AreaIdentityRandomLevels) {
    auto t = table_g1(-1.0);
    for (auto f : {presets::f_sign(), presets::f_pos()}) {
        TransformedNonlinearity ft(f, t);
        std::mt19937_64 rng(42);
        std::uniform_real_distribution<double> u(0.0, ft.v_beta());
        for (int k = 0; k < 20; ++k) {
            const double v = u(rng);
            const double lhs = quad([&](double x) { return ft.f_tilde(x); }, v, ft.v_beta(), 1e-13, 0.0);
            const double s = t->psi_inverse(v);
            const double rhs = quad([&](double r) { return f(r) * std::exp(2.0 * r); }, s, 2.0, 1e-14, 0.0);
            EXPECT_NEAR(lhs, rhs, 5e-10) << f.text() << " v=" << v;
        }
    }
}

TEST(Ftilde, TailConsistency) {
    auto t = table_g1(-2.0, 1.5);
    TransformedNonlinearity ft(presets::f_pos(), t);
    for (double r : {1.2, 1.7, 1.999}) {
        for (double sig : {0.0, 0.9, 1.19, r - 1e-6, r - 1e-12}) {
            if (sig >= r) continue;
            // split at the kink of f_pos
            const double direct = integrate_split([&](double x) { return ft.weight(x); }, sig, r, {1.0},
                                                  QuadOptions{0.0, 1e-14, 4000})
                                      .value;
            EXPECT_NEAR(ft.tail(sig, r), direct, 1e-12 * std::max(1.0, ft.scale()) + 1e-10 * std::abs(direct));
        }
    }
}

TEST(Profiles, PushPull) {
    auto t = build_psi(presets::g_lin(), std::nullopt, 2.0, -1.5, 2.0);
    SolutionProfile zero;
    zero.x = {0, 0.5, 1};
    zero.u = {0, 0, 0};
    auto z = pushforward_solution(zero, *t);
    for (double v : z.v) EXPECT_EQ(v, 0.0);

    SolutionProfile prof;
    for (int i = 0; i <= 100; ++i) {
        prof.x.push_back(0.01 * i);
        prof.u.push_back(2.0 * std::sin(M_PI * 0.01 * i));
    }
    prof.u.back() = 0.0;
    auto pushed = pushforward_solution(prof, *t);
    EXPECT_NEAR(pushed.v_sup, t->psi(pushed.sup_norm), 1e-12);
    auto back = pullback_solution(pushed, *t);
    for (std::size_t i = 0; i < prof.u.size(); ++i) EXPECT_NEAR(back.u[i], prof.u[i], 10 * t->tol());

    SolutionProfile top;
    top.x = {0, 1};
    top.u = {2.0, 2.0};
    auto tv = pushforward_solution(top, *t);
    EXPECT_DOUBLE_EQ(tv.v[0], t->psi_beta());

    SolutionProfile bad = top;
    bad.u = {2.5, 0.0};
    EXPECT_THROW(pushforward_solution(bad, *t), DomainError);
}

TEST(Norms, MonotoneEquivalence) {
    auto t = build_psi(presets::g_lin(), std::nullopt, 2.0, -3.0, 2.0);
    const double va = t->psi(1.0), vb = t->psi(2.0);
    for (int i = 0; i <= 400; ++i) {
        const double u = 2.0 * i / 400;
        const bool in_u = u >= 1.0 && u <= 2.0;
        const double v = t->psi(u);
        const bool in_v = v >= va && v <= vb;
        EXPECT_EQ(in_u, in_v) << u;
    }
}

TEST(Export, CsvHasHeaderAndRows) {
    auto t = table_g1(-1.0);
    std::ostringstream os;
    t->write_csv(os);
    const std::string out = os.str();
    EXPECT_EQ(out.rfind("s,psi,dpsi\n", 0), 0u);
    EXPECT_EQ(static_cast<std::size_t>(std::count(out.begin(), out.end(), '\n')), t->size() + 1);
    EXPECT_EQ(t->to_json()["s"].size(), t->size());
}
