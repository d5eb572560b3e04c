#pragma once

#include <natgrow/error.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <string>
#include <vector>

namespace natgrow {

enum class DomainKind { interval, ball };

struct DomainSpec {
    DomainKind kind = DomainKind::interval;
    double size = 1.0; // interval length or ball radius
    int N = 1;

    static DomainSpec interval(double length) { return {DomainKind::interval, length, 1}; }
    static DomainSpec ball(double radius, int N) { return {DomainKind::ball, radius, N}; }

    void validate() const {
        if (!(size > 0.0)) throw DomainError("domain size must be positive");
        if (kind == DomainKind::interval && N != 1) throw DomainError("an interval has N = 1");
        if (kind == DomainKind::ball && N < 2) throw DomainError("a ball needs N >= 2");
    }

    /// Distance from the centre to the boundary.
    double half_size() const { return kind == DomainKind::interval ? 0.5 * size : size; }
};

inline const char* to_string(DomainKind k) { return k == DomainKind::interval ? "interval" : "ball"; }

/// A solution sampled on a grid. For an interval x runs over [0, length]; for a
/// ball x is the radius in [0, R]. `u` holds original variables, `v` = Psi(u).
struct SolutionProfile {
    DomainSpec domain;
    std::vector<double> x;
    std::vector<double> u;
    std::vector<double> v;
    double sup_norm = 0.0;   // max u
    double v_sup = 0.0;      // max v
    double lambda = 0.0;
    double L = 0.0;
    double p = 2.0;
    double residual_norm = 0.0; // max |residual| of the original equation
    bool residual_checked = false;
    double residual_threshold = 1e-4;
    int branch_id = 0;
    bool tangency = false;

    /// Residual evaluated and below the threshold; profiles without a residual
    /// (radial, semilinear callbacks) count as accepted.
    bool accepted() const { return !residual_checked || residual_norm <= residual_threshold; }

    void update_norms() {
        sup_norm = u.empty() ? 0.0 : *std::max_element(u.begin(), u.end());
        v_sup = v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
    }

    nlohmann::json summary() const {
        return {{"domain", to_string(domain.kind)},
                {"size", domain.size},
                {"N", domain.N},
                {"lambda", lambda},
                {"L", L},
                {"p", p},
                {"branch", branch_id},
                {"sup_norm", sup_norm},
                {"v_sup", v_sup},
                {"residual_norm", residual_checked ? nlohmann::json(residual_norm) : nlohmann::json()},
                {"residual_threshold", residual_threshold},
                {"accepted", accepted()},
                {"tangency", tangency},
                {"points", x.size()}};
    }
};

} // namespace natgrow
