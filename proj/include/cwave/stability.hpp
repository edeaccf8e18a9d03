#pragma once

// Time-step admissibility for the conditionally stable three-level schemes:
// (1/4 - sigma) h_t^2 alpha_h^2 <= (1 - eps0^2) rho_min, with alpha_h^2 the
// largest generalized eigenvalue of A e = lambda B e.

#include <cmath>
#include <string>

#include "transforms.hpp"

namespace cwave {

enum class StabilityCondition { general, explicit_sum, unconditional };

struct StabilityReport {
    double alpha_h_sq = 0.0;
    double sigma = 0.0;
    double eps0_sq = 0.0;
    double rho_min = 0.0;
    double ht = 0.0;
    double ht_max = 0.0;          // from the general condition
    double ht_max_explicit = 0.0; // from h_t^2 sum a_k^2/h_k^2 <= (1 - eps0^2) rho_min
    double C1 = 1.0;              // sufficient-condition constant (advisory)
    StabilityCondition condition_used = StabilityCondition::general;
    bool satisfied = false;
    bool explicit_satisfied = false;
};

/// max_j sigma_A(j) / sigma_B(j) by exhaustive scan over the interior modes.
inline double alpha_h_sq(const std::vector<double>& sym_B, const std::vector<double>& sym_A) {
    double a = 0.0;
    for (std::size_t i = 0; i < sym_B.size(); ++i) a = std::max(a, sym_A[i] / sym_B[i]);
    return a;
}

inline double alpha_h_sq(const OperatorId& B, const OperatorId& A, const OperatorParams& p,
                         const Mesh& m) {
    const auto sb = symbol_table(B, p, m), sa = symbol_table(A, p, m);
    return alpha_h_sq(sb, sa);
}

/// sum_k a_k^2 / h_k^2
inline double explicit_sum(const Mesh& m, std::span<const double> a) {
    double s = 0.0;
    for (int k = 0; k < m.dim; ++k) s += a[k] * a[k] / (m.step[k] * m.step[k]);
    return s;
}

/// Fills everything but C1 and condition_used for a weight sigma < 1/4.
inline StabilityReport evaluate_stability(double alpha_sq, double sigma, double eps0_sq,
                                          double rho_min, const Mesh& m,
                                          std::span<const double> a) {
    CWAVE_REQUIRE(eps0_sq > 0.0 && eps0_sq < 1.0, std::invalid_argument,
                  "eps0^2 must lie in (0, 1)");
    CWAVE_REQUIRE(rho_min > 0.0, std::invalid_argument, "rho must be positive");
    StabilityReport r;
    r.alpha_h_sq = alpha_sq;
    r.sigma = sigma;
    r.eps0_sq = eps0_sq;
    r.rho_min = rho_min;
    r.ht = m.ht;
    const double budget = (1.0 - eps0_sq) * rho_min;
    if (sigma >= 0.25) {
        r.ht_max = std::numeric_limits<double>::infinity();
        r.satisfied = true;
        r.condition_used = StabilityCondition::unconditional;
    } else {
        r.ht_max = std::sqrt(budget / ((0.25 - sigma) * alpha_sq));
        r.satisfied = (0.25 - sigma) * m.ht * m.ht * alpha_sq <= budget * (1.0 + 1e-12);
    }
    const double es = explicit_sum(m, a);
    r.ht_max_explicit = std::sqrt(budget / es);
    r.explicit_satisfied = m.ht * m.ht * es <= budget * (1.0 + 1e-12);
    return r;
}

} // namespace cwave
