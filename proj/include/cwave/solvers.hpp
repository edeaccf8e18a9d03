#pragma once

// Iterative solvers for the upper-level equation K w = b, where
// K = B(rho .) + sigma h_t^2 A, posed in H_h.
//
// All methods work on the canonical form  cal_A w = b~  with cal_A = B^{-1} K
// and b~ = B^{-1} b, and the preconditioned direction y = M^{-1}(cal_A w - b~).
// M defaults to D_rho (pointwise rho); any SPD operator can be plugged in.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "transforms.hpp"

namespace cwave {

/// lambda_bar(eps0^2) = 1 + (1 - eps0^2)/2, the upper spectral-equivalence constant.
inline double lambda_bar(double eps0_sq) {
    CWAVE_REQUIRE(eps0_sq >= 0.0 && eps0_sq < 1.0, std::invalid_argument,
                  "eps0^2 must lie in [0, 1)");
    return 1.0 + 0.5 * (1.0 - eps0_sq);
}

inline double theta_opt(double eps0_sq) { return 2.0 / (1.0 + lambda_bar(eps0_sq)); }

inline double q0(double eps0_sq) {
    const double l = lambda_bar(eps0_sq);
    return (l - 1.0) / (l + 1.0);
}

inline double q1(double eps0_sq) {
    const double r = std::sqrt(lambda_bar(eps0_sq));
    return (r - 1.0) / (r + 1.0);
}

enum class SolverMethod { richardson, chebyshev, steepest_descent };
enum class InitialGuess { previous_layer, linear_extrapolation, sigma0_predictor };
enum class U4Preconditioner { rho_diagonal, spectral };

struct SolverConfig {
    SolverMethod method = SolverMethod::richardson;
    double eps0_sq = 0.5;
    int cheb_N = 8;
    double tol = 1e-10;
    int max_iter = 1000;
    InitialGuess guess = InitialGuess::sigma0_predictor;
    U4Preconditioner u4_preconditioner = U4Preconditioner::spectral;
    std::function<void(const GridFn&)> monitor; // sees every iterate after its update
};

inline void validate(const SolverConfig& c) {
    CWAVE_REQUIRE(c.tol > 0.0, std::invalid_argument, "solver.tol must be positive");
    CWAVE_REQUIRE(c.cheb_N >= 1, std::invalid_argument, "solver.cheb_N must be >= 1");
    CWAVE_REQUIRE(c.max_iter >= 1, std::invalid_argument, "solver.max_iter must be >= 1");
    CWAVE_REQUIRE(c.eps0_sq > 0.0 && c.eps0_sq < 1.0, std::invalid_argument,
                  "solver.eps0_sq must lie in (0, 1)");
}

struct SolveReport {
    int iterations = 0;
    std::vector<double> residuals; // relative preconditioned residual before each update
    double achieved = 0.0;
    double seconds = 0.0;
    bool converged = false;
};

class SolverFailure : public std::runtime_error {
  public:
    SolverFailure(const std::string& what, SolveReport report)
        : std::runtime_error(what), report_(std::move(report)) {}
    [[nodiscard]] const SolveReport& report() const { return report_; }

  private:
    SolveReport report_;
};

using Action = std::function<GridFn(const GridFn&)>;

/// cal_A w = b~ in H_h together with the preconditioner and the D_rho weight.
struct LinearSystem {
    Action apply;       // cal_A
    Action precond_inv; // M^{-1}
    GridFn rhs;         // b~
    GridFn rho;
};

/// y = w / rho pointwise.
inline GridFn divide_by(const GridFn& w, const GridFn& rho) {
    GridFn y = pointwise_div(w, rho);
    y.zero_boundary();
    return y;
}

namespace detail {

struct IterationState {
    GridFn w, g, y;
    double ref = 1.0;
};

inline double rel_residual(const IterationState& s) { return norm_h(s.y) / s.ref; }

} // namespace detail

/// Shared driver: `update(state, l)` performs one update of state.w (and may
/// refresh g, y itself, returning true); otherwise g, y are recomputed.
template <class Update>
std::pair<GridFn, SolveReport> iterate(const LinearSystem& sys, const SolverConfig& cfg,
                                       const GridFn& x0, Update&& update) {
    validate(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    SolveReport rep;
    detail::IterationState s;
    s.w = x0;
    s.w.zero_boundary();
    const GridFn pb = sys.precond_inv(sys.rhs);
    s.ref = norm_h(pb);
    if (s.ref == 0.0) s.ref = 1.0;
    auto refresh = [&] {
        s.g = sys.apply(s.w) - sys.rhs;
        s.g.zero_boundary();
        s.y = sys.precond_inv(s.g);
    };
    refresh();
    double r = detail::rel_residual(s);
    rep.residuals.push_back(r);
    for (int l = 0;; ++l) {
        if (r <= cfg.tol) {
            rep.converged = true;
            break;
        }
        if (l >= cfg.max_iter) break;
        if (!update(s, l)) refresh();
        ++rep.iterations;
        if (cfg.monitor) cfg.monitor(s.w);
        r = detail::rel_residual(s);
        rep.residuals.push_back(r);
        if (!std::isfinite(r)) break;
    }
    rep.achieved = r;
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!rep.converged) {
        char msg[160];
        std::snprintf(msg, sizeof msg, "linear solve did not reach tol %g (residual %g after %d iterations)", cfg.tol,
                      r, rep.iterations);
        throw SolverFailure(msg, rep);
    }
    return {std::move(s.w), std::move(rep)};
}

/// w <- w - theta_opt y
inline std::pair<GridFn, SolveReport> richardson_solve(const LinearSystem& sys,
                                                       const SolverConfig& cfg, const GridFn& x0) {
    const double th = theta_opt(cfg.eps0_sq);
    return iterate(sys, cfg, x0, [&](detail::IterationState& s, int) {
        s.w.axpy(-th, s.y);
        return false;
    });
}

/// theta_l = theta_opt / (1 + q0 cos(pi (l + 1/2) / N)), cycles restarted.
inline std::vector<double> chebyshev_parameters(double eps0_sq, int N) {
    std::vector<double> th(N);
    for (int l = 0; l < N; ++l)
        th[l] = theta_opt(eps0_sq) / (1.0 + q0(eps0_sq) * std::cos(std::numbers::pi * (l + 0.5) / N));
    return th;
}

inline std::pair<GridFn, SolveReport> chebyshev_solve(const LinearSystem& sys,
                                                      const SolverConfig& cfg, const GridFn& x0) {
    const std::vector<double> th = chebyshev_parameters(cfg.eps0_sq, cfg.cheb_N);
    return iterate(sys, cfg, x0, [&](detail::IterationState& s, int l) {
        s.w.axpy(-th[l % cfg.cheb_N], s.y);
        return false;
    });
}

/// theta_l = (g, y) / (cal_A y, y), i.e. (M y, y) / (cal_A y, y).
inline std::pair<GridFn, SolveReport> steepest_descent_solve(const LinearSystem& sys,
                                                             const SolverConfig& cfg,
                                                             const GridFn& x0) {
    return iterate(sys, cfg, x0, [&](detail::IterationState& s, int) {
        const GridFn ay = sys.apply(s.y);
        const double num = inner_product_h(s.g, s.y);
        const double den = inner_product_h(ay, s.y);
        if (den <= 0.0) return false;
        const double th = num / den;
        s.w.axpy(-th, s.y);
        s.g.axpy(-th, ay);
        s.g.zero_boundary();
        s.y = sys.precond_inv(s.g);
        return true;
    });
}

inline std::pair<GridFn, SolveReport> solve(const LinearSystem& sys, const SolverConfig& cfg,
                                            const GridFn& x0) {
    switch (cfg.method) {
    case SolverMethod::richardson: return richardson_solve(sys, cfg, x0);
    case SolverMethod::chebyshev: return chebyshev_solve(sys, cfg, x0);
    case SolverMethod::steepest_descent: return steepest_descent_solve(sys, cfg, x0);
    }
    throw std::invalid_argument("unknown solver method");
}

/// cal_A w = rho w + sigma h_t^2 B^{-1} A w using one DST pair per application.
/// ratio[j] = sigma_A(j) / sigma_B(j) in spectrum order.
inline Action spectral_canonical_operator(const GridFn& rho, double sigma_ht2,
                                          std::vector<double> ratio) {
    for (double& r : ratio) r *= sigma_ht2;
    return [rho, ratio = std::move(ratio)](const GridFn& w) {
        GridFn r = apply_spectral_multiplier(w, ratio);
        for_each_interior(w.mesh(), [&](std::size_t i) { r[i] += rho[i] * w[i]; });
        return r;
    };
}

/// w^(0) = (1/rho) B^{-1} b, the solution of the sigma = 0 equation.
inline GridFn sigma0_predictor(const LinearSystem& sys) { return divide_by(sys.rhs, sys.rho); }

inline const char* to_string(SolverMethod m) {
    switch (m) {
    case SolverMethod::richardson: return "richardson";
    case SolverMethod::chebyshev: return "chebyshev";
    case SolverMethod::steepest_descent: return "steepest_descent";
    }
    return "?";
}

inline const char* to_string(InitialGuess g) {
    switch (g) {
    case InitialGuess::previous_layer: return "previous_layer";
    case InitialGuess::linear_extrapolation: return "linear_extrapolation";
    case InitialGuess::sigma0_predictor: return "sigma0_predictor";
    }
    return "?";
}

} // namespace cwave
