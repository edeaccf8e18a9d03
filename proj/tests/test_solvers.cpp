#include <gtest/gtest.h>

#include <random>

#include "cwave/solvers.hpp"
#include "support.hpp"

using namespace cwave;

namespace {

// cal_A = rho + (h_t^2/12) sbarN^{-1} AbarN at the largest h_t the stability
// condition admits for eps0^2, so that D_rho <= cal_A <= lambda_bar D_rho.
struct Instance {
    Mesh mesh;
    GridFn rho;
    std::vector<double> ratio;
    double ht = 0.0;
    LinearSystem sys;
    GridFn exact;
};

Instance make_instance(double eps0_sq, unsigned seed, bool constant_rho = false, int N = 16) {
    Instance in;
    in.mesh = make_uniform_mesh({1.0, 1.3}, {N, N + 2}, 1.0, 10);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    in.rho = GridFn(in.mesh, 1.0);
    if (!constant_rho)
        for (std::size_t i = 0; i < in.rho.size(); ++i) in.rho[i] = u(rng);
    OperatorParams p;
    p.a = {1.0, 0.7};
    const auto sb = symbol_table({OperatorTag::sbarN}, p, in.mesh);
    const auto sa = symbol_table({OperatorTag::AbarN}, p, in.mesh);
    double alpha2 = 0.0;
    in.ratio.resize(sb.size());
    for (std::size_t i = 0; i < sb.size(); ++i) {
        in.ratio[i] = sa[i] / sb[i];
        alpha2 = std::max(alpha2, in.ratio[i]);
    }
    in.ht = std::sqrt(6.0 * (1.0 - eps0_sq) * min_value(in.rho) / alpha2);
    in.sys.apply = spectral_canonical_operator(in.rho, in.ht * in.ht / 12.0, in.ratio);
    const GridFn rho = in.rho;
    in.sys.precond_inv = [rho](const GridFn& w) { return divide_by(w, rho); };
    in.sys.rho = in.rho;
    in.exact = test::random_fn(in.mesh, seed + 1);
    in.sys.rhs = in.sys.apply(in.exact);
    return in;
}

double a_norm(const LinearSystem& sys, const GridFn& e) {
    return std::sqrt(inner_product_h(sys.apply(e), e));
}

} // namespace

TEST(Parameters, ClosedForms) {
    EXPECT_DOUBLE_EQ(theta_opt(0.5), 8.0 / 9.0);
    EXPECT_DOUBLE_EQ(q0(0.5), 1.0 / 9.0);
    EXPECT_DOUBLE_EQ(theta_opt(0.75), 16.0 / 17.0);
    EXPECT_NEAR(q0(0.75), 0.05882, 5e-6);
    EXPECT_NEAR(q1(0.5), 0.05573, 5e-6);
    EXPECT_NEAR(theta_opt(7.0 / 8.0), 32.0 / 33.0, 1e-15);
    for (double e : {0.0, 0.1, 0.5, 0.9}) EXPECT_NEAR(q0(e), (1.0 - e) / (5.0 - e), 1e-15);
    EXPECT_THROW(q0(1.0), std::invalid_argument);
    EXPECT_THROW(theta_opt(-0.1), std::invalid_argument);
}

TEST(Parameters, RatioBoundsAndMonotonicity) {
    double prev0 = 1.0, prev1 = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double e = i / 200.0;
        const double r = q1(e) / q0(e);
        EXPECT_GT(r, 0.5);
        EXPECT_LE(r, 5.0 / (5.0 + 4.0 * std::sqrt(1.5)) + 1e-12);
        EXPECT_LT(q0(e), prev0);
        EXPECT_LT(q1(e), prev1);
        prev0 = q0(e);
        prev1 = q1(e);
    }
    EXPECT_LT(q0(0.999999), 1e-6);
}

TEST(Parameters, ChebyshevSingleStageIsRichardson) {
    const auto th = chebyshev_parameters(0.5, 1);
    ASSERT_EQ(th.size(), 1u);
    EXPECT_NEAR(th[0], theta_opt(0.5), 1e-15);
}

TEST(SpectralEquivalence, RayleighQuotientsWithinBounds) {
    for (double e : {0.25, 0.5, 0.75}) {
        const Instance in = make_instance(e, 31);
        for (unsigned s = 0; s < 20; ++s) {
            const GridFn w = test::random_fn(in.mesh, 100 + s);
            const double q = inner_product_h(in.sys.apply(w), w) / rho_norm_sq(in.rho, w);
            EXPECT_GE(q, 1.0 - 1e-12);
            EXPECT_LE(q, lambda_bar(e) + 1e-12);
        }
    }
}

TEST(SpectralEquivalence, CanonicalOperatorIsSymmetric) {
    const Instance in = make_instance(0.5, 32);
    const GridFn u = test::random_fn(in.mesh, 1), w = test::random_fn(in.mesh, 2);
    EXPECT_NEAR(inner_product_h(in.sys.apply(u), w), inner_product_h(u, in.sys.apply(w)),
                1e-12 * norm_h(u) * norm_h(w) * 10);
}

TEST(Richardson, ContractsByQ0InBothNorms) {
    for (double e : {0.5, 0.75}) {
        const Instance in = make_instance(e, 33);
        SolverConfig cfg;
        cfg.eps0_sq = e;
        GridFn before = -1.0 * in.exact;
        int seen = 0;
        cfg.monitor = [&](const GridFn& w) {
            const GridFn after = w - in.exact;
            EXPECT_LE(std::sqrt(rho_norm_sq(in.rho, after)),
                      (q0(e) + 1e-12) * std::sqrt(rho_norm_sq(in.rho, before)));
            EXPECT_LE(a_norm(in.sys, after), (q0(e) + 1e-12) * a_norm(in.sys, before));
            before = after;
            ++seen;
        };
        richardson_solve(in.sys, cfg, GridFn(in.mesh));
        EXPECT_GE(seen, 5);
    }
}

TEST(Richardson, SingleModeFactorMatchesScalarOracle) {
    const Instance in = make_instance(0.5, 34, true);
    // single sine mode (2,3): error factor |1 - theta (1 + sigma h_t^2 ratio_j)|
    const Mesh& m = in.mesh;
    const GridFn e = sample(
        [&](const Point& x) { return std::sin(2 * M_PI * x[0] / m.extent[0]) * std::sin(3 * M_PI * x[1] / m.extent[1]); },
        m);
    SineSpectrum s{m, std::vector<double>(m.interior_count())};
    const double r = in.ratio[s.flat({2, 3, 1})];
    const double factor = std::abs(1.0 - theta_opt(0.5) * (1.0 + in.ht * in.ht / 12.0 * r));
    const GridFn y = in.sys.precond_inv(in.sys.apply(e));
    GridFn next = e;
    next.axpy(-theta_opt(0.5), y);
    EXPECT_NEAR(norm_h(next), factor * norm_h(e), 1e-12 * norm_h(e));
    EXPECT_LE(factor, q0(0.5) + 1e-12);
}

TEST(Richardson, ResidualsNonIncreasingAndConverges) {
    const Instance in = make_instance(0.5, 35);
    SolverConfig cfg;
    const auto [w, rep] = richardson_solve(in.sys, cfg, GridFn(in.mesh));
    EXPECT_TRUE(rep.converged);
    for (std::size_t i = 1; i < rep.residuals.size(); ++i)
        EXPECT_LE(rep.residuals[i], rep.residuals[i - 1]);
    EXPECT_LE(rep.achieved, cfg.tol);
    EXPECT_LT(test::rel_diff(w, in.exact), 1e-9);
    EXPECT_LE(rep.iterations, 12);
}

TEST(Richardson, ExactGuessStopsImmediately) {
    const Instance in = make_instance(0.5, 36);
    for (SolverMethod m : {SolverMethod::richardson, SolverMethod::chebyshev, SolverMethod::steepest_descent}) {
        SolverConfig cfg;
        cfg.method = m;
        const auto [w, rep] = solve(in.sys, cfg, in.exact);
        EXPECT_EQ(rep.iterations, 0) << to_string(m);
        EXPECT_TRUE(rep.converged);
    }
}

TEST(Richardson, FailureCarriesReport) {
    const Instance in = make_instance(0.5, 37);
    SolverConfig cfg;
    cfg.max_iter = 2;
    try {
        richardson_solve(in.sys, cfg, GridFn(in.mesh));
        FAIL() << "expected SolverFailure";
    } catch (const SolverFailure& f) {
        EXPECT_EQ(f.report().iterations, 2);
        EXPECT_EQ(f.report().residuals.size(), 3u);
        EXPECT_FALSE(f.report().converged);
    }
}

TEST(Chebyshev, SingleStageMatchesRichardson) {
    const Instance in = make_instance(0.5, 38);
    SolverConfig a, b;
    b.method = SolverMethod::chebyshev;
    b.cheb_N = 1;
    const auto ra = richardson_solve(in.sys, a, GridFn(in.mesh));
    const auto rb = chebyshev_solve(in.sys, b, GridFn(in.mesh));
    EXPECT_EQ(ra.second.iterations, rb.second.iterations);
    EXPECT_LT(test::rel_diff(ra.first, rb.first), 1e-14);
}

TEST(Chebyshev, CycleBounds) {
    // classical 1/T_N(1/q0) = 2 q1^N / (1 + q1^{2N}) is a true worst-case bound;
    // the tighter 2 q1^N / (1 + 2 q1^N) is checked on random data only
    for (int N : {1, 2, 3, 4}) {
        for (unsigned seed : {40u, 41u, 42u}) {
            const double e = 0.5;
            const Instance in = make_instance(e, seed, seed == 40u);
            SolverConfig cfg;
            cfg.eps0_sq = e;
            const auto th = chebyshev_parameters(e, N);
            GridFn w(in.mesh);
            for (int l = 0; l < N; ++l) w.axpy(-th[l], in.sys.precond_inv(in.sys.apply(w) - in.sys.rhs));
            const double ratio = a_norm(in.sys, w - in.exact) / a_norm(in.sys, in.exact);
            const double qn = std::pow(q1(e), N);
            EXPECT_LE(ratio, 2 * qn / (1 + qn * qn) * (1 + 1e-10)) << N;
            EXPECT_LE(ratio, 2 * qn / (1 + 2 * qn) * (1 + 1e-10)) << N;
        }
    }
}

TEST(Chebyshev, WorstCaseAttainsClassicalBound) {
    // scalar oracle: the cycle polynomial at the ends of [1, lambda_bar]
    for (int N : {1, 2, 3}) {
        const double e = 0.5;
        const auto th = chebyshev_parameters(e, N);
        double worst = 0.0;
        for (int i = 0; i <= 2000; ++i) {
            const double lam = 1.0 + (lambda_bar(e) - 1.0) * i / 2000.0;
            double p = 1.0;
            for (double t : th) p *= 1.0 - t * lam;
            worst = std::max(worst, std::abs(p));
        }
        const double qn = std::pow(q1(e), N);
        EXPECT_NEAR(worst, 2 * qn / (1 + qn * qn), 1e-12);
        EXPECT_GT(worst, 2 * qn / (1 + 2 * qn));
    }
}

TEST(SteepestDescent, EnergyErrorNonIncreasing) {
    for (bool constant : {true, false}) {
        const Instance in = make_instance(0.5, 43, constant);
        SolverConfig cfg;
        cfg.method = SolverMethod::steepest_descent;
        double prev = a_norm(in.sys, in.exact);
        cfg.monitor = [&](const GridFn& w) {
            const double cur = a_norm(in.sys, w - in.exact);
            EXPECT_LE(cur, prev * (1 + 1e-12));
            prev = cur;
        };
        steepest_descent_solve(in.sys, cfg, GridFn(in.mesh));
    }
}

TEST(SteepestDescent, NoSlowerThanRichardson) {
    const Instance in = make_instance(0.5, 44);
    SolverConfig r, s;
    s.method = SolverMethod::steepest_descent;
    const int nr = richardson_solve(in.sys, r, GridFn(in.mesh)).second.iterations;
    const int ns = steepest_descent_solve(in.sys, s, GridFn(in.mesh)).second.iterations;
    EXPECT_LE(ns, nr);
}

TEST(Predictor, ExactWhenSigmaVanishes) {
    const Mesh m = make_uniform_mesh({1.0, 1.0}, {12, 12}, 1.0, 10);
    const GridFn rho = test::random_fn(m, 45, false) + GridFn(m, 2.0);
    LinearSystem sys;
    sys.rho = rho;
    sys.apply = [rho](const GridFn& w) {
        GridFn r = pointwise(rho, w);
        r.zero_boundary();
        return r;
    };
    sys.precond_inv = [rho](const GridFn& w) { return divide_by(w, rho); };
    const GridFn exact = test::random_fn(m, 46);
    sys.rhs = sys.apply(exact);
    EXPECT_LT(test::rel_diff(sigma0_predictor(sys), exact), 1e-15);
    sys.rhs = GridFn(m);
    EXPECT_EQ(max_norm(sigma0_predictor(sys)), 0.0);
}

TEST(SolverConfig, Validation) {
    SolverConfig c;
    c.tol = 0.0;
    EXPECT_THROW(validate(c), std::invalid_argument);
    c = {};
    c.cheb_N = 0;
    EXPECT_THROW(validate(c), std::invalid_argument);
    c = {};
    c.eps0_sq = 1.0;
    EXPECT_THROW(validate(c), std::invalid_argument);
}
