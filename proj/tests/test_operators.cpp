#include <gtest/gtest.h>

#include "cwave/operators.hpp"
#include "support.hpp"

using namespace cwave;
using test::dense_identity;
using test::dense_lambda;
using test::dense_skN;
using test::interior_vec;

namespace {

Eigen::MatrixXd dense_sN(const Mesh& m) {
    Eigen::MatrixXd r = dense_identity(m);
    for (int k = 0; k < m.dim; ++k) r += m.step[k] * m.step[k] / 12.0 * dense_lambda(m, k);
    return r;
}

Eigen::MatrixXd dense_sbarN_except(const Mesh& m, int skip) {
    Eigen::MatrixXd r = dense_identity(m);
    for (int k = 0; k < m.dim; ++k)
        if (k != skip) r = r * dense_skN(m, k);
    return r;
}

Eigen::MatrixXd dense_AN(const Mesh& m, const std::vector<double>& a) {
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(dense_identity(m).rows(), dense_identity(m).cols());
    for (int k = 0; k < m.dim; ++k) {
        Eigen::MatrixXd hat = dense_identity(m);
        for (int i = 0; i < m.dim; ++i)
            if (i != k) hat += m.step[i] * m.step[i] / 12.0 * dense_lambda(m, i);
        r -= a[k] * a[k] * hat * dense_lambda(m, k);
    }
    return r;
}

Eigen::MatrixXd dense_AbarN(const Mesh& m, const std::vector<double>& a) {
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(dense_identity(m).rows(), dense_identity(m).cols());
    for (int k = 0; k < m.dim; ++k)
        r -= a[k] * a[k] * dense_sbarN_except(m, k) * dense_lambda(m, k);
    return r;
}

Eigen::MatrixXd dense_Lh(const Mesh& m) {
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(dense_identity(m).rows(), dense_identity(m).cols());
    for (int k = 0; k < m.dim; ++k) r += dense_skN(m, k).inverse() * dense_lambda(m, k);
    return r;
}

GridFn sine_mode(const Mesh& m, const std::array<int, 3>& j) {
    return sample(
        [&](const Point& x) {
            double v = 1.0;
            for (int k = 0; k < m.dim; ++k) v *= std::sin(j[k] * M_PI * x[k] / m.extent[k]);
            return v;
        },
        m);
}

double dense_err(const GridFn& got, const Eigen::VectorXd& want) {
    return (interior_vec(got) - want).lpNorm<Eigen::Infinity>() /
           std::max(1.0, want.lpNorm<Eigen::Infinity>());
}

const std::vector<double> kSpeeds3{1.0, 1.3, 0.7};

} // namespace

TEST(Lambda, ExactOnQuadratics) {
    const Mesh m = make_uniform_mesh({1.5, 1.0}, {6, 5}, 1.0, 2);
    const GridFn w = sample([](const Point& x) { return x[0] * (1.5 - x[0]); }, m);
    const GridFn r = apply_operator({OperatorTag::Lambda_k, 0}, {}, w);
    for_each_interior(m, [&](std::size_t i) { EXPECT_NEAR(r[i], -2.0, 1e-12); });
    EXPECT_TRUE(r.in_Hh());
}

TEST(SN, PreservesConstants) {
    const Mesh m = make_uniform_mesh({1.0, 1.0, 1.0}, {5, 5, 5}, 1.0, 2);
    const GridFn one(m, 1.0);
    const GridFn r = apply_operator({OperatorTag::sN}, {}, one);
    for_each_interior(m, [&](std::size_t i) { EXPECT_NEAR(r[i], 1.0, 1e-14); });
    const GridFn rb = apply_operator({OperatorTag::sbarN}, {}, one);
    for_each_interior(m, [&](std::size_t i) { EXPECT_NEAR(rb[i], 1.0, 1e-14); });
}

TEST(Operators, MatchDenseShadowsIn2D) {
    const Mesh m = make_uniform_mesh({1.0, 2.0}, {6, 7}, 1.0, 2);
    const GridFn w = test::random_fn(m, 11);
    const Eigen::VectorXd x = interior_vec(w);
    OperatorParams p;
    p.a = {1.0, 1.7};
    p.beta = 0.6;
    EXPECT_LT(dense_err(apply_operator({OperatorTag::Delta_h}, p, w),
                        (dense_lambda(m, 0) + dense_lambda(m, 1)) * x), 1e-12);
    EXPECT_LT(dense_err(apply_operator({OperatorTag::sN}, p, w), dense_sN(m) * x), 1e-13);
    EXPECT_LT(dense_err(apply_operator({OperatorTag::skN, 1}, p, w), dense_skN(m, 1) * x), 1e-13);
    EXPECT_LT(dense_err(apply_operator({OperatorTag::sbarN}, p, w), dense_sbarN_except(m, -1) * x),
              1e-13);
    EXPECT_LT(dense_err(apply_operator({OperatorTag::sbarN_hat_l, 0}, p, w),
                        dense_sbarN_except(m, 0) * x), 1e-13);
    const Eigen::MatrixXd l1l2 = dense_lambda(m, 0) * dense_lambda(m, 1);
    const double h4 = m.step[0] * m.step[0] * m.step[1] * m.step[1] / 144.0;
    EXPECT_LT(dense_err(apply_operator({OperatorTag::sN_beta}, p, w),
                        (dense_sN(m) + 0.6 * h4 * l1l2) * x), 1e-12);
    EXPECT_LT(dense_err(apply_operator({OperatorTag::AN}, p, w), dense_AN(m, p.a) * x), 1e-12);
    EXPECT_LT(dense_err(apply_operator({OperatorTag::AbarN}, p, w), dense_AbarN(m, p.a) * x), 1e-12);
    EXPECT_LT(dense_err(apply_operator({OperatorTag::Lh}, p, w), dense_Lh(m) * x), 1e-12);
}

TEST(Operators, MatchDenseShadowsIn3D) {
    const Mesh m = make_uniform_mesh({1.0, 1.2, 0.8}, {5, 4, 6}, 1.0, 2);
    const GridFn w = test::random_fn(m, 12);
    const Eigen::VectorXd x = interior_vec(w);
    OperatorParams p;
    p.a = kSpeeds3;
    p.beta = 2.0;
    p.gamma = 0.3;
    p.theta = 0.4;
    EXPECT_LT(dense_err(apply_operator({OperatorTag::sbarN}, p, w), dense_sbarN_except(m, -1) * x),
              1e-13);
    EXPECT_LT(dense_err(apply_operator({OperatorTag::sN_hat_j, 2}, p, w),
                        (dense_identity(m) + m.step[0] * m.step[0] / 12 * dense_lambda(m, 0) +
                         m.step[1] * m.step[1] / 12 * dense_lambda(m, 1)) * x), 1e-13);
    EXPECT_LT(dense_err(apply_operator({OperatorTag::AN}, p, w), dense_AN(m, p.a) * x), 1e-12);
    EXPECT_LT(dense_err(apply_operator({OperatorTag::AbarN}, p, w), dense_AbarN(m, p.a) * x), 1e-12);
    // A_N theta = A_N + theta (Abar_N - A_N) since Abar_N - A_N is the triple-product part
    EXPECT_LT(dense_err(apply_operator({OperatorTag::AN_theta}, p, w),
                        (dense_AN(m, p.a) + 0.4 * (dense_AbarN(m, p.a) - dense_AN(m, p.a))) * x),
              1e-12);
    EXPECT_LT(dense_err(apply_operator({OperatorTag::Lh}, p, w), dense_Lh(m) * x), 1e-12);
}

TEST(Operators, SbarNSplitsIntoOrders) {
    const Mesh m = make_uniform_mesh({1.0, 1.0, 1.0}, {6, 7, 5}, 1.0, 2);
    const GridFn w = test::random_fn(m, 13);
    OperatorParams p;
    p.beta = 1.0;
    p.gamma = 1.0;
    const GridFn lhs = apply_operator({OperatorTag::sbarN}, p, w);
    // independent: s_N + (1/144) sum h_k^2 h_l^2 Lambda_k Lambda_l + (1/1728) h^2h^2h^2 L1L2L3
    GridFn rhs = apply_operator({OperatorTag::sN}, p, w);
    const auto L = [&](int k, const GridFn& g) { return apply_operator({OperatorTag::Lambda_k, k}, p, g); };
    const auto& h = m.step;
    for (int k = 0; k < 3; ++k)
        for (int l = k + 1; l < 3; ++l) rhs.axpy(h[k] * h[k] * h[l] * h[l] / 144.0, L(k, L(l, w)));
    rhs.axpy(h[0] * h[0] * h[1] * h[1] * h[2] * h[2] / 1728.0, L(0, L(1, L(2, w))));
    EXPECT_LT(test::rel_diff(lhs, rhs), 1e-13);
    EXPECT_LT(test::rel_diff(apply_operator({OperatorTag::sN_beta_gamma}, p, w), lhs), 1e-13);
}

TEST(Operators, NinePointStencilReadsCorners) {
    const Mesh m = make_uniform_mesh({1.0, 1.0}, {4, 4}, 1.0, 2);
    GridFn w(m);
    w.at({0, 0, 0}) = 1.0; // corner only
    const GridFn r = apply_operator({OperatorTag::sbarN}, {}, w);
    const double h2 = m.step[0] * m.step[0];
    // (h^2/12)^2 Lambda_1 Lambda_2 at node (1,1) picks the corner with weight 1/(144)
    EXPECT_NEAR(r.at({1, 1, 0}), h2 * h2 / 144.0 / (h2 * h2), 1e-14);
    EXPECT_EQ(r.at({2, 2, 0}), 0.0);
}

TEST(Operators, MissingParameters) {
    const Mesh m = make_uniform_mesh({1.0, 1.0}, {4, 4}, 1.0, 2);
    const GridFn w(m);
    EXPECT_THROW(apply_operator({OperatorTag::sN_beta}, {}, w), std::invalid_argument);
    EXPECT_THROW(apply_operator({OperatorTag::AN_theta}, {}, w), std::invalid_argument);
    EXPECT_THROW(apply_operator({OperatorTag::Lambda_k}, {}, w), std::invalid_argument);
    EXPECT_THROW(apply_operator({OperatorTag::A4}, {}, w), std::invalid_argument);
    OperatorParams bad;
    bad.rho = GridFn(m, -1.0);
    bad.ht = 0.1;
    EXPECT_THROW(apply_operator({OperatorTag::A4}, bad, w), std::invalid_argument);
}

TEST(SolveSkN, RoundTripAndModes) {
    const Mesh m = make_uniform_mesh({1.0, 2.0, 1.0}, {7, 6, 5}, 1.0, 2);
    const GridFn y = test::random_fn(m, 14);
    for (int k = 0; k < 3; ++k) {
        const GridFn w = apply_operator({OperatorTag::skN, k}, {}, y);
        EXPECT_LT(test::rel_diff(solve_skN_lines(k, w), y), 1e-13);
    }
    const Mesh m1 = make_uniform_mesh({2.0}, {16}, 1.0, 2);
    const GridFn e = sine_mode(m1, {3, 1, 1});
    const double s = std::sin(3 * M_PI * m1.step[0] / (2 * m1.extent[0]));
    GridFn want = e;
    want *= 1.0 / (1.0 - s * s / 3.0);
    EXPECT_LT(test::rel_diff(solve_skN_lines(0, e), want), 1e-13);
    EXPECT_EQ(max_norm(solve_skN_lines(0, GridFn(m1))), 0.0);
}

TEST(Symbol, ClosedFormValues) {
    const Mesh m = make_uniform_mesh({1.0}, {2}, 1.0, 2);
    EXPECT_NEAR(operator_symbol({OperatorTag::Lambda_k, 0}, {}, m, {1, 1, 1}), -8.0, 1e-13);
    const Mesh fine = make_uniform_mesh({1.0, 1.0, 1.0}, {400, 400, 400}, 1.0, 2);
    const double smin = operator_symbol({OperatorTag::sN}, {}, fine, {399, 399, 399});
    EXPECT_LT(smin, 1e-4);
    EXPECT_GT(smin, 0.0);
    EXPECT_THROW(operator_symbol({OperatorTag::sN}, {}, m, {2, 1, 1}), std::invalid_argument);
}

TEST(Symbol, AgreesWithStencilOnSineModes) {
    const Mesh m = make_uniform_mesh({1.0, 1.5, 0.9}, {6, 5, 7}, 1.0, 2);
    OperatorParams p;
    p.a = kSpeeds3;
    p.beta = 1.5;
    p.gamma = 0.2;
    p.theta = 0.7;
    p.csq = GridFn(m, 1.8);
    p.ht = 0.05;
    const std::vector<OperatorId> ids = {
        {OperatorTag::Lambda_k, 1}, {OperatorTag::Delta_h}, {OperatorTag::sN},
        {OperatorTag::skN, 2},      {OperatorTag::sN_hat_j, 0}, {OperatorTag::sbarN},
        {OperatorTag::sbarN_hat_l, 1}, {OperatorTag::sN_beta}, {OperatorTag::sN_beta_gamma},
        {OperatorTag::AN},          {OperatorTag::AbarN},   {OperatorTag::AN_theta},
        {OperatorTag::Lh},          {OperatorTag::A4}};
    for (const auto& id : ids)
        for (const std::array<int, 3> j : {std::array<int, 3>{1, 1, 1}, {2, 4, 3}, {5, 4, 6}}) {
            const GridFn e = sine_mode(m, j);
            GridFn want = e;
            want *= operator_symbol(id, p, m, j);
            EXPECT_LT(test::rel_diff(apply_operator(id, p, e), want), 1e-12) << tag_name(id.tag);
        }
}

TEST(Symbol, AbarNClosedForm) {
    const Mesh m = make_uniform_mesh({1.0, 1.0, 1.0}, {5, 5, 5}, 1.0, 2);
    OperatorParams p;
    p.a = kSpeeds3;
    const std::array<int, 3> j{1, 3, 4};
    double want = 0.0;
    for (int k = 0; k < 3; ++k) {
        double t = p.a[k] * p.a[k] * -lambda_symbol(m, k, j[k]);
        for (int i = 0; i < 3; ++i)
            if (i != k) t *= 1.0 + m.step[i] * m.step[i] * lambda_symbol(m, i, j[i]) / 12.0;
        want += t;
    }
    EXPECT_NEAR(operator_symbol({OperatorTag::AbarN}, p, m, j), want, 1e-12 * want);
    // dense eigenvalues of the shadow contain the symbol
    const Eigen::VectorXd ev =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(dense_AbarN(m, p.a)).eigenvalues();
    EXPECT_LT((ev.array() - want).abs().minCoeff(), 1e-10 * want);
}

TEST(A4, MatchesDenseProductAndIsSymmetricPositive) {
    const Mesh m = make_uniform_mesh({1.0, 1.0}, {6, 5}, 1.0, 2);
    OperatorParams p;
    GridFn rho = sample([](const Point& x) { return 1.0 + x[0] * x[0] + 4 * x[1] * x[1]; }, m);
    p.rho = rho;
    p.ht = 0.3;
    const GridFn y = test::random_fn(m, 15), z = test::random_fn(m, 16);
    Eigen::VectorXd c(interior_vec(rho).size());
    c = interior_vec(rho).cwiseInverse();
    const Eigen::MatrixXd C = c.asDiagonal();
    const Eigen::MatrixXd L = dense_Lh(m);
    const double tau = 0.09 / 12;
    const Eigen::MatrixXd I = dense_identity(m);
    const Eigen::MatrixXd A4 = (I - tau * L * C) * (-L) * (I - tau * C * L);
    const GridFn ay = apply_operator({OperatorTag::A4}, p, y);
    EXPECT_LT(dense_err(ay, A4 * interior_vec(y)), 1e-12);
    const GridFn az = apply_operator({OperatorTag::A4}, p, z);
    EXPECT_NEAR(inner_product_h(ay, z), inner_product_h(y, az), 1e-10 * norm_h(ay) * norm_h(z));
    // (A4 y, y) = (-L z, z) with z = (I - tau c^2 L) y
    GridFn zz = y;
    const GridFn ly = apply_Lh(y);
    for (std::size_t i = 0; i < zz.size(); ++i) zz[i] -= tau / rho[i] * ly[i];
    zz.zero_boundary();
    EXPECT_NEAR(inner_product_h(ay, y), -inner_product_h(apply_Lh(zz), zz),
                1e-11 * inner_product_h(ay, y));
    EXPECT_GT(inner_product_h(ay, y), 0.0);
}

TEST(Properties, SymmetryOfAllOperators) {
    const Mesh m = make_uniform_mesh({1.0, 1.3, 0.9}, {5, 6, 4}, 1.0, 2);
    OperatorParams p;
    p.a = kSpeeds3;
    p.beta = 1.2;
    p.gamma = 0.5;
    p.theta = 0.5;
    const GridFn w = test::random_fn(m, 17), z = test::random_fn(m, 18);
    for (auto tag : {OperatorTag::Delta_h, OperatorTag::sN, OperatorTag::sbarN, OperatorTag::sN_beta,
                     OperatorTag::sN_beta_gamma, OperatorTag::AN, OperatorTag::AbarN,
                     OperatorTag::AN_theta, OperatorTag::Lh}) {
        const double a = inner_product_h(apply_operator({tag}, p, w), z);
        const double b = inner_product_h(w, apply_operator({tag}, p, z));
        EXPECT_NEAR(a, b, 1e-11 * (std::abs(a) + 1.0)) << tag_name(tag);
    }
}

TEST(Properties, SbarNRayleighQuotientBounds) {
    for (int n = 1; n <= 3; ++n) {
        std::vector<double> ext(n, 1.0);
        std::vector<int> cnt(n, 6);
        const Mesh m = make_uniform_mesh(ext, cnt, 1.0, 2);
        for (unsigned seed = 0; seed < 20; ++seed) {
            const GridFn w = test::random_fn(m, 100 + seed);
            const double q = inner_product_h(apply_operator({OperatorTag::sbarN}, {}, w), w) /
                             inner_product_h(w, w);
            EXPECT_GT(q, std::pow(2.0 / 3.0, n));
            EXPECT_LT(q, 1.0);
        }
    }
}

TEST(Properties, SchemePairsCommute) {
    const Mesh m = make_uniform_mesh({1.0, 1.1, 0.9}, {6, 5, 7}, 1.0, 2);
    OperatorParams p;
    p.a = kSpeeds3;
    p.beta = 1.0;
    p.gamma = 1.0;
    p.theta = 0.0;
    const GridFn w = test::random_fn(m, 19);
    const std::vector<std::pair<OperatorTag, OperatorTag>> pairs = {
        {OperatorTag::sN, OperatorTag::AN},
        {OperatorTag::sbarN, OperatorTag::AN},
        {OperatorTag::sbarN, OperatorTag::AbarN},
        {OperatorTag::sN_beta_gamma, OperatorTag::AN_theta}};
    for (auto [b, a] : pairs) {
        const GridFn ba = apply_operator({b}, p, apply_operator({a}, p, w));
        const GridFn ab = apply_operator({a}, p, apply_operator({b}, p, w));
        EXPECT_LE(norm_h(ba - ab), 1e-12 * norm_h(ba)) << tag_name(b) << "," << tag_name(a);
    }
}

TEST(Properties, LowerBoundOfA) {
    const std::vector<double> a3{1.0, 1.4, 0.8};
    auto check = [&](const Mesh& m, OperatorId id, OperatorParams p, double eps2) {
        const double amin = *std::min_element(p.a.begin(), p.a.end());
        for (unsigned seed = 0; seed < 10; ++seed) {
            const GridFn w = test::random_fn(m, 200 + seed);
            const double lhs = eps2 * amin * amin * std::pow(2.0 / 3.0, m.dim - 1) *
                               -inner_product_h(apply_operator({OperatorTag::Delta_h}, p, w), w);
            const double rhs = inner_product_h(apply_operator(id, p, w), w);
            EXPECT_LE(lhs, rhs * (1 + 1e-12)) << tag_name(id.tag);
        }
    };
    const Mesh m2 = make_uniform_mesh({1.0, 1.0}, {8, 7}, 1.0, 2);
    OperatorParams p2;
    p2.a = {1.0, 1.4};
    check(m2, {OperatorTag::AN}, p2, 1.0);
    const Mesh m3 = make_uniform_mesh({1.0, 1.0, 1.0}, {6, 5, 7}, 1.0, 2);
    OperatorParams p3;
    p3.a = a3;
    check(m3, {OperatorTag::AbarN}, p3, 1.0);
    p3.theta = 0.5;
    check(m3, {OperatorTag::AN_theta}, p3, 0.5);
}
