#pragma once

// Independent oracles for the unit tests: dense matrices over the interior
// nodes built from Kronecker products, and a direct-summation sine transform.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>

#include "cwave/grid.hpp"

namespace cwave::test {

inline GridFn random_fn(const Mesh& m, unsigned seed, bool zero_boundary = true) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    GridFn g(m);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = u(rng);
    if (zero_boundary) g.zero_boundary();
    return g;
}

inline Eigen::VectorXd interior_vec(const GridFn& g) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(g.mesh().interior_count()));
    Eigen::Index n = 0;
    for_each_interior(g.mesh(), [&](std::size_t i) { v[n++] = g[i]; });
    return v;
}

inline GridFn from_interior(const Mesh& m, const Eigen::VectorXd& v) {
    GridFn g(m);
    Eigen::Index n = 0;
    for_each_interior(m, [&](std::size_t i) { g[i] = v[n++]; });
    return g;
}

inline Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd r(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            r.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return r;
}

/// 1D second difference on n-1 interior nodes with zero Dirichlet ends.
inline Eigen::MatrixXd lambda_1d(int N, double h) {
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(N - 1, N - 1);
    for (int i = 0; i < N - 1; ++i) {
        L(i, i) = -2.0 / (h * h);
        if (i > 0) L(i, i - 1) = 1.0 / (h * h);
        if (i + 1 < N - 1) L(i, i + 1) = 1.0 / (h * h);
    }
    return L;
}

/// Dense Lambda_k on the full interior, C order (last axis fastest).
inline Eigen::MatrixXd dense_lambda(const Mesh& m, int k) {
    Eigen::MatrixXd r = Eigen::MatrixXd::Identity(1, 1);
    for (int a = 0; a < m.dim; ++a) {
        const Eigen::MatrixXd f = a == k ? lambda_1d(m.count[a], m.step[a])
                                         : Eigen::MatrixXd::Identity(m.count[a] - 1, m.count[a] - 1);
        r = kron(r, f);
    }
    return r;
}

inline Eigen::MatrixXd dense_identity(const Mesh& m) {
    const auto n = static_cast<Eigen::Index>(m.interior_count());
    return Eigen::MatrixXd::Identity(n, n);
}

inline Eigen::MatrixXd dense_skN(const Mesh& m, int k) {
    return dense_identity(m) + m.step[k] * m.step[k] / 12.0 * dense_lambda(m, k);
}

/// Direct summation of the unitary sine transform: O(N^2) per axis product.
inline std::vector<double> direct_dst(const GridFn& g) {
    const Mesh& m = g.mesh();
    std::vector<double> out;
    std::array<int, kMaxDim> hi{1, 1, 1};
    for (int k = 0; k < m.dim; ++k) hi[k] = m.count[k] - 1;
    std::array<int, kMaxDim> j{1, 1, 1};
    for (j[0] = 1; j[0] <= hi[0]; ++j[0])
        for (j[1] = 1; j[1] <= hi[1]; ++j[1])
            for (j[2] = 1; j[2] <= hi[2]; ++j[2]) {
                double s = 0.0;
                for_each_interior(m, [&](std::size_t flat) {
                    const Index i = m.unflat(flat);
                    double b = 1.0;
                    for (int k = 0; k < m.dim; ++k)
                        b *= std::sqrt(2.0 / m.count[k]) *
                             std::sin(i[k] * j[k] * std::numbers::pi / m.count[k]);
                    s += g[flat] * b;
                });
                out.push_back(s);
            }
    return out;
}

/// Dense matrix of an H_h operator, built column by column from unit vectors.
template <class Op>
Eigen::MatrixXd dense_of(const Mesh& m, Op&& op) {
    const auto n = static_cast<Eigen::Index>(m.interior_count());
    Eigen::MatrixXd A(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
        e[j] = 1.0;
        A.col(j) = interior_vec(op(from_interior(m, e)));
    }
    return A;
}

/// LU solve of K w = b through the dense matrix of K.
template <class Op>
GridFn dense_solve(Op&& K, const GridFn& b) {
    const Eigen::MatrixXd A = dense_of(b.mesh(), K);
    return from_interior(b.mesh(), A.partialPivLu().solve(interior_vec(b)));
}

inline double rel_diff(const GridFn& a, const GridFn& b) {
    GridFn d = a - b;
    const double nb = max_norm(b);
    return max_norm(d) / (nb > 0 ? nb : 1.0);
}

} // namespace cwave::test
