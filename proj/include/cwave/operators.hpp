#pragma once

// Spatial difference operators and Numerov-type averages on uniform meshes.
//
// Every constant-coefficient operator used by the compact schemes is a
// multilinear polynomial in the second differences Lambda_1..Lambda_n (each
// axis appears at most once per monomial), so it is stored as 2^n
// coefficients indexed by axis bitmask. Application evaluates the monomials
// as full stencils: Lambda_k is applied at every node whose k-th index is
// interior, so products such as Lambda_1 Lambda_2 read the corner and edge
// boundary values exactly like the 9-point stencil. Results always carry a
// zero boundary.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grid.hpp"

namespace cwave {

/// Lambda_k w at nodes whose k-th index is interior, zero where it is not.
inline GridFn apply_lambda_axis(const GridFn& w, int k) {
    const Mesh& mesh = w.mesh();
    GridFn r(mesh);
    const std::size_t inner = mesh.stride(k);
    const std::size_t n = static_cast<std::size_t>(mesh.count[k] + 1);
    const std::size_t outer = mesh.node_count() / (inner * n);
    const double inv_h2 = 1.0 / (mesh.step[k] * mesh.step[k]);
    const double* in = w.data();
    double* out = r.data();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const std::size_t base = (o * n + i) * inner;
            for (std::size_t q = 0; q < inner; ++q) {
                const std::size_t c = base + q;
                out[c] = (in[c + inner] - 2.0 * in[c] + in[c - inner]) * inv_h2;
            }
        }
    return r;
}

/// Eigenvalue of Lambda_k on sin(j pi x_k / X_k).
inline double lambda_symbol(const Mesh& mesh, int k, int j) {
    const double s = std::sin(j * std::numbers::pi / (2.0 * mesh.count[k]));
    return -4.0 / (mesh.step[k] * mesh.step[k]) * s * s;
}

/// sum_S c_S prod_{k in S} Lambda_k, S ranging over subsets of the axes.
class PolyOperator {
  public:
    static constexpr int kTerms = 1 << kMaxDim;

    PolyOperator() = default;
    explicit PolyOperator(int dim) : dim_(dim) {}

    static PolyOperator identity(int dim, double c = 1.0) {
        PolyOperator p(dim);
        p.c_[0] = c;
        return p;
    }
    static PolyOperator lambda(int dim, int k, double c = 1.0) {
        PolyOperator p(dim);
        p.c_[1u << k] = c;
        return p;
    }

    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] double coeff(unsigned mask) const { return c_[mask]; }
    void set_coeff(unsigned mask, double c) { c_[mask] = c; }

    PolyOperator& operator+=(const PolyOperator& o) {
        for (int s = 0; s < kTerms; ++s) c_[s] += o.c_[s];
        return *this;
    }
    PolyOperator& operator*=(double a) {
        for (double& c : c_) c *= a;
        return *this;
    }
    friend PolyOperator operator+(PolyOperator a, const PolyOperator& b) { return a += b; }
    friend PolyOperator operator-(PolyOperator a, PolyOperator b) { return a += (b *= -1.0); }
    friend PolyOperator operator*(double s, PolyOperator a) { return a *= s; }

    /// Product of two operators whose monomials act on disjoint axes.
    friend PolyOperator operator*(const PolyOperator& a, const PolyOperator& b) {
        PolyOperator p(std::max(a.dim_, b.dim_));
        for (unsigned s = 0; s < kTerms; ++s) {
            if (a.c_[s] == 0.0) continue;
            for (unsigned t = 0; t < kTerms; ++t) {
                if (b.c_[t] == 0.0) continue;
                CWAVE_REQUIRE((s & t) == 0u, InternalError,
                              "operator product leaves the multilinear class");
                p.c_[s | t] += a.c_[s] * b.c_[t];
            }
        }
        return p;
    }

    /// Eigenvalue on the sine mode whose per-axis Lambda eigenvalues are mu.
    [[nodiscard]] double symbol(const std::array<double, kMaxDim>& mu) const {
        double total = 0.0;
        for (unsigned s = 0; s < kTerms; ++s) {
            if (c_[s] == 0.0) continue;
            double term = c_[s];
            for (int k = 0; k < dim_; ++k)
                if (s & (1u << k)) term *= mu[k];
            total += term;
        }
        return total;
    }

    [[nodiscard]] GridFn apply(const GridFn& w) const {
        CWAVE_REQUIRE(w.mesh().dim == dim_, std::invalid_argument,
                      "operator and grid function dimensions differ");
        const unsigned n_terms = 1u << dim_;
        // products[s] = prod_{k in s} Lambda_k w, built from the subset without
        // its highest axis
        std::vector<GridFn> products(n_terms);
        std::vector<bool> needed(n_terms, false);
        for (unsigned s = n_terms; s-- > 1;) {
            if (c_[s] == 0.0 && !needed[s]) continue;
            needed[s] = true;
            needed[s & ~(1u << (std::bit_width(s) - 1))] = true;
        }
        needed[0] = needed[0] || c_[0] != 0.0;
        GridFn r(w.mesh());
        for (unsigned s = 0; s < n_terms; ++s) {
            if (!needed[s]) continue;
            if (s == 0) {
                products[0] = w;
            } else {
                const int top = std::bit_width(s) - 1;
                const unsigned rest = s & ~(1u << top);
                products[s] = apply_lambda_axis(products[rest], top);
            }
            if (c_[s] != 0.0) r.axpy(c_[s], products[s]);
        }
        r.zero_boundary();
        return r;
    }

  private:
    int dim_ = 0;
    std::array<double, kTerms> c_{};
};

// ---------------------------------------------------------------------------
// Named operators.

namespace ops {

inline PolyOperator lambda(const Mesh& m, int k) { return PolyOperator::lambda(m.dim, k); }

inline PolyOperator delta_h(const Mesh& m) {
    PolyOperator p(m.dim);
    for (int k = 0; k < m.dim; ++k) p += PolyOperator::lambda(m.dim, k);
    return p;
}

/// s_kN = I + h_k^2/12 Lambda_k
inline PolyOperator skN(const Mesh& m, int k) {
    return PolyOperator::identity(m.dim) +
           PolyOperator::lambda(m.dim, k, m.step[k] * m.step[k] / 12.0);
}

/// s_N = I + sum_k h_k^2/12 Lambda_k
inline PolyOperator sN(const Mesh& m) {
    PolyOperator p = PolyOperator::identity(m.dim);
    for (int k = 0; k < m.dim; ++k) p += PolyOperator::lambda(m.dim, k, m.step[k] * m.step[k] / 12.0);
    return p;
}

/// s_N with direction j omitted.
inline PolyOperator sN_hat(const Mesh& m, int j) {
    PolyOperator p = PolyOperator::identity(m.dim);
    for (int k = 0; k < m.dim; ++k)
        if (k != j) p += PolyOperator::lambda(m.dim, k, m.step[k] * m.step[k] / 12.0);
    return p;
}

/// Product of s_kN over all axes except `skip` (pass -1 to keep all).
inline PolyOperator sbarN_except(const Mesh& m, int skip) {
    PolyOperator p = PolyOperator::identity(m.dim);
    for (int k = 0; k < m.dim; ++k)
        if (k != skip) p = p * skN(m, k);
    return p;
}

inline PolyOperator sbarN(const Mesh& m) { return sbarN_except(m, -1); }
inline PolyOperator sbarN_hat(const Mesh& m, int l) { return sbarN_except(m, l); }

/// Degree-k part of sbar_N: (1/12)^k sum over k-subsets of h^2 Lambda products.
inline PolyOperator sbarN_order(const Mesh& m, int order) {
    PolyOperator full = sbarN(m);
    PolyOperator p(m.dim);
    for (unsigned s = 0; s < PolyOperator::kTerms; ++s)
        if (std::popcount(s) == order) p.set_coeff(s, full.coeff(s));
    return p;
}

/// s_N + beta sbar^(2) + gamma sbar^(3); beta = gamma = 1 gives sbar_N.
inline PolyOperator sN_beta_gamma(const Mesh& m, double beta, double gamma) {
    PolyOperator p = sN(m) + beta * sbarN_order(m, 2);
    if (m.dim >= 3) p += gamma * sbarN_order(m, 3);
    return p;
}

inline PolyOperator sN_beta(const Mesh& m, double beta) { return sN_beta_gamma(m, beta, 0.0); }

/// A_N = -sum_k a_k^2 s_{N,hat k} Lambda_k
inline PolyOperator AN(const Mesh& m, std::span<const double> a) {
    PolyOperator p(m.dim);
    for (int k = 0; k < m.dim; ++k) p += (-a[k] * a[k]) * (sN_hat(m, k) * lambda(m, k));
    return p;
}

/// Abar_N = -sum_k a_k^2 sbar_{N,hat k} Lambda_k
inline PolyOperator AbarN(const Mesh& m, std::span<const double> a) {
    PolyOperator p(m.dim);
    for (int k = 0; k < m.dim; ++k) p += (-a[k] * a[k]) * (sbarN_hat(m, k) * lambda(m, k));
    return p;
}

/// Abar_N^(3): the triple-product part of Abar_N (zero unless n = 3).
inline PolyOperator AbarN3(const Mesh& m, std::span<const double> a) {
    PolyOperator full = AbarN(m, a);
    PolyOperator p(m.dim);
    if (m.dim == 3) p.set_coeff(7u, full.coeff(7u));
    return p;
}

/// A_N + theta Abar_N^(3)
inline PolyOperator AN_theta(const Mesh& m, std::span<const double> a, double theta) {
    return AN(m, a) + theta * AbarN3(m, a);
}

} // namespace ops

// ---------------------------------------------------------------------------
// Tridiagonal inverses of s_kN along grid lines.

/// Thomas factors for the constant (1, 10, 1)/12 matrix of size n.
class SkNFactors {
  public:
    explicit SkNFactors(int n) : cp_(n), inv_den_(n) {
        constexpr double a = 1.0 / 12.0, b = 10.0 / 12.0;
        double prev = 0.0;
        for (int i = 0; i < n; ++i) {
            const double den = b - a * prev;
            CWAVE_REQUIRE(std::abs(den) > 1e-300, InternalError, "singular s_kN factorization");
            inv_den_[i] = 1.0 / den;
            cp_[i] = a * inv_den_[i];
            prev = cp_[i];
        }
    }
    [[nodiscard]] int size() const { return static_cast<int>(cp_.size()); }
    [[nodiscard]] double cp(int i) const { return cp_[i]; }
    [[nodiscard]] double inv_den(int i) const { return inv_den_[i]; }

  private:
    std::vector<double> cp_, inv_den_;
};

/// z with s_kN z = w on every interior line along axis k (zero Dirichlet ends).
/// Lines through boundary nodes of other axes are solved as well; the result
/// boundary is zeroed.
inline GridFn solve_skN_lines(int k, const GridFn& w) {
    const Mesh& mesh = w.mesh();
    CWAVE_REQUIRE(k >= 0 && k < mesh.dim, std::invalid_argument, "axis out of range");
    const int n_int = mesh.count[k] - 1;
    const SkNFactors f(n_int);
    constexpr double a = 1.0 / 12.0;
    GridFn z(mesh);
    const std::size_t inner = mesh.stride(k);
    const std::size_t n = static_cast<std::size_t>(mesh.count[k] + 1);
    const std::size_t outer = mesh.node_count() / (inner * n);
    const double* in = w.data();
    double* out = z.data();
    for (std::size_t o = 0; o < outer; ++o) {
        const std::size_t line0 = o * n * inner;
        // forward sweep, node i = l + 1
        for (int l = 0; l < n_int; ++l) {
            const std::size_t base = line0 + static_cast<std::size_t>(l + 1) * inner;
            const double inv = f.inv_den(l);
            if (l == 0) {
                for (std::size_t q = 0; q < inner; ++q) out[base + q] = in[base + q] * inv;
            } else {
                for (std::size_t q = 0; q < inner; ++q)
                    out[base + q] = (in[base + q] - a * out[base - inner + q]) * inv;
            }
        }
        for (int l = n_int - 2; l >= 0; --l) {
            const std::size_t base = line0 + static_cast<std::size_t>(l + 1) * inner;
            const double cp = f.cp(l);
            for (std::size_t q = 0; q < inner; ++q) out[base + q] -= cp * out[base + inner + q];
        }
    }
    z.zero_boundary();
    return z;
}

/// L_h = sum_k s_kN^{-1} Lambda_k on H_h (input boundary treated as zero).
inline GridFn apply_Lh(const GridFn& w) {
    GridFn wh = w;
    wh.zero_boundary();
    GridFn r(w.mesh());
    for (int k = 0; k < w.mesh().dim; ++k) r += solve_skN_lines(k, apply_lambda_axis(wh, k));
    r.zero_boundary();
    return r;
}

inline double Lh_symbol(const Mesh& mesh, const std::array<int, kMaxDim>& j) {
    double s = 0.0;
    for (int k = 0; k < mesh.dim; ++k) {
        const double mu = lambda_symbol(mesh, k, j[k]);
        s += mu / (1.0 + mesh.step[k] * mesh.step[k] * mu / 12.0);
    }
    return s;
}

/// [I - tau L_h(c^2 .)](-L_h)(I - tau c^2 L_h) y with tau = h_t^2/12, evaluated
/// factor by factor in exactly this order.
inline GridFn apply_A4(const GridFn& csq, double ht, const GridFn& y) {
    const double tau = ht * ht / 12.0;
    GridFn z = y;
    z.zero_boundary();
    const GridFn ly = apply_Lh(z);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] -= tau * csq[i] * ly[i];
    GridFn q = apply_Lh(z);
    q *= -1.0;
    GridFn r = q;
    const GridFn lq = apply_Lh(pointwise(csq, q));
    r.axpy(-tau, lq);
    r.zero_boundary();
    return r;
}

/// [I - tau L_h(c^2 .)] w, the operator applied to the data of the
/// unconditionally stable variant.
inline GridFn apply_U4_data_operator(const GridFn& csq, double ht, const GridFn& w) {
    const double tau = ht * ht / 12.0;
    GridFn wh = w;
    wh.zero_boundary();
    GridFn r = wh;
    r.axpy(-tau, apply_Lh(pointwise(csq, wh)));
    r.zero_boundary();
    return r;
}

// ---------------------------------------------------------------------------
// Tag-based interface.

enum class OperatorTag {
    Identity,
    Lambda_k,
    Delta_h,
    sN,
    skN,
    sN_hat_j,
    sbarN,
    sbarN_hat_l,
    sN_beta,
    sN_beta_gamma,
    AN,
    AbarN,
    AN_theta,
    Lh,
    A4,
};

struct OperatorId {
    OperatorTag tag = OperatorTag::Identity;
    int axis = -1; // k, j or l for the per-axis tags
};

struct OperatorParams {
    std::vector<double> a;           // wave-speed constants a_k
    std::optional<double> beta;      // sN_beta, sN_beta_gamma
    std::optional<double> gamma;     // sN_beta_gamma
    std::optional<double> theta;     // AN_theta
    std::optional<GridFn> rho;       // coefficient rho(x); c^2 = 1/rho when csq is absent
    std::optional<GridFn> csq;       // c^2 for A4
    std::optional<double> ht;        // A4 only
    double eps1 = 1.0;               // lower bound for beta in 3D (stability constant)
};

inline std::string tag_name(OperatorTag t) {
    switch (t) {
    case OperatorTag::Identity: return "Identity";
    case OperatorTag::Lambda_k: return "Lambda_k";
    case OperatorTag::Delta_h: return "Delta_h";
    case OperatorTag::sN: return "sN";
    case OperatorTag::skN: return "skN";
    case OperatorTag::sN_hat_j: return "sN_hat_j";
    case OperatorTag::sbarN: return "sbarN";
    case OperatorTag::sbarN_hat_l: return "sbarN_hat_l";
    case OperatorTag::sN_beta: return "sN_beta";
    case OperatorTag::sN_beta_gamma: return "sN_beta_gamma";
    case OperatorTag::AN: return "AN";
    case OperatorTag::AbarN: return "AbarN";
    case OperatorTag::AN_theta: return "AN_theta";
    case OperatorTag::Lh: return "Lh";
    case OperatorTag::A4: return "A4";
    }
    return "?";
}

namespace detail {

inline std::vector<double> speeds_or_ones(const OperatorParams& p, int dim) {
    if (p.a.empty()) return std::vector<double>(dim, 1.0);
    CWAVE_REQUIRE(static_cast<int>(p.a.size()) == dim, std::invalid_argument,
                  "need one wave-speed constant per axis");
    for (double ak : p.a) CWAVE_REQUIRE(ak > 0.0, std::invalid_argument, "a_k must be positive");
    return p.a;
}

inline void require_axis(const OperatorId& id, const Mesh& m) {
    CWAVE_REQUIRE(id.axis >= 0 && id.axis < m.dim, std::invalid_argument,
                  tag_name(id.tag) + " needs an axis index in [0, n)");
}

inline GridFn csq_of(const OperatorParams& p) {
    if (p.csq) {
        CWAVE_REQUIRE(min_value(*p.csq) > 0.0, std::invalid_argument, "c^2 must be positive");
        return *p.csq;
    }
    CWAVE_REQUIRE(p.rho.has_value(), std::invalid_argument, "A4 needs rho or csq");
    CWAVE_REQUIRE(min_value(*p.rho) > 0.0, std::invalid_argument, "rho must be positive");
    GridFn c(p.rho->mesh());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = 1.0 / (*p.rho)[i];
    return c;
}

} // namespace detail

/// The polynomial form of every multilinear tag; nullopt for Lh and A4.
inline std::optional<PolyOperator> poly_of(const OperatorId& id, const OperatorParams& p,
                                           const Mesh& m) {
    switch (id.tag) {
    case OperatorTag::Identity: return PolyOperator::identity(m.dim);
    case OperatorTag::Lambda_k: detail::require_axis(id, m); return ops::lambda(m, id.axis);
    case OperatorTag::Delta_h: return ops::delta_h(m);
    case OperatorTag::sN: return ops::sN(m);
    case OperatorTag::skN: detail::require_axis(id, m); return ops::skN(m, id.axis);
    case OperatorTag::sN_hat_j: detail::require_axis(id, m); return ops::sN_hat(m, id.axis);
    case OperatorTag::sbarN: return ops::sbarN(m);
    case OperatorTag::sbarN_hat_l: detail::require_axis(id, m); return ops::sbarN_hat(m, id.axis);
    case OperatorTag::sN_beta:
        CWAVE_REQUIRE(p.beta.has_value(), std::invalid_argument, "sN_beta needs beta");
        return ops::sN_beta(m, *p.beta);
    case OperatorTag::sN_beta_gamma:
        CWAVE_REQUIRE(p.beta && p.gamma, std::invalid_argument, "sN_beta_gamma needs beta, gamma");
        return ops::sN_beta_gamma(m, *p.beta, *p.gamma);
    case OperatorTag::AN: return ops::AN(m, detail::speeds_or_ones(p, m.dim));
    case OperatorTag::AbarN: return ops::AbarN(m, detail::speeds_or_ones(p, m.dim));
    case OperatorTag::AN_theta:
        CWAVE_REQUIRE(p.theta.has_value(), std::invalid_argument, "AN_theta needs theta");
        return ops::AN_theta(m, detail::speeds_or_ones(p, m.dim), *p.theta);
    case OperatorTag::Lh:
    case OperatorTag::A4: return std::nullopt;
    }
    return std::nullopt;
}

inline GridFn apply_operator(const OperatorId& id, const OperatorParams& p, const GridFn& w) {
    if (p.rho) CWAVE_REQUIRE(min_value(*p.rho) > 0.0, std::invalid_argument, "rho must be positive");
    if (auto poly = poly_of(id, p, w.mesh())) return poly->apply(w);
    if (id.tag == OperatorTag::Lh) return apply_Lh(w);
    CWAVE_REQUIRE(p.ht.has_value(), std::invalid_argument, "A4 needs the time step");
    return apply_A4(detail::csq_of(p), *p.ht, w);
}

/// Eigenvalue of a sine-diagonalizable operator on prod_k sin(j_k pi x_k / X_k).
inline double operator_symbol(const OperatorId& id, const OperatorParams& p, const Mesh& m,
                              const std::array<int, kMaxDim>& j) {
    for (int k = 0; k < m.dim; ++k)
        CWAVE_REQUIRE(j[k] >= 1 && j[k] <= m.count[k] - 1, std::invalid_argument,
                      "mode index out of range");
    std::array<double, kMaxDim> mu{};
    for (int k = 0; k < m.dim; ++k) mu[k] = lambda_symbol(m, k, j[k]);
    if (auto poly = poly_of(id, p, m)) return poly->symbol(mu);
    if (id.tag == OperatorTag::Lh) return Lh_symbol(m, j);
    // A4 is diagonalizable only for constant c^2
    CWAVE_REQUIRE(p.ht.has_value(), std::invalid_argument, "A4 needs the time step");
    const GridFn c = detail::csq_of(p);
    const double c0 = min_value(c), c1 = max_value(c);
    CWAVE_REQUIRE(c1 - c0 <= 1e-14 * std::abs(c1), std::invalid_argument,
                  "A4 with variable c^2 is not diagonalizable");
    const double ell = -Lh_symbol(m, j);
    const double g = 1.0 + (*p.ht) * (*p.ht) / 12.0 * c0 * ell;
    return g * g * ell;
}

} // namespace cwave
