#pragma once

// Uniform rectangular meshes and real-valued grid functions on them.
//
// Grid functions store every node of the closed mesh, boundary included, in
// C order (last axis fastest). The Euclidean space H_h is the subset with
// zero boundary values; membership is a predicate, not a separate type.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace cwave {

inline constexpr int kMaxDim = 3;

using Point = std::array<double, kMaxDim>;
using Index = std::array<int, kMaxDim>;

/// Spatial box [0,X_1]x...x[0,X_n] split into N_k cells per axis, plus the
/// uniform time axis t_m = m*h_t, m = 0..M.
struct Mesh {
    int dim = 0;
    std::array<double, kMaxDim> extent{};
    std::array<int, kMaxDim> count{};
    std::array<double, kMaxDim> step{};
    double T = 0.0;
    int M = 0;
    double ht = 0.0;

    [[nodiscard]] int nodes_along(int k) const { return count[k] + 1; }

    [[nodiscard]] std::size_t node_count() const {
        std::size_t n = 1;
        for (int k = 0; k < dim; ++k) n *= static_cast<std::size_t>(count[k] + 1);
        return n;
    }

    [[nodiscard]] std::size_t interior_count() const {
        std::size_t n = 1;
        for (int k = 0; k < dim; ++k) n *= static_cast<std::size_t>(count[k] - 1);
        return n;
    }

    /// Distance between consecutive entries along axis k in the value array.
    [[nodiscard]] std::size_t stride(int k) const {
        std::size_t s = 1;
        for (int i = k + 1; i < dim; ++i) s *= static_cast<std::size_t>(count[i] + 1);
        return s;
    }

    /// Product of the spatial steps (the weight of the discrete inner product).
    [[nodiscard]] double cell_volume() const {
        double v = 1.0;
        for (int k = 0; k < dim; ++k) v *= step[k];
        return v;
    }

    [[nodiscard]] double time(int m) const { return m * ht; }

    [[nodiscard]] bool same_space(const Mesh& o) const {
        return dim == o.dim && std::equal(count.begin(), count.begin() + dim, o.count.begin()) &&
               std::equal(extent.begin(), extent.begin() + dim, o.extent.begin());
    }

    [[nodiscard]] std::size_t flat(const Index& i) const {
        std::size_t idx = 0;
        for (int k = 0; k < dim; ++k) idx = idx * static_cast<std::size_t>(count[k] + 1) + i[k];
        return idx;
    }

    [[nodiscard]] Index unflat(std::size_t idx) const {
        Index i{};
        for (int k = dim - 1; k >= 0; --k) {
            const auto n = static_cast<std::size_t>(count[k] + 1);
            i[k] = static_cast<int>(idx % n);
            idx /= n;
        }
        return i;
    }

    [[nodiscard]] Point coord(const Index& i) const {
        Point x{};
        for (int k = 0; k < dim; ++k) x[k] = i[k] * step[k];
        return x;
    }

    [[nodiscard]] bool on_boundary(const Index& i) const {
        for (int k = 0; k < dim; ++k)
            if (i[k] == 0 || i[k] == count[k]) return true;
        return false;
    }
};

inline Mesh make_uniform_mesh(std::span<const double> extents, std::span<const int> counts,
                              double T, int M) {
    CWAVE_REQUIRE(!extents.empty() && extents.size() <= kMaxDim, std::invalid_argument,
                  "mesh dimension must be 1..3");
    CWAVE_REQUIRE(extents.size() == counts.size(), std::invalid_argument,
                  "extents and counts differ in length");
    CWAVE_REQUIRE(T > 0.0, std::invalid_argument, "final time must be positive");
    CWAVE_REQUIRE(M >= 2, std::invalid_argument, "need at least two time steps");
    Mesh mesh;
    mesh.dim = static_cast<int>(extents.size());
    for (int k = 0; k < mesh.dim; ++k) {
        CWAVE_REQUIRE(extents[k] > 0.0, std::invalid_argument, "extent must be positive");
        CWAVE_REQUIRE(counts[k] >= 2, std::invalid_argument,
                      "need at least two cells per axis");
        mesh.extent[k] = extents[k];
        mesh.count[k] = counts[k];
        mesh.step[k] = extents[k] / counts[k];
    }
    mesh.T = T;
    mesh.M = M;
    mesh.ht = T / M;
    return mesh;
}

inline Mesh make_uniform_mesh(std::initializer_list<double> extents,
                              std::initializer_list<int> counts, double T, int M) {
    return make_uniform_mesh(std::span<const double>(extents.begin(), extents.size()),
                             std::span<const int>(counts.begin(), counts.size()), T, M);
}

/// Same spatial mesh with a different time axis.
inline Mesh with_time_axis(Mesh mesh, double T, int M) {
    CWAVE_REQUIRE(T > 0.0 && M >= 2, std::invalid_argument, "bad time axis");
    mesh.T = T;
    mesh.M = M;
    mesh.ht = T / M;
    return mesh;
}

/// For every grid line along `axis`, calls fn(flat index of its first node, stride).
template <class Fn>
void for_each_line(const Mesh& mesh, int axis, Fn&& fn) {
    const std::size_t inner = mesh.stride(axis);
    const std::size_t n = static_cast<std::size_t>(mesh.count[axis] + 1);
    const std::size_t outer = mesh.node_count() / (inner * n);
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t q = 0; q < inner; ++q) fn(o * n * inner + q, inner);
}

/// Visits the flat index of every interior node.
template <class Fn>
void for_each_interior(const Mesh& mesh, Fn&& fn) {
    std::array<int, kMaxDim> lo{0, 0, 0}, hi{0, 0, 0};
    std::array<std::size_t, kMaxDim> st{0, 0, 0};
    const int pad = kMaxDim - mesh.dim;
    for (int k = 0; k < mesh.dim; ++k) {
        lo[pad + k] = 1;
        hi[pad + k] = mesh.count[k] - 1;
        st[pad + k] = mesh.stride(k);
    }
    for (int a = lo[0]; a <= hi[0]; ++a)
        for (int b = lo[1]; b <= hi[1]; ++b) {
            const std::size_t base = a * st[0] + b * st[1];
            for (int c = lo[2]; c <= hi[2]; ++c) fn(base + c * st[2]);
        }
}

/// Real function on the closed mesh.
class GridFn {
  public:
    GridFn() = default;
    explicit GridFn(const Mesh& mesh, double fill = 0.0)
        : mesh_(mesh), v_(mesh.node_count(), fill) {}

    [[nodiscard]] const Mesh& mesh() const { return mesh_; }
    [[nodiscard]] std::size_t size() const { return v_.size(); }
    [[nodiscard]] std::span<double> values() { return v_; }
    [[nodiscard]] std::span<const double> values() const { return v_; }
    [[nodiscard]] double* data() { return v_.data(); }
    [[nodiscard]] const double* data() const { return v_.data(); }

    double& operator[](std::size_t i) { return v_[i]; }
    double operator[](std::size_t i) const { return v_[i]; }
    double& at(const Index& i) { return v_[mesh_.flat(i)]; }
    [[nodiscard]] double at(const Index& i) const { return v_[mesh_.flat(i)]; }

    void fill(double x) { std::fill(v_.begin(), v_.end(), x); }

    /// Sets every boundary node to zero, producing an element of H_h.
    void zero_boundary() { set_boundary([](std::size_t) { return 0.0; }); }

    /// Sets boundary node values from fn(flat index).
    template <class Fn>
    void set_boundary(Fn&& fn) {
        for (int k = 0; k < mesh_.dim; ++k) {
            const std::size_t last = static_cast<std::size_t>(mesh_.count[k]);
            for_each_line(mesh_, k, [&](std::size_t start, std::size_t st) {
                v_[start] = fn(start);
                v_[start + last * st] = fn(start + last * st);
            });
        }
    }

    [[nodiscard]] bool in_Hh(double tol = 0.0) const {
        bool ok = true;
        visit_boundary_const([&](std::size_t i) {
            if (std::abs(v_[i]) > tol) ok = false;
        });
        return ok;
    }

    /// Copy of this function with boundary values only (interior zeroed).
    [[nodiscard]] GridFn boundary_part() const {
        GridFn b(mesh_);
        visit_boundary_const([&](std::size_t i) { b.v_[i] = v_[i]; });
        return b;
    }

    GridFn& operator+=(const GridFn& o) {
        check_same(o);
        for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
        return *this;
    }
    GridFn& operator-=(const GridFn& o) {
        check_same(o);
        for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
        return *this;
    }
    GridFn& operator*=(double s) {
        for (double& x : v_) x *= s;
        return *this;
    }
    /// this += a * x
    GridFn& axpy(double a, const GridFn& x) {
        check_same(x);
        for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += a * x.v_[i];
        return *this;
    }

    friend GridFn operator+(GridFn a, const GridFn& b) { return a += b; }
    friend GridFn operator-(GridFn a, const GridFn& b) { return a -= b; }
    friend GridFn operator*(double s, GridFn a) { return a *= s; }

    void check_same(const GridFn& o) const {
        CWAVE_REQUIRE(mesh_.same_space(o.mesh_) && v_.size() == o.v_.size(),
                      std::invalid_argument, "grid functions live on different meshes");
    }

  private:
    template <class Fn>
    void visit_boundary_const(Fn&& fn) const {
        for (int k = 0; k < mesh_.dim; ++k) {
            const std::size_t last = static_cast<std::size_t>(mesh_.count[k]);
            for_each_line(mesh_, k, [&](std::size_t start, std::size_t st) {
                fn(start);
                fn(start + last * st);
            });
        }
    }

    Mesh mesh_;
    std::vector<double> v_;
};

/// Pointwise product a*b on all closed-mesh nodes.
inline GridFn pointwise(const GridFn& a, const GridFn& b) {
    a.check_same(b);
    GridFn r(a.mesh());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = a[i] * b[i];
    return r;
}

inline GridFn pointwise_div(const GridFn& a, const GridFn& b) {
    a.check_same(b);
    GridFn r(a.mesh());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = a[i] / b[i];
    return r;
}

using SpaceField = std::function<double(const Point&)>;
using SpaceTimeField = std::function<double(const Point&, double)>;

inline GridFn sample(const SpaceField& fn, const Mesh& mesh) {
    GridFn g(mesh);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = fn(mesh.coord(mesh.unflat(i)));
    return g;
}

inline GridFn sample(const SpaceTimeField& fn, const Mesh& mesh, double t) {
    GridFn g(mesh);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = fn(mesh.coord(mesh.unflat(i)), t);
    return g;
}

/// (u,w)_h = h_1...h_n * sum over interior nodes; boundary values ignored.
inline double inner_product_h(const GridFn& u, const GridFn& w) {
    u.check_same(w);
    double s = 0.0;
    for_each_interior(u.mesh(), [&](std::size_t i) { s += u[i] * w[i]; });
    return s * u.mesh().cell_volume();
}

inline double norm_h(const GridFn& u) { return std::sqrt(inner_product_h(u, u)); }

/// Max |u| over interior nodes.
inline double max_norm(const GridFn& u) {
    double m = 0.0;
    for_each_interior(u.mesh(), [&](std::size_t i) { m = std::max(m, std::abs(u[i])); });
    return m;
}

/// ||sqrt(rho) u||_h^2
inline double rho_norm_sq(const GridFn& rho, const GridFn& u) {
    u.check_same(rho);
    double s = 0.0;
    for_each_interior(u.mesh(), [&](std::size_t i) { s += rho[i] * u[i] * u[i]; });
    return s * u.mesh().cell_volume();
}

/// Minimum over all closed-mesh nodes.
inline double min_value(const GridFn& u) {
    return *std::min_element(u.values().begin(), u.values().end());
}

inline double max_value(const GridFn& u) {
    return *std::max_element(u.values().begin(), u.values().end());
}

} // namespace cwave
