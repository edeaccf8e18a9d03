#pragma once

// Sine-basis diagonalization of the constant-coefficient operators.
//
// The DST-I over the interior nodes is delegated to FFTW (RODFT00, which
// computes 2*sum x_i sin(pi (i+1)(j+1)/N)); the unitary scaling 1/sqrt(2 N_k)
// per axis is applied on our side. Plans are created once per interior shape
// and shared; each call uses its own aligned scratch buffers.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "operators.hpp"

namespace cwave {

namespace detail {

struct FftwFree {
    void operator()(double* p) const { fftw_free(p); }
};
using FftwBuffer = std::unique_ptr<double[], FftwFree>;

inline FftwBuffer fftw_buffer(std::size_t n) {
    auto* p = static_cast<double*>(fftw_malloc(sizeof(double) * std::max<std::size_t>(n, 1)));
    if (p == nullptr) throw std::bad_alloc();
    return FftwBuffer(p);
}

/// Process-wide cache of out-of-place RODFT00 plans keyed by interior shape.
class DstPlanCache {
  public:
    static DstPlanCache& instance() {
        static DstPlanCache cache;
        return cache;
    }

    fftw_plan plan(const std::vector<int>& shape) {
        std::lock_guard lock(mutex_);
        auto it = plans_.find(shape);
        if (it != plans_.end()) return it->second;
        std::size_t n = 1;
        for (int s : shape) n *= static_cast<std::size_t>(s);
        FftwBuffer in = fftw_buffer(n), out = fftw_buffer(n);
        std::vector<fftw_r2r_kind> kinds(shape.size(), FFTW_RODFT00);
        fftw_plan p = fftw_plan_r2r(static_cast<int>(shape.size()), shape.data(), in.get(),
                                    out.get(), kinds.data(), FFTW_ESTIMATE);
        CWAVE_REQUIRE(p != nullptr, InternalError, "FFTW could not create a DST plan");
        plans_.emplace(shape, p);
        return p;
    }

    DstPlanCache(const DstPlanCache&) = delete;
    DstPlanCache& operator=(const DstPlanCache&) = delete;

  private:
    DstPlanCache() = default;
    ~DstPlanCache() {
        for (auto& [shape, p] : plans_) fftw_destroy_plan(p);
    }

    std::mutex mutex_;
    std::map<std::vector<int>, fftw_plan> plans_;
};

inline std::vector<int> interior_shape(const Mesh& m) {
    std::vector<int> s(m.dim);
    for (int k = 0; k < m.dim; ++k) s[k] = m.count[k] - 1;
    return s;
}

inline void gather_interior(const GridFn& w, double* dst) {
    std::size_t n = 0;
    for_each_interior(w.mesh(), [&](std::size_t i) { dst[n++] = w[i]; });
}

inline void scatter_interior(const double* src, GridFn& w) {
    std::size_t n = 0;
    for_each_interior(w.mesh(), [&](std::size_t i) { w[i] = src[n++]; });
}

/// Unitary scale of one forward (or inverse) transform: prod 1/sqrt(2 N_k).
inline double unitary_scale(const Mesh& m) {
    double s = 1.0;
    for (int k = 0; k < m.dim; ++k) s /= std::sqrt(2.0 * m.count[k]);
    return s;
}

/// Raw RODFT00 of the interior of w into out (size interior_count).
inline void raw_dst(const GridFn& w, double* out) {
    const Mesh& m = w.mesh();
    FftwBuffer in = fftw_buffer(m.interior_count());
    gather_interior(w, in.get());
    fftw_execute_r2r(DstPlanCache::instance().plan(interior_shape(m)), in.get(), out);
}

} // namespace detail

/// Coefficients over interior multi-indices j (j_k = 1..N_k-1), C order.
struct SineSpectrum {
    Mesh mesh;
    std::vector<double> coeff;

    [[nodiscard]] std::size_t flat(const std::array<int, kMaxDim>& j) const {
        std::size_t idx = 0;
        for (int k = 0; k < mesh.dim; ++k)
            idx = idx * static_cast<std::size_t>(mesh.count[k] - 1) + (j[k] - 1);
        return idx;
    }
    [[nodiscard]] double at(const std::array<int, kMaxDim>& j) const { return coeff[flat(j)]; }
    double& at(const std::array<int, kMaxDim>& j) { return coeff[flat(j)]; }
};

/// Visits every interior mode as fn(j, flat spectrum index).
template <class Fn>
void for_each_mode(const Mesh& m, Fn&& fn) {
    std::array<int, kMaxDim> hi{1, 1, 1};
    for (int k = 0; k < m.dim; ++k) hi[k] = m.count[k] - 1;
    std::size_t n = 0;
    std::array<int, kMaxDim> j{1, 1, 1};
    for (j[0] = 1; j[0] <= hi[0]; ++j[0])
        for (j[1] = 1; j[1] <= hi[1]; ++j[1])
            for (j[2] = 1; j[2] <= hi[2]; ++j[2]) fn(j, n++);
}

/// w_hat_j = prod_k sqrt(2/N_k) * sum_i w_i prod_k sin(i_k j_k pi / N_k)
inline SineSpectrum dst_forward(const GridFn& w) {
    const Mesh& m = w.mesh();
    SineSpectrum s{m, std::vector<double>(m.interior_count())};
    detail::FftwBuffer out = detail::fftw_buffer(m.interior_count());
    detail::raw_dst(w, out.get());
    const double scale = detail::unitary_scale(m);
    for (std::size_t i = 0; i < s.coeff.size(); ++i) s.coeff[i] = out[i] * scale;
    return s;
}

inline GridFn dst_inverse(const SineSpectrum& s) {
    const Mesh& m = s.mesh;
    const std::size_t n = m.interior_count();
    CWAVE_REQUIRE(s.coeff.size() == n, std::invalid_argument, "spectrum size does not match mesh");
    detail::FftwBuffer in = detail::fftw_buffer(n), out = detail::fftw_buffer(n);
    std::copy(s.coeff.begin(), s.coeff.end(), in.get());
    fftw_execute_r2r(detail::DstPlanCache::instance().plan(detail::interior_shape(m)), in.get(),
                     out.get());
    const double scale = detail::unitary_scale(m);
    for (std::size_t i = 0; i < n; ++i) out[i] *= scale;
    GridFn w(m);
    detail::scatter_interior(out.get(), w);
    return w;
}

/// Symbol of a diagonalizable operator on every interior mode (spectrum order).
inline std::vector<double> symbol_table(const OperatorId& id, const OperatorParams& p,
                                        const Mesh& m) {
    std::vector<double> table(m.interior_count());
    if (auto poly = poly_of(id, p, m)) {
        std::array<std::vector<double>, kMaxDim> mu;
        for (int k = 0; k < m.dim; ++k) {
            mu[k].resize(m.count[k]);
            for (int j = 1; j < m.count[k]; ++j) mu[k][j] = lambda_symbol(m, k, j);
        }
        for_each_mode(m, [&](const std::array<int, kMaxDim>& j, std::size_t n) {
            std::array<double, kMaxDim> muj{};
            for (int k = 0; k < m.dim; ++k) muj[k] = mu[k][j[k]];
            table[n] = poly->symbol(muj);
        });
        return table;
    }
    for_each_mode(m, [&](const std::array<int, kMaxDim>& j, std::size_t n) {
        table[n] = operator_symbol(id, p, m, j);
    });
    return table;
}

/// iDST(mult .* DST(w)); mult in spectrum order. One plan pair, no stencils.
inline GridFn apply_spectral_multiplier(const GridFn& w, const std::vector<double>& mult) {
    const Mesh& m = w.mesh();
    const std::size_t n = m.interior_count();
    CWAVE_REQUIRE(mult.size() == n, std::invalid_argument, "multiplier size does not match mesh");
    detail::FftwBuffer a = detail::fftw_buffer(n), b = detail::fftw_buffer(n);
    detail::gather_interior(w, a.get());
    const fftw_plan plan = detail::DstPlanCache::instance().plan(detail::interior_shape(m));
    fftw_execute_r2r(plan, a.get(), b.get());
    const double s2 = detail::unitary_scale(m) * detail::unitary_scale(m);
    for (std::size_t i = 0; i < n; ++i) b[i] *= mult[i] * s2;
    fftw_execute_r2r(plan, b.get(), a.get());
    GridFn r(m);
    detail::scatter_interior(a.get(), r);
    return r;
}

/// Throws SingularOperatorError when some |symbol| < 1e-14 * max |symbol|.
inline void require_nonsingular(const std::vector<double>& symbol, const std::string& what) {
    double mx = 0.0;
    for (double s : symbol) mx = std::max(mx, std::abs(s));
    for (double s : symbol)
        if (!(std::abs(s) >= 1e-14 * mx) || mx == 0.0)
            throw SingularOperatorError(what + " is (nearly) singular on some sine mode");
}

inline GridFn apply_inverse_diagonalizable(const OperatorId& id, const OperatorParams& p,
                                           const GridFn& w) {
    std::vector<double> sym = symbol_table(id, p, w.mesh());
    require_nonsingular(sym, tag_name(id.tag));
    for (double& s : sym) s = 1.0 / s;
    return apply_spectral_multiplier(w, sym);
}

enum class NormKind { BinvA, invAB_sqrt };

/// ||w||_{B^{-1}A} = (B^{-1}A w, w)_h^{1/2} or ||(AB)^{-1/2} w||_h.
inline double weighted_norm(NormKind kind, const OperatorId& B, const OperatorId& A,
                            const OperatorParams& p, const GridFn& w) {
    const Mesh& m = w.mesh();
    const std::vector<double> sb = symbol_table(B, p, m);
    const std::vector<double> sa = symbol_table(A, p, m);
    require_nonsingular(sb, tag_name(B.tag));
    require_nonsingular(sa, tag_name(A.tag));
    const SineSpectrum ws = dst_forward(w);
    double s = 0.0;
    for (std::size_t i = 0; i < sb.size(); ++i) {
        const double c2 = ws.coeff[i] * ws.coeff[i];
        s += kind == NormKind::BinvA ? sa[i] / sb[i] * c2 : c2 / (sa[i] * sb[i]);
    }
    CWAVE_REQUIRE(s >= 0.0, std::invalid_argument, "weighted norm of an indefinite pair");
    return std::sqrt(s * m.cell_volume());
}

/// Same as weighted_norm but with precomputed weight table w_j (spectrum order).
inline double spectral_weighted_norm(const std::vector<double>& weight, const GridFn& w) {
    const SineSpectrum ws = dst_forward(w);
    double s = 0.0;
    for (std::size_t i = 0; i < weight.size(); ++i) s += weight[i] * ws.coeff[i] * ws.coeff[i];
    return std::sqrt(std::max(s, 0.0) * w.mesh().cell_volume());
}

} // namespace cwave
