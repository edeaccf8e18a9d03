#pragma once

// Energy ledger, stability-bound monitors, consistency residuals and
// convergence rates. All weighted norms live on the interior (H_h); inputs
// with boundary values are truncated.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <utility>

#include "schemes.hpp"

namespace cwave {

namespace detail {

inline GridFn inner(GridFn w) {
    w.zero_boundary();
    return w;
}

/// (K^{-1} w, w) for SPD K on H_h by conjugate gradients.
inline double inverse_form_cg(const Action& K, const GridFn& w, double tol = 1e-13, int max_iter = 5000) {
    GridFn x(w.mesh());
    GridFn r = inner(w), p = r;
    double rr = inner_product_h(r, r);
    const double stop = tol * tol * rr;
    for (int it = 0; it < max_iter && rr > stop; ++it) {
        const GridFn kp = inner(K(p));
        const double a = rr / inner_product_h(kp, p);
        x.axpy(a, p);
        r.axpy(-a, kp);
        const double rn = inner_product_h(r, r);
        p = r + (rn / rr) * p;
        rr = rn;
    }
    return inner_product_h(x, w);
}

} // namespace detail

/// Norm helpers bound to one stepper's B, A and rho.
class EnergyNorms {
  public:
    explicit EnergyNorms(const Stepper& st) : st_(st) {
        if (!st.unconditional()) {
            const auto& o = st.ops();
            inv_ab_.resize(o.sym_A.size());
            for (std::size_t i = 0; i < inv_ab_.size(); ++i) inv_ab_[i] = 1.0 / (o.sym_A[i] * o.sym_B[i]);
        }
    }

    /// ||y||^2_{B^{-1}A}
    [[nodiscard]] double binva_sq(const GridFn& y) const { return st_.binva_norm_sq(detail::inner(y)); }

    /// (B^{-1}A y, z)
    [[nodiscard]] double binva_dot(const GridFn& y, const GridFn& z) const {
        return inner_product_h(st_.apply_Binv(st_.apply_A(detail::inner(y))), detail::inner(z));
    }

    /// ||sqrt(rho) y||^2
    [[nodiscard]] double rho_sq(const GridFn& y) const { return rho_norm_sq(st_.spec().rho, detail::inner(y)); }

    /// ||rho^{-1/2} B^{-1} w||
    [[nodiscard]] double rho_inv_binv(const GridFn& w) const {
        const GridFn y = st_.apply_Binv(detail::inner(w));
        return std::sqrt(inner_product_h(y, divide_by(y, st_.spec().rho)));
    }

    /// ||(A B)^{-1/2} w||
    [[nodiscard]] double ab_inv_half(const GridFn& w) const {
        if (!st_.unconditional()) return spectral_weighted_norm(inv_ab_, detail::inner(w));
        const Action K = [this](const GridFn& y) { return st_.apply_A(y); };
        return std::sqrt(std::max(0.0, detail::inverse_form_cg(K, w)));
    }

    [[nodiscard]] double dot_binv(const GridFn& f, const GridFn& y) const {
        return inner_product_h(st_.apply_Binv(detail::inner(f)), detail::inner(y));
    }

  private:
    const Stepper& st_;
    std::vector<double> inv_ab_;
};

struct LedgerEntry {
    int m = 0;
    double t = 0.0;
    double E = 0.0;
    double RHS = 0.0;
    double drift = 0.0;
};

/// E^m = ||sqrt(rho) dbar_t v^m||^2 + (sigma - 1/4) h_t^2 ||dbar_t v^m||^2_{B^{-1}A} + ||sbar_t v^m||^2_{B^{-1}A}
/// against the accumulated right side
/// (B^{-1}A v^0, s_t v^0) + (B^{-1}U, delta_t v^0) + (h_t/2)(B^{-1}F^0, delta_t v^0) + 2 I^{m-1}(B^{-1}F, dring_t v).
class EnergyLedger : public Observer {
  public:
    explicit EnergyLedger(double floor = 1e-300) : floor_(floor) {}

    void on_start(const Stepper&, const GridFn& v0) override {
        entries_.clear();
        older_ = detail::inner(v0);
        acc_ = 0.0;
    }

    void on_layer(const Stepper& st, const TimeState& s) override {
        const EnergyNorms nm(st);
        const double h = st.ht();
        const GridFn vp = detail::inner(s.v_prev), vc = detail::inner(s.v_cur);
        if (s.m == 1) {
            const GridFn dv = (1.0 / h) * (vc - vp);
            base_ = nm.binva_dot(vp, 0.5 * (vp + vc)) + nm.dot_binv(s.first_U, dv) +
                    0.5 * h * nm.dot_binv(s.first_F0, dv);
        } else {
            // F^{m-1} against dring_t v^{m-1} = (v^m - v^{m-2}) / (2 h_t)
            acc_ += 2.0 * h * nm.dot_binv(s.rhs_last, (0.5 / h) * (vc - older_));
        }
        older_ = vp;
        const GridFn db = (1.0 / h) * (vc - vp);
        const GridFn sb = 0.5 * (vc + vp);
        LedgerEntry e;
        e.m = s.m;
        e.t = st.mesh().time(s.m);
        e.E = nm.rho_sq(db) + (st.ops().sigma - 0.25) * h * h * nm.binva_sq(db) + nm.binva_sq(sb);
        e.RHS = base_ + acc_;
        const double scale = std::max(entries_.empty() ? e.E : entries_.front().E, floor_);
        e.drift = std::abs(e.E - e.RHS) / scale;
        entries_.push_back(e);
    }

    [[nodiscard]] const std::vector<LedgerEntry>& entries() const { return entries_; }

    [[nodiscard]] double max_drift() const {
        double d = 0.0;
        for (const auto& e : entries_) d = std::max(d, e.drift);
        return d;
    }

    void write_csv(const std::filesystem::path& path) const {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out << "m,t,E,RHS,drift\n";
        char buf[160];
        for (const auto& e : entries_) {
            std::snprintf(buf, sizeof buf, "%d,%.16e,%.16e,%.16e,%.16e\n", e.m, e.t, e.E, e.RHS, e.drift);
            out << buf;
        }
    }

  private:
    double floor_;
    std::vector<LedgerEntry> entries_;
    GridFn older_;
    double base_ = 0.0, acc_ = 0.0;
};

struct BoundCheck {
    double lhs = 0.0, rhs = 0.0;
    [[nodiscard]] double slack() const { return rhs - lhs; }
    [[nodiscard]] bool holds() const { return lhs <= rhs * (1.0 + 1e-12) + 1e-300; }
};

struct BoundReport {
    BoundCheck strong;     // f-term as the L1 norm of rho^{-1/2} B^{-1} f
    BoundCheck strong_alt; // f-term via (AB)^{-1/2} of dbar_t f and f
    BoundCheck weak;
    double eps0 = 1.0;
};

/// Evaluates both sides of the strong and weak stability bounds along a run.
/// For sigma < 1/4 the left sides carry eps0 (eps0^2 from the scheme config);
/// for sigma >= 1/4, eps0 = 1 and the (sigma - 1/4) terms are kept.
class BoundMonitor : public Observer {
  public:
    void on_start(const Stepper& st, const GridFn& v0) override {
        rep_ = {};
        const bool cond = st.ops().sigma < 0.25;
        rep_.eps0 = cond ? std::sqrt(st.config().eps0_sq) : 1.0;
        const EnergyNorms nm(st);
        v0_ = detail::inner(v0);
        const double k = extra(st) * nm.binva_sq(v0_);
        rep_.weak.lhs = weak_lhs(st, nm, v0_);
        weak_v0_ = std::sqrt(std::max(0.0, nm.rho_sq(v0_) + (cond ? 0.0 : k)));
        isum_ = GridFn(v0_.mesh());
        strong_head_ = nm.binva_sq(v0_);
        f_l1_rho_ = f_l1_ab_ = df_sum_ = f_max_ = 0.0;
    }

    void on_layer(const Stepper& st, const TimeState& s) override {
        const EnergyNorms nm(st);
        const double h = st.ht(), e0 = rep_.eps0, e0sq = e0 * e0;
        const bool cond = st.ops().sigma < 0.25;
        const GridFn vp = detail::inner(s.v_prev), vc = detail::inner(s.v_cur);
        if (s.m == 1) {
            strong_head_ += nm.rho_inv_binv(s.first_U) * nm.rho_inv_binv(s.first_U) / e0sq;
            ab_u_ = nm.ab_inv_half(s.first_U);
            f_l1_rho_ = 0.25 * h * nm.rho_inv_binv(s.first_F0);
            f_l1_ab_ = 0.25 * h * nm.ab_inv_half(s.first_F0);
            f_max_ = nm.ab_inv_half(s.first_F0);
            f_last_ = detail::inner(s.first_F0);
        } else {
            const GridFn& f = s.rhs_last; // F^{m-1}
            f_l1_rho_ += h * nm.rho_inv_binv(f);
            f_l1_ab_ += h * nm.ab_inv_half(f);
            f_max_ = std::max(f_max_, nm.ab_inv_half(f));
            df_sum_ += h * nm.ab_inv_half((1.0 / h) * (detail::inner(f) - f_last_));
            f_last_ = detail::inner(f);
        }
        const GridFn db = (1.0 / h) * (vc - vp), sb = 0.5 * (vc + vp);
        const double strong = cond ? e0sq * nm.rho_sq(db) + nm.binva_sq(sb)
                                   : nm.rho_sq(db) + extra(st) * nm.binva_sq(db) + nm.binva_sq(sb);
        rep_.strong.lhs = std::max(rep_.strong.lhs, std::sqrt(std::max(0.0, strong)));
        isum_.axpy(h, sb);
        rep_.weak.lhs = std::max({rep_.weak.lhs, weak_lhs(st, nm, vc), std::sqrt(nm.binva_sq(isum_))});

        const double head = std::sqrt(strong_head_);
        rep_.strong.rhs = head + 2.0 / e0 * f_l1_rho_;
        rep_.strong_alt.lhs = rep_.strong.lhs;
        rep_.strong_alt.rhs = head + 2.0 * df_sum_ + 3.0 * f_max_;
        rep_.weak.rhs = weak_v0_ + 2.0 * ab_u_ + 2.0 * f_l1_ab_;
    }

    [[nodiscard]] const BoundReport& report() const { return rep_; }

  private:
    static double extra(const Stepper& st) { return (st.ops().sigma - 0.25) * st.ht() * st.ht(); }

    double weak_lhs(const Stepper& st, const EnergyNorms& nm, const GridFn& v) const {
        if (st.ops().sigma < 0.25) return rep_.eps0 * std::sqrt(nm.rho_sq(v));
        return std::sqrt(std::max(0.0, nm.rho_sq(v) + extra(st) * nm.binva_sq(v)));
    }

    BoundReport rep_;
    GridFn v0_, isum_, f_last_;
    double weak_v0_ = 0.0, strong_head_ = 0.0, ab_u_ = 0.0;
    double f_l1_rho_ = 0.0, f_l1_ab_ = 0.0, df_sum_ = 0.0, f_max_ = 0.0;
};

struct ConsistencyResidual {
    double interior = 0.0;   // max over m = 1..M-1 and interior nodes
    double first_step = 0.0; // max over interior nodes
};

/// Residuals of the layer and first-step equations of `st` on the exact
/// solution u, using the stepper's own B, A, F, U and F^0. Layers are
/// restricted to `layers` when it is non-empty; `margin` > 0 skips nodes
/// within that many steps of the boundary.
inline ConsistencyResidual consistency_residual(const Stepper& st, const SpaceTimeField& u,
                                           const std::vector<int>& layers = {}, int margin = 0) {
    const Mesh& m = st.mesh();
    auto max_inside = [&](const GridFn& r) {
        double e = 0.0;
        for_each_interior(m, [&](std::size_t i) {
            const Index id = m.unflat(i);
            for (int k = 0; k < m.dim; ++k)
                if (id[k] <= margin || id[k] >= m.count[k] - margin) return;
            e = std::max(e, std::abs(r[i]));
        });
        return e;
    };
    const double h = st.ht(), sg = st.ops().sigma;
    auto lhs = [&](const GridFn& w) {
        GridFn r = st.apply_B(pointwise(st.spec().rho, w));
        r.axpy(sg * h * h, st.apply_A(w));
        return r;
    };
    ConsistencyResidual res;
    std::vector<int> ms = layers;
    if (ms.empty())
        for (int k = 1; k < m.M; ++k) ms.push_back(k);
    for (int k : ms) {
        CWAVE_REQUIRE(k >= 1 && k <= m.M - 1, std::out_of_range, "residual layer out of range");
        const GridFn um = sample(u, m, m.time(k - 1)), u0 = sample(u, m, m.time(k)),
                     up = sample(u, m, m.time(k + 1));
        const GridFn lt = (1.0 / (h * h)) * (up - 2.0 * u0 + um);
        const GridFn r = lhs(lt) + st.apply_A(u0) - st.layer_rhs(k);
        res.interior = std::max(res.interior, max_inside(r));
    }
    const GridFn u0 = sample(u, m, 0.0), u1 = sample(u, m, h);
    GridFn r = lhs((1.0 / h) * (u1 - u0));
    r.axpy(0.5 * h, st.apply_A(u0));
    r -= st.first_U();
    r.axpy(-0.5 * h, st.first_F0());
    res.first_step = max_inside(r);
    return res;
}

/// p(N) = log2(e(N/2) / e(N)) for consecutive doublings of N.
inline std::vector<double> convergence_rates(const std::vector<std::pair<int, double>>& errors) {
    std::vector<double> p;
    for (std::size_t i = 1; i < errors.size(); ++i) {
        CWAVE_REQUIRE(errors[i].first == 2 * errors[i - 1].first, std::invalid_argument,
                      "convergence_rates needs N doubling between consecutive entries");
        CWAVE_REQUIRE(errors[i].second > 0.0 && errors[i - 1].second > 0.0, std::invalid_argument,
                      "convergence_rates needs positive errors");
        p.push_back(std::log2(errors[i - 1].second / errors[i].second));
    }
    return p;
}

} // namespace cwave
