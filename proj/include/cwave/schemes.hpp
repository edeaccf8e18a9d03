#pragma once

// Three-level schemes for rho d_t^2 u - sum_k a_k^2 d_k^2 u = f with Dirichlet data g:
//
//   B(rho Lambda_t v) + sigma h_t^2 A Lambda_t v + A v = F^m,          1 <= m <= M-1
//   B(rho delta_t v^0) + sigma h_t^2 A delta_t v^0 + (h_t/2) A v^0 = U + (h_t/2) F^0
//
// Each layer solves K w = b in H_h with K = B(rho .) + sigma h_t^2 A, where w is
// Lambda_t v (or delta_t v^0) on interior nodes. Its boundary part is known from
// g and is moved to the right side (the lift).

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "solvers.hpp"
#include "stability.hpp"

namespace cwave {

enum class Variant { S0, S2, S3, U4, EXPL2 };
enum class F0Variant { three_level, half_step, symmetric_m1 };

inline const char* to_string(Variant v) {
    switch (v) {
    case Variant::S0: return "S0";
    case Variant::S2: return "S2";
    case Variant::S3: return "S3";
    case Variant::U4: return "U4";
    case Variant::EXPL2: return "EXPL2";
    }
    return "?";
}

inline const char* to_string(F0Variant v) {
    switch (v) {
    case F0Variant::three_level: return "three_level";
    case F0Variant::half_step: return "half_step";
    case F0Variant::symmetric_m1: return "symmetric_m1";
    }
    return "?";
}

/// Weight sigma at the upper level.
inline double sigma_of(Variant v) {
    switch (v) {
    case Variant::U4: return 0.25;
    case Variant::EXPL2: return 0.0;
    default: return 1.0 / 12.0;
    }
}

struct FamilyParams {
    double beta, gamma, theta;
};

/// (beta, gamma, theta) = (2, 12(1 - kappa), 4(kappa - 1)), -1/2 < kappa < 3.
inline FamilyParams kappa_family(double kappa) {
    CWAVE_REQUIRE(kappa > -0.5 && kappa < 3.0, std::invalid_argument,
                  "kappa must lie in (-1/2, 3)");
    return {2.0, 12.0 * (1.0 - kappa), 4.0 * (kappa - 1.0)};
}

/// Right-hand side f: a space-time field or a point source at a mesh node.
class SourceTerm {
  public:
    SourceTerm() = default;

    /// `negative_times` / `half_steps`: whether f may be sampled at t < 0 and
    /// off the time grid (needed by some starting formulas).
    static SourceTerm field(SpaceTimeField f, bool negative_times = true, bool half_steps = true) {
        SourceTerm s;
        s.kind_ = Kind::field;
        s.field_ = std::move(f);
        s.negative_ = negative_times;
        s.half_ = half_steps;
        return s;
    }

    /// amplitude * law(t) * delta_h(x - x0), delta_h = 1/(h_1...h_n) at the node.
    static SourceTerm point(Point x0, double amplitude, std::function<double(double)> law) {
        SourceTerm s;
        s.kind_ = Kind::point;
        s.x0_ = x0;
        s.amplitude_ = amplitude;
        s.law_ = std::move(law);
        return s;
    }

    [[nodiscard]] bool is_zero() const { return kind_ == Kind::zero; }
    [[nodiscard]] bool allows_negative_times() const { return negative_; }
    [[nodiscard]] bool allows_half_steps() const { return half_; }

    /// Node index of a point source; off-node or boundary locations are rejected.
    [[nodiscard]] Index node(const Mesh& m) const {
        Index i{};
        for (int k = 0; k < m.dim; ++k) {
            const double r = x0_[k] / m.step[k];
            i[k] = static_cast<int>(std::lround(r));
            if (std::abs(r - i[k]) > 1e-9 || i[k] <= 0 || i[k] >= m.count[k])
                throw RejectedConfiguration("point source is not located at an interior mesh node");
        }
        return i;
    }

    [[nodiscard]] GridFn at(const Mesh& m, double t) const {
        switch (kind_) {
        case Kind::zero: return GridFn(m);
        case Kind::field: return sample(field_, m, t);
        case Kind::point: {
            GridFn g(m);
            g.at(node(m)) = amplitude_ * law_(t) / m.cell_volume();
            return g;
        }
        }
        return GridFn(m);
    }

  private:
    enum class Kind { zero, field, point };
    Kind kind_ = Kind::zero;
    SpaceTimeField field_;
    Point x0_{};
    double amplitude_ = 0.0;
    std::function<double(double)> law_;
    bool negative_ = true;
    bool half_ = true;
};

/// Extra data of the unconditionally stable variant; all default to zero
/// except w0 which defaults to rho*u1.
struct U4Inputs {
    std::optional<GridFn> w0;
    SpaceTimeField d;
    SpaceTimeField ftilde; // f~ at t_m for layer m, added to any plain source f
};

struct ProblemSpec {
    Mesh mesh; // space plus time axis
    GridFn rho;
    std::vector<double> a; // empty means a_k = 1
    SourceTerm f;
    SpaceField u0, u1;  // empty means zero
    SpaceTimeField g;   // empty means homogeneous
    U4Inputs u4;

    [[nodiscard]] std::vector<double> speeds() const {
        return a.empty() ? std::vector<double>(mesh.dim, 1.0) : a;
    }
};

inline void validate(const ProblemSpec& s) {
    CWAVE_REQUIRE(s.mesh.dim >= 1 && s.mesh.M >= 2, std::invalid_argument,
                  "mesh needs a space axis and at least two time steps");
    CWAVE_REQUIRE(s.rho.mesh().same_space(s.mesh), std::invalid_argument,
                  "rho lives on a different mesh");
    CWAVE_REQUIRE(min_value(s.rho) > 0.0, std::invalid_argument, "rho must be positive");
    CWAVE_REQUIRE(s.a.empty() || static_cast<int>(s.a.size()) == s.mesh.dim,
                  std::invalid_argument, "need one a_k per axis");
    for (double ak : s.a) CWAVE_REQUIRE(ak > 0.0, std::invalid_argument, "a_k must be positive");
    if (s.u0 && s.g) {
        const GridFn v0 = sample(s.u0, s.mesh), g0 = sample(s.g, s.mesh, 0.0);
        const double scale = std::max(1.0, max_value(v0) - min_value(v0));
        const GridFn d = (v0 - g0).boundary_part();
        double e = 0.0;
        for (double x : d.values()) e = std::max(e, std::abs(x));
        CWAVE_REQUIRE(e <= 1e-10 * scale, std::invalid_argument,
                      "u0 disagrees with g at t = 0 on the boundary");
    }
}

struct SchemeConfig {
    Variant variant = Variant::S0;
    std::optional<double> beta, gamma, theta;
    double eps0_sq = 0.5;
    F0Variant f0 = F0Variant::half_step;
    bool override_stability = false;
};

/// Operators of one variant on one mesh.
struct SchemeOperators {
    Variant variant = Variant::S0;
    double sigma = 1.0 / 12.0;
    PolyOperator B, A, S; // S: spatial average applied to f and rho*u1
    std::vector<double> sym_B, sym_A, ratio;
    double C1 = 1.0;
    GridFn csq; // U4 only
};

inline SchemeOperators make_operators(const ProblemSpec& spec, const SchemeConfig& cfg) {
    const Mesh& m = spec.mesh;
    const std::vector<double> a = spec.speeds();
    SchemeOperators o;
    o.variant = cfg.variant;
    o.sigma = sigma_of(cfg.variant);
    const bool family = cfg.variant == Variant::S0 || cfg.variant == Variant::S2;
    CWAVE_REQUIRE(family || !(cfg.beta || cfg.gamma || cfg.theta), std::invalid_argument,
                  std::string("beta/gamma/theta do not apply to ") + to_string(cfg.variant));
    switch (cfg.variant) {
    case Variant::S0:
        CWAVE_REQUIRE(m.dim <= 2, std::invalid_argument, "S0 is defined for n <= 2; use S3");
        CWAVE_REQUIRE(!cfg.gamma && !cfg.theta, std::invalid_argument,
                      "gamma/theta apply only to S2");
        o.B = ops::sN_beta(m, cfg.beta.value_or(0.0));
        o.A = ops::AN(m, a);
        o.S = ops::sN(m);
        o.C1 = 4.0 / 3.0;
        break;
    case Variant::S2:
        CWAVE_REQUIRE(m.dim == 2 || m.dim == 3, std::invalid_argument, "S2 is defined for n = 2, 3");
        o.B = ops::sN_beta_gamma(m, cfg.beta.value_or(1.0), cfg.gamma.value_or(1.0));
        o.A = ops::AN_theta(m, a, cfg.theta.value_or(0.0));
        o.S = ops::sN(m);
        o.C1 = 1.0 / std::max(1e-300, std::min(1.0, cfg.beta.value_or(1.0)));
        break;
    case Variant::S3:
        o.B = ops::sbarN(m);
        o.A = ops::AbarN(m, a);
        o.S = ops::sbarN(m);
        break;
    case Variant::U4:
    case Variant::EXPL2:
        o.B = PolyOperator::identity(m.dim);
        o.A = PolyOperator(m.dim);
        for (int k = 0; k < m.dim; ++k) o.A += PolyOperator::lambda(m.dim, k, -a[k] * a[k]);
        o.S = PolyOperator::identity(m.dim);
        break;
    }
    if (cfg.variant == Variant::U4) {
        CWAVE_REQUIRE(spec.a.empty() || std::all_of(a.begin(), a.end(), [](double x) { return x == 1.0; }),
                      std::invalid_argument, "U4 is defined for a_k = 1 with c^2 = 1/rho");
        o.csq = GridFn(m);
        for (std::size_t i = 0; i < o.csq.size(); ++i) o.csq[i] = 1.0 / spec.rho[i];
    }
    if (cfg.variant != Variant::U4) {
        OperatorParams none;
        o.sym_B.resize(m.interior_count());
        o.sym_A.resize(m.interior_count());
        std::array<std::vector<double>, kMaxDim> mu;
        for (int k = 0; k < m.dim; ++k) {
            mu[k].resize(m.count[k]);
            for (int j = 1; j < m.count[k]; ++j) mu[k][j] = lambda_symbol(m, k, j);
        }
        for_each_mode(m, [&](const std::array<int, kMaxDim>& j, std::size_t n) {
            std::array<double, kMaxDim> muj{};
            for (int k = 0; k < m.dim; ++k) muj[k] = mu[k][j[k]];
            o.sym_B[n] = o.B.symbol(muj);
            o.sym_A[n] = o.A.symbol(muj);
        });
        for (double s : o.sym_B)
            if (!(s > 0.0)) throw RejectedConfiguration("B_h is not positive definite for these parameters");
        for (double s : o.sym_A)
            if (!(s > 0.0)) throw RejectedConfiguration("A_h is not positive definite for these parameters");
        o.ratio.resize(o.sym_B.size());
        for (std::size_t i = 0; i < o.ratio.size(); ++i) o.ratio[i] = o.sym_A[i] / o.sym_B[i];
    }
    return o;
}

/// Layers m-1 and m plus what produced the latest one.
struct TimeState {
    GridFn v_prev, v_cur;
    int m = 0;
    GridFn w_last;         // solved interior unknown of the last layer
    GridFn rhs_last;       // F^{m-1} used to reach layer m (m >= 2)
    GridFn first_U, first_F0;
    SolveReport last_report;
    std::vector<int> iterations; // per solved layer
};

/// Solves K w = b in H_h directly; K acts on H_h. Used to bypass the iterations.
using DirectSolver = std::function<GridFn(const Action& K, const GridFn& b)>;

class Stepper {
  public:
    Stepper(ProblemSpec spec, SchemeConfig cfg, SolverConfig solver = {})
        : spec_(std::move(spec)), cfg_(cfg), solver_(solver) {
        validate(spec_);
        validate(solver_);
        CWAVE_REQUIRE(cfg_.eps0_sq > 0.0 && cfg_.eps0_sq < 1.0, std::invalid_argument,
                      "eps0^2 must lie in (0, 1)");
        if (cfg_.variant == Variant::U4)
            CWAVE_REQUIRE(!spec_.g, UnsupportedVariant, "U4 requires a homogeneous boundary condition");
        ops_ = make_operators(spec_, cfg_);
        if (cfg_.variant == Variant::U4 && solver_.u4_preconditioner == U4Preconditioner::spectral)
            build_u4_preconditioner();
    }

    void set_direct_solver(DirectSolver s) { direct_ = std::move(s); }

    [[nodiscard]] const ProblemSpec& spec() const { return spec_; }
    [[nodiscard]] const SchemeConfig& config() const { return cfg_; }
    [[nodiscard]] const SolverConfig& solver_config() const { return solver_; }
    [[nodiscard]] const SchemeOperators& ops() const { return ops_; }
    [[nodiscard]] const Mesh& mesh() const { return spec_.mesh; }
    [[nodiscard]] double ht() const { return spec_.mesh.ht; }
    [[nodiscard]] bool explicit_scheme() const { return cfg_.variant == Variant::EXPL2; }
    [[nodiscard]] bool unconditional() const { return cfg_.variant == Variant::U4; }

    // Operators. All return zero boundary; inputs may carry boundary values.

    [[nodiscard]] GridFn apply_B(const GridFn& w) const {
        return unconditional() ? interior(w) : ops_.B.apply(w);
    }

    [[nodiscard]] GridFn apply_A(const GridFn& w) const {
        return unconditional() ? apply_A4(ops_.csq, ht(), w) : ops_.A.apply(w);
    }

    /// K w = B(rho w) + sigma h_t^2 A w.
    [[nodiscard]] GridFn apply_K(const GridFn& w) const {
        GridFn r = apply_B(pointwise(spec_.rho, w));
        r.axpy(ops_.sigma * ht() * ht(), apply_A(w));
        return r;
    }

    [[nodiscard]] GridFn apply_Binv(const GridFn& w) const {
        if (unconditional() || explicit_scheme()) return interior(w);
        std::vector<double> inv(ops_.sym_B.size());
        for (std::size_t i = 0; i < inv.size(); ++i) inv[i] = 1.0 / ops_.sym_B[i];
        return apply_spectral_multiplier(w, inv);
    }

    /// ||y||^2_{B^{-1}A} for y in H_h.
    [[nodiscard]] double binva_norm_sq(const GridFn& y) const {
        if (unconditional()) return inner_product_h(apply_A(y), y);
        const double n = spectral_weighted_norm(ops_.ratio, y);
        return n * n;
    }

    [[nodiscard]] double rho_min() const { return min_value(spec_.rho); }

    // Data on the mesh.

    [[nodiscard]] GridFn source(double t) const { return spec_.f.at(mesh(), t); }

    /// g(., t) on the boundary, zero inside.
    [[nodiscard]] GridFn boundary(double t) const {
        return spec_.g ? sample(spec_.g, mesh(), t).boundary_part() : GridFn(mesh());
    }

    [[nodiscard]] GridFn initial_layer() const {
        GridFn v = spec_.u0 ? sample(spec_.u0, mesh()) : GridFn(mesh());
        if (spec_.g) {
            const GridFn g0 = boundary(0.0);
            v.set_boundary([&](std::size_t i) { return g0[i]; });
        }
        return v;
    }

    [[nodiscard]] GridFn initial_velocity() const {
        return spec_.u1 ? sample(spec_.u1, mesh()) : GridFn(mesh());
    }

    // Right-hand sides.

    /// f_N^m = S f^m + (h_t^2/12) Lambda_t f^m.
    [[nodiscard]] GridFn assemble_fN(int m) const {
        CWAVE_REQUIRE(m >= 1 && m <= mesh().M - 1, std::out_of_range, "layer out of range for f_N");
        if (spec_.f.is_zero()) return GridFn(mesh());
        const GridFn fm = source(mesh().time(m - 1)), f0 = source(mesh().time(m)),
                     fp = source(mesh().time(m + 1));
        GridFn r = ops_.S.apply(f0);
        GridFn lt = fp - 2.0 * f0 + fm;
        lt.zero_boundary();
        r.axpy(1.0 / 12.0, lt);
        return r;
    }

    /// u_1N = S(rho u1) + (h_t^2/12) sum_k a_k^2 Lambda_k u1.
    [[nodiscard]] GridFn assemble_u1N() const {
        if (!spec_.u1) return GridFn(mesh());
        const GridFn u1 = initial_velocity();
        GridFn r = ops_.S.apply(pointwise(spec_.rho, u1));
        const std::vector<double> a = spec_.speeds();
        for (int k = 0; k < mesh().dim; ++k)
            r.axpy(ht() * ht() / 12.0 * a[k] * a[k], apply_lambda_axis(u1, k));
        r.zero_boundary();
        return r;
    }

    /// Starting combination f_dht^(0) ~ f + (h_t/3) f' + (h_t^2/12) f'' at t = 0.
    [[nodiscard]] GridFn f_dht0() const {
        const double h = ht();
        GridFn r(mesh());
        if (spec_.f.is_zero()) return r;
        switch (cfg_.f0) {
        case F0Variant::three_level:
            r.axpy(7.0 / 12.0, source(0.0)).axpy(0.5, source(h)).axpy(-1.0 / 12.0, source(2 * h));
            break;
        case F0Variant::half_step:
            if (!spec_.f.allows_half_steps())
                throw UnsupportedVariant("f0 variant half_step needs f at t = h_t/2; select three_level");
            r.axpy(1.0 / 3.0, source(0.0)).axpy(2.0 / 3.0, source(0.5 * h));
            break;
        case F0Variant::symmetric_m1:
            if (!spec_.f.allows_negative_times())
                throw UnsupportedVariant("f0 variant symmetric_m1 needs f at t = -h_t; select three_level");
            r.axpy(-1.0 / 12.0, source(-h)).axpy(5.0 / 6.0, source(0.0)).axpy(0.25, source(h));
            break;
        }
        return interior(r);
    }

    /// f_N^0 = f_dht^(0) + (S - I) f^0.
    [[nodiscard]] GridFn assemble_fN0() const {
        if (spec_.f.is_zero()) return GridFn(mesh());
        GridFn r = f_dht0();
        const GridFn f0 = source(0.0);
        r += ops_.S.apply(f0);
        r -= f0;
        r.zero_boundary();
        return r;
    }

    /// -K(W) where W carries the known boundary part of the unknown.
    [[nodiscard]] GridFn boundary_lift(const GridFn& W) const {
        GridFn r = apply_K(W);
        r *= -1.0;
        return r;
    }

    /// Boundary part of Lambda_t g at layer m (m = 0: (g^1 - g^0)/h_t).
    [[nodiscard]] GridFn boundary_unknown(int m) const {
        if (!spec_.g) return GridFn(mesh());
        const double h = ht();
        if (m == 0) return (1.0 / h) * (boundary(h) - boundary(0.0));
        return (1.0 / (h * h)) *
               (boundary(mesh().time(m + 1)) - 2.0 * boundary(mesh().time(m)) + boundary(mesh().time(m - 1)));
    }

    // Right-hand sides of the unconditionally stable variant.

    [[nodiscard]] GridFn u4_data(const GridFn& w) const { return apply_U4_data_operator(ops_.csq, ht(), w); }

    /// User f~ at t_m, interior only.
    [[nodiscard]] GridFn u4_ftilde(int m) const {
        return spec_.u4.ftilde ? interior(sample(spec_.u4.ftilde, mesh(), mesh().time(m))) : GridFn(mesh());
    }

    [[nodiscard]] GridFn u4_d(int m) const {
        return spec_.u4.d ? interior(sample(spec_.u4.d, mesh(), mesh().time(m))) : GridFn(mesh());
    }

    /// w - (h_t^2/6) L_h(c^2 w): the spatial average that makes f_h fourth order.
    [[nodiscard]] GridFn u4_average(const GridFn& w) const {
        GridFn r = interior(w);
        r.axpy(-ht() * ht() / 6.0, apply_Lh(pointwise(ops_.csq, r)));
        return interior(r);
    }

    /// f_h^m = D s_t f~^m + rho delta_t d^m with D = I - (h_t^2/12) L_h(c^2 .) when f~ is
    /// given; a plain source f enters as u4_average(f^m) + (h_t^2/12) Lambda_t f^m.
    [[nodiscard]] GridFn assemble_fh(int m) const {
        CWAVE_REQUIRE(m >= 1 && m <= mesh().M - 1, std::out_of_range, "layer out of range for f_h");
        GridFn r(mesh());
        if (spec_.u4.ftilde) r += u4_data(0.5 * (u4_ftilde(m) + u4_ftilde(m + 1)));
        if (!spec_.f.is_zero()) {
            const GridFn fm = source(mesh().time(m - 1)), f0 = source(mesh().time(m)),
                         fp = source(mesh().time(m + 1));
            r += u4_average(f0);
            r.axpy(1.0 / 12.0, interior(fp - 2.0 * f0 + fm));
        }
        if (spec_.u4.d) r += (1.0 / ht()) * pointwise(spec_.rho, u4_d(m + 1) - u4_d(m));
        return interior(r);
    }

    /// f_h^0 = D f~^1 + rho delta_t d^0 with d^0 = -d^1; a plain source enters as
    /// f_dht^(0) + (u4_average - I) f^0.
    [[nodiscard]] GridFn assemble_fh0() const {
        GridFn r(mesh());
        if (spec_.u4.ftilde) r += u4_data(u4_ftilde(1));
        if (!spec_.f.is_zero()) {
            const GridFn f0 = interior(source(0.0));
            r += f_dht0();
            r += u4_average(f0) - f0;
        }
        if (spec_.u4.d) r += (2.0 / ht()) * pointwise(spec_.rho, u4_d(1));
        return interior(r);
    }

    [[nodiscard]] GridFn assemble_u1h() const {
        const GridFn w0 = spec_.u4.w0 ? *spec_.u4.w0 : pointwise(spec_.rho, initial_velocity());
        return u4_data(w0);
    }

    /// Interior right side F^m of the layer equation (f_N or f_h).
    [[nodiscard]] GridFn layer_rhs(int m) const {
        if (unconditional()) return assemble_fh(m);
        if (explicit_scheme()) return spec_.f.is_zero() ? GridFn(mesh()) : interior(source(mesh().time(m)));
        return assemble_fN(m);
    }

    /// U of the first-step equation (u_1N, or u_1h + rho d^1).
    [[nodiscard]] GridFn first_U() const {
        if (unconditional()) {
            GridFn r = assemble_u1h();
            if (spec_.u4.d) r += pointwise(spec_.rho, u4_d(1));
            return interior(r);
        }
        if (explicit_scheme()) return interior(pointwise(spec_.rho, initial_velocity()));
        return assemble_u1N();
    }

    [[nodiscard]] GridFn first_F0() const {
        if (unconditional()) return assemble_fh0();
        if (explicit_scheme()) return spec_.f.is_zero() ? GridFn(mesh()) : interior(source(0.0));
        return assemble_fN0();
    }

    // Stability.

    [[nodiscard]] StabilityReport stability() const {
        const std::vector<double> a = spec_.speeds();
        StabilityReport r;
        if (unconditional()) {
            r = evaluate_stability(0.0, 0.25, cfg_.eps0_sq, rho_min(), mesh(), a);
            return r;
        }
        const double alpha = explicit_scheme() ? 0.0 : alpha_h_sq(ops_.sym_B, ops_.sym_A);
        r = evaluate_stability(alpha, ops_.sigma, cfg_.eps0_sq, rho_min(), mesh(), a);
        r.C1 = ops_.C1;
        if (explicit_scheme()) {
            r.condition_used = StabilityCondition::explicit_sum;
            r.satisfied = r.explicit_satisfied;
        }
        return r;
    }

    /// Throws RejectedConfiguration unless the step passes (or override is set).
    StabilityReport check_stability() const {
        const StabilityReport r = stability();
        if (r.satisfied || cfg_.override_stability) return r;
        const double limit = explicit_scheme() ? r.ht_max_explicit : r.ht_max;
        std::ostringstream os;
        os << "time step " << ht() << " violates the stability condition of " << to_string(cfg_.variant)
           << " (h_t max " << limit << " at eps0^2 = " << cfg_.eps0_sq << ")";
        throw RejectedConfiguration(os.str());
    }

    // Time stepping.

    [[nodiscard]] TimeState first_step() const {
        TimeState s;
        s.v_prev = initial_layer();
        s.first_U = first_U();
        s.first_F0 = first_F0();
        const double h = ht();
        GridFn next = s.v_prev;
        if (explicit_scheme()) {
            GridFn acc = s.first_F0 - apply_A(s.v_prev);
            next.axpy(h, interior(initial_velocity()));
            next.axpy(0.5 * h * h, divide_by(acc, spec_.rho));
        } else {
            const GridFn W = boundary_unknown(0);
            GridFn b = s.first_U;
            b.axpy(0.5 * h, s.first_F0 - apply_A(s.v_prev));
            if (spec_.g) b += boundary_lift(W);
            const GridFn w = solve_upper(b, 0, s);
            next.axpy(h, w + W);
            s.w_last = w;
        }
        finish_layer(next, 1);
        s.v_cur = std::move(next);
        s.m = 1;
        return s;
    }

    void step(TimeState& s) const {
        CWAVE_REQUIRE(s.m >= 1 && s.m <= mesh().M - 1, std::out_of_range, "no layer left to compute");
        const double h = ht();
        GridFn F = layer_rhs(s.m);
        GridFn next = 2.0 * s.v_cur - s.v_prev;
        if (explicit_scheme()) {
            next.axpy(h * h, divide_by(F - apply_A(s.v_cur), spec_.rho));
        } else {
            const GridFn W = boundary_unknown(s.m);
            GridFn b = F - apply_A(s.v_cur);
            if (spec_.g) b += boundary_lift(W);
            const GridFn w = solve_upper(b, s.m, s);
            next.axpy(h * h, w + W);
            s.w_last = w;
        }
        finish_layer(next, s.m + 1);
        s.v_prev = std::move(s.v_cur);
        s.v_cur = std::move(next);
        s.rhs_last = std::move(F);
        ++s.m;
    }

    /// The canonical system cal_A w = b~ for right side b of K w = b.
    [[nodiscard]] LinearSystem canonical_system(const GridFn& b) const {
        LinearSystem sys;
        sys.rho = spec_.rho;
        if (unconditional()) {
            const GridFn rho = spec_.rho, csq = ops_.csq;
            const double q = 0.25 * ht() * ht(), h = ht();
            sys.apply = [rho, csq, q, h](const GridFn& w) {
                GridFn r = apply_A4(csq, h, w);
                r *= q;
                for_each_interior(w.mesh(), [&](std::size_t i) { r[i] += rho[i] * w[i]; });
                return r;
            };
            if (solver_.u4_preconditioner == U4Preconditioner::spectral) {
                const std::vector<double> inv = u4_precond_;
                sys.precond_inv = [inv](const GridFn& w) { return apply_spectral_multiplier(w, inv); };
            } else {
                sys.precond_inv = [rho](const GridFn& w) { return divide_by(w, rho); };
            }
            sys.rhs = interior(b);
            return sys;
        }
        sys.apply = spectral_canonical_operator(spec_.rho, ops_.sigma * ht() * ht(), ops_.ratio);
        const GridFn rho = spec_.rho;
        sys.precond_inv = [rho](const GridFn& w) { return divide_by(w, rho); };
        sys.rhs = apply_Binv(b);
        return sys;
    }

  private:
    static GridFn interior(GridFn w) {
        w.zero_boundary();
        return w;
    }

    void finish_layer(GridFn& v, int m) const {
        if (spec_.g) {
            const GridFn gm = boundary(mesh().time(m));
            v.set_boundary([&](std::size_t i) { return gm[i]; });
        } else {
            v.zero_boundary();
        }
    }

    /// rho_bar I + (h_t^2/4) A4(c_bar^2) inverted in the sine basis, rho_bar the
    /// geometric mean of the extreme rho values.
    void build_u4_preconditioner() {
        const double rb = std::sqrt(min_value(spec_.rho) * max_value(spec_.rho));
        const double cb = 1.0 / rb, tau = ht() * ht() / 12.0;
        u4_precond_.resize(mesh().interior_count());
        for_each_mode(mesh(), [&](const std::array<int, kMaxDim>& j, std::size_t n) {
            const double ell = -Lh_symbol(mesh(), j);
            const double g = 1.0 + tau * cb * ell;
            u4_precond_[n] = 1.0 / (rb + 0.25 * ht() * ht() * g * g * cb * ell);
        });
    }

    GridFn solve_upper(const GridFn& b, int m, TimeState& s) const {
        if (direct_) {
            Action K = [this](const GridFn& w) { return apply_K(w); };
            GridFn w = interior(direct_(K, interior(b)));
            s.last_report = SolveReport{};
            s.last_report.converged = true;
            s.iterations.push_back(0);
            return w;
        }
        const LinearSystem sys = canonical_system(b);
        GridFn guess(mesh());
        switch (solver_.guess) {
        case InitialGuess::sigma0_predictor: guess = sigma0_predictor(sys); break;
        case InitialGuess::previous_layer:
            if (m >= 2 && s.w_last.size() == guess.size()) guess = s.w_last;
            break;
        case InitialGuess::linear_extrapolation: break;
        }
        // the fixed Richardson/Chebyshev parameters assume the sigma-scheme bound, which
        // U4 lacks: its constant grows with h_t
        SolverConfig sc = solver_;
        if (unconditional()) sc.method = SolverMethod::steepest_descent;
        auto [w, rep] = solve(sys, sc, guess);
        s.iterations.push_back(rep.iterations);
        s.last_report = std::move(rep);
        return w;
    }

    ProblemSpec spec_;
    SchemeConfig cfg_;
    SolverConfig solver_;
    SchemeOperators ops_;
    DirectSolver direct_;
    std::vector<double> u4_precond_;
};

// ---------------------------------------------------------------------------
// Driver and observers.

class Observer {
  public:
    virtual ~Observer() = default;
    virtual void on_start(const Stepper&, const GridFn& /*v0*/) {}
    /// Called after layer s.m has been computed (m = 1..M).
    virtual void on_layer(const Stepper&, const TimeState&) {}
    virtual void on_finish(const Stepper&, const TimeState&) {}
};

struct RunResult {
    TimeState state;
    StabilityReport stability;
    int max_iterations = 0;
    double seconds = 0.0;
};

inline RunResult run(const Stepper& stepper, std::span<Observer* const> observers = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    RunResult res;
    res.stability = stepper.check_stability();
    const GridFn v0 = stepper.initial_layer();
    for (Observer* o : observers) o->on_start(stepper, v0);
    TimeState s = stepper.first_step();
    for (Observer* o : observers) o->on_layer(stepper, s);
    while (s.m < stepper.mesh().M) {
        stepper.step(s);
        for (Observer* o : observers) o->on_layer(stepper, s);
    }
    for (Observer* o : observers) o->on_finish(stepper, s);
    for (int it : s.iterations) res.max_iterations = std::max(res.max_iterations, it);
    res.state = std::move(s);
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

inline RunResult run(const ProblemSpec& spec, const SchemeConfig& cfg, const SolverConfig& solver = {},
                     std::span<Observer* const> observers = {}) {
    return run(Stepper(spec, cfg, solver), observers);
}

/// Writes "x_1,..,x_n,v" CSV files at requested times, optionally restricted
/// to the line x_axis = value (the nearest node line).
class SnapshotWriter : public Observer {
  public:
    struct Line {
        int axis;
        double value;
    };

    SnapshotWriter(std::filesystem::path dir, std::vector<double> times, std::optional<Line> line = {})
        : dir_(std::move(dir)), times_(std::move(times)), line_(line) {}

    void on_start(const Stepper& st, const GridFn& v0) override { maybe_write(st, 0, v0); }
    void on_layer(const Stepper& st, const TimeState& s) override { maybe_write(st, s.m, s.v_cur); }

    [[nodiscard]] const std::vector<std::filesystem::path>& written() const { return written_; }

    static std::string file_name(double t) {
        std::ostringstream os;
        os << "snapshot_t" << t << ".csv";
        return os.str();
    }

  private:
    void maybe_write(const Stepper& st, int m, const GridFn& v) {
        const Mesh& mesh = st.mesh();
        for (double t : times_)
            if (std::abs(mesh.time(m) - t) < 0.5 * mesh.ht) write(t, v);
    }

    void write(double t, const GridFn& v) {
        const Mesh& m = v.mesh();
        std::filesystem::create_directories(dir_);
        const auto path = dir_ / file_name(t);
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        for (int k = 0; k < m.dim; ++k) out << "x_" << k + 1 << ",";
        out << "v\n";
        int fixed = -1;
        if (line_) {
            CWAVE_REQUIRE(line_->axis >= 0 && line_->axis < m.dim, std::invalid_argument,
                          "snapshot line axis out of range");
            fixed = static_cast<int>(std::lround(line_->value / m.step[line_->axis]));
            fixed = std::clamp(fixed, 0, m.count[line_->axis]);
        }
        char buf[64];
        for (std::size_t i = 0; i < v.size(); ++i) {
            const Index idx = m.unflat(i);
            if (line_ && idx[line_->axis] != fixed) continue;
            const Point x = m.coord(idx);
            for (int k = 0; k < m.dim; ++k) {
                std::snprintf(buf, sizeof buf, "%.16e,", x[k]);
                out << buf;
            }
            std::snprintf(buf, sizeof buf, "%.16e\n", v[i]);
            out << buf;
        }
        written_.push_back(path);
    }

    std::filesystem::path dir_;
    std::vector<double> times_;
    std::optional<Line> line_;
    std::vector<std::filesystem::path> written_;
};

} // namespace cwave
