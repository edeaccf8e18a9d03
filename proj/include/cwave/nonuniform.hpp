#pragma once

// The s̄_N / Ā_N scheme for n = 1 on meshes non-uniform in x and t:
//
//   (1/h_*t) { s(rho delta_t v) + (h_*t h_t+ / 12) beta_t A delta_t v
//              - [ s(rho dbar_t v) + (h_*t h_t / 12) alpha_t A dbar_t v ] } + A v = s s_tN f
//
// with s the generalized Numerov average (alpha w_{l-1} + 10 gamma w_l + beta w_{l+1})/12
// and A = -a^2 Lambda_1. Each layer is one tridiagonal solve for delta_t v.

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "schemes.hpp"

namespace cwave {

struct NonUniMesh1D {
    std::vector<double> x; // 0 = x_0 < ... < x_N = X
    std::vector<double> t; // 0 = t_0 < ... < t_M = T

    [[nodiscard]] int N() const { return static_cast<int>(x.size()) - 1; }
    [[nodiscard]] int M() const { return static_cast<int>(t.size()) - 1; }
    [[nodiscard]] double h(int l) const { return x[l] - x[l - 1]; }   // h_l, 1 <= l <= N
    [[nodiscard]] double ht(int m) const { return t[m] - t[m - 1]; }  // h_tm, 1 <= m <= M
    [[nodiscard]] double h_star(int l) const { return 0.5 * (h(l) + h(l + 1)); }
    [[nodiscard]] double ht_star(int m) const { return 0.5 * (ht(m) + ht(m + 1)); }

    [[nodiscard]] double h_max() const {
        double r = 0.0;
        for (int l = 1; l <= N(); ++l) r = std::max(r, h(l));
        return r;
    }
    [[nodiscard]] double ht_max() const {
        double r = 0.0;
        for (int m = 1; m <= M(); ++m) r = std::max(r, ht(m));
        return r;
    }
};

inline void validate(const NonUniMesh1D& m) {
    CWAVE_REQUIRE(m.x.size() >= 3, std::invalid_argument, "space mesh needs at least one interior node");
    CWAVE_REQUIRE(m.t.size() >= 3, std::invalid_argument, "time mesh needs at least two steps");
    CWAVE_REQUIRE(m.x.front() == 0.0 && m.t.front() == 0.0, std::invalid_argument,
                  "space and time meshes must start at 0");
    for (std::size_t i = 1; i < m.x.size(); ++i)
        CWAVE_REQUIRE(m.x[i] > m.x[i - 1], std::invalid_argument,
                      "space nodes must increase strictly (node " + std::to_string(i) + ")");
    for (std::size_t i = 1; i < m.t.size(); ++i)
        CWAVE_REQUIRE(m.t[i] > m.t[i - 1], std::invalid_argument,
                      "time nodes must increase strictly (node " + std::to_string(i) + ")");
}

inline NonUniMesh1D uniform_nonuni_mesh(double X, int N, double T, int M) {
    NonUniMesh1D m;
    for (int l = 0; l <= N; ++l) m.x.push_back(l == N ? X : X * l / N);
    for (int k = 0; k <= M; ++k) m.t.push_back(k == M ? T : T * k / M);
    return m;
}

struct NumerovCoeffs {
    double alpha = 1.0, beta = 1.0, gamma = 1.0;
};

/// alpha = 2 - h+^2/(h h*), beta = 2 - h^2/(h+ h*), gamma = 1 + (h+ - h)^2/(5 h h+).
inline NumerovCoeffs numerov_coeffs(double h, double hp) {
    const double hs = 0.5 * (h + hp);
    return {2.0 - hp * hp / (h * hs), 2.0 - h * h / (hp * hs), 1.0 + (hp - h) * (hp - h) / (5.0 * h * hp)};
}

struct NonUniCoeffs {
    std::vector<NumerovCoeffs> space; // index l = 1..N-1 (entry 0 and N unused)
    std::vector<NumerovCoeffs> time;  // index m = 1..M-1
};

inline NonUniCoeffs nonuni_coeffs(const NonUniMesh1D& m) {
    validate(m);
    NonUniCoeffs c;
    c.space.resize(m.x.size());
    c.time.resize(m.t.size());
    for (int l = 1; l < m.N(); ++l) c.space[l] = numerov_coeffs(m.h(l), m.h(l + 1));
    for (int k = 1; k < m.M(); ++k) c.time[k] = numerov_coeffs(m.ht(k), m.ht(k + 1));
    return c;
}

// ---------------------------------------------------------------------------
// Mesh file: a "space" section and a "time" section, one coordinate per line.
// Blank lines and lines starting with '#' are ignored.

inline NonUniMesh1D read_nonuni_mesh(std::istream& in, const std::string& name = "mesh") {
    NonUniMesh1D m;
    std::vector<double>* cur = nullptr;
    std::string line;
    int no = 0;
    auto fail = [&](const std::string& why) {
        throw std::invalid_argument(name + ":" + std::to_string(no) + ": " + why);
    };
    while (std::getline(in, line)) {
        ++no;
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos || line[b] == '#') continue;
        std::string word = line.substr(b);
        word.erase(word.find_last_not_of(" \t\r") + 1);
        std::string lower = word;
        for (char& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        if (lower == "space" || lower == "time") {
            cur = lower == "space" ? &m.x : &m.t;
            if (!cur->empty()) fail("section '" + lower + "' appears twice");
            continue;
        }
        if (!cur) fail("coordinate before the first section header");
        std::istringstream is(word);
        double v;
        std::string rest;
        if (!(is >> v) || (is >> rest)) fail("expected one number, got '" + word + "'");
        cur->push_back(v);
    }
    try {
        validate(m);
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(name + ": " + e.what());
    }
    return m;
}

inline NonUniMesh1D read_nonuni_mesh(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open mesh file " + path.string());
    return read_nonuni_mesh(in, path.string());
}

inline void write_nonuni_mesh(std::ostream& out, const NonUniMesh1D& m) {
    char buf[64];
    out << "space\n";
    for (double v : m.x) {
        std::snprintf(buf, sizeof buf, "%.17g\n", v);
        out << buf;
    }
    out << "time\n";
    for (double v : m.t) {
        std::snprintf(buf, sizeof buf, "%.17g\n", v);
        out << buf;
    }
}

// ---------------------------------------------------------------------------

enum class NonUniF0 { standard, slowly_varying };

struct NonUniProblem {
    NonUniMesh1D mesh;
    std::function<double(double)> rho;
    double a = 1.0;
    std::function<double(double, double)> f;  // empty means zero
    std::function<double(double)> u0, u1;     // empty means zero
    std::function<double(double, double)> g;  // empty means homogeneous
    NonUniF0 f0 = NonUniF0::standard;
    F0Variant f0_variant = F0Variant::half_step; // used by slowly_varying
};

/// Solves a tridiagonal system; sub[0] and sup[n-1] are ignored.
inline std::vector<double> solve_tridiagonal(std::vector<double> sub, std::vector<double> diag,
                                             std::vector<double> sup, std::vector<double> rhs) {
    const std::size_t n = diag.size();
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(diag[i]) + std::abs(sub[i]) + std::abs(sup[i]));
    for (std::size_t i = 0; i < n; ++i) {
        if (!(std::abs(diag[i]) > 1e-14 * scale)) {
            SolveReport rep;
            throw SolverFailure("tridiagonal system is singular at row " + std::to_string(i), rep);
        }
        if (i + 1 < n) {
            const double w = sub[i + 1] / diag[i];
            diag[i + 1] -= w * sup[i];
            rhs[i + 1] -= w * rhs[i];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) x[i] = (rhs[i] - (i + 1 < n ? sup[i] * x[i + 1] : 0.0)) / diag[i];
    return x;
}

struct NonUniState {
    std::vector<double> v_prev, v_cur; // full layers, nodes 0..N
    int m = 0;
};

class NonUniStepper {
  public:
    explicit NonUniStepper(NonUniProblem p) : p_(std::move(p)), c_(nonuni_coeffs(p_.mesh)) {
        CWAVE_REQUIRE(static_cast<bool>(p_.rho), std::invalid_argument, "rho is required");
        CWAVE_REQUIRE(p_.a > 0.0, std::invalid_argument, "a must be positive");
        rho_.resize(p_.mesh.x.size());
        for (std::size_t l = 0; l < rho_.size(); ++l) {
            rho_[l] = p_.rho(p_.mesh.x[l]);
            CWAVE_REQUIRE(rho_[l] > 0.0, std::invalid_argument, "rho must be positive");
        }
        if (p_.u0 && p_.g) {
            for (int l : {0, p_.mesh.N()})
                CWAVE_REQUIRE(std::abs(p_.u0(p_.mesh.x[l]) - p_.g(p_.mesh.x[l], 0.0)) <= 1e-10,
                              std::invalid_argument, "u0 disagrees with g at t = 0 on the boundary");
        }
    }

    [[nodiscard]] const NonUniMesh1D& mesh() const { return p_.mesh; }
    [[nodiscard]] const NonUniCoeffs& coeffs() const { return c_; }
    [[nodiscard]] const std::vector<double>& rho() const { return rho_; }

    /// (s w)_l on interior nodes; entries 0 and N are zero.
    [[nodiscard]] std::vector<double> apply_s(const std::vector<double>& w) const {
        std::vector<double> r(w.size(), 0.0);
        for (int l = 1; l < p_.mesh.N(); ++l) {
            const auto& k = c_.space[l];
            r[l] = (k.alpha * w[l - 1] + 10.0 * k.gamma * w[l] + k.beta * w[l + 1]) / 12.0;
        }
        return r;
    }

    /// (Lambda_1 w)_l on interior nodes.
    [[nodiscard]] std::vector<double> apply_lambda(const std::vector<double>& w) const {
        const auto& m = p_.mesh;
        std::vector<double> r(w.size(), 0.0);
        for (int l = 1; l < m.N(); ++l)
            r[l] = ((w[l + 1] - w[l]) / m.h(l + 1) - (w[l] - w[l - 1]) / m.h(l)) / m.h_star(l);
        return r;
    }

    [[nodiscard]] std::vector<double> apply_A(const std::vector<double>& w) const {
        std::vector<double> r = apply_lambda(w);
        for (double& x : r) x *= -p_.a * p_.a;
        return r;
    }

    [[nodiscard]] std::vector<double> sample_f(double t) const {
        std::vector<double> r(p_.mesh.x.size(), 0.0);
        if (p_.f)
            for (std::size_t l = 0; l < r.size(); ++l) r[l] = p_.f(p_.mesh.x[l], t);
        return r;
    }

    [[nodiscard]] std::vector<double> sample_g(double t) const {
        std::vector<double> r(p_.mesh.x.size(), 0.0);
        if (p_.g) {
            r.front() = p_.g(p_.mesh.x.front(), t);
            r.back() = p_.g(p_.mesh.x.back(), t);
        }
        return r;
    }

    [[nodiscard]] NonUniState first_step() const {
        const auto& m = p_.mesh;
        const int N = m.N();
        const double h1 = m.ht(1);
        NonUniState s;
        s.v_prev.assign(N + 1, 0.0);
        if (p_.u0)
            for (int l = 0; l <= N; ++l) s.v_prev[l] = p_.u0(m.x[l]);
        set_boundary(s.v_prev, 0.0);
        std::vector<double> u1(N + 1, 0.0);
        if (p_.u1)
            for (int l = 0; l <= N; ++l) u1[l] = p_.u1(m.x[l]);

        // right side
        std::vector<double> rhs = apply_s(mul(rho_, u1));
        add(rhs, apply_A(s.v_prev), -0.5 * h1);
        add(rhs, apply_A(u1), -h1 * h1 / 12.0);
        add(rhs, fN0(), 0.5 * h1);
        // known boundary part of delta_t v^0
        const std::vector<double> g0 = sample_g(0.0), g1 = sample_g(h1);
        std::vector<double> W(N + 1, 0.0);
        if (p_.g)
            for (int l : {0, N}) W[l] = (g1[l] - g0[l]) / h1;
        const std::vector<double> d = solve_layer(rhs, W, 1.0, h1 * h1 / 12.0);
        s.v_cur = s.v_prev;
        for (int l = 0; l <= N; ++l) s.v_cur[l] += h1 * (d[l] + W[l]);
        set_boundary(s.v_cur, m.t[1]);
        s.m = 1;
        return s;
    }

    void step(NonUniState& s) const {
        const auto& m = p_.mesh;
        CWAVE_REQUIRE(s.m >= 1 && s.m <= m.M() - 1, std::out_of_range, "no layer left to compute");
        const int N = m.N(), k = s.m;
        const double ht = m.ht(k), hp = m.ht(k + 1), hs = m.ht_star(k);
        const auto& ct = c_.time[k];
        std::vector<double> db(N + 1);
        for (int l = 0; l <= N; ++l) db[l] = (s.v_cur[l] - s.v_prev[l]) / ht;

        // s s_tN f
        std::vector<double> fs(N + 1, 0.0);
        if (p_.f) {
            const auto fm = sample_f(m.t[k - 1]), f0 = sample_f(m.t[k]), fp = sample_f(m.t[k + 1]);
            for (int l = 0; l <= N; ++l) fs[l] = (ct.alpha * fm[l] + 10.0 * ct.gamma * f0[l] + ct.beta * fp[l]) / 12.0;
            fs = apply_s(fs);
        }
        std::vector<double> rhs(N + 1, 0.0);
        add(rhs, fs, hs);
        add(rhs, apply_A(s.v_cur), -hs);
        add(rhs, apply_s(mul(rho_, db)), 1.0);
        add(rhs, apply_A(db), hs * ht / 12.0 * ct.alpha);

        const std::vector<double> gc = sample_g(m.t[k]), gn = sample_g(m.t[k + 1]);
        std::vector<double> W(N + 1, 0.0);
        if (p_.g)
            for (int l : {0, N}) W[l] = (gn[l] - gc[l]) / hp;
        const std::vector<double> d = solve_layer(rhs, W, 1.0, hs * hp / 12.0 * ct.beta);
        std::vector<double> next = s.v_cur;
        for (int l = 0; l <= N; ++l) next[l] += hp * (d[l] + W[l]);
        set_boundary(next, m.t[k + 1]);
        s.v_prev = std::move(s.v_cur);
        s.v_cur = std::move(next);
        ++s.m;
    }

    /// Runs to t_M; `on_layer(m, v)` sees every layer including v^0.
    NonUniState run(const std::function<void(int, const std::vector<double>&)>& on_layer = {}) const {
        NonUniState s = first_step();
        if (on_layer) {
            on_layer(0, s.v_prev);
            on_layer(1, s.v_cur);
        }
        while (s.m < p_.mesh.M()) {
            step(s);
            if (on_layer) on_layer(s.m, s.v_cur);
        }
        return s;
    }

  private:
    static std::vector<double> mul(const std::vector<double>& a, const std::vector<double>& b) {
        std::vector<double> r(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] * b[i];
        return r;
    }

    static void add(std::vector<double>& r, const std::vector<double>& w, double c) {
        for (std::size_t i = 0; i < r.size(); ++i) r[i] += c * w[i];
    }

    void set_boundary(std::vector<double>& v, double t) const {
        const auto g = sample_g(t);
        v.front() = g.front();
        v.back() = g.back();
    }

    /// s(rho w) * cs + cA * A w = rhs - (same operator on the boundary part W), interior unknowns.
    [[nodiscard]] std::vector<double> solve_layer(std::vector<double> rhs, const std::vector<double>& W,
                                                  double cs, double cA) const {
        const auto& m = p_.mesh;
        const int N = m.N(), n = N - 1;
        const double a2 = p_.a * p_.a;
        std::vector<double> sub(n), diag(n), sup(n), b(n);
        for (int l = 1; l < N; ++l) {
            const auto& k = c_.space[l];
            const double hl = m.h(l), hr = m.h(l + 1), hs = m.h_star(l);
            // coefficients of w_{l-1}, w_l, w_{l+1}
            const double cm = cs * k.alpha * rho_[l - 1] / 12.0 - cA * a2 / (hl * hs);
            const double c0 = cs * 10.0 * k.gamma * rho_[l] / 12.0 + cA * a2 * (1.0 / hl + 1.0 / hr) / hs;
            const double cp = cs * k.beta * rho_[l + 1] / 12.0 - cA * a2 / (hr * hs);
            sub[l - 1] = cm;
            diag[l - 1] = c0;
            sup[l - 1] = cp;
            b[l - 1] = rhs[l];
            if (l == 1) b[0] -= cm * W[0];
            if (l == N - 1) b[n - 1] -= cp * W[N];
        }
        const std::vector<double> x = solve_tridiagonal(sub, diag, sup, b);
        std::vector<double> r(N + 1, 0.0);
        for (int l = 1; l < N; ++l) r[l] = x[l - 1];
        return r;
    }

    [[nodiscard]] std::vector<double> fN0() const {
        const auto& m = p_.mesh;
        const double h1 = m.ht(1);
        std::vector<double> r(m.x.size(), 0.0);
        if (!p_.f) return r;
        const auto f0 = sample_f(0.0);
        if (p_.f0 == NonUniF0::standard) {
            // s f^0 + (h_t1/3) (delta_t f)^0
            r = apply_s(f0);
            const auto f1 = sample_f(m.t[1]);
            for (int l = 1; l < m.N(); ++l) r[l] += (f1[l] - f0[l]) / 3.0;
            return r;
        }
        // s f^0 - f^0 + f_dht^(0)
        std::vector<double> dht(m.x.size(), 0.0);
        switch (p_.f0_variant) {
        case F0Variant::three_level:
            add(dht, f0, 7.0 / 12.0);
            add(dht, sample_f(h1), 0.5);
            add(dht, sample_f(2 * h1), -1.0 / 12.0);
            break;
        case F0Variant::half_step:
            add(dht, f0, 1.0 / 3.0);
            add(dht, sample_f(0.5 * h1), 2.0 / 3.0);
            break;
        case F0Variant::symmetric_m1:
            add(dht, sample_f(-h1), -1.0 / 12.0);
            add(dht, f0, 5.0 / 6.0);
            add(dht, sample_f(h1), 0.25);
            break;
        }
        r = apply_s(f0);
        for (int l = 1; l < m.N(); ++l) r[l] += dht[l] - f0[l];
        return r;
    }

    NonUniProblem p_;
    NonUniCoeffs c_;
    std::vector<double> rho_;
};

} // namespace cwave
