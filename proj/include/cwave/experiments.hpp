#pragma once

// Reference problems and the harnesses that turn runs into tables.
//
// The equation u_tt - c^2 Delta u = phi of the examples is solved in the form
// rho u_tt - Delta u = rho phi with rho = 1/c^2.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "analysis.hpp"
#include "nonuniform.hpp"

namespace cwave {

struct Reference {
    ProblemSpec spec;
    SpaceTimeField exact; // empty when unknown
};

// ---------------------------------------------------------------------------
// Example 1: X = T = 2, c^2 = 1 + (pi x/8)^2 + (pi y/8)^2, u = sin(pi x) sin(pi y) cos(pi t).
// phi = u_tt - c^2 Delta u = pi^2 (2 c^2 - 1) u, so rho phi = pi^2 (2 - rho) u.

inline Reference example1(int N, int M) {
    constexpr double pi = std::numbers::pi;
    Reference r;
    r.spec.mesh = make_uniform_mesh({2.0, 2.0}, {N, N}, 2.0, M);
    r.spec.rho = sample(
        [](const Point& x) {
            return 1.0 / (1.0 + std::pow(pi * x[0] / 8, 2) + std::pow(pi * x[1] / 8, 2));
        },
        r.spec.mesh);
    r.exact = [](const Point& x, double t) {
        return std::sin(pi * x[0]) * std::sin(pi * x[1]) * std::cos(pi * t);
    };
    r.spec.f = SourceTerm::field([](const Point& x, double t) {
        const double rho = 1.0 / (1.0 + std::pow(pi * x[0] / 8, 2) + std::pow(pi * x[1] / 8, 2));
        return pi * pi * (2.0 - rho) * std::sin(pi * x[0]) * std::sin(pi * x[1]) * std::cos(pi * t);
    });
    r.spec.u0 = [](const Point& x) { return std::sin(pi * x[0]) * std::sin(pi * x[1]); };
    return r;
}

// ---------------------------------------------------------------------------
// Example 2: X = T = 1, c^2 = 1/(1 + x^2 + 4y^2), u = sin(pi x) sin(4 pi y) e^t,
// h_x = 1/N, h_y = 1/(4N), h_t = 1/(8N). rho phi = (rho + 17 pi^2) u.

inline Reference example2(int N) {
    constexpr double pi = std::numbers::pi;
    Reference r;
    r.spec.mesh = make_uniform_mesh({1.0, 1.0}, {N, 4 * N}, 1.0, 8 * N);
    auto rho = [](const Point& x) { return 1.0 + x[0] * x[0] + 4.0 * x[1] * x[1]; };
    r.spec.rho = sample(rho, r.spec.mesh);
    auto mode = [](const Point& x) { return std::sin(pi * x[0]) * std::sin(4 * pi * x[1]); };
    r.exact = [mode](const Point& x, double t) { return mode(x) * std::exp(t); };
    r.spec.f = SourceTerm::field([=](const Point& x, double t) {
        return (rho(x) + 17.0 * pi * pi) * mode(x) * std::exp(t);
    });
    r.spec.u0 = mode;
    r.spec.u1 = mode;
    return r;
}

// ---------------------------------------------------------------------------
// Example 3: three vertical layers of equal thickness on [0, X]^2 with speeds
// s1 | s2 | s3 and a point source delta(x - x0) sin(50 t) exp(-200 t^2).

inline double ricker(double t) { return std::sin(50.0 * t) * std::exp(-200.0 * t * t); }

/// unit: f = delta_h ricker in rho u_tt - Delta u = f (default).
/// rho_source: f = rho(x0) delta_h ricker, i.e. phi = delta ricker in u_tt - c^2 Delta u = phi.
enum class SourceScaling { unit, rho_source };

struct Example3Params {
    double s1 = 1500.0, s2 = 1000.0;
    std::optional<double> s3; // defaults to s1
    double X = 3000.0;
    double x0 = 1500.0, y0 = 1500.0;
    SourceScaling scaling = SourceScaling::unit;

    [[nodiscard]] double speed(double x) const {
        if (x < X / 3.0) return s1;
        if (x <= 2.0 * X / 3.0) return s2;
        return s3.value_or(s1);
    }
};

inline Reference example3(const Example3Params& p, int N, double T, int M) {
    CWAVE_REQUIRE(p.s1 > 0 && p.s2 > 0 && p.s3.value_or(1.0) > 0, std::invalid_argument,
                  "layer speeds must be positive");
    Reference r;
    r.spec.mesh = make_uniform_mesh({p.X, p.X}, {N, N}, T, M);
    r.spec.rho = sample([p](const Point& x) { return 1.0 / (p.speed(x[0]) * p.speed(x[0])); }, r.spec.mesh);
    const double amp = p.scaling == SourceScaling::unit ? 1.0 : 1.0 / (p.speed(p.x0) * p.speed(p.x0));
    r.spec.f = SourceTerm::point({p.x0, p.y0, 0.0}, amp, ricker);
    (void)r.spec.f.node(r.spec.mesh); // rejects off-node centers early
    return r;
}

// ---------------------------------------------------------------------------
// Errors.

struct ErrorNorms {
    double l2 = 0.0;   // ||e||_h
    double linf = 0.0; // max |e| over interior nodes
};

inline ErrorNorms error_norms(const GridFn& v, const GridFn& ref) {
    const GridFn e = v - ref;
    return {norm_h(e), max_norm(e)};
}

inline ErrorNorms error_against(const GridFn& v, const SpaceTimeField& exact, double t) {
    return error_norms(v, sample(exact, v.mesh(), t));
}

/// Values of a fine-mesh function at the nodes of a coarser mesh with the
/// same extents; the ratio of cell counts must be an integer on every axis.
inline GridFn restrict_to(const GridFn& fine, const Mesh& coarse) {
    const Mesh& f = fine.mesh();
    CWAVE_REQUIRE(f.dim == coarse.dim, std::invalid_argument, "restriction between meshes of different dimension");
    Index ratio{1, 1, 1};
    for (int k = 0; k < f.dim; ++k) {
        CWAVE_REQUIRE(f.count[k] % coarse.count[k] == 0 && f.extent[k] == coarse.extent[k],
                      std::invalid_argument, "fine mesh does not refine the coarse mesh");
        ratio[k] = f.count[k] / coarse.count[k];
    }
    GridFn r(coarse);
    for (std::size_t i = 0; i < r.size(); ++i) {
        Index idx = coarse.unflat(i);
        for (int k = 0; k < f.dim; ++k) idx[k] *= ratio[k];
        r[i] = fine.at(idx);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Convergence tables.

struct ConvergenceRow {
    int N = 0;
    std::vector<double> h;
    double ht = 0.0;
    double e_l2 = 0.0, p_l2 = std::numeric_limits<double>::quiet_NaN();
    double e_linf = 0.0, p_linf = std::numeric_limits<double>::quiet_NaN();
    int n_iter = 0;
    double cpu = 0.0;
};

/// Fills p_l2 and p_linf from consecutive rows (N doubling).
inline void fill_rates(std::vector<ConvergenceRow>& rows) {
    std::vector<std::pair<int, double>> l2, li;
    for (const auto& r : rows) {
        l2.emplace_back(r.N, r.e_l2);
        li.emplace_back(r.N, r.e_linf);
    }
    if (rows.size() < 2) return;
    const auto p2 = convergence_rates(l2), pi = convergence_rates(li);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        rows[i].p_l2 = p2[i - 1];
        rows[i].p_linf = pi[i - 1];
    }
}

struct RunOutcome {
    GridFn v;       // layer M
    int n_iter = 0; // max over layers
    double cpu = 0.0;
    StabilityReport stability;
};

inline RunOutcome run_reference(const ProblemSpec& spec, const SchemeConfig& cfg, const SolverConfig& solver,
                                std::span<Observer* const> observers = {}) {
    RunResult res = run(spec, cfg, solver, observers);
    return {std::move(res.state.v_cur), res.max_iterations, res.seconds, res.stability};
}

/// Example 1 (h_t = ratio * h) or Example 2 (h_t = 1/(8N)) over a sequence of N.
enum class ExactExample { example1, example2 };

inline std::vector<ConvergenceRow> run_convergence(ExactExample ex, const std::vector<int>& Ns,
                                                   const SchemeConfig& cfg, const SolverConfig& solver,
                                                   double ht_ratio = 0.25) {
    std::vector<ConvergenceRow> rows;
    for (int N : Ns) {
        Reference ref;
        if (ex == ExactExample::example1) {
            const double M = 2.0 / (ht_ratio * 2.0 / N);
            CWAVE_REQUIRE(std::abs(M - std::round(M)) < 1e-9, std::invalid_argument,
                          "T / (ratio h) must be an integer");
            ref = example1(N, static_cast<int>(std::lround(M)));
        } else {
            ref = example2(N);
        }
        const RunOutcome out = run_reference(ref.spec, cfg, solver);
        const ErrorNorms e = error_against(out.v, ref.exact, ref.spec.mesh.T);
        ConvergenceRow row;
        row.N = N;
        for (int k = 0; k < ref.spec.mesh.dim; ++k) row.h.push_back(ref.spec.mesh.step[k]);
        row.ht = ref.spec.mesh.ht;
        row.e_l2 = e.l2;
        row.e_linf = e.linf;
        row.n_iter = out.n_iter;
        row.cpu = out.cpu;
        rows.push_back(row);
    }
    fill_rates(rows);
    return rows;
}

// ---------------------------------------------------------------------------
// Iteration counts of Example 1 on h = 1/32 for several M and solver eps0^2.

struct IterationCell {
    int M = 0;
    double eps0_sq = 0.0;
    int predictor = 0; // sigma = 0 predictor guess
    int previous = 0;  // previous layer's w as the guess
};

inline std::vector<IterationCell> iteration_table(const std::vector<int>& Ms, const std::vector<double>& eps,
                                                  const SchemeConfig& cfg, SolverConfig solver, int N = 64) {
    std::vector<IterationCell> cells;
    for (int M : Ms)
        for (double e : eps) {
            IterationCell c{M, e, 0, 0};
            const Reference ref = example1(N, M);
            solver.eps0_sq = e;
            solver.guess = InitialGuess::sigma0_predictor;
            c.predictor = run_reference(ref.spec, cfg, solver).n_iter;
            solver.guess = InitialGuess::previous_layer;
            c.previous = run_reference(ref.spec, cfg, solver).n_iter;
            cells.push_back(c);
        }
    return cells;
}

// ---------------------------------------------------------------------------
// Example 3 harnesses.

struct Example3Cell {
    double s1 = 0.0, T = 0.0, h = 0.0, ht = 0.0;
    int n_iter = 0;
    double cpu = 0.0;
};

/// One cell of the iteration-robustness table.
inline Example3Cell example3_iterations(Example3Params p, double T, int N, double ht, const SchemeConfig& cfg,
                                        const SolverConfig& solver) {
    const double Mf = T / ht;
    CWAVE_REQUIRE(std::abs(Mf - std::round(Mf)) < 1e-6, std::invalid_argument, "T / h_t must be an integer");
    const Reference ref = example3(p, N, T, static_cast<int>(std::lround(Mf)));
    const RunOutcome out = run_reference(ref.spec, cfg, solver);
    return {p.s1, T, p.X / N, ht, out.n_iter, out.cpu};
}

struct SelfConvergenceRow {
    double s1 = 0.0;
    int N = 0;
    double h = 0.0, ht = 0.0;
    double e_l2 = 0.0, p_l2 = std::numeric_limits<double>::quiet_NaN(); // (1/X) ||.||_h
    double e_linf = 0.0, p_linf = std::numeric_limits<double>::quiet_NaN();
};

/// Solutions at t = T on N, 2N, ... with h_t = T/N; missing entries of `cache` are computed.
struct Example3Solutions {
    std::map<std::tuple<int, int, int>, GridFn> by_scheme_N; // (variant, N, M)
};

inline const GridFn& example3_solution(Example3Solutions& cache, const Example3Params& p, Variant v, int N,
                                       double T, int M, SchemeConfig cfg, const SolverConfig& solver) {
    const auto key = std::make_tuple(static_cast<int>(v), N, M);
    auto it = cache.by_scheme_N.find(key);
    if (it != cache.by_scheme_N.end()) return it->second;
    cfg.variant = v;
    const Reference ref = example3(p, N, T, M);
    GridFn sol = run_reference(ref.spec, cfg, solver).v;
    return cache.by_scheme_N.emplace(key, std::move(sol)).first->second;
}

/// e(N) = v_N - v_2N on the N mesh, h_t = T/N, scheme S0.
inline std::vector<SelfConvergenceRow> example3_self_convergence(const Example3Params& p, const std::vector<int>& Ns,
                                                                 double T, const SchemeConfig& cfg,
                                                                 const SolverConfig& solver,
                                                                 Example3Solutions& cache) {
    std::vector<SelfConvergenceRow> rows;
    for (int N : Ns) {
        const GridFn& coarse = example3_solution(cache, p, cfg.variant, N, T, N, cfg, solver);
        const GridFn& fine = example3_solution(cache, p, cfg.variant, 2 * N, T, 2 * N, cfg, solver);
        const ErrorNorms e = error_norms(coarse, restrict_to(fine, coarse.mesh()));
        SelfConvergenceRow r;
        r.s1 = p.s1;
        r.N = N;
        r.h = p.X / N;
        r.ht = T / N;
        r.e_l2 = e.l2 / p.X;
        r.e_linf = e.linf;
        rows.push_back(r);
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
        rows[i].p_l2 = std::log2(rows[i - 1].e_l2 / rows[i].e_l2);
        rows[i].p_linf = std::log2(rows[i - 1].e_linf / rows[i].e_linf);
    }
    return rows;
}

/// Explicit scheme on N with h_t = T/N against S0 on N_ref with h_t = T/M_ref.
inline std::vector<SelfConvergenceRow> example3_explicit_errors(const Example3Params& p, const std::vector<int>& Ns,
                                                                double T, int N_ref, int M_ref,
                                                                const SchemeConfig& cfg,
                                                                const SolverConfig& solver,
                                                                Example3Solutions& cache) {
    const GridFn& ref = example3_solution(cache, p, Variant::S0, N_ref, T, M_ref, cfg, solver);
    std::vector<SelfConvergenceRow> rows;
    for (int N : Ns) {
        const GridFn& z = example3_solution(cache, p, Variant::EXPL2, N, T, N, cfg, solver);
        const ErrorNorms e = error_norms(z, restrict_to(ref, z.mesh()));
        SelfConvergenceRow r;
        r.s1 = p.s1;
        r.N = N;
        r.h = p.X / N;
        r.ht = T / N;
        r.e_l2 = e.l2 / p.X;
        r.e_linf = e.linf;
        rows.push_back(r);
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
        rows[i].p_l2 = std::log2(rows[i - 1].e_l2 / rows[i].e_l2);
        rows[i].p_linf = std::log2(rows[i - 1].e_linf / rows[i].e_linf);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// CSV tables: header row, '.' decimal point, %.16e values.

class CsvTable {
  public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add(std::vector<double> row) {
        CWAVE_REQUIRE(row.size() == header_.size(), std::invalid_argument, "row width differs from header");
        rows_.push_back(std::move(row));
    }

    [[nodiscard]] const std::vector<std::string>& header() const { return header_; }
    [[nodiscard]] const std::vector<std::vector<double>>& rows() const { return rows_; }

    void write(std::ostream& out) const {
        for (std::size_t i = 0; i < header_.size(); ++i) out << (i ? "," : "") << header_[i];
        out << "\n";
        char buf[64];
        for (const auto& r : rows_) {
            for (std::size_t i = 0; i < r.size(); ++i) {
                if (std::isnan(r[i]))
                    std::snprintf(buf, sizeof buf, "%s", "nan");
                else
                    std::snprintf(buf, sizeof buf, "%.16e", r[i]);
                out << (i ? "," : "") << buf;
            }
            out << "\n";
        }
    }

    void write(const std::filesystem::path& path) const {
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        write(out);
    }

    static CsvTable read(std::istream& in) {
        std::string line;
        CWAVE_REQUIRE(static_cast<bool>(std::getline(in, line)), std::invalid_argument, "empty CSV");
        std::vector<std::string> header;
        {
            std::istringstream is(line);
            std::string cell;
            while (std::getline(is, cell, ',')) header.push_back(cell);
        }
        CsvTable t(header);
        int no = 1;
        while (std::getline(in, line)) {
            ++no;
            if (line.empty()) continue;
            std::istringstream is(line);
            std::string cell;
            std::vector<double> row;
            while (std::getline(is, cell, ',')) {
                if (cell == "nan") {
                    row.push_back(std::numeric_limits<double>::quiet_NaN());
                    continue;
                }
                std::size_t used = 0;
                double v = 0.0;
                try {
                    v = std::stod(cell, &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                CWAVE_REQUIRE(used == cell.size() && !cell.empty(), std::invalid_argument,
                              "CSV line " + std::to_string(no) + ": bad number '" + cell + "'");
                row.push_back(v);
            }
            CWAVE_REQUIRE(row.size() == header.size(), std::invalid_argument,
                          "CSV line " + std::to_string(no) + ": expected " + std::to_string(header.size()) +
                              " columns");
            t.rows_.push_back(std::move(row));
        }
        return t;
    }

  private:
    std::vector<std::string> header_;
    std::vector<std::vector<double>> rows_;
};

inline CsvTable convergence_csv(const std::vector<ConvergenceRow>& rows) {
    const int dim = rows.empty() ? 2 : static_cast<int>(rows.front().h.size());
    std::vector<std::string> header{"N"};
    for (int k = 0; k < dim; ++k) header.push_back("h_" + std::to_string(k + 1));
    for (const char* c : {"h_t", "e_L2", "p_L2", "e_Linf", "p_Linf", "N_iter", "cpu_time"}) header.emplace_back(c);
    CsvTable t(header);
    for (const auto& r : rows) {
        std::vector<double> v{double(r.N)};
        v.insert(v.end(), r.h.begin(), r.h.end());
        v.insert(v.end(), {r.ht, r.e_l2, r.p_l2, r.e_linf, r.p_linf, double(r.n_iter), r.cpu});
        t.add(std::move(v));
    }
    return t;
}

inline CsvTable iteration_csv(const std::vector<IterationCell>& cells) {
    CsvTable t({"M", "eps0_sq", "theta", "N_iter", "N_iter_previous_layer"});
    for (const auto& c : cells)
        t.add({double(c.M), c.eps0_sq, theta_opt(c.eps0_sq), double(c.predictor), double(c.previous)});
    return t;
}

inline CsvTable example3_iteration_csv(const std::vector<Example3Cell>& cells) {
    CsvTable t({"s1", "T", "h", "h_t", "N_iter", "cpu_time"});
    for (const auto& c : cells) t.add({c.s1, c.T, c.h, c.ht, double(c.n_iter), c.cpu});
    return t;
}

inline CsvTable self_convergence_csv(const std::vector<SelfConvergenceRow>& rows) {
    CsvTable t({"s1", "N", "h", "h_t", "e_L2", "p_L2", "e_Linf", "p_Linf"});
    for (const auto& r : rows) t.add({r.s1, double(r.N), r.h, r.ht, r.e_l2, r.p_l2, r.e_linf, r.p_linf});
    return t;
}

} // namespace cwave
