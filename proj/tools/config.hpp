#pragma once

// JSON run configuration for the command-line tool.
//
//   {
//     "problem":  { "example1": { "N": 32, "ht_ratio": 0.25 } },
//     "scheme":   { "variant": "S0", "eps0_sq": 0.5, "f0": "half_step" },
//     "solver":   { "method": "richardson", "eps0_sq": 0.5, "tol": 1e-10 },
//     "output":   { "table": "table.csv", "ledger": "ledger.csv",
//                   "snapshots": { "times": [0.5, 1.0], "line": { "axis": 1, "value": 1.0 } } }
//   }
//
// "problem" holds exactly one of example1, example2, example3, manufactured, from_file.
// Unknown keys are errors; every error names the offending field path.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "cwave/experiments.hpp"

namespace cwave::cli {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Example1Problem {
    int N = 32;
    double ht_ratio = 0.25; // h_t = ratio * h
};

struct Example2Problem {
    int N = 16;
};

struct Example3Problem {
    Example3Params params;
    int N = 200;
    double T = 0.8;
    double ht = 0.004;
};

/// u = prod_k sin(j_k pi x_k / X_k) cos(omega t + phase) with constant rho and a_k;
/// "zero" gives u = 0.
struct ManufacturedProblem {
    std::string solution = "standing_wave";
    std::vector<double> extent{1.0, 1.0};
    std::vector<int> N{16, 16};
    double T = 1.0;
    int M = 64;
    double rho = 1.0;
    std::vector<double> a;
    std::vector<int> modes{1, 1};
    double omega = 1.0, phase = 0.0;
};

/// Non-uniform 1D mesh read from a file, same solution family as ManufacturedProblem.
struct FromFileProblem {
    std::filesystem::path mesh;
    std::string solution = "standing_wave";
    double rho = 1.0, a = 1.0;
    int mode = 1;
    double omega = 1.0, phase = 0.0;
    NonUniF0 f0 = NonUniF0::standard;
};

using Problem = std::variant<Example1Problem, Example2Problem, Example3Problem, ManufacturedProblem, FromFileProblem>;

struct OutputConfig {
    std::optional<std::filesystem::path> table, ledger;
    std::vector<double> snapshot_times;
    std::optional<SnapshotWriter::Line> line;
};

struct RunConfig {
    Problem problem = Example1Problem{};
    SchemeConfig scheme;
    SolverConfig solver;
    OutputConfig output;
};

namespace detail {

using nlohmann::json;

/// Object reader that tracks consumed keys so leftovers can be reported.
class Fields {
  public:
    Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
    }

    [[nodiscard]] std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }

    const json& raw(const std::string& key) {
        used_.insert(key);
        return j_.at(key);
    }

    template <class T>
    T get(const std::string& key, T fallback) {
        if (!has(key)) return fallback;
        return convert<T>(raw(key), at(key));
    }

    template <class T>
    T require(const std::string& key) {
        if (!has(key)) throw ConfigError(at(key) + ": required field is missing");
        return convert<T>(raw(key), at(key));
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) throw ConfigError(at(it.key()) + ": unknown field");
    }

    template <class T>
    static T convert(const json& v, const std::string& path) {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(path + ": expected true or false");
            return v.get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
            return v.get<T>();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(path + ": expected a number");
            return v.get<T>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(path + ": expected a string");
            return v.get<std::string>();
        } else {
            if (!v.is_array()) throw ConfigError(path + ": expected an array");
            T out;
            for (std::size_t i = 0; i < v.size(); ++i)
                out.push_back(convert<typename T::value_type>(v[i], path + "[" + std::to_string(i) + "]"));
            return out;
        }
    }

  private:
    [[nodiscard]] std::string where() const { return path_.empty() ? "<root>" : path_; }

    const json& j_;
    std::string path_;
    std::set<std::string> used_;
};

template <class E>
E pick(const std::string& path, const std::string& name, const std::map<std::string, E>& options) {
    auto it = options.find(name);
    if (it != options.end()) return it->second;
    std::string list;
    for (const auto& [k, v] : options) list += (list.empty() ? "" : ", ") + k;
    throw ConfigError(path + ": unknown value '" + name + "' (expected one of " + list + ")");
}

inline Problem parse_problem(Fields& root) {
    if (!root.has("problem")) throw ConfigError("problem: required field is missing");
    const json& pj = root.raw("problem");
    if (!pj.is_object() || pj.size() != 1)
        throw ConfigError("problem: expected an object with exactly one of example1, example2, example3, "
                          "manufactured, from_file");
    const std::string kind = pj.begin().key();
    const std::string path = "problem." + kind;
    Fields p(pj.begin().value(), path);
    Problem out;
    if (kind == "example1") {
        Example1Problem e;
        e.N = p.get("N", e.N);
        e.ht_ratio = p.get("ht_ratio", e.ht_ratio);
        if (e.N < 2) throw ConfigError(path + ".N: must be at least 2");
        if (!(e.ht_ratio > 0)) throw ConfigError(path + ".ht_ratio: must be positive");
        out = e;
    } else if (kind == "example2") {
        Example2Problem e;
        e.N = p.get("N", e.N);
        if (e.N < 2) throw ConfigError(path + ".N: must be at least 2");
        out = e;
    } else if (kind == "example3") {
        Example3Problem e;
        e.N = p.get("N", e.N);
        e.T = p.get("T", e.T);
        e.ht = p.get("ht", e.ht);
        e.params.s1 = p.get("s1", e.params.s1);
        e.params.s2 = p.get("s2", e.params.s2);
        if (p.has("s3")) e.params.s3 = p.get("s3", 0.0);
        e.params.X = p.get("X", e.params.X);
        e.params.x0 = p.get("x0", e.params.x0);
        e.params.y0 = p.get("y0", e.params.y0);
        e.params.scaling = pick<SourceScaling>(path + ".scaling", p.get<std::string>("scaling", "unit"),
                                               {{"unit", SourceScaling::unit}, {"rho", SourceScaling::rho_source}});
        if (e.N < 2) throw ConfigError(path + ".N: must be at least 2");
        if (!(e.T > 0) || !(e.ht > 0)) throw ConfigError(path + ".ht: T and ht must be positive");
        if (std::abs(e.T / e.ht - std::round(e.T / e.ht)) > 1e-6)
            throw ConfigError(path + ".ht: T / ht must be an integer");
        if (!(e.params.s1 > 0)) throw ConfigError(path + ".s1: must be positive");
        if (!(e.params.s2 > 0)) throw ConfigError(path + ".s2: must be positive");
        if (e.params.s3 && !(*e.params.s3 > 0)) throw ConfigError(path + ".s3: must be positive");
        out = e;
    } else if (kind == "manufactured") {
        ManufacturedProblem e;
        e.solution = p.get("solution", e.solution);
        e.extent = p.get("extent", e.extent);
        e.N = p.get("N", e.N);
        e.T = p.get("T", e.T);
        e.M = p.get("M", e.M);
        e.rho = p.get("rho", e.rho);
        e.a = p.get("a", e.a);
        e.modes = p.get("modes", std::vector<int>(e.extent.size(), 1));
        e.omega = p.get("omega", e.omega);
        e.phase = p.get("phase", e.phase);
        (void)pick<int>(path + ".solution", e.solution, {{"zero", 0}, {"standing_wave", 1}});
        const std::size_t n = e.extent.size();
        if (n < 1 || n > 3) throw ConfigError(path + ".extent: need 1 to 3 axes");
        if (e.N.size() != n) throw ConfigError(path + ".N: need one count per axis");
        if (e.modes.size() != n) throw ConfigError(path + ".modes: need one mode per axis");
        if (!e.a.empty() && e.a.size() != n) throw ConfigError(path + ".a: need one speed per axis");
        if (!(e.rho > 0)) throw ConfigError(path + ".rho: must be positive");
        if (e.M < 2) throw ConfigError(path + ".M: must be at least 2");
        out = e;
    } else if (kind == "from_file") {
        FromFileProblem e;
        e.mesh = p.require<std::string>("mesh");
        e.solution = p.get("solution", e.solution);
        e.rho = p.get("rho", e.rho);
        e.a = p.get("a", e.a);
        e.mode = p.get("mode", e.mode);
        e.omega = p.get("omega", e.omega);
        e.phase = p.get("phase", e.phase);
        e.f0 = pick<NonUniF0>(path + ".f0", p.get<std::string>("f0", "default"),
                              {{"default", NonUniF0::standard}, {"slowly_varying", NonUniF0::slowly_varying}});
        (void)pick<int>(path + ".solution", e.solution, {{"zero", 0}, {"standing_wave", 1}});
        if (!(e.rho > 0) || !(e.a > 0)) throw ConfigError(path + ": rho and a must be positive");
        out = e;
    } else {
        throw ConfigError("problem." + kind + ": unknown problem (expected example1, example2, example3, "
                          "manufactured or from_file)");
    }
    p.finish();
    return out;
}

inline Variant parse_variant(const std::string& path, const std::string& s) {
    return pick<Variant>(path, s,
                         {{"S0", Variant::S0}, {"S2", Variant::S2}, {"S3", Variant::S3}, {"U4", Variant::U4},
                          {"EXPL2", Variant::EXPL2}});
}

inline SolverMethod parse_method(const std::string& path, const std::string& s) {
    return pick<SolverMethod>(path, s,
                              {{"richardson", SolverMethod::richardson},
                               {"chebyshev", SolverMethod::chebyshev},
                               {"steepest_descent", SolverMethod::steepest_descent}});
}

inline void parse_scheme(Fields& root, SchemeConfig& c) {
    if (!root.has("scheme")) return;
    Fields s(root.raw("scheme"), "scheme");
    if (s.has("variant")) c.variant = parse_variant("scheme.variant", s.get<std::string>("variant", ""));
    c.eps0_sq = s.get("eps0_sq", c.eps0_sq);
    if (!(c.eps0_sq > 0 && c.eps0_sq < 1)) throw ConfigError("scheme.eps0_sq: must lie in (0, 1)");
    c.f0 = pick<F0Variant>("scheme.f0", s.get<std::string>("f0", to_string(c.f0)),
                           {{"three_level", F0Variant::three_level},
                            {"half_step", F0Variant::half_step},
                            {"symmetric_m1", F0Variant::symmetric_m1}});
    if (s.has("beta")) c.beta = s.get("beta", 0.0);
    if (s.has("gamma")) c.gamma = s.get("gamma", 0.0);
    if (s.has("theta")) c.theta = s.get("theta", 0.0);
    if (s.has("kappa")) {
        if (c.beta || c.gamma || c.theta) throw ConfigError("scheme.kappa: conflicts with beta/gamma/theta");
        try {
            const FamilyParams f = kappa_family(s.get("kappa", 1.0));
            c.beta = f.beta;
            c.gamma = f.gamma;
            c.theta = f.theta;
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("scheme.kappa: ") + e.what());
        }
    }
    c.override_stability = s.get("override_stability", c.override_stability);
    s.finish();
}

inline void parse_solver(Fields& root, SolverConfig& c) {
    if (!root.has("solver")) return;
    Fields s(root.raw("solver"), "solver");
    if (s.has("method")) c.method = parse_method("solver.method", s.get<std::string>("method", ""));
    c.eps0_sq = s.get("eps0_sq", c.eps0_sq);
    c.tol = s.get("tol", c.tol);
    c.max_iter = s.get("max_iter", c.max_iter);
    c.cheb_N = s.get("cheb_N", c.cheb_N);
    c.guess = pick<InitialGuess>("solver.guess", s.get<std::string>("guess", to_string(c.guess)),
                                 {{"previous_layer", InitialGuess::previous_layer},
                                  {"linear_extrapolation", InitialGuess::linear_extrapolation},
                                  {"sigma0_predictor", InitialGuess::sigma0_predictor}});
    c.u4_preconditioner = pick<U4Preconditioner>(
        "solver.u4_preconditioner", s.get<std::string>("u4_preconditioner", "spectral"),
        {{"spectral", U4Preconditioner::spectral}, {"rho_diagonal", U4Preconditioner::rho_diagonal}});
    if (!(c.eps0_sq > 0 && c.eps0_sq < 1)) throw ConfigError("solver.eps0_sq: must lie in (0, 1)");
    if (!(c.tol > 0)) throw ConfigError("solver.tol: must be positive");
    if (c.max_iter < 1) throw ConfigError("solver.max_iter: must be at least 1");
    if (c.cheb_N < 1) throw ConfigError("solver.cheb_N: must be at least 1");
    s.finish();
}

inline void parse_output(Fields& root, OutputConfig& o) {
    if (!root.has("output")) return;
    Fields s(root.raw("output"), "output");
    if (s.has("table")) o.table = s.get<std::string>("table", "");
    if (s.has("ledger")) o.ledger = s.get<std::string>("ledger", "");
    if (s.has("snapshots")) {
        Fields sn(s.raw("snapshots"), "output.snapshots");
        o.snapshot_times = sn.require<std::vector<double>>("times");
        if (sn.has("line")) {
            Fields ln(sn.raw("line"), "output.snapshots.line");
            SnapshotWriter::Line line{ln.require<int>("axis"), ln.require<double>("value")};
            if (line.axis < 0 || line.axis > 2) throw ConfigError("output.snapshots.line.axis: must be 0, 1 or 2");
            o.line = line;
            ln.finish();
        }
        sn.finish();
    }
    s.finish();
}

} // namespace detail

inline RunConfig parse_config(std::istream& in, const std::string& name = "config") {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(name + ": " + e.what());
    }
    RunConfig c;
    detail::Fields root(j, "");
    c.problem = detail::parse_problem(root);
    if (std::holds_alternative<Example3Problem>(c.problem)) c.scheme.eps0_sq = 0.25;
    detail::parse_scheme(root, c.scheme);
    detail::parse_solver(root, c.solver);
    detail::parse_output(root, c.output);
    root.finish();
    return c;
}

inline RunConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string() + ": cannot open");
    return parse_config(in, path.string());
}

inline RunConfig parse_config_string(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

// ---------------------------------------------------------------------------
// Problem construction.

/// Uniform-mesh problem and its exact solution (empty for Example 3).
inline Reference build_reference(const RunConfig& c) {
    return std::visit(
        [](const auto& p) -> Reference {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, Example1Problem>) {
                const double M = p.N / p.ht_ratio; // T / (ratio X / N) with X = T = 2
                if (std::abs(M - std::round(M)) > 1e-9)
                    throw ConfigError("problem.example1.ht_ratio: T / (ratio h) must be an integer");
                return example1(p.N, static_cast<int>(std::lround(M)));
            } else if constexpr (std::is_same_v<P, Example2Problem>) {
                return example2(p.N);
            } else if constexpr (std::is_same_v<P, Example3Problem>) {
                return example3(p.params, p.N, p.T, static_cast<int>(std::lround(p.T / p.ht)));
            } else if constexpr (std::is_same_v<P, ManufacturedProblem>) {
                Reference r;
                r.spec.mesh = make_uniform_mesh(p.extent, p.N, p.T, p.M);
                r.spec.rho = GridFn(r.spec.mesh, p.rho);
                r.spec.a = p.a;
                if (p.solution == "zero") {
                    r.exact = [](const Point&, double) { return 0.0; };
                    return r;
                }
                const int n = static_cast<int>(p.extent.size());
                std::vector<double> kk(n);
                double stiff = 0.0;
                for (int k = 0; k < n; ++k) {
                    kk[k] = p.modes[k] * std::numbers::pi / p.extent[k];
                    const double ak = p.a.empty() ? 1.0 : p.a[k];
                    stiff += ak * ak * kk[k] * kk[k];
                }
                auto shape = [kk, n](const Point& x) {
                    double v = 1.0;
                    for (int k = 0; k < n; ++k) v *= std::sin(kk[k] * x[k]);
                    return v;
                };
                const double w = p.omega, ph = p.phase, rho = p.rho;
                r.exact = [shape, w, ph](const Point& x, double t) { return shape(x) * std::cos(w * t + ph); };
                r.spec.f = SourceTerm::field([shape, w, ph, rho, stiff](const Point& x, double t) {
                    return (stiff - rho * w * w) * shape(x) * std::cos(w * t + ph);
                });
                r.spec.u0 = [shape, ph](const Point& x) { return shape(x) * std::cos(ph); };
                r.spec.u1 = [shape, w, ph](const Point& x) { return -w * shape(x) * std::sin(ph); };
                return r;
            } else {
                throw ConfigError("problem.from_file: not a uniform-mesh problem");
            }
        },
        c.problem);
}

/// Non-uniform 1D problem and its exact solution.
inline std::pair<NonUniProblem, std::function<double(double, double)>> build_nonuniform(const FromFileProblem& p) {
    NonUniProblem out;
    try {
        out.mesh = read_nonuni_mesh(p.mesh);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("problem.from_file.mesh: ") + e.what());
    }
    const double rho = p.rho, a = p.a;
    out.rho = [rho](double) { return rho; };
    out.a = a;
    out.f0 = p.f0;
    if (p.solution == "zero") return {out, [](double, double) { return 0.0; }};
    const double X = out.mesh.x.back() - out.mesh.x.front(), x0 = out.mesh.x.front();
    const double k = p.mode * std::numbers::pi / X, w = p.omega, ph = p.phase;
    auto u = [k, w, ph, x0](double x, double t) { return std::sin(k * (x - x0)) * std::cos(w * t + ph); };
    out.f = [u, k, w, rho, a](double x, double t) { return (a * a * k * k - rho * w * w) * u(x, t); };
    out.u0 = [u](double x) { return u(x, 0.0); };
    out.u1 = [k, w, ph, x0](double x) { return -w * std::sin(k * (x - x0)) * std::sin(ph); };
    return {out, u};
}

} // namespace cwave::cli
