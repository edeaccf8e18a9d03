// cwave: runs configured problems and reproduces the reference tables.
//
// exit codes: 0 ok, 1 failed checks or unexpected error, 2 configuration error,
// 3 rejected configuration (stability, off-node source), 4 solver failure

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "checks.hpp"
#include "config.hpp"

using namespace cwave;
namespace fs = std::filesystem;

namespace {

struct Globals {
    fs::path out_dir = ".";
    std::optional<double> tol, eps0_sq;
    std::optional<std::string> scheme, solver;
    bool override_stability = false;
};

void apply(const Globals& g, SchemeConfig& sc, SolverConfig& so) {
    if (g.tol) {
        if (!(*g.tol > 0)) throw cli::ConfigError("--tol: must be positive");
        so.tol = *g.tol;
    }
    if (g.eps0_sq) {
        if (!(*g.eps0_sq > 0 && *g.eps0_sq < 1)) throw cli::ConfigError("--eps0-sq: must lie in (0, 1)");
        sc.eps0_sq = *g.eps0_sq;
        so.eps0_sq = *g.eps0_sq;
    }
    if (g.scheme) sc.variant = cli::detail::parse_variant("--scheme", *g.scheme);
    if (g.solver) so.method = cli::detail::parse_method("--solver", *g.solver);
    if (g.override_stability) sc.override_stability = true;
}

void note(const fs::path& p) { std::cout << "wrote " << p.string() << "\n"; }

fs::path under(const Globals& g, const fs::path& p) { return p.is_absolute() ? p : g.out_dir / p; }

// ---------------------------------------------------------------------------

int run_nonuniform(const Globals& g, const cli::RunConfig& c, const cli::FromFileProblem& p) {
    auto [prob, exact] = cli::build_nonuniform(p);
    const NonUniMesh1D& mesh = prob.mesh;
    const fs::path snaps = g.out_dir / "snapshots";
    std::vector<fs::path> written;
    std::vector<double> last;
    NonUniStepper(prob).run([&](int m, const std::vector<double>& v) {
        last = v;
        for (double t : c.output.snapshot_times) {
            const double half = 0.5 * mesh.ht(std::max(m, 1));
            if (std::abs(mesh.t[m] - t) >= half) continue;
            fs::create_directories(snaps);
            const fs::path path = snaps / SnapshotWriter::file_name(t);
            std::ofstream out(path);
            out << "x_1,v\n";
            char buf[96];
            for (std::size_t l = 0; l < v.size(); ++l) {
                std::snprintf(buf, sizeof buf, "%.16e,%.16e\n", mesh.x[l], v[l]);
                out << buf;
            }
            written.push_back(path);
        }
    });
    double linf = 0.0, l2 = 0.0;
    const double T = mesh.t.back();
    for (int l = 1; l < mesh.N(); ++l) {
        const double e = last[l] - exact(mesh.x[l], T);
        linf = std::max(linf, std::abs(e));
        l2 += e * e * mesh.h_star(l);
    }
    CsvTable t({"N", "M", "h_max", "ht_max", "e_L2", "e_Linf"});
    t.add({double(mesh.N()), double(mesh.M()), mesh.h_max(), mesh.ht_max(), std::sqrt(l2), linf});
    const fs::path table = under(g, c.output.table.value_or("run.csv"));
    t.write(table);
    note(table);
    for (const auto& w : written) note(w);
    std::printf("e_L2 %.6e  e_Linf %.6e\n", std::sqrt(l2), linf);
    return 0;
}

int cmd_run(const Globals& g, const fs::path& config_path) {
    cli::RunConfig c = cli::parse_config(config_path);
    apply(g, c.scheme, c.solver);
    fs::create_directories(g.out_dir);
    if (const auto* p = std::get_if<cli::FromFileProblem>(&c.problem)) return run_nonuniform(g, c, *p);

    const Reference ref = cli::build_reference(c);
    std::vector<Observer*> obs;
    std::optional<EnergyLedger> ledger;
    std::optional<SnapshotWriter> snaps;
    if (c.output.ledger) {
        ledger.emplace();
        obs.push_back(&*ledger);
    }
    if (!c.output.snapshot_times.empty()) {
        snaps.emplace(g.out_dir / "snapshots", c.output.snapshot_times, c.output.line);
        obs.push_back(&*snaps);
    }
    const RunOutcome out = run_reference(ref.spec, c.scheme, c.solver, obs);
    const Mesh& m = ref.spec.mesh;
    const fs::path table = under(g, c.output.table.value_or("run.csv"));
    if (ref.exact) {
        const ErrorNorms e = error_against(out.v, ref.exact, m.T);
        ConvergenceRow row;
        row.N = m.count[0];
        for (int k = 0; k < m.dim; ++k) row.h.push_back(m.step[k]);
        row.ht = m.ht;
        row.e_l2 = e.l2;
        row.e_linf = e.linf;
        row.n_iter = out.n_iter;
        row.cpu = out.cpu;
        convergence_csv({row}).write(table);
        std::printf("e_L2 %.6e  e_Linf %.6e  N_iter %d\n", e.l2, e.linf, out.n_iter);
    } else {
        const auto& p3 = std::get<cli::Example3Problem>(c.problem);
        example3_iteration_csv({{p3.params.s1, m.T, m.step[0], m.ht, out.n_iter, out.cpu}}).write(table);
        std::printf("N_iter %d\n", out.n_iter);
    }
    note(table);
    if (ledger) {
        const fs::path lp = under(g, *c.output.ledger);
        ledger->write_csv(lp);
        note(lp);
        std::printf("ledger max drift %.3e\n", ledger->max_drift());
    }
    if (snaps)
        for (const auto& w : snaps->written()) note(w);
    return 0;
}

// ---------------------------------------------------------------------------

struct ConvergenceOpts {
    std::string problem = "example1";
    std::vector<int> Ns;
    double ht_ratio = 0.25;
    bool iteration_table = false;
};

int cmd_convergence(const Globals& g, const ConvergenceOpts& o) {
    SchemeConfig sc;
    SolverConfig so;
    apply(g, sc, so);
    fs::create_directories(g.out_dir);
    const bool ex1 = o.problem == "example1";
    if (!ex1 && o.problem != "example2")
        throw cli::ConfigError("--problem: unknown value '" + o.problem + "' (expected example1 or example2)");
    std::vector<int> Ns = o.Ns;
    if (Ns.empty()) Ns = ex1 ? std::vector<int>{8, 16, 32, 64} : std::vector<int>{4, 8, 16, 32};
    const auto rows = run_convergence(ex1 ? ExactExample::example1 : ExactExample::example2, Ns, sc, so, o.ht_ratio);
    const fs::path path = g.out_dir / ("convergence_" + o.problem + "_" + to_string(sc.variant) + ".csv");
    convergence_csv(rows).write(path);
    note(path);
    for (const auto& r : rows)
        std::printf("N %4d  e_L2 %.4e  p %6.3f  e_Linf %.4e  p %6.3f  N_iter %d\n", r.N, r.e_l2, r.p_l2, r.e_linf,
                    r.p_linf, r.n_iter);
    if (o.iteration_table) {
        if (!ex1) throw cli::ConfigError("--iteration-table: only defined for example1");
        const auto cells = iteration_table({256, 512, 1024, 2048}, {0.5, 0.75, 0.875}, sc, so, 64);
        const fs::path ip = g.out_dir / "iterations_example1.csv";
        iteration_csv(cells).write(ip);
        note(ip);
        for (const auto& c : cells)
            std::printf("M %4d  eps0^2 %.3f  N_iter %d (%d)\n", c.M, c.eps0_sq, c.predictor, c.previous);
    }
    return 0;
}

// ---------------------------------------------------------------------------

struct Example3Opts {
    std::vector<std::string> tables{"iterations"};
    std::vector<double> s1;
    double s2 = 1000.0;
    std::optional<double> s3;
    std::string scaling = "unit";
    std::vector<double> times{0.25, 0.75, 1.05, 1.15};
    int N = 200;
};

int cmd_example3(const Globals& g, const Example3Opts& o) {
    SchemeConfig sc;
    sc.eps0_sq = 0.25; // s1 = 6000 at the tabulated steps needs it; the solver keeps 1/2
    SolverConfig so;
    apply(g, sc, so);
    fs::create_directories(g.out_dir);
    Example3Params base;
    base.s2 = o.s2;
    base.s3 = o.s3;
    base.scaling = cli::detail::pick<SourceScaling>("--scaling", o.scaling,
                                                    {{"unit", SourceScaling::unit}, {"rho", SourceScaling::rho_source}});
    for (const std::string& t : o.tables) {
        if (t == "iterations") {
            struct Row {
                double s1, T, ht;
            };
            const std::vector<Row> rows{{1000, 1.0, 0.005}, {1500, 0.8, 0.004}, {3000, 0.6, 0.002}, {6000, 0.6, 0.0012}};
            std::vector<Example3Cell> cells;
            for (const Row& r : rows) {
                if (!o.s1.empty() && std::find(o.s1.begin(), o.s1.end(), r.s1) == o.s1.end()) continue;
                Example3Params p = base;
                p.s1 = r.s1;
                for (int k : {1, 2}) {
                    cells.push_back(example3_iterations(p, r.T, 200 * k, r.ht / k, sc, so));
                    const Example3Cell& c = cells.back();
                    std::printf("s1 %5.0f  h %5.2f  h_t %.4f  N_iter %d  (%.1f s)\n", c.s1, c.h, c.ht, c.n_iter, c.cpu);
                    std::fflush(stdout);
                }
            }
            const fs::path path = g.out_dir / "example3_iterations.csv";
            example3_iteration_csv(cells).write(path);
            note(path);
        } else if (t == "self" || t == "explicit") {
            std::vector<double> speeds = o.s1;
            if (speeds.empty()) speeds = t == "self" ? std::vector<double>{1000, 1500} : std::vector<double>{1000};
            std::vector<SelfConvergenceRow> rows;
            for (double s1 : speeds) {
                Example3Params p = base;
                p.s1 = s1;
                Example3Solutions cache;
                const auto part = t == "self"
                                      ? example3_self_convergence(p, {100, 200, 400}, 0.8, sc, so, cache)
                                      : example3_explicit_errors(p, {200, 400, 800}, 0.8, 800, 800, sc, so, cache);
                rows.insert(rows.end(), part.begin(), part.end());
                for (const auto& r : part)
                    std::printf("s1 %5.0f  N %4d  e_L2 %.5e  p %6.3f  e_Linf %.6f  p %6.3f\n", r.s1, r.N, r.e_l2, r.p_l2,
                                r.e_linf, r.p_linf);
                std::fflush(stdout);
            }
            const fs::path path = g.out_dir / (t == "self" ? "example3_self_convergence.csv" : "example3_explicit.csv");
            self_convergence_csv(rows).write(path);
            note(path);
        } else if (t == "profiles") {
            Example3Params p = base;
            p.s1 = o.s1.empty() ? 1500.0 : o.s1.front();
            const double ht = 0.8 / o.N;
            double T = 0.0;
            for (double x : o.times) T = std::max(T, x);
            const int M = static_cast<int>(std::ceil(T / ht - 1e-9));
            const Reference ref = example3(p, o.N, M * ht, M);
            SnapshotWriter snaps(g.out_dir / "profiles", o.times, SnapshotWriter::Line{1, p.y0});
            Observer* obs[] = {&snaps};
            const RunOutcome out = run_reference(ref.spec, sc, so, obs);
            std::printf("N_iter %d\n", out.n_iter);
            for (const auto& w : snaps.written()) note(w);
        } else {
            throw cli::ConfigError("--table: unknown value '" + t + "' (expected iterations, self, explicit, profiles)");
        }
    }
    return 0;
}

int cmd_checks() {
    std::vector<std::string> info;
    const auto results = checks::run_all(&info);
    int failed = 0;
    for (const auto& r : results) {
        std::printf("[%s] %-3s %s: %s\n", r.pass ? "PASS" : "FAIL", r.id.c_str(), r.title.c_str(), r.detail.c_str());
        if (!r.pass) ++failed;
    }
    for (const auto& i : info) std::printf("info: %s\n", i.c_str());
    return failed == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Compact fourth-order wave equation solver"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    std::string out_dir = ".";
    app.add_option("--out-dir", out_dir, "directory for CSV output");
    app.add_option("--tol", g.tol, "relative preconditioned residual tolerance");
    app.add_option("--eps0-sq", g.eps0_sq, "eps0^2 for both the stability check and the iteration parameter");
    app.add_option("--scheme", g.scheme, "S0, S2, S3, U4 or EXPL2");
    app.add_option("--solver", g.solver, "richardson, chebyshev or steepest_descent");
    app.add_flag("--override-stability", g.override_stability, "run even if the step fails the stability check");

    std::string config;
    auto* run = app.add_subcommand("run", "run a JSON-configured problem");
    run->add_option("config", config, "configuration file")->required();

    ConvergenceOpts co;
    auto* conv = app.add_subcommand("convergence", "error table of Example 1 or 2 over a mesh sequence");
    conv->add_option("--problem", co.problem, "example1 or example2");
    conv->add_option("--N", co.Ns, "mesh sequence (N doubling)")->delimiter(',');
    conv->add_option("--ht-ratio", co.ht_ratio, "Example 1 h_t / h");
    conv->add_flag("--iteration-table", co.iteration_table, "also write N_iter for M and eps0^2 (Example 1)");

    Example3Opts eo;
    auto* ex3 = app.add_subcommand("example3", "layered-medium experiments");
    ex3->add_option("--table", eo.tables, "iterations, self, explicit, profiles")->delimiter(',');
    ex3->add_option("--s1", eo.s1, "outer layer speeds")->delimiter(',');
    ex3->add_option("--s2", eo.s2, "middle layer speed");
    ex3->add_option("--s3", eo.s3, "right layer speed (defaults to s1)");
    ex3->add_option("--scaling", eo.scaling, "source amplitude: unit or rho");
    ex3->add_option("--times", eo.times, "profile times")->delimiter(',');
    ex3->add_option("--N", eo.N, "mesh for profiles");

    app.add_subcommand("checks", "invariant-based property suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    g.out_dir = out_dir;
    try {
        if (*run) return cmd_run(g, config);
        if (*conv) return cmd_convergence(g, co);
        if (*ex3) return cmd_example3(g, eo);
        return cmd_checks();
    } catch (const cli::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const RejectedConfiguration& e) {
        std::cerr << "rejected: " << e.what() << "\n";
        return 3;
    } catch (const SolverFailure& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
