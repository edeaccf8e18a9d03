#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "config.hpp"

using namespace cwave;
using namespace cwave::cli;

namespace {

std::string error_of(const std::string& text) {
    try {
        (void)parse_config_string(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST(Config, MinimalExample1TakesDefaults) {
    const RunConfig c = parse_config_string(R"({"problem": {"example1": {}}})");
    ASSERT_TRUE(std::holds_alternative<Example1Problem>(c.problem));
    EXPECT_EQ(std::get<Example1Problem>(c.problem).N, 32);
    EXPECT_EQ(c.scheme.variant, Variant::S0);
    EXPECT_EQ(c.scheme.f0, F0Variant::half_step);
    EXPECT_EQ(c.solver.method, SolverMethod::richardson);
    EXPECT_DOUBLE_EQ(c.scheme.eps0_sq, 0.5);
    EXPECT_DOUBLE_EQ(c.solver.eps0_sq, 0.5);
}

TEST(Config, Example3StabilityCheckDefaultsToQuarter) {
    const RunConfig c = parse_config_string(R"({"problem": {"example3": {"s1": 1500}}})");
    EXPECT_DOUBLE_EQ(c.scheme.eps0_sq, 0.25);
    EXPECT_DOUBLE_EQ(c.solver.eps0_sq, 0.5);
    EXPECT_DOUBLE_EQ(std::get<Example3Problem>(c.problem).params.s1, 1500.0);
}

TEST(Config, UnknownSchemeNamesTheField) {
    const std::string e = error_of(R"({"problem": {"example1": {}}, "scheme": {"variant": "S7"}})");
    EXPECT_NE(e.find("scheme.variant"), std::string::npos) << e;
    EXPECT_NE(e.find("S7"), std::string::npos) << e;
}

TEST(Config, UnknownFieldIsRejected) {
    const std::string e = error_of(R"({"problem": {"example2": {"N": 8, "Nx": 4}}})");
    EXPECT_NE(e.find("problem.example2.Nx"), std::string::npos) << e;
    EXPECT_NE(error_of(R"({"problem": {"example2": {}}, "solvr": {}})").find("solvr"), std::string::npos);
}

TEST(Config, WrongTypeNamesTheField) {
    const std::string e = error_of(R"({"problem": {"example1": {"N": "many"}}})");
    EXPECT_NE(e.find("problem.example1.N"), std::string::npos) << e;
}

TEST(Config, ExactlyOneProblem) {
    EXPECT_NE(error_of(R"({"problem": {"example1": {}, "example2": {}}})").find("problem"), std::string::npos);
    EXPECT_NE(error_of(R"({"scheme": {}})").find("problem"), std::string::npos);
    EXPECT_NE(error_of(R"({"problem": {"example9": {}}})").find("problem.example9"), std::string::npos);
}

TEST(Config, MalformedJsonIsConfigError) { EXPECT_FALSE(error_of(R"({"problem": )").empty()); }

TEST(Config, MissingFileNamesPath) {
    try {
        (void)parse_config(std::filesystem::path("/nonexistent/run.json"));
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/run.json"), std::string::npos);
    }
}

TEST(Config, MeshReadErrorCarriesPath) {
    const RunConfig c = parse_config_string(R"({"problem": {"from_file": {"mesh": "/nonexistent/mesh.txt"}}})");
    try {
        (void)build_nonuniform(std::get<FromFileProblem>(c.problem));
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("problem.from_file.mesh"), std::string::npos) << e.what();
    }
}

TEST(Csv, RoundTripIsExact) {
    CsvTable t({"N", "e_L2", "p_L2"});
    t.add({8, 1.0 / 3.0, std::numeric_limits<double>::quiet_NaN()});
    t.add({16, 2.5e-9, 4.0231});
    std::stringstream s;
    t.write(s);
    const CsvTable back = CsvTable::read(s);
    ASSERT_EQ(back.header(), t.header());
    ASSERT_EQ(back.rows().size(), 2u);
    EXPECT_TRUE(std::isnan(back.rows()[0][2]));
    EXPECT_EQ(back.rows()[0][1], 1.0 / 3.0);
    EXPECT_EQ(back.rows()[1][1], 2.5e-9);
}

TEST(Csv, BadCellReportsLine) {
    std::stringstream s("a,b\n1,2\n3,x\n");
    try {
        (void)CsvTable::read(s);
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
}

TEST(Manufactured, ZeroSolutionStaysZero) {
    const RunConfig c = parse_config_string(
        R"({"problem": {"manufactured": {"solution": "zero", "N": [8, 8], "M": 32}}})");
    const Reference ref = build_reference(c);
    const RunOutcome out = run_reference(ref.spec, c.scheme, c.solver);
    const ErrorNorms e = error_against(out.v, ref.exact, ref.spec.mesh.T);
    EXPECT_EQ(e.l2, 0.0);
    EXPECT_EQ(e.linf, 0.0);
}

TEST(Manufactured, StandingWaveConverges) {
    auto err = [](int N) {
        std::ostringstream s;
        s << R"({"problem": {"manufactured": {"N": [)" << N << "," << N << R"(], "M": )" << 4 * N
          << R"(, "omega": 3.0}}})";
        const RunConfig c = parse_config_string(s.str());
        const Reference ref = build_reference(c);
        return error_against(run_reference(ref.spec, c.scheme, c.solver).v, ref.exact, ref.spec.mesh.T).l2;
    };
    const double p = std::log2(err(8) / err(16));
    EXPECT_GT(p, 3.5);
}

TEST(Determinism, SameConfigSameTable) {
    auto table = [] {
        const RunConfig c = parse_config_string(R"({"problem": {"example2": {"N": 8}}})");
        const Reference ref = build_reference(c);
        const RunOutcome out = run_reference(ref.spec, c.scheme, c.solver);
        const ErrorNorms e = error_against(out.v, ref.exact, ref.spec.mesh.T);
        CsvTable t({"e_L2", "e_Linf", "N_iter"});
        t.add({e.l2, e.linf, double(out.n_iter)});
        std::ostringstream s;
        t.write(s);
        return s.str();
    };
    EXPECT_EQ(table(), table());
}
