#include "ddmpc/error.hpp"
#include "ddmpc/experiment.hpp"
#include "ddmpc/io.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ddmpc;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("ddmpc_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

ExperimentConfig short_config()
{
    ExperimentConfig c = example_config();
    c.closed_loop_length = 9;
    return c;
}

} // namespace

TEST(Experiment, ExampleConfigIsValid)
{
    const ExperimentConfig c = example_config();
    EXPECT_NO_THROW(c.validate(1, 1));
    EXPECT_DOUBLE_EQ(c.effective_mpc().lambda_alpha * c.noise_bound, 1.0);
    EXPECT_EQ(c.plant.build().order(), 3);

    ExperimentConfig bad = c;
    bad.closed_loop_length = 10;
    EXPECT_THROW(bad.validate(1, 1), ConfigError);
    bad = c;
    bad.data_length = 30;
    EXPECT_THROW(bad.validate(1, 1), ConfigError);
}

TEST(Experiment, DataGenerationIsSeededAndExciting)
{
    const DataRecord a = fixtures::example_data(1e-4, 3);
    const DataRecord b = fixtures::example_data(1e-4, 3);
    EXPECT_EQ(a.all_inputs(), b.all_inputs());
    EXPECT_EQ(a.all_outputs(DataView::noisy), b.all_outputs(DataView::noisy));
    EXPECT_EQ(a.seed(), 3u);
    EXPECT_EQ(a.length(), 1000);
    EXPECT_LE(a.all_inputs().cwiseAbs().maxCoeff(), 10.0);
    const MatrixXd e = a.all_outputs(DataView::noisy) - a.all_outputs(DataView::clean);
    EXPECT_LE(e.cwiseAbs().maxCoeff(), 1e-4);
    EXPECT_GT(e.cwiseAbs().maxCoeff(), 0.0);
    // clean outputs are an exact simulation from rest
    const MatrixXd y = simulate(fixtures::example_plant(), VectorXd::Zero(3), a.all_inputs()).trajectory.y;
    EXPECT_EQ(y, a.all_outputs(DataView::clean));
    // excitation of order above the number of columns is impossible
    EXPECT_THROW(generate_data(fixtures::example_plant(), 20, 3, VectorXd::Constant(1, -1.0),
                               VectorXd::Constant(1, 1.0), 0, 0.0, 15),
                 EstimationError);
}

TEST(Io, ConstantsRoundTripIsBitExact)
{
    const fs::path dir = scratch_dir("constants");
    SystemConstants c = SystemConstants::make(3, 10, fixtures::kExampleGamma, fixtures::example_rho(),
                                              8.449119625921234, 60.0);
    c.gamma_source = Provenance::model_oracle;
    io::write_json(io::to_json(c), dir / "c.json");
    const SystemConstants r = io::constants_from_json(io::read_json(dir / "c.json"));
    EXPECT_EQ(r.gamma, c.gamma);
    EXPECT_EQ(r.rho, c.rho);
    EXPECT_EQ(r.c_pe, c.c_pe);
    EXPECT_EQ(r.xi_max, c.xi_max);
    EXPECT_EQ(r.rho_n_max, c.rho_n_max);
    EXPECT_EQ(r.gamma_source, Provenance::model_oracle);
    EXPECT_EQ(r.rho_source, Provenance::data_driven);
    EXPECT_EQ(io::to_json(r).dump(), io::to_json(c).dump());
}

TEST(Io, DataRoundTripIsBitExact)
{
    const fs::path dir = scratch_dir("data");
    const DataRecord d = fixtures::example_data(1e-4, 5);
    io::write_data_csv(d, dir / "data.csv");
    EXPECT_TRUE(fs::exists(dir / "data.json"));
    std::ifstream is(dir / "data.csv");
    std::string header;
    std::getline(is, header);
    EXPECT_EQ(header, "k,u_1,y_1,ytilde_1");
    std::string first;
    std::getline(is, first);
    EXPECT_EQ(first.substr(0, 3), "-3,");
    const DataRecord r = io::read_data_csv(dir / "data.csv");
    EXPECT_EQ(r.all_inputs(), d.all_inputs());
    EXPECT_EQ(r.all_outputs(DataView::clean), d.all_outputs(DataView::clean));
    EXPECT_EQ(r.all_outputs(DataView::noisy), d.all_outputs(DataView::noisy));
    EXPECT_EQ(r.prefix(), 3);
    EXPECT_EQ(r.noise_bound(), 1e-4);
    EXPECT_EQ(r.seed(), 5u);
}

TEST(Io, PlantAndConfigJson)
{
    const PlantSpec tf = io::plant_from_json(io::json::parse(R"({"num": [1.0], "den": [1.0, -0.5]})"));
    EXPECT_EQ(tf.build().order(), 1);
    const PlantSpec ss = io::plant_from_json(
        io::json::parse(R"({"A": [[0.5]], "B": [[1.0]], "C": [[2.0]], "D": [[0.0]]})"));
    EXPECT_DOUBLE_EQ(ss.build().C()(0, 0), 2.0);
    EXPECT_THROW(io::plant_from_json(io::json::parse(R"({"poles": [0.5]})")), ConfigError);

    ExperimentConfig c = example_config();
    c.noise_bound = 1e-3;
    c.data_seed = 17;
    c.constants_source = ConstantsSource::oracle;
    const ExperimentConfig r = io::experiment_from_json(io::to_json(c));
    EXPECT_EQ(io::to_json(r).dump(), io::to_json(c).dump());
    EXPECT_EQ(r.data_seed, 17u);
    EXPECT_EQ(r.effective_mpc().lambda_alpha, 1e3);

    const ExperimentConfig partial = io::experiment_from_json(io::json::parse(R"({"eps_bar": 0})"));
    EXPECT_EQ(partial.noise_bound, 0.0);
    EXPECT_EQ(partial.mpc.horizon, 10);
    EXPECT_THROW(io::experiment_from_json(io::json::parse(R"({"stage_cost": {"type": "cubic"}})")),
                 ConfigError);
}

TEST(Io, FormatsSeventeenDigits)
{
    EXPECT_EQ(io::format_number(0.1), "0.10000000000000001");
    EXPECT_EQ(std::stod(io::format_number(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Experiment, ShortClosedLoopIsDeterministicAndExported)
{
    const ExperimentConfig c = short_config();
    const OfflineArtifacts off = prepare_offline(c);
    EXPECT_TRUE(off.pe.persistently_exciting);
    EXPECT_TRUE(off.precheck.feasible());
    EXPECT_FALSE(off.setpoint_check.is_equilibrium);
    const ClosedLoopLog a = run_closed_loop(c, off);
    const ClosedLoopLog b = run_closed_loop(c, off);
    ASSERT_EQ(a.steps.size(), 9u);
    ASSERT_EQ(a.solves.size(), 3u);
    EXPECT_TRUE(a.summary.completed);
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
        EXPECT_EQ(a.steps[i].u, b.steps[i].u);
        EXPECT_EQ(a.steps[i].y_measured, b.steps[i].y_measured);
    }

    const fs::path dir = scratch_dir("loop");
    io::write_closed_loop_csv(a, dir / "cl.csv");
    std::ifstream is(dir / "cl.csv");
    std::string header;
    std::getline(is, header);
    EXPECT_EQ(header, "t,u,y,ytilde,feasible");
    io::write_output_svg(a, 10.0, 3, dir / "y.svg");
    const std::string svg = slurp(dir / "y.svg");
    EXPECT_NE(svg.find("<svg"), std::string::npos);
    EXPECT_NE(svg.find("stroke-dasharray"), std::string::npos);
    const io::json entry = io::solve_log_entry(a.solves.front());
    for (const char* key : {"t", "J", "norms", "eq4e_ok", "active_tightened_rows"})
        EXPECT_TRUE(entry.contains(key)) << key;
    EXPECT_TRUE(entry["norms"].contains("alpha1"));
}

TEST(Experiment, ConstantsFromFileAreUsed)
{
    const fs::path dir = scratch_dir("file_constants");
    ExperimentConfig c = short_config();
    const SystemConstants k = SystemConstants::make(3, 10, fixtures::kExampleGamma, fixtures::example_rho(), 8.0, 60.0);
    io::write_json(io::to_json(k), dir / "k.json");
    c.constants_source = ConstantsSource::file;
    c.constants_file = (dir / "k.json").string();
    const OfflineArtifacts off = prepare_offline(c);
    EXPECT_EQ(off.constants.c_pe, 8.0);
    EXPECT_EQ(off.coefficients.constants.c_pe, 8.0);
}
