// Command-line front end for the data-driven MPC toolkit.
//
// Exit codes: 0 ok, 1 reproduction checks failed, 2 infeasible (or requirement not met),
// 3 configuration/data error, 4 solver failure.

#include "ddmpc/error.hpp"
#include "ddmpc/experiment.hpp"
#include "ddmpc/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace ddmpc;
using io::json;

namespace {

enum Exit { ok = 0, checks_failed = 1, infeasible = 2, config_error = 3, solver_failure = 4 };

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    std::string constants_source;
    std::string constants_file;
    std::string data;
    std::string format = "csv";
};

ExperimentConfig load_config(const Options& o)
{
    ExperimentConfig c =
        o.config.empty() ? example_config() : io::experiment_from_json(io::read_json(o.config));
    if (o.seed)
        c.data_seed = *o.seed;
    if (!o.constants_source.empty())
        c.constants_source = constants_source_from_string(o.constants_source);
    if (!o.constants_file.empty()) {
        c.constants_file = o.constants_file;
        if (o.constants_source.empty())
            c.constants_source = ConstantsSource::file;
    }
    return c;
}

DataRecord load_data(const Options& o, const ExperimentConfig& c)
{
    return o.data.empty() ? generate_data(c) : io::read_data_csv(o.data);
}

OfflineArtifacts offline(const Options& o, const ExperimentConfig& c)
{
    return prepare_offline(c, load_data(o, c));
}

json data_json(const DataRecord& d)
{
    json j{{"eps_bar", d.noise_bound()}, {"seed", d.seed()}, {"N", d.length()}, {"n", d.prefix()}};
    json u = json::array(), y = json::array(), yt = json::array();
    for (Eigen::Index k = 0; k < d.all_inputs().cols(); ++k) {
        u.push_back(std::vector<double>(d.all_inputs().col(k).data(),
                                        d.all_inputs().col(k).data() + d.input_dim()));
        const Eigen::VectorXd yc = d.all_outputs(DataView::clean).col(k);
        const Eigen::VectorXd yn = d.all_outputs(DataView::noisy).col(k);
        y.push_back(std::vector<double>(yc.data(), yc.data() + yc.size()));
        yt.push_back(std::vector<double>(yn.data(), yn.data() + yn.size()));
    }
    j["u"] = u;
    j["y"] = y;
    j["ytilde"] = yt;
    return j;
}

int cmd_generate_data(const Options& o)
{
    const ExperimentConfig c = load_config(o);
    const DataRecord d = generate_data(c);
    const fs::path out(o.out_dir);
    if (o.format == "json")
        io::write_json(data_json(d), out / "data.json");
    else
        io::write_data_csv(d, out / "data.csv");
    std::cout << "wrote " << d.length() << " samples (+" << d.prefix() << " prefix), seed "
              << d.seed() << "\n";
    return ok;
}

int cmd_check_pe(const Options& o)
{
    const ExperimentConfig c = load_config(o);
    const DataRecord d = o.data.empty()
        ? generate_data(c.plant.build(), c.data_length, c.order, c.mpc.u_lower, c.mpc.u_upper,
                        c.data_seed, c.noise_bound, 1, c.noise_distribution)
        : io::read_data_csv(o.data);
    const Eigen::Index order = c.mpc.horizon + 2 * c.order;
    const PeReport r = is_persistently_exciting(d.inputs(), order);
    std::cout << "order " << order << ": rank " << r.rank << " / " << r.required
              << ", smallest retained singular value " << r.smallest_retained_singular_value
              << (r.persistently_exciting ? " (persistently exciting)\n" : " (NOT persistently exciting)\n");
    return r.persistently_exciting ? ok : infeasible;
}

int cmd_estimate_constants(const Options& o)
{
    const ExperimentConfig c = load_config(o);
    const OfflineArtifacts off = offline(o, c);
    const fs::path out(o.out_dir);
    io::write_json(io::to_json(off.constants), out / "constants.json");
    if (o.format == "csv")
        io::write_constants_csv(off.constants, out / "constants.csv");
    std::cout << "gamma " << off.constants.gamma << " (oracle " << off.oracle->gamma << "), c_pe "
              << off.constants.c_pe << ", xi_max " << off.constants.xi_max << "\n";
    return ok;
}

int cmd_compute_tightening(const Options& o)
{
    const ExperimentConfig c = load_config(o);
    const OfflineArtifacts off = offline(o, c);
    const fs::path out(o.out_dir);
    io::write_json(io::to_json(off.coefficients), out / "tightening.json");
    if (o.format == "csv")
        io::write_coefficients_csv(off.coefficients, out / "tightening.csv");
    std::cout << "max admissible noise bound " << off.precheck.max_admissible_noise_bound << "\n";
    if (!off.precheck.feasible()) {
        std::cerr << "a4[k] >= y_max for " << off.precheck.flagged.size() << " indices\n";
        return infeasible;
    }
    return ok;
}

int cmd_solve_step(const Options& o)
{
    ExperimentConfig c = load_config(o);
    c.closed_loop_length = c.order;
    const OfflineArtifacts off = offline(o, c);
    const ClosedLoopLog log = run_closed_loop(c, off);
    const SolveRecord& r = log.solves.front();
    json j = io::solve_log_entry(r);
    if (r.status == solver::SolveStatus::optimal) {
        const Eigen::MatrixXd& u = r.u_predicted;
        const Eigen::MatrixXd& y = r.y_predicted;
        j["u_bar"] = std::vector<double>(u.data(), u.data() + u.size());
        j["y_bar"] = std::vector<double>(y.data(), y.data() + y.size());
    }
    io::write_json(j, fs::path(o.out_dir) / "step.json");
    std::cout << j.dump() << "\n";
    if (r.status == solver::SolveStatus::infeasible)
        return infeasible;
    return r.status == solver::SolveStatus::optimal ? ok : solver_failure;
}

int cmd_run_closed_loop(const Options& o)
{
    const ExperimentConfig c = load_config(o);
    const OfflineArtifacts off = offline(o, c);
    const ClosedLoopLog log = run_closed_loop(c, off);
    const fs::path out(o.out_dir);
    io::write_closed_loop_csv(log, out / "closed_loop.csv");
    if (o.format == "csv")
        io::write_solves_csv(log, out / "solves.csv");
    json steps = json::array();
    for (const SolveRecord& r : log.solves)
        steps.push_back(io::solve_log_entry(r));
    io::write_json(steps, out / "solve_log.json");
    io::write_input_svg(log, c.mpc.u_lower(0), c.mpc.u_upper(0), out / "input.svg");
    io::write_output_svg(log, c.mpc.y_max, c.order, out / "output.svg");
    const ClosedLoopSummary& s = log.summary;
    std::cout << "steps " << log.steps.size() << ", max |y| " << s.max_abs_y << ", saturated "
              << s.saturated_steps << ", mean y (final half) " << s.mean_y_final_half
              << ", infeasible " << s.infeasible_events << ", bound violations "
              << s.bound_violations << "\n";
    if (!log.halt_reason.empty())
        std::cerr << "halted: " << log.halt_reason << "\n";
    for (const SolveRecord& r : log.solves)
        if (r.status == solver::SolveStatus::numerical_failure ||
            r.status == solver::SolveStatus::unbounded)
            return solver_failure;
    return s.infeasible_events > 0 ? infeasible : ok;
}

int cmd_reproduce(const Options& o)
{
    const ReproductionReport rep = reproduce_example(o.out_dir);
    for (const ReproductionCheck& c : rep.checks)
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
    return rep.all_passed() ? ok : checks_failed;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Robust data-driven MPC toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    Options o;
    app.add_option("--config", o.config, "Experiment configuration (JSON)");
    app.add_option("--seed", o.seed, "Seed of the excitation experiment");
    app.add_option("--out-dir", o.out_dir, "Output directory");
    app.add_option("--constants-source", o.constants_source, "Where the constants come from")
        ->check(CLI::IsMember({"data", "oracle", "file"}));
    app.add_option("--constants-file", o.constants_file, "Constants JSON for --constants-source file");
    app.add_option("--data", o.data, "Recorded data CSV (with JSON sidecar) instead of generating");
    app.add_option("--format", o.format, "Tabular output format")
        ->check(CLI::IsMember({"csv", "json"}));

    struct Command {
        const char* name;
        const char* help;
        int (*run)(const Options&);
    };
    const Command commands[] = {
        {"generate-data", "Run the excitation experiment", cmd_generate_data},
        {"check-pe", "Check persistence of excitation of the input data", cmd_check_pe},
        {"estimate-constants", "Estimate Gamma, rho_k, c_pe and xi_max", cmd_estimate_constants},
        {"compute-tightening", "Compute the tightening coefficients", cmd_compute_tightening},
        {"solve-step", "Solve the first MPC problem from rest", cmd_solve_step},
        {"run-closed-loop", "Run the closed loop", cmd_run_closed_loop},
        {"reproduce-example", "Run the numerical example and check its properties", cmd_reproduce},
    };
    for (const Command& c : commands)
        app.add_subcommand(c.name, c.help);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_error;
    }

    try {
        for (const Command& c : commands)
            if (app.got_subcommand(c.name))
                return c.run(o);
    } catch (const SolverError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return solver_failure;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return config_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return config_error;
    }
    return config_error;
}
