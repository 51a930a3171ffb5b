#include "ddmpc/experiment.hpp"

#include "ddmpc/error.hpp"
#include "ddmpc/io.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace ddmpc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr int kMaxDataAttempts = 5;
/// Offset between the input and noise generator seeds of one excitation experiment.
constexpr std::uint64_t kNoiseSeedOffset = 0x9E3779B97F4A7C15ULL;

std::string fmt(double v)
{
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

} // namespace

StateSpaceModel PlantSpec::build() const
{
    if (A || B || C) {
        if (!A || !B || !C)
            throw ConfigError("state-space plant needs A, B and C");
        const MatrixXd Dm = D ? *D : MatrixXd::Zero(C->rows(), B->cols());
        return StateSpaceModel(*A, *B, *C, Dm);
    }
    if (denominator.empty())
        throw ConfigError("plant needs either a transfer function or state-space matrices");
    return realize_transfer_function(numerator, denominator);
}

std::string to_string(ConstantsSource s)
{
    switch (s) {
    case ConstantsSource::data:
        return "data";
    case ConstantsSource::oracle:
        return "oracle";
    case ConstantsSource::file:
        return "file";
    }
    return "unknown";
}

ConstantsSource constants_source_from_string(const std::string& s)
{
    for (ConstantsSource c : {ConstantsSource::data, ConstantsSource::oracle, ConstantsSource::file})
        if (to_string(c) == s)
            return c;
    throw ConfigError("unknown constants source '" + s + "'");
}

MpcConfig ExperimentConfig::effective_mpc() const
{
    MpcConfig c = mpc;
    c.noise_bound = noise_bound;
    if (alpha_weight_product && noise_bound > 0.0)
        c.lambda_alpha = *alpha_weight_product / noise_bound;
    return c;
}

void ExperimentConfig::validate(Index input_dim, Index output_dim) const
{
    if (order != mpc.order)
        throw ConfigError("experiment order and controller order differ");
    effective_mpc().validate(input_dim, output_dim);
    if (closed_loop_length < 0 || closed_loop_length % order != 0)
        throw ConfigError("closed-loop length " + std::to_string(closed_loop_length) +
                          " must be a non-negative multiple of n = " + std::to_string(order));
    const Index L = mpc.horizon;
    const Index needed = (input_dim + 1) * (L + 2 * order) - 1;
    if (data_length < needed)
        throw ConfigError("data length " + std::to_string(data_length) + " is below " +
                          std::to_string(needed) + " needed for persistent excitation");
    if (!std::isfinite(mpc.y_max))
        throw ConfigError("experiments need a finite output bound");
    if (constants_source == ConstantsSource::file && constants_file.empty())
        throw ConfigError("constants source 'file' needs a constants file");
}

ExperimentConfig example_config()
{
    ExperimentConfig c;
    c.plant.numerator = {0.02, 0.061, 0.011};
    c.plant.denominator = {1.0, -2.1, 1.5, -0.3};
    c.data_length = 1000;
    c.order = 3;
    c.noise_bound = 1e-4;
    c.alpha_weight_product = 1.0;
    c.closed_loop_length = 120;
    c.mpc.horizon = 10;
    c.mpc.order = 3;
    c.mpc.lambda_sigma = 100.0;
    c.mpc.stage_cost = StageCost::linear(VectorXd::Zero(1), VectorXd::Constant(1, -1.0));
    c.mpc.u_lower = VectorXd::Constant(1, -10.0);
    c.mpc.u_upper = VectorXd::Constant(1, 10.0);
    c.mpc.y_max = 10.0;
    c.mpc.u_setpoint = VectorXd::Constant(1, 5.0);
    c.mpc.y_setpoint = VectorXd::Constant(1, 5.0);
    return c;
}

DataRecord generate_data(const StateSpaceModel& model, Index length, Index prefix,
                         const VectorXd& u_lower, const VectorXd& u_upper, std::uint64_t seed,
                         double noise_bound, Index pe_order, NoiseDistribution distribution)
{
    const Index m = model.inputs();
    if (u_lower.size() != m || u_upper.size() != m)
        throw DimensionError("generate_data: input bounds have wrong size");
    if (length < 1 || prefix < 0)
        throw ConfigError("generate_data: invalid length or prefix");
    const Index total = length + prefix;
    for (int attempt = 0; attempt < kMaxDataAttempts; ++attempt) {
        const std::uint64_t s = seed + static_cast<std::uint64_t>(attempt);
        std::mt19937_64 gen(s);
        MatrixXd u(m, total);
        for (Index j = 0; j < total; ++j)
            for (Index i = 0; i < m; ++i)
                u(i, j) = std::uniform_real_distribution<double>(u_lower(i), u_upper(i))(gen);
        const SimulationResult sim = simulate(model, VectorXd::Zero(model.order()), u,
                                              NoiseSpec{noise_bound, distribution, s + kNoiseSeedOffset});
        DataRecord rec(u, sim.trajectory.y, *sim.noisy_y, prefix, noise_bound, s);
        if (is_persistently_exciting(rec.inputs(), pe_order).persistently_exciting)
            return rec;
    }
    throw EstimationError("input is not persistently exciting of order " +
                          std::to_string(pe_order) + " after " +
                          std::to_string(kMaxDataAttempts) + " seeds");
}

DataRecord generate_data(const ExperimentConfig& config)
{
    const StateSpaceModel model = config.plant.build();
    config.validate(model.inputs(), model.outputs());
    const Index n = config.order;
    return generate_data(model, config.data_length, n, config.mpc.u_lower, config.mpc.u_upper,
                         config.data_seed, config.noise_bound, config.mpc.horizon + 2 * n,
                         config.noise_distribution);
}

OfflineArtifacts prepare_offline(const ExperimentConfig& config, const solver::Backend& backend)
{
    return prepare_offline(config, generate_data(config), backend);
}

OfflineArtifacts prepare_offline(const ExperimentConfig& config, DataRecord data,
                                 const solver::Backend& backend)
{
    StateSpaceModel model = config.plant.build();
    if (model.order() != config.order)
        throw ConfigError("plant order " + std::to_string(model.order()) +
                          " differs from the configured order " + std::to_string(config.order));
    config.validate(model.inputs(), model.outputs());
    if (data.input_dim() != model.inputs() || data.output_dim() != model.outputs() ||
        data.prefix() != config.order)
        throw ConfigError("data record does not match the plant dimensions or order");
    const MpcConfig mpc = config.effective_mpc();
    const Index n = config.order, L = mpc.horizon;
    PeReport pe = is_persistently_exciting(data.inputs(), L + 2 * n);

    SystemConstants oracle = oracle_constants(model, data, L, mpc.u_lower, mpc.u_upper, mpc.y_max,
                                              config.cpe_view, backend);
    SystemConstants constants;
    switch (config.constants_source) {
    case ConstantsSource::data:
        constants = estimate_constants(data, n, L, mpc.u_lower, mpc.u_upper, mpc.y_max,
                                       config.cpe_view, backend);
        break;
    case ConstantsSource::oracle:
        constants = oracle;
        break;
    case ConstantsSource::file:
        constants = io::constants_from_json(io::read_json(config.constants_file));
        if (constants.order != n || constants.horizon != L)
            throw ConfigError("constants file was computed for a different n or L");
        break;
    }
    TighteningCoefficients coeffs = compute_coefficients(constants, config.noise_bound, L, n);
    FeasibilityPrecheck precheck = feasibility_precheck(coeffs, mpc.y_max);
    EquilibriumCheck eq = equilibrium_check(model, mpc.u_setpoint, mpc.y_setpoint);
    return OfflineArtifacts{std::move(model), std::move(data), pe, std::move(constants),
                            std::move(oracle), std::move(coeffs), std::move(precheck), eq};
}

ClosedLoopLog run_closed_loop(const ExperimentConfig& config, const OfflineArtifacts& offline,
                              const solver::Backend& backend)
{
    const StateSpaceModel& plant = offline.model;
    const MpcConfig mpc = config.effective_mpc();
    const Index n = config.order, m = plant.inputs(), p = plant.outputs();
    const Index T = config.closed_loop_length;
    const SystemConstants& bound_constants = offline.oracle ? *offline.oracle : offline.constants;

    auto pred = std::make_shared<const PredictionData>(
        PredictionData::from_record(offline.data, mpc.horizon, n, DataView::noisy));
    const MatrixXd noise = draw_noise(
        NoiseSpec{config.noise_bound, config.noise_distribution, config.noise_seed}, p, T + n);

    // plant at rest: past inputs zero, past measurements pure noise
    VectorXd x = VectorXd::Zero(plant.order());
    InitialWindow window{MatrixXd::Zero(m, n), noise.leftCols(n)};
    ControllerState controller(mpc, pred, offline.coefficients, window);

    ClosedLoopLog log;
    MatrixXd last_input = MatrixXd::Zero(m, n);
    for (Index t = 0; t < T; t += n) {
        const MpcSolution sol = solve_step(controller, backend);
        SolveRecord rec;
        rec.t = t;
        rec.status = sol.report.status;
        rec.iterations = sol.report.iterations;
        rec.solve_time = sol.report.wall_time;
        MatrixXd u_apply;
        bool feasible = sol.optimal();
        if (feasible) {
            rec.cost = sol.cost;
            rec.u_one = sol.u_one;
            rec.alpha_one = sol.alpha_one;
            rec.sigma_inf = sol.sigma_inf;
            rec.sigma_bound_ok = sol.sigma_bound_ok;
            rec.active_tightened_rows = sol.active_tightened_rows;
            rec.y_predicted = sol.y_bar;
            rec.u_predicted = sol.u_bar;
            const PredictionDiagnostic d = prediction_error_diagnostic(
                sol, plant, x, bound_constants, config.noise_bound);
            rec.bound_max_ratio = d.max_ratio;
            rec.bound_violations = d.violations;
            log.summary.bound_violations += d.violations;
            if (!sol.sigma_bound_ok)
                ++log.summary.sigma_bound_failures;
            u_apply = n_step_apply(controller, sol);
        } else {
            ++log.summary.infeasible_events;
            if (config.infeasibility_policy == InfeasibilityPolicy::halt) {
                log.solves.push_back(rec);
                log.halt_reason = "QP at t = " + std::to_string(t) + " " +
                                  solver::to_string(sol.report.status);
                break;
            }
            u_apply = last_input.col(n - 1).replicate(1, n);
            controller.advance(n);
        }
        log.solves.push_back(rec);

        MatrixXd measured(p, n);
        for (Index j = 0; j < n; ++j) {
            StepRecord step;
            step.t = t + j;
            step.u = u_apply.col(j);
            step.y = plant.C() * x + plant.D() * step.u;
            step.y_measured = step.y + noise.col(n + t + j);
            step.feasible = feasible;
            measured.col(j) = step.y_measured;
            x = plant.A() * x + plant.B() * step.u;
            log.steps.push_back(std::move(step));
        }
        controller.push(u_apply, measured);
        last_input = u_apply;
    }

    ClosedLoopSummary& s = log.summary;
    s.completed = static_cast<Index>(log.steps.size()) == T;
    double sum = 0.0;
    Index count = 0;
    for (const StepRecord& step : log.steps) {
        const double ymax = step.y.lpNorm<Eigen::Infinity>();
        s.max_abs_y = std::max(s.max_abs_y, ymax);
        if (ymax > mpc.y_max || (step.u.array() > mpc.u_upper.array()).any() ||
            (step.u.array() < mpc.u_lower.array()).any())
            ++s.constraint_violations;
        if ((step.u.array() >= mpc.u_upper.array() - 1e-6).any() ||
            (step.u.array() <= mpc.u_lower.array() + 1e-6).any())
            ++s.saturated_steps;
        if (step.t >= T / 2) {
            sum += step.y.sum();
            count += step.y.size();
        }
    }
    s.mean_y_final_half = count > 0 ? sum / static_cast<double>(count) : 0.0;
    return log;
}

bool ReproductionReport::all_passed() const
{
    for (const ReproductionCheck& c : checks)
        if (!c.passed)
            return false;
    return true;
}

ReproductionReport reproduce_example(const std::filesystem::path& out_dir,
                                     const solver::Backend& backend)
{
    std::filesystem::create_directories(out_dir);
    const ExperimentConfig config = example_config();
    const OfflineArtifacts off = prepare_offline(config, backend);
    const ClosedLoopLog log = run_closed_loop(config, off, backend);

    io::write_json(io::to_json(config), out_dir / "config.json");
    io::write_data_csv(off.data, out_dir / "data.csv");
    io::write_json(io::to_json(off.constants), out_dir / "constants.json");
    if (off.oracle)
        io::write_json(io::to_json(*off.oracle), out_dir / "constants_oracle.json");
    io::write_constants_csv(off.constants, out_dir / "constants.csv");
    io::write_json(io::to_json(off.coefficients), out_dir / "tightening.json");
    io::write_coefficients_csv(off.coefficients, out_dir / "tightening.csv");
    io::write_closed_loop_csv(log, out_dir / "closed_loop.csv");
    io::write_solves_csv(log, out_dir / "solves.csv");
    io::json steps = io::json::array();
    for (const SolveRecord& r : log.solves)
        steps.push_back(io::solve_log_entry(r));
    io::write_json(steps, out_dir / "solve_log.json");
    io::write_input_svg(log, config.mpc.u_lower(0), config.mpc.u_upper(0), out_dir / "input.svg");
    io::write_output_svg(log, config.mpc.y_max, config.order, out_dir / "output.svg");

    ReproductionReport rep;
    auto add = [&](std::string name, bool ok, std::string detail) {
        rep.checks.push_back({std::move(name), ok, std::move(detail)});
    };
    add("persistent excitation", off.pe.persistently_exciting,
        "rank " + std::to_string(off.pe.rank) + " of " + std::to_string(off.pe.required));
    double rho_err = 0.0;
    for (std::size_t i = 0; i < off.constants.rho.size(); ++i)
        rho_err = std::max(rho_err, std::abs(off.constants.rho[i] - off.oracle->rho[i]));
    add("rho matches oracle", rho_err <= 1e-6, "max error " + fmt(rho_err));
    const double gamma_err = std::abs(off.constants.gamma - off.oracle->gamma);
    add("gamma matches oracle", gamma_err <= 1e-6,
        "gamma " + fmt(off.constants.gamma) + ", error " + fmt(gamma_err));
    add("tightening precheck", off.precheck.feasible(),
        "max admissible noise bound " + fmt(off.precheck.max_admissible_noise_bound));
    add("closed loop completed", log.summary.completed && log.summary.infeasible_events == 0,
        log.halt_reason.empty() ? "all QPs feasible" : log.halt_reason);
    add("output constraint", log.summary.max_abs_y <= config.mpc.y_max,
        "max |y| = " + fmt(log.summary.max_abs_y));
    add("input saturates", log.summary.saturated_steps >= 1,
        std::to_string(log.summary.saturated_steps) + " saturated steps");
    add("mean output in [6, 8] over final half",
        log.summary.mean_y_final_half >= 6.0 && log.summary.mean_y_final_half <= 8.0,
        "mean " + fmt(log.summary.mean_y_final_half));
    add("prediction error bound", log.summary.bound_violations == 0,
        std::to_string(log.summary.bound_violations) + " violations");
    return rep;
}

} // namespace ddmpc
