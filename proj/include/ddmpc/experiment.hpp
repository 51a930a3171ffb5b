#pragma once

#include "ddmpc/constants.hpp"
#include "ddmpc/hankel.hpp"
#include "ddmpc/lti_plant.hpp"
#include "ddmpc/mpc.hpp"
#include "ddmpc/tightening.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ddmpc {

/// Plant given either as a SISO transfer function or as state-space matrices.
struct PlantSpec {
    std::vector<double> numerator;
    std::vector<double> denominator;
    std::optional<Eigen::MatrixXd> A, B, C, D;

    StateSpaceModel build() const;
};

enum class ConstantsSource { data, oracle, file };
enum class InfeasibilityPolicy { halt, hold_last_input };

std::string to_string(ConstantsSource s);
ConstantsSource constants_source_from_string(const std::string& s);

struct ExperimentConfig {
    PlantSpec plant;
    Eigen::Index data_length = 1000;
    Eigen::Index order = 3;
    double noise_bound = 1e-4;
    NoiseDistribution noise_distribution = NoiseDistribution::uniform;
    std::uint64_t data_seed = 0;
    std::uint64_t noise_seed = 1;
    MpcConfig mpc;
    /// When set, lambda_alpha = product / noise_bound (ignored for a zero noise bound).
    std::optional<double> alpha_weight_product = 1.0;
    Eigen::Index closed_loop_length = 120;
    ConstantsSource constants_source = ConstantsSource::data;
    std::string constants_file;
    DataView cpe_view = DataView::noisy;
    InfeasibilityPolicy infeasibility_policy = InfeasibilityPolicy::halt;

    /// MpcConfig with noise bound and lambda_alpha filled in from the experiment fields.
    MpcConfig effective_mpc() const;
    /// Throws ConfigError on T not a multiple of n or N < (m+1)(L+2n) - 1.
    void validate(Eigen::Index input_dim, Eigen::Index output_dim) const;
};

/// The numerical example: third-order plant, U = Y = [-10, 10], N = 1000,
/// noise bound 1e-4, L = 10, lambda_sigma = 100, lambda_alpha * noise bound = 1,
/// setpoint (5, 5), stage cost -y, T = 120.
ExperimentConfig example_config();

/**
 * Excitation experiment: i.i.d. uniform inputs on the box, clean outputs from rest,
 * noisy copy with an independent generator. The input must be persistently exciting
 * of order `pe_order`; otherwise the seed is incremented (up to 5 attempts) before
 * throwing EstimationError.
 */
DataRecord generate_data(const StateSpaceModel& model, Eigen::Index length, Eigen::Index prefix,
                         const Eigen::VectorXd& u_lower, const Eigen::VectorXd& u_upper,
                         std::uint64_t seed, double noise_bound, Eigen::Index pe_order,
                         NoiseDistribution distribution = NoiseDistribution::uniform);

/// Offline stage: data, excitation certificate, constants, coefficients, prechecks.
struct OfflineArtifacts {
    StateSpaceModel model;
    DataRecord data;
    PeReport pe;
    SystemConstants constants;
    std::optional<SystemConstants> oracle;
    TighteningCoefficients coefficients;
    FeasibilityPrecheck precheck;
    EquilibriumCheck setpoint_check;
};

OfflineArtifacts prepare_offline(const ExperimentConfig& config,
                                 const solver::Backend& backend = solver::default_backend());
/// Same, with a previously recorded excitation experiment.
OfflineArtifacts prepare_offline(const ExperimentConfig& config, DataRecord data,
                                 const solver::Backend& backend = solver::default_backend());

/// Excitation experiment as configured (persistently exciting of order L + 2n).
DataRecord generate_data(const ExperimentConfig& config);

struct StepRecord {
    Eigen::Index t = 0;
    Eigen::VectorXd u;
    Eigen::VectorXd y;
    Eigen::VectorXd y_measured;
    bool feasible = true;
};

struct SolveRecord {
    Eigen::Index t = 0;
    solver::SolveStatus status = solver::SolveStatus::numerical_failure;
    double cost = 0.0;
    double u_one = 0.0;
    double alpha_one = 0.0;
    double sigma_inf = 0.0;
    bool sigma_bound_ok = false;
    int active_tightened_rows = 0;
    double bound_max_ratio = 0.0;
    int bound_violations = 0;
    int iterations = 0;
    double solve_time = 0.0;
    Eigen::MatrixXd y_predicted; ///< y-bar* over [-n, L-1]
    Eigen::MatrixXd u_predicted;
};

struct ClosedLoopSummary {
    double max_abs_y = 0.0;
    int saturated_steps = 0;
    double mean_y_final_half = 0.0;
    int infeasible_events = 0;
    int constraint_violations = 0;
    int bound_violations = 0;
    int sigma_bound_failures = 0;
    bool completed = false;
};

struct ClosedLoopLog {
    std::vector<StepRecord> steps;
    std::vector<SolveRecord> solves;
    ClosedLoopSummary summary;
    std::string halt_reason;
};

/// Algorithm loop: solve, apply n inputs to the plant with fresh measurement noise, repeat.
ClosedLoopLog run_closed_loop(const ExperimentConfig& config, const OfflineArtifacts& offline,
                              const solver::Backend& backend = solver::default_backend());

struct ReproductionCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ReproductionReport {
    std::vector<ReproductionCheck> checks;
    bool all_passed() const;
};

/// Full pipeline with the example defaults; writes CSV/JSON/SVG files into out_dir.
ReproductionReport reproduce_example(const std::filesystem::path& out_dir,
                                     const solver::Backend& backend = solver::default_backend());

} // namespace ddmpc
