#pragma once

#include "ddmpc/constants.hpp"
#include "ddmpc/hankel.hpp"
#include "ddmpc/lti_plant.hpp"
#include "ddmpc/solver.hpp"
#include "ddmpc/tightening.hpp"

#include <Eigen/Dense>

#include <limits>
#include <memory>

namespace ddmpc {

/// Stage cost l(u, y): either |u - u_s|_R^2 + |y - y_s|_Q^2 or c_u'u + c_y'y.
struct StageCost {
    enum class Kind { quadratic, linear };
    Kind kind = Kind::quadratic;
    Eigen::MatrixXd Q;
    Eigen::MatrixXd R;
    Eigen::VectorXd input_weights;
    Eigen::VectorXd output_weights;

    static StageCost quadratic(Eigen::MatrixXd Q, Eigen::MatrixXd R);
    static StageCost linear(Eigen::VectorXd input_weights, Eigen::VectorXd output_weights);
};

/// Which samples of u-bar enter the |u|_1 term of the tightened constraints.
enum class InputNormWindow {
    predicted, ///< u-bar_{[0, L-1]}
    full       ///< u-bar_{[-n, L-1]}, including the fixed initial window
};

struct MpcConfig {
    Eigen::Index horizon = 10;
    Eigen::Index order = 3;
    double noise_bound = 0.0;
    double lambda_alpha = 0.0;
    double lambda_sigma = 100.0;
    StageCost stage_cost;
    Eigen::VectorXd u_lower;
    Eigen::VectorXd u_upper;
    /// +infinity drops the tightened output constraints entirely.
    double y_max = std::numeric_limits<double>::infinity();
    Eigen::VectorXd u_setpoint;
    Eigen::VectorXd y_setpoint;
    InputNormWindow input_norm_window = InputNormWindow::predicted;
    /// Ridge on alpha applied when lambda_alpha * noise_bound == 0.
    double alpha_ridge = 1e-10;
    /// Small linear cost on the epigraph variables t_u, t_alpha, t_sigma so they
    /// equal the norms they bound at the optimum.
    double epigraph_weight = 1e-8;
    solver::Tolerances tolerances;

    /// Throws ConfigError on L < 2n, y_max <= 0, a setpoint outside int(U x Y),
    /// or non-positive-definite quadratic weights.
    void validate(Eigen::Index input_dim, Eigen::Index output_dim) const;
};

/// Past n inputs (m x n) and noisy outputs (p x n).
struct InitialWindow {
    Eigen::MatrixXd u;
    Eigen::MatrixXd y;
};

/// Offsets of each block in the QP decision vector.
struct MpcLayout {
    Eigen::Index alpha = 0, sigma = 0, u = 0, y = 0, alpha_abs = 0, u_abs = 0;
    Eigen::Index t_u = 0, t_alpha = 0, t_sigma = 0;
    Eigen::Index num_alpha = 0, num_sigma = 0, num_u = 0, num_y = 0, num_u_abs = 0;
    Eigen::Index num_vars = 0;
    /// Range of inequality rows holding the tightened output constraints.
    Eigen::Index tightened_begin = 0, tightened_count = 0;
};

/// Hankel matrices H_{L+n}(u^d) and H_{L+n}(y~^d) shared by all solves.
struct PredictionData {
    Eigen::MatrixXd hankel_u;
    Eigen::MatrixXd hankel_y;
    Eigen::Index horizon = 0;
    Eigen::Index order = 0;
    Eigen::Index input_dim = 0;
    Eigen::Index output_dim = 0;

    static PredictionData from_record(const DataRecord& data, Eigen::Index horizon,
                                      Eigen::Index order, DataView view = DataView::noisy);
};

struct AssembledMpc {
    solver::QuadraticProgram qp;
    MpcLayout layout;
    /// Constant part of the stage cost not represented in the QP.
    double cost_offset = 0.0;
};

/// Builds the convex QP; throws ConfigError if some a4[k] >= y_max.
AssembledMpc assemble(const MpcConfig& config, const PredictionData& data,
                      const TighteningCoefficients& coeffs, const InitialWindow& window);

struct MpcSolution {
    Eigen::MatrixXd u_bar; ///< m x (L+n), samples -n..L-1
    Eigen::MatrixXd y_bar; ///< p x (L+n)
    Eigen::VectorXd alpha;
    Eigen::VectorXd sigma;
    double t_u = 0.0, t_alpha = 0.0, t_sigma = 0.0;
    /// J*_L: stage costs plus both regularizers (epigraph tie-break excluded).
    double cost = 0.0;
    solver::SolveReport report;

    double u_one = 0.0;     ///< |u-bar|_1 over the configured window
    double alpha_one = 0.0; ///< |alpha|_1
    double sigma_inf = 0.0; ///< |sigma|_inf
    /// |sigma|_inf <= noise_bound (1 + |alpha|_1), checked after the solve.
    bool sigma_bound_ok = false;
    int active_tightened_rows = 0;
    /// min over k of y_max - |y_k|_inf - tightened_margin(k) with true norms.
    double min_tightened_slack = std::numeric_limits<double>::infinity();

    bool optimal() const { return report.optimal(); }
};

/// Receding-horizon controller state: rolling window plus frozen offline quantities.
class ControllerState {
public:
    ControllerState(MpcConfig config, std::shared_ptr<const PredictionData> data,
                    TighteningCoefficients coeffs, InitialWindow window);

    const MpcConfig& config() const { return config_; }
    const PredictionData& data() const { return *data_; }
    const TighteningCoefficients& coefficients() const { return coeffs_; }
    const InitialWindow& window() const { return window_; }
    Eigen::Index time() const { return t_; }

    /// Appends applied inputs / measured outputs (one column each) and drops the oldest.
    void push(const Eigen::MatrixXd& applied_inputs, const Eigen::MatrixXd& measured_outputs);
    void advance(Eigen::Index steps) { t_ += steps; }

private:
    MpcConfig config_;
    std::shared_ptr<const PredictionData> data_;
    TighteningCoefficients coeffs_;
    InitialWindow window_;
    Eigen::Index t_ = 0;
};

MpcSolution solve_step(const ControllerState& controller,
                       const solver::Backend& backend = solver::default_backend());

/// Returns u-bar*_{[0,n-1]} (m x n) and advances the controller time by n.
/// Throws SolverError if the solution is not optimal.
Eigen::MatrixXd n_step_apply(ControllerState& controller, const MpcSolution& solution);

struct PredictionDiagnostic {
    Eigen::VectorXd error; ///< |y-hat_{t+k} - y-bar*_k|_inf, k in [0, L-1]
    Eigen::VectorXd bound; ///< right-hand side of the prediction-error bound
    double max_ratio = 0.0;
    int violations = 0;
};

/// Open-loop rollout of u-bar* from the true state compared with the predicted outputs.
PredictionDiagnostic prediction_error_diagnostic(const MpcSolution& solution,
                                                 const StateSpaceModel& plant,
                                                 const Eigen::VectorXd& state,
                                                 const SystemConstants& constants,
                                                 double noise_bound);

} // namespace ddmpc
