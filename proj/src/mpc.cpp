#include "ddmpc/mpc.hpp"

#include "ddmpc/error.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <string>

namespace ddmpc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Triplets = std::vector<Eigen::Triplet<double>>;

namespace {

bool positive_definite(const MatrixXd& M)
{
    if (M.rows() != M.cols() || M.rows() == 0)
        return false;
    if (!M.isApprox(M.transpose(), 1e-12))
        return false;
    Eigen::LLT<MatrixXd> llt(M);
    return llt.info() == Eigen::Success;
}

/// Effective weight on |alpha|^2.
double alpha_weight(const MpcConfig& c)
{
    const double w = c.lambda_alpha * c.noise_bound;
    return w > 0.0 ? w : c.alpha_ridge;
}

Index norm_window_begin(const MpcConfig& c)
{
    return c.input_norm_window == InputNormWindow::predicted ? c.order : 0;
}

} // namespace

StageCost StageCost::quadratic(MatrixXd Q, MatrixXd R)
{
    StageCost s;
    s.kind = Kind::quadratic;
    s.Q = std::move(Q);
    s.R = std::move(R);
    return s;
}

StageCost StageCost::linear(VectorXd input_weights, VectorXd output_weights)
{
    StageCost s;
    s.kind = Kind::linear;
    s.input_weights = std::move(input_weights);
    s.output_weights = std::move(output_weights);
    return s;
}

void MpcConfig::validate(Index m, Index p) const
{
    if (order < 1)
        throw ConfigError("order must be positive");
    if (horizon < 2 * order)
        throw ConfigError("horizon L = " + std::to_string(horizon) + " must be at least 2n = " +
                          std::to_string(2 * order));
    if (!(y_max > 0.0))
        throw ConfigError("y_max must be positive");
    if (!(noise_bound >= 0.0) || !std::isfinite(noise_bound))
        throw ConfigError("noise bound must be finite and non-negative");
    if (!(lambda_alpha >= 0.0) || !(lambda_sigma > 0.0))
        throw ConfigError("regularization weights must satisfy lambda_alpha >= 0, lambda_sigma > 0");
    if (u_lower.size() != m || u_upper.size() != m)
        throw ConfigError("input bounds must have " + std::to_string(m) + " entries");
    if ((u_lower.array() >= u_upper.array()).any())
        throw ConfigError("input bounds must satisfy lower < upper");
    if (u_setpoint.size() != m || y_setpoint.size() != p)
        throw ConfigError("setpoint has wrong dimensions");
    if ((u_setpoint.array() <= u_lower.array()).any() ||
        (u_setpoint.array() >= u_upper.array()).any())
        throw ConfigError("input setpoint must lie in the interior of the input set");
    if (y_setpoint.size() > 0 && y_setpoint.lpNorm<Eigen::Infinity>() >= y_max)
        throw ConfigError("output setpoint must lie in the interior of the output set");
    if (stage_cost.kind == StageCost::Kind::quadratic) {
        if (stage_cost.Q.rows() != p || stage_cost.R.rows() != m)
            throw ConfigError("stage cost weights have wrong dimensions");
        if (!positive_definite(stage_cost.Q) || !positive_definite(stage_cost.R))
            throw ConfigError("stage cost weights must be symmetric positive definite");
    } else {
        if (stage_cost.input_weights.size() != m || stage_cost.output_weights.size() != p)
            throw ConfigError("linear stage cost weights have wrong dimensions");
    }
}

PredictionData PredictionData::from_record(const DataRecord& data, Index horizon, Index order,
                                           DataView view)
{
    PredictionData d;
    d.hankel_u = hankel(data.inputs(), horizon + order).entries;
    d.hankel_y = hankel(data.outputs(view), horizon + order).entries;
    d.horizon = horizon;
    d.order = order;
    d.input_dim = data.input_dim();
    d.output_dim = data.output_dim();
    return d;
}

AssembledMpc assemble(const MpcConfig& config, const PredictionData& data,
                      const TighteningCoefficients& coeffs, const InitialWindow& window)
{
    const Index m = data.input_dim, p = data.output_dim;
    const Index n = config.order, L = config.horizon, W = L + n;
    config.validate(m, p);
    if (data.horizon != L || data.order != n)
        throw ConfigError("prediction data were built for a different horizon or order");
    if (window.u.rows() != m || window.u.cols() != n || window.y.rows() != p || window.y.cols() != n)
        throw DimensionError("initial window must be m x n and p x n");

    const bool tightened = std::isfinite(config.y_max);
    if (tightened) {
        if (coeffs.size() != L - n)
            throw DimensionError("tightening coefficients do not match the horizon");
        for (Index k = 0; k < coeffs.size(); ++k)
            if (coeffs.a4[k] >= config.y_max)
                throw ConfigError("tightening leaves no room: a4[" + std::to_string(k) +
                                  "] >= y_max");
    }

    AssembledMpc out;
    MpcLayout& lay = out.layout;
    const Index cols = data.hankel_u.cols();
    const Index nb = norm_window_begin(config);
    lay.num_alpha = cols;
    lay.num_sigma = p * W;
    lay.num_u = m * W;
    lay.num_y = p * W;
    lay.num_u_abs = m * (W - nb);
    lay.alpha = 0;
    lay.sigma = lay.alpha + cols;
    lay.u = lay.sigma + lay.num_sigma;
    lay.y = lay.u + lay.num_u;
    lay.alpha_abs = lay.y + lay.num_y;
    lay.u_abs = lay.alpha_abs + cols;
    lay.t_u = lay.u_abs + lay.num_u_abs;
    lay.t_alpha = lay.t_u + 1;
    lay.t_sigma = lay.t_alpha + 1;
    lay.num_vars = lay.t_sigma + 1;
    const Index nv = lay.num_vars;

    solver::QuadraticProgram& qp = out.qp;
    qp = solver::QuadraticProgram(nv);

    // cost
    Triplets hess;
    const double wa = alpha_weight(config);
    for (Index i = 0; i < cols; ++i)
        hess.emplace_back(lay.alpha + i, lay.alpha + i, 2.0 * wa);
    for (Index i = 0; i < lay.num_sigma; ++i)
        hess.emplace_back(lay.sigma + i, lay.sigma + i, 2.0 * config.lambda_sigma);
    const StageCost& sc = config.stage_cost;
    for (Index k = 0; k < L; ++k) {
        const Index ui = lay.u + (n + k) * m, yi = lay.y + (n + k) * p;
        if (sc.kind == StageCost::Kind::quadratic) {
            for (Index i = 0; i < m; ++i)
                for (Index j = 0; j < m; ++j)
                    if (sc.R(i, j) != 0.0)
                        hess.emplace_back(ui + i, ui + j, 2.0 * sc.R(i, j));
            for (Index i = 0; i < p; ++i)
                for (Index j = 0; j < p; ++j)
                    if (sc.Q(i, j) != 0.0)
                        hess.emplace_back(yi + i, yi + j, 2.0 * sc.Q(i, j));
            qp.linear.segment(ui, m) = -2.0 * sc.R * config.u_setpoint;
            qp.linear.segment(yi, p) = -2.0 * sc.Q * config.y_setpoint;
            out.cost_offset += config.u_setpoint.dot(sc.R * config.u_setpoint) +
                               config.y_setpoint.dot(sc.Q * config.y_setpoint);
        } else {
            qp.linear.segment(ui, m) = sc.input_weights;
            qp.linear.segment(yi, p) = sc.output_weights;
        }
    }
    qp.linear(lay.t_u) = config.epigraph_weight;
    qp.linear(lay.t_alpha) = config.epigraph_weight;
    qp.linear(lay.t_sigma) = config.epigraph_weight;
    qp.hessian.resize(nv, nv);
    qp.hessian.setFromTriplets(hess.begin(), hess.end());

    // equalities
    Triplets eq;
    std::vector<double> eq_rhs;
    Index row = 0;
    for (Index i = 0; i < m * W; ++i, ++row) { // u - H_u alpha = 0
        eq.emplace_back(row, lay.u + i, 1.0);
        for (Index j = 0; j < cols; ++j)
            eq.emplace_back(row, lay.alpha + j, -data.hankel_u(i, j));
        eq_rhs.push_back(0.0);
    }
    for (Index i = 0; i < p * W; ++i, ++row) { // y + sigma - H_y alpha = 0
        eq.emplace_back(row, lay.y + i, 1.0);
        eq.emplace_back(row, lay.sigma + i, 1.0);
        for (Index j = 0; j < cols; ++j)
            eq.emplace_back(row, lay.alpha + j, -data.hankel_y(i, j));
        eq_rhs.push_back(0.0);
    }
    for (Index k = 0; k < n; ++k) { // initial window
        for (Index i = 0; i < m; ++i, ++row) {
            eq.emplace_back(row, lay.u + k * m + i, 1.0);
            eq_rhs.push_back(window.u(i, k));
        }
        for (Index i = 0; i < p; ++i, ++row) {
            eq.emplace_back(row, lay.y + k * p + i, 1.0);
            eq_rhs.push_back(window.y(i, k));
        }
    }
    for (Index k = L; k < W; ++k) { // terminal equilibrium on [L-n, L-1]
        for (Index i = 0; i < m; ++i, ++row) {
            eq.emplace_back(row, lay.u + k * m + i, 1.0);
            eq_rhs.push_back(config.u_setpoint(i));
        }
        for (Index i = 0; i < p; ++i, ++row) {
            eq.emplace_back(row, lay.y + k * p + i, 1.0);
            eq_rhs.push_back(config.y_setpoint(i));
        }
    }
    // t_alpha = sum a and t_u = sum v; as inequalities these dense rows would fill the
    // normal-equation block of the interior point method
    for (Index i = 0; i < cols; ++i)
        eq.emplace_back(row, lay.alpha_abs + i, 1.0);
    eq.emplace_back(row++, lay.t_alpha, -1.0);
    eq_rhs.push_back(0.0);
    for (Index i = 0; i < lay.num_u_abs; ++i)
        eq.emplace_back(row, lay.u_abs + i, 1.0);
    eq.emplace_back(row++, lay.t_u, -1.0);
    eq_rhs.push_back(0.0);
    qp.eq_matrix.resize(row, nv);
    qp.eq_matrix.setFromTriplets(eq.begin(), eq.end());
    qp.eq_rhs = Eigen::Map<VectorXd>(eq_rhs.data(), static_cast<Index>(eq_rhs.size()));

    // inequalities
    Triplets in;
    row = 0;
    for (Index i = 0; i < cols; ++i) { // |alpha_i| <= a_i
        in.emplace_back(row, lay.alpha + i, 1.0);
        in.emplace_back(row++, lay.alpha_abs + i, -1.0);
        in.emplace_back(row, lay.alpha + i, -1.0);
        in.emplace_back(row++, lay.alpha_abs + i, -1.0);
    }
    for (Index i = 0; i < lay.num_u_abs; ++i) { // |u_i| <= v_i
        in.emplace_back(row, lay.u + nb * m + i, 1.0);
        in.emplace_back(row++, lay.u_abs + i, -1.0);
        in.emplace_back(row, lay.u + nb * m + i, -1.0);
        in.emplace_back(row++, lay.u_abs + i, -1.0);
    }
    for (Index i = 0; i < lay.num_sigma; ++i) { // |sigma_i| <= t_sigma
        in.emplace_back(row, lay.sigma + i, 1.0);
        in.emplace_back(row++, lay.t_sigma, -1.0);
        in.emplace_back(row, lay.sigma + i, -1.0);
        in.emplace_back(row++, lay.t_sigma, -1.0);
    }
    VectorXd in_rhs = VectorXd::Zero(row + (tightened ? 2 * p * (L - n) : 0));

    lay.tightened_begin = row;
    if (tightened) {
        for (Index k = 0; k < L - n; ++k)
            for (Index i = 0; i < p; ++i)
                for (double s : {1.0, -1.0}) {
                    in.emplace_back(row, lay.y + (n + k) * p + i, s);
                    if (coeffs.a1[k] != 0.0)
                        in.emplace_back(row, lay.t_u, coeffs.a1[k]);
                    if (coeffs.a2[k] != 0.0)
                        in.emplace_back(row, lay.t_alpha, coeffs.a2[k]);
                    if (coeffs.a3[k] != 0.0)
                        in.emplace_back(row, lay.t_sigma, coeffs.a3[k]);
                    in_rhs(row++) = config.y_max - coeffs.a4[k];
                }
    }
    lay.tightened_count = row - lay.tightened_begin;
    qp.ineq_matrix.resize(row, nv);
    qp.ineq_matrix.setFromTriplets(in.begin(), in.end());
    qp.ineq_rhs = in_rhs;

    // input box on the predicted samples; the window is fixed by equalities
    const double inf = std::numeric_limits<double>::infinity();
    qp.lower = VectorXd::Constant(nv, -inf);
    qp.upper = VectorXd::Constant(nv, inf);
    for (Index k = n; k < W; ++k) {
        qp.lower.segment(lay.u + k * m, m) = config.u_lower;
        qp.upper.segment(lay.u + k * m, m) = config.u_upper;
    }
    return out;
}

ControllerState::ControllerState(MpcConfig config, std::shared_ptr<const PredictionData> data,
                                 TighteningCoefficients coeffs, InitialWindow window)
    : config_(std::move(config)), data_(std::move(data)), coeffs_(std::move(coeffs)),
      window_(std::move(window))
{
    if (!data_)
        throw ConfigError("controller needs prediction data");
    config_.validate(data_->input_dim, data_->output_dim);
    if (window_.u.rows() != data_->input_dim || window_.u.cols() != config_.order ||
        window_.y.rows() != data_->output_dim || window_.y.cols() != config_.order)
        throw DimensionError("initial window must be m x n and p x n");
}

void ControllerState::push(const MatrixXd& applied_inputs, const MatrixXd& measured_outputs)
{
    if (applied_inputs.cols() != measured_outputs.cols() ||
        applied_inputs.rows() != window_.u.rows() || measured_outputs.rows() != window_.y.rows())
        throw DimensionError("push: sample dimensions do not match the window");
    const Index n = window_.u.cols(), k = applied_inputs.cols();
    MatrixXd u(window_.u.rows(), n + k), y(window_.y.rows(), n + k);
    u << window_.u, applied_inputs;
    y << window_.y, measured_outputs;
    window_.u = u.rightCols(n);
    window_.y = y.rightCols(n);
}

MpcSolution solve_step(const ControllerState& controller, const solver::Backend& backend)
{
    const MpcConfig& cfg = controller.config();
    const PredictionData& data = controller.data();
    const AssembledMpc a = assemble(cfg, data, controller.coefficients(), controller.window());
    const MpcLayout& lay = a.layout;
    const Index m = data.input_dim, p = data.output_dim, n = cfg.order, L = cfg.horizon;

    MpcSolution s;
    s.report = backend.solve_qp(a.qp, cfg.tolerances);
    if (!s.report.optimal())
        return s;
    const VectorXd& z = s.report.primal;
    s.alpha = z.segment(lay.alpha, lay.num_alpha);
    s.sigma = z.segment(lay.sigma, lay.num_sigma);
    s.u_bar = unstack_samples(z.segment(lay.u, lay.num_u), m);
    s.y_bar = unstack_samples(z.segment(lay.y, lay.num_y), p);
    s.t_u = z(lay.t_u);
    s.t_alpha = z(lay.t_alpha);
    s.t_sigma = z(lay.t_sigma);

    s.u_one = s.u_bar.rightCols(L + n - norm_window_begin(cfg)).cwiseAbs().sum();
    s.alpha_one = s.alpha.lpNorm<1>();
    s.sigma_inf = s.sigma.lpNorm<Eigen::Infinity>();
    s.sigma_bound_ok = s.sigma_inf <= cfg.noise_bound * (1.0 + s.alpha_one);

    double stage = 0.0;
    const StageCost& sc = cfg.stage_cost;
    for (Index k = n; k < L + n; ++k) {
        if (sc.kind == StageCost::Kind::quadratic) {
            const VectorXd du = s.u_bar.col(k) - cfg.u_setpoint;
            const VectorXd dy = s.y_bar.col(k) - cfg.y_setpoint;
            stage += du.dot(sc.R * du) + dy.dot(sc.Q * dy);
        } else {
            stage += sc.input_weights.dot(s.u_bar.col(k)) + sc.output_weights.dot(s.y_bar.col(k));
        }
    }
    s.cost = stage + alpha_weight(cfg) * s.alpha.squaredNorm() +
             cfg.lambda_sigma * s.sigma.squaredNorm();

    if (std::isfinite(cfg.y_max)) {
        const TighteningCoefficients& c = controller.coefficients();
        const VectorXd slack = a.qp.ineq_rhs.segment(lay.tightened_begin, lay.tightened_count) -
                               a.qp.ineq_matrix.middleRows(lay.tightened_begin, lay.tightened_count) * z;
        const double act_tol = 1e-6 * std::max(1.0, cfg.y_max);
        s.active_tightened_rows = static_cast<int>((slack.array() <= act_tol).count());
        for (Index k = 0; k < L - n; ++k) {
            const double margin = tightened_margin(c, k, s.u_one, s.alpha_one, s.sigma_inf);
            s.min_tightened_slack =
                std::min(s.min_tightened_slack,
                         cfg.y_max - s.y_bar.col(n + k).lpNorm<Eigen::Infinity>() - margin);
        }
    }
    return s;
}

MatrixXd n_step_apply(ControllerState& controller, const MpcSolution& solution)
{
    if (!solution.optimal())
        throw SolverError("cannot apply a non-optimal solution (" +
                          solver::to_string(solution.report.status) + ")");
    const Index n = controller.config().order;
    MatrixXd u = solution.u_bar.middleCols(n, n);
    controller.advance(n);
    return u;
}

PredictionDiagnostic prediction_error_diagnostic(const MpcSolution& solution,
                                                 const StateSpaceModel& plant,
                                                 const VectorXd& state,
                                                 const SystemConstants& constants,
                                                 double noise_bound)
{
    const Index n = constants.order;
    const Index L = solution.u_bar.cols() - n;
    if (state.size() != plant.order() || L < 1)
        throw DimensionError("prediction diagnostic: inconsistent sizes");
    const MatrixXd u = solution.u_bar.rightCols(L);
    const SimulationResult sim = simulate(plant, state, u);
    PredictionDiagnostic d;
    d.error.resize(L);
    d.bound.resize(L);
    for (Index k = 0; k < L; ++k) {
        const double rho = constants.rho_at(n + k);
        d.error(k) = (sim.trajectory.y.col(k) - solution.y_bar.col(n + k)).lpNorm<Eigen::Infinity>();
        d.bound(k) = noise_bound * rho + noise_bound * (1.0 + rho) * solution.alpha_one +
                     (1.0 + rho) * solution.sigma_inf;
        const double ratio = d.bound(k) > 0.0 ? d.error(k) / d.bound(k)
                                              : (d.error(k) > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
        d.max_ratio = std::max(d.max_ratio, ratio);
        if (d.error(k) > d.bound(k) * (1.0 + 1e-9) + 1e-10)
            ++d.violations;
    }
    return d;
}

} // namespace ddmpc
