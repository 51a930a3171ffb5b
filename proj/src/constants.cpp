#include "ddmpc/constants.hpp"

#include "ddmpc/error.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>

namespace ddmpc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Triplets = std::vector<Eigen::Triplet<double>>;

namespace {

solver::SparseMatrix to_sparse(const MatrixXd& M, Index cols)
{
    Triplets t;
    for (Index j = 0; j < M.cols(); ++j)
        for (Index i = 0; i < M.rows(); ++i)
            if (M(i, j) != 0.0)
                t.emplace_back(i, j, M(i, j));
    solver::SparseMatrix S(M.rows(), cols);
    S.setFromTriplets(t.begin(), t.end());
    return S;
}

/// Replaces E x = e by an equivalent system with linearly independent rows.
void independent_rows(MatrixXd& E, VectorXd& e)
{
    Eigen::JacobiSVD<MatrixXd> svd(E, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    Index r = 0;
    while (r < s.size() && s(r) > 1e-10 * s(0))
        ++r;
    const MatrixXd Ur = svd.matrixU().leftCols(r);
    e = Ur.transpose() * e;
    E = s.head(r).asDiagonal() * svd.matrixV().leftCols(r).transpose();
}

/// max_s max_i s * (row (k, i) of Z) theta  s.t.  |Z_{[0,n-1]} theta|_inf <= 1
double rho_from_basis(const MatrixXd& Z, Index p, Index n, Index k,
                      const solver::Backend& backend)
{
    const Index r = Z.cols();
    if (r == 0)
        throw EstimationError("rho estimate: zero-input trajectory space is empty");
    const MatrixXd top = Z.topRows(n * p);
    MatrixXd G(2 * n * p, r);
    G << top, -top;
    solver::LinearProgram lp(r);
    lp.ineq_matrix = to_sparse(G, r);
    lp.ineq_rhs = VectorXd::Ones(2 * n * p);
    double rho = 0.0;
    for (Index i = 0; i < p; ++i)
        for (double sign : {1.0, -1.0}) {
            lp.cost = -sign * Z.row(k * p + i).transpose();
            const solver::SolveReport rep = solver::solve_lp(lp, {}, backend);
            if (!rep.optimal())
                throw EstimationError("rho estimate: LP for k = " + std::to_string(k) + " " +
                                      solver::to_string(rep.status));
            rho = std::max(rho, -rep.objective);
        }
    return rho;
}

void check_estimator_input(const MatrixXd& u_data, const MatrixXd& y_data, Index n, Index pe_order)
{
    if (n < 1)
        throw ConfigError("system order must be positive");
    if (u_data.cols() != y_data.cols())
        throw DimensionError("input and output data lengths differ");
    const PeReport pe = is_persistently_exciting(u_data, pe_order);
    if (!pe.persistently_exciting)
        throw EstimationError("input data not persistently exciting of order " +
                              std::to_string(pe_order) + " (rank " + std::to_string(pe.rank) +
                              " of " + std::to_string(pe.required) + ")");
}

} // namespace

std::string to_string(Provenance p)
{
    switch (p) {
    case Provenance::data_driven:
        return "data_driven";
    case Provenance::model_oracle:
        return "model_oracle";
    case Provenance::closed_form:
        return "closed_form";
    case Provenance::from_file:
        return "from_file";
    }
    return "unknown";
}

Provenance provenance_from_string(const std::string& s)
{
    for (Provenance p : {Provenance::data_driven, Provenance::model_oracle,
                         Provenance::closed_form, Provenance::from_file})
        if (to_string(p) == s)
            return p;
    throw ConfigError("unknown provenance tag '" + s + "'");
}

double SystemConstants::rho_at(Index k) const
{
    if (k < order || k - order >= static_cast<Index>(rho.size()))
        throw DimensionError("rho_" + std::to_string(k) + " is not stored");
    return rho[static_cast<std::size_t>(k - order)];
}

SystemConstants SystemConstants::make(Index order, Index horizon, double gamma,
                                      std::vector<double> rho, double c_pe, double xi_max)
{
    if (order < 1 || horizon < order)
        throw ConfigError("constants need 1 <= n <= L");
    if (static_cast<Index>(rho.size()) != horizon)
        throw DimensionError("rho must hold " + std::to_string(horizon) + " values (k = n..L+n-1), got " +
                             std::to_string(rho.size()));
    auto valid = [](double v) { return std::isfinite(v) && v >= 0.0; };
    if (!valid(gamma) || !valid(c_pe) || !valid(xi_max) || !std::all_of(rho.begin(), rho.end(), valid))
        throw ConfigError("constants must be finite and non-negative");
    SystemConstants c;
    c.order = order;
    c.horizon = horizon;
    c.gamma = gamma;
    c.rho = std::move(rho);
    c.c_pe = c_pe;
    c.xi_max = xi_max;
    c.rho_n_max = *std::max_element(c.rho.begin(), c.rho.begin() + order);
    c.rho_L_max = *std::max_element(c.rho.end() - order, c.rho.end());
    return c;
}

Eigen::MatrixXd steering_input(const MatrixXd& u_data, const MatrixXd& y_data, Index n,
                               const Trajectory& initial_window, const solver::Backend& backend)
{
    check_estimator_input(u_data, y_data, n, 4 * n);
    const Index m = u_data.rows(), p = y_data.rows();
    if (initial_window.length() != n || initial_window.input_dim() != m ||
        initial_window.output_dim() != p)
        throw DimensionError("steering_input: initial window must be " + std::to_string(n) +
                             " samples long");
    const MatrixXd Q = trajectory_space_basis(u_data, y_data, 3 * n);
    const Index r = Q.cols();
    const Index ur = 3 * n * m; // first row of the output block

    // equality rows: window (u and y on [0, n)), zero u and y on [2n, 3n)
    std::vector<Index> rows;
    VectorXd rhs_full(2 * n * (m + p));
    Index e = 0;
    const VectorXd wu = initial_window.stacked_u(), wy = initial_window.stacked_y();
    for (Index i = 0; i < n * m; ++i, ++e) {
        rows.push_back(i);
        rhs_full(e) = wu(i);
    }
    for (Index i = 0; i < n * p; ++i, ++e) {
        rows.push_back(ur + i);
        rhs_full(e) = wy(i);
    }
    for (Index i = 0; i < n * m; ++i, ++e) {
        rows.push_back(2 * n * m + i);
        rhs_full(e) = 0.0;
    }
    for (Index i = 0; i < n * p; ++i, ++e) {
        rows.push_back(ur + 2 * n * p + i);
        rhs_full(e) = 0.0;
    }
    MatrixXd E(rows.size(), r);
    for (std::size_t i = 0; i < rows.size(); ++i)
        E.row(static_cast<Index>(i)) = Q.row(rows[i]);
    independent_rows(E, rhs_full);

    // variables [theta (r); t (nm)]: min 1't,  -t <= Q_u[n, 2n) theta <= t
    const Index nu = n * m;
    const MatrixXd Qmid = Q.middleRows(n * m, nu);
    solver::LinearProgram lp(r + nu);
    lp.cost.tail(nu).setOnes();
    MatrixXd Eext = MatrixXd::Zero(E.rows(), r + nu);
    Eext.leftCols(r) = E;
    lp.eq_matrix = to_sparse(Eext, r + nu);
    lp.eq_rhs = rhs_full;
    MatrixXd G(2 * nu, r + nu);
    G << Qmid, -MatrixXd::Identity(nu, nu), -Qmid, -MatrixXd::Identity(nu, nu);
    lp.ineq_matrix = to_sparse(G, r + nu);
    lp.ineq_rhs = VectorXd::Zero(2 * nu);

    const solver::SolveReport rep = solver::solve_lp(lp, {}, backend);
    if (!rep.optimal())
        throw EstimationError("steering LP " + solver::to_string(rep.status));
    return unstack_samples(Qmid * rep.primal.head(r), m);
}

GammaEstimate estimate_gamma(const MatrixXd& u_data, const MatrixXd& y_data, Index n,
                             const solver::Backend& backend)
{
    check_estimator_input(u_data, y_data, n, 4 * n);
    const Index m = u_data.rows(), p = y_data.rows();
    const MatrixXd Z = zero_input_output_basis(u_data, y_data, n);
    if (Z.cols() != n)
        throw EstimationError("gamma estimate: free-response space has dimension " +
                              std::to_string(Z.cols()) + ", expected " + std::to_string(n) +
                              " (insufficient excitation?)");
    GammaEstimate g;
    g.vertices = enumerate_box_subspace_vertices(Z, 1.0);

    // Initial windows: length-2n trajectories with zero input and output w on [n, 2n).
    const MatrixXd Q2 = trajectory_space_basis(u_data, y_data, 2 * n);
    const Index ur = 2 * n * m;
    MatrixXd E(n * (m + p), Q2.cols());
    E << Q2.middleRows(n * m, n * m), Q2.middleRows(ur + n * p, n * p);
    const MatrixXd E_pinv = solver::pseudoinverse(E);

    for (const VectorXd& w : g.vertices.vertices) {
        VectorXd target(n * (m + p));
        target << VectorXd::Zero(n * m), w;
        const VectorXd traj = Q2 * (E_pinv * target);
        if ((E * (E_pinv * target) - target).lpNorm<Eigen::Infinity>() > 1e-6)
            throw EstimationError("gamma estimate: no initial window reproduces a vertex");
        Trajectory window(unstack_samples(traj.head(n * m), m),
                          unstack_samples(traj.segment(ur, n * p), p));
        const MatrixXd u = steering_input(u_data, y_data, n, window, backend);
        const double cost = u.cwiseAbs().sum();
        g.vertex_costs.push_back(cost);
        g.initial_windows.push_back(window);
        g.value = std::max(g.value, cost);
    }
    return g;
}

GammaEstimate estimate_gamma(const DataRecord& data, Index n, const solver::Backend& backend)
{
    return estimate_gamma(data.inputs(), data.outputs(DataView::clean), n, backend);
}

double estimate_rho(const MatrixXd& u_data, const MatrixXd& y_data, Index n, Index k,
                    const solver::Backend& backend)
{
    if (k < 0)
        throw DimensionError("rho index must be non-negative");
    const Index window = std::max(k + 1, n);
    check_estimator_input(u_data, y_data, n, window + n);
    const MatrixXd Z = zero_input_output_basis(u_data, y_data, window);
    if (Z.cols() != n)
        throw EstimationError("rho estimate: zero-input space has dimension " +
                              std::to_string(Z.cols()) + ", expected " + std::to_string(n));
    return rho_from_basis(Z, y_data.rows(), n, k, backend);
}

double estimate_rho(const DataRecord& data, Index n, Index k, const solver::Backend& backend)
{
    return estimate_rho(data.inputs(), data.outputs(DataView::clean), n, k, backend);
}

std::vector<double> estimate_rho_range(const DataRecord& data, Index n, Index horizon,
                                       const solver::Backend& backend)
{
    check_estimator_input(data.inputs(), data.outputs(DataView::clean), n, horizon + 2 * n);
    const MatrixXd Z =
        zero_input_output_basis(data.inputs(), data.outputs(DataView::clean), horizon + n);
    if (Z.cols() != n)
        throw EstimationError("rho estimate: zero-input space has dimension " +
                              std::to_string(Z.cols()) + ", expected " + std::to_string(n));
    std::vector<double> rho;
    for (Index k = n; k < horizon + n; ++k)
        rho.push_back(rho_from_basis(Z, data.output_dim(), n, k, backend));
    return rho;
}

double compute_cpe(const DataRecord& data, DataView view, Index horizon)
{
    return solver::induced_one_norm(solver::pseudoinverse(build_h_uxi(data, view, horizon)));
}

double compute_xi_max(const VectorXd& u_lower, const VectorXd& u_upper, double y_max,
                      Index output_dim, Index n)
{
    if (u_lower.size() != u_upper.size())
        throw DimensionError("input bounds differ in size");
    if (!u_lower.allFinite() || !u_upper.allFinite() || !std::isfinite(y_max))
        throw ConfigError("xi_max needs bounded input and output constraint sets");
    const double u_part = u_lower.cwiseAbs().cwiseMax(u_upper.cwiseAbs()).sum();
    return static_cast<double>(n) * (u_part + static_cast<double>(output_dim) * y_max);
}

SystemConstants estimate_constants(const DataRecord& data, Index n, Index horizon,
                                   const VectorXd& u_lower, const VectorXd& u_upper, double y_max,
                                   DataView cpe_view, const solver::Backend& backend)
{
    const double gamma = estimate_gamma(data, n, backend).value;
    std::vector<double> rho = estimate_rho_range(data, n, horizon, backend);
    SystemConstants c = SystemConstants::make(
        n, horizon, gamma, std::move(rho), compute_cpe(data, cpe_view, horizon),
        compute_xi_max(u_lower, u_upper, y_max, data.output_dim(), n));
    c.gamma_source = Provenance::data_driven;
    c.rho_source = Provenance::data_driven;
    c.c_pe_source = Provenance::data_driven;
    c.xi_max_source = Provenance::closed_form;
    return c;
}

SystemConstants oracle_constants(const StateSpaceModel& model, const DataRecord& data,
                                 Index horizon, const VectorXd& u_lower, const VectorXd& u_upper,
                                 double y_max, DataView cpe_view, const solver::Backend& backend)
{
    const Index n = model.order();
    std::vector<double> rho;
    for (Index k = n; k < horizon + n; ++k)
        rho.push_back(rho_oracle(model, k));
    SystemConstants c = SystemConstants::make(
        n, horizon, gamma_oracle(model, backend), std::move(rho),
        compute_cpe(data, cpe_view, horizon),
        compute_xi_max(u_lower, u_upper, y_max, model.outputs(), n));
    c.gamma_source = Provenance::model_oracle;
    c.rho_source = Provenance::model_oracle;
    c.c_pe_source = Provenance::data_driven;
    c.xi_max_source = Provenance::closed_form;
    return c;
}

} // namespace ddmpc
