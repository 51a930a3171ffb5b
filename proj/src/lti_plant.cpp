#include "ddmpc/lti_plant.hpp"

#include "ddmpc/error.hpp"
#include "ddmpc/polytope.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <random>
#include <string>

namespace ddmpc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Index numerical_rank(const MatrixXd& M, double rel_tol = 1e-10)
{
    if (M.size() == 0)
        return 0;
    Eigen::JacobiSVD<MatrixXd> svd(M);
    const auto& s = svd.singularValues();
    if (s.size() == 0 || s(0) == 0.0)
        return 0;
    Index r = 0;
    for (Index i = 0; i < s.size(); ++i)
        if (s(i) > rel_tol * s(0))
            ++r;
    return r;
}

/// Block lower-triangular Toeplitz matrix of Markov parameters mapping u_{[0,T-1]} to
/// the forced part of y_{[0,T-1]}.
MatrixXd toeplitz(const StateSpaceModel& model, Index T)
{
    const Index m = model.inputs(), p = model.outputs();
    MatrixXd Tm = MatrixXd::Zero(p * T, m * T);
    for (Index i = 0; i < T; ++i)
        for (Index j = 0; j <= i; ++j)
            Tm.block(i * p, j * m, p, m) = model.markov_parameter(i - j);
    return Tm;
}

} // namespace

StateSpaceModel::StateSpaceModel(MatrixXd A, MatrixXd B, MatrixXd C, MatrixXd D)
    : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), D_(std::move(D))
{
    const Index n = A_.rows();
    if (n < 1 || A_.cols() != n)
        throw ConfigError("A must be square and non-empty");
    if (B_.rows() != n || B_.cols() < 1)
        throw ConfigError("B must have " + std::to_string(n) + " rows and at least one column");
    if (C_.cols() != n || C_.rows() < 1)
        throw ConfigError("C must have " + std::to_string(n) + " columns and at least one row");
    if (D_.rows() != C_.rows() || D_.cols() != B_.cols())
        throw ConfigError("D must be " + std::to_string(C_.rows()) + " x " +
                          std::to_string(B_.cols()));
    if (!A_.allFinite() || !B_.allFinite() || !C_.allFinite() || !D_.allFinite())
        throw ConfigError("state-space matrices contain non-finite entries");
    if (numerical_rank(controllability_matrix()) < n)
        throw ConfigError("realization is not controllable");
    if (numerical_rank(observability_matrix()) < n)
        throw ConfigError("realization is not observable");
}

MatrixXd StateSpaceModel::observability_matrix(Index blocks) const
{
    if (blocks < 0)
        blocks = order();
    const Index p = outputs();
    MatrixXd O(p * blocks, order());
    MatrixXd CAk = C_;
    for (Index k = 0; k < blocks; ++k) {
        O.middleRows(k * p, p) = CAk;
        CAk = CAk * A_;
    }
    return O;
}

MatrixXd StateSpaceModel::controllability_matrix() const
{
    const Index n = order(), m = inputs();
    MatrixXd R(n, n * m);
    MatrixXd AkB = B_;
    for (Index k = 0; k < n; ++k) {
        R.middleCols(k * m, m) = AkB;
        AkB = A_ * AkB;
    }
    return R;
}

Eigen::MatrixXcd StateSpaceModel::transfer_function(std::complex<double> z) const
{
    const Index n = order();
    Eigen::MatrixXcd M = z * Eigen::MatrixXcd::Identity(n, n) - A_.cast<std::complex<double>>();
    Eigen::MatrixXcd X = M.partialPivLu().solve(B_.cast<std::complex<double>>());
    return C_.cast<std::complex<double>>() * X + D_.cast<std::complex<double>>();
}

MatrixXd StateSpaceModel::markov_parameter(Index k) const
{
    if (k < 0)
        throw DimensionError("markov_parameter: negative index");
    if (k == 0)
        return D_;
    MatrixXd M = B_;
    for (Index i = 1; i < k; ++i)
        M = A_ * M;
    return C_ * M;
}

MatrixXd draw_noise(const NoiseSpec& spec, Index dim, Index count)
{
    if (!(spec.bound >= 0.0) || !std::isfinite(spec.bound))
        throw ConfigError("noise bound must be finite and non-negative");
    MatrixXd e(dim, count);
    std::mt19937_64 gen(spec.seed);
    if (spec.distribution == NoiseDistribution::uniform) {
        std::uniform_real_distribution<double> dist(-spec.bound, spec.bound);
        for (Index j = 0; j < count; ++j)
            for (Index i = 0; i < dim; ++i)
                e(i, j) = spec.bound == 0.0 ? 0.0 : dist(gen);
    } else {
        std::bernoulli_distribution coin(0.5);
        for (Index j = 0; j < count; ++j)
            for (Index i = 0; i < dim; ++i)
                e(i, j) = coin(gen) ? spec.bound : -spec.bound;
    }
    return e;
}

StateSpaceModel realize_transfer_function(const std::vector<double>& numerator,
                                          const std::vector<double>& denominator)
{
    if (denominator.empty() || denominator.front() == 0.0)
        throw ConfigError("denominator must have a non-zero leading coefficient");
    const Index n = static_cast<Index>(denominator.size()) - 1;
    if (n < 1)
        throw ConfigError("transfer function must have order at least 1");

    std::vector<double> num = numerator;
    while (num.size() > denominator.size() && num.front() == 0.0)
        num.erase(num.begin());
    if (num.size() > denominator.size())
        throw ConfigError("transfer function is improper");
    if (num.empty())
        throw ConfigError("numerator is empty");
    num.insert(num.begin(), denominator.size() - num.size(), 0.0);

    const double lead = denominator.front();
    VectorXd a(n), b(n + 1);
    for (Index i = 0; i < n; ++i)
        a(i) = denominator[i + 1] / lead;
    for (Index i = 0; i <= n; ++i)
        b(i) = num[i] / lead;

    MatrixXd A = MatrixXd::Zero(n, n);
    A.row(0) = -a.transpose();
    if (n > 1)
        A.bottomLeftCorner(n - 1, n - 1).setIdentity();
    MatrixXd B = MatrixXd::Zero(n, 1);
    B(0, 0) = 1.0;
    MatrixXd C(1, n);
    for (Index i = 0; i < n; ++i)
        C(0, i) = b(i + 1) - a(i) * b(0);
    MatrixXd D(1, 1);
    D(0, 0) = b(0);
    try {
        return StateSpaceModel(A, B, C, D);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("transfer function has common factors (") + e.what() + ")");
    }
}

SimulationResult simulate(const StateSpaceModel& model, const VectorXd& x0, const MatrixXd& u,
                          const std::optional<NoiseSpec>& noise)
{
    if (x0.size() != model.order())
        throw DimensionError("simulate: initial state has wrong size");
    if (u.rows() != model.inputs())
        throw DimensionError("simulate: input has " + std::to_string(u.rows()) + " rows, expected " +
                             std::to_string(model.inputs()));
    const Index T = u.cols();
    MatrixXd x(model.order(), T + 1);
    MatrixXd y(model.outputs(), T);
    x.col(0) = x0;
    for (Index k = 0; k < T; ++k) {
        y.col(k) = model.C() * x.col(k) + model.D() * u.col(k);
        x.col(k + 1) = model.A() * x.col(k) + model.B() * u.col(k);
    }
    SimulationResult r{Trajectory(u, y), std::nullopt, x};
    if (noise)
        r.noisy_y = y + draw_noise(*noise, model.outputs(), T);
    return r;
}

double rho_oracle(const StateSpaceModel& model, Index k)
{
    if (k < 0)
        throw DimensionError("rho_oracle: negative index");
    MatrixXd Ak = MatrixXd::Identity(model.order(), model.order());
    for (Index i = 0; i < k; ++i)
        Ak = Ak * model.A();
    return solver::induced_inf_norm(model.C() * Ak * solver::pseudoinverse(model.observability_matrix()));
}

double gamma_oracle(const StateSpaceModel& model, const solver::Backend& backend)
{
    const Index n = model.order(), m = model.inputs();
    const MatrixXd Phi = model.observability_matrix();
    const MatrixXd Phi_pinv = solver::pseudoinverse(Phi);
    Eigen::JacobiSVD<MatrixXd> svd(Phi, Eigen::ComputeThinU);
    const MatrixXd basis = svd.matrixU().leftCols(n);
    const PolytopeVertexSet vs = enumerate_box_subspace_vertices(basis, 1.0);

    // x_n = A^n x0 + R_rev u with R_rev = [A^{n-1}B, ..., B]
    MatrixXd An = MatrixXd::Identity(n, n);
    for (Index i = 0; i < n; ++i)
        An = An * model.A();
    MatrixXd Rrev(n, n * m);
    MatrixXd AkB = model.B();
    for (Index j = n - 1; j >= 0; --j) {
        Rrev.middleCols(j * m, m) = AkB;
        AkB = model.A() * AkB;
    }

    // variables [u (nm); s (nm)], min 1's, -s <= u <= s
    const Index nu = n * m;
    solver::LinearProgram lp(2 * nu);
    lp.cost.tail(nu).setOnes();
    std::vector<Eigen::Triplet<double>> eq, in;
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < nu; ++j)
            if (Rrev(i, j) != 0.0)
                eq.emplace_back(i, j, Rrev(i, j));
    lp.eq_matrix.resize(n, 2 * nu);
    lp.eq_matrix.setFromTriplets(eq.begin(), eq.end());
    for (Index j = 0; j < nu; ++j) {
        in.emplace_back(2 * j, j, 1.0);
        in.emplace_back(2 * j, nu + j, -1.0);
        in.emplace_back(2 * j + 1, j, -1.0);
        in.emplace_back(2 * j + 1, nu + j, -1.0);
    }
    lp.ineq_matrix.resize(2 * nu, 2 * nu);
    lp.ineq_matrix.setFromTriplets(in.begin(), in.end());
    lp.ineq_rhs = VectorXd::Zero(2 * nu);

    double gamma = 0.0;
    for (const VectorXd& w : vs.vertices) {
        lp.eq_rhs = -An * (Phi_pinv * w);
        const solver::SolveReport r = solver::solve_lp(lp, {}, backend);
        if (!r.optimal())
            throw SolverError("gamma_oracle: steering LP " + solver::to_string(r.status));
        gamma = std::max(gamma, r.objective);
    }
    return gamma;
}

EquilibriumCheck equilibrium_check(const StateSpaceModel& model, const VectorXd& u_s,
                                   const VectorXd& y_s, double tol)
{
    if (u_s.size() != model.inputs() || y_s.size() != model.outputs())
        throw DimensionError("equilibrium_check: setpoint has wrong size");
    const Index T = model.order() + 1;
    const VectorXd U = u_s.replicate(T, 1);
    const VectorXd Y = y_s.replicate(T, 1);
    const MatrixXd O = model.observability_matrix(T);
    const VectorXd rhs = Y - toeplitz(model, T) * U;
    const VectorXd x0 = O.completeOrthogonalDecomposition().solve(rhs);
    EquilibriumCheck c;
    c.residual = (O * x0 - rhs).lpNorm<Eigen::Infinity>();
    c.is_equilibrium = c.residual <= tol;
    return c;
}

} // namespace ddmpc
