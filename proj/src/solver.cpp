#include "ddmpc/solver.hpp"

#include "ddmpc/error.hpp"

#include <Eigen/SVD>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

namespace ddmpc::solver {

namespace {

using Eigen::Index;
using Eigen::VectorXd;
using Triplets = std::vector<Eigen::Triplet<double>>;

constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(const VectorXd& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

SparseMatrix empty_rows(Index cols) { return SparseMatrix(0, cols); }

/// Internal standard form: min 0.5 x'Px + q'x  s.t.  Ax = b,  Gx <= h.
struct StandardForm {
    SparseMatrix P;
    VectorXd q;
    SparseMatrix A;
    VectorXd b;
    SparseMatrix G;
    VectorXd h;
    Index n_ineq_rows = 0; // rows of G that came from A_in (the rest are bounds)
};

StandardForm to_standard_form(const QuadraticProgram& qp)
{
    const Index n = qp.num_vars();
    StandardForm sf;
    sf.P = qp.hessian;
    sf.q = qp.linear;
    sf.A = qp.eq_matrix;
    sf.b = qp.eq_rhs;
    sf.n_ineq_rows = qp.ineq_matrix.rows();

    Triplets trip;
    std::vector<double> rhs;
    for (Index k = 0; k < qp.ineq_matrix.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(qp.ineq_matrix, k); it; ++it)
            trip.emplace_back(it.row(), it.col(), it.value());
    for (Index i = 0; i < qp.ineq_rhs.size(); ++i)
        rhs.push_back(qp.ineq_rhs(i));

    Index row = qp.ineq_matrix.rows();
    if (qp.upper.size() == n) {
        for (Index j = 0; j < n; ++j) {
            if (std::isfinite(qp.upper(j))) {
                trip.emplace_back(row++, j, 1.0);
                rhs.push_back(qp.upper(j));
            }
        }
    }
    if (qp.lower.size() == n) {
        for (Index j = 0; j < n; ++j) {
            if (std::isfinite(qp.lower(j))) {
                trip.emplace_back(row++, j, -1.0);
                rhs.push_back(-qp.lower(j));
            }
        }
    }
    sf.G.resize(row, n);
    sf.G.setFromTriplets(trip.begin(), trip.end());
    sf.h = Eigen::Map<VectorXd>(rhs.data(), static_cast<Index>(rhs.size()));
    return sf;
}

/// Regularized reduced KKT system  [P + G'WG + dp I, A'; A, -dd I].
class KktSystem {
public:
    KktSystem(const StandardForm& sf, double reg)
        : sf_(sf), Gt_(sf.G.transpose()), At_(sf.A.transpose()), base_reg_(reg), reg_(reg)
    {
    }

    /// Factorizes with the base regularization, escalating it when a pivot vanishes.
    bool factor(const VectorXd& w)
    {
        for (double reg = base_reg_; reg <= 1e-5; reg *= 100.0) {
            reg_ = reg;
            if (factor_once(w))
                return true;
        }
        return false;
    }

    bool factor_once(const VectorXd& w)
    {
        w_ = w;
        const Index n = sf_.q.size();
        const Index me = sf_.b.size();
        SparseMatrix H = sf_.P;
        if (sf_.G.rows() > 0)
            H += Gt_ * w.asDiagonal() * sf_.G;

        Triplets trip;
        trip.reserve(static_cast<std::size_t>(H.nonZeros() + 2 * sf_.A.nonZeros() + n + me));
        for (Index k = 0; k < H.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(H, k); it; ++it)
                trip.emplace_back(it.row(), it.col(), it.value());
        for (Index j = 0; j < n; ++j)
            trip.emplace_back(j, j, reg_);
        for (Index k = 0; k < sf_.A.outerSize(); ++k) {
            for (SparseMatrix::InnerIterator it(sf_.A, k); it; ++it) {
                trip.emplace_back(n + it.row(), it.col(), it.value());
                trip.emplace_back(it.col(), n + it.row(), it.value());
            }
        }
        for (Index i = 0; i < me; ++i)
            trip.emplace_back(n + i, n + i, -reg_);
        K_.resize(n + me, n + me);
        K_.setFromTriplets(trip.begin(), trip.end());
        H_ = std::move(H);

        ldlt_.compute(K_);
        return ldlt_.info() == Eigen::Success;
    }

    /// Solves the unregularized system for (dx, dy) by refinement on the regularized factor.
    void solve(const VectorXd& r1, const VectorXd& r2, VectorXd& dx, VectorXd& dy) const
    {
        const Index n = r1.size();
        const Index me = r2.size();
        VectorXd rhs(n + me);
        rhs << r1, r2;
        VectorXd sol = ldlt_.solve(rhs);
        const double scale = std::max(1.0, inf_norm(rhs));
        for (int it = 0; it < 20; ++it) {
            VectorXd res = rhs - apply_unregularized(sol);
            if (inf_norm(res) <= 1e-15 * scale)
                break;
            sol += ldlt_.solve(res);
        }
        dx = sol.head(n);
        dy = sol.tail(me);
    }

private:
    VectorXd apply_unregularized(const VectorXd& v) const
    {
        const Index n = sf_.q.size();
        const Index me = sf_.b.size();
        VectorXd out(n + me);
        out.head(n) = H_ * v.head(n);
        if (me > 0) {
            out.head(n) += At_ * v.tail(me);
            out.tail(me) = sf_.A * v.head(n);
        }
        return out;
    }

    const StandardForm& sf_;
    SparseMatrix Gt_;
    SparseMatrix At_;
    SparseMatrix H_;
    SparseMatrix K_;
    VectorXd w_;
    double base_reg_;
    double reg_;
    Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
};

double max_step(const VectorXd& v, const VectorXd& dv)
{
    double alpha = kInf;
    for (Index i = 0; i < v.size(); ++i)
        if (dv(i) < 0.0)
            alpha = std::min(alpha, -v(i) / dv(i));
    return alpha;
}

struct Iterate {
    VectorXd x, y, z, s;
};

struct IpmResult {
    SolveStatus status = SolveStatus::numerical_failure;
    Iterate it;
    int iterations = 0;
    bool diverged = false;
    std::string message;
};

double objective(const StandardForm& sf, const VectorXd& x)
{
    return 0.5 * x.dot(sf.P * x) + sf.q.dot(x);
}

IpmResult run_ipm(const StandardForm& sf, const Tolerances& tol)
{
    const Index me = sf.b.size();
    const Index mi = sf.h.size();
    IpmResult result;

    KktSystem kkt(sf, 1e-10);

    // Initial point: least-squares fit of the inequalities, then shift into the interior.
    Iterate cur;
    if (!kkt.factor(VectorXd::Ones(mi))) {
        result.message = "KKT factorization failed at initialization";
        return result;
    }
    {
        VectorXd r1 = -sf.q;
        if (mi > 0)
            r1 += sf.G.transpose() * sf.h;
        kkt.solve(r1, sf.b, cur.x, cur.y);
    }
    if (mi == 0) {
        // Equality-constrained QP: one Newton step solves it.
        const VectorXd rd = sf.P * cur.x + sf.q + sf.A.transpose() * cur.y;
        const VectorXd rp = sf.A * cur.x - sf.b;
        result.it = cur;
        result.iterations = 1;
        if (inf_norm(rp) <= tol.feasibility && inf_norm(rd) <= tol.optimality)
            result.status = SolveStatus::optimal;
        else if (inf_norm(rp) > tol.feasibility)
            result.status = SolveStatus::infeasible;
        else
            result.status = SolveStatus::unbounded;
        return result;
    }
    cur.s = sf.h - sf.G * cur.x;
    cur.z = -cur.s;
    {
        const double ap = -cur.s.minCoeff();
        if (ap >= -1e-8)
            cur.s.array() += 1.0 + ap;
        const double ad = -cur.z.minCoeff();
        if (ad >= -1e-8)
            cur.z.array() += 1.0 + ad;
    }


    Iterate best;
    bool have_best = false;
    double best_merit = kInf;
    int stall = 0;

    for (int iter = 0; iter <= tol.max_iterations; ++iter) {
        result.iterations = iter;
        const VectorXd rd = sf.P * cur.x + sf.q + sf.A.transpose() * cur.y + sf.G.transpose() * cur.z;
        const VectorXd rp = sf.A * cur.x - sf.b;
        const VectorXd rg = sf.G * cur.x + cur.s - sf.h;
        const double sz = cur.s.dot(cur.z);
        const double mu = sz / static_cast<double>(mi);
        const double pobj = objective(sf, cur.x);
        const double obj_scale = std::max(1.0, std::abs(pobj));

        const double pres = std::max(inf_norm(rp), inf_norm(rg));
        const double dres = inf_norm(rd);

        // Acceptable: meets the contract. Tight: well inside it, so stop iterating.
        const bool acceptable = pres <= tol.feasibility && dres <= tol.optimality &&
                                sz <= tol.optimality * obj_scale;
        if (acceptable) {
            const double merit = std::max({pres / tol.feasibility, dres / tol.optimality,
                                           sz / (tol.optimality * obj_scale)});
            if (merit < best_merit) {
                best_merit = merit;
                best = cur;
                have_best = true;
            }
            if (pres <= 0.1 * tol.feasibility && dres <= 0.1 * tol.optimality &&
                sz <= 1e-3 * tol.optimality * obj_scale) {
                result.status = SolveStatus::optimal;
                result.it = cur;
                return result;
            }
        }

        // Farkas certificate for primal infeasibility: A'y + G'z = 0, z >= 0, b'y + h'z < 0.
        {
            const double tau = -(sf.b.dot(cur.y) + sf.h.dot(cur.z));
            const double dual_size = std::max(inf_norm(cur.y), inf_norm(cur.z));
            if (tau > 0.0 && dual_size > 1e6) {
                VectorXd cert = sf.G.transpose() * cur.z;
                if (me > 0)
                    cert += sf.A.transpose() * cur.y;
                if (inf_norm(cert) <= 1e-8 * tau) {
                    result.status = SolveStatus::infeasible;
                    result.it = cur;
                    result.message = "primal infeasibility certificate";
                    return result;
                }
            }
        }
        // Certificate for unboundedness: Pd = 0, Ad = 0, Gd <= 0, q'd < 0.
        {
            const double xnorm = inf_norm(cur.x);
            if (xnorm > 1e8) {
                const VectorXd d = cur.x / xnorm;
                const double desc = -sf.q.dot(d);
                const VectorXd Gd = sf.G * d;
                if (desc > 0.0 && inf_norm(sf.P * d) <= 1e-8 * desc &&
                    inf_norm(sf.A * d) <= 1e-8 * desc && Gd.maxCoeff() <= 1e-8 * desc) {
                    result.status = SolveStatus::unbounded;
                    result.it = cur;
                    result.message = "unboundedness certificate";
                    return result;
                }
            }
        }
        if (!cur.x.allFinite() || inf_norm(cur.x) > 1e14 || inf_norm(cur.z) > 1e14 ||
            inf_norm(cur.y) > 1e14) {
            result.diverged = true;
            break;
        }
        if (iter == tol.max_iterations)
            break;

        const VectorXd w = cur.z.cwiseQuotient(cur.s);
        if (!kkt.factor(w)) {
            result.message = "KKT factorization failed";
            break;
        }

        // Solves the Newton system for a given complementarity right-hand side.
        auto newton = [&](const VectorXd& r_sz, VectorXd& dx, VectorXd& dy, VectorXd& dz,
                          VectorXd& ds) {
            const VectorXd tmp = (cur.z.cwiseProduct(rg) - r_sz).cwiseQuotient(cur.s);
            const VectorXd r1 = -rd - sf.G.transpose() * tmp;
            kkt.solve(r1, -rp, dx, dy);
            dz = w.cwiseProduct(sf.G * dx) + tmp;
            ds = -rg - sf.G * dx;
        };

        VectorXd dx, dy, dz, ds;
        newton(cur.s.cwiseProduct(cur.z), dx, dy, dz, ds);
        const double a_aff = std::min({1.0, max_step(cur.s, ds), max_step(cur.z, dz)});
        const double mu_aff = (cur.s + a_aff * ds).dot(cur.z + a_aff * dz) / static_cast<double>(mi);
        const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

        const VectorXd r_sz =
            cur.s.cwiseProduct(cur.z) + ds.cwiseProduct(dz) - VectorXd::Constant(mi, sigma * mu);
        newton(r_sz, dx, dy, dz, ds);
        const double a_max = std::min(max_step(cur.s, ds), max_step(cur.z, dz));
        const double step = std::min(1.0, 0.99 * a_max);

        cur.x += step * dx;
        cur.y += step * dy;
        cur.z += step * dz;
        cur.s += step * ds;

        if (step < 1e-10) {
            if (++stall >= 3)
                break;
        } else {
            stall = 0;
        }
    }

    if (have_best) {
        result.status = SolveStatus::optimal;
        result.it = best;
        result.message = "accepted best iterate within tolerances";
        return result;
    }
    result.it = cur;
    result.status = SolveStatus::numerical_failure;
    if (result.message.empty())
        result.message = result.diverged ? "iterates diverged" : "iteration limit reached";
    return result;
}

/// Phase-1 problem: min 1'(e+ + e-) + t  s.t.  Ax + e+ - e- = b,  Gx - t <= h,  e, t >= 0.
/// Returns the optimal infeasibility measure, or a negative value if it could not be solved.
double phase_one(const StandardForm& sf, const Tolerances& tol)
{
    const Index n = sf.q.size();
    const Index me = sf.b.size();
    const Index mi = sf.h.size();
    const Index nv = n + 2 * me + 1;

    StandardForm p1;
    p1.P.resize(nv, nv);
    for (Index j = 0; j < n; ++j)
        p1.P.insert(j, j) = 1e-10;
    p1.q = VectorXd::Zero(nv);
    p1.q.segment(n, 2 * me).setOnes();
    p1.q(nv - 1) = 1.0;

    Triplets ta;
    for (Index k = 0; k < sf.A.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(sf.A, k); it; ++it)
            ta.emplace_back(it.row(), it.col(), it.value());
    for (Index i = 0; i < me; ++i) {
        ta.emplace_back(i, n + i, 1.0);
        ta.emplace_back(i, n + me + i, -1.0);
    }
    p1.A.resize(me, nv);
    p1.A.setFromTriplets(ta.begin(), ta.end());
    p1.b = sf.b;

    Triplets tg;
    for (Index k = 0; k < sf.G.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(sf.G, k); it; ++it)
            tg.emplace_back(it.row(), it.col(), it.value());
    for (Index i = 0; i < mi; ++i)
        tg.emplace_back(i, nv - 1, -1.0);
    Index row = mi;
    for (Index j = n; j < nv; ++j)
        tg.emplace_back(row++, j, -1.0);
    p1.G.resize(row, nv);
    p1.G.setFromTriplets(tg.begin(), tg.end());
    p1.h = VectorXd::Zero(row);
    p1.h.head(mi) = sf.h;

    Tolerances t1 = tol;
    t1.max_iterations = std::max(tol.max_iterations, 200);
    const IpmResult r = run_ipm(p1, t1);
    if (r.status != SolveStatus::optimal)
        return -1.0;
    return p1.q.dot(r.it.x);
}

void check_block(const SparseMatrix& M, Index rows, Index cols, const char* what)
{
    if (M.rows() != rows || M.cols() != cols)
        throw DimensionError(std::string("inconsistent dimensions in ") + what);
}

} // namespace

LinearProgram::LinearProgram(Index num_vars)
    : cost(VectorXd::Zero(num_vars)), eq_matrix(empty_rows(num_vars)),
      ineq_matrix(empty_rows(num_vars))
{
}

QuadraticProgram::QuadraticProgram(Index num_vars)
    : hessian(num_vars, num_vars), linear(VectorXd::Zero(num_vars)),
      eq_matrix(empty_rows(num_vars)), ineq_matrix(empty_rows(num_vars))
{
}

QuadraticProgram::QuadraticProgram(const LinearProgram& lp)
    : hessian(lp.num_vars(), lp.num_vars()), linear(lp.cost), eq_matrix(lp.eq_matrix),
      eq_rhs(lp.eq_rhs), ineq_matrix(lp.ineq_matrix), ineq_rhs(lp.ineq_rhs), lower(lp.lower),
      upper(lp.upper)
{
}

std::string to_string(SolveStatus status)
{
    switch (status) {
    case SolveStatus::optimal:
        return "optimal";
    case SolveStatus::infeasible:
        return "infeasible";
    case SolveStatus::unbounded:
        return "unbounded";
    case SolveStatus::numerical_failure:
        return "numerical-failure";
    }
    return "unknown";
}

void validate(const QuadraticProgram& qp)
{
    const Index n = qp.num_vars();
    check_block(qp.hessian, n, n, "hessian");
    check_block(qp.eq_matrix, qp.eq_rhs.size(), n, "equality constraints");
    check_block(qp.ineq_matrix, qp.ineq_rhs.size(), n, "inequality constraints");
    if (qp.lower.size() != 0 && qp.lower.size() != n)
        throw DimensionError("lower bound size mismatch");
    if (qp.upper.size() != 0 && qp.upper.size() != n)
        throw DimensionError("upper bound size mismatch");
    const SparseMatrix asym = qp.hessian - SparseMatrix(qp.hessian.transpose());
    for (Index k = 0; k < asym.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(asym, k); it; ++it)
            if (std::abs(it.value()) > 1e-12)
                throw DimensionError("hessian is not symmetric");
}

void validate(const LinearProgram& lp) { validate(QuadraticProgram(lp)); }

SolveReport Backend::solve_lp(const LinearProgram& problem, const Tolerances& tol) const
{
    return solve_qp(QuadraticProgram(problem), tol);
}

SolveReport InteriorPointBackend::solve_qp(const QuadraticProgram& problem, const Tolerances& tol) const
{
    validate(problem);
    const auto start = std::chrono::steady_clock::now();
    const StandardForm sf = to_standard_form(problem);

    IpmResult r;
    try {
        r = run_ipm(sf, tol);
        if (r.status == SolveStatus::numerical_failure) {
            const double infeas = phase_one(sf, tol);
            const double thresh = 1e-6 * std::max({1.0, inf_norm(sf.b), inf_norm(sf.h)});
            if (infeas > thresh) {
                r.status = SolveStatus::infeasible;
                r.message = "phase-1 infeasibility measure " + std::to_string(infeas);
            } else if (infeas >= 0.0 && r.diverged) {
                r.status = SolveStatus::unbounded;
                r.message = "feasible by phase-1 and iterates diverged";
            }
        }
    } catch (const std::exception& e) {
        r.status = SolveStatus::numerical_failure;
        r.message = e.what();
    }

    SolveReport rep;
    rep.status = r.status;
    rep.iterations = r.iterations;
    rep.tolerances = tol;
    rep.message = r.message;
    if (r.it.x.size() == sf.q.size()) {
        rep.primal = r.it.x;
        rep.eq_dual = r.it.y;
        rep.ineq_dual = r.it.z.size() ? VectorXd(r.it.z.cwiseMax(0.0)) : VectorXd();
        rep.objective = objective(sf, rep.primal);
        double pres = sf.b.size() ? inf_norm(sf.A * rep.primal - sf.b) : 0.0;
        if (sf.h.size())
            pres = std::max(pres, (sf.G * rep.primal - sf.h).maxCoeff());
        rep.primal_residual = std::max(pres, 0.0);
        VectorXd rd = sf.P * rep.primal + sf.q;
        if (sf.b.size())
            rd += sf.A.transpose() * rep.eq_dual;
        if (sf.h.size()) {
            rd += sf.G.transpose() * rep.ineq_dual;
            rep.gap = r.it.s.cwiseMax(0.0).dot(rep.ineq_dual);
        }
        rep.dual_residual = inf_norm(rd);
    }
    rep.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

const Backend& default_backend()
{
    static const InteriorPointBackend backend;
    return backend;
}

SolveReport solve_lp(const LinearProgram& problem, const Tolerances& tol, const Backend& backend)
{
    return backend.solve_lp(problem, tol);
}

SolveReport solve_qp(const QuadraticProgram& problem, const Tolerances& tol, const Backend& backend)
{
    return backend.solve_qp(problem, tol);
}

void dump(const QuadraticProgram& qp, std::ostream& os)
{
    const Eigen::IOFormat fmt(Eigen::FullPrecision, Eigen::DontAlignCols, " ", "\n");
    os << "# QP with " << qp.num_vars() << " variables, " << qp.eq_rhs.size() << " equalities, "
       << qp.ineq_rhs.size() << " inequalities\n";
    os << "H\n" << Eigen::MatrixXd(qp.hessian).format(fmt) << "\nf\n"
       << qp.linear.transpose().format(fmt) << "\n";
    os << "A_eq\n" << Eigen::MatrixXd(qp.eq_matrix).format(fmt) << "\nb_eq\n"
       << qp.eq_rhs.transpose().format(fmt) << "\n";
    os << "A_in\n" << Eigen::MatrixXd(qp.ineq_matrix).format(fmt) << "\nb_in\n"
       << qp.ineq_rhs.transpose().format(fmt) << "\n";
    os << "lower\n" << qp.lower.transpose().format(fmt) << "\nupper\n"
       << qp.upper.transpose().format(fmt) << "\n";
}

Eigen::MatrixXd pseudoinverse(const Eigen::MatrixXd& matrix, double relative_threshold)
{
    if (matrix.size() == 0)
        return Eigen::MatrixXd::Zero(matrix.cols(), matrix.rows());
    Eigen::BDCSVD<Eigen::MatrixXd> svd(matrix, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VectorXd& sv = svd.singularValues();
    const double smax = sv.size() ? sv(0) : 0.0;
    const double rel = relative_threshold >= 0.0
                           ? relative_threshold
                           : static_cast<double>(std::max(matrix.rows(), matrix.cols())) *
                                 std::numeric_limits<double>::epsilon();
    const double cutoff = rel * smax;
    VectorXd inv = VectorXd::Zero(sv.size());
    for (Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff && sv(i) > 0.0)
            inv(i) = 1.0 / sv(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

double induced_one_norm(const Eigen::MatrixXd& matrix)
{
    if (matrix.size() == 0)
        return 0.0;
    return matrix.cwiseAbs().colwise().sum().maxCoeff();
}

double induced_inf_norm(const Eigen::MatrixXd& matrix)
{
    if (matrix.size() == 0)
        return 0.0;
    return matrix.cwiseAbs().rowwise().sum().maxCoeff();
}

} // namespace ddmpc::solver
