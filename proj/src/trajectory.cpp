#include "ddmpc/trajectory.hpp"

#include "ddmpc/error.hpp"

#include <string>

namespace ddmpc {

Trajectory::Trajectory(Eigen::MatrixXd inputs, Eigen::MatrixXd outputs)
    : u(std::move(inputs)), y(std::move(outputs))
{
    if (u.cols() != y.cols() || u.cols() < 1)
        throw DimensionError("trajectory: input length " + std::to_string(u.cols()) +
                             " and output length " + std::to_string(y.cols()) +
                             " must agree and be positive");
}

Eigen::VectorXd Trajectory::stacked_u() const { return stack_samples(u); }
Eigen::VectorXd Trajectory::stacked_y() const { return stack_samples(y); }

Eigen::VectorXd stack_samples(const Eigen::MatrixXd& samples)
{
    return Eigen::Map<const Eigen::VectorXd>(samples.data(), samples.size());
}

Eigen::MatrixXd unstack_samples(const Eigen::VectorXd& stacked, Eigen::Index dim)
{
    if (dim < 1 || stacked.size() % dim != 0)
        throw DimensionError("unstack_samples: length " + std::to_string(stacked.size()) +
                             " is not a multiple of " + std::to_string(dim));
    return Eigen::Map<const Eigen::MatrixXd>(stacked.data(), dim, stacked.size() / dim);
}

} // namespace ddmpc
