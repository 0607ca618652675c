#pragma once

#include "hdsweep/space.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace hdsweep
{

/// Uniform grid t_k = k T / N on [0, T].
class TimeGrid
{
public:
    TimeGrid(double horizon, std::size_t steps) : horizon_(horizon), steps_(steps)
    {
        detail::require(std::isfinite(horizon) && horizon > 0.0, "TimeGrid: horizon must be positive");
        detail::require(steps >= 1, "TimeGrid: at least one step required");
    }

    [[nodiscard]] double horizon() const noexcept { return horizon_; }
    [[nodiscard]] std::size_t steps() const noexcept { return steps_; }
    [[nodiscard]] std::size_t size() const noexcept { return steps_ + 1; }
    [[nodiscard]] double dt() const noexcept { return horizon_ / static_cast<double>(steps_); }

    [[nodiscard]] double node(std::size_t k) const
    {
        detail::require(k <= steps_, "TimeGrid: node index out of range");
        // the last node is exactly T
        return k == steps_ ? horizon_ : static_cast<double>(k) * dt();
    }

    [[nodiscard]] TimeGrid refined(std::size_t factor = 2) const { return {horizon_, steps_ * factor}; }

    friend bool operator==(const TimeGrid& a, const TimeGrid& b)
    {
        return a.horizon_ == b.horizon_ && a.steps_ == b.steps_;
    }

private:
    double horizon_;
    std::size_t steps_;
};

/// Grid samples of a continuous function [0, T] -> R^dim, read back by
/// piecewise-linear interpolation.
class Trajectory
{
public:
    Trajectory(TimeGrid grid, std::vector<Vector> samples) : grid_(grid), samples_(std::move(samples))
    {
        detail::require(samples_.size() == grid_.size(), "Trajectory: sample count must equal N+1");
        for (const auto& s : samples_)
        {
            detail::require(s.size() == samples_.front().size(), "Trajectory: samples of unequal length");
        }
    }

    static Trajectory zeros(const TimeGrid& grid, Index dim)
    {
        return {grid, std::vector<Vector>(grid.size(), Vector::Zero(dim))};
    }

    static Trajectory constant(const TimeGrid& grid, const Vector& value)
    {
        return {grid, std::vector<Vector>(grid.size(), value)};
    }

    static Trajectory sample(const TimeGrid& grid, const std::function<Vector(double)>& fn)
    {
        std::vector<Vector> s;
        s.reserve(grid.size());
        for (std::size_t k = 0; k < grid.size(); ++k)
        {
            s.push_back(fn(grid.node(k)));
        }
        return {grid, std::move(s)};
    }

    [[nodiscard]] const TimeGrid& grid() const noexcept { return grid_; }
    [[nodiscard]] std::size_t size() const noexcept { return samples_.size(); }
    [[nodiscard]] Index dim() const noexcept { return samples_.front().size(); }

    [[nodiscard]] const Vector& operator[](std::size_t k) const { return samples_[k]; }
    [[nodiscard]] Vector& operator[](std::size_t k) { return samples_[k]; }
    [[nodiscard]] const std::vector<Vector>& samples() const noexcept { return samples_; }

    /// Piecewise-linear value at time t in [0, T]; exact at nodes.
    [[nodiscard]] Vector interpolate(double t) const
    {
        const double horizon = grid_.horizon();
        if (!(t >= 0.0 && t <= horizon))
        {
            throw ContractViolation("Trajectory::interpolate: t = " + std::to_string(t) + " outside [0, T]");
        }
        const double pos = t / grid_.dt();
        auto k = static_cast<std::size_t>(std::floor(pos));
        if (k >= grid_.steps())
        {
            return samples_.back();
        }
        const double lambda = pos - static_cast<double>(k);
        if (lambda == 0.0)
        {
            return samples_[k];
        }
        return (1.0 - lambda) * samples_[k] + lambda * samples_[k + 1];
    }

private:
    TimeGrid grid_;
    std::vector<Vector> samples_;
};

/// Free-function spelling of Trajectory::interpolate.
inline Vector interpolate(const Trajectory& traj, double t) { return traj.interpolate(t); }

/// max_k ||a_k - b_k||_X.
inline double sup_distance(const HilbertSpace& space, const Trajectory& a, const Trajectory& b)
{
    detail::require(a.size() == b.size(), "sup_distance: trajectories on different grids");
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
    {
        d = std::max(d, space.norm(a[k] - b[k]));
    }
    return d;
}

/// max_k max_i |a_k(i) - b_k(i)|, for comparisons without a metric.
inline double sup_abs_distance(const Trajectory& a, const Trajectory& b)
{
    detail::require(a.size() == b.size(), "sup_abs_distance: trajectories on different grids");
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
    {
        d = std::max(d, (a[k] - b[k]).cwiseAbs().maxCoeff());
    }
    return d;
}

/// Composite trapezoid weights on nodes 0..k of a uniform grid with step dt.
inline double trapezoid_weight(std::size_t j, std::size_t k, double dt)
{
    if (k == 0)
    {
        return 0.0;
    }
    return (j == 0 || j == k) ? 0.5 * dt : dt;
}

} // namespace hdsweep
