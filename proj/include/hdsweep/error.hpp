#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace hdsweep
{

/// Base class of every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// A precondition of an operation was violated (dimension mismatch, bad range, ...).
class ContractViolation : public Error
{
public:
    using Error::Error;
};

/// The requested combination of metric, cone and functional has no exact proximal map.
class UnsupportedConfiguration : public Error
{
public:
    using Error::Error;
};

/// An operator or problem does not satisfy the structural requirement of a solver
/// (for instance a fixed-point map whose pointwise constant is not below one).
class IneligibleOperator : public Error
{
public:
    using Error::Error;
};

/// The smallness condition or another assumption gate failed and `force` was not set.
class GateFailure : public Error
{
public:
    using Error::Error;
};

/// An iterative solver ran out of iterations. Carries the last iterate.
class NonConvergence : public Error
{
public:
    NonConvergence(const std::string& what, Eigen::VectorXd last, double residual,
                   std::size_t node = npos)
        : Error(what), last_(std::move(last)), residual_(residual), node_(node)
    {
    }

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    [[nodiscard]] const Eigen::VectorXd& last_iterate() const noexcept { return last_; }
    [[nodiscard]] double residual() const noexcept { return residual_; }
    /// Time node at which the failure happened, or npos.
    [[nodiscard]] std::size_t node() const noexcept { return node_; }

private:
    Eigen::VectorXd last_;
    double residual_;
    std::size_t node_;
};

/// Malformed or inconsistent run configuration.
class ConfigError : public Error
{
public:
    using Error::Error;
};

namespace detail
{
inline void require(bool cond, const std::string& msg)
{
    if (!cond)
    {
        throw ContractViolation(msg);
    }
}
} // namespace detail

} // namespace hdsweep
