#pragma once

#include "hdsweep/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace hdsweep
{

/// Continuous kernel t -> B(t) on [0, T]. Either a general matrix-valued map or the
/// separable form beta(t) * base, which applies in O(dim) per quadrature node.
class VolterraKernel
{
public:
    using MatrixMap = std::function<Matrix(double)>;
    using ScalarMap = std::function<double(double)>;

    static VolterraKernel general(Index rows, Index cols, MatrixMap fn)
    {
        VolterraKernel k;
        k.rows_ = rows;
        k.cols_ = cols;
        k.general_ = std::move(fn);
        return k;
    }

    static VolterraKernel separable(ScalarMap beta, Matrix base)
    {
        VolterraKernel k;
        k.rows_ = base.rows();
        k.cols_ = base.cols();
        k.beta_ = std::move(beta);
        k.base_ = std::move(base);
        return k;
    }

    /// beta(t) * I_dim.
    static VolterraKernel scalar(ScalarMap beta, Index dim) { return separable(std::move(beta), Matrix::Identity(dim, dim)); }

    [[nodiscard]] Index rows() const noexcept { return rows_; }
    [[nodiscard]] Index cols() const noexcept { return cols_; }
    [[nodiscard]] bool is_separable() const noexcept { return static_cast<bool>(beta_); }

    [[nodiscard]] Matrix operator()(double t) const { return is_separable() ? Matrix(beta_(t) * base_) : general_(t); }
    [[nodiscard]] double beta(double t) const { return beta_(t); }
    [[nodiscard]] const Matrix& base() const noexcept { return base_; }

    /// max over grid nodes of the spectral norm of B(t).
    [[nodiscard]] double max_norm(const TimeGrid& grid) const
    {
        double m = 0.0;
        const double base_norm = is_separable() ? spectral_norm(base_) : 0.0;
        for (std::size_t k = 0; k < grid.size(); ++k)
        {
            const double t = grid.node(k);
            m = std::max(m, is_separable() ? std::abs(beta_(t)) * base_norm : spectral_norm(general_(t)));
        }
        return m;
    }

    static double spectral_norm(const Matrix& a)
    {
        if (a.size() == 0)
        {
            return 0.0;
        }
        Eigen::JacobiSVD<Matrix> svd(a);
        return svd.singularValues()(0);
    }

private:
    Index rows_{0};
    Index cols_{0};
    MatrixMap general_;
    ScalarMap beta_;
    Matrix base_;
};

/// Causal map on trajectories: the output at node k is computed from samples 0..k.
/// Carries the declared constants (l, L) of the bound
///   ||S u1(t) - S u2(t)|| <= l ||u1(t) - u2(t)|| + L int_0^t ||u1 - u2|| ds.
/// l = 0 is the history-dependent case.
class HistoryOperator
{
public:
    using NodeMap = std::function<Vector(const Trajectory&, std::size_t)>;

    HistoryOperator(std::string kind, Index in_dim, Index out_dim, NodeMap at, double declared_l, double declared_L)
        : kind_(std::move(kind)), in_dim_(in_dim), out_dim_(out_dim), at_(std::move(at)), l_(declared_l),
          big_l_(declared_L)
    {
        detail::require(declared_l >= 0.0 && declared_L >= 0.0, "HistoryOperator: constants must be nonnegative");
    }

    [[nodiscard]] const std::string& kind() const noexcept { return kind_; }
    [[nodiscard]] Index in_dim() const noexcept { return in_dim_; }
    [[nodiscard]] Index out_dim() const noexcept { return out_dim_; }
    [[nodiscard]] double declared_l() const noexcept { return l_; }
    [[nodiscard]] double declared_L() const noexcept { return big_l_; }
    [[nodiscard]] bool history_dependent() const noexcept { return l_ == 0.0; }

    /// Output at node k; only samples 0..k of u are read.
    [[nodiscard]] Vector at(const Trajectory& u, std::size_t k) const
    {
        detail::require(u.dim() == in_dim_, kind_ + ": input dimension mismatch");
        return at_(u, k);
    }

    [[nodiscard]] Trajectory apply(const Trajectory& u) const
    {
        std::vector<Vector> out;
        out.reserve(u.size());
        for (std::size_t k = 0; k < u.size(); ++k)
        {
            out.push_back(at(u, k));
        }
        return {u.grid(), std::move(out)};
    }

    [[nodiscard]] HistoryOperator with_constants(double l, double big_l) const
    {
        return {kind_, in_dim_, out_dim_, at_, l, big_l};
    }

    // --- factories ---------------------------------------------------------

    static HistoryOperator zero(Index in_dim, Index out_dim)
    {
        return {"zero", in_dim, out_dim, [out_dim](const Trajectory&, std::size_t) { return Vector(Vector::Zero(out_dim)); },
                0.0, 0.0};
    }

    static HistoryOperator identity(Index dim)
    {
        return {"identity", dim, dim, [](const Trajectory& u, std::size_t k) { return u[k]; }, 1.0, 0.0};
    }

    /// u -> c (a constant value, independent of u).
    static HistoryOperator constant(Index in_dim, Vector value)
    {
        const Index out = value.size();
        return {"constant", in_dim, out,
                [v = std::move(value)](const Trajectory&, std::size_t) { return v; }, 0.0, 0.0};
    }

    /// u -> (t -> c(t)).
    static HistoryOperator given(Index in_dim, Trajectory values)
    {
        const Index out = values.dim();
        return {"given", in_dim, out,
                [v = std::move(values)](const Trajectory&, std::size_t k) { return v[k]; }, 0.0, 0.0};
    }

    /// (S u)(t) = int_0^t B(t - s) u(s) ds by the composite trapezoid rule.
    static HistoryOperator volterra(VolterraKernel kernel, std::optional<TimeGrid> grid = std::nullopt);

    /// (R u)(t) = e^t u(t) + int_0^t s u(s) ds, with l = max e^t and L = max t on [0, T].
    static HistoryOperator example31(Index dim, double horizon = 1.0)
    {
        return {"example31", dim, dim,
                [](const Trajectory& u, std::size_t k) {
                    const TimeGrid& g = u.grid();
                    Vector out = std::exp(g.node(k)) * u[k];
                    for (std::size_t j = 0; j <= k; ++j)
                    {
                        out += trapezoid_weight(j, k, g.dt()) * g.node(j) * u[j];
                    }
                    return out;
                },
                std::exp(horizon), horizon};
    }

    /// u -> a u(t) + b int_0^t u ds.
    static HistoryOperator pointwise_memory(Index dim, double pointwise, double memory)
    {
        return {"pointwise_memory", dim, dim,
                [pointwise, memory](const Trajectory& u, std::size_t k) {
                    Vector out = pointwise * u[k];
                    if (memory != 0.0)
                    {
                        for (std::size_t j = 0; j <= k; ++j)
                        {
                            out += memory * trapezoid_weight(j, k, u.grid().dt()) * u[j];
                        }
                    }
                    return out;
                },
                std::abs(pointwise), std::abs(memory)};
    }

    /// u -> g(u(t)) pointwise, with g Lipschitz of constant `lip` (declared l).
    static HistoryOperator pointwise(Index in_dim, Index out_dim, std::function<Vector(const Vector&)> g, double lip)
    {
        return {"pointwise", in_dim, out_dim,
                [g = std::move(g)](const Trajectory& u, std::size_t k) { return g(u[k]); }, lip, 0.0};
    }

    /// Sum of two operators with the same input and output dimensions.
    static HistoryOperator sum(const HistoryOperator& a, const HistoryOperator& b)
    {
        detail::require(a.in_dim() == b.in_dim() && a.out_dim() == b.out_dim(), "HistoryOperator::sum: shape mismatch");
        return {a.kind() + "+" + b.kind(), a.in_dim(), a.out_dim(),
                [a, b](const Trajectory& u, std::size_t k) { return Vector(a.at(u, k) + b.at(u, k)); },
                a.declared_l() + b.declared_l(), a.declared_L() + b.declared_L()};
    }

private:
    std::string kind_;
    Index in_dim_;
    Index out_dim_;
    NodeMap at_;
    double l_;
    double big_l_;
};

inline HistoryOperator HistoryOperator::volterra(VolterraKernel kernel, std::optional<TimeGrid> grid)
{
    const Index rows = kernel.rows();
    const Index cols = kernel.cols();
    // lag tables B(t_m) for a known grid; other grids evaluate the kernel on the fly
    auto table = std::make_shared<std::vector<Matrix>>();
    auto beta_table = std::make_shared<std::vector<double>>();
    if (grid)
    {
        for (std::size_t m = 0; m < grid->size(); ++m)
        {
            if (kernel.is_separable())
            {
                beta_table->push_back(kernel.beta(grid->node(m)));
            }
            else
            {
                table->push_back(kernel(grid->node(m)));
            }
        }
    }
    const double big_l = grid ? kernel.max_norm(*grid) : 0.0;
    auto fn = [kernel, grid, table, beta_table, rows](const Trajectory& u, std::size_t k) -> Vector {
        const TimeGrid& g = u.grid();
        const bool cached = grid && *grid == g;
        const double dt = g.dt();
        if (k == 0)
        {
            return Vector::Zero(rows);
        }
        if (kernel.is_separable())
        {
            Vector acc = Vector::Zero(u.dim());
            for (std::size_t j = 0; j <= k; ++j)
            {
                const double b = cached ? (*beta_table)[k - j] : kernel.beta(g.node(k) - g.node(j));
                acc += (trapezoid_weight(j, k, dt) * b) * u[j];
            }
            return kernel.base() * acc;
        }
        Vector out = Vector::Zero(rows);
        for (std::size_t j = 0; j <= k; ++j)
        {
            const Matrix b = cached ? (*table)[k - j] : kernel(g.node(k) - g.node(j));
            out += trapezoid_weight(j, k, dt) * (b * u[j]);
        }
        return out;
    };
    return {"volterra", cols, rows, std::move(fn), 0.0, big_l};
}

/// Free-function spelling of HistoryOperator::volterra(...).apply(traj).
inline Trajectory apply_volterra(const VolterraKernel& kernel, const Trajectory& traj)
{
    return HistoryOperator::volterra(kernel).apply(traj);
}

inline Trajectory apply_example31(const Trajectory& traj) { return HistoryOperator::example31(traj.dim()).apply(traj); }

/// u0 + int_0^{t_k} v ds by the cumulative trapezoid recurrence
/// u_j = u_{j-1} + dt/2 (v_{j-1} + v_j), so that every caller gets bitwise the same values.
inline Vector antiderivative_at(const Trajectory& v, const Vector& u0, std::size_t k)
{
    Vector u = u0;
    const double half = 0.5 * v.grid().dt();
    for (std::size_t j = 1; j <= k; ++j)
    {
        u += half * (v[j - 1] + v[j]);
    }
    return u;
}

// --- constant estimation ---------------------------------------------------

struct ConstantEstimate
{
    double l_est{0.0};
    double big_l_est{0.0};
    std::size_t observations{0};
};

/// Envelope fit of (l, L) for an operator from seeded random trajectory pairs.
///
/// Three probe families are used at random nodes k: history probes whose difference
/// vanishes at t_k (these bound L), spike probes supported only at t_k (these bound l
/// once L is known) and generic random pairs. L is finally raised until the bound
/// holds on every observation.
inline ConstantEstimate estimate_constants(const HistoryOperator& op, const HilbertSpace& in_space,
                                           const HilbertSpace& out_space, const TimeGrid& grid,
                                           std::size_t trials = 64, std::uint64_t seed = 7)
{
    detail::require(trials >= 1, "estimate_constants: trials must be at least 1");
    detail::require(in_space.dim() == op.in_dim() && out_space.dim() == op.out_dim(),
                    "estimate_constants: space dimensions do not match the operator");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> node_pick(1, grid.steps());
    const Index n = op.in_dim();

    auto random_vec = [&](double scale) {
        Vector v(n);
        for (Index i = 0; i < n; ++i)
        {
            v(i) = scale * gauss(rng);
        }
        return v;
    };
    auto random_traj = [&](double scale) {
        std::vector<Vector> s;
        for (std::size_t k = 0; k < grid.size(); ++k)
        {
            s.push_back(random_vec(scale));
        }
        return Trajectory(grid, std::move(s));
    };
    auto integral_norm = [&](const Trajectory& a, const Trajectory& b, std::size_t k) {
        double acc = 0.0;
        for (std::size_t j = 0; j <= k; ++j)
        {
            acc += trapezoid_weight(j, k, grid.dt()) * in_space.norm(a[j] - b[j]);
        }
        return acc;
    };

    struct Obs
    {
        double point, hist, out;
    };
    std::vector<Obs> spikes, histories, generic;
    for (std::size_t t = 0; t < trials; ++t)
    {
        const Trajectory base = random_traj(1.0);
        const std::size_t k = node_pick(rng);
        // history probe: differ on nodes < k only
        {
            Trajectory other = base;
            for (std::size_t j = 0; j < k; ++j)
            {
                other[j] += random_vec(0.5);
            }
            histories.push_back({0.0, integral_norm(base, other, k),
                                 out_space.norm(op.at(base, k) - op.at(other, k))});
        }
        // spike probe at node k
        {
            Trajectory other = base;
            other[k] += random_vec(0.5);
            spikes.push_back({in_space.norm(base[k] - other[k]), integral_norm(base, other, k),
                              out_space.norm(op.at(base, k) - op.at(other, k))});
        }
        // generic pair
        {
            const Trajectory other = random_traj(1.0);
            const std::size_t kk = node_pick(rng) - 1;
            generic.push_back({in_space.norm(base[kk] - other[kk]), integral_norm(base, other, kk),
                               out_space.norm(op.at(base, kk) - op.at(other, kk))});
        }
    }

    ConstantEstimate est;
    for (const auto& o : histories)
    {
        if (o.hist > 0.0)
        {
            est.big_l_est = std::max(est.big_l_est, o.out / o.hist);
        }
    }
    for (const auto& o : spikes)
    {
        if (o.point > 0.0)
        {
            est.l_est = std::max(est.l_est, (o.out - est.big_l_est * o.hist) / o.point);
        }
    }
    est.l_est = std::max(0.0, est.l_est);
    for (const auto* family : {&histories, &spikes, &generic})
    {
        for (const auto& o : *family)
        {
            const double excess = o.out - est.l_est * o.point - est.big_l_est * o.hist;
            if (excess > 0.0 && o.hist > 0.0)
            {
                est.big_l_est += excess / o.hist;
            }
        }
    }
    est.observations = histories.size() + spikes.size() + generic.size();
    return est;
}

// --- fixed point -----------------------------------------------------------

struct FixedPointResult
{
    Trajectory trajectory;
    std::size_t sweeps{0};
    double last_change{0.0};
};

/// Picard iteration of whole trajectories, v <- Lambda v, for an operator with
/// declared pointwise constant below one.
inline FixedPointResult picard_fixed_point(const HistoryOperator& op, const HilbertSpace& space, const TimeGrid& grid,
                                           double tol, std::size_t max_sweeps,
                                           std::optional<Trajectory> initial = std::nullopt)
{
    if (!(op.declared_l() < 1.0))
    {
        throw IneligibleOperator("picard_fixed_point: operator '" + op.kind()
                                 + "' is not almost history-dependent (declared l >= 1)");
    }
    detail::require(op.in_dim() == op.out_dim() && op.in_dim() == space.dim(),
                    "picard_fixed_point: operator must map the space to itself");
    detail::require(tol > 0.0, "picard_fixed_point: tol must be positive");
    Trajectory v = initial ? *initial : Trajectory::zeros(grid, space.dim());
    for (std::size_t sweep = 1; sweep <= max_sweeps; ++sweep)
    {
        Trajectory next = op.apply(v);
        const double change = sup_distance(space, next, v);
        v = std::move(next);
        if (change <= tol)
        {
            return {std::move(v), sweep, change};
        }
        if (sweep == max_sweeps)
        {
            throw NonConvergence("picard_fixed_point: sweep budget exhausted", v.samples().back(), change);
        }
    }
    throw NonConvergence("picard_fixed_point: zero sweep budget", v.samples().back(), 0.0);
}

} // namespace hdsweep
