#pragma once

#include "hdsweep/inclusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace hdsweep
{

/// Box grid for the brute-force references. Deterministic, dim <= 3.
struct GridSearchConfig
{
    Vector center;            ///< empty means the origin
    double radius{2.0};       ///< half-width of the box in every coordinate
    std::size_t points{161};  ///< grid points per dimension (odd keeps 0 on the grid)
    std::size_t max_dim{3};
    std::size_t max_total{10000000};
    std::size_t max_fixed_point{60}; ///< brute_inclusion per-node iterations
    double local_radius{0.1};        ///< brute_inclusion re-search box around the current iterate
    double fixed_point_tol{1e-9};

    void validate(Index dim) const
    {
        if (dim < 1 || static_cast<std::size_t>(dim) > std::min<std::size_t>(max_dim, 3))
        {
            throw ContractViolation("oracle: dimension " + std::to_string(dim) + " exceeds the cap of "
                                    + std::to_string(std::min<std::size_t>(max_dim, 3)));
        }
        detail::require(points >= 3 && radius > 0.0, "oracle: need at least 3 points and a positive radius");
        detail::require(center.size() == 0 || center.size() == dim, "oracle: center has the wrong dimension");
        double total = 1.0;
        for (Index i = 0; i < dim; ++i)
        {
            total *= static_cast<double>(points);
        }
        if (total > static_cast<double>(max_total))
        {
            throw ContractViolation("oracle: grid of " + std::to_string(total) + " points exceeds the cap");
        }
    }
};

struct BruteResult
{
    Vector u;
    double violation{0.0};   ///< normalized VI violation of u (0 at an exact solution)
    double resolution{0.0};  ///< grid spacing of the refined stage
    bool inconclusive{false}; ///< best coarse point sat on the box boundary
};

namespace detail
{
// Coordinatewise clipping into K. Lands in K for every cone kind; not a metric projection.
inline Vector clip_into(const ConstraintCone& k, Vector v)
{
    for (Index i : k.coords())
    {
        switch (k.kind())
        {
        case ConstraintCone::Kind::WholeSpace: break;
        case ConstraintCone::Kind::NonpositiveCoords: v(i) = std::min(0.0, v(i)); break;
        case ConstraintCone::Kind::NonnegativeCoords: v(i) = std::max(0.0, v(i)); break;
        case ConstraintCone::Kind::ZeroCoords: v(i) = 0.0; break;
        }
    }
    return v;
}

// max over test points v in K of -[(Au - f, v - u) + j(v) - j(u)] / ||v - u||.
inline double normalized_violation(const EviProblem& p, const Vector& u, const std::vector<Vector>& dirs,
                                   const std::vector<double>& radii)
{
    const HilbertSpace& x = p.space();
    const Vector g = p.A(u) - p.f;
    const double ju = p.j.eval(p.eta, u);
    double worst = 0.0;
    auto test = [&](const Vector& v) {
        const double d = x.norm(v - u);
        if (d > 0.0)
        {
            worst = std::max(worst, -(x.inner(g, v - u) + p.j.eval(p.eta, v) - ju) / d);
        }
    };
    test(Vector::Zero(u.size()));
    test(2.0 * u);
    for (const auto& d : dirs)
    {
        for (double r : radii)
        {
            test(clip_into(p.cone, u + r * d));
        }
    }
    return worst;
}

inline std::vector<Vector> oracle_directions(const HilbertSpace& x)
{
    const Index n = x.dim();
    std::vector<Vector> out;
    auto add = [&](Vector d) { out.push_back(d / x.norm(d)); };
    for (Index i = 0; i < n; ++i)
    {
        for (double s : {1.0, -1.0})
        {
            Vector d = Vector::Zero(n);
            d(i) = s;
            add(d);
            for (Index j = i + 1; j < n; ++j)
            {
                for (double t : {1.0, -1.0})
                {
                    Vector e = d;
                    e(j) = t;
                    add(e);
                }
            }
        }
    }
    return out;
}

// Best grid point of the box [c - r, c + r]^n that lies in K.
inline std::pair<Vector, double> grid_stage(const EviProblem& p, const Vector& c, double r, std::size_t points,
                                            const std::vector<Vector>& dirs, const std::vector<double>& radii,
                                            bool& on_boundary)
{
    const Index n = c.size();
    std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
    Vector best;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> best_idx;
    const double step = 2.0 * r / static_cast<double>(points - 1);
    while (true)
    {
        Vector u(n);
        for (Index i = 0; i < n; ++i)
        {
            const auto k = idx[static_cast<std::size_t>(i)];
            u(i) = k == (points - 1) / 2 && points % 2 == 1 ? c(i) : c(i) - r + step * static_cast<double>(k);
        }
        if (p.cone.contains(u, 0.0))
        {
            const double val = normalized_violation(p, u, dirs, radii);
            if (val < best_val)
            {
                best_val = val;
                best = u;
                best_idx = idx;
            }
        }
        Index i = 0;
        while (i < n && ++idx[static_cast<std::size_t>(i)] == points)
        {
            idx[static_cast<std::size_t>(i)] = 0;
            ++i;
        }
        if (i == n)
        {
            break;
        }
    }
    if (best.size() == 0)
    {
        throw ContractViolation("oracle: the search box does not meet the cone K");
    }
    on_boundary = std::any_of(best_idx.begin(), best_idx.end(), [&](std::size_t k) { return k == 0 || k == points - 1; });
    return {best, best_val};
}
} // namespace detail

/// Reference EVI solution by grid search of the normalized VI violation, refined once
/// on a box of two coarse cells around the coarse optimum.
inline BruteResult brute_vi(const EviProblem& p, const GridSearchConfig& cfg = {})
{
    const Index n = p.cone.dim();
    cfg.validate(n);
    const Vector c = cfg.center.size() ? cfg.center : Vector(Vector::Zero(n));
    const auto dirs = detail::oracle_directions(p.space());
    const double coarse = 2.0 * cfg.radius / static_cast<double>(cfg.points - 1);
    const double fine = 4.0 * coarse / static_cast<double>(cfg.points - 1);
    const std::vector<double> radii{fine, coarse, 0.1 * cfg.radius, cfg.radius};
    BruteResult out;
    bool boundary = false;
    auto [u0, v0] = detail::grid_stage(p, c, cfg.radius, cfg.points, dirs, radii, boundary);
    out.inconclusive = boundary;
    bool ignored = false;
    auto [u1, v1] = detail::grid_stage(p, u0, 2.0 * coarse, cfg.points, dirs, radii, ignored);
    out.u = v1 <= v0 ? u1 : u0;
    out.violation = std::min(v0, v1);
    out.resolution = fine;
    return out;
}

struct BruteInclusionResult
{
    Trajectory u;
    std::vector<std::size_t> fixed_point_iterations;
    bool inconclusive{false};
};

/// Per-node fixed point theta -> (R u, S u) with every node problem solved by brute_vi.
/// Small instances only (dim <= 2 and N <= 16 recommended).
inline BruteInclusionResult brute_inclusion(const InclusionSpec& spec, const GridSearchConfig& cfg = {})
{
    spec.validate();
    const TimeGrid& g = spec.grid();
    const Index n = spec.X->dim();
    std::vector<Vector> u(g.size(), Vector::Zero(n));
    BruteInclusionResult out{Trajectory(g, u), std::vector<std::size_t>(g.size(), 0), false};
    for (std::size_t k = 0; k < g.size(); ++k)
    {
        if (k > 0)
        {
            u[k] = u[k - 1];
        }
        for (std::size_t it = 1; it <= cfg.max_fixed_point; ++it)
        {
            const Trajectory work(g, u);
            const Vector eta = spec.R.at(work, k);
            const Vector xi = spec.S.at(work, k);
            const EviProblem node{spec.cone, spec.A, spec.j, eta, spec.f[k] - xi};
            BruteResult r;
            if (it > 1)
            {
                GridSearchConfig local = cfg;
                local.center = u[k];
                local.radius = cfg.local_radius;
                r = brute_vi(node, local);
            }
            if (it == 1 || r.inconclusive)
            {
                r = brute_vi(node, cfg);
            }
            out.inconclusive = out.inconclusive || r.inconclusive;
            const double change = spec.X->norm(r.u - u[k]);
            u[k] = r.u;
            out.fixed_point_iterations[k] = it;
            if (change <= cfg.fixed_point_tol)
            {
                break;
            }
        }
    }
    out.u = Trajectory(g, std::move(u));
    return out;
}

/// max over interior nodes of |(u_{k+1} - u_{k-1}) / (2 dt) - v_k|_inf.
inline double fd_derivative_check(const Trajectory& u, const Trajectory& v)
{
    detail::require(u.grid() == v.grid() && u.dim() == v.dim(), "fd_derivative_check: trajectories must share grid and dimension");
    const double dt2 = 2.0 * u.grid().dt();
    double worst = 0.0;
    for (std::size_t k = 1; k + 1 < u.size(); ++k)
    {
        worst = std::max(worst, ((u[k + 1] - u[k - 1]) / dt2 - v[k]).cwiseAbs().maxCoeff());
    }
    return worst;
}

} // namespace hdsweep
