#pragma once

#include "hdsweep/evi.hpp"
#include "hdsweep/history.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace hdsweep
{

/// -u(t) in N_{C(Ru(t),t)}(Au(t) + Su(t)) on a grid, C(eta,t) = f(t) - dJ(eta,0).
struct InclusionSpec
{
    SpacePtr X;
    SpacePtr Y;
    ConstraintCone cone;
    MonotoneOperator A;
    HomogeneousFunctional j;
    HistoryOperator R; ///< X-trajectories -> Y-trajectories
    HistoryOperator S; ///< X-trajectories -> X-trajectories
    Trajectory f;
    std::optional<double> alpha_j; ///< overrides the coupling constant computed from j
    std::string label{"inclusion"};

    [[nodiscard]] const TimeGrid& grid() const { return f.grid(); }
    [[nodiscard]] double coupling() const { return alpha_j ? *alpha_j : j.coupling_constant(*X, *Y); }

    void validate() const
    {
        detail::require(X && Y, "InclusionSpec: null space");
        const Index n = X->dim();
        detail::require(cone.dim() == n, "InclusionSpec: cone lives in a different space");
        detail::require(f.dim() == n, "InclusionSpec: load trajectory has the wrong dimension");
        detail::require(R.in_dim() == n && R.out_dim() == Y->dim(), "InclusionSpec: R must map X into Y");
        detail::require(S.in_dim() == n && S.out_dim() == n, "InclusionSpec: S must map X into X");
        const Index pd = j.parameter_dim();
        detail::require(pd == 0 || pd == Y->dim(), "InclusionSpec: functional parameter does not live in Y");
    }
};

/// (alpha_j + 1)(l_R + l_S) < m_A.
struct SmallnessReport
{
    double alpha_j{0.0};
    double l_R{0.0};
    double l_S{0.0};
    double m_A{0.0};
    double lhs{0.0};
    bool pass{false};
    std::vector<std::string> warnings;
};

inline SmallnessReport smallness(double alpha_j, double l_r, double l_s, double m_a)
{
    SmallnessReport r;
    r.alpha_j = alpha_j;
    r.l_R = l_r;
    r.l_S = l_s;
    r.m_A = m_a;
    r.lhs = (alpha_j + 1.0) * (l_r + l_s);
    r.pass = r.lhs < m_a;
    return r;
}

/// Gate on declared constants. Estimated constants, when requested, can only add warnings.
inline SmallnessReport check_smallness(const InclusionSpec& spec, bool estimate = false, std::uint64_t seed = 7)
{
    SmallnessReport r = smallness(spec.coupling(), spec.R.declared_l(), spec.S.declared_l(), spec.A.m);
    if (estimate)
    {
        const auto er = estimate_constants(spec.R, *spec.X, *spec.Y, spec.grid(), 64, seed);
        const auto es = estimate_constants(spec.S, *spec.X, *spec.X, spec.grid(), 64, seed + 1);
        if (er.l_est > spec.R.declared_l() + 0.05)
        {
            r.warnings.push_back("estimated l_R = " + std::to_string(er.l_est) + " exceeds the declared "
                                 + std::to_string(spec.R.declared_l()));
        }
        if (es.l_est > spec.S.declared_l() + 0.05)
        {
            r.warnings.push_back("estimated l_S = " + std::to_string(es.l_est) + " exceeds the declared "
                                 + std::to_string(spec.S.declared_l()));
        }
        if (!smallness(r.alpha_j, er.l_est, es.l_est, r.m_A).pass && r.pass)
        {
            r.warnings.push_back("smallness fails with estimated constants");
        }
    }
    return r;
}

enum class SolveMode
{
    GlobalPicard,
    TimeMarching,
};

inline const char* mode_name(SolveMode m) { return m == SolveMode::GlobalPicard ? "global_picard" : "time_marching"; }

struct InclusionOptions
{
    double tol{1e-8};
    SolveMode mode{SolveMode::TimeMarching};
    std::size_t max_outer{500};       ///< Picard sweeps, or inner iterations per node
    std::size_t max_evi_iter{200000};
    std::optional<double> inner_tol;  ///< EVI tolerance, default tol * 1e-2
    double relaxation{1.0};           ///< theta <- (1 - w) theta + w Lambda theta
    bool force{false};
    std::size_t threads{1};
    std::size_t residual_budget{256};
    std::size_t verify_stride{0};     ///< run the membership check every k nodes (0: never)
    std::uint64_t seed{0x5eed};
};

struct NodeCheck
{
    std::size_t node;
    Lemma31Check check;
};

struct InclusionSolution
{
    Trajectory u;
    Trajectory eta;
    Trajectory xi;
    std::vector<std::size_t> per_step_iterations;
    std::vector<double> per_step_residuals;
    std::size_t sweeps{0};
    double last_change{0.0};
    SmallnessReport smallness;
    std::vector<NodeCheck> membership;
    bool forced{false};
};

namespace detail
{
inline EviSolver make_node_solver(const InclusionSpec& spec, const InclusionOptions& opts)
{
    EviOptions eo;
    eo.tol = opts.inner_tol ? *opts.inner_tol : opts.tol * 1e-2;
    eo.max_iter = opts.max_evi_iter;
    eo.force = opts.force;
    return {spec.cone, spec.A, spec.j, eo};
}

template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn)
{
    if (threads <= 1 || n < 2)
    {
        for (std::size_t k = 0; k < n; ++k)
        {
            fn(k);
        }
        return;
    }
    const std::size_t t = std::min(threads, n);
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(t);
    for (std::size_t w = 0; w < t; ++w)
    {
        pool.emplace_back([&, w] {
            try
            {
                for (std::size_t k = w; k < n; k += t)
                {
                    fn(k);
                }
            }
            catch (...)
            {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool)
    {
        th.join();
    }
    for (auto& e : errors)
    {
        if (e)
        {
            std::rethrow_exception(e);
        }
    }
}

inline Vector solve_node(const EviSolver& solver, const Vector& eta, const Vector& f, const Vector& xi,
                         const std::optional<Vector>& start, std::size_t node, std::size_t* iterations = nullptr)
{
    try
    {
        auto sol = solver.solve(eta, f - xi, start);
        if (iterations)
        {
            *iterations += sol.iterations;
        }
        return std::move(sol.u);
    }
    catch (const NonConvergence& e)
    {
        throw NonConvergence(std::string(e.what()) + " at node " + std::to_string(node), e.last_iterate(),
                             e.residual(), node);
    }
}
} // namespace detail

/// u_theta: the node-wise EVI solutions for a given theta = (eta, xi).
inline Trajectory solve_intermediate(const Trajectory& eta, const Trajectory& xi, const InclusionSpec& spec,
                                     const InclusionOptions& opts = {})
{
    spec.validate();
    detail::require(eta.size() == spec.f.size() && xi.size() == spec.f.size(),
                    "solve_intermediate: theta lives on a different grid");
    const EviSolver solver = detail::make_node_solver(spec, opts);
    std::vector<Vector> u(spec.f.size());
    detail::parallel_for(u.size(), opts.threads,
                         [&](std::size_t k) { u[k] = detail::solve_node(solver, eta[k], spec.f[k], xi[k], {}, k); });
    return {spec.grid(), std::move(u)};
}

/// max_k ||u1 - u2|| - (alpha_j ||eta1 - eta2|| + ||xi1 - xi2||) / m_A.
inline double check_lemma32_estimate(const InclusionSpec& spec, const Trajectory& eta1, const Trajectory& xi1,
                                     const Trajectory& eta2, const Trajectory& xi2, const InclusionOptions& opts = {})
{
    const Trajectory u1 = solve_intermediate(eta1, xi1, spec, opts);
    const Trajectory u2 = solve_intermediate(eta2, xi2, spec, opts);
    const double alpha = spec.coupling();
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < u1.size(); ++k)
    {
        const double lhs = spec.X->norm(u1[k] - u2[k]);
        const double rhs = (alpha * spec.Y->norm(eta1[k] - eta2[k]) + spec.X->norm(xi1[k] - xi2[k])) / spec.A.m;
        worst = std::max(worst, lhs - rhs);
    }
    return worst;
}

namespace detail
{
inline void finish_solution(const InclusionSpec& spec, const InclusionOptions& opts, InclusionSolution& sol)
{
    const DirectionSampler sampler(std::max<std::size_t>(1, opts.residual_budget), opts.seed);
    sol.per_step_residuals.resize(sol.u.size());
    for (std::size_t k = 0; k < sol.u.size(); ++k)
    {
        const EviProblem p{spec.cone, spec.A, spec.j, sol.eta[k], spec.f[k] - sol.xi[k]};
        sol.per_step_residuals[k] = std::max(0.0, vi_residual(sol.u[k], p, sampler.budget(), opts.seed));
        if (opts.verify_stride > 0 && (k % opts.verify_stride == 0 || k + 1 == sol.u.size()))
        {
            const Vector z = spec.A(sol.u[k]) + sol.xi[k];
            sol.membership.push_back(
                {k, lemma31_report(sol.u[k], z, sol.eta[k], spec.f[k], spec.cone, spec.j, sampler, 1e-6)});
        }
    }
}

inline InclusionSolution solve_global(const InclusionSpec& spec, const InclusionOptions& opts)
{
    const EviSolver solver = make_node_solver(spec, opts);
    const std::size_t n = spec.f.size();
    const Index dx = spec.X->dim();
    InclusionSolution sol{Trajectory::zeros(spec.grid(), dx), spec.R.apply(Trajectory::zeros(spec.grid(), dx)),
                          spec.S.apply(Trajectory::zeros(spec.grid(), dx)), std::vector<std::size_t>(n, 0),
                          {}, 0, 0.0, {}, {}, false};
    std::vector<Vector> u(n, Vector::Zero(dx));
    std::vector<std::size_t> iters(n, 0);
    for (std::size_t sweep = 1; sweep <= opts.max_outer; ++sweep)
    {
        parallel_for(n, opts.threads, [&](std::size_t k) {
            u[k] = solve_node(solver, sol.eta[k], spec.f[k], sol.xi[k], u[k], k, &iters[k]);
        });
        const Trajectory ut(spec.grid(), u);
        Trajectory eta = spec.R.apply(ut);
        Trajectory xi = spec.S.apply(ut);
        double change = 0.0;
        for (std::size_t k = 0; k < n; ++k)
        {
            if (opts.relaxation != 1.0)
            {
                eta[k] = (1.0 - opts.relaxation) * sol.eta[k] + opts.relaxation * eta[k];
                xi[k] = (1.0 - opts.relaxation) * sol.xi[k] + opts.relaxation * xi[k];
            }
            change = std::max(change, product_norm(*spec.Y, eta[k] - sol.eta[k], *spec.X, xi[k] - sol.xi[k]));
        }
        sol.eta = std::move(eta);
        sol.xi = std::move(xi);
        sol.sweeps = sweep;
        sol.last_change = change;
        if (change <= opts.tol)
        {
            parallel_for(n, opts.threads, [&](std::size_t k) {
                u[k] = solve_node(solver, sol.eta[k], spec.f[k], sol.xi[k], u[k], k, &iters[k]);
            });
            sol.u = Trajectory(spec.grid(), u);
            // report theta = Lambda-image of the returned u
            sol.eta = spec.R.apply(sol.u);
            sol.xi = spec.S.apply(sol.u);
            sol.per_step_iterations = iters;
            return sol;
        }
    }
    throw NonConvergence("solve_inclusion: global Picard iteration did not converge in "
                             + std::to_string(opts.max_outer) + " sweeps (last change "
                             + std::to_string(sol.last_change) + ")",
                         u.back(), sol.last_change);
}

inline InclusionSolution solve_marching(const InclusionSpec& spec, const InclusionOptions& opts)
{
    const EviSolver solver = make_node_solver(spec, opts);
    const std::size_t n = spec.f.size();
    const Index dx = spec.X->dim();
    Trajectory u = Trajectory::zeros(spec.grid(), dx);
    std::vector<Vector> eta(n), xi(n);
    std::vector<std::size_t> iters(n, 0);
    std::size_t max_inner = 0;
    double last_change = 0.0;
    for (std::size_t k = 0; k < n; ++k)
    {
        if (k > 0)
        {
            u[k] = u[k - 1];
        }
        Vector e = spec.R.at(u, k);
        Vector x = spec.S.at(u, k);
        bool converged = false;
        double change = 0.0;
        for (std::size_t it = 1; it <= opts.max_outer; ++it)
        {
            u[k] = solve_node(solver, e, spec.f[k], x, u[k], k);
            Vector e2 = spec.R.at(u, k);
            Vector x2 = spec.S.at(u, k);
            if (opts.relaxation != 1.0)
            {
                e2 = (1.0 - opts.relaxation) * e + opts.relaxation * e2;
                x2 = (1.0 - opts.relaxation) * x + opts.relaxation * x2;
            }
            change = product_norm(*spec.Y, e2 - e, *spec.X, x2 - x);
            e = std::move(e2);
            x = std::move(x2);
            iters[k] = it;
            if (change <= opts.tol)
            {
                converged = true;
                break;
            }
        }
        if (!converged)
        {
            throw NonConvergence("solve_inclusion: inner fixed point did not converge at node " + std::to_string(k)
                                     + " (last change " + std::to_string(change) + ")",
                                 u[k], change, k);
        }
        u[k] = solve_node(solver, e, spec.f[k], x, u[k], k);
        // report theta = Lambda-image of the returned u
        eta[k] = spec.R.at(u, k);
        xi[k] = spec.S.at(u, k);
        max_inner = std::max(max_inner, iters[k]);
        last_change = std::max(last_change, change);
    }
    InclusionSolution sol{std::move(u), Trajectory(spec.grid(), std::move(eta)), Trajectory(spec.grid(), std::move(xi)),
                          std::move(iters), {}, max_inner, last_change, {}, {}, false};
    return sol;
}
} // namespace detail

/// Solves the inclusion through the fixed point of theta -> (R u_theta, S u_theta).
inline InclusionSolution solve_inclusion(const InclusionSpec& spec, const InclusionOptions& opts = {})
{
    spec.validate();
    detail::require(opts.tol > 0.0, "solve_inclusion: tol must be positive");
    detail::require(opts.relaxation > 0.0 && opts.relaxation <= 1.0, "solve_inclusion: relaxation must be in (0, 1]");
    const SmallnessReport report = check_smallness(spec);
    if (!report.pass && !opts.force)
    {
        throw GateFailure("smallness condition fails for '" + spec.label + "': (alpha_j + 1)(l_R + l_S) = "
                          + std::to_string(report.lhs) + " >= m_A = " + std::to_string(report.m_A));
    }
    InclusionSolution sol =
        opts.mode == SolveMode::GlobalPicard ? detail::solve_global(spec, opts) : detail::solve_marching(spec, opts);
    sol.smallness = report;
    sol.forced = !report.pass;
    detail::finish_solution(spec, opts, sol);
    return sol;
}

// --- corollary specialisations -----------------------------------------------

enum class CorollaryVariant
{
    Cor31HdHd,      ///< R and S history-dependent
    Cor32RIdentity, ///< R = identity, Y = X, gate alpha_j + 1 < m_A
    Cor33EtaFree,   ///< j independent of its parameter
};

inline const char* variant_name(CorollaryVariant v)
{
    switch (v)
    {
    case CorollaryVariant::Cor31HdHd: return "cor31_hd_hd";
    case CorollaryVariant::Cor32RIdentity: return "cor32_R_identity";
    case CorollaryVariant::Cor33EtaFree: return "cor33_eta_free";
    }
    return "?";
}

struct CorollaryPieces
{
    SpacePtr X;
    SpacePtr Y; ///< ignored for cor32 (Y = X)
    ConstraintCone cone;
    MonotoneOperator A;
    HomogeneousFunctional j;
    std::optional<HistoryOperator> R; ///< required for cor31 only
    HistoryOperator S;
    Trajectory f;
    Vector eta0; ///< frozen parameter for cor33 (may be empty when j ignores it)
    std::optional<double> alpha_j;
};

inline InclusionSpec build_corollary_spec(CorollaryVariant variant, const CorollaryPieces& p)
{
    const std::string name = variant_name(variant);
    if (p.S.declared_l() != 0.0)
    {
        throw IneligibleOperator(name + ": S must be history-dependent (declared l_S = "
                                 + std::to_string(p.S.declared_l()) + ")");
    }
    const Index n = p.X->dim();
    switch (variant)
    {
    case CorollaryVariant::Cor31HdHd:
    {
        if (!p.R || p.R->declared_l() != 0.0)
        {
            throw IneligibleOperator(name + ": R must be a history-dependent operator");
        }
        InclusionSpec s{p.X, p.Y, p.cone, p.A, p.j, *p.R, p.S, p.f, p.alpha_j, name};
        s.validate();
        return s;
    }
    case CorollaryVariant::Cor32RIdentity:
    {
        InclusionSpec s{p.X, p.X, p.cone, p.A, p.j, HistoryOperator::identity(n), p.S, p.f, p.alpha_j, name};
        s.validate();
        const double alpha = s.coupling();
        if (!(alpha + 1.0 < p.A.m))
        {
            throw IneligibleOperator(name + ": requires alpha_j + 1 < m_A, got " + std::to_string(alpha + 1.0)
                                     + " >= " + std::to_string(p.A.m));
        }
        return s;
    }
    case CorollaryVariant::Cor33EtaFree:
    {
        Vector eta0 = p.eta0;
        if (eta0.size() == 0)
        {
            eta0 = Vector::Ones(std::max<Index>(1, p.j.parameter_dim()));
        }
        auto y = euclidean_space(1);
        InclusionSpec s{p.X, y, p.cone, p.A, p.j.with_parameter(eta0), HistoryOperator::zero(n, 1), p.S, p.f, 0.0,
                        name};
        s.validate();
        return s;
    }
    }
    throw ContractViolation("build_corollary_spec: unknown variant");
}

} // namespace hdsweep
