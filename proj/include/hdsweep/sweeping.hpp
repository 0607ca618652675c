#pragma once

#include "hdsweep/inclusion.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace hdsweep
{

/// Lipschitz map X -> X with its declared constant.
struct LipschitzMap
{
    std::function<Vector(const Vector&)> apply;
    double L{0.0};
    std::string name{"B"};

    [[nodiscard]] Vector operator()(const Vector& u) const { return apply(u); }

    static LipschitzMap zero(Index dim)
    {
        return {[dim](const Vector&) { return Vector(Vector::Zero(dim)); }, 0.0, "zero"};
    }
    static LipschitzMap scaled_identity(double b) { return {[b](const Vector& u) { return Vector(b * u); }, std::abs(b), "b*I"}; }
    static LipschitzMap from_matrix(const HilbertSpace& x, const Matrix& b, std::string name = "B")
    {
        Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> lip(b.transpose() * x.metric() * b, x.metric(),
                                                             Eigen::EigenvaluesOnly);
        return {[b](const Vector& u) { return Vector(b * u); }, std::sqrt(std::max(0.0, lip.eigenvalues().maxCoeff())),
                std::move(name)};
    }
};

/// Largest sampled ratio ||Bu - Bv|| / ||u - v||.
inline double audit_lipschitz(const LipschitzMap& b, const HilbertSpace& x, std::size_t samples = 200,
                              std::uint64_t seed = 17)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double worst = 0.0;
    for (std::size_t s = 0; s < samples; ++s)
    {
        Vector u(x.dim()), v(x.dim());
        for (Index i = 0; i < x.dim(); ++i)
        {
            u(i) = gauss(rng);
            v(i) = gauss(rng);
        }
        const double d = x.norm(u - v);
        if (d > 0.0)
        {
            worst = std::max(worst, x.norm(b(u) - b(v)) / d);
        }
    }
    return worst;
}

enum class SweepingVariant
{
    General,        ///< R and S act on the velocity
    Cor41HdHd,      ///< as General, with R and S history-dependent
    Cor42StateSet,  ///< set parameter is the state: R v = int v + u0
    Cor43StateMemory, ///< state-set and S acting on the state: S~ v = B(int v + u0) + S(int v + u0)
};

inline const char* variant_name(SweepingVariant v)
{
    switch (v)
    {
    case SweepingVariant::General: return "general";
    case SweepingVariant::Cor41HdHd: return "cor41_hd_hd";
    case SweepingVariant::Cor42StateSet: return "cor42_state_set";
    case SweepingVariant::Cor43StateMemory: return "cor43_state_memory";
    }
    return "?";
}

/// -u'(t) in N_{C(R u'(t),t)}(A u'(t) + B u(t) + S u'(t)), u(0) = u0.
/// `core` carries X, Y, K, A, j, R, S and f; R is replaced by the state map for the
/// state-set variants, and S is read as acting on the state for Cor43StateMemory.
struct SweepingSpec
{
    InclusionSpec core;
    LipschitzMap B;
    Vector u0;
    SweepingVariant variant{SweepingVariant::General};
};

struct SweepingSolution
{
    Trajectory u;
    Trajectory v;
    InclusionSolution diagnostics;
};

/// Cumulative trapezoid antiderivative; u(0) = u0 bitwise.
inline Trajectory integrate_velocity(const Trajectory& v, const Vector& u0)
{
    detail::require(v.dim() == u0.size(), "integrate_velocity: u0 has the wrong dimension");
    std::vector<Vector> u(v.size());
    u[0] = u0;
    const double half = 0.5 * v.grid().dt();
    for (std::size_t j = 1; j < v.size(); ++j)
    {
        u[j] = u[j - 1];
        u[j] += half * (v[j - 1] + v[j]);
    }
    return {v.grid(), std::move(u)};
}

namespace detail
{
// Trajectory whose samples 0..k are the state u0 + int v; later samples are left at u0.
inline Trajectory state_prefix(const Trajectory& v, const Vector& u0, std::size_t k)
{
    std::vector<Vector> u(v.size(), u0);
    const double half = 0.5 * v.grid().dt();
    for (std::size_t j = 1; j <= k; ++j)
    {
        u[j] = u[j - 1];
        u[j] += half * (v[j - 1] + v[j]);
    }
    return {v.grid(), std::move(u)};
}

inline HistoryOperator state_operator(Index dim, const Vector& u0)
{
    return {"state", dim, dim, [u0](const Trajectory& v, std::size_t k) { return antiderivative_at(v, u0, k); }, 0.0,
            1.0};
}

inline void validate_sweeping(const SweepingSpec& spec)
{
    spec.core.validate();
    const Index n = spec.core.X->dim();
    detail::require(spec.u0.size() == n, "SweepingSpec: u0 has the wrong dimension");
    const std::string name = variant_name(spec.variant);
    if (spec.core.S.declared_l() != 0.0 && spec.variant != SweepingVariant::General)
    {
        throw IneligibleOperator(name + ": S must be history-dependent");
    }
    if (spec.variant == SweepingVariant::Cor41HdHd && spec.core.R.declared_l() != 0.0)
    {
        throw IneligibleOperator(name + ": R must be history-dependent");
    }
    if (spec.variant == SweepingVariant::Cor42StateSet || spec.variant == SweepingVariant::Cor43StateMemory)
    {
        const Index pd = spec.core.j.parameter_dim();
        detail::require(pd == 0 || pd == n, name + ": the functional parameter must live in X");
    }
}
} // namespace detail

/// Velocity inclusion with S~ v = B(int v + u0) + S v, constants (l_S, L_B + L_S).
inline InclusionSpec lift_to_velocity(const SweepingSpec& spec)
{
    detail::validate_sweeping(spec);
    const InclusionSpec& c = spec.core;
    const Index n = c.X->dim();
    InclusionSpec out = c;
    out.label = c.label + "/velocity";

    const bool state_set =
        spec.variant == SweepingVariant::Cor42StateSet || spec.variant == SweepingVariant::Cor43StateMemory;
    if (state_set)
    {
        out.Y = c.X;
        out.R = detail::state_operator(n, spec.u0);
        out.alpha_j = c.alpha_j ? c.alpha_j : std::optional<double>(c.j.coupling_constant(*c.X, *c.X));
    }

    const LipschitzMap b = spec.B;
    const HistoryOperator s = c.S;
    const Vector u0 = spec.u0;
    if (spec.variant == SweepingVariant::Cor43StateMemory)
    {
        const double horizon = c.grid().horizon();
        out.S = HistoryOperator(
            "B(int)+S(int)", n, n,
            [b, s, u0](const Trajectory& v, std::size_t k) {
                const Trajectory u = detail::state_prefix(v, u0, k);
                return Vector(b(u[k]) + s.at(u, k));
            },
            0.0, b.L + s.declared_L() * horizon);
    }
    else
    {
        out.S = HistoryOperator(
            "B(int)+" + s.kind(), n, n,
            [b, s, u0](const Trajectory& v, std::size_t k) { return Vector(b(antiderivative_at(v, u0, k)) + s.at(v, k)); },
            s.declared_l(), b.L + s.declared_L());
    }
    return out;
}

inline SweepingSolution solve_sweeping(const SweepingSpec& spec, const InclusionOptions& opts = {})
{
    detail::validate_sweeping(spec);
    const double measured = audit_lipschitz(spec.B, *spec.core.X);
    if (measured > spec.B.L + 1e-9 * std::max(1.0, spec.B.L) && !opts.force)
    {
        throw GateFailure("assumption (B) fails: sampled Lipschitz ratio " + std::to_string(measured)
                          + " exceeds the declared L_B = " + std::to_string(spec.B.L));
    }
    const InclusionSpec lifted = lift_to_velocity(spec);
    InclusionSolution inc = solve_inclusion(lifted, opts);
    Trajectory v = inc.u;
    Trajectory u = integrate_velocity(v, spec.u0);
    return {std::move(u), std::move(v), std::move(inc)};
}

/// Marches the original statement node by node, with the state as a separate unknown:
/// at node k, iterate v_k with u_k = u_{k-1} + dt/2 (v_{k-1} + v_k). Shares no code
/// with the lift; used as the cross-check of the reduction.
inline SweepingSolution solve_sweeping_direct(const SweepingSpec& spec, const InclusionOptions& opts = {})
{
    detail::validate_sweeping(spec);
    const InclusionSpec& c = spec.core;
    const Index n = c.X->dim();
    const TimeGrid& g = c.grid();
    const double half = 0.5 * g.dt();
    EviOptions eo;
    eo.tol = opts.inner_tol ? *opts.inner_tol : opts.tol * 1e-2;
    eo.max_iter = opts.max_evi_iter;
    eo.force = opts.force;
    const EviSolver solver(c.cone, c.A, c.j, eo);
    const bool state_set =
        spec.variant == SweepingVariant::Cor42StateSet || spec.variant == SweepingVariant::Cor43StateMemory;
    const bool memory_on_state = spec.variant == SweepingVariant::Cor43StateMemory;
    const HilbertSpace& y = state_set ? *c.X : *c.Y;

    Trajectory v = Trajectory::zeros(g, n);
    std::vector<Vector> u(g.size(), spec.u0);
    std::vector<Vector> eta(g.size()), xi(g.size());
    std::vector<std::size_t> iters(g.size(), 0);
    auto theta = [&](std::size_t k) {
        const Trajectory ut(g, u);
        Vector e = state_set ? u[k] : c.R.at(v, k);
        Vector x = spec.B(u[k]) + (memory_on_state ? c.S.at(ut, k) : c.S.at(v, k));
        return std::pair{std::move(e), std::move(x)};
    };
    for (std::size_t k = 0; k < g.size(); ++k)
    {
        if (k > 0)
        {
            v[k] = v[k - 1];
            u[k] = u[k - 1] + half * (v[k - 1] + v[k]);
        }
        auto [e, x] = theta(k);
        bool converged = false;
        double change = 0.0;
        for (std::size_t it = 1; it <= opts.max_outer; ++it)
        {
            v[k] = solver.solve(e, c.f[k] - x, v[k]).u;
            if (k > 0)
            {
                u[k] = u[k - 1] + half * (v[k - 1] + v[k]);
            }
            auto [e2, x2] = theta(k);
            change = std::sqrt(y.inner(e2 - e, e2 - e) + c.X->inner(x2 - x, x2 - x));
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
            throw NonConvergence("solve_sweeping_direct: no convergence at node " + std::to_string(k), v[k], change, k);
        }
        v[k] = solver.solve(e, c.f[k] - x, v[k]).u;
        if (k > 0)
        {
            u[k] = u[k - 1] + half * (v[k - 1] + v[k]);
        }
        eta[k] = std::move(e);
        xi[k] = std::move(x);
    }
    InclusionSolution diag{v, Trajectory(g, eta), Trajectory(g, xi), iters, {}, 0, 0.0, {}, {}, false};
    return {Trajectory(g, std::move(u)), std::move(v), std::move(diag)};
}

} // namespace hdsweep
