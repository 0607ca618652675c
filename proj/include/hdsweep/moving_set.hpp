#pragma once

#include "hdsweep/cone.hpp"
#include "hdsweep/functional.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

namespace hdsweep
{

/// The set shift + sign * C(eta), where C(eta) = dJ(eta, 0) and J is j(eta, .)
/// extended by +inf outside K. With sign = -1 this is C(eta, t) = f(t) - C(eta).
///
/// C(eta) is only known through its support function, which is J(eta, .) itself.
struct MovingSet
{
    HomogeneousFunctional functional;
    Vector eta;
    Vector shift;
    double sign{-1.0};

    /// The set C(eta, t) = f_t - C(eta).
    static MovingSet at_time(HomogeneousFunctional j, Vector eta, Vector f_t)
    {
        return {std::move(j), std::move(eta), std::move(f_t), -1.0};
    }

    /// C - v.
    [[nodiscard]] MovingSet translated(const Vector& v) const { return {functional, eta, shift - v, sign}; }
    /// -C.
    [[nodiscard]] MovingSet negated() const { return {functional, eta, -shift, -sign}; }
};

/// Deterministic unit directions in K: seeded Gaussian directions projected into K
/// together with every +-e_i, all normalised in the metric of X.
class DirectionSampler
{
public:
    DirectionSampler(std::size_t budget, std::uint64_t seed = 0x5eed) : budget_(budget), seed_(seed)
    {
        detail::require(budget >= 1, "DirectionSampler: budget must be at least 1");
    }

    [[nodiscard]] std::size_t budget() const noexcept { return budget_; }
    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }

    [[nodiscard]] std::vector<Vector> directions(const ConstraintCone& cone, const std::vector<Vector>& extra = {}) const
    {
        const HilbertSpace& x = cone.space();
        const Index n = x.dim();
        std::vector<Vector> out;
        out.reserve(budget_ + 2 * static_cast<std::size_t>(n) + extra.size());
        auto push = [&](const Vector& d) {
            const Vector p = cone.project(d);
            const double nrm = x.norm(p);
            if (nrm > 1e-14)
            {
                out.push_back(p / nrm);
            }
        };
        for (Index i = 0; i < n; ++i)
        {
            push(Vector::Unit(n, i));
            push(-Vector::Unit(n, i));
        }
        for (const auto& e : extra)
        {
            push(e);
        }
        std::mt19937_64 rng(seed_);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (std::size_t s = 0; s < budget_; ++s)
        {
            Vector d(n);
            for (Index i = 0; i < n; ++i)
            {
                d(i) = gauss(rng);
            }
            push(d);
        }
        return out;
    }

private:
    std::size_t budget_;
    std::uint64_t seed_;
};

namespace detail
{
// J(eta, d): j(eta, d) on K (within tolerance), +inf outside.
inline double extended_j(const MovingSet& set, const ConstraintCone& cone, const Vector& d)
{
    const double tol = 1e-12 * (1.0 + d.cwiseAbs().maxCoeff());
    if (cone.violation(d) > tol)
    {
        return std::numeric_limits<double>::infinity();
    }
    return set.functional.eval(set.eta, cone.project(d));
}
} // namespace detail

/// Pieces of the test xi in N_S(z) for S = shift + sign C(eta).
struct MembershipReport
{
    double set_violation;     ///< sup_{v in K, ||v||=1} (c, v) - j(eta, v), c = sign (z - shift); <= 0 iff z in S
    double support_gap;       ///< sigma_S(xi) - (xi, z); <= 0 iff xi is normal at z (given z in S)
    [[nodiscard]] double residual() const { return std::max(set_violation, support_gap); }
};

/// Semi-decidable test of xi in N_S(z): membership z in S is checked on sampled
/// directions of K, the normal inequality through the exact support function
/// sigma_S(xi) = (xi, shift) + J(eta, sign xi).
inline MembershipReport membership_report(const MovingSet& set, const ConstraintCone& cone, const Vector& z,
                                          const Vector& xi, const DirectionSampler& sampler)
{
    const HilbertSpace& x = cone.space();
    x.check(z, "membership_residual");
    x.check(xi, "membership_residual");
    const Vector c = set.sign * (z - set.shift);

    double set_violation = -std::numeric_limits<double>::infinity();
    for (const auto& v : sampler.directions(cone, {set.sign * xi, -set.sign * xi, c}))
    {
        set_violation = std::max(set_violation, x.inner(c, v) - set.functional.eval(set.eta, v));
    }

    const double support = x.inner(xi, set.shift) + detail::extended_j(set, cone, set.sign * xi);
    const double gap = support - x.inner(xi, z);
    return {set_violation, gap};
}

/// Violation of xi in N_{C(eta,t)}(z); at most a tolerance iff membership is accepted.
inline double membership_residual(const MovingSet& set, const ConstraintCone& cone, const Vector& z, const Vector& xi,
                                  const DirectionSampler& sampler)
{
    return membership_report(set, cone, z, xi, sampler).residual();
}

/// Result of checking N_C(u+v) = N_{C-v}(u) and N_C(-u) = -N_{-C}(u) on sampled normals.
struct IdentityCheck
{
    bool shift_identity{true};
    bool reflection_identity{true};
    std::size_t candidates{0};
    std::size_t normals_found{0};
};

/// Compares both sides of the two normal-cone identities on a deterministic pool of
/// candidate vectors: every candidate must be accepted by both sides or by neither.
inline IdentityCheck normal_cone_identities_check(const MovingSet& set, const ConstraintCone& cone, const Vector& u,
                                                  const Vector& v, const DirectionSampler& sampler, double tol = 1e-10)
{
    const Vector zero = Vector::Zero(u.size());
    if (membership_report(set, cone, u + v, zero, sampler).set_violation > tol)
    {
        throw ContractViolation("normal_cone_identities_check: u + v is not in C");
    }
    if (membership_report(set, cone, -u, zero, sampler).set_violation > tol)
    {
        throw ContractViolation("normal_cone_identities_check: -u is not in C");
    }
    const MovingSet shifted = set.translated(v);
    const MovingSet reflected = set.negated();

    std::vector<Vector> pool = sampler.directions(cone);
    const std::size_t base = pool.size();
    for (std::size_t i = 0; i < base; ++i)
    {
        pool.push_back(-pool[i]);
        pool.push_back(0.5 * pool[i]);
    }
    pool.push_back(zero);

    IdentityCheck out;
    out.candidates = pool.size();
    for (const auto& xi : pool)
    {
        const bool lhs1 = membership_residual(set, cone, u + v, xi, sampler) <= tol;
        const bool rhs1 = membership_residual(shifted, cone, u, xi, sampler) <= tol;
        const bool lhs2 = membership_residual(set, cone, -u, xi, sampler) <= tol;
        const bool rhs2 = membership_residual(reflected, cone, u, -xi, sampler) <= tol;
        out.shift_identity = out.shift_identity && (lhs1 == rhs1);
        out.reflection_identity = out.reflection_identity && (lhs2 == rhs2);
        out.normals_found += lhs1 ? 1 : 0;
    }
    return out;
}

} // namespace hdsweep
