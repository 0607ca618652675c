#pragma once

#include "hdsweep/moving_set.hpp"
#include "hdsweep/prox.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace hdsweep
{

/// Strongly monotone Lipschitz operator X -> X in Riesz coordinates, with its
/// declared constants m (monotonicity) and L (Lipschitz).
struct MonotoneOperator
{
    std::function<Vector(const Vector&)> apply;
    double m{1.0};
    double L{1.0};
    std::string name{"A"};
    /// Matrix of the operator when it is linear and known explicitly.
    std::optional<Matrix> linear;

    [[nodiscard]] Vector operator()(const Vector& u) const { return apply(u); }

    static MonotoneOperator from_matrix(const HilbertSpace& x, Matrix a, std::string name = "A")
    {
        // constants of a in the X metric: symmetric part spectrum and M-weighted norm
        const Matrix& mm = x.metric();
        const Matrix sym = 0.5 * (mm * a + (mm * a).transpose());
        Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> mono(sym, mm, Eigen::EigenvaluesOnly);
        Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> lip(a.transpose() * mm * a, mm, Eigen::EigenvaluesOnly);
        MonotoneOperator op;
        op.m = mono.eigenvalues().minCoeff();
        // L >= m holds exactly; the two eigen solves can disagree in the last bits
        op.L = std::max(op.m, std::sqrt(std::max(0.0, lip.eigenvalues().maxCoeff())));
        op.name = std::move(name);
        op.linear = a;
        op.apply = [a = std::move(a)](const Vector& u) { return Vector(a * u); };
        return op;
    }

    static MonotoneOperator scaled_identity(double a, std::string name = "A")
    {
        MonotoneOperator op;
        op.m = a;
        op.L = a;
        op.name = std::move(name);
        op.apply = [a](const Vector& u) { return Vector(a * u); };
        return op;
    }
};

/// Sampled extreme ratios of an operator on random pairs.
struct OperatorAudit
{
    double min_monotone_ratio{std::numeric_limits<double>::infinity()};
    double max_lipschitz_ratio{0.0};
    std::size_t samples{0};
    bool monotone_ok{true};
    bool lipschitz_ok{true};
    [[nodiscard]] bool ok() const { return monotone_ok && lipschitz_ok; }
};

/// Checks (Au-Av, u-v) >= m ||u-v||^2 and ||Au-Av|| <= L ||u-v|| on seeded pairs.
inline OperatorAudit audit_operator(const MonotoneOperator& op, const HilbertSpace& x, std::size_t samples = 1000,
                                    std::uint64_t seed = 11, double rel_tol = 1e-9)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> scale(1e-3, 10.0);
    OperatorAudit out;
    const Index n = x.dim();
    for (std::size_t s = 0; s < samples; ++s)
    {
        Vector u(n), v(n);
        const double r = scale(rng);
        for (Index i = 0; i < n; ++i)
        {
            u(i) = r * gauss(rng);
            v(i) = r * gauss(rng);
        }
        const Vector d = u - v;
        const double dn2 = x.inner(d, d);
        if (dn2 <= 0.0)
        {
            continue;
        }
        const Vector ad = op(u) - op(v);
        out.min_monotone_ratio = std::min(out.min_monotone_ratio, x.inner(ad, d) / dn2);
        out.max_lipschitz_ratio = std::max(out.max_lipschitz_ratio, x.norm(ad) / std::sqrt(dn2));
        ++out.samples;
    }
    out.monotone_ok = op.m > 0.0 && out.min_monotone_ratio >= op.m - rel_tol * std::max(1.0, op.m);
    out.lipschitz_ok = op.L >= op.m && out.max_lipschitz_ratio <= op.L + rel_tol * std::max(1.0, op.L);
    return out;
}

/// Find u in K with (Au, v-u) + j(eta,v) - j(eta,u) >= (f, v-u) for all v in K.
struct EviProblem
{
    ConstraintCone cone;
    MonotoneOperator A;
    HomogeneousFunctional j;
    Vector eta;
    Vector f;

    [[nodiscard]] const HilbertSpace& space() const { return cone.space(); }
};

struct EviSolution
{
    Vector u;
    std::size_t iterations{0};
    double residual{0.0};             ///< bound on the distance to the exact solution
    double contraction_estimate{0.0}; ///< largest measured ratio of successive displacements
};

struct EviOptions
{
    double tol{1e-10};
    std::size_t max_iter{100000};
    std::optional<double> step; ///< overrides rho = m / L^2
    bool force{false};          ///< run even when the operator audit fails
    bool audit{true};
    std::size_t audit_samples{1000};
};

/// Contraction iteration u+ = prox(u - rho (Au - f)). The operator audit and the
/// proximal reduction are done once; solve() may then be called for many (eta, f).
class EviSolver
{
public:
    EviSolver(ConstraintCone cone, MonotoneOperator a, HomogeneousFunctional j, EviOptions opts = {})
        : prox_(cone, j), a_(std::move(a)), opts_(opts)
    {
        detail::require(opts_.tol > 0.0, "EviSolver: tol must be positive");
        if (!(a_.m > 0.0) || !(a_.L >= a_.m))
        {
            if (!opts_.force)
            {
                throw GateFailure("assumption (A) fails for operator '" + a_.name + "': declared m = "
                                  + std::to_string(a_.m) + ", L = " + std::to_string(a_.L)
                                  + " (need 0 < m <= L)");
            }
        }
        if (opts_.audit)
        {
            audit_ = audit_operator(a_, prox_.cone().space(), opts_.audit_samples);
            if (!audit_->ok() && !opts_.force)
            {
                throw GateFailure("operator '" + a_.name + "' fails the sampled audit: min monotone ratio "
                                  + std::to_string(audit_->min_monotone_ratio) + " vs m = " + std::to_string(a_.m)
                                  + ", max Lipschitz ratio " + std::to_string(audit_->max_lipschitz_ratio)
                                  + " vs L = " + std::to_string(a_.L));
            }
        }
        const double m = std::max(a_.m, 0.0);
        const double big_l = std::max(a_.L, 1e-300);
        rho_ = opts_.step ? *opts_.step : m / (big_l * big_l);
        detail::require(rho_ > 0.0, "EviSolver: step must be positive");
        const double ratio = std::min(1.0, m / big_l);
        q_ = std::sqrt(std::max(0.0, 1.0 - ratio * ratio));
    }

    [[nodiscard]] double step() const noexcept { return rho_; }
    [[nodiscard]] double contraction_factor() const noexcept { return q_; }
    [[nodiscard]] const std::optional<OperatorAudit>& audit() const noexcept { return audit_; }
    [[nodiscard]] const ConstraintCone& cone() const noexcept { return prox_.cone(); }
    [[nodiscard]] const MonotoneOperator& op() const noexcept { return a_; }
    [[nodiscard]] const HomogeneousFunctional& functional() const noexcept { return prox_.functional(); }
    [[nodiscard]] const EviOptions& options() const noexcept { return opts_; }

    /// One application of the contraction map.
    [[nodiscard]] Vector step_map(const Vector& eta, const Vector& f, const Vector& u) const
    {
        return prox_(eta, rho_, u - rho_ * (a_(u) - f));
    }

    [[nodiscard]] EviSolution solve(const Vector& eta, const Vector& f, std::optional<Vector> start = std::nullopt,
                                    std::optional<double> tol_override = std::nullopt) const
    {
        const HilbertSpace& x = prox_.cone().space();
        x.check(f, "solve_evi");
        const double tol = tol_override ? *tol_override : opts_.tol;
        Vector u = start ? cone().project(*start) : Vector(Vector::Zero(x.dim()));
        // displacement threshold turning ||u+ - u|| into a distance-to-solution bound
        const bool exact_step = q_ < 1e-15 && !opts_.step;
        const double threshold = q_ > 0.0 ? tol * (1.0 - q_) / q_ : std::numeric_limits<double>::infinity();
        EviSolution out;
        double prev = -1.0;
        for (std::size_t it = 1; it <= opts_.max_iter; ++it)
        {
            Vector next = step_map(eta, f, u);
            const double disp = x.norm(next - u);
            if (prev > 1e-13 * (1.0 + x.norm(u)) && disp > 1e-13 * (1.0 + x.norm(u)))
            {
                out.contraction_estimate = std::max(out.contraction_estimate, disp / prev);
            }
            prev = disp;
            u = std::move(next);
            if (exact_step || disp <= threshold || disp == 0.0)
            {
                out.u = std::move(u);
                out.iterations = it;
                out.residual = q_ > 0.0 && q_ < 1.0 ? disp * q_ / (1.0 - q_) : 0.0;
                return out;
            }
        }
        throw NonConvergence("solve_evi: no convergence within " + std::to_string(opts_.max_iter) + " iterations", u,
                             prev);
    }

private:
    ProximalMap prox_;
    MonotoneOperator a_;
    EviOptions opts_;
    std::optional<OperatorAudit> audit_;
    double rho_{1.0};
    double q_{0.0};
};

inline EviSolution solve_evi(const EviProblem& problem, double tol, std::size_t max_iter,
                             std::optional<Vector> start = std::nullopt, bool force = false)
{
    EviOptions opts;
    opts.tol = tol;
    opts.max_iter = max_iter;
    opts.force = force;
    return EviSolver(problem.cone, problem.A, problem.j, opts).solve(problem.eta, problem.f, std::move(start));
}

namespace detail
{
/// -min over sampled v in K of (g, v - u) + j(eta, v) - j(eta, u). Test points are
/// v = 0, v = 2u, and P_K(u + r d) for seeded Gaussian d at radii cycling through
/// {0.01, 0.1, 1} (1 + ||u||); one test point per unit of budget.
inline double sampled_vi_violation(const ConstraintCone& cone, const HomogeneousFunctional& j, const Vector& eta,
                                   const Vector& u, const Vector& g, std::size_t budget, std::uint64_t seed)
{
    const HilbertSpace& x = cone.space();
    const Index n = x.dim();
    const double ju = j.eval(eta, u);
    const Vector mg = x.lower(g);
    auto value = [&](const Vector& v) { return mg.dot(v - u) + j.eval(eta, v) - ju; };

    double worst = std::min(value(Vector::Zero(n)), value(2.0 * u));
    const double scale = 1.0 + x.norm(u);
    const double radii[3] = {0.01 * scale, 0.1 * scale, scale};
    for (Index i = 0; i < n && static_cast<std::size_t>(2 * i) < budget; ++i)
    {
        for (double sgn : {1.0, -1.0})
        {
            const Vector e = sgn * Vector::Unit(n, i) / std::sqrt(x.metric()(i, i));
            worst = std::min(worst, value(cone.project(u + radii[1] * e)));
        }
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vector d(n);
    for (std::size_t s = 0; s < budget; ++s)
    {
        for (Index i = 0; i < n; ++i)
        {
            d(i) = gauss(rng);
        }
        const double nrm = x.norm(d);
        if (nrm <= 0.0)
        {
            continue;
        }
        worst = std::min(worst, value(cone.project(u + (radii[s % 3] / nrm) * d)));
    }
    return -worst;
}
} // namespace detail

/// Sampled violation of the variational inequality at u; +inf when u is not in K.
inline double vi_residual(const Vector& u, const EviProblem& problem, std::size_t sampler_budget = 10000,
                          std::uint64_t seed = 0x5eed)
{
    detail::require(sampler_budget >= 1, "vi_residual: sampler budget must be at least 1");
    const HilbertSpace& x = problem.space();
    x.check(u, "vi_residual");
    if (problem.cone.violation(u) > 1e-12 * (1.0 + u.cwiseAbs().maxCoeff()))
    {
        return std::numeric_limits<double>::infinity();
    }
    return detail::sampled_vi_violation(problem.cone, problem.j, problem.eta, u, problem.A(u) - problem.f,
                                        sampler_budget, seed);
}

struct Lemma31Check
{
    double vi_residual{0.0};
    double membership_residual{0.0};
    bool vi_holds{false};
    bool inclusion_holds{false};
    [[nodiscard]] bool agree() const { return vi_holds == inclusion_holds; }
};

/// Evaluates both sides of the equivalence
///   j(eta,v) - j(eta,u) >= (f - z, v - u) for all v in K   <=>   -u in N_{C(eta,t)}(z)
/// at the given point.
inline Lemma31Check lemma31_report(const Vector& u, const Vector& z, const Vector& eta, const Vector& f_t,
                                   const ConstraintCone& cone, const HomogeneousFunctional& j,
                                   const DirectionSampler& sampler, double tol = 1e-7)
{
    Lemma31Check out;
    if (cone.violation(u) > 1e-12 * (1.0 + u.cwiseAbs().maxCoeff()))
    {
        out.vi_residual = std::numeric_limits<double>::infinity();
    }
    else
    {
        out.vi_residual = detail::sampled_vi_violation(cone, j, eta, u, z - f_t, sampler.budget(), sampler.seed());
    }
    out.membership_residual = membership_residual(MovingSet::at_time(j, eta, f_t), cone, z, -u, sampler);
    out.vi_holds = out.vi_residual <= tol;
    out.inclusion_holds = out.membership_residual <= tol;
    return out;
}

inline bool verify_lemma31(const Vector& u, const Vector& z, const Vector& eta, const Vector& f_t,
                           const ConstraintCone& cone, const HomogeneousFunctional& j, const DirectionSampler& sampler,
                           double tol = 1e-7)
{
    return lemma31_report(u, z, eta, f_t, cone, j, sampler, tol).agree();
}

} // namespace hdsweep
