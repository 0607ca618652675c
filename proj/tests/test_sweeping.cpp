#include "hdsweep/sweeping.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace hdsweep;

namespace
{

Vector scalar(double x) { return Vector::Constant(1, x); }

// -u' in N_{f - C}(a u' + b u) with K = X, j = 0: a u' + b u = g, u(0) = 0
SweepingSpec linear_sweeping(double a, double b, double g, std::size_t steps)
{
    const TimeGrid grid(1.0, steps);
    auto x = euclidean_space(1);
    InclusionSpec core{x,
                       x,
                       ConstraintCone::whole(x),
                       MonotoneOperator::scaled_identity(a),
                       HomogeneousFunctional::zero(),
                       HistoryOperator::zero(1, 1),
                       HistoryOperator::zero(1, 1),
                       Trajectory::constant(grid, scalar(g)),
                       std::nullopt,
                       "linear"};
    return {core, LipschitzMap::scaled_identity(b), scalar(0.0), SweepingVariant::General};
}

SweepingSpec friction_sweeping(SweepingVariant variant, std::size_t steps)
{
    const TimeGrid grid(1.0, steps);
    auto x = euclidean_space(2);
    Matrix a(2, 2);
    a << 2.0, 0.2, 0.2, 1.8;
    Matrix b(2, 2);
    b << 0.5, 0.1, 0.0, 0.4;
    InclusionSpec core{x,
                       x,
                       ConstraintCone::nonpositive(x, {0}),
                       MonotoneOperator::from_matrix(*x, a),
                       HomogeneousFunctional::positive_part({1}, {0.3}),
                       HistoryOperator::volterra(VolterraKernel::scalar([](double t) { return 0.2 * std::exp(-t); }, 2), grid),
                       HistoryOperator::volterra(VolterraKernel::scalar([](double t) { return 0.5 * std::cos(t); }, 2), grid),
                       Trajectory::sample(grid, [](double t) { return Vector(Vector{{std::sin(2 * t), 1.0 - t}}); }),
                       std::nullopt,
                       "friction"};
    // j(eta, v) = 0.3 sqrt(1 + eta_1^2) v_1^+, Lipschitz 0.3 in eta
    core.j = HomogeneousFunctional::separable([](const Vector& e) { return 0.3 * std::hypot(1.0, e(1)); }, 0.3,
                                              HomogeneousFunctional::positive_part({1}, {1.0}));
    return {core, LipschitzMap::from_matrix(*x, b), Vector(Vector{{0.1, -0.2}}), variant};
}

} // namespace

TEST(IntegrateVelocity, Examples)
{
    const TimeGrid g(2.0, 5);
    const Vector u0 = Vector(Vector{{1.5, -0.25}});
    const auto zero = integrate_velocity(Trajectory::zeros(g, 2), u0);
    for (const auto& s : zero.samples())
    {
        EXPECT_EQ(s, u0);
    }
    const auto lin = integrate_velocity(Trajectory::constant(g, Vector(Vector{{1.0, 2.0}})), Vector::Zero(2));
    EXPECT_NEAR(lin[g.steps()](0), 2.0, 1e-14);
    EXPECT_NEAR(lin[g.steps()](1), 4.0, 1e-14);
}

TEST(Lift, ConstantsAndFirstNode)
{
    auto spec = linear_sweeping(1.0, 2.0, 1.0, 8);
    spec.core.S = HistoryOperator::volterra(VolterraKernel::scalar([](double) { return 3.0; }, 1), spec.core.grid());
    const auto lifted = lift_to_velocity(spec);
    EXPECT_DOUBLE_EQ(lifted.S.declared_L(), 5.0);
    EXPECT_EQ(lifted.S.declared_l(), 0.0);
    // at t = 0 the lifted memory is B(u0) exactly
    spec.u0 = scalar(0.7);
    const auto l2 = lift_to_velocity(spec);
    EXPECT_EQ(l2.S.at(Trajectory::constant(spec.core.grid(), scalar(4.0)), 0)(0), 2.0 * 0.7);

    auto zero_b = linear_sweeping(1.0, 0.0, 1.0, 8);
    zero_b.B = LipschitzMap::zero(1);
    zero_b.core.S = HistoryOperator::pointwise_memory(1, 0.0, 1.0);
    const auto l3 = lift_to_velocity(zero_b);
    const auto v = Trajectory::sample(zero_b.core.grid(), [](double t) { return scalar(std::cos(t)); });
    EXPECT_EQ(sup_abs_distance(l3.S.apply(v), zero_b.core.S.apply(v)), 0.0);
}

TEST(SolveSweeping, LinearClosedForm)
{
    auto err = [](std::size_t n) {
        InclusionOptions o;
        o.tol = 1e-13;
        const auto sol = solve_sweeping(linear_sweeping(2.0, 1.5, 1.0, n), o);
        double e = 0.0;
        for (std::size_t k = 0; k < sol.u.size(); ++k)
        {
            const double t = sol.u.grid().node(k);
            e = std::max(e, std::abs(sol.u[k](0) - (1.0 / 1.5) * (1.0 - std::exp(-1.5 * t / 2.0))));
        }
        return e;
    };
    EXPECT_LE(err(32), 1e-3);
    const double ratio = err(16) / err(32);
    EXPECT_GE(ratio, 3.4);
    EXPECT_LE(ratio, 4.6);
}

TEST(SolveSweeping, InitialStateIsBitwise)
{
    for (auto variant : {SweepingVariant::General, SweepingVariant::Cor41HdHd, SweepingVariant::Cor42StateSet,
                         SweepingVariant::Cor43StateMemory})
    {
        const auto spec = friction_sweeping(variant, 6);
        InclusionOptions o;
        o.tol = 1e-10;
        const auto sol = solve_sweeping(spec, o);
        EXPECT_EQ(sol.u[0], spec.u0) << variant_name(variant);
        EXPECT_LE(sup_abs_distance(sol.u, integrate_velocity(sol.v, spec.u0)), 0.0);
    }
}

TEST(SolveSweeping, StateSetParameterIsTheState)
{
    const auto spec = friction_sweeping(SweepingVariant::Cor42StateSet, 10);
    InclusionOptions o;
    o.tol = 1e-11;
    const auto sol = solve_sweeping(spec, o);
    EXPECT_LE(sup_abs_distance(sol.diagnostics.eta, sol.u), 1e-12);
}

TEST(SolveSweeping, LiftMatchesDirectMarching)
{
    for (auto variant : {SweepingVariant::General, SweepingVariant::Cor41HdHd, SweepingVariant::Cor42StateSet,
                         SweepingVariant::Cor43StateMemory})
    {
        const auto spec = friction_sweeping(variant, 10);
        InclusionOptions o;
        o.tol = 1e-10;
        const auto a = solve_sweeping(spec, o);
        const auto b = solve_sweeping_direct(spec, o);
        EXPECT_LE(sup_distance(*spec.core.X, a.u, b.u), 5 * o.tol) << variant_name(variant);
        EXPECT_LE(sup_distance(*spec.core.X, a.v, b.v), 5 * o.tol) << variant_name(variant);
        for (const auto& s : a.v.samples())
        {
            EXPECT_TRUE(spec.core.cone.contains(s, 1e-14));
        }
    }
}

TEST(SolveSweeping, Gates)
{
    auto spec = friction_sweeping(SweepingVariant::General, 6);
    spec.B.L = 0.1; // under-declared
    EXPECT_THROW((void)solve_sweeping(spec), GateFailure);
    InclusionOptions o;
    o.force = true;
    EXPECT_NO_THROW((void)solve_sweeping(spec, o));

    auto hd = friction_sweeping(SweepingVariant::Cor41HdHd, 6);
    hd.core.S = HistoryOperator::pointwise_memory(2, 0.2, 0.0);
    EXPECT_THROW((void)solve_sweeping(hd), IneligibleOperator);
}
