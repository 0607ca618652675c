#include "hdsweep/oracle.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace hdsweep;

namespace
{

Vector scalar(double x) { return Vector::Constant(1, x); }

EviProblem scalar_problem(ConstraintCone::Kind kind, double a, double w, double f)
{
    auto x = euclidean_space(1);
    ConstraintCone k = kind == ConstraintCone::Kind::NonpositiveCoords   ? ConstraintCone::nonpositive(x, {0})
                       : kind == ConstraintCone::Kind::NonnegativeCoords ? ConstraintCone::nonnegative(x, {0})
                                                                         : ConstraintCone::whole(x);
    const auto j = w > 0.0 ? HomogeneousFunctional::positive_part({0}, {w}) : HomogeneousFunctional::zero();
    return {k, MonotoneOperator::scaled_identity(a), j, w > 0.0 ? scalar(1.0) : Vector(), scalar(f)};
}

EviProblem planar_problem(const Vector& f)
{
    Matrix m(2, 2);
    m << 2.0, 0.0, 0.0, 0.5;
    auto x = make_space(m);
    Matrix a(2, 2);
    a << 1.5, 0.3, -0.1, 1.2;
    return {ConstraintCone::nonpositive(x, {0}), MonotoneOperator::from_matrix(*x, a),
            HomogeneousFunctional::positive_part({1}, {0.4}), scalar(1.0), f};
}

} // namespace

TEST(BruteVi, ScalarClosedForms)
{
    GridSearchConfig cfg;
    const struct
    {
        ConstraintCone::Kind kind;
        double a, w, f, exact;
    } cases[] = {
        {ConstraintCone::Kind::NonnegativeCoords, 2.0, 1.0, 3.0, 1.0},
        {ConstraintCone::Kind::NonpositiveCoords, 2.0, 0.0, 1.0, 0.0},
        {ConstraintCone::Kind::NonpositiveCoords, 2.0, 0.0, -1.0, -0.5},
        {ConstraintCone::Kind::WholeSpace, 2.0, 1.0, 3.0, 1.0},
        {ConstraintCone::Kind::WholeSpace, 2.0, 1.0, 0.5, 0.0},
        {ConstraintCone::Kind::WholeSpace, 2.0, 1.0, -1.0, -0.5},
    };
    for (const auto& c : cases)
    {
        const auto r = brute_vi(scalar_problem(c.kind, c.a, c.w, c.f), cfg);
        EXPECT_FALSE(r.inconclusive);
        EXPECT_LE(std::abs(r.u(0) - c.exact), r.resolution) << c.f;
    }
}

TEST(BruteVi, AgreesWithContractionSolverInTwoDimensions)
{
    GridSearchConfig cfg;
    cfg.points = 101;
    for (const Vector& f : {Vector(Vector{{1.0, 1.0}}), Vector(Vector{{-1.0, 0.2}}), Vector(Vector{{-2.0, -1.5}})})
    {
        const auto p = planar_problem(f);
        const auto fast = solve_evi(p, 1e-12, 100000);
        const auto slow = brute_vi(p, cfg);
        EXPECT_FALSE(slow.inconclusive);
        EXPECT_LE(p.space().norm(fast.u - slow.u), 1e-2) << f.transpose();
    }
}

TEST(BruteVi, ErrorsAndFlags)
{
    GridSearchConfig far;
    far.center = scalar(5.0);
    far.radius = 1.0;
    EXPECT_THROW((void)brute_vi(scalar_problem(ConstraintCone::Kind::NonpositiveCoords, 1.0, 0.0, 0.0), far),
                 ContractViolation);

    auto x4 = euclidean_space(4);
    const EviProblem big{ConstraintCone::whole(x4), MonotoneOperator::scaled_identity(1.0),
                         HomogeneousFunctional::zero(), Vector(), Vector::Zero(4)};
    EXPECT_THROW((void)brute_vi(big), ContractViolation);

    GridSearchConfig small;
    small.radius = 1.0;
    const auto r = brute_vi(scalar_problem(ConstraintCone::Kind::WholeSpace, 1.0, 0.0, 10.0), small);
    EXPECT_TRUE(r.inconclusive);
}

TEST(BruteVi, Deterministic)
{
    GridSearchConfig cfg;
    cfg.points = 61;
    const auto p = planar_problem(Vector(Vector{{-1.0, 0.7}}));
    const auto a = brute_vi(p, cfg);
    const auto b = brute_vi(p, cfg);
    EXPECT_EQ(a.u, b.u);
    EXPECT_EQ(a.violation, b.violation);
}

TEST(BruteInclusion, MatchesMarchingOnSmallVolterraProblem)
{
    const TimeGrid grid(1.0, 8);
    auto x = euclidean_space(2);
    Matrix a(2, 2);
    a << 2.0, 0.2, 0.2, 1.8;
    InclusionSpec spec{x,
                       x,
                       ConstraintCone::nonpositive(x, {0}),
                       MonotoneOperator::from_matrix(*x, a),
                       HomogeneousFunctional::separable([](const Vector& e) { return 0.3 * std::hypot(1.0, e(1)); }, 0.3,
                                                        HomogeneousFunctional::positive_part({1}, {1.0})),
                       HistoryOperator::volterra(VolterraKernel::scalar([](double t) { return 0.2 * std::exp(-t); }, 2), grid),
                       HistoryOperator::volterra(VolterraKernel::scalar([](double t) { return 0.5 * std::cos(t); }, 2), grid),
                       Trajectory::sample(grid, [](double t) { return Vector(Vector{{std::sin(3 * t), 1.0 - t}}); }),
                       std::nullopt,
                       "small"};
    InclusionOptions o;
    o.tol = 1e-11;
    const auto fast = solve_inclusion(spec, o);
    GridSearchConfig cfg;
    cfg.points = 81;
    cfg.fixed_point_tol = 1e-6;
    const auto slow = brute_inclusion(spec, cfg);
    EXPECT_FALSE(slow.inconclusive);
    EXPECT_LE(sup_distance(*x, fast.u, slow.u), 1e-3);
}

TEST(BruteInclusion, ScalarVolterraClosedForm)
{
    const double a = 2.0;
    const double beta = 1.0;
    const TimeGrid grid(1.0, 16);
    auto x = euclidean_space(1);
    const InclusionSpec spec{x,
                             x,
                             ConstraintCone::whole(x),
                             MonotoneOperator::scaled_identity(a),
                             HomogeneousFunctional::zero(),
                             HistoryOperator::zero(1, 1),
                             HistoryOperator::volterra(VolterraKernel::scalar([=](double) { return beta; }, 1), grid),
                             Trajectory::constant(grid, scalar(1.0)),
                             std::nullopt,
                             "volterra"};
    GridSearchConfig cfg;
    cfg.points = 161;
    cfg.radius = 1.0;
    const auto r = brute_inclusion(spec, cfg);
    InclusionOptions o;
    o.tol = 1e-12;
    EXPECT_LE(sup_distance(*x, r.u, solve_inclusion(spec, o).u), 1e-3);
    double err = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k)
    {
        err = std::max(err, std::abs(r.u[k](0) - std::exp(-beta * grid.node(k) / a) / a));
    }
    // trapezoid error beta^2 T dt^2 / (12 a^3) plus the grid resolution
    EXPECT_LE(err, 1e-3);
}

TEST(BruteInclusion, DecoupledNodesAreNodeProblems)
{
    const TimeGrid grid(1.0, 4);
    auto x = euclidean_space(1);
    const InclusionSpec spec{x,
                             x,
                             ConstraintCone::whole(x),
                             MonotoneOperator::scaled_identity(2.0),
                             HomogeneousFunctional::positive_part({0}, {1.0}),
                             HistoryOperator::zero(1, 1),
                             HistoryOperator::zero(1, 1),
                             Trajectory::sample(grid, [](double t) { return scalar(4.0 * t - 1.0); }),
                             std::nullopt,
                             "decoupled"};
    GridSearchConfig cfg;
    cfg.points = 81;
    const auto r = brute_inclusion(spec, cfg);
    for (std::size_t k = 0; k < grid.size(); ++k)
    {
        const EviProblem node{spec.cone, spec.A, spec.j, scalar(0.0), spec.f[k]};
        EXPECT_EQ(r.u[k], brute_vi(node, cfg).u) << k;
    }
}

TEST(FdDerivativeCheck, PolynomialExamples)
{
    const TimeGrid g(1.0, 20);
    const double h = g.dt();
    const auto u2 = Trajectory::sample(g, [](double t) { return scalar(t * t); });
    const auto v2 = Trajectory::sample(g, [](double t) { return scalar(2 * t); });
    EXPECT_LE(fd_derivative_check(u2, v2), 1e-12);
    const auto u3 = Trajectory::sample(g, [](double t) { return scalar(t * t * t); });
    const auto v3 = Trajectory::sample(g, [](double t) { return scalar(3 * t * t); });
    EXPECT_NEAR(fd_derivative_check(u3, v3), h * h, 1e-12);
    EXPECT_THROW((void)fd_derivative_check(u3, Trajectory::zeros(TimeGrid(1.0, 10), 1)), ContractViolation);
}
