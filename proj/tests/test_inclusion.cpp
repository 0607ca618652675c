#include "hdsweep/inclusion.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace hdsweep;

namespace
{

Vector scalar(double x) { return Vector::Constant(1, x); }

// a u + beta int_0^t u = 1 on [0, 1]
InclusionSpec scalar_volterra(double a, double beta, std::size_t steps)
{
    const TimeGrid g(1.0, steps);
    auto x = euclidean_space(1);
    return {x,
            x,
            ConstraintCone::whole(x),
            MonotoneOperator::scaled_identity(a),
            HomogeneousFunctional::zero(),
            HistoryOperator::zero(1, 1),
            HistoryOperator::volterra(VolterraKernel::scalar([beta](double) { return beta; }, 1), g),
            Trajectory::constant(g, scalar(1.0)),
            std::nullopt,
            "scalar_volterra"};
}

double volterra_error(double a, double beta, std::size_t steps, SolveMode mode)
{
    InclusionOptions o;
    o.tol = 1e-13;
    o.mode = mode;
    const auto sol = solve_inclusion(scalar_volterra(a, beta, steps), o);
    double err = 0.0;
    for (std::size_t k = 0; k < sol.u.size(); ++k)
    {
        const double t = sol.u.grid().node(k);
        err = std::max(err, std::abs(sol.u[k](0) - std::exp(-beta * t / a) / a));
    }
    return err;
}

// 2-D instance with every ingredient: unilateral cone, positive-part friction-like
// functional driven by a memory R, Volterra S, time-dependent load
InclusionSpec coupled_instance(std::size_t steps, double l_pointwise = 0.0)
{
    const TimeGrid g(1.0, steps);
    auto x = make_space(Matrix(Vector::Constant(2, 1.0).asDiagonal()));
    auto y = euclidean_space(1);
    Matrix a(2, 2);
    a << 2.0, 0.3, 0.3, 1.5;
    const auto r = HistoryOperator(
        "memory", 2, 1,
        [](const Trajectory& u, std::size_t k) {
            double acc = 0.0;
            for (std::size_t j = 0; j <= k; ++j)
            {
                acc += trapezoid_weight(j, k, u.grid().dt()) * std::max(0.0, u[j](1));
            }
            return scalar(0.5 + acc);
        },
        0.0, 1.0);
    auto s = HistoryOperator::volterra(VolterraKernel::scalar([](double t) { return 0.8 * std::exp(-t); }, 2), g);
    if (l_pointwise > 0.0)
    {
        s = HistoryOperator::sum(s, HistoryOperator::pointwise_memory(2, l_pointwise, 0.0));
    }
    return {x,
            y,
            ConstraintCone::nonpositive(x, {0}),
            MonotoneOperator::from_matrix(*x, a),
            HomogeneousFunctional::positive_part({1}, {1.0}),
            r,
            s,
            Trajectory::sample(g, [](double t) { return Vector(Vector{{std::sin(3 * t) + 0.5, 2.0 * t + 0.2}}); }),
            std::nullopt,
            "coupled"};
}

} // namespace

TEST(Smallness, Examples)
{
    const auto a = smallness(0.0, 0.0, 0.0, 1.0);
    EXPECT_EQ(a.lhs, 0.0);
    EXPECT_TRUE(a.pass);
    const auto b = smallness(1.0, 0.3, 0.2, 1.0);
    EXPECT_DOUBLE_EQ(b.lhs, 1.0);
    EXPECT_FALSE(b.pass);
    EXPECT_TRUE(check_smallness(coupled_instance(8)).pass);
    EXPECT_TRUE(check_smallness(scalar_volterra(0.01, 50, 4)).pass);
}

TEST(Smallness, EstimatedConstantsOnlyWarn)
{
    auto spec = coupled_instance(8, 0.2);
    spec.S = spec.S.with_constants(0.0, spec.S.declared_L()); // under-declared pointwise part
    const auto r = check_smallness(spec, true);
    EXPECT_TRUE(r.pass);
    EXPECT_FALSE(r.warnings.empty());
}

TEST(SolveIntermediate, Examples)
{
    const TimeGrid g(1.0, 4);
    auto x = euclidean_space(2);
    Matrix a(2, 2);
    a << 3, 1, 1, 2;
    const Trajectory f = Trajectory::sample(g, [](double t) { return Vector(Vector{{1 + t, -t}}); });
    InclusionSpec lin{x, x, ConstraintCone::whole(x), MonotoneOperator::from_matrix(*x, a),
                      HomogeneousFunctional::zero(), HistoryOperator::zero(2, 2), HistoryOperator::zero(2, 2), f,
                      std::nullopt, "lin"};
    InclusionOptions o;
    o.tol = 1e-11;
    const auto u = solve_intermediate(Trajectory::zeros(g, 2), Trajectory::zeros(g, 2), lin, o);
    for (std::size_t k = 0; k < g.size(); ++k)
    {
        EXPECT_LE((u[k] - a.lu().solve(f[k])).norm(), 1e-11);
    }

    lin.f = Trajectory::zeros(g, 2);
    const auto z = solve_intermediate(Trajectory::zeros(g, 2), Trajectory::zeros(g, 2), lin, o);
    for (const auto& s : z.samples())
    {
        EXPECT_EQ(s, Vector::Zero(2));
    }

    auto r1 = euclidean_space(1);
    const InclusionSpec running{r1,
                                r1,
                                ConstraintCone::nonnegative(r1, {0}),
                                MonotoneOperator::scaled_identity(2.0),
                                HomogeneousFunctional::positive_part({0}, {1.0}),
                                HistoryOperator::zero(1, 1),
                                HistoryOperator::zero(1, 1),
                                Trajectory::constant(g, scalar(3.0)),
                                std::nullopt,
                                "running"};
    const auto one = solve_intermediate(Trajectory::constant(g, scalar(1.0)), Trajectory::zeros(g, 1), running, o);
    for (const auto& s : one.samples())
    {
        EXPECT_NEAR(s(0), 1.0, 1e-11);
    }
}

TEST(IntermediateStability, EstimateOnRandomPairs)
{
    std::mt19937_64 rng(77);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> pos(0.0, 2.0);
    const auto spec = coupled_instance(6);
    InclusionOptions o;
    o.tol = 1e-9;
    o.inner_tol = 1e-11;
    auto eta = [&] { return Trajectory::sample(spec.grid(), [&](double) { return scalar(pos(rng)); }); };
    auto xi = [&] { return Trajectory::sample(spec.grid(), [&](double) { return Vector(Vector{{gauss(rng), gauss(rng)}}); }); };
    for (int s = 0; s < 30; ++s)
    {
        EXPECT_LE(check_lemma32_estimate(spec, eta(), xi(), eta(), xi(), o), 1e-9 + 2 * 1e-11);
    }
    const auto e = eta();
    const auto x1 = xi();
    EXPECT_LE(check_lemma32_estimate(spec, e, x1, e, x1, o), 2e-11);
    // slope of a small xi perturbation
    for (double d : {1e-2, 1e-4})
    {
        std::vector<Vector> shifted = x1.samples();
        for (auto& v : shifted)
        {
            v(1) += d;
        }
        const auto u1 = solve_intermediate(e, x1, spec, o);
        const auto u2 = solve_intermediate(e, Trajectory(spec.grid(), shifted), spec, o);
        EXPECT_LE(sup_distance(*spec.X, u1, u2) / d, 1.0 / spec.A.m + 1e-6);
    }
}

TEST(SolveInclusion, DecoupledNodesNeedOneSweep)
{
    const TimeGrid g(1.0, 5);
    auto x = euclidean_space(2);
    Matrix a(2, 2);
    a << 2, 0.5, 0.5, 1;
    const Trajectory f = Trajectory::sample(g, [](double t) { return Vector(Vector{{t, 1 - t}}); });
    const InclusionSpec spec{x, x, ConstraintCone::whole(x), MonotoneOperator::from_matrix(*x, a),
                             HomogeneousFunctional::zero(), HistoryOperator::zero(2, 2), HistoryOperator::zero(2, 2), f,
                             std::nullopt, "decoupled"};
    InclusionOptions o;
    o.mode = SolveMode::GlobalPicard;
    o.tol = 1e-10;
    const auto sol = solve_inclusion(spec, o);
    EXPECT_EQ(sol.sweeps, 1U);
    for (std::size_t k = 0; k < g.size(); ++k)
    {
        EXPECT_LE((sol.u[k] - a.lu().solve(f[k])).norm(), 1e-10);
    }
}

TEST(SolveInclusion, ScalarVolterraClosedForm)
{
    for (auto mode : {SolveMode::TimeMarching, SolveMode::GlobalPicard})
    {
        const double e8 = volterra_error(2.0, 1.5, 8, mode);
        const double e16 = volterra_error(2.0, 1.5, 16, mode);
        EXPECT_LE(e16, 1e-2);
        EXPECT_GE(e8 / e16, 3.4);
        EXPECT_LE(e8 / e16, 4.6);
    }
}

TEST(SolveInclusion, ModesAgree)
{
    for (std::size_t steps : {4U, 10U})
    {
        for (double l : {0.0, 0.3})
        {
            const auto spec = coupled_instance(steps, l);
            InclusionOptions o;
            o.tol = 1e-9;
            o.mode = SolveMode::GlobalPicard;
            const auto a = solve_inclusion(spec, o);
            o.mode = SolveMode::TimeMarching;
            const auto b = solve_inclusion(spec, o);
            EXPECT_LE(sup_distance(*spec.X, a.u, b.u), 5 * o.tol);
        }
    }
}

TEST(SolveInclusion, SolutionsLieInKAndSatisfyTheInclusion)
{
    const auto spec = coupled_instance(10, 0.2);
    InclusionOptions o;
    o.tol = 1e-10;
    o.verify_stride = 1;
    o.residual_budget = 512;
    const auto sol = solve_inclusion(spec, o);
    ASSERT_EQ(sol.membership.size(), sol.u.size());
    for (std::size_t k = 0; k < sol.u.size(); ++k)
    {
        EXPECT_TRUE(spec.cone.contains(sol.u[k], 1e-14));
        EXPECT_LE(sol.per_step_residuals[k], 1e-7);
    }
    for (const auto& m : sol.membership)
    {
        EXPECT_TRUE(m.check.inclusion_holds) << "node " << m.node << " residual " << m.check.membership_residual;
        EXPECT_TRUE(m.check.agree());
    }
    // theta is the image of u
    const auto eta = spec.R.apply(sol.u);
    EXPECT_LE(sup_abs_distance(eta, sol.eta), 0.0);
}

TEST(SolveInclusion, ContractionAtTimeZero)
{
    // at t = 0 every integral vanishes: Lambda theta(0) depends on theta(0) only
    const auto spec = coupled_instance(4, 0.35);
    const auto rep = check_smallness(spec);
    InclusionOptions o;
    o.tol = 1e-12;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> pos(0.0, 2.0);
    for (int s = 0; s < 50; ++s)
    {
        const auto e1 = Trajectory::sample(spec.grid(), [&](double) { return scalar(pos(rng)); });
        const auto e2 = Trajectory::sample(spec.grid(), [&](double) { return scalar(pos(rng)); });
        const auto x1 = Trajectory::sample(spec.grid(), [&](double) { return Vector(Vector{{gauss(rng), gauss(rng)}}); });
        const auto x2 = Trajectory::sample(spec.grid(), [&](double) { return Vector(Vector{{gauss(rng), gauss(rng)}}); });
        const auto u1 = solve_intermediate(e1, x1, spec, o);
        const auto u2 = solve_intermediate(e2, x2, spec, o);
        const double before = product_norm(*spec.Y, e1[0] - e2[0], *spec.X, x1[0] - x2[0]);
        const double after = product_norm(*spec.Y, spec.R.at(u1, 0) - spec.R.at(u2, 0), *spec.X,
                                          spec.S.at(u1, 0) - spec.S.at(u2, 0));
        EXPECT_LE(after / before, rep.lhs / rep.m_A + 0.05);
    }
}

TEST(SolveInclusion, GridRefinementIsCauchy)
{
    auto coarse = [](std::size_t n, std::size_t factor) {
        InclusionOptions o;
        o.tol = 1e-12;
        const auto sol = solve_inclusion(coupled_instance(n * factor), o);
        std::vector<Vector> s;
        for (std::size_t k = 0; k <= n; ++k)
        {
            s.push_back(sol.u[k * factor]);
        }
        return Trajectory(TimeGrid(1.0, n), s);
    };
    auto x = euclidean_space(2);
    const auto t1 = coarse(4, 1), t2 = coarse(4, 2), t4 = coarse(4, 4), t8 = coarse(4, 8);
    const double d1 = sup_distance(*x, t1, t2), d2 = sup_distance(*x, t2, t4), d3 = sup_distance(*x, t4, t8);
    EXPECT_GE(d1 / d2, 1.8);
    EXPECT_GE(d2 / d3, 1.8);
}

TEST(SolveInclusion, GateAndForce)
{
    auto x = euclidean_space(1);
    const TimeGrid g(1.0, 8);
    const InclusionSpec bad{x,
                            x,
                            ConstraintCone::whole(x),
                            MonotoneOperator::scaled_identity(1.0),
                            HomogeneousFunctional::zero(),
                            HistoryOperator::zero(1, 1),
                            HistoryOperator::pointwise_memory(1, 0.6, 0.0),
                            Trajectory::constant(g, scalar(1.0)),
                            1.0,
                            "bad"};
    EXPECT_FALSE(check_smallness(bad).pass);
    EXPECT_THROW((void)solve_inclusion(bad), GateFailure);
    InclusionOptions o;
    o.force = true;
    const auto sol = solve_inclusion(bad, o);
    EXPECT_TRUE(sol.forced);
    // u + 0.6 u = 1 still converges here: the gate is sufficient, not necessary
    EXPECT_NEAR(sol.u[g.steps()](0), 1.0 / 1.6, 1e-7);
}

TEST(SolveInclusion, ThreadsGiveIdenticalResults)
{
    const auto spec = coupled_instance(12);
    InclusionOptions o;
    o.mode = SolveMode::GlobalPicard;
    o.tol = 1e-10;
    const auto a = solve_inclusion(spec, o);
    o.threads = 3;
    const auto b = solve_inclusion(spec, o);
    EXPECT_EQ(sup_abs_distance(a.u, b.u), 0.0);
}

TEST(Corollaries, Builders)
{
    const auto base = coupled_instance(8);
    CorollaryPieces p{base.X, base.Y, base.cone, base.A, base.j, base.R, base.S, base.f, Vector(), std::nullopt};
    const auto c31 = build_corollary_spec(CorollaryVariant::Cor31HdHd, p);
    EXPECT_TRUE(check_smallness(c31).pass);
    EXPECT_EQ(check_smallness(c31).lhs, 0.0);

    p.R = HistoryOperator::pointwise_memory(2, 0.1, 0.0).with_constants(0.1, 0.0);
    EXPECT_THROW((void)build_corollary_spec(CorollaryVariant::Cor31HdHd, p), IneligibleOperator);

    // cor32: Y = X, eta = u
    auto x = euclidean_space(1);
    CorollaryPieces q{x,
                      x,
                      ConstraintCone::nonnegative(x, {0}),
                      MonotoneOperator::scaled_identity(2.0),
                      HomogeneousFunctional::positive_part({0}, {0.5}),
                      std::nullopt,
                      HistoryOperator::zero(1, 1),
                      Trajectory::constant(TimeGrid(1.0, 4), scalar(3.0)),
                      Vector(),
                      0.5};
    const auto c32 = build_corollary_spec(CorollaryVariant::Cor32RIdentity, q);
    EXPECT_TRUE(check_smallness(c32).pass);
    EXPECT_DOUBLE_EQ(check_smallness(c32).lhs, 1.5);
    q.alpha_j = 1.2;
    EXPECT_THROW((void)build_corollary_spec(CorollaryVariant::Cor32RIdentity, q), IneligibleOperator);

    // cor33: eta is frozen; changing the dummy parameter history cannot change u
    p.R = base.R;
    p.eta0 = scalar(0.7);
    const auto c33 = build_corollary_spec(CorollaryVariant::Cor33EtaFree, p);
    InclusionOptions o;
    o.tol = 1e-11;
    const auto e1 = Trajectory::constant(c33.grid(), scalar(1.0));
    const auto e2 = Trajectory::constant(c33.grid(), scalar(-5.0));
    const auto u1 = solve_intermediate(e1, base.S.apply(Trajectory::zeros(base.grid(), 2)), c33, o);
    const auto u2 = solve_intermediate(e2, base.S.apply(Trajectory::zeros(base.grid(), 2)), c33, o);
    EXPECT_EQ(sup_abs_distance(u1, u2), 0.0);
    EXPECT_NO_THROW((void)solve_inclusion(c33, o));
}

TEST(Corollaries, StateParameterSolves)
{
    // -u in N_{C(u,t)}(2u) with j(eta, v) = 0.5 eta v^+: u = (3 - 0.5 u)/2 on the positive branch -> u = 1.2
    auto x = euclidean_space(1);
    CorollaryPieces q{x,
                      x,
                      ConstraintCone::nonnegative(x, {0}),
                      MonotoneOperator::scaled_identity(2.0),
                      HomogeneousFunctional::positive_part({0}, {0.5}),
                      std::nullopt,
                      HistoryOperator::zero(1, 1),
                      Trajectory::constant(TimeGrid(1.0, 4), scalar(3.0)),
                      Vector(),
                      0.5};
    const auto spec = build_corollary_spec(CorollaryVariant::Cor32RIdentity, q);
    InclusionOptions o;
    o.tol = 1e-11;
    for (auto mode : {SolveMode::GlobalPicard, SolveMode::TimeMarching})
    {
        o.mode = mode;
        const auto sol = solve_inclusion(spec, o);
        for (const auto& s : sol.u.samples())
        {
            EXPECT_NEAR(s(0), 1.2, 1e-9);
        }
    }
}
