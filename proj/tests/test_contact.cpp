#include "hdsweep/contact.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace hdsweep;

namespace
{

Vector vec(std::initializer_list<double> xs)
{
    Vector v(static_cast<Index>(xs.size()));
    Index i = 0;
    for (double x : xs)
    {
        v(i++) = x;
    }
    return v;
}

Loads body_force(double normal, double tangential = 0.0)
{
    Loads l;
    l.f0_normal = [normal](double, double) { return normal; };
    l.f0_tangential = [tangential](double, double) { return tangential; };
    return l;
}

ContactModel rod(ProblemKind kind, double f0, std::size_t elements = 4, std::size_t steps = 2,
                 BoundFunction f = BoundFunction::zero(), Material mat = {})
{
    const auto law_kind =
        kind == ProblemKind::P54Signorini ? ContactLaw::Kind::Signorini : ContactLaw::Kind::NormalComplianceMemory;
    return build_problem(kind, Mesh1D::uniform(1.0, elements), mat, {law_kind, std::move(f)}, body_force(f0),
                         TimeGrid(1.0, steps));
}

ContactModel shear(double load, BoundFunction f, Material mat = {}, std::size_t elements = 4, std::size_t steps = 8)
{
    return build_problem(ProblemKind::P62FrictionSweeping, Mesh1D::uniform(1.0, elements), mat,
                         {ContactLaw::Kind::BilateralFriction, std::move(f)}, body_force(0.5, load),
                         TimeGrid(1.0, steps));
}

InclusionOptions tight()
{
    InclusionOptions o;
    o.tol = 1e-12;
    return o;
}

} // namespace

TEST(AssembleSpace, Examples)
{
    const auto two = assemble_space(Mesh1D::uniform(1.0, 2));
    Matrix expected(2, 2);
    expected << 4, -2, -2, 2;
    EXPECT_LE((two->metric() - expected).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_EQ(assemble_space(Mesh1D::uniform(1.0, 1))->metric()(0, 0), 1.0);

    Mesh1D m;
    m.nodes = {0.0, 0.1, 0.35, 0.5, 1.0};
    const auto base = assemble_space(m);
    const auto scaled = assemble_space(m.scaled(2.5));
    EXPECT_LE((scaled->metric() - base->metric() / 2.5).cwiseAbs().maxCoeff(), 1e-13);

    Mesh1D floating = Mesh1D::uniform(1.0, 3);
    floating.fixed_start = false;
    EXPECT_THROW((void)assemble_space(floating), ConfigError);
    Mesh1D bad;
    bad.nodes = {0.0, 0.5, 0.5, 1.0};
    EXPECT_THROW((void)assemble_space(bad), ConfigError);
}

TEST(AssembleA, Examples)
{
    const Mesh1D m = Mesh1D::uniform(1.0, 5);
    const auto x = assemble_space(m);
    const auto a = assemble_A(m, Material{}, x);
    EXPECT_EQ(a.m, 1.0);
    EXPECT_EQ(a.L, 1.0);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 1.0);
    Vector u(x->dim());
    for (Index i = 0; i < u.size(); ++i)
    {
        u(i) = g(rng);
    }
    EXPECT_LE((a(u) - u).cwiseAbs().maxCoeff(), 1e-12);

    Material nl;
    nl.a = [](double xx) { return 2.0 + xx; };
    nl.mu = 0.5;
    const auto b = assemble_A(m, nl, x);
    EXPECT_EQ(b(Vector::Zero(x->dim())), Vector::Zero(x->dim()));
    EXPECT_NEAR(b.m, 2.1 - 0.5, 1e-12);
    EXPECT_NEAR(b.L, 2.9 + 0.5, 1e-12);
    const auto audit = audit_operator(b, *x, 1000);
    EXPECT_TRUE(audit.ok());
    EXPECT_GE(audit.min_monotone_ratio, b.m - 1e-9);

    Material bad;
    bad.a = [](double xx) { return xx - 0.5; };
    EXPECT_THROW((void)assemble_A(m, bad, x), ConfigError);
}

TEST(AssembleRelaxation, Examples)
{
    const Mesh1D m1 = Mesh1D::uniform(1.0, 1);
    const TimeGrid g(1.0, 4);
    const auto x1 = assemble_space(m1);
    const auto zero = assemble_relaxation(m1, Material{}, x1, g);
    EXPECT_EQ(zero.declared_L(), 0.0);

    Material unit;
    unit.beta = [](double) { return 1.0; };
    const auto s = assemble_relaxation(m1, unit, x1, g);
    const auto u = Trajectory::sample(g, [](double t) { return vec({t}); });
    const auto su = s.apply(u);
    for (std::size_t k = 0; k < g.size(); ++k)
    {
        // metric * int u in dual form, i.e. int u in Riesz form
        EXPECT_NEAR(x1->lower(su[k])(0), 0.5 * g.node(k) * g.node(k), 1e-14);
    }

    const Mesh1D m = Mesh1D::uniform(1.0, 4);
    const auto x = assemble_space(m);
    Material decay;
    decay.beta = [](double t) { return 0.7 * std::exp(-t); };
    decay.relax_weight = [](double xx) { return 1.0 + xx; };
    const auto op = assemble_relaxation(m, decay, x, TimeGrid(1.0, 10));
    const auto est = estimate_constants(op, *x, *x, TimeGrid(1.0, 10));
    EXPECT_LE(est.l_est, 0.05);
    EXPECT_LE(est.big_l_est, 2.0 * op.declared_L());
    EXPECT_GE(2.0 * est.big_l_est, op.declared_L());
}

TEST(AssembleMemoryR, Examples)
{
    const Mesh1D m = Mesh1D::uniform(1.0, 3);
    const TimeGrid g(1.0, 8);
    const auto r = assemble_memory_R(m, BoundFunction::linear(1.0));
    const auto neg = Trajectory::sample(g, [](double t) { return vec({-t, -1.0, -0.5 - t}); });
    const auto out1 = r.apply(neg);
    for (const auto& s : out1.samples())
    {
        EXPECT_EQ(s(0), 0.0);
    }
    const auto one = Trajectory::constant(g, vec({0.2, 0.4, 1.0}));
    const auto two = Trajectory::constant(g, vec({0.4, 0.8, 2.0}));
    const auto r1 = r.apply(one), r2 = r.apply(two);
    for (std::size_t k = 0; k < g.size(); ++k)
    {
        EXPECT_NEAR(r1[k](0), g.node(k), 1e-14);
        EXPECT_NEAR(r2[k](0), 2.0 * r1[k](0), 1e-14);
    }
    EXPECT_EQ(r.declared_l(), 0.0);
    EXPECT_NEAR(r.declared_L(), 1.0, 1e-12); // c0 = sqrt(length)
    // nonconstant speed: F(r) = r, u_nu = t^2 -> t^3/3 + O(dt^2)
    auto err = [&](std::size_t n) {
        const TimeGrid gg(1.0, n);
        const auto q = Trajectory::sample(gg, [](double t) { return vec({0.0, 0.0, t * t}); });
        return std::abs(r.apply(q)[n](0) - 1.0 / 3.0);
    };
    EXPECT_NEAR(err(8) / err(16), 4.0, 1e-6);
}

TEST(AssembleFrictionR, Examples)
{
    const Mesh1D m = Mesh1D::uniform(1.0, 2);
    const TimeGrid g(2.0, 6);
    const auto r = assemble_friction_R(m, BoundFunction::linear(1.0));
    const auto still = Trajectory::constant(g, vec({0.3, 0.1, 0.7, 0.0}));
    const auto out2 = r.apply(still);
    for (const auto& s : out2.samples())
    {
        EXPECT_EQ(s(0), 0.0);
    }
    const auto unit_speed = Trajectory::constant(g, vec({0.0, 0.0, 0.0, -1.0}));
    for (std::size_t k = 0; k < g.size(); ++k)
    {
        EXPECT_NEAR(r.apply(unit_speed)[k](0), g.node(k), 1e-14);
    }
    const auto c = assemble_friction_R(m, BoundFunction::constant(0.8));
    const auto out3 = c.apply(unit_speed);
    for (const auto& s : out3.samples())
    {
        EXPECT_EQ(s(0), 0.8);
    }
    const auto est = estimate_constants(r, *assemble_space(m, 2), HilbertSpace::euclidean(1), g);
    EXPECT_LE(est.l_est, 0.05);
}

TEST(AssembleLoads, Examples)
{
    const Mesh1D m = Mesh1D::uniform(1.0, 4);
    const auto x = assemble_space(m);
    const TimeGrid g(1.0, 3);
    const auto out4 = assemble_loads(m, Loads{}, g, x);
    for (const auto& s : out4.samples())
    {
        EXPECT_EQ(s, Vector::Zero(4));
    }
    const auto f = assemble_loads(m, body_force(2.0), g, x);
    // per-element two-point Gauss integration of f0 phi_i
    Vector dual = Vector::Zero(4);
    const double gp[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
    for (std::size_t e = 0; e < 4; ++e)
    {
        for (double s : gp)
        {
            const double w = 0.5 * m.h(e);
            if (e > 0)
            {
                dual(static_cast<Index>(e) - 1) += w * 2.0 * (1.0 - s);
            }
            dual(static_cast<Index>(e)) += w * 2.0 * s;
        }
    }
    EXPECT_LE((x->lower(f[0]) - dual).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LE((dual - vec({0.5, 0.5, 0.5, 0.25})).cwiseAbs().maxCoeff(), 1e-15);

    Loads lin;
    lin.f0_normal = [](double xx, double t) { return t * (1.0 + xx); };
    const auto ft = assemble_loads(m, lin, g, x);
    for (std::size_t k = 0; k < g.size(); ++k)
    {
        EXPECT_LE((ft[k] - g.node(k) * ft[g.steps()]).cwiseAbs().maxCoeff(), 1e-13);
    }
}

TEST(BuildProblem, SignoriniPushAndPull)
{
    const auto push = rod(ProblemKind::P54Signorini, 2.0);
    const auto sol = solve_contact(push, tight());
    for (std::size_t k = 0; k < sol.u.size(); ++k)
    {
        for (Index i = 0; i < 4; ++i)
        {
            const double xx = push.mesh.nodes[static_cast<std::size_t>(i) + 1];
            EXPECT_NEAR(sol.u[k](i), xx * (1.0 - xx), 1e-10);
        }
        EXPECT_NEAR(sol.fields.sigma_nu[k], -1.0, 1e-8);
        EXPECT_EQ(sol.fields.u_nu[k], 0.0);
    }
    EXPECT_LE(sol.report.max_complementarity, 1e-8);
    EXPECT_LE(sol.report.max_equilibrium_residual, 1e-9);

    const auto pull = rod(ProblemKind::P54Signorini, -2.0);
    const auto ps = solve_contact(pull, tight());
    EXPECT_NEAR(ps.u[2](3), -1.0, 1e-10);
    EXPECT_NEAR(ps.fields.sigma_nu[2], 0.0, 1e-8);
}

TEST(BuildProblem, ComplianceWithZeroBoundIsUnconstrained)
{
    for (double f0 : {2.0, -2.0})
    {
        const auto p52 = rod(ProblemKind::P52ComplianceMemory, f0);
        const auto sol = solve_contact(p52, tight());
        // unconstrained rod: u = f0 (x - x^2 / 2), nodally exact
        for (Index i = 0; i < 4; ++i)
        {
            const double xx = p52.mesh.nodes[static_cast<std::size_t>(i) + 1];
            EXPECT_NEAR(sol.u[1](i), f0 * (xx - 0.5 * xx * xx), 1e-10);
        }
        if (f0 < 0.0)
        {
            const auto p54 = solve_contact(rod(ProblemKind::P54Signorini, f0), tight());
            EXPECT_LE(sup_abs_distance(sol.u, p54.u), 1e-10);
        }
    }
}

TEST(BuildProblem, IncompatibleAndInvalidLaws)
{
    const Mesh1D m = Mesh1D::uniform(1.0, 2);
    const TimeGrid g(1.0, 2);
    EXPECT_THROW((void)build_problem(ProblemKind::P54Signorini, m, {}, {ContactLaw::Kind::BilateralFriction, {}}, {}, g),
                 ConfigError);
    EXPECT_THROW((void)build_problem(ProblemKind::P52ComplianceMemory, m, {},
                                     {ContactLaw::Kind::NormalComplianceMemory, BoundFunction::constant(1.0)}, {}, g),
                 ConfigError);
    BoundFunction lying = BoundFunction::linear(2.0);
    lying.lip = 1.0;
    EXPECT_THROW((void)build_problem(ProblemKind::P52ComplianceMemory, m, {},
                                     {ContactLaw::Kind::NormalComplianceMemory, lying}, {}, g),
                 ConfigError);
    const auto p62 = shear(1.0, BoundFunction::constant(0.3));
    EXPECT_EQ(p62.warnings.size(), 1U);
    InitialState bad;
    bad.normal = [](double xx) { return xx; };
    EXPECT_THROW((void)build_problem(ProblemKind::P62FrictionSweeping, m, {},
                                     {ContactLaw::Kind::BilateralFriction, BoundFunction::zero()}, {}, g, bad),
                 ConfigError);
}

TEST(RecoverStress, Examples)
{
    const auto model = rod(ProblemKind::P54Signorini, 0.0);
    const auto zero = recover_stress(model, Trajectory::zeros(model.grid(), 4));
    for (const auto& s : zero.stress)
    {
        for (double e : s[0])
        {
            EXPECT_EQ(e, 0.0);
        }
    }
    const auto linear = Trajectory::constant(model.grid(), vec({0.25, 0.5, 0.75, 1.0}));
    const auto f = recover_stress(model, linear);
    for (double e : f.stress[1][0])
    {
        EXPECT_NEAR(e, 1.0, 1e-14);
    }
    EXPECT_NEAR(f.sigma_nu[1], 1.0, 1e-14);

    // memory: beta = 1, u(x, t) = x -> sigma = 1 + t
    Material mem;
    mem.beta = [](double) { return 1.0; };
    const auto mm = rod(ProblemKind::P54Signorini, 0.0, 4, 4, BoundFunction::zero(), mem);
    const auto fm = recover_stress(mm, Trajectory::constant(mm.grid(), vec({0.25, 0.5, 0.75, 1.0})));
    for (std::size_t k = 0; k < mm.grid().size(); ++k)
    {
        EXPECT_NEAR(fm.stress[k][0][2], 1.0 + mm.grid().node(k), 1e-14);
    }
}

TEST(TraceConstant, DiscreteNormAndAudit)
{
    std::mt19937_64 rng(12);
    std::normal_distribution<double> g(0.0, 1.0);
    for (double length : {1.0, 2.0, 0.3})
    {
        Mesh1D m;
        m.nodes = {0.0, 0.2 * length, 0.45 * length, 0.7 * length, length};
        const auto x = assemble_space(m);
        const double c0 = trace_norm(*x, 3);
        EXPECT_NEAR(c0, std::sqrt(length), 1e-12);
        EXPECT_NEAR(HomogeneousFunctional::trace_constant(*x, {3}), c0, 1e-12);
        for (int s = 0; s < 200; ++s)
        {
            Vector v(4);
            for (Index i = 0; i < 4; ++i)
            {
                v(i) = g(rng);
            }
            EXPECT_LE(std::abs(v(3)), c0 * x->norm(v) * (1 + 1e-12));
        }
    }
    const auto p52 = rod(ProblemKind::P52ComplianceMemory, 1.0, 5, 2, BoundFunction::linear(1.0));
    EXPECT_NEAR(p52.inclusion->coupling(), p52.c0, 1e-12);
    EXPECT_NEAR(p52.inclusion->j.coupling_constant(*p52.X, *p52.inclusion->Y), p52.c0, 1e-12);
}

TEST(Contact, ComplianceBoundHolds)
{
    Material mat;
    mat.beta = [](double t) { return 0.5 * std::exp(-2 * t); };
    mat.mu = 0.3;
    mat.a = [](double xx) { return 1.5 + 0.5 * xx; };
    Loads l;
    l.f0_normal = [](double, double t) { return 4.0 * t; };
    const auto model = build_problem(ProblemKind::P52ComplianceMemory, Mesh1D::uniform(1.0, 6), mat,
                                     {ContactLaw::Kind::NormalComplianceMemory, BoundFunction::saturating(2.0, 3.0)}, l,
                                     TimeGrid(1.0, 16));
    InclusionOptions o;
    o.tol = 1e-11;
    const auto sol = solve_contact(model, o);
    EXPECT_LE(sol.report.max_compliance_excess, 1e-8);
    EXPECT_LE(sol.report.max_tension, 1e-8);
    EXPECT_LE(sol.report.max_case_split_gap, 1e-8);
    EXPECT_GT(sol.fields.memory_argument.back(), 0.0); // contact became active
}

TEST(Contact, SignoriniStaysAdmissibleUnderMemory)
{
    Material mat;
    mat.beta = [](double t) { return -0.4 * std::exp(-t); };
    Loads l;
    l.f0_normal = [](double xx, double t) { return 3.0 * std::sin(4.0 * t) * (1.0 + xx); };
    const auto model = build_problem(ProblemKind::P54Signorini, Mesh1D::uniform(1.0, 5), mat,
                                     {ContactLaw::Kind::Signorini, {}}, l, TimeGrid(1.5, 20));
    const auto sol = solve_contact(model, tight());
    for (double un : sol.fields.u_nu)
    {
        EXPECT_LE(un, 1e-10);
    }
    EXPECT_LE(sol.report.max_complementarity, 1e-8);
    EXPECT_LE(sol.report.max_tension, 1e-8);
}

TEST(Contact, FrictionlessLimitAndSteadySliding)
{
    const auto free = solve_contact(shear(2.0, BoundFunction::zero()), tight());
    for (double s : free.fields.sigma_tau)
    {
        EXPECT_LE(std::abs(s), 1e-10);
    }

    const auto slide = solve_contact(shear(2.0, BoundFunction::constant(0.5)), tight());
    EXPECT_EQ(slide.report.sliding_nodes, slide.u.size());
    for (std::size_t k = 0; k < slide.u.size(); ++k)
    {
        EXPECT_NEAR(std::abs(slide.fields.sigma_tau[k]), 0.5, 1e-6);
        EXPECT_NEAR(slide.report.nodes[k].dissipation, 0.5 * std::abs(slide.fields.v_tau[k]), 1e-6);
    }
    // pure viscous layer: v_tau(1) = 2 - 1 - 0.5 = 0.5 (nodally exact)
    EXPECT_NEAR(slide.fields.v_tau.back(), 0.5, 1e-9);
    EXPECT_EQ(slide.u[0], Vector::Zero(8));
}

TEST(Contact, FrictionBoundAndDissipation)
{
    Material mat;
    mat.b = [](double) { return 1.5; };
    mat.beta = [](double t) { return 0.3 * std::cos(t); };
    mat.mu = 0.2;
    Loads l;
    l.f0_tangential = [](double, double t) { return 3.0 * std::sin(3.0 * t); };
    l.f0_normal = [](double xx, double) { return xx; };
    InitialState init;
    init.tangential = [](double xx) { return 0.1 * xx; };
    const auto model = build_problem(ProblemKind::P62FrictionSweeping, Mesh1D::uniform(1.0, 5), mat,
                                     {ContactLaw::Kind::BilateralFriction, BoundFunction::saturating(1.0, 2.0)}, l,
                                     TimeGrid(2.0, 24), init);
    const auto sol = solve_contact(model, tight());
    EXPECT_LE(sol.report.max_friction_excess, 1e-8);
    EXPECT_GE(sol.report.min_dissipation, -1e-10);
    EXPECT_LE(sol.report.max_slip_misalignment, 1e-6);
    EXPECT_GT(sol.report.sliding_nodes, 0U);
    EXPECT_LT(sol.report.sliding_nodes, sol.u.size()); // stick phases exist too
    for (const auto& s : sol.u.samples())
    {
        EXPECT_EQ(s(model.normal_dof), 0.0);
    }
    EXPECT_EQ(sol.u[0], model.sweeping->u0);
}

TEST(BoundFunction, Audit)
{
    for (const auto& f : {BoundFunction::zero(), BoundFunction::linear(2.0), BoundFunction::saturating(1.0, 4.0),
                          BoundFunction::table({0.0, 1.0, 2.0}, {0.0, 0.5, 0.6})})
    {
        const auto a = audit_bound(f);
        EXPECT_TRUE(a.nonnegative()) << f.form;
        EXPECT_TRUE(a.vanishes_at_zero()) << f.form;
        EXPECT_TRUE(a.lipschitz_ok(f.lip)) << f.form;
    }
    EXPECT_FALSE(audit_bound(BoundFunction::constant(1.0)).vanishes_at_zero());
    EXPECT_FALSE(audit_bound(BoundFunction::table({0.0, 1.0}, {-1.0, 0.0})).nonnegative());
    EXPECT_NEAR(BoundFunction::table({0.0, 1.0, 2.0}, {0.0, 0.5, 0.6})(1.5), 0.55, 1e-15);
}
