#pragma once

#include "hdsweep/sweeping.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hdsweep
{

/// 1-D mesh on [x_0, x_n]. Node 0 is the fixed end, node n the contact end with
/// outward normal +1. Traction nodes carry point loads and exclude both ends.
struct Mesh1D
{
    std::vector<double> nodes;
    std::vector<std::size_t> traction_nodes;
    bool fixed_start{true};

    static Mesh1D uniform(double length, std::size_t elements)
    {
        detail::require(elements >= 1 && length > 0.0, "Mesh1D::uniform: need a positive length and one element");
        Mesh1D m;
        for (std::size_t i = 0; i <= elements; ++i)
        {
            m.nodes.push_back(length * static_cast<double>(i) / static_cast<double>(elements));
        }
        return m;
    }

    [[nodiscard]] std::size_t elements() const noexcept { return nodes.empty() ? 0 : nodes.size() - 1; }
    [[nodiscard]] double h(std::size_t e) const { return nodes[e + 1] - nodes[e]; }
    [[nodiscard]] double length() const { return nodes.back() - nodes.front(); }
    [[nodiscard]] double midpoint(std::size_t e) const { return 0.5 * (nodes[e] + nodes[e + 1]); }

    [[nodiscard]] Mesh1D scaled(double lambda) const
    {
        Mesh1D m = *this;
        for (double& x : m.nodes)
        {
            x *= lambda;
        }
        return m;
    }

    void validate() const
    {
        if (!fixed_start)
        {
            throw ConfigError("Mesh1D: no fixed node; the energy space is not a Hilbert space without one");
        }
        if (nodes.size() < 2)
        {
            throw ConfigError("Mesh1D: at least one element is required");
        }
        for (std::size_t i = 0; i + 1 < nodes.size(); ++i)
        {
            if (!(nodes[i + 1] > nodes[i]) || !std::isfinite(nodes[i + 1]))
            {
                throw ConfigError("Mesh1D: node coordinates must be finite and strictly increasing");
            }
        }
        for (std::size_t t : traction_nodes)
        {
            if (t == 0 || t >= elements())
            {
                throw ConfigError("Mesh1D: traction node " + std::to_string(t)
                                  + " must be an interior node (not the fixed or the contact end)");
            }
        }
    }
};

using SpaceField = std::function<double(double)>;
using TimeFunction = std::function<double(double)>;

/// sigma = a(x) eps + mu sin(eps) [+ b(x) eps(u) on velocity problems] + int beta(t-s) c(x) eps(s) ds.
struct Material
{
    SpaceField a{[](double) { return 1.0; }};
    double mu{0.0}; ///< slope bound of the nonlinear perturbation mu sin
    SpaceField b{[](double) { return 0.0; }};
    TimeFunction beta{[](double) { return 0.0; }};
    SpaceField relax_weight{[](double) { return 1.0; }};

    [[nodiscard]] double a_at(const Mesh1D& m, std::size_t e) const { return a(m.midpoint(e)); }
    [[nodiscard]] double min_a(const Mesh1D& m) const
    {
        double lo = std::numeric_limits<double>::infinity();
        for (std::size_t e = 0; e < m.elements(); ++e)
        {
            lo = std::min(lo, a_at(m, e));
        }
        return lo;
    }
    [[nodiscard]] double max_a(const Mesh1D& m) const
    {
        double hi = -std::numeric_limits<double>::infinity();
        for (std::size_t e = 0; e < m.elements(); ++e)
        {
            hi = std::max(hi, a_at(m, e));
        }
        return hi;
    }
    [[nodiscard]] double m_A(const Mesh1D& m) const { return min_a(m) - mu; }
    [[nodiscard]] double L_A(const Mesh1D& m) const { return max_a(m) + mu; }
    [[nodiscard]] double max_b(const Mesh1D& m) const
    {
        double hi = 0.0;
        for (std::size_t e = 0; e < m.elements(); ++e)
        {
            hi = std::max(hi, b(m.midpoint(e)));
        }
        return hi;
    }
    [[nodiscard]] double max_relax_weight(const Mesh1D& m) const
    {
        double hi = 0.0;
        for (std::size_t e = 0; e < m.elements(); ++e)
        {
            hi = std::max(hi, std::abs(relax_weight(m.midpoint(e))));
        }
        return hi;
    }
    /// Pointwise viscosity/elasticity law A(x, eps) on element e.
    [[nodiscard]] double stress_A(const Mesh1D& m, std::size_t e, double eps) const
    {
        return a_at(m, e) * eps + mu * std::sin(eps);
    }

    /// ConfigError for coefficients that cannot define a material at all.
    void validate(const Mesh1D& m) const
    {
        for (std::size_t e = 0; e < m.elements(); ++e)
        {
            const double x = m.midpoint(e);
            if (!std::isfinite(a(x)) || !std::isfinite(b(x)) || !std::isfinite(relax_weight(x)))
            {
                throw ConfigError("Material: non-finite coefficient at x = " + std::to_string(x));
            }
            if (b(x) < 0.0)
            {
                throw ConfigError("Material: elastic coefficient b must be nonnegative");
            }
        }
        if (!(mu >= 0.0) || !std::isfinite(mu))
        {
            throw ConfigError("Material: the perturbation slope mu must be finite and nonnegative");
        }
    }
};

/// Scalar bound map F of the contact laws with its Lipschitz constant.
struct BoundFunction
{
    std::function<double(double)> fn{[](double) { return 0.0; }};
    double lip{0.0};
    std::string form{"zero"};

    [[nodiscard]] double operator()(double r) const { return fn(r); }

    static BoundFunction zero() { return {[](double) { return 0.0; }, 0.0, "zero"}; }
    /// F(r) = k r^+.
    static BoundFunction linear(double k)
    {
        return {[k](double r) { return k * std::max(0.0, r); }, std::abs(k), "linear"};
    }
    /// F(r) = F0; violates F(0) = 0 unless F0 = 0.
    static BoundFunction constant(double f0) { return {[f0](double) { return f0; }, 0.0, "constant"}; }
    /// F(r) = Fmax (1 - exp(-k r^+)).
    static BoundFunction saturating(double fmax, double k)
    {
        return {[fmax, k](double r) { return fmax * (1.0 - std::exp(-k * std::max(0.0, r))); }, std::abs(fmax * k),
                "saturating"};
    }
    /// Piecewise-linear interpolation of (r_i, F_i), constant outside the table.
    static BoundFunction table(std::vector<double> r, std::vector<double> f)
    {
        if (r.size() != f.size() || r.empty())
        {
            throw ConfigError("BoundFunction::table: need matching, nonempty abscissae and values");
        }
        double lip = 0.0;
        for (std::size_t i = 0; i + 1 < r.size(); ++i)
        {
            if (!(r[i + 1] > r[i]))
            {
                throw ConfigError("BoundFunction::table: abscissae must be strictly increasing");
            }
            lip = std::max(lip, std::abs(f[i + 1] - f[i]) / (r[i + 1] - r[i]));
        }
        auto fn = [r, f](double x) {
            if (x <= r.front())
            {
                return f.front();
            }
            if (x >= r.back())
            {
                return f.back();
            }
            const auto it = std::upper_bound(r.begin(), r.end(), x);
            const std::size_t i = static_cast<std::size_t>(it - r.begin()) - 1;
            const double s = (x - r[i]) / (r[i + 1] - r[i]);
            return f[i] + s * (f[i + 1] - f[i]);
        };
        return {std::move(fn), lip, "table"};
    }
};

/// Sampled audit of F: nonnegativity, F(0) = 0 and the declared Lipschitz bound.
struct BoundAudit
{
    double f_at_zero{0.0};
    double min_value{0.0};
    double max_lipschitz_ratio{0.0};
    std::size_t samples{0};
    [[nodiscard]] bool nonnegative() const { return min_value >= 0.0; }
    [[nodiscard]] bool vanishes_at_zero() const { return f_at_zero == 0.0; }
    [[nodiscard]] bool lipschitz_ok(double declared) const
    {
        return max_lipschitz_ratio <= declared * (1.0 + 1e-9) + 1e-12;
    }
};

/// Deterministic pairs on [-range, range].
inline BoundAudit audit_bound(const BoundFunction& f, double range = 10.0, std::size_t samples = 1000)
{
    BoundAudit a;
    a.f_at_zero = f(0.0);
    a.min_value = a.f_at_zero;
    a.samples = samples;
    for (std::size_t s = 1; s <= samples; ++s)
    {
        // golden-ratio spacing covers the interval without a RNG
        const double u = std::fmod(0.6180339887498949 * static_cast<double>(s), 1.0);
        const double w = std::fmod(0.7548776662466927 * static_cast<double>(s), 1.0);
        const double r1 = range * (2.0 * u - 1.0), r2 = range * (2.0 * w - 1.0);
        const double f1 = f(r1), f2 = f(r2);
        a.min_value = std::min({a.min_value, f1, f2});
        if (r1 != r2)
        {
            a.max_lipschitz_ratio = std::max(a.max_lipschitz_ratio, std::abs(f1 - f2) / std::abs(r1 - r2));
        }
    }
    return a;
}

struct ContactLaw
{
    enum class Kind
    {
        NormalComplianceMemory,
        Signorini,
        BilateralFriction,
    };
    Kind kind{Kind::Signorini};
    BoundFunction F{BoundFunction::zero()};
};

/// Body force per component and point tractions at the mesh traction nodes.
struct Loads
{
    using Field = std::function<double(double x, double t)>;
    Field f0_normal{[](double, double) { return 0.0; }};
    Field f0_tangential{[](double, double) { return 0.0; }};
    TimeFunction f2_normal{[](double) { return 0.0; }};
    TimeFunction f2_tangential{[](double) { return 0.0; }};
};

enum class ProblemKind
{
    P52ComplianceMemory,
    P54Signorini,
    P62FrictionSweeping,
};

inline const char* problem_name(ProblemKind k)
{
    switch (k)
    {
    case ProblemKind::P52ComplianceMemory: return "p52_compliance_memory";
    case ProblemKind::P54Signorini: return "p54_signorini";
    case ProblemKind::P62FrictionSweeping: return "p62_friction_sweeping";
    }
    return "?";
}

namespace detail
{
// Free-node stiffness with per-element coefficient, one scalar component.
inline Matrix scalar_stiffness(const Mesh1D& m, const std::function<double(std::size_t)>& coeff)
{
    const auto n = static_cast<Index>(m.elements());
    Matrix k = Matrix::Zero(n, n);
    for (std::size_t e = 0; e < m.elements(); ++e)
    {
        const double c = coeff(e) / m.h(e);
        const Index right = static_cast<Index>(e); // free index of node e + 1
        k(right, right) += c;
        if (e > 0)
        {
            k(right - 1, right - 1) += c;
            k(right, right - 1) -= c;
            k(right - 1, right) -= c;
        }
    }
    return k;
}

inline Matrix block_diagonal(const Matrix& k, Index components)
{
    const Index n = k.rows();
    Matrix out = Matrix::Zero(n * components, n * components);
    for (Index c = 0; c < components; ++c)
    {
        out.block(c * n, c * n, n, n) = k;
    }
    return out;
}

// Element strain of component c; node 0 is fixed at zero.
inline double strain(const Mesh1D& m, const Vector& u, std::size_t e, Index c)
{
    const auto n = static_cast<Index>(m.elements());
    const double right = u(c * n + static_cast<Index>(e));
    const double left = e == 0 ? 0.0 : u(c * n + static_cast<Index>(e) - 1);
    return (right - left) / m.h(e);
}

// Dual force vector of element stresses: sum_e h_e sigma_e eps_e(phi_i).
inline Vector internal_force(const Mesh1D& m, const std::vector<std::vector<double>>& stress)
{
    const auto n = static_cast<Index>(m.elements());
    const auto comps = static_cast<Index>(stress.size());
    Vector g = Vector::Zero(n * comps);
    for (Index c = 0; c < comps; ++c)
    {
        for (std::size_t e = 0; e < m.elements(); ++e)
        {
            const Index right = c * n + static_cast<Index>(e);
            g(right) += stress[static_cast<std::size_t>(c)][e];
            if (e > 0)
            {
                g(right - 1) -= stress[static_cast<std::size_t>(c)][e];
            }
        }
    }
    return g;
}

// Consistent (mass-weighted) load of a nodal field, free nodes only.
inline Vector consistent_load(const Mesh1D& m, const std::function<double(double)>& f)
{
    const auto n = static_cast<Index>(m.elements());
    Vector out = Vector::Zero(n);
    for (std::size_t e = 0; e < m.elements(); ++e)
    {
        const double fl = f(m.nodes[e]), fr = f(m.nodes[e + 1]);
        const double h6 = m.h(e) / 6.0;
        out(static_cast<Index>(e)) += h6 * (fl + 2.0 * fr);
        if (e > 0)
        {
            out(static_cast<Index>(e) - 1) += h6 * (2.0 * fl + fr);
        }
    }
    return out;
}
} // namespace detail

/// (u, v)_V = int u' v' on the free nodes; `components` copies for the shear layer.
inline SpacePtr assemble_space(const Mesh1D& mesh, Index components = 1)
{
    mesh.validate();
    return make_space(detail::block_diagonal(detail::scalar_stiffness(mesh, [](std::size_t) { return 1.0; }), components));
}

/// (Au, v)_V = int A(eps(u)) eps(v), componentwise, with declared (m_A, L_A) from coefficient bounds.
inline MonotoneOperator assemble_A(const Mesh1D& mesh, const Material& mat, const SpacePtr& x, Index components = 1)
{
    mat.validate(mesh);
    for (std::size_t e = 0; e < mesh.elements(); ++e)
    {
        if (!(mat.a_at(mesh, e) > 0.0))
        {
            throw ConfigError("Material: the coefficient a must be positive (a = " + std::to_string(mat.a_at(mesh, e))
                              + " on element " + std::to_string(e) + ")");
        }
    }
    MonotoneOperator op;
    op.m = mat.m_A(mesh);
    op.L = mat.L_A(mesh);
    op.name = mat.mu == 0.0 ? "fem_linear" : "fem_nonlinear";
    if (mat.mu == 0.0)
    {
        const Matrix k = detail::block_diagonal(detail::scalar_stiffness(mesh, [&](std::size_t e) { return mat.a_at(mesh, e); }),
                                                components);
        const Matrix riesz = x->cholesky().solve(k);
        op.linear = riesz;
        op.apply = [riesz](const Vector& u) { return Vector(riesz * u); };
        return op;
    }
    op.apply = [mesh, mat, x, components](const Vector& u) {
        std::vector<std::vector<double>> stress(static_cast<std::size_t>(components),
                                                std::vector<double>(mesh.elements()));
        for (Index c = 0; c < components; ++c)
        {
            for (std::size_t e = 0; e < mesh.elements(); ++e)
            {
                stress[static_cast<std::size_t>(c)][e] = mat.stress_A(mesh, e, detail::strain(mesh, u, e, c));
            }
        }
        return Vector(x->riesz(detail::internal_force(mesh, stress)));
    };
    return op;
}

/// Memory term of the relaxation tensor: kernel beta(t) M^{-1} K_c, L = max|beta| max|c|.
inline HistoryOperator assemble_relaxation(const Mesh1D& mesh, const Material& mat, const SpacePtr& x,
                                           const TimeGrid& grid, Index components = 1)
{
    const Matrix kc = detail::block_diagonal(
        detail::scalar_stiffness(mesh, [&](std::size_t e) { return mat.relax_weight(mesh.midpoint(e)); }), components);
    const Matrix base = x->cholesky().solve(kc);
    double max_beta = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k)
    {
        max_beta = std::max(max_beta, std::abs(mat.beta(grid.node(k))));
    }
    const double big_l = max_beta * mat.max_relax_weight(mesh);
    if (max_beta == 0.0)
    {
        return HistoryOperator::zero(x->dim(), x->dim());
    }
    return HistoryOperator::volterra(VolterraKernel::separable(mat.beta, base), grid).with_constants(0.0, big_l);
}

/// Exact discrete trace norm sup |v_c| / ||v||_V at dof c.
inline double trace_norm(const HilbertSpace& x, Index dof)
{
    Vector e = Vector::Zero(x.dim());
    e(dof) = 1.0;
    return std::sqrt(x.cholesky().solve(e)(dof));
}

namespace detail
{
// t -> F(int_0^t g(u(s)) ds) at the contact node, cumulative trapezoid recurrence.
inline HistoryOperator contact_memory(std::string kind, Index in_dim, Index dof, bool absolute, BoundFunction f,
                                      double c0)
{
    const double big_l = c0 * f.lip;
    return {std::move(kind), in_dim, 1,
            [dof, absolute, f](const Trajectory& u, std::size_t k) {
                auto g = [&](std::size_t j) { return absolute ? std::abs(u[j](dof)) : std::max(0.0, u[j](dof)); };
                const double half = 0.5 * u.grid().dt();
                double acc = 0.0;
                for (std::size_t j = 1; j <= k; ++j)
                {
                    acc += half * (g(j - 1) + g(j));
                }
                return Vector(Vector::Constant(1, f(acc)));
            },
            0.0, big_l};
}
} // namespace detail

/// R u(t) = F(int_0^t u_nu^+ ds): Y = R^1 at the contact node, l = 0, L = c0 L_F.
inline HistoryOperator assemble_memory_R(const Mesh1D& mesh, const BoundFunction& f)
{
    const auto x = assemble_space(mesh);
    const Index dof = x->dim() - 1;
    return detail::contact_memory("normal_compliance_memory", x->dim(), dof, false, f, trace_norm(*x, dof));
}

/// R v(t) = F(int_0^t |v_tau| ds) on the shear layer, l = 0, L = c0 L_F.
inline HistoryOperator assemble_friction_R(const Mesh1D& mesh, const BoundFunction& f)
{
    const auto x = assemble_space(mesh, 2);
    const Index dof = x->dim() - 1;
    return detail::contact_memory("total_slip_friction", x->dim(), dof, true, f, trace_norm(*x, dof));
}

/// Riesz representative of int f0 v + f2 v(traction nodes) at every grid node.
inline Trajectory assemble_loads(const Mesh1D& mesh, const Loads& loads, const TimeGrid& grid, const SpacePtr& x,
                                 Index components = 1)
{
    const auto n = static_cast<Index>(mesh.elements());
    std::vector<Vector> out;
    out.reserve(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k)
    {
        const double t = grid.node(k);
        Vector dual(n * components);
        for (Index c = 0; c < components; ++c)
        {
            const auto& f0 = c == 0 ? loads.f0_normal : loads.f0_tangential;
            dual.segment(c * n, n) = detail::consistent_load(mesh, [&](double xx) { return f0(xx, t); });
            const double f2 = c == 0 ? loads.f2_normal(t) : loads.f2_tangential(t);
            for (std::size_t node : mesh.traction_nodes)
            {
                dual(c * n + static_cast<Index>(node) - 1) += f2;
            }
        }
        out.push_back(x->riesz(dual));
    }
    return {grid, std::move(out)};
}

/// Assembled contact problem; exactly one of `inclusion` / `sweeping` is set.
struct ContactModel
{
    ProblemKind kind;
    Mesh1D mesh;
    Material material;
    ContactLaw law;
    Loads loads;
    SpacePtr X;
    Index components{1};
    Index normal_dof{0};
    std::optional<Index> tangential_dof;
    double c0{0.0};
    std::optional<InclusionSpec> inclusion;
    std::optional<SweepingSpec> sweeping;
    std::vector<std::string> warnings;

    [[nodiscard]] const InclusionSpec& core() const { return inclusion ? *inclusion : sweeping->core; }
    [[nodiscard]] const TimeGrid& grid() const { return core().grid(); }
};

/// Initial displacement profile of the shear layer, per component.
struct InitialState
{
    SpaceField normal{[](double) { return 0.0; }};
    SpaceField tangential{[](double) { return 0.0; }};
};

inline ContactModel build_problem(ProblemKind kind, const Mesh1D& mesh, const Material& mat, const ContactLaw& law,
                                  const Loads& loads, const TimeGrid& grid, const InitialState& init = {})
{
    mesh.validate();
    const bool compatible = (kind == ProblemKind::P52ComplianceMemory && law.kind == ContactLaw::Kind::NormalComplianceMemory)
                            || (kind == ProblemKind::P54Signorini && law.kind == ContactLaw::Kind::Signorini)
                            || (kind == ProblemKind::P62FrictionSweeping && law.kind == ContactLaw::Kind::BilateralFriction);
    if (!compatible)
    {
        throw ConfigError(std::string("build_problem: contact law incompatible with ") + problem_name(kind));
    }
    ContactModel model{kind, mesh, mat, law, loads, nullptr, 1, 0, std::nullopt, 0.0, std::nullopt, std::nullopt, {}};
    if (law.kind != ContactLaw::Kind::Signorini)
    {
        const auto audit = audit_bound(law.F);
        if (!audit.nonnegative())
        {
            throw ConfigError("contact law: F must be nonnegative (min sampled value "
                              + std::to_string(audit.min_value) + ")");
        }
        if (!audit.lipschitz_ok(law.F.lip))
        {
            throw ConfigError("contact law: sampled Lipschitz ratio of F " + std::to_string(audit.max_lipschitz_ratio)
                              + " exceeds the declared L_F = " + std::to_string(law.F.lip));
        }
        if (!audit.vanishes_at_zero())
        {
            const std::string msg = "contact law: F(0) = " + std::to_string(audit.f_at_zero) + " != 0";
            if (kind == ProblemKind::P52ComplianceMemory)
            {
                throw ConfigError(msg + "; normal compliance requires F(0) = 0");
            }
            model.warnings.push_back(msg + "; the friction bound acts from the first instant of slip");
        }
    }

    if (kind == ProblemKind::P62FrictionSweeping)
    {
        model.components = 2;
        model.X = assemble_space(mesh, 2);
        const Index n = static_cast<Index>(mesh.elements());
        model.normal_dof = n - 1;
        model.tangential_dof = 2 * n - 1;
        model.c0 = trace_norm(*model.X, *model.tangential_dof);
        Vector u0(2 * n);
        for (Index i = 0; i < n; ++i)
        {
            const double xx = mesh.nodes[static_cast<std::size_t>(i) + 1];
            u0(i) = init.normal(xx);
            u0(n + i) = init.tangential(xx);
        }
        if (std::abs(init.normal(mesh.nodes.front())) > 0.0 || std::abs(init.tangential(mesh.nodes.front())) > 0.0)
        {
            throw ConfigError("initial state: u0 must vanish at the fixed end");
        }
        if (u0(model.normal_dof) != 0.0)
        {
            throw ConfigError("initial state: u0 must satisfy the bilateral contact condition u0_nu = 0");
        }
        const Matrix kb = detail::block_diagonal(detail::scalar_stiffness(mesh, [&](std::size_t e) { return mat.b(mesh.midpoint(e)); }), 2);
        const Matrix bmat = model.X->cholesky().solve(kb);
        LipschitzMap b{[bmat](const Vector& u) { return Vector(bmat * u); }, mat.max_b(mesh), "fem_elastic"};
        auto y = euclidean_space(1);
        InclusionSpec core{model.X,
                           y,
                           ConstraintCone::zero(model.X, {model.normal_dof}),
                           assemble_A(mesh, mat, model.X, 2),
                           HomogeneousFunctional::block_norm({{*model.tangential_dof}}, {1.0}),
                           detail::contact_memory("total_slip_friction", 2 * n, *model.tangential_dof, true, law.F,
                                                  model.c0),
                           assemble_relaxation(mesh, mat, model.X, grid, 2),
                           assemble_loads(mesh, loads, grid, model.X, 2),
                           model.c0,
                           problem_name(kind)};
        model.sweeping = SweepingSpec{std::move(core), std::move(b), std::move(u0), SweepingVariant::Cor41HdHd};
        return model;
    }

    model.X = assemble_space(mesh);
    const Index dof = model.X->dim() - 1;
    model.normal_dof = dof;
    model.c0 = trace_norm(*model.X, dof);
    auto y = euclidean_space(1);
    CorollaryPieces pieces{model.X,
                           y,
                           ConstraintCone::whole(model.X),
                           assemble_A(mesh, mat, model.X),
                           HomogeneousFunctional::zero(),
                           std::nullopt,
                           assemble_relaxation(mesh, mat, model.X, grid),
                           assemble_loads(mesh, loads, grid, model.X),
                           Vector(),
                           std::nullopt};
    if (kind == ProblemKind::P52ComplianceMemory)
    {
        pieces.j = HomogeneousFunctional::positive_part({dof}, {1.0});
        pieces.R = detail::contact_memory("normal_compliance_memory", model.X->dim(), dof, false, law.F, model.c0);
        pieces.alpha_j = model.c0;
        model.inclusion = build_corollary_spec(CorollaryVariant::Cor31HdHd, pieces);
    }
    else
    {
        pieces.cone = ConstraintCone::nonpositive(model.X, {dof});
        model.inclusion = build_corollary_spec(CorollaryVariant::Cor33EtaFree, pieces);
    }
    model.inclusion->label = problem_name(kind);
    return model;
}

/// Element stresses and contact quantities at every node time.
struct ContactFields
{
    Trajectory u;
    std::optional<Trajectory> v;
    /// stress[k][c][e]: time node k, component c, element e
    std::vector<std::vector<std::vector<double>>> stress;
    std::vector<double> sigma_nu;
    std::vector<double> sigma_tau;
    std::vector<double> u_nu;
    std::vector<double> v_tau;
    std::vector<double> memory_argument; ///< int u_nu^+ (P52) or int |v_tau| (P62)
    std::vector<double> bound;           ///< F(memory_argument)
    std::vector<double> equilibrium_residual; ///< max |residual| over the non-contact dofs
};

/// sigma = A eps(w) [+ b eps(u)] + int beta(t-s) c eps(w(s)) ds with w = u (static) or v (velocity);
/// reactions from the discrete equilibrium residual at the contact node.
inline ContactFields recover_stress(const ContactModel& model, const Trajectory& u,
                                    const std::optional<Trajectory>& v = std::nullopt)
{
    const Mesh1D& mesh = model.mesh;
    const Material& mat = model.material;
    const TimeGrid& g = u.grid();
    const Trajectory& w = v ? *v : u;
    const auto comps = static_cast<std::size_t>(model.components);
    const std::size_t ne = mesh.elements();
    const Trajectory f = model.core().f;

    ContactFields out{u, v, {}, {}, {}, {}, {}, {}, {}, {}};
    double memory = 0.0;
    const double half = 0.5 * g.dt();
    auto memory_rate = [&](std::size_t k) {
        return model.kind == ProblemKind::P62FrictionSweeping ? std::abs(w[k](*model.tangential_dof))
                                                              : std::max(0.0, u[k](model.normal_dof));
    };
    for (std::size_t k = 0; k < g.size(); ++k)
    {
        std::vector<std::vector<double>> s(comps, std::vector<double>(ne, 0.0));
        for (std::size_t c = 0; c < comps; ++c)
        {
            for (std::size_t e = 0; e < ne; ++e)
            {
                const auto ci = static_cast<Index>(c);
                double sigma = mat.stress_A(mesh, e, detail::strain(mesh, w[k], e, ci));
                if (v)
                {
                    sigma += mat.b(mesh.midpoint(e)) * detail::strain(mesh, u[k], e, ci);
                }
                double hist = 0.0;
                for (std::size_t j = 0; j <= k && k > 0; ++j)
                {
                    hist += trapezoid_weight(j, k, g.dt()) * mat.beta(g.node(k) - g.node(j))
                            * detail::strain(mesh, w[j], e, ci);
                }
                s[c][e] = sigma + mat.relax_weight(mesh.midpoint(e)) * hist;
            }
        }
        const Vector residual = detail::internal_force(mesh, s) - model.X->lower(f[k]);
        double eq = 0.0;
        for (Index i = 0; i < residual.size(); ++i)
        {
            if (i != model.normal_dof && (!model.tangential_dof || i != *model.tangential_dof))
            {
                eq = std::max(eq, std::abs(residual(i)));
            }
        }
        if (k > 0)
        {
            memory += half * (memory_rate(k - 1) + memory_rate(k));
        }
        out.stress.push_back(std::move(s));
        out.sigma_nu.push_back(residual(model.normal_dof));
        out.sigma_tau.push_back(model.tangential_dof ? residual(*model.tangential_dof) : 0.0);
        out.u_nu.push_back(u[k](model.normal_dof));
        out.v_tau.push_back(model.tangential_dof ? w[k](*model.tangential_dof) : 0.0);
        out.memory_argument.push_back(memory);
        out.bound.push_back(model.law.kind == ContactLaw::Kind::Signorini ? 0.0 : model.law.F(memory));
        out.equilibrium_residual.push_back(eq);
    }
    return out;
}

/// Per node-time residuals of the contact conditions.
struct ContactNodeReport
{
    double complementarity{0.0};    ///< |sigma_nu u_nu| (Signorini)
    double penetration{0.0};        ///< max(0, u_nu) (Signorini)
    double tension{0.0};            ///< max(0, sigma_nu) (normal problems)
    double compliance_excess{0.0};  ///< max(0, -sigma_nu - F) (P52)
    double case_split_gap{0.0};     ///< P52: |sigma_nu| if u_nu < 0, |-sigma_nu - F| if u_nu > 0
    double friction_excess{0.0};    ///< max(0, |sigma_tau| - F) (P62)
    double dissipation{0.0};        ///< -sigma_tau v_tau (P62)
    double slip_misalignment{0.0};  ///< |sigma_tau + F sign(v_tau)| when sliding (P62)
    bool sliding{false};
};

struct ContactReport
{
    std::vector<ContactNodeReport> nodes;
    double max_complementarity{0.0};
    double max_penetration{0.0};
    double max_tension{0.0};
    double max_compliance_excess{0.0};
    double max_case_split_gap{0.0};
    double max_friction_excess{0.0};
    double min_dissipation{0.0};
    double max_slip_misalignment{0.0};
    double max_equilibrium_residual{0.0};
    std::size_t sliding_nodes{0};
};

/// `slip_threshold` separates stick from slip in the tangential velocity.
inline ContactReport contact_diagnostics(const ContactModel& model, const ContactFields& fields,
                                         double slip_threshold = 1e-7)
{
    ContactReport r;
    const std::size_t n = fields.sigma_nu.size();
    r.min_dissipation = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k)
    {
        ContactNodeReport node;
        const double s = fields.sigma_nu[k], un = fields.u_nu[k], bound = fields.bound[k];
        switch (model.kind)
        {
        case ProblemKind::P54Signorini:
            node.complementarity = std::abs(s * un);
            node.penetration = std::max(0.0, un);
            node.tension = std::max(0.0, s);
            break;
        case ProblemKind::P52ComplianceMemory:
            node.tension = std::max(0.0, s);
            node.compliance_excess = std::max(0.0, -s - bound);
            if (un < -slip_threshold)
            {
                node.case_split_gap = std::abs(s);
            }
            else if (un > slip_threshold)
            {
                node.case_split_gap = std::abs(-s - bound);
            }
            break;
        case ProblemKind::P62FrictionSweeping:
        {
            const double st = fields.sigma_tau[k], vt = fields.v_tau[k];
            node.friction_excess = std::max(0.0, std::abs(st) - bound);
            node.dissipation = -st * vt;
            node.sliding = std::abs(vt) > slip_threshold;
            if (node.sliding)
            {
                node.slip_misalignment = std::abs(st + bound * (vt > 0.0 ? 1.0 : -1.0));
            }
            break;
        }
        }
        r.max_complementarity = std::max(r.max_complementarity, node.complementarity);
        r.max_penetration = std::max(r.max_penetration, node.penetration);
        r.max_tension = std::max(r.max_tension, node.tension);
        r.max_compliance_excess = std::max(r.max_compliance_excess, node.compliance_excess);
        r.max_case_split_gap = std::max(r.max_case_split_gap, node.case_split_gap);
        r.max_friction_excess = std::max(r.max_friction_excess, node.friction_excess);
        r.min_dissipation = std::min(r.min_dissipation, node.dissipation);
        r.max_slip_misalignment = std::max(r.max_slip_misalignment, node.slip_misalignment);
        r.max_equilibrium_residual = std::max(r.max_equilibrium_residual, fields.equilibrium_residual[k]);
        r.sliding_nodes += node.sliding ? 1U : 0U;
        r.nodes.push_back(node);
    }
    if (n == 0)
    {
        r.min_dissipation = 0.0;
    }
    return r;
}

struct ContactSolution
{
    Trajectory u;
    std::optional<Trajectory> v;
    InclusionSolution solver;
    ContactFields fields;
    ContactReport report;
};

inline ContactSolution solve_contact(const ContactModel& model, const InclusionOptions& opts = {})
{
    if (model.sweeping)
    {
        auto sol = solve_sweeping(*model.sweeping, opts);
        auto fields = recover_stress(model, sol.u, sol.v);
        auto report = contact_diagnostics(model, fields);
        return {std::move(sol.u), std::move(sol.v), std::move(sol.diagnostics), std::move(fields), std::move(report)};
    }
    auto sol = solve_inclusion(*model.inclusion, opts);
    auto fields = recover_stress(model, sol.u);
    auto report = contact_diagnostics(model, fields);
    Trajectory u = sol.u;
    return {std::move(u), std::nullopt, std::move(sol), std::move(fields), std::move(report)};
}

} // namespace hdsweep
