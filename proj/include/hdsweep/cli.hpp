#pragma once

#include "hdsweep/config.hpp"
#include "hdsweep/contact.hpp"
#include "hdsweep/oracle.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace hdsweep
{

enum ExitCode : int
{
    kExitOk = 0,
    kExitFailure = 1, ///< verification failed or an unexpected error
    kExitGate = 2,
    kExitNonConvergence = 3,
    kExitConfig = 4,
};

/// Command-line overrides applied on top of the [solver] section.
struct CliOptions
{
    std::string config;
    std::string out{"hdsweep_out"};
    std::optional<double> tol;
    std::optional<std::string> mode;
    std::optional<std::uint64_t> seed;
    bool force{false};
    std::optional<std::size_t> threads;
    std::size_t refinements{3};
    std::string refine{"time"}; ///< time | space
};

inline void apply_overrides(RunConfig& c, const CliOptions& o)
{
    if (o.tol)
    {
        if (!(*o.tol > 0.0) || !std::isfinite(*o.tol))
        {
            throw ConfigError("--tol must be a positive finite number");
        }
        c.tol = *o.tol;
    }
    if (o.mode)
    {
        if (*o.mode != "time_marching" && *o.mode != "global_picard")
        {
            throw ConfigError("--mode must be time_marching or global_picard");
        }
        c.mode = *o.mode;
    }
    if (o.seed)
    {
        c.seed = *o.seed;
    }
    if (o.threads)
    {
        if (*o.threads < 1)
        {
            throw ConfigError("--threads must be at least 1");
        }
        c.threads = *o.threads;
    }
    c.force = c.force || o.force;
}

inline InclusionOptions solver_options(const RunConfig& c)
{
    InclusionOptions o;
    o.tol = c.tol;
    o.mode = c.mode == "global_picard" ? SolveMode::GlobalPicard : SolveMode::TimeMarching;
    o.max_outer = c.max_outer;
    o.max_evi_iter = c.max_evi_iter;
    o.relaxation = c.relaxation;
    o.force = c.force;
    o.threads = c.threads;
    o.residual_budget = c.residual_budget;
    o.seed = c.seed;
    return o;
}

// --- problem assembly ----------------------------------------------------------

/// A contact model or an abstract inclusion built from a RunConfig.
struct Problem
{
    RunConfig cfg;
    std::optional<ContactModel> contact;
    std::optional<InclusionSpec> abstract;

    [[nodiscard]] const InclusionSpec& core() const { return contact ? contact->core() : *abstract; }
    [[nodiscard]] bool sweeping() const { return contact && contact->sweeping.has_value(); }
    [[nodiscard]] const HilbertSpace& X() const { return *core().X; }
    [[nodiscard]] const TimeGrid& grid() const { return core().grid(); }
    /// The inclusion the solver marches: the velocity lift for sweeping problems.
    [[nodiscard]] InclusionSpec solved_spec() const { return sweeping() ? lift_to_velocity(*contact->sweeping) : core(); }
    [[nodiscard]] std::string name() const { return contact ? problem_name(contact->kind) : "abstract_" + cfg.corollary; }
};

inline Mesh1D config_mesh(const RunConfig& c)
{
    Mesh1D m = c.nodes.empty() ? Mesh1D::uniform(c.length, c.elements) : Mesh1D{c.nodes, {}, true};
    m.traction_nodes = c.traction_nodes;
    m.validate();
    return m;
}

inline Material config_material(const RunConfig& c)
{
    Material mat;
    mat.a = [a = c.a, s = c.a_slope](double x) { return a + s * x; };
    mat.mu = c.mu;
    mat.b = [b = c.b](double) { return b; };
    mat.beta = [beta = c.beta, d = c.beta_decay](double t) { return beta * std::exp(-d * t); };
    mat.relax_weight = [w = c.relax_weight](double) { return w; };
    return mat;
}

inline BoundFunction config_bound(const RunConfig& c)
{
    if (c.F_form == "linear")
    {
        return BoundFunction::linear(c.F_k);
    }
    if (c.F_form == "constant")
    {
        return BoundFunction::constant(c.F0);
    }
    if (c.F_form == "saturating")
    {
        return BoundFunction::saturating(c.F_max, c.F_k);
    }
    if (c.F_form == "table")
    {
        return BoundFunction::table(c.F_table_r, c.F_table_f);
    }
    return BoundFunction::zero();
}

/// m_A implied by the configured coefficients, available before any assembly.
inline double configured_m_A(const RunConfig& c)
{
    return c.is_contact() ? config_material(c).m_A(config_mesh(c)) : c.a - c.mu;
}

namespace detail
{
inline InclusionSpec build_abstract(const RunConfig& c)
{
    const auto n = static_cast<Index>(c.dim);
    Vector diag = Vector::Ones(n);
    for (Index i = 0; i < static_cast<Index>(c.metric.size()); ++i)
    {
        diag(i) = c.metric[static_cast<std::size_t>(i)];
    }
    const SpacePtr x = make_space(diag.asDiagonal());

    MonotoneOperator a;
    a.m = c.a - c.mu;
    a.L = c.a + c.mu;
    a.name = "a u + mu sin u";
    a.apply = [aa = c.a, mu = c.mu](const Vector& u) { return Vector(aa * u + mu * u.array().sin().matrix()); };
    if (c.mu == 0.0)
    {
        a.linear = Matrix(c.a * Matrix::Identity(n, n));
    }

    std::vector<Index> cone_idx, j_idx;
    for (auto i : (c.cone_coords.empty() ? std::vector<std::size_t>{0} : c.cone_coords))
    {
        cone_idx.push_back(static_cast<Index>(i));
    }
    for (auto i : (c.j_coords.empty() ? std::vector<std::size_t>{0} : c.j_coords))
    {
        j_idx.push_back(static_cast<Index>(i));
    }
    const ConstraintCone cone = c.cone == "nonpositive" ? ConstraintCone::nonpositive(x, cone_idx)
                                : c.cone == "nonnegative" ? ConstraintCone::nonnegative(x, cone_idx)
                                : c.cone == "zero"        ? ConstraintCone::zero(x, cone_idx)
                                                          : ConstraintCone::whole(x);
    HomogeneousFunctional j = HomogeneousFunctional::zero();
    if (c.j == "positive_part")
    {
        j = HomogeneousFunctional::positive_part(j_idx, std::vector<double>(j_idx.size(), c.j_weight));
    }
    else if (c.j == "block_norm")
    {
        j = HomogeneousFunctional::block_norm({j_idx}, {c.j_weight});
    }
    const Index p = std::max<Index>(1, j.parameter_dim());
    const SpacePtr y = euclidean_space(p);

    // parameter map: eta = r_offset + r_value P u, P picks the functional coordinates
    Matrix pick = Matrix::Zero(p, n);
    for (Index b = 0; b < p; ++b)
    {
        pick(b, j_idx[static_cast<std::size_t>(std::min<Index>(b, static_cast<Index>(j_idx.size()) - 1))]) = 1.0;
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(pick.transpose() * pick, x->metric(), Eigen::EigenvaluesOnly);
    const double pick_norm = std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
    const HistoryOperator offset = HistoryOperator::constant(n, Vector::Constant(p, c.r_offset));
    std::optional<HistoryOperator> r;
    if (c.r_kind == "identity")
    {
        if (p != n)
        {
            throw ConfigError(c.source + ": material.r_kind: identity needs one functional parameter per dimension");
        }
        r = HistoryOperator::identity(n);
    }
    else if (c.r_kind == "volterra")
    {
        r = HistoryOperator::sum(offset, HistoryOperator::volterra(
                                             VolterraKernel::separable([v = c.r_value](double) { return v; }, pick)))
                .with_constants(0.0, std::abs(c.r_value) * pick_norm);
    }
    else if (c.r_kind == "pointwise")
    {
        r = HistoryOperator::sum(offset, HistoryOperator::pointwise(
                                             n, p, [v = c.r_value, pick](const Vector& u) { return Vector(v * pick * u); },
                                             std::abs(c.r_value) * pick_norm));
    }
    else
    {
        r = offset;
    }

    HistoryOperator s = HistoryOperator::zero(n, n);
    if (c.s_kind == "volterra")
    {
        s = HistoryOperator::volterra(VolterraKernel::scalar([v = c.s_value](double) { return v; }, n));
    }
    else if (c.s_kind == "pointwise")
    {
        s = HistoryOperator::pointwise_memory(n, std::abs(c.s_value), 0.0);
    }

    const TimeGrid grid(c.T, c.N);
    Vector dir(n);
    for (Index i = 0; i < n; ++i)
    {
        dir(i) = c.f[static_cast<std::size_t>(i)];
    }
    const Trajectory f = Trajectory::sample(grid, [dir, sch = c.f_schedule](double t) { return Vector(sch(t) * dir); });

    if (c.corollary == "none")
    {
        InclusionSpec spec{x, y, cone, a, j, *r, s, f, c.alpha_j, "abstract"};
        spec.validate();
        return spec;
    }
    const CorollaryVariant v = c.corollary == "cor31"   ? CorollaryVariant::Cor31HdHd
                               : c.corollary == "cor32" ? CorollaryVariant::Cor32RIdentity
                                                        : CorollaryVariant::Cor33EtaFree;
    const Vector eta0 = Vector::Constant(p, c.r_offset);
    return build_corollary_spec(v, CorollaryPieces{x, y, cone, a, j, r, s, f, eta0, c.alpha_j});
}
} // namespace detail

/// Throws ConfigError for inconsistent input and IneligibleOperator for corollary mismatches.
inline Problem build_from_config(const RunConfig& c)
{
    Problem p{c, std::nullopt, std::nullopt};
    if (!c.is_contact())
    {
        p.abstract = detail::build_abstract(c);
        return p;
    }
    const ProblemKind kind = c.problem == "p52"   ? ProblemKind::P52ComplianceMemory
                             : c.problem == "p54" ? ProblemKind::P54Signorini
                                                  : ProblemKind::P62FrictionSweeping;
    const ContactLaw::Kind law = c.law == "normal_compliance_memory" ? ContactLaw::Kind::NormalComplianceMemory
                                 : c.law == "signorini"              ? ContactLaw::Kind::Signorini
                                                                     : ContactLaw::Kind::BilateralFriction;
    const Mesh1D mesh = config_mesh(c);
    Loads loads;
    loads.f0_normal = [s = c.f0_normal](double, double t) { return s(t); };
    loads.f0_tangential = [s = c.f0_tangential](double, double t) { return s(t); };
    loads.f2_normal = [s = c.f2_normal](double t) { return s(t); };
    loads.f2_tangential = [s = c.f2_tangential](double t) { return s(t); };
    InitialState init;
    const double len = mesh.length();
    init.tangential = [u0 = c.u0_tangential, len](double x) { return u0 * x / len; };
    p.contact = build_problem(kind, mesh, config_material(c), ContactLaw{law, config_bound(c)}, loads, TimeGrid(c.T, c.N),
                              init);
    return p;
}

// --- solving -------------------------------------------------------------------

struct RunResult
{
    Trajectory u;
    std::optional<Trajectory> v;
    InclusionSolution solver;
    std::optional<ContactFields> fields;
    std::optional<ContactReport> report;
};

inline RunResult solve_problem(const Problem& p, const InclusionOptions& o)
{
    if (p.contact)
    {
        auto s = solve_contact(*p.contact, o);
        return {std::move(s.u), std::move(s.v), std::move(s.solver), std::move(s.fields), std::move(s.report)};
    }
    auto s = solve_inclusion(*p.abstract, o);
    Trajectory u = s.u;
    return {std::move(u), std::nullopt, std::move(s), std::nullopt, std::nullopt};
}

// --- solution series -----------------------------------------------------------

/// Columns: t, u_0..u_{n-1}, v_0..v_{n-1} (sweeping only), sigma_nu and sigma_tau
/// (contact only), residual, iterations. Contact dofs are ordered by free node, normal
/// block first.
inline std::vector<std::string> solution_header(const Problem& p)
{
    std::vector<std::string> h{"t"};
    const Index n = p.X().dim();
    for (Index i = 0; i < n; ++i)
    {
        h.push_back(fmt::format("u_{}", i));
    }
    if (p.sweeping())
    {
        for (Index i = 0; i < n; ++i)
        {
            h.push_back(fmt::format("v_{}", i));
        }
    }
    if (p.contact)
    {
        h.emplace_back("sigma_nu");
        h.emplace_back("sigma_tau");
    }
    h.emplace_back("residual");
    h.emplace_back("iterations");
    return h;
}

inline void write_solution(std::ostream& os, const Problem& p, const RunResult& r)
{
    const auto header = solution_header(p);
    for (std::size_t i = 0; i < header.size(); ++i)
    {
        os << (i ? "," : "") << header[i];
    }
    os << '\n';
    const TimeGrid& g = p.grid();
    for (std::size_t k = 0; k < g.size(); ++k)
    {
        std::string row = fmt::format("{:.17g}", g.node(k));
        for (Index i = 0; i < r.u.dim(); ++i)
        {
            row += fmt::format(",{:.17g}", r.u[k](i));
        }
        if (r.v)
        {
            for (Index i = 0; i < r.v->dim(); ++i)
            {
                row += fmt::format(",{:.17g}", (*r.v)[k](i));
            }
        }
        if (r.fields)
        {
            row += fmt::format(",{:.17g},{:.17g}", r.fields->sigma_nu[k], r.fields->sigma_tau[k]);
        }
        const double res = k < r.solver.per_step_residuals.size() ? r.solver.per_step_residuals[k] : 0.0;
        const std::size_t it = k < r.solver.per_step_iterations.size() ? r.solver.per_step_iterations[k] : 0;
        row += fmt::format(",{:.17g},{}\n", res, it);
        os << row;
    }
}

struct SolutionTable
{
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    [[nodiscard]] std::size_t column(const std::string& name) const
    {
        for (std::size_t i = 0; i < header.size(); ++i)
        {
            if (header[i] == name)
            {
                return i;
            }
        }
        throw ContractViolation("solution file: missing column '" + name + "'");
    }
};

inline SolutionTable read_solution(std::istream& is)
{
    SolutionTable t;
    std::string line;
    std::size_t lineno = 0;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cur;
        std::istringstream ss(s);
        while (std::getline(ss, cur, ','))
        {
            out.push_back(detail::trim(cur));
        }
        return out;
    };
    while (std::getline(is, line))
    {
        ++lineno;
        if (detail::trim(line).empty())
        {
            continue;
        }
        if (t.header.empty())
        {
            t.header = split(line);
            continue;
        }
        const auto cells = split(line);
        if (cells.size() != t.header.size())
        {
            throw ContractViolation("solution file line " + std::to_string(lineno) + ": expected "
                                    + std::to_string(t.header.size()) + " fields, got " + std::to_string(cells.size()));
        }
        std::vector<double> row;
        for (const auto& c : cells)
        {
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
            if (ec != std::errc() || ptr != c.data() + c.size())
            {
                throw ContractViolation("solution file line " + std::to_string(lineno) + ": bad number '" + c + "'");
            }
            row.push_back(v);
        }
        t.rows.push_back(std::move(row));
    }
    if (t.header.empty())
    {
        throw ContractViolation("solution file: empty");
    }
    return t;
}

// --- self-audit ----------------------------------------------------------------

/// Residuals recomputed from a written solution series.
struct AuditReport
{
    std::size_t rows{0};
    double max_time_mismatch{0.0};
    double max_vi_residual{0.0};
    double max_membership_residual{0.0};
    std::size_t lemma31_disagreements{0};
    double max_sigma_mismatch{0.0};
    double max_state_mismatch{0.0}; ///< |u - (u0 + int v)|, sweeping only
    std::optional<double> fd_derivative;
    std::optional<ContactReport> contact;
    std::optional<Trajectory> u;
    std::optional<Trajectory> v;
};

inline AuditReport audit_solution(const Problem& p, const SolutionTable& table, std::size_t budget, std::uint64_t seed)
{
    const auto header = solution_header(p);
    if (table.header != header)
    {
        throw ContractViolation("solution file: header does not match the configured problem");
    }
    const TimeGrid& g = p.grid();
    if (table.rows.size() != g.size())
    {
        throw ContractViolation("solution file: " + std::to_string(table.rows.size()) + " rows for "
                                + std::to_string(g.size()) + " time nodes");
    }
    const Index n = p.X().dim();
    AuditReport a;
    a.rows = table.rows.size();
    std::vector<Vector> us, vs;
    const std::size_t u0c = table.column("u_0");
    for (std::size_t k = 0; k < g.size(); ++k)
    {
        const auto& row = table.rows[k];
        a.max_time_mismatch = std::max(a.max_time_mismatch, std::abs(row[0] - g.node(k)));
        Vector u(n), v(n);
        for (Index i = 0; i < n; ++i)
        {
            u(i) = row[u0c + static_cast<std::size_t>(i)];
            if (p.sweeping())
            {
                v(i) = row[u0c + static_cast<std::size_t>(n + i)];
            }
        }
        us.push_back(u);
        vs.push_back(v);
    }
    a.u = Trajectory(g, us);
    if (p.sweeping())
    {
        a.v = Trajectory(g, vs);
    }

    const InclusionSpec s = p.solved_spec();
    const Trajectory& w = p.sweeping() ? *a.v : *a.u;
    const Trajectory eta = s.R.apply(w);
    const Trajectory xi = s.S.apply(w);
    const DirectionSampler sampler(budget, seed);
    for (std::size_t k = 0; k < g.size(); ++k)
    {
        const Vector z = s.A(w[k]) + xi[k];
        const auto c = lemma31_report(w[k], z, eta[k], s.f[k], s.cone, s.j, sampler);
        a.max_vi_residual = std::max(a.max_vi_residual, c.vi_residual);
        a.max_membership_residual = std::max(a.max_membership_residual, c.membership_residual);
        a.lemma31_disagreements += c.agree() ? 0U : 1U;
    }
    if (p.sweeping())
    {
        const Trajectory integ = integrate_velocity(*a.v, p.contact->sweeping->u0);
        a.max_state_mismatch = sup_abs_distance(integ, *a.u);
        if (g.size() >= 3)
        {
            a.fd_derivative = fd_derivative_check(*a.u, *a.v);
        }
    }
    if (p.contact)
    {
        const auto fields = recover_stress(*p.contact, *a.u, a.v);
        const std::size_t sn = table.column("sigma_nu");
        const std::size_t st = table.column("sigma_tau");
        for (std::size_t k = 0; k < g.size(); ++k)
        {
            a.max_sigma_mismatch = std::max({a.max_sigma_mismatch, std::abs(fields.sigma_nu[k] - table.rows[k][sn]),
                                             std::abs(fields.sigma_tau[k] - table.rows[k][st])});
        }
        a.contact = contact_diagnostics(*p.contact, fields);
    }
    return a;
}

// --- assumption audit ----------------------------------------------------------

struct CheckLine
{
    std::string name;
    bool pass{true};
    std::string detail;
};

struct CheckReport
{
    std::vector<CheckLine> lines;
    SmallnessReport smallness;
    std::vector<std::string> warnings;

    [[nodiscard]] bool pass() const
    {
        return std::all_of(lines.begin(), lines.end(), [](const CheckLine& l) { return l.pass; });
    }
};

inline CheckReport assumption_audit(const Problem& p)
{
    CheckReport r;
    const InclusionSpec s = p.solved_spec();
    const InclusionSpec& c = p.core();
    const auto oa = audit_operator(c.A, *c.X, 1000, p.cfg.seed);
    r.lines.push_back({"assumption (A)", oa.ok(),
                       fmt::format("declared m_A = {:.6g}, L_A = {:.6g}; sampled monotone ratio >= {:.6g}, "
                                   "Lipschitz ratio <= {:.6g}",
                                   c.A.m, c.A.L, oa.min_monotone_ratio, oa.max_lipschitz_ratio)});
    r.lines.push_back({"functional j", true,
                       fmt::format("kind {}, alpha_j = {:.6g} ({})", HomogeneousFunctional::kind_name(c.j.kind()),
                                   s.coupling(), s.alpha_j ? "declared" : "computed")});
    r.lines.push_back({"operator R", true,
                       fmt::format("{}: l_R = {:.6g}, L_R = {:.6g}", s.R.kind(), s.R.declared_l(), s.R.declared_L())});
    r.lines.push_back({"operator S", true,
                       fmt::format("{}: l_S = {:.6g}, L_S = {:.6g}", s.S.kind(), s.S.declared_l(), s.S.declared_L())});
    if (p.contact && p.contact->law.kind != ContactLaw::Kind::Signorini)
    {
        const auto& f = p.contact->law.F;
        const auto ba = audit_bound(f);
        r.lines.push_back({"bound F", ba.nonnegative() && ba.max_lipschitz_ratio <= f.lip + 1e-9 * std::max(1.0, f.lip),
                           fmt::format("{}: F(0) = {:.6g}, min sampled {:.6g}, Lipschitz ratio {:.6g} <= {:.6g}", f.form,
                                       ba.f_at_zero, ba.min_value, ba.max_lipschitz_ratio, f.lip)});
    }
    if (p.sweeping())
    {
        const auto& b = p.contact->sweeping->B;
        const double measured = audit_lipschitz(b, *c.X);
        r.lines.push_back({"assumption (B)", measured <= b.L + 1e-9 * std::max(1.0, b.L),
                           fmt::format("declared L_B = {:.6g}, sampled ratio {:.6g}", b.L, measured)});
    }
    r.smallness = check_smallness(s, true, p.cfg.seed);
    r.lines.push_back({"smallness", r.smallness.pass,
                       fmt::format("(alpha_j + 1)(l_R + l_S) = ({:.6g} + 1)({:.6g} + {:.6g}) = {:.6g} {} m_A = {:.6g}",
                                   r.smallness.alpha_j, r.smallness.l_R, r.smallness.l_S, r.smallness.lhs,
                                   r.smallness.pass ? "<" : ">=", r.smallness.m_A)});
    r.warnings = r.smallness.warnings;
    if (p.contact)
    {
        r.warnings.insert(r.warnings.end(), p.contact->warnings.begin(), p.contact->warnings.end());
    }
    return r;
}

// --- diagnostics document ------------------------------------------------------

using Json = nlohmann::ordered_json;

inline Json smallness_json(const SmallnessReport& s)
{
    return Json{{"alpha_j", s.alpha_j}, {"l_R", s.l_R},   {"l_S", s.l_S},
                {"m_A", s.m_A},         {"lhs", s.lhs},   {"pass", s.pass},
                {"warnings", s.warnings}};
}

inline Json contact_json(const ContactReport& r)
{
    return Json{{"max_complementarity", r.max_complementarity},
                {"max_penetration", r.max_penetration},
                {"max_tension", r.max_tension},
                {"max_compliance_excess", r.max_compliance_excess},
                {"max_case_split_gap", r.max_case_split_gap},
                {"max_friction_excess", r.max_friction_excess},
                {"min_dissipation", r.min_dissipation},
                {"max_slip_misalignment", r.max_slip_misalignment},
                {"max_equilibrium_residual", r.max_equilibrium_residual},
                {"sliding_nodes", r.sliding_nodes}};
}

inline Json audit_json(const AuditReport& a)
{
    Json j{{"source", "solution.csv"},
           {"rows", a.rows},
           {"max_time_mismatch", a.max_time_mismatch},
           {"max_vi_residual", a.max_vi_residual},
           {"max_membership_residual", a.max_membership_residual},
           {"equivalence_disagreements", a.lemma31_disagreements},
           {"max_sigma_mismatch", a.max_sigma_mismatch},
           {"max_state_mismatch", a.max_state_mismatch}};
    if (a.fd_derivative)
    {
        j["fd_derivative_residual"] = *a.fd_derivative;
    }
    if (a.contact)
    {
        j["contact"] = contact_json(*a.contact);
    }
    return j;
}

inline Json header_json(const Problem& p)
{
    const InclusionSpec& c = p.core();
    Json constants{{"m_A", c.A.m},
                   {"L_A", c.A.L},
                   {"alpha_j", p.solved_spec().coupling()},
                   {"l_R", c.R.declared_l()},
                   {"L_R", c.R.declared_L()},
                   {"l_S", c.S.declared_l()},
                   {"L_S", c.S.declared_L()}};
    if (p.contact)
    {
        constants["c0"] = p.contact->c0;
    }
    if (p.sweeping())
    {
        constants["L_B"] = p.contact->sweeping->B.L;
    }
    return Json{{"problem", p.name()},
                {"dim", p.X().dim()},
                {"T", p.grid().horizon()},
                {"N", p.grid().steps()},
                {"tol", p.cfg.tol},
                {"mode", p.cfg.mode},
                {"seed", p.cfg.seed},
                {"force", p.cfg.force},
                {"constants", constants}};
}

// --- commands ------------------------------------------------------------------

namespace detail
{
inline std::optional<int> assumption_A_precheck(const RunConfig& c, std::ostream& out)
{
    const double m = configured_m_A(c);
    if (!(m > 0.0))
    {
        out << fmt::format("[fail] assumption (A): configured m_A = {:.6g} is not positive; the operator is not "
                           "strongly monotone\n",
                           m);
        return kExitGate;
    }
    return std::nullopt;
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
    {
        throw ConfigError("cannot write " + path.string());
    }
    os << text;
}

template <class Fn>
int guarded(std::ostream& err, Fn&& fn)
{
    try
    {
        return fn();
    }
    catch (const ConfigError& e)
    {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    catch (const IneligibleOperator& e)
    {
        err << "gate failure: " << e.what() << '\n';
        return kExitGate;
    }
    catch (const GateFailure& e)
    {
        err << "gate failure: " << e.what() << '\n';
        return kExitGate;
    }
    catch (const NonConvergence& e)
    {
        err << "non-convergence: " << e.what() << '\n';
        return kExitNonConvergence;
    }
    catch (const ContractViolation& e)
    {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    catch (const std::exception& e)
    {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

inline RunConfig load_with_overrides(const CliOptions& o)
{
    RunConfig c = load_config(o.config);
    apply_overrides(c, o);
    return c;
}
} // namespace detail

/// Prints the assumption audit; exit 0 iff every gate passes.
inline int cmd_check(const CliOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    return detail::guarded(err, [&] {
        const RunConfig c = detail::load_with_overrides(o);
        out << "config: " << c.source << '\n';
        if (auto code = detail::assumption_A_precheck(c, out))
        {
            out << "result: gates fail\n";
            return *code;
        }
        Problem p;
        try
        {
            p = build_from_config(c);
        }
        catch (const IneligibleOperator& e)
        {
            out << "[fail] corollary eligibility: " << e.what() << '\n' << "result: gates fail\n";
            return static_cast<int>(kExitGate);
        }
        out << fmt::format("problem: {} (dim {}, N {}, T {:.6g})\n", p.name(), p.X().dim(), p.grid().steps(),
                           p.grid().horizon());
        const CheckReport r = assumption_audit(p);
        for (const auto& l : r.lines)
        {
            out << (l.pass ? "[pass] " : "[fail] ") << l.name << ": " << l.detail << '\n';
        }
        for (const auto& w : r.warnings)
        {
            out << "[warn] " << w << '\n';
        }
        out << (r.pass() ? "result: all gates pass\n" : "result: gates fail\n");
        return static_cast<int>(r.pass() ? kExitOk : kExitGate);
    });
}

/// Writes <out>/solution.csv and <out>/diagnostics.json; the audit block of the
/// diagnostics is recomputed from the written series.
inline int cmd_run(const CliOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    return detail::guarded(err, [&] {
        const RunConfig c = detail::load_with_overrides(o);
        if (auto code = detail::assumption_A_precheck(c, err))
        {
            return *code;
        }
        const Problem p = build_from_config(c);
        const std::filesystem::path dir(o.out);
        std::filesystem::create_directories(dir);
        Json diag = header_json(p);
        const SmallnessReport gate = check_smallness(p.solved_spec(), true, c.seed);
        diag["smallness"] = smallness_json(gate);
        diag["forced"] = !gate.pass && c.force;
        std::optional<RunResult> solved;
        try
        {
            solved = solve_problem(p, solver_options(c));
        }
        catch (const NonConvergence& e)
        {
            diag["status"] = "non_convergence";
            diag["message"] = e.what();
            diag["residual"] = e.residual();
            if (e.node() != NonConvergence::npos)
            {
                diag["node"] = e.node();
            }
            detail::write_text(dir / "diagnostics.json", diag.dump(2) + "\n");
            throw;
        }
        const RunResult& r = *solved;
        std::ostringstream csv;
        write_solution(csv, p, r);
        detail::write_text(dir / "solution.csv", csv.str());

        std::ifstream back(dir / "solution.csv", std::ios::binary);
        const AuditReport audit = audit_solution(p, read_solution(back), c.residual_budget, c.seed);
        std::size_t total_iter = 0;
        double max_res = 0.0;
        for (auto it : r.solver.per_step_iterations)
        {
            total_iter += it;
        }
        for (auto res : r.solver.per_step_residuals)
        {
            max_res = std::max(max_res, res);
        }
        diag["status"] = "ok";
        diag["counters"] = Json{{"sweeps", r.solver.sweeps},
                                {"last_change", r.solver.last_change},
                                {"total_inner_iterations", total_iter},
                                {"max_step_residual", max_res}};
        diag["warnings"] = p.contact ? p.contact->warnings : std::vector<std::string>{};
        if (r.report)
        {
            diag["contact"] = contact_json(*r.report);
        }
        diag["audit"] = audit_json(audit);
        detail::write_text(dir / "diagnostics.json", diag.dump(2) + "\n");
        out << fmt::format("{}: {} nodes written to {}; max VI residual {:.3e}, forced {}\n", p.name(), p.grid().size(),
                           (dir / "solution.csv").string(), audit.max_vi_residual, diag["forced"].get<bool>());
        return static_cast<int>(kExitOk);
    });
}

/// One row of the refinement study.
struct ConvergenceRow
{
    std::size_t level{0};
    std::size_t steps{0};
    std::size_t elements{0};
    double difference{0.0};          ///< sup-node difference to the next finer level
    std::optional<double> order;     ///< log2 of successive difference ratios
};

namespace detail
{
// Nodal values of the free dofs at every coarse node, for comparison across meshes.
inline double space_difference(const Problem& coarse, const Trajectory& uc, const Problem& fine, const Trajectory& uf)
{
    const Index comps = coarse.contact->components;
    const Index nc = uc.dim() / comps;
    const Index nf = uf.dim() / comps;
    double d = 0.0;
    for (std::size_t k = 0; k < uc.size(); ++k)
    {
        for (Index c = 0; c < comps; ++c)
        {
            for (Index i = 0; i < nc; ++i)
            {
                d = std::max(d, std::abs(uc[k](c * nc + i) - uf[k](c * nf + 2 * i + 1)));
            }
        }
    }
    (void)fine;
    return d;
}
} // namespace detail

/// Successive refinements in dt (refine = time) or h (refine = space, contact only).
inline std::vector<ConvergenceRow> convergence_study(const RunConfig& base, std::size_t refinements,
                                                     const std::string& refine)
{
    if (refinements < 2)
    {
        throw ConfigError("convergence: need at least 2 refinements");
    }
    if (refine != "time" && refine != "space")
    {
        throw ConfigError("convergence: --refine must be time or space");
    }
    if (refine == "space" && !base.is_contact())
    {
        throw ConfigError("convergence: space refinement needs a contact problem");
    }
    const std::size_t levels = refinements + 1;
    std::vector<RunConfig> cfgs(levels, base);
    for (std::size_t i = 0; i < levels; ++i)
    {
        auto& c = cfgs[i];
        const std::size_t f = std::size_t{1} << i;
        if (refine == "time")
        {
            c.N = base.N * f;
        }
        else
        {
            c.elements = base.elements * f;
            if (!base.nodes.empty())
            {
                c.nodes.clear();
                for (std::size_t e = 0; e + 1 < base.nodes.size(); ++e)
                {
                    const double h = (base.nodes[e + 1] - base.nodes[e]) / static_cast<double>(f);
                    for (std::size_t s = 0; s < f; ++s)
                    {
                        c.nodes.push_back(base.nodes[e] + h * static_cast<double>(s));
                    }
                }
                c.nodes.push_back(base.nodes.back());
            }
            for (auto& t : c.traction_nodes)
            {
                t = base.traction_nodes[static_cast<std::size_t>(&t - c.traction_nodes.data())] * f;
            }
        }
        c.threads = 1;
    }
    std::vector<std::optional<Problem>> probs(levels);
    std::vector<std::optional<Trajectory>> sols(levels);
    detail::parallel_for(levels, base.threads, [&](std::size_t i) {
        probs[i] = build_from_config(cfgs[i]);
        sols[i] = solve_problem(*probs[i], solver_options(cfgs[i])).u;
    });
    std::vector<ConvergenceRow> rows;
    for (std::size_t i = 0; i + 1 < levels; ++i)
    {
        ConvergenceRow row{i, cfgs[i].N, cfgs[i].is_contact() ? probs[i]->contact->mesh.elements() : 0, 0.0, std::nullopt};
        const Trajectory& a = *sols[i];
        const Trajectory& b = *sols[i + 1];
        if (refine == "time")
        {
            for (std::size_t k = 0; k < a.size(); ++k)
            {
                row.difference = std::max(row.difference, probs[i]->X().norm(a[k] - b[2 * k]));
            }
        }
        else
        {
            row.difference = detail::space_difference(*probs[i], a, *probs[i + 1], b);
        }
        if (i > 0 && row.difference > 0.0 && rows.back().difference > 0.0)
        {
            row.order = std::log2(rows.back().difference / row.difference);
        }
        rows.push_back(row);
    }
    return rows;
}

inline int cmd_convergence(const CliOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    return detail::guarded(err, [&] {
        const RunConfig c = detail::load_with_overrides(o);
        if (auto code = detail::assumption_A_precheck(c, err))
        {
            return *code;
        }
        const auto rows = convergence_study(c, o.refinements, o.refine);
        std::string table = "level,N,elements,sup_difference,order\n";
        out << fmt::format("{:>5} {:>6} {:>8} {:>14} {:>8}\n", "level", "N", "elements", "sup_diff", "order");
        for (const auto& r : rows)
        {
            const std::string order = r.order ? fmt::format("{:.4f}", *r.order) : std::string("-");
            out << fmt::format("{:>5} {:>6} {:>8} {:>14.6e} {:>8}\n", r.level, r.steps, r.elements, r.difference, order);
            table += fmt::format("{},{},{},{:.17g},{}\n", r.level, r.steps, r.elements, r.difference,
                                 r.order ? fmt::format("{:.17g}", *r.order) : std::string());
        }
        const std::filesystem::path dir(o.out);
        std::filesystem::create_directories(dir);
        detail::write_text(dir / ("convergence_" + o.refine + ".csv"), table);
        return static_cast<int>(kExitOk);
    });
}

/// Verification thresholds.
struct VerifyLimits
{
    std::size_t max_dim{64};
    std::size_t max_steps{256};
    double residual{1e-6};        ///< VI and membership residuals
    double sigma_mismatch{1e-9};
    double state_mismatch{1e-12};
    double oracle_gap{1e-3};
    double contact_excess{1e-8};
    double dissipation{-1e-10};
};

/// Re-checks <out>/solution.csv (or a fresh in-memory solve when absent): VI and
/// normal-cone membership residuals, stored stresses, the velocity relation, contact laws and the grid oracle.
inline int cmd_verify(const CliOptions& o, std::ostream& out = std::cout, std::ostream& err = std::cerr,
                      const VerifyLimits& lim = {})
{
    return detail::guarded(err, [&] {
        const RunConfig c = detail::load_with_overrides(o);
        if (auto code = detail::assumption_A_precheck(c, err))
        {
            return *code;
        }
        const Problem p = build_from_config(c);
        if (static_cast<std::size_t>(p.X().dim()) > lim.max_dim || p.grid().steps() > lim.max_steps)
        {
            err << fmt::format("verify: instance of dim {} with N {} exceeds the caps (dim <= {}, N <= {}); reduce "
                               "mesh.elements or time.N, or use run and its self-audit\n",
                               p.X().dim(), p.grid().steps(), lim.max_dim, lim.max_steps);
            return static_cast<int>(kExitConfig);
        }
        const std::filesystem::path file = std::filesystem::path(o.out) / "solution.csv";
        std::string text;
        if (std::filesystem::exists(file))
        {
            std::ifstream in(file, std::ios::binary);
            std::stringstream buf;
            buf << in.rdbuf();
            text = buf.str();
            out << "solution: " << file.string() << '\n';
        }
        else
        {
            std::ostringstream csv;
            write_solution(csv, p, solve_problem(p, solver_options(c)));
            text = csv.str();
            out << "solution: fresh solve (no " << file.string() << ")\n";
        }
        bool ok = true;
        auto line = [&](const std::string& name, bool pass, const std::string& detail) {
            ok = ok && pass;
            out << (pass ? "[pass] " : "[fail] ") << name << ": " << detail << '\n';
        };
        AuditReport a;
        try
        {
            std::istringstream in(text);
            a = audit_solution(p, read_solution(in), c.residual_budget, c.seed);
        }
        catch (const ContractViolation& e)
        {
            line("solution file", false, e.what());
            out << "result: verification fails\n";
            return static_cast<int>(kExitFailure);
        }
        line("time grid", a.max_time_mismatch <= 1e-12, fmt::format("max |t - t_k| = {:.3e}", a.max_time_mismatch));
        line("variational inequality", a.max_vi_residual <= lim.residual,
             fmt::format("max VI residual {:.3e} <= {:.1e}", a.max_vi_residual, lim.residual));
        line("normal-cone inclusion", a.max_membership_residual <= lim.residual,
             fmt::format("max membership residual {:.3e} <= {:.1e}", a.max_membership_residual, lim.residual));
        line("equivalence agreement", a.lemma31_disagreements == 0,
             fmt::format("{} disagreeing nodes", a.lemma31_disagreements));
        if (p.sweeping())
        {
            line("velocity relation", a.max_state_mismatch <= lim.state_mismatch * (1.0 + a.u->samples().back().norm()),
                 fmt::format("max |u - (u0 + int v)| = {:.3e}; central-difference residual {:.3e}", a.max_state_mismatch,
                             a.fd_derivative.value_or(0.0)));
        }
        if (a.contact)
        {
            const auto& r = *a.contact;
            line("stored stresses", a.max_sigma_mismatch <= lim.sigma_mismatch,
                 fmt::format("max |sigma - recomputed| = {:.3e}", a.max_sigma_mismatch));
            switch (p.contact->kind)
            {
            case ProblemKind::P54Signorini:
                line("signorini", std::max({r.max_complementarity, r.max_penetration, r.max_tension}) <= lim.contact_excess,
                     fmt::format("complementarity {:.3e}, penetration {:.3e}, tension {:.3e}", r.max_complementarity,
                                 r.max_penetration, r.max_tension));
                break;
            case ProblemKind::P52ComplianceMemory:
                line("compliance bound", std::max(r.max_compliance_excess, r.max_tension) <= lim.contact_excess,
                     fmt::format("excess {:.3e}, tension {:.3e}", r.max_compliance_excess, r.max_tension));
                break;
            case ProblemKind::P62FrictionSweeping:
                line("friction bound", r.max_friction_excess <= lim.contact_excess,
                     fmt::format("max (|sigma_tau| - F)^+ = {:.3e}", r.max_friction_excess));
                line("dissipation", r.min_dissipation >= lim.dissipation,
                     fmt::format("min -sigma_tau v_tau = {:.3e}", r.min_dissipation));
                break;
            }
        }
        if (p.X().dim() <= 2 && p.grid().steps() <= 16)
        {
            GridSearchConfig gc;
            gc.points = 81;
            const auto ref = brute_inclusion(p.solved_spec(), gc);
            const Trajectory& w = p.sweeping() ? *a.v : *a.u;
            const double gap = sup_distance(p.X(), ref.u, w);
            line("grid oracle", gap <= lim.oracle_gap && !ref.inconclusive,
                 fmt::format("gap {:.3e} <= {:.1e}{}", gap, lim.oracle_gap, ref.inconclusive ? " (inconclusive)" : ""));
        }
        else
        {
            out << "[skip] grid oracle: needs dim <= 2 and N <= 16\n";
        }
        out << (ok ? "result: verification passes\n" : "result: verification fails\n");
        return static_cast<int>(ok ? kExitOk : kExitFailure);
    });
}

} // namespace hdsweep
