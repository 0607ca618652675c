#pragma once

#include "hdsweep/error.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace hdsweep
{

/// Time profile value * shape(t): constant 1, ramp t, linear 1 + rate t, sine sin(rate t),
/// kink max(0, t - rate).
struct Schedule
{
    double value{0.0};
    std::string shape{"constant"};
    double rate{0.0};

    [[nodiscard]] double operator()(double t) const
    {
        if (shape == "ramp")
        {
            return value * t;
        }
        if (shape == "linear")
        {
            return value * (1.0 + rate * t);
        }
        if (shape == "sine")
        {
            return value * std::sin(rate * t);
        }
        if (shape == "kink")
        {
            return value * std::max(0.0, t - rate);
        }
        return value;
    }
};

/// Flat sectioned run configuration. Every physical constant is finite and N >= 1.
struct RunConfig
{
    std::string source{"<memory>"};
    std::string problem{"p54"}; ///< p52 | p54 | p62 | abstract

    // [mesh]
    double length{1.0};
    std::size_t elements{4};
    std::vector<double> nodes;                ///< explicit node list, overrides length/elements
    std::vector<std::size_t> traction_nodes;
    std::size_t dim{1};                       ///< abstract problems
    std::vector<double> metric;               ///< abstract diagonal metric, default identity

    // [material]
    double a{1.0};
    double a_slope{0.0}; ///< a(x) = a + a_slope x
    double mu{0.0};
    double b{0.0};
    double beta{0.0};
    double beta_decay{0.0}; ///< beta(t) = beta exp(-beta_decay t)
    double relax_weight{1.0};
    std::string r_kind{"zero"}; ///< abstract R: zero | identity | volterra | pointwise
    double r_value{0.0};
    double r_offset{1.0};       ///< abstract parameter eta = r_offset + R u
    std::string s_kind{"zero"}; ///< abstract S: zero | volterra | pointwise
    double s_value{0.0};

    // [contact]
    std::string law;                ///< defaults from the problem kind
    std::string F_form{"zero"};     ///< zero | linear | constant | saturating | table
    double F_k{0.0};
    double F_max{0.0};
    double F0{0.0};
    std::vector<double> F_table_r;
    std::vector<double> F_table_f;
    std::string cone{"whole"};      ///< abstract: whole | nonpositive | nonnegative | zero
    std::vector<std::size_t> cone_coords;
    std::string j{"zero"};          ///< abstract: zero | positive_part | block_norm
    double j_weight{0.0};
    std::vector<std::size_t> j_coords;
    std::optional<double> alpha_j;  ///< declared coupling constant
    std::string corollary{"none"};  ///< abstract: none | cor31 | cor32 | cor33

    // [loads]
    Schedule f0_normal;
    Schedule f0_tangential;
    Schedule f2_normal;
    Schedule f2_tangential;
    double u0_tangential{0.0};      ///< P62 initial tangential profile u0 x / length
    std::vector<double> f;          ///< abstract load direction, times f_schedule
    Schedule f_schedule{1.0, "constant", 0.0};

    // [time]
    double T{1.0};
    std::size_t N{8};

    // [solver]
    double tol{1e-10};
    std::string mode{"time_marching"};
    std::size_t max_outer{500};
    std::size_t max_evi_iter{200000};
    double relaxation{1.0};
    std::uint64_t seed{0x5eed};
    bool force{false};
    std::size_t threads{1};
    std::size_t residual_budget{256};

    [[nodiscard]] bool is_contact() const { return problem != "abstract"; }
};

namespace detail
{
struct IniIndex
{
    std::map<std::string, int> lines; ///< "section.key" -> 1-based line

    [[nodiscard]] int line_of(const std::string& path) const
    {
        const auto it = lines.find(path);
        return it == lines.end() ? 0 : it->second;
    }
};

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
    {
        return "";
    }
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline IniIndex index_ini(const std::string& text)
{
    IniIndex idx;
    std::istringstream in(text);
    std::string line, section;
    int n = 0;
    while (std::getline(in, line))
    {
        ++n;
        const std::string t = trim(line);
        if (t.empty() || t[0] == ';' || t[0] == '#')
        {
            continue;
        }
        if (t.front() == '[' && t.back() == ']')
        {
            section = trim(t.substr(1, t.size() - 2));
            idx.lines.emplace(section, n);
            continue;
        }
        const auto eq = t.find('=');
        if (eq != std::string::npos)
        {
            const std::string key = trim(t.substr(0, eq));
            idx.lines.emplace(section.empty() ? key : section + "." + key, n);
        }
    }
    return idx;
}

class ConfigReader
{
public:
    ConfigReader(std::string source, const boost::property_tree::ptree& tree, IniIndex index)
        : source_(std::move(source)), tree_(tree), index_(std::move(index))
    {
    }

    [[noreturn]] void fail(const std::string& path, const std::string& msg) const
    {
        const int line = index_.line_of(path);
        throw ConfigError(source_ + (line ? ":" + std::to_string(line) : std::string()) + ": " + path + ": " + msg);
    }

    [[nodiscard]] std::optional<std::string> raw(const std::string& path)
    {
        used_.insert(path);
        const auto v = tree_.get_optional<std::string>(boost::property_tree::ptree::path_type(path, '.'));
        if (!v)
        {
            return std::nullopt;
        }
        return trim(*v);
    }

    void real(const std::string& path, double& out)
    {
        if (const auto s = raw(path))
        {
            out = parse_real(path, *s);
        }
    }

    void real(const std::string& path, std::optional<double>& out)
    {
        if (const auto s = raw(path))
        {
            out = parse_real(path, *s);
        }
    }

    template <class UInt>
    void count(const std::string& path, UInt& out)
    {
        if (const auto s = raw(path))
        {
            out = static_cast<UInt>(parse_count(path, *s));
        }
    }

    void text(const std::string& path, std::string& out, const std::vector<std::string>& allowed)
    {
        if (const auto s = raw(path))
        {
            bool ok = false;
            std::string options;
            for (const auto& a : allowed)
            {
                ok = ok || a == *s;
                options += (options.empty() ? "" : ", ") + a;
            }
            if (!ok)
            {
                fail(path, "'" + *s + "' is not one of " + options);
            }
            out = *s;
        }
    }

    void flag(const std::string& path, bool& out)
    {
        if (const auto s = raw(path))
        {
            if (*s == "true" || *s == "1" || *s == "yes")
            {
                out = true;
            }
            else if (*s == "false" || *s == "0" || *s == "no")
            {
                out = false;
            }
            else
            {
                fail(path, "expected true or false, got '" + *s + "'");
            }
        }
    }

    void reals(const std::string& path, std::vector<double>& out)
    {
        if (const auto s = raw(path))
        {
            out.clear();
            for (const auto& tok : tokens(*s))
            {
                out.push_back(parse_real(path, tok));
            }
        }
    }

    template <class UInt>
    void counts(const std::string& path, std::vector<UInt>& out)
    {
        if (const auto s = raw(path))
        {
            out.clear();
            for (const auto& tok : tokens(*s))
            {
                out.push_back(static_cast<UInt>(parse_count(path, tok)));
            }
        }
    }

    void schedule(const std::string& path, Schedule& out)
    {
        real(path, out.value);
        text(path + "_schedule", out.shape, {"constant", "ramp", "linear", "sine", "kink"});
        real(path + "_rate", out.rate);
    }

    /// Rejects sections and keys that no reader asked for.
    void reject_unknown() const
    {
        for (const auto& [name, node] : tree_)
        {
            if (node.empty())
            {
                if (!used_.count(name))
                {
                    fail(name, "unknown key");
                }
                continue;
            }
            for (const auto& [key, leaf] : node)
            {
                const std::string path = name + "." + key;
                if (!used_.count(path))
                {
                    fail(path, "unknown key");
                }
            }
        }
    }

private:
    static std::vector<std::string> tokens(const std::string& s)
    {
        std::vector<std::string> out;
        std::string cur;
        for (char c : s)
        {
            if (c == ' ' || c == ',' || c == '\t')
            {
                if (!cur.empty())
                {
                    out.push_back(cur);
                }
                cur.clear();
            }
            else
            {
                cur.push_back(c);
            }
        }
        if (!cur.empty())
        {
            out.push_back(cur);
        }
        return out;
    }

    double parse_real(const std::string& path, const std::string& s) const
    {
        double v = 0.0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size())
        {
            fail(path, "expected a number, got '" + s + "'");
        }
        if (!std::isfinite(v))
        {
            fail(path, "value must be finite");
        }
        return v;
    }

    std::uint64_t parse_count(const std::string& path, const std::string& s) const
    {
        std::uint64_t v = 0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size())
        {
            fail(path, "expected a nonnegative integer, got '" + s + "'");
        }
        return v;
    }

    std::string source_;
    const boost::property_tree::ptree& tree_;
    IniIndex index_;
    std::set<std::string> used_;
};
} // namespace detail

/// Parses the INI text; errors carry "source:line: section.key: reason".
inline RunConfig parse_config(const std::string& text, const std::string& source = "<memory>")
{
    boost::property_tree::ptree tree;
    {
        std::istringstream in(text);
        try
        {
            boost::property_tree::ini_parser::read_ini(in, tree);
        }
        catch (const boost::property_tree::ini_parser_error& e)
        {
            throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
        }
    }
    detail::ConfigReader r(source, tree, detail::index_ini(text));
    RunConfig c;
    c.source = source;
    r.text("problem", c.problem, {"p52", "p54", "p62", "abstract"});

    r.real("mesh.length", c.length);
    r.count("mesh.elements", c.elements);
    r.reals("mesh.nodes", c.nodes);
    r.counts("mesh.traction_nodes", c.traction_nodes);
    r.count("mesh.dim", c.dim);
    r.reals("mesh.metric", c.metric);

    r.real("material.a", c.a);
    r.real("material.a_slope", c.a_slope);
    r.real("material.mu", c.mu);
    r.real("material.b", c.b);
    r.real("material.beta", c.beta);
    r.real("material.beta_decay", c.beta_decay);
    r.real("material.relax_weight", c.relax_weight);
    r.text("material.r_kind", c.r_kind, {"zero", "identity", "volterra", "pointwise"});
    r.real("material.r_value", c.r_value);
    r.real("material.r_offset", c.r_offset);
    r.text("material.s_kind", c.s_kind, {"zero", "volterra", "pointwise"});
    r.real("material.s_value", c.s_value);

    r.text("contact.law", c.law, {"normal_compliance_memory", "signorini", "bilateral_friction"});
    r.text("contact.F", c.F_form, {"zero", "linear", "constant", "saturating", "table"});
    r.real("contact.F_k", c.F_k);
    r.real("contact.F_max", c.F_max);
    r.real("contact.F0", c.F0);
    r.reals("contact.F_table_r", c.F_table_r);
    r.reals("contact.F_table_f", c.F_table_f);
    r.text("contact.cone", c.cone, {"whole", "nonpositive", "nonnegative", "zero"});
    r.counts("contact.cone_coords", c.cone_coords);
    r.text("contact.j", c.j, {"zero", "positive_part", "block_norm"});
    r.real("contact.j_weight", c.j_weight);
    r.counts("contact.j_coords", c.j_coords);
    r.real("contact.alpha_j", c.alpha_j);
    r.text("contact.corollary", c.corollary, {"none", "cor31", "cor32", "cor33"});

    r.schedule("loads.f0_normal", c.f0_normal);
    r.schedule("loads.f0_tangential", c.f0_tangential);
    r.schedule("loads.f2_normal", c.f2_normal);
    r.schedule("loads.f2_tangential", c.f2_tangential);
    r.real("loads.u0_tangential", c.u0_tangential);
    r.reals("loads.f", c.f);
    r.text("loads.f_schedule", c.f_schedule.shape, {"constant", "ramp", "linear", "sine", "kink"});
    r.real("loads.f_rate", c.f_schedule.rate);

    r.real("time.T", c.T);
    r.count("time.N", c.N);

    r.real("solver.tol", c.tol);
    r.text("solver.mode", c.mode, {"time_marching", "global_picard"});
    r.count("solver.max_outer", c.max_outer);
    r.count("solver.max_evi_iter", c.max_evi_iter);
    r.real("solver.relaxation", c.relaxation);
    r.count("solver.seed", c.seed);
    r.flag("solver.force", c.force);
    r.count("solver.threads", c.threads);
    r.count("solver.residual_budget", c.residual_budget);
    r.reject_unknown();

    if (c.N < 1)
    {
        r.fail("time.N", "need at least one time step");
    }
    if (!(c.T > 0.0))
    {
        r.fail("time.T", "horizon must be positive");
    }
    if (!(c.tol > 0.0))
    {
        r.fail("solver.tol", "tolerance must be positive");
    }
    if (!(c.relaxation > 0.0 && c.relaxation <= 1.0))
    {
        r.fail("solver.relaxation", "must lie in (0, 1]");
    }
    if (c.threads < 1)
    {
        r.fail("solver.threads", "need at least one thread");
    }
    if (c.is_contact())
    {
        if (c.nodes.empty() && (c.elements < 1 || !(c.length > 0.0)))
        {
            r.fail("mesh.elements", "need a positive length and at least one element");
        }
        if (c.law.empty())
        {
            c.law = c.problem == "p52" ? "normal_compliance_memory" : c.problem == "p54" ? "signorini" : "bilateral_friction";
        }
    }
    else
    {
        if (c.dim < 1 || c.dim > 8)
        {
            r.fail("mesh.dim", "abstract problems need 1 <= dim <= 8");
        }
        if (!c.metric.empty() && c.metric.size() != c.dim)
        {
            r.fail("mesh.metric", "need one diagonal entry per dimension");
        }
        if (c.f.empty())
        {
            c.f.assign(c.dim, 0.0);
        }
        if (c.f.size() != c.dim)
        {
            r.fail("loads.f", "need one entry per dimension");
        }
        for (auto i : c.cone_coords)
        {
            if (i >= c.dim)
            {
                r.fail("contact.cone_coords", "coordinate out of range");
            }
        }
        for (auto i : c.j_coords)
        {
            if (i >= c.dim)
            {
                r.fail("contact.j_coords", "coordinate out of range");
            }
        }
    }
    return c;
}

inline RunConfig load_config(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw ConfigError(path + ": cannot open config file");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

} // namespace hdsweep
