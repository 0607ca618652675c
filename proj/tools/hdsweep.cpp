#include "hdsweep/cli.hpp"

#include <CLI11.hpp>

int main(int argc, char** argv)
{
    CLI::App app{"hdsweep: history-dependent inclusion and sweeping solvers with contact models"};
    app.require_subcommand(1);
    hdsweep::CliOptions o;
    double tol = 0.0;
    std::string mode;
    std::uint64_t seed = 0;
    std::size_t threads = 1;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "run configuration (INI)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", o.out, "output directory")->capture_default_str();
        sub->add_option("--tol", tol, "solver tolerance (overrides [solver] tol)");
        sub->add_option("--mode", mode, "time_marching or global_picard")
            ->check(CLI::IsMember({"time_marching", "global_picard"}));
        sub->add_option("--seed", seed, "seed for sampled audits and residuals");
        sub->add_flag("--force", o.force, "run even when a gate fails");
        sub->add_option("--threads", threads, "worker threads (default 1)")->check(CLI::PositiveNumber);
    };
    auto* check = app.add_subcommand("check", "audit the assumptions and the smallness gate");
    auto* run = app.add_subcommand("run", "solve and write solution.csv and diagnostics.json");
    auto* conv = app.add_subcommand("convergence", "refinement study with estimated orders");
    auto* verify = app.add_subcommand("verify", "re-check a written solution against residuals and oracles");
    for (auto* sub : {check, run, conv, verify})
    {
        common(sub);
    }
    conv->add_option("--refinements", o.refinements, "number of refinements (>= 2)")->capture_default_str();
    conv->add_option("--refine", o.refine, "time or space")->check(CLI::IsMember({"time", "space"}))->capture_default_str();

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : hdsweep::kExitConfig;
    }
    auto* sub = app.get_subcommands().front();
    if (sub->count("--tol"))
    {
        o.tol = tol;
    }
    if (sub->count("--mode"))
    {
        o.mode = mode;
    }
    if (sub->count("--seed"))
    {
        o.seed = seed;
    }
    if (sub->count("--threads"))
    {
        o.threads = threads;
    }
    if (sub == check)
    {
        return hdsweep::cmd_check(o);
    }
    if (sub == run)
    {
        return hdsweep::cmd_run(o);
    }
    if (sub == conv)
    {
        return hdsweep::cmd_convergence(o);
    }
    return hdsweep::cmd_verify(o);
}
