#include <natgrow/commands.hpp>
#include <natgrow/parallel.hpp>

#include <CLI11.hpp>

#include <iostream>

using namespace natgrow;

int main(int argc, char** argv) {
    CLI::App app{"natgrow: quasilinear Dirichlet problems with natural-growth gradient terms"};
    app.require_subcommand(1, 1);
    std::string config_path, out_dir, preset;
    std::optional<std::uint64_t> seed;
    unsigned jobs = 0;
    app.add_option("--config", config_path, "JSON run config")->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "output directory (overrides output_dir)");
    app.add_option("--preset", preset, "starting config: f_pos, f_sign, f_sqrt, linear, schrod");
    app.add_option("--seed", seed, "seed for randomized checks");
    app.add_option("--jobs", jobs, "worker threads, 0 = all cores");
    // global flags may follow the subcommand
    app.fallthrough();
    for (const char* name : {"analyze", "transform", "solve", "sweep", "verify"}) app.add_subcommand(name);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_usage;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    RunConfig cfg;
    try {
        if (!preset.empty()) cfg = preset_config(preset);
        if (!config_path.empty()) cfg = load_config(config_path, cfg);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return exit_usage;
    }
    if (seed) cfg.seed = *seed;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    set_default_jobs(jobs);

    std::string msg;
    const int rc = run_command(command, cfg, cfg.output_dir, &msg);
    if (rc == exit_usage) std::cerr << "usage error: " << msg << "\n";
    else if (!msg.empty()) std::cerr << "error: " << msg << "\n";
    else std::cerr << command << ": exit " << rc << ", outputs in " << cfg.output_dir << "\n";
    return rc;
}
