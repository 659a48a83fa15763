#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "chimera/driver.hpp"
#include "selftest.hpp"

using namespace chimera;

namespace {

struct Flags {
    std::string output_dir;
    std::uint64_t seed = 0;
    int snapshot_every = 0;
    bool quiet = false;
    bool corrupt_kernel = false;
};

int fail(const std::string& what, int code) {
    std::cerr << "chimera: " << what << "\n";
    return code;
}

RunConfig load(const std::string& path, const Flags& f, const CLI::App& app) {
    RunConfig c = load_config(path);
    if (app.count("--output-dir")) c.output_dir = f.output_dir;
    if (app.count("--seed")) c.seed = f.seed;
    if (app.count("--snapshot-every")) {
        require(f.snapshot_every >= 0, "--snapshot-every must be nonnegative");
        c.snapshot_every = f.snapshot_every;
    }
    return c;
}

int cmd_run(const std::string& path, const Flags& f, const CLI::App& app) {
    RunConfig c;
    RunOutcome o;
    try {
        c = load(path, f, app);
        o = run_simulation(c, c.output_dir, f.quiet ? nullptr : &std::cerr);
    } catch (const Error& e) {
        return fail(e.what(), exit_usage);
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(e.what(), exit_usage);
    }
    if (!f.quiet) std::cout << audit_summary(o);
    if (o.exit_code != exit_ok) return fail(o.message, o.exit_code);
    return exit_ok;
}

int cmd_estimate(const std::string& path, const Flags& f, const CLI::App& app) {
    CriticalRunOutcome o;
    try {
        RunConfig c = load(path, f, app);
        o = run_critical_mass(c, c.output_dir);
    } catch (const Error& e) {
        return fail(e.what(), exit_usage);
    }
    if (!f.quiet) std::cout << o.report;
    if (o.exit_code != exit_ok) return fail("critical-mass iteration stopped before the residual tolerance", o.exit_code);
    return exit_ok;
}

int cmd_audit(const std::string& dir, const Flags& f) {
    DiskAudit a;
    try {
        a = audit_directory(dir);
    } catch (const Error& e) {
        return fail(e.what(), exit_usage);
    } catch (const std::exception& e) {
        return fail(std::string("audit: unreadable number (") + e.what() + ")", exit_usage);
    }
    if (!f.quiet || a.exit_code != exit_ok) std::cout << disk_audit_summary(a);
    for (const auto& p : a.problems) std::cerr << "chimera: " << p << "\n";
    return a.exit_code;
}

int cmd_selftest(const Flags& f) {
    if (f.corrupt_kernel) testing_hooks::kernel_distortion() = 0.5;
    auto rows = selftest::run(f.seed, f.quiet ? nullptr : &std::cerr);
    selftest::print_table(std::cout, rows);
    if (!selftest::all_pass(rows)) {
        for (const auto& r : rows)
            if (!r.pass) std::cerr << "chimera: selftest check failed: " << r.name << "\n";
        return exit_selftest;
    }
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Minimizing-movement solver for a density coupled to two linear fields"};
    app.require_subcommand(1);
    app.fallthrough();
    Flags f;
    app.add_option("--output-dir", f.output_dir, "directory for ledgers, snapshots and reports");
    app.add_option("--seed", f.seed, "seed for randomized probes");
    app.add_option("--snapshot-every", f.snapshot_every, "write u, v, w every K steps (0: first and last)");
    app.add_flag("--quiet", f.quiet, "suppress progress and summaries");

    std::string config, dir;
    auto* run = app.add_subcommand("run", "run a simulation from a config file");
    run->add_option("config", config, "config file")->required();
    auto* est = app.add_subcommand("estimate-critical-mass", "estimate the sharp constant and the critical mass");
    est->add_option("config", config, "config file")->required();
    auto* self = app.add_subcommand("selftest", "compare the solvers against independent oracles");
    self->add_flag("--corrupt-kernel", f.corrupt_kernel, "distort the transport kernel (test hook)")->group("");
    auto* audit = app.add_subcommand("audit", "re-check a run directory");
    audit->add_option("dir", dir, "output directory of a run")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : exit_usage;
    }
    if (*run) return cmd_run(config, f, app);
    if (*est) return cmd_estimate(config, f, app);
    if (*self) return cmd_selftest(f);
    return cmd_audit(dir, f);
}
