// Batch front end: `epflow run <config>` and `epflow report <run-dir>`. Uses the C API only.
#include "epflow/epflow.h"

#include "CLI11.hpp"

#include <cstdio>
#include <string>

int main(int argc, char** argv)
{
    CLI::App app{"Expanding polytropic gas flows: scenario runner and report emitter"};
    app.set_version_flag("--version", std::string(epf_version()));
    app.require_subcommand(1);

    int threads = 0;
    std::string out;
    app.add_option("--threads", threads, "worker threads (results do not depend on it)")->check(CLI::NonNegativeNumber);
    app.add_option("--out", out, "output directory (overrides run.out)");

    std::string config;
    CLI::App* run = app.add_subcommand("run", "run the scenario described by a config file");
    run->add_option("config", config, "config file (INI)")->required();

    std::string run_dir;
    CLI::App* report = app.add_subcommand("report", "print the markdown summary of a run directory");
    report->add_option("run-dir", run_dir, "directory written by `run`")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (run->parsed()) {
        char* dir = nullptr;
        int code = epf_run_scenario(config.c_str(), out.empty() ? nullptr : out.c_str(), threads, &dir);
        if (code == 2 || !dir) {
            std::fprintf(stderr, "epflow: %s\n", epf_last_error());
            epf_free_string(dir);
            return code;
        }
        char* md = nullptr;
        if (epf_emit_report(dir, &md) == EPF_OK) std::fputs(md, stdout);
        else std::fprintf(stderr, "epflow: report: %s\n", epf_last_error());
        if (code != 0) std::fprintf(stderr, "epflow: run finished with exit status %d\n", code);
        epf_free_string(md);
        epf_free_string(dir);
        return code;
    }

    char* md = nullptr;
    if (epf_emit_report(run_dir.c_str(), &md) != EPF_OK) {
        std::fprintf(stderr, "epflow: %s\n", epf_last_error());
        return 2;
    }
    std::fputs(md, stdout);
    epf_free_string(md);
    return 0;
}
