#include <CLI11.hpp>

#include "plap/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"plap - discrete variational solver for p-Laplacian problems "
                 "with sign-changing weights"};

    std::string config_path;
    long seed_override = -1;
    int threads_override = 0;
    std::string output_override;

    app.add_option("--config", config_path, "run configuration file")->required();
    app.add_option("--seed", seed_override, "override the config seed");
    app.add_option("--threads", threads_override, "worker threads for study points");
    app.add_option("--output", output_override, "override the output directory");

    CLI11_PARSE(app, argc, argv);

    plap::RunConfig cfg;
    try {
        cfg = plap::load_run_config(config_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return plap::ExitValidation;
    }
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    if (threads_override > 0) cfg.threads = threads_override;
    if (!output_override.empty()) cfg.output_dir = output_override;

    return plap::run(cfg);
}
