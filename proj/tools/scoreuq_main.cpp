#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "scoreuq/commands.hpp"
#include "scoreuq/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"diffusion sampling with Monte-Carlo score-variance uncertainty"};

    std::string config_path, out_dir;
    std::optional<uint64_t> seed;
    int threads = 0;

    app.add_option("--config", config_path, "run configuration JSON")->required();
    app.add_option("--out", out_dir, "output directory")->required();
    app.add_option("--seed", seed, "override the config's root seed");
    app.add_option("--threads", threads,
                   "worker count (default: config, then SCOREUQ_THREADS, then hardware)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;  // bad flags are configuration errors
    }

    try {
        scoreuq::execute({config_path, out_dir, seed, threads});
    } catch (const scoreuq::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.exit_code();
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
