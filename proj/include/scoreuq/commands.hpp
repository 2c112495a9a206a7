#pragma once

#include <filesystem>
#include <optional>

namespace scoreuq {

struct ExecuteOptions {
    std::filesystem::path config_path;
    std::filesystem::path out_dir;
    std::optional<uint64_t> seed_override;
    int threads = 0;  // command-line override; 0 defers to config/env/hardware
};

/// Runs the configured command and writes its outputs plus manifest.json
/// (written last) into out_dir. Throws Error on failure; the error kind maps
/// to the process exit code (1 config, 2 numeric, 3 io).
void execute(const ExecuteOptions& options);

}  // namespace scoreuq
