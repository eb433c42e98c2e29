#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cglmix/config.hpp"

namespace cglmix {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitValidation = 2,
    kExitBlowUp = 3,
    kExitIo = 4,
};

struct RunOptions {
    std::filesystem::path out_root = "runs";
    /// When set, outputs go exactly here instead of <out_root>/<hash>-<timestamp>.
    std::optional<std::filesystem::path> directory;
    unsigned workers = 1;
};

/// What a run produced. Everything except `wall_seconds` (also written to
/// timing.json) is a function of the config alone.
struct ResultRecord {
    ExperimentKind kind = ExperimentKind::Simulate;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::filesystem::path directory;
    std::vector<std::string> files;
    std::optional<bool> pass;  // conjunction of the verdicts, when the kind has any
    std::string summary;
    std::string report_json;
    double wall_seconds = 0.0;
};

/// Dispatches on config.kind and writes config.ini, report.json, timing.json
/// and the kind's tables into the run directory. A blow-up leaves error.json
/// behind and is rethrown as BlowUpError.
ResultRecord run(const ExperimentConfig& config, const RunOptions& options);

/// Maps an exception escaping parse/run to the process exit code.
int exit_code_for(const std::exception& e) noexcept;

/// Binary snapshot: f64 time, u64 n, then n (re, im) f64 pairs, little-endian.
void write_snapshot(const std::filesystem::path& path, const Field& u, double t);

struct Snapshot {
    double t = 0.0;
    std::vector<cplx> samples;
};
Snapshot read_snapshot(const std::filesystem::path& path);

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

/// Fast self-checks of exact identities and degenerate cases on the
/// configured grid and coefficients.
std::vector<CheckResult> run_validation_suite(const ExperimentConfig& config, unsigned workers);

}  // namespace cglmix
