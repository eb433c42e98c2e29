#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cglmix/dynamics.hpp"
#include "cglmix/functionals.hpp"

namespace cglmix {

enum class ExperimentKind { Simulate, Couple, Mixing, Tails, Poincare, Validate };

std::string_view kind_name(ExperimentKind kind) noexcept;
std::optional<ExperimentKind> parse_kind(std::string_view name) noexcept;

/// Shape of a deterministic field: "bump" (Gaussian, given L^2 norm), "random"
/// (smooth localized random field) or "zero".
struct ShapeSpec {
    std::string kind = "bump";
    double norm = 1.0;
    double width = 1.0;
    double center = 0.0;
    bool operator==(const ShapeSpec&) const = default;
};

struct GridBlock {
    double X = 40.0;
    std::size_t n = 1024;
    bool operator==(const GridBlock&) const = default;
};

struct PhysicsBlock {
    double a = 1.0;
    double nu1 = 1.0;
    double nu2 = 0.5;
    double alpha1 = 1.0;
    double alpha2 = 1.0;
    double q = 1.0;
    ShapeSpec h{"bump", 1.0, 1.0, 0.0};
    bool operator==(const PhysicsBlock&) const = default;
};

struct NoiseBlock {
    double b0 = 1.0;
    double p = 2.0;
    std::size_t M = 64;
    std::vector<double> coefficients;  // when nonempty, replaces the power law and M
    bool operator==(const NoiseBlock&) const = default;
};

struct ControlBlock {
    std::size_t N = 32;
    double K = 0.0;  // 0 calibrates K from a pilot ensemble
    double L = 1.0;
    double M_coef = 4.0;
    double rho = 4.0;
    std::size_t pilot_size = 500;
    bool operator==(const ControlBlock&) const = default;
};

struct RunBlock {
    double dt = 1e-3;
    double horizon = 20.0;
    std::size_t ensemble_size = 100;
    std::uint64_t seed = 1;
    std::uint64_t sample_every = 100;
    bool dealias = false;
    double blowup_norm = 1e6;
    bool operator==(const RunBlock&) const = default;
};

struct CoupleBlock {
    double distance = 1e-2;
    bool stopping = false;
    bool operator==(const CoupleBlock&) const = default;
};

struct MixingBlock {
    double norm_a = 0.0;
    double norm_b = 5.0;
    std::size_t family_size = 16;
    double time_step = 1.0;
    double fit_t_min = 2.0;
    double fit_t_max = 20.0;
    bool operator==(const MixingBlock&) const = default;
};

struct TailsBlock {
    std::vector<double> rho_list{2.0, 4.0, 8.0};
    std::vector<double> l_list{2.0, 5.0, 10.0};
    double C3 = 3.0;
    bool operator==(const TailsBlock&) const = default;
};

struct PoincareBlock {
    double A = 20.0;
    double s = 1.0;
    std::vector<double> N_list{4, 8, 16, 32, 64};
    std::size_t samples = 500;
    int max_mode = 96;
    bool operator==(const PoincareBlock&) const = default;
};

/// Everything that determines the numbers an experiment produces. The worker
/// count is deliberately absent: results never depend on it.
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Simulate;
    GridBlock grid;
    PhysicsBlock physics;
    NoiseBlock noise;
    ControlBlock control;
    RunBlock run;
    ShapeSpec initial{"bump", 5.0, 1.0, 0.0};
    CoupleBlock couple;
    MixingBlock mixing;
    TailsBlock tails;
    PoincareBlock poincare;
    bool operator==(const ExperimentConfig&) const = default;
};

/// Parses INI text (sections [grid], [physics], [noise], [control], [run],
/// [initial], [couple], [mixing], [tails], [poincare]; `kind` lives in [run]).
/// Missing keys take their defaults. Throws ConfigError listing every
/// violated condition.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::string& path);

/// Returns the list of violated conditions, empty when the config is valid.
std::vector<std::string> config_violations(const ExperimentConfig& config);

/// Canonical INI echo with every key; parse_config(to_ini(c)) == c.
std::string to_ini(const ExperimentConfig& config);

/// SHA-1 of "blob <size>\0" + content in hex, as `git hash-object` prints it.
std::string git_blob_sha1(std::string_view content);

/// Git blob SHA-1 of the canonical echo.
std::string config_hash(const ExperimentConfig& config);

/// Model described by the config (grid, coefficients, force, noise).
Model build_model(const ExperimentConfig& config);

/// Field described by `shape` on `grid`; "random" draws from `stream`.
Field make_shape(const ShapeSpec& shape, const GridPtr& grid, const StreamKey& stream);

StoppingParams stopping_params(const ExperimentConfig& config, double K);

}  // namespace cglmix
