#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "cglmix/errors.hpp"
#include "cglmix/experiments.hpp"

namespace {

template <class T>
std::optional<T> env_number(const char* name) {
    const char* raw = std::getenv(name);
    if (!raw || !*raw) return std::nullopt;
    const std::string s(raw);
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        if (s.find_first_not_of("0123456789") != std::string::npos) throw std::invalid_argument(s);
        v = std::stoull(s, &used);
    } catch (const std::exception&) {
        throw cglmix::ConfigError({std::string(name) + " = '" + s + "' is not a nonnegative integer"});
    }
    return static_cast<T>(v);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo lab for the stochastic complex Ginzburg-Landau equation"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> workers;
    std::string out_dir = "runs";

    const std::pair<const char*, const char*> commands[] = {
        {"simulate", "ensemble of trajectories: energies, moment bound, final snapshot"},
        {"couple", "coupled pairs under shared noise: squeezing, Novikov and Girsanov quantities"},
        {"mixing", "dual-Lipschitz proxy distance between two ensembles and its decay rate"},
        {"tails", "energy growth and stopping-time tail frequencies"},
        {"poincare", "truncated Poincare constant against the number of controlled modes"},
        {"validate", "self-test suite of exact identities and degenerate cases"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "INI configuration file (defaults when omitted)")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "master seed (overrides CGLMIX_SEED and the config)");
        sub->add_option("--workers", workers, "worker threads, 0 for one per core (overrides CGLMIX_WORKERS)");
        sub->add_option("--out", out_dir, "root directory for run outputs")->capture_default_str();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? cglmix::kExitOk : cglmix::kExitUsage;
    }

    const std::string kind = app.get_subcommands().front()->get_name();
    try {
        cglmix::ExperimentConfig config = config_path.empty() ? cglmix::ExperimentConfig{} : cglmix::load_config(config_path);
        config.kind = *cglmix::parse_kind(kind);
        if (auto s = env_number<std::uint64_t>("CGLMIX_SEED")) config.run.seed = *s;
        if (seed) config.run.seed = *seed;

        cglmix::RunOptions options;
        options.out_root = out_dir;
        if (auto w = env_number<unsigned>("CGLMIX_WORKERS")) options.workers = *w;
        if (workers) options.workers = *workers;

        const auto record = cglmix::run(config, options);
        std::cout << record.summary << "\n";
        if (config.kind == cglmix::ExperimentKind::Validate && record.pass && !*record.pass) {
            std::cerr << "validation suite reported failures; see " << (record.directory / "validate.csv").string() << "\n";
            return cglmix::kExitValidation;
        }
        return cglmix::kExitOk;
    } catch (const std::exception& e) {
        const int code = cglmix::exit_code_for(e);
        std::cerr << "cglmix " << kind << ": " << e.what() << "\n";
        return code;
    }
}
