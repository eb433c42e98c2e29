#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cglmix/config.hpp"
#include "cglmix/errors.hpp"
#include "cglmix/experiments.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace cglmix;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> violations_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.violations();
    }
    return {};
}

bool mentions(const std::vector<std::string>& v, const std::string& needle) {
    for (const auto& s : v) {
        if (s.find(needle) != std::string::npos) return true;
    }
    return false;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("cglmix_unit_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    return p;
}

ExperimentConfig small_config(ExperimentKind kind) {
    ExperimentConfig c;
    c.kind = kind;
    c.grid.X = 20.0;
    c.grid.n = 256;
    c.noise.M = 32;
    c.run.horizon = 0.5;
    c.run.ensemble_size = 6;
    c.run.sample_every = 50;
    c.run.seed = 11;
    return c;
}

}  // namespace

TEST_CASE("empty text gives the defaults and the default echo round-trips") {
    const ExperimentConfig d;
    CHECK(parse_config("") == d);
    CHECK(parse_config(to_ini(d)) == d);
    CHECK(d.grid.X == 40.0);
    CHECK(d.grid.n == 1024);
    CHECK(d.noise.M == 64);
    CHECK(d.run.dt == 1e-3);
}

TEST_CASE("minimal config fills defaults and is echoed verbatim") {
    const auto c = parse_config("[grid]\nn = 256\nX = 12.5\n\n[run]\nkind = mixing\nseed = 99\n");
    CHECK(c.grid.n == 256);
    CHECK(c.grid.X == 12.5);
    CHECK(c.kind == ExperimentKind::Mixing);
    CHECK(c.run.seed == 99);
    CHECK(c.physics.q == 1.0);
    const std::string echo = to_ini(c);
    CHECK(echo.find("n = 256\n") != std::string::npos);
    CHECK(echo.find("X = 12.5\n") != std::string::npos);
    CHECK(echo.find("kind = mixing\n") != std::string::npos);
    CHECK(parse_config(echo) == c);
}

TEST_CASE("q outside (0,2) is rejected naming the condition") {
    auto v = violations_of("[physics]\nq = 2.5\n");
    REQUIRE(v.size() == 1);
    CHECK(mentions(v, "q ∈ (0,2)"));
    CHECK(mentions(violations_of("[physics]\nq = 0\n"), "q ∈ (0,2)"));
}

TEST_CASE("slow noise decay is rejected as a divergent B3") {
    auto v = violations_of("[noise]\np = 1.0\n");
    REQUIRE(!v.empty());
    CHECK(mentions(v, "B₃"));
    CHECK(mentions(v, "diverge"));
    CHECK(violations_of("[noise]\np = 1.6\n").empty());
}

TEST_CASE("a vanishing controlled coefficient is rejected") {
    auto v = violations_of("[noise]\ncoefficients = 1, 0.5, 0, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2, 0.2\n[control]\nN = 8\n");
    CHECK(mentions(v, "b_3 = 0 but N = 8"));
    CHECK(mentions(violations_of("[noise]\nM = 32\n[control]\nN = 40\n"), "b_33 = 0 but N = 40"));
    CHECK(violations_of("[noise]\ncoefficients = 1, 0.5, 0, 0.2\n[control]\nN = 2\n").empty());
    // Switching the noise off entirely is allowed.
    CHECK(violations_of("[noise]\nb0 = 0\n").empty());
}

TEST_CASE("coefficient ranges and every violation are reported together") {
    auto v = violations_of("[physics]\na = 0\nnu1 = -1\nalpha1 = -0.5\nq = 3\n[control]\nrho = 0\n");
    CHECK(mentions(v, "a > 0"));
    CHECK(mentions(v, "ν₁ > 0"));
    CHECK(mentions(v, "α₁ ≥ 0"));
    CHECK(mentions(v, "q ∈ (0,2)"));
    CHECK(mentions(v, "ρ > 0"));
    CHECK(v.size() == 5);
}

TEST_CASE("malformed values, unknown keys and bad INI are reported") {
    auto v = violations_of("[grid]\nn = many\nwidth = 3\n[extra]\nfoo = 1\n");
    CHECK(mentions(v, "grid.n: expected a nonnegative integer, got 'many'"));
    CHECK(mentions(v, "unknown key 'width' in [grid]"));
    CHECK(mentions(v, "unknown key 'foo' in [extra]"));
    CHECK(mentions(violations_of("[run]\nkind = dance\n"), "run.kind = 'dance'"));
    CHECK(mentions(violations_of("[run]\ndealias = maybe\n"), "true or false"));
    CHECK(mentions(violations_of("[grid\nn = 1\n"), "malformed INI"));
    CHECK(mentions(violations_of("[grid]\nn = 1000\n"), "power of two"));
    CHECK(mentions(violations_of("[tails]\nrho_list = 4, 2, 8\n"), "rho_list"));
}

TEST_CASE("randomized configs survive the echo round trip") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        ExperimentConfig c;
        c.kind = static_cast<ExperimentKind>(trial % 6);
        c.grid.X = 1.0 + 100.0 * u01(rng);
        c.grid.n = std::size_t{256} << (trial % 3);
        c.physics.a = 0.01 + u01(rng);
        c.physics.nu1 = 0.1 + 3.0 * u01(rng);
        c.physics.nu2 = u01(rng) - 0.5;
        c.physics.alpha1 = u01(rng);
        c.physics.alpha2 = -u01(rng);
        c.physics.q = 0.05 + 1.9 * u01(rng);
        c.physics.h.kind = trial % 2 ? "random" : "none";
        c.physics.h.norm = u01(rng);
        c.noise.b0 = u01(rng) + 1e-3;
        c.noise.p = 1.5 + 1e-9 + u01(rng);
        c.noise.M = 40 + trial % 50;
        if (trial % 5 == 0) {
            c.noise.coefficients.clear();
            for (int j = 0; j < 36; ++j) c.noise.coefficients.push_back(0.01 + u01(rng));
        }
        c.control.N = 1 + trial % 32;
        c.control.K = 10.0 * u01(rng);
        c.control.rho = 0.1 + u01(rng);
        c.run.dt = 1e-4 + 1e-2 * u01(rng);
        c.run.seed = rng();
        c.initial.kind = trial % 3 == 0 ? "zero" : "bump";
        c.initial.center = u01(rng) - 0.5;
        c.mixing.fit_t_min = u01(rng);
        c.tails.rho_list = {u01(rng) + 0.1, 2.0 + u01(rng), 4.0 + u01(rng)};
        c.poincare.A = c.grid.X * (0.5 + u01(rng));
        c.poincare.max_mode = 10;
        c.poincare.N_list = {2, 4, 8};
        REQUIRE(config_violations(c).empty());
        CHECK(parse_config(to_ini(c)) == c);
    }
}

TEST_CASE("git blob hashing") {
    CHECK(git_blob_sha1("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    CHECK(git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
    ExperimentConfig a, b;
    b.run.seed = 2;
    CHECK(config_hash(a) != config_hash(b));
    CHECK(config_hash(a) == git_blob_sha1(to_ini(a)));
    CHECK(config_hash(a).size() == 40);
}

TEST_CASE("model construction follows the config") {
    auto c = small_config(ExperimentKind::Simulate);
    c.physics.h.kind = "none";
    auto m = build_model(c);
    CHECK(m.grid->size() == 256);
    CHECK(!m.params.h);
    CHECK(m.params.nu == cplx{1.0, 0.5});
    CHECK(m.noise.M == 32);
    CHECK(m.noise.b[0] == doctest::Approx(0.25));
    c.noise.b0 = 0.0;
    CHECK(!build_model(c).noise.active());
    c.physics.q = 7.0;
    CHECK_THROWS_AS(build_model(c), ConfigError);
}

TEST_CASE("snapshot binary round trip") {
    auto dir = scratch("snap");
    fs::create_directories(dir);
    auto g = Grid::make(5.0, 64);
    Field u(g);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = {std::sin(0.3 * i), 1.0 / (1.0 + i)};
    write_snapshot(dir / "s.bin", u, 2.5);
    CHECK(fs::file_size(dir / "s.bin") == 16 + 64 * 16);
    auto s = read_snapshot(dir / "s.bin");
    CHECK(s.t == 2.5);
    REQUIRE(s.samples.size() == 64);
    for (std::size_t i = 0; i < 64; ++i) CHECK(s.samples[i] == u[i]);
    const std::string bytes = slurp(dir / "s.bin");
    CHECK(bytes.substr(0, 8) == std::string("\x00\x00\x00\x00\x00\x00\x04\x40", 8));
    std::ofstream(dir / "t.bin", std::ios::binary) << bytes.substr(0, 100);
    CHECK_THROWS_AS(read_snapshot(dir / "t.bin"), IoError);
    CHECK_THROWS_AS(read_snapshot(dir / "missing.bin"), IoError);
    fs::remove_all(dir);
}

TEST_CASE("simulate output is byte-identical across runs and worker counts") {
    auto root = scratch("det");
    auto c = small_config(ExperimentKind::Simulate);
    RunOptions a{root, root / "a", 1}, b{root, root / "b", 3};
    auto ra = run(c, a);
    auto rb = run(c, b);
    CHECK(ra.pass.value_or(false));
    CHECK(ra.config_hash == config_hash(c));
    REQUIRE(ra.files == rb.files);
    for (const char* f : {"config.ini", "functionals.csv", "moments.csv", "snapshot.bin", "snapshot.json", "report.json"}) {
        CHECK(std::find(ra.files.begin(), ra.files.end(), f) != ra.files.end());
    }
    for (const auto& f : ra.files) {
        if (f == "timing.json") continue;
        CHECK_MESSAGE(slurp(root / "a" / f) == slurp(root / "b" / f), f);
    }
    CHECK(parse_config(slurp(root / "a" / "config.ini")) == c);
    auto report = nlohmann::json::parse(slurp(root / "a" / "report.json"));
    CHECK(report["config_hash"] == ra.config_hash);
    CHECK(report["seed"] == 11);
    CHECK(parse_config(report["config"].get<std::string>()) == c);
    CHECK(report["results"]["final"]["norm_sq"]["se"].get<double>() > 0.0);

    auto snap = read_snapshot(root / "a" / "snapshot.bin");
    CHECK(snap.t == doctest::Approx(0.5));
    CHECK(snap.samples.size() == 256);
    auto side = nlohmann::json::parse(slurp(root / "a" / "snapshot.json"));
    CHECK(side["n"] == 256);
    CHECK(side["time"].get<double>() == snap.t);

    std::istringstream csv(slurp(root / "a" / "functionals.csv"));
    auto rows = read_functionals_csv(csv);
    CHECK(rows.size() == 11);
    CHECK(rows[0].E_psi == doctest::Approx(25.0));
    fs::remove_all(root);
}

TEST_CASE("run directories are named by hash and timestamp") {
    auto root = scratch("dirs");
    auto c = small_config(ExperimentKind::Poincare);
    c.poincare.samples = 10;
    c.poincare.N_list = {4, 8, 16};
    auto r1 = run(c, RunOptions{root, std::nullopt, 1});
    auto r2 = run(c, RunOptions{root, std::nullopt, 1});
    CHECK(r1.directory != r2.directory);
    CHECK(r1.directory.parent_path() == root);
    CHECK(r1.directory.filename().string().substr(0, 13) == config_hash(c).substr(0, 12) + "-");
    CHECK(fs::exists(r1.directory / "poincare.csv"));
    CHECK(fs::exists(r2.directory / "timing.json"));
    fs::remove_all(root);
}

TEST_CASE("every kind runs on a small config") {
    auto root = scratch("kinds");
    for (auto kind : {ExperimentKind::Couple, ExperimentKind::Mixing, ExperimentKind::Tails, ExperimentKind::Validate}) {
        auto c = small_config(kind);
        c.control.K = 2.0;
        c.tails.l_list = {0.1, 0.2};
        c.mixing.time_step = 0.05;
        c.mixing.fit_t_min = 0.1;
        c.mixing.fit_t_max = 0.5;
        const std::string name(kind_name(kind));
        auto r = run(c, RunOptions{root, root / name, 1});
        CHECK(r.pass.has_value());
        CHECK(fs::exists(root / name / "report.json"));
        if (kind == ExperimentKind::Validate) CHECK(*r.pass);
        if (kind == ExperimentKind::Mixing) {
            std::istringstream is(slurp(root / name / "distances.csv"));
            std::string line;
            std::getline(is, line);
            CHECK(line == "time,distance,se,argmax");
            int rows = 0;
            while (std::getline(is, line)) ++rows;
            CHECK(rows == 11);
        }
        if (kind == ExperimentKind::Couple) {
            CHECK(fs::exists(root / name / "pairs.csv"));
            CHECK(fs::exists(root / name / "pairs.jsonl"));
        }
    }
    fs::remove_all(root);
}

TEST_CASE("blow-up and I/O failures map to their exit codes") {
    auto root = scratch("fail");
    auto c = small_config(ExperimentKind::Simulate);
    c.run.dt = 0.2;
    c.run.horizon = 20.0;
    c.initial.norm = 200.0;
    c.physics.alpha2 = 0.0;
    try {
        run(c, RunOptions{root, root / "blow", 1});
        FAIL("no blow-up");
    } catch (const BlowUpError& e) {
        CHECK(exit_code_for(e) == kExitBlowUp);
        CHECK(fs::exists(root / "blow" / "error.json"));
    }
    std::ofstream(root / "file") << "x";
    try {
        run(small_config(ExperimentKind::Simulate), RunOptions{root, root / "file" / "sub", 1});
        FAIL("no I/O error");
    } catch (const IoError& e) {
        CHECK(exit_code_for(e) == kExitIo);
    }
    CHECK(exit_code_for(ConfigError({"x"})) == kExitValidation);
    CHECK(exit_code_for(std::runtime_error("x")) == kExitUsage);
    CHECK(kExitOk == 0);
    fs::remove_all(root);
}
