#include "cglmix/experiments.hpp"

#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>
#include <sstream>

#include "cglmix/coupling.hpp"
#include "cglmix/ensemble.hpp"
#include "cglmix/errors.hpp"
#include "cglmix/estimators.hpp"
#include "cglmix/fields.hpp"
#include "cglmix/format.hpp"
#include "json.hpp"

namespace cglmix {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Initial conditions and perturbations draw from channels the dynamics never use.
constexpr std::uint32_t kInitialChannel = 3;
constexpr std::uint32_t kPerturbChannel = 5;
constexpr std::uint32_t kPilotChannel = 1;

std::string utc_stamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

fs::path make_run_directory(const RunOptions& opt, const std::string& hash) {
    fs::path dir;
    std::error_code ec;
    if (opt.directory) {
        dir = *opt.directory;
        fs::create_directories(dir, ec);
        if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
        return dir;
    }
    const std::string base = hash.substr(0, 12) + "-" + utc_stamp();
    for (int attempt = 0;; ++attempt) {
        dir = opt.out_root / (attempt == 0 ? base : base + "-" + std::to_string(attempt));
        fs::create_directories(opt.out_root, ec);
        if (ec) throw IoError("cannot create output root '" + opt.out_root.string() + "': " + ec.message());
        if (fs::create_directory(dir, ec)) return dir;
        if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    }
}

class OutputDir {
public:
    explicit OutputDir(fs::path dir) : dir_(std::move(dir)) {}

    const fs::path& path() const noexcept { return dir_; }
    const std::vector<std::string>& files() const noexcept { return files_; }

    std::ofstream open(const std::string& name) {
        std::ofstream os(dir_ / name, std::ios::binary);
        if (!os) throw IoError("cannot open '" + (dir_ / name).string() + "' for writing");
        files_.push_back(name);
        return os;
    }

    void close(std::ofstream& os, const std::string& name) {
        os.close();
        if (!os) throw IoError("write to '" + (dir_ / name).string() + "' failed");
    }

    void text(const std::string& name, const std::string& content) {
        auto os = open(name);
        os << content;
        close(os, name);
    }

    void table(const std::string& name, const std::string& header, const std::vector<std::vector<double>>& rows) {
        auto os = open(name);
        os << header << '\n';
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) os << ',';
                os << fmt17(row[i]);
            }
            os << '\n';
        }
        close(os, name);
    }

    void json_file(const std::string& name, const json& j) { text(name, j.dump(2) + "\n"); }

    void add(const std::string& name) { files_.push_back(name); }

private:
    fs::path dir_;
    std::vector<std::string> files_;
};

json mean_json(const MeanSE& m) { return {{"mean", m.mean}, {"se", m.se}, {"n", m.n}}; }

json interval_json(const Interval& i) { return json::array({i.lo, i.hi}); }

std::uint64_t steps_for(double horizon, double dt) { return static_cast<std::uint64_t>(std::llround(horizon / dt)); }

EnsembleOptions ensemble(const ExperimentConfig& c, unsigned workers, std::size_t paths) {
    return {paths, c.run.seed, workers};
}

double resolve_K(const ExperimentConfig& c, const Model& model, const Field& u0, unsigned workers, json& report) {
    if (c.control.K > 0.0) {
        report["K"] = {{"value", c.control.K}, {"calibrated", false}};
        return c.control.K;
    }
    const auto pilot = energy_ensemble(model, u0, c.run.horizon, c.run.sample_every,
                                       ensemble(c, workers, c.control.pilot_size), kPilotChannel);
    std::vector<double> slopes;
    for (const auto& r : pilot) slopes.push_back(linear_fit(r.t, r.E_psi).slope);
    const double K = calibrate_K(pilot);
    report["K"] = {{"value", K},
                   {"calibrated", true},
                   {"pilot_paths", pilot.size()},
                   {"median_slope", median(slopes)},
                   {"slope_q1", quantile(slopes, 0.25)},
                   {"slope_q3", quantile(slopes, 0.75)}};
    if (!(K > 0.0)) {
        throw PreconditionError("calibrated K = " + fmt17(K) +
                                " is not positive (the pilot energies decay); set control.K explicitly");
    }
    return K;
}

std::vector<FunctionalRow> functional_rows(const EnergyRecord& r) {
    std::vector<FunctionalRow> rows(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) rows[i] = {r.t[i], r.E[i], r.E_hat[i], r.E_psi[i], 0.0, 0.0};
    return rows;
}

struct PathRecord {
    EnergyRecord energy;
    std::optional<TrajectoryState> final_state;
};

json run_simulate(const ExperimentConfig& c, const Model& model, unsigned workers, OutputDir& out) {
    const Field u0 = make_shape(c.initial, model.grid, stream_for(c.run.seed, 0, kInitialChannel));
    const auto steps = steps_for(c.run.horizon, c.run.dt);
    const auto every = c.run.sample_every;
    const double D = model.params.dissipation();
    IntegratorPool pool(model, workers, true);
    auto paths = parallel_map<PathRecord>(c.run.ensemble_size, pool.size(), [&](std::size_t p, unsigned w) {
        Integrator& integ = pool[w];
        auto s = integ.initial_state(u0);
        PathRecord rec;
        record_energy(rec.energy, s, D);
        evolve_truncated(integ, s, stream_for(c.run.seed, p), steps, std::nullopt, [&](const TrajectoryState& st) {
            if (st.step % every == 0 || st.step == steps) record_energy(rec.energy, st, D);
        });
        if (p == 0) rec.final_state.emplace(std::move(s));
        return rec;
    });

    {
        const auto rows = functional_rows(paths[0].energy);
        auto os = out.open("functionals.csv");
        write_functionals_csv(os, rows);
        out.close(os, "functionals.csv");
    }

    const double Cp = moment_constant(model);
    const double u0n = norm_sq(u0);
    const std::size_t S = paths[0].energy.size();
    std::vector<std::vector<double>> rows;
    std::vector<double> col(paths.size()), col_e(paths.size());
    bool moment_ok = true;
    json last;
    for (std::size_t i = 0; i < S; ++i) {
        for (std::size_t p = 0; p < paths.size(); ++p) {
            col[p] = paths[p].energy.norm_sq[i];
            col_e[p] = paths[p].energy.E_psi[i];
        }
        const auto m = mean_se(col);
        const auto me = mean_se(col_e);
        const double t = paths[0].energy.t[i];
        const double bound = std::exp(-model.params.a * t) * u0n + Cp;
        if (m.mean > bound + 3.0 * m.se) moment_ok = false;
        rows.push_back({t, m.mean, m.se, me.mean, me.se, bound});
        if (i + 1 == S) last = {{"t", t}, {"norm_sq", mean_json(m)}, {"E_psi", mean_json(me)}, {"bound", bound}};
    }
    out.table("moments.csv", "time,mean_norm_sq,se_norm_sq,mean_E_psi,se_E_psi,bound", rows);

    const auto& fin = *paths[0].final_state;
    write_snapshot(out.path() / "snapshot.bin", fin.u, fin.t);
    out.add("snapshot.bin");
    out.json_file("snapshot.json", {{"file", "snapshot.bin"},
                                    {"layout", "f64 time, u64 n, then n pairs (f64 re, f64 im); little-endian"},
                                    {"path", 0},
                                    {"time", fin.t},
                                    {"step", fin.step},
                                    {"n", model.grid->size()},
                                    {"X", model.grid->half_width()},
                                    {"dx", model.grid->dx()},
                                    {"x0", model.grid->x(0)},
                                    {"norm_sq", norm_sq(fin.u)}});

    return {{"results",
             {{"paths", paths.size()},
              {"steps", steps},
              {"u0_norm_sq", u0n},
              {"C_prime", Cp},
              {"final", last}}},
            {"verdicts", {{"moment_bound", moment_ok}}}};
}

struct PairRun {
    PairSummary summary;
    std::optional<CouplingState> state;
    std::vector<PairSample> samples;
    LinearFit fit;
    bool fitted = false;
};

json run_couple(const ExperimentConfig& c, const Model& model, unsigned workers, OutputDir& out) {
    const Field u0 = make_shape(c.initial, model.grid, stream_for(c.run.seed, 0, kInitialChannel));
    const bool stopping = c.couple.stopping;
    json report;
    CouplingOptions opt;
    opt.steps = steps_for(c.run.horizon, c.run.dt);
    opt.sample_every = c.run.sample_every;
    if (stopping) opt.stopping = stopping_params(c, resolve_K(c, model, u0, workers, report["results"]));
    const std::size_t N = c.control.N;
    const Projector proj(*model.basis, N);
    const double rate_floor = model.params.a / 4.0;
    IntegratorPool pool(model, workers, stopping);
    auto pairs = parallel_map<PairRun>(c.run.ensemble_size, pool.size(), [&](std::size_t p, unsigned w) {
        Integrator& integ = pool[w];
        Field u0p = u0 + c.couple.distance * random_localized_field(model.grid, 1.0, stream_for(c.run.seed, p, kPerturbChannel));
        auto cs = make_coupling(integ, u0, u0p, N);
        advance_pair(integ, cs, proj, stream_for(c.run.seed, p), opt);
        PairRun r;
        r.summary = summarize_pair(cs, p, model, rate_floor);
        try {
            r.fit = fit_path_squeeze(cs);
            r.fitted = true;
        } catch (const DomainError&) {
        }
        if (p == 0) r.samples = cs.samples;
        return r;
    });

    std::vector<PairSummary> rows;
    std::vector<double> rates, intercepts, int_A, weights, ratios;
    std::size_t negative = 0, floor_ok = 0, trig_u = 0, trig_v = 0;
    for (const auto& p : pairs) {
        rows.push_back(p.summary);
        if (p.fitted) {
            rates.push_back(-p.fit.slope);
            intercepts.push_back(p.fit.intercept);
            if (p.fit.slope < 0.0) ++negative;
        }
        if (p.summary.success) ++floor_ok;
        if (p.summary.tau_u.triggered) ++trig_u;
        if (p.summary.tau_v.triggered) ++trig_v;
        int_A.push_back(p.summary.int_A_sq);
        ratios.push_back(p.summary.w_ratio);
        if (std::isfinite(p.summary.log_rn)) weights.push_back(std::exp(p.summary.log_rn));
    }
    {
        auto os = out.open("pairs.csv");
        write_pair_csv(os, rows);
        out.close(os, "pairs.csv");
        auto js = out.open("pairs.jsonl");
        write_pair_jsonl(js, rows);
        out.close(js, "pairs.jsonl");
    }
    std::vector<std::vector<double>> srows;
    for (const auto& s : pairs[0].samples) srows.push_back({s.t, s.w_norm_sq, s.pw_norm_sq, s.u_norm_sq, s.v_norm_sq, s.int_A_sq});
    out.table("pair_samples.csv", "time,w_norm_sq,pw_norm_sq,u_norm_sq,v_norm_sq,int_A_sq", srows);

    const std::size_t P = pairs.size();
    auto& res = report["results"];
    res["pairs"] = P;
    res["N"] = N;
    res["distance"] = c.couple.distance;
    res["rate_floor"] = rate_floor;
    res["floor_success"] = {{"fraction", static_cast<double>(floor_ok) / static_cast<double>(P)},
                            {"ci95", interval_json(wilson_interval(floor_ok, P))}};
    res["negative_slope"] = {{"fraction", static_cast<double>(negative) / static_cast<double>(P)},
                             {"ci95", interval_json(wilson_interval(negative, P))}};
    if (!rates.empty()) {
        res["c_prime"] = {{"median", median(rates)}, {"q1", quantile(rates, 0.25)}, {"q3", quantile(rates, 0.75)}};
        res["c"] = std::exp(median(intercepts));
    }
    res["w_ratio_median"] = median(ratios);
    res["int_A_sq"] = mean_json(mean_se(int_A));
    if (!weights.empty()) res["density"] = mean_json(mean_se(weights));
    res["tau_u_triggered"] = trig_u;
    res["tau_v_triggered"] = trig_v;
    report["verdicts"] = {{"squeezing", static_cast<double>(floor_ok) >= 0.9 * static_cast<double>(P)}};
    return report;
}

json run_mixing(const ExperimentConfig& c, const Model& model, unsigned workers, OutputDir& out) {
    const auto key = stream_for(c.run.seed, 0, kInitialChannel);
    ShapeSpec sa = c.initial, sb = c.initial;
    sa.norm = c.mixing.norm_a;
    sb.norm = c.mixing.norm_b;
    const Field ua = make_shape(sa, model.grid, key);
    const Field ub = make_shape(sb, model.grid, key);
    std::vector<double> times;
    const auto count = static_cast<std::size_t>(std::floor(c.run.horizon / c.mixing.time_step + 1e-9));
    for (std::size_t i = 0; i <= count; ++i) times.push_back(static_cast<double>(i) * c.mixing.time_step);
    const auto family = make_test_family(model.grid, c.mixing.family_size, c.run.seed);
    const auto r = estimate_mixing_rate(model, ua, ub, times, family, ensemble(c, workers, c.run.ensemble_size),
                                        c.mixing.fit_t_min, c.mixing.fit_t_max);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < r.times.size(); ++i) {
        rows.push_back({r.times[i], r.distance[i], r.se[i], static_cast<double>(r.argmax[i])});
    }
    out.table("distances.csv", "time,distance,se,argmax", rows);
    json res = {{"paths", r.paths},
                {"family_size", r.family_size},
                {"norm_a", c.mixing.norm_a},
                {"norm_b", c.mixing.norm_b},
                {"fit_window", {r.fit_t_min, r.fit_t_max}},
                {"fit_points", r.fit_points},
                {"floor_limited", r.floor_limited}};
    if (!r.floor_limited) {
        res["kappa"] = r.kappa;
        res["intercept"] = r.intercept;
        res["r_squared"] = r.r_squared;
    }
    return {{"results", res}, {"verdicts", {{"decay", !r.floor_limited && r.kappa > 0.0 && r.r_squared >= 0.9}}}};
}

json run_tails(const ExperimentConfig& c, const Model& model, unsigned workers, OutputDir& out) {
    const Field u0 = make_shape(c.initial, model.grid, stream_for(c.run.seed, 0, kInitialChannel));
    json report;
    auto& res = report["results"];
    const double K = resolve_K(c, model, u0, workers, res);
    const auto records = energy_ensemble(model, u0, c.run.horizon, c.run.sample_every,
                                         ensemble(c, workers, c.run.ensemble_size));
    const auto et = check_energy_tails(records, K, c.tails.C3, c.tails.rho_list);
    const auto sp = stopping_params(c, K);
    const auto st = check_stopping_tails(records, sp, c.tails.l_list);

    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < et.rho.size(); ++i) rows.push_back({et.rho[i], et.frequency[i], et.ci95[i].lo, et.ci95[i].hi});
    out.table("energy_tails.csv", "rho,frequency,ci_lo,ci_hi", rows);
    rows.clear();
    for (std::size_t i = 0; i < st.l.size(); ++i) rows.push_back({st.l[i], st.frequency[i], st.ci95[i].lo, st.ci95[i].hi});
    out.table("stopping_tails.csv", "l,frequency,ci_lo,ci_hi", rows);

    res["paths"] = records.size();
    res["energy"] = {{"C3", et.C3},
                     {"monotone", et.monotone},
                     {"vacuous", et.vacuous},
                     {"gamma_hat", et.vacuous ? json() : json(et.gamma_hat)},
                     {"gamma_r2", et.vacuous ? json() : json(et.gamma_r2)},
                     {"gamma_is_bound", et.gamma_is_bound},
                     {"warning", et.warning}};
    res["stopping"] = {{"L", sp.L},
                       {"M", sp.M},
                       {"rho", sp.rho},
                       {"horizon", st.horizon},
                       {"monotone", st.monotone},
                       {"any", st.any},
                       {"slope", st.any ? json(st.slope) : json()},
                       {"slope_is_bound", st.slope_is_bound},
                       {"warning", st.warning}};
    report["verdicts"] = {{"energy_tails", et.pass}, {"stopping_tails", st.pass}};
    return report;
}

json run_poincare(const ExperimentConfig& c, const Model& model, unsigned workers, OutputDir& out) {
    const auto& pc = c.poincare;
    const auto Nmax = static_cast<std::size_t>(pc.N_list.back());
    const TrigBasis basis = make_basis(model.grid, Nmax);
    auto samples = parallel_map<Field>(pc.samples, resolve_workers(workers), [&](std::size_t i, unsigned) {
        return random_band_limited_field(model.grid, pc.max_mode, stream_for(c.run.seed, i, kPerturbChannel));
    });
    std::vector<std::vector<double>> rows;
    std::vector<double> eps;
    bool nonincreasing = true;
    for (double Nd : pc.N_list) {
        const double e = truncated_poincare_epsilon(basis, static_cast<std::size_t>(Nd), pc.A, pc.s, samples);
        if (!eps.empty() && e > eps.back()) nonincreasing = false;
        eps.push_back(e);
        rows.push_back({Nd, e});
    }
    out.table("poincare.csv", "N,epsilon", rows);
    return {{"results", {{"A", pc.A}, {"s", pc.s}, {"samples", pc.samples}, {"max_mode", pc.max_mode}, {"N", pc.N_list}, {"epsilon", eps}}},
            {"verdicts", {{"nonincreasing", nonincreasing}}}};
}

std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

json run_validate(const ExperimentConfig& c, unsigned workers, OutputDir& out) {
    const auto checks = run_validation_suite(c, workers);
    auto os = out.open("validate.csv");
    os << "check,pass,detail\n";
    json list = json::array();
    bool all = true;
    for (const auto& ch : checks) {
        os << ch.name << ',' << (ch.pass ? "true" : "false") << ',' << csv_quote(ch.detail) << '\n';
        list.push_back({{"check", ch.name}, {"pass", ch.pass}, {"detail", ch.detail}});
        all = all && ch.pass;
    }
    out.close(os, "validate.csv");
    return {{"results", {{"checks", list}, {"count", checks.size()}}}, {"verdicts", {{"suite", all}}}};
}

std::string summarize(const ExperimentConfig& c, const json& report, const fs::path& dir) {
    std::ostringstream s;
    s << kind_name(c.kind) << " -> " << dir.string();
    if (report.contains("verdicts")) {
        for (const auto& [k, v] : report["verdicts"].items()) s << "  " << k << "=" << (v.get<bool>() ? "PASS" : "FAIL");
    }
    return s.str();
}

}  // namespace

ResultRecord run(const ExperimentConfig& config, const RunOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    const std::string hash = config_hash(config);
    const std::string ini = to_ini(config);
    const Model model = config.kind == ExperimentKind::Validate ? Model{} : build_model(config);
    if (config.kind == ExperimentKind::Validate) {
        auto v = config_violations(config);
        if (!v.empty()) throw ConfigError(std::move(v));
    }
    OutputDir out(make_run_directory(options, hash));
    out.text("config.ini", ini);
    const unsigned workers = resolve_workers(options.workers);

    json body;
    try {
        switch (config.kind) {
            case ExperimentKind::Simulate: body = run_simulate(config, model, workers, out); break;
            case ExperimentKind::Couple: body = run_couple(config, model, workers, out); break;
            case ExperimentKind::Mixing: body = run_mixing(config, model, workers, out); break;
            case ExperimentKind::Tails: body = run_tails(config, model, workers, out); break;
            case ExperimentKind::Poincare: body = run_poincare(config, model, workers, out); break;
            case ExperimentKind::Validate: body = run_validate(config, workers, out); break;
        }
    } catch (const BlowUpError& e) {
        out.json_file("error.json", {{"error", "blow-up"}, {"message", e.what()}, {"step", e.step()}, {"config_hash", hash}});
        throw;
    }

    ResultRecord rec;
    rec.kind = config.kind;
    rec.config_hash = hash;
    rec.seed = config.run.seed;
    rec.directory = out.path();
    if (body.contains("verdicts")) {
        bool all = true;
        for (const auto& [k, v] : body["verdicts"].items()) all = all && v.get<bool>();
        rec.pass = all;
    }
    json report = {{"kind", std::string(kind_name(config.kind))},
                   {"config_hash", hash},
                   {"seed", config.run.seed},
                   {"config", ini}};
    report["results"] = body.value("results", json::object());
    if (body.contains("verdicts")) report["verdicts"] = body["verdicts"];
    if (rec.pass) report["pass"] = *rec.pass;
    auto files = out.files();
    files.push_back("report.json");
    report["outputs"] = files;
    out.json_file("report.json", report);
    rec.report_json = report.dump(2);
    rec.summary = summarize(config, report, out.path());

    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.json_file("timing.json", {{"wall_seconds", rec.wall_seconds}, {"workers", workers}, {"finished_utc", utc_stamp()}});
    rec.files = out.files();
    return rec;
}

int exit_code_for(const std::exception& e) noexcept {
    if (dynamic_cast<const BlowUpError*>(&e)) return kExitBlowUp;
    if (dynamic_cast<const IoError*>(&e)) return kExitIo;
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
        dynamic_cast<const PreconditionError*>(&e) || dynamic_cast<const StructuralError*>(&e)) {
        return kExitValidation;
    }
    if (dynamic_cast<const fs::filesystem_error*>(&e)) return kExitIo;
    return kExitUsage;
}

namespace {

template <class T>
void put_le(std::ostream& os, T v) {
    static_assert(sizeof(T) == 8);
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    char buf[8];
    std::memcpy(buf, &bits, 8);
    os.write(buf, 8);
}

template <class T>
T get_le(std::istream& is) {
    char buf[8];
    if (!is.read(buf, 8)) throw IoError("snapshot is truncated");
    std::uint64_t bits;
    std::memcpy(&bits, buf, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    T v;
    std::memcpy(&v, &bits, 8);
    return v;
}

}  // namespace

void write_snapshot(const fs::path& path, const Field& u, double t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    put_le(os, t);
    put_le(os, static_cast<std::uint64_t>(u.size()));
    for (std::size_t i = 0; i < u.size(); ++i) {
        put_le(os, u[i].real());
        put_le(os, u[i].imag());
    }
    os.close();
    if (!os) throw IoError("write to '" + path.string() + "' failed");
}

Snapshot read_snapshot(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open snapshot '" + path.string() + "'");
    Snapshot s;
    s.t = get_le<double>(is);
    const auto n = get_le<std::uint64_t>(is);
    if (n > (std::uint64_t{1} << 32)) throw IoError("snapshot size field is implausible");
    s.samples.resize(n);
    for (auto& z : s.samples) {
        const double re = get_le<double>(is);
        const double im = get_le<double>(is);
        z = {re, im};
    }
    if (is.peek() != std::ifstream::traits_type::eof()) throw IoError("snapshot has trailing bytes");
    return s;
}

}  // namespace cglmix
