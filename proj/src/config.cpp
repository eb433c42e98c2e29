#include "cglmix/config.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cglmix/errors.hpp"
#include "cglmix/fields.hpp"
#include "cglmix/format.hpp"

namespace cglmix {

namespace {

namespace pt = boost::property_tree;

constexpr std::pair<ExperimentKind, std::string_view> kKinds[] = {
    {ExperimentKind::Simulate, "simulate"}, {ExperimentKind::Couple, "couple"},
    {ExperimentKind::Mixing, "mixing"},     {ExperimentKind::Tails, "tails"},
    {ExperimentKind::Poincare, "poincare"}, {ExperimentKind::Validate, "validate"},
};

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string list_text(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += fmt17(v[i]);
    }
    return out;
}

// Reads keys of one ptree into typed fields, recording malformed values and
// unknown keys instead of throwing on the first problem.
class Reader {
public:
    Reader(const pt::ptree& tree, std::vector<std::string>& errors) : tree_(tree), errors_(errors) {
        for (const auto& [section, body] : tree_) {
            if (body.empty() && !body.data().empty()) {
                errors_.push_back("key '" + section + "' must live inside a [section]");
            }
        }
    }

    void number(const std::string& key, double& out) {
        if (auto s = take(key)) {
            double v = 0.0;
            const char* first = s->data();
            const char* last = first + s->size();
            auto [ptr, ec] = std::from_chars(first, last, v);
            if (ec != std::errc{} || ptr != last) {
                bad(key, *s, "a number");
            } else {
                out = v;
            }
        }
    }

    template <class U>
    void integer(const std::string& key, U& out) {
        if (auto s = take(key)) {
            U v = 0;
            const char* first = s->data();
            const char* last = first + s->size();
            auto [ptr, ec] = std::from_chars(first, last, v);
            if (ec != std::errc{} || ptr != last) {
                bad(key, *s, "a nonnegative integer");
            } else {
                out = v;
            }
        }
    }

    void boolean(const std::string& key, bool& out) {
        if (auto s = take(key)) {
            std::string v = *s;
            std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
            if (v == "true" || v == "1" || v == "yes" || v == "on") {
                out = true;
            } else if (v == "false" || v == "0" || v == "no" || v == "off") {
                out = false;
            } else {
                bad(key, *s, "true or false");
            }
        }
    }

    void text(const std::string& key, std::string& out) {
        if (auto s = take(key)) out = *s;
    }

    void list(const std::string& key, std::vector<double>& out) {
        if (auto s = take(key)) {
            if (s->empty()) {
                out.clear();
                return;
            }
            try {
                out = parse_csv_doubles(*s);
            } catch (const IoError&) {
                bad(key, *s, "a comma-separated list of numbers");
            }
        }
    }

    void shape(const std::string& section, ShapeSpec& out) {
        text(section + ".kind", out.kind);
        number(section + ".norm", out.norm);
        number(section + ".width", out.width);
        number(section + ".center", out.center);
    }

    void report_unknown() {
        for (const auto& [section, body] : tree_) {
            for (const auto& [key, value] : body) {
                const std::string full = section + "." + key;
                if (!seen_.count(full)) errors_.push_back("unknown key '" + key + "' in [" + section + "]");
            }
        }
    }

private:
    std::optional<std::string> take(const std::string& key) {
        seen_.insert(key);
        auto node = tree_.get_child_optional(pt::ptree::path_type(key, '.'));
        if (!node) return std::nullopt;
        return trim(node->data());
    }

    void bad(const std::string& key, const std::string& value, const char* expected) {
        errors_.push_back(key + ": expected " + expected + ", got '" + value + "'");
    }

    const pt::ptree& tree_;
    std::vector<std::string>& errors_;
    std::set<std::string> seen_;
};

bool finite_all(std::initializer_list<double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

bool increasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (!(v[i] > v[i - 1])) return false;
    }
    return true;
}

void check_shape(const char* name, const ShapeSpec& s, bool allow_none, std::vector<std::string>& out) {
    const std::string n(name);
    const bool known = s.kind == "bump" || s.kind == "random" || s.kind == "zero" || (allow_none && s.kind == "none");
    if (!known) out.push_back(n + ".kind = '" + s.kind + "' is not one of bump, random, zero");
    if (!(s.norm >= 0.0) || !std::isfinite(s.norm)) out.push_back(n + ".norm must be finite and >= 0");
    if (!(s.width > 0.0) || !std::isfinite(s.width)) out.push_back(n + ".width must be positive");
    if (!std::isfinite(s.center)) out.push_back(n + ".center must be finite");
}

std::string num(double v) { return fmt17(v); }

}  // namespace

std::string_view kind_name(ExperimentKind kind) noexcept {
    for (const auto& [k, name] : kKinds) {
        if (k == kind) return name;
    }
    return "unknown";
}

std::optional<ExperimentKind> parse_kind(std::string_view name) noexcept {
    for (const auto& [k, n] : kKinds) {
        if (n == name) return k;
    }
    return std::nullopt;
}

std::vector<std::string> config_violations(const ExperimentConfig& c) {
    std::vector<std::string> v;
    const auto& g = c.grid;
    const auto& ph = c.physics;
    const auto& nz = c.noise;
    const auto& ct = c.control;
    const auto& r = c.run;

    if (!(g.X > 0.0) || !std::isfinite(g.X)) v.push_back("X = " + num(g.X) + " violates X > 0");
    if (g.n < 16 || (g.n & (g.n - 1)) != 0) v.push_back("n = " + std::to_string(g.n) + " must be a power of two >= 16");

    if (!finite_all({ph.a, ph.nu1, ph.nu2, ph.alpha1, ph.alpha2, ph.q})) v.push_back("physics coefficients must be finite");
    if (!(ph.a > 0.0)) v.push_back("a = " + num(ph.a) + " violates a > 0");
    if (!(ph.nu1 > 0.0)) v.push_back("nu1 = " + num(ph.nu1) + " violates ν₁ > 0");
    if (!(ph.alpha1 >= 0.0)) v.push_back("alpha1 = " + num(ph.alpha1) + " violates α₁ ≥ 0");
    if (!(ph.q > 0.0 && ph.q < 2.0)) v.push_back("q = " + num(ph.q) + " violates q ∈ (0,2)");
    check_shape("h", ph.h, true, v);

    const std::size_t modes = nz.coefficients.empty() ? nz.M : nz.coefficients.size();
    bool noise_on = false;
    if (nz.coefficients.empty()) {
        if (!(nz.b0 >= 0.0) || !std::isfinite(nz.b0)) v.push_back("b0 = " + num(nz.b0) + " must be finite and >= 0");
        if (!(nz.p > 1.5)) {
            v.push_back("p = " + num(nz.p) + " makes B₃ = Σ b_j² k_j² diverge; p > 3/2 is required");
        }
        noise_on = nz.b0 > 0.0;
    } else {
        for (std::size_t j = 0; j < nz.coefficients.size(); ++j) {
            const double b = nz.coefficients[j];
            if (!(b >= 0.0) || !std::isfinite(b)) v.push_back("b_" + std::to_string(j + 1) + " must be finite and >= 0");
            if (b > 0.0) noise_on = true;
        }
    }
    if (modes < 1) v.push_back("the noise needs at least one mode (M >= 1)");
    if (2 * modes + 2 >= g.n) {
        v.push_back("M = " + std::to_string(modes) + " basis elements need n > 2M + 2, got n = " + std::to_string(g.n));
    }

    if (ct.N < 1) v.push_back("N = 0: at least one controlled mode is required");
    if (noise_on) {
        for (std::size_t j = 1; j <= ct.N; ++j) {
            const double b = j <= modes ? (nz.coefficients.empty() ? 1.0 : nz.coefficients[j - 1]) : 0.0;
            if (!(b > 0.0)) {
                v.push_back("b_" + std::to_string(j) + " = 0 but N = " + std::to_string(ct.N) +
                            ": b_j > 0 is required for every j ≤ N");
                break;
            }
        }
    }
    if (!(ct.K >= 0.0) || !std::isfinite(ct.K)) v.push_back("K = " + num(ct.K) + " must be >= 0 (0 calibrates)");
    if (!(ct.L >= 0.0) || !std::isfinite(ct.L)) v.push_back("L = " + num(ct.L) + " violates L ≥ 0");
    if (!(ct.M_coef >= 0.0) || !std::isfinite(ct.M_coef)) v.push_back("M_coef = " + num(ct.M_coef) + " violates M ≥ 0");
    if (!(ct.rho > 0.0) || !std::isfinite(ct.rho)) v.push_back("rho = " + num(ct.rho) + " violates ρ > 0");
    if (ct.pilot_size < 1) v.push_back("pilot_size must be >= 1");

    if (!(r.dt > 0.0) || !std::isfinite(r.dt)) v.push_back("dt = " + num(r.dt) + " violates dt > 0");
    if (!(r.horizon > 0.0) || !std::isfinite(r.horizon)) v.push_back("horizon = " + num(r.horizon) + " violates horizon > 0");
    if (r.dt > 0.0 && r.horizon > 0.0 && r.horizon / r.dt > 1e9) v.push_back("horizon / dt exceeds 1e9 steps");
    if (r.ensemble_size < 1) v.push_back("ensemble_size must be >= 1");
    if (r.sample_every < 1) v.push_back("sample_every must be >= 1");
    if (!(r.blowup_norm > 0.0)) v.push_back("blowup_norm must be positive");

    check_shape("initial", c.initial, false, v);

    if (!(c.couple.distance > 0.0) || !std::isfinite(c.couple.distance)) v.push_back("couple.distance must be positive");

    const auto& mx = c.mixing;
    if (!(mx.norm_a >= 0.0) || !(mx.norm_b >= 0.0)) v.push_back("mixing norms must be >= 0");
    if (mx.family_size < 2) v.push_back("mixing.family_size must be >= 2");
    if (!(mx.time_step > 0.0)) v.push_back("mixing.time_step must be positive");
    if (!(mx.fit_t_min < mx.fit_t_max) || !(mx.fit_t_min >= 0.0)) v.push_back("mixing fit window needs 0 <= fit_t_min < fit_t_max");

    const auto& tl = c.tails;
    if (tl.rho_list.size() < 3 || !increasing(tl.rho_list) || !(tl.rho_list.front() > 0.0)) {
        v.push_back("tails.rho_list must hold at least three increasing positive values");
    }
    if (tl.l_list.empty() || !increasing(tl.l_list) || !(tl.l_list.front() >= 0.0)) {
        v.push_back("tails.l_list must be nonempty, increasing and nonnegative");
    }
    if (!(tl.C3 >= 0.0)) v.push_back("tails.C3 must be >= 0");

    const auto& pc = c.poincare;
    if (!(pc.A > 0.0 && pc.A <= 2.0 * g.X)) v.push_back("poincare.A = " + num(pc.A) + " violates 0 < A ≤ 2X");
    if (!(pc.s > 0.0 && pc.s <= 2.0)) v.push_back("poincare.s = " + num(pc.s) + " violates s ∈ (0,2]");
    if (pc.N_list.empty() || !increasing(pc.N_list) || !(pc.N_list.front() >= 1.0)) {
        v.push_back("poincare.N_list must be nonempty, increasing and >= 1");
    } else {
        for (double N : pc.N_list) {
            if (N != std::floor(N)) v.push_back("poincare.N_list entries must be integers");
        }
        if (2 * pc.N_list.back() + 2 >= static_cast<double>(g.n)) v.push_back("poincare.N_list exceeds the basis the grid supports");
    }
    if (pc.samples < 1) v.push_back("poincare.samples must be >= 1");
    if (pc.max_mode < 0 || static_cast<std::size_t>(pc.max_mode) >= g.n / 2) v.push_back("poincare.max_mode must lie below n/2");
    return v;
}

ExperimentConfig parse_config(std::string_view text) {
    pt::ptree tree;
    {
        std::istringstream is{std::string(text)};
        try {
            pt::read_ini(is, tree);
        } catch (const pt::ini_parser_error& e) {
            throw ConfigError({std::string("malformed INI: ") + e.message() + " at line " + std::to_string(e.line())});
        }
    }
    ExperimentConfig c;
    std::vector<std::string> errors;
    Reader rd(tree, errors);

    std::string kind(kind_name(c.kind));
    rd.text("run.kind", kind);
    if (auto k = parse_kind(kind)) {
        c.kind = *k;
    } else {
        errors.push_back("run.kind = '" + kind + "' is not one of simulate, couple, mixing, tails, poincare, validate");
    }

    rd.number("grid.X", c.grid.X);
    rd.integer("grid.n", c.grid.n);

    rd.number("physics.a", c.physics.a);
    rd.number("physics.nu1", c.physics.nu1);
    rd.number("physics.nu2", c.physics.nu2);
    rd.number("physics.alpha1", c.physics.alpha1);
    rd.number("physics.alpha2", c.physics.alpha2);
    rd.number("physics.q", c.physics.q);
    rd.text("physics.h_kind", c.physics.h.kind);
    rd.number("physics.h_norm", c.physics.h.norm);
    rd.number("physics.h_width", c.physics.h.width);
    rd.number("physics.h_center", c.physics.h.center);

    rd.number("noise.b0", c.noise.b0);
    rd.number("noise.p", c.noise.p);
    rd.integer("noise.M", c.noise.M);
    rd.list("noise.coefficients", c.noise.coefficients);

    rd.integer("control.N", c.control.N);
    rd.number("control.K", c.control.K);
    rd.number("control.L", c.control.L);
    rd.number("control.M_coef", c.control.M_coef);
    rd.number("control.rho", c.control.rho);
    rd.integer("control.pilot_size", c.control.pilot_size);

    rd.number("run.dt", c.run.dt);
    rd.number("run.horizon", c.run.horizon);
    rd.integer("run.ensemble_size", c.run.ensemble_size);
    rd.integer("run.seed", c.run.seed);
    rd.integer("run.sample_every", c.run.sample_every);
    rd.boolean("run.dealias", c.run.dealias);
    rd.number("run.blowup_norm", c.run.blowup_norm);

    rd.shape("initial", c.initial);

    rd.number("couple.distance", c.couple.distance);
    rd.boolean("couple.stopping", c.couple.stopping);

    rd.number("mixing.norm_a", c.mixing.norm_a);
    rd.number("mixing.norm_b", c.mixing.norm_b);
    rd.integer("mixing.family_size", c.mixing.family_size);
    rd.number("mixing.time_step", c.mixing.time_step);
    rd.number("mixing.fit_t_min", c.mixing.fit_t_min);
    rd.number("mixing.fit_t_max", c.mixing.fit_t_max);

    rd.list("tails.rho_list", c.tails.rho_list);
    rd.list("tails.l_list", c.tails.l_list);
    rd.number("tails.C3", c.tails.C3);

    rd.number("poincare.A", c.poincare.A);
    rd.number("poincare.s", c.poincare.s);
    rd.list("poincare.N_list", c.poincare.N_list);
    rd.integer("poincare.samples", c.poincare.samples);
    rd.integer("poincare.max_mode", c.poincare.max_mode);

    rd.report_unknown();
    if (errors.empty()) errors = config_violations(c);
    if (!errors.empty()) throw ConfigError(std::move(errors));
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("cannot read config file '" + path + "'");
    return parse_config(ss.str());
}

std::string to_ini(const ExperimentConfig& c) {
    std::ostringstream o;
    o << "[run]\n"
      << "kind = " << kind_name(c.kind) << "\n"
      << "dt = " << num(c.run.dt) << "\n"
      << "horizon = " << num(c.run.horizon) << "\n"
      << "ensemble_size = " << c.run.ensemble_size << "\n"
      << "seed = " << c.run.seed << "\n"
      << "sample_every = " << c.run.sample_every << "\n"
      << "dealias = " << (c.run.dealias ? "true" : "false") << "\n"
      << "blowup_norm = " << num(c.run.blowup_norm) << "\n\n";
    o << "[grid]\n"
      << "X = " << num(c.grid.X) << "\n"
      << "n = " << c.grid.n << "\n\n";
    o << "[physics]\n"
      << "a = " << num(c.physics.a) << "\n"
      << "nu1 = " << num(c.physics.nu1) << "\n"
      << "nu2 = " << num(c.physics.nu2) << "\n"
      << "alpha1 = " << num(c.physics.alpha1) << "\n"
      << "alpha2 = " << num(c.physics.alpha2) << "\n"
      << "q = " << num(c.physics.q) << "\n"
      << "h_kind = " << c.physics.h.kind << "\n"
      << "h_norm = " << num(c.physics.h.norm) << "\n"
      << "h_width = " << num(c.physics.h.width) << "\n"
      << "h_center = " << num(c.physics.h.center) << "\n\n";
    o << "[noise]\n"
      << "b0 = " << num(c.noise.b0) << "\n"
      << "p = " << num(c.noise.p) << "\n"
      << "M = " << c.noise.M << "\n"
      << "coefficients = " << list_text(c.noise.coefficients) << "\n\n";
    o << "[control]\n"
      << "N = " << c.control.N << "\n"
      << "K = " << num(c.control.K) << "\n"
      << "L = " << num(c.control.L) << "\n"
      << "M_coef = " << num(c.control.M_coef) << "\n"
      << "rho = " << num(c.control.rho) << "\n"
      << "pilot_size = " << c.control.pilot_size << "\n\n";
    o << "[initial]\n"
      << "kind = " << c.initial.kind << "\n"
      << "norm = " << num(c.initial.norm) << "\n"
      << "width = " << num(c.initial.width) << "\n"
      << "center = " << num(c.initial.center) << "\n\n";
    o << "[couple]\n"
      << "distance = " << num(c.couple.distance) << "\n"
      << "stopping = " << (c.couple.stopping ? "true" : "false") << "\n\n";
    o << "[mixing]\n"
      << "norm_a = " << num(c.mixing.norm_a) << "\n"
      << "norm_b = " << num(c.mixing.norm_b) << "\n"
      << "family_size = " << c.mixing.family_size << "\n"
      << "time_step = " << num(c.mixing.time_step) << "\n"
      << "fit_t_min = " << num(c.mixing.fit_t_min) << "\n"
      << "fit_t_max = " << num(c.mixing.fit_t_max) << "\n\n";
    o << "[tails]\n"
      << "rho_list = " << list_text(c.tails.rho_list) << "\n"
      << "l_list = " << list_text(c.tails.l_list) << "\n"
      << "C3 = " << num(c.tails.C3) << "\n\n";
    o << "[poincare]\n"
      << "A = " << num(c.poincare.A) << "\n"
      << "s = " << num(c.poincare.s) << "\n"
      << "N_list = " << list_text(c.poincare.N_list) << "\n"
      << "samples = " << c.poincare.samples << "\n"
      << "max_mode = " << c.poincare.max_mode << "\n";
    return o.str();
}

std::string git_blob_sha1(std::string_view content) {
    const std::string header = "blob " + std::to_string(content.size()) + '\0';
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw Error("cannot allocate a SHA-1 context");
    const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                    EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                    EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                    EVP_DigestFinal_ex(ctx, digest, &len) == 1;
    EVP_MD_CTX_free(ctx);
    if (!ok) throw Error("SHA-1 digest failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

std::string config_hash(const ExperimentConfig& config) { return git_blob_sha1(to_ini(config)); }

Field make_shape(const ShapeSpec& shape, const GridPtr& grid, const StreamKey& stream) {
    if (shape.kind == "zero" || shape.kind == "none" || shape.norm == 0.0) return Field(grid);
    if (shape.kind == "bump") return gaussian_bump(grid, shape.norm, shape.width, shape.center);
    if (shape.kind == "random") return random_localized_field(grid, shape.norm, stream, shape.width);
    throw DomainError("unknown field shape '" + shape.kind + "'");
}

Model build_model(const ExperimentConfig& c) {
    auto violations = config_violations(c);
    if (!violations.empty()) throw ConfigError(std::move(violations));
    Model m;
    m.grid = Grid::make(c.grid.X, c.grid.n);
    m.params.a = c.physics.a;
    m.params.nu = {c.physics.nu1, c.physics.nu2};
    m.params.alpha = {c.physics.alpha1, c.physics.alpha2};
    m.params.q = c.physics.q;
    if (c.physics.h.kind != "none" && c.physics.h.kind != "zero" && c.physics.h.norm > 0.0) {
        m.params.h = make_shape(c.physics.h, m.grid, stream_for(c.run.seed, 0, 4));
    }
    const std::size_t modes = c.noise.coefficients.empty() ? c.noise.M : c.noise.coefficients.size();
    m.basis = std::make_shared<const TrigBasis>(make_basis(m.grid, modes));
    if (!c.noise.coefficients.empty()) {
        m.noise = make_explicit_coefficients(c.noise.coefficients, *m.basis);
    } else if (c.noise.b0 > 0.0) {
        m.noise = make_coefficients(c.noise.b0, c.noise.p, modes, *m.basis);
    } else {
        m.noise = make_silent_noise(modes);
    }
    m.dt = c.run.dt;
    m.dealias = c.run.dealias;
    m.blowup_norm = c.run.blowup_norm;
    return m;
}

StoppingParams stopping_params(const ExperimentConfig& c, double K) {
    StoppingParams sp;
    sp.K = K;
    sp.L = c.control.L;
    sp.M = c.control.M_coef;
    sp.rho = c.control.rho;
    return sp;
}

}  // namespace cglmix
