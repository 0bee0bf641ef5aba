#include "tubepi/config.hpp"

#include "tubepi/errors.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace tubepi {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw Error(ErrorKind::Config, "empty list entry");
        out.push_back(item);
    }
    if (out.empty()) throw Error(ErrorKind::Config, "empty list");
    return out;
}

double to_double(const std::string& s) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v))
        throw Error(ErrorKind::Config, "expected a number, got '" + s + "'");
    return v;
}

template <class Int>
Int to_int(const std::string& s) {
    Int v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw Error(ErrorKind::Config, "expected an integer, got '" + s + "'");
    return v;
}

bool to_bool(const std::string& s) {
    if (s == "true" || s == "yes" || s == "1") return true;
    if (s == "false" || s == "no" || s == "0") return false;
    throw Error(ErrorKind::Config, "expected true or false, got '" + s + "'");
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + items[i];
    return out;
}

struct Field {
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

Field number(double ExperimentConfig::*m) {
    return {[m](ExperimentConfig& c, const std::string& v) { c.*m = to_double(v); },
            [m](const ExperimentConfig& c) { return fmt(c.*m); }};
}

Field optional_number(std::optional<double> ExperimentConfig::*m) {
    return {[m](ExperimentConfig& c, const std::string& v) {
                if (v == "auto") c.*m = std::nullopt;
                else c.*m = to_double(v);
            },
            [m](const ExperimentConfig& c) { return (c.*m) ? fmt(*(c.*m)) : std::string("auto"); }};
}

template <class Int>
Field integer(Int ExperimentConfig::*m) {
    return {[m](ExperimentConfig& c, const std::string& v) { c.*m = to_int<Int>(v); },
            [m](const ExperimentConfig& c) { return std::to_string(c.*m); }};
}

Field text(std::string ExperimentConfig::*m) {
    return {[m](ExperimentConfig& c, const std::string& v) { c.*m = v; },
            [m](const ExperimentConfig& c) { return c.*m; }};
}

Field flag(bool ExperimentConfig::*m) {
    return {[m](ExperimentConfig& c, const std::string& v) { c.*m = to_bool(v); },
            [m](const ExperimentConfig& c) { return std::string((c.*m) ? "true" : "false"); }};
}

Field numbers(std::vector<double> ExperimentConfig::*m) {
    return {[m](ExperimentConfig& c, const std::string& v) {
                std::vector<double> out;
                for (const auto& s : split_list(v)) out.push_back(to_double(s));
                c.*m = out;
            },
            [m](const ExperimentConfig& c) {
                std::vector<std::string> s;
                for (double x : c.*m) s.push_back(fmt(x));
                return join(s);
            }};
}

// Fixed key order; effective() emits in this order.
const std::vector<std::pair<std::string, Field>>& schema() {
    static const std::vector<std::pair<std::string, Field>> fields = {
        {"chart.dim", integer(&ExperimentConfig::dim)},
        {"chart.metric", text(&ExperimentConfig::metric)},
        {"chart.metric_alpha", number(&ExperimentConfig::metric_alpha)},
        {"potential.name", text(&ExperimentConfig::potential)},
        {"potential.omega", number(&ExperimentConfig::omega)},
        {"potential.lambda", number(&ExperimentConfig::lambda)},
        {"potential.value", number(&ExperimentConfig::constant_value)},
        {"potential.table", text(&ExperimentConfig::table_file)},
        {"path.start", numbers(&ExperimentConfig::start)},
        {"path.end", numbers(&ExperimentConfig::end)},
        {"path.duration", number(&ExperimentConfig::duration)},
        {"physics.hbar", number(&ExperimentConfig::hbar)},
        {"tube.radius", optional_number(&ExperimentConfig::radius)},
        {"tube.eta", optional_number(&ExperimentConfig::eta)},
        {"tube.delta_e", optional_number(&ExperimentConfig::delta_E)},
        {"tube.coercivity", number(&ExperimentConfig::coercivity)},
        {"tube.kappa", number(&ExperimentConfig::kappa)},
        {"tube.power", integer(&ExperimentConfig::barrier_power)},
        {"sde.sigma", number(&ExperimentConfig::sigma)},
        {"sde.xi0", number(&ExperimentConfig::xi0)},
        {"sde.steps", integer(&ExperimentConfig::steps)},
        {"sde.law", text(&ExperimentConfig::law)},
        {"sde.energy_cost", flag(&ExperimentConfig::energy_cost)},
        {"mc.samples", integer(&ExperimentConfig::samples)},
        {"mc.seed", integer(&ExperimentConfig::seed)},
        {"mc.chunk", integer(&ExperimentConfig::chunk)},
        {"mc.workers", integer(&ExperimentConfig::workers)},
        {"mc.dump_count", integer(&ExperimentConfig::dump_count)},
        {"propagator.oracle", text(&ExperimentConfig::oracle)},
        {"propagator.mode", text(&ExperimentConfig::mode)},
        {"propagator.tolerance_se", number(&ExperimentConfig::tolerance_se)},
        {"propagator.tolerance_rel", number(&ExperimentConfig::tolerance_rel)},
        {"convergence.ladder",
         {[](ExperimentConfig& c, const std::string& v) {
              std::vector<int> out;
              for (const auto& s : split_list(v)) out.push_back(to_int<int>(s));
              c.ladder = out;
          },
          [](const ExperimentConfig& c) {
              std::vector<std::string> s;
              for (int x : c.ladder) s.push_back(std::to_string(x));
              return join(s);
          }}},
        {"theta.list",
         {[](ExperimentConfig& c, const std::string& v) {
              std::vector<Complex> out;
              for (const auto& s : split_list(v)) out.push_back(parse_complex(s));
              c.thetas = out;
          },
          [](const ExperimentConfig& c) {
              std::vector<std::string> s;
              for (auto z : c.thetas) s.push_back(format_complex(z));
              return join(s);
          }}},
        {"theta.order", integer(&ExperimentConfig::theta_order)},
        {"probe.paths", text(&ExperimentConfig::probe_paths)},
        {"probe.pole_guard", number(&ExperimentConfig::pole_guard)},
    };
    return fields;
}

const Field* find_field(const std::string& key) {
    for (const auto& [k, f] : schema())
        if (k == key) return &f;
    return nullptr;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorKind::Config, what);
}

}  // namespace

std::string format_complex(Complex z) {
    if (z.imag() == 0.0) return fmt(z.real());
    std::string im = fmt(z.imag()) + "i";
    if (z.real() == 0.0) return im;
    return fmt(z.real()) + (z.imag() < 0.0 ? "" : "+") + im;
}

Complex parse_complex(const std::string& raw) {
    const std::string s = trim(raw);
    if (s.empty()) throw Error(ErrorKind::Config, "empty complex number");
    if (s.back() != 'i') return {to_double(s), 0.0};
    const std::string body = s.substr(0, s.size() - 1);
    // Split at the last sign that is not leading and not part of an exponent.
    std::size_t cut = std::string::npos;
    for (std::size_t k = body.size(); k-- > 1;) {
        if ((body[k] == '+' || body[k] == '-') && body[k - 1] != 'e' && body[k - 1] != 'E') {
            cut = k;
            break;
        }
    }
    auto imag_part = [](const std::string& t) {
        if (t.empty() || t == "+") return 1.0;
        if (t == "-") return -1.0;
        return to_double(t[0] == '+' ? t.substr(1) : t);
    };
    if (cut == std::string::npos) return {0.0, imag_part(body)};
    return {to_double(body.substr(0, cut)), imag_part(body.substr(cut))};
}

ExperimentConfig ExperimentConfig::parse(std::istream& in, const std::string& origin) {
    ExperimentConfig cfg;
    std::set<std::string> seen;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(number) + ": ";
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error(ErrorKind::Config, where + "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const Field* field = find_field(key);
        if (!field) throw Error(ErrorKind::Config, where + "unknown key '" + key + "'");
        if (!seen.insert(key).second) throw Error(ErrorKind::Config, where + "duplicate key '" + key + "'");
        if (value.empty() && key != "potential.table" && key != "probe.paths")
            throw Error(ErrorKind::Config, where + "missing value for '" + key + "'");
        try {
            field->set(cfg, value);
        } catch (const Error& e) {
            throw Error(ErrorKind::Config, where + key + ": " + e.what());
        }
    }
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw Error(ErrorKind::Config, origin + ": " + e.what());
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot open config '" + path + "'");
    auto cfg = parse(in, path);
    cfg.base_dir = std::filesystem::path(path).parent_path().string();
    return cfg;
}

void ExperimentConfig::validate() const {
    require(dim >= 1, "chart.dim must be at least 1");
    require(metric == "flat" || metric == "conformal", "chart.metric must be flat or conformal");
    require(potential == "free" || potential == "constant" || potential == "harmonic" || potential == "quartic" ||
                potential == "table",
            "potential.name must be one of free, constant, harmonic, quartic, table");
    require(omega > 0.0, "potential.omega must be positive");
    require(lambda >= 0.0, "potential.lambda must be non-negative");
    require(potential != "table" || (!table_file.empty() && dim == 1),
            "potential.table needs a file and chart.dim = 1");
    require(start.size() == static_cast<std::size_t>(dim), "path.start must have chart.dim entries");
    require(end.size() == static_cast<std::size_t>(dim), "path.end must have chart.dim entries");
    require(duration > 0.0, "path.duration must be positive");
    require(hbar > 0.0, "physics.hbar must be positive");
    require(!radius || *radius > 0.0, "tube.radius must be positive");
    require(!eta || *eta > 0.0, "tube.eta must be positive");
    require(!delta_E || *delta_E > 0.0, "tube.delta_e must be positive");
    require(coercivity > 0.0, "tube.coercivity must be positive");
    require(kappa >= 0.0, "tube.kappa must be non-negative");
    require(barrier_power >= 2, "tube.power must be at least 2");
    require(sigma > 0.0, "sde.sigma must be positive");
    require(xi0 >= 0.0, "sde.xi0 must be non-negative");
    require(steps >= 2, "sde.steps must be at least 2");
    require(law == "reweighted" || law == "drifted", "sde.law must be reweighted or drifted");
    require(samples >= 1, "mc.samples must be positive");
    require(chunk >= 1, "mc.chunk must be positive");
    require(workers >= 1, "mc.workers must be positive");
    require(oracle == "auto" || oracle == "heat" || oracle == "mehler" || oracle == "pde" || oracle == "none",
            "propagator.oracle must be one of auto, heat, mehler, pde, none");
    require(mode == "euclidean" || mode == "lorentzian", "propagator.mode must be euclidean or lorentzian");
    require(tolerance_se > 0.0 && tolerance_rel > 0.0, "propagator tolerances must be positive");
    require(!ladder.empty(), "convergence.ladder must not be empty");
    for (int n : ladder)
        require(n >= 1 && steps % n == 0, "convergence.ladder entry " + std::to_string(n) +
                                              " must divide sde.steps = " + std::to_string(steps));
    require(!thetas.empty(), "theta.list must not be empty");
    require(theta_order >= 0 && theta_order <= 30, "theta.order must lie in [0, 30]");
    require(pole_guard > 0.0 && pole_guard < 1.0, "probe.pole_guard must lie in (0, 1)");
}

std::string ExperimentConfig::effective() const {
    std::string out;
    for (const auto& [k, f] : schema()) out += k + " = " + f.get(*this) + "\n";
    return out;
}

std::uint64_t ExperimentConfig::hash() const {
    std::istringstream lines(effective());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::string line; std::getline(lines, line);) {
        if (line.rfind("mc.workers ", 0) == 0) continue;
        for (unsigned char c : line + '\n') {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

std::string ExperimentConfig::hash_hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
    return buf;
}

std::string ExperimentConfig::resolve(const std::string& file) const {
    std::filesystem::path p(file);
    if (p.is_absolute() || base_dir.empty()) return p.string();
    return (std::filesystem::path(base_dir) / p).string();
}

Potential ExperimentConfig::make_potential() const {
    if (potential == "free") return potentials::free();
    if (potential == "constant") return potentials::constant(constant_value);
    if (potential == "harmonic") return potentials::harmonic(omega);
    if (potential == "quartic") return potentials::quartic(lambda);
    const std::string path = resolve(table_file);
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot open potential table '" + path + "'");
    std::vector<double> xs, vs;
    std::string line;
    int row = 0;
    while (std::getline(in, line)) {
        ++row;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw Error(ErrorKind::Parse, path + ": row " + std::to_string(row) + ": expected x,v");
        const std::string a = trim(line.substr(0, comma));
        const std::string b = trim(line.substr(comma + 1));
        if (row == 1 && a == "x") continue;
        try {
            xs.push_back(to_double(a));
            vs.push_back(to_double(b));
        } catch (const Error& e) {
            throw Error(ErrorKind::Parse, path + ": row " + std::to_string(row) + ": " + e.what());
        }
    }
    return potentials::table(std::move(xs), std::move(vs));
}

MetricChart ExperimentConfig::make_chart() const {
    const Potential v = make_potential();
    if (metric == "flat") return make_flat_chart(dim, v);
    return make_user_chart(dim, metrics::conformal(metric_alpha), v);
}

SDEParams ExperimentConfig::make_sde() const {
    SDEParams p;
    p.sigma = sigma;
    p.xi0 = xi0;
    p.barrier_strength = kappa;
    p.barrier_power = barrier_power;
    p.steps = steps;
    p.energy_cost = energy_cost;
    p.law = law == "drifted" ? SamplingLaw::Drifted : SamplingLaw::Reweighted;
    return p;
}

Signature ExperimentConfig::signature() const {
    return mode == "lorentzian" ? Signature::Lorentzian : Signature::Euclidean;
}

Vec ExperimentConfig::start_point() const { return Eigen::Map<const Vec>(start.data(), dim); }
Vec ExperimentConfig::end_point() const { return Eigen::Map<const Vec>(end.data(), dim); }

}  // namespace tubepi
