#include "pomc/config.hpp"

#include "pomc/error.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace pomc::cli {

namespace {

using boost::property_tree::ptree;

[[noreturn]] void parse_error(const std::string& message) { fail(ErrorKind::ConfigParse, message); }

std::string trim(const std::string& text) {
    const auto first = text.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = text.find_last_not_of(" \t\r");
    return text.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string part;
    std::istringstream in(text);
    while (std::getline(in, part, sep)) parts.push_back(trim(part));
    if (!text.empty() && text.back() == sep) parts.emplace_back();
    return parts;
}

double to_real(const std::string& key, const std::string& raw) {
    const std::string text = trim(raw);
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(v)) {
        parse_error(key + ": expected a finite number, got '" + raw + "'");
    }
    return v;
}

template <typename Int>
Int to_integer(const std::string& key, const std::string& raw) {
    const std::string text = trim(raw);
    Int v{};
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        parse_error(key + ": expected an integer, got '" + raw + "'");
    }
    return v;
}

std::size_t to_size(const std::string& key, const std::string& raw) { return to_integer<std::size_t>(key, raw); }

std::vector<double> to_reals(const std::string& key, const std::string& raw) {
    std::vector<double> out;
    for (const auto& part : split(raw, ',')) out.push_back(to_real(key, part));
    return out;
}

estimate::Interval to_interval(const std::string& key, const std::string& raw) {
    const auto parts = split(raw, ':');
    if (parts.size() != 2) parse_error(key + ": expected lo:hi, got '" + raw + "'");
    const estimate::Interval iv{to_real(key, parts[0]), to_real(key, parts[1])};
    if (iv.lo > iv.hi) parse_error(key + ": interval has lo > hi");
    return iv;
}

hmm::InitialLaw to_law(const std::string& key, const std::string& raw) {
    const auto parts = split(raw, ':');
    if (parts.size() != 2) parse_error(key + ": expected dirac:x or uniform:upper, got '" + raw + "'");
    const double v = to_real(key, parts[1]);
    if (parts[0] == "dirac") {
        if (v < 0.0) parse_error(key + ": point mass must sit at x >= 0");
        return hmm::InitialLaw::dirac(v);
    }
    if (parts[0] == "uniform") {
        if (v <= 0.0) parse_error(key + ": uniform upper bound must be positive");
        return hmm::InitialLaw::uniform(v);
    }
    parse_error(key + ": unknown initial law '" + parts[0] + "'");
}

AxisSpec to_axis(const std::string& raw) {
    const auto parts = split(raw, ':');
    if (parts.size() != 4) parse_error("profile.axes: expected name:lo:hi:count, got '" + raw + "'");
    AxisSpec axis{parts[0], to_real("profile.axes", parts[1]), to_real("profile.axes", parts[2]),
                  to_size("profile.axes", parts[3])};
    if (axis.count == 0 || axis.lo > axis.hi || (axis.count == 1 && axis.lo != axis.hi)) {
        parse_error("profile.axes: axis '" + raw + "' needs lo <= hi and count >= 1 (count 1 only for lo == hi)");
    }
    return axis;
}

std::string model_name(Family family, std::size_t d) {
    return family == Family::Nm ? "nm(" + std::to_string(d) + ")" : to_string(family);
}

std::pair<Family, std::size_t> parse_model(const std::string& raw) {
    const std::string text = trim(raw);
    if (text == "hmm1") return {Family::Hmm1, 1};
    if (text == "nbin") return {Family::Nbin, 1};
    std::string digits;
    if (text.rfind("nm(", 0) == 0 && text.back() == ')') digits = text.substr(3, text.size() - 4);
    else if (text.rfind("nm", 0) == 0) digits = text.substr(2);
    if (!digits.empty()) {
        const auto d = to_size("experiment.model", digits);
        if (d < 1) parse_error("experiment.model: mixture dimension must be >= 1");
        return {Family::Nm, d};
    }
    parse_error("experiment.model: expected hmm1, nbin or nm(d), got '" + raw + "'");
}

// Shortest text that parses back to the same double.
std::string real_text(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

std::string join_reals(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out += real_text(values[i]);
    }
    return out;
}

std::string law_text(const hmm::InitialLaw& law) {
    return (law.kind == hmm::InitialLaw::Kind::Dirac ? "dirac:" : "uniform:") + real_text(law.value);
}

const std::map<std::string, std::set<std::string>>& known_keys() {
    static const std::map<std::string, std::set<std::string>> keys{
        {"experiment",
         {"command", "preset", "model", "nb_parametrization", "seed", "n", "n_list", "replicates", "burn", "workers",
          "output_dir", "data"}},
        {"theta_star", {}},
        {"box", {}},
        {"grid", {"x_max", "n_cells", "spacing", "stretch"}},
        {"noise", {"alpha", "scale", "sigma"}},
        {"init", {"xi", "xi_alt", "x_init", "x_alt"}},
        {"fit", {"resolution", "min_n", "max_scan_points", "max_iterations", "ftol", "xtol"}},
        {"profile", {"truncation", "batches", "axes"}},
        {"ergodicity", {"excursions", "cap", "beta"}},
    };
    return keys;
}

double default_m_upper(const ExperimentConfig& cfg) {
    double m_upper = std::get<ThetaHmm>(cfg.theta_star).m;
    for (const auto& [name, iv] : cfg.box)
        if (name == "m") m_upper = std::max(m_upper, iv.hi);
    return m_upper;
}

}  // namespace

std::string to_string(Command command) {
    switch (command) {
        case Command::Simulate: return "simulate";
        case Command::Fit: return "fit";
        case Command::KlProfile: return "kl-profile";
        case Command::Consistency: return "consistency";
        case Command::FilterForget: return "filter-forget";
        case Command::ReturnTail: return "return-tail";
        case Command::Moment: return "moment";
    }
    return "unknown";
}

Command command_from_string(const std::string& name) {
    for (Command c : {Command::Simulate, Command::Fit, Command::KlProfile, Command::Consistency, Command::FilterForget,
                      Command::ReturnTail, Command::Moment}) {
        if (to_string(c) == name) return c;
    }
    parse_error("unknown command '" + name + "'");
}

std::vector<double> AxisSpec::values() const {
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (count == 1) {
            out[i] = lo;
            continue;
        }
        const double t = static_cast<double>(i) / static_cast<double>(count - 1);
        out[i] = i + 1 == count ? hi : lo * (1.0 - t) + hi * t;
    }
    return out;
}

ModelSpec ExperimentConfig::model() const {
    ModelSpec spec;
    switch (family) {
        case Family::Hmm1: spec = hmm_spec(noise, grid, xi); break;
        case Family::Nbin: spec = nbin_spec(nb); break;
        case Family::Nm: spec = nm_spec(d); break;
    }
    spec.x_init = x_init;
    return spec;
}

estimate::ThetaBox ExperimentConfig::theta_box() const {
    return estimate::ThetaBox::around(theta_star, box);
}

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig cfg;
    cfg.preset = name;
    if (name == "hmm1-default") {
        cfg.family = Family::Hmm1;
        cfg.theta_star = ThetaHmm{1.0, 0.8};
        cfg.box = {{"m", {0.5, 2.0}}, {"a", {0.2, 1.4}}};
        cfg.grid = hmm::default_grid(2.0);
        cfg.replicates = 5;
        cfg.fit.resolution = 9;
        cfg.truncation = 50;
        cfg.axes = {{"a", 0.2, 1.4, 13}};
        cfg.cap = 1'000'000;
        return cfg;
    }
    if (name == "nbin-default") {
        cfg.family = Family::Nbin;
        cfg.theta_star = ThetaNbin{1.0, 0.3, 0.1, 4.0};
        cfg.box = {{"omega", {0.5, 2.0}}, {"a", {0.15, 0.38}}, {"b", {0.06, 0.12}}, {"r", {3.0, 5.0}}};
        cfg.replicates = 5;
        cfg.fit.resolution = 9;
        cfg.axes = {{"a", 0.1, 0.5, 15}};
        cfg.x_alt = {10.0};
        return cfg;
    }
    if (name == "nm2-default") {
        cfg.family = Family::Nm;
        cfg.d = 2;
        cfg.theta_star = ThetaNm{{0.3, 0.7}, {0.2, 1.0}, {0.0, 0.0, 0.0, 0.0}, {0.6, 0.2}};
        cfg.box = {{"gamma1", {0.1, 0.5}}, {"omega1", {0.1, 0.4}}, {"omega2", {0.5, 2.0}},
                   {"b1", {0.2, 1.0}},     {"b2", {0.05, 0.4}}};
        cfg.replicates = 5;
        cfg.fit.resolution = 7;
        cfg.axes = {{"gamma1", 0.1, 0.5, 9}, {"b1", 0.2, 1.0, 9}};
        cfg.x_alt = {10.0, 10.0};
        return cfg;
    }
    parse_error("unknown preset '" + name + "' (expected hmm1-default, nbin-default or nm2-default)");
}

ExperimentConfig parse_config(const std::string& text) {
    ptree pt;
    try {
        std::istringstream in(text);
        boost::property_tree::ini_parser::read_ini(in, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        parse_error("line " + std::to_string(e.line()) + ": " + e.message());
    }
    for (const auto& [section, body] : pt) {
        const auto it = known_keys().find(section);
        if (!body.data().empty()) parse_error("key '" + section + "' must live inside a [section]");
        if (it == known_keys().end()) parse_error("unknown section [" + section + "]");
        if (it->second.empty()) continue;  // theta_star and box are checked against coordinate names
        for (const auto& [key, value] : body) {
            if (!it->second.count(key)) parse_error("unknown key '" + key + "' in [" + section + "]");
        }
    }
    auto get = [&](const std::string& section, const std::string& key) -> std::optional<std::string> {
        const auto sec = pt.get_child_optional(section);
        if (!sec) return std::nullopt;
        const auto v = sec->get_optional<std::string>(key);
        if (!v) return std::nullopt;
        return trim(*v);
    };

    ExperimentConfig cfg;
    const auto preset_name = get("experiment", "preset");
    const auto model = get("experiment", "model");
    if (preset_name) cfg = preset(*preset_name);
    if (model) {
        const auto [family, d] = parse_model(*model);
        if (preset_name && (family != cfg.family || d != cfg.d)) {
            parse_error("experiment.model '" + *model + "' conflicts with preset '" + *preset_name + "'");
        }
        cfg.family = family;
        cfg.d = d;
    } else if (!preset_name) {
        parse_error("experiment.model is required when no preset is given");
    }

    const auto names = coordinate_names(cfg.family, cfg.d);
    // theta_star: a preset supplies every coordinate; otherwise all must be listed.
    {
        std::vector<double> coords;
        if (preset_name) coords = flatten(cfg.theta_star);
        else coords.assign(names.size(), std::numeric_limits<double>::quiet_NaN());
        if (const auto sec = pt.get_child_optional("theta_star")) {
            for (const auto& [key, value] : *sec) {
                const auto it = std::find(names.begin(), names.end(), key);
                if (it == names.end()) parse_error("unknown coordinate '" + key + "' in [theta_star]");
                coords[static_cast<std::size_t>(it - names.begin())] = to_real("theta_star." + key, value.data());
            }
        }
        for (std::size_t i = 0; i < coords.size(); ++i) {
            if (std::isnan(coords[i])) parse_error("theta_star." + names[i] + " is missing");
        }
        cfg.theta_star = unflatten(cfg.family, cfg.d, coords);
        try {
            validate(cfg.theta_star);
        } catch (const Error& e) {
            parse_error(std::string("theta_star: ") + e.what());
        }
    }
    if (const auto sec = pt.get_child_optional("box")) {
        std::map<std::string, estimate::Interval> merged(cfg.box.begin(), cfg.box.end());
        for (const auto& [key, value] : *sec) {
            if (std::find(names.begin(), names.end(), key) == names.end()) {
                parse_error("unknown coordinate '" + key + "' in [box]");
            }
            merged[key] = to_interval("box." + key, value.data());
        }
        cfg.box.clear();
        for (const auto& name : names) {
            if (const auto it = merged.find(name); it != merged.end()) cfg.box.emplace_back(name, it->second);
        }
    }

    if (auto v = get("experiment", "command")) cfg.command = command_from_string(*v);
    if (auto v = get("experiment", "nb_parametrization")) {
        if (*v == "mean") cfg.nb = odm::NbParametrization::Mean;
        else if (*v == "literal") cfg.nb = odm::NbParametrization::Literal;
        else parse_error("experiment.nb_parametrization: expected mean or literal");
    }
    if (auto v = get("experiment", "seed")) cfg.seed = to_integer<std::uint64_t>("experiment.seed", *v);
    if (auto v = get("experiment", "n")) cfg.n = to_size("experiment.n", *v);
    if (auto v = get("experiment", "n_list")) {
        cfg.n_list.clear();
        for (const auto& part : split(*v, ',')) cfg.n_list.push_back(to_size("experiment.n_list", part));
    }
    if (auto v = get("experiment", "replicates")) cfg.replicates = to_size("experiment.replicates", *v);
    if (auto v = get("experiment", "burn")) cfg.burn = to_size("experiment.burn", *v);
    if (auto v = get("experiment", "workers")) cfg.workers = to_size("experiment.workers", *v);
    if (auto v = get("experiment", "output_dir")) cfg.output_dir = *v;
    if (auto v = get("experiment", "data")) cfg.data = *v;

    bool x_max_given = false;
    if (auto v = get("grid", "x_max")) {
        cfg.grid.x_max = to_real("grid.x_max", *v);
        x_max_given = true;
    }
    if (auto v = get("grid", "n_cells")) cfg.grid.n_cells = to_size("grid.n_cells", *v);
    if (auto v = get("grid", "spacing")) {
        if (*v == "uniform") cfg.grid.spacing = hmm::Spacing::Uniform;
        else if (*v == "geometric") cfg.grid.spacing = hmm::Spacing::Geometric;
        else parse_error("grid.spacing: expected uniform or geometric");
    }
    if (auto v = get("grid", "stretch")) cfg.grid.stretch = to_real("grid.stretch", *v);
    if (cfg.family == Family::Hmm1 && !preset_name && !x_max_given) {
        cfg.grid.x_max = hmm::default_grid(default_m_upper(cfg)).x_max;
    }

    if (auto v = get("noise", "alpha")) cfg.noise.state.alpha = to_real("noise.alpha", *v);
    if (auto v = get("noise", "scale")) cfg.noise.state.scale = to_real("noise.scale", *v);
    if (auto v = get("noise", "sigma")) cfg.noise.observation.sigma = to_real("noise.sigma", *v);
    if (auto v = get("init", "xi")) cfg.xi = to_law("init.xi", *v);
    if (auto v = get("init", "xi_alt")) cfg.xi_alt = to_law("init.xi_alt", *v);
    if (auto v = get("init", "x_init")) cfg.x_init = to_reals("init.x_init", *v);
    if (auto v = get("init", "x_alt")) cfg.x_alt = to_reals("init.x_alt", *v);

    if (auto v = get("fit", "resolution")) cfg.fit.resolution = to_size("fit.resolution", *v);
    if (auto v = get("fit", "min_n")) cfg.fit.min_n = to_size("fit.min_n", *v);
    if (auto v = get("fit", "max_scan_points")) cfg.fit.max_scan_points = to_size("fit.max_scan_points", *v);
    if (auto v = get("fit", "max_iterations")) cfg.fit.max_iterations = to_size("fit.max_iterations", *v);
    if (auto v = get("fit", "ftol")) cfg.fit.ftol = to_real("fit.ftol", *v);
    if (auto v = get("fit", "xtol")) cfg.fit.xtol = to_real("fit.xtol", *v);

    if (auto v = get("profile", "truncation")) cfg.truncation = to_size("profile.truncation", *v);
    if (auto v = get("profile", "batches")) cfg.batches = to_size("profile.batches", *v);
    if (auto v = get("profile", "axes")) {
        cfg.axes.clear();
        for (const auto& part : split(*v, ';')) {
            if (part.empty()) continue;
            cfg.axes.push_back(to_axis(part));
        }
    }
    for (const auto& axis : cfg.axes) {
        if (std::find(names.begin(), names.end(), axis.name) == names.end()) {
            parse_error("profile.axes: unknown coordinate '" + axis.name + "'");
        }
    }

    if (auto v = get("ergodicity", "excursions")) cfg.excursions = to_size("ergodicity.excursions", *v);
    if (auto v = get("ergodicity", "cap")) cfg.cap = to_integer<std::int64_t>("ergodicity.cap", *v);
    if (auto v = get("ergodicity", "beta")) cfg.beta = to_real("ergodicity.beta", *v);

    if (cfg.n == 0) parse_error("experiment.n must be positive");
    if (cfg.replicates == 0) parse_error("experiment.replicates must be positive");
    if (cfg.n_list.empty() || !std::is_sorted(cfg.n_list.begin(), cfg.n_list.end()) ||
        std::adjacent_find(cfg.n_list.begin(), cfg.n_list.end()) != cfg.n_list.end() || cfg.n_list.front() == 0) {
        parse_error("experiment.n_list must be strictly increasing positive lengths");
    }
    if (cfg.batches < 2) parse_error("profile.batches must be at least 2");
    if (!cfg.x_init.empty() && cfg.x_init.size() != cfg.d) parse_error("init.x_init needs one value per state coordinate");
    if (!cfg.x_alt.empty() && cfg.x_alt.size() != cfg.d) parse_error("init.x_alt needs one value per state coordinate");
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::Io, "cannot read config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string serialize(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "[experiment]\n";
    if (cfg.command) out << "command = " << to_string(*cfg.command) << '\n';
    if (!cfg.preset.empty()) out << "preset = " << cfg.preset << '\n';
    out << "model = " << model_name(cfg.family, cfg.d) << '\n';
    if (cfg.family == Family::Nbin) {
        out << "nb_parametrization = " << (cfg.nb == odm::NbParametrization::Mean ? "mean" : "literal") << '\n';
    }
    if (cfg.seed) out << "seed = " << *cfg.seed << '\n';
    out << "n = " << cfg.n << '\n';
    out << "n_list = ";
    for (std::size_t i = 0; i < cfg.n_list.size(); ++i) out << (i ? "," : "") << cfg.n_list[i];
    out << '\n';
    out << "replicates = " << cfg.replicates << '\n';
    out << "burn = " << cfg.burn << '\n';
    if (cfg.workers) out << "workers = " << cfg.workers << '\n';
    out << "output_dir = " << cfg.output_dir << '\n';
    if (!cfg.data.empty()) out << "data = " << cfg.data << '\n';

    const auto names = coordinate_names(cfg.family, cfg.d);
    const auto coords = flatten(cfg.theta_star);
    out << "\n[theta_star]\n";
    for (std::size_t i = 0; i < names.size(); ++i) out << names[i] << " = " << real_text(coords[i]) << '\n';
    out << "\n[box]\n";
    for (const auto& [name, iv] : cfg.box) {
        out << name << " = " << real_text(iv.lo) << ':' << real_text(iv.hi) << '\n';
    }
    if (cfg.family == Family::Hmm1) {
        out << "\n[grid]\n";
        out << "x_max = " << real_text(cfg.grid.x_max) << '\n';
        out << "n_cells = " << cfg.grid.n_cells << '\n';
        out << "spacing = " << (cfg.grid.spacing == hmm::Spacing::Uniform ? "uniform" : "geometric") << '\n';
        out << "stretch = " << real_text(cfg.grid.stretch) << '\n';
        out << "\n[noise]\n";
        out << "alpha = " << real_text(cfg.noise.state.alpha) << '\n';
        out << "scale = " << real_text(cfg.noise.state.scale) << '\n';
        out << "sigma = " << real_text(cfg.noise.observation.sigma) << '\n';
    }
    out << "\n[init]\n";
    if (cfg.family == Family::Hmm1) {
        out << "xi = " << law_text(cfg.xi) << '\n';
        out << "xi_alt = " << law_text(cfg.xi_alt) << '\n';
    }
    if (!cfg.x_init.empty()) out << "x_init = " << join_reals(cfg.x_init) << '\n';
    if (!cfg.x_alt.empty()) out << "x_alt = " << join_reals(cfg.x_alt) << '\n';
    out << "\n[fit]\n";
    out << "resolution = " << cfg.fit.resolution << '\n';
    out << "min_n = " << cfg.fit.min_n << '\n';
    out << "max_scan_points = " << cfg.fit.max_scan_points << '\n';
    out << "max_iterations = " << cfg.fit.max_iterations << '\n';
    out << "ftol = " << real_text(cfg.fit.ftol) << '\n';
    out << "xtol = " << real_text(cfg.fit.xtol) << '\n';
    out << "\n[profile]\n";
    out << "truncation = " << cfg.truncation << '\n';
    out << "batches = " << cfg.batches << '\n';
    out << "axes = ";
    for (std::size_t i = 0; i < cfg.axes.size(); ++i) {
        const auto& a = cfg.axes[i];
        out << (i ? "; " : "") << a.name << ':' << real_text(a.lo) << ':' << real_text(a.hi) << ':'
            << a.count;
    }
    out << '\n';
    if (cfg.family == Family::Hmm1) {
        out << "\n[ergodicity]\n";
        out << "excursions = " << cfg.excursions << '\n';
        out << "cap = " << cfg.cap << '\n';
        out << "beta = " << real_text(cfg.beta) << '\n';
    }
    return out.str();
}

std::string config_hash(const ExperimentConfig& config) {
    ExperimentConfig canonical = config;
    canonical.workers = 0;
    canonical.output_dir.clear();
    const std::string text = serialize(canonical);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

bool operator==(const ExperimentConfig& lhs, const ExperimentConfig& rhs) { return serialize(lhs) == serialize(rhs); }

}  // namespace pomc::cli
