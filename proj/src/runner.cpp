#include "pomc/runner.hpp"

#include "pomc/ergodicity.hpp"
#include "pomc/estimate.hpp"
#include "pomc/parallel.hpp"
#include "pomc/table.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <limits>

namespace pomc::cli {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using io::Column;
using io::ColumnType;
using io::Row;
using io::Schema;

class Runner {
public:
    explicit Runner(const ExperimentConfig& cfg)
        : cfg_(cfg), model_(cfg.model()), root_(*cfg.seed, 0), dir_(cfg.output_dir),
          names_(coordinate_names(cfg.family, cfg.d)) {}

    RunReport execute() {
        switch (*cfg_.command) {
            case Command::Simulate: simulate(); break;
            case Command::Fit: fit(); break;
            case Command::KlProfile: kl_profile(); break;
            case Command::Consistency: consistency(); break;
            case Command::FilterForget: filter_forget(); break;
            case Command::ReturnTail: return_tail(); break;
            case Command::Moment: moment(); break;
        }
        write_manifest();
        return report_;
    }

private:
    RngStream replicate_stream(std::size_t j) const { return root_.substream(StreamPurpose::Replicate).substream(j); }

    void emit(const std::string& name, const std::vector<Row>& rows, const Schema& schema) {
        for (const auto& path : io::emit_table(rows, schema, dir_ / name)) {
            report_.files.push_back(path.filename().string());
        }
    }

    void require_hmm(const char* what) const {
        require(cfg_.family == Family::Hmm1, ErrorKind::IncompatibleCommand,
                std::string(what) + " applies to the hmm1 model only");
    }

    Schema theta_columns(const std::string& suffix) const {
        Schema s;
        for (const auto& name : names_) s.push_back({name + suffix, ColumnType::Real});
        return s;
    }

    static void append_reals(Row& row, const std::vector<double>& values) {
        for (double v : values) row.emplace_back(v);
    }

    void simulate() {
        const auto path = simulate_stationary(model_, cfg_.theta_star, cfg_.n, cfg_.burn, replicate_stream(0));
        Schema schema{{"k", ColumnType::Integer}, {"y", ColumnType::Real}};
        const std::size_t d = path.states.dim;
        for (std::size_t l = 0; l < d; ++l) {
            schema.push_back({d == 1 ? std::string("x") : "x" + std::to_string(l + 1), ColumnType::Real});
        }
        std::vector<Row> rows;
        rows.reserve(cfg_.n);
        for (std::size_t k = 0; k < cfg_.n; ++k) {
            Row row{static_cast<std::int64_t>(k), path.observations[k]};
            for (double x : path.states[k]) row.emplace_back(x);
            rows.push_back(std::move(row));
        }
        emit("path.csv", rows, schema);
    }

    void fit() {
        const auto box = cfg_.theta_box();
        const auto spec = estimate::default_class(cfg_.family, cfg_.d);
        const bool external = !cfg_.data.empty();
        const std::size_t reps = external ? 1 : cfg_.replicates;
        std::vector<estimate::FitResult> fits(reps);
        estimate::FitConfig fit_cfg = cfg_.fit;
        fit_cfg.workers = reps > 1 ? 1 : cfg_.workers;
        std::vector<double> data;
        if (external) data = io::read_csv_column(cfg_.data, "y");
        parallel_for(reps, reps > 1 ? cfg_.workers : 1, [&](std::size_t j) {
            if (external) {
                fits[j] = estimate::fit_mle(model_, data, box, fit_cfg);
                return;
            }
            const auto path = simulate_stationary(model_, cfg_.theta_star, cfg_.n, cfg_.burn, replicate_stream(j));
            fits[j] = estimate::fit_mle(model_, path.observations, box, fit_cfg);
        });
        Schema schema{{"replicate", ColumnType::Integer}};
        const auto hat = theta_columns("_hat");
        schema.insert(schema.end(), hat.begin(), hat.end());
        schema.push_back({"loglik", ColumnType::Real});
        schema.push_back({"delta_to_class", ColumnType::Real});
        std::vector<Row> rows;
        for (std::size_t j = 0; j < reps; ++j) {
            Row row{static_cast<std::int64_t>(j)};
            append_reals(row, flatten(fits[j].theta_hat));
            row.emplace_back(fits[j].loglik_at_hat);
            row.emplace_back(estimate::class_distance(fits[j].theta_hat, cfg_.theta_star, spec));
            rows.push_back(std::move(row));
            if (!fits[j].converged) {
                report_.warnings.push_back("replicate " + std::to_string(j) +
                                           ": Nelder-Mead stopped at the iteration limit");
            }
        }
        emit("fit.csv", rows, schema);
    }

    std::vector<double> axis_steps() const {
        std::vector<double> steps;
        for (const auto& axis : cfg_.axes) {
            steps.push_back(axis.count > 1 ? (axis.hi - axis.lo) / static_cast<double>(axis.count - 1) : 0.0);
        }
        return steps;
    }

    void kl_profile() {
        require(!cfg_.axes.empty(), ErrorKind::ConfigParse, "kl-profile needs at least one axis in profile.axes");
        const auto base = flatten(cfg_.theta_star);
        std::vector<std::size_t> axis_index;
        for (const auto& axis : cfg_.axes) {
            axis_index.push_back(
                static_cast<std::size_t>(std::find(names_.begin(), names_.end(), axis.name) - names_.begin()));
        }
        std::vector<std::vector<double>> axis_values;
        std::size_t total = 1;
        for (const auto& axis : cfg_.axes) {
            axis_values.push_back(axis.values());
            total *= axis.count;
        }
        std::vector<ParamPoint> grid;
        grid.reserve(total);
        for (std::size_t idx = 0; idx < total; ++idx) {
            auto coords = base;
            std::size_t rem = idx;
            // Last axis varies fastest.
            for (std::size_t a = cfg_.axes.size(); a-- > 0;) {
                coords[axis_index[a]] = axis_values[a][rem % cfg_.axes[a].count];
                rem /= cfg_.axes[a].count;
            }
            auto theta = unflatten(cfg_.family, cfg_.d, coords);
            try {
                validate(theta);
            } catch (const Error& e) {
                fail(ErrorKind::ConfigParse, std::string("profile grid point is outside the parameter space: ") + e.what());
            }
            grid.push_back(std::move(theta));
        }
        estimate::KlConfig kl;
        kl.n = cfg_.n;
        kl.truncation = cfg_.truncation;
        kl.burn = cfg_.burn;
        kl.batches = cfg_.batches;
        kl.workers = cfg_.workers;
        const auto profile = estimate::kl_profile(model_, cfg_.theta_star, grid, kl, root_);

        Schema schema;
        for (const auto& axis : cfg_.axes) schema.push_back({axis.name, ColumnType::Real});
        schema.push_back({"estimate", ColumnType::Real});
        schema.push_back({"standard_error", ColumnType::Real});
        schema.push_back({"truncation_delta", ColumnType::Real});
        std::vector<Row> rows;
        std::size_t best = 0;
        for (std::size_t i = 0; i < profile.size(); ++i) {
            const auto coords = flatten(profile[i].theta);
            Row row;
            for (std::size_t a = 0; a < cfg_.axes.size(); ++a) row.emplace_back(coords[axis_index[a]]);
            row.emplace_back(profile[i].estimate);
            row.emplace_back(profile[i].standard_error);
            row.emplace_back(profile[i].truncation_delta);
            rows.push_back(std::move(row));
            if (profile[i].estimate < profile[best].estimate) best = i;
        }
        emit("profile.csv", rows, schema);

        // A minimizer counts as correct when it lies within one grid step of the
        // orbit of theta_star along every profiled axis.
        const auto orbit_names = estimate::orbit_coordinate_names(cfg_.family, cfg_.d);
        std::vector<double> tol(orbit_names.size(), 0.0);
        const auto steps = axis_steps();
        double gamma_steps = 0.0;
        for (std::size_t a = 0; a < cfg_.axes.size(); ++a) {
            const auto it = std::find(orbit_names.begin(), orbit_names.end(), cfg_.axes[a].name);
            tol[static_cast<std::size_t>(it - orbit_names.begin())] = steps[a] * (1.0 + 1e-9);
            if (cfg_.axes[a].name.rfind("gamma", 0) == 0) gamma_steps += steps[a];
        }
        if (cfg_.family == Family::Nm) {
            const auto last = "gamma" + std::to_string(cfg_.d);
            const auto it = std::find(orbit_names.begin(), orbit_names.end(), last);
            tol[static_cast<std::size_t>(it - orbit_names.begin())] = gamma_steps * (1.0 + 1e-9);
        }
        const bool ok = estimate::argmax_check(profile, cfg_.theta_star,
                                               estimate::default_class(cfg_.family, cfg_.d), tol);
        Schema summary_schema;
        for (const auto& axis : cfg_.axes) summary_schema.push_back({"argmin_" + axis.name, ColumnType::Real});
        summary_schema.push_back({"min_estimate", ColumnType::Real});
        summary_schema.push_back({"min_standard_error", ColumnType::Real});
        summary_schema.push_back({"argmin_in_class", ColumnType::Boolean});
        const auto best_coords = flatten(profile[best].theta);
        Row summary;
        for (std::size_t a = 0; a < cfg_.axes.size(); ++a) summary.emplace_back(best_coords[axis_index[a]]);
        summary.emplace_back(profile[best].estimate);
        summary.emplace_back(profile[best].standard_error);
        summary.emplace_back(ok);
        emit("profile_summary.csv", {summary}, summary_schema);
    }

    void consistency() {
        const auto box = cfg_.theta_box();
        estimate::ConsistencyConfig cc;
        cc.n_list = cfg_.n_list;
        cc.replicates = cfg_.replicates;
        cc.burn = cfg_.burn;
        cc.fit = cfg_.fit;
        cc.fit.workers = cfg_.workers;
        cc.workers = cfg_.workers;
        const auto result = estimate::consistency_curve(model_, cfg_.theta_star, box,
                                                        estimate::default_class(cfg_.family, cfg_.d), cc, root_);
        Schema curve_schema{{"n", ColumnType::Integer},   {"mean_delta", ColumnType::Real},
                            {"q10", ColumnType::Real},    {"q50", ColumnType::Real},
                            {"q90", ColumnType::Real},    {"failures", ColumnType::Integer}};
        std::vector<Row> curve;
        for (const auto& r : result.rows) {
            curve.push_back({static_cast<std::int64_t>(r.n), r.mean_delta, r.q10, r.q50, r.q90,
                             static_cast<std::int64_t>(r.failures)});
        }
        emit("curve.csv", curve, curve_schema);

        Schema rep_schema{{"n", ColumnType::Integer}, {"replicate", ColumnType::Integer}, {"ok", ColumnType::Boolean}};
        const auto hat = theta_columns("_hat");
        rep_schema.insert(rep_schema.end(), hat.begin(), hat.end());
        rep_schema.push_back({"loglik", ColumnType::Real});
        rep_schema.push_back({"delta", ColumnType::Real});
        rep_schema.push_back({"error", ColumnType::Text});
        std::vector<Row> reps;
        for (const auto& rec : result.replicates) {
            Row row{static_cast<std::int64_t>(rec.n), static_cast<std::int64_t>(rec.replicate), rec.ok};
            if (rec.ok) append_reals(row, flatten(rec.theta_hat));
            else append_reals(row, std::vector<double>(names_.size(), kNaN));
            row.emplace_back(rec.ok ? rec.loglik : kNaN);
            row.emplace_back(rec.ok ? rec.delta : kNaN);
            row.emplace_back(rec.error);
            reps.push_back(std::move(row));
            if (!rec.ok) {
                report_.warnings.push_back("n=" + std::to_string(rec.n) + " replicate " +
                                           std::to_string(rec.replicate) + " failed: " + rec.error);
            }
        }
        emit("replicates.csv", reps, rep_schema);
    }

    void filter_forget() {
        const auto path = simulate_stationary(model_, cfg_.theta_star, cfg_.n, cfg_.burn, replicate_stream(0));
        const auto& y = path.observations;
        std::vector<double> gaps;
        if (cfg_.family == Family::Hmm1) {
            gaps = hmm::filter_tv_gap(std::get<ThetaHmm>(cfg_.theta_star), cfg_.noise, cfg_.grid, cfg_.xi,
                                      cfg_.xi_alt, y);
        } else {
            const State x1 = model_.conditioning_state();
            const State x2 = cfg_.x_alt.empty() ? State(cfg_.d, 10.0) : cfg_.x_alt;
            gaps = odm::forgetting_gap(model_.odm, cfg_.theta_star, y, x1, x2);
        }
        Schema schema{{"k", ColumnType::Integer}, {"gap", ColumnType::Real}, {"ratio", ColumnType::Real}};
        std::vector<Row> rows;
        for (std::size_t k = 0; k < gaps.size(); ++k) {
            const double ratio = (k == 0 || gaps[k - 1] == 0.0) ? kNaN : gaps[k] / gaps[k - 1];
            rows.push_back({static_cast<std::int64_t>(k + 1), gaps[k], ratio});
        }
        emit("forget.csv", rows, schema);
    }

    void return_tail() {
        require_hmm("return-tail");
        const auto& theta = std::get<ThetaHmm>(cfg_.theta_star);
        const auto sample =
            ergodicity::return_times(theta, cfg_.noise.state, cfg_.excursions, cfg_.cap, root_, 0, cfg_.workers);
        if (sample.heavily_censored()) {
            report_.warnings.push_back(std::to_string(sample.censored_count) + " of " +
                                       std::to_string(sample.excursions()) + " excursions hit the cap");
        }
        const auto report = ergodicity::tail_diagnostic(sample);
        std::vector<Row> survival;
        for (const auto& p : report.log_survival) survival.push_back({static_cast<std::int64_t>(p.t), p.log_survival});
        emit("survival.csv", survival, {{"t", ColumnType::Integer}, {"log_survival", ColumnType::Real}});

        std::size_t ones = 0;
        for (auto t : sample.times) ones += t == 1 ? 1 : 0;
        const double p1 = static_cast<double>(ones) / static_cast<double>(sample.excursions());
        Schema schema{{"excursions", ColumnType::Integer},   {"uncensored", ColumnType::Integer},
                      {"censored", ColumnType::Integer},     {"cap", ColumnType::Integer},
                      {"p_return_1", ColumnType::Real},      {"pareto_cdf_m", ColumnType::Real},
                      {"geometric_fit_slope", ColumnType::Real}, {"curvature_stat", ColumnType::Real},
                      {"curvature_se", ColumnType::Real},    {"ci_lo", ColumnType::Real},
                      {"ci_hi", ColumnType::Real},           {"z", ColumnType::Real},
                      {"rejects_geometric", ColumnType::Boolean}, {"split_time", ColumnType::Integer}};
        Row row{static_cast<std::int64_t>(sample.excursions()),
                static_cast<std::int64_t>(sample.times.size()),
                static_cast<std::int64_t>(sample.censored_count),
                sample.cap,
                p1,
                pareto_sym_cdf(theta.m, cfg_.noise.state.alpha, cfg_.noise.state.scale),
                report.geometric_fit_slope,
                report.curvature_stat,
                report.curvature_se,
                report.ci_lo,
                report.ci_hi,
                report.z,
                report.rejects_geometric,
                report.split_time};
        emit("tail.csv", {row}, schema);
    }

    void moment() {
        require_hmm("moment");
        const auto est = ergodicity::moment_estimate(std::get<ThetaHmm>(cfg_.theta_star), cfg_.noise, cfg_.beta, cfg_.n,
                                                     cfg_.burn, replicate_stream(0));
        Schema schema{{"beta", ColumnType::Real},
                      {"estimate", ColumnType::Real},
                      {"standard_error", ColumnType::Real},
                      {"n", ColumnType::Integer},
                      {"burn", ColumnType::Integer}};
        emit("moment.csv",
             {{cfg_.beta, est.mean, est.standard_error, static_cast<std::int64_t>(cfg_.n),
               static_cast<std::int64_t>(cfg_.burn)}},
             schema);
    }

    void write_manifest() {
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm utc{};
        gmtime_r(&now, &utc);
        char stamp[32];
        std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &utc);
        nlohmann::ordered_json m;
        m["tool"] = "pomclab";
        m["library_version"] = library_version();
        m["command"] = to_string(*cfg_.command);
        m["config_hash"] = "fnv1a64:" + config_hash(cfg_);
        m["seeds"] = {{"master", *cfg_.seed},
                      {"path_id", 0},
                      {"derivation", "replicate j draws from substream(Replicate).substream(j); consistency replicate "
                                     "(i, j) from substream(i).substream(j); excursion i from "
                                     "substream(Excursion).substream(i)"}};
        m["workers"] = cfg_.workers;
        m["timestamp"] = stamp;
        m["files"] = report_.files;
        m["warnings"] = report_.warnings;
        m["config"] = serialize(cfg_);
        io::write_atomic(dir_ / "manifest.json", m.dump(2) + "\n");
    }

    const ExperimentConfig& cfg_;
    ModelSpec model_;
    RngStream root_;
    std::filesystem::path dir_;
    std::vector<std::string> names_;
    RunReport report_;
};

}  // namespace

const char* library_version() { return POMCLAB_VERSION; }

ExperimentConfig resolve(ExperimentConfig config, const RunOptions& options) {
    if (options.command) {
        if (config.command && *config.command != *options.command) {
            fail(ErrorKind::IncompatibleCommand, "config declares command '" + to_string(*config.command) +
                                                     "' but '" + to_string(*options.command) + "' was requested");
        }
        config.command = options.command;
    }
    require(config.command.has_value(), ErrorKind::ConfigParse, "no command given");
    if (options.seed) config.seed = options.seed;
    require(config.seed.has_value(), ErrorKind::ConfigParse, "a seed is mandatory (experiment.seed or --seed)");
    if (options.output_dir) config.output_dir = *options.output_dir;
    if (options.workers) {
        config.workers = *options.workers;
    } else if (options.env_workers && !options.env_workers->empty()) {
        const std::string& text = *options.env_workers;
        std::size_t v = 0;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
        require(res.ec == std::errc() && res.ptr == text.data() + text.size() && v > 0, ErrorKind::ConfigParse,
                "POMCLAB_WORKERS must be a positive integer, got '" + text + "'");
        config.workers = v;
    }
    if (config.workers == 0) config.workers = 1;
    return config;
}

RunReport run(const ExperimentConfig& config) {
    require(config.command.has_value() && config.seed.has_value(), ErrorKind::ConfigParse,
            "config must be resolved (command and seed) before running");
    Runner runner(config);
    auto report = runner.execute();
    report.output_dir = config.output_dir;
    return report;
}

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::ConfigParse:
        case ErrorKind::IncompatibleCommand:
        case ErrorKind::InvalidParameter:
        case ErrorKind::DimensionMismatch:
        case ErrorKind::Instability:
            return 2;
        case ErrorKind::Io:
            return 4;
        default:
            return 3;
    }
}

std::string error_record(ErrorKind kind, const std::string& message) {
    nlohmann::ordered_json j;
    j["error"] = to_string(kind);
    j["exit_code"] = exit_code(kind);
    j["message"] = message;
    return j.dump();
}

}  // namespace pomc::cli
