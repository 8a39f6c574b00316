#include "koopctl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "koopctl/dmd.hpp"
#include "koopctl/errors.hpp"
#include "koopctl/io.hpp"

namespace koopctl {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::uint64_t kIdStream = 0x6964ULL;
constexpr std::uint64_t kSnStream = 0x736eULL;
constexpr std::uint64_t kInitStream = 0x696e6974ULL;
constexpr std::uint64_t kTrainStream = 0x7472ULL;
constexpr std::uint64_t kEvalStream = 0x6576616cULL;
constexpr std::uint64_t kPlotStream = 0x706c6f74ULL;

double json_number(const json& v, const std::string& key) {
    if (!v.is_number()) throw ConfigError("config: '" + key + "' must be a number");
    return v.get<double>();
}

int json_count(const json& v, const std::string& key) {
    const double d = json_number(v, key);
    if (d < 0 || d != std::floor(d))
        throw ConfigError("config: '" + key + "' must be a non-negative integer");
    return static_cast<int>(d);
}

bool json_flag(const json& v, const std::string& key) {
    if (!v.is_boolean()) throw ConfigError("config: '" + key + "' must be a boolean");
    return v.get<bool>();
}

std::string json_text(const json& v, const std::string& key) {
    if (!v.is_string()) throw ConfigError("config: '" + key + "' must be a string");
    return v.get<std::string>();
}

double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

json eig_list_json(const std::vector<Complex>& values) {
    json arr = json::array();
    for (const Complex& v : values)
        arr.push_back({{"re", v.real()},
                       {"im", v.imag()},
                       {"abs", std::abs(v)},
                       {"arg", std::arg(v)}});
    return arr;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing", path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing", path);
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open", path);
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::parse_error& e) {
        throw IoError(std::string("invalid JSON (") + e.what() + ")", path);
    }
}

// Training-log line in the JSONL schema; non-finite values become null.
json epoch_json(const EpochStats& s) {
    json j;
    j["epoch"] = s.epoch;
    j["mean-reward"] = std::isfinite(s.mean_reward) ? json(s.mean_reward) : json();
    j["validation-reward"] =
        std::isfinite(s.validation_reward) ? json(s.validation_reward) : json();
    j["dropped-episodes"] = s.dropped;
    j["grad-norm"] = s.grad_norm;
    return j;
}

} // namespace

TargetSpectrum expand_target(double abs, double arg) {
    if (!(abs > 0.0) || abs > 1.0)
        throw ConfigError("target: abs must be in (0, 1]");
    if (arg < 0.0 || arg >= 3.14159265358979323846)
        throw ConfigError("target: arg must be in [0, pi)");
    TargetSpectrum t;
    if (arg > 0.0) {
        t.eigenvalues.emplace_back(abs * std::cos(arg), abs * std::sin(arg));
        t.eigenvalues.emplace_back(abs * std::cos(arg), -abs * std::sin(arg));
    } else {
        t.eigenvalues.emplace_back(abs, 0.0);
        t.eigenvalues.emplace_back(abs, 0.0);
    }
    return t;
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void ExperimentConfig::validate() const {
    expand_target(target_abs, target_arg);
    if (method != "ours" && method != "sl" && method != "sn" && method != "rl")
        throw ConfigError("config: method must be one of ours, sl, sn, rl");
    train.validate();
    sn.validate();
    if (eval_runs < 1) throw ConfigError("config: eval.runs must be >= 1");
    if (eval_repeats < 1) throw ConfigError("config: eval.repeats must be >= 1");
    if (id_sequences < 1) throw ConfigError("config: id.sequences must be >= 1");
    if (output_dir.empty()) throw ConfigError("config: output-dir must not be empty");
    system_spec().validate();
}

SystemSpec ExperimentConfig::system_spec() const {
    SystemSpec spec = SystemSpec::preset(system);
    spec.noise_std = noise_std;
    spec.rossler_standard = rossler_standard;
    return spec;
}

std::map<std::string, json> ExperimentConfig::flat() const {
    std::map<std::string, json> m;
    m["system"] = system_name(system);
    m["system.noise-std"] = noise_std;
    m["system.rossler-standard"] = rossler_standard;
    m["target.abs"] = target_abs;
    m["target.arg"] = target_arg;
    m["method"] = method;
    m["train.epochs-max"] = train.epochs_max;
    m["train.batch"] = train.batch;
    m["train.lr"] = train.lr;
    m["train.gamma"] = train.gamma;
    m["train.horizon"] = train.horizon;
    m["train.eval-every"] = train.eval_every;
    m["train.patience"] = train.patience;
    m["train.validation-rollouts"] = train.validation_rollouts;
    m["train.sigma2-scale"] = train.sigma2_scale;
    m["train.control-cost"] = train.control_cost;
    m["hankel.delay"] = train.hankel.delay;
    m["hankel.rank"] = train.hankel.rank;
    m["eval.runs"] = eval_runs;
    m["eval.repeats"] = eval_repeats;
    m["id.sequences"] = id_sequences;
    m["sn.steps"] = sn.steps;
    m["sn.epochs"] = sn.epochs;
    m["sn.batch"] = sn.batch;
    m["sn.lr"] = sn.lr;
    m["pretrain"] = pretrain;
    m["seed"] = seed;
    m["output-dir"] = output_dir;
    return m;
}

std::string ExperimentConfig::hash() const {
    std::string canon;
    for (const auto& [key, value] : flat()) {
        if (key == "output-dir") continue; // placement on disk is not identity
        canon += key;
        canon += '=';
        canon += value.dump();
        canon += '\n';
    }
    return fnv1a_hex(canon);
}

ExperimentConfig ExperimentConfig::from_flat(const std::map<std::string, json>& entries) {
    ExperimentConfig cfg;
    for (const auto& [key, value] : entries) {
        if (key == "system") cfg.system = system_kind_from_name(json_text(value, key));
        else if (key == "system.noise-std") cfg.noise_std = json_number(value, key);
        else if (key == "system.rossler-standard") cfg.rossler_standard = json_flag(value, key);
        else if (key == "target.abs") cfg.target_abs = json_number(value, key);
        else if (key == "target.arg") cfg.target_arg = json_number(value, key);
        else if (key == "method") cfg.method = json_text(value, key);
        else if (key == "train.epochs-max") cfg.train.epochs_max = json_count(value, key);
        else if (key == "train.batch") cfg.train.batch = json_count(value, key);
        else if (key == "train.lr") cfg.train.lr = json_number(value, key);
        else if (key == "train.gamma") cfg.train.gamma = json_number(value, key);
        else if (key == "train.horizon") cfg.train.horizon = json_count(value, key);
        else if (key == "train.eval-every") cfg.train.eval_every = json_count(value, key);
        else if (key == "train.patience") cfg.train.patience = json_count(value, key);
        else if (key == "train.validation-rollouts")
            cfg.train.validation_rollouts = json_count(value, key);
        else if (key == "train.sigma2-scale") cfg.train.sigma2_scale = json_number(value, key);
        else if (key == "train.control-cost") cfg.train.control_cost = json_number(value, key);
        else if (key == "hankel.delay") cfg.train.hankel.delay = json_count(value, key);
        else if (key == "hankel.rank") cfg.train.hankel.rank = json_count(value, key);
        else if (key == "eval.runs") cfg.eval_runs = json_count(value, key);
        else if (key == "eval.repeats") cfg.eval_repeats = json_count(value, key);
        else if (key == "id.sequences") cfg.id_sequences = json_count(value, key);
        else if (key == "sn.steps") cfg.sn.steps = json_count(value, key);
        else if (key == "sn.epochs") cfg.sn.epochs = json_count(value, key);
        else if (key == "sn.batch") cfg.sn.batch = json_count(value, key);
        else if (key == "sn.lr") cfg.sn.lr = json_number(value, key);
        else if (key == "pretrain") cfg.pretrain = json_flag(value, key);
        else if (key == "seed") {
            if (!value.is_number_unsigned() && !value.is_number_integer())
                throw ConfigError("config: 'seed' must be a non-negative integer");
            if (value.is_number_integer() && value.get<long long>() < 0)
                throw ConfigError("config: 'seed' must be a non-negative integer");
            cfg.seed = value.get<std::uint64_t>();
        } else if (key == "output-dir") cfg.output_dir = json_text(value, key);
        else if (key == "config-hash") {
            // snapshots carry their own hash; ignore on re-load
        } else throw ConfigError("config: unknown key '" + key + "'");
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path,
                                        const std::vector<std::string>& overrides,
                                        std::optional<std::uint64_t> env_seed) {
    std::map<std::string, json> entries;
    if (!path.empty()) {
        const json j = load_json_file(path);
        if (!j.is_object()) throw ConfigError("config: top level must be a flat JSON object");
        for (const auto& [key, value] : j.items()) {
            if (value.is_object() || value.is_array())
                throw ConfigError("config: '" + key + "' is nested; use dotted flat keys");
            entries[key] = value;
        }
    }
    for (const std::string& spec : overrides) {
        const std::size_t eq = spec.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("override must look like key=value, got '" + spec + "'");
        const std::string key = spec.substr(0, eq);
        const std::string raw = spec.substr(eq + 1);
        json value = json::parse(raw, nullptr, false);
        if (value.is_discarded()) value = raw; // unquoted strings like `vdp`
        if (value.is_object() || value.is_array())
            throw ConfigError("override '" + key + "' must be a scalar");
        entries[key] = value;
    }
    if (entries.find("seed") == entries.end() && env_seed)
        entries["seed"] = *env_seed;
    ExperimentConfig cfg = from_flat(entries);
    cfg.validate();
    return cfg;
}

json EvalReport::to_json() const {
    json j;
    j["system"] = system;
    j["target"] = {{"abs", target_abs}, {"arg", target_arg}};
    j["method"] = method;
    j["runs"] = runs;
    j["repeats"] = repeats;
    j["mean_error"] = std::isfinite(mean_error) ? json(mean_error) : json();
    j["stderr"] = std::isfinite(stderr_error) ? json(stderr_error) : json();
    json pr = json::array();
    for (double v : per_repeat) pr.push_back(std::isfinite(v) ? json(v) : json());
    j["per_repeat"] = std::move(pr);
    json det = json::array();
    for (const auto& repeat : detail) {
        json runs_json = json::array();
        for (const RunOutcome& run : repeat) {
            json r;
            r["status"] = run.ok ? "ok" : "failed";
            if (run.ok) {
                r["error"] = run.error;
                r["eigenvalues"] = eig_list_json(run.estimates);
            }
            runs_json.push_back(std::move(r));
        }
        det.push_back(std::move(runs_json));
    }
    j["detail"] = std::move(det);
    j["config_hash"] = config_hash;
    return j;
}

EvalReport EvalReport::from_json(const json& j) {
    EvalReport r;
    try {
        r.system = j.value("system", std::string());
        r.target_abs = j.at("target").at("abs").get<double>();
        r.target_arg = j.at("target").at("arg").get<double>();
        r.method = j.at("method").get<std::string>();
        r.runs = j.at("runs").get<int>();
        r.repeats = j.at("repeats").get<int>();
        r.mean_error = j.at("mean_error").is_number()
                           ? j.at("mean_error").get<double>()
                           : std::numeric_limits<double>::quiet_NaN();
        r.stderr_error = j.at("stderr").is_number()
                             ? j.at("stderr").get<double>()
                             : std::numeric_limits<double>::quiet_NaN();
        for (const json& v : j.at("per_repeat"))
            r.per_repeat.push_back(v.is_number() ? v.get<double>()
                                                 : std::numeric_limits<double>::quiet_NaN());
        r.config_hash = j.value("config_hash", std::string());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("eval report: missing or malformed field: ") + e.what());
    }
    return r;
}

EvalReport evaluate(Environment& env, const std::function<double(const Mat&)>& controller,
                    const ExperimentConfig& cfg) {
    cfg.validate();
    const TargetSpectrum targets = cfg.targets();
    EvalReport report;
    report.system = system_name(cfg.system);
    report.target_abs = cfg.target_abs;
    report.target_arg = cfg.target_arg;
    report.method = cfg.method;
    report.runs = cfg.eval_runs;
    report.repeats = cfg.eval_repeats;
    report.config_hash = cfg.hash();
    const std::uint64_t eval_master = Rng::derive(cfg.seed, kEvalStream);
    std::vector<double> valid_means;
    for (int j = 0; j < cfg.eval_repeats; ++j) {
        std::vector<RunOutcome> outcomes;
        std::vector<double> errors;
        for (int i = 0; i < cfg.eval_runs; ++i) {
            const std::uint64_t run_seed = Rng::derive(
                eval_master, static_cast<std::uint64_t>(j) * cfg.eval_runs + i);
            RunOutcome o;
            try {
                Trajectory traj = rollout_policy(env, controller, cfg.train.horizon, run_seed);
                o.estimates = estimate_eigs(traj, cfg.train.hankel);
                o.error = spectrum_distance(targets.eigenvalues, o.estimates);
                o.ok = true;
                errors.push_back(o.error);
            } catch (const NumericError&) {
                o.ok = false;
            }
            outcomes.push_back(std::move(o));
        }
        const double repeat_mean = mean_of(errors);
        report.per_repeat.push_back(repeat_mean);
        if (std::isfinite(repeat_mean)) valid_means.push_back(repeat_mean);
        report.detail.push_back(std::move(outcomes));
    }
    report.mean_error = mean_of(valid_means);
    if (valid_means.size() >= 2) {
        double ss = 0.0;
        for (double v : valid_means) ss += (v - report.mean_error) * (v - report.mean_error);
        const double sd = std::sqrt(ss / static_cast<double>(valid_means.size() - 1));
        report.stderr_error = sd / std::sqrt(static_cast<double>(valid_means.size()));
    } else {
        report.stderr_error = 0.0;
    }
    return report;
}

std::function<double(const Mat&)> controller_from_checkpoint(const Checkpoint& ckpt,
                                                             const std::string& hash_guard) {
    if (!hash_guard.empty() && ckpt.config_hash != hash_guard)
        throw ConfigError("checkpoint hash " + ckpt.config_hash +
                          " does not match config hash " + hash_guard);
    if (ckpt.method == "rl") {
        if (!ckpt.mlp) throw ConfigError("rl checkpoint lacks the mlp section");
        return MlpPolicy(*ckpt.mlp).make_controller(GainMode::Evaluate);
    }
    if (!ckpt.model) throw ConfigError("checkpoint lacks the latent model");
    const TargetSpectrum padded = pad_targets(ckpt.targets, ckpt.model->latent_dim());
    return KoopmanPolicy(*ckpt.model, padded).make_controller(GainMode::Evaluate);
}

EvalReport run_experiment(const ExperimentConfig& cfg, bool dry_run) {
    cfg.validate();
    EvalReport report;
    if (dry_run) {
        report.system = system_name(cfg.system);
        report.method = cfg.method;
        report.target_abs = cfg.target_abs;
        report.target_arg = cfg.target_arg;
        report.config_hash = cfg.hash();
        return report;
    }
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError("cannot create output directory", cfg.output_dir);
    const auto artifact = [&cfg](const char* name) {
        return (fs::path(cfg.output_dir) / name).string();
    };

    json snapshot;
    for (const auto& [key, value] : cfg.flat()) snapshot[key] = value;
    snapshot["config-hash"] = cfg.hash();
    write_json_file(artifact("config.json"), snapshot);

    const TargetSpectrum targets = cfg.targets();
    const SystemSpec spec = cfg.system_spec();
    OdeSystem env(spec, cfg.seed);
    TrainConfig tc = cfg.train;
    tc.seed = Rng::derive(cfg.seed, kTrainStream);

    std::ofstream log;
    const auto open_log = [&log, &artifact]() {
        log.open(artifact("training.jsonl"));
        if (!log) throw IoError("cannot open training log", "training.jsonl");
    };
    const EpochCallback log_epoch = [&log](const EpochStats& s) {
        log << epoch_json(s).dump() << '\n';
    };

    Checkpoint ckpt;
    ckpt.system = system_name(cfg.system);
    ckpt.method = cfg.method;
    ckpt.targets = targets;
    ckpt.config_hash = cfg.hash();

    if (cfg.method == "sl") {
        IdDataset data = collect_id_data(env, cfg.id_sequences, cfg.train.horizon,
                                         Rng::derive(cfg.seed, kIdStream));
        auto [a, b] = fit_sl(data);
        ckpt.model = wrap_linear_model(a, b);
    } else if (cfg.method == "sn") {
        IdDataset data = collect_id_data(env, cfg.id_sequences, cfg.train.horizon,
                                         Rng::derive(cfg.seed, kIdStream));
        SnConfig sc = cfg.sn;
        sc.latent = targets.size();
        sc.seed = Rng::derive(cfg.seed, kSnStream);
        SnResult sn = fit_sn(data, sc);
        ckpt.model = sn.model;
        ckpt.decoder = sn.decoder;
        std::ofstream snlog(artifact("sn_loss.jsonl"));
        for (std::size_t e = 0; e < sn.loss_curve.size(); ++e)
            snlog << json{{"epoch", e}, {"loss", sn.loss_curve[e]}}.dump() << '\n';
    } else if (cfg.method == "rl") {
        open_log();
        RlResult rl = train_rl(env, targets, tc, log_epoch);
        ckpt.mlp = rl.params;
    } else { // ours
        KoopmanModel model;
        if (cfg.pretrain) {
            IdDataset data = collect_id_data(env, cfg.id_sequences, cfg.train.horizon,
                                             Rng::derive(cfg.seed, kIdStream));
            SnConfig sc = cfg.sn;
            sc.latent = targets.size();
            sc.seed = Rng::derive(cfg.seed, kSnStream);
            SnResult sn = fit_sn(data, sc);
            model = sn.model;
            std::ofstream snlog(artifact("sn_loss.jsonl"));
            for (std::size_t e = 0; e < sn.loss_curve.size(); ++e)
                snlog << json{{"epoch", e}, {"loss", sn.loss_curve[e]}}.dump() << '\n';
        } else {
            Rng init_rng(Rng::derive(cfg.seed, kInitStream));
            model = KoopmanModel::init(env.measurement_dim(), targets.size(), init_rng);
        }
        KoopmanPolicy policy(model, targets);
        open_log();
        train(policy, env, targets, tc, log_epoch);
        ckpt.model = policy.model();
    }
    if (log.is_open()) log.close();
    save_checkpoint(artifact("checkpoint.json"), ckpt);

    const auto controller = controller_from_checkpoint(ckpt, cfg.hash());
    report = evaluate(env, controller, cfg);
    write_json_file(artifact("eval_report.json"), report.to_json());

    const std::uint64_t plot_master = Rng::derive(cfg.seed, kPlotStream);
    for (int i = 0; i < 3; ++i) {
        Trajectory traj = rollout_policy(env, controller, cfg.train.horizon,
                                         Rng::derive(plot_master, static_cast<std::uint64_t>(i)));
        const std::string stem = "trajectory_" + std::to_string(i);
        write_trajectory_csv(artifact((stem + ".csv").c_str()), traj, spec.dt);
        write_trajectory_svg(artifact((stem + ".svg").c_str()),
                             ckpt.system + " " + cfg.method + " controlled rollout " +
                                 std::to_string(i),
                             traj, spec.dt);
    }
    return report;
}

std::vector<ReportRow> aggregate_reports(const std::vector<std::string>& paths) {
    std::vector<ReportRow> rows;
    for (const std::string& path : paths) {
        const EvalReport r = EvalReport::from_json(load_json_file(path));
        ReportRow row;
        row.system = r.system;
        row.target_abs = r.target_abs;
        row.target_arg = r.target_arg;
        row.method = r.method;
        row.mean_error = r.mean_error;
        row.stderr_error = r.stderr_error;
        rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
        return std::tie(a.system, a.target_abs, a.target_arg, a.method) <
               std::tie(b.system, b.target_abs, b.target_arg, b.method);
    });
    return rows;
}

void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open report CSV for writing", path);
    out << "system,target_abs,target_arg,method,mean_error,stderr\n";
    char buf[40];
    const auto num = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    for (const ReportRow& r : rows)
        out << r.system << ',' << num(r.target_abs) << ',' << num(r.target_arg) << ','
            << r.method << ',' << num(r.mean_error) << ',' << num(r.stderr_error) << '\n';
    if (!out) throw IoError("failed writing report CSV", path);
}

} // namespace koopctl
