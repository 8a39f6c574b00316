#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "koopctl/baselines.hpp"
#include "koopctl/dynamics.hpp"
#include "koopctl/policy.hpp"
#include "koopctl/pole.hpp"
#include "koopctl/train.hpp"

namespace koopctl {

// Conjugate-closed pair from modulus/argument: arg > 0 gives
// {abs e^{+i arg}, abs e^{-i arg}}, arg = 0 the real double root {abs, abs}.
TargetSpectrum expand_target(double abs, double arg);

// One experiment: a system, a target eigenvalue pair, a method and budgets.
// Serialized as a flat JSON object with dotted keys; every field has a key so
// snapshots carry effective values, not just what the user set.
struct ExperimentConfig {
    SystemKind system = SystemKind::VanDerPol;
    double noise_std = 1e-2;
    bool rossler_standard = false;
    double target_abs = 1.0;
    double target_arg = 0.0;
    std::string method = "ours"; // ours | sl | sn | rl
    TrainConfig train;           // train.seed is derived from `seed`
    int eval_runs = 50;
    int eval_repeats = 10;
    int id_sequences = 100; // random-control sequences for identification
    SnConfig sn;
    bool pretrain = true; // ours: initialize from an SN fit
    std::uint64_t seed = 0;
    std::string output_dir = "out";

    void validate() const;
    TargetSpectrum targets() const { return expand_target(target_abs, target_arg); }
    SystemSpec system_spec() const;

    // Canonical flat representation (all keys, sorted) used for snapshots
    // and hashing.
    std::map<std::string, nlohmann::json> flat() const;
    // FNV-1a over the canonical flat serialization, as a hex string.
    std::string hash() const;

    static ExperimentConfig from_flat(const std::map<std::string, nlohmann::json>& entries);
    // Reads a flat JSON config file, then applies `key=value` overrides.
    // A missing `seed` key falls back to `env_seed` when provided.
    static ExperimentConfig load(const std::string& path,
                                 const std::vector<std::string>& overrides,
                                 std::optional<std::uint64_t> env_seed = std::nullopt);
};

// 64-bit FNV-1a of a byte string, rendered as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

struct RunOutcome {
    double error = 0.0; // mean min-matched distance to the targets, positive-signed
    bool ok = false;
    std::vector<Complex> estimates;
};

struct EvalReport {
    std::string system;
    double target_abs = 0.0;
    double target_arg = 0.0;
    std::string method;
    int runs = 0;
    int repeats = 0;
    double mean_error = 0.0;
    double stderr_error = 0.0;         // stddev of repeat means / sqrt(repeats)
    std::vector<double> per_repeat;    // repeat means
    std::vector<std::vector<RunOutcome>> detail; // [repeat][run]
    std::string config_hash;

    nlohmann::json to_json() const;
    static EvalReport from_json(const nlohmann::json& j);
};

// Deterministic-policy evaluation: repeats groups of runs rollouts; per-run
// spectral error against the config's targets; failures recorded per run and
// excluded from the means.
EvalReport evaluate(Environment& env, const std::function<double(const Mat&)>& controller,
                    const ExperimentConfig& cfg);

// Trains (or identifies) per cfg.method, evaluates, and writes all artifacts
// under cfg.output_dir: config snapshot, checkpoint, training log, eval
// report, sample trajectory CSVs and SVG plots. With dry_run, validates and
// writes nothing.
EvalReport run_experiment(const ExperimentConfig& cfg, bool dry_run = false);

// Builds the deterministic controller a checkpoint describes; `hash_guard`
// (the current config hash) must match the checkpoint's recorded hash unless
// empty.
std::function<double(const Mat&)> controller_from_checkpoint(const Checkpoint& ckpt,
                                                             const std::string& hash_guard);

struct ReportRow {
    std::string system;
    double target_abs = 0.0;
    double target_arg = 0.0;
    std::string method;
    double mean_error = 0.0;
    double stderr_error = 0.0;
};

// Aggregates eval-report files into rows sorted by (system, target, method).
std::vector<ReportRow> aggregate_reports(const std::vector<std::string>& paths);
void write_report_csv(const std::string& path, const std::vector<ReportRow>& rows);

} // namespace koopctl
