#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "koopctl/dmd.hpp"
#include "koopctl/dynamics.hpp"
#include "koopctl/policy.hpp"
#include "koopctl/pole.hpp"
#include "koopctl/tape.hpp"

namespace koopctl {

struct TrainConfig {
    int epochs_max = 10000;
    int batch = 10; // episodes per gradient step
    double lr = 1e-3;
    double gamma = 0.99;
    int horizon = 200; // measurements per episode
    int eval_every = 50;
    int patience = 20; // evaluations without improvement before stopping
    std::uint64_t seed = 0;
    int validation_rollouts = 10;
    HankelConfig hankel;
    double sigma2_scale = 0.5; // exploration variance = scale * control width
    double control_cost = 0.0; // per-step reward -cost*u^2; disabled by default

    void validate() const;
};

// Negative mean distance from each target eigenvalue to its nearest estimate
// on the trajectory's spectrum; always <= 0, 0 iff matched exactly.
// Spectral-estimation failures propagate as NumericError.
double spectral_reward(const Trajectory& y, const TargetSpectrum& targets,
                       const HankelConfig& cfg);

struct Episode {
    Trajectory trajectory;
    std::vector<Var> logp;       // one per applied control, on the batch tape
    std::vector<double> rewards; // per-step rewards aligned with logp
    double terminal_reward = 0.0;
    std::vector<double> returns; // discounted returns R_t
};

struct RolloutBatch {
    std::vector<Episode> episodes; // successfully scored episodes only
    int dropped = 0;               // discarded due to spectral-estimation failure
};

// Rolls cfg.batch exploration episodes, recording action means and
// log-densities on the tape. The caller must have called
// policy.begin_batch(tape, ...) so the gain subgraph is shared by the batch.
RolloutBatch collect_batch(Tape& tape, DifferentiablePolicy& policy, Environment& env,
                           const TargetSpectrum& targets, const TrainConfig& cfg,
                           std::uint64_t batch_seed);

class Adam {
public:
    enum class Direction { Minimize, Maximize };

    Adam(double lr, Direction direction,
         double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    // One update; moment buffers are sized on first use.
    void step(const std::vector<Mat*>& params, const std::vector<Mat>& grads);

private:
    double lr_, beta1_, beta2_, eps_, sign_;
    long t_ = 0;
    std::vector<Mat> m_, v_;
};

struct StepInfo {
    double grad_norm = 0.0;
    bool skipped = false; // empty batch or non-finite gradient; no update
};

// Baseline-subtracted REINFORCE surrogate, backward pass and Adam ascent.
// `leaves` and `params` are aligned (begin_batch / parameters order).
StepInfo policy_gradient_step(Tape& tape, const RolloutBatch& batch,
                              const std::vector<Var>& leaves,
                              const std::vector<Mat*>& params, Adam& opt);

struct EpochStats {
    int epoch = 0;
    double mean_reward = 0.0;       // batch mean terminal reward (NaN if all dropped)
    double validation_reward = 0.0; // most recent validation value
    int dropped = 0;
    double grad_norm = 0.0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Mean spectral reward of deterministic rollouts on fixed validation seeds;
// -infinity if every rollout's spectral estimation fails.
double validation_reward(DifferentiablePolicy& policy, Environment& env,
                         const TargetSpectrum& targets, const TrainConfig& cfg);

struct TrainResult {
    std::vector<EpochStats> curve;
    double best_validation = 0.0;
    int best_epoch = -1; // -1 = initial parameters were never beaten
    int epochs_run = 0;
};

// REINFORCE loop with validation every eval_every epochs and early stopping
// after `patience` evaluations without improvement. The policy is left
// holding the best-on-validation parameters.
TrainResult train(DifferentiablePolicy& policy, Environment& env,
                  const TargetSpectrum& targets, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

} // namespace koopctl
