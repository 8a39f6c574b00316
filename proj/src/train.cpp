#include "koopctl/train.hpp"

#include <cmath>
#include <limits>

#include "koopctl/errors.hpp"

namespace koopctl {

namespace {

constexpr std::uint64_t kValidationStream = 0x76616c6964ULL;
constexpr std::uint64_t kEpochStream = 0x65706f6368ULL;

double batch_mean_reward(const RolloutBatch& batch) {
    if (batch.episodes.empty()) return std::numeric_limits<double>::quiet_NaN();
    double sum = 0.0;
    for (const Episode& e : batch.episodes) sum += e.terminal_reward;
    return sum / static_cast<double>(batch.episodes.size());
}

} // namespace

void TrainConfig::validate() const {
    if (epochs_max < 0) throw ConfigError("train: epochs-max must be >= 0");
    if (batch < 1) throw ConfigError("train: batch must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
    if (!(gamma > 0.0) || gamma > 1.0) throw ConfigError("train: gamma must be in (0, 1]");
    if (horizon < hankel.delay + 2)
        throw ConfigError("train: horizon must be >= delay + 2");
    if (eval_every < 1) throw ConfigError("train: eval-every must be >= 1");
    if (patience < 1) throw ConfigError("train: patience must be >= 1");
    if (validation_rollouts < 1) throw ConfigError("train: validation-rollouts must be >= 1");
    if (!(sigma2_scale > 0.0)) throw ConfigError("train: sigma2-scale must be positive");
    if (control_cost < 0.0) throw ConfigError("train: control-cost must be >= 0");
}

double spectral_reward(const Trajectory& y, const TargetSpectrum& targets,
                       const HankelConfig& cfg) {
    const std::vector<Complex> estimates = estimate_eigs(y, cfg);
    return -spectrum_distance(targets.eigenvalues, estimates);
}

RolloutBatch collect_batch(Tape& tape, DifferentiablePolicy& policy, Environment& env,
                           const TargetSpectrum& targets, const TrainConfig& cfg,
                           std::uint64_t batch_seed) {
    const double sigma2 = cfg.sigma2_scale * env.control_bounds().width();
    const Interval bounds = env.control_bounds();
    RolloutBatch batch;
    for (int n = 0; n < cfg.batch; ++n) {
        const std::uint64_t episode_seed = Rng::derive(batch_seed, static_cast<std::uint64_t>(n));
        Rng explore(Rng::derive(episode_seed, 1));
        Episode ep;
        Mat y = env.reset(Rng::derive(episode_seed, 0));
        ep.trajectory.measurements.push_back(y);
        for (int t = 1; t < cfg.horizon; ++t) {
            Var mean = policy.mean(tape, y);
            ControlSample s = sample_control(tape, mean, sigma2, bounds, explore);
            y = env.step(s.applied);
            ep.trajectory.measurements.push_back(y);
            ep.trajectory.controls.push_back(s.applied);
            ep.logp.push_back(s.logp);
            ep.rewards.push_back(-cfg.control_cost * s.applied * s.applied);
        }
        try {
            ep.terminal_reward = spectral_reward(ep.trajectory, targets, cfg.hankel);
        } catch (const NumericError&) {
            ++batch.dropped;
            continue;
        }
        const int m = static_cast<int>(ep.logp.size());
        ep.returns.assign(m, 0.0);
        double g = ep.terminal_reward;
        for (int i = m - 1; i >= 0; --i) {
            g = ep.rewards[i] + cfg.gamma * g;
            ep.returns[i] = g;
        }
        batch.episodes.push_back(std::move(ep));
    }
    return batch;
}

Adam::Adam(double lr, Direction direction, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
      sign_(direction == Direction::Maximize ? 1.0 : -1.0) {}

void Adam::step(const std::vector<Mat*>& params, const std::vector<Mat>& grads) {
    if (params.size() != grads.size())
        throw DimensionError("adam: parameter/gradient count mismatch");
    if (m_.empty()) {
        for (const Mat* p : params) {
            m_.emplace_back(p->rows(), p->cols());
            v_.emplace_back(p->rows(), p->cols());
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Mat& p = *params[i];
        const Mat& g = grads[i];
        check_same_shape(p, g, "adam");
        for (int r = 0; r < p.rows(); ++r)
            for (int c = 0; c < p.cols(); ++c) {
                double& m = m_[i](r, c);
                double& v = v_[i](r, c);
                const double gv = g(r, c);
                m = beta1_ * m + (1.0 - beta1_) * gv;
                v = beta2_ * v + (1.0 - beta2_) * gv * gv;
                p(r, c) += sign_ * lr_ * (m / bc1) / (std::sqrt(v / bc2) + eps_);
            }
    }
}

StepInfo policy_gradient_step(Tape& tape, const RolloutBatch& batch,
                              const std::vector<Var>& leaves,
                              const std::vector<Mat*>& params, Adam& opt) {
    StepInfo info;
    if (batch.episodes.empty()) {
        info.skipped = true;
        return info;
    }
    const int n = static_cast<int>(batch.episodes.size());
    const std::size_t steps = batch.episodes.front().returns.size();
    for (const Episode& e : batch.episodes)
        if (e.returns.size() != steps)
            throw DimensionError("policy_gradient_step: episodes differ in length");
    std::vector<double> baseline(steps, 0.0);
    for (const Episode& e : batch.episodes)
        for (std::size_t t = 0; t < steps; ++t) baseline[t] += e.returns[t];
    for (double& b : baseline) b /= static_cast<double>(n);

    std::vector<Var> terms;
    std::vector<double> weights;
    terms.reserve(batch.episodes.size() * steps);
    weights.reserve(terms.capacity());
    for (const Episode& e : batch.episodes)
        for (std::size_t t = 0; t < steps; ++t) {
            terms.push_back(e.logp[t]);
            weights.push_back((e.returns[t] - baseline[t]) / static_cast<double>(n));
        }
    Var surrogate = tape.weighted_sum(terms, weights);
    tape.backward(surrogate);

    std::vector<Mat> grads;
    grads.reserve(leaves.size());
    double norm2 = 0.0;
    bool finite = true;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        const Mat& g = tape.grad(leaves[i]);
        Mat gm = g.empty() ? Mat(params[i]->rows(), params[i]->cols()) : g;
        if (!gm.is_finite()) finite = false;
        norm2 += sq_norm(gm);
        grads.push_back(std::move(gm));
    }
    info.grad_norm = std::sqrt(norm2);
    if (!finite) {
        info.skipped = true;
        return info;
    }
    opt.step(params, grads);
    return info;
}

double validation_reward(DifferentiablePolicy& policy, Environment& env,
                         const TargetSpectrum& targets, const TrainConfig& cfg) {
    const auto controller = policy.make_controller(GainMode::Train);
    const std::uint64_t val_seed = Rng::derive(cfg.seed, kValidationStream);
    double sum = 0.0;
    int ok = 0;
    for (int i = 0; i < cfg.validation_rollouts; ++i) {
        Trajectory traj = rollout_policy(env, controller, cfg.horizon,
                                         Rng::derive(val_seed, static_cast<std::uint64_t>(i)));
        try {
            sum += spectral_reward(traj, targets, cfg.hankel);
            ++ok;
        } catch (const NumericError&) {
        }
    }
    if (ok == 0) return -std::numeric_limits<double>::infinity();
    return sum / static_cast<double>(ok);
}

TrainResult train(DifferentiablePolicy& policy, Environment& env,
                  const TargetSpectrum& targets, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
    cfg.validate();
    targets.validate();
    TrainResult result;
    const std::vector<Mat*> params = policy.parameters();
    std::vector<Mat> best;
    best.reserve(params.size());
    for (const Mat* p : params) best.push_back(*p);
    double best_val = -std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    int stale_evals = 0;
    double last_val = -std::numeric_limits<double>::infinity();

    auto run_validation = [&](int epoch) {
        last_val = validation_reward(policy, env, targets, cfg);
        if (last_val > best_val) {
            best_val = last_val;
            best_epoch = epoch;
            for (std::size_t i = 0; i < params.size(); ++i) best[i] = *params[i];
            stale_evals = 0;
        } else {
            ++stale_evals;
        }
    };

    Adam opt(cfg.lr, Adam::Direction::Maximize);
    Tape tape;
    const std::uint64_t epoch_master = Rng::derive(cfg.seed, kEpochStream);
    for (int epoch = 0; epoch < cfg.epochs_max; ++epoch) {
        if (epoch % cfg.eval_every == 0) {
            run_validation(epoch);
            if (stale_evals >= cfg.patience) break;
        }
        tape.reset();
        std::vector<Var> leaves = policy.begin_batch(tape, GainMode::Train);
        RolloutBatch batch = collect_batch(tape, policy, env, targets, cfg,
                                           Rng::derive(epoch_master, static_cast<std::uint64_t>(epoch)));
        StepInfo step = policy_gradient_step(tape, batch, leaves, params, opt);
        EpochStats stats;
        stats.epoch = epoch;
        stats.mean_reward = batch_mean_reward(batch);
        stats.validation_reward = last_val;
        stats.dropped = batch.dropped;
        stats.grad_norm = step.grad_norm;
        result.curve.push_back(stats);
        if (on_epoch) on_epoch(stats);
        result.epochs_run = epoch + 1;
    }
    if (result.epochs_run > 0) run_validation(result.epochs_run);
    for (std::size_t i = 0; i < params.size(); ++i) *params[i] = best[i];
    result.best_validation = best_val;
    result.best_epoch = best_epoch;
    return result;
}

} // namespace koopctl
