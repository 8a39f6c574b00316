#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "koopctl/dynamics.hpp"
#include "koopctl/policy.hpp"
#include "koopctl/pole.hpp"
#include "koopctl/train.hpp"

namespace koopctl {

// Random-control sequences for system identification; all share one horizon.
struct IdDataset {
    std::vector<Trajectory> sequences;

    int count() const { return static_cast<int>(sequences.size()); }
    int dim() const { return sequences.empty() ? 0 : sequences.front().dim(); }
    int horizon() const { return sequences.empty() ? 0 : sequences.front().length(); }
    void validate() const;
};

IdDataset collect_id_data(Environment& env, int count, int horizon, std::uint64_t seed);

// Least-squares fit of y_{t+1} = A y_t + B u_t over all transition pairs
// (normal equations, ridge 1e-10). Returns (A: DxD, B: Dx1).
std::pair<Mat, Mat> fit_sl(const IdDataset& data);

// Residual sum of squares of a linear fit on the dataset, for fit diagnostics.
double sl_residual(const IdDataset& data, const Mat& a, const Mat& b);

// Wraps identified measurement-space dynamics as a latent model whose
// encoder is the exact identity, so it rides the same control/evaluation
// path as learned models.
KoopmanModel wrap_linear_model(const Mat& a, const Mat& b);

struct SnConfig {
    int latent = 2; // K
    int steps = 4;  // L, latent rollout length of the prediction loss
    int epochs = 60;
    int batch = 10; // sequences per Adam step
    double lr = 1e-3;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SnResult {
    KoopmanModel model;
    EncoderParams decoder;
    std::vector<double> loss_curve; // per-epoch mean of the batch losses
};

// Jointly fits encoder, decoder and (A, B) by minimizing the mean squared
// L-step reconstruction/prediction error
//   sum_{l=0..L} sum_t ||y_{t+l} - dec(A^l enc(y_t) + sum_{l'} A^{l-l'} B u_{t+l'-1})||^2
// normalized by the number of (sequence, l, t) terms. Throws TrainingError if
// the loss becomes non-finite.
SnResult fit_sn(const IdDataset& data, const SnConfig& cfg);

// Evaluation-mode Ackermann gain for an identified model. Targets are padded
// with zeros (deadbeat poles) up to the latent dimension when the identified
// state is larger than the target set.
Mat control_from_id(const KoopmanModel& model, const TargetSpectrum& targets);

// Pads a spectrum with real zero eigenvalues up to size k.
TargetSpectrum pad_targets(const TargetSpectrum& targets, int k);

// Model-free baseline policy: plain feed-forward net y -> u, trained by the
// same REINFORCE machinery as the latent-model policy.
class MlpPolicy final : public DifferentiablePolicy {
public:
    explicit MlpPolicy(MlpParams params);

    std::vector<Mat*> parameters() override;
    std::vector<Var> begin_batch(Tape& tape, GainMode mode) override;
    Var mean(Tape& tape, const Mat& y) override;
    std::function<double(const Mat&)> make_controller(GainMode mode) const override;

    const MlpParams& params() const { return params_; }

private:
    MlpParams params_;
    std::vector<Var> leaf_vars_;
};

// Fresh net for a measurement dimension: input -> 8 -> 2 -> 1, ReLU hidden,
// zero-initialized output layer (initial mean identically 0).
MlpParams rl_policy_init(int input_dim, std::uint64_t seed);

struct RlResult {
    MlpParams params;
    TrainResult train;
};

RlResult train_rl(Environment& env, const TargetSpectrum& targets, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

} // namespace koopctl
