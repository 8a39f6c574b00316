#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "koopctl/dynamics.hpp"
#include "koopctl/mat.hpp"
#include "koopctl/pole.hpp"
#include "koopctl/rng.hpp"
#include "koopctl/tape.hpp"

namespace koopctl {

// Feed-forward encoder: input -> hidden (ReLU) -> output (linear).
struct EncoderParams {
    Mat w1; // hidden x input
    Mat b1; // hidden x 1
    Mat w2; // output x hidden
    Mat b2; // output x 1

    int input_dim() const { return w1.cols(); }
    int hidden_dim() const { return w1.rows(); }
    int output_dim() const { return w2.rows(); }
    void validate() const;

    // Weights uniform in [-1/sqrt(fan-in), +1/sqrt(fan-in)], biases zero.
    static EncoderParams init(int input, int hidden, int output, Rng& rng);
};

// Hidden-8 encoder computing the exact identity on R^dim via
// relu(y) - relu(-y); requires dim <= 4. Used where the latent state is the
// measurement itself.
EncoderParams identity_encoder(int dim);

// Latent linear dynamics g' = A g + B u together with the encoder.
struct KoopmanModel {
    Mat a; // K x K
    Mat b; // K x 1
    EncoderParams theta;

    int latent_dim() const { return a.rows(); }
    void validate() const;

    // Cold start: A = 0.9 I, B uniform in [-0.1, 0.1], encoder init.
    static KoopmanModel init(int input_dim, int k, Rng& rng);
};

struct ControlDistribution {
    double mean = 0.0;
    double variance = 1.0;
};

// Plain forward pass; y may hold multiple columns.
Mat encode(const Mat& y, const EncoderParams& theta);

// Parameter leaves of an encoder on a tape, in fixed order w1, b1, w2, b2.
struct EncoderVars {
    Var w1, b1, w2, b2;
};
EncoderVars encoder_leaves(Tape& tape, const EncoderParams& theta);

// Columnwise MLP forward on the tape; biases broadcast across columns via a
// ones row so their adjoints accumulate correctly.
Var encode(Tape& tape, const EncoderVars& theta, Var y);

// One exploration draw: u_raw ~ N(mean, sigma2); the environment receives the
// clipped value but the log-density is of the raw sample, and its gradient
// flows into the mean node only.
struct ControlSample {
    double applied = 0.0;
    double raw = 0.0;
    Var logp;
};
ControlSample sample_control(Tape& tape, Var mean_node, double sigma2,
                             const Interval& bounds, Rng& rng);

// A policy whose action mean is differentiable through a tape. Parameter
// leaves are recorded once per batch in parameters() order so the trainer
// can pair gradients with parameters.
class DifferentiablePolicy {
public:
    virtual ~DifferentiablePolicy() = default;

    virtual std::vector<Mat*> parameters() = 0;
    // Records parameter leaves (and any shared subgraph, e.g. the gain) on
    // the tape; returns the leaves in parameters() order.
    virtual std::vector<Var> begin_batch(Tape& tape, GainMode mode) = 0;
    // 1x1 action mean for measurement y; requires begin_batch on this tape.
    virtual Var mean(Tape& tape, const Mat& y) = 0;
    // Deterministic controller snapshot of the current parameters.
    virtual std::function<double(const Mat&)> make_controller(GainMode mode) const = 0;
};

// The proposed policy: u = -F psi(y) with F the Ackermann gain of (A, B) at
// the target spectrum. The gain subgraph is recorded once per batch.
class KoopmanPolicy final : public DifferentiablePolicy {
public:
    KoopmanPolicy(KoopmanModel model, TargetSpectrum targets);

    std::vector<Mat*> parameters() override;
    std::vector<Var> begin_batch(Tape& tape, GainMode mode) override;
    Var mean(Tape& tape, const Mat& y) override;
    std::function<double(const Mat&)> make_controller(GainMode mode) const override;

    const KoopmanModel& model() const { return model_; }
    KoopmanModel& model() { return model_; }
    const TargetSpectrum& targets() const { return targets_; }

    // Gain at the current parameters (1 x K).
    Mat gain(GainMode mode) const;

private:
    KoopmanModel model_;
    TargetSpectrum targets_;
    EncoderVars theta_vars_;
    Var f_var_;
};

// General feed-forward net parameters (ReLU hidden layers, linear output);
// the model-free baseline policy.
struct MlpParams {
    std::vector<Mat> weights;
    std::vector<Mat> biases;

    int input_dim() const { return weights.front().cols(); }
    int output_dim() const { return weights.back().rows(); }
    void validate() const;

    static MlpParams init(const std::vector<int>& layer_dims, Rng& rng);
    Mat forward(const Mat& y) const;
};

// Trained artifact on disk. `model` is present for methods with latent linear
// dynamics (ours, sl, sn), `decoder` for sn, `mlp` for rl.
struct Checkpoint {
    std::string system;
    std::string method = "ours";
    TargetSpectrum targets;
    std::optional<KoopmanModel> model;
    std::optional<EncoderParams> decoder;
    std::optional<MlpParams> mlp;
    std::string config_hash;
};

void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

} // namespace koopctl
