#include "koopctl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "koopctl/errors.hpp"
#include "koopctl/linalg.hpp"

namespace koopctl {

namespace {

constexpr double kSlRidge = 1e-10;

// Selection matrix keeping the first m-1 of m columns: right-multiplying by
// it is differentiable column slicing.
Mat drop_last_col_selector(int m) {
    Mat s(m, m - 1);
    for (int i = 0; i + 1 < m; ++i) s(i, i) = 1.0;
    return s;
}

} // namespace

void IdDataset::validate() const {
    if (sequences.empty()) throw ConfigError("dataset: no sequences");
    const int t_len = sequences.front().length();
    const int d = sequences.front().dim();
    for (const Trajectory& seq : sequences) {
        seq.validate();
        if (seq.length() != t_len) throw ConfigError("dataset: sequences differ in length");
        if (seq.dim() != d) throw ConfigError("dataset: sequences differ in dimension");
    }
}

IdDataset collect_id_data(Environment& env, int count, int horizon, std::uint64_t seed) {
    if (count < 1) throw ConfigError("dataset: count must be >= 1");
    IdDataset data;
    data.sequences.reserve(count);
    for (int n = 0; n < count; ++n)
        data.sequences.push_back(
            rollout_random(env, horizon, Rng::derive(seed, static_cast<std::uint64_t>(n))));
    return data;
}

std::pair<Mat, Mat> fit_sl(const IdDataset& data) {
    data.validate();
    const int d = data.dim();
    const int t_len = data.horizon();
    const long pairs = static_cast<long>(data.count()) * (t_len - 1);
    if (pairs < d + 1)
        throw IdentificationError("sl: not enough transition pairs for the regressor");
    // Normal equations over z = [y; u]: M = (sum y' z^T)(sum z z^T + ridge)^-1.
    Mat gram(d + 1, d + 1);
    Mat cross(d, d + 1);
    std::vector<double> z(d + 1);
    for (const Trajectory& seq : data.sequences)
        for (int t = 0; t + 1 < t_len; ++t) {
            const Mat& y = seq.measurements[t];
            const Mat& ynext = seq.measurements[t + 1];
            for (int i = 0; i < d; ++i) z[i] = y(i, 0);
            z[d] = seq.controls[t];
            for (int i = 0; i <= d; ++i) {
                for (int j = 0; j <= d; ++j) gram(i, j) += z[i] * z[j];
            }
            for (int i = 0; i < d; ++i)
                for (int j = 0; j <= d; ++j) cross(i, j) += ynext(i, 0) * z[j];
        }
    for (int i = 0; i <= d; ++i) gram(i, i) += kSlRidge;
    Mat m;
    try {
        m = transpose(solve(gram, transpose(cross)));
    } catch (const SingularMatrixError&) {
        throw IdentificationError("sl: rank-deficient regressor");
    }
    Mat a(d, d);
    Mat b(d, 1);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) a(i, j) = m(i, j);
        b(i, 0) = m(i, d);
    }
    return {std::move(a), std::move(b)};
}

double sl_residual(const IdDataset& data, const Mat& a, const Mat& b) {
    data.validate();
    double rss = 0.0;
    for (const Trajectory& seq : data.sequences)
        for (int t = 0; t + 1 < seq.length(); ++t) {
            Mat pred = matmul(a, seq.measurements[t]) + seq.controls[t] * b;
            rss += sq_norm(seq.measurements[t + 1] - pred);
        }
    return rss;
}

KoopmanModel wrap_linear_model(const Mat& a, const Mat& b) {
    KoopmanModel m;
    m.a = a;
    m.b = b;
    m.theta = identity_encoder(a.rows());
    m.validate();
    return m;
}

void SnConfig::validate() const {
    if (latent < 1) throw ConfigError("sn: latent dimension must be >= 1");
    if (steps < 0) throw ConfigError("sn: steps must be >= 0");
    if (epochs < 0) throw ConfigError("sn: epochs must be >= 0");
    if (batch < 1) throw ConfigError("sn: batch must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("sn: lr must be positive");
}

SnResult fit_sn(const IdDataset& data, const SnConfig& cfg) {
    data.validate();
    cfg.validate();
    const int d = data.dim();
    const int t_len = data.horizon();
    if (t_len <= cfg.steps + 1)
        throw ConfigError("sn: horizon must exceed steps + 1");

    Rng rng(Rng::derive(cfg.seed, 0x736eULL));
    SnResult result;
    result.model = KoopmanModel::init(d, cfg.latent, rng);
    result.decoder = EncoderParams::init(cfg.latent, 8, d, rng);

    KoopmanModel& model = result.model;
    EncoderParams& dec = result.decoder;
    const std::vector<Mat*> params = {&model.a,     &model.b,     &model.theta.w1,
                                      &model.theta.b1, &model.theta.w2, &model.theta.b2,
                                      &dec.w1,      &dec.b1,      &dec.w2,      &dec.b2};

    // Per-sequence constants: stacked measurements and the control row.
    std::vector<Mat> ymats;
    ymats.reserve(data.count());
    for (const Trajectory& seq : data.sequences) {
        Mat y(d, t_len);
        for (int t = 0; t < t_len; ++t)
            for (int i = 0; i < d; ++i) y(i, t) = seq.measurements[t](i, 0);
        ymats.push_back(std::move(y));
    }

    // Column range j..j+m-1 of a stacked measurement matrix.
    auto slice_cols = [](const Mat& y, int j, int m) {
        Mat out(y.rows(), m);
        for (int i = 0; i < y.rows(); ++i)
            for (int c = 0; c < m; ++c) out(i, c) = y(i, j + c);
        return out;
    };

    Adam opt(cfg.lr, Adam::Direction::Minimize);
    Tape tape;
    std::vector<int> order(data.count());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(Rng::derive(Rng::derive(cfg.seed, 0x6f72ULL),
                                    static_cast<std::uint64_t>(epoch)));
        for (int i = data.count() - 1; i > 0; --i) {
            const int j = static_cast<int>(shuffle_rng.uniform() * (i + 1));
            std::swap(order[i], order[std::min(j, i)]);
        }
        double epoch_loss = 0.0;
        int batches = 0;
        for (int start = 0; start < data.count(); start += cfg.batch) {
            const int stop = std::min(start + cfg.batch, data.count());
            tape.reset();
            Var av = tape.leaf(model.a);
            Var bv = tape.leaf(model.b);
            EncoderVars enc_vars = encoder_leaves(tape, model.theta);
            EncoderVars dec_vars = encoder_leaves(tape, dec);
            const std::vector<Var> leaves = {av,          bv,          enc_vars.w1, enc_vars.b1,
                                             enc_vars.w2, enc_vars.b2, dec_vars.w1, dec_vars.b1,
                                             dec_vars.w2, dec_vars.b2};
            std::vector<Var> terms;
            long term_columns = 0;
            for (int idx = start; idx < stop; ++idx) {
                const Mat& y = ymats[order[idx]];
                const std::vector<double>& u = data.sequences[order[idx]].controls;
                Var z = encode(tape, enc_vars, tape.constant(y));
                for (int l = 0; l <= cfg.steps; ++l) {
                    const int cols = t_len - l;
                    if (l > 0) {
                        Var kept = tape.matmul(z, tape.constant(drop_last_col_selector(cols + 1)));
                        Mat urow(1, cols);
                        for (int t = 0; t < cols; ++t) urow(0, t) = u[t + l - 1];
                        z = tape.add(tape.matmul(av, kept),
                                     tape.matmul(bv, tape.constant(urow)));
                    }
                    Var pred = encode(tape, dec_vars, z);
                    Var err = tape.sub(tape.constant(slice_cols(y, l, cols)), pred);
                    terms.push_back(tape.sq_norm(err));
                    term_columns += cols;
                }
            }
            const std::vector<double> weights(terms.size(),
                                              1.0 / static_cast<double>(term_columns));
            Var loss = tape.weighted_sum(terms, weights);
            const double loss_value = tape.value(loss)(0, 0);
            if (!std::isfinite(loss_value))
                throw TrainingError("sn: loss diverged to a non-finite value");
            tape.backward(loss);
            std::vector<Mat> grads;
            grads.reserve(leaves.size());
            for (std::size_t p = 0; p < leaves.size(); ++p) {
                const Mat& g = tape.grad(leaves[p]);
                grads.push_back(g.empty() ? Mat(params[p]->rows(), params[p]->cols()) : g);
                if (!grads.back().is_finite())
                    throw TrainingError("sn: non-finite gradient");
            }
            opt.step(params, grads);
            epoch_loss += loss_value;
            ++batches;
        }
        result.loss_curve.push_back(epoch_loss / std::max(batches, 1));
    }
    return result;
}

TargetSpectrum pad_targets(const TargetSpectrum& targets, int k) {
    targets.validate();
    if (targets.size() > k)
        throw ConfigError("targets: more eigenvalues than latent dimensions");
    TargetSpectrum padded = targets;
    while (padded.size() < k) padded.eigenvalues.emplace_back(0.0, 0.0);
    return padded;
}

Mat control_from_id(const KoopmanModel& model, const TargetSpectrum& targets) {
    model.validate();
    return ackermann(model.a, model.b, pad_targets(targets, model.latent_dim()),
                     GainMode::Evaluate);
}

MlpPolicy::MlpPolicy(MlpParams params) : params_(std::move(params)) {
    params_.validate();
    if (params_.output_dim() != 1)
        throw ConfigError("rl policy: output must be scalar");
}

std::vector<Mat*> MlpPolicy::parameters() {
    std::vector<Mat*> out;
    for (std::size_t l = 0; l < params_.weights.size(); ++l) {
        out.push_back(&params_.weights[l]);
        out.push_back(&params_.biases[l]);
    }
    return out;
}

std::vector<Var> MlpPolicy::begin_batch(Tape& tape, GainMode) {
    leaf_vars_.clear();
    for (std::size_t l = 0; l < params_.weights.size(); ++l) {
        leaf_vars_.push_back(tape.leaf(params_.weights[l]));
        leaf_vars_.push_back(tape.leaf(params_.biases[l]));
    }
    return leaf_vars_;
}

Var MlpPolicy::mean(Tape& tape, const Mat& y) {
    if (leaf_vars_.empty()) throw UsageError("rl policy: begin_batch must precede mean");
    Var x = tape.constant(y);
    const std::size_t layers = params_.weights.size();
    for (std::size_t l = 0; l < layers; ++l) {
        x = tape.add(tape.matmul(leaf_vars_[2 * l], x), leaf_vars_[2 * l + 1]);
        if (l + 1 < layers) x = tape.relu(x);
    }
    return x;
}

std::function<double(const Mat&)> MlpPolicy::make_controller(GainMode) const {
    const MlpParams snapshot = params_;
    return [snapshot](const Mat& y) { return snapshot.forward(y)(0, 0); };
}

MlpParams rl_policy_init(int input_dim, std::uint64_t seed) {
    Rng rng(Rng::derive(seed, 0x726cULL));
    MlpParams p = MlpParams::init({input_dim, 8, 2, 1}, rng);
    Mat& head = p.weights.back();
    for (int j = 0; j < head.cols(); ++j) head(0, j) = 0.0;
    return p;
}

RlResult train_rl(Environment& env, const TargetSpectrum& targets, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
    MlpPolicy policy(rl_policy_init(env.measurement_dim(), cfg.seed));
    TrainResult tr = train(policy, env, targets, cfg, on_epoch);
    return {policy.params(), std::move(tr)};
}

} // namespace koopctl
