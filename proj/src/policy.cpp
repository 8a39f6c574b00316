#include "koopctl/policy.hpp"

#include <cmath>
#include <fstream>
#include <utility>

#include <json.hpp>

#include "koopctl/errors.hpp"

namespace koopctl {

namespace {

using nlohmann::json;

void check_finite_field(const Mat& m, const char* what) {
    if (!m.is_finite()) throw NumericError(std::string(what) + ": non-finite entries");
}

json mat_to_json(const Mat& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Mat mat_from_json(const json& j, const char* what) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw ConfigError(std::string("checkpoint: ") + what + " must be an array of rows");
    const int rows = static_cast<int>(j.size());
    const int cols = static_cast<int>(j[0].size());
    Mat m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        if (static_cast<int>(j[i].size()) != cols)
            throw ConfigError(std::string("checkpoint: ") + what + " has ragged rows");
        for (int c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
    }
    return m;
}

json encoder_to_json(const EncoderParams& p) {
    json j;
    j["W1"] = mat_to_json(p.w1);
    j["b1"] = mat_to_json(p.b1);
    j["W2"] = mat_to_json(p.w2);
    j["b2"] = mat_to_json(p.b2);
    return j;
}

EncoderParams encoder_from_json(const json& j) {
    EncoderParams p;
    p.w1 = mat_from_json(j.at("W1"), "W1");
    p.b1 = mat_from_json(j.at("b1"), "b1");
    p.w2 = mat_from_json(j.at("W2"), "W2");
    p.b2 = mat_from_json(j.at("b2"), "b2");
    p.validate();
    return p;
}

} // namespace

void EncoderParams::validate() const {
    if (w1.rows() < 1 || w1.cols() < 1 || w2.rows() < 1)
        throw DimensionError("encoder: empty layer");
    if (b1.rows() != w1.rows() || b1.cols() != 1)
        throw DimensionError("encoder: hidden bias shape mismatch");
    if (w2.cols() != w1.rows())
        throw DimensionError("encoder: layer width mismatch");
    if (b2.rows() != w2.rows() || b2.cols() != 1)
        throw DimensionError("encoder: output bias shape mismatch");
    check_finite_field(w1, "encoder w1");
    check_finite_field(b1, "encoder b1");
    check_finite_field(w2, "encoder w2");
    check_finite_field(b2, "encoder b2");
}

EncoderParams EncoderParams::init(int input, int hidden, int output, Rng& rng) {
    auto uniform_layer = [&rng](int rows, int cols) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
        Mat w(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) w(i, j) = rng.uniform(-bound, bound);
        return w;
    };
    EncoderParams p;
    p.w1 = uniform_layer(hidden, input);
    p.b1 = Mat(hidden, 1);
    p.w2 = uniform_layer(output, hidden);
    p.b2 = Mat(output, 1);
    return p;
}

EncoderParams identity_encoder(int dim) {
    if (dim < 1 || dim > 4) throw ConfigError("identity encoder: dim must be in 1..4");
    const int hidden = 8;
    EncoderParams p;
    p.w1 = Mat(hidden, dim);
    p.b1 = Mat(hidden, 1);
    p.w2 = Mat(dim, hidden);
    p.b2 = Mat(dim, 1);
    for (int d = 0; d < dim; ++d) {
        p.w1(d, d) = 1.0;
        p.w1(dim + d, d) = -1.0;
        p.w2(d, d) = 1.0;
        p.w2(d, dim + d) = -1.0;
    }
    return p;
}

void KoopmanModel::validate() const {
    if (a.rows() != a.cols()) throw DimensionError("model: A must be square");
    if (b.rows() != a.rows() || b.cols() != 1)
        throw DimensionError("model: B must be a column matching A");
    theta.validate();
    if (theta.output_dim() != a.rows())
        throw DimensionError("model: encoder output must match latent dimension");
    check_finite_field(a, "model A");
    check_finite_field(b, "model B");
}

KoopmanModel KoopmanModel::init(int input_dim, int k, Rng& rng) {
    KoopmanModel m;
    m.a = 0.9 * Mat::identity(k);
    m.b = Mat(k, 1);
    for (int i = 0; i < k; ++i) m.b(i, 0) = rng.uniform(-0.1, 0.1);
    m.theta = EncoderParams::init(input_dim, 8, k, rng);
    return m;
}

Mat encode(const Mat& y, const EncoderParams& theta) {
    theta.validate();
    if (y.rows() != theta.input_dim())
        throw DimensionError("encode: measurement dimension mismatch");
    const int m = y.cols();
    Mat h = matmul(theta.w1, y);
    for (int i = 0; i < h.rows(); ++i)
        for (int j = 0; j < m; ++j) {
            const double v = h(i, j) + theta.b1(i, 0);
            h(i, j) = v > 0.0 ? v : 0.0;
        }
    Mat g = matmul(theta.w2, h);
    for (int i = 0; i < g.rows(); ++i)
        for (int j = 0; j < m; ++j) g(i, j) += theta.b2(i, 0);
    return g;
}

EncoderVars encoder_leaves(Tape& tape, const EncoderParams& theta) {
    EncoderVars v;
    v.w1 = tape.leaf(theta.w1);
    v.b1 = tape.leaf(theta.b1);
    v.w2 = tape.leaf(theta.w2);
    v.b2 = tape.leaf(theta.b2);
    return v;
}

Var encode(Tape& tape, const EncoderVars& theta, Var y) {
    const int cols = tape.value(y).cols();
    auto affine = [&](Var w, Var b, Var x) {
        Var wx = tape.matmul(w, x);
        if (cols == 1) return tape.add(wx, b);
        return tape.add(wx, tape.matmul(b, tape.constant(Mat::filled(1, cols, 1.0))));
    };
    Var h = tape.relu(affine(theta.w1, theta.b1, y));
    return affine(theta.w2, theta.b2, h);
}

ControlSample sample_control(Tape& tape, Var mean_node, double sigma2,
                             const Interval& bounds, Rng& rng) {
    if (!(sigma2 > 0.0)) throw ConfigError("sample_control: variance must be positive");
    const Mat& mv = tape.value(mean_node);
    if (mv.rows() != 1 || mv.cols() != 1)
        throw DimensionError("sample_control: mean node must be 1x1");
    ControlSample s;
    s.raw = mv(0, 0) + std::sqrt(sigma2) * rng.normal();
    s.applied = bounds.clip(s.raw);
    s.logp = tape.gaussian_logp(mean_node, s.raw, sigma2);
    return s;
}

KoopmanPolicy::KoopmanPolicy(KoopmanModel model, TargetSpectrum targets)
    : model_(std::move(model)), targets_(std::move(targets)) {
    model_.validate();
    targets_.validate();
    if (targets_.size() != model_.latent_dim())
        throw ConfigError("policy: target count must match latent dimension");
}

std::vector<Mat*> KoopmanPolicy::parameters() {
    return {&model_.a, &model_.b, &model_.theta.w1, &model_.theta.b1,
            &model_.theta.w2, &model_.theta.b2};
}

std::vector<Var> KoopmanPolicy::begin_batch(Tape& tape, GainMode mode) {
    Var a = tape.leaf(model_.a);
    Var b = tape.leaf(model_.b);
    theta_vars_ = encoder_leaves(tape, model_.theta);
    f_var_ = ackermann_gain(tape, a, b, targets_, mode);
    return {a, b, theta_vars_.w1, theta_vars_.b1, theta_vars_.w2, theta_vars_.b2};
}

Var KoopmanPolicy::mean(Tape& tape, const Mat& y) {
    if (!f_var_.valid()) throw UsageError("policy: begin_batch must precede mean");
    Var psi = encode(tape, theta_vars_, tape.constant(y));
    return tape.neg(tape.matmul(f_var_, psi));
}

Mat KoopmanPolicy::gain(GainMode mode) const {
    return ackermann(model_.a, model_.b, targets_, mode);
}

std::function<double(const Mat&)> KoopmanPolicy::make_controller(GainMode mode) const {
    const Mat f = gain(mode);
    const EncoderParams theta = model_.theta;
    return [f, theta](const Mat& y) { return -matmul(f, encode(y, theta))(0, 0); };
}

void MlpParams::validate() const {
    if (weights.empty() || weights.size() != biases.size())
        throw DimensionError("mlp: weight/bias count mismatch");
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (biases[l].rows() != weights[l].rows() || biases[l].cols() != 1)
            throw DimensionError("mlp: bias shape mismatch");
        if (l + 1 < weights.size() && weights[l + 1].cols() != weights[l].rows())
            throw DimensionError("mlp: layer width mismatch");
        check_finite_field(weights[l], "mlp weight");
        check_finite_field(biases[l], "mlp bias");
    }
}

MlpParams MlpParams::init(const std::vector<int>& layer_dims, Rng& rng) {
    if (layer_dims.size() < 2) throw ConfigError("mlp: need at least input and output dims");
    MlpParams p;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        const int rows = layer_dims[l + 1];
        const int cols = layer_dims[l];
        const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
        Mat w(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) w(i, j) = rng.uniform(-bound, bound);
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(rows, 1);
    }
    return p;
}

Mat MlpParams::forward(const Mat& y) const {
    Mat x = y;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        x = matmul(weights[l], x);
        const bool last = l + 1 == weights.size();
        for (int i = 0; i < x.rows(); ++i)
            for (int j = 0; j < x.cols(); ++j) {
                const double v = x(i, j) + biases[l](i, 0);
                x(i, j) = (last || v > 0.0) ? v : 0.0;
            }
    }
    return x;
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
    if (c.method != "ours" && c.method != "sl" && c.method != "sn" && c.method != "rl")
        throw ConfigError("checkpoint: unknown method '" + c.method + "'");
    json j;
    j["system"] = c.system;
    j["method"] = c.method;
    json targets = json::array();
    for (const Complex& v : c.targets.eigenvalues)
        targets.push_back({{"re", v.real()}, {"im", v.imag()}});
    j["target"] = std::move(targets);
    if (c.model) {
        c.model->validate();
        j["A"] = mat_to_json(c.model->a);
        j["B"] = mat_to_json(c.model->b);
        j["theta"] = encoder_to_json(c.model->theta);
    }
    if (c.decoder) j["decoder"] = encoder_to_json(*c.decoder);
    if (c.mlp) {
        c.mlp->validate();
        json m;
        for (std::size_t l = 0; l < c.mlp->weights.size(); ++l) {
            const std::string idx = std::to_string(l + 1);
            m["W" + idx] = mat_to_json(c.mlp->weights[l]);
            m["b" + idx] = mat_to_json(c.mlp->biases[l]);
        }
        j["mlp"] = std::move(m);
    }
    j["config-hash"] = c.config_hash;
    std::ofstream out(path);
    if (!out) throw IoError("cannot open checkpoint for writing", path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing checkpoint", path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint", path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("checkpoint: invalid JSON in " + path + ": " + e.what());
    }
    Checkpoint c;
    try {
        c.system = j.at("system").get<std::string>();
        c.method = j.value("method", std::string("ours"));
        for (const json& t : j.at("target"))
            c.targets.eigenvalues.emplace_back(t.at("re").get<double>(),
                                               t.at("im").get<double>());
        c.targets.validate();
        if (j.contains("A")) {
            KoopmanModel m;
            m.a = mat_from_json(j.at("A"), "A");
            m.b = mat_from_json(j.at("B"), "B");
            m.theta = encoder_from_json(j.at("theta"));
            m.validate();
            c.model = std::move(m);
        }
        if (j.contains("decoder")) c.decoder = encoder_from_json(j.at("decoder"));
        if (j.contains("mlp")) {
            MlpParams p;
            const json& m = j.at("mlp");
            for (std::size_t l = 1; m.contains("W" + std::to_string(l)); ++l) {
                const std::string idx = std::to_string(l);
                p.weights.push_back(mat_from_json(m.at("W" + idx), "mlp W"));
                p.biases.push_back(mat_from_json(m.at("b" + idx), "mlp b"));
            }
            p.validate();
            c.mlp = std::move(p);
        }
        c.config_hash = j.value("config-hash", std::string());
    } catch (const json::exception& e) {
        throw ConfigError("checkpoint: missing or malformed field in " + path + ": " + e.what());
    }
    if (!c.model && !c.mlp)
        throw ConfigError("checkpoint: neither latent model nor mlp present in " + path);
    return c;
}

} // namespace koopctl
