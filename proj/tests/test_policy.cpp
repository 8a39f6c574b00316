#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "koopctl/errors.hpp"
#include "koopctl/linalg.hpp"
#include "koopctl/policy.hpp"
#include "koopctl/pole.hpp"
#include "koopctl/rng.hpp"
#include "koopctl/tape.hpp"

using namespace koopctl;

namespace {

TargetSpectrum pair_targets(double modulus, double angle) {
    return TargetSpectrum{{Complex(modulus * std::cos(angle), modulus * std::sin(angle)),
                           Complex(modulus * std::cos(angle), -modulus * std::sin(angle))}};
}

std::string temp_path(const char* name) {
    return std::string("/tmp/koopctl_policy_") + name;
}

} // namespace

TEST_CASE("encoder initialization ranges") {
    Rng rng(1);
    EncoderParams theta = EncoderParams::init(2, 8, 2, rng);
    CHECK(theta.input_dim() == 2);
    CHECK(theta.hidden_dim() == 8);
    CHECK(theta.output_dim() == 2);
    CHECK_NOTHROW(theta.validate());
    const double bound1 = 1.0 / std::sqrt(2.0);
    const double bound2 = 1.0 / std::sqrt(8.0);
    for (int i = 0; i < 8; ++i) {
        CHECK(theta.b1(i, 0) == 0.0);
        for (int j = 0; j < 2; ++j) CHECK(std::abs(theta.w1(i, j)) <= bound1);
    }
    for (int i = 0; i < 2; ++i) {
        CHECK(theta.b2(i, 0) == 0.0);
        for (int j = 0; j < 8; ++j) CHECK(std::abs(theta.w2(i, j)) <= bound2);
    }
}

TEST_CASE("identity encoder is exact") {
    for (int dim : {1, 2, 3, 4}) {
        EncoderParams id = identity_encoder(dim);
        Rng rng(10 + dim);
        for (int rep = 0; rep < 20; ++rep) {
            Mat y(dim, 1);
            for (int d = 0; d < dim; ++d) y(d, 0) = rng.uniform(-8.0, 8.0);
            Mat psi = encode(y, id);
            REQUIRE(psi.rows() == dim);
            for (int d = 0; d < dim; ++d) CHECK(psi(d, 0) == doctest::Approx(y(d, 0)).epsilon(1e-14));
        }
    }
    CHECK_THROWS_AS((void)identity_encoder(5), ConfigError);
}

TEST_CASE("plain encode: zero weights give zero, hand-checked ReLU") {
    EncoderParams zero;
    zero.w1 = Mat(3, 2);
    zero.b1 = Mat(3, 1);
    zero.w2 = Mat(1, 3);
    zero.b2 = Mat(1, 1);
    Mat out = encode(Mat::col({1.0, -2.0}), zero);
    CHECK(out(0, 0) == 0.0);

    // One hidden unit: relu(w x + b) then linear readout.
    EncoderParams tiny;
    tiny.w1 = Mat{{2.0}};
    tiny.b1 = Mat{{-1.0}};
    tiny.w2 = Mat{{3.0}};
    tiny.b2 = Mat{{0.5}};
    CHECK(encode(Mat::scalar(1.0), tiny)(0, 0) == doctest::Approx(3.0 * 1.0 + 0.5).epsilon(1e-14));
    CHECK(encode(Mat::scalar(0.0), tiny)(0, 0) == doctest::Approx(0.5).epsilon(1e-14)); // relu(-1) = 0
}

TEST_CASE("taped encode equals plain encode, including multi-column batches") {
    Rng rng(3);
    EncoderParams theta = EncoderParams::init(2, 8, 2, rng);
    theta.b1(0, 0) = 0.3; // exercise bias broadcast
    theta.b2(1, 0) = -0.2;

    Mat batch(2, 5);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 5; ++j) batch(i, j) = rng.uniform(-2.0, 2.0);

    Tape tape;
    EncoderVars vars = encoder_leaves(tape, theta);
    Var out = encode(tape, vars, tape.constant(batch));
    const Mat& taped = tape.value(out);
    Mat plain = encode(batch, theta);
    REQUIRE(taped.rows() == plain.rows());
    REQUIRE(taped.cols() == plain.cols());
    for (int i = 0; i < plain.rows(); ++i)
        for (int j = 0; j < plain.cols(); ++j)
            CHECK(taped(i, j) == doctest::Approx(plain(i, j)).epsilon(1e-13));
}

TEST_CASE("taped encode gradients match finite differences") {
    Rng rng(5);
    EncoderParams theta = EncoderParams::init(2, 4, 2, rng);
    // Push hidden pre-activations away from the ReLU kink.
    for (int i = 0; i < 4; ++i) theta.b1(i, 0) = 0.35;
    Mat y = Mat::col({0.8, -0.6});

    Tape tape;
    EncoderVars vars = encoder_leaves(tape, theta);
    Var out = tape.sq_norm(encode(tape, vars, tape.constant(y)));
    tape.backward(out);

    auto eval = [&](const EncoderParams& p) { return sq_norm(encode(y, p)); };
    const double h = 1e-5;
    struct Slot {
        Mat EncoderParams::*field;
        Var var;
    };
    std::vector<Slot> slots = {{&EncoderParams::w1, vars.w1},
                               {&EncoderParams::b1, vars.b1},
                               {&EncoderParams::w2, vars.w2},
                               {&EncoderParams::b2, vars.b2}};
    for (const Slot& s : slots) {
        const Mat& g = tape.grad(s.var);
        REQUIRE_FALSE(g.empty());
        const Mat& base = theta.*(s.field);
        for (int i = 0; i < base.rows(); ++i)
            for (int j = 0; j < base.cols(); ++j) {
                EncoderParams plus = theta, minus = theta;
                (plus.*(s.field))(i, j) += h;
                (minus.*(s.field))(i, j) -= h;
                double fd = (eval(plus) - eval(minus)) / (2.0 * h);
                CHECK(std::abs(g(i, j) - fd) / std::max(1.0, std::abs(fd)) <= 1e-6);
            }
    }
}

TEST_CASE("control sampling: clipping, density and concentration") {
    Interval bounds{-5.0, 5.0};
    Rng rng(8);

    SUBCASE("log-density identity on the raw sample") {
        Tape tape;
        Var mean = tape.leaf(Mat::scalar(0.4));
        const double sigma2 = 2.0;
        ControlSample s = sample_control(tape, mean, sigma2, bounds, rng);
        const double expect = -0.5 * std::log(2.0 * M_PI * sigma2) -
                              (s.raw - 0.4) * (s.raw - 0.4) / (2.0 * sigma2);
        CHECK(tape.value(s.logp)(0, 0) == doctest::Approx(expect).epsilon(1e-12));
        CHECK(s.applied == bounds.clip(s.raw));
    }

    SUBCASE("tight variance concentrates on the mean") {
        Tape tape;
        Var mean = tape.leaf(Mat::scalar(1.5));
        for (int i = 0; i < 100; ++i) {
            ControlSample s = sample_control(tape, mean, 1e-12, bounds, rng);
            CHECK(std::abs(s.raw - 1.5) <= 1e-4);
        }
    }

    SUBCASE("clipping saturates out-of-bound raw draws") {
        Tape tape;
        Var mean = tape.leaf(Mat::scalar(20.0));
        bool saw_clip = false;
        for (int i = 0; i < 50; ++i) {
            ControlSample s = sample_control(tape, mean, 0.01, bounds, rng);
            CHECK(s.applied <= 5.0);
            CHECK(s.applied >= -5.0);
            if (s.raw > 5.0) saw_clip = true;
        }
        CHECK(saw_clip);
    }

    SUBCASE("empirical moments of the raw draw") {
        Tape tape;
        Var mean = tape.leaf(Mat::scalar(-0.7));
        const double sigma2 = 2.5;
        const int n = 100000;
        double sum = 0.0, sum2 = 0.0;
        for (int i = 0; i < n; ++i) {
            ControlSample s = sample_control(tape, mean, sigma2, bounds, rng);
            sum += s.raw;
            sum2 += s.raw * s.raw;
        }
        double m = sum / n;
        double var = sum2 / n - m * m;
        CHECK(std::abs(m - -0.7) <= 3.0 * std::sqrt(sigma2 / n));
        CHECK(std::abs(var - sigma2) / sigma2 <= 0.02);
    }

    SUBCASE("gradient flows into the mean node") {
        Tape tape;
        Var mean = tape.leaf(Mat::scalar(0.0));
        ControlSample s = sample_control(tape, mean, 1.0, bounds, rng);
        tape.backward(s.logp);
        CHECK(tape.grad(mean)(0, 0) == doctest::Approx(s.raw).epsilon(1e-12));
    }
}

TEST_CASE("koopman model initialization") {
    Rng rng(21);
    KoopmanModel m = KoopmanModel::init(3, 2, rng);
    CHECK(m.latent_dim() == 2);
    CHECK_NOTHROW(m.validate());
    CHECK(m.a(0, 0) == 0.9);
    CHECK(m.a(1, 1) == 0.9);
    CHECK(m.a(0, 1) == 0.0);
    for (int i = 0; i < 2; ++i) CHECK(std::abs(m.b(i, 0)) <= 0.1);
    CHECK(m.theta.input_dim() == 3);
    CHECK(m.theta.output_dim() == 2);
}

TEST_CASE("koopman policy: gain consistency, action mean, controller snapshot") {
    // Exactly representable latent plant: encoder = identity, known (A, B).
    KoopmanModel model;
    model.a = Mat{{0.9, 0.2}, {-0.1, 0.7}};
    model.b = Mat::col({0.0, 1.0});
    model.theta = identity_encoder(2);
    TargetSpectrum targets = pair_targets(0.9, 0.2);

    KoopmanPolicy policy(model, targets);
    Mat f = policy.gain(GainMode::Evaluate);
    std::vector<Complex> closed = eig_values(model.a - matmul(model.b, f));
    CHECK(placement_error(targets.eigenvalues, closed) <= 1e-6);

    Mat y = Mat::col({1.2, -0.4});
    Mat expect_mean = -matmul(f, encode(y, model.theta));

    Tape tape;
    std::vector<Var> leaves = policy.begin_batch(tape, GainMode::Evaluate);
    CHECK(leaves.size() == policy.parameters().size());
    Var mean = policy.mean(tape, y);
    CHECK(tape.value(mean)(0, 0) == doctest::Approx(expect_mean(0, 0)).epsilon(1e-12));

    auto controller = policy.make_controller(GainMode::Evaluate);
    CHECK(controller(y) == doctest::Approx(expect_mean(0, 0)).epsilon(1e-12));

    // Closed loop under the snapshot controller realizes the target spectrum.
    Mat closed_plain = model.a - matmul(model.b, f);
    std::vector<Complex> spec = eig_values(closed_plain);
    CHECK(placement_error(targets.eigenvalues, spec) <= 1e-6);
}

TEST_CASE("koopman policy guards") {
    Rng rng(2);
    KoopmanModel model = KoopmanModel::init(2, 2, rng);
    TargetSpectrum three{{Complex(0.5, 0.0), Complex(0.4, 0.0), Complex(0.3, 0.0)}};
    CHECK_THROWS_AS((void)KoopmanPolicy(model, three), ConfigError);

    KoopmanPolicy policy(model, pair_targets(0.9, 0.2));
    Tape tape;
    CHECK_THROWS_AS((void)policy.mean(tape, Mat::col({1.0, 1.0})), UsageError);
}

TEST_CASE("mlp parameters: forward pass and zero head") {
    Rng rng(31);
    MlpParams mlp = MlpParams::init({2, 8, 2, 1}, rng);
    CHECK(mlp.input_dim() == 2);
    CHECK(mlp.output_dim() == 1);
    CHECK_NOTHROW(mlp.validate());

    // Hand-checked two-layer forward.
    MlpParams tiny;
    tiny.weights = {Mat{{1.0, -1.0}}, Mat{{2.0}}};
    tiny.biases = {Mat{{0.5}}, Mat{{-0.25}}};
    // relu(1*0.6 - 1*(-0.4) + 0.5) = 1.5; out = 2*1.5 - 0.25.
    Mat out = tiny.forward(Mat::col({0.6, -0.4}));
    CHECK(out(0, 0) == doctest::Approx(2.75).epsilon(1e-14));
}

TEST_CASE("checkpoint round trip preserves behavior bit for bit") {
    Rng rng(17);
    Checkpoint c;
    c.system = "vdp";
    c.method = "ours";
    c.targets = pair_targets(0.92, 0.2);
    KoopmanModel model = KoopmanModel::init(2, 2, rng);
    // The cold-start A = 0.9 I is uncontrollable (AB stays parallel to B);
    // give the latent pair a controllable shape so Evaluate-mode gains work.
    model.a = Mat{{0.9 * std::cos(0.3), -0.9 * std::sin(0.3)},
                  {0.9 * std::sin(0.3), 0.9 * std::cos(0.3)}};
    model.b = Mat::col({0.0, 1.0});
    model.theta.b1(0, 0) = 0.123456789012345678; // exercise full precision
    c.model = model;
    c.config_hash = "0123456789abcdef";

    const std::string path = temp_path("roundtrip.json");
    save_checkpoint(path, c);
    Checkpoint loaded = load_checkpoint(path);

    CHECK(loaded.system == c.system);
    CHECK(loaded.method == c.method);
    CHECK(loaded.config_hash == c.config_hash);
    REQUIRE(loaded.targets.size() == 2);
    CHECK(loaded.targets.eigenvalues[0] == c.targets.eigenvalues[0]);
    CHECK(loaded.targets.eigenvalues[1] == c.targets.eigenvalues[1]);
    REQUIRE(loaded.model.has_value());
    CHECK_FALSE(loaded.decoder.has_value());
    CHECK_FALSE(loaded.mlp.has_value());

    KoopmanPolicy before(model, c.targets);
    KoopmanPolicy after(*loaded.model, loaded.targets);
    auto cb = before.make_controller(GainMode::Evaluate);
    auto ca = after.make_controller(GainMode::Evaluate);
    Mat y = Mat::col({0.37, -1.91});
    CHECK(cb(y) == ca(y)); // exact double equality

    // Optional sections survive when present.
    Checkpoint with_extras = c;
    with_extras.method = "sn";
    with_extras.decoder = EncoderParams::init(2, 8, 2, rng);
    save_checkpoint(path, with_extras);
    Checkpoint loaded2 = load_checkpoint(path);
    REQUIRE(loaded2.decoder.has_value());
    CHECK(loaded2.decoder->w1(0, 0) == with_extras.decoder->w1(0, 0));

    Checkpoint rl;
    rl.system = "vdp";
    rl.method = "rl";
    rl.targets = pair_targets(1.0, 0.1);
    rl.mlp = MlpParams::init({2, 8, 2, 1}, rng);
    save_checkpoint(path, rl);
    Checkpoint loaded3 = load_checkpoint(path);
    REQUIRE(loaded3.mlp.has_value());
    CHECK_FALSE(loaded3.model.has_value());
    Mat yy = Mat::col({0.5, 0.5});
    CHECK(loaded3.mlp->forward(yy)(0, 0) == rl.mlp->forward(yy)(0, 0));
}

TEST_CASE("checkpoint error paths") {
    CHECK_THROWS_AS((void)load_checkpoint("/nonexistent/dir/ckpt.json"), IoError);

    const std::string path = temp_path("malformed.json");
    {
        FILE* f = std::fopen(path.c_str(), "w");
        REQUIRE(f != nullptr);
        std::fputs("{ not json", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS((void)load_checkpoint(path), ConfigError);

    {
        FILE* f = std::fopen(path.c_str(), "w");
        REQUIRE(f != nullptr);
        // Valid JSON but neither a latent model nor an mlp present.
        std::fputs("{\"system\":\"vdp\",\"method\":\"ours\",\"target\":[{\"re\":1.0,\"im\":0.0},"
                   "{\"re\":1.0,\"im\":0.0}],\"config-hash\":\"x\"}",
                   f);
        std::fclose(f);
    }
    CHECK_THROWS_AS((void)load_checkpoint(path), ConfigError);
}
