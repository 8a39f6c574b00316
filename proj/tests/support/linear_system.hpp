#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

#include "koopctl/dynamics.hpp"
#include "koopctl/errors.hpp"
#include "koopctl/mat.hpp"
#include "koopctl/rng.hpp"

namespace koopctl::testing {

// Discrete-time linear plant x' = A x + B u with additive measurement noise.
// The realizable-model case: every latent-linear method can represent it
// exactly, so identification and placement errors isolate algorithmic bugs
// from model mismatch.
class LinearSystem final : public Environment {
public:
    LinearSystem(Mat a, Mat b, double noise_std = 0.0,
                 Interval control_bounds = {-5.0, 5.0}, double init_half_width = 2.0)
        : a_(std::move(a)),
          b_(std::move(b)),
          noise_std_(noise_std),
          bounds_(control_bounds),
          init_half_width_(init_half_width),
          state_(a_.rows(), 1),
          rng_(0) {
        if (a_.rows() != a_.cols() || b_.rows() != a_.rows() || b_.cols() != 1)
            throw DimensionError("linear system: A must be DxD and B Dx1");
    }

    int measurement_dim() const override { return a_.rows(); }
    Interval control_bounds() const override { return bounds_; }

    Mat reset(std::uint64_t seed) override {
        rng_ = Rng(seed);
        for (int i = 0; i < state_.rows(); ++i)
            state_(i, 0) = rng_.uniform(-init_half_width_, init_half_width_);
        return measure();
    }

    Mat step(double u) override {
        if (!std::isfinite(u)) throw InputError("linear system: non-finite control");
        const double uc = bounds_.clip(u);
        state_ = matmul(a_, state_) + uc * b_;
        return measure();
    }

    const Mat& state() const { return state_; }

private:
    Mat measure() {
        Mat y = state_;
        if (noise_std_ > 0.0)
            for (int i = 0; i < y.rows(); ++i) y(i, 0) += rng_.normal(0.0, noise_std_);
        return y;
    }

    Mat a_;
    Mat b_;
    double noise_std_;
    Interval bounds_;
    double init_half_width_;
    Mat state_;
    Rng rng_;
};

// Planar rotation scaled by `modulus`; spectrum {modulus e^{+-i angle}}.
inline Mat planar_rotation(double modulus, double angle) {
    return Mat{{modulus * std::cos(angle), -modulus * std::sin(angle)},
               {modulus * std::sin(angle), modulus * std::cos(angle)}};
}

// Autonomous trajectory y_{t+1} = M y_t from x0; controls are all zero.
inline Trajectory autonomous_trajectory(const Mat& m, const Mat& x0, int horizon) {
    Trajectory traj;
    Mat x = x0;
    traj.measurements.push_back(x);
    for (int t = 1; t < horizon; ++t) {
        x = matmul(m, x);
        traj.measurements.push_back(x);
        traj.controls.push_back(0.0);
    }
    return traj;
}

} // namespace koopctl::testing
