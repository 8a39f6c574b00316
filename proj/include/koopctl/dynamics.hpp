#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "koopctl/mat.hpp"
#include "koopctl/rng.hpp"

namespace koopctl {

enum class SystemKind { VanDerPol, FitzhughNagumo, Duffing, Rossler };

SystemKind system_kind_from_name(const std::string& name);
std::string system_name(SystemKind kind);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double width() const { return hi - lo; }
    double clip(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
};

// Simulation setup for one of the four controlled ODE systems. Presets carry
// the published coefficients, bounds and noise level; fields can be
// overridden before constructing a simulator.
struct SystemSpec {
    SystemKind kind = SystemKind::VanDerPol;
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double i_ext = 0.0; // Fitzhugh-Nagumo input current
    int state_dim = 2;
    Interval control_bounds{-5.0, 5.0};
    std::vector<Interval> state_bounds;
    std::vector<Interval> init_box; // uniform initial-state box
    double noise_std = 1e-2;
    double dt = 0.1;
    int substeps = 4;
    bool rossler_standard = false; // false = coupling exactly as published

    static SystemSpec preset(SystemKind kind);
    void validate() const; // throws ConfigError

    // Time derivative of the state under constant control u.
    void vector_field(const double* x, double u, double* dx) const;
};

// Time-indexed measurements y_1..y_T (each D x 1) and the clipped controls
// u_1..u_{T-1} that produced them.
struct Trajectory {
    std::vector<Mat> measurements;
    std::vector<double> controls;

    int length() const { return static_cast<int>(measurements.size()); }
    int dim() const { return measurements.empty() ? 0 : measurements.front().rows(); }
    void validate() const;
};

// Rollout surface of a black-box plant: measurements out, controls in.
class Environment {
public:
    virtual ~Environment() = default;
    virtual int measurement_dim() const = 0;
    virtual Interval control_bounds() const = 0;
    // Draws a fresh initial state; returns the first measurement y_1.
    virtual Mat reset(std::uint64_t seed) = 0;
    // Applies one control (clipped to bounds) and returns the next
    // measurement. Throws InputError on non-finite input.
    virtual Mat step(double u) = 0;
};

// RK4 integration of a SystemSpec with additive measurement noise and state
// saturation at the published bounds. The internal state stays hidden.
class OdeSystem final : public Environment {
public:
    OdeSystem(SystemSpec spec, std::uint64_t seed);

    int measurement_dim() const override { return spec_.state_dim; }
    Interval control_bounds() const override { return spec_.control_bounds; }
    Mat reset(std::uint64_t seed) override;
    Mat step(double u) override;

    const SystemSpec& spec() const { return spec_; }

private:
    Mat measure();

    SystemSpec spec_;
    std::vector<double> state_;
    Rng rng_;
};

// Rollout with i.i.d. uniform random controls; T measurements, T-1 controls.
Trajectory rollout_random(Environment& env, int horizon, std::uint64_t seed);
Trajectory rollout_random(const SystemSpec& spec, int horizon, std::uint64_t seed);

// Rollout under a deterministic feedback controller (exploration off). The
// recorded controls are the clipped values the environment received.
Trajectory rollout_policy(Environment& env, const std::function<double(const Mat&)>& controller,
                          int horizon, std::uint64_t seed);

} // namespace koopctl
