#include "koopctl/dynamics.hpp"

#include <cmath>

#include "koopctl/errors.hpp"

namespace koopctl {

SystemKind system_kind_from_name(const std::string& name) {
    if (name == "vdp" || name == "van_der_pol") return SystemKind::VanDerPol;
    if (name == "fn" || name == "fitzhugh_nagumo") return SystemKind::FitzhughNagumo;
    if (name == "duffing") return SystemKind::Duffing;
    if (name == "rossler") return SystemKind::Rossler;
    throw ConfigError("unknown system '" + name + "' (expected vdp, fn, duffing or rossler)");
}

std::string system_name(SystemKind kind) {
    switch (kind) {
    case SystemKind::VanDerPol: return "vdp";
    case SystemKind::FitzhughNagumo: return "fn";
    case SystemKind::Duffing: return "duffing";
    case SystemKind::Rossler: return "rossler";
    }
    return "?";
}

SystemSpec SystemSpec::preset(SystemKind kind) {
    SystemSpec s;
    s.kind = kind;
    switch (kind) {
    case SystemKind::VanDerPol:
        s.a = 1.0;
        s.b = 1.0;
        s.state_dim = 2;
        s.control_bounds = {-5.0, 5.0};
        s.state_bounds.assign(2, {-10.0, 10.0});
        break;
    case SystemKind::FitzhughNagumo:
        s.a = 0.7;
        s.b = 0.8;
        s.c = 0.08;
        s.i_ext = 0.8;
        s.state_dim = 2;
        s.control_bounds = {-5.0, 5.0};
        s.state_bounds.assign(2, {-10.0, 10.0});
        break;
    case SystemKind::Duffing:
        s.a = 1.0;
        s.b = -1.0;
        s.c = 0.5;
        s.state_dim = 2;
        s.control_bounds = {-10.0, 10.0};
        s.state_bounds.assign(2, {-5.0, 5.0});
        break;
    case SystemKind::Rossler:
        s.a = 0.2;
        s.b = 0.2;
        s.c = 5.7;
        s.state_dim = 3;
        s.control_bounds = {-10.0, 10.0};
        s.state_bounds.assign(3, {-20.0, 20.0});
        break;
    }
    s.init_box.assign(s.state_dim, {-2.0, 2.0});
    return s;
}

void SystemSpec::validate() const {
    if (state_dim < 1) throw ConfigError("system: state_dim must be >= 1");
    if (!(dt > 0.0)) throw ConfigError("system: dt must be positive");
    if (substeps < 1) throw ConfigError("system: substeps must be >= 1");
    if (noise_std < 0.0) throw ConfigError("system: noise_std must be >= 0");
    if (!(control_bounds.width() > 0.0)) throw ConfigError("system: control bounds empty");
    if (std::abs(control_bounds.lo + control_bounds.hi) > 1e-12)
        throw ConfigError("system: control bounds must be symmetric");
    if (static_cast<int>(state_bounds.size()) != state_dim)
        throw ConfigError("system: state_bounds size mismatch");
    if (static_cast<int>(init_box.size()) != state_dim)
        throw ConfigError("system: init_box size mismatch");
    for (const Interval& iv : state_bounds)
        if (!(iv.hi >= iv.lo)) throw ConfigError("system: empty state bound");
    for (const Interval& iv : init_box)
        if (!(iv.hi >= iv.lo)) throw ConfigError("system: empty init box");
}

void SystemSpec::vector_field(const double* x, double u, double* dx) const {
    switch (kind) {
    case SystemKind::VanDerPol:
        dx[0] = x[1];
        dx[1] = a * x[1] * (1.0 - x[0] * x[0]) - b * x[0] + u;
        break;
    case SystemKind::FitzhughNagumo:
        dx[0] = x[0] - x[0] * x[0] * x[0] / 3.0 - x[1] + i_ext;
        dx[1] = c * (x[0] - a - b * x[1]) + u;
        break;
    case SystemKind::Duffing:
        dx[0] = x[1];
        dx[1] = b * x[0] - a * x[0] * x[0] * x[0] - c * x[1] + u;
        break;
    case SystemKind::Rossler:
        if (rossler_standard) {
            dx[0] = -x[1] - x[2];
            dx[1] = x[0] + a * x[1] + u;
            dx[2] = b + x[2] * (x[0] - c);
        } else {
            // coupling exactly as published
            dx[0] = -x[1] - x[0];
            dx[1] = x[0] - a * x[1] + u;
            dx[2] = b + x[0] * x[2] - c * x[2];
        }
        break;
    }
}

void Trajectory::validate() const {
    if (measurements.size() < 2) throw DimensionError("trajectory: needs at least two measurements");
    if (controls.size() + 1 != measurements.size())
        throw DimensionError("trajectory: control count must be length-1");
}

OdeSystem::OdeSystem(SystemSpec spec, std::uint64_t seed) : spec_(std::move(spec)), rng_(seed) {
    spec_.validate();
    state_.assign(spec_.state_dim, 0.0);
}

Mat OdeSystem::measure() {
    Mat y(spec_.state_dim, 1);
    for (int d = 0; d < spec_.state_dim; ++d)
        y(d, 0) = state_[d] + (spec_.noise_std > 0.0 ? rng_.normal(0.0, spec_.noise_std) : 0.0);
    return y;
}

Mat OdeSystem::reset(std::uint64_t seed) {
    rng_ = Rng(seed);
    for (int d = 0; d < spec_.state_dim; ++d)
        state_[d] = rng_.uniform(spec_.init_box[d].lo, spec_.init_box[d].hi);
    return measure();
}

Mat OdeSystem::step(double u) {
    if (!std::isfinite(u)) throw InputError("step: non-finite control input");
    const double uc = spec_.control_bounds.clip(u);
    const int n = spec_.state_dim;
    const double h = spec_.dt / spec_.substeps;
    std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
    for (int s = 0; s < spec_.substeps; ++s) {
        spec_.vector_field(state_.data(), uc, k1.data());
        for (int d = 0; d < n; ++d) tmp[d] = state_[d] + 0.5 * h * k1[d];
        spec_.vector_field(tmp.data(), uc, k2.data());
        for (int d = 0; d < n; ++d) tmp[d] = state_[d] + 0.5 * h * k2[d];
        spec_.vector_field(tmp.data(), uc, k3.data());
        for (int d = 0; d < n; ++d) tmp[d] = state_[d] + h * k3[d];
        spec_.vector_field(tmp.data(), uc, k4.data());
        for (int d = 0; d < n; ++d)
            state_[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
    }
    for (int d = 0; d < n; ++d) state_[d] = spec_.state_bounds[d].clip(state_[d]);
    return measure();
}

Trajectory rollout_random(Environment& env, int horizon, std::uint64_t seed) {
    if (horizon < 2) throw ConfigError("rollout: horizon must be >= 2");
    Trajectory traj;
    traj.measurements.reserve(horizon);
    traj.controls.reserve(horizon - 1);
    traj.measurements.push_back(env.reset(Rng::derive(seed, 0)));
    Rng control_rng(Rng::derive(seed, 1));
    const Interval bounds = env.control_bounds();
    for (int t = 1; t < horizon; ++t) {
        const double u = control_rng.uniform(bounds.lo, bounds.hi);
        traj.measurements.push_back(env.step(u));
        traj.controls.push_back(bounds.clip(u));
    }
    return traj;
}

Trajectory rollout_random(const SystemSpec& spec, int horizon, std::uint64_t seed) {
    OdeSystem env(spec, seed);
    return rollout_random(env, horizon, seed);
}

Trajectory rollout_policy(Environment& env, const std::function<double(const Mat&)>& controller,
                          int horizon, std::uint64_t seed) {
    if (horizon < 2) throw ConfigError("rollout: horizon must be >= 2");
    Trajectory traj;
    traj.measurements.reserve(horizon);
    traj.controls.reserve(horizon - 1);
    Mat y = env.reset(seed);
    traj.measurements.push_back(y);
    const Interval bounds = env.control_bounds();
    for (int t = 1; t < horizon; ++t) {
        const double u = bounds.clip(controller(y));
        y = env.step(u);
        traj.measurements.push_back(y);
        traj.controls.push_back(u);
    }
    return traj;
}

} // namespace koopctl
