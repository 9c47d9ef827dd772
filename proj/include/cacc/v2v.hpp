#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace cacc {

struct ChannelConfig {
    int h = 0;              // delay [steps]
    double n_d_max = 0.0;   // gap noise bound [m]
    double n_vf_max = 0.0;  // front-speed noise bound [m/s]
    std::uint64_t seed = 1;
    bool connected = true;  // false: radar only, no forecast or bounds
    int trust_horizon = 0;  // N_T [steps]

    void validate() const;
};

// Front vehicle motion indexed by step. Steps before 0 are a constant-speed
// pre-roll so that delayed messages exist from the first controller step.
class FrontTrack {
public:
    // accel_plan[k] is applied over step k; speeds clamp at zero.
    FrontTrack(double s0, double v0, std::vector<double> accel_plan, double t_s, long preroll_steps);

    long first_step() const { return first_; }
    long last_step() const { return first_ + static_cast<long>(s_.size()) - 1; }
    bool covers(long k) const { return k >= first_ && k <= last_step(); }
    double t_s() const { return t_s_; }

    double position(long k) const;
    double speed(long k) const;
    // Planned acceleration over step k; defined for first_step() <= k < last_step().
    double accel(long k) const;

private:
    long first_ = 0;
    double t_s_ = 0.2;
    std::vector<double> s_, v_, a_;
};

struct V2VMessage {
    long stamp = 0;    // step whose state the message carries (t - h)
    double s_f = 0.0;  // front position at stamp [m]
    double v_f = 0.0;  // front speed at stamp [m/s]
    std::optional<std::pair<double, double>> a_bounds;  // absent when radar only
    std::vector<double> forecast;  // accelerations for stamp .. stamp + N_T; empty when radar only
    int N_T = 0;
};

// Message received at step t. Carries the front's true plan over the trust window.
// Throws InsufficientHistory when the track does not reach back to t - h or
// forward to the end of the trust window.
V2VMessage emit(const FrontTrack& front, long t, const ChannelConfig& cfg, std::pair<double, double> a_bounds);

struct Observation {
    long stamp = 0;
    double d = 0.0;    // measured gap at stamp
    double v_f = 0.0;  // measured front speed at stamp
};

// Noisy delayed gap and front speed. ego_position is the true ego position at msg.stamp.
Observation receive(const V2VMessage& msg, double ego_position, const ChannelConfig& cfg);

// Uniform draw on [-bound, bound] keyed by (seed, step, channel); a pure function.
double channel_noise(std::uint64_t seed, long step, std::uint32_t channel, double bound);

}  // namespace cacc
