#include <cacc/errors.hpp>
#include <cacc/v2v.hpp>

#include <algorithm>
#include <string>

namespace cacc {

void ChannelConfig::validate() const {
    if (h < 0) throw ConfigError("channel delay must be nonnegative");
    if (!(n_d_max >= 0.0) || !(n_vf_max >= 0.0)) throw ConfigError("noise bounds must be nonnegative");
    if (trust_horizon < 0) throw ConfigError("trust horizon must be nonnegative");
}

FrontTrack::FrontTrack(double s0, double v0, std::vector<double> accel_plan, double t_s, long preroll_steps)
    : first_(-preroll_steps), t_s_(t_s) {
    if (!(t_s > 0.0)) throw ConfigError("t_s must be positive");
    if (preroll_steps < 0) throw ConfigError("pre-roll must be nonnegative");
    v0 = std::max(v0, 0.0);
    for (long k = -preroll_steps; k < 0; ++k) {
        s_.push_back(s0 + static_cast<double>(k) * t_s * v0);
        v_.push_back(v0);
        a_.push_back(0.0);
    }
    double s = s0, v = v0;
    s_.push_back(s);
    v_.push_back(v);
    for (double a : accel_plan) {
        s += t_s * v;
        v = std::max(v + t_s * a, 0.0);
        a_.push_back(a);
        s_.push_back(s);
        v_.push_back(v);
    }
}

double FrontTrack::position(long k) const {
    if (!covers(k)) throw InsufficientHistory("front track does not cover step " + std::to_string(k));
    return s_[static_cast<std::size_t>(k - first_)];
}

double FrontTrack::speed(long k) const {
    if (!covers(k)) throw InsufficientHistory("front track does not cover step " + std::to_string(k));
    return v_[static_cast<std::size_t>(k - first_)];
}

double FrontTrack::accel(long k) const {
    if (k < first_ || k >= last_step()) throw InsufficientHistory("no planned acceleration for step " + std::to_string(k));
    return a_[static_cast<std::size_t>(k - first_)];
}

V2VMessage emit(const FrontTrack& front, long t, const ChannelConfig& cfg, std::pair<double, double> a_bounds) {
    V2VMessage m;
    m.stamp = t - cfg.h;
    m.s_f = front.position(m.stamp);
    m.v_f = front.speed(m.stamp);
    if (!cfg.connected) return m;
    m.N_T = cfg.trust_horizon;
    m.a_bounds = a_bounds;
    m.forecast.reserve(static_cast<std::size_t>(m.N_T) + 1);
    for (long k = m.stamp; k <= m.stamp + m.N_T; ++k)
        m.forecast.push_back(std::clamp(front.accel(k), a_bounds.first, a_bounds.second));
    return m;
}

Observation receive(const V2VMessage& msg, double ego_position, const ChannelConfig& cfg) {
    Observation o;
    o.stamp = msg.stamp;
    o.d = msg.s_f - ego_position + channel_noise(cfg.seed, msg.stamp, 0, cfg.n_d_max);
    o.v_f = msg.v_f + channel_noise(cfg.seed, msg.stamp, 1, cfg.n_vf_max);
    return o;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

double channel_noise(std::uint64_t seed, long step, std::uint32_t channel, double bound) {
    if (bound == 0.0) return 0.0;
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ static_cast<std::uint64_t>(step));
    h = splitmix64(h ^ (static_cast<std::uint64_t>(channel) << 32));
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;  // [0, 1)
    return bound * (2.0 * u - 1.0);
}

}  // namespace cacc
