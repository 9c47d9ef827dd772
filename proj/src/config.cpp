#include <cacc/config.hpp>
#include <cacc/errors.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace cacc {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
    static const std::map<std::string, std::set<std::string>> keys{
        {"vehicle", {"M", "R_w", "rho", "A", "C_r", "C_v", "C_x0", "C_x1", "C_x2", "g"}},
        {"powertrain", {"r_g", "P_a", "eta_m", "eta_e", "extrapolate", "savings_fe", "savings_fc"}},
        {"mpc",
         {"N_p", "t_s", "Q", "R", "D", "torque_scale", "sqp_iters", "qp_tol", "d_min", "v_max", "T_min", "T_max",
          "a_min", "a_max"}},
        {"channel", {"h_steps", "n_d_max", "n_vf_max", "seed", "connected", "trust_horizon"}},
        {"scenario", {"duration", "front_v0", "ego_v0", "d0", "front_events", "theta", "sweep", "values"}},
        {"invariant", {"grid_step", "max_iter", "tol", "half_drag_shrink", "grade_lo", "grade_hi", "cache_dir"}},
    };
    return keys;
}

template <class T>
T get(const pt::ptree& tree, const std::string& key, T fallback) {
    auto node = tree.get_optional<std::string>(key);
    if (!node) return fallback;
    if constexpr (std::is_same_v<T, double>) {
        try {
            return parse_double(*node);
        } catch (const Error&) {
            throw ConfigError("key " + key + ": not a number: '" + *node + "'");
        }
    } else if constexpr (std::is_same_v<T, bool>) {
        const std::string& v = *node;
        if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
        if (v == "false" || v == "0" || v == "no" || v == "off") return false;
        throw ConfigError("key " + key + ": not a boolean: '" + v + "'");
    } else if constexpr (std::is_same_v<T, std::string>) {
        return *node;
    } else {
        try {
            std::size_t pos = 0;
            long long x = std::stoll(*node, &pos);
            if (pos != node->size()) throw std::invalid_argument("trailing");
            return static_cast<T>(x);
        } catch (const std::exception&) {
            throw ConfigError("key " + key + ": not an integer: '" + *node + "'");
        }
    }
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ','))
        if (cell.find_first_not_of(" \t") != std::string::npos) out.push_back(parse_double(cell));
    return out;
}

std::vector<FrontEvent> parse_events(const std::string& s) {
    std::vector<FrontEvent> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ';')) {
        if (cell.find_first_not_of(" \t") == std::string::npos) continue;
        auto colon = cell.find(':');
        if (colon == std::string::npos) throw ConfigError("front event '" + cell + "' is not time:accel");
        out.push_back({parse_double(cell.substr(0, colon)), parse_double(cell.substr(colon + 1))});
    }
    return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path q(p);
    if (q.is_relative() && !base.empty()) q = base / q;
    return std::filesystem::absolute(q).lexically_normal();
}

bool is_number(const std::string& s) {
    try {
        parse_double(s);
        return true;
    } catch (const Error&) {
        return false;
    }
}

EfficiencyMap efficiency_from(const std::string& source, bool extrapolate, const std::filesystem::path& base) {
    try {
        return EfficiencyMap::constant(parse_double(source));
    } catch (const ConfigError&) {
        return EfficiencyMap::from_grid(Grid2D::read_csv(resolve(base, source)), extrapolate);
    }
}

void read_vehicle(const pt::ptree& t, VehicleParams& v) {
    v.M = get(t, "vehicle.M", v.M);
    v.R_w = get(t, "vehicle.R_w", v.R_w);
    v.rho = get(t, "vehicle.rho", v.rho);
    v.A = get(t, "vehicle.A", v.A);
    v.C_r = get(t, "vehicle.C_r", v.C_r);
    v.C_v = get(t, "vehicle.C_v", v.C_v);
    v.C_x0 = get(t, "vehicle.C_x0", v.C_x0);
    v.C_x1 = get(t, "vehicle.C_x1", v.C_x1);
    v.C_x2 = get(t, "vehicle.C_x2", v.C_x2);
    v.g = get(t, "vehicle.g", v.g);
}

void check_keys(const pt::ptree& tree) {
    const auto& known = known_keys();
    for (const auto& [section, body] : tree) {
        auto it = known.find(section);
        if (it == known.end()) throw ConfigError("unknown config section [" + section + "]");
        for (const auto& [key, value] : body)
            if (!it->second.count(key)) throw ConfigError("unknown config key " + section + "." + key);
    }
}

std::string join(const std::vector<double>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + format_double(xs[i]);
    return s;
}

}  // namespace

ScenarioConfig parse_config(std::istream& is, const std::filesystem::path& base) {
    pt::ptree t;
    try {
        pt::read_ini(is, t);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    check_keys(t);
    ScenarioConfig c;
    read_vehicle(t, c.vehicle);

    auto& p = c.powertrain;
    p.r_g = get(t, "powertrain.r_g", p.r_g);
    p.P_a = get(t, "powertrain.P_a", p.P_a);
    const bool extrapolate = get(t, "powertrain.extrapolate", false);
    c.eta_m_source = get(t, "powertrain.eta_m", c.eta_m_source);
    c.eta_e_source = get(t, "powertrain.eta_e", c.eta_e_source);
    p.eta_m = efficiency_from(c.eta_m_source, extrapolate, base);
    p.eta_e = efficiency_from(c.eta_e_source, extrapolate, base);
    // map paths are stored resolved so a re-exported config loads from anywhere
    for (auto* src : {&c.eta_m_source, &c.eta_e_source})
        if (!is_number(*src)) *src = resolve(base, *src).string();
    c.savings_fe = get(t, "powertrain.savings_fe", std::string());
    c.savings_fc = get(t, "powertrain.savings_fc", std::string());
    if (!c.savings_fe.empty()) c.savings_fe = resolve(base, c.savings_fe).string();
    if (!c.savings_fc.empty()) c.savings_fc = resolve(base, c.savings_fc).string();

    auto& m = c.mpc;
    m.N_p = get(t, "mpc.N_p", m.N_p);
    m.Q = get(t, "mpc.Q", m.Q);
    m.R = get(t, "mpc.R", m.R);
    m.D = get(t, "mpc.D", m.D);
    m.torque_scale = get(t, "mpc.torque_scale", m.torque_scale);
    m.sqp_iters = get(t, "mpc.sqp_iters", m.sqp_iters);
    m.qp_tol = get(t, "mpc.qp_tol", m.qp_tol);
    auto& b = m.bounds;
    b.t_s = get(t, "mpc.t_s", b.t_s);
    b.d_min = get(t, "mpc.d_min", b.d_min);
    b.v_max = get(t, "mpc.v_max", b.v_max);
    b.T_min = get(t, "mpc.T_min", b.T_min);
    b.T_max = get(t, "mpc.T_max", b.T_max);
    b.a_min = get(t, "mpc.a_min", b.a_min);
    b.a_max = get(t, "mpc.a_max", b.a_max);

    auto& ch = c.channel;
    ch.h = get(t, "channel.h_steps", ch.h);
    ch.n_d_max = get(t, "channel.n_d_max", ch.n_d_max);
    ch.n_vf_max = get(t, "channel.n_vf_max", ch.n_vf_max);
    ch.seed = get(t, "channel.seed", ch.seed);
    ch.connected = get(t, "channel.connected", ch.connected);
    ch.trust_horizon = get(t, "channel.trust_horizon", ch.trust_horizon);

    c.duration = get(t, "scenario.duration", c.duration);
    c.front_v0 = get(t, "scenario.front_v0", c.front_v0);
    c.ego_v0 = get(t, "scenario.ego_v0", c.ego_v0);
    c.d0 = get(t, "scenario.d0", c.d0);
    c.front_events = parse_events(get(t, "scenario.front_events", std::string()));
    c.road.theta = get(t, "scenario.theta", c.road.theta);
    c.sweep = parse_sweep(get(t, "scenario.sweep", std::string("none")));
    const std::string values = get(t, "scenario.values", std::string());
    c.values = values.empty() ? ScenarioConfig::default_values(c.sweep) : parse_list(values);

    auto& inv = c.invariant;
    inv.options.grid_step = get(t, "invariant.grid_step", inv.options.grid_step);
    inv.options.max_iter = get(t, "invariant.max_iter", inv.options.max_iter);
    inv.options.tol = get(t, "invariant.tol", inv.options.tol);
    inv.half_drag_shrink = get(t, "invariant.half_drag_shrink", inv.half_drag_shrink);
    inv.grade.lo = get(t, "invariant.grade_lo", inv.grade.lo);
    inv.grade.hi = get(t, "invariant.grade_hi", inv.grade.hi);
    inv.cache_dir = get(t, "invariant.cache_dir", inv.cache_dir);
    if (!inv.cache_dir.empty()) inv.cache_dir = resolve(base, inv.cache_dir).string();

    c.validate();
    return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read config " + path.string());
    return parse_config(is, path.parent_path());
}

void write_config(std::ostream& os, const ScenarioConfig& c) {
    const auto& v = c.vehicle;
    os << "[vehicle]\n"
       << "M = " << format_double(v.M) << "\nR_w = " << format_double(v.R_w) << "\nrho = " << format_double(v.rho)
       << "\nA = " << format_double(v.A) << "\nC_r = " << format_double(v.C_r) << "\nC_v = " << format_double(v.C_v)
       << "\nC_x0 = " << format_double(v.C_x0) << "\nC_x1 = " << format_double(v.C_x1)
       << "\nC_x2 = " << format_double(v.C_x2) << "\ng = " << format_double(v.g) << "\n\n";
    os << "[powertrain]\n"
       << "r_g = " << format_double(c.powertrain.r_g) << "\nP_a = " << format_double(c.powertrain.P_a)
       << "\neta_m = " << c.eta_m_source << "\neta_e = " << c.eta_e_source << '\n';
    if (!c.savings_fe.empty()) os << "savings_fe = " << c.savings_fe << '\n';
    if (!c.savings_fc.empty()) os << "savings_fc = " << c.savings_fc << '\n';
    const auto& m = c.mpc;
    const auto& b = m.bounds;
    os << "\n[mpc]\n"
       << "N_p = " << m.N_p << "\nt_s = " << format_double(b.t_s) << "\nQ = " << format_double(m.Q)
       << "\nR = " << format_double(m.R) << "\nD = " << format_double(m.D)
       << "\ntorque_scale = " << format_double(m.torque_scale) << "\nsqp_iters = " << m.sqp_iters
       << "\nqp_tol = " << format_double(m.qp_tol) << "\nd_min = " << format_double(b.d_min)
       << "\nv_max = " << format_double(b.v_max) << "\nT_min = " << format_double(b.T_min)
       << "\nT_max = " << format_double(b.T_max) << "\na_min = " << format_double(b.a_min)
       << "\na_max = " << format_double(b.a_max) << "\n\n";
    const auto& ch = c.channel;
    os << "[channel]\n"
       << "h_steps = " << ch.h << "\nn_d_max = " << format_double(ch.n_d_max)
       << "\nn_vf_max = " << format_double(ch.n_vf_max) << "\nseed = " << ch.seed
       << "\nconnected = " << (ch.connected ? "true" : "false") << "\ntrust_horizon = " << ch.trust_horizon << "\n\n";
    os << "[scenario]\n"
       << "duration = " << format_double(c.duration) << "\nfront_v0 = " << format_double(c.front_v0)
       << "\nego_v0 = " << format_double(c.ego_v0) << "\nd0 = " << format_double(c.d0) << "\nfront_events = ";
    for (std::size_t i = 0; i < c.front_events.size(); ++i)
        os << (i ? ";" : "") << format_double(c.front_events[i].t) << ':' << format_double(c.front_events[i].a);
    os << "\ntheta = " << format_double(c.road.theta) << "\nsweep = " << to_string(c.sweep)
       << "\nvalues = " << join(c.values) << "\n\n";
    const auto& inv = c.invariant;
    os << "[invariant]\n"
       << "grid_step = " << format_double(inv.options.grid_step) << "\nmax_iter = " << inv.options.max_iter
       << "\ntol = " << format_double(inv.options.tol)
       << "\nhalf_drag_shrink = " << (inv.half_drag_shrink ? "true" : "false")
       << "\ngrade_lo = " << format_double(inv.grade.lo) << "\ngrade_hi = " << format_double(inv.grade.hi) << '\n';
    if (!inv.cache_dir.empty()) os << "cache_dir = " << inv.cache_dir << '\n';
}

void save_config(const std::filesystem::path& path, const ScenarioConfig& cfg) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    write_config(os, cfg);
}

VehicleParams load_vehicle_params(const std::filesystem::path& path) {
    pt::ptree t;
    try {
        pt::read_ini(path.string(), t);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("malformed parameter file: ") + e.what());
    }
    check_keys(t);
    VehicleParams v;
    read_vehicle(t, v);
    v.validate();
    return v;
}

void save_vehicle_params(const std::filesystem::path& path, const VehicleParams& v) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    os << "[vehicle]\n"
       << "M = " << format_double(v.M) << "\nR_w = " << format_double(v.R_w) << "\nrho = " << format_double(v.rho)
       << "\nA = " << format_double(v.A) << "\nC_r = " << format_double(v.C_r) << "\nC_v = " << format_double(v.C_v)
       << "\nC_x0 = " << format_double(v.C_x0) << "\nC_x1 = " << format_double(v.C_x1)
       << "\nC_x2 = " << format_double(v.C_x2) << "\ng = " << format_double(v.g) << '\n';
}

}  // namespace cacc
