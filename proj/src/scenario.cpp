#include <cacc/config.hpp>
#include <cacc/errors.hpp>
#include <cacc/scenario.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cctype>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <ostream>

namespace cacc {

std::string to_string(SweepVar s) {
    switch (s) {
    case SweepVar::None: return "none";
    case SweepVar::H: return "h";
    case SweepVar::AMin: return "a_min";
    case SweepVar::NT: return "n_t";
    case SweepVar::Noise: return "noise";
    }
    return "?";
}

SweepVar parse_sweep(const std::string& s) {
    if (s == "none" || s.empty()) return SweepVar::None;
    if (s == "h") return SweepVar::H;
    if (s == "a_min") return SweepVar::AMin;
    if (s == "n_t" || s == "N_T") return SweepVar::NT;
    if (s == "noise" || s == "n_max") return SweepVar::Noise;
    throw ConfigError("unknown sweep variable '" + s + "' (expected h, a_min, n_t or noise)");
}

std::vector<double> ScenarioConfig::default_values(SweepVar s) {
    switch (s) {
    case SweepVar::H: return {0, 1, 2};
    case SweepVar::AMin: return {-9, -6, -3};
    case SweepVar::NT: return {0, 3, 8};
    case SweepVar::Noise: return {0, 0.15, 0.3};
    case SweepVar::None: break;
    }
    return {};
}

long ScenarioConfig::steps() const { return std::lround(duration / mpc.bounds.t_s); }

void ScenarioConfig::validate() const {
    vehicle.validate();
    powertrain.validate();
    mpc.validate();
    channel.validate();
    if (!(duration > 0.0) || steps() < 1) throw ConfigError("scenario duration must cover at least one step");
    if (!(front_v0 >= 0.0 && front_v0 <= mpc.bounds.v_max)) throw ConfigError("front speed outside [0, v_max]");
    if (!(ego_v0 >= 0.0 && ego_v0 <= mpc.bounds.v_max)) throw ConfigError("ego speed outside [0, v_max]");
    if (!(std::abs(road.theta) < M_PI / 2)) throw ConfigError("road grade must satisfy |theta| < pi/2");
    for (std::size_t i = 1; i < front_events.size(); ++i)
        if (!(front_events[i].t >= front_events[i - 1].t)) throw ConfigError("front events must be time ordered");
    for (const auto& e : front_events)
        if (e.a < mpc.bounds.a_min || e.a > mpc.bounds.a_max)
            throw ConfigError("front event acceleration outside [a_min, a_max]");
    for (double v : values) {
        switch (sweep) {
        case SweepVar::H:
        case SweepVar::NT:
            if (v < 0 || v != std::floor(v)) throw ConfigError("step-count sweep values must be nonnegative integers");
            break;
        case SweepVar::AMin:
            if (!(v < 0.0)) throw ConfigError("a_min sweep values must be negative");
            break;
        case SweepVar::Noise:
            if (!(v >= 0.0)) throw ConfigError("noise sweep values must be nonnegative");
            break;
        case SweepVar::None: break;
        }
    }
}

std::shared_ptr<const InvariantFamily> FamilyStore::get(const ScenarioConfig& cfg) {
    const auto sys =
        build_linear_system(cfg.vehicle, cfg.mpc.bounds, cfg.invariant.grade, cfg.invariant.half_drag_shrink);
    const std::uint64_t key = family_hash(sys, cfg.invariant.options);
    std::lock_guard<std::mutex> lock(mu_);
    auto it = families_.find(key);
    if (it != families_.end()) return it->second;
    auto fam = std::make_shared<const InvariantFamily>(
        cfg.invariant.cache_dir.empty()
            ? compute_invariant_family(sys, cfg.invariant.options)
            : compute_invariant_family_cached(sys, cfg.invariant.options, cfg.invariant.cache_dir));
    families_.emplace(key, fam);
    return fam;
}

ScenarioConfig apply_sweep_value(const ScenarioConfig& cfg, SweepVar var, double value) {
    ScenarioConfig c = cfg;
    switch (var) {
    case SweepVar::H: c.channel.h = static_cast<int>(value); break;
    case SweepVar::AMin: c.mpc.bounds.a_min = value; break;
    case SweepVar::NT: c.channel.trust_horizon = static_cast<int>(value); break;
    case SweepVar::Noise:
        c.channel.n_d_max = value;
        c.channel.n_vf_max = value;
        break;
    case SweepVar::None: break;
    }
    c.sweep = SweepVar::None;
    c.values.clear();
    return c;
}

std::string sweep_label(SweepVar var, double value) {
    if (var == SweepVar::None) return "controlled";
    return to_string(var) + "=" + format_double(value);
}

std::vector<double> front_accel_plan(const ScenarioConfig& cfg, long steps) {
    std::vector<double> plan(static_cast<std::size_t>(steps), 0.0);
    const double t_s = cfg.mpc.bounds.t_s;
    for (long k = 0; k < steps; ++k) {
        const double t = static_cast<double>(k) * t_s;
        for (const auto& e : cfg.front_events)
            if (e.t <= t + 1e-9) plan[static_cast<std::size_t>(k)] = e.a;
    }
    return plan;
}

TrajectoryLog simulate(const ScenarioConfig& cfg, FamilyStore& store, const std::string& label) {
    cfg.validate();
    const auto family = store.get(cfg);
    const long steps = cfg.steps();
    const auto& b = cfg.mpc.bounds;
    const long lookahead = cfg.mpc.N_p + cfg.channel.trust_horizon + cfg.channel.h + 2;
    FrontTrack front(cfg.d0, cfg.front_v0, front_accel_plan(cfg, steps + lookahead), b.t_s, cfg.channel.h + 1);
    ClosedLoopWorld world(cfg.vehicle, cfg.road, std::move(front), PlatoonState{cfg.d0, cfg.ego_v0, cfg.front_v0});
    const double T0 = std::clamp(steady_torque(cfg.vehicle, cfg.road, cfg.ego_v0, Gap(cfg.d0)), b.T_min, b.T_max);
    CaccController ctrl(cfg.vehicle, cfg.mpc, family, T0);

    TrajectoryLog log;
    log.label = label;
    log.t_s = b.t_s;
    log.R_w = cfg.vehicle.R_w;
    log.meta = {{"h", std::to_string(cfg.channel.h)},
                {"a_min", format_double(b.a_min)},
                {"trust_horizon", std::to_string(cfg.channel.trust_horizon)},
                {"n_d_max", format_double(cfg.channel.n_d_max)},
                {"n_vf_max", format_double(cfg.channel.n_vf_max)},
                {"connected", cfg.channel.connected ? "true" : "false"},
                {"seed", std::to_string(cfg.channel.seed)}};
    log.records.reserve(static_cast<std::size_t>(steps));
    for (long k = 0; k < steps; ++k) step_closed_loop(world, cfg.channel, ctrl, log);
    return log;
}

TrajectoryLog baseline_log(const ScenarioConfig& cfg) {
    TrajectoryLog log;
    log.label = "front";
    log.t_s = cfg.mpc.bounds.t_s;
    log.R_w = cfg.vehicle.R_w;
    const double T = steady_torque(cfg.vehicle, cfg.road, cfg.front_v0, Gap::open_road());
    const double inf = std::numeric_limits<double>::infinity();
    for (long k = 0; k < cfg.steps(); ++k)
        log.append(inf, cfg.front_v0, std::numeric_limits<double>::quiet_NaN(), T, SolveStatus::OpenLoop);
    return log;
}

RunSet run(const ScenarioConfig& cfg, FamilyStore* store) {
    cfg.validate();
    FamilyStore local;
    FamilyStore& fs = store ? *store : local;
    RunSet out;
    out.sweep = cfg.sweep;
    out.values = cfg.sweep == SweepVar::None ? std::vector<double>{0.0} : cfg.values;
    if (out.values.empty()) throw ConfigError("sweep has no values");
    std::vector<std::future<TrajectoryLog>> jobs;
    for (double v : out.values) {
        ScenarioConfig c = apply_sweep_value(cfg, cfg.sweep, v);
        std::string label = sweep_label(cfg.sweep, v);
        jobs.push_back(std::async(std::launch::async, [c = std::move(c), label = std::move(label), &fs] {
            return simulate(c, fs, label);
        }));
    }
    for (auto& j : jobs) out.logs.push_back(j.get());
    out.baseline = baseline_log(cfg);
    return out;
}

SteadyWindow detect_steady_state(const TrajectoryLog& log, double tol, double span_s) {
    const std::size_t n = log.size();
    const std::size_t w = static_cast<std::size_t>(std::lround(span_s / log.t_s));
    if (n <= w) throw NoSteadyState("log shorter than the steady-state span");
    // ok[i]: gap range over samples i..i+w is below tol
    const std::size_t starts = n - w;
    std::size_t first = starts;
    for (std::size_t i = starts; i-- > 0;) {
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (std::size_t j = i; j <= i + w; ++j) {
            lo = std::min(lo, log.records[j].d);
            hi = std::max(hi, log.records[j].d);
        }
        if (!(hi - lo < tol)) break;
        first = i;
    }
    if (first == starts) throw NoSteadyState("gap never settles within " + format_double(tol) + " m over " +
                                             format_double(span_s) + " s");
    return {first, n, log.records[first].t, log.records.back().t};
}

SafetySummary check_safety(const TrajectoryLog& log, const ControlBounds& b, double tol) {
    SafetySummary s;
    const double inf = std::numeric_limits<double>::infinity();
    s.min_gap = inf;
    s.min_speed = inf;
    s.max_speed = -inf;
    s.min_torque = inf;
    s.max_torque = -inf;
    for (const auto& r : log.records) {
        s.min_gap = std::min(s.min_gap, r.d);
        s.min_speed = std::min(s.min_speed, r.v);
        s.max_speed = std::max(s.max_speed, r.v);
        s.min_torque = std::min(s.min_torque, r.T_w);
        s.max_torque = std::max(s.max_torque, r.T_w);
        if (r.status == SolveStatus::InfeasibleFallback) ++s.fallbacks;
    }
    s.ok = !log.empty() && s.min_gap >= b.d_min - tol && s.min_speed >= -tol && s.max_speed <= b.v_max + tol &&
           s.min_torque >= b.T_min - tol && s.max_torque <= b.T_max + tol && s.fallbacks == 0;
    return s;
}

double rms_torque_increment(const TrajectoryLog& log, double from_t) {
    double sum = 0.0;
    long n = 0;
    for (std::size_t k = 1; k < log.size(); ++k) {
        if (log.records[k].t < from_t - 1e-9) continue;
        const double du = log.records[k].T_w - log.records[k - 1].T_w;
        sum += du * du;
        ++n;
    }
    return n ? std::sqrt(sum / static_cast<double>(n)) : 0.0;
}

std::pair<SavingsTable, SavingsTable> savings_tables(const ScenarioConfig& cfg) {
    const std::vector<double> speeds{0, 5, 10, 15, 20, 25, 30, 35, 40};
    const std::vector<double> gaps{0.1, 0.2, 0.3, 0.4, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 5.0};
    auto load = [&](const std::string& path, PowertrainMode mode) {
        if (path.empty()) return model_savings_table(cfg.vehicle, cfg.powertrain, mode, speeds, gaps);
        SavingsTable t;
        t.mode = mode;
        t.grid = Grid2D::read_csv(path);
        t.model_derived = false;
        return t;
    };
    return {load(cfg.savings_fe, PowertrainMode::FE), load(cfg.savings_fc, PowertrainMode::FC)};
}

EnergyReport energy_report(const RunSet& runs, const VehicleParams& vehicle, const PowertrainConfig& pt,
                           const ControlBounds& bounds, const SavingsTable& fe_table, const SavingsTable& fc_table) {
    (void)vehicle;
    EnergyReport rep;
    rep.sweep = runs.sweep;
    rep.savings_from_model = fe_table.model_derived && fc_table.model_derived;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    EnergyRow front;
    front.label = "front";
    front.steady = true;
    front.t_a = runs.baseline.empty() ? 0.0 : runs.baseline.records.front().t;
    front.t_b = runs.baseline.empty() ? 0.0 : runs.baseline.records.back().t;
    front.steady_gap = std::numeric_limits<double>::infinity();
    front.wheel = front.battery_fe = front.fuel_fc = front.battery_table = front.fuel_table = 100.0;
    front.rms_du = rms_torque_increment(runs.baseline, 0.0);
    front.safety.ok = true;
    rep.rows.push_back(front);

    for (std::size_t i = 0; i < runs.logs.size(); ++i) {
        const auto& log = runs.logs[i];
        if (log.size() != runs.baseline.size() || log.t_s != runs.baseline.t_s)
            throw DomainError("run '" + log.label + "' does not share the baseline time base");
        EnergyRow row;
        row.label = log.label;
        row.value = i < runs.values.size() ? runs.values[i] : nan;
        row.safety = check_safety(log, bounds);
        row.rms_du = log.empty() ? 0.0 : rms_torque_increment(log, 0.5 * log.records.back().t);
        try {
            const SteadyWindow w = detect_steady_state(log);
            row.steady = true;
            row.t_a = w.t_a;
            row.t_b = w.t_b;
            double gap = 0.0, speed = 0.0;
            for (std::size_t k = w.first; k < w.last; ++k) {
                gap += log.records[k].d;
                speed += log.records[k].v;
            }
            const double cnt = static_cast<double>(w.last - w.first);
            gap /= cnt;
            speed /= cnt;
            row.steady_gap = gap;
            const auto fe = trajectory_energy(pt, PowertrainMode::FE, log, w.first, w.last);
            const auto fc = trajectory_energy(pt, PowertrainMode::FC, log, w.first, w.last);
            const auto bfe = trajectory_energy(pt, PowertrainMode::FE, runs.baseline, w.first, w.last);
            const auto bfc = trajectory_energy(pt, PowertrainMode::FC, runs.baseline, w.first, w.last);
            row.wheel = 100.0 * fe.wheel / bfe.wheel;
            row.battery_fe = 100.0 * fe.battery / bfe.battery;
            row.fuel_fc = 100.0 * fc.fuel / bfc.fuel;
            const double tau = speed > 0.0 ? gap / speed : std::numeric_limits<double>::infinity();
            auto table_ratio = [&](const SavingsTable& t) {
                try {
                    return 100.0 * (1.0 - energy_saving_lookup(t, speed, tau));
                } catch (const OutOfHull&) {
                    return nan;
                }
            };
            row.battery_table = table_ratio(fe_table);
            row.fuel_table = table_ratio(fc_table);
        } catch (const NoSteadyState&) {
            row.steady = false;
            row.t_a = row.t_b = row.steady_gap = nan;
            row.wheel = row.battery_fe = row.fuel_fc = row.battery_table = row.fuel_table = nan;
        }
        rep.rows.push_back(row);
    }
    return rep;
}

void write_report_csv(std::ostream& os, const EnergyReport& r) {
    os << "label,value,steady,t_a,t_b,steady_gap,wheel_pct,battery_fe_pct,fuel_fc_pct,battery_fe_table_pct,"
          "fuel_fc_table_pct,rms_du,min_gap,max_speed,min_torque,max_torque,fallbacks,safe\n";
    for (const auto& row : r.rows) {
        os << row.label << ',' << format_double(row.value) << ',' << (row.steady ? "true" : "false") << ','
           << format_double(row.t_a) << ',' << format_double(row.t_b) << ',' << format_double(row.steady_gap) << ','
           << format_double(row.wheel) << ',' << format_double(row.battery_fe) << ',' << format_double(row.fuel_fc)
           << ',' << format_double(row.battery_table) << ',' << format_double(row.fuel_table) << ','
           << format_double(row.rms_du) << ',' << format_double(row.safety.min_gap) << ','
           << format_double(row.safety.max_speed) << ',' << format_double(row.safety.min_torque) << ','
           << format_double(row.safety.max_torque) << ',' << row.safety.fallbacks << ','
           << (row.safety.ok ? "true" : "false") << '\n';
    }
}

void print_report(std::ostream& os, const EnergyReport& r) {
    const auto flags = os.flags();
    os << "sweep: " << to_string(r.sweep) << "   (table columns "
       << (r.savings_from_model ? "model-derived" : "from supplied savings tables") << ")\n";
    os << std::left << std::setw(14) << "run" << std::right << std::setw(8) << "t_a" << std::setw(9) << "gap"
       << std::setw(8) << "wheel" << std::setw(8) << "batt" << std::setw(8) << "fuel" << std::setw(9) << "batt*"
       << std::setw(8) << "fuel*" << std::setw(9) << "rms dT" << std::setw(9) << "min d" << "  safe\n";
    os << std::fixed;
    for (const auto& row : r.rows) {
        os << std::left << std::setw(14) << row.label << std::right << std::setprecision(1) << std::setw(8) << row.t_a
           << std::setprecision(2) << std::setw(9) << row.steady_gap << std::setprecision(1) << std::setw(8)
           << row.wheel << std::setw(8) << row.battery_fe << std::setw(8) << row.fuel_fc << std::setw(9)
           << row.battery_table << std::setw(8) << row.fuel_table << std::setprecision(2) << std::setw(9)
           << row.rms_du;
        if (row.label == "front")
            os << std::setw(9) << "-" << "  -\n";
        else
            os << std::setw(9) << row.safety.min_gap << "  " << (row.safety.ok ? "yes" : "NO") << '\n';
    }
    os << "energy columns in % of the front vehicle; * = savings-table interpolation\n";
    os.flags(flags);
}

namespace {

std::string file_stem(const std::string& label) {
    std::string s;
    for (char c : label) s += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
    return s;
}

}  // namespace

void export_runs(const RunSet& runs, const EnergyReport& report, const ScenarioConfig& cfg,
                 const std::filesystem::path& out) {
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());

    nlohmann::ordered_json m;
    m["sweep"] = to_string(runs.sweep);
    m["values"] = runs.values;
    m["baseline"] = "front.csv";
    save_csv(out / "front.csv", runs.baseline);
    auto& files = m["runs"];
    files = nlohmann::ordered_json::array();
    for (const auto& log : runs.logs) {
        const std::string name = "traj_" + file_stem(log.label) + ".csv";
        save_csv(out / name, log);
        files.push_back({{"label", log.label}, {"file", name}});
    }
    {
        std::ofstream os(out / "report.csv", std::ios::binary);
        if (!os) throw IoError("cannot write " + (out / "report.csv").string());
        write_report_csv(os, report);
    }
    {
        // Gap, speeds and torque against time for every run, one block of columns per run.
        const std::string name = "plot_" + to_string(runs.sweep) + ".dat";
        std::ofstream os(out / name, std::ios::binary);
        if (!os) throw IoError("cannot write " + (out / name).string());
        os << "# t";
        for (const auto& log : runs.logs) {
            const std::string s = file_stem(log.label);
            os << " d[" << s << "] v[" << s << "] v_f[" << s << "] T_w[" << s << "]";
        }
        os << '\n';
        const std::size_t n = runs.logs.empty() ? 0 : runs.logs.front().size();
        for (std::size_t k = 0; k < n; ++k) {
            os << format_double(runs.logs.front().records[k].t);
            for (const auto& log : runs.logs) {
                const auto& r = log.records[k];
                os << ' ' << format_double(r.d) << ' ' << format_double(r.v) << ' ' << format_double(r.v_f) << ' '
                   << format_double(r.T_w);
            }
            os << '\n';
        }
        m["plot"] = name;
    }
    save_config(out / "config.ini", cfg);
    m["config"] = "config.ini";
    m["report"] = "report.csv";
    std::ofstream os(out / "manifest.json", std::ios::binary);
    if (!os) throw IoError("cannot write " + (out / "manifest.json").string());
    os << m.dump(2) << '\n';
}

RunSet load_runs(const std::filesystem::path& dir) {
    std::ifstream is(dir / "manifest.json");
    if (!is) throw IoError("no manifest.json in " + dir.string());
    nlohmann::json m;
    try {
        is >> m;
        RunSet r;
        r.sweep = parse_sweep(m.at("sweep").get<std::string>());
        r.values = m.at("values").get<std::vector<double>>();
        r.baseline = load_csv(dir / m.at("baseline").get<std::string>());
        for (const auto& f : m.at("runs")) r.logs.push_back(load_csv(dir / f.at("file").get<std::string>()));
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed manifest in " + dir.string() + ": " + e.what());
    }
}

}  // namespace cacc
