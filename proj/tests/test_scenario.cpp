#include <cacc/config.hpp>
#include <cacc/errors.hpp>
#include <cacc/scenario.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace cacc;
namespace fs = std::filesystem;

namespace {

TrajectoryLog gap_log(double duration, double (*gap)(double)) {
    TrajectoryLog log;
    log.t_s = 0.2;
    log.R_w = 0.288;
    const long n = std::lround(duration / log.t_s);
    for (long k = 0; k < n; ++k) log.append(gap(k * log.t_s), 25.0, 25.0, 140.0, SolveStatus::Optimal);
    return log;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

ScenarioConfig short_config(double duration = 6.0) {
    ScenarioConfig c;
    c.duration = duration;
    return c;
}

}  // namespace

TEST(Config, ShippedDefaultMatchesBuiltIn) {
    const ScenarioConfig c = load_config(fs::path(CACC_SOURCE_DIR) / "configs" / "default.ini");
    const ScenarioConfig d;
    EXPECT_EQ(c.duration, d.duration);
    EXPECT_EQ(c.vehicle.C_x1, d.vehicle.C_x1);
    EXPECT_EQ(c.mpc.N_p, d.mpc.N_p);
    EXPECT_EQ(c.mpc.bounds.a_max, d.mpc.bounds.a_max);
    EXPECT_EQ(c.channel.h, 0);
    EXPECT_EQ(c.sweep, SweepVar::None);
}

TEST(Config, ParsesSectionsAndLists) {
    std::istringstream is("[scenario]\nduration = 12\nfront_events = 2:-3; 4:0\nsweep = h\nvalues = 0, 2\n"
                          "[channel]\nh_steps = 1\nconnected = false\n[mpc]\na_min = -9\n");
    const ScenarioConfig c = parse_config(is);
    EXPECT_EQ(c.duration, 12.0);
    ASSERT_EQ(c.front_events.size(), 2u);
    EXPECT_EQ(c.front_events[0].t, 2.0);
    EXPECT_EQ(c.front_events[0].a, -3.0);
    EXPECT_EQ(c.sweep, SweepVar::H);
    EXPECT_EQ(c.values, (std::vector<double>{0.0, 2.0}));
    EXPECT_EQ(c.channel.h, 1);
    EXPECT_FALSE(c.channel.connected);
    EXPECT_EQ(c.mpc.bounds.a_min, -9.0);
}

TEST(Config, EmptySweepValuesTakeDefaults) {
    std::istringstream is("[scenario]\nsweep = a_min\n");
    EXPECT_EQ(parse_config(is).values, (std::vector<double>{-9.0, -6.0, -3.0}));
}

TEST(Config, Errors) {
    std::istringstream unknown_key("[mpc]\nN_q = 3\n");
    EXPECT_THROW(parse_config(unknown_key), ConfigError);
    std::istringstream unknown_section("[plant]\nM = 3\n");
    EXPECT_THROW(parse_config(unknown_section), ConfigError);
    std::istringstream zero("[scenario]\nduration = 0\n");
    EXPECT_THROW(parse_config(zero), ConfigError);
    std::istringstream bad_sweep("[scenario]\nsweep = q\n");
    EXPECT_THROW(parse_config(bad_sweep), ConfigError);
    std::istringstream bad_values("[scenario]\nsweep = h\nvalues = 0, 1.5\n");
    EXPECT_THROW(parse_config(bad_values), ConfigError);
}

TEST(Config, WriteReadRoundTrip) {
    ScenarioConfig c;
    c.sweep = SweepVar::Noise;
    c.values = {0.0, 0.3};
    c.channel.seed = 99;
    c.front_events = {{1.0, -2.0}, {3.0, 0.0}};
    c.mpc.Q = 2.5;
    std::stringstream ss;
    write_config(ss, c);
    const ScenarioConfig r = parse_config(ss);
    std::stringstream again;
    write_config(again, r);
    EXPECT_EQ(ss.str(), again.str());
    EXPECT_EQ(r.channel.seed, 99u);
    EXPECT_EQ(r.mpc.Q, 2.5);
}

TEST(Sweep, Parse) {
    EXPECT_EQ(parse_sweep("n_t"), SweepVar::NT);
    EXPECT_EQ(parse_sweep("noise"), SweepVar::Noise);
    EXPECT_THROW(parse_sweep("speed"), ConfigError);
    const auto c = apply_sweep_value(ScenarioConfig{}, SweepVar::Noise, 0.15);
    EXPECT_EQ(c.channel.n_d_max, 0.15);
    EXPECT_EQ(c.channel.n_vf_max, 0.15);
}

TEST(Steady, ConstantGapIsWholeLog) {
    const auto log = gap_log(20.0, [](double) { return 7.0; });
    const auto w = detect_steady_state(log);
    EXPECT_EQ(w.first, 0u);
    EXPECT_EQ(w.last, log.size());
}

TEST(Steady, SettlingGap) {
    // closes linearly and is flat from t = 30 s on
    const auto log = gap_log(60.0, [](double t) { return t < 30.0 ? 5.0 + (30.0 - t) : 5.0; });
    const auto w = detect_steady_state(log);
    EXPECT_GE(w.t_a, 30.0 - 5.0);
    EXPECT_LE(w.t_a, 35.0);
}

TEST(Steady, OscillationIsNotSteady) {
    const auto log = gap_log(60.0, [](double t) { return 10.0 + std::sin(t); });
    EXPECT_THROW(detect_steady_state(log), NoSteadyState);
}

TEST(Safety, Summary) {
    auto log = gap_log(4.0, [](double) { return 6.0; });
    EXPECT_TRUE(check_safety(log, ControlBounds{}).ok);
    log.records[3].d = 4.9;
    EXPECT_FALSE(check_safety(log, ControlBounds{}).ok);
    log.records[3].d = 6.0;
    log.records[5].status = SolveStatus::InfeasibleFallback;
    const auto s = check_safety(log, ControlBounds{});
    EXPECT_FALSE(s.ok);
    EXPECT_EQ(s.fallbacks, 1);
}

TEST(Baseline, SteadyCruiseTorque) {
    const auto b = baseline_log(ScenarioConfig{});
    ASSERT_EQ(b.size(), 300u);
    for (const auto& r : b.records) EXPECT_NEAR(r.T_w, 144.0, 0.5);
}

TEST(Report, BaselineAgainstItself) {
    const ScenarioConfig c = short_config(20.0);
    RunSet r;
    r.baseline = baseline_log(c);
    r.values = {0.0};
    r.logs = {r.baseline};
    r.logs[0].label = "self";
    for (auto& x : r.logs[0].records) x.d = 30.0;
    const auto [fe, fc] = savings_tables(c);
    const auto rep = energy_report(r, c.vehicle, c.powertrain, c.mpc.bounds, fe, fc);
    ASSERT_EQ(rep.rows.size(), 2u);
    EXPECT_EQ(rep.rows[0].wheel, 100.0);
    EXPECT_NEAR(rep.rows[1].wheel, 100.0, 1e-12);
    EXPECT_NEAR(rep.rows[1].battery_fe, 100.0, 1e-12);
    EXPECT_NEAR(rep.rows[1].fuel_fc, 100.0, 1e-12);
}

TEST(Run, ZeroDuration) {
    ScenarioConfig c;
    c.duration = 0.0;
    EXPECT_THROW(run(c), ConfigError);
}

TEST(Run, SweepProducesOneLogPerValue) {
    ScenarioConfig c = short_config();
    c.sweep = SweepVar::H;
    c.values = ScenarioConfig::default_values(SweepVar::H);
    const RunSet r = run(c);
    ASSERT_EQ(r.logs.size(), 3u);
    EXPECT_EQ(r.baseline.size(), r.logs[0].size());
    EXPECT_EQ(r.logs[2].label, "h=2");
    for (const auto& log : r.logs) EXPECT_TRUE(check_safety(log, c.mpc.bounds).ok);
}

TEST(Run, SameSeedSameBytes) {
    ScenarioConfig c = short_config();
    c.sweep = SweepVar::Noise;
    c.values = {0.3};
    c.channel.seed = 5;
    FamilyStore store;
    const RunSet a = run(c, &store), b = run(c, &store);
    std::ostringstream x, y;
    write_csv(x, a.logs[0]);
    write_csv(y, b.logs[0]);
    EXPECT_EQ(x.str(), y.str());
    c.channel.seed = 6;
    std::ostringstream z;
    write_csv(z, run(c, &store).logs[0]);
    EXPECT_NE(x.str(), z.str());
}

TEST(Export, FilesAndDeterminism) {
    ScenarioConfig c = short_config(12.0);
    c.sweep = SweepVar::NT;
    c.values = {0.0, 3.0};
    const RunSet r = run(c);
    const auto [fe, fc] = savings_tables(c);
    const auto rep = energy_report(r, c.vehicle, c.powertrain, c.mpc.bounds, fe, fc);
    const fs::path dir = fs::temp_directory_path() / "cacc_export_test" / "nested";
    fs::remove_all(dir.parent_path());
    export_runs(r, rep, c, dir);
    ASSERT_TRUE(fs::exists(dir / "manifest.json"));
    ASSERT_TRUE(fs::exists(dir / "plot_n_t.dat"));
    const std::string report = slurp(dir / "report.csv");
    EXPECT_EQ(std::count(report.begin(), report.end(), '\n'), 1 + 2 + 1);
    const std::string traj = slurp(dir / "traj_n_t_3.csv");
    EXPECT_NE(traj.find("t,d,v,v_f,T_w,P_wheel,status"), std::string::npos);

    export_runs(r, rep, c, dir);
    EXPECT_EQ(slurp(dir / "traj_n_t_3.csv"), traj);
    EXPECT_EQ(slurp(dir / "report.csv"), report);

    const RunSet back = load_runs(dir);
    ASSERT_EQ(back.logs.size(), 2u);
    EXPECT_EQ(back.sweep, SweepVar::NT);
    for (std::size_t i = 0; i < back.logs[1].size(); ++i) {
        EXPECT_EQ(back.logs[1].records[i].d, r.logs[1].records[i].d);
        EXPECT_EQ(back.logs[1].records[i].T_w, r.logs[1].records[i].T_w);
        EXPECT_EQ(back.logs[1].records[i].status, r.logs[1].records[i].status);
    }
    const ScenarioConfig reloaded = load_config(dir / "config.ini");
    EXPECT_EQ(reloaded.duration, 12.0);
    fs::remove_all(dir.parent_path());
}
