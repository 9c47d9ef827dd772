#include <cacc/errors.hpp>
#include <cacc/invariant_set.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <map>
#include <random>

using namespace cacc;

namespace {

const InvariantFamily& family(double a_min) {
    static std::map<double, InvariantFamily> cache;
    auto it = cache.find(a_min);
    if (it == cache.end()) {
        ControlBounds b;
        b.a_min = a_min;
        it = cache.emplace(a_min, compute_invariant_family(build_linear_system(VehicleParams{}, b))).first;
    }
    return it->second;
}

// Rejection sample of a member state of the slice at node i, front speed anywhere in [g_i, g_{i+1}).
PlatoonState sample_member(const InvariantFamily& f, std::size_t i, std::mt19937_64& rng) {
    const double lo = f.grid[i];
    const double hi = i + 1 < f.grid.size() ? f.grid[i + 1] : lo;
    std::uniform_real_distribution<double> D(5.0, 400.0), V(0.0, 40.0), F(lo, std::max(lo, std::nextafter(hi, lo)));
    for (;;) {
        PlatoonState x{D(rng), V(rng), F(rng)};
        if (f.contains(x)) return x;
    }
}

}  // namespace

TEST(LinearSystem, ShrunkInputBounds) {
    const auto s = build_linear_system(VehicleParams{}, ControlBounds{});
    EXPECT_NEAR(s.u_lo, -2548.4, 0.5);
    EXPECT_NEAR(s.u_hi, 545.1, 0.5);
    EXPECT_NEAR(s.beta, 0.2 / (1844.0 * 0.288), 1e-15);
}

TEST(LinearSystem, HalfDragVariantIsLooser) {
    const auto a = build_linear_system(VehicleParams{}, ControlBounds{});
    const auto b = build_linear_system(VehicleParams{}, ControlBounds{}, {}, true);
    EXPECT_EQ(a.u_lo, b.u_lo);
    EXPECT_GT(b.u_hi, a.u_hi);
}

TEST(LinearSystem, AuthorityAnnihilated) {
    ControlBounds b;
    b.T_max = 500.0;  // below the road load at v_max
    EXPECT_THROW(build_linear_system(VehicleParams{}, b), AuthorityError);
}

TEST(LinearSystem, GradeRangeWidensShrink) {
    const auto flat = build_linear_system(VehicleParams{}, ControlBounds{});
    const auto hill = build_linear_system(VehicleParams{}, ControlBounds{}, {-0.02, 0.02});
    EXPECT_LT(hill.u_hi, flat.u_hi);
    EXPECT_GT(hill.u_lo, flat.u_lo);
}

TEST(Family, GridAndConvergence) {
    const auto& f = family(-6.0);
    EXPECT_TRUE(f.converged);
    ASSERT_FALSE(f.grid.empty());
    EXPECT_EQ(f.grid.front(), 0.0);
    EXPECT_EQ(f.grid.back(), 40.0);
    for (std::size_t i = 1; i < f.grid.size(); ++i) EXPECT_GT(f.grid[i], f.grid[i - 1]);
    EXPECT_NEAR(aligned_grid_step(ControlBounds{}), 0.6, 1e-12);
}

TEST(Family, StoppedFrontStoppedEgo) {
    const auto& f = family(-6.0);
    EXPECT_TRUE(f.contains({5.0, 0.0, 0.0}));
    EXPECT_FALSE(f.contains({4.99, 0.0, 0.0}));
}

TEST(Family, SlicesInsideStateSet) {
    const auto& f = family(-6.0);
    const Polytope X = state_constraints(f.sys.bounds);
    for (const auto& s : f.slices) EXPECT_TRUE(subset(s, X, 1e-9));
}

TEST(Family, SlicesGrowWithFrontSpeed) {
    for (double a : {-9.0, -6.0, -3.0}) {
        const auto& f = family(a);
        for (std::size_t i = 1; i < f.slices.size(); ++i) EXPECT_TRUE(subset(f.slices[i - 1], f.slices[i], 1e-7)) << i;
    }
}

TEST(Family, Fixpoint) {
    const auto& f = family(-6.0);
    for (std::size_t i = 0; i < f.slices.size(); i += 7) EXPECT_TRUE(set_equal(backward_step(f, i), f.slices[i], 1e-6));
}

TEST(Family, GentlerBrakingGivesLargerSets) {
    const auto& f9 = family(-9.0);
    const auto& f6 = family(-6.0);
    const auto& f3 = family(-3.0);
    int strict = 0;
    for (double vf = 0.0; vf <= 40.0; vf += 2.5)
        for (double d = 5.0; d <= 200.0; d += 5.0)
            for (double v = 0.0; v <= 40.0; v += 2.0) {
                const PlatoonState x{d, v, vf};
                if (f9.contains(x)) EXPECT_TRUE(f6.contains(x));
                if (f6.contains(x)) EXPECT_TRUE(f3.contains(x));
                if (f3.contains(x) && !f9.contains(x)) ++strict;
            }
    EXPECT_GT(strict, 0);
}

TEST(Family, AnalyticSetIsInside) {
    const auto& f = family(-6.0);
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> D(5.0, 250.0), V(0.0, 40.0);
    std::uniform_int_distribution<std::size_t> node(0, f.grid.size() - 1);
    int safe = 0;
    for (int n = 0; n < 4000; ++n) {
        // the slice at a node must hold for the node's own front speed
        const PlatoonState x{D(rng), V(rng), f.grid[node(rng)]};
        if (!analytic_safe(f.sys, x.d, x.v, x.v_f)) continue;
        ++safe;
        EXPECT_TRUE(f.contains(x, 1e-7)) << x.d << ' ' << x.v << ' ' << x.v_f;
    }
    EXPECT_GT(safe, 500);
}

TEST(Analytic, SimpleCases) {
    ControlBounds gentle;
    gentle.a_min = -3.0;
    // the ego brakes harder than the front here (u_lo / (M R_w) ~ -4.8 m/s^2 against -3)
    EXPECT_TRUE(analytic_safe(build_linear_system(VehicleParams{}, gentle), 5.0, 20.0, 20.0));
    const auto s = build_linear_system(VehicleParams{}, ControlBounds{});
    EXPECT_FALSE(analytic_safe(s, 5.0, 20.0, 20.0));
    EXPECT_TRUE(analytic_safe(s, 5.0, 0.0, 13.0));
    EXPECT_FALSE(analytic_safe(s, 5.0, 20.0, 0.0));
    EXPECT_FALSE(analytic_safe(s, 4.0, 0.0, 0.0));
}

TEST(Family, RobustInvariance) {
    const auto& f = family(-6.0);
    const auto& s = f.sys;
    const double t_s = s.bounds.t_s;
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> node(0, f.grid.size() - 1);
    for (int n = 0; n < 1000; ++n) {
        const PlatoonState x = sample_member(f, node(rng), rng);
        bool found = false;
        for (int j = 0; j <= 400 && !found; ++j) {
            const double u = s.u_lo + (s.u_hi - s.u_lo) * j / 400.0;
            bool ok = true;
            for (double a : {s.bounds.a_min, s.bounds.a_max}) {
                const PlatoonState y{x.d + t_s * (x.v_f - x.v), x.v + s.beta * u,
                                     std::clamp(x.v_f + t_s * a, 0.0, s.bounds.v_max)};
                ok = ok && f.contains(y, 1e-7);
            }
            found = ok;
        }
        EXPECT_TRUE(found) << x.d << ' ' << x.v << ' ' << x.v_f;
    }
}

TEST(Family, PolicyKeepsGapUnderMaxBraking) {
    const VehicleParams p;
    const RoadProfile road;
    for (double a_min : {-9.0, -6.0, -3.0}) {
        const auto& f = family(a_min);
        std::mt19937_64 rng(17);
        std::uniform_int_distribution<std::size_t> node(0, f.grid.size() - 1);
        for (int n = 0; n < 200; ++n) {
            PlatoonState x = sample_member(f, node(rng), rng);
            for (int k = 0; k < 150; ++k) {
                const double u = invariant_policy(f, x);
                const double T = safe_input(p, road, x, u);
                ASSERT_GE(T, f.sys.bounds.T_min - 1e-9);
                ASSERT_LE(T, f.sys.bounds.T_max + 1e-9);
                x = step(p, road, x, T, a_min, f.sys.bounds.t_s);
                ASSERT_GE(x.d, 5.0 - 1e-6) << std::setprecision(17) << x.d << " a_min " << a_min << " step " << k;
            }
        }
    }
}

TEST(Terminal, RoundsDown) {
    const auto& f = family(-6.0);
    EXPECT_EQ(&terminal_halfspaces(f, f.grid[3]), &f.slices[3]);
    EXPECT_EQ(&terminal_halfspaces(f, 0.5 * (f.grid[3] + f.grid[4])), &f.slices[3]);
    EXPECT_EQ(&terminal_halfspaces(f, 0.0), &f.slices[0]);
}

TEST(SafeInput, WithinTorqueLimits) {
    const VehicleParams p;
    const auto s = build_linear_system(p, ControlBounds{});
    const double hi = safe_input(p, {}, {1e9, 40.0, 40.0}, s.u_hi);
    EXPECT_LE(hi, 1083.0);
    const double lo = safe_input(p, {}, {5.0, 0.0, 0.0}, s.u_lo);
    EXPECT_GE(lo, -2500.0 - 1e-9);
    VehicleParams q = p;
    q.C_r = 0.0;
    EXPECT_DOUBLE_EQ(safe_input(q, {}, {10.0, 0.0, 0.0}, 123.0), 123.0);
}

TEST(Cache, RoundTripAndHash) {
    const auto& f = family(-6.0);
    const auto dir = std::filesystem::temp_directory_path() / "cacc_family_cache_test";
    std::filesystem::remove_all(dir);
    const InvariantOptions opts;
    const auto h = family_hash(f.sys, opts);
    save_family(dir, f, h);
    const auto back = load_family(dir, f.sys, h);
    ASSERT_TRUE(back.has_value());
    ASSERT_EQ(back->slices.size(), f.slices.size());
    for (std::size_t i = 0; i < f.slices.size(); ++i) EXPECT_TRUE(set_equal(back->slices[i], f.slices[i], 1e-12));
    EXPECT_FALSE(load_family(dir, f.sys, h + 1).has_value());

    ControlBounds b;
    b.a_min = -9.0;
    EXPECT_NE(family_hash(build_linear_system(VehicleParams{}, b), opts), h);
    std::filesystem::remove_all(dir);
}
