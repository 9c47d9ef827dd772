#pragma once

#include <cacc/bounds.hpp>
#include <cacc/dynamics.hpp>
#include <cacc/polytope.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

namespace cacc {

// Feedback-linearized platoon model over (d, v, v_f) with input u [N m]:
//   d+ = d + t_s (v_f - v),  v+ = v + beta u,  v_f+ = (v_f + t_s a_f)^+
// where beta = t_s / (M R_w) and u is wheel torque net of road load.
struct LinearPlatoonSystem {
    VehicleParams params;
    ControlBounds bounds;
    double beta = 0.0;
    double u_lo = 0.0;
    double u_hi = 0.0;
    double theta_lo = 0.0;  // grade range the shrink covers [rad]
    double theta_hi = 0.0;
    bool half_drag_shrink = false;
};

struct GradeRange {
    double lo = 0.0;
    double hi = 0.0;
};

// The upper bound subtracts R_w (M g C_r + C_v v_max + rho A C_x0 v_max^2) from
// T_max; with half_drag_shrink the drag term carries the 1/2 of the plant model.
// Throws AuthorityError unless u_lo < 0 < u_hi.
LinearPlatoonSystem build_linear_system(const VehicleParams& params, const ControlBounds& bounds,
                                        GradeRange grade = {}, bool half_drag_shrink = false);

struct InvariantOptions {
    double grid_step = 0.0;  // front-speed grid spacing [m/s]; 0 picks one aligned with t_s |a_min|
    int max_iter = 200;
    double tol = 1e-6;
};

// Largest step <= 1 m/s that divides t_s |a_min| (so one worst-case braking step
// lands exactly on a grid node), or 1 m/s when no such step exists.
double aligned_grid_step(const ControlBounds& b);

// One (d, v) polytope per front-speed node. The slice for node g is safe for any
// front speed in [g, next node).
struct InvariantFamily {
    std::vector<double> grid;
    std::vector<Polytope> slices;
    LinearPlatoonSystem sys;
    double grid_step = 0.0;
    int base_iterations = 0;  // fixpoint iterations for the stopped-front slice
    bool converged = false;

    std::size_t node_index(double v_f) const;  // largest node <= v_f, clamped to the grid
    const Polytope& slice_for(double v_f) const { return slices[node_index(v_f)]; }
    bool contains(const PlatoonState& x, double tol = 1e-9) const;
};

// State constraint set {d >= d_min, 0 <= v <= v_max} over (d, v).
Polytope state_constraints(const ControlBounds& b);

// {(d, v) in X : exists u in [u_lo, u_hi] with (d + t_s (w - v), v + beta u) in target for all w in [w_lo, w_hi]}
Polytope robust_pre(const LinearPlatoonSystem& sys, const Polytope& target, double w_lo, double w_hi);

// Throws EmptySlice when even the stopped-front slice is empty.
InvariantFamily compute_invariant_family(const LinearPlatoonSystem& sys, const InvariantOptions& opts = {});

// Recomputes slice i from the family itself; equals slices[i] at a fixpoint.
Polytope backward_step(const InvariantFamily& fam, std::size_t i);

// Same as compute_invariant_family, reusing a cached copy under cache_dir when
// the configuration hash matches.
InvariantFamily compute_invariant_family_cached(const LinearPlatoonSystem& sys, const InvariantOptions& opts,
                                                const std::filesystem::path& cache_dir);

std::uint64_t family_hash(const LinearPlatoonSystem& sys, const InvariantOptions& opts);
void save_family(const std::filesystem::path& dir, const InvariantFamily& fam, std::uint64_t hash);
std::optional<InvariantFamily> load_family(const std::filesystem::path& dir, const LinearPlatoonSystem& sys,
                                           std::uint64_t hash);

// Independent stopping-distance test: simulate ego braking at u_lo and front braking
// at a_min (both clamped at zero) and require the gap to stay >= d_min throughout.
bool analytic_safe(const LinearPlatoonSystem& sys, double d, double v, double v_f);

// Terminal constraint for the worst-case front speed at the horizon end (rounded down to a node).
const Polytope& terminal_halfspaces(const InvariantFamily& fam, double v_f_worst);

// Wheel torque realizing linear input u on the nonlinear plant.
double safe_input(const VehicleParams& params, const RoadProfile& road, const PlatoonState& x, double u_linear);

// Admissible interval of u keeping the worst-case successor in the family, or
// nullopt when x has no admissible input.
struct InputInterval {
    double lo = 0.0;
    double hi = 0.0;
};
std::optional<InputInterval> admissible_inputs(const InvariantFamily& fam, const PlatoonState& x, double tol = 1e-9);

// Largest admissible linear input; u_lo when none exists.
double invariant_policy(const InvariantFamily& fam, const PlatoonState& x);

}  // namespace cacc
