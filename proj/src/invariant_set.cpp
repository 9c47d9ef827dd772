#include <cacc/errors.hpp>
#include <cacc/invariant_set.hpp>
#include <cacc/trajectory.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace cacc {

void ControlBounds::validate() const {
    if (!(t_s > 0.0)) throw ConfigError("t_s must be positive");
    if (!(d_min > 0.0)) throw ConfigError("d_min must be positive");
    if (!(v_max > 0.0)) throw ConfigError("v_max must be positive");
    if (!(T_min < T_max)) throw ConfigError("torque bounds must satisfy T_min < T_max");
    if (!(a_min < 0.0 && a_max >= 0.0)) throw ConfigError("acceleration bounds must satisfy a_min < 0 <= a_max");
}

LinearPlatoonSystem build_linear_system(const VehicleParams& p, const ControlBounds& b, GradeRange grade,
                                        bool half_drag_shrink) {
    p.validate();
    b.validate();
    if (!(grade.lo <= grade.hi) || std::abs(grade.lo) >= M_PI / 2 || std::abs(grade.hi) >= M_PI / 2)
        throw ConfigError("grade range must satisfy -pi/2 < lo <= hi < pi/2");
    // sin + C_r cos is increasing on the admissible grade range for any realistic C_r
    auto slope_term = [&](double th) { return std::sin(th) + p.C_r * std::cos(th); };
    const double cr_lo = std::min(slope_term(grade.lo), slope_term(grade.hi));
    const double cr_hi = std::max(slope_term(grade.lo), slope_term(grade.hi));
    LinearPlatoonSystem s;
    s.params = p;
    s.bounds = b;
    s.beta = b.t_s / (p.M * p.R_w);
    s.theta_lo = grade.lo;
    s.theta_hi = grade.hi;
    s.half_drag_shrink = half_drag_shrink;
    const double drag = (half_drag_shrink ? 0.5 : 1.0) * p.rho * p.A * p.C_x0 * b.v_max * b.v_max;
    s.u_lo = b.T_min - p.R_w * p.M * p.g * cr_lo;
    s.u_hi = b.T_max - p.R_w * (p.M * p.g * cr_hi + p.C_v * b.v_max + drag);
    // the linear input must be able to both brake and hold v_max against the worst road load
    if (!(s.u_lo < 0.0 && s.u_hi > 0.0)) {
        std::ostringstream msg;
        msg << "no control authority left after the road-load shrink: u_lo = " << s.u_lo << ", u_hi = " << s.u_hi;
        throw AuthorityError(msg.str());
    }
    return s;
}

double aligned_grid_step(const ControlBounds& b) {
    const double drop = b.t_s * std::abs(b.a_min);
    for (int k = 1; k <= 10000; ++k) {
        const double step = drop / k;
        if (step <= 1.0 + 1e-12) return step;
    }
    return 1.0;
}

std::size_t InvariantFamily::node_index(double v_f) const {
    if (grid.empty()) throw DomainError("empty invariant family");
    if (!(v_f > grid.front())) return 0;
    auto it = std::upper_bound(grid.begin(), grid.end(), v_f + 1e-9);
    return static_cast<std::size_t>(it - grid.begin()) - 1;
}

bool InvariantFamily::contains(const PlatoonState& x, double tol) const {
    Eigen::Vector2d z(x.d, x.v);
    return cacc::contains(slice_for(x.v_f), z, tol);
}

Polytope state_constraints(const ControlBounds& b) {
    Eigen::MatrixXd A(3, 2);
    A << -1, 0, 0, -1, 0, 1;
    Eigen::VectorXd c(3);
    c << -b.d_min, 0.0, b.v_max;
    return Polytope(A, c);
}

Polytope robust_pre(const LinearPlatoonSystem& sys, const Polytope& target, double w_lo, double w_hi) {
    const double t_s = sys.bounds.t_s;
    Eigen::MatrixXd E(2, 1);
    E << t_s, 0.0;
    Box W{Eigen::VectorXd::Constant(1, w_lo), Eigen::VectorXd::Constant(1, w_hi)};
    const Polytope eroded = erode(target, W, E);
    Eigen::MatrixXd F(2, 3);
    F << 1.0, -t_s, 0.0, 0.0, 1.0, sys.beta;
    const Polytope pre_xu = affine_preimage(eroded, F, Eigen::VectorXd::Zero(2));
    return reduce(intersect(project_out_input(pre_xu, sys.u_lo, sys.u_hi), state_constraints(sys.bounds)));
}

namespace {

// Nodes v_max - k step down to zero, plus zero itself. Counting down from v_max keeps
// every worst-case successor of a node on a node (or clamped to zero).
std::vector<double> make_grid(double v_max, double step) {
    std::vector<double> g{0.0};
    for (int k = static_cast<int>(std::floor(v_max / step + 1e-9)); k >= 0; --k) {
        const double x = v_max - k * step;
        if (x > 1e-9) g.push_back(x);
    }
    return g;
}

// Node reached by the worst-case front speed after one step from node i.
std::size_t successor_node(const InvariantFamily& fam, std::size_t i) {
    return fam.node_index(std::max(fam.grid[i] + fam.sys.bounds.t_s * fam.sys.bounds.a_min, 0.0));
}

double cell_top(const InvariantFamily& fam, std::size_t i) {
    return i + 1 < fam.grid.size() ? fam.grid[i + 1] : fam.grid[i];
}

}  // namespace

Polytope backward_step(const InvariantFamily& fam, std::size_t i) {
    return robust_pre(fam.sys, fam.slices[successor_node(fam, i)], fam.grid[i], cell_top(fam, i));
}

InvariantFamily compute_invariant_family(const LinearPlatoonSystem& sys, const InvariantOptions& opts) {
    const double step = opts.grid_step > 0.0 ? opts.grid_step : aligned_grid_step(sys.bounds);
    if (!(step > 0.0)) throw ConfigError("grid step must be positive");
    InvariantFamily fam;
    fam.sys = sys;
    fam.grid_step = step;
    fam.grid = make_grid(sys.bounds.v_max, step);
    const Polytope X = reduce(state_constraints(sys.bounds));
    fam.slices.assign(fam.grid.size(), X);

    // Stopped-front slice: fixpoint of the robust predecessor operator from X.
    fam.converged = false;
    for (int it = 0; it < opts.max_iter; ++it) {
        Polytope next = backward_step(fam, 0);
        fam.base_iterations = it + 1;
        if (next.is_empty()) throw EmptySlice("no safe states even with the front vehicle stopped");
        const bool done = set_equal(next, fam.slices[0], opts.tol);
        fam.slices[0] = std::move(next);
        if (done) {
            fam.converged = true;
            break;
        }
    }
    // Every other slice depends only on lower nodes, so one ascending sweep settles it.
    for (std::size_t i = 1; i < fam.grid.size(); ++i) {
        if (successor_node(fam, i) >= i) {
            // Only possible when braking cannot leave the cell; iterate to a fixpoint as for node 0.
            for (int it = 0; it < opts.max_iter; ++it) {
                Polytope next = backward_step(fam, i);
                const bool done = set_equal(next, fam.slices[i], opts.tol);
                fam.slices[i] = std::move(next);
                if (done) break;
            }
        } else {
            fam.slices[i] = backward_step(fam, i);
        }
        if (fam.slices[i].is_empty()) throw EmptySlice("empty slice at front speed " + format_double(fam.grid[i]));
    }
    return fam;
}

std::uint64_t family_hash(const LinearPlatoonSystem& sys, const InvariantOptions& opts) {
    std::ostringstream os;
    os << std::setprecision(17);
    const auto& p = sys.params;
    const auto& b = sys.bounds;
    os << "v1|" << p.M << '|' << p.R_w << '|' << p.rho << '|' << p.A << '|' << p.C_r << '|' << p.C_v << '|' << p.C_x0
       << '|' << p.C_x1 << '|' << p.C_x2 << '|' << p.g << '|' << b.t_s << '|' << b.d_min << '|' << b.v_max << '|'
       << b.T_min << '|' << b.T_max << '|' << b.a_min << '|' << b.a_max << '|' << sys.theta_lo << '|' << sys.theta_hi
       << '|' << sys.half_drag_shrink << '|' << opts.grid_step << '|' << opts.max_iter << '|' << opts.tol;
    const std::string s = os.str();
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

void save_family(const std::filesystem::path& dir, const InvariantFamily& fam, std::uint64_t hash) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    nlohmann::ordered_json m;
    std::ostringstream hs;
    hs << std::hex << std::setw(16) << std::setfill('0') << hash;
    m["hash"] = hs.str();
    m["a_min"] = fam.sys.bounds.a_min;
    m["a_max"] = fam.sys.bounds.a_max;
    m["d_min"] = fam.sys.bounds.d_min;
    m["v_max"] = fam.sys.bounds.v_max;
    m["T_min"] = fam.sys.bounds.T_min;
    m["T_max"] = fam.sys.bounds.T_max;
    m["t_s"] = fam.sys.bounds.t_s;
    m["u_lo"] = fam.sys.u_lo;
    m["u_hi"] = fam.sys.u_hi;
    m["grid_step"] = fam.grid_step;
    m["base_iterations"] = fam.base_iterations;
    m["converged"] = fam.converged;
    auto& slices = m["slices"];
    slices = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < fam.grid.size(); ++i) {
        std::ostringstream name;
        name << "slice_" << std::setw(3) << std::setfill('0') << i << ".poly";
        save_polytope(dir / name.str(), fam.slices[i]);
        slices.push_back({{"v_f", fam.grid[i]}, {"file", name.str()}, {"rows", fam.slices[i].rows()}});
    }
    std::ofstream os(dir / "manifest.json", std::ios::binary);
    if (!os) throw IoError("cannot write " + (dir / "manifest.json").string());
    os << m.dump(2) << '\n';
}

std::optional<InvariantFamily> load_family(const std::filesystem::path& dir, const LinearPlatoonSystem& sys,
                                           std::uint64_t hash) {
    std::ifstream is(dir / "manifest.json");
    if (!is) return std::nullopt;
    nlohmann::json m;
    try {
        is >> m;
        std::ostringstream hs;
        hs << std::hex << std::setw(16) << std::setfill('0') << hash;
        if (m.at("hash").get<std::string>() != hs.str()) return std::nullopt;
        InvariantFamily fam;
        fam.sys = sys;
        fam.grid_step = m.at("grid_step").get<double>();
        fam.base_iterations = m.at("base_iterations").get<int>();
        fam.converged = m.at("converged").get<bool>();
        for (const auto& s : m.at("slices")) {
            fam.grid.push_back(s.at("v_f").get<double>());
            fam.slices.push_back(load_polytope(dir / s.at("file").get<std::string>()));
        }
        if (fam.grid.empty()) return std::nullopt;
        return fam;
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    } catch (const Error&) {
        return std::nullopt;
    }
}

InvariantFamily compute_invariant_family_cached(const LinearPlatoonSystem& sys, const InvariantOptions& opts,
                                                const std::filesystem::path& cache_dir) {
    const std::uint64_t h = family_hash(sys, opts);
    std::ostringstream name;
    name << "family_" << std::hex << std::setw(16) << std::setfill('0') << h;
    const auto dir = cache_dir / name.str();
    if (auto fam = load_family(dir, sys, h)) return *fam;
    InvariantFamily fam = compute_invariant_family(sys, opts);
    // A concurrent writer may race us; write to a private directory and rename.
    const auto tmp = cache_dir / (name.str() + ".tmp" + std::to_string(reinterpret_cast<std::uintptr_t>(&fam)));
    save_family(tmp, fam, h);
    std::error_code ec;
    std::filesystem::rename(tmp, dir, ec);
    if (ec) std::filesystem::remove_all(tmp, ec);
    return fam;
}

bool analytic_safe(const LinearPlatoonSystem& sys, double d, double v, double v_f) {
    const auto& b = sys.bounds;
    if (!(d >= b.d_min && v >= 0.0 && v <= b.v_max)) return false;
    const double dv = sys.beta * sys.u_lo;  // < 0
    const double dvf = b.t_s * b.a_min;     // < 0
    while (v > 0.0 || v_f > 0.0) {
        d += b.t_s * (v_f - v);
        v = std::max(v + dv, 0.0);
        v_f = std::max(v_f + dvf, 0.0);
        if (d < b.d_min) return false;
    }
    return true;
}

const Polytope& terminal_halfspaces(const InvariantFamily& fam, double v_f_worst) {
    return fam.slice_for(std::clamp(v_f_worst, 0.0, fam.sys.bounds.v_max));
}

double safe_input(const VehicleParams& params, const RoadProfile& road, const PlatoonState& x, double u_linear) {
    return u_linear + params.R_w * road_load(params, road, x.v, Gap(x.d));
}

std::optional<InputInterval> admissible_inputs(const InvariantFamily& fam, const PlatoonState& x, double tol) {
    const auto& b = fam.sys.bounds;
    const double d_next = x.d + b.t_s * (x.v_f - x.v);
    const double vf_next = std::max(x.v_f + b.t_s * b.a_min, 0.0);
    const Polytope& S = fam.slice_for(vf_next);
    double lo = fam.sys.u_lo, hi = fam.sys.u_hi;
    for (Eigen::Index i = 0; i < S.rows(); ++i) {
        const double a_d = S.A()(i, 0), a_v = S.A()(i, 1);
        const double rhs = S.b()(i) + tol - a_d * d_next - a_v * x.v;
        const double coef = a_v * fam.sys.beta;
        if (std::abs(coef) < 1e-15) {
            if (rhs < 0.0) return std::nullopt;
        } else if (coef > 0.0) {
            hi = std::min(hi, rhs / coef);
        } else {
            lo = std::max(lo, rhs / coef);
        }
    }
    if (lo > hi) return std::nullopt;
    return InputInterval{lo, hi};
}

double invariant_policy(const InvariantFamily& fam, const PlatoonState& x) {
    const auto r = admissible_inputs(fam, x);
    return r ? r->hi : fam.sys.u_lo;
}

}  // namespace cacc
