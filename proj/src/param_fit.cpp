#include <cacc/errors.hpp>
#include <cacc/param_fit.hpp>
#include <cacc/qp.hpp>
#include <cacc/trajectory.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace cacc {

namespace {

constexpr int kParams = 5;

Eigen::VectorXd to_vec(const DragCoefficients& c) {
    Eigen::VectorXd x(kParams);
    x << c.C_r, c.C_v, c.C_x0, c.C_x1, c.C_x2;
    return x;
}

DragCoefficients from_vec(const Eigen::VectorXd& x) { return {x(0), x(1), x(2), x(3), x(4)}; }

double drag_factor(const DragCoefficients& c, double d) {
    return std::isinf(d) ? c.C_x0 : c.C_x0 * (1.0 - c.C_x1 / (d + c.C_x2));
}

// Residuals and their Jacobian with respect to (C_r, C_v, C_x0, C_x1, C_x2).
void residuals(const VehicleParams& p, const std::vector<DriveLogSample>& xs, const Eigen::VectorXd& th,
               Eigen::VectorXd& r, Eigen::MatrixXd* J) {
    const DragCoefficients c = from_vec(th);
    const Eigen::Index n = static_cast<Eigen::Index>(xs.size());
    r.resize(n);
    if (J) J->resize(n, kParams);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = xs[static_cast<std::size_t>(i)];
        const double q = 0.5 * p.rho * p.A * s.v * s.v;
        r(i) = force_residual(p, c, s);
        if (!J) continue;
        (*J)(i, 0) = -p.M * p.g;
        (*J)(i, 1) = -s.v;
        if (std::isinf(s.d_target)) {
            (*J)(i, 2) = -q;
            (*J)(i, 3) = 0.0;
            (*J)(i, 4) = 0.0;
        } else {
            const double den = s.d_target + c.C_x2;
            (*J)(i, 2) = -q * (1.0 - c.C_x1 / den);
            (*J)(i, 3) = q * c.C_x0 / den;
            (*J)(i, 4) = -q * c.C_x0 * c.C_x1 / (den * den);
        }
    }
}

std::vector<std::string> split_cells(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

}  // namespace

std::vector<DriveLogSample> load_drive_log(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read " + path.string());
    std::string line;
    if (!std::getline(is, line)) throw IoError(path.string() + ": empty file");
    const auto header = split_cells(line);
    const std::vector<std::string> expected{"k", "v", "a", "F_w", "d_target", "mode", "theta"};
    if (header != expected) throw ConfigError(path.string() + ": expected header k,v,a,F_w,d_target,mode,theta");
    std::vector<DriveLogSample> out;
    long lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto c = split_cells(line);
        if (c.size() != 7) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected 7 fields");
        DriveLogSample s;
        s.k = std::stol(c[0]);
        s.v = parse_double(c[1]);
        s.a = parse_double(c[2]);
        s.F_w = parse_double(c[3]);
        s.d_target = parse_double(c[4]);
        s.mode = parse_mode(c[5]);
        s.theta = parse_double(c[6]);
        if (!std::isfinite(s.v) || !std::isfinite(s.a) || !std::isfinite(s.F_w) || !std::isfinite(s.theta))
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": non-finite value");
        out.push_back(s);
    }
    return out;
}

void save_drive_log(const std::filesystem::path& path, const std::vector<DriveLogSample>& samples) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    os << "k,v,a,F_w,d_target,mode,theta\n";
    for (const auto& s : samples)
        os << s.k << ',' << format_double(s.v) << ',' << format_double(s.a) << ',' << format_double(s.F_w) << ','
           << format_double(s.d_target) << ',' << to_string(s.mode) << ',' << format_double(s.theta) << '\n';
}

Clusters cluster(const std::vector<DriveLogSample>& samples, const std::optional<std::vector<double>>& labels) {
    if (samples.empty()) throw DomainError("cluster: no samples");
    Clusters out;
    for (const auto& s : samples) {
        if (labels && std::find(labels->begin(), labels->end(), s.d_target) == labels->end())
            throw UnknownLabel("gap label " + format_double(s.d_target) + " is not in the declared set");
        out[{s.d_target, s.mode}].push_back(s);
    }
    return out;
}

Split split(const std::vector<DriveLogSample>& samples, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw DomainError("split: fraction must lie strictly in (0, 1)");
    Split out;
    if (samples.empty()) return out;
    std::mt19937_64 rng(seed);
    for (auto& [key, members] : cluster(samples)) {
        const std::size_t n = members.size();
        // Fisher-Yates with a plain modulo draw keeps the permutation identical across standard libraries.
        for (std::size_t i = n; i > 1; --i) std::swap(members[i - 1], members[rng() % i]);
        std::size_t n_train = n;
        if (n >= 2) {
            n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
            n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
        }
        out.train.insert(out.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
        out.validation.insert(out.validation.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train),
                              members.end());
    }
    return out;
}

double force_residual(const VehicleParams& p, const DragCoefficients& c, const DriveLogSample& s) {
    return s.F_w - p.M * s.a - p.M * p.g * c.C_r - c.C_v * s.v - 0.5 * p.rho * p.A * drag_factor(c, s.d_target) * s.v * s.v;
}

FitResult fit(const std::vector<DriveLogSample>& train, const VehicleParams& known, const DragCoefficients& initial,
              const FitOptions& opts) {
    if (train.empty()) throw DomainError("fit: empty training set");
    double min_label = std::numeric_limits<double>::infinity();
    for (const auto& s : train) {
        if (s.theta != 0.0) throw DomainError("fit: nonzero grade in training data; fitting assumes a flat road");
        min_label = std::min(min_label, s.d_target);
    }
    if (min_label < 0.0) throw DomainError("fit: negative gap label");

    // theta >= 0 componentwise and C_x1 - C_x2 <= min(0, smallest label), which keeps C_x >= 0 on every gap >= 0.
    int n_fixed = 0;
    for (bool f : opts.fixed) n_fixed += f ? 1 : 0;
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(kParams + 1 + 2 * n_fixed, kParams);
    Eigen::VectorXd h = Eigen::VectorXd::Zero(kParams + 1 + 2 * n_fixed);
    for (int j = 0; j < kParams; ++j) G(j, j) = -1.0;
    G(kParams, 3) = 1.0;
    G(kParams, 4) = -1.0;
    h(kParams) = std::isinf(min_label) ? 0.0 : std::min(0.0, min_label);
    // fixed coefficients are pinned by a pair of opposing rows
    for (int j = 0, r = kParams + 1; j < kParams; ++j)
        if (opts.fixed[static_cast<std::size_t>(j)]) {
            G(r++, j) = 1.0;
            G(r++, j) = -1.0;
        }

    FitResult out;
    Eigen::VectorXd th = to_vec(initial);
    {
        // project the initial guess onto the feasible set
        for (int j = 0; j < kParams; ++j) th(j) = std::max(th(j), 0.0);
        if (th(3) - th(4) > h(kParams)) th(3) = std::max(0.0, th(4) + h(kParams));
        for (int j = 0, r = kParams + 1; j < kParams; ++j)
            if (opts.fixed[static_cast<std::size_t>(j)]) {
                h(r++) = th(j);
                h(r++) = -th(j);
            }
    }

    Eigen::VectorXd r;
    Eigen::MatrixXd J;
    residuals(known, train, th, r, &J);
    double cost = r.squaredNorm();
    out.initial_cost = cost;
    out.cost_history.push_back(cost);

    for (int it = 0; it < opts.max_iter; ++it) {
        out.iterations = it + 1;
        Eigen::VectorXd scale = J.colwise().norm().transpose();
        for (int j = 0; j < kParams; ++j)
            if (!(scale(j) > 0.0)) scale(j) = 1.0;
        const Eigen::MatrixXd Js = J * scale.cwiseInverse().asDiagonal();
        if (it == 0 && n_fixed < kParams) {
            Eigen::MatrixXd free_cols(Js.rows(), kParams - n_fixed);
            for (int j = 0, c = 0; j < kParams; ++j)
                if (!opts.fixed[static_cast<std::size_t>(j)]) free_cols.col(c++) = Js.col(j);
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(free_cols);
            const auto sv = svd.singularValues();
            if (!(sv(sv.size() - 1) > 1e-10 * sv(0))) {
                out.rank_deficient = true;
                out.warnings.push_back("Jacobian is rank deficient; some coefficients are not identifiable from this data");
            }
        }
        // Step z in scaled variables: theta + z ./ scale must stay feasible.
        const Eigen::MatrixXd H = Js.transpose() * Js + opts.damping * Eigen::MatrixXd::Identity(kParams, kParams);
        const Eigen::VectorXd g = Js.transpose() * r;
        const Eigen::MatrixXd Gs = G * scale.cwiseInverse().asDiagonal();
        const Eigen::VectorXd hs = h - G * th;
        const auto sol = qp::solve(H, g, Gs, hs);
        if (sol.status != qp::Status::Optimal) {
            out.warnings.push_back("step subproblem failed; stopping at best iterate");
            break;
        }
        const Eigen::VectorXd step = sol.x.cwiseQuotient(scale);
        const double slope = 2.0 * g.dot(sol.x);  // d/dalpha of ||r||^2
        if (!(-slope > opts.gradient_tol * std::max(1.0, cost))) {
            out.converged = true;
            break;
        }
        double alpha = 1.0;
        bool accepted = false;
        Eigen::VectorXd r_new;
        for (int ls = 0; ls < 60; ++ls) {
            const Eigen::VectorXd cand = th + alpha * step;
            residuals(known, train, cand, r_new, nullptr);
            const double c_new = r_new.squaredNorm();
            if (c_new <= cost + 1e-4 * alpha * slope) {
                th = cand;
                cost = c_new;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            out.converged = true;  // no further decrease representable
            break;
        }
        out.cost_history.push_back(cost);
        residuals(known, train, th, r, &J);
    }
    if (!out.converged) out.warnings.push_back("iteration limit reached; reporting best iterate");

    out.coef = from_vec(th);
    out.train_cost = cost;
    for (const auto& [key, members] : cluster(train)) {
        double s = 0.0;
        for (const auto& m : members) {
            const double e = force_residual(known, out.coef, m);
            s += e * e;
        }
        out.per_cluster_cost[key] = s;
    }
    return out;
}

TorqueSeries torque_series(const VehicleParams& known, const DragCoefficients& c,
                           const std::vector<DriveLogSample>& samples) {
    TorqueSeries t;
    for (const auto& s : samples) {
        const double predicted_force = s.F_w - force_residual(known, c, s);
        t.predicted.push_back(predicted_force * known.R_w);
        t.measured.push_back(s.F_w * known.R_w);
    }
    return t;
}

std::vector<double> validate(FitResult& fit, const VehicleParams& known, const std::vector<DriveLogSample>& validation) {
    if (validation.empty()) throw DomainError("validate: empty validation set");
    const auto t = torque_series(known, fit.coef, validation);
    std::vector<double> e(t.measured.size());
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = t.measured[i] - t.predicted[i];
    fit.validation_rms = rms(e);
    return normalized_residuals(t.predicted, t.measured);
}

VehicleParams with_coefficients(VehicleParams p, const DragCoefficients& c) {
    p.C_r = c.C_r;
    p.C_v = c.C_v;
    p.C_x0 = c.C_x0;
    p.C_x1 = c.C_x1;
    p.C_x2 = c.C_x2;
    return p;
}

void write_fit_report(std::ostream& os, const FitResult& f, std::size_t n_train, std::size_t n_validation) {
    os << "samples: train " << n_train << ", validation " << n_validation << '\n';
    os << "iterations: " << f.iterations << (f.converged ? " (converged)" : " (not converged)") << '\n';
    os << "C_r  = " << format_double(f.coef.C_r) << '\n';
    os << "C_v  = " << format_double(f.coef.C_v) << '\n';
    os << "C_x0 = " << format_double(f.coef.C_x0) << '\n';
    os << "C_x1 = " << format_double(f.coef.C_x1) << '\n';
    os << "C_x2 = " << format_double(f.coef.C_x2) << '\n';
    os << "train cost [N^2]: " << format_double(f.train_cost) << " (initial " << format_double(f.initial_cost) << ")\n";
    os << "validation torque residual RMS [N m]: " << format_double(f.validation_rms) << '\n';
    os << "per-cluster cost:\n";
    for (const auto& [key, c] : f.per_cluster_cost)
        os << "  gap " << format_double(key.first) << " " << to_string(key.second) << ": " << format_double(c) << '\n';
    for (const auto& w : f.warnings) os << "warning: " << w << '\n';
}

}  // namespace cacc
