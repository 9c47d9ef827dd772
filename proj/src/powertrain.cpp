#include <cacc/errors.hpp>
#include <cacc/powertrain.hpp>
#include <cacc/trajectory.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace cacc {

std::string to_string(PowertrainMode mode) { return mode == PowertrainMode::FE ? "FE" : "FC"; }

PowertrainMode parse_mode(const std::string& text) {
    if (text == "FE" || text == "fe") return PowertrainMode::FE;
    if (text == "FC" || text == "fc") return PowertrainMode::FC;
    throw ConfigError("unknown powertrain mode '" + text + "'");
}

namespace {

void check_axis(const std::vector<double>& axis, const char* what) {
    if (axis.empty()) throw ConfigError(std::string(what) + " axis is empty");
    for (std::size_t i = 1; i < axis.size(); ++i)
        if (!(axis[i] > axis[i - 1])) throw ConfigError(std::string(what) + " axis not strictly increasing");
    for (std::size_t i = 0; i + 1 < axis.size(); ++i)
        if (!std::isfinite(axis[i])) throw ConfigError(std::string(what) + " axis has a non-finite interior value");
}

// Bracketing cell and weight along one axis. Returns false outside the hull.
bool bracket(const std::vector<double>& axis, double x, std::size_t& i, double& w) {
    const std::size_t n = axis.size();
    if (std::isinf(axis.back()) && std::isinf(x) && x > 0) {
        i = n - 1;
        w = 0.0;
        return true;
    }
    const std::size_t last = std::isinf(axis.back()) ? n - 2 : n - 1;
    if (!(x >= axis.front() && x <= axis[last])) return false;
    if (last == 0) {
        i = 0;
        w = 0.0;
        return true;
    }
    auto it = std::upper_bound(axis.begin(), axis.begin() + static_cast<std::ptrdiff_t>(last) + 1, x);
    std::size_t hi = static_cast<std::size_t>(it - axis.begin());
    if (hi > last) hi = last;
    if (hi == 0) hi = 1;
    i = hi - 1;
    w = (x - axis[i]) / (axis[hi] - axis[i]);
    return true;
}

std::vector<double> split_row(const std::string& line) {
    std::vector<double> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(parse_double(cell));
    return out;
}

}  // namespace

Grid2D::Grid2D(std::vector<double> rows, std::vector<double> cols, std::vector<double> values)
    : rows_(std::move(rows)), cols_(std::move(cols)), values_(std::move(values)) {
    check_axis(rows_, "row");
    check_axis(cols_, "column");
    if (values_.size() != rows_.size() * cols_.size()) throw ConfigError("grid body size does not match axes");
}

bool Grid2D::in_hull(double r, double c) const {
    std::size_t i, j;
    double wi, wj;
    return !rows_.empty() && bracket(rows_, r, i, wi) && bracket(cols_, c, j, wj);
}

double Grid2D::interpolate(double r, double c) const {
    std::size_t i, j;
    double wi, wj;
    if (rows_.empty() || !bracket(rows_, r, i, wi) || !bracket(cols_, c, j, wj)) {
        std::ostringstream msg;
        msg << "query (" << r << ", " << c << ") outside table hull";
        throw OutOfHull(msg.str());
    }
    const std::size_t i1 = std::min(i + 1, rows_.size() - 1), j1 = std::min(j + 1, cols_.size() - 1);
    auto term = [](double w, double a, double b) { return w == 0.0 ? a : (1.0 - w) * a + w * b; };
    return term(wi, term(wj, at(i, j), at(i, j1)), term(wj, at(i1, j), at(i1, j1)));
}

Grid2D Grid2D::read_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read " + path.string());
    std::string line;
    std::vector<double> rows, cols, values;
    bool first = true;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (first) {
            auto comma = line.find(',');
            if (comma == std::string::npos) throw ConfigError(path.string() + ": header has no column axis");
            cols = split_row(line.substr(comma + 1));
            first = false;
            continue;
        }
        auto cells = split_row(line);
        if (cells.size() != cols.size() + 1)
            throw ConfigError(path.string() + ": row width does not match header");
        rows.push_back(cells[0]);
        values.insert(values.end(), cells.begin() + 1, cells.end());
    }
    return Grid2D(rows, cols, values);
}

void Grid2D::write_csv(const std::filesystem::path& path, const std::string& corner_label) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    os << corner_label;
    for (double c : cols_) os << ',' << format_double(c);
    os << '\n';
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        os << format_double(rows_[i]);
        for (std::size_t j = 0; j < cols_.size(); ++j) os << ',' << format_double(at(i, j));
        os << '\n';
    }
}

EfficiencyMap EfficiencyMap::constant(double eta) {
    if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("efficiency must lie in (0, 1]");
    EfficiencyMap m;
    m.constant_ = eta;
    return m;
}

EfficiencyMap EfficiencyMap::from_grid(Grid2D grid, bool extrapolate) {
    for (std::size_t i = 0; i < grid.row_axis().size(); ++i)
        for (std::size_t j = 0; j < grid.col_axis().size(); ++j) {
            double e = grid.at(i, j);
            if (!(e > 0.0 && e <= 1.0)) throw ConfigError("efficiency map node outside (0, 1]");
        }
    EfficiencyMap m;
    m.grid_ = std::move(grid);
    m.extrapolate_ = extrapolate;
    return m;
}

double EfficiencyMap::eval(double torque, double speed) const {
    if (constant_) return *constant_;
    if (extrapolate_) {
        const auto& r = grid_.row_axis();
        const auto& c = grid_.col_axis();
        torque = std::clamp(torque, r.front(), r.back());
        speed = std::clamp(speed, c.front(), c.back());
    }
    return grid_.interpolate(torque, speed);
}

void PowertrainConfig::validate() const {
    if (!(r_g > 0.0)) throw ConfigError("gear ratio must be positive");
    if (!(P_a >= 0.0)) throw ConfigError("auxiliary power must be nonnegative");
}

PowerSplit instantaneous_power(const PowertrainConfig& cfg, PowertrainMode mode, double T_w, double omega_w) {
    const bool driving = T_w > 0.0 && omega_w > 0.0;
    const double wheel = driving ? T_w * omega_w : 0.0;
    PowerSplit out;
    if (mode == PowertrainMode::FE) {
        out.P_b = (driving ? wheel / cfg.eta_m.eval(T_w / cfg.r_g, omega_w * cfg.r_g) : 0.0) + cfg.P_a;
        out.P_f = cfg.P_a;
    } else {
        out.P_b = 0.0;
        out.P_f = driving ? wheel / cfg.eta_e.eval(T_w / cfg.r_g, omega_w * cfg.r_g) : 0.0;
    }
    return out;
}

EnergyTotals trajectory_energy(const PowertrainConfig& cfg, PowertrainMode mode, const TrajectoryLog& log,
                               std::size_t first, std::size_t last) {
    last = std::min(last, log.size());
    if (first >= last) throw DomainError("trajectory_energy: empty log window");
    EnergyTotals e;
    PowerSplit prev{};
    double prev_wheel = 0.0;
    for (std::size_t k = first; k < last; ++k) {
        const auto& r = log.records[k];
        const double omega = r.v / log.R_w;
        const double wheel = std::max(r.T_w * omega, 0.0);
        const PowerSplit p = instantaneous_power(cfg, mode, r.T_w, omega);
        if (k > first) {
            const double h = 0.5 * log.t_s;
            e.wheel += h * (prev_wheel + wheel);
            e.battery += h * (prev.P_b + p.P_b);
            e.fuel += h * (prev.P_f + p.P_f);
        }
        prev = p;
        prev_wheel = wheel;
    }
    return e;
}

double rms(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    double s = 0.0;
    for (double x : xs) s += x * x;
    return std::sqrt(s / static_cast<double>(xs.size()));
}

std::vector<double> normalized_residuals(std::span<const double> predicted, std::span<const double> measured) {
    if (predicted.size() != measured.size()) throw std::invalid_argument("normalized_residuals: length mismatch");
    if (predicted.size() < 2) throw DegenerateResidual("normalized_residuals: need at least two samples");
    std::vector<double> e(predicted.size());
    for (std::size_t i = 0; i < e.size(); ++i) e[i] = measured[i] - predicted[i];
    const double s = rms(e);
    if (!(s > 0.0)) throw DegenerateResidual("normalized_residuals: residual RMS is zero");
    for (double& x : e) x /= s;
    return e;
}

double energy_saving_lookup(const SavingsTable& table, double speed, double time_gap) {
    return std::clamp(table.grid.interpolate(speed, time_gap), -1.0, 1.0);
}

SavingsTable model_savings_table(const VehicleParams& params, const PowertrainConfig& cfg, PowertrainMode mode,
                                 const std::vector<double>& speeds, const std::vector<double>& time_gaps) {
    std::vector<double> cols = time_gaps;
    cols.push_back(std::numeric_limits<double>::infinity());
    const RoadProfile flat;
    auto consumption = [&](double v, Gap gap) {
        const double T = steady_torque(params, flat, v, gap);
        const PowerSplit p = instantaneous_power(cfg, mode, T, v / params.R_w);
        return mode == PowertrainMode::FE ? p.P_b : p.P_f;
    };
    std::vector<double> values;
    for (double v : speeds) {
        const double base = consumption(v, Gap::open_road());
        for (double tau : time_gaps) {
            const double c = consumption(v, Gap(v * tau));
            values.push_back(base > 0.0 ? 1.0 - c / base : 0.0);
        }
        values.push_back(0.0);
    }
    SavingsTable t;
    t.mode = mode;
    t.grid = Grid2D(speeds, cols, values);
    t.model_derived = true;
    return t;
}

}  // namespace cacc
