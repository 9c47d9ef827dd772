#include <cacc/errors.hpp>
#include <cacc/trajectory.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace cacc {

std::string to_string(SolveStatus s) {
    switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::MaxIter: return "max-iter";
    case SolveStatus::InfeasibleFallback: return "infeasible-fallback";
    case SolveStatus::OpenLoop: return "open-loop";
    }
    return "?";
}

SolveStatus parse_status(const std::string& s) {
    if (s == "optimal") return SolveStatus::Optimal;
    if (s == "max-iter") return SolveStatus::MaxIter;
    if (s == "infeasible-fallback") return SolveStatus::InfeasibleFallback;
    if (s == "open-loop") return SolveStatus::OpenLoop;
    throw ConfigError("unknown solver status '" + s + "'");
}

void TrajectoryLog::append(double d, double v, double v_f, double T_w, SolveStatus status) {
    TrajectoryRecord r;
    r.t = static_cast<double>(records.size()) * t_s;
    r.d = d;
    r.v = v;
    r.v_f = v_f;
    r.T_w = T_w;
    r.status = status;
    r.P_wheel = T_w * v / R_w;
    records.push_back(r);
}

std::string format_double(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (std::isnan(x)) return "nan";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& raw) {
    std::string s;
    for (char c : raw)
        if (!std::isspace(static_cast<unsigned char>(c))) s += c;
    if (s == "inf" || s == "+inf" || s == "Inf" || s == "INF") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double x = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ConfigError("not a number: '" + raw + "'");
    return x;
}

void write_csv(std::ostream& os, const TrajectoryLog& log) {
    os << "# label=" << log.label << '\n';
    os << "# t_s=" << format_double(log.t_s) << '\n';
    os << "# R_w=" << format_double(log.R_w) << '\n';
    for (const auto& [k, v] : log.meta) os << "# " << k << '=' << v << '\n';
    os << "t,d,v,v_f,T_w,P_wheel,status\n";
    for (const auto& r : log.records) {
        os << format_double(r.t) << ',' << format_double(r.d) << ',' << format_double(r.v) << ','
           << format_double(r.v_f) << ',' << format_double(r.T_w) << ',' << format_double(r.P_wheel) << ','
           << to_string(r.status) << '\n';
    }
}

void save_csv(const std::filesystem::path& path, const TrajectoryLog& log) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write " + path.string());
    write_csv(os, log);
    if (!os) throw IoError("write failed: " + path.string());
}

TrajectoryLog load_csv(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read " + path.string());
    TrajectoryLog log;
    std::string line;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line.rfind("# ", 0) == 0) {
            auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            std::string key = line.substr(2, eq - 2), value = line.substr(eq + 1);
            if (key == "label") log.label = value;
            else if (key == "t_s") log.t_s = parse_double(value);
            else if (key == "R_w") log.R_w = parse_double(value);
            else log.meta.emplace_back(key, value);
            continue;
        }
        if (!header) {
            header = true;
            continue;
        }
        std::stringstream ss(line);
        std::string cell[7];
        for (auto& c : cell) std::getline(ss, c, ',');
        TrajectoryRecord r;
        r.t = parse_double(cell[0]);
        r.d = parse_double(cell[1]);
        r.v = parse_double(cell[2]);
        r.v_f = parse_double(cell[3]);
        r.T_w = parse_double(cell[4]);
        r.P_wheel = parse_double(cell[5]);
        r.status = parse_status(cell[6]);
        log.records.push_back(r);
    }
    if (!header) throw IoError("no header in " + path.string());
    return log;
}

}  // namespace cacc
