#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace cacc {

enum class SolveStatus { Optimal, MaxIter, InfeasibleFallback, OpenLoop };

std::string to_string(SolveStatus s);
SolveStatus parse_status(const std::string& s);

struct TrajectoryRecord {
    double t = 0.0;
    double d = 0.0;  // +inf for a vehicle with no predecessor
    double v = 0.0;
    double v_f = 0.0;
    double T_w = 0.0;
    SolveStatus status = SolveStatus::OpenLoop;
    double P_wheel = 0.0;  // T_w v / R_w, may be negative
};

// Uniformly sampled closed-loop record.
struct TrajectoryLog {
    std::string label;
    double t_s = 0.2;
    double R_w = 0.288;
    std::vector<std::pair<std::string, std::string>> meta;
    std::vector<TrajectoryRecord> records;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
    void append(double d, double v, double v_f, double T_w, SolveStatus status);
};

// Columns t,d,v,v_f,T_w,P_wheel,status preceded by "# key=value" metadata lines.
void write_csv(std::ostream& os, const TrajectoryLog& log);
void save_csv(const std::filesystem::path& path, const TrajectoryLog& log);
TrajectoryLog load_csv(const std::filesystem::path& path);

// Shortest round-trip text for a double; "inf"/"-inf" for infinities.
std::string format_double(double x);
double parse_double(const std::string& s);

}  // namespace cacc
