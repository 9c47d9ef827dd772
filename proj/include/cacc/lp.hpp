#pragma once

#include <Eigen/Dense>

namespace cacc::lp {

enum class Status { Optimal, Unbounded, Infeasible };

struct Result {
    Status status = Status::Infeasible;
    double value = 0.0;   // optimal objective when status == Optimal
    Eigen::VectorXd x;    // a maximizer (best effort when the optimal face is large)
};

// maximize c'x  subject to  A x <= b,  x free.
//
// Solved through the dual (min b'y, A'y = c, y >= 0) with a dense two-phase
// simplex and Bland's rule, so the tableau has only dim(x) rows and the
// pivot sequence is deterministic.
Result maximize(const Eigen::VectorXd& c, const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

// Smallest uniform slack s with A x <= b + s for some x, floored at -1.
// The system is feasible iff the value is <= tol.
double min_uniform_violation(const Eigen::MatrixXd& A, const Eigen::VectorXd& b);

bool is_feasible(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double tol = 1e-9);

}  // namespace cacc::lp
