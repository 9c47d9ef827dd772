#pragma once

#include <Eigen/Dense>
#include <vector>

namespace cacc::qp {

enum class Status { Optimal, Infeasible, MaxIter };

struct Result {
    Status status = Status::Infeasible;
    Eigen::VectorXd x;
    double objective = 0.0;
    std::vector<int> active;  // indices of constraints active at x
    int iterations = 0;
};

struct Options {
    double feasibility_tol = 1e-8;
    int max_iter = 0;  // 0 selects 10 * (n + m)
};

// minimize 1/2 x'Hx + f'x  subject to  C x <= d, with H positive definite.
//
// Dual active-set method of Goldfarb and Idnani: starts at the unconstrained
// minimizer and adds the most violated constraint each outer iteration. The
// projected directions are recomputed from the active set each step, which is
// cheap at MPC sizes and avoids factor-update drift.
Result solve(const Eigen::MatrixXd& H, const Eigen::VectorXd& f, const Eigen::MatrixXd& C,
             const Eigen::VectorXd& d, const Options& opts = {});

}  // namespace cacc::qp
