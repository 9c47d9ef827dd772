#pragma once

// Brute-force reference solvers used only by tests.

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <vector>

namespace oracle {

inline void combinations(int m, int k, std::vector<int>& cur, int start, std::vector<std::vector<int>>& out) {
    if (static_cast<int>(cur.size()) == k) {
        out.push_back(cur);
        return;
    }
    for (int i = start; i < m; ++i) {
        cur.push_back(i);
        combinations(m, k, cur, i + 1, out);
        cur.pop_back();
    }
}

inline std::vector<std::vector<int>> subsets(int m, int k) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur;
    combinations(m, k, cur, 0, out);
    return out;
}

// Vertices of {x : A x <= b} by solving every n-subset of rows.
inline std::vector<Eigen::VectorXd> vertices(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double tol = 1e-8) {
    const int m = static_cast<int>(A.rows()), n = static_cast<int>(A.cols());
    std::vector<Eigen::VectorXd> out;
    for (const auto& s : subsets(m, n)) {
        Eigen::MatrixXd As(n, n);
        Eigen::VectorXd bs(n);
        for (int i = 0; i < n; ++i) {
            As.row(i) = A.row(s[i]);
            bs(i) = b(s[i]);
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(As);
        if (lu.rank() < n) continue;
        Eigen::VectorXd x = lu.solve(bs);
        if (((A * x - b).array() <= tol).all()) out.push_back(x);
    }
    return out;
}

// min 1/2 x'Hx + f'x s.t. Cx <= d by enumerating active sets and checking KKT.
inline std::optional<Eigen::VectorXd> qp_enumerate(const Eigen::MatrixXd& H, const Eigen::VectorXd& f,
                                                   const Eigen::MatrixXd& C, const Eigen::VectorXd& d) {
    const int n = static_cast<int>(H.rows()), m = static_cast<int>(C.rows());
    std::optional<Eigen::VectorXd> best;
    double best_val = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= std::min(n, m); ++k) {
        for (const auto& s : subsets(m, k)) {
            Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + k, n + k);
            Eigen::VectorXd rhs(n + k);
            K.topLeftCorner(n, n) = H;
            rhs.head(n) = -f;
            for (int i = 0; i < k; ++i) {
                K.block(0, n + i, n, 1) = C.row(s[i]).transpose();
                K.block(n + i, 0, 1, n) = C.row(s[i]);
                rhs(n + i) = d(s[i]);
            }
            Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
            if (lu.rank() < n + k) continue;
            Eigen::VectorXd z = lu.solve(rhs);
            Eigen::VectorXd x = z.head(n);
            if ((z.tail(k).array() < -1e-9).any()) continue;
            if (((C * x - d).array() > 1e-9).any()) continue;
            double val = 0.5 * x.dot(H * x) + f.dot(x);
            if (val < best_val) {
                best_val = val;
                best = x;
            }
        }
    }
    return best;
}

}  // namespace oracle
