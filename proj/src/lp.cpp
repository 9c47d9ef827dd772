#include "cacc/lp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace cacc::lp {
namespace {

constexpr double kPivotTol = 1e-10;
constexpr double kCostTol = 1e-10;
constexpr double kPhaseOneTol = 1e-9;

enum class DualStatus { Optimal, Infeasible, Unbounded };

struct DualSolution {
    DualStatus status = DualStatus::Infeasible;
    double value = 0.0;
    std::vector<int> basic;  // constraint indices (columns of the dual) in the final basis
};

// Dense tableau over the dual problem  min b'y  s.t.  A'y = c, y >= 0.
class DualTableau {
public:
    DualTableau(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c)
        : m_(static_cast<int>(A.rows())), n_(static_cast<int>(A.cols())), b_(b) {
        // columns: m dual variables, n artificials, then rhs
        T_.setZero(n_, m_ + n_ + 1);
        basis_.resize(n_);
        for (int j = 0; j < n_; ++j) {
            const double sign = c(j) < 0.0 ? -1.0 : 1.0;
            T_.row(j).head(m_) = sign * A.col(j).transpose();
            T_(j, m_ + j) = 1.0;
            T_(j, m_ + n_) = sign * c(j);
            basis_[j] = m_ + j;
        }
        active_row_.assign(n_, true);
    }

    DualSolution solve() {
        DualSolution out;
        // phase 1: minimize the sum of artificials
        Eigen::VectorXd cost = Eigen::VectorXd::Zero(m_ + n_);
        cost.tail(n_).setOnes();
        if (!run(cost, /*allow_artificial=*/true)) {
            // cannot happen in phase 1 (objective bounded below by 0)
            out.status = DualStatus::Infeasible;
            return out;
        }
        double infeas = 0.0;
        for (int j = 0; j < n_; ++j)
            if (active_row_[j] && basis_[j] >= m_) infeas += T_(j, m_ + n_);
        if (infeas > kPhaseOneTol) {
            out.status = DualStatus::Infeasible;
            return out;
        }
        drive_out_artificials();

        Eigen::VectorXd cost2 = Eigen::VectorXd::Zero(m_ + n_);
        cost2.head(m_) = b_;
        if (!run(cost2, /*allow_artificial=*/false)) {
            out.status = DualStatus::Unbounded;
            return out;
        }
        out.status = DualStatus::Optimal;
        double value = 0.0;
        for (int j = 0; j < n_; ++j) {
            if (!active_row_[j]) continue;
            if (basis_[j] < m_) {
                value += b_(basis_[j]) * T_(j, m_ + n_);
                out.basic.push_back(basis_[j]);
            }
        }
        out.value = value;
        return out;
    }

private:
    // Runs simplex iterations for the given cost vector. Returns false on an
    // unbounded direction.
    bool run(const Eigen::VectorXd& cost, bool allow_artificial) {
        const int ncols = allow_artificial ? m_ + n_ : m_;
        const int max_iter = 50 * (m_ + n_) + 100;
        for (int iter = 0; iter < max_iter; ++iter) {
            // reduced costs, Bland: lowest index with negative reduced cost
            int enter = -1;
            for (int k = 0; k < ncols; ++k) {
                if (is_basic(k)) continue;
                double r = cost(k);
                for (int j = 0; j < n_; ++j)
                    if (active_row_[j]) r -= cost(basis_[j]) * T_(j, k);
                if (r < -kCostTol) {
                    enter = k;
                    break;
                }
            }
            if (enter < 0) return true;

            int leave = -1;
            double best = std::numeric_limits<double>::infinity();
            for (int j = 0; j < n_; ++j) {
                if (!active_row_[j]) continue;
                const double a = T_(j, enter);
                if (a <= kPivotTol) continue;
                const double ratio = T_(j, m_ + n_) / a;
                if (ratio < best - 1e-14 ||
                    (std::abs(ratio - best) <= 1e-14 && leave >= 0 && basis_[j] < basis_[leave])) {
                    best = ratio;
                    leave = j;
                }
            }
            if (leave < 0) return false;
            pivot(leave, enter);
        }
        return true;  // iteration cap; degenerate cycling is prevented by Bland
    }

    void drive_out_artificials() {
        for (int j = 0; j < n_; ++j) {
            if (!active_row_[j] || basis_[j] < m_) continue;
            int col = -1;
            for (int k = 0; k < m_; ++k) {
                if (!is_basic(k) && std::abs(T_(j, k)) > kPivotTol) {
                    col = k;
                    break;
                }
            }
            if (col >= 0)
                pivot(j, col);
            else
                active_row_[j] = false;  // redundant equality row
        }
    }

    void pivot(int row, int col) {
        T_.row(row) /= T_(row, col);
        for (int j = 0; j < n_; ++j) {
            if (j == row) continue;
            const double f = T_(j, col);
            if (f != 0.0) T_.row(j) -= f * T_.row(row);
        }
        basis_[row] = col;
    }

    bool is_basic(int k) const {
        for (int j = 0; j < n_; ++j)
            if (active_row_[j] && basis_[j] == k) return true;
        return false;
    }

    int m_;
    int n_;
    Eigen::VectorXd b_;
    Eigen::MatrixXd T_;
    std::vector<int> basis_;
    std::vector<bool> active_row_;
};

DualSolution solve_dual(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
    DualTableau tab(A, b, c);
    return tab.solve();
}

}  // namespace

double min_uniform_violation(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
    const Eigen::Index m = A.rows();
    const Eigen::Index n = A.cols();
    if (m == 0) return -1.0;
    // variables (x, s): maximize -s  s.t.  A x - s <= b,  -s <= 1
    Eigen::MatrixXd Aa = Eigen::MatrixXd::Zero(m + 1, n + 1);
    Aa.topLeftCorner(m, n) = A;
    Aa.col(n).head(m).setConstant(-1.0);
    Aa(m, n) = -1.0;
    Eigen::VectorXd ba(m + 1);
    ba.head(m) = b;
    ba(m) = 1.0;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n + 1);
    c(n) = -1.0;
    const DualSolution sol = solve_dual(Aa, ba, c);
    // The dual of this problem is always feasible and bounded.
    if (sol.status != DualStatus::Optimal) return std::numeric_limits<double>::infinity();
    return -sol.value;
}

bool is_feasible(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double tol) {
    return min_uniform_violation(A, b) <= tol;
}

Result maximize(const Eigen::VectorXd& c, const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
    Result out;
    const DualSolution sol = solve_dual(A, b, c);
    if (sol.status == DualStatus::Unbounded) {
        out.status = Status::Infeasible;
        return out;
    }
    if (sol.status == DualStatus::Infeasible) {
        out.status = is_feasible(A, b) ? Status::Unbounded : Status::Infeasible;
        if (out.status == Status::Unbounded) out.value = std::numeric_limits<double>::infinity();
        return out;
    }
    out.status = Status::Optimal;
    out.value = sol.value;
    // complementary slackness: basic dual columns are tight primal rows
    const Eigen::Index n = A.cols();
    if (!sol.basic.empty()) {
        Eigen::MatrixXd Ab(static_cast<Eigen::Index>(sol.basic.size()), n);
        Eigen::VectorXd bb(static_cast<Eigen::Index>(sol.basic.size()));
        for (std::size_t i = 0; i < sol.basic.size(); ++i) {
            Ab.row(static_cast<Eigen::Index>(i)) = A.row(sol.basic[i]);
            bb(static_cast<Eigen::Index>(i)) = b(sol.basic[i]);
        }
        out.x = Ab.completeOrthogonalDecomposition().solve(bb);
    } else {
        out.x = Eigen::VectorXd::Zero(n);
    }
    return out;
}

}  // namespace cacc::lp
