#include "cacc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cacc::qp {

Result solve(const Eigen::MatrixXd& H, const Eigen::VectorXd& f, const Eigen::MatrixXd& C,
             const Eigen::VectorXd& d, const Options& opts) {
    const Eigen::Index n = H.rows();
    const Eigen::Index m = C.rows();
    Result out;

    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("qp::solve: H is not positive definite");
    const Eigen::MatrixXd Hinv = llt.solve(Eigen::MatrixXd::Identity(n, n));

    Eigen::VectorXd x = -Hinv * f;
    std::vector<int> active;
    std::vector<double> lambda;
    const int max_iter = opts.max_iter > 0 ? opts.max_iter : static_cast<int>(10 * (n + m) + 20);
    const double inf = std::numeric_limits<double>::infinity();

    auto objective = [&](const Eigen::VectorXd& z) { return 0.5 * z.dot(H * z) + f.dot(z); };

    int iter = 0;
    for (; iter < max_iter; ++iter) {
        // most violated constraint, scaled by row norm
        int p = -1;
        double worst = opts.feasibility_tol;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (std::find(active.begin(), active.end(), static_cast<int>(i)) != active.end()) continue;
            const double nrm = std::max(C.row(i).norm(), 1e-300);
            const double viol = (C.row(i).dot(x) - d(i)) / nrm;
            if (viol > worst) {
                worst = viol;
                p = static_cast<int>(i);
            }
        }
        if (p < 0) {
            out.status = Status::Optimal;
            break;
        }

        const Eigen::VectorXd cp = C.row(p).transpose();
        double lambda_p = 0.0;
        bool added = false;
        bool infeasible = false;
        while (!added && iter < max_iter) {
            ++iter;
            const auto q = static_cast<Eigen::Index>(active.size());
            Eigen::VectorXd r(q);
            Eigen::VectorXd z;
            if (q > 0) {
                Eigen::MatrixXd N(n, q);
                for (Eigen::Index j = 0; j < q; ++j) N.col(j) = C.row(active[static_cast<std::size_t>(j)]).transpose();
                const Eigen::MatrixXd HN = Hinv * N;
                const Eigen::MatrixXd S = N.transpose() * HN;
                r = S.ldlt().solve(HN.transpose() * cp);
                z = -(Hinv * cp - HN * r);
            } else {
                z = -(Hinv * cp);
            }

            // partial step: first active multiplier to hit zero
            double t1 = inf;
            Eigen::Index drop = -1;
            for (Eigen::Index j = 0; j < q; ++j) {
                if (r(j) > 1e-14) {
                    const double t = lambda[static_cast<std::size_t>(j)] / r(j);
                    if (t < t1) {
                        t1 = t;
                        drop = j;
                    }
                }
            }
            // full step: make constraint p tight
            const double cz = cp.dot(z);
            double t2 = inf;
            if (z.norm() > 1e-12 * (1.0 + x.norm()) && cz < -1e-16) t2 = (d(p) - cp.dot(x)) / cz;

            const double t = std::min(t1, t2);
            if (!std::isfinite(t)) {
                infeasible = true;
                break;
            }
            if (std::isfinite(t2)) x += t * z;
            for (Eigen::Index j = 0; j < q; ++j) lambda[static_cast<std::size_t>(j)] -= t * r(j);
            lambda_p += t;

            if (t2 <= t1) {
                active.push_back(p);
                lambda.push_back(lambda_p);
                added = true;
            } else {
                active.erase(active.begin() + drop);
                lambda.erase(lambda.begin() + drop);
            }
        }
        if (infeasible) {
            out.status = Status::Infeasible;
            out.x = x;
            out.iterations = iter;
            return out;
        }
    }
    if (iter >= max_iter && out.status != Status::Optimal) out.status = Status::MaxIter;

    out.x = x;
    out.objective = objective(x);
    out.active = active;
    out.iterations = iter;
    return out;
}

}  // namespace cacc::qp
