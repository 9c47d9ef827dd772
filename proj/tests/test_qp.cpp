#include <cacc/qp.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace cacc;

TEST(Qp, UnconstrainedMinimum) {
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(2, 2) * 2.0;
    Eigen::VectorXd f(2);
    f << -2, -4;
    Eigen::MatrixXd C(0, 2);
    Eigen::VectorXd d(0);
    auto r = qp::solve(H, f, C, d);
    ASSERT_EQ(r.status, qp::Status::Optimal);
    EXPECT_NEAR(r.x(0), 1.0, 1e-12);
    EXPECT_NEAR(r.x(1), 2.0, 1e-12);
}

TEST(Qp, SingleActiveBound) {
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(1, 1);
    Eigen::VectorXd f(1);
    f << -3;
    Eigen::MatrixXd C(1, 1);
    C << 1;
    Eigen::VectorXd d(1);
    d << 1;
    auto r = qp::solve(H, f, C, d);
    ASSERT_EQ(r.status, qp::Status::Optimal);
    EXPECT_NEAR(r.x(0), 1.0, 1e-12);
    ASSERT_EQ(r.active.size(), 1u);
}

TEST(Qp, DetectsInfeasible) {
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(1, 1);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(1);
    Eigen::MatrixXd C(2, 1);
    C << 1, -1;
    Eigen::VectorXd d(2);
    d << 0, -1;
    EXPECT_EQ(qp::solve(H, f, C, d).status, qp::Status::Infeasible);
}

TEST(Qp, RejectsIndefiniteHessian) {
    Eigen::MatrixXd H = -Eigen::MatrixXd::Identity(2, 2);
    EXPECT_THROW(qp::solve(H, Eigen::VectorXd::Zero(2), Eigen::MatrixXd(0, 2), Eigen::VectorXd(0)),
                 std::invalid_argument);
}

TEST(Qp, MatchesActiveSetEnumeration) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> N(0.0, 1.0);
    int compared = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 2 + trial % 3, m = 6;
        Eigen::MatrixXd L(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) L(i, j) = N(rng);
        Eigen::MatrixXd H = L * L.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
        Eigen::VectorXd f(n), d(m);
        Eigen::MatrixXd C(m, n);
        for (int j = 0; j < n; ++j) f(j) = 3 * N(rng);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) C(i, j) = N(rng);
            d(i) = N(rng);
        }
        auto ref = oracle::qp_enumerate(H, f, C, d);
        auto r = qp::solve(H, f, C, d);
        if (!ref) {
            EXPECT_EQ(r.status, qp::Status::Infeasible) << "trial " << trial;
            continue;
        }
        ASSERT_EQ(r.status, qp::Status::Optimal) << "trial " << trial;
        EXPECT_LE((C * r.x - d).maxCoeff(), 1e-7);
        double v_ref = 0.5 * ref->dot(H * *ref) + f.dot(*ref);
        EXPECT_NEAR(r.objective, v_ref, 1e-7 * (1 + std::abs(v_ref)));
        EXPECT_NEAR((r.x - *ref).norm(), 0.0, 1e-5);
        ++compared;
    }
    EXPECT_GT(compared, 50);
}
