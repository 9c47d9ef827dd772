#include "cacc/polytope.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <vector>

#include "cacc/errors.hpp"
#include "cacc/lp.hpp"

namespace cacc {
namespace {

constexpr double kZeroRow = 1e-12;
constexpr double kRedundancyTol = 1e-9;
constexpr double kDuplicateTol = 1e-12;

void check_dim(const Polytope& P, const Polytope& Q, const char* op) {
    if (P.dim() != Q.dim())
        throw std::invalid_argument(std::string(op) + ": dimension mismatch");
}

Polytope drop_row(const Polytope& P, Eigen::Index skip, const std::vector<bool>& keep) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < P.rows(); ++i)
        if (i != skip && keep[static_cast<std::size_t>(i)]) idx.push_back(i);
    Eigen::MatrixXd A(static_cast<Eigen::Index>(idx.size()), P.dim());
    Eigen::VectorXd b(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
        A.row(static_cast<Eigen::Index>(k)) = P.A().row(idx[k]);
        b(static_cast<Eigen::Index>(k)) = P.b()(idx[k]);
    }
    return Polytope(std::move(A), std::move(b));
}

}  // namespace

Polytope::Polytope(Eigen::MatrixXd A, Eigen::VectorXd b)
    : dim_(static_cast<int>(A.cols())), A_(std::move(A)), b_(std::move(b)) {
    if (A_.rows() != b_.size()) throw std::invalid_argument("Polytope: A and b row counts differ");
    normalize();
}

void Polytope::normalize() {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < A_.rows(); ++i) {
        const double nrm = A_.row(i).norm();
        if (nrm <= kZeroRow) {
            if (b_(i) < -kRedundancyTol) known_empty_ = true;
            continue;
        }
        A_.row(i) /= nrm;
        b_(i) /= nrm;
        keep.push_back(i);
    }
    if (known_empty_) {
        A_ = Eigen::MatrixXd::Zero(1, dim_);
        b_ = Eigen::VectorXd::Constant(1, -1.0);
        return;
    }
    if (static_cast<Eigen::Index>(keep.size()) != A_.rows()) {
        Eigen::MatrixXd A(static_cast<Eigen::Index>(keep.size()), dim_);
        Eigen::VectorXd b(static_cast<Eigen::Index>(keep.size()));
        for (std::size_t k = 0; k < keep.size(); ++k) {
            A.row(static_cast<Eigen::Index>(k)) = A_.row(keep[k]);
            b(static_cast<Eigen::Index>(k)) = b_(keep[k]);
        }
        A_ = std::move(A);
        b_ = std::move(b);
    }
}

Polytope Polytope::universe(int dim) {
    return Polytope(Eigen::MatrixXd(0, dim), Eigen::VectorXd(0));
}

Polytope Polytope::empty(int dim) {
    return Polytope(Eigen::MatrixXd::Zero(1, dim), Eigen::VectorXd::Constant(1, -1.0));
}

Polytope Polytope::box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    const Eigen::Index n = lo.size();
    Eigen::MatrixXd A(2 * n, n);
    A << Eigen::MatrixXd::Identity(n, n), -Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd b(2 * n);
    b << hi, -lo;
    return Polytope(std::move(A), std::move(b));
}

bool Polytope::is_empty(double tol) const {
    if (known_empty_) return true;
    if (A_.rows() == 0) return false;
    return !lp::is_feasible(A_, b_, tol);
}

Polytope intersect(const Polytope& P, const Polytope& Q) {
    check_dim(P, Q, "intersect");
    Eigen::MatrixXd A(P.rows() + Q.rows(), P.dim());
    Eigen::VectorXd b(P.rows() + Q.rows());
    A << P.A(), Q.A();
    b << P.b(), Q.b();
    return Polytope(std::move(A), std::move(b));
}

Polytope erode(const Polytope& P, const Box& W, const Eigen::MatrixXd& E) {
    if (E.rows() != P.dim() || E.cols() != W.lo.size() || W.hi.size() != W.lo.size())
        throw std::invalid_argument("erode: dimension mismatch");
    const Eigen::MatrixXd AE = P.A() * E;
    Eigen::VectorXd b = P.b();
    for (Eigen::Index i = 0; i < AE.rows(); ++i) {
        double support = 0.0;
        for (Eigen::Index j = 0; j < AE.cols(); ++j)
            support += std::max(AE(i, j) * W.lo(j), AE(i, j) * W.hi(j));
        b(i) -= support;
    }
    return Polytope(P.A(), std::move(b));
}

Polytope affine_preimage(const Polytope& P, const Eigen::MatrixXd& F, const Eigen::VectorXd& f) {
    if (F.rows() != P.dim() || f.size() != P.dim())
        throw std::invalid_argument("affine_preimage: dimension mismatch");
    Eigen::MatrixXd A = P.A() * F;
    Eigen::VectorXd b = P.b() - P.A() * f;
    if (A.rows() == 0) return Polytope::universe(static_cast<int>(F.cols()));
    return Polytope(std::move(A), std::move(b));
}

Polytope project_out_input(const Polytope& P_xu, double u_lo, double u_hi) {
    const int n = P_xu.dim() - 1;
    if (n < 1) throw std::invalid_argument("project_out_input: need at least one state dimension");
    if (u_lo > u_hi) return Polytope::empty(n);

    Eigen::VectorXd e = Eigen::VectorXd::Zero(n + 1);
    e(n) = 1.0;
    Eigen::MatrixXd Au(2, n + 1);
    Au << e.transpose(), -e.transpose();
    Eigen::VectorXd bu(2);
    bu << u_hi, -u_lo;
    const Polytope full = intersect(P_xu, Polytope(Au, bu));

    std::vector<Eigen::Index> pos, neg, zero;
    for (Eigen::Index i = 0; i < full.rows(); ++i) {
        const double c = full.A()(i, n);
        if (c > kZeroRow)
            pos.push_back(i);
        else if (c < -kZeroRow)
            neg.push_back(i);
        else
            zero.push_back(i);
    }
    const auto m = static_cast<Eigen::Index>(zero.size() + pos.size() * neg.size());
    Eigen::MatrixXd A(m, n);
    Eigen::VectorXd b(m);
    Eigen::Index r = 0;
    for (Eigen::Index i : zero) {
        A.row(r) = full.A().row(i).head(n);
        b(r++) = full.b()(i);
    }
    for (Eigen::Index p : pos) {
        const double cp = full.A()(p, n);
        for (Eigen::Index q : neg) {
            const double cq = -full.A()(q, n);
            A.row(r) = full.A().row(p).head(n) / cp + full.A().row(q).head(n) / cq;
            b(r++) = full.b()(p) / cp + full.b()(q) / cq;
        }
    }
    return reduce(Polytope(std::move(A), std::move(b)));
}

Polytope reduce(const Polytope& P) {
    if (P.is_empty()) return Polytope::empty(P.dim());
    const Eigen::Index m = P.rows();
    std::vector<bool> keep(static_cast<std::size_t>(m), true);

    // duplicates first (rows are unit norm): keep the tightest offset
    for (Eigen::Index i = 0; i < m; ++i) {
        if (!keep[static_cast<std::size_t>(i)]) continue;
        for (Eigen::Index j = i + 1; j < m; ++j) {
            if (!keep[static_cast<std::size_t>(j)]) continue;
            if ((P.A().row(i) - P.A().row(j)).lpNorm<Eigen::Infinity>() <= kDuplicateTol) {
                if (P.b()(j) < P.b()(i)) {
                    keep[static_cast<std::size_t>(i)] = false;
                    break;
                }
                keep[static_cast<std::size_t>(j)] = false;
            }
        }
    }

    for (Eigen::Index i = 0; i < m; ++i) {
        if (!keep[static_cast<std::size_t>(i)]) continue;
        const Polytope others = drop_row(P, i, keep);
        if (others.rows() == 0) continue;
        const lp::Result res = lp::maximize(P.A().row(i).transpose(), others.A(), others.b());
        if (res.status == lp::Status::Optimal && res.value <= P.b()(i) + kRedundancyTol)
            keep[static_cast<std::size_t>(i)] = false;
    }
    return drop_row(P, -1, keep);
}

bool subset(const Polytope& P, const Polytope& Q, double tol) {
    check_dim(P, Q, "subset");
    if (P.is_empty()) return true;
    if (Q.is_empty()) return false;
    for (Eigen::Index i = 0; i < Q.rows(); ++i) {
        const lp::Result res = lp::maximize(Q.A().row(i).transpose(), P.A(), P.b());
        if (res.status == lp::Status::Unbounded) return false;
        if (res.status == lp::Status::Optimal && res.value > Q.b()(i) + tol) return false;
    }
    return true;
}

bool set_equal(const Polytope& P, const Polytope& Q, double tol) {
    return subset(P, Q, tol) && subset(Q, P, tol);
}

bool contains(const Polytope& P, const Eigen::VectorXd& x, double tol) {
    if (x.size() != P.dim()) throw std::invalid_argument("contains: dimension mismatch");
    if (P.rows() == 0) return true;
    return ((P.A() * x - P.b()).array() <= tol).all();
}

void write_polytope(std::ostream& os, const Polytope& P) {
    os << P.rows() << ' ' << P.dim() << '\n';
    os << std::setprecision(17);
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        for (Eigen::Index j = 0; j < P.dim(); ++j) os << P.A()(i, j) << ' ';
        os << P.b()(i) << '\n';
    }
}

Polytope read_polytope(std::istream& is) {
    Eigen::Index m = 0, n = 0;
    if (!(is >> m >> n) || m < 0 || n < 1) throw IoError("read_polytope: bad header");
    Eigen::MatrixXd A(m, n);
    Eigen::VectorXd b(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < n; ++j)
            if (!(is >> A(i, j))) throw IoError("read_polytope: truncated matrix");
        if (!(is >> b(i))) throw IoError("read_polytope: truncated offsets");
    }
    return Polytope(std::move(A), std::move(b));
}

void save_polytope(const std::filesystem::path& path, const Polytope& P) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    write_polytope(os, P);
}

Polytope load_polytope(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read " + path.string());
    return read_polytope(is);
}

}  // namespace cacc
