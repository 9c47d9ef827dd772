#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <iosfwd>
#include <string>

namespace cacc {

// Axis-aligned box, used for disturbance and input sets.
struct Box {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
};

// Convex polyhedron {x : A x <= b} in halfspace form. Rows are kept at unit
// norm so that offsets and tolerances are in the units of x.
class Polytope {
public:
    Polytope() = default;
    Polytope(Eigen::MatrixXd A, Eigen::VectorXd b);

    static Polytope universe(int dim);
    static Polytope empty(int dim);
    static Polytope box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

    int dim() const { return dim_; }
    Eigen::Index rows() const { return A_.rows(); }
    const Eigen::MatrixXd& A() const { return A_; }
    const Eigen::VectorXd& b() const { return b_; }

    // LP feasibility check unless the representation is trivially empty.
    bool is_empty(double tol = 1e-9) const;

private:
    void normalize();

    int dim_ = 0;
    Eigen::MatrixXd A_;
    Eigen::VectorXd b_;
    bool known_empty_ = false;
};

Polytope intersect(const Polytope& P, const Polytope& Q);

// {x : x + E w in P for every w in W}; support function of the box in closed form.
Polytope erode(const Polytope& P, const Box& W, const Eigen::MatrixXd& E);

// {z : F z + f in P}
Polytope affine_preimage(const Polytope& P, const Eigen::MatrixXd& F, const Eigen::VectorXd& f);

// {x : exists u in [u_lo, u_hi] with (x, u) in P_xu}. The input is the last
// coordinate; eliminated by Fourier-Motzkin and then reduced.
Polytope project_out_input(const Polytope& P_xu, double u_lo, double u_hi);

// Irredundant representation of the same set.
Polytope reduce(const Polytope& P);

// P subset of Q, rowwise support comparison with tolerance tol.
bool subset(const Polytope& P, const Polytope& Q, double tol = 1e-9);
bool set_equal(const Polytope& P, const Polytope& Q, double tol = 1e-9);
bool contains(const Polytope& P, const Eigen::VectorXd& x, double tol = 1e-9);

// Plain text: first line "m n", then m rows of A|b.
void write_polytope(std::ostream& os, const Polytope& P);
Polytope read_polytope(std::istream& is);
void save_polytope(const std::filesystem::path& path, const Polytope& P);
Polytope load_polytope(const std::filesystem::path& path);

}  // namespace cacc
