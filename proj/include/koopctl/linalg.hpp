#pragma once

#include <vector>

#include "koopctl/mat.hpp"

namespace koopctl {

// Pivot magnitudes below this are treated as singular.
inline constexpr double kPivotTol = 1e-12;

// LU factorization with partial pivoting, PA = LU. Kept around by autodiff
// solve nodes so the adjoint pass can reuse the factorization.
class LuFactors {
public:
    static LuFactors factor(const Mat& a); // throws SingularMatrixError

    Mat solve(const Mat& b) const;            // A X = B
    Mat solve_transposed(const Mat& b) const; // A^T X = B

    int dim() const { return lu_.rows(); }

private:
    Mat lu_;                // L (unit diagonal, below) and U (on and above)
    std::vector<int> perm_; // perm_[i] = original row stored at factored row i
};

// Solves A X = B by LU with partial pivoting.
Mat solve(const Mat& a, const Mat& b);

// Symmetric eigendecomposition by cyclic Jacobi rotations. Eigenvalues are
// returned in descending order; columns of q are the matching orthonormal
// eigenvectors with a deterministic sign convention.
void sym_eig_jacobi(const Mat& s, std::vector<double>& eigenvalues, Mat& q);

struct ThinSvd {
    Mat u; // rows x rank
    Mat s; // rank x rank, diagonal, descending
    Mat v; // cols x rank
};

// Rank-truncated SVD computed from the Gram matrix of the smaller side.
ThinSvd svd_thin(const Mat& m, int rank);

// All singular values (descending), without the rank-deficiency gate.
std::vector<double> singular_values(const Mat& m);

struct EigenSystem {
    std::vector<Complex> values; // sorted: descending modulus, ties by descending argument
    CMat vectors;                // unit columns aligned with values
};

// Eigenvalues of a small (dimension <= 16) real square matrix. 2x2 uses the
// closed-form quadratic; larger sizes go through Hessenberg reduction and
// shifted QR iteration.
std::vector<Complex> eig_values(const Mat& m);

// Eigenvalues plus eigenvectors (inverse iteration); intended for matrices
// with reasonably separated eigenvalues.
EigenSystem eig_small(const Mat& m);

// Sorts in place: descending modulus, ties broken by descending argument.
void sort_spectrum(std::vector<Complex>& values);

} // namespace koopctl
