#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "koopctl/errors.hpp"
#include "koopctl/linalg.hpp"
#include "koopctl/mat.hpp"
#include "koopctl/rng.hpp"

using namespace koopctl;

namespace {

Mat random_mat(int rows, int cols, Rng& rng, double half_width = 2.0) {
    Mat m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-half_width, half_width);
    return m;
}

double max_abs_diff(const Mat& a, const Mat& b) {
    REQUIRE(a.rows() == b.rows());
    REQUIRE(a.cols() == b.cols());
    double worst = 0.0;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) worst = std::max(worst, std::abs(a(i, j) - b(i, j)));
    return worst;
}

} // namespace

TEST_CASE("construction and factories") {
    Mat z(2, 3);
    CHECK(z.rows() == 2);
    CHECK(z.cols() == 3);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 3; ++j) CHECK(z(i, j) == 0.0);

    Mat m{{1.0, 2.0}, {3.0, 4.0}};
    CHECK(m(0, 1) == 2.0);
    CHECK(m(1, 0) == 3.0);

    Mat id = Mat::identity(3);
    CHECK(id(0, 0) == 1.0);
    CHECK(id(0, 1) == 0.0);

    Mat d = Mat::diag({3.0, 2.0});
    CHECK(d(0, 0) == 3.0);
    CHECK(d(1, 1) == 2.0);
    CHECK(d(0, 1) == 0.0);

    Mat c = Mat::col({5.0, 6.0});
    CHECK(c.rows() == 2);
    CHECK(c.cols() == 1);
    CHECK(c(1, 0) == 6.0);

    Mat s = Mat::scalar(7.0);
    CHECK(s.rows() == 1);
    CHECK(s.cols() == 1);
    CHECK(s(0, 0) == 7.0);

    Mat f = Mat::filled(2, 2, 0.5);
    CHECK(f(0, 0) == 0.5);
    CHECK(f(1, 1) == 0.5);

    CHECK(Mat().empty());
    CHECK_FALSE(z.empty());
}

TEST_CASE("arithmetic and shape guards") {
    Mat a{{1.0, 2.0}, {3.0, 4.0}};
    Mat b{{5.0, 6.0}, {7.0, 8.0}};

    Mat sum = a + b;
    CHECK(sum(0, 0) == 6.0);
    CHECK(sum(1, 1) == 12.0);

    Mat diff = b - a;
    CHECK(diff(0, 0) == 4.0);

    Mat neg = -a;
    CHECK(neg(1, 0) == -3.0);

    Mat scaled = 2.0 * a;
    CHECK(scaled(1, 1) == 8.0);

    Mat wrong(3, 2);
    CHECK_THROWS_AS((void)(a + wrong), DimensionError);
    CHECK_THROWS_AS((void)(a - wrong), DimensionError);
}

TEST_CASE("matmul against hand values and a triple-loop oracle") {
    Mat a{{1.0, 2.0}, {3.0, 4.0}};
    Mat b{{5.0, 6.0}, {7.0, 8.0}};
    Mat ab = matmul(a, b);
    CHECK(ab(0, 0) == doctest::Approx(19.0).epsilon(1e-14));
    CHECK(ab(0, 1) == doctest::Approx(22.0).epsilon(1e-14));
    CHECK(ab(1, 0) == doctest::Approx(43.0).epsilon(1e-14));
    CHECK(ab(1, 1) == doctest::Approx(50.0).epsilon(1e-14));

    Rng rng(11);
    Mat p = random_mat(3, 4, rng);
    Mat q = random_mat(4, 2, rng);
    Mat pq = matmul(p, q);
    Mat oracle(3, 2);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 2; ++j) {
            double s = 0.0;
            for (int k = 0; k < 4; ++k) s += p(i, k) * q(k, j);
            oracle(i, j) = s;
        }
    CHECK(max_abs_diff(pq, oracle) <= 1e-14);

    CHECK_THROWS_AS((void)matmul(p, p), DimensionError);
}

TEST_CASE("transpose, hstack, elementwise and reductions") {
    Mat a{{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}};
    Mat at = transpose(a);
    CHECK(at.rows() == 3);
    CHECK(at.cols() == 2);
    CHECK(at(2, 0) == 3.0);
    CHECK(at(0, 1) == 4.0);

    Mat h = hstack({Mat::col({1.0, 2.0}), Mat::col({3.0, 4.0})});
    CHECK(h.rows() == 2);
    CHECK(h.cols() == 2);
    CHECK(h(0, 1) == 3.0);

    Mat e = elem_mul(Mat{{1.0, 2.0}}, Mat{{3.0, 4.0}});
    CHECK(e(0, 0) == 3.0);
    CHECK(e(0, 1) == 8.0);

    CHECK(trace(Mat{{1.0, 9.0}, {9.0, 2.0}}) == 3.0);
    CHECK(dot(Mat{{1.0, 2.0}}, Mat{{3.0, 4.0}}) == 11.0);
    CHECK(sq_norm(Mat{{3.0, 4.0}}) == 25.0);
    CHECK(frobenius_norm(Mat{{3.0, 4.0}}) == doctest::Approx(5.0).epsilon(1e-14));
}

TEST_CASE("finiteness guards") {
    Mat ok{{1.0, 2.0}};
    CHECK(ok.is_finite());
    Mat bad{{1.0, 2.0}};
    bad(0, 1) = std::nan("");
    CHECK_FALSE(bad.is_finite());
    CHECK_THROWS_AS(check_finite(bad, "test"), NumericError);
    CHECK(ok.max_abs() == 2.0);
}

TEST_CASE("solve: diagonal, random recovery, transposed, singular") {
    Mat d = Mat::diag({2.0, 4.0});
    Mat rhs = Mat::col({2.0, 4.0});
    Mat x = solve(d, rhs);
    CHECK(x(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(x(1, 0) == doctest::Approx(1.0).epsilon(1e-14));

    Rng rng(5);
    Mat a = random_mat(4, 4, rng) + 4.0 * Mat::identity(4); // diagonally dominant
    Mat x_true = random_mat(4, 3, rng);
    Mat b = matmul(a, x_true);
    Mat x_solved = solve(a, b);
    CHECK(max_abs_diff(x_solved, x_true) <= 1e-10);
    CHECK(max_abs_diff(matmul(a, x_solved), b) <= 1e-10);

    LuFactors lu = LuFactors::factor(a);
    Mat bt = matmul(transpose(a), x_true);
    CHECK(max_abs_diff(lu.solve_transposed(bt), x_true) <= 1e-10);

    Mat singular{{1.0, 1.0}, {1.0, 1.0}};
    CHECK_THROWS_AS((void)solve(singular, rhs), SingularMatrixError);
}

TEST_CASE("symmetric eigendecomposition by Jacobi") {
    Mat s{{2.0, 1.0}, {1.0, 2.0}};
    std::vector<double> vals;
    Mat q;
    sym_eig_jacobi(s, vals, q);
    REQUIRE(vals.size() == 2);
    CHECK(vals[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(vals[1] == doctest::Approx(1.0).epsilon(1e-12));
    // Columns reconstruct S = Q diag(vals) Q^T and are orthonormal.
    Mat qtq = matmul(transpose(q), q);
    CHECK(max_abs_diff(qtq, Mat::identity(2)) <= 1e-12);
    Mat recon = matmul(q, matmul(Mat::diag(vals), transpose(q)));
    CHECK(max_abs_diff(recon, s) <= 1e-12);
}

TEST_CASE("thin SVD: diagonal, rank-1, orthogonality and Eckart-Young") {
    ThinSvd dsvd = svd_thin(Mat::diag({3.0, 2.0, 1.0}), 2);
    CHECK(dsvd.s(0, 0) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(dsvd.s(1, 1) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(dsvd.s(0, 1) == 0.0);

    // Rank-1 outer product 5 u v^T has lone singular value 5.
    Mat u1 = Mat::col({3.0 / 5.0, 4.0 / 5.0});
    Mat v1{{1.0, 0.0, 0.0}};
    Mat outer = 5.0 * matmul(u1, v1);
    ThinSvd r1 = svd_thin(outer, 1);
    CHECK(r1.s(0, 0) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(max_abs_diff(matmul(r1.u, matmul(r1.s, transpose(r1.v))), outer) <= 1e-10);

    // Wide block at working scale: factors orthonormal, truncation error
    // equals the tail singular-value energy.
    Rng rng(17);
    Mat m = random_mat(10, 195, rng);
    const int rank = 4;
    ThinSvd t = svd_thin(m, rank);
    CHECK(t.u.rows() == 10);
    CHECK(t.u.cols() == rank);
    CHECK(t.v.rows() == 195);
    CHECK(t.v.cols() == rank);
    CHECK(max_abs_diff(matmul(transpose(t.u), t.u), Mat::identity(rank)) <= 1e-10);
    CHECK(max_abs_diff(matmul(transpose(t.v), t.v), Mat::identity(rank)) <= 1e-10);
    for (int j = 0; j + 1 < rank; ++j) CHECK(t.s(j, j) >= t.s(j + 1, j + 1));

    std::vector<double> all = singular_values(m);
    REQUIRE(all.size() == 10);
    for (int j = 0; j < rank; ++j) CHECK(t.s(j, j) == doctest::Approx(all[j]).epsilon(1e-10));
    double tail = 0.0;
    for (std::size_t j = rank; j < all.size(); ++j) tail += all[j] * all[j];
    Mat recon = matmul(t.u, matmul(t.s, transpose(t.v)));
    double err2 = sq_norm(m - recon);
    CHECK(err2 == doctest::Approx(tail).epsilon(1e-8));
}

TEST_CASE("thin SVD rank-deficiency gate") {
    // The gate is an absolute 1e-12 floor on the singular value. Scale the
    // rank-2 matrix down so its dead directions (rounding-level via the Gram
    // route) fall below the floor while the two live ones stay far above it.
    Rng rng(23);
    Mat left = random_mat(5, 2, rng);
    Mat right = random_mat(2, 8, rng);
    Mat rank2 = 1e-7 * matmul(left, right);
    CHECK_NOTHROW((void)svd_thin(rank2, 2));
    CHECK_THROWS_AS((void)svd_thin(rank2, 3), RankDeficiencyError);
}

TEST_CASE("eigenvalues: 2x2 closed form") {
    std::vector<Complex> rot = eig_values(Mat{{0.0, -1.0}, {1.0, 0.0}});
    REQUIRE(rot.size() == 2);
    // Tie on modulus: descending argument puts +i first.
    CHECK(std::abs(rot[0] - Complex(0.0, 1.0)) <= 1e-14);
    CHECK(std::abs(rot[1] - Complex(0.0, -1.0)) <= 1e-14);

    std::vector<Complex> diag = eig_values(Mat::diag({0.5, 0.9}));
    CHECK(std::abs(diag[0] - Complex(0.9, 0.0)) <= 1e-14);
    CHECK(std::abs(diag[1] - Complex(0.5, 0.0)) <= 1e-14);
}

TEST_CASE("eigenvalues: companion matrix of a conjugate pair") {
    // Companion of s^2 - 2*0.95 cos(0.3) s + 0.95^2; roots 0.95 e^{+-0.3i}.
    const double re = 0.90756966466932565;  // 0.95 cos 0.3
    const double im = 0.28074419632827258;  // 0.95 sin 0.3
    Mat comp{{2.0 * re, -0.9025}, {1.0, 0.0}};
    std::vector<Complex> vals = eig_values(comp);
    REQUIRE(vals.size() == 2);
    CHECK(std::abs(vals[0] - Complex(re, im)) <= 1e-12);
    CHECK(std::abs(vals[1] - Complex(re, -im)) <= 1e-12);
}

TEST_CASE("eigenvalues: QR path on larger matrices") {
    // Block diagonal of two scaled rotations: spectrum known exactly.
    auto rot = [](double r, double th) {
        return Mat{{r * std::cos(th), -r * std::sin(th)}, {r * std::sin(th), r * std::cos(th)}};
    };
    Mat top = rot(0.95, 0.3);
    Mat bot = rot(0.6, 1.1);
    Mat m(4, 4);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            m(i, j) = top(i, j);
            m(2 + i, 2 + j) = bot(i, j);
        }
    std::vector<Complex> vals = eig_values(m);
    REQUIRE(vals.size() == 4);
    CHECK(std::abs(vals[0] - Complex(0.95 * std::cos(0.3), 0.95 * std::sin(0.3))) <= 1e-9);
    CHECK(std::abs(vals[1] - Complex(0.95 * std::cos(0.3), -0.95 * std::sin(0.3))) <= 1e-9);
    CHECK(std::abs(vals[2] - Complex(0.6 * std::cos(1.1), 0.6 * std::sin(1.1))) <= 1e-9);
    CHECK(std::abs(vals[3] - Complex(0.6 * std::cos(1.1), -0.6 * std::sin(1.1))) <= 1e-9);

    // Similarity transform must not move the spectrum.
    Rng rng(31);
    Mat p = random_mat(4, 4, rng) + 4.0 * Mat::identity(4);
    Mat sim = solve(p, matmul(m, p));
    std::vector<Complex> vals2 = eig_values(sim);
    for (int k = 0; k < 4; ++k) CHECK(std::abs(vals[k] - vals2[k]) <= 1e-8);
}

TEST_CASE("eigenvectors: residual bound") {
    Rng rng(41);
    Mat m = random_mat(5, 5, rng);
    EigenSystem es = eig_small(m);
    REQUIRE(es.values.size() == 5);
    const double scale = frobenius_norm(m);
    CMat a = CMat::from_real(m);
    for (int k = 0; k < 5; ++k) {
        // || A v - lambda v || <= 1e-8 ||A|| for unit v.
        double norm2 = 0.0;
        for (int i = 0; i < 5; ++i) norm2 += std::norm(es.vectors(i, k));
        CHECK(norm2 == doctest::Approx(1.0).epsilon(1e-8));
        double resid = 0.0;
        for (int i = 0; i < 5; ++i) {
            Complex av(0.0, 0.0);
            for (int j = 0; j < 5; ++j) av += a(i, j) * es.vectors(j, k);
            resid += std::norm(av - es.values[k] * es.vectors(i, k));
        }
        CHECK(std::sqrt(resid) <= 1e-8 * scale);
    }
}

TEST_CASE("spectrum ordering") {
    // Descending modulus, ties broken by descending argument.
    std::vector<Complex> vals = {Complex(0.1, 0.0), Complex(0.0, -0.9), Complex(0.0, 0.9),
                                 Complex(-1.0, 0.0)};
    sort_spectrum(vals);
    std::vector<Complex> expect = {Complex(-1.0, 0.0), Complex(0.0, 0.9), Complex(0.0, -0.9),
                                   Complex(0.1, 0.0)};
    REQUIRE(vals.size() == expect.size());
    for (int k = 0; k < 4; ++k) CHECK(vals[k] == expect[k]);
}
