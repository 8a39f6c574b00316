#pragma once

#include <complex>
#include <initializer_list>
#include <vector>

namespace koopctl {

using Complex = std::complex<double>;

// Dense real matrix, row-major. Sized for the small systems handled here
// (latent dimensions up to 16, Hankel blocks around 10x200).
class Mat {
public:
    Mat() = default;
    Mat(int rows, int cols); // zero-initialized
    Mat(int rows, int cols, std::vector<double> data);
    Mat(std::initializer_list<std::initializer_list<double>> rows);

    static Mat identity(int n);
    static Mat diag(const std::vector<double>& d);
    static Mat col(const std::vector<double>& v);
    static Mat scalar(double v); // 1x1
    static Mat filled(int rows, int cols, double v);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int size() const { return rows_ * cols_; }
    bool empty() const { return rows_ == 0; }

    double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
    double& at(int i, int j);
    double at(int i, int j) const;

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool is_finite() const;
    double max_abs() const;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

Mat operator+(const Mat& a, const Mat& b);
Mat operator-(const Mat& a, const Mat& b);
Mat operator-(const Mat& a);
Mat operator*(double c, const Mat& a);

Mat matmul(const Mat& a, const Mat& b);
Mat transpose(const Mat& a);
Mat hstack(const std::vector<Mat>& parts);
Mat elem_mul(const Mat& a, const Mat& b);

double trace(const Mat& a);
double dot(const Mat& a, const Mat& b);      // entrywise, shapes must match
double sq_norm(const Mat& a);                // sum of squares
double frobenius_norm(const Mat& a);

void check_same_shape(const Mat& a, const Mat& b, const char* where);
void check_finite(const Mat& a, const char* where);

// Dense complex matrix; holds eigenvalue/eigenvector factors.
class CMat {
public:
    CMat() = default;
    CMat(int rows, int cols);
    CMat(int rows, int cols, std::vector<Complex> data);

    static CMat from_real(const Mat& a);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int size() const { return rows_ * cols_; }

    Complex& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
    Complex operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

    std::vector<Complex>& data() { return data_; }
    const std::vector<Complex>& data() const { return data_; }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<Complex> data_;
};

CMat matmul(const CMat& a, const CMat& b);
double max_abs(const CMat& a);

} // namespace koopctl
