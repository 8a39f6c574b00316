#include "koopctl/mat.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "koopctl/errors.hpp"

namespace koopctl {

Mat::Mat(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, 0.0) {
    if (rows < 1 || cols < 1) throw DimensionError("Mat: rows and cols must be >= 1");
}

Mat::Mat(int rows, int cols, std::vector<double> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows < 1 || cols < 1) throw DimensionError("Mat: rows and cols must be >= 1");
    if (data_.size() != static_cast<std::size_t>(rows) * cols)
        throw DimensionError("Mat: data length does not match rows*cols");
}

Mat::Mat(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = static_cast<int>(rows.size());
    cols_ = rows_ > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    if (rows_ < 1 || cols_ < 1) throw DimensionError("Mat: empty initializer");
    data_.reserve(static_cast<std::size_t>(rows_) * cols_);
    for (const auto& r : rows) {
        if (static_cast<int>(r.size()) != cols_) throw DimensionError("Mat: ragged initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Mat Mat::identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Mat Mat::diag(const std::vector<double>& d) {
    Mat m(static_cast<int>(d.size()), static_cast<int>(d.size()));
    for (int i = 0; i < m.rows(); ++i) m(i, i) = d[i];
    return m;
}

Mat Mat::col(const std::vector<double>& v) {
    return Mat(static_cast<int>(v.size()), 1, v);
}

Mat Mat::scalar(double v) { return Mat(1, 1, {v}); }

Mat Mat::filled(int rows, int cols, double v) {
    Mat m(rows, cols);
    std::fill(m.data().begin(), m.data().end(), v);
    return m;
}

double& Mat::at(int i, int j) {
    if (i < 0 || i >= rows_ || j < 0 || j >= cols_) throw DimensionError("Mat::at: index out of range");
    return (*this)(i, j);
}

double Mat::at(int i, int j) const {
    if (i < 0 || i >= rows_ || j < 0 || j >= cols_) throw DimensionError("Mat::at: index out of range");
    return (*this)(i, j);
}

bool Mat::is_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

double Mat::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

void check_same_shape(const Mat& a, const Mat& b, const char* where) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError(std::string(where) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                             std::to_string(b.cols()) + ")");
}

void check_finite(const Mat& a, const char* where) {
    if (!a.is_finite()) throw NumericError(std::string(where) + ": non-finite entries");
}

Mat operator+(const Mat& a, const Mat& b) {
    check_same_shape(a, b, "operator+");
    Mat r = a;
    for (int i = 0; i < r.size(); ++i) r.data()[i] += b.data()[i];
    return r;
}

Mat operator-(const Mat& a, const Mat& b) {
    check_same_shape(a, b, "operator-");
    Mat r = a;
    for (int i = 0; i < r.size(); ++i) r.data()[i] -= b.data()[i];
    return r;
}

Mat operator-(const Mat& a) {
    Mat r = a;
    for (double& v : r.data()) v = -v;
    return r;
}

Mat operator*(double c, const Mat& a) {
    Mat r = a;
    for (double& v : r.data()) v *= c;
    return r;
}

Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols() != b.rows())
        throw DimensionError("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                             std::to_string(b.rows()) + ")");
    Mat r(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        for (int k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < b.cols(); ++j) r(i, j) += aik * b(k, j);
        }
    }
    return r;
}

Mat transpose(const Mat& a) {
    Mat r(a.cols(), a.rows());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) r(j, i) = a(i, j);
    return r;
}

Mat hstack(const std::vector<Mat>& parts) {
    if (parts.empty()) throw DimensionError("hstack: no parts");
    int rows = parts.front().rows();
    int cols = 0;
    for (const Mat& p : parts) {
        if (p.rows() != rows) throw DimensionError("hstack: row counts differ");
        cols += p.cols();
    }
    Mat r(rows, cols);
    int off = 0;
    for (const Mat& p : parts) {
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < p.cols(); ++j) r(i, off + j) = p(i, j);
        off += p.cols();
    }
    return r;
}

Mat elem_mul(const Mat& a, const Mat& b) {
    check_same_shape(a, b, "elem_mul");
    Mat r = a;
    for (int i = 0; i < r.size(); ++i) r.data()[i] *= b.data()[i];
    return r;
}

double trace(const Mat& a) {
    if (a.rows() != a.cols()) throw DimensionError("trace: matrix not square");
    double s = 0.0;
    for (int i = 0; i < a.rows(); ++i) s += a(i, i);
    return s;
}

double dot(const Mat& a, const Mat& b) {
    check_same_shape(a, b, "dot");
    double s = 0.0;
    for (int i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
    return s;
}

double sq_norm(const Mat& a) { return dot(a, a); }

double frobenius_norm(const Mat& a) { return std::sqrt(sq_norm(a)); }

CMat::CMat(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols) {
    if (rows < 1 || cols < 1) throw DimensionError("CMat: rows and cols must be >= 1");
}

CMat::CMat(int rows, int cols, std::vector<Complex> data) : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (rows < 1 || cols < 1) throw DimensionError("CMat: rows and cols must be >= 1");
    if (data_.size() != static_cast<std::size_t>(rows) * cols)
        throw DimensionError("CMat: data length does not match rows*cols");
}

CMat CMat::from_real(const Mat& a) {
    CMat r(a.rows(), a.cols());
    for (int i = 0; i < a.size(); ++i) r.data()[i] = a.data()[i];
    return r;
}

CMat matmul(const CMat& a, const CMat& b) {
    if (a.cols() != b.rows()) throw DimensionError("matmul(CMat): inner dimensions differ");
    CMat r(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int k = 0; k < a.cols(); ++k) {
            const Complex aik = a(i, k);
            for (int j = 0; j < b.cols(); ++j) r(i, j) += aik * b(k, j);
        }
    return r;
}

double max_abs(const CMat& a) {
    double m = 0.0;
    for (const Complex& v : a.data()) m = std::max(m, std::abs(v));
    return m;
}

} // namespace koopctl
