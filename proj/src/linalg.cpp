#include "koopctl/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "koopctl/errors.hpp"

namespace koopctl {

LuFactors LuFactors::factor(const Mat& a) {
    if (a.rows() != a.cols()) throw DimensionError("lu: matrix not square");
    const int n = a.rows();
    LuFactors f;
    f.lu_ = a;
    f.perm_.resize(n);
    std::iota(f.perm_.begin(), f.perm_.end(), 0);
    Mat& lu = f.lu_;
    for (int k = 0; k < n; ++k) {
        int piv = k;
        double best = std::abs(lu(k, k));
        for (int i = k + 1; i < n; ++i) {
            const double v = std::abs(lu(i, k));
            if (v > best) {
                best = v;
                piv = i;
            }
        }
        if (best < kPivotTol)
            throw SingularMatrixError("lu: pivot " + std::to_string(k) + " below tolerance (" +
                                          std::to_string(best) + ")",
                                      k);
        if (piv != k) {
            for (int j = 0; j < n; ++j) std::swap(lu(k, j), lu(piv, j));
            std::swap(f.perm_[k], f.perm_[piv]);
        }
        const double inv = 1.0 / lu(k, k);
        for (int i = k + 1; i < n; ++i) {
            lu(i, k) *= inv;
            const double lik = lu(i, k);
            if (lik == 0.0) continue;
            for (int j = k + 1; j < n; ++j) lu(i, j) -= lik * lu(k, j);
        }
    }
    return f;
}

Mat LuFactors::solve(const Mat& b) const {
    const int n = dim();
    if (b.rows() != n) throw DimensionError("lu solve: right-hand side row count mismatch");
    Mat x(n, b.cols());
    // apply row permutation: x = P b
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < b.cols(); ++j) x(i, j) = b(perm_[i], j);
    // forward substitution (unit lower triangular)
    for (int i = 1; i < n; ++i)
        for (int k = 0; k < i; ++k) {
            const double l = lu_(i, k);
            if (l == 0.0) continue;
            for (int j = 0; j < b.cols(); ++j) x(i, j) -= l * x(k, j);
        }
    // back substitution
    for (int i = n - 1; i >= 0; --i) {
        for (int k = i + 1; k < n; ++k) {
            const double u = lu_(i, k);
            if (u == 0.0) continue;
            for (int j = 0; j < b.cols(); ++j) x(i, j) -= u * x(k, j);
        }
        const double d = 1.0 / lu_(i, i);
        for (int j = 0; j < b.cols(); ++j) x(i, j) *= d;
    }
    return x;
}

Mat LuFactors::solve_transposed(const Mat& b) const {
    // A = P^T L U, so A^T x = b is solved as U^T z = b, L^T w = z, x = P^T w.
    const int n = dim();
    if (b.rows() != n) throw DimensionError("lu solve_transposed: right-hand side row count mismatch");
    Mat w = b;
    for (int i = 0; i < n; ++i) {
        const double d = 1.0 / lu_(i, i);
        for (int j = 0; j < b.cols(); ++j) w(i, j) *= d;
        for (int k = i + 1; k < n; ++k) {
            const double u = lu_(i, k);
            if (u == 0.0) continue;
            for (int j = 0; j < b.cols(); ++j) w(k, j) -= u * w(i, j);
        }
    }
    for (int i = n - 1; i >= 0; --i)
        for (int k = 0; k < i; ++k) {
            const double l = lu_(i, k);
            if (l == 0.0) continue;
            for (int j = 0; j < b.cols(); ++j) w(k, j) -= l * w(i, j);
        }
    Mat x(n, b.cols());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < b.cols(); ++j) x(perm_[i], j) = w(i, j);
    return x;
}

Mat solve(const Mat& a, const Mat& b) {
    Mat x = LuFactors::factor(a).solve(b);
    check_finite(x, "solve");
    return x;
}

void sym_eig_jacobi(const Mat& s, std::vector<double>& eigenvalues, Mat& q) {
    if (s.rows() != s.cols()) throw DimensionError("sym_eig_jacobi: matrix not square");
    const int n = s.rows();
    Mat a = s;
    q = Mat::identity(n);
    const double scale = std::max(frobenius_norm(a), 1e-300);
    const double tol = 1e-15 * scale;
    const int max_sweeps = 100;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int r = p + 1; r < n; ++r) off += a(p, r) * a(p, r);
        if (std::sqrt(2.0 * off) <= tol) break;
        if (sweep == max_sweeps - 1)
            throw ConvergenceError("sym_eig_jacobi: no convergence in 100 sweeps");
        for (int p = 0; p < n - 1; ++p) {
            for (int r = p + 1; r < n; ++r) {
                const double apr = a(p, r);
                if (std::abs(apr) <= 1e-2 * tol / n) continue;
                const double theta = (a(r, r) - a(p, p)) / (2.0 * apr);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sgn = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p), akr = a(k, r);
                    a(k, p) = c * akp - sgn * akr;
                    a(k, r) = sgn * akp + c * akr;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k), ark = a(r, k);
                    a(p, k) = c * apk - sgn * ark;
                    a(r, k) = sgn * apk + c * ark;
                }
                for (int k = 0; k < n; ++k) {
                    const double qkp = q(k, p), qkr = q(k, r);
                    q(k, p) = c * qkp - sgn * qkr;
                    q(k, r) = sgn * qkp + c * qkr;
                }
            }
        }
    }
    eigenvalues.resize(n);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> diag(n);
    for (int i = 0; i < n; ++i) diag[i] = a(i, i);
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return diag[i] > diag[j]; });
    Mat qs(n, n);
    for (int c = 0; c < n; ++c) {
        const int src = order[c];
        // sign convention: entry of largest magnitude is positive
        int arg = 0;
        double best = 0.0;
        for (int i = 0; i < n; ++i) {
            const double v = std::abs(q(i, src));
            if (v > best) {
                best = v;
                arg = i;
            }
        }
        const double sign = q(arg, src) >= 0.0 ? 1.0 : -1.0;
        for (int i = 0; i < n; ++i) qs(i, c) = sign * q(i, src);
        eigenvalues[c] = diag[src];
    }
    q = qs;
}

ThinSvd svd_thin(const Mat& m, int rank) {
    const int r = m.rows(), c = m.cols();
    if (rank < 1 || rank > std::min(r, c))
        throw DimensionError("svd_thin: rank " + std::to_string(rank) + " outside [1, min(rows, cols)]");
    ThinSvd out;
    std::vector<double> w;
    Mat q;
    if (r <= c) {
        sym_eig_jacobi(matmul(m, transpose(m)), w, q);
        out.u = Mat(r, rank);
        out.v = Mat(c, rank);
        out.s = Mat(rank, rank);
        const Mat mt = transpose(m);
        for (int k = 0; k < rank; ++k) {
            const double sigma = std::sqrt(std::max(w[k], 0.0));
            if (sigma < kPivotTol)
                throw RankDeficiencyError("svd_thin: singular value " + std::to_string(k) +
                                          " below tolerance at requested rank");
            out.s(k, k) = sigma;
            Mat uk(r, 1);
            for (int i = 0; i < r; ++i) uk(i, 0) = q(i, k);
            const Mat vk = (1.0 / sigma) * matmul(mt, uk);
            for (int i = 0; i < r; ++i) out.u(i, k) = uk(i, 0);
            for (int i = 0; i < c; ++i) out.v(i, k) = vk(i, 0);
        }
    } else {
        sym_eig_jacobi(matmul(transpose(m), m), w, q);
        out.u = Mat(r, rank);
        out.v = Mat(c, rank);
        out.s = Mat(rank, rank);
        for (int k = 0; k < rank; ++k) {
            const double sigma = std::sqrt(std::max(w[k], 0.0));
            if (sigma < kPivotTol)
                throw RankDeficiencyError("svd_thin: singular value " + std::to_string(k) +
                                          " below tolerance at requested rank");
            out.s(k, k) = sigma;
            Mat vk(c, 1);
            for (int i = 0; i < c; ++i) vk(i, 0) = q(i, k);
            const Mat uk = (1.0 / sigma) * matmul(m, vk);
            for (int i = 0; i < r; ++i) out.u(i, k) = uk(i, 0);
            for (int i = 0; i < c; ++i) out.v(i, k) = vk(i, 0);
        }
    }
    check_finite(out.u, "svd_thin");
    check_finite(out.v, "svd_thin");
    return out;
}

std::vector<double> singular_values(const Mat& m) {
    std::vector<double> w;
    Mat q;
    if (m.rows() <= m.cols())
        sym_eig_jacobi(matmul(m, transpose(m)), w, q);
    else
        sym_eig_jacobi(matmul(transpose(m), m), w, q);
    for (double& v : w) v = std::sqrt(std::max(v, 0.0));
    return w;
}

void sort_spectrum(std::vector<Complex>& values) {
    std::stable_sort(values.begin(), values.end(), [](const Complex& a, const Complex& b) {
        const double ma = std::abs(a), mb = std::abs(b);
        if (ma != mb) return ma > mb;
        return std::arg(a) > std::arg(b);
    });
}

namespace {

std::vector<Complex> eig2x2(double a, double b, double c, double d) {
    const Complex tr(a + d, 0.0);
    const Complex det(a * d - b * c, 0.0);
    const Complex disc = std::sqrt(tr * tr - 4.0 * det);
    return {0.5 * (tr + disc), 0.5 * (tr - disc)};
}

// Householder reduction to upper Hessenberg form (in place).
void hessenberg(Mat& h) {
    const int n = h.rows();
    for (int k = 0; k < n - 2; ++k) {
        double scale = 0.0;
        for (int i = k + 1; i < n; ++i) scale += std::abs(h(i, k));
        if (scale == 0.0) continue;
        std::vector<double> v(n, 0.0);
        double norm2 = 0.0;
        for (int i = k + 1; i < n; ++i) {
            v[i] = h(i, k) / scale;
            norm2 += v[i] * v[i];
        }
        double alpha = std::sqrt(norm2);
        if (v[k + 1] > 0.0) alpha = -alpha;
        v[k + 1] -= alpha;
        double vnorm2 = 0.0;
        for (int i = k + 1; i < n; ++i) vnorm2 += v[i] * v[i];
        if (vnorm2 == 0.0) continue;
        const double beta = 2.0 / vnorm2;
        // H := (I - beta v v^T) H (I - beta v v^T)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int i = k + 1; i < n; ++i) s += v[i] * h(i, j);
            s *= beta;
            for (int i = k + 1; i < n; ++i) h(i, j) -= s * v[i];
        }
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = k + 1; j < n; ++j) s += h(i, j) * v[j];
            s *= beta;
            for (int j = k + 1; j < n; ++j) h(i, j) -= s * v[j];
        }
        h(k + 1, k) = alpha * scale;
        for (int i = k + 2; i < n; ++i) h(i, k) = 0.0;
    }
}

// Shifted QR iteration on a complex Hessenberg matrix via Givens rotations.
std::vector<Complex> qr_eigenvalues(const Mat& real_h, int max_sweeps) {
    const int n = real_h.rows();
    CMat h = CMat::from_real(real_h);
    std::vector<Complex> eig(n);
    const double eps = 1e-14;
    int hi = n - 1;
    int sweeps = 0;
    int stall = 0;
    while (hi >= 0) {
        if (hi == 0) {
            eig[0] = h(0, 0);
            break;
        }
        // deflate converged subdiagonal entries
        int lo = hi;
        while (lo > 0) {
            const double sub = std::abs(h(lo, lo - 1));
            if (sub <= eps * (std::abs(h(lo - 1, lo - 1)) + std::abs(h(lo, lo)))) {
                h(lo, lo - 1) = 0.0;
                break;
            }
            --lo;
        }
        if (lo == hi) {
            eig[hi] = h(hi, hi);
            --hi;
            stall = 0;
            continue;
        }
        if (++sweeps > max_sweeps)
            throw ConvergenceError("eig: QR iteration exceeded " + std::to_string(max_sweeps) + " sweeps");
        // Wilkinson shift from the trailing 2x2 block
        const Complex a = h(hi - 1, hi - 1), b = h(hi - 1, hi), c = h(hi, hi - 1), d = h(hi, hi);
        Complex mu;
        {
            const Complex tr = a + d;
            const Complex disc = std::sqrt(tr * tr - 4.0 * (a * d - b * c));
            const Complex l1 = 0.5 * (tr + disc), l2 = 0.5 * (tr - disc);
            mu = (std::abs(l1 - d) < std::abs(l2 - d)) ? l1 : l2;
        }
        if (++stall % 12 == 0) {
            // exceptional shift to break symmetric stalls
            mu = Complex(std::abs(h(hi, hi - 1).real()) + std::abs(h(hi - 1, hi - 2 >= 0 ? hi - 2 : 0).real()),
                         0.75 * std::abs(h(hi, hi - 1)));
        }
        for (int i = lo; i <= hi; ++i) h(i, i) -= mu;
        // QR step restricted to the active block; rotations stored for RQ.
        std::vector<Complex> cs(hi), sn(hi);
        for (int k = lo; k < hi; ++k) {
            const Complex x = h(k, k), y = h(k + 1, k);
            const double norm = std::hypot(std::abs(x), std::abs(y));
            if (norm == 0.0) {
                cs[k] = 1.0;
                sn[k] = 0.0;
                continue;
            }
            cs[k] = x / norm;
            sn[k] = y / norm;
            for (int j = k; j <= hi; ++j) {
                const Complex t1 = h(k, j), t2 = h(k + 1, j);
                h(k, j) = std::conj(cs[k]) * t1 + std::conj(sn[k]) * t2;
                h(k + 1, j) = -sn[k] * t1 + cs[k] * t2;
            }
        }
        for (int k = lo; k < hi; ++k) {
            for (int i = lo; i <= std::min(k + 2, hi); ++i) {
                const Complex t1 = h(i, k), t2 = h(i, k + 1);
                h(i, k) = t1 * cs[k] + t2 * sn[k];
                h(i, k + 1) = -t1 * std::conj(sn[k]) + t2 * std::conj(cs[k]);
            }
        }
        for (int i = lo; i <= hi; ++i) h(i, i) += mu;
    }
    return eig;
}

// The spectrum of a real matrix is closed under conjugation, but the complex
// QR iteration computes each eigenvalue independently, so pairs come back
// conjugate only up to rounding. Snap them exact (and zero tiny imaginary
// parts) so moduli of a pair tie exactly and ordering is deterministic.
void pair_conjugates(std::vector<Complex>& values, double scale) {
    const double tol = 1e-9 * std::max(scale, 1e-30);
    const int n = static_cast<int>(values.size());
    std::vector<bool> done(n, false);
    for (int i = 0; i < n; ++i) {
        if (done[i]) continue;
        if (std::abs(values[i].imag()) <= tol) {
            values[i] = Complex(values[i].real(), 0.0);
            done[i] = true;
            continue;
        }
        int partner = -1;
        double best = tol;
        for (int j = i + 1; j < n; ++j) {
            if (done[j]) continue;
            const double d = std::abs(values[j] - std::conj(values[i]));
            if (d <= best) {
                best = d;
                partner = j;
            }
        }
        done[i] = true;
        if (partner < 0) continue;  // no mate within tolerance; keep as computed
        const Complex mean = 0.5 * (values[i] + std::conj(values[partner]));
        values[i] = mean;
        values[partner] = std::conj(mean);
        done[partner] = true;
    }
}

// One complex LU solve for inverse iteration (dense, partial pivoting).
bool complex_solve_inplace(CMat a, std::vector<Complex>& x) {
    const int n = a.rows();
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int k = 0; k < n; ++k) {
        int piv = k;
        double best = std::abs(a(k, k));
        for (int i = k + 1; i < n; ++i)
            if (std::abs(a(i, k)) > best) {
                best = std::abs(a(i, k));
                piv = i;
            }
        if (best < 1e-300) return false;
        if (piv != k) {
            for (int j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
            std::swap(perm[k], perm[piv]);
        }
        const Complex inv = 1.0 / a(k, k);
        for (int i = k + 1; i < n; ++i) {
            a(i, k) *= inv;
            for (int j = k + 1; j < n; ++j) a(i, j) -= a(i, k) * a(k, j);
        }
    }
    std::vector<Complex> b(n);
    for (int i = 0; i < n; ++i) b[i] = x[perm[i]];
    for (int i = 1; i < n; ++i)
        for (int k = 0; k < i; ++k) b[i] -= a(i, k) * b[k];
    for (int i = n - 1; i >= 0; --i) {
        for (int k = i + 1; k < n; ++k) b[i] -= a(i, k) * b[k];
        b[i] /= a(i, i);
    }
    x = b;
    return true;
}

} // namespace

std::vector<Complex> eig_values(const Mat& m) {
    if (m.rows() != m.cols()) throw DimensionError("eig: matrix not square");
    const int n = m.rows();
    if (n > 16) throw DimensionError("eig: dimension above 16 unsupported");
    std::vector<Complex> values;
    if (n == 1) {
        values = {Complex(m(0, 0), 0.0)};
    } else if (n == 2) {
        values = eig2x2(m(0, 0), m(0, 1), m(1, 0), m(1, 1));
    } else {
        Mat h = m;
        hessenberg(h);
        values = qr_eigenvalues(h, 100 * n);
        pair_conjugates(values, frobenius_norm(m));
    }
    sort_spectrum(values);
    return values;
}

EigenSystem eig_small(const Mat& m) {
    EigenSystem out;
    out.values = eig_values(m);
    const int n = m.rows();
    out.vectors = CMat(n, n);
    const CMat mc = CMat::from_real(m);
    const double scale = std::max(m.max_abs(), 1e-30);
    for (int k = 0; k < n; ++k) {
        // inverse iteration at a slightly perturbed shift
        const Complex shift = out.values[k] + Complex(scale * 1e-9, scale * 1e-9);
        CMat shifted = mc;
        for (int i = 0; i < n; ++i) shifted(i, i) -= shift;
        std::vector<Complex> v(n);
        for (int i = 0; i < n; ++i) v[i] = Complex(1.0 / std::sqrt(double(n)), 0.0);
        bool ok = true;
        for (int it = 0; it < 3 && ok; ++it) {
            ok = complex_solve_inplace(shifted, v);
            double norm = 0.0;
            for (const Complex& x : v) norm += std::norm(x);
            norm = std::sqrt(norm);
            if (!(norm > 0.0) || !std::isfinite(norm)) {
                ok = false;
                break;
            }
            for (Complex& x : v) x /= norm;
        }
        if (!ok) throw ConvergenceError("eig: inverse iteration failed for eigenvector " + std::to_string(k));
        // rotate so the largest component is real positive
        int arg = 0;
        double best = 0.0;
        for (int i = 0; i < n; ++i)
            if (std::abs(v[i]) > best) {
                best = std::abs(v[i]);
                arg = i;
            }
        const Complex phase = std::abs(v[arg]) > 0.0 ? v[arg] / std::abs(v[arg]) : Complex(1.0, 0.0);
        for (Complex& x : v) x /= phase;
        for (int i = 0; i < n; ++i) out.vectors(i, k) = v[i];
    }
    return out;
}

} // namespace koopctl
