#include "koopctl/pole.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "koopctl/errors.hpp"
#include "koopctl/linalg.hpp"

namespace koopctl {

namespace {

constexpr double kRidge = 1e-8;

Mat last_unit_row(int k) {
    Mat e(1, k);
    e(0, k - 1) = 1.0;
    return e;
}

bool factorable(const Mat& m) {
    try {
        LuFactors::factor(m);
        return true;
    } catch (const SingularMatrixError&) {
        return false;
    }
}

} // namespace

void TargetSpectrum::validate() const {
    if (eigenvalues.empty()) throw ConfigError("targets: need at least one eigenvalue");
    for (const Complex& v : eigenvalues)
        if (std::abs(v) > 1.0 + 1e-9)
            throw ConfigError("targets: eigenvalue modulus exceeds 1");
    std::vector<bool> used(eigenvalues.size(), false);
    for (std::size_t i = 0; i < eigenvalues.size(); ++i) {
        if (used[i] || std::abs(eigenvalues[i].imag()) <= 1e-12) continue;
        const Complex want = std::conj(eigenvalues[i]);
        bool found = false;
        for (std::size_t j = 0; j < eigenvalues.size(); ++j) {
            if (j == i || used[j]) continue;
            if (std::abs(eigenvalues[j] - want) <= 1e-12) {
                used[i] = used[j] = true;
                found = true;
                break;
            }
        }
        if (!found)
            throw ConfigError("targets: non-real eigenvalue without its conjugate");
    }
}

std::vector<double> char_coeffs(const TargetSpectrum& targets) {
    targets.validate();
    const int k = targets.size();
    // coeff[j] multiplies s^{k-j}; starts as the unit polynomial.
    std::vector<Complex> coeff(static_cast<std::size_t>(k) + 1, Complex(0.0, 0.0));
    coeff[0] = Complex(1.0, 0.0);
    int degree = 0;
    for (const Complex& root : targets.eigenvalues) {
        ++degree;
        for (int j = degree; j >= 1; --j) coeff[j] = coeff[j] - root * coeff[j - 1];
    }
    std::vector<double> beta(k);
    for (int j = 1; j <= k; ++j) {
        if (std::abs(coeff[j].imag()) > 1e-10)
            throw ConjugacyError("characteristic coefficients have imaginary residue "
                                 + std::to_string(coeff[j].imag()));
        beta[j - 1] = coeff[j].real();
    }
    return beta;
}

Mat controllability(const Mat& a, const Mat& b) {
    if (a.rows() != a.cols()) throw DimensionError("controllability: A must be square");
    if (b.cols() != 1 || b.rows() != a.rows())
        throw DimensionError("controllability: B must be a column matching A");
    const int k = a.rows();
    Mat c(k, k);
    Mat col = b;
    for (int j = 0; j < k; ++j) {
        for (int i = 0; i < k; ++i) c(i, j) = col(i, 0);
        if (j + 1 < k) col = matmul(a, col);
    }
    return c;
}

Var controllability(Tape& tape, Var a, Var b) {
    const int k = tape.value(a).rows();
    std::vector<Var> cols;
    cols.reserve(k);
    Var col = b;
    for (int j = 0; j < k; ++j) {
        cols.push_back(col);
        if (j + 1 < k) col = tape.matmul(a, col);
    }
    return tape.hstack(cols);
}

Mat char_poly_at(const Mat& a, const std::vector<double>& beta) {
    if (a.rows() != a.cols()) throw DimensionError("char_poly_at: A must be square");
    const int k = static_cast<int>(beta.size());
    const Mat eye = Mat::identity(a.rows());
    Mat p = a + beta[0] * eye;
    for (int j = 1; j < k; ++j) p = matmul(p, a) + beta[j] * eye;
    return p;
}

Var char_poly_at(Tape& tape, Var a, const std::vector<double>& beta) {
    const int n = tape.value(a).rows();
    const int k = static_cast<int>(beta.size());
    Var p = tape.add(a, tape.constant(beta[0] * Mat::identity(n)));
    for (int j = 1; j < k; ++j)
        p = tape.add(tape.matmul(p, a), tape.constant(beta[j] * Mat::identity(n)));
    return p;
}

Mat ackermann(const Mat& a, const Mat& b, const TargetSpectrum& targets, GainMode mode) {
    const std::vector<double> beta = char_coeffs(targets);
    if (static_cast<int>(beta.size()) != a.rows())
        throw DimensionError("ackermann: target count must match state dimension");
    const Mat c = controllability(a, b);
    const Mat delta = char_poly_at(a, beta);
    const Mat e = last_unit_row(a.rows());
    if (factorable(c)) return matmul(e, solve(c, delta));
    if (mode == GainMode::Evaluate)
        throw UncontrollabilityError("ackermann: controllability matrix is numerically singular");
    const Mat ct = transpose(c);
    const Mat gram = matmul(ct, c) + kRidge * Mat::identity(a.rows());
    return matmul(e, solve(gram, matmul(ct, delta)));
}

Var ackermann_gain(Tape& tape, Var a, Var b, const TargetSpectrum& targets, GainMode mode) {
    const std::vector<double> beta = char_coeffs(targets);
    const int k = tape.value(a).rows();
    if (static_cast<int>(beta.size()) != k)
        throw DimensionError("ackermann: target count must match state dimension");
    Var c = controllability(tape, a, b);
    Var delta = char_poly_at(tape, a, beta);
    Var e = tape.constant(last_unit_row(k));
    if (factorable(tape.value(c))) return tape.matmul(e, tape.solve(c, delta));
    if (mode == GainMode::Evaluate)
        throw UncontrollabilityError("ackermann: controllability matrix is numerically singular");
    Var ct = tape.transpose(c);
    Var gram = tape.add(tape.matmul(ct, c), tape.constant(kRidge * Mat::identity(k)));
    return tape.matmul(e, tape.solve(gram, tape.matmul(ct, delta)));
}

double placement_error(const std::vector<Complex>& expected, const std::vector<Complex>& actual) {
    if (expected.size() != actual.size())
        throw DimensionError("placement_error: spectra differ in size");
    std::vector<bool> used(actual.size(), false);
    double worst = 0.0;
    // Greedy: repeatedly match the globally closest remaining pair.
    std::vector<bool> done(expected.size(), false);
    for (std::size_t round = 0; round < expected.size(); ++round) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < expected.size(); ++i) {
            if (done[i]) continue;
            for (std::size_t j = 0; j < actual.size(); ++j) {
                if (used[j]) continue;
                const double d = std::abs(expected[i] - actual[j]);
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                }
            }
        }
        done[bi] = true;
        used[bj] = true;
        worst = std::max(worst, best);
    }
    return worst;
}

double spectrum_distance(const std::vector<Complex>& targets, const std::vector<Complex>& estimates) {
    if (targets.empty() || estimates.empty())
        throw DimensionError("spectrum_distance: empty spectrum");
    double total = 0.0;
    for (const Complex& t : targets) {
        double best = std::numeric_limits<double>::infinity();
        for (const Complex& e : estimates) best = std::min(best, std::abs(t - e));
        total += best;
    }
    return total / static_cast<double>(targets.size());
}

} // namespace koopctl
