#pragma once

#include <vector>

#include "koopctl/mat.hpp"
#include "koopctl/tape.hpp"

namespace koopctl {

// Set of desired closed-loop eigenvalues. Must be closed under complex
// conjugation so the characteristic polynomial has real coefficients.
struct TargetSpectrum {
    std::vector<Complex> eigenvalues;

    int size() const { return static_cast<int>(eigenvalues.size()); }
    // Throws ConfigError unless conjugate-closed and every |lambda| <= 1 + 1e-9.
    void validate() const;
};

// Whether gain computation may fall back to a ridge-stabilized solve when the
// controllability matrix is numerically singular. Training tolerates transient
// loss of controllability; evaluation treats it as an error.
enum class GainMode {
    Train,
    Evaluate,
};

// Real coefficients beta_1..beta_K of prod_k (s - lambda_k) =
// s^K + sum_k beta_k s^{K-k}. Throws ConjugacyError if the imaginary residue
// of any coefficient exceeds 1e-10.
std::vector<double> char_coeffs(const TargetSpectrum& targets);

// Controllability matrix [B, AB, ..., A^{K-1}B] for K x K A and K x 1 B.
Mat controllability(const Mat& a, const Mat& b);
Var controllability(Tape& tape, Var a, Var b);

// Matrix polynomial A^K + sum_k beta_k A^{K-k}, evaluated by Horner's rule.
Mat char_poly_at(const Mat& a, const std::vector<double>& beta);
Var char_poly_at(Tape& tape, Var a, const std::vector<double>& beta);

// Ackermann gain F = e_K^T C^{-1} Delta(A), a 1 x K row vector, so that the
// spectrum of A - B F equals the targets for controllable (A, B). In Train
// mode a numerically singular C is handled by Tikhonov-stabilized normal
// equations (ridge 1e-8); in Evaluate mode it raises UncontrollabilityError.
Mat ackermann(const Mat& a, const Mat& b, const TargetSpectrum& targets, GainMode mode);
Var ackermann_gain(Tape& tape, Var a, Var b, const TargetSpectrum& targets, GainMode mode);

// Greedy minimal-distance multiset matching between two equal-sized spectra;
// returns the largest matched pair distance. Verification helper for
// placement exactness.
double placement_error(const std::vector<Complex>& expected, const std::vector<Complex>& actual);

// Mean over targets of the distance to the nearest estimate. The spectral
// reward is the negative of this.
double spectrum_distance(const std::vector<Complex>& targets, const std::vector<Complex>& estimates);

} // namespace koopctl
