#pragma once

#include <utility>
#include <vector>

#include "koopctl/dynamics.hpp"
#include "koopctl/linalg.hpp"
#include "koopctl/mat.hpp"

namespace koopctl {

// Time-delay embedding parameters for spectral estimation.
struct HankelConfig {
    int delay = 5;
    int rank = 2;

    // Checks the config against a trajectory of `dim`-dimensional
    // measurements and length `length`: delay >= 1, rank >= 1,
    // dim*delay >= rank and length - delay >= rank.
    void validate(int dim, int length) const;
};

// Builds the pair of delay-embedded matrices. Both are (dim*delay) x
// (length-delay); column j of the first stacks y_j..y_{j+delay-1} and the
// second is its one-step shift.
std::pair<Mat, Mat> hankel_pair(const Trajectory& y, int delay);

// Estimates `rank` eigenvalues of the operator advancing the delay
// embedding one step: thin SVD of H1, then eigenvalues of U^T H2 V S^{-1}.
// Sorted by descending modulus, ties by descending argument.
std::vector<Complex> estimate_eigs(const Trajectory& y, const HankelConfig& cfg);

} // namespace koopctl
