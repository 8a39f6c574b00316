#include "koopctl/dmd.hpp"

#include "koopctl/errors.hpp"

namespace koopctl {

void HankelConfig::validate(int dim, int length) const {
    if (delay < 1) throw ConfigError("hankel: delay must be >= 1");
    if (rank < 1) throw ConfigError("hankel: rank must be >= 1");
    if (dim * delay < rank)
        throw ConfigError("hankel: dim*delay must be >= rank");
    if (length - delay < rank)
        throw ConfigError("hankel: trajectory too short for requested rank");
}

std::pair<Mat, Mat> hankel_pair(const Trajectory& y, int delay) {
    y.validate();
    const int t_len = y.length();
    const int d = y.dim();
    if (delay < 1) throw ConfigError("hankel: delay must be >= 1");
    if (t_len < delay + 2)
        throw DimensionError("hankel: trajectory length must be >= delay + 2");
    const int cols = t_len - delay;
    Mat h1(d * delay, cols);
    Mat h2(d * delay, cols);
    for (int j = 0; j < cols; ++j) {
        for (int k = 0; k < delay; ++k) {
            const Mat& a = y.measurements[j + k];
            const Mat& b = y.measurements[j + k + 1];
            for (int i = 0; i < d; ++i) {
                h1(k * d + i, j) = a(i, 0);
                h2(k * d + i, j) = b(i, 0);
            }
        }
    }
    return {std::move(h1), std::move(h2)};
}

std::vector<Complex> estimate_eigs(const Trajectory& y, const HankelConfig& cfg) {
    y.validate();
    cfg.validate(y.dim(), y.length());
    auto [h1, h2] = hankel_pair(y, cfg.delay);
    ThinSvd svd = svd_thin(h1, cfg.rank);
    // A_hat = U^T H2 V S^{-1}; S is diagonal so the inverse is elementwise.
    Mat proj = matmul(matmul(transpose(svd.u), h2), svd.v);
    for (int i = 0; i < cfg.rank; ++i)
        for (int j = 0; j < cfg.rank; ++j) proj(i, j) /= svd.s(j, j);
    std::vector<Complex> values = eig_values(proj);
    sort_spectrum(values);
    return values;
}

} // namespace koopctl
