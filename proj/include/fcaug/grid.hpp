#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace fc {

using Index = Eigen::Index;

/// Dense single-channel raster, row-major, indexed (row = y, col = x).
template <typename Scalar>
using Grid = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Intensities in [0,1].
using Image = Grid<float>;
/// Attention weights in [0,1]; max-normalized when non-degenerate.
using SaliencyMap = Grid<float>;
using BinaryMask = Grid<bool>;

/// Bilinear sample treating everything outside the grid as zero.
template <typename Derived>
double sample_zero(const Eigen::DenseBase<Derived>& g, double y, double x)
{
    const double fy = std::floor(y);
    const double fx = std::floor(x);
    if (fy < -1.0 || fx < -1.0 || fy > double(g.rows() - 1) || fx > double(g.cols() - 1))
        return 0.0;
    const auto y0 = static_cast<Index>(fy);
    const auto x0 = static_cast<Index>(fx);
    const double wy = y - fy;
    const double wx = x - fx;
    auto at = [&](Index r, Index c) -> double {
        if (r < 0 || c < 0 || r >= g.rows() || c >= g.cols())
            return 0.0;
        return static_cast<double>(g.derived().coeff(r, c));
    };
    return (1.0 - wy) * ((1.0 - wx) * at(y0, x0) + wx * at(y0, x0 + 1))
           + wy * ((1.0 - wx) * at(y0 + 1, x0) + wx * at(y0 + 1, x0 + 1));
}

/// Bilinear sample with coordinates clamped to the grid (edge replication).
template <typename Derived>
double sample_clamped(const Eigen::DenseBase<Derived>& g, double y, double x)
{
    y = std::clamp(y, 0.0, double(g.rows() - 1));
    x = std::clamp(x, 0.0, double(g.cols() - 1));
    const auto y0 = static_cast<Index>(std::floor(y));
    const auto x0 = static_cast<Index>(std::floor(x));
    const Index y1 = std::min<Index>(y0 + 1, g.rows() - 1);
    const Index x1 = std::min<Index>(x0 + 1, g.cols() - 1);
    const double wy = y - double(y0);
    const double wx = x - double(x0);
    const auto& d = g.derived();
    return (1.0 - wy) * ((1.0 - wx) * double(d.coeff(y0, x0)) + wx * double(d.coeff(y0, x1)))
           + wy * ((1.0 - wx) * double(d.coeff(y1, x0)) + wx * double(d.coeff(y1, x1)));
}

/// Source coordinate of destination pixel `dst` under half-pixel-center scaling.
inline double resample_coord(Index dst, Index n_src, Index n_dst)
{
    return (double(dst) + 0.5) * (double(n_src) / double(n_dst)) - 0.5;
}

template <typename Scalar>
Grid<Scalar> resize_bilinear(const Grid<Scalar>& g, Index rows, Index cols)
{
    Grid<Scalar> out(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        const double sy = resample_coord(r, g.rows(), rows);
        for (Index c = 0; c < cols; ++c)
            out(r, c) = static_cast<Scalar>(sample_clamped(g, sy, resample_coord(c, g.cols(), cols)));
    }
    return out;
}

/// Unnormalized Gaussian taps exp(-k^2 / 2 sigma^2) for k in [-radius, radius].
inline std::vector<double> gaussian_taps(int radius, double sigma)
{
    std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
    for (int k = -radius; k <= radius; ++k)
        taps[static_cast<std::size_t>(k + radius)] = std::exp(-double(k) * k / (2.0 * sigma * sigma));
    return taps;
}

/// Separable correlation with a symmetric 1-D kernel along both axes, zero padding.
template <typename Scalar>
Grid<Scalar> separable_filter(const Grid<Scalar>& g, const std::vector<double>& taps)
{
    const int radius = static_cast<int>(taps.size() / 2);
    const Index rows = g.rows();
    const Index cols = g.cols();
    Grid<Scalar> tmp = Grid<Scalar>::Zero(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) {
            Scalar acc = 0;
            for (int k = -radius; k <= radius; ++k) {
                const Index cc = c + k;
                if (cc >= 0 && cc < cols)
                    acc += static_cast<Scalar>(taps[static_cast<std::size_t>(k + radius)]) * g(r, cc);
            }
            tmp(r, c) = acc;
        }
    }
    Grid<Scalar> out = Grid<Scalar>::Zero(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) {
            Scalar acc = 0;
            for (int k = -radius; k <= radius; ++k) {
                const Index rr = r + k;
                if (rr >= 0 && rr < rows)
                    acc += static_cast<Scalar>(taps[static_cast<std::size_t>(k + radius)]) * tmp(rr, c);
            }
            out(r, c) = acc;
        }
    }
    return out;
}

/// Normalized Gaussian blur truncated at +-3 sigma.
template <typename Scalar>
Grid<Scalar> gaussian_blur(const Grid<Scalar>& g, double sigma)
{
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    auto taps = gaussian_taps(radius, sigma);
    double sum = 0.0;
    for (double t : taps)
        sum += t;
    for (double& t : taps)
        t /= sum;
    return separable_filter(g, taps);
}

/// Divides by the maximum so it becomes exactly 1. Grids with max <= 0 are zeroed.
template <typename Scalar>
void max_normalize(Grid<Scalar>& g)
{
    const Scalar m = g.maxCoeff();
    if (m > Scalar(0)) {
        g /= m;
        g = g.max(Scalar(0));
    } else {
        g.setZero();
    }
}

/// Row-major argmax as (row, col).
template <typename Derived>
std::pair<Index, Index> argmax(const Eigen::DenseBase<Derived>& g)
{
    Index r = 0;
    Index c = 0;
    g.maxCoeff(&r, &c);
    return {r, c};
}

}  // namespace fc
