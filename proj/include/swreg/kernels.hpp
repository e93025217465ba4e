#pragma once

// Voxel-parallel kernels behind the warp algebra and the registrar.
//
// Every kernel exists twice: `serial::` is the plain nested-loop reference
// used by the tests and the benchmark, `omp::` is the OpenMP version the
// library calls. Per-voxel maps are bit-identical between the two; the
// adjoint kernels sum in a different order and agree to rounding.
//
// Fields are flat spans in x-fastest order; a DDF span holds 3 channels
// back to back (x, y, z displacement).

#include <algorithm>
#include <array>
#include <cmath>
#include <span>

#include "swreg/types.hpp"

namespace swreg::kernels {

using Mat3 = std::array<std::array<double, 3>, 3>;

struct AxisWeights {
    int i0;
    double f;
    bool clamped;
};

/// Clamp-to-edge cell lookup along one axis of length n (n >= 2).
inline AxisWeights axis_weights(double p, int n) {
    bool clamped = false;
    const double hi = static_cast<double>(n - 1);
    if (p < 0.0) {
        p = 0.0;
        clamped = true;
    } else if (p > hi) {
        p = hi;
        clamped = true;
    }
    int i0 = static_cast<int>(std::floor(p));
    if (i0 > n - 2) i0 = n - 2;
    return {i0, p - static_cast<double>(i0), clamped};
}

inline double trilinear(std::span<const double> in, const Dims& dims, double px, double py, double pz) {
    const AxisWeights ax = axis_weights(px, dims.w);
    const AxisWeights ay = axis_weights(py, dims.h);
    const AxisWeights az = axis_weights(pz, dims.d);
    const std::size_t sx = 1;
    const std::size_t sy = static_cast<std::size_t>(dims.w);
    const std::size_t sz = sy * static_cast<std::size_t>(dims.h);
    const std::size_t b = dims.index(ax.i0, ay.i0, az.i0);
    const double c00 = in[b] * (1.0 - ax.f) + in[b + sx] * ax.f;
    const double c10 = in[b + sy] * (1.0 - ax.f) + in[b + sy + sx] * ax.f;
    const double c01 = in[b + sz] * (1.0 - ax.f) + in[b + sz + sx] * ax.f;
    const double c11 = in[b + sz + sy] * (1.0 - ax.f) + in[b + sz + sy + sx] * ax.f;
    const double c0 = c00 * (1.0 - ay.f) + c10 * ay.f;
    const double c1 = c01 * (1.0 - ay.f) + c11 * ay.f;
    return c0 * (1.0 - az.f) + c1 * az.f;
}

/// d(trilinear)/d(point). Zero along an axis where the point is clamped.
inline Vec3 trilinear_gradient(std::span<const double> in, const Dims& dims, double px, double py, double pz) {
    const AxisWeights ax = axis_weights(px, dims.w);
    const AxisWeights ay = axis_weights(py, dims.h);
    const AxisWeights az = axis_weights(pz, dims.d);
    const std::size_t sx = 1;
    const std::size_t sy = static_cast<std::size_t>(dims.w);
    const std::size_t sz = sy * static_cast<std::size_t>(dims.h);
    const std::size_t b = dims.index(ax.i0, ay.i0, az.i0);
    const double v000 = in[b], v100 = in[b + sx], v010 = in[b + sy], v110 = in[b + sy + sx];
    const double v001 = in[b + sz], v101 = in[b + sz + sx], v011 = in[b + sz + sy], v111 = in[b + sz + sy + sx];
    Vec3 g{0.0, 0.0, 0.0};
    if (!ax.clamped) {
        g[0] = ((v100 - v000) * (1.0 - ay.f) + (v110 - v010) * ay.f) * (1.0 - az.f) +
               ((v101 - v001) * (1.0 - ay.f) + (v111 - v011) * ay.f) * az.f;
    }
    if (!ay.clamped) {
        g[1] = ((v010 - v000) * (1.0 - ax.f) + (v110 - v100) * ax.f) * (1.0 - az.f) +
               ((v011 - v001) * (1.0 - ax.f) + (v111 - v101) * ax.f) * az.f;
    }
    if (!az.clamped) {
        g[2] = ((v001 - v000) * (1.0 - ax.f) + (v101 - v100) * ax.f) * (1.0 - ay.f) +
               ((v011 - v010) * (1.0 - ax.f) + (v111 - v110) * ax.f) * ay.f;
    }
    return g;
}

/// Rotation about x, then y, then z (angles in degrees), times diag(scale).
Mat3 affine_matrix(const Vec3& rotation_deg, const Vec3& scale);

namespace serial {

/// out(v) = in(v + u(v)).
void warp(std::span<const double> in, const Dims& dims, std::span<const double> ddf, std::span<double> out);

/// ddf_grad += dL/du, given dL/dout for out = warp(in, u).
void warp_ddf_grad(std::span<const double> in, const Dims& dims, std::span<const double> ddf,
                   std::span<const double> out_grad, std::span<double> ddf_grad);

/// out = b + (each channel of a warped by b).
void compose(std::span<const double> a, std::span<const double> b, const Dims& dims, std::span<double> out);

/// out(v) = (m - I)(v - c) + t.
void affine_field(const Mat3& m, const Vec3& center, const Vec3& t, const Dims& dims, std::span<double> out);

/// Align-corners trilinear resize of `channels` stacked coarse fields.
void upsample(std::span<const double> coarse, const Dims& cdims, int channels, const Dims& fdims,
              std::span<double> fine);

/// coarse_grad += transpose of upsample applied to fine_grad.
void upsample_adjoint(std::span<const double> fine_grad, const Dims& fdims, int channels, const Dims& cdims,
                      std::span<double> coarse_grad);

/// Block mean over factor^3 cells; dims must be divisible by factor.
void avg_pool(std::span<const double> in, const Dims& dims, int factor, std::span<double> out);

}  // namespace serial

// Same contracts as serial::.
namespace omp {

void warp(std::span<const double> in, const Dims& dims, std::span<const double> ddf, std::span<double> out);
void warp_ddf_grad(std::span<const double> in, const Dims& dims, std::span<const double> ddf,
                   std::span<const double> out_grad, std::span<double> ddf_grad);
void compose(std::span<const double> a, std::span<const double> b, const Dims& dims, std::span<double> out);
void affine_field(const Mat3& m, const Vec3& center, const Vec3& t, const Dims& dims, std::span<double> out);
void upsample(std::span<const double> coarse, const Dims& cdims, int channels, const Dims& fdims,
              std::span<double> fine);
void upsample_adjoint(std::span<const double> fine_grad, const Dims& fdims, int channels, const Dims& cdims,
                      std::span<double> coarse_grad);
void avg_pool(std::span<const double> in, const Dims& dims, int factor, std::span<double> out);

}  // namespace omp

/// Align-corners coordinate scale from a fine axis of length nf to a coarse one of length nc.
inline double resize_scale(int nf, int nc) {
    return nf > 1 ? static_cast<double>(nc - 1) / static_cast<double>(nf - 1) : 0.0;
}

}  // namespace swreg::kernels
