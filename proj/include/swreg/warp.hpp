#pragma once

// Resampling and composition of dense displacement fields.
//
// Convention: a DDF u pulls back, so warping I by u gives
// out(x) = I(x + u(x)), sampled trilinearly with clamp-to-edge borders.

#include <span>
#include <vector>

#include "swreg/kernels.hpp"
#include "swreg/types.hpp"

namespace swreg {

/// Trilinear value of `vol` at a continuous voxel coordinate; points outside
/// the grid are clamped to the border. Throws on a non-finite point.
double trilinear_sample(const Volume& vol, const Vec3& p);

Volume resample_volume(const Volume& input, const Ddf& ddf);

/// Warps one scalar channel laid out on `dims`.
std::vector<double> resample_channel(std::span<const double> input, const Dims& dims, const Ddf& ddf);

/// Warps every class channel; the result is always a soft mask set.
MaskSet resample_masks(const MaskSet& masks, const Ddf& ddf);

/// Each displacement channel of `a` warped by `b`.
Ddf resample_ddf(const Ddf& a, const Ddf& b);

/// b + resample_ddf(a, b): warping by the result matches warping by a, then by b.
Ddf compose_ddf(const Ddf& a, const Ddf& b);

/// Linear part of the affine map (rotation * scale).
kernels::Mat3 affine_linear_part(const AffineParams& p);

/// u(x) = M(x - c) + c + t - x. Throws on a non-positive scale.
Ddf affine_to_ddf(const AffineParams& p, const Dims& dims);

Ddf identity_ddf(const Dims& dims);

}  // namespace swreg
