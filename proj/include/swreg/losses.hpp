#pragma once

#include <optional>
#include <span>
#include <vector>

#include "swreg/types.hpp"

namespace swreg {

/// -2 sum(w r) / (sum w + sum r), in [-1, 0]. Both masks empty gives 0.
double dice_loss(std::span<const double> warped, std::span<const double> ref);

/// grad += scale * d(dice_loss)/d(warped).
void dice_loss_grad(std::span<const double> warped, std::span<const double> ref, double scale,
                    std::span<double> grad);

/// Mean over classes of dice_loss(moving_c o ddf, fixed_c). Throws if there are no classes.
double weak_supervision_loss(const MaskSet& moving, const MaskSet& fixed, const Ddf& ddf);

struct LossAndGrad {
    double value = 0.0;
    Ddf grad;  // dL/d(ddf)
};

/// weak_supervision_loss together with its gradient w.r.t. the DDF, taken
/// through the trilinear resampler.
LossAndGrad weak_supervision_loss_and_grad(const MaskSet& moving, const MaskSet& fixed, const Ddf& ddf);

/// Mean over components and voxels of (a - b)^2.
double mse_consistency(const Ddf& a, const Ddf& b);
/// d(mse_consistency)/d(a).
Ddf mse_consistency_grad(const Ddf& a, const Ddf& b);

/// weak + alpha * cons. Throws on negative alpha.
double total_loss(double weak, double cons, double alpha);

/// Binary Dice in percent; both empty gives 100.
double dice_score(std::span<const double> a, std::span<const double> b);

/// Voxels that are set and touch an unset 6-neighbour or the grid edge.
std::vector<std::size_t> surface_voxels(std::span<const double> mask, const Dims& dims);

/// 95th percentile of the pooled directed surface distances (both
/// directions, linear interpolation between order statistics), in mm.
/// Empty result when either mask is empty.
std::optional<double> hd95(std::span<const double> a, std::span<const double> b, const Dims& dims,
                           const Spacing& spacing);

/// Linear-interpolated quantile of `values` (sorted in place), q in [0, 1].
double quantile_linear(std::vector<double>& values, double q);

}  // namespace swreg
