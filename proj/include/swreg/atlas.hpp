#pragma once

// Groupwise atlas construction and population-diversity statistics.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "swreg/phantom.hpp"
#include "swreg/types.hpp"

namespace swreg {

/// Registers `moving` to `fixed`, returning the pull-back DDF on fixed's grid.
using RegisterFn = std::function<Ddf(const Volume& moving, const Volume& fixed)>;

/// Sim(i) = class-mean binary Dice between sample i's masks and the mean
/// mask binarized at 0.5. Returns argmax; ties go to the lowest index.
std::size_t init_atlas(const std::vector<Subject>& samples);

struct AtlasResult {
    Volume atlas;
    MaskSet probability;  // soft, mean of warped masks
    std::vector<Ddf> ddfs;  // sample i -> atlas
    int iterations = 0;
    std::vector<double> change_history;  // mean |A_k - A_{k-1}| per iteration
    std::size_t init_index = 0;
};

/// Iterates: register every sample to the atlas, average the warped
/// intensities and masks. Stops once the mean absolute atlas change drops
/// below tol * (intensity range of the initial atlas), or after max_iters.
/// Registration of distinct samples runs on parallel workers, so `reg` must
/// be safe to call concurrently.
AtlasResult build_atlas(const RegisterFn& reg, const std::vector<Subject>& samples, int max_iters = 3,
                        double tol = 1e-4);

/// Voxel mean of the population variance of { |u_i - u_j|^2 : i < j }.
double population_diversity(const std::vector<Ddf>& ddfs);

/// Set voxels times voxel volume, in mm^3.
double gland_volume(std::span<const double> mask, const Spacing& spacing);

struct DiversityReport {
    double sigma2_all = 0.0;
    std::vector<double> gland_volumes;
    std::vector<std::string> cohort;  // "top", "bottom" or "-" per sample
    double sigma2_top = 0.0;
    double sigma2_bottom = 0.0;
    /// top / bottom; empty when the bottom cohort has zero diversity.
    std::optional<double> ratio;

    [[nodiscard]] std::string csv() const;
};

/// Sorts samples by gland volume; the largest and smallest floor(N*fraction)
/// form the top and bottom cohorts. Throws if a cohort has fewer than 2.
DiversityReport cohort_diversity(const std::vector<Subject>& samples, const std::vector<Ddf>& ddfs,
                                 double fraction = 0.2, int gland_class = kGlandClass);

}  // namespace swreg
