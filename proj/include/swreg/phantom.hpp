#pragma once

// Synthetic multi-structure phantoms: an inter-subject stand-in for a
// labelled pelvic dataset, with exact analytic masks.
//
// Classes: 0 large ellipsoid, 1 small ellipsoid (the "gland" used for
// cohort splits), 2 tube along z, 3 shell around class 1. Overlaps resolve
// by priority 1 > 3 > 0 > 2, so masks are mutually exclusive.

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "swreg/types.hpp"

namespace swreg {

inline constexpr int kPhantomClasses = 4;
inline constexpr int kGlandClass = 1;

struct PhantomConfig {
    Dims dims{32, 32, 16};
    Spacing spacing{1.5, 1.5, 3.0};
    /// Per-subject global shift, as a fraction of each grid extent.
    double translation_jitter = 0.06;
    /// Global scale drawn from 1 +/- scale_jitter; per-structure scale from 1 +/- scale_jitter / 2.
    double scale_jitter = 0.12;
    /// Per-structure centre offset, fraction of each grid extent.
    double offset_jitter = 0.03;
    double background = 0.1;
    std::array<double, kPhantomClasses> intensity{0.9, 0.5, 0.7, 0.3};
    double noise_sigma = 0.02;
    double bias_amplitude = 0.05;
    int subjects = 50;
    double train_fraction = 0.75;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument if any structure can leave the grid at
    /// the jitter extremes, or a field is out of range.
    void validate() const;
};

struct Subject {
    int id = 0;
    Volume image;
    MaskSet masks;
};

Subject generate_subject(const PhantomConfig& cfg, std::uint64_t subject_seed, int id = 0);

using PairList = std::vector<std::pair<std::size_t, std::size_t>>;

/// All ordered (moving, fixed) pairs of distinct entries of `indices`.
PairList ordered_pairs(const std::vector<std::size_t>& indices);

struct Dataset {
    std::vector<Subject> subjects;
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    PairList train_pairs;
    PairList test_pairs;
};

/// N subjects from per-subject seeds derived from `seed`, split train/test
/// by cfg.train_fraction (rounded).
Dataset generate_dataset(const PhantomConfig& cfg, int n, std::uint64_t seed);

}  // namespace swreg
