#pragma once

// Commutative perturbation pairs (A, Ã): an image-domain augmentation A of an
// unlabelled pair and the matching transform-domain map Ã on a predicted DDF.
//
//   WarpDDF:  fixed <- fixed o u_aug          Ã(U) = u_aug + U o u_aug
//   RegCut:   moving <- M*fixed + (1-M)*moving  Ã(U) = (1-M) * U
//   Combined: WarpDDF on fixed first, then RegCut reads the warped fixed;
//             Ã(U) = (1-M) * (u_aug + U o u_aug)

#include <cstdint>
#include <optional>
#include <vector>

#include "swreg/rng.hpp"
#include "swreg/types.hpp"

namespace swreg {

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct AugConfig {
    Range rotation_deg{-5.0, 5.0};
    Range scale{0.75, 1.25};
    /// Unset: +/-(20/256)*W voxels on every axis.
    std::optional<Range> translation_vox;
    Range cuboid_fraction{0.1, 0.5};
    /// Mixed into the trainer's augmentation stream.
    std::uint64_t seed = 0;

    void validate() const;
    [[nodiscard]] Range translation_for(const Dims& dims) const;
};

/// Half-open box [x, x+w) x [y, y+h) x [z, z+d).
struct Cuboid {
    int x = 0, y = 0, z = 0;
    int w = 0, h = 0, d = 0;

    [[nodiscard]] bool contains(int px, int py, int pz) const {
        return px >= x && px < x + w && py >= y && py < y + h && pz >= z && pz < z + d;
    }
    [[nodiscard]] std::size_t voxels() const {
        return static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(d);
    }
    friend bool operator==(const Cuboid&, const Cuboid&) = default;
};

class CuboidMask {
public:
    /// Throws if the cuboid does not lie fully inside the grid.
    CuboidMask(const Dims& dims, const Cuboid& box);
    /// All-zero mask (no cuboid); RegCut becomes the identity.
    static CuboidMask empty(const Dims& dims);

    [[nodiscard]] const Dims& dims() const { return dims_; }
    [[nodiscard]] const std::optional<Cuboid>& cuboid() const { return box_; }
    [[nodiscard]] std::span<const double> data() const { return data_; }
    [[nodiscard]] std::size_t count() const { return box_ ? box_->voxels() : 0; }

private:
    explicit CuboidMask(const Dims& dims);

    Dims dims_;
    std::optional<Cuboid> box_;
    std::vector<double> data_;
};

AffineParams sample_affine(Rng& rng, const AugConfig& cfg, const Dims& dims);
Ddf sample_warpddf(Rng& rng, const AugConfig& cfg, const Dims& dims);

/// Upper bound on max |u| over every DDF sample_warpddf can return.
double warpddf_displacement_bound(const AugConfig& cfg, const Dims& dims);

ImagePair warpddf_apply(const ImagePair& pair, const Ddf& u_aug);
Ddf warpddf_transform_output(const Ddf& u_t, const Ddf& u_aug);

CuboidMask sample_cuboid(Rng& rng, const AugConfig& cfg, const Dims& dims);
ImagePair regcut_apply(const ImagePair& pair, const CuboidMask& mask);
Ddf regcut_transform_output(const Ddf& u_t, const CuboidMask& mask);

ImagePair combined_apply(const ImagePair& pair, const Ddf& u_aug, const CuboidMask& mask);
Ddf combined_transform_output(const Ddf& u_t, const Ddf& u_aug, const CuboidMask& mask);

}  // namespace swreg
