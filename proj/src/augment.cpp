#include "swreg/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "swreg/warp.hpp"

namespace swreg {

namespace {

void check_range(const Range& r, const char* name) {
    if (!(r.lo <= r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi)) {
        throw std::invalid_argument(std::string("AugConfig: range '") + name + "' is not well-ordered");
    }
}

// out = m*a + (1-m)*b, element-wise; m is 0/1 so the result is exact.
std::vector<double> mix(std::span<const double> m, std::span<const double> a, std::span<const double> b) {
    std::vector<double> out(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) out[i] = m[i] * a[i] + (1.0 - m[i]) * b[i];
    return out;
}

MaskSet mix_masks(const CuboidMask& m, const MaskSet& from, const MaskSet& into) {
    const std::size_t n = into.dims().voxels();
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(into.classes()) * n);
    for (int c = 0; c < into.classes(); ++c) {
        const auto mixed = mix(m.data(), from.channel(c), into.channel(c));
        out.insert(out.end(), mixed.begin(), mixed.end());
    }
    const MaskMode mode =
        from.mode() == MaskMode::binary && into.mode() == MaskMode::binary ? MaskMode::binary : MaskMode::soft;
    return MaskSet(into.dims(), into.classes(), mode, std::move(out));
}

}  // namespace

void AugConfig::validate() const {
    check_range(rotation_deg, "rotation_deg");
    check_range(scale, "scale");
    if (!(scale.lo > 0.0)) throw std::invalid_argument("AugConfig: scale range must be positive");
    if (translation_vox) check_range(*translation_vox, "translation_vox");
    check_range(cuboid_fraction, "cuboid_fraction");
    if (!(cuboid_fraction.lo > 0.0) || cuboid_fraction.hi > 1.0) {
        throw std::invalid_argument("AugConfig: cuboid fractions must lie in (0, 1]");
    }
}

Range AugConfig::translation_for(const Dims& dims) const {
    if (translation_vox) return *translation_vox;
    const double t = 20.0 / 256.0 * dims.w;
    return {-t, t};
}

CuboidMask::CuboidMask(const Dims& dims) : dims_(dims), data_(dims.voxels(), 0.0) {}

CuboidMask::CuboidMask(const Dims& dims, const Cuboid& box) : CuboidMask(dims) {
    if (box.w < 1 || box.h < 1 || box.d < 1 || box.x < 0 || box.y < 0 || box.z < 0 || box.x + box.w > dims.w ||
        box.y + box.h > dims.h || box.z + box.d > dims.d) {
        throw std::invalid_argument("cuboid does not fit inside grid " + dims.str());
    }
    box_ = box;
    for (int z = box.z; z < box.z + box.d; ++z) {
        for (int y = box.y; y < box.y + box.h; ++y) {
            for (int x = box.x; x < box.x + box.w; ++x) data_[dims.index(x, y, z)] = 1.0;
        }
    }
}

CuboidMask CuboidMask::empty(const Dims& dims) { return CuboidMask(dims); }

AffineParams sample_affine(Rng& rng, const AugConfig& cfg, const Dims& dims) {
    const Range t = cfg.translation_for(dims);
    AffineParams p;
    for (auto& a : p.rotation_deg) a = rng.uniform(cfg.rotation_deg.lo, cfg.rotation_deg.hi);
    for (auto& s : p.scale) s = rng.uniform(cfg.scale.lo, cfg.scale.hi);
    for (auto& v : p.translation) v = rng.uniform(t.lo, t.hi);
    return p;
}

Ddf sample_warpddf(Rng& rng, const AugConfig& cfg, const Dims& dims) {
    return affine_to_ddf(sample_affine(rng, cfg, dims), dims);
}

double warpddf_displacement_bound(const AugConfig& cfg, const Dims& dims) {
    // |u| <= (|S - I| + |R - I|) |x - c| + |t|, with |R - I| <= sum_k 2 sin(|theta_k| / 2).
    constexpr double kDeg = 3.14159265358979323846 / 180.0;
    const double theta = std::max(std::abs(cfg.rotation_deg.lo), std::abs(cfg.rotation_deg.hi)) * kDeg;
    const double rot = 3.0 * 2.0 * std::sin(std::min(theta, 3.14159265358979323846) / 2.0);
    const double scl = std::max(std::abs(cfg.scale.lo - 1.0), std::abs(cfg.scale.hi - 1.0));
    const Vec3 c = dims.center();
    const double r = std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
    const Range t = cfg.translation_for(dims);
    const double tmax = std::max(std::abs(t.lo), std::abs(t.hi));
    return (scl + rot) * r + std::sqrt(3.0) * tmax;
}

ImagePair warpddf_apply(const ImagePair& pair, const Ddf& u_aug) {
    pair.validate();
    require_same_dims(pair.dims(), u_aug.dims(), "warpddf_apply");
    ImagePair out = pair;
    out.fixed = resample_volume(pair.fixed, u_aug);
    if (pair.fixed_masks) out.fixed_masks = resample_masks(*pair.fixed_masks, u_aug);
    return out;
}

Ddf warpddf_transform_output(const Ddf& u_t, const Ddf& u_aug) { return compose_ddf(u_t, u_aug); }

CuboidMask sample_cuboid(Rng& rng, const AugConfig& cfg, const Dims& dims) {
    std::array<int, 3> extent{};
    std::array<int, 3> origin{};
    for (int a = 0; a < 3; ++a) {
        const int n = dims.extent(a);
        const double f = rng.uniform(cfg.cuboid_fraction.lo, cfg.cuboid_fraction.hi);
        extent[static_cast<std::size_t>(a)] = std::clamp(static_cast<int>(std::floor(f * n + 0.5)), 1, n);
    }
    for (int a = 0; a < 3; ++a) {
        const int slack = dims.extent(a) - extent[static_cast<std::size_t>(a)];
        origin[static_cast<std::size_t>(a)] = static_cast<int>(rng.below(static_cast<std::uint64_t>(slack) + 1));
    }
    return CuboidMask(dims, Cuboid{origin[0], origin[1], origin[2], extent[0], extent[1], extent[2]});
}

ImagePair regcut_apply(const ImagePair& pair, const CuboidMask& mask) {
    pair.validate();
    require_same_dims(pair.dims(), mask.dims(), "regcut_apply");
    ImagePair out = pair;
    out.moving = Volume(pair.dims(), pair.moving.spacing(), mix(mask.data(), pair.fixed.data(), pair.moving.data()));
    if (pair.moving_masks) out.moving_masks = mix_masks(mask, *pair.fixed_masks, *pair.moving_masks);
    return out;
}

Ddf regcut_transform_output(const Ddf& u_t, const CuboidMask& mask) {
    require_same_dims(u_t.dims(), mask.dims(), "regcut_transform_output");
    Ddf out = u_t;
    const auto m = mask.data();
    for (int d = 0; d < 3; ++d) {
        auto ch = out.channel(d);
        for (std::size_t i = 0; i < ch.size(); ++i) ch[i] = (1.0 - m[i]) * ch[i];
    }
    return out;
}

ImagePair combined_apply(const ImagePair& pair, const Ddf& u_aug, const CuboidMask& mask) {
    return regcut_apply(warpddf_apply(pair, u_aug), mask);
}

Ddf combined_transform_output(const Ddf& u_t, const Ddf& u_aug, const CuboidMask& mask) {
    return regcut_transform_output(warpddf_transform_output(u_t, u_aug), mask);
}

}  // namespace swreg
