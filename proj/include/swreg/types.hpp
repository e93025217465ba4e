#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace swreg {

/// Raised when two grids that must share a shape do not.
class DimsMismatch : public std::invalid_argument {
public:
    explicit DimsMismatch(const std::string& what) : std::invalid_argument(what) {}
};

struct Dims {
    int w = 0;
    int h = 0;
    int d = 0;

    [[nodiscard]] std::size_t voxels() const {
        return static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * static_cast<std::size_t>(d);
    }
    /// x fastest, then y, then z.
    [[nodiscard]] std::size_t index(int x, int y, int z) const {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(w) * (static_cast<std::size_t>(y) + static_cast<std::size_t>(h) * static_cast<std::size_t>(z));
    }
    [[nodiscard]] int extent(int axis) const { return axis == 0 ? w : (axis == 1 ? h : d); }
    [[nodiscard]] std::array<double, 3> center() const {
        return {0.5 * (w - 1), 0.5 * (h - 1), 0.5 * (d - 1)};
    }
    [[nodiscard]] std::string str() const;

    friend bool operator==(const Dims&, const Dims&) = default;
};

struct Spacing {
    double x = 1.0;
    double y = 1.0;
    double z = 1.0;

    [[nodiscard]] double voxel_volume() const { return x * y * z; }
    friend bool operator==(const Spacing&, const Spacing&) = default;
};

using Vec3 = std::array<double, 3>;

void require_same_dims(const Dims& a, const Dims& b, const char* where);

/// Scalar 3D intensity grid.
class Volume {
public:
    Volume() = default;
    explicit Volume(Dims dims, Spacing spacing = {}, double fill = 0.0);
    Volume(Dims dims, Spacing spacing, std::vector<double> data);

    [[nodiscard]] const Dims& dims() const { return dims_; }
    [[nodiscard]] const Spacing& spacing() const { return spacing_; }
    void set_spacing(Spacing s) { spacing_ = s; }

    [[nodiscard]] double& at(int x, int y, int z) { return data_[dims_.index(x, y, z)]; }
    [[nodiscard]] double at(int x, int y, int z) const { return data_[dims_.index(x, y, z)]; }

    [[nodiscard]] std::span<double> data() { return data_; }
    [[nodiscard]] std::span<const double> data() const { return data_; }
    [[nodiscard]] std::vector<double>& values() { return data_; }
    [[nodiscard]] const std::vector<double>& values() const { return data_; }

    [[nodiscard]] bool all_finite() const;

    friend bool operator==(const Volume&, const Volume&) = default;

private:
    Dims dims_{};
    Spacing spacing_{};
    std::vector<double> data_;
};

/// Dense displacement field in voxel units; channel-major storage
/// (all x-displacements, then all y, then all z).
class Ddf {
public:
    Ddf() = default;
    explicit Ddf(Dims dims);
    Ddf(Dims dims, std::vector<double> data);

    static Ddf constant(Dims dims, const Vec3& u);

    [[nodiscard]] const Dims& dims() const { return dims_; }

    [[nodiscard]] std::span<double> channel(int d) {
        return std::span<double>(data_).subspan(static_cast<std::size_t>(d) * dims_.voxels(), dims_.voxels());
    }
    [[nodiscard]] std::span<const double> channel(int d) const {
        return std::span<const double>(data_).subspan(static_cast<std::size_t>(d) * dims_.voxels(), dims_.voxels());
    }
    [[nodiscard]] Vec3 at(std::size_t voxel) const {
        const std::size_t n = dims_.voxels();
        return {data_[voxel], data_[n + voxel], data_[2 * n + voxel]};
    }
    [[nodiscard]] Vec3 at(int x, int y, int z) const { return at(dims_.index(x, y, z)); }

    [[nodiscard]] std::span<double> data() { return data_; }
    [[nodiscard]] std::span<const double> data() const { return data_; }
    [[nodiscard]] std::vector<double>& values() { return data_; }
    [[nodiscard]] const std::vector<double>& values() const { return data_; }

    [[nodiscard]] double max_abs() const;
    [[nodiscard]] bool all_finite() const;

    friend bool operator==(const Ddf&, const Ddf&) = default;

private:
    Dims dims_{};
    std::vector<double> data_;
};

enum class MaskMode { binary, soft };

/// C-channel segmentation masks, channel-major.
class MaskSet {
public:
    MaskSet() = default;
    MaskSet(Dims dims, int classes, MaskMode mode = MaskMode::binary);
    MaskSet(Dims dims, int classes, MaskMode mode, std::vector<double> data);

    [[nodiscard]] const Dims& dims() const { return dims_; }
    [[nodiscard]] int classes() const { return classes_; }
    [[nodiscard]] MaskMode mode() const { return mode_; }

    [[nodiscard]] std::span<double> channel(int c) {
        return std::span<double>(data_).subspan(static_cast<std::size_t>(c) * dims_.voxels(), dims_.voxels());
    }
    [[nodiscard]] std::span<const double> channel(int c) const {
        return std::span<const double>(data_).subspan(static_cast<std::size_t>(c) * dims_.voxels(), dims_.voxels());
    }
    [[nodiscard]] std::span<const double> data() const { return data_; }

    /// Throws std::invalid_argument when the mode invariant is violated.
    void validate() const;
    /// Binary masks by thresholding every channel at `threshold`.
    [[nodiscard]] MaskSet binarized(double threshold = 0.5) const;

    friend bool operator==(const MaskSet&, const MaskSet&) = default;

private:
    Dims dims_{};
    int classes_ = 0;
    MaskMode mode_ = MaskMode::binary;
    std::vector<double> data_;
};

struct ImagePair {
    Volume moving;
    Volume fixed;
    std::optional<MaskSet> moving_masks;
    std::optional<MaskSet> fixed_masks;

    [[nodiscard]] const Dims& dims() const { return moving.dims(); }
    void validate() const;
};

/// Rotation (Euler degrees, applied x then y then z), per-axis scale and
/// translation in voxels, about `center` (defaults to the grid center).
struct AffineParams {
    Vec3 rotation_deg{0.0, 0.0, 0.0};
    Vec3 scale{1.0, 1.0, 1.0};
    Vec3 translation{0.0, 0.0, 0.0};
    std::optional<Vec3> center;
};

}  // namespace swreg
