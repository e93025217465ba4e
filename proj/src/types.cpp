#include "swreg/types.hpp"

#include <algorithm>
#include <cmath>

namespace swreg {

namespace {

void check_dims(const Dims& dims) {
    if (dims.w < 2 || dims.h < 2 || dims.d < 2) {
        throw std::invalid_argument("grid dims must be >= 2 on every axis, got " + dims.str());
    }
}

bool finite_span(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

std::string Dims::str() const {
    return std::to_string(w) + "x" + std::to_string(h) + "x" + std::to_string(d);
}

void require_same_dims(const Dims& a, const Dims& b, const char* where) {
    if (!(a == b)) {
        throw DimsMismatch(std::string(where) + ": dims mismatch " + a.str() + " vs " + b.str());
    }
}

Volume::Volume(Dims dims, Spacing spacing, double fill) : dims_(dims), spacing_(spacing) {
    check_dims(dims_);
    data_.assign(dims_.voxels(), fill);
}

Volume::Volume(Dims dims, Spacing spacing, std::vector<double> data)
    : dims_(dims), spacing_(spacing), data_(std::move(data)) {
    check_dims(dims_);
    if (data_.size() != dims_.voxels()) {
        throw std::invalid_argument("volume data length does not match dims " + dims_.str());
    }
}

bool Volume::all_finite() const { return finite_span(data_); }

Ddf::Ddf(Dims dims) : dims_(dims) {
    check_dims(dims_);
    data_.assign(3 * dims_.voxels(), 0.0);
}

Ddf::Ddf(Dims dims, std::vector<double> data) : dims_(dims), data_(std::move(data)) {
    check_dims(dims_);
    if (data_.size() != 3 * dims_.voxels()) {
        throw std::invalid_argument("ddf data length does not match 3 x " + dims_.str());
    }
}

Ddf Ddf::constant(Dims dims, const Vec3& u) {
    Ddf out(dims);
    for (int d = 0; d < 3; ++d) {
        auto ch = out.channel(d);
        std::fill(ch.begin(), ch.end(), u[static_cast<std::size_t>(d)]);
    }
    return out;
}

double Ddf::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

bool Ddf::all_finite() const { return finite_span(data_); }

MaskSet::MaskSet(Dims dims, int classes, MaskMode mode) : dims_(dims), classes_(classes), mode_(mode) {
    check_dims(dims_);
    if (classes < 0) throw std::invalid_argument("class count must be non-negative");
    data_.assign(static_cast<std::size_t>(classes) * dims_.voxels(), 0.0);
}

MaskSet::MaskSet(Dims dims, int classes, MaskMode mode, std::vector<double> data)
    : dims_(dims), classes_(classes), mode_(mode), data_(std::move(data)) {
    check_dims(dims_);
    if (classes < 0) throw std::invalid_argument("class count must be non-negative");
    if (data_.size() != static_cast<std::size_t>(classes) * dims_.voxels()) {
        throw std::invalid_argument("mask data length does not match classes x dims");
    }
}

void MaskSet::validate() const {
    const std::size_t n = dims_.voxels();
    if (mode_ == MaskMode::soft) {
        for (double v : data_) {
            if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("soft mask value outside [0,1]");
        }
        return;
    }
    for (std::size_t i = 0; i < n; ++i) {
        int ones = 0;
        for (int c = 0; c < classes_; ++c) {
            const double v = data_[static_cast<std::size_t>(c) * n + i];
            if (v != 0.0 && v != 1.0) throw std::invalid_argument("binary mask value not in {0,1}");
            ones += v == 1.0 ? 1 : 0;
        }
        if (ones > 1) throw std::invalid_argument("binary mask classes overlap at a voxel");
    }
}

MaskSet MaskSet::binarized(double threshold) const {
    std::vector<double> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(), [threshold](double v) { return v >= threshold ? 1.0 : 0.0; });
    return MaskSet(dims_, classes_, MaskMode::binary, std::move(out));
}

void ImagePair::validate() const {
    require_same_dims(moving.dims(), fixed.dims(), "ImagePair");
    if (moving_masks.has_value() != fixed_masks.has_value()) {
        throw std::invalid_argument("ImagePair: masks must be present on both images or neither");
    }
    if (moving_masks) {
        require_same_dims(moving_masks->dims(), moving.dims(), "ImagePair moving masks");
        require_same_dims(fixed_masks->dims(), moving.dims(), "ImagePair fixed masks");
        if (moving_masks->classes() != fixed_masks->classes()) {
            throw std::invalid_argument("ImagePair: mask class counts differ");
        }
    }
}

}  // namespace swreg
