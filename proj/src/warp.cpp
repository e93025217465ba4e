#include "swreg/warp.hpp"

#include <cmath>
#include <stdexcept>

namespace swreg {

double trilinear_sample(const Volume& vol, const Vec3& p) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2])) {
        throw std::invalid_argument("trilinear_sample: non-finite sample point");
    }
    return kernels::trilinear(vol.data(), vol.dims(), p[0], p[1], p[2]);
}

std::vector<double> resample_channel(std::span<const double> input, const Dims& dims, const Ddf& ddf) {
    require_same_dims(dims, ddf.dims(), "resample");
    if (input.size() != dims.voxels()) throw std::invalid_argument("resample: channel length does not match dims");
    std::vector<double> out(dims.voxels());
    kernels::omp::warp(input, dims, ddf.data(), out);
    return out;
}

Volume resample_volume(const Volume& input, const Ddf& ddf) {
    return Volume(input.dims(), input.spacing(), resample_channel(input.data(), input.dims(), ddf));
}

MaskSet resample_masks(const MaskSet& masks, const Ddf& ddf) {
    require_same_dims(masks.dims(), ddf.dims(), "resample_masks");
    const std::size_t n = masks.dims().voxels();
    std::vector<double> out(static_cast<std::size_t>(masks.classes()) * n);
    for (int c = 0; c < masks.classes(); ++c) {
        kernels::omp::warp(masks.channel(c), masks.dims(), ddf.data(),
                           std::span<double>(out).subspan(static_cast<std::size_t>(c) * n, n));
    }
    return MaskSet(masks.dims(), masks.classes(), MaskMode::soft, std::move(out));
}

Ddf resample_ddf(const Ddf& a, const Ddf& b) {
    require_same_dims(a.dims(), b.dims(), "resample_ddf");
    Ddf out(a.dims());
    for (int d = 0; d < 3; ++d) kernels::omp::warp(a.channel(d), a.dims(), b.data(), out.channel(d));
    return out;
}

Ddf compose_ddf(const Ddf& a, const Ddf& b) {
    require_same_dims(a.dims(), b.dims(), "compose_ddf");
    Ddf out(a.dims());
    kernels::omp::compose(a.data(), b.data(), a.dims(), out.data());
    return out;
}

kernels::Mat3 affine_linear_part(const AffineParams& p) {
    for (double s : p.scale) {
        if (!(s > 0.0)) throw std::invalid_argument("affine scale factors must be > 0");
    }
    return kernels::affine_matrix(p.rotation_deg, p.scale);
}

Ddf affine_to_ddf(const AffineParams& p, const Dims& dims) {
    const kernels::Mat3 m = affine_linear_part(p);
    Ddf out(dims);
    kernels::omp::affine_field(m, p.center.value_or(dims.center()), p.translation, dims, out.data());
    return out;
}

Ddf identity_ddf(const Dims& dims) { return Ddf(dims); }

}  // namespace swreg
