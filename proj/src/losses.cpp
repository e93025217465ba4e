#include "swreg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "swreg/kernels.hpp"
#include "swreg/parallel.hpp"
#include "swreg/warp.hpp"

namespace swreg {

namespace {

void require_same_size(std::span<const double> a, std::span<const double> b, const char* where) {
    if (a.size() != b.size()) throw DimsMismatch(std::string(where) + ": length mismatch");
}

void require_binary(std::span<const double> m, const char* where) {
    for (double v : m) {
        if (v != 0.0 && v != 1.0) throw std::invalid_argument(std::string(where) + ": mask is not binary");
    }
}

}  // namespace

double dice_loss(std::span<const double> warped, std::span<const double> ref) {
    require_same_size(warped, ref, "dice_loss");
    double inter = 0.0, sw = 0.0, sr = 0.0;
    for (std::size_t i = 0; i < warped.size(); ++i) {
        inter += warped[i] * ref[i];
        sw += warped[i];
        sr += ref[i];
    }
    const double denom = sw + sr;
    if (denom == 0.0) return 0.0;
    return -2.0 * inter / denom;
}

void dice_loss_grad(std::span<const double> warped, std::span<const double> ref, double scale,
                    std::span<double> grad) {
    require_same_size(warped, ref, "dice_loss_grad");
    double inter = 0.0, sw = 0.0, sr = 0.0;
    for (std::size_t i = 0; i < warped.size(); ++i) {
        inter += warped[i] * ref[i];
        sw += warped[i];
        sr += ref[i];
    }
    const double denom = sw + sr;
    if (denom == 0.0) return;
    const double a = -2.0 / denom;
    const double b = 2.0 * inter / (denom * denom);
    for (std::size_t i = 0; i < warped.size(); ++i) grad[i] += scale * (a * ref[i] + b);
}

double weak_supervision_loss(const MaskSet& moving, const MaskSet& fixed, const Ddf& ddf) {
    if (moving.classes() == 0) throw std::invalid_argument("weak_supervision_loss: no classes");
    if (moving.classes() != fixed.classes()) throw std::invalid_argument("weak_supervision_loss: class counts differ");
    require_same_dims(moving.dims(), fixed.dims(), "weak_supervision_loss");
    const MaskSet warped = resample_masks(moving, ddf);
    double total = 0.0;
    for (int c = 0; c < moving.classes(); ++c) total += dice_loss(warped.channel(c), fixed.channel(c));
    return total / moving.classes();
}

LossAndGrad weak_supervision_loss_and_grad(const MaskSet& moving, const MaskSet& fixed, const Ddf& ddf) {
    if (moving.classes() == 0) throw std::invalid_argument("weak_supervision_loss: no classes");
    if (moving.classes() != fixed.classes()) throw std::invalid_argument("weak_supervision_loss: class counts differ");
    require_same_dims(moving.dims(), fixed.dims(), "weak_supervision_loss");
    const Dims& dims = moving.dims();
    const MaskSet warped = resample_masks(moving, ddf);
    const double inv_c = 1.0 / moving.classes();
    LossAndGrad out{0.0, Ddf(dims)};
    std::vector<double> dwarp(dims.voxels());
    for (int c = 0; c < moving.classes(); ++c) {
        out.value += dice_loss(warped.channel(c), fixed.channel(c));
        std::fill(dwarp.begin(), dwarp.end(), 0.0);
        dice_loss_grad(warped.channel(c), fixed.channel(c), inv_c, dwarp);
        kernels::omp::warp_ddf_grad(moving.channel(c), dims, ddf.data(), dwarp, out.grad.data());
    }
    out.value *= inv_c;
    return out;
}

double mse_consistency(const Ddf& a, const Ddf& b) {
    require_same_dims(a.dims(), b.dims(), "mse_consistency");
    const auto av = a.data();
    const auto bv = b.data();
    double s = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        const double d = av[i] - bv[i];
        s += d * d;
    }
    return s / static_cast<double>(av.size());
}

Ddf mse_consistency_grad(const Ddf& a, const Ddf& b) {
    require_same_dims(a.dims(), b.dims(), "mse_consistency_grad");
    Ddf g(a.dims());
    const auto av = a.data();
    const auto bv = b.data();
    auto gv = g.data();
    const double k = 2.0 / static_cast<double>(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) gv[i] = k * (av[i] - bv[i]);
    return g;
}

double total_loss(double weak, double cons, double alpha) {
    if (!(alpha >= 0.0)) throw std::invalid_argument("total_loss: alpha must be >= 0");
    return weak + alpha * cons;
}

double dice_score(std::span<const double> a, std::span<const double> b) {
    require_same_size(a, b, "dice_score");
    require_binary(a, "dice_score");
    require_binary(b, "dice_score");
    double inter = 0.0, sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        inter += a[i] * b[i];
        sa += a[i];
        sb += b[i];
    }
    if (sa + sb == 0.0) return 100.0;
    return 100.0 * 2.0 * inter / (sa + sb);
}

std::vector<std::size_t> surface_voxels(std::span<const double> mask, const Dims& dims) {
    std::vector<std::size_t> out;
    for (int z = 0; z < dims.d; ++z) {
        for (int y = 0; y < dims.h; ++y) {
            for (int x = 0; x < dims.w; ++x) {
                const std::size_t v = dims.index(x, y, z);
                if (mask[v] != 1.0) continue;
                const bool edge = x == 0 || y == 0 || z == 0 || x == dims.w - 1 || y == dims.h - 1 || z == dims.d - 1;
                if (edge || mask[dims.index(x - 1, y, z)] == 0.0 || mask[dims.index(x + 1, y, z)] == 0.0 ||
                    mask[dims.index(x, y - 1, z)] == 0.0 || mask[dims.index(x, y + 1, z)] == 0.0 ||
                    mask[dims.index(x, y, z - 1)] == 0.0 || mask[dims.index(x, y, z + 1)] == 0.0) {
                    out.push_back(v);
                }
            }
        }
    }
    return out;
}

double quantile_linear(std::vector<double>& values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile of an empty set");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

namespace {

std::vector<Vec3> physical_points(const std::vector<std::size_t>& voxels, const Dims& dims, const Spacing& sp) {
    std::vector<Vec3> pts;
    pts.reserve(voxels.size());
    const auto w = static_cast<std::size_t>(dims.w);
    const auto h = static_cast<std::size_t>(dims.h);
    for (std::size_t v : voxels) {
        pts.push_back({static_cast<double>(v % w) * sp.x, static_cast<double>((v / w) % h) * sp.y,
                       static_cast<double>(v / (w * h)) * sp.z});
    }
    return pts;
}

// Nearest distance from each point of `from` to the set `to`.
std::vector<double> directed_distances(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
    std::vector<double> out(from.size());
    const auto n = static_cast<long long>(from.size());
#pragma omp parallel for schedule(static) num_threads(parallel::threads()) \
    if (from.size() * to.size() >= parallel::kMinParallelWork)
    for (long long i = 0; i < n; ++i) {
        const Vec3& p = from[static_cast<std::size_t>(i)];
        double best = std::numeric_limits<double>::infinity();
        for (const Vec3& q : to) {
            const double dx = p[0] - q[0], dy = p[1] - q[1], dz = p[2] - q[2];
            best = std::min(best, dx * dx + dy * dy + dz * dz);
        }
        out[static_cast<std::size_t>(i)] = std::sqrt(best);
    }
    return out;
}

}  // namespace

std::optional<double> hd95(std::span<const double> a, std::span<const double> b, const Dims& dims,
                           const Spacing& spacing) {
    if (a.size() != dims.voxels() || b.size() != dims.voxels()) throw DimsMismatch("hd95: mask length mismatch");
    require_binary(a, "hd95");
    require_binary(b, "hd95");
    const auto pa = physical_points(surface_voxels(a, dims), dims, spacing);
    const auto pb = physical_points(surface_voxels(b, dims), dims, spacing);
    if (pa.empty() || pb.empty()) return std::nullopt;
    std::vector<double> pooled = directed_distances(pa, pb);
    const auto back = directed_distances(pb, pa);
    pooled.insert(pooled.end(), back.begin(), back.end());
    return quantile_linear(pooled, 0.95);
}

}  // namespace swreg
