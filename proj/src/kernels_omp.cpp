#include <stdexcept>
#include <utility>
#include <vector>

#include "swreg/kernels.hpp"
#include "swreg/parallel.hpp"

namespace swreg::kernels::omp {

namespace {

struct Coord {
    int x, y, z;
};

inline Coord unflatten(std::size_t v, const Dims& dims) {
    const auto w = static_cast<std::size_t>(dims.w);
    const auto h = static_cast<std::size_t>(dims.h);
    return {static_cast<int>(v % w), static_cast<int>((v / w) % h), static_cast<int>(v / (w * h))};
}

// For each coarse index along one axis: the fine indices whose
// interpolation cell touches it, with their weights.
std::vector<std::vector<std::pair<int, double>>> axis_taps(int nf, int nc) {
    std::vector<std::vector<std::pair<int, double>>> taps(static_cast<std::size_t>(nc));
    const double s = resize_scale(nf, nc);
    for (int i = 0; i < nf; ++i) {
        const AxisWeights a = axis_weights(i * s, nc);
        taps[static_cast<std::size_t>(a.i0)].emplace_back(i, 1.0 - a.f);
        taps[static_cast<std::size_t>(a.i0 + 1)].emplace_back(i, a.f);
    }
    return taps;
}

}  // namespace

void warp(std::span<const double> in, const Dims& dims, std::span<const double> ddf, std::span<double> out) {
    const std::size_t n = dims.voxels();
    const auto nn = static_cast<long long>(n);
#pragma omp parallel for schedule(static) num_threads(parallel::threads()) if (n >= parallel::kMinParallelWork)
    for (long long i = 0; i < nn; ++i) {
        const auto v = static_cast<std::size_t>(i);
        const Coord p = unflatten(v, dims);
        out[v] = trilinear(in, dims, p.x + ddf[v], p.y + ddf[n + v], p.z + ddf[2 * n + v]);
    }
}

void warp_ddf_grad(std::span<const double> in, const Dims& dims, std::span<const double> ddf,
                   std::span<const double> out_grad, std::span<double> ddf_grad) {
    const std::size_t n = dims.voxels();
    const auto nn = static_cast<long long>(n);
#pragma omp parallel for schedule(static) num_threads(parallel::threads()) if (n >= parallel::kMinParallelWork)
    for (long long i = 0; i < nn; ++i) {
        const auto v = static_cast<std::size_t>(i);
        const double g = out_grad[v];
        if (g == 0.0) continue;
        const Coord p = unflatten(v, dims);
        const Vec3 dp = trilinear_gradient(in, dims, p.x + ddf[v], p.y + ddf[n + v], p.z + ddf[2 * n + v]);
        ddf_grad[v] += g * dp[0];
        ddf_grad[n + v] += g * dp[1];
        ddf_grad[2 * n + v] += g * dp[2];
    }
}

void compose(std::span<const double> a, std::span<const double> b, const Dims& dims, std::span<double> out) {
    const std::size_t n = dims.voxels();
    const auto nn = static_cast<long long>(n);
#pragma omp parallel for schedule(static) num_threads(parallel::threads()) if (n >= parallel::kMinParallelWork)
    for (long long i = 0; i < nn; ++i) {
        const auto v = static_cast<std::size_t>(i);
        const Coord p = unflatten(v, dims);
        const double px = p.x + b[v], py = p.y + b[n + v], pz = p.z + b[2 * n + v];
        for (std::size_t c = 0; c < 3; ++c) {
            out[c * n + v] = b[c * n + v] + trilinear(a.subspan(c * n, n), dims, px, py, pz);
        }
    }
}

void affine_field(const Mat3& m, const Vec3& center, const Vec3& t, const Dims& dims, std::span<double> out) {
    const std::size_t n = dims.voxels();
    const auto nn = static_cast<long long>(n);
#pragma omp parallel for schedule(static) num_threads(parallel::threads()) if (n >= parallel::kMinParallelWork)
    for (long long k = 0; k < nn; ++k) {
        const auto v = static_cast<std::size_t>(k);
        const Coord p = unflatten(v, dims);
        const Vec3 r{p.x - center[0], p.y - center[1], p.z - center[2]};
        for (int i = 0; i < 3; ++i) {
            double s = t[static_cast<std::size_t>(i)];
            for (int j = 0; j < 3; ++j) s += (m[i][j] - (i == j ? 1.0 : 0.0)) * r[static_cast<std::size_t>(j)];
            out[static_cast<std::size_t>(i) * n + v] = s;
        }
    }
}

void upsample(std::span<const double> coarse, const Dims& cdims, int channels, const Dims& fdims,
              std::span<double> fine) {
    const std::size_t nc = cdims.voxels();
    const std::size_t nf = fdims.voxels();
    const double sx = resize_scale(fdims.w, cdims.w);
    const double sy = resize_scale(fdims.h, cdims.h);
    const double sz = resize_scale(fdims.d, cdims.d);
    const auto total = static_cast<long long>(nf * static_cast<std::size_t>(channels));
#pragma omp parallel for schedule(static) num_threads(parallel::threads()) \
    if (static_cast<std::size_t>(total) >= parallel::kMinParallelWork)
    for (long long k = 0; k < total; ++k) {
        const auto c = static_cast<std::size_t>(k) / nf;
        const auto v = static_cast<std::size_t>(k) % nf;
        const Coord p = unflatten(v, fdims);
        fine[static_cast<std::size_t>(k)] = trilinear(coarse.subspan(c * nc, nc), cdims, p.x * sx, p.y * sy, p.z * sz);
    }
}

void upsample_adjoint(std::span<const double> fine_grad, const Dims& fdims, int channels, const Dims& cdims,
                      std::span<double> coarse_grad) {
    const std::size_t nc = cdims.voxels();
    const std::size_t nf = fdims.voxels();
    const auto tx = axis_taps(fdims.w, cdims.w);
    const auto ty = axis_taps(fdims.h, cdims.h);
    const auto tz = axis_taps(fdims.d, cdims.d);
    const auto total = static_cast<long long>(nc * static_cast<std::size_t>(channels));
#pragma omp parallel for schedule(static) num_threads(parallel::threads()) if (nf >= parallel::kMinParallelWork)
    for (long long k = 0; k < total; ++k) {
        const auto c = static_cast<std::size_t>(k) / nc;
        const Coord q = unflatten(static_cast<std::size_t>(k) % nc, cdims);
        const auto g = fine_grad.subspan(c * nf, nf);
        double acc = 0.0;
        for (const auto& [iz, wz] : tz[static_cast<std::size_t>(q.z)]) {
            for (const auto& [iy, wy] : ty[static_cast<std::size_t>(q.y)]) {
                double row = 0.0;
                for (const auto& [ix, wx] : tx[static_cast<std::size_t>(q.x)]) row += g[fdims.index(ix, iy, iz)] * wx;
                acc += row * wy * wz;
            }
        }
        coarse_grad[static_cast<std::size_t>(k)] += acc;
    }
}

void avg_pool(std::span<const double> in, const Dims& dims, int factor, std::span<double> out) {
    if (factor < 1 || dims.w % factor != 0 || dims.h % factor != 0 || dims.d % factor != 0) {
        throw std::invalid_argument("avg_pool: dims " + dims.str() + " not divisible by factor");
    }
    const Dims cd{dims.w / factor, dims.h / factor, dims.d / factor};
    const double inv = 1.0 / (static_cast<double>(factor) * factor * factor);
    const auto nc = static_cast<long long>(cd.voxels());
#pragma omp parallel for schedule(static) num_threads(parallel::threads()) if (dims.voxels() >= parallel::kMinParallelWork)
    for (long long k = 0; k < nc; ++k) {
        const Coord q = unflatten(static_cast<std::size_t>(k), cd);
        double s = 0.0;
        for (int kz = 0; kz < factor; ++kz) {
            for (int j = 0; j < factor; ++j) {
                for (int i = 0; i < factor; ++i) s += in[dims.index(q.x * factor + i, q.y * factor + j, q.z * factor + kz)];
            }
        }
        out[static_cast<std::size_t>(k)] = s * inv;
    }
}

}  // namespace swreg::kernels::omp
