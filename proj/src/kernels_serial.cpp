#include "swreg/kernels.hpp"

#include <stdexcept>

namespace swreg::kernels {

Mat3 affine_matrix(const Vec3& rotation_deg, const Vec3& scale) {
    constexpr double kDeg = 3.14159265358979323846 / 180.0;
    const double ax = rotation_deg[0] * kDeg, ay = rotation_deg[1] * kDeg, az = rotation_deg[2] * kDeg;
    const double cx = std::cos(ax), sx = std::sin(ax);
    const double cy = std::cos(ay), sy = std::sin(ay);
    const double cz = std::cos(az), sz = std::sin(az);
    // R = Rz * Ry * Rx
    const Mat3 r{{{cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx},
                  {sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx},
                  {-sy, cy * sx, cy * cx}}};
    Mat3 m{};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) m[i][j] = r[i][j] * scale[static_cast<std::size_t>(j)];
    }
    return m;
}

namespace serial {

void warp(std::span<const double> in, const Dims& dims, std::span<const double> ddf, std::span<double> out) {
    const std::size_t n = dims.voxels();
    for (int z = 0; z < dims.d; ++z) {
        for (int y = 0; y < dims.h; ++y) {
            for (int x = 0; x < dims.w; ++x) {
                const std::size_t v = dims.index(x, y, z);
                out[v] = trilinear(in, dims, x + ddf[v], y + ddf[n + v], z + ddf[2 * n + v]);
            }
        }
    }
}

void warp_ddf_grad(std::span<const double> in, const Dims& dims, std::span<const double> ddf,
                   std::span<const double> out_grad, std::span<double> ddf_grad) {
    const std::size_t n = dims.voxels();
    for (int z = 0; z < dims.d; ++z) {
        for (int y = 0; y < dims.h; ++y) {
            for (int x = 0; x < dims.w; ++x) {
                const std::size_t v = dims.index(x, y, z);
                const double g = out_grad[v];
                if (g == 0.0) continue;
                const Vec3 dp = trilinear_gradient(in, dims, x + ddf[v], y + ddf[n + v], z + ddf[2 * n + v]);
                ddf_grad[v] += g * dp[0];
                ddf_grad[n + v] += g * dp[1];
                ddf_grad[2 * n + v] += g * dp[2];
            }
        }
    }
}

void compose(std::span<const double> a, std::span<const double> b, const Dims& dims, std::span<double> out) {
    const std::size_t n = dims.voxels();
    for (int c = 0; c < 3; ++c) {
        const auto ac = a.subspan(static_cast<std::size_t>(c) * n, n);
        for (int z = 0; z < dims.d; ++z) {
            for (int y = 0; y < dims.h; ++y) {
                for (int x = 0; x < dims.w; ++x) {
                    const std::size_t v = dims.index(x, y, z);
                    const std::size_t o = static_cast<std::size_t>(c) * n + v;
                    out[o] = b[o] + trilinear(ac, dims, x + b[v], y + b[n + v], z + b[2 * n + v]);
                }
            }
        }
    }
}

void affine_field(const Mat3& m, const Vec3& center, const Vec3& t, const Dims& dims, std::span<double> out) {
    const std::size_t n = dims.voxels();
    for (int z = 0; z < dims.d; ++z) {
        for (int y = 0; y < dims.h; ++y) {
            for (int x = 0; x < dims.w; ++x) {
                const Vec3 r{x - center[0], y - center[1], z - center[2]};
                const std::size_t v = dims.index(x, y, z);
                for (int i = 0; i < 3; ++i) {
                    double s = t[static_cast<std::size_t>(i)];
                    for (int j = 0; j < 3; ++j) {
                        s += (m[i][j] - (i == j ? 1.0 : 0.0)) * r[static_cast<std::size_t>(j)];
                    }
                    out[static_cast<std::size_t>(i) * n + v] = s;
                }
            }
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
    for (int c = 0; c < channels; ++c) {
        const auto src = coarse.subspan(static_cast<std::size_t>(c) * nc, nc);
        for (int z = 0; z < fdims.d; ++z) {
            for (int y = 0; y < fdims.h; ++y) {
                for (int x = 0; x < fdims.w; ++x) {
                    fine[static_cast<std::size_t>(c) * nf + fdims.index(x, y, z)] =
                        trilinear(src, cdims, x * sx, y * sy, z * sz);
                }
            }
        }
    }
}

void upsample_adjoint(std::span<const double> fine_grad, const Dims& fdims, int channels, const Dims& cdims,
                      std::span<double> coarse_grad) {
    const std::size_t nc = cdims.voxels();
    const std::size_t nf = fdims.voxels();
    const double sx = resize_scale(fdims.w, cdims.w);
    const double sy = resize_scale(fdims.h, cdims.h);
    const double sz = resize_scale(fdims.d, cdims.d);
    for (int c = 0; c < channels; ++c) {
        for (int z = 0; z < fdims.d; ++z) {
            for (int y = 0; y < fdims.h; ++y) {
                for (int x = 0; x < fdims.w; ++x) {
                    const double g = fine_grad[static_cast<std::size_t>(c) * nf + fdims.index(x, y, z)];
                    const AxisWeights ax = axis_weights(x * sx, cdims.w);
                    const AxisWeights ay = axis_weights(y * sy, cdims.h);
                    const AxisWeights az = axis_weights(z * sz, cdims.d);
                    for (int k = 0; k < 2; ++k) {
                        const double wz = k == 0 ? 1.0 - az.f : az.f;
                        for (int j = 0; j < 2; ++j) {
                            const double wy = j == 0 ? 1.0 - ay.f : ay.f;
                            for (int i = 0; i < 2; ++i) {
                                const double wx = i == 0 ? 1.0 - ax.f : ax.f;
                                coarse_grad[static_cast<std::size_t>(c) * nc +
                                            cdims.index(ax.i0 + i, ay.i0 + j, az.i0 + k)] += g * wx * wy * wz;
                            }
                        }
                    }
                }
            }
        }
    }
}

void avg_pool(std::span<const double> in, const Dims& dims, int factor, std::span<double> out) {
    if (factor < 1 || dims.w % factor != 0 || dims.h % factor != 0 || dims.d % factor != 0) {
        throw std::invalid_argument("avg_pool: dims " + dims.str() + " not divisible by factor");
    }
    const Dims cd{dims.w / factor, dims.h / factor, dims.d / factor};
    const double inv = 1.0 / (static_cast<double>(factor) * factor * factor);
    for (int z = 0; z < cd.d; ++z) {
        for (int y = 0; y < cd.h; ++y) {
            for (int x = 0; x < cd.w; ++x) {
                double s = 0.0;
                for (int k = 0; k < factor; ++k) {
                    for (int j = 0; j < factor; ++j) {
                        for (int i = 0; i < factor; ++i) {
                            s += in[dims.index(x * factor + i, y * factor + j, z * factor + k)];
                        }
                    }
                }
                out[cd.index(x, y, z)] = s * inv;
            }
        }
    }
}

}  // namespace serial
}  // namespace swreg::kernels
