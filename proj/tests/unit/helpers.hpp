#pragma once

// Shared fixtures and brute-force oracles for the tests. Nothing here calls
// the library's interpolation code.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "swreg/rng.hpp"
#include "swreg/types.hpp"

namespace testing {

using namespace swreg;

inline double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

// Textbook trilinear interpolation with clamp-to-edge, written from the
// 8-corner weight formula.
inline double brute_trilinear(const std::vector<double>& f, const Dims& d, double px, double py, double pz) {
    px = clampd(px, 0, d.w - 1);
    py = clampd(py, 0, d.h - 1);
    pz = clampd(pz, 0, d.d - 1);
    const int x0 = std::min(static_cast<int>(std::floor(px)), d.w - 2);
    const int y0 = std::min(static_cast<int>(std::floor(py)), d.h - 2);
    const int z0 = std::min(static_cast<int>(std::floor(pz)), d.d - 2);
    double acc = 0.0;
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                const double wx = dx ? px - x0 : 1.0 - (px - x0);
                const double wy = dy ? py - y0 : 1.0 - (py - y0);
                const double wz = dz ? pz - z0 : 1.0 - (pz - z0);
                acc += wx * wy * wz * f[static_cast<std::size_t>((x0 + dx) + d.w * ((y0 + dy) + d.h * (z0 + dz)))];
            }
    return acc;
}

inline std::vector<double> random_values(std::size_t n, Rng& rng, double lo = 0.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

inline Volume random_volume(const Dims& d, Rng& rng, Spacing sp = {}) { return Volume(d, sp, random_values(d.voxels(), rng)); }

inline Ddf random_ddf(const Dims& d, Rng& rng, double amp) { return Ddf(d, random_values(3 * d.voxels(), rng, -amp, amp)); }

// Sum of a few low-frequency sinusoids: band-limited, max |value| <= amp.
inline std::vector<double> smooth_field(const Dims& d, Rng& rng, double amp) {
    std::vector<double> f(d.voxels(), 0.0);
    const int terms = 3;
    for (int t = 0; t < terms; ++t) {
        const double kx = rng.uniform(0.5, 1.5) * 3.141592653589793 / (d.w - 1);
        const double ky = rng.uniform(0.5, 1.5) * 3.141592653589793 / (d.h - 1);
        const double kz = rng.uniform(0.5, 1.5) * 3.141592653589793 / (d.d - 1);
        const double ph = rng.uniform(0, 6.283185307179586);
        for (int z = 0; z < d.d; ++z)
            for (int y = 0; y < d.h; ++y)
                for (int x = 0; x < d.w; ++x)
                    f[d.index(x, y, z)] += amp / terms * std::sin(kx * x + ky * y + kz * z + ph);
    }
    return f;
}

inline Ddf smooth_ddf(const Dims& d, Rng& rng, double amp) {
    std::vector<double> data;
    for (int c = 0; c < 3; ++c) {
        auto f = smooth_field(d, rng, amp);
        data.insert(data.end(), f.begin(), f.end());
    }
    return Ddf(d, std::move(data));
}

inline Volume smooth_volume(const Dims& d, Rng& rng) {
    auto f = smooth_field(d, rng, 1.0);
    for (double& v : f) v += 1.0;
    return Volume(d, {}, std::move(f));
}

// Ellipsoid masks: one-hot, classes at distinct centres.
inline MaskSet blob_masks(const Dims& d, int classes, Rng& rng) {
    MaskSet m(d, classes, MaskMode::binary);
    for (int c = 0; c < classes; ++c) {
        const double cx = rng.uniform(0.3, 0.7) * (d.w - 1), cy = rng.uniform(0.3, 0.7) * (d.h - 1),
                     cz = rng.uniform(0.3, 0.7) * (d.d - 1);
        const double r = rng.uniform(0.15, 0.3) * std::min({d.w, d.h, d.d});
        for (int z = 0; z < d.d; ++z)
            for (int y = 0; y < d.h; ++y)
                for (int x = 0; x < d.w; ++x) {
                    const double q = ((x - cx) * (x - cx) + (y - cy) * (y - cy) + (z - cz) * (z - cz)) / (r * r);
                    if (q > 1.0) continue;
                    bool taken = false;
                    for (int k = 0; k < c; ++k) taken = taken || m.channel(k)[d.index(x, y, z)] == 1.0;
                    if (!taken) m.channel(c)[d.index(x, y, z)] = 1.0;
                }
    }
    return m;
}

inline std::vector<double> random_binary(std::size_t n, Rng& rng, double p) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform() < p ? 1.0 : 0.0;
    return v;
}

inline bool set_at(const std::vector<double>& m, const Dims& d, int x, int y, int z) {
    if (x < 0 || y < 0 || z < 0 || x >= d.w || y >= d.h || z >= d.d) return false;
    return m[static_cast<std::size_t>(x + d.w * (y + d.h * z))] == 1.0;
}

// Independent HD95: boundary voxels by explicit neighbour test, all-pairs
// distances, pooled order statistics.
inline std::optional<double> brute_hd95(const std::vector<double>& a, const std::vector<double>& b, const Dims& d,
                                 const Spacing& s) {
    auto boundary = [&](const std::vector<double>& m) {
        std::vector<std::array<double, 3>> pts;
        for (int z = 0; z < d.d; ++z)
            for (int y = 0; y < d.h; ++y)
                for (int x = 0; x < d.w; ++x) {
                    if (!set_at(m, d, x, y, z)) continue;
                    const int nb[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
                    bool surf = false;
                    for (const auto& o : nb) surf = surf || !set_at(m, d, x + o[0], y + o[1], z + o[2]);
                    if (surf) pts.push_back({x * s.x, y * s.y, z * s.z});
                }
        return pts;
    };
    const auto pa = boundary(a), pb = boundary(b);
    if (pa.empty() || pb.empty()) return std::nullopt;
    std::vector<double> all;
    for (int dir = 0; dir < 2; ++dir) {
        const auto& from = dir == 0 ? pa : pb;
        const auto& to = dir == 0 ? pb : pa;
        for (const auto& p : from) {
            double best = 1e300;
            for (const auto& q : to)
                best = std::min(best, std::hypot(p[0] - q[0], p[1] - q[1], p[2] - q[2]));
            all.push_back(best);
        }
    }
    std::sort(all.begin(), all.end());
    const double pos = 0.95 * static_cast<double>(all.size() - 1);
    const std::size_t k = static_cast<std::size_t>(pos);
    if (k + 1 >= all.size()) return all.back();
    return all[k] + (pos - static_cast<double>(k)) * (all[k + 1] - all[k]);
}

// Variance of squared pair distances per voxel, by explicit loops.
inline double brute_sigma2(const std::vector<Ddf>& us) {
    const Dims d = us[0].dims();
    double acc = 0.0;
    for (int z = 0; z < d.d; ++z)
        for (int y = 0; y < d.h; ++y)
            for (int x = 0; x < d.w; ++x) {
                std::vector<double> vals;
                for (std::size_t i = 0; i < us.size(); ++i)
                    for (std::size_t j = i + 1; j < us.size(); ++j) {
                        const Vec3 a = us[i].at(x, y, z), b = us[j].at(x, y, z);
                        vals.push_back((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) +
                                       (a[2] - b[2]) * (a[2] - b[2]));
                    }
                double mean = 0.0;
                for (double v : vals) mean += v;
                mean /= static_cast<double>(vals.size());
                double var = 0.0;
                for (double v : vals) var += (v - mean) * (v - mean);
                acc += var / static_cast<double>(vals.size());
            }
    return acc / static_cast<double>(d.voxels());
}

}  // namespace testing
