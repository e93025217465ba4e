#include "swreg/checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "swreg/atlas.hpp"
#include "swreg/augment.hpp"
#include "swreg/kernels.hpp"
#include "swreg/losses.hpp"
#include "swreg/model.hpp"
#include "swreg/rng.hpp"
#include "swreg/trainer.hpp"
#include "swreg/warp.hpp"

namespace swreg {

namespace {

bool inside(const Dims& dims, double x, double y, double z) {
    return x >= 0.0 && y >= 0.0 && z >= 0.0 && x <= dims.w - 1 && y <= dims.h - 1 && z <= dims.d - 1;
}

std::string fmt(const char* f, double v) {
    char buf[96];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Volume ramp_volume(const Dims& dims) {
    Volume v(dims, {});
    for (int z = 0; z < dims.d; ++z)
        for (int y = 0; y < dims.h; ++y)
            for (int x = 0; x < dims.w; ++x) v.at(x, y, z) = 0.5 * x - 0.25 * y + 0.125 * z + 1.0;
    return v;
}

Volume blob_volume(const Dims& dims, Rng& rng) {
    Volume v(dims, {});
    std::array<Vec3, 3> c;
    for (auto& p : c) p = {rng.uniform(0.3, 0.7) * dims.w, rng.uniform(0.3, 0.7) * dims.h, rng.uniform(0.3, 0.7) * dims.d};
    const double s = 0.25 * std::min({dims.w, dims.h, dims.d});
    for (int z = 0; z < dims.d; ++z)
        for (int y = 0; y < dims.h; ++y)
            for (int x = 0; x < dims.w; ++x) {
                double val = 0.0;
                for (const Vec3& p : c) {
                    const double r2 = (x - p[0]) * (x - p[0]) + (y - p[1]) * (y - p[1]) + (z - p[2]) * (z - p[2]);
                    val += std::exp(-r2 / (2.0 * s * s));
                }
                v.at(x, y, z) = val;
            }
    return v;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

void identity_suite(std::vector<CheckResult>& out, std::uint64_t seed) {
    const Dims dims{16, 16, 16};
    Rng rng(derive_seed(seed, 11));
    const AugConfig aug;

    {
        const Volume v = blob_volume(dims, rng);
        const Volume w = resample_volume(v, identity_ddf(dims));
        out.push_back({"identity", "warp-identity", w == v, "exact equality"});
    }
    {
        const Ddf c = compose_ddf(Ddf::constant(dims, {1, 0, 0}), Ddf::constant(dims, {0, 2, 0}));
        double err = 0.0;
        for (int z = 0; z < dims.d; ++z)
            for (int y = 0; y < dims.h - 2; ++y)
                for (int x = 0; x < dims.w; ++x) {
                    const Vec3 u = c.at(x, y, z);
                    err = std::max({err, std::abs(u[0] - 1), std::abs(u[1] - 2), std::abs(u[2])});
                }
        out.push_back({"identity", "constant-composition", err == 0.0, fmt("max error %.3g", err)});
    }
    {
        const Volume v = ramp_volume(dims);
        double worst = 0.0;
        for (int k = 0; k < 20; ++k) {
            const Ddf a = sample_warpddf(rng, aug, dims);
            const Ddf b = sample_warpddf(rng, aug, dims);
            const Volume seq = resample_volume(resample_volume(v, a), b);
            const Volume comp = resample_volume(v, compose_ddf(a, b));
            const auto mask = composition_interior(a, b);
            for (std::size_t i = 0; i < mask.size(); ++i) {
                if (mask[i]) worst = std::max(worst, std::abs(seq.data()[i] - comp.data()[i]));
            }
        }
        out.push_back({"identity", "affine-composition", worst < 1e-6, fmt("max interior error %.3g", worst)});
    }
    {
        const Volume moving = blob_volume(dims, rng);
        double worst = 0.0;
        for (int k = 0; k < 10; ++k) {
            AffineParams p;
            for (int i = 0; i < 3; ++i) {
                p.rotation_deg[i] = rng.uniform(-3, 3);
                p.scale[i] = rng.uniform(0.95, 1.05);
                p.translation[i] = rng.uniform(-1, 1);
            }
            const Ddf u_star = affine_to_ddf(p, dims);
            const Volume fixed = resample_volume(moving, u_star);
            const Ddf u_aug = sample_warpddf(rng, aug, dims);
            const Volume lhs = resample_volume(moving, warpddf_transform_output(u_star, u_aug));
            const Volume rhs = resample_volume(fixed, u_aug);
            const auto mask = composition_interior(u_star, u_aug);
            double se = 0.0;
            std::size_t n = 0;
            for (std::size_t i = 0; i < mask.size(); ++i) {
                if (!mask[i]) continue;
                se += (lhs.data()[i] - rhs.data()[i]) * (lhs.data()[i] - rhs.data()[i]);
                ++n;
            }
            const auto [lo, hi] = std::minmax_element(moving.data().begin(), moving.data().end());
            if (n > 0) worst = std::max(worst, std::sqrt(se / n) / (*hi - *lo));
        }
        out.push_back({"identity", "warpddf-oracle", worst < 1e-2, fmt("worst relative rms %.3g", worst)});
    }
    {
        const Volume m = blob_volume(dims, rng), f = blob_volume(dims, rng);
        const ImagePair pair{m, f, std::nullopt, std::nullopt};
        const Ddf u = sample_warpddf(rng, aug, dims);
        const CuboidMask zero = CuboidMask::empty(dims);
        const CuboidMask ones(dims, Cuboid{0, 0, 0, dims.w, dims.h, dims.d});
        const ImagePair p0 = regcut_apply(pair, zero);
        const ImagePair p1 = regcut_apply(pair, ones);
        const bool ok = p0.moving == m && p0.fixed == f && p1.moving == f && regcut_transform_output(u, zero) == u &&
                        regcut_transform_output(u, ones).max_abs() == 0.0;
        out.push_back({"identity", "regcut-trivial-masks", ok, "mask 0 and mask 1"});

        const CuboidMask box = sample_cuboid(rng, aug, dims);
        const Ddf once = regcut_transform_output(u, box);
        out.push_back({"identity", "regcut-idempotent", regcut_transform_output(once, box) == once, "exact equality"});

        const ImagePair nested = combined_apply(pair, identity_ddf(dims), zero);
        const bool nest_ok = nested.moving == m && nested.fixed == f &&
                             combined_transform_output(u, identity_ddf(dims), zero) == u;
        out.push_back({"identity", "combined-nesting", nest_ok, "u_aug = 0, empty mask"});
    }
    {
        // Disjoint support: displacement only in x < 6, cuboid in x >= 9.
        const Volume m = blob_volume(dims, rng), f = blob_volume(dims, rng);
        Ddf u(dims);
        for (int z = 0; z < dims.d; ++z)
            for (int y = 0; y < dims.h; ++y)
                for (int x = 0; x < 6; ++x)
                    for (int c = 0; c < 3; ++c) u.channel(c)[dims.index(x, y, z)] = rng.uniform(-0.9, 0.9);
        const CuboidMask box(dims, Cuboid{9, 3, 3, 5, 8, 8});
        const Volume mu = resample_volume(m, u);
        std::vector<double> lhs(dims.voxels());
        for (std::size_t i = 0; i < lhs.size(); ++i) lhs[i] = box.data()[i] * f.data()[i] + (1.0 - box.data()[i]) * mu.data()[i];
        const ImagePair mixed = regcut_apply(ImagePair{m, f, std::nullopt, std::nullopt}, box);
        const Volume rhs = resample_volume(mixed.moving, regcut_transform_output(u, box));
        const double err = max_abs_diff(lhs, rhs.data());
        out.push_back({"identity", "regcut-disjoint-exact", err == 0.0, fmt("max error %.3g", err)});
    }
    {
        const Volume v = blob_volume(dims, rng);
        const Ddf u = sample_warpddf(rng, aug, dims);
        std::vector<double> s(dims.voxels()), o(dims.voxels());
        kernels::serial::warp(v.data(), dims, u.data(), s);
        kernels::omp::warp(v.data(), dims, u.data(), o);
        out.push_back({"identity", "serial-omp-warp", s == o, "bit-identical"});
    }
}

void oracle_suite(std::vector<CheckResult>& out) {
    {
        const Dims dims{4, 2, 2};
        Volume v(dims, {});
        for (int z = 0; z < 2; ++z)
            for (int y = 0; y < 2; ++y)
                for (int x = 0; x < 4; ++x) v.at(x, y, z) = x;
        const bool ok = trilinear_sample(v, {2.5, 0, 0}) == 2.5 && trilinear_sample(v, {9, 0, 0}) == 3.0;
        out.push_back({"oracle", "trilinear-ramp", ok, "2.5 and clamp to 3"});
    }
    {
        const std::vector<double> a{1, 1, 0, 0}, b{0, 1, 1, 0};
        const double dl = dice_loss(a, b), ds = dice_score(a, b);
        out.push_back({"oracle", "dice", dl == -0.5 && ds == 50.0, fmt("dice_loss %.17g", dl)});
    }
    {
        const Dims dims{8, 4, 4};
        std::vector<double> a(dims.voxels(), 0.0), b(dims.voxels(), 0.0);
        a[dims.index(1, 1, 1)] = 1.0;
        b[dims.index(4, 1, 1)] = 1.0;
        const auto h1 = hd95(a, b, dims, {1, 1, 1});
        const auto h2 = hd95(a, b, dims, {2, 1, 1});
        const bool ok = h1 && h2 && std::abs(*h1 - 3.0) < 1e-12 && std::abs(*h2 - 6.0) < 1e-12;
        out.push_back({"oracle", "hd95-single-voxels", ok, "3 mm and 6 mm"});
    }
    {
        const Dims dims{3, 3, 3};
        const std::vector<Ddf> u{Ddf::constant(dims, {0, 0, 0}), Ddf::constant(dims, {1, 0, 0}), Ddf::constant(dims, {2, 0, 0})};
        const double s = population_diversity(u);
        out.push_back({"oracle", "sigma2-pop", std::abs(s - 2.0) < 1e-12, fmt("%.17g", s)});
    }
    {
        std::vector<double> m(20, 0.0);
        std::fill(m.begin(), m.begin() + 10, 1.0);
        const double v = gland_volume(m, {0.75, 0.75, 2.5});
        out.push_back({"oracle", "gland-volume", std::abs(v - 14.0625) < 1e-12, fmt("%.17g mm^3", v)});
    }
    {
        ModelParams t{ArchConfig{}, {1.0}}, s{ArchConfig{}, {0.0}};
        ema_update(t, s, 0.9);
        out.push_back({"oracle", "ema", std::abs(t.theta[0] - 0.9) < 1e-15, fmt("%.17g", t.theta[0])});
    }
    {
        const Dims dims{2, 2, 2};
        const double m = mse_consistency(Ddf::constant(dims, {2, 2, 2}), Ddf(dims));
        out.push_back({"oracle", "mse-constant", m == 4.0, fmt("%.17g", m)});
    }
}

void gradient_suite(std::vector<CheckResult>& out, std::uint64_t seed) {
    const ArchConfig arch = grad_check_arch();
    const GradCheckReport good = grad_check(arch, seed);
    double worst = 0.0;
    for (const auto& e : good.entries) worst = std::max(worst, e.max_rel_error);
    out.push_back({"gradient", "finite-difference", good.passed, fmt("max relative error %.3g", worst)});
    for (auto fault : {BackwardFault::leaky_relu_slope, BackwardFault::tanh_derivative}) {
        const GradCheckReport bad = grad_check(arch, seed, fault);
        out.push_back({"gradient",
                       fault == BackwardFault::leaky_relu_slope ? "mutation-leaky-relu-detected" : "mutation-tanh-detected",
                       !bad.passed, bad.passed ? "mutation was not detected" : "mutation detected"});
    }
}

}  // namespace

std::vector<bool> composition_interior(const Ddf& a, const Ddf& b) {
    require_same_dims(a.dims(), b.dims(), "composition_interior");
    const Dims dims = a.dims();
    std::vector<bool> ok(dims.voxels(), false);
    for (int z = 0; z < dims.d; ++z)
        for (int y = 0; y < dims.h; ++y)
            for (int x = 0; x < dims.w; ++x) {
                const Vec3 ub = b.at(x, y, z);
                const double px = x + ub[0], py = y + ub[1], pz = z + ub[2];
                if (!inside(dims, px, py, pz)) continue;
                const auto ax = kernels::axis_weights(px, dims.w);
                const auto ay = kernels::axis_weights(py, dims.h);
                const auto az = kernels::axis_weights(pz, dims.d);
                bool corners = true;
                for (int k = 0; k < 8 && corners; ++k) {
                    const int cx = ax.i0 + (k & 1), cy = ay.i0 + ((k >> 1) & 1), cz = az.i0 + ((k >> 2) & 1);
                    const Vec3 ua = a.at(cx, cy, cz);
                    corners = inside(dims, cx + ua[0], cy + ua[1], cz + ua[2]);
                }
                if (!corners) continue;
                Vec3 q;
                for (int c = 0; c < 3; ++c) q[c] = kernels::trilinear(a.channel(c), dims, px, py, pz);
                ok[dims.index(x, y, z)] = inside(dims, px + q[0], py + q[1], pz + q[2]);
            }
    return ok;
}

std::vector<CheckResult> run_checks(const std::string& suite, std::uint64_t seed) {
    if (suite != "all" && suite != "identity" && suite != "oracle" && suite != "gradient") {
        throw std::invalid_argument("unknown check suite '" + suite + "'");
    }
    std::vector<CheckResult> out;
    if (suite == "all" || suite == "identity") identity_suite(out, seed);
    if (suite == "all" || suite == "oracle") oracle_suite(out);
    if (suite == "all" || suite == "gradient") gradient_suite(out, seed);
    return out;
}

}  // namespace swreg
