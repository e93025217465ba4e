#include "swreg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "swreg/parallel.hpp"
#include "swreg/rng.hpp"

namespace swreg {

namespace {

// Nominal geometry in normalised coordinates (0..1 maps to 0..dim-1).
struct Ellipsoid {
    Vec3 center;
    Vec3 radii;
};
constexpr Ellipsoid kLarge{{0.5, 0.32, 0.5}, {0.2, 0.14, 0.26}};
constexpr Ellipsoid kGland{{0.5, 0.57, 0.5}, {0.12, 0.1, 0.2}};
constexpr Vec3 kShellMargin{0.05, 0.045, 0.08};
constexpr Vec3 kTube{0.5, 0.76, 0.07};  // x, y, radius
constexpr double kTubeZ0 = 0.2, kTubeZ1 = 0.8;

struct Placed {
    Vec3 center;  // voxels
    Vec3 radii;   // voxels
};

Vec3 to_voxels(const Vec3& u, const Dims& d) { return {u[0] * (d.w - 1), u[1] * (d.h - 1), u[2] * (d.d - 1)}; }

// Worst-case reach of a structure (centre +/- radius) under every jitter.
void check_fit(const Vec3& center, const Vec3& radii, const PhantomConfig& cfg, const char* name) {
    const double smax = (1.0 + cfg.scale_jitter) * (1.0 + cfg.scale_jitter / 2.0);
    for (int a = 0; a < 3; ++a) {
        const int n = cfg.dims.extent(a);
        const double c = center[static_cast<std::size_t>(a)] * (n - 1);
        const double reach = radii[static_cast<std::size_t>(a)] * (n - 1) * smax +
                             (cfg.offset_jitter + cfg.translation_jitter) * (n - 1) +
                             smax * std::abs(c - 0.5 * (n - 1)) - std::abs(c - 0.5 * (n - 1));
        if (c - reach < 0.0 || c + reach > n - 1) {
            throw std::invalid_argument(std::string("phantom: structure '") + name + "' can leave the grid");
        }
    }
}

}  // namespace

void PhantomConfig::validate() const {
    if (dims.w < 8 || dims.h < 8 || dims.d < 8) throw std::invalid_argument("phantom: dims must be >= 8 per axis");
    if (translation_jitter < 0 || scale_jitter < 0 || scale_jitter >= 1 || offset_jitter < 0) {
        throw std::invalid_argument("phantom: jitter out of range");
    }
    if (noise_sigma < 0 || bias_amplitude < 0) throw std::invalid_argument("phantom: noise parameters must be >= 0");
    if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw std::invalid_argument("phantom: train_fraction in (0,1]");
    if (subjects < 2) throw std::invalid_argument("phantom: need at least 2 subjects");
    check_fit(kLarge.center, kLarge.radii, *this, "large ellipsoid");
    const Vec3 shell{kGland.radii[0] + kShellMargin[0], kGland.radii[1] + kShellMargin[1], kGland.radii[2] + kShellMargin[2]};
    check_fit(kGland.center, shell, *this, "shell");
    check_fit({kTube[0], kTube[1], 0.5}, {kTube[2], kTube[2], 0.5 * (kTubeZ1 - kTubeZ0)}, *this, "tube");
}

Subject generate_subject(const PhantomConfig& cfg, std::uint64_t subject_seed, int id) {
    cfg.validate();
    const Dims& dims = cfg.dims;
    Rng rng(subject_seed);

    const Vec3 shift{rng.uniform(-1, 1) * cfg.translation_jitter * (dims.w - 1),
                     rng.uniform(-1, 1) * cfg.translation_jitter * (dims.h - 1),
                     rng.uniform(-1, 1) * cfg.translation_jitter * (dims.d - 1)};
    const double gscale = 1.0 + rng.uniform(-1, 1) * cfg.scale_jitter;
    const Vec3 gc = dims.center();

    // Each structure: own scale and offset on top of the global similarity.
    auto place = [&](const Vec3& center_u, const Vec3& radii_u) {
        const double s = gscale * (1.0 + rng.uniform(-1, 1) * cfg.scale_jitter / 2.0);
        const Vec3 c = to_voxels(center_u, dims);
        Placed p{};
        for (std::size_t a = 0; a < 3; ++a) {
            const int n = dims.extent(static_cast<int>(a));
            const double off = rng.uniform(-1, 1) * cfg.offset_jitter * (n - 1);
            p.center[a] = gc[a] + gscale * (c[a] - gc[a]) + shift[a] + off;
            p.radii[a] = s * radii_u[a] * (n - 1);
        }
        return p;
    };
    const Placed large = place(kLarge.center, kLarge.radii);
    const Placed gland = place(kGland.center, kGland.radii);
    const Placed tube = place({kTube[0], kTube[1], 0.5}, {kTube[2], kTube[2], 0.5 * (kTubeZ1 - kTubeZ0)});
    const double shell_gain = 1.0 + rng.uniform(-1, 1) * cfg.scale_jitter / 2.0;
    Vec3 shell_radii{};
    for (std::size_t a = 0; a < 3; ++a) {
        shell_radii[a] = gland.radii[a] + shell_gain * kShellMargin[a] * (dims.extent(static_cast<int>(a)) - 1);
    }

    const double phase_x = rng.uniform(0, 6.283185307179586);
    const double phase_y = rng.uniform(0, 6.283185307179586);

    Subject s{id, Volume(dims, cfg.spacing, cfg.background), MaskSet(dims, kPhantomClasses, MaskMode::binary)};
    auto inside = [](const Placed& e, const Vec3& r, int x, int y, int z) {
        const double dx = (x - e.center[0]) / r[0], dy = (y - e.center[1]) / r[1], dz = (z - e.center[2]) / r[2];
        return dx * dx + dy * dy + dz * dz <= 1.0;
    };
    for (int z = 0; z < dims.d; ++z) {
        for (int y = 0; y < dims.h; ++y) {
            for (int x = 0; x < dims.w; ++x) {
                int label = -1;
                if (inside(gland, gland.radii, x, y, z)) {
                    label = 1;
                } else if (inside(gland, shell_radii, x, y, z)) {
                    label = 3;
                } else if (inside(large, large.radii, x, y, z)) {
                    label = 0;
                } else {
                    const double dx = (x - tube.center[0]) / tube.radii[0], dy = (y - tube.center[1]) / tube.radii[1];
                    if (dx * dx + dy * dy <= 1.0 && std::abs(z - tube.center[2]) <= tube.radii[2]) label = 2;
                }
                const std::size_t v = dims.index(x, y, z);
                double value = cfg.background;
                if (label >= 0) {
                    s.masks.channel(label)[v] = 1.0;
                    value = cfg.intensity[static_cast<std::size_t>(label)];
                }
                value += cfg.bias_amplitude * std::sin(3.141592653589793 * x / (dims.w - 1) + phase_x) *
                         std::cos(3.141592653589793 * y / (dims.h - 1) + phase_y);
                if (cfg.noise_sigma > 0.0) value += cfg.noise_sigma * rng.normal();
                s.image.data()[v] = value;
            }
        }
    }
    return s;
}

PairList ordered_pairs(const std::vector<std::size_t>& indices) {
    PairList out;
    for (std::size_t a : indices) {
        for (std::size_t b : indices) {
            if (a != b) out.emplace_back(a, b);
        }
    }
    return out;
}

Dataset generate_dataset(const PhantomConfig& cfg, int n, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("generate_dataset: need at least 2 subjects");
    cfg.validate();
    Dataset ds;
    ds.subjects.resize(static_cast<std::size_t>(n));
    parallel::FirstError err;
#pragma omp parallel for schedule(dynamic) num_threads(parallel::threads())
    for (int i = 0; i < n; ++i) {
        err.run([&] { ds.subjects[static_cast<std::size_t>(i)] = generate_subject(cfg, derive_seed(seed, static_cast<std::uint64_t>(i)), i); });
    }
    err.rethrow();
    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(seed, 0xDA7A5E7ULL));
    rng.shuffle(order);
    const auto n_train = static_cast<std::size_t>(std::clamp(std::floor(n * cfg.train_fraction + 0.5), 1.0, double(n)));
    ds.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    ds.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(ds.train.begin(), ds.train.end());
    std::sort(ds.test.begin(), ds.test.end());
    ds.train_pairs = ordered_pairs(ds.train);
    ds.test_pairs = ordered_pairs(ds.test);
    return ds;
}

}  // namespace swreg
