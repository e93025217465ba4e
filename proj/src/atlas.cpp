#include "swreg/atlas.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "swreg/losses.hpp"
#include "swreg/parallel.hpp"
#include "swreg/warp.hpp"

namespace swreg {

namespace {

void check_samples(const std::vector<Subject>& samples) {
    if (samples.empty()) throw std::invalid_argument("atlas: no samples");
    const Dims& dims = samples.front().image.dims();
    const int classes = samples.front().masks.classes();
    for (const Subject& s : samples) {
        require_same_dims(dims, s.image.dims(), "atlas samples");
        if (s.masks.classes() == 0) throw std::invalid_argument("atlas: sample " + std::to_string(s.id) + " has no masks");
        if (s.masks.classes() != classes) throw std::invalid_argument("atlas: class count differs between samples");
        require_same_dims(dims, s.masks.dims(), "atlas masks");
    }
}

MaskSet mean_masks(const std::vector<MaskSet>& masks) {
    const MaskSet& first = masks.front();
    std::vector<double> acc(first.data().size(), 0.0);
    for (const MaskSet& m : masks) {
        auto d = m.data();
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += d[i];
    }
    const double inv = 1.0 / static_cast<double>(masks.size());
    for (double& v : acc) v = std::clamp(v * inv, 0.0, 1.0);
    return MaskSet(first.dims(), first.classes(), MaskMode::soft, std::move(acc));
}

}  // namespace

std::size_t init_atlas(const std::vector<Subject>& samples) {
    check_samples(samples);
    std::vector<MaskSet> masks;
    masks.reserve(samples.size());
    for (const Subject& s : samples) masks.push_back(s.masks);
    const MaskSet avg = mean_masks(masks).binarized(0.5);

    std::size_t best = 0;
    double best_sim = -1.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const MaskSet& m = samples[i].masks;
        double sim = 0.0;
        for (int c = 0; c < m.classes(); ++c) sim += dice_score(m.channel(c), avg.channel(c));
        sim /= m.classes();
        if (sim > best_sim) {
            best_sim = sim;
            best = i;
        }
    }
    return best;
}

AtlasResult build_atlas(const RegisterFn& reg, const std::vector<Subject>& samples, int max_iters, double tol) {
    check_samples(samples);
    if (max_iters < 1) throw std::invalid_argument("build_atlas: max_iters must be >= 1");
    const std::size_t n = samples.size();

    AtlasResult r;
    r.init_index = init_atlas(samples);
    r.atlas = samples[r.init_index].image;
    r.probability = MaskSet(samples[r.init_index].masks.dims(), samples[r.init_index].masks.classes(), MaskMode::soft,
                            std::vector<double>(samples[r.init_index].masks.data().begin(),
                                                samples[r.init_index].masks.data().end()));
    const auto [lo, hi] = std::minmax_element(r.atlas.data().begin(), r.atlas.data().end());
    const double range = *hi - *lo > 0.0 ? *hi - *lo : 1.0;

    r.ddfs.assign(n, Ddf{});
    std::vector<Volume> warped(n);
    std::vector<MaskSet> warped_masks(n);
    for (int it = 0; it < max_iters; ++it) {
        const Volume current = r.atlas;
        const auto ni = static_cast<long long>(n);
        parallel::FirstError err;
#pragma omp parallel for schedule(dynamic) num_threads(parallel::threads())
        for (long long i = 0; i < ni; ++i) {
            err.run([&] {
                const Subject& s = samples[static_cast<std::size_t>(i)];
                Ddf u = reg(s.image, current);
                require_same_dims(current.dims(), u.dims(), "build_atlas registration output");
                warped[static_cast<std::size_t>(i)] = resample_volume(s.image, u);
                warped_masks[static_cast<std::size_t>(i)] = resample_masks(s.masks, u);
                r.ddfs[static_cast<std::size_t>(i)] = std::move(u);
            });
        }
        err.rethrow();

        std::vector<double> acc(current.dims().voxels(), 0.0);
        for (const Volume& w : warped) {
            auto d = w.data();
            for (std::size_t v = 0; v < acc.size(); ++v) acc[v] += d[v];
        }
        for (double& v : acc) v /= static_cast<double>(n);
        r.atlas = Volume(current.dims(), current.spacing(), std::move(acc));
        r.probability = mean_masks(warped_masks);

        double change = 0.0;
        for (std::size_t v = 0; v < current.dims().voxels(); ++v) change += std::abs(r.atlas.data()[v] - current.data()[v]);
        change /= static_cast<double>(current.dims().voxels());
        r.change_history.push_back(change);
        r.iterations = it + 1;
        if (change < tol * range) break;
    }
    return r;
}

double population_diversity(const std::vector<Ddf>& ddfs) {
    if (ddfs.size() < 2) throw std::invalid_argument("population_diversity: need at least 2 DDFs");
    const Dims dims = ddfs.front().dims();
    for (const Ddf& u : ddfs) require_same_dims(dims, u.dims(), "population_diversity");
    const std::size_t n = ddfs.size();
    const std::size_t nv = dims.voxels();
    const double pairs = static_cast<double>(n * (n - 1) / 2);

    std::vector<double> per_voxel(nv);
    const auto nvl = static_cast<long long>(nv);
#pragma omp parallel for schedule(static) num_threads(parallel::threads()) if (nv >= parallel::kMinParallelWork)
    for (long long vl = 0; vl < nvl; ++vl) {
        const auto v = static_cast<std::size_t>(vl);
        double sum = 0.0, sum_sq = 0.0;
        // Two passes (mean, then squared deviations) keep the variance
        // accurate when pair values are large and nearly equal.
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                double d2 = 0.0;
                for (int c = 0; c < 3; ++c) {
                    const double diff = ddfs[i].channel(c)[v] - ddfs[j].channel(c)[v];
                    d2 += diff * diff;
                }
                sum += d2;
            }
        }
        const double mean = sum / pairs;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                double d2 = 0.0;
                for (int c = 0; c < 3; ++c) {
                    const double diff = ddfs[i].channel(c)[v] - ddfs[j].channel(c)[v];
                    d2 += diff * diff;
                }
                sum_sq += (d2 - mean) * (d2 - mean);
            }
        }
        per_voxel[v] = sum_sq / pairs;
    }
    return parallel::deterministic_sum(per_voxel) / static_cast<double>(nv);
}

double gland_volume(std::span<const double> mask, const Spacing& spacing) {
    std::size_t count = 0;
    for (double v : mask) count += v >= 0.5 ? 1 : 0;
    return static_cast<double>(count) * spacing.voxel_volume();
}

std::string DiversityReport::csv() const {
    std::string s = "sample,gland_volume_mm3,cohort\n";
    char buf[128];
    for (std::size_t i = 0; i < gland_volumes.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.6f,%s\n", i, gland_volumes[i], cohort[i].c_str());
        s += buf;
    }
    s += "\nstatistic,value\n";
    std::snprintf(buf, sizeof buf, "sigma2_pop,%.17g\n", sigma2_all);
    s += buf;
    std::snprintf(buf, sizeof buf, "sigma2_top,%.17g\n", sigma2_top);
    s += buf;
    std::snprintf(buf, sizeof buf, "sigma2_bottom,%.17g\n", sigma2_bottom);
    s += buf;
    if (ratio) {
        std::snprintf(buf, sizeof buf, "ratio_top_bottom,%.17g\n", *ratio);
        s += buf;
    } else {
        s += "ratio_top_bottom,NA\n";
    }
    return s;
}

DiversityReport cohort_diversity(const std::vector<Subject>& samples, const std::vector<Ddf>& ddfs, double fraction,
                                 int gland_class) {
    if (samples.size() != ddfs.size()) throw std::invalid_argument("cohort_diversity: samples and DDFs differ in count");
    if (!(fraction > 0.0 && fraction <= 0.5)) throw std::invalid_argument("cohort_diversity: fraction must be in (0, 0.5]");
    const std::size_t n = samples.size();
    const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
    if (k < 2) throw std::invalid_argument("cohort_diversity: cohort of " + std::to_string(k) + " is too small");

    DiversityReport r;
    r.gland_volumes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (gland_class < 0 || gland_class >= samples[i].masks.classes()) {
            throw std::invalid_argument("cohort_diversity: sample has no gland class");
        }
        r.gland_volumes[i] = gland_volume(samples[i].masks.channel(gland_class), samples[i].image.spacing());
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return r.gland_volumes[a] < r.gland_volumes[b]; });

    r.cohort.assign(n, "-");
    std::vector<Ddf> bottom, top;
    for (std::size_t i = 0; i < k; ++i) {
        r.cohort[order[i]] = "bottom";
        bottom.push_back(ddfs[order[i]]);
        r.cohort[order[n - 1 - i]] = "top";
        top.push_back(ddfs[order[n - 1 - i]]);
    }
    r.sigma2_all = population_diversity(ddfs);
    r.sigma2_top = population_diversity(top);
    r.sigma2_bottom = population_diversity(bottom);
    if (r.sigma2_bottom > 0.0) r.ratio = r.sigma2_top / r.sigma2_bottom;
    return r;
}

}  // namespace swreg
