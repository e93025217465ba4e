// Acceptance run: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria. Pass criterion numbers as arguments to run a
// subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "swreg/atlas.hpp"
#include "swreg/augment.hpp"
#include "swreg/checks.hpp"
#include "swreg/losses.hpp"
#include "swreg/model.hpp"
#include "swreg/parallel.hpp"
#include "swreg/trainer.hpp"
#include "swreg/warp.hpp"

using namespace swreg;
using namespace testing;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Volume ramp_volume(const Dims& d) {
    Volume v(d);
    for (int z = 0; z < d.d; ++z)
        for (int y = 0; y < d.h; ++y)
            for (int x = 0; x < d.w; ++x) v.at(x, y, z) = 0.5 * x - 0.25 * y + 0.125 * z + 1.0;
    return v;
}

Volume gaussian_blobs(const Dims& d, Rng& rng) {
    Volume v(d);
    const double s = 0.25 * std::min({d.w, d.h, d.d});
    std::vector<Vec3> centres(3);
    for (Vec3& c : centres) c = {rng.uniform(0.3, 0.7) * d.w, rng.uniform(0.3, 0.7) * d.h, rng.uniform(0.3, 0.7) * d.d};
    for (int z = 0; z < d.d; ++z)
        for (int y = 0; y < d.h; ++y)
            for (int x = 0; x < d.w; ++x)
                for (const Vec3& c : centres) {
                    const double r2 = (x - c[0]) * (x - c[0]) + (y - c[1]) * (y - c[1]) + (z - c[2]) * (z - c[2]);
                    v.at(x, y, z) += std::exp(-r2 / (2 * s * s));
                }
    return v;
}

std::vector<Subject> phantom_subjects(const Dims& dims, int n, std::uint64_t seed) {
    PhantomConfig pc;
    pc.dims = dims;
    return generate_dataset(pc, n, seed).subjects;
}

TrainConfig small_train(TrainMode mode) {
    TrainConfig c;
    c.arch.input = {16, 16, 8};
    c.arch.pool = 2;
    c.arch.hidden = {4, 4, 4};
    c.labelled_ratio = 0.5;
    c.optimizer = AdamConfig{3e-3};
    c.mode = mode;
    c.seed = 17;
    return c;
}

// 1. Sequential warping by a then b equals warping by compose(a, b).
Outcome composition_identity() {
    const auto t0 = std::chrono::steady_clock::now();
    const Dims d{16, 16, 16};
    const Volume v = ramp_volume(d);
    Rng rng(101);
    const AugConfig aug;
    double worst = 0.0;
    std::size_t checked = 0;
    for (int k = 0; k < 100; ++k) {
        const Ddf a = sample_warpddf(rng, aug, d);
        const Ddf b = sample_warpddf(rng, aug, d);
        const Volume seq = resample_volume(resample_volume(v, a), b);
        const Volume comp = resample_volume(v, compose_ddf(a, b));
        const auto interior = composition_interior(a, b);
        for (std::size_t i = 0; i < interior.size(); ++i) {
            if (!interior[i]) continue;
            worst = std::max(worst, std::abs(seq.data()[i] - comp.data()[i]));
            ++checked;
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {worst < 1e-6 && secs < 30.0 && checked > 0,
            fmt("100 pairs, max |seq - composed| %.3g over %zu interior voxels (< 1e-6), %.2f s (< 30 s)", worst, checked, secs)};
}

// 2. Warping moving by the transformed teacher output matches warping fixed by u_aug.
Outcome warpddf_oracle() {
    const Dims d{16, 16, 16};
    Rng rng(202);
    const AugConfig aug;
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
        const Volume moving = gaussian_blobs(d, rng);
        const Ddf u_star = sample_warpddf(rng, aug, d);
        const Volume fixed = resample_volume(moving, u_star);
        const Ddf u_aug = sample_warpddf(rng, aug, d);
        const Volume lhs = resample_volume(moving, warpddf_transform_output(u_star, u_aug));
        const Volume rhs = resample_volume(fixed, u_aug);
        const auto interior = composition_interior(u_star, u_aug);
        double se = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < interior.size(); ++i) {
            if (!interior[i]) continue;
            se += (lhs.data()[i] - rhs.data()[i]) * (lhs.data()[i] - rhs.data()[i]);
            ++n;
        }
        const auto [lo, hi] = std::minmax_element(moving.data().begin(), moving.data().end());
        if (n == 0) return {false, fmt("draw %d has no interior voxels", k)};
        worst = std::max(worst, std::sqrt(se / static_cast<double>(n)) / (*hi - *lo));
    }
    return {worst < 1e-2, fmt("50 draws, worst interior RMS %.3g of intensity range (< 1e-2)", worst)};
}

// 3. RegCut: trivial masks and the disjoint-support construction.
Outcome regcut_algebra() {
    const Dims d{16, 16, 16};
    Rng rng(303);
    const AugConfig aug;
    int failures = 0;
    for (int k = 0; k < 20; ++k) {
        const Volume m = gaussian_blobs(d, rng), f = gaussian_blobs(d, rng);
        const ImagePair pair{m, f, std::nullopt, std::nullopt};
        const Ddf u = sample_warpddf(rng, aug, d);
        const CuboidMask zero = CuboidMask::empty(d);
        const CuboidMask ones(d, Cuboid{0, 0, 0, d.w, d.h, d.d});
        const ImagePair p0 = regcut_apply(pair, zero), p1 = regcut_apply(pair, ones);
        const bool trivial = p0.moving == m && p0.fixed == f && p1.moving == f && p1.fixed == f &&
                             regcut_transform_output(u, zero) == u && regcut_transform_output(u, ones).max_abs() == 0.0;
        if (!trivial) ++failures;
    }
    double disjoint_err = 0.0;
    for (int k = 0; k < 20; ++k) {
        // Displacements live in x < 5 with |u| < 1, so sampling never reaches
        // x >= 6; the cuboid starts at x = 8.
        const Volume m = gaussian_blobs(d, rng), f = gaussian_blobs(d, rng);
        Ddf u(d);
        for (int z = 0; z < d.d; ++z)
            for (int y = 0; y < d.h; ++y)
                for (int x = 0; x < 5; ++x)
                    for (int c = 0; c < 3; ++c) u.channel(c)[d.index(x, y, z)] = rng.uniform(-0.95, 0.95);
        const int w = 1 + static_cast<int>(rng.below(8));
        const Cuboid box{8 + static_cast<int>(rng.below(static_cast<std::uint64_t>(9 - w))), static_cast<int>(rng.below(8)),
                         static_cast<int>(rng.below(8)), w, 1 + static_cast<int>(rng.below(8)), 1 + static_cast<int>(rng.below(8))};
        const CuboidMask mask(d, box);
        const Volume mu = resample_volume(m, u);
        const ImagePair mixed = regcut_apply(ImagePair{m, f, std::nullopt, std::nullopt}, mask);
        const Volume rhs = resample_volume(mixed.moving, regcut_transform_output(u, mask));
        for (std::size_t i = 0; i < d.voxels(); ++i) {
            const double lhs = mask.data()[i] * f.data()[i] + (1.0 - mask.data()[i]) * mu.data()[i];
            disjoint_err = std::max(disjoint_err, std::abs(lhs - rhs.data()[i]));
        }
    }
    return {failures == 0 && disjoint_err == 0.0,
            fmt("trivial-mask failures %d/20, disjoint-support max error %.3g over 20 draws (exact)", failures, disjoint_err)};
}

// 4. Finite-difference gradient check plus mutations.
Outcome gradient_check() {
    const GradCheckReport ok = grad_check(grad_check_arch(), 404);
    double dice = 0.0, mse = 0.0;
    for (const auto& e : ok.entries) {
        double& slot = e.path == "mse" ? mse : dice;
        slot = std::max(slot, e.max_rel_error);
    }
    const GradCheckReport slope = grad_check(grad_check_arch(), 404, BackwardFault::leaky_relu_slope);
    const GradCheckReport tanh = grad_check(grad_check_arch(), 404, BackwardFault::tanh_derivative);
    auto worst = [](const GradCheckReport& r) {
        double w = 0.0;
        for (const auto& e : r.entries) w = std::max(w, e.max_rel_error);
        return w;
    };
    const bool pass = ok.passed && dice < 1e-3 && mse < 1e-3 && !slope.passed && !tanh.passed;
    return {pass, fmt("max rel error dice-warp %.3g, mse %.3g (< 1e-3); mutations caught: leaky-relu %s (%.3g), tanh %s (%.3g)",
                      dice, mse, slope.passed ? "no" : "yes", worst(slope), tanh.passed ? "no" : "yes", worst(tanh))};
}

// 5. EMA audited after every post-warmup step of a 20-step run.
Outcome ema_exactness() {
    TrainConfig c = small_train(TrainMode::warpddf_regcut);
    c.epochs = 6;
    c.warmup_epochs = 1;
    c.steps_per_epoch = 4;
    c.gamma = 0.95;
    const DatasetSplit s = make_split(phantom_subjects(c.arch.input, 8, 505), c.labelled_ratio, 5);
    int audited = 0;
    double worst = 0.0;
    TrainHooks h;
    h.on_step = [&](const StepEvent& e) {
        if (e.warmup) return;
        ++audited;
        for (std::size_t i = 0; i < e.student.theta.size(); ++i) {
            const double expect = c.gamma * e.teacher_before.theta[i] + (1 - c.gamma) * e.student.theta[i];
            worst = std::max(worst, std::abs(e.teacher_after.theta[i] - expect));
        }
    };
    (void)train(c, s, h);
    return {audited == 20 && worst == 0.0, fmt("%d post-warmup steps audited, max deviation %.3g (exact)", audited, worst)};
}

// 6. HD95 and sigma^2 against brute force; Dice identity.
Outcome metric_oracles() {
    Rng rng(606);
    double hd_err = 0.0, s2_err = 0.0, dice_err = 0.0;
    int hd_cases = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const Dims d{static_cast<int>(2 + rng.below(7)), static_cast<int>(2 + rng.below(7)), static_cast<int>(2 + rng.below(7))};
        const Spacing sp{rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), rng.uniform(0.5, 3.0)};
        auto a = random_binary(d.voxels(), rng, rng.uniform(0.05, 0.6));
        auto b = random_binary(d.voxels(), rng, rng.uniform(0.05, 0.6));
        a[rng.below(d.voxels())] = 1.0;
        b[rng.below(d.voxels())] = 1.0;
        const auto got = hd95(a, b, d, sp);
        const auto ref = brute_hd95(a, b, d, sp);
        if (!got || !ref) return {false, "hd95 undefined on non-empty masks"};
        hd_err = std::max(hd_err, std::abs(*got - *ref) / std::max(std::abs(*ref), 1e-300));
        ++hd_cases;

        const int n = 2 + static_cast<int>(rng.below(4));
        std::vector<Ddf> us;
        for (int i = 0; i < n; ++i) us.push_back(random_ddf(d, rng, 3.0));
        const double s2 = population_diversity(us), s2_ref = brute_sigma2(us);
        s2_err = std::max(s2_err, std::abs(s2 - s2_ref) / std::max(std::abs(s2_ref), 1e-300));

        dice_err = std::max(dice_err, std::abs(dice_score(a, b) + 100.0 * dice_loss(a, b)));
    }
    return {hd_err < 1e-12 && s2_err < 1e-12 && dice_err < 1e-12,
            fmt("%d instances <= 8^3: hd95 rel err %.3g, sigma2 rel err %.3g (< 1e-12); |dice_score + 100 dice_loss| %.3g",
                hd_cases, hd_err, s2_err, dice_err)};
}

// 7. Semi-weak training against the weak-only baseline.
Outcome semi_weak_direction() {
    const auto t0 = std::chrono::steady_clock::now();
    int improved = 0;
    std::string per_seed;
    double sum_weak = 0.0, sum_semi = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        PhantomConfig pc;
        pc.train_fraction = 0.8;
        const Dataset ds = generate_dataset(pc, 50, 1000 + seed);
        std::vector<Subject> train_set, test_set;
        for (std::size_t i : ds.train) train_set.push_back(ds.subjects[i]);
        for (std::size_t i : ds.test) test_set.push_back(ds.subjects[i]);
        if (train_set.size() != 40) return {false, fmt("expected 40 training subjects, got %zu", train_set.size())};
        std::vector<std::size_t> idx(test_set.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        const PairList test_pairs = ordered_pairs(idx);

        double dice[2];
        for (int k = 0; k < 2; ++k) {
            TrainConfig c;
            c.labelled_ratio = 0.1;
            c.epochs = 100;
            c.warmup_epochs = 50;
            c.mode = k == 0 ? TrainMode::weak_only : TrainMode::warpddf_regcut;
            c.seed = seed;
            const DatasetSplit split = make_split(train_set, c.labelled_ratio, derive_seed(seed, 0));
            const TrainResult r = train(c, split);
            dice[k] = mean_dice(evaluate(r.student, test_set, test_pairs));
        }
        sum_weak += dice[0];
        sum_semi += dice[1];
        if (dice[1] >= dice[0]) ++improved;
        per_seed += fmt("%s%.2f/%.2f", seed == 1 ? "" : " ", dice[0], dice[1]);
    }
    const double mins = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
    return {improved >= 4 && mins < 30.0,
            fmt("test Dice %% weak/semi per seed [%s]; mean %.2f -> %.2f; %d/5 seeds improve (>= 4); %.1f min (< 30)",
                per_seed.c_str(), sum_weak / 5, sum_semi / 5, improved, mins)};
}

// 8. Forced-empty augmentation reproduces NoAug bit for bit.
Outcome ablation_nesting() {
    TrainConfig c = small_train(TrainMode::no_aug);
    c.epochs = 3;
    c.warmup_epochs = 1;
    c.steps_per_epoch = 5;
    const DatasetSplit s = make_split(phantom_subjects(c.arch.input, 8, 808), c.labelled_ratio, 8);
    auto run = [&](TrainMode m, bool force) {
        std::vector<StepLosses> out;
        TrainConfig cm = c;
        cm.mode = m;
        TrainHooks h;
        if (force) h.augmentation = [](Rng&, const Dims& d) { return Augmentation{identity_ddf(d), CuboidMask::empty(d)}; };
        h.on_step = [&](const StepEvent& e) {
            if (!e.warmup) out.push_back(e.losses);
        };
        (void)train(cm, s, h);
        return out;
    };
    const auto ref = run(TrainMode::no_aug, false);
    const auto got = run(TrainMode::warpddf_regcut, true);
    int equal = 0;
    for (std::size_t i = 0; i < std::min(ref.size(), got.size()); ++i)
        if (ref[i].weak == got[i].weak && ref[i].cons == got[i].cons && ref[i].total == got[i].total) ++equal;
    return {ref.size() == 10 && got.size() == 10 && equal == 10,
            fmt("%d/%zu consistency steps bit-identical (need 10/10)", equal, ref.size())};
}

// 9. Atlas on identical samples, and probability maps against brute force.
Outcome atlas_sanity() {
    const Dims d{16, 16, 8};
    const auto subs = phantom_subjects(d, 6, 909);
    TrainConfig c = small_train(TrainMode::warpddf_regcut);
    c.epochs = 4;
    c.warmup_epochs = 2;
    const TrainResult trained = train(c, make_split(subs, 0.5, 9));
    const ModelParams& model = trained.teacher;
    const RegisterFn reg = [&](const Volume& m, const Volume& f) { return predict(model, ImagePair{m, f, std::nullopt, std::nullopt}); };

    // Identical samples: the untrained model registers them with the identity.
    const std::vector<Subject> same(4, subs[0]);
    const ModelParams untrained = init_params(c.arch, 1);
    const RegisterFn ident = [&](const Volume& m, const Volume& f) { return predict(untrained, ImagePair{m, f, std::nullopt, std::nullopt}); };
    const AtlasResult a0 = build_atlas(ident, same);
    double atlas_err = 0.0;
    for (std::size_t v = 0; v < d.voxels(); ++v) atlas_err = std::max(atlas_err, std::abs(a0.atlas.data()[v] - subs[0].image.data()[v]));
    // With a trained model every identical sample gets the same field.
    const AtlasResult a1 = build_atlas(reg, same);
    const double s2_same = population_diversity(a1.ddfs);

    const AtlasResult r = build_atlas(reg, subs);
    double prob_err = 0.0;
    for (int cls = 0; cls < kPhantomClasses; ++cls) {
        std::vector<double> ref(d.voxels(), 0.0);
        for (std::size_t i = 0; i < subs.size(); ++i) {
            const std::vector<double> ch(subs[i].masks.channel(cls).begin(), subs[i].masks.channel(cls).end());
            for (int z = 0; z < d.d; ++z)
                for (int y = 0; y < d.h; ++y)
                    for (int x = 0; x < d.w; ++x) {
                        const Vec3 u = r.ddfs[i].at(x, y, z);
                        ref[d.index(x, y, z)] += brute_trilinear(ch, d, x + u[0], y + u[1], z + u[2]);
                    }
        }
        for (std::size_t v = 0; v < d.voxels(); ++v) {
            const double expect = ref[v] / static_cast<double>(subs.size());
            prob_err = std::max(prob_err, std::abs(r.probability.channel(cls)[v] - expect) / std::max(std::abs(expect), 1.0));
        }
    }
    return {atlas_err < 1e-12 && a0.iterations == 1 && s2_same == 0.0 && prob_err < 1e-12,
            fmt("identical samples: max |atlas - sample| %.3g (< 1e-12) in %d pass, sigma2 %.3g (= 0); "
                "probability maps vs brute force %.3g (< 1e-12), %d passes",
                atlas_err, a0.iterations, s2_same, prob_err, r.iterations)};
}

// 10. Two identical runs give byte-identical logs and evaluation CSVs.
Outcome determinism() {
    TrainConfig c = small_train(TrainMode::warpddf_regcut);
    c.epochs = 6;
    c.warmup_epochs = 2;
    const auto subs = phantom_subjects(c.arch.input, 10, 1010);
    const DatasetSplit s = make_split(subs, c.labelled_ratio, derive_seed(c.seed, 0));
    const PairList pairs = ordered_pairs({0, 1, 2, 3});
    const TrainResult a = train(c, s);
    parallel::set_threads(4);
    const std::string eval_a = eval_csv(evaluate(a.student, subs, pairs));
    const TrainResult b = train(c, s);
    parallel::set_threads(1);
    const std::string eval_b = eval_csv(evaluate(b.student, subs, pairs));
    parallel::set_threads(0);
    const bool log_same = a.log.csv() == b.log.csv();
    const bool eval_same = eval_a == eval_b;
    return {log_same && eval_same, fmt("TrainLog %s (%zu bytes), eval CSV %s (%zu bytes; 4 vs 1 workers)",
                                       log_same ? "identical" : "DIFFERENT", a.log.csv().size(),
                                       eval_same ? "identical" : "DIFFERENT", eval_a.size())};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"composition identity", composition_identity},
        {"WarpDDF consistency oracle", warpddf_oracle},
        {"RegCut algebra", regcut_algebra},
        {"gradient correctness", gradient_check},
        {"EMA exactness", ema_exactness},
        {"metric oracles", metric_oracles},
        {"semi-weak direction", semi_weak_direction},
        {"ablation nesting", ablation_nesting},
        {"atlas sanity", atlas_sanity},
        {"determinism", determinism},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!only.empty() && !only.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first, o.detail.c_str(), secs);
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    return failed;
}
