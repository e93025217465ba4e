#include "swreg/trainer.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "swreg/losses.hpp"
#include "swreg/parallel.hpp"
#include "swreg/warp.hpp"

namespace swreg {

const char* to_string(TrainMode m) {
    switch (m) {
        case TrainMode::weak_only: return "weak-only";
        case TrainMode::no_aug: return "NoAug";
        case TrainMode::warpddf: return "WarpDDF";
        case TrainMode::regcut: return "RegCut";
        case TrainMode::warpddf_regcut: return "WarpDDF+RegCut";
    }
    return "?";
}

TrainMode parse_train_mode(const std::string& s) {
    std::string k;
    for (char c : s) k.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (k == "weak-only" || k == "weak_only") return TrainMode::weak_only;
    if (k == "noaug") return TrainMode::no_aug;
    if (k == "warpddf") return TrainMode::warpddf;
    if (k == "regcut") return TrainMode::regcut;
    if (k == "warpddf+regcut" || k == "warpddf_regcut") return TrainMode::warpddf_regcut;
    throw std::invalid_argument("unknown training mode '" + s + "'");
}

void TrainConfig::validate() const {
    if (!(labelled_ratio > 0.0 && labelled_ratio <= 1.0)) throw std::invalid_argument("labelled_ratio must be in (0,1]");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must be in (0,1)");
    if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be >= 0");
    if (epochs < 0 || warmup_epochs < 0 || warmup_epochs > epochs) {
        throw std::invalid_argument("need 0 <= warmup_epochs <= epochs");
    }
    if (steps_per_epoch < 0) throw std::invalid_argument("steps_per_epoch must be >= 0");
    if (!(optimizer.lr > 0.0)) throw std::invalid_argument("learning rate must be > 0");
    augment.validate();
    arch.validate();
}

void ema_update(ModelParams& teacher, const ModelParams& student, double gamma) {
    if (teacher.theta.size() != student.theta.size()) throw std::invalid_argument("ema_update: shape mismatch");
    for (std::size_t i = 0; i < teacher.theta.size(); ++i) {
        teacher.theta[i] = gamma * teacher.theta[i] + (1.0 - gamma) * student.theta[i];
    }
}

ImagePair DatasetSplit::labelled_pair(std::size_t k) const {
    const auto [m, f] = labelled_pairs.at(k);
    return ImagePair{labelled[m].image, labelled[f].image, labelled[m].masks, labelled[f].masks};
}

ImagePair DatasetSplit::unlabelled_pair(std::size_t k) const {
    const auto [m, f] = unlabelled_pairs.at(k);
    return ImagePair{unlabelled[m].image, unlabelled[f].image, std::nullopt, std::nullopt};
}

DatasetSplit make_split(const std::vector<Subject>& subjects, double labelled_ratio, std::uint64_t seed) {
    if (!(labelled_ratio > 0.0 && labelled_ratio <= 1.0)) throw std::invalid_argument("labelled_ratio must be in (0,1]");
    const auto n_lab = static_cast<std::size_t>(std::floor(labelled_ratio * static_cast<double>(subjects.size()) + 0.5));
    if (n_lab == 0) throw std::invalid_argument("labelled ratio selects no labelled subjects");
    std::vector<std::size_t> order(subjects.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_lab));
    std::sort(order.begin() + static_cast<std::ptrdiff_t>(n_lab), order.end());

    DatasetSplit s;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const Subject& sub = subjects[order[k]];
        if (k < n_lab) {
            s.labelled.push_back(sub);
        } else {
            s.unlabelled.push_back(Subject{sub.id, sub.image, MaskSet{}});
        }
    }
    std::vector<std::size_t> li(s.labelled.size()), ui(s.unlabelled.size());
    for (std::size_t i = 0; i < li.size(); ++i) li[i] = i;
    for (std::size_t i = 0; i < ui.size(); ++i) ui[i] = i;
    s.labelled_pairs = ordered_pairs(li);
    s.unlabelled_pairs = ordered_pairs(ui);
    return s;
}

Augmentation sample_augmentation(Rng& rng, const AugConfig& cfg, const Dims& dims) {
    Ddf u = sample_warpddf(rng, cfg, dims);
    CuboidMask m = sample_cuboid(rng, cfg, dims);
    return {std::move(u), std::move(m)};
}

StepResult train_step(const ModelParams& student, const ModelParams* teacher, const ImagePair& labelled,
                      const ImagePair* unlabelled, const TrainConfig& cfg, const Augmentation* aug,
                      bool consistency) {
    if (!labelled.moving_masks || !labelled.fixed_masks) throw std::invalid_argument("train_step: labelled pair has no masks");

    ForwardResult lab = forward(student, labelled);
    LossAndGrad weak = weak_supervision_loss_and_grad(*labelled.moving_masks, *labelled.fixed_masks, lab.ddf);
    StepResult out;
    out.losses.weak = weak.value;
    out.grad = backward(lab.tape, weak.grad);

    if (cfg.mode == TrainMode::weak_only || !consistency) {
        out.losses.total = total_loss(out.losses.weak, 0.0, cfg.alpha);
        return out;
    }
    if (unlabelled == nullptr) throw std::invalid_argument(std::string("train_step: mode ") + to_string(cfg.mode) + " needs an unlabelled pair");
    if (teacher == nullptr) throw std::invalid_argument("train_step: consistency needs a teacher");
    if (cfg.mode != TrainMode::no_aug && aug == nullptr) throw std::invalid_argument("train_step: augmentation missing");

    // Teacher sees the clean pair and is never differentiated.
    const Ddf u_teacher = predict(*teacher, *unlabelled);
    ImagePair augmented;
    Ddf target;
    switch (cfg.mode) {
        case TrainMode::no_aug:
            augmented = *unlabelled;
            target = u_teacher;
            break;
        case TrainMode::warpddf:
            augmented = warpddf_apply(*unlabelled, aug->u_aug);
            target = warpddf_transform_output(u_teacher, aug->u_aug);
            break;
        case TrainMode::regcut:
            augmented = regcut_apply(*unlabelled, aug->mask);
            target = regcut_transform_output(u_teacher, aug->mask);
            break;
        case TrainMode::warpddf_regcut:
            augmented = combined_apply(*unlabelled, aug->u_aug, aug->mask);
            target = combined_transform_output(u_teacher, aug->u_aug, aug->mask);
            break;
        case TrainMode::weak_only:
            break;
    }

    ForwardResult stu = forward(student, augmented);
    out.losses.cons = mse_consistency(target, stu.ddf);
    out.losses.total = total_loss(out.losses.weak, out.losses.cons, cfg.alpha);
    if (cfg.alpha > 0.0) {
        Ddf g = mse_consistency_grad(stu.ddf, target);
        for (double& v : g.data()) v *= cfg.alpha;
        const std::vector<double> gc = backward(stu.tape, g);
        for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] += gc[i];
    }
    return out;
}

std::string TrainLog::csv() const {
    std::string s = "epoch,weak_loss,consistency_loss,total_loss,rng_digest\n";
    char buf[256];
    for (const EpochLog& e : epochs) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%s\n", e.epoch, e.weak, e.cons, e.total, e.rng_digest.c_str());
        s += buf;
    }
    return s;
}

std::string TrainLog::timing_csv() const {
    std::string s = "epoch,seconds\n";
    char buf[64];
    for (const EpochLog& e : epochs) {
        std::snprintf(buf, sizeof buf, "%d,%.6f\n", e.epoch, e.seconds);
        s += buf;
    }
    return s;
}

namespace {

// Endless stream of indices; each pass is a fresh shuffle (no repeats
// within a pass).
class PairStream {
public:
    PairStream(std::size_t n, Rng& rng) : n_(n), rng_(rng) {}
    void restart() {
        order_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
        rng_.shuffle(order_);
        pos_ = 0;
    }
    std::size_t next() {
        if (pos_ >= order_.size()) restart();
        return order_[pos_++];
    }

private:
    std::size_t n_;
    Rng& rng_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

}  // namespace

TrainResult train(const TrainConfig& cfg, const DatasetSplit& data, const TrainHooks& hooks) {
    cfg.validate();
    if (data.labelled.empty() || data.labelled_pairs.empty()) {
        throw std::invalid_argument("train: need at least two labelled subjects");
    }
    const bool semi = cfg.mode != TrainMode::weak_only;
    if (semi && data.unlabelled_pairs.empty() && cfg.epochs > cfg.warmup_epochs) {
        throw std::invalid_argument(std::string("train: mode ") + to_string(cfg.mode) + " needs unlabelled pairs");
    }

    TrainResult r;
    r.student = init_params(cfg.arch, derive_seed(cfg.seed, 1));
    r.teacher = r.student;
    r.adam = AdamState(r.student.theta.size(), cfg.optimizer);
    r.log.alpha = cfg.alpha;
    r.log.gamma = cfg.gamma;
    r.log.mode = cfg.mode;

    Rng pair_rng(derive_seed(cfg.seed, 2));
    Rng aug_rng(derive_seed(cfg.seed, 3) ^ cfg.augment.seed);
    PairStream lab_stream(data.labelled_pairs.size(), pair_rng);
    PairStream unl_stream(data.unlabelled_pairs.size(), pair_rng);
    const int steps = cfg.steps_per_epoch > 0 ? cfg.steps_per_epoch : static_cast<int>(data.labelled_pairs.size());
    const Dims dims = cfg.arch.input;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const bool warmup = epoch < cfg.warmup_epochs;
        const bool consistency = semi && !warmup;
        if (semi && epoch == cfg.warmup_epochs) r.teacher = r.student;
        lab_stream.restart();
        if (consistency) unl_stream.restart();

        EpochLog log;
        log.epoch = epoch;
        for (int step = 0; step < steps; ++step) {
            const ImagePair lab = data.labelled_pair(lab_stream.next());
            std::optional<ImagePair> unl;
            std::optional<Augmentation> aug;
            if (consistency) {
                unl = data.unlabelled_pair(unl_stream.next());
                if (cfg.mode != TrainMode::no_aug) {
                    aug = hooks.augmentation ? hooks.augmentation(aug_rng, dims) : sample_augmentation(aug_rng, cfg.augment, dims);
                }
            }
            const StepResult sr = train_step(r.student, consistency ? &r.teacher : nullptr, lab, unl ? &*unl : nullptr,
                                             cfg, aug ? &*aug : nullptr, consistency);
            adam_step(r.student.theta, sr.grad, r.adam);
            const ModelParams teacher_before = r.teacher;
            if (consistency) ema_update(r.teacher, r.student, cfg.gamma);
            log.weak += sr.losses.weak;
            log.cons += sr.losses.cons;
            log.total += sr.losses.total;
            if (hooks.on_step) hooks.on_step(StepEvent{epoch, step, warmup, sr.losses, r.student, teacher_before, r.teacher});
        }
        log.weak /= steps;
        log.cons /= steps;
        log.total /= steps;
        log.rng_digest = pair_rng.digest() + aug_rng.digest();
        log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        r.log.epochs.push_back(std::move(log));
    }
    return r;
}

std::vector<EvalRow> evaluate(const ModelParams& params, const std::vector<Subject>& subjects, const PairList& pairs) {
    params.validate();
    std::vector<std::vector<EvalRow>> per_pair(pairs.size());
    const auto np = static_cast<long long>(pairs.size());
    parallel::FirstError err;
#pragma omp parallel for schedule(dynamic) num_threads(parallel::threads())
    for (long long k = 0; k < np; ++k) {
        err.run([&] {
            const auto [mi, fi] = pairs[static_cast<std::size_t>(k)];
            const Subject& mov = subjects.at(mi);
            const Subject& fix = subjects.at(fi);
            const Ddf u = predict(params, ImagePair{mov.image, fix.image, std::nullopt, std::nullopt});
            const MaskSet warped = resample_masks(mov.masks, u).binarized(0.5);
            auto& rows = per_pair[static_cast<std::size_t>(k)];
            for (int c = 0; c < mov.masks.classes(); ++c) {
                rows.push_back(EvalRow{static_cast<std::size_t>(k), mov.id, fix.id, c,
                                       dice_score(warped.channel(c), fix.masks.channel(c)),
                                       hd95(warped.channel(c), fix.masks.channel(c), fix.image.dims(), fix.image.spacing())});
            }
        });
    }
    err.rethrow();
    std::vector<EvalRow> out;
    for (auto& rows : per_pair) out.insert(out.end(), rows.begin(), rows.end());
    return out;
}

std::string eval_csv(const std::vector<EvalRow>& rows) {
    std::string s = "pair,moving,fixed,class,dice_percent,hd95_mm\n";
    char buf[256];
    for (const EvalRow& r : rows) {
        char hd[64] = "NA";
        if (r.hd95_mm) std::snprintf(hd, sizeof hd, "%.6f", *r.hd95_mm);
        std::snprintf(buf, sizeof buf, "%zu,%d,%d,%d,%.6f,%s\n", r.pair, r.moving, r.fixed, r.cls, r.dice_percent, hd);
        s += buf;
    }
    return s;
}

double mean_dice(const std::vector<EvalRow>& rows) {
    if (rows.empty()) return 0.0;
    double s = 0.0;
    for (const EvalRow& r : rows) s += r.dice_percent;
    return s / static_cast<double>(rows.size());
}

}  // namespace swreg
