#pragma once

// Semi-weakly-supervised training.
//
// Warmup epochs train the student on labelled pairs with the weak (Dice)
// loss only. At the end of warmup the teacher is copied from the student;
// afterwards each step adds alpha * L_cons from one unlabelled pair:
// the teacher predicts on the clean pair (no gradient), the student on the
// augmented pair, and L_cons = mse(Ã(U_teacher), U_student). The teacher
// follows the student by EMA after every optimizer step.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "swreg/augment.hpp"
#include "swreg/model.hpp"
#include "swreg/phantom.hpp"

namespace swreg {

enum class TrainMode { weak_only, no_aug, warpddf, regcut, warpddf_regcut };

const char* to_string(TrainMode m);
/// Accepts "weak-only", "NoAug", "WarpDDF", "RegCut", "WarpDDF+RegCut" (any case).
TrainMode parse_train_mode(const std::string& s);

struct TrainConfig {
    double labelled_ratio = 0.1;
    double alpha = 1.0;
    double gamma = 0.99;
    int epochs = 200;
    int warmup_epochs = 50;
    /// 0: one step per labelled ordered pair.
    int steps_per_epoch = 0;
    /// Desk-scale step size; AdamConfig alone keeps the 5e-5 default.
    AdamConfig optimizer{3e-3};
    AugConfig augment;
    TrainMode mode = TrainMode::warpddf_regcut;
    ArchConfig arch;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Teacher <- gamma * teacher + (1 - gamma) * student.
void ema_update(ModelParams& teacher, const ModelParams& student, double gamma);

struct DatasetSplit {
    std::vector<Subject> labelled;
    std::vector<Subject> unlabelled;  // masks stripped
    PairList labelled_pairs;
    PairList unlabelled_pairs;

    [[nodiscard]] ImagePair labelled_pair(std::size_t k) const;
    [[nodiscard]] ImagePair unlabelled_pair(std::size_t k) const;
};

/// floor(r * N + 0.5) subjects, chosen by `seed`, keep their masks.
DatasetSplit make_split(const std::vector<Subject>& subjects, double labelled_ratio, std::uint64_t seed);

struct Augmentation {
    Ddf u_aug;
    CuboidMask mask;
};

/// Draws the perturbation for one step (both parts, whatever the mode).
Augmentation sample_augmentation(Rng& rng, const AugConfig& cfg, const Dims& dims);

struct StepLosses {
    double weak = 0.0;
    double cons = 0.0;
    double total = 0.0;
};

struct StepResult {
    StepLosses losses;
    std::vector<double> grad;  // dL/dtheta of the student
};

/// One loss/gradient evaluation. `teacher`, `unlabelled` and `aug` may be
/// null only for weak-only mode (or `consistency` false, as during warmup).
StepResult train_step(const ModelParams& student, const ModelParams* teacher, const ImagePair& labelled,
                      const ImagePair* unlabelled, const TrainConfig& cfg, const Augmentation* aug,
                      bool consistency = true);

struct EpochLog {
    int epoch = 0;
    double weak = 0.0;
    double cons = 0.0;
    double total = 0.0;
    double seconds = 0.0;
    std::string rng_digest;
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    double alpha = 0.0;
    double gamma = 0.0;
    TrainMode mode = TrainMode::weak_only;

    /// epoch,weak_loss,consistency_loss,total_loss,rng_digest. No timings,
    /// so identical runs give identical bytes.
    [[nodiscard]] std::string csv() const;
    /// epoch,seconds
    [[nodiscard]] std::string timing_csv() const;
};

struct StepEvent {
    int epoch = 0;
    int step = 0;
    bool warmup = false;
    StepLosses losses;
    const ModelParams& student;         // after the optimizer step
    const ModelParams& teacher_before;  // before the EMA update
    const ModelParams& teacher_after;
};

struct TrainHooks {
    /// Replaces sample_augmentation when set.
    std::function<Augmentation(Rng&, const Dims&)> augmentation;
    std::function<void(const StepEvent&)> on_step;
};

struct TrainResult {
    ModelParams student;
    ModelParams teacher;
    AdamState adam;
    TrainLog log;
};

TrainResult train(const TrainConfig& cfg, const DatasetSplit& data, const TrainHooks& hooks = {});

struct EvalRow {
    std::size_t pair = 0;
    int moving = 0;
    int fixed = 0;
    int cls = 0;
    double dice_percent = 0.0;
    std::optional<double> hd95_mm;
};

/// Registers every pair, thresholds the warped moving masks at 0.5 and
/// scores them against the fixed masks. Pairs run on parallel workers.
std::vector<EvalRow> evaluate(const ModelParams& params, const std::vector<Subject>& subjects, const PairList& pairs);

/// pair,moving,fixed,class,dice_percent,hd95_mm ("NA" when undefined).
std::string eval_csv(const std::vector<EvalRow>& rows);

double mean_dice(const std::vector<EvalRow>& rows);

}  // namespace swreg
