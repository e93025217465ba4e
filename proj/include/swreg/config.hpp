#pragma once

// JSON configuration files. Every key is optional; unknown keys are
// rejected so typos do not silently fall back to defaults.
//
// phantom.json
//   dims [W,H,D], spacing [sx,sy,sz], subjects, train_fraction, seed,
//   translation_jitter, scale_jitter, offset_jitter, background,
//   intensity [4], noise_sigma, bias_amplitude
//
// train.json
//   labelled_ratio, alpha, gamma, epochs, warmup_epochs, steps_per_epoch,
//   mode ("weak-only" | "NoAug" | "WarpDDF" | "RegCut" | "WarpDDF+RegCut"), seed,
//   optimizer { lr, beta1, beta2, eps },
//   augment { rotation_deg [lo,hi], scale [lo,hi], translation_vox [lo,hi],
//             cuboid_fraction [lo,hi], seed },
//   arch { input [W,H,D], pool, hidden [3], control [w,h,d], max_displacement }
//
// arch.input defaults to the dims of the data being trained on.

#include <optional>
#include <stdexcept>
#include <string>

#include "swreg/phantom.hpp"
#include "swreg/trainer.hpp"

namespace swreg {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

PhantomConfig parse_phantom_config(const std::string& json_text);
std::string to_json(const PhantomConfig& cfg);

TrainConfig parse_train_config(const std::string& json_text, std::optional<Dims> data_dims = std::nullopt);
/// Fully resolved (defaults filled in), canonical key order.
std::string to_json(const TrainConfig& cfg);

std::string read_text_file(const std::string& path);

}  // namespace swreg
