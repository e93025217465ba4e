#pragma once

// Compact differentiable registrar g(moving, fixed; theta) -> DDF.
//
// Pipeline: average-pool both images to a coarse grid, stack them as two
// channels, three 3x3x3 convolutions with leaky-ReLU(0.1), resize to the
// control grid, a 1x1x1 convolution to three channels, tanh scaled by the
// maximum displacement, then trilinear upsampling to the dense grid.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "swreg/tape.hpp"
#include "swreg/types.hpp"

namespace swreg {

struct ArchConfig {
    Dims input{32, 32, 16};
    int pool = 4;
    std::array<int, 3> hidden{8, 8, 8};
    /// Unset: same as the pooled grid.
    std::optional<Dims> control;
    /// Unset: 25% of the smallest grid extent, in voxels.
    std::optional<double> max_displacement;

    [[nodiscard]] Dims coarse() const;
    [[nodiscard]] Dims control_dims() const;
    [[nodiscard]] double displacement_scale() const;
    void validate() const;

    friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

struct ParamBlock {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
};

std::vector<ParamBlock> param_layout(const ArchConfig& arch);
std::size_t param_count(const ArchConfig& arch);

struct ModelParams {
    ArchConfig arch;
    std::vector<double> theta;

    /// Throws when theta does not match the layout or holds non-finite values.
    void validate() const;
};

/// Hidden layers He-uniform from `seed`; the output layer starts at zero so
/// the untrained model predicts the identity transform.
ModelParams init_params(const ArchConfig& arch, std::uint64_t seed);

/// Test hook: deliberately wrong backward rules, used to show that the
/// gradient check catches them.
enum class BackwardFault { none, leaky_relu_slope, tanh_derivative };

struct ForwardResult {
    Ddf ddf;
    Tape tape;
};

ForwardResult forward(const ModelParams& params, const ImagePair& pair, BackwardFault fault = BackwardFault::none);

/// Forward pass without keeping the tape.
Ddf predict(const ModelParams& params, const ImagePair& pair);

/// dL/dtheta from dL/dDDF. Throws TapeReused on a second call.
std::vector<double> backward(Tape& tape, const Ddf& upstream);

struct AdamConfig {
    double lr = 5e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

struct AdamState {
    AdamConfig cfg;
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;

    AdamState() = default;
    AdamState(std::size_t n, const AdamConfig& c) : cfg(c), m(n, 0.0), v(n, 0.0) {}

    friend bool operator==(const AdamState&, const AdamState&) = default;
};

class NonFiniteGradient : public std::runtime_error {
public:
    NonFiniteGradient(std::size_t index, double value);
    std::size_t index;
    double value;
};

/// Adam with bias correction. Throws NonFiniteGradient (first bad index)
/// before touching any state.
void adam_step(std::vector<double>& params, std::span<const double> grads, AdamState& state);

struct GradCheckEntry {
    std::string path;   // "dice-warp" or "mse"
    std::string block;  // parameter block name
    double max_rel_error = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double tolerance = 1e-3;
    bool passed = false;
};

/// Compares backward() against central differences for every parameter, on
/// the Dice-through-warp loss and on the MSE consistency loss. The error of
/// a block is max |analytic - numeric| over the block, relative to the
/// largest gradient magnitude in the block. Grids must be at most 8^3.
GradCheckReport grad_check(const ArchConfig& arch, std::uint64_t seed, BackwardFault fault = BackwardFault::none);

/// Small architecture used by grad_check and the `check` command.
ArchConfig grad_check_arch();

}  // namespace swreg
