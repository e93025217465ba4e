#pragma once

// Self-checks runnable from the command line (`swreg check`).
//
//   identity  warp / composition / augmentation identities
//   oracle    metric and arithmetic oracles with closed-form answers
//   gradient  finite-difference gradient check plus a mutation that must fail

#include <cstdint>
#include <string>
#include <vector>

#include "swreg/types.hpp"

namespace swreg {

struct CheckResult {
    std::string suite;
    std::string name;
    bool passed = false;
    std::string detail;
};

/// suite: "all", "identity", "oracle" or "gradient". Throws
/// std::invalid_argument for anything else.
std::vector<CheckResult> run_checks(const std::string& suite, std::uint64_t seed = 0);

/// Voxels x where sequential warping by a then b reads no clamped sample:
/// x + b(x) is inside the grid, every trilinear corner y of that point has
/// y + a(y) inside the grid, and the composed sample point is too.
std::vector<bool> composition_interior(const Ddf& a, const Ddf& b);

}  // namespace swreg
