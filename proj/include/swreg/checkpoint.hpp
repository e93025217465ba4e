#pragma once

// SWRG checkpoint files (all fields little-endian):
//
//   "SWRG" | u16 version = 1
//   arch:  u32 W, H, D | u32 pool | u32 hidden[3] | u32 control w, h, d | f64 max_displacement
//   u64 theta length N
//   N x f64 student theta
//   N x f64 teacher theta
//   adam:  f64 lr, beta1, beta2, eps | u64 step | N x f64 m | N x f64 v

#include <filesystem>

#include "swreg/model.hpp"

namespace swreg {

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
    ModelParams student;
    ModelParams teacher;
    AdamState adam;
};

/// Architecture with control grid and displacement scale made explicit.
ArchConfig resolved(const ArchConfig& arch);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws IoError (see volume_io.hpp) on malformed files.
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace swreg
