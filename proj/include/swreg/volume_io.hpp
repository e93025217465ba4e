#pragma once

// DDFV volume files.
//
//   offset  size  field
//   0       4     magic "DDFV"
//   4       2     version (u16) = 1
//   6       2     kind (u16): 0 volume, 1 maskset, 2 ddf
//   8       12    dims W, H, D (u32 each)
//   20      4     channels (u32): 1 for volume, C for maskset, 3 for ddf
//   24      24    spacing x, y, z (f64 each)
//   48      ...   channels * W * H * D f64, channel-major, then z, y, x (x fastest)
//
// All integers and doubles are little-endian.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <variant>

#include "swreg/types.hpp"

namespace swreg {

enum class IoErrc {
    open_failed = 1,
    bad_magic,
    bad_version,
    bad_kind,
    truncated,
    dim_overflow,
    kind_mismatch,
    write_failed,
};

const char* to_string(IoErrc code);

class IoError : public std::runtime_error {
public:
    IoError(IoErrc code, const std::string& detail);
    [[nodiscard]] IoErrc code() const { return code_; }

private:
    IoErrc code_;
};

enum class FileKind : std::uint16_t { volume = 0, maskset = 1, ddf = 2 };

inline constexpr std::uint16_t kVolumeFileVersion = 1;
inline constexpr std::size_t kVolumeHeaderBytes = 48;

void write_file(const std::filesystem::path& path, const Volume& vol);
void write_file(const std::filesystem::path& path, const MaskSet& masks, const Spacing& spacing = {});
void write_file(const std::filesystem::path& path, const Ddf& ddf, const Spacing& spacing = {});

struct FileContents {
    Spacing spacing;
    std::variant<Volume, MaskSet, Ddf> object;
};

/// Reads any kind. Mask files come back binary if every voxel is one-hot
/// or empty, soft otherwise.
FileContents read_file(const std::filesystem::path& path);

Volume read_volume(const std::filesystem::path& path);
MaskSet read_masks(const std::filesystem::path& path);
Ddf read_ddf(const std::filesystem::path& path);

}  // namespace swreg
