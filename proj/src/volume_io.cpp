#include "swreg/volume_io.hpp"

#include <cstring>
#include <fstream>

#include "binio.hpp"

namespace swreg {

namespace {

constexpr char kMagic[4] = {'D', 'D', 'F', 'V'};
// Cap per axis and on the total payload; anything larger is a corrupt header.
constexpr std::uint32_t kMaxExtent = 1u << 16;
constexpr std::uint64_t kMaxValues = 1ULL << 32;

void write_any(const std::filesystem::path& path, FileKind kind, const Dims& dims, std::uint32_t channels,
               const Spacing& sp, std::span<const double> payload) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError(IoErrc::open_failed, path.string());
    os.write(kMagic, 4);
    binio::put_uint<std::uint16_t>(os, kVolumeFileVersion);
    binio::put_uint<std::uint16_t>(os, static_cast<std::uint16_t>(kind));
    binio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(dims.w));
    binio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(dims.h));
    binio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(dims.d));
    binio::put_uint<std::uint32_t>(os, channels);
    binio::put_f64(os, sp.x);
    binio::put_f64(os, sp.y);
    binio::put_f64(os, sp.z);
    binio::put_f64s(os, payload);
    if (!os) throw IoError(IoErrc::write_failed, path.string());
}

bool is_one_hot(const MaskSet& m) {
    try {
        MaskSet(m.dims(), m.classes(), MaskMode::binary, std::vector<double>(m.data().begin(), m.data().end())).validate();
        return true;
    } catch (const std::invalid_argument&) {
        return false;
    }
}

}  // namespace

const char* to_string(IoErrc code) {
    switch (code) {
        case IoErrc::open_failed: return "open failed";
        case IoErrc::bad_magic: return "bad magic";
        case IoErrc::bad_version: return "unsupported version";
        case IoErrc::bad_kind: return "bad kind";
        case IoErrc::truncated: return "truncated";
        case IoErrc::dim_overflow: return "dims overflow";
        case IoErrc::kind_mismatch: return "unexpected kind";
        case IoErrc::write_failed: return "write failed";
    }
    return "unknown";
}

IoError::IoError(IoErrc code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

void write_file(const std::filesystem::path& path, const Volume& vol) {
    write_any(path, FileKind::volume, vol.dims(), 1, vol.spacing(), vol.data());
}

void write_file(const std::filesystem::path& path, const MaskSet& masks, const Spacing& spacing) {
    write_any(path, FileKind::maskset, masks.dims(), static_cast<std::uint32_t>(masks.classes()), spacing, masks.data());
}

void write_file(const std::filesystem::path& path, const Ddf& ddf, const Spacing& spacing) {
    write_any(path, FileKind::ddf, ddf.dims(), 3, spacing, ddf.data());
}

FileContents read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError(IoErrc::open_failed, path.string());
    char magic[4];
    if (!is.read(magic, 4)) throw IoError(IoErrc::truncated, path.string() + " (header)");
    if (std::memcmp(magic, kMagic, 4) != 0) throw IoError(IoErrc::bad_magic, path.string());
    std::uint16_t version = 0, kind = 0;
    std::uint32_t w = 0, h = 0, d = 0, channels = 0;
    Spacing sp;
    if (!binio::get_uint(is, version) || !binio::get_uint(is, kind)) throw IoError(IoErrc::truncated, path.string());
    if (version != kVolumeFileVersion) throw IoError(IoErrc::bad_version, path.string() + " v" + std::to_string(version));
    if (kind > 2) throw IoError(IoErrc::bad_kind, path.string() + " kind " + std::to_string(kind));
    if (!binio::get_uint(is, w) || !binio::get_uint(is, h) || !binio::get_uint(is, d) ||
        !binio::get_uint(is, channels) || !binio::get_f64(is, sp.x) || !binio::get_f64(is, sp.y) ||
        !binio::get_f64(is, sp.z)) {
        throw IoError(IoErrc::truncated, path.string() + " (header)");
    }
    if (w > kMaxExtent || h > kMaxExtent || d > kMaxExtent || channels > kMaxExtent ||
        static_cast<std::uint64_t>(w) * h * d * channels > kMaxValues) {
        throw IoError(IoErrc::dim_overflow, path.string());
    }
    const auto fk = static_cast<FileKind>(kind);
    if ((fk == FileKind::volume && channels != 1) || (fk == FileKind::ddf && channels != 3) ||
        (fk == FileKind::maskset && channels == 0)) {
        throw IoError(IoErrc::bad_kind, path.string() + " channel count " + std::to_string(channels));
    }
    const Dims dims{static_cast<int>(w), static_cast<int>(h), static_cast<int>(d)};
    std::vector<double> payload(static_cast<std::size_t>(w) * h * d * channels);
    if (!binio::get_f64s(is, payload)) throw IoError(IoErrc::truncated, path.string() + " (payload)");

    try {
        switch (fk) {
            case FileKind::volume:
                return {sp, Volume(dims, sp, std::move(payload))};
            case FileKind::ddf:
                return {sp, Ddf(dims, std::move(payload))};
            case FileKind::maskset: {
                MaskSet m(dims, static_cast<int>(channels), MaskMode::soft, std::move(payload));
                if (is_one_hot(m)) {
                    m = MaskSet(dims, m.classes(), MaskMode::binary, std::vector<double>(m.data().begin(), m.data().end()));
                }
                return {sp, std::move(m)};
            }
        }
    } catch (const std::invalid_argument& e) {
        throw IoError(IoErrc::dim_overflow, path.string() + ": " + e.what());
    }
    throw IoError(IoErrc::bad_kind, path.string());
}

Volume read_volume(const std::filesystem::path& path) {
    auto c = read_file(path);
    if (auto* v = std::get_if<Volume>(&c.object)) return std::move(*v);
    throw IoError(IoErrc::kind_mismatch, path.string() + " is not a volume");
}

MaskSet read_masks(const std::filesystem::path& path) {
    auto c = read_file(path);
    if (auto* v = std::get_if<MaskSet>(&c.object)) return std::move(*v);
    throw IoError(IoErrc::kind_mismatch, path.string() + " is not a mask set");
}

Ddf read_ddf(const std::filesystem::path& path) {
    auto c = read_file(path);
    if (auto* v = std::get_if<Ddf>(&c.object)) return std::move(*v);
    throw IoError(IoErrc::kind_mismatch, path.string() + " is not a ddf");
}

}  // namespace swreg
