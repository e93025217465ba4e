#include "swreg/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "binio.hpp"
#include "swreg/volume_io.hpp"

namespace swreg {

namespace {

constexpr char kMagic[4] = {'S', 'W', 'R', 'G'};
constexpr std::uint64_t kMaxParams = 1ULL << 28;

}  // namespace

ArchConfig resolved(const ArchConfig& arch) {
    ArchConfig a = arch;
    a.control = arch.control_dims();
    a.max_displacement = arch.displacement_scale();
    return a;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    const ArchConfig arch = resolved(ckpt.student.arch);
    const std::size_t n = ckpt.student.theta.size();
    if (ckpt.teacher.theta.size() != n || ckpt.adam.m.size() != n || ckpt.adam.v.size() != n) {
        throw std::invalid_argument("checkpoint: student, teacher and optimizer sizes differ");
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError(IoErrc::open_failed, path.string());
    os.write(kMagic, 4);
    binio::put_uint<std::uint16_t>(os, kCheckpointVersion);
    for (int v : {arch.input.w, arch.input.h, arch.input.d, arch.pool, arch.hidden[0], arch.hidden[1], arch.hidden[2],
                  arch.control->w, arch.control->h, arch.control->d}) {
        binio::put_uint<std::uint32_t>(os, static_cast<std::uint32_t>(v));
    }
    binio::put_f64(os, *arch.max_displacement);
    binio::put_uint<std::uint64_t>(os, n);
    binio::put_f64s(os, ckpt.student.theta);
    binio::put_f64s(os, ckpt.teacher.theta);
    const AdamConfig& c = ckpt.adam.cfg;
    for (double v : {c.lr, c.beta1, c.beta2, c.eps}) binio::put_f64(os, v);
    binio::put_uint<std::uint64_t>(os, ckpt.adam.step);
    binio::put_f64s(os, ckpt.adam.m);
    binio::put_f64s(os, ckpt.adam.v);
    if (!os) throw IoError(IoErrc::write_failed, path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError(IoErrc::open_failed, path.string());
    char magic[4];
    if (!is.read(magic, 4)) throw IoError(IoErrc::truncated, path.string());
    if (std::memcmp(magic, kMagic, 4) != 0) throw IoError(IoErrc::bad_magic, path.string());
    std::uint16_t version = 0;
    if (!binio::get_uint(is, version)) throw IoError(IoErrc::truncated, path.string());
    if (version != kCheckpointVersion) throw IoError(IoErrc::bad_version, path.string());

    std::uint32_t f[10];
    for (auto& v : f) {
        if (!binio::get_uint(is, v)) throw IoError(IoErrc::truncated, path.string() + " (arch)");
        if (v > (1u << 16)) throw IoError(IoErrc::dim_overflow, path.string());
    }
    ArchConfig arch;
    arch.input = {static_cast<int>(f[0]), static_cast<int>(f[1]), static_cast<int>(f[2])};
    arch.pool = static_cast<int>(f[3]);
    arch.hidden = {static_cast<int>(f[4]), static_cast<int>(f[5]), static_cast<int>(f[6])};
    arch.control = Dims{static_cast<int>(f[7]), static_cast<int>(f[8]), static_cast<int>(f[9])};
    double max_disp = 0.0;
    if (!binio::get_f64(is, max_disp)) throw IoError(IoErrc::truncated, path.string());
    arch.max_displacement = max_disp;
    try {
        arch.validate();
    } catch (const std::invalid_argument& e) {
        throw IoError(IoErrc::dim_overflow, path.string() + ": " + e.what());
    }

    std::uint64_t n = 0;
    if (!binio::get_uint(is, n)) throw IoError(IoErrc::truncated, path.string());
    if (n > kMaxParams || n != param_count(arch)) throw IoError(IoErrc::dim_overflow, path.string() + " (theta length)");

    Checkpoint ck{{arch, std::vector<double>(n)}, {arch, std::vector<double>(n)}, {}};
    AdamConfig c;
    std::uint64_t step = 0;
    if (!binio::get_f64s(is, ck.student.theta) || !binio::get_f64s(is, ck.teacher.theta) || !binio::get_f64(is, c.lr) ||
        !binio::get_f64(is, c.beta1) || !binio::get_f64(is, c.beta2) || !binio::get_f64(is, c.eps) ||
        !binio::get_uint(is, step)) {
        throw IoError(IoErrc::truncated, path.string());
    }
    ck.adam = AdamState(n, c);
    ck.adam.step = step;
    if (!binio::get_f64s(is, ck.adam.m) || !binio::get_f64s(is, ck.adam.v)) throw IoError(IoErrc::truncated, path.string());
    return ck;
}

}  // namespace swreg
