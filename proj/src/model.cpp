#include "swreg/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "swreg/kernels.hpp"
#include "swreg/losses.hpp"
#include "swreg/rng.hpp"

namespace swreg {

// ---------------------------------------------------------------------------
// Architecture

Dims ArchConfig::coarse() const { return {input.w / pool, input.h / pool, input.d / pool}; }

Dims ArchConfig::control_dims() const { return control.value_or(coarse()); }

double ArchConfig::displacement_scale() const {
    return max_displacement.value_or(0.25 * std::min({input.w, input.h, input.d}));
}

void ArchConfig::validate() const {
    if (input.w < 2 || input.h < 2 || input.d < 2) throw std::invalid_argument("arch: input dims must be >= 2");
    if (pool < 1 || input.w % pool != 0 || input.h % pool != 0 || input.d % pool != 0) {
        throw std::invalid_argument("arch: input dims " + input.str() + " not divisible by pool factor");
    }
    const Dims c = coarse();
    if (c.w < 2 || c.h < 2 || c.d < 2) throw std::invalid_argument("arch: coarse grid must be >= 2 per axis");
    const Dims k = control_dims();
    if (k.w < 2 || k.h < 2 || k.d < 2 || k.w > input.w || k.h > input.h || k.d > input.d) {
        throw std::invalid_argument("arch: control grid must lie between 2 and the input dims");
    }
    for (int h : hidden) {
        if (h < 1) throw std::invalid_argument("arch: hidden channel counts must be positive");
    }
    if (!(displacement_scale() > 0.0)) throw std::invalid_argument("arch: max displacement must be positive");
}

std::vector<ParamBlock> param_layout(const ArchConfig& arch) {
    std::vector<ParamBlock> blocks;
    std::size_t off = 0;
    auto add = [&](std::string name, std::size_t size) {
        blocks.push_back({std::move(name), off, size});
        off += size;
    };
    int cin = 2;
    for (int l = 0; l < 3; ++l) {
        const int cout = arch.hidden[static_cast<std::size_t>(l)];
        add("conv" + std::to_string(l + 1) + ".weight", static_cast<std::size_t>(cout * cin * 27));
        add("conv" + std::to_string(l + 1) + ".bias", static_cast<std::size_t>(cout));
        cin = cout;
    }
    add("head.weight", static_cast<std::size_t>(3 * cin));
    add("head.bias", 3);
    return blocks;
}

std::size_t param_count(const ArchConfig& arch) {
    const auto blocks = param_layout(arch);
    return blocks.back().offset + blocks.back().size;
}

void ModelParams::validate() const {
    arch.validate();
    if (theta.size() != param_count(arch)) throw std::invalid_argument("model: theta length does not match arch");
    for (double t : theta) {
        if (!std::isfinite(t)) throw std::invalid_argument("model: non-finite parameter");
    }
}

ModelParams init_params(const ArchConfig& arch, std::uint64_t seed) {
    arch.validate();
    ModelParams p{arch, std::vector<double>(param_count(arch), 0.0)};
    Rng rng(seed);
    int cin = 2;
    const auto blocks = param_layout(arch);
    for (int l = 0; l < 3; ++l) {
        const ParamBlock& w = blocks[static_cast<std::size_t>(2 * l)];
        const double bound = std::sqrt(6.0 / (cin * 27.0));
        for (std::size_t i = 0; i < w.size; ++i) p.theta[w.offset + i] = rng.uniform(-bound, bound);
        cin = arch.hidden[static_cast<std::size_t>(l)];
    }
    return p;
}

// ---------------------------------------------------------------------------
// Differentiable ops

namespace {

constexpr double kLeakySlope = 0.1;

Tape::Id conv3d(Tape& t, Tape::Id x, Tape::Id w, Tape::Id b, const Dims& dims, int cin, int cout) {
    const std::size_t n = dims.voxels();
    const auto& xv = t.value(x);
    const auto& wv = t.value(w);
    const auto& bv = t.value(b);
    std::vector<double> out(static_cast<std::size_t>(cout) * n);
    for (int co = 0; co < cout; ++co) {
        for (int z = 0; z < dims.d; ++z) {
            for (int y = 0; y < dims.h; ++y) {
                for (int xx = 0; xx < dims.w; ++xx) {
                    double s = bv[static_cast<std::size_t>(co)];
                    for (int ci = 0; ci < cin; ++ci) {
                        const double* wk = &wv[static_cast<std::size_t>((co * cin + ci) * 27)];
                        const double* in = &xv[static_cast<std::size_t>(ci) * n];
                        for (int kz = -1; kz <= 1; ++kz) {
                            const int zz = z + kz;
                            if (zz < 0 || zz >= dims.d) continue;
                            for (int ky = -1; ky <= 1; ++ky) {
                                const int yy = y + ky;
                                if (yy < 0 || yy >= dims.h) continue;
                                for (int kx = -1; kx <= 1; ++kx) {
                                    const int x2 = xx + kx;
                                    if (x2 < 0 || x2 >= dims.w) continue;
                                    s += wk[(kz + 1) * 9 + (ky + 1) * 3 + (kx + 1)] * in[dims.index(x2, yy, zz)];
                                }
                            }
                        }
                    }
                    out[static_cast<std::size_t>(co) * n + dims.index(xx, y, z)] = s;
                }
            }
        }
    }
    const bool diff = t.differentiable(x) || t.differentiable(w) || t.differentiable(b);
    return t.record(std::move(out), diff, [=](Tape& tp, Tape::Id self) {
        const std::vector<double> g = tp.grad(self);
        const auto& xin = tp.value(x);
        const auto& wts = tp.value(w);
        const bool need_x = tp.differentiable(x);
        auto& gw = tp.grad(w);
        auto& gb = tp.grad(b);
        std::vector<double>* gx = need_x ? &tp.grad(x) : nullptr;
        for (int co = 0; co < cout; ++co) {
            for (int z = 0; z < dims.d; ++z) {
                for (int y = 0; y < dims.h; ++y) {
                    for (int xx = 0; xx < dims.w; ++xx) {
                        const double go = g[static_cast<std::size_t>(co) * n + dims.index(xx, y, z)];
                        if (go == 0.0) continue;
                        gb[static_cast<std::size_t>(co)] += go;
                        for (int ci = 0; ci < cin; ++ci) {
                            const std::size_t wbase = static_cast<std::size_t>((co * cin + ci) * 27);
                            const std::size_t ibase = static_cast<std::size_t>(ci) * n;
                            for (int kz = -1; kz <= 1; ++kz) {
                                const int zz = z + kz;
                                if (zz < 0 || zz >= dims.d) continue;
                                for (int ky = -1; ky <= 1; ++ky) {
                                    const int yy = y + ky;
                                    if (yy < 0 || yy >= dims.h) continue;
                                    for (int kx = -1; kx <= 1; ++kx) {
                                        const int x2 = xx + kx;
                                        if (x2 < 0 || x2 >= dims.w) continue;
                                        const std::size_t k = wbase + static_cast<std::size_t>((kz + 1) * 9 + (ky + 1) * 3 + (kx + 1));
                                        const std::size_t iv = ibase + dims.index(x2, yy, zz);
                                        gw[k] += go * xin[iv];
                                        if (gx) (*gx)[iv] += go * wts[k];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    });
}

Tape::Id leaky_relu(Tape& t, Tape::Id x, BackwardFault fault) {
    const auto& xv = t.value(x);
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : kLeakySlope * xv[i];
    const double neg_slope = fault == BackwardFault::leaky_relu_slope ? 1.0 : kLeakySlope;
    return t.record(std::move(out), t.differentiable(x), [=](Tape& tp, Tape::Id self) {
        const auto& g = tp.grad(self);
        const auto& xin = tp.value(x);
        auto& gx = tp.grad(x);
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (xin[i] > 0.0 ? 1.0 : neg_slope);
    });
}

Tape::Id resize(Tape& t, Tape::Id x, const Dims& from, const Dims& to, int channels) {
    std::vector<double> out(to.voxels() * static_cast<std::size_t>(channels));
    kernels::omp::upsample(t.value(x), from, channels, to, out);
    return t.record(std::move(out), t.differentiable(x), [=](Tape& tp, Tape::Id self) {
        const std::vector<double> g = tp.grad(self);
        kernels::omp::upsample_adjoint(g, to, channels, from, tp.grad(x));
    });
}

Tape::Id conv1x1(Tape& t, Tape::Id x, Tape::Id w, Tape::Id b, std::size_t n, int cin, int cout) {
    const auto& xv = t.value(x);
    const auto& wv = t.value(w);
    const auto& bv = t.value(b);
    std::vector<double> out(static_cast<std::size_t>(cout) * n);
    for (int co = 0; co < cout; ++co) {
        for (std::size_t v = 0; v < n; ++v) {
            double s = bv[static_cast<std::size_t>(co)];
            for (int ci = 0; ci < cin; ++ci) s += wv[static_cast<std::size_t>(co * cin + ci)] * xv[static_cast<std::size_t>(ci) * n + v];
            out[static_cast<std::size_t>(co) * n + v] = s;
        }
    }
    const bool diff = t.differentiable(x) || t.differentiable(w) || t.differentiable(b);
    return t.record(std::move(out), diff, [=](Tape& tp, Tape::Id self) {
        const std::vector<double> g = tp.grad(self);
        const auto& xin = tp.value(x);
        const auto& wts = tp.value(w);
        auto& gw = tp.grad(w);
        auto& gb = tp.grad(b);
        std::vector<double>* gx = tp.differentiable(x) ? &tp.grad(x) : nullptr;
        for (int co = 0; co < cout; ++co) {
            for (std::size_t v = 0; v < n; ++v) {
                const double go = g[static_cast<std::size_t>(co) * n + v];
                gb[static_cast<std::size_t>(co)] += go;
                for (int ci = 0; ci < cin; ++ci) {
                    const std::size_t k = static_cast<std::size_t>(co * cin + ci);
                    gw[k] += go * xin[static_cast<std::size_t>(ci) * n + v];
                    if (gx) (*gx)[static_cast<std::size_t>(ci) * n + v] += go * wts[k];
                }
            }
        }
    });
}

Tape::Id tanh_scale(Tape& t, Tape::Id x, double scale, BackwardFault fault) {
    const auto& xv = t.value(x);
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = scale * std::tanh(xv[i]);
    const bool wrong = fault == BackwardFault::tanh_derivative;
    return t.record(std::move(out), t.differentiable(x), [=](Tape& tp, Tape::Id self) {
        const auto& g = tp.grad(self);
        const auto& xin = tp.value(x);
        auto& gx = tp.grad(x);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double th = std::tanh(xin[i]);
            gx[i] += g[i] * scale * (wrong ? 1.0 - th : 1.0 - th * th);
        }
    });
}

}  // namespace

// ---------------------------------------------------------------------------
// Forward / backward

ForwardResult forward(const ModelParams& params, const ImagePair& pair, BackwardFault fault) {
    params.validate();
    const ArchConfig& arch = params.arch;
    require_same_dims(pair.moving.dims(), arch.input, "forward (moving)");
    require_same_dims(pair.fixed.dims(), arch.input, "forward (fixed)");

    const Dims coarse = arch.coarse();
    const Dims control = arch.control_dims();
    const std::size_t nc = coarse.voxels();
    const auto blocks = param_layout(arch);

    Tape tape(params.theta.size());
    std::vector<double> input(2 * nc);
    kernels::omp::avg_pool(pair.moving.data(), arch.input, arch.pool, std::span<double>(input).subspan(0, nc));
    kernels::omp::avg_pool(pair.fixed.data(), arch.input, arch.pool, std::span<double>(input).subspan(nc, nc));
    Tape::Id h = tape.constant(std::move(input));

    auto param = [&](std::size_t block) {
        return tape.parameter(params.theta, blocks[block].offset, blocks[block].size);
    };
    int cin = 2;
    for (int l = 0; l < 3; ++l) {
        const int cout = arch.hidden[static_cast<std::size_t>(l)];
        const Tape::Id w = param(static_cast<std::size_t>(2 * l));
        const Tape::Id b = param(static_cast<std::size_t>(2 * l + 1));
        h = leaky_relu(tape, conv3d(tape, h, w, b, coarse, cin, cout), fault);
        cin = cout;
    }
    if (!(control == coarse)) h = resize(tape, h, coarse, control, cin);
    const Tape::Id hw = param(6);
    const Tape::Id hb = param(7);
    h = conv1x1(tape, h, hw, hb, control.voxels(), cin, 3);
    h = tanh_scale(tape, h, arch.displacement_scale(), fault);
    h = resize(tape, h, control, arch.input, 3);

    Ddf ddf(arch.input, tape.value(h));
    return {std::move(ddf), std::move(tape)};
}

Ddf predict(const ModelParams& params, const ImagePair& pair) { return forward(params, pair).ddf; }

std::vector<double> backward(Tape& tape, const Ddf& upstream) { return tape.backward(upstream.data()); }

// ---------------------------------------------------------------------------
// Adam

namespace {

std::string non_finite_message(std::size_t index, double value) {
    std::ostringstream os;
    os << "non-finite gradient at parameter " << index << " (value " << value << ")";
    return os.str();
}

}  // namespace

NonFiniteGradient::NonFiniteGradient(std::size_t i, double v)
    : std::runtime_error(non_finite_message(i, v)), index(i), value(v) {}

void adam_step(std::vector<double>& params, std::span<const double> grads, AdamState& state) {
    if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw std::invalid_argument("adam_step: length mismatch");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) throw NonFiniteGradient(i, grads[i]);
    }
    const AdamConfig& c = state.cfg;
    ++state.step;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * grads[i];
        state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
}

// ---------------------------------------------------------------------------
// Gradient check

ArchConfig grad_check_arch() {
    ArchConfig a;
    a.input = {8, 8, 8};
    a.pool = 2;
    a.hidden = {3, 3, 3};
    a.control = Dims{3, 3, 3};
    a.max_displacement = 1.5;
    return a;
}

namespace {

Volume smooth_volume(const Dims& dims, Rng& rng) {
    Volume v(dims);
    struct Blob {
        Vec3 c;
        double s, a;
    };
    std::vector<Blob> blobs;
    for (int k = 0; k < 3; ++k) {
        blobs.push_back({{rng.uniform(0, dims.w - 1), rng.uniform(0, dims.h - 1), rng.uniform(0, dims.d - 1)},
                         rng.uniform(1.5, 3.0),
                         rng.uniform(0.3, 1.0)});
    }
    for (int z = 0; z < dims.d; ++z) {
        for (int y = 0; y < dims.h; ++y) {
            for (int x = 0; x < dims.w; ++x) {
                double s = 0.0;
                for (const Blob& b : blobs) {
                    const double r2 = (x - b.c[0]) * (x - b.c[0]) + (y - b.c[1]) * (y - b.c[1]) + (z - b.c[2]) * (z - b.c[2]);
                    s += b.a * std::exp(-r2 / (2.0 * b.s * b.s));
                }
                v.at(x, y, z) = s;
            }
        }
    }
    return v;
}

MaskSet smooth_masks(const Dims& dims, int classes, Rng& rng) {
    MaskSet m(dims, classes, MaskMode::soft);
    for (int c = 0; c < classes; ++c) {
        const Vec3 ctr{rng.uniform(2, dims.w - 3), rng.uniform(2, dims.h - 3), rng.uniform(2, dims.d - 3)};
        const double radius = rng.uniform(1.5, 2.5);
        auto ch = m.channel(c);
        for (int z = 0; z < dims.d; ++z) {
            for (int y = 0; y < dims.h; ++y) {
                for (int x = 0; x < dims.w; ++x) {
                    const double r = std::sqrt((x - ctr[0]) * (x - ctr[0]) + (y - ctr[1]) * (y - ctr[1]) +
                                               (z - ctr[2]) * (z - ctr[2]));
                    ch[dims.index(x, y, z)] = 1.0 / (1.0 + std::exp(2.0 * (r - radius)));
                }
            }
        }
    }
    return m;
}

}  // namespace

GradCheckReport grad_check(const ArchConfig& arch, std::uint64_t seed, BackwardFault fault) {
    arch.validate();
    if (arch.input.w > 8 || arch.input.h > 8 || arch.input.d > 8) {
        throw std::invalid_argument("grad_check: grid must be at most 8^3");
    }
    Rng rng(seed);
    ModelParams params{arch, std::vector<double>(param_count(arch))};
    for (double& t : params.theta) t = rng.uniform(-0.5, 0.5);

    ImagePair pair{smooth_volume(arch.input, rng), smooth_volume(arch.input, rng), smooth_masks(arch.input, 2, rng),
                   smooth_masks(arch.input, 2, rng)};
    Ddf target(arch.input);
    for (double& v : target.data()) v = rng.uniform(-1.0, 1.0);

    struct Path {
        std::string name;
        std::function<double(const Ddf&)> loss;
        std::function<Ddf(const Ddf&)> loss_grad;
    };
    const std::vector<Path> paths{
        {"dice-warp",
         [&](const Ddf& u) { return weak_supervision_loss(*pair.moving_masks, *pair.fixed_masks, u); },
         [&](const Ddf& u) { return weak_supervision_loss_and_grad(*pair.moving_masks, *pair.fixed_masks, u).grad; }},
        {"mse", [&](const Ddf& u) { return mse_consistency(u, target); },
         [&](const Ddf& u) { return mse_consistency_grad(u, target); }},
    };

    GradCheckReport report;
    report.passed = true;
    const auto blocks = param_layout(arch);
    for (const Path& path : paths) {
        ForwardResult fr = forward(params, pair, fault);
        const std::vector<double> analytic = backward(fr.tape, path.loss_grad(fr.ddf));

        auto numeric_at = [&](std::size_t i, double h) {
            ModelParams p = params;
            p.theta[i] = params.theta[i] + h;
            const double up = path.loss(predict(p, pair));
            p.theta[i] = params.theta[i] - h;
            const double down = path.loss(predict(p, pair));
            return (up - down) / (2.0 * h);
        };

        for (const ParamBlock& b : blocks) {
            double max_err = 0.0;
            double max_mag = 0.0;
            for (std::size_t i = b.offset; i < b.offset + b.size; ++i) {
                const double h = 1e-6 * std::max(1.0, std::abs(params.theta[i]));
                double numeric = numeric_at(i, h);
                double err = std::abs(analytic[i] - numeric);
                // A trilinear or leaky-ReLU kink inside [-h, h] spoils one
                // difference; smaller steps step off the kink.
                for (double shrink : {0.1, 0.01}) {
                    if (err <= 1e-10) break;
                    const double n2 = numeric_at(i, h * shrink);
                    const double e2 = std::abs(analytic[i] - n2);
                    if (e2 < err) {
                        err = e2;
                        numeric = n2;
                    }
                }
                max_err = std::max(max_err, err);
                max_mag = std::max({max_mag, std::abs(analytic[i]), std::abs(numeric)});
            }
            const double rel = max_mag > 0.0 ? max_err / max_mag : max_err;
            report.entries.push_back({path.name, b.name, rel});
            if (!(rel < report.tolerance)) report.passed = false;
        }
    }
    return report;
}

}  // namespace swreg
