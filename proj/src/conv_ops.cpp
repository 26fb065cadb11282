#include "qsmpad/conv_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qsmpad/rng.hpp"

namespace qsmpad {

const char* pad_mode_name(PadMode m) {
    switch (m) {
        case PadMode::Zero: return "zero";
        case PadMode::Symmetric: return "symmetric";
        case PadMode::Reflective: return "reflective";
        case PadMode::Neighbor: return "neighbor";
    }
    return "?";
}

PadMode pad_mode_from_name(const std::string& name) {
    if (name == "zero") return PadMode::Zero;
    if (name == "symmetric") return PadMode::Symmetric;
    if (name == "reflective") return PadMode::Reflective;
    if (name == "neighbor") return PadMode::Neighbor;
    throw ValidationError("unknown padding mode: " + name);
}

ConvLayer::ConvLayer(int in_c, int out_c, PadMode m)
    : in_channels(in_c), out_channels(out_c), mode(m),
      weights(static_cast<std::size_t>(in_c) * out_c * kKernelTaps, 0.0),
      bias(out_c, 0.0),
      grad_weights(weights.size(), 0.0),
      grad_bias(out_c, 0.0) {
    feat_kernel.fill(1.0);
    mask_kernel.fill(1.0);
}

void ConvLayer::he_init(Rng& rng) {
    const double stddev = std::sqrt(2.0 / (in_channels * kKernelTaps));
    for (double& w : weights) w = stddev * rng.normal();
    std::fill(bias.begin(), bias.end(), 0.0);
}

void ConvLayer::zero_grad() {
    std::fill(grad_weights.begin(), grad_weights.end(), 0.0);
    std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
    grad_feat_kernel.fill(0.0);
    grad_mask_kernel.fill(0.0);
}

std::size_t ConvLayer::param_count() const {
    std::size_t n = weights.size() + bias.size();
    if (mode == PadMode::Neighbor && est_trainable) n += 2 * kKernelTaps;
    return n;
}

namespace {

// Mirror index for one padded coordinate q in [-1, n]. Symmetric repeats the
// edge (-1 -> 0), reflective does not (-1 -> 1).
inline int mirror_index(int q, int n, bool reflective) {
    if (q < 0) q = reflective ? 1 : 0;
    else if (q >= n) q = reflective ? n - 2 : n - 1;
    return std::clamp(q, 0, n - 1);
}

// Fills neighbor-mode estimates for one padded voxel at p (unpadded coords,
// any axis may be -1 or n). Returns the scaling denominator s.
inline double estimate_at(const FeatureTensor& x, const Mask3D& mask,
                          const std::array<double, kKernelTaps>& fk,
                          const std::array<double, kKernelTaps>& mk, int px, int py, int pz,
                          double* out, std::size_t out_stride) {
    const int nx = x.dims[0], ny = x.dims[1], nz = x.dims[2];
    double s = 0.0;
    for (int dz = -1; dz <= 1; ++dz) {
        const int z = pz + dz;
        if (z < 0 || z >= nz) continue;
        for (int dy = -1; dy <= 1; ++dy) {
            const int y = py + dy;
            if (y < 0 || y >= ny) continue;
            for (int dx = -1; dx <= 1; ++dx) {
                const int xx = px + dx;
                if (xx < 0 || xx >= nx) continue;
                if (!mask.at(xx, y, z)) continue;
                s += mk[kernel_tap(dx, dy, dz)];
            }
        }
    }
    if (s <= 0.0) {
        for (int c = 0; c < x.channels; ++c) out[c * out_stride] = 0.0;
        return 0.0;
    }
    for (int c = 0; c < x.channels; ++c) {
        double num = 0.0;
        for (int dz = -1; dz <= 1; ++dz) {
            const int z = pz + dz;
            if (z < 0 || z >= nz) continue;
            for (int dy = -1; dy <= 1; ++dy) {
                const int y = py + dy;
                if (y < 0 || y >= ny) continue;
                for (int dx = -1; dx <= 1; ++dx) {
                    const int xx = px + dx;
                    if (xx < 0 || xx >= nx) continue;
                    if (!mask.at(xx, y, z)) continue;
                    num += fk[kernel_tap(dx, dy, dz)] * x.at(c, xx, y, z);
                }
            }
        }
        out[c * out_stride] = num / s;
    }
    return s;
}

} // namespace

PaddedInput pad_input(const FeatureTensor& x, PadMode mode, const Mask3D* mask,
                      const std::array<double, kKernelTaps>* feat_kernel,
                      const std::array<double, kKernelTaps>* mask_kernel) {
    const int nx = x.dims[0], ny = x.dims[1], nz = x.dims[2];
    PaddedInput xp;
    xp.channels = x.channels;
    xp.dims = x.dims;
    xp.data.assign(static_cast<std::size_t>(x.channels) * xp.pvoxels(), 0.0);

    if (mode == PadMode::Neighbor) {
        if (mask == nullptr)
            throw ValidationError("neighbor padding requires a mask");
        if (mask->meta.dims != x.dims)
            throw ValidationError("neighbor padding: mask dims differ from tensor dims");
        if (feat_kernel == nullptr || mask_kernel == nullptr)
            throw ValidationError("neighbor padding requires estimation kernels");
        for (double v : *mask_kernel)
            if (v < 0.0) throw ValidationError("mask-scaling kernel entries must be >= 0");

        xp.den.assign(xp.pvoxels(), 0.0);
        xp.valid.assign(xp.pvoxels(), 0);
        const std::size_t cstride = xp.pvoxels();
        for (int pz = -1; pz <= nz; ++pz)
            for (int py = -1; py <= ny; ++py)
                for (int px = -1; px <= nx; ++px) {
                    const std::size_t base = xp.pindex(0, px + 1, py + 1, pz + 1);
                    const bool in_array =
                        px >= 0 && px < nx && py >= 0 && py < ny && pz >= 0 && pz < nz;
                    if (in_array && mask->at(px, py, pz)) {
                        xp.valid[base] = 1;
                        for (int c = 0; c < x.channels; ++c)
                            xp.data[base + c * cstride] = x.at(c, px, py, pz);
                    } else {
                        xp.den[base] = estimate_at(x, *mask, *feat_kernel, *mask_kernel, px, py,
                                                   pz, &xp.data[base], cstride);
                    }
                }
        return xp;
    }

    // Conventional modes: interior copy plus ring fill.
    for (int c = 0; c < x.channels; ++c)
        for (int z = 0; z < nz; ++z)
            for (int y = 0; y < ny; ++y) {
                const double* src = &x.data[x.index(c, 0, y, z)];
                double* dst = &xp.data[xp.pindex(c, 1, y + 1, z + 1)];
                std::copy(src, src + nx, dst);
            }
    if (mode == PadMode::Zero) return xp;

    const bool refl = mode == PadMode::Reflective;
    for (int c = 0; c < x.channels; ++c)
        for (int pz = -1; pz <= nz; ++pz)
            for (int py = -1; py <= ny; ++py)
                for (int px = -1; px <= nx; ++px) {
                    if (px >= 0 && px < nx && py >= 0 && py < ny && pz >= 0 && pz < nz) continue;
                    const int sx = mirror_index(px, nx, refl);
                    const int sy = mirror_index(py, ny, refl);
                    const int sz = mirror_index(pz, nz, refl);
                    xp.data[xp.pindex(c, px + 1, py + 1, pz + 1)] = x.at(c, sx, sy, sz);
                }
    return xp;
}

void conv_forward_core(const PaddedInput& xp, const ConvLayer& layer, FeatureTensor& y) {
    if (xp.channels != layer.in_channels)
        throw ValidationError("conv3d: input has " + std::to_string(xp.channels) +
                              " channels, layer expects " + std::to_string(layer.in_channels));
    const int nx = xp.dims[0], ny = xp.dims[1], nz = xp.dims[2];
    y = FeatureTensor(layer.out_channels, xp.dims);
    const std::size_t row = static_cast<std::size_t>(nx);

    for (int oc = 0; oc < layer.out_channels; ++oc) {
        double* ychan = y.channel(oc);
        std::fill(ychan, ychan + y.voxels(), layer.bias[oc]);
        for (int ic = 0; ic < layer.in_channels; ++ic) {
            const double* w27 = &layer.weights[layer.weight_index(oc, ic, 0)];
            for (int z = 0; z < nz; ++z)
                for (int yy = 0; yy < ny; ++yy) {
                    double* out = ychan + (static_cast<std::size_t>(z) * ny + yy) * row;
                    for (int dz = -1; dz <= 1; ++dz)
                        for (int dy = -1; dy <= 1; ++dy) {
                            const double* in =
                                &xp.data[xp.pindex(ic, 0, yy + dy + 1, z + dz + 1)];
                            const double w0 = w27[kernel_tap(-1, dy, dz)];
                            const double w1 = w27[kernel_tap(0, dy, dz)];
                            const double w2 = w27[kernel_tap(1, dy, dz)];
                            for (int xx = 0; xx < nx; ++xx)
                                out[xx] += w0 * in[xx] + w1 * in[xx + 1] + w2 * in[xx + 2];
                        }
                }
        }
    }
}

void conv_backward_core(const PaddedInput& xp, ConvLayer& layer, const FeatureTensor& grad_y,
                        std::vector<double>& grad_xpad) {
    const int nx = xp.dims[0], ny = xp.dims[1], nz = xp.dims[2];
    grad_xpad.assign(xp.data.size(), 0.0);

    for (int oc = 0; oc < layer.out_channels; ++oc) {
        const double* gchan = grad_y.channel(oc);
        double acc_b = 0.0;
        for (std::size_t i = 0; i < grad_y.voxels(); ++i) acc_b += gchan[i];
        layer.grad_bias[oc] += acc_b;

        for (int ic = 0; ic < layer.in_channels; ++ic) {
            double* gw27 = &layer.grad_weights[layer.weight_index(oc, ic, 0)];
            const double* w27 = &layer.weights[layer.weight_index(oc, ic, 0)];
            for (int z = 0; z < nz; ++z)
                for (int yy = 0; yy < ny; ++yy) {
                    const double* g = gchan + (static_cast<std::size_t>(z) * ny + yy) * nx;
                    for (int dz = -1; dz <= 1; ++dz)
                        for (int dy = -1; dy <= 1; ++dy) {
                            const std::size_t base = xp.pindex(ic, 0, yy + dy + 1, z + dz + 1);
                            const double* in = &xp.data[base];
                            double* gin = &grad_xpad[base];
                            double a0 = 0.0, a1 = 0.0, a2 = 0.0;
                            for (int xx = 0; xx < nx; ++xx) {
                                const double gv = g[xx];
                                a0 += gv * in[xx];
                                a1 += gv * in[xx + 1];
                                a2 += gv * in[xx + 2];
                            }
                            gw27[kernel_tap(-1, dy, dz)] += a0;
                            gw27[kernel_tap(0, dy, dz)] += a1;
                            gw27[kernel_tap(1, dy, dz)] += a2;
                            const double w0 = w27[kernel_tap(-1, dy, dz)];
                            const double w1 = w27[kernel_tap(0, dy, dz)];
                            const double w2 = w27[kernel_tap(1, dy, dz)];
                            for (int xx = 0; xx < nx; ++xx) gin[xx] += w0 * g[xx];
                            for (int xx = 0; xx < nx; ++xx) gin[xx + 1] += w1 * g[xx];
                            for (int xx = 0; xx < nx; ++xx) gin[xx + 2] += w2 * g[xx];
                        }
                }
        }
    }
}

void pad_backward(const PaddedInput& xp, const FeatureTensor& x, PadMode mode, const Mask3D* mask,
                  ConvLayer* layer_for_est_grads, const std::vector<double>& grad_xpad,
                  FeatureTensor& grad_x) {
    const int nx = xp.dims[0], ny = xp.dims[1], nz = xp.dims[2];
    grad_x = FeatureTensor(xp.channels, xp.dims);
    const std::size_t cstride = xp.pvoxels();

    if (mode == PadMode::Zero) {
        for (int c = 0; c < xp.channels; ++c)
            for (int z = 0; z < nz; ++z)
                for (int y = 0; y < ny; ++y) {
                    const double* src = &grad_xpad[xp.pindex(c, 1, y + 1, z + 1)];
                    double* dst = &grad_x.data[grad_x.index(c, 0, y, z)];
                    for (int xx = 0; xx < nx; ++xx) dst[xx] += src[xx];
                }
        return;
    }

    if (mode == PadMode::Symmetric || mode == PadMode::Reflective) {
        const bool refl = mode == PadMode::Reflective;
        for (int c = 0; c < xp.channels; ++c)
            for (int pz = -1; pz <= nz; ++pz)
                for (int py = -1; py <= ny; ++py)
                    for (int px = -1; px <= nx; ++px) {
                        const double g = grad_xpad[xp.pindex(c, px + 1, py + 1, pz + 1)];
                        if (g == 0.0) continue;
                        const int sx = mirror_index(px, nx, refl);
                        const int sy = mirror_index(py, ny, refl);
                        const int sz = mirror_index(pz, nz, refl);
                        grad_x.at(c, sx, sy, sz) += g;
                    }
        return;
    }

    // Neighbor mode: identity on valid voxels, quotient rule through the
    // estimate elsewhere. Invalid input voxels correctly keep zero gradient.
    const auto& fk = layer_for_est_grads->feat_kernel;
    const auto& mk = layer_for_est_grads->mask_kernel;
    const bool want_est_grads = layer_for_est_grads->est_trainable;
    for (int pz = -1; pz <= nz; ++pz)
        for (int py = -1; py <= ny; ++py)
            for (int px = -1; px <= nx; ++px) {
                const std::size_t base = xp.pindex(0, px + 1, py + 1, pz + 1);
                if (xp.valid[base]) {
                    for (int c = 0; c < xp.channels; ++c)
                        grad_x.at(c, px, py, pz) += grad_xpad[base + c * cstride];
                    continue;
                }
                const double s = xp.den[base];
                if (s <= 0.0) continue;
                for (int dz = -1; dz <= 1; ++dz) {
                    const int z = pz + dz;
                    if (z < 0 || z >= nz) continue;
                    for (int dy = -1; dy <= 1; ++dy) {
                        const int y = py + dy;
                        if (y < 0 || y >= ny) continue;
                        for (int dx = -1; dx <= 1; ++dx) {
                            const int xx = px + dx;
                            if (xx < 0 || xx >= nx) continue;
                            if (!mask->at(xx, y, z)) continue;
                            const int tap = kernel_tap(dx, dy, dz);
                            for (int c = 0; c < xp.channels; ++c) {
                                const double g = grad_xpad[base + c * cstride];
                                if (g == 0.0) continue;
                                grad_x.at(c, xx, y, z) += g * fk[tap] / s;
                                if (want_est_grads) {
                                    layer_for_est_grads->grad_feat_kernel[tap] +=
                                        g * x.at(c, xx, y, z) / s;
                                    layer_for_est_grads->grad_mask_kernel[tap] -=
                                        g * xp.data[base + c * cstride] / s;
                                }
                            }
                        }
                    }
                }
            }
}

FeatureTensor neighbor_pad_estimate(const FeatureTensor& x, const Mask3D& mask,
                                    const std::array<double, kKernelTaps>& feat_kernel,
                                    const std::array<double, kKernelTaps>& mask_kernel) {
    if (mask.meta.dims != x.dims)
        throw ValidationError("neighbor_pad_estimate: mask dims differ from tensor dims");
    for (double v : mask_kernel)
        if (v < 0.0) throw ValidationError("mask-scaling kernel entries must be >= 0");

    FeatureTensor out = x;
    const int nx = x.dims[0], ny = x.dims[1], nz = x.dims[2];
    const std::size_t cstride = out.voxels();
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int xx = 0; xx < nx; ++xx) {
                if (mask.at(xx, y, z)) continue;
                estimate_at(x, mask, feat_kernel, mask_kernel, xx, y, z,
                            &out.data[out.index(0, xx, y, z)], cstride);
            }
    return out;
}

FeatureTensor conv3d_apply(const FeatureTensor& x, const ConvLayer& layer, const Mask3D* mask) {
    const PaddedInput xp = pad_input(x, layer.mode, mask,
                                     layer.mode == PadMode::Neighbor ? &layer.feat_kernel : nullptr,
                                     layer.mode == PadMode::Neighbor ? &layer.mask_kernel : nullptr);
    FeatureTensor y;
    conv_forward_core(xp, layer, y);
    if (layer.mode == PadMode::Neighbor) {
        const std::size_t vox = y.voxels();
        for (int c = 0; c < y.channels; ++c) {
            double* chan = y.channel(c);
            for (std::size_t i = 0; i < vox; ++i)
                if (!mask->data[i]) chan[i] = 0.0;
        }
    }
    return y;
}

void maxpool_forward(const FeatureTensor& x, FeatureTensor& y, std::vector<std::uint32_t>& argmax) {
    for (int a = 0; a < 3; ++a)
        if (x.dims[a] % 2 != 0)
            throw ValidationError("maxpool3d: dims must be even, got " + std::to_string(x.dims[a]));
    const std::array<int, 3> od{x.dims[0] / 2, x.dims[1] / 2, x.dims[2] / 2};
    y = FeatureTensor(x.channels, od);
    argmax.assign(y.size(), 0);
    for (int c = 0; c < x.channels; ++c)
        for (int z = 0; z < od[2]; ++z)
            for (int yy = 0; yy < od[1]; ++yy)
                for (int xx = 0; xx < od[0]; ++xx) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t best_i = 0;
                    for (int dz = 0; dz < 2; ++dz)
                        for (int dy = 0; dy < 2; ++dy)
                            for (int dx = 0; dx < 2; ++dx) {
                                const std::size_t i =
                                    x.index(c, 2 * xx + dx, 2 * yy + dy, 2 * z + dz);
                                if (x.data[i] > best) {
                                    best = x.data[i];
                                    best_i = i;
                                }
                            }
                    const std::size_t o = y.index(c, xx, yy, z);
                    y.data[o] = best;
                    argmax[o] = static_cast<std::uint32_t>(best_i);
                }
}

void maxpool_backward(const FeatureTensor& grad_y, const std::vector<std::uint32_t>& argmax,
                      FeatureTensor& grad_x) {
    for (std::size_t o = 0; o < grad_y.size(); ++o) grad_x.data[argmax[o]] += grad_y.data[o];
}

Mask3D downsample_mask(const Mask3D& mask) {
    for (int a = 0; a < 3; ++a)
        if (mask.meta.dims[a] % 2 != 0)
            throw ValidationError("downsample_mask: dims must be even");
    GridMeta meta = mask.meta;
    for (int a = 0; a < 3; ++a) {
        meta.dims[a] /= 2;
        meta.voxel_size[a] *= 2.0;
    }
    Mask3D out(meta);
    for (int z = 0; z < meta.dims[2]; ++z)
        for (int y = 0; y < meta.dims[1]; ++y)
            for (int x = 0; x < meta.dims[0]; ++x) {
                std::uint8_t any = 0;
                for (int dz = 0; dz < 2; ++dz)
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx)
                            any |= mask.at(2 * x + dx, 2 * y + dy, 2 * z + dz);
                out.at(x, y, z) = any;
            }
    return out;
}

void upsample_forward(const FeatureTensor& x, FeatureTensor& y) {
    const std::array<int, 3> od{x.dims[0] * 2, x.dims[1] * 2, x.dims[2] * 2};
    y = FeatureTensor(x.channels, od);
    for (int c = 0; c < x.channels; ++c)
        for (int z = 0; z < od[2]; ++z)
            for (int yy = 0; yy < od[1]; ++yy)
                for (int xx = 0; xx < od[0]; ++xx)
                    y.at(c, xx, yy, z) = x.at(c, xx / 2, yy / 2, z / 2);
}

void upsample_backward(const FeatureTensor& grad_y, FeatureTensor& grad_x) {
    const std::array<int, 3> od = grad_y.dims;
    for (int c = 0; c < grad_y.channels; ++c)
        for (int z = 0; z < od[2]; ++z)
            for (int yy = 0; yy < od[1]; ++yy)
                for (int xx = 0; xx < od[0]; ++xx)
                    grad_x.at(c, xx / 2, yy / 2, z / 2) += grad_y.at(c, xx, yy, z);
}

} // namespace qsmpad
