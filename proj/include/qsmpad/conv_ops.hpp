#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "qsmpad/tensor.hpp"
#include "qsmpad/volume.hpp"

namespace qsmpad {

enum class PadMode : std::uint8_t { Zero = 0, Symmetric = 1, Reflective = 2, Neighbor = 3 };

const char* pad_mode_name(PadMode m);
PadMode pad_mode_from_name(const std::string& name);

inline constexpr int kKernelTaps = 27; // fixed 3x3x3 spatial support

inline int kernel_tap(int dx, int dy, int dz) {
    return ((dz + 1) * 3 + (dy + 1)) * 3 + (dx + 1);
}

// One 3x3x3 "same" convolution layer. In neighbor mode the layer also owns
// the feature-estimation and mask-scaling kernels (shared across channels,
// all-one initialized, optionally trainable).
struct ConvLayer {
    int in_channels = 0;
    int out_channels = 0;
    PadMode mode = PadMode::Zero;

    std::vector<double> weights; // [oc][ic][dz][dy][dx]
    std::vector<double> bias;    // [oc]
    std::array<double, kKernelTaps> feat_kernel{};
    std::array<double, kKernelTaps> mask_kernel{};
    bool est_trainable = false;

    std::vector<double> grad_weights;
    std::vector<double> grad_bias;
    std::array<double, kKernelTaps> grad_feat_kernel{};
    std::array<double, kKernelTaps> grad_mask_kernel{};

    ConvLayer() = default;
    ConvLayer(int in_c, int out_c, PadMode m);

    std::size_t weight_index(int oc, int ic, int tap) const {
        return (static_cast<std::size_t>(oc) * in_channels + ic) * kKernelTaps + tap;
    }

    void he_init(class Rng& rng);
    void zero_grad();
    std::size_t param_count() const;
};

// Feature map padded by one voxel per side with the mode's boundary rule
// already applied; the convolution core itself is then branch-free and
// identical across modes. Neighbor mode additionally keeps the scaling
// denominators and validity flags needed for the backward pass.
struct PaddedInput {
    int channels = 0;
    std::array<int, 3> dims{0, 0, 0}; // unpadded dims
    std::vector<double> data;         // channels * (nx+2)(ny+2)(nz+2)
    std::vector<double> den;          // neighbor mode: s(v) per padded voxel
    std::vector<std::uint8_t> valid;  // neighbor mode: 1 = in-array and mask-valid

    std::size_t pvoxels() const {
        return static_cast<std::size_t>(dims[0] + 2) * (dims[1] + 2) * (dims[2] + 2);
    }
    std::size_t pindex(int c, int px, int py, int pz) const {
        return ((static_cast<std::size_t>(c) * (dims[2] + 2) + pz) * (dims[1] + 2) + py) *
                   static_cast<std::size_t>(dims[0] + 2) +
               px;
    }
};

PaddedInput pad_input(const FeatureTensor& x, PadMode mode, const Mask3D* mask,
                      const std::array<double, kKernelTaps>* feat_kernel,
                      const std::array<double, kKernelTaps>* mask_kernel);

// y(oc,v) = bias[oc] + sum_{ic,t} w[oc][ic][t] * xpad(ic, v+t)
void conv_forward_core(const PaddedInput& xp, const ConvLayer& layer, FeatureTensor& y);

// Accumulates layer.grad_weights/grad_bias and returns gradient w.r.t. the
// padded input.
void conv_backward_core(const PaddedInput& xp, ConvLayer& layer, const FeatureTensor& grad_y,
                        std::vector<double>& grad_xpad);

// Routes padded-input gradient back to the unpadded input (and, in neighbor
// mode, through the estimate's quotient rule into the estimation kernels).
void pad_backward(const PaddedInput& xp, const FeatureTensor& x, PadMode mode, const Mask3D* mask,
                  ConvLayer* layer_for_est_grads, const std::vector<double>& grad_xpad,
                  FeatureTensor& grad_x);

// Replaces each invalid voxel having any mask-weighted neighbor by
// sum(fk*M*X)/sum(mk*M) over its 3^3 neighborhood (out-of-array counts as
// invalid); isolated invalid voxels become 0; valid voxels pass through.
FeatureTensor neighbor_pad_estimate(const FeatureTensor& x, const Mask3D& mask,
                                    const std::array<double, kKernelTaps>& feat_kernel,
                                    const std::array<double, kKernelTaps>& mask_kernel);

// Full layer application outside any tape (prediction-style use).
FeatureTensor conv3d_apply(const FeatureTensor& x, const ConvLayer& layer, const Mask3D* mask);

// 2x2x2 max pooling; argmax flat indices recorded for the backward pass.
void maxpool_forward(const FeatureTensor& x, FeatureTensor& y, std::vector<std::uint32_t>& argmax);
void maxpool_backward(const FeatureTensor& grad_y, const std::vector<std::uint32_t>& argmax,
                      FeatureTensor& grad_x);

// Window-max downsampling of a mask (valid if any constituent voxel valid).
Mask3D downsample_mask(const Mask3D& mask);

void upsample_forward(const FeatureTensor& x, FeatureTensor& y);
void upsample_backward(const FeatureTensor& grad_y, FeatureTensor& grad_x);

} // namespace qsmpad
