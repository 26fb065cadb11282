#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "qsmpad/tape.hpp"

namespace qsmpad {

struct UNetConfig {
    int depth = 3;         // resolution levels; channels double per level
    int base_channels = 8;
    PadMode pad_mode = PadMode::Zero;
    double act_slope = 0.1;
    int in_channels = 1;
    int out_channels = 1;
    bool est_trainable = false; // neighbor mode: train the estimation kernels

    void validate() const;
};

// Encoder of `depth` levels (two 3x3x3 convs + activation each, maxpool
// between), mirrored decoder with nearest-neighbor upsample and skip
// concatenation, final conv to out_channels. In neighbor mode every conv
// receives the mask downsampled to its level.
class UNet {
public:
    UNet() = default;
    UNet(const UNetConfig& cfg, std::uint64_t seed);

    const UNetConfig& config() const { return cfg_; }
    std::vector<ConvLayer>& layers() { return layers_; }
    const std::vector<ConvLayer>& layers() const { return layers_; }

    // Records the forward pass on `tape`. `masks` must hold `depth` levels
    // (masks[0] at input resolution); it may be empty for non-neighbor modes.
    // Non-const because the tape accumulates into the layers' grad buffers.
    int forward(Tape& tape, int input_id, const std::vector<Mask3D>& masks);

    // Successive window-max downsamples of the input mask, one per level.
    std::vector<Mask3D> mask_pyramid(const Mask3D& mask) const;

    // Requires patch dims divisible by 2^(depth-1).
    void check_patch_dims(const std::array<int, 3>& dims) const;

    std::size_t param_count() const;

    // Plain-text table (name, in_c, out_c, params per layer) used by the
    // parameter-count oracle and dumped next to checkpoints.
    std::string architecture_table() const;

    // Visits each trainable parameter array paired with its gradient buffer,
    // in a stable order.
    void for_each_param(const std::function<void(double*, double*, std::size_t)>& fn);

    void zero_grad();

    // Keeps neighbor-mode scaling denominators away from zero; applied after
    // every optimizer step when estimation kernels are trainable.
    void clamp_mask_kernels(double floor = 1e-3);

private:
    UNetConfig cfg_;
    // Layer list order: per encoder level two convs, then per decoder level
    // two convs, then the final projection.
    std::vector<ConvLayer> layers_;

    int conv_block(Tape& tape, int x, int level, int first_layer,
                   const std::vector<Mask3D>& masks);
};

} // namespace qsmpad
