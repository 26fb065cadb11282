#include "qsmpad/unet.hpp"

#include <sstream>

#include "qsmpad/rng.hpp"

namespace qsmpad {

void UNetConfig::validate() const {
    if (depth < 1) throw ValidationError("UNetConfig: depth must be >= 1");
    if (base_channels < 1) throw ValidationError("UNetConfig: base_channels must be >= 1");
    if (in_channels < 1 || out_channels < 1)
        throw ValidationError("UNetConfig: channel counts must be >= 1");
    if (act_slope < 0.0 || act_slope >= 1.0)
        throw ValidationError("UNetConfig: activation slope must be in [0,1)");
}

UNet::UNet(const UNetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    auto level_channels = [&](int level) { return cfg_.base_channels << level; };

    auto add_layer = [&](int in_c, int out_c) {
        ConvLayer layer(in_c, out_c, cfg_.pad_mode);
        layer.est_trainable = cfg_.pad_mode == PadMode::Neighbor && cfg_.est_trainable;
        layer.he_init(rng);
        layers_.push_back(std::move(layer));
    };

    // Encoder, shallow to deep.
    for (int level = 0; level < cfg_.depth; ++level) {
        const int in_c = level == 0 ? cfg_.in_channels : level_channels(level - 1);
        add_layer(in_c, level_channels(level));
        add_layer(level_channels(level), level_channels(level));
    }
    // Decoder, deep to shallow; input is upsampled deeper level concatenated
    // with the skip at this level.
    for (int level = cfg_.depth - 2; level >= 0; --level) {
        add_layer(level_channels(level + 1) + level_channels(level), level_channels(level));
        add_layer(level_channels(level), level_channels(level));
    }
    add_layer(level_channels(0), cfg_.out_channels);
}

void UNet::check_patch_dims(const std::array<int, 3>& dims) const {
    const int factor = 1 << (cfg_.depth - 1);
    for (int a = 0; a < 3; ++a)
        if (dims[a] % factor != 0)
            throw ValidationError("patch dims must be divisible by 2^(depth-1) = " +
                                  std::to_string(factor));
}

std::vector<Mask3D> UNet::mask_pyramid(const Mask3D& mask) const {
    std::vector<Mask3D> pyramid;
    pyramid.reserve(cfg_.depth);
    pyramid.push_back(mask);
    for (int level = 1; level < cfg_.depth; ++level)
        pyramid.push_back(downsample_mask(pyramid.back()));
    return pyramid;
}

int UNet::conv_block(Tape& tape, int x, int level, int first_layer,
                     const std::vector<Mask3D>& masks) {
    const bool neighbor = cfg_.pad_mode == PadMode::Neighbor;
    const Mask3D* m = neighbor ? &masks[level] : nullptr;
    int h = tape.conv3d(x, layers_[first_layer], m);
    h = tape.leaky_relu(h, cfg_.act_slope);
    h = tape.conv3d(h, layers_[first_layer + 1], m);
    h = tape.leaky_relu(h, cfg_.act_slope);
    return h;
}

int UNet::forward(Tape& tape, int input_id, const std::vector<Mask3D>& masks) {
    check_patch_dims(tape.value(input_id).dims);
    if (cfg_.pad_mode == PadMode::Neighbor &&
        static_cast<int>(masks.size()) < cfg_.depth)
        throw ValidationError("neighbor mode needs a mask pyramid with one level per depth");

    std::vector<int> skips;
    int h = input_id;
    int layer = 0;
    for (int level = 0; level < cfg_.depth; ++level) {
        if (level > 0) h = tape.maxpool3d(h);
        h = conv_block(tape, h, level, layer, masks);
        layer += 2;
        if (level < cfg_.depth - 1) skips.push_back(h);
    }
    for (int level = cfg_.depth - 2; level >= 0; --level) {
        h = tape.upsample3d(h);
        h = tape.concat(h, skips[level]);
        h = conv_block(tape, h, level, layer, masks);
        layer += 2;
    }
    // Final projection, no activation.
    const Mask3D* m = cfg_.pad_mode == PadMode::Neighbor ? &masks[0] : nullptr;
    return tape.conv3d(h, layers_[layer], m);
}

std::size_t UNet::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.param_count();
    return n;
}

std::string UNet::architecture_table() const {
    std::ostringstream out;
    out << "layer\tin_channels\tout_channels\tparams\n";
    const int enc_layers = 2 * cfg_.depth;
    const int dec_layers = 2 * (cfg_.depth - 1);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& l = layers_[i];
        std::string name;
        if (static_cast<int>(i) < enc_layers)
            name = "enc" + std::to_string(i / 2) + "_conv" + std::to_string(i % 2);
        else if (static_cast<int>(i) < enc_layers + dec_layers) {
            const std::size_t j = i - enc_layers;
            name = "dec" + std::to_string(cfg_.depth - 2 - static_cast<int>(j) / 2) + "_conv" +
                   std::to_string(j % 2);
        } else {
            name = "final_conv";
        }
        out << name << '\t' << l.in_channels << '\t' << l.out_channels << '\t' << l.param_count()
            << '\n';
    }
    out << "total\t\t\t" << param_count() << '\n';
    return out.str();
}

void UNet::for_each_param(const std::function<void(double*, double*, std::size_t)>& fn) {
    for (auto& l : layers_) {
        fn(l.weights.data(), l.grad_weights.data(), l.weights.size());
        fn(l.bias.data(), l.grad_bias.data(), l.bias.size());
        if (l.mode == PadMode::Neighbor && l.est_trainable) {
            fn(l.feat_kernel.data(), l.grad_feat_kernel.data(), kKernelTaps);
            fn(l.mask_kernel.data(), l.grad_mask_kernel.data(), kKernelTaps);
        }
    }
}

void UNet::zero_grad() {
    for (auto& l : layers_) l.zero_grad();
}

void UNet::clamp_mask_kernels(double floor) {
    for (auto& l : layers_)
        if (l.mode == PadMode::Neighbor)
            for (auto& v : l.mask_kernel)
                if (v < floor) v = floor;
}

} // namespace qsmpad
