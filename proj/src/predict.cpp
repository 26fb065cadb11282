#include "qsmpad/predict.hpp"

#include <algorithm>

#include "qsmpad/parallel.hpp"
#include "qsmpad/patches.hpp"

namespace qsmpad {

namespace {

std::vector<int> tile_starts(int n, int patch, int overlap) {
    std::vector<int> starts;
    const int step = patch - overlap;
    for (int o = 0;; o += step) {
        if (o + patch >= n) {
            starts.push_back(n - patch);
            break;
        }
        starts.push_back(o);
    }
    return starts;
}

} // namespace

Volume3D predict_volume(UNet& model, const Volume3D& input, const Mask3D& mask,
                        const std::array<int, 3>& patch_size, int overlap) {
    input.validate();
    if (!(input.meta == mask.meta))
        throw ValidationError("predict_volume: input and mask grids differ");
    for (int a = 0; a < 3; ++a)
        if (patch_size[a] > input.meta.dims[a])
            throw ValidationError("predict_volume: patch exceeds volume on axis " +
                                  std::to_string(a));
    if (overlap < 0 || overlap >= std::min({patch_size[0], patch_size[1], patch_size[2]}) / 2)
        throw ValidationError("predict_volume: overlap must be in [0, patch_size/2)");
    model.check_patch_dims(patch_size);

    const auto xs = tile_starts(input.meta.dims[0], patch_size[0], overlap);
    const auto ys = tile_starts(input.meta.dims[1], patch_size[1], overlap);
    const auto zs = tile_starts(input.meta.dims[2], patch_size[2], overlap);

    std::vector<std::array<int, 3>> origins;
    for (int z : zs)
        for (int y : ys)
            for (int x : xs) origins.push_back({x, y, z});

    // Tiles are independent; blending accumulates in fixed tile order so the
    // result does not depend on scheduling.
    std::vector<FeatureTensor> tile_out(origins.size());
    parallel_for(origins.size(), [&](std::size_t t) {
        const auto& o = origins[t];
        Volume3D in = crop_volume(input, o, patch_size);
        Mask3D m = crop_mask(mask, o, patch_size);
        for (std::size_t i = 0; i < in.data.size(); ++i)
            if (!m.data[i]) in.data[i] = 0.0;
        Tape tape;
        const int in_id = tape.input(tensor_from_volume(in));
        const auto masks = model.mask_pyramid(m);
        const int out_id = model.forward(tape, in_id, masks);
        tile_out[t] = tape.value(out_id);
    });

    Volume3D sum(input.meta);
    Volume3D count(input.meta);
    for (std::size_t t = 0; t < origins.size(); ++t) {
        const auto& o = origins[t];
        const FeatureTensor& y = tile_out[t];
        for (int z = 0; z < patch_size[2]; ++z)
            for (int yy = 0; yy < patch_size[1]; ++yy)
                for (int xx = 0; xx < patch_size[0]; ++xx) {
                    const std::size_t vi = sum.index(o[0] + xx, o[1] + yy, o[2] + z);
                    sum.data[vi] += y.at(0, xx, yy, z);
                    count.data[vi] += 1.0;
                }
    }

    Volume3D out(input.meta);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = mask.data[i] ? sum.data[i] / count.data[i] : 0.0;
    return out;
}

} // namespace qsmpad
