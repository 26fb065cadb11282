#pragma once

#include "qsmpad/unet.hpp"
#include "qsmpad/volume.hpp"

namespace qsmpad {

// Sliding-window whole-volume inference: tiles of `patch_size` with the
// given overlap, overlapping predictions blended by uniform averaging,
// output zeroed outside the mask. Tile inputs are ROI-masked exactly like
// training patches.
Volume3D predict_volume(UNet& model, const Volume3D& input, const Mask3D& mask,
                        const std::array<int, 3>& patch_size, int overlap);

} // namespace qsmpad
