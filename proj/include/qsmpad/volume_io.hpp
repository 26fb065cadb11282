#pragma once

#include <string>

#include "qsmpad/volume.hpp"

namespace qsmpad {

// Native little-endian container:
//   magic "QSMV" | version u32 = 1 | dims 3*u32 | voxel_size 3*f64 (mm) |
//   b0_dir 3*f64 | payload nx*ny*nz f64, x fastest.
// Masks use magic "QSMM" and a u8 payload restricted to {0,1}.
// NIfTI-1 (.nii, single file) is accepted read-only for volumes: 3D scalar
// images with datatype uint8/float32/float64, converted to f64; orientation
// matrices are ignored beyond voxel size.

inline constexpr std::size_t kNativeHeaderBytes = 4 + 4 + 12 + 24 + 24;

Volume3D load_volume(const std::string& path);
void save_volume(const Volume3D& vol, const std::string& path);

Mask3D load_mask(const std::string& path);
void save_mask(const Mask3D& mask, const std::string& path);

} // namespace qsmpad
