#pragma once

#include "qsmpad/volume.hpp"

namespace qsmpad {

// Unit dipole response on the discrete k-space grid of `meta`:
//   D(k) = 1/3 - (k . b0)^2 / |k|^2,   D(0) = 0,
// with physical frequencies k_i = s_i / (n_i * voxel_i). Values lie in
// [-2/3, 1/3] and are even in k.
struct DipoleKernel {
    GridMeta meta;
    std::vector<double> values; // full spatial-size grid, x fastest over k indices
};

DipoleKernel dipole_kernel(const GridMeta& meta);

// Induced relative field of a susceptibility distribution: inverse FFT of
// (FFT(chi) * D). Circular convolution semantics; input in ppm yields the
// field in the same ppm scale.
Volume3D forward_field(const Volume3D& chi, const DipoleKernel& kernel);

} // namespace qsmpad
