#pragma once

#include "qsmpad/volume.hpp"

namespace qsmpad {

// Keeps a voxel valid iff every voxel within Euclidean distance radius_mm
// (voxel centers, anisotropic spacing honored) is valid. Positions outside
// the array count as invalid, so a fully valid volume loses a surface shell.
Mask3D erode_mask(const Mask3D& mask, double radius_mm);

// Valid voxels whose chessboard distance to the nearest invalid voxel is
// <= width. The volume edge counts as invalid, so a fully valid mask still
// has a band at the array boundary.
Mask3D boundary_band(const Mask3D& mask, int width_voxels);

// Chessboard (L-inf) distance from each voxel to the nearest invalid voxel,
// with the volume edge treated as invalid. Invalid voxels get 0. Used by
// boundary_band and the shell-wise error profile.
std::vector<int> chessboard_distance_to_invalid(const Mask3D& mask);

// Squared Euclidean distance (mm^2) from each voxel to the nearest invalid
// voxel, volume edge treated as invalid.
std::vector<double> squared_euclidean_distance_to_invalid(const Mask3D& mask);

} // namespace qsmpad
