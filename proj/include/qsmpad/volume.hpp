#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "qsmpad/errors.hpp"

namespace qsmpad {

// Grid geometry shared by volumes, masks and k-space kernels.
// Axis order is fixed project-wide: x fastest, voxel sizes in mm,
// susceptibility in ppm, fields as dimensionless relative field.
struct GridMeta {
    std::array<int, 3> dims{0, 0, 0};             // nx, ny, nz
    std::array<double, 3> voxel_size{1.0, 1.0, 1.0}; // mm
    std::array<double, 3> b0_dir{0.0, 0.0, 1.0};  // unit vector

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }

    // dims >= 1, voxel_size > 0, |b0_dir| = 1 within 1e-9.
    void validate() const;

    bool operator==(const GridMeta& o) const {
        return dims == o.dims && voxel_size == o.voxel_size && b0_dir == o.b0_dir;
    }
};

// Dense scalar 3D field.
struct Volume3D {
    GridMeta meta;
    std::vector<double> data;

    Volume3D() = default;
    explicit Volume3D(const GridMeta& m, double fill = 0.0)
        : meta(m), data(m.voxel_count(), fill) {}

    std::size_t index(int x, int y, int z) const {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(meta.dims[0]) *
                   (static_cast<std::size_t>(y) + static_cast<std::size_t>(meta.dims[1]) * z);
    }
    double at(int x, int y, int z) const { return data[index(x, y, z)]; }
    double& at(int x, int y, int z) { return data[index(x, y, z)]; }

    // Throws ValidationError if data length disagrees with meta or any value
    // is non-finite.
    void validate() const;
};

// Binary validity/ROI volume on the same grid convention. 0 = invalid, 1 = valid.
struct Mask3D {
    GridMeta meta;
    std::vector<std::uint8_t> data;

    Mask3D() = default;
    explicit Mask3D(const GridMeta& m, std::uint8_t fill = 0)
        : meta(m), data(m.voxel_count(), fill) {}

    std::size_t index(int x, int y, int z) const {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(meta.dims[0]) *
                   (static_cast<std::size_t>(y) + static_cast<std::size_t>(meta.dims[1]) * z);
    }
    std::uint8_t at(int x, int y, int z) const { return data[index(x, y, z)]; }
    std::uint8_t& at(int x, int y, int z) { return data[index(x, y, z)]; }

    std::size_t valid_count() const;

    void validate() const;
};

// Binarize a scalar volume (value > threshold becomes valid).
Mask3D mask_from_volume(const Volume3D& vol, double threshold = 0.5);

} // namespace qsmpad
