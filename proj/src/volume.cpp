#include "qsmpad/volume.hpp"

#include <cmath>
#include <string>

namespace qsmpad {

void GridMeta::validate() const {
    for (int i = 0; i < 3; ++i) {
        if (dims[i] < 1)
            throw ValidationError("GridMeta: dims must be >= 1, got " + std::to_string(dims[i]) +
                                  " on axis " + std::to_string(i));
        if (!(voxel_size[i] > 0.0) || !std::isfinite(voxel_size[i]))
            throw ValidationError("GridMeta: voxel_size must be positive, got " +
                                  std::to_string(voxel_size[i]) + " on axis " + std::to_string(i));
    }
    const double n2 = b0_dir[0] * b0_dir[0] + b0_dir[1] * b0_dir[1] + b0_dir[2] * b0_dir[2];
    if (std::fabs(std::sqrt(n2) - 1.0) > 1e-9)
        throw ValidationError("GridMeta: b0_dir must be a unit vector");
}

void Volume3D::validate() const {
    meta.validate();
    if (data.size() != meta.voxel_count())
        throw ValidationError("Volume3D: data length " + std::to_string(data.size()) +
                              " does not match dims product " + std::to_string(meta.voxel_count()));
    for (double v : data)
        if (!std::isfinite(v)) throw ValidationError("Volume3D: non-finite value in data");
}

std::size_t Mask3D::valid_count() const {
    std::size_t n = 0;
    for (auto v : data) n += (v != 0);
    return n;
}

void Mask3D::validate() const {
    meta.validate();
    if (data.size() != meta.voxel_count())
        throw ValidationError("Mask3D: data length " + std::to_string(data.size()) +
                              " does not match dims product " + std::to_string(meta.voxel_count()));
    for (auto v : data)
        if (v > 1) throw ValidationError("Mask3D: values must be 0 or 1");
}

Mask3D mask_from_volume(const Volume3D& vol, double threshold) {
    Mask3D m(vol.meta);
    for (std::size_t i = 0; i < vol.data.size(); ++i)
        m.data[i] = vol.data[i] > threshold ? 1 : 0;
    return m;
}

} // namespace qsmpad
