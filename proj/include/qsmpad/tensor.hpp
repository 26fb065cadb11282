#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "qsmpad/errors.hpp"
#include "qsmpad/volume.hpp"

namespace qsmpad {

// Multi-channel 3D feature map, channel-major then x fastest.
struct FeatureTensor {
    int channels = 0;
    std::array<int, 3> dims{0, 0, 0};
    std::vector<double> data;

    FeatureTensor() = default;
    FeatureTensor(int c, const std::array<int, 3>& d, double fill = 0.0)
        : channels(c), dims(d),
          data(static_cast<std::size_t>(c) * d[0] * d[1] * d[2], fill) {}

    std::size_t voxels() const { return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]; }
    std::size_t size() const { return data.size(); }

    std::size_t index(int c, int x, int y, int z) const {
        return ((static_cast<std::size_t>(c) * dims[2] + z) * dims[1] + y) *
                   static_cast<std::size_t>(dims[0]) +
               x;
    }
    double at(int c, int x, int y, int z) const { return data[index(c, x, y, z)]; }
    double& at(int c, int x, int y, int z) { return data[index(c, x, y, z)]; }

    double* channel(int c) { return data.data() + static_cast<std::size_t>(c) * voxels(); }
    const double* channel(int c) const { return data.data() + static_cast<std::size_t>(c) * voxels(); }

    bool same_shape(const FeatureTensor& o) const {
        return channels == o.channels && dims == o.dims;
    }
};

// Single-channel views between the volume world and the tensor world.
FeatureTensor tensor_from_volume(const Volume3D& vol);
Volume3D volume_from_tensor(const FeatureTensor& t, const GridMeta& meta, int channel = 0);

} // namespace qsmpad
