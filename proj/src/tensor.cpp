#include "qsmpad/tensor.hpp"

namespace qsmpad {

FeatureTensor tensor_from_volume(const Volume3D& vol) {
    FeatureTensor t(1, vol.meta.dims);
    t.data = vol.data;
    return t;
}

Volume3D volume_from_tensor(const FeatureTensor& t, const GridMeta& meta, int channel) {
    if (meta.dims != t.dims)
        throw ValidationError("volume_from_tensor: tensor dims differ from grid dims");
    if (channel < 0 || channel >= t.channels)
        throw ValidationError("volume_from_tensor: channel out of range");
    Volume3D v(meta);
    const double* src = t.channel(channel);
    std::copy(src, src + t.voxels(), v.data.begin());
    return v;
}

} // namespace qsmpad
