#include "qsmpad/patches.hpp"

#include <string>

#include "qsmpad/rng.hpp"

namespace qsmpad {

PatchSampler::PatchSampler(const Mask3D& mask, const std::array<int, 3>& patch_size)
    : dims_(mask.meta.dims), patch_(patch_size) {
    for (int i = 0; i < 3; ++i) {
        if (patch_[i] < 1)
            throw ValidationError("patch size must be >= 1 on every axis");
        if (patch_[i] > dims_[i])
            throw ValidationError("patch size " + std::to_string(patch_[i]) +
                                  " exceeds volume dimension " + std::to_string(dims_[i]) +
                                  " on axis " + std::to_string(i));
    }
    if (mask.valid_count() == 0)
        throw ValidationError("patch sampling requires a nonempty mask");

    const int nx = dims_[0], ny = dims_[1], nz = dims_[2];
    sat_.assign(static_cast<std::size_t>(nx + 1) * (ny + 1) * (nz + 1), 0);
    auto sat = [&](int x, int y, int z) -> std::uint64_t& {
        return sat_[static_cast<std::size_t>(x) +
                    static_cast<std::size_t>(nx + 1) * (y + static_cast<std::size_t>(ny + 1) * z)];
    };
    for (int z = 1; z <= nz; ++z)
        for (int y = 1; y <= ny; ++y)
            for (int x = 1; x <= nx; ++x)
                sat(x, y, z) = mask.at(x - 1, y - 1, z - 1) + sat(x - 1, y, z) + sat(x, y - 1, z) +
                               sat(x, y, z - 1) - sat(x - 1, y - 1, z) - sat(x - 1, y, z - 1) -
                               sat(x, y - 1, z - 1) + sat(x - 1, y - 1, z - 1);
}

std::uint64_t PatchSampler::box_sum(int x0, int y0, int z0, int x1, int y1, int z1) const {
    const int nx = dims_[0], ny = dims_[1];
    auto sat = [&](int x, int y, int z) {
        return sat_[static_cast<std::size_t>(x) +
                    static_cast<std::size_t>(nx + 1) * (y + static_cast<std::size_t>(ny + 1) * z)];
    };
    return sat(x1, y1, z1) - sat(x0, y1, z1) - sat(x1, y0, z1) - sat(x1, y1, z0) + sat(x0, y0, z1) +
           sat(x0, y1, z0) + sat(x1, y0, z0) - sat(x0, y0, z0);
}

std::uint64_t PatchSampler::overlap_count(const std::array<int, 3>& o) const {
    return box_sum(o[0], o[1], o[2], o[0] + patch_[0], o[1] + patch_[1], o[2] + patch_[2]);
}

std::array<int, 3> PatchSampler::sample_origin(Rng& rng) const {
    const std::array<int, 3> span{dims_[0] - patch_[0] + 1, dims_[1] - patch_[1] + 1,
                                  dims_[2] - patch_[2] + 1};
    // Rejection sampling stays uniform over the admissible set; the
    // enumeration fallback handles masks so sparse that hits are rare.
    for (int attempt = 0; attempt < 4096; ++attempt) {
        std::array<int, 3> o{static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(span[0]))),
                             static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(span[1]))),
                             static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(span[2])))};
        if (admissible(o)) return o;
    }
    std::vector<std::array<int, 3>> admissible_set;
    for (int z = 0; z < span[2]; ++z)
        for (int y = 0; y < span[1]; ++y)
            for (int x = 0; x < span[0]; ++x)
                if (admissible({x, y, z})) admissible_set.push_back({x, y, z});
    // Nonempty mask guarantees at least one admissible origin.
    return admissible_set[rng.uniform_int(admissible_set.size())];
}

Volume3D crop_volume(const Volume3D& vol, const std::array<int, 3>& origin,
                     const std::array<int, 3>& size) {
    GridMeta meta = vol.meta;
    meta.dims = size;
    Volume3D out(meta);
    for (int z = 0; z < size[2]; ++z)
        for (int y = 0; y < size[1]; ++y)
            for (int x = 0; x < size[0]; ++x)
                out.at(x, y, z) = vol.at(origin[0] + x, origin[1] + y, origin[2] + z);
    return out;
}

Mask3D crop_mask(const Mask3D& mask, const std::array<int, 3>& origin,
                 const std::array<int, 3>& size) {
    GridMeta meta = mask.meta;
    meta.dims = size;
    Mask3D out(meta);
    for (int z = 0; z < size[2]; ++z)
        for (int y = 0; y < size[1]; ++y)
            for (int x = 0; x < size[0]; ++x)
                out.at(x, y, z) = mask.at(origin[0] + x, origin[1] + y, origin[2] + z);
    return out;
}

std::vector<Patch> extract_patches(const Volume3D& vol, const Mask3D& mask,
                                   const std::array<int, 3>& patch_size, int count,
                                   std::uint64_t seed) {
    if (!(vol.meta == mask.meta))
        throw ValidationError("extract_patches: volume and mask grids differ");
    if (count < 1) throw ValidationError("extract_patches: count must be positive");
    PatchSampler sampler(mask, patch_size);
    Rng rng(seed);
    std::vector<Patch> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        const auto origin = sampler.sample_origin(rng);
        out.push_back({crop_volume(vol, origin, patch_size), crop_mask(mask, origin, patch_size),
                       origin});
    }
    return out;
}

} // namespace qsmpad
