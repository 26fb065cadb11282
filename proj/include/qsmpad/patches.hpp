#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "qsmpad/volume.hpp"

namespace qsmpad {

struct Patch {
    Volume3D volume;
    Mask3D mask;
    std::array<int, 3> origin{0, 0, 0};
};

// Origins admissible for sampling: patch window overlaps at least one valid
// voxel. Sampling is uniform over that set and deterministic given the seed.
class PatchSampler {
public:
    PatchSampler(const Mask3D& mask, const std::array<int, 3>& patch_size);

    // Number of valid voxels inside the window at `origin`; O(1) via a
    // summed-area table.
    std::uint64_t overlap_count(const std::array<int, 3>& origin) const;

    bool admissible(const std::array<int, 3>& origin) const { return overlap_count(origin) > 0; }

    std::array<int, 3> sample_origin(class Rng& rng) const;

    const std::array<int, 3>& patch_size() const { return patch_; }

private:
    std::array<int, 3> dims_;
    std::array<int, 3> patch_;
    std::vector<std::uint64_t> sat_; // (nx+1)(ny+1)(nz+1) inclusive prefix sums
    std::uint64_t box_sum(int x0, int y0, int z0, int x1, int y1, int z1) const;
};

Volume3D crop_volume(const Volume3D& vol, const std::array<int, 3>& origin,
                     const std::array<int, 3>& size);
Mask3D crop_mask(const Mask3D& mask, const std::array<int, 3>& origin,
                 const std::array<int, 3>& size);

std::vector<Patch> extract_patches(const Volume3D& vol, const Mask3D& mask,
                                   const std::array<int, 3>& patch_size, int count,
                                   std::uint64_t seed);

} // namespace qsmpad
