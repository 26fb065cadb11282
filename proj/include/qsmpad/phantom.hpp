#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "qsmpad/volume.hpp"

namespace qsmpad {

struct RangeD {
    double lo = 0.0;
    double hi = 0.0;
};

struct RangeI {
    int lo = 0;
    int hi = 0;
};

struct SphereSource {
    std::array<double, 3> center_vox{0, 0, 0}; // voxel coordinates
    double radius_mm = 0.0;
    double chi_ppm = 0.0;
};

// Augmentation recipe around a seed susceptibility map. Susceptibility ranges
// are magnitudes; each source gets a random sign. Background magnitudes must
// exceed lesion magnitudes (background sources are the large ones).
struct PhantomConfig {
    Volume3D base_chi;
    Mask3D base_mask;

    double elastic_grid_spacing_mm = 16.0;
    double elastic_max_disp_mm = 4.0;

    RangeD contrast_gain{0.7, 1.3};

    RangeI lesion_count{0, 4};
    RangeD lesion_radius_mm{2.0, 6.0};
    RangeD lesion_chi_ppm{0.4, 1.2};

    RangeI background_count{10, 30};
    RangeD background_radius_mm{5.0, 15.0};
    RangeD background_chi_ppm{3.0, 15.0};

    void validate() const;
};

struct PhantomSample {
    Volume3D chi;            // ppm, zero outside brain_mask
    Volume3D chi_background; // ppm, nonzero only outside brain_mask
    Mask3D brain_mask;
    std::vector<SphereSource> lesions;
    std::vector<SphereSource> background_sources;
};

// Displacement field is trilinear interpolation of i.i.d. uniform control
// offsets in [-max_disp, max_disp]^3 mm; volume resampled trilinearly with
// edge clamping, mask with nearest neighbor. max_disp < grid_spacing/2 keeps
// the warp from folding over.
std::pair<Volume3D, Mask3D> elastic_transform(const Volume3D& vol, const Mask3D& mask,
                                              double grid_spacing_mm, double max_disp_mm,
                                              std::uint64_t seed);

// chi = lesioned(contrast(elastic(base))) restricted to the deformed base
// mask; chi_background painted outside it. Deterministic given seed.
PhantomSample generate_phantom(const PhantomConfig& config, std::uint64_t seed);

// Self-contained stand-in for an external seed map: ellipsoidal brain mask
// holding smooth low-frequency texture plus a few ellipsoidal structures.
std::pair<Volume3D, Mask3D> make_base_phantom(const GridMeta& meta, std::uint64_t seed);

} // namespace qsmpad
