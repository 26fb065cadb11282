#include "qsmpad/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qsmpad/rng.hpp"

namespace qsmpad {

namespace {

void check_range(const RangeD& r, const char* name) {
    if (!(r.lo <= r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi))
        throw ValidationError(std::string("PhantomConfig: empty or non-finite range ") + name);
}

void check_range(const RangeI& r, const char* name) {
    if (r.lo > r.hi || r.lo < 0)
        throw ValidationError(std::string("PhantomConfig: bad count range ") + name);
}

// Trilinear sample with edge clamping, so constants stay constant under any warp.
double sample_trilinear(const Volume3D& v, double x, double y, double z) {
    const int nx = v.meta.dims[0], ny = v.meta.dims[1], nz = v.meta.dims[2];
    x = std::clamp(x, 0.0, static_cast<double>(nx - 1));
    y = std::clamp(y, 0.0, static_cast<double>(ny - 1));
    z = std::clamp(z, 0.0, static_cast<double>(nz - 1));
    const int x0 = std::min(static_cast<int>(x), nx - 1), y0 = std::min(static_cast<int>(y), ny - 1),
              z0 = std::min(static_cast<int>(z), nz - 1);
    const int x1 = std::min(x0 + 1, nx - 1), y1 = std::min(y0 + 1, ny - 1),
              z1 = std::min(z0 + 1, nz - 1);
    const double fx = x - x0, fy = y - y0, fz = z - z0;
    const double c00 = v.at(x0, y0, z0) * (1 - fx) + v.at(x1, y0, z0) * fx;
    const double c10 = v.at(x0, y1, z0) * (1 - fx) + v.at(x1, y1, z0) * fx;
    const double c01 = v.at(x0, y0, z1) * (1 - fx) + v.at(x1, y0, z1) * fx;
    const double c11 = v.at(x0, y1, z1) * (1 - fx) + v.at(x1, y1, z1) * fx;
    const double c0 = c00 * (1 - fy) + c10 * fy;
    const double c1 = c01 * (1 - fy) + c11 * fy;
    return c0 * (1 - fz) + c1 * fz;
}

std::uint8_t sample_nearest(const Mask3D& m, double x, double y, double z) {
    const int nx = m.meta.dims[0], ny = m.meta.dims[1], nz = m.meta.dims[2];
    const int xi = std::clamp(static_cast<int>(std::lround(x)), 0, nx - 1);
    const int yi = std::clamp(static_cast<int>(std::lround(y)), 0, ny - 1);
    const int zi = std::clamp(static_cast<int>(std::lround(z)), 0, nz - 1);
    return m.at(xi, yi, zi);
}

// Control lattice of per-axis offsets covering the volume; node (i,j,k) sits
// at voxel position i*spacing_vox etc.
struct ControlGrid {
    std::array<int, 3> nodes;
    std::array<double, 3> spacing_vox;
    std::vector<std::array<double, 3>> offsets_mm;

    std::array<double, 3> displacement_vox(double x, double y, double z,
                                           const std::array<double, 3>& voxel_size) const {
        std::array<double, 3> t, f;
        std::array<int, 3> i0;
        const std::array<double, 3> pos{x, y, z};
        for (int a = 0; a < 3; ++a) {
            const double u = pos[a] / spacing_vox[a];
            i0[a] = std::min(static_cast<int>(u), nodes[a] - 2);
            i0[a] = std::max(i0[a], 0);
            f[a] = std::clamp(u - i0[a], 0.0, 1.0);
            t[a] = 0.0;
        }
        std::array<double, 3> disp{0.0, 0.0, 0.0};
        for (int dz = 0; dz <= 1; ++dz)
            for (int dy = 0; dy <= 1; ++dy)
                for (int dx = 0; dx <= 1; ++dx) {
                    const double w = (dx ? f[0] : 1 - f[0]) * (dy ? f[1] : 1 - f[1]) *
                                     (dz ? f[2] : 1 - f[2]);
                    const auto& o =
                        offsets_mm[static_cast<std::size_t>(i0[0] + dx) +
                                   static_cast<std::size_t>(nodes[0]) *
                                       ((i0[1] + dy) +
                                        static_cast<std::size_t>(nodes[1]) * (i0[2] + dz))];
                    for (int a = 0; a < 3; ++a) disp[a] += w * o[a];
                }
        for (int a = 0; a < 3; ++a) disp[a] /= voxel_size[a]; // mm -> voxels
        return disp;
    }
};

ControlGrid make_control_grid(const GridMeta& meta, double grid_spacing_mm, double max_disp_mm,
                              Rng& rng) {
    ControlGrid g;
    for (int a = 0; a < 3; ++a) {
        g.spacing_vox[a] = grid_spacing_mm / meta.voxel_size[a];
        g.nodes[a] = static_cast<int>(std::ceil((meta.dims[a] - 1) / g.spacing_vox[a])) + 2;
    }
    g.offsets_mm.resize(static_cast<std::size_t>(g.nodes[0]) * g.nodes[1] * g.nodes[2]);
    for (auto& o : g.offsets_mm)
        for (int a = 0; a < 3; ++a) o[a] = rng.uniform(-max_disp_mm, max_disp_mm);
    return g;
}

void paint_sphere(Volume3D& vol, const SphereSource& s) {
    const auto& vs = vol.meta.voxel_size;
    const int nx = vol.meta.dims[0], ny = vol.meta.dims[1], nz = vol.meta.dims[2];
    const int rx = static_cast<int>(std::ceil(s.radius_mm / vs[0]));
    const int ry = static_cast<int>(std::ceil(s.radius_mm / vs[1]));
    const int rz = static_cast<int>(std::ceil(s.radius_mm / vs[2]));
    const int cx = static_cast<int>(std::lround(s.center_vox[0]));
    const int cy = static_cast<int>(std::lround(s.center_vox[1]));
    const int cz = static_cast<int>(std::lround(s.center_vox[2]));
    const double r2 = s.radius_mm * s.radius_mm;
    for (int z = std::max(0, cz - rz); z <= std::min(nz - 1, cz + rz); ++z)
        for (int y = std::max(0, cy - ry); y <= std::min(ny - 1, cy + ry); ++y)
            for (int x = std::max(0, cx - rx); x <= std::min(nx - 1, cx + rx); ++x) {
                const double dx = (x - s.center_vox[0]) * vs[0];
                const double dy = (y - s.center_vox[1]) * vs[1];
                const double dz = (z - s.center_vox[2]) * vs[2];
                if (dx * dx + dy * dy + dz * dz <= r2) vol.at(x, y, z) += s.chi_ppm;
            }
}

} // namespace

void PhantomConfig::validate() const {
    base_chi.validate();
    base_mask.validate();
    if (!(base_chi.meta == base_mask.meta))
        throw ValidationError("PhantomConfig: base chi and base mask grids differ");
    if (base_mask.valid_count() == 0)
        throw ValidationError("PhantomConfig: base mask is empty");
    check_range(contrast_gain, "contrast_gain");
    check_range(lesion_count, "lesion_count");
    check_range(lesion_radius_mm, "lesion_radius_mm");
    check_range(lesion_chi_ppm, "lesion_chi_ppm");
    check_range(background_count, "background_count");
    check_range(background_radius_mm, "background_radius_mm");
    check_range(background_chi_ppm, "background_chi_ppm");
    if (lesion_chi_ppm.lo < 0.0 || background_chi_ppm.lo < 0.0)
        throw ValidationError("PhantomConfig: susceptibility ranges are magnitudes, must be >= 0");
    if (background_count.hi > 0 && !(background_chi_ppm.lo > lesion_chi_ppm.hi))
        throw ValidationError(
            "PhantomConfig: background susceptibility magnitudes must exceed lesion magnitudes");
    const double min_vox = std::min({base_chi.meta.voxel_size[0], base_chi.meta.voxel_size[1],
                                     base_chi.meta.voxel_size[2]});
    if (elastic_grid_spacing_mm < 2.0 * min_vox)
        throw ValidationError("PhantomConfig: elastic grid spacing must be >= 2 voxels");
    if (!(elastic_max_disp_mm < elastic_grid_spacing_mm / 2.0) || elastic_max_disp_mm < 0.0)
        throw ValidationError("PhantomConfig: elastic max displacement must be < grid spacing / 2");
}

std::pair<Volume3D, Mask3D> elastic_transform(const Volume3D& vol, const Mask3D& mask,
                                              double grid_spacing_mm, double max_disp_mm,
                                              std::uint64_t seed) {
    vol.validate();
    if (!(vol.meta == mask.meta))
        throw ValidationError("elastic_transform: volume and mask grids differ");
    const double min_vox =
        std::min({vol.meta.voxel_size[0], vol.meta.voxel_size[1], vol.meta.voxel_size[2]});
    if (grid_spacing_mm < 2.0 * min_vox)
        throw ValidationError("elastic_transform: grid spacing must be >= 2 voxels");
    if (!(max_disp_mm >= 0.0) || !(max_disp_mm < grid_spacing_mm / 2.0))
        throw ValidationError("elastic_transform: max displacement must be in [0, grid_spacing/2)");

    if (max_disp_mm == 0.0) return {vol, mask};

    Rng rng(seed);
    const ControlGrid grid = make_control_grid(vol.meta, grid_spacing_mm, max_disp_mm, rng);

    Volume3D out_vol(vol.meta);
    Mask3D out_mask(mask.meta);
    const int nx = vol.meta.dims[0], ny = vol.meta.dims[1], nz = vol.meta.dims[2];
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                const auto d = grid.displacement_vox(x, y, z, vol.meta.voxel_size);
                const double sx = x + d[0], sy = y + d[1], sz = z + d[2];
                out_vol.at(x, y, z) = sample_trilinear(vol, sx, sy, sz);
                out_mask.at(x, y, z) = sample_nearest(mask, sx, sy, sz) ? 1 : 0;
            }
    return {out_vol, out_mask};
}

PhantomSample generate_phantom(const PhantomConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);

    auto [chi, brain_mask] = elastic_transform(config.base_chi, config.base_mask,
                                               config.elastic_grid_spacing_mm,
                                               config.elastic_max_disp_mm, rng.raw());

    const double gain = rng.uniform(config.contrast_gain.lo, config.contrast_gain.hi);
    for (double& v : chi.data) v *= gain;

    PhantomSample out;

    // Lesions: pseudo high-susceptibility sources inside the brain.
    const int n_lesion = static_cast<int>(rng.uniform_int(config.lesion_count.lo, config.lesion_count.hi));
    std::vector<std::size_t> valid_idx;
    for (std::size_t i = 0; i < brain_mask.data.size(); ++i)
        if (brain_mask.data[i]) valid_idx.push_back(i);
    const int nx = chi.meta.dims[0], ny = chi.meta.dims[1];
    for (int l = 0; l < n_lesion; ++l) {
        const std::size_t i = valid_idx[rng.uniform_int(valid_idx.size())];
        SphereSource s;
        s.center_vox = {static_cast<double>(i % nx), static_cast<double>((i / nx) % ny),
                        static_cast<double>(i / (static_cast<std::size_t>(nx) * ny))};
        s.radius_mm = rng.uniform(config.lesion_radius_mm.lo, config.lesion_radius_mm.hi);
        s.chi_ppm = rng.sign() * rng.uniform(config.lesion_chi_ppm.lo, config.lesion_chi_ppm.hi);
        paint_sphere(chi, s);
        out.lesions.push_back(s);
    }

    for (std::size_t i = 0; i < chi.data.size(); ++i)
        if (!brain_mask.data[i]) chi.data[i] = 0.0;

    // Background sources: large values, centers strictly outside the brain.
    Volume3D chi_bg(chi.meta);
    const int n_bg =
        static_cast<int>(rng.uniform_int(config.background_count.lo, config.background_count.hi));
    const std::size_t total = chi.meta.voxel_count();
    for (int b = 0; b < n_bg; ++b) {
        std::size_t i = 0;
        bool found = false;
        for (int attempt = 0; attempt < 65536; ++attempt) {
            i = rng.uniform_int(total);
            if (!brain_mask.data[i]) {
                found = true;
                break;
            }
        }
        if (!found)
            throw ValidationError("generate_phantom: could not place background source outside mask");
        SphereSource s;
        s.center_vox = {static_cast<double>(i % nx), static_cast<double>((i / nx) % ny),
                        static_cast<double>(i / (static_cast<std::size_t>(nx) * ny))};
        s.radius_mm = rng.uniform(config.background_radius_mm.lo, config.background_radius_mm.hi);
        s.chi_ppm =
            rng.sign() * rng.uniform(config.background_chi_ppm.lo, config.background_chi_ppm.hi);
        paint_sphere(chi_bg, s);
        out.background_sources.push_back(s);
    }
    // Clip spheres that spill into the brain; chi_background lives outside only.
    for (std::size_t i = 0; i < chi_bg.data.size(); ++i)
        if (brain_mask.data[i]) chi_bg.data[i] = 0.0;

    out.chi = std::move(chi);
    out.chi_background = std::move(chi_bg);
    out.brain_mask = std::move(brain_mask);
    return out;
}

std::pair<Volume3D, Mask3D> make_base_phantom(const GridMeta& meta, std::uint64_t seed) {
    meta.validate();
    Rng rng(seed);
    const int nx = meta.dims[0], ny = meta.dims[1], nz = meta.dims[2];
    const auto& vs = meta.voxel_size;

    // Ellipsoidal "brain" with semi-axes at 40% of each extent.
    const std::array<double, 3> center{(nx - 1) / 2.0, (ny - 1) / 2.0, (nz - 1) / 2.0};
    const std::array<double, 3> semi{0.40 * nx * vs[0], 0.40 * ny * vs[1], 0.40 * nz * vs[2]};
    Mask3D mask(meta);
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                const double ex = (x - center[0]) * vs[0] / semi[0];
                const double ey = (y - center[1]) * vs[1] / semi[1];
                const double ez = (z - center[2]) * vs[2] / semi[2];
                mask.at(x, y, z) = (ex * ex + ey * ey + ez * ez <= 1.0) ? 1 : 0;
            }

    // Smooth low-frequency texture: coarse lattice of normals, trilinearly
    // upsampled, about +-0.05 ppm.
    Volume3D chi(meta);
    const int coarse = 8; // voxels between texture nodes
    const std::array<int, 3> tn{nx / coarse + 2, ny / coarse + 2, nz / coarse + 2};
    std::vector<double> nodes(static_cast<std::size_t>(tn[0]) * tn[1] * tn[2]);
    for (auto& v : nodes) v = 0.05 * rng.normal();
    auto node_at = [&](int i, int j, int k) {
        return nodes[static_cast<std::size_t>(i) +
                     static_cast<std::size_t>(tn[0]) * (j + static_cast<std::size_t>(tn[1]) * k)];
    };
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                const double ux = static_cast<double>(x) / coarse;
                const double uy = static_cast<double>(y) / coarse;
                const double uz = static_cast<double>(z) / coarse;
                const int i0 = static_cast<int>(ux), j0 = static_cast<int>(uy),
                          k0 = static_cast<int>(uz);
                const double fx = ux - i0, fy = uy - j0, fz = uz - k0;
                double acc = 0.0;
                for (int dk = 0; dk <= 1; ++dk)
                    for (int dj = 0; dj <= 1; ++dj)
                        for (int di = 0; di <= 1; ++di)
                            acc += node_at(i0 + di, j0 + dj, k0 + dk) * (di ? fx : 1 - fx) *
                                   (dj ? fy : 1 - fy) * (dk ? fz : 1 - fz);
                chi.at(x, y, z) = acc;
            }

    // A few ellipsoidal structures mimicking deep gray nuclei.
    const int n_struct = 3 + static_cast<int>(rng.uniform_int(4));
    for (int s = 0; s < n_struct; ++s) {
        std::array<double, 3> c, a;
        for (int ax = 0; ax < 3; ++ax) {
            c[ax] = center[ax] + 0.5 * semi[ax] / vs[ax] * (2.0 * rng.uniform() - 1.0) * 0.8;
            a[ax] = rng.uniform(2.0, 6.0); // mm
        }
        const double value = rng.sign() * rng.uniform(0.05, 0.2);
        for (int z = 0; z < nz; ++z)
            for (int y = 0; y < ny; ++y)
                for (int x = 0; x < nx; ++x) {
                    const double ex = (x - c[0]) * vs[0] / a[0];
                    const double ey = (y - c[1]) * vs[1] / a[1];
                    const double ez = (z - c[2]) * vs[2] / a[2];
                    if (ex * ex + ey * ey + ez * ez <= 1.0) chi.at(x, y, z) += value;
                }
    }

    for (std::size_t i = 0; i < chi.data.size(); ++i)
        if (!mask.data[i]) chi.data[i] = 0.0;
    return {std::move(chi), std::move(mask)};
}

} // namespace qsmpad
